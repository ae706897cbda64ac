//! Job definitions and their execution. Every job writes `run.json` next to
//! its outputs; feeding that file back through [`replay`] reruns the same
//! job and reproduces the outputs byte for byte.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use kerbside_core::eval::{MetricsOptions, ProtocolResult, SplitProtocol, run_protocol, RunError};
use kerbside_core::frame::FrameSet;
use kerbside_core::geo::{AssignmentDiagnostics, assign_regions};
use kerbside_core::predictions::PredictionSet;
use kerbside_core::segment::{
    BinaryReport, Segment, SegmentationConfig, assign_predictions, binary_report_of, derive_segments,
    streetwise_report_of,
};
use kerbside_core::stats::{class_distribution, run_length_stats};
use kerbside_core::taxonomy::{CollapseTable, SurfaceClass, parse_surface_class};
use kerbside_core::EvaluationReport;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::classify::{BaselineClassifier, DEFAULT_K, FeatureCache, load_predictions, write_predictions};
use crate::error::{Error, Result};
use crate::geojson::export_geojson;
use crate::manifest::load_manifest;
use crate::regions::load_regions;
use crate::report::{
    binary_csv, binary_json, confusion_csv, distribution_csv, protocol_json, segment_confusion_csv, segments_json,
    write_json, write_text, evaluation_json,
};
use crate::synth::{GeneratorConfig, MANIFEST_FILE, REGIONS_FILE, generate};

pub const RUN_FILE: &str = "run.json";
pub const TOOL: &str = "kerbside";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Conservative,
    Loro,
    CrossCity,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conservative" => Ok(Protocol::Conservative),
            "loro" => Ok(Protocol::Loro),
            "cross-city" => Ok(Protocol::CrossCity),
            other => Err(Error::Config(format!("unknown protocol {other:?} (conservative|loro|cross-city)"))),
        }
    }
}

/// Where a job reads its frames from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub manifest: PathBuf,
    pub regions: PathBuf,
    /// Root for `image_ref`; defaults to the manifest's directory.
    #[serde(default)]
    pub images: Option<PathBuf>,
    /// External predictions instead of the baseline classifier.
    #[serde(default)]
    pub predictions: Option<PathBuf>,
}

impl DataSpec {
    pub fn image_root(&self) -> PathBuf {
        self.images.clone().unwrap_or_else(|| {
            self.manifest
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default()
        })
    }

    fn rebased(&self, base: &Path) -> DataSpec {
        let join = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        DataSpec {
            manifest: join(&self.manifest),
            regions: join(&self.regions),
            images: self.images.as_deref().map(join),
            predictions: self.predictions.as_deref().map(join),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    pub protocol: Protocol,
    /// Restrict conservative/LORO folds to one city's regions.
    #[serde(default)]
    pub city: Option<String>,
    /// Conservative groups; default pairs adjacent regions in file order
    /// and fails on an odd count.
    #[serde(default)]
    pub groups: Option<Vec<Vec<String>>>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "yes")]
    pub include_transition: bool,
}

fn default_k() -> usize {
    DEFAULT_K
}

fn yes() -> bool {
    true
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            protocol: Protocol::Loro,
            city: None,
            groups: None,
            k: DEFAULT_K,
            include_transition: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    #[serde(default = "default_gap")]
    pub max_gap_ms: i64,
    #[serde(default = "default_jump")]
    pub max_jump_m: f64,
    /// Classes that collapse to accessible.
    #[serde(default = "default_accessible")]
    pub accessible: Vec<String>,
}

fn default_gap() -> i64 {
    SegmentationConfig::default().max_gap_ms
}

fn default_jump() -> f64 {
    SegmentationConfig::default().max_jump_m
}

fn default_accessible() -> Vec<String> {
    vec!["asphalt".into(), "pavement".into()]
}

impl Default for SegmentSpec {
    fn default() -> Self {
        SegmentSpec {
            max_gap_ms: default_gap(),
            max_jump_m: default_jump(),
            accessible: default_accessible(),
        }
    }
}

impl SegmentSpec {
    pub fn config(&self) -> SegmentationConfig {
        SegmentationConfig {
            max_gap_ms: self.max_gap_ms,
            max_jump_m: self.max_jump_m,
        }
    }

    pub fn collapse(&self) -> Result<CollapseTable> {
        let classes = self
            .accessible
            .iter()
            .map(|c| parse_surface_class(c).map_err(|e| Error::Config(e.to_string())))
            .collect::<Result<Vec<SurfaceClass>>>()?;
        if classes.iter().any(|c| c.is_transition()) {
            return Err(Error::Config("transition cannot be accessible".into()));
        }
        Ok(CollapseTable::with_accessible(&classes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Job {
    Synth {
        generator: GeneratorConfig,
    },
    Ingest {
        data: DataSpec,
    },
    Eval {
        data: DataSpec,
        eval: EvalSpec,
    },
    Streetwise {
        data: DataSpec,
        eval: EvalSpec,
        #[serde(default)]
        segments: SegmentSpec,
    },
    ExportGeojson {
        data: DataSpec,
        eval: EvalSpec,
        #[serde(default)]
        segments: SegmentSpec,
    },
    /// Synthesises data under `out/data`, then runs streetwise and export.
    Pipeline {
        generator: GeneratorConfig,
        eval: EvalSpec,
        #[serde(default)]
        segments: SegmentSpec,
    },
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub job: Job,
}

impl RunRecord {
    pub fn new(job: Job) -> Self {
        RunRecord {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            job,
        }
    }
}

pub fn load_run(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let record: RunRecord = serde_json::from_str(&text)?;
    if record.tool != TOOL {
        return Err(Error::Config(format!("{} was not written by {TOOL}", path.display())));
    }
    Ok(record)
}

/// Reruns the job recorded at `run_path`. The CLI records absolute data
/// paths, so the record does not depend on the working directory.
pub fn replay(run_path: &Path, out_dir: &Path) -> Result<Summary> {
    execute(&load_run(run_path)?.job, out_dir)
}

/// Headline numbers of a finished job, for printing and tests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub outputs: Vec<PathBuf>,
    pub headline: serde_json::Value,
}

struct Out<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Out<'_> {
    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let path = self.dir.join(name);
        write_json(&path, value)?;
        self.written.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_text(&path, text)?;
        self.written.push(path);
        Ok(())
    }
}

pub fn execute(job: &Job, out_dir: &Path) -> Result<Summary> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut out = Out {
        dir: out_dir,
        written: Vec::new(),
    };
    let headline = match job {
        Job::Synth { generator } => {
            let ds = generate(generator, out_dir)?;
            json!({ "frames": ds.frames.len(), "regions": ds.regions.len() })
        }
        Job::Ingest { data } => ingest(data, &mut out)?,
        Job::Eval { data, eval } => {
            let ctx = Context::load(data, eval)?;
            let result = ctx.evaluate()?;
            write_protocol(&result, &mut out)?;
            json!({ "protocol": result.protocol, "pooled_macro_f1": result.pooled.macro_f1,
                    "mean_fold_macro_f1": result.mean_fold_macro_f1 })
        }
        Job::Streetwise { data, eval, segments } => {
            let ctx = Context::load(data, eval)?;
            let result = ctx.evaluate()?;
            write_protocol(&result, &mut out)?;
            let sw = streetwise(&ctx.frames, &result, segments)?;
            write_streetwise(&sw, segments, &mut out)?;
            sw.headline(&result)
        }
        Job::ExportGeojson { data, eval, segments } => {
            let ctx = Context::load(data, eval)?;
            let result = ctx.evaluate()?;
            let sw = streetwise(&ctx.frames, &result, segments)?;
            out.json("segments.geojson", &export_geojson(&sw.segments, &segments.collapse()?))?;
            json!({ "segments": sw.segments.len() })
        }
        Job::Pipeline { generator, eval, segments } => {
            let data_dir = out_dir.join("data");
            generate(generator, &data_dir)?;
            let data = DataSpec {
                manifest: data_dir.join(MANIFEST_FILE),
                regions: data_dir.join(REGIONS_FILE),
                images: None,
                predictions: None,
            };
            let ctx = Context::load(&data, eval)?;
            let result = ctx.evaluate()?;
            write_protocol(&result, &mut out)?;
            let sw = streetwise(&ctx.frames, &result, segments)?;
            write_streetwise(&sw, segments, &mut out)?;
            out.json("segments.geojson", &export_geojson(&sw.segments, &segments.collapse()?))?;
            sw.headline(&result)
        }
    };
    out.json(RUN_FILE, &serde_json::to_value(RunRecord::new(job.clone()))?)?;
    Ok(Summary {
        outputs: out.written,
        headline,
    })
}

/// Loads a manifest and tags frames with regions.
pub fn load_frames(data: &DataSpec) -> Result<(FrameSet, AssignmentDiagnostics)> {
    let frames = load_manifest(&data.manifest)?;
    let regions = load_regions(&data.regions)?;
    Ok(assign_regions(frames, &regions)?)
}

/// Loads `data` and runs the configured protocol, returning the
/// region-tagged frames with the result.
pub fn evaluate_data(data: &DataSpec, eval: &EvalSpec) -> Result<(FrameSet, ProtocolResult)> {
    let ctx = Context::load(data, eval)?;
    let result = ctx.evaluate()?;
    Ok((ctx.frames, result))
}

fn ingest(data: &DataSpec, out: &mut Out) -> Result<serde_json::Value> {
    let (frames, diagnostics) = load_frames(data)?;
    let table = class_distribution(&frames)?;
    out.text("distribution.csv", &distribution_csv(&table))?;
    let labels: Vec<SurfaceClass> = frames.iter().filter_map(|f| f.true_label).collect();
    let (runs, mean_run) = run_length_stats(&labels).unwrap_or((0, 0.0));
    let summary = json!({
        "frames": frames.len(),
        "unassigned": diagnostics.unassigned,
        "per_region": diagnostics.per_region.iter().map(|(r, n)| json!({ "region_id": r, "frames": n })).collect::<Vec<_>>(),
        "class_totals": SurfaceClass::ALL.iter().zip(table.class_totals()).map(|(c, n)| (c.canonical_name().to_string(), json!(n))).collect::<serde_json::Map<_, _>>(),
        "grand_total": table.grand_total(),
        "label_runs": runs,
        "mean_run_length": mean_run,
    });
    out.json("ingest.json", &summary)?;
    Ok(summary)
}

struct Context {
    frames: FrameSet,
    image_root: PathBuf,
    eval: EvalSpec,
    predictions: Option<PredictionSet>,
}

impl Context {
    fn load(data: &DataSpec, eval: &EvalSpec) -> Result<Self> {
        let (frames, _) = load_frames(data)?;
        let predictions = data
            .predictions
            .as_deref()
            .map(|p| load_predictions(p, &frames))
            .transpose()?;
        Ok(Context {
            frames,
            image_root: data.image_root(),
            eval: eval.clone(),
            predictions,
        })
    }

    fn protocol(&self) -> Result<SplitProtocol> {
        let in_city = |r: &&kerbside_core::frame::Region| self.eval.city.as_ref().is_none_or(|c| &r.city == c);
        let present: BTreeSet<String> = self.frames.iter().filter_map(|f| f.region_id.clone()).collect();
        let regions: Vec<String> = self
            .frames
            .regions()
            .iter()
            .filter(in_city)
            .map(|r| r.region_id.clone())
            .filter(|r| present.contains(r))
            .collect();
        if regions.is_empty() {
            return Err(Error::Config("no regions with frames to evaluate".into()));
        }
        Ok(match self.eval.protocol {
            Protocol::Loro => SplitProtocol::LeaveOneRegionOut { regions },
            Protocol::Conservative => SplitProtocol::Conservative {
                groups: match &self.eval.groups {
                    Some(groups) => groups.clone(),
                    None if regions.len().is_multiple_of(2) => regions.chunks(2).map(<[String]>::to_vec).collect(),
                    None => {
                        return Err(Error::Config(format!(
                            "conservative protocol needs region pairs; {} regions cannot be paired by default, pass --pairs",
                            regions.len()
                        )));
                    }
                },
            },
            Protocol::CrossCity => {
                let mut cities: Vec<String> = Vec::new();
                for r in self.frames.regions().iter().filter(|r| present.contains(&r.region_id)) {
                    if !cities.contains(&r.city) {
                        cities.push(r.city.clone());
                    }
                }
                SplitProtocol::CrossCity { cities }
            }
        })
    }

    fn evaluate(&self) -> Result<ProtocolResult> {
        let protocol = self.protocol()?;
        let options = MetricsOptions::with_transition(self.eval.include_transition);
        let result = match &self.predictions {
            Some(preds) => {
                let mut lookup = |_: &_, _: &[&_], test: &[&kerbside_core::Frame]| -> Result<Vec<SurfaceClass>> {
                    test.iter()
                        .map(|f| {
                            preds
                                .class_of(&f.frame_id)
                                .ok_or_else(|| Error::Config(format!("no prediction for frame {:?}", f.frame_id)))
                        })
                        .collect()
                };
                run_protocol(&self.frames, &protocol, &options, &mut lookup)
            }
            None => {
                let cache = FeatureCache::build(&self.frames, &self.image_root)?;
                let mut clf = BaselineClassifier::new(&cache, self.eval.k);
                run_protocol(&self.frames, &protocol, &options, &mut clf)
            }
        };
        result.map_err(|e| match e {
            RunError::Eval(e) => Error::Eval(e),
            RunError::Classifier(e) => e,
        })
    }
}

fn write_protocol(result: &ProtocolResult, out: &mut Out) -> Result<()> {
    out.json("report.json", &protocol_json(result))?;
    out.text("confusion_pooled.csv", &confusion_csv(&result.pooled.confusion))?;
    for f in &result.folds {
        out.text(&format!("confusion_{}.csv", sanitize(&f.fold.fold_id)), &confusion_csv(&f.report.confusion))?;
    }
    let preds: PredictionSet = result.predictions.iter().cloned().collect();
    let mut buf = Vec::new();
    write_predictions(&mut buf, &preds)?;
    out.text("predictions.csv", &String::from_utf8(buf).expect("csv is utf-8"))
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Segment-level outcome of a protocol run.
pub struct Streetwise {
    pub segments: Vec<Segment>,
    pub report: EvaluationReport,
    pub binary: BinaryReport,
}

impl Streetwise {
    fn headline(&self, result: &ProtocolResult) -> serde_json::Value {
        json!({
            "protocol": result.protocol,
            "framewise_macro_f1": result.pooled.macro_f1,
            "streetwise_macro_f1": self.report.macro_f1,
            "binary_f1": self.binary.f1,
            "segments": self.segments.len(),
        })
    }
}

/// Aggregates the out-of-fold predictions of `result` per segment.
pub fn streetwise(frames: &FrameSet, result: &ProtocolResult, spec: &SegmentSpec) -> Result<Streetwise> {
    let predictions: PredictionSet = result.predictions.iter().cloned().collect();
    let tested = FrameSet::with_regions(
        frames
            .iter()
            .filter(|f| predictions.get(&f.frame_id).is_some())
            .cloned()
            .collect(),
        frames.regions().clone(),
    )?;
    let table = spec.collapse()?;
    let segments = derive_segments(&tested, &spec.config())?;
    let segments = assign_predictions(&segments, &predictions, &table)?;
    Ok(Streetwise {
        report: streetwise_report_of(&segments)?,
        binary: binary_report_of(&segments, &table)?,
        segments,
    })
}

fn write_streetwise(sw: &Streetwise, spec: &SegmentSpec, out: &mut Out) -> Result<()> {
    let table = spec.collapse()?;
    out.json(
        "streetwise.json",
        &json!({
            "five_class": evaluation_json(&sw.report),
            "binary": binary_json(&sw.binary),
            "segments": segments_json(&sw.segments, &table),
        }),
    )?;
    out.text("segment_confusion_5class.csv", &segment_confusion_csv(&sw.report.confusion))?;
    out.text("segment_confusion_2class.csv", &binary_csv(&sw.binary))
}

/// Makes relative data paths in a job absolute against `base`.
pub fn absolutize(job: Job, base: &Path) -> Job {
    match job {
        Job::Ingest { data } => Job::Ingest { data: data.rebased(base) },
        Job::Eval { data, eval } => Job::Eval { data: data.rebased(base), eval },
        Job::Streetwise { data, eval, segments } => Job::Streetwise { data: data.rebased(base), eval, segments },
        Job::ExportGeojson { data, eval, segments } => Job::ExportGeojson { data: data.rebased(base), eval, segments },
        other => other,
    }
}
