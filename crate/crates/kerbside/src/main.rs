use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kerbside::classify::DEFAULT_K;
use kerbside::error::{Error, Result};
use kerbside::manifest::load_manifest;
use kerbside::pipeline::{DataSpec, EvalSpec, Job, Protocol, SegmentSpec, absolutize, execute, load_run};
use kerbside::service::{DEFAULT_PORT, ServiceState, resolve_port, serve};
use kerbside::synth::{DEFAULT_SEED, GeneratorConfig};
use kerbside_core::segment::{RouteModel, route_accuracy};

#[derive(Parser)]
#[command(name = "kerbside", version, about = "Street surface classification and accessibility mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Synth {
        /// Generator config JSON; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Add two single-region cities with this appearance shift.
        #[arg(long)]
        style_shift: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a manifest against regions and tabulate labels per region.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate the frame classifier.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Frame evaluation plus per-segment aggregation and the binary map.
    Streetwise {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        segments: SegmentArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write predicted segments as GeoJSON.
    ExportGeojson {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        segments: SegmentArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesise, evaluate, aggregate and export in one go.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        style_shift: Option<f64>,
        #[command(flatten)]
        eval: EvalArgs,
        #[command(flatten)]
        segments: SegmentArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-execute a recorded run.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Probability that a route of k segments is fully correct.
    RouteAccuracy {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        k: u32,
    },
    /// Serve the labelling API on localhost.
    Serve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        image_root: Option<PathBuf>,
        /// NDJSON label log; created if missing.
        #[arg(long)]
        labels: PathBuf,
        /// Overridden by KERBSIDE_PORT.
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    regions: PathBuf,
    /// Image root; defaults to the manifest's directory.
    #[arg(long)]
    image_root: Option<PathBuf>,
    /// CSV `frame_id,predicted_label[,confidence]` used instead of the baseline.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value = "loro")]
    protocol: Protocol,
    /// Only folds over this city's regions (conservative, loro).
    #[arg(long)]
    city: Option<String>,
    /// Conservative groups, e.g. `A,B;C,D;E,F`.
    #[arg(long, value_parser = parse_pairs)]
    pairs: Option<Groups>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Drop the transition class from frame metrics.
    #[arg(long)]
    no_transition: bool,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long, default_value_t = SegmentSpec::default().max_gap_ms)]
    max_gap_ms: i64,
    #[arg(long, default_value_t = SegmentSpec::default().max_jump_m)]
    max_jump_m: f64,
}

#[derive(Clone)]
struct Groups(Vec<Vec<String>>);

fn parse_pairs(s: &str) -> std::result::Result<Groups, String> {
    let groups: Vec<Vec<String>> = s
        .split(';')
        .map(|g| g.split(',').map(|r| r.trim().to_string()).filter(|r| !r.is_empty()).collect())
        .collect();
    if groups.iter().any(Vec::is_empty) {
        return Err("empty group".into());
    }
    Ok(Groups(groups))
}

impl From<DataArgs> for DataSpec {
    fn from(a: DataArgs) -> Self {
        DataSpec {
            manifest: a.manifest,
            regions: a.regions,
            images: a.image_root,
            predictions: a.predictions,
        }
    }
}

impl From<EvalArgs> for EvalSpec {
    fn from(a: EvalArgs) -> Self {
        EvalSpec {
            protocol: a.protocol,
            city: a.city,
            groups: a.pairs.map(|g| g.0),
            k: a.k,
            include_transition: !a.no_transition,
        }
    }
}

impl From<SegmentArgs> for SegmentSpec {
    fn from(a: SegmentArgs) -> Self {
        SegmentSpec {
            max_gap_ms: a.max_gap_ms,
            max_jump_m: a.max_jump_m,
            ..SegmentSpec::default()
        }
    }
}

fn generator(config: Option<&Path>, seed: Option<u64>, style_shift: Option<f64>) -> Result<GeneratorConfig> {
    let mut g = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)?
        }
        None => match style_shift {
            Some(s) => GeneratorConfig::three_cities(seed.unwrap_or(DEFAULT_SEED), s),
            None => GeneratorConfig::bremen_like(seed.unwrap_or(DEFAULT_SEED)),
        },
    };
    if let Some(s) = seed {
        g.seed = s;
    }
    if let (Some(shift), Some(_)) = (style_shift, config) {
        for city in g.cities.iter_mut().skip(1) {
            city.style_shift = shift;
        }
    }
    Ok(g)
}

fn run(cli: Cli) -> Result<()> {
    let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
    let (job, out) = match cli.command {
        Command::RouteAccuracy { p, k } => {
            let model = RouteModel::new(p, k)?;
            println!("{:.4}", route_accuracy(&model));
            return Ok(());
        }
        Command::Serve {
            manifest,
            image_root,
            labels,
            port,
        } => {
            let frames = load_manifest(&manifest)?;
            let root = image_root.unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default());
            let state = ServiceState::open(frames, root, &labels)?;
            let port = resolve_port(port)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Config(format!("tokio: {e}")))?;
            return runtime.block_on(serve(state, port));
        }
        Command::Run { config, out } => (load_run(&config)?.job, out),
        Command::Synth {
            config,
            seed,
            style_shift,
            out,
        } => (
            Job::Synth {
                generator: generator(config.as_deref(), seed, style_shift)?,
            },
            out,
        ),
        Command::Ingest { data, out } => (Job::Ingest { data: data.into() }, out),
        Command::Eval { data, eval, out } => (
            Job::Eval {
                data: data.into(),
                eval: eval.into(),
            },
            out,
        ),
        Command::Streetwise {
            data,
            eval,
            segments,
            out,
        } => (
            Job::Streetwise {
                data: data.into(),
                eval: eval.into(),
                segments: segments.into(),
            },
            out,
        ),
        Command::ExportGeojson {
            data,
            eval,
            segments,
            out,
        } => (
            Job::ExportGeojson {
                data: data.into(),
                eval: eval.into(),
                segments: segments.into(),
            },
            out,
        ),
        Command::Pipeline {
            config,
            seed,
            style_shift,
            eval,
            segments,
            out,
        } => (
            Job::Pipeline {
                generator: generator(config.as_deref(), seed, style_shift)?,
                eval: eval.into(),
                segments: segments.into(),
            },
            out,
        ),
    };
    let summary = execute(&absolutize(job, &cwd), &out)?;
    println!("{}", serde_json::to_string_pretty(&summary.headline)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::try_parse() {
        Err(e) if e.use_stderr() => {
            let err = Error::Config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            ExitCode::from(2)
        }
        Err(e) => {
            let _ = e.print();
            ExitCode::SUCCESS
        }
        Ok(cli) => match run(cli) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("{}", e.to_json());
                ExitCode::FAILURE
            }
        },
    }
}
