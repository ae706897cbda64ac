//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p kerbside --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{CORPUS_COUNTS, CORPUS_GRAND_TOTAL, CORPUS_ROW_TOTALS, away_city_f1, corpus_data};
use kerbside::pipeline::{
    DataSpec, EvalSpec, Job, Protocol, RUN_FILE, RunRecord, SegmentSpec, evaluate_data, load_frames, replay, streetwise,
};
use kerbside::report::write_json;
use kerbside::synth::{DEFAULT_SEED, GeneratorConfig, LARGE_STYLE_SHIFT, generate};
use kerbside_core::eval::{Fold, SplitProtocol, confusion, make_folds, metrics, run_protocol};
use kerbside_core::frame::{Frame, FrameSet, GeoPoint, Region, RegionSet};
use kerbside_core::image::{Image, crop_to_square, preprocess, resize_bilinear};
use kerbside_core::segment::{RouteModel, aggregate_label, route_accuracy};
use kerbside_core::stats::class_distribution;
use kerbside_core::taxonomy::SurfaceClass;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn corpus_fixture() -> Check {
    let (frames, diag) = load_frames(&corpus_data()).map_err(|e| e.to_string())?;
    ensure(diag.unassigned == 0, || format!("{} frames outside every region", diag.unassigned))?;
    let table = class_distribution(&frames).map_err(|e| e.to_string())?;
    ensure(table.rows.len() == 8, || format!("{} rows", table.rows.len()))?;
    for ((region, counts), total) in CORPUS_COUNTS.iter().zip(CORPUS_ROW_TOTALS) {
        let row = table.row(region).ok_or(format!("region {region} missing"))?;
        for class in SurfaceClass::ALL {
            let got = row.count(class);
            ensure(got == counts[class.index()], || format!("{region}/{}: {got}", class.canonical_name()))?;
        }
        ensure(row.total() == total, || format!("{region} total {}", row.total()))?;
    }
    ensure(table.grand_total() == CORPUS_GRAND_TOTAL, || format!("grand total {}", table.grand_total()))?;
    Ok(format!("48 cells, 8 row totals, grand total {}", table.grand_total()))
}

fn route_model() -> Check {
    let p = route_accuracy(&RouteModel::new(0.952, 4).map_err(|e| e.to_string())?);
    ensure((p - 0.8214).abs() <= 1e-4, || format!("{p:.6}"))?;
    Ok(format!("route_accuracy(0.952, 4) = {p:.6}"))
}

fn square(id: &str, city: &str, i: usize) -> Region {
    let lat = i as f64;
    Region::new(
        id,
        city,
        vec![
            GeoPoint { lat, lon: 0.0 },
            GeoPoint { lat, lon: 0.5 },
            GeoPoint { lat: lat + 0.5, lon: 0.5 },
            GeoPoint { lat: lat + 0.5, lon: 0.0 },
        ],
    )
    .unwrap()
}

/// A fold with the frame ids it trained and tested on.
type Seen = (Fold, BTreeSet<String>, BTreeSet<String>);
type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Check + 'a>);

/// Records what every fold trained and tested on.
fn spy(frames: &FrameSet, protocol: &SplitProtocol) -> Result<Vec<Seen>, String> {
    let mut seen = Vec::new();
    let mut classifier = |fold: &Fold, train: &[&Frame], test: &[&Frame]| -> Result<Vec<SurfaceClass>, ()> {
        let ids = |fs: &[&Frame]| fs.iter().map(|f| f.frame_id.clone()).collect::<BTreeSet<_>>();
        seen.push((fold.clone(), ids(train), ids(test)));
        Ok(test.iter().map(|f| f.true_label.unwrap()).collect())
    };
    run_protocol(frames, protocol, &Default::default(), &mut classifier).map_err(|e| format!("{e:?}"))?;
    Ok(seen)
}

fn anti_leakage() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1eac);
    let mut folds_checked = 0;
    for trial in 0..1000 {
        let n_regions = rng.random_range(2..=12);
        let n_cities = rng.random_range(1..=4);
        let regions: Vec<Region> = (0..n_regions)
            .map(|i| square(&format!("R{i}"), &format!("C{}", rng.random_range(0..n_cities)), i))
            .collect();
        let mut frames = Vec::new();
        for r in &regions {
            for j in 0..rng.random_range(1..=15) {
                let label = SurfaceClass::ALL[rng.random_range(0..6)];
                frames.push(
                    Frame::new(format!("{}-{j}", r.region_id), j, GeoPoint { lat: 0.0, lon: 0.0 }, "x")
                        .with_region(r.region_id.clone())
                        .with_label(label),
                );
            }
        }
        let set = FrameSet::with_regions(frames, RegionSet::new(regions.clone()).unwrap()).map_err(|e| e.to_string())?;
        let region_of: BTreeMap<&str, &str> =
            set.iter().map(|f| (f.frame_id.as_str(), f.region_id.as_deref().unwrap())).collect();

        let mut ids: Vec<String> = regions.iter().map(|r| r.region_id.clone()).collect();
        let mut protocols = vec![SplitProtocol::LeaveOneRegionOut { regions: ids.clone() }];
        ids.shuffle(&mut rng);
        let mut groups = Vec::new();
        let mut rest = &ids[..];
        while !rest.is_empty() {
            let take = rng.random_range(1..=3).min(rest.len());
            groups.push(rest[..take].to_vec());
            rest = &rest[take..];
        }
        if groups.len() > 1 {
            protocols.push(SplitProtocol::Conservative { groups });
        }
        let cities: BTreeSet<String> = regions.iter().map(|r| r.city.clone()).collect();
        if cities.len() > 1 {
            protocols.push(SplitProtocol::CrossCity {
                cities: cities.into_iter().collect(),
            });
        }

        for protocol in &protocols {
            let seen = spy(&set, protocol)?;
            ensure(seen.len() == make_folds(&set, protocol).map_err(|e| format!("{e:?}"))?.len(), || {
                format!("trial {trial}: fold count")
            })?;
            let mut tested: BTreeMap<&str, usize> = BTreeMap::new();
            for (fold, train, test) in &seen {
                folds_checked += 1;
                ensure(fold.test_regions.is_disjoint(&fold.train_regions), || {
                    format!("trial {trial} {}: region on both sides of fold {}", protocol.name(), fold.fold_id)
                })?;
                ensure(train.is_disjoint(test), || {
                    format!("trial {trial} {}: frame on both sides of fold {}", protocol.name(), fold.fold_id)
                })?;
                for id in train {
                    ensure(fold.train_regions.contains(region_of[id.as_str()]), || format!("trial {trial}: stray training frame {id}"))?;
                }
                for id in test {
                    ensure(fold.test_regions.contains(region_of[id.as_str()]), || format!("trial {trial}: stray test frame {id}"))?;
                    *tested.entry(id.as_str()).or_default() += 1;
                }
            }
            if matches!(protocol, SplitProtocol::LeaveOneRegionOut { .. }) {
                ensure(tested.len() == set.len() && tested.values().all(|&n| n == 1), || {
                    format!("trial {trial}: LORO does not test every frame exactly once")
                })?;
            }
        }
    }
    Ok(format!("1000 assignments, {folds_checked} folds, no overlap"))
}

/// Per-class F1 and macro F1 (over classes present in `truth`) by direct counting.
fn brute_f1(truth: &[SurfaceClass], pred: &[SurfaceClass]) -> ([f64; 6], f64) {
    let mut f1 = [0.0; 6];
    let mut present = Vec::new();
    for c in SurfaceClass::ALL {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (t, p) in truth.iter().zip(pred) {
            match (*t == c, *p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        f1[c.index()] = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
        if tp + fn_ > 0 {
            present.push(f1[c.index()]);
        }
    }
    (f1, present.iter().sum::<f64>() / present.len() as f64)
}

fn metrics_oracle() -> Check {
    use SurfaceClass::{Asphalt as A, Cobblestone as B};
    let report = metrics(&confusion(&[A, A, B, B], &[A, B, B, B]).unwrap()).unwrap();
    let fa = report.class(A).unwrap().f1;
    let fb = report.class(B).unwrap().f1;
    ensure((fa - 2.0 / 3.0).abs() <= 1e-9 && (fb - 0.8).abs() <= 1e-9, || format!("f1(A)={fa}, f1(B)={fb}"))?;
    ensure((report.macro_f1 - 0.7333).abs() <= 1e-4 && (report.macro_f1 - 11.0 / 15.0).abs() <= 1e-9, || {
        format!("macro {}", report.macro_f1)
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(0xf1);
    for i in 0..10_000 {
        let n = rng.random_range(1..=60);
        let draw = |rng: &mut ChaCha8Rng| SurfaceClass::ALL[rng.random_range(0..6)];
        let truth: Vec<SurfaceClass> = (0..n).map(|_| draw(&mut rng)).collect();
        let pred: Vec<SurfaceClass> = (0..n).map(|_| draw(&mut rng)).collect();
        let report = metrics(&confusion(&truth, &pred).unwrap()).unwrap();
        let (f1, macro_f1) = brute_f1(&truth, &pred);
        for c in SurfaceClass::ALL {
            let got = report.class(c).unwrap().f1;
            ensure((got - f1[c.index()]).abs() <= 1e-9, || format!("instance {i}: f1({c:?}) {got} vs {}", f1[c.index()]))?;
        }
        ensure((report.macro_f1 - macro_f1).abs() <= 1e-9, || format!("instance {i}: macro {} vs {macro_f1}", report.macro_f1))?;
    }
    Ok(format!("f1(A)={fa:.4}, f1(B)={fb:.4}, macro={:.4}; 10000 random instances agree", report.macro_f1))
}

/// Plurality over non-transition labels; ties go first to inaccessible
/// surfaces (cobblestone, grass, ground_unimproved), then canonical order.
fn exhaustive_plurality(labels: &[usize]) -> Option<usize> {
    const INACCESSIBLE: [bool; 5] = [false, true, true, true, false];
    let mut counts = [0usize; 5];
    for &l in labels.iter().filter(|&&l| l < 5) {
        counts[l] += 1;
    }
    let best = *counts.iter().max().unwrap();
    if best == 0 {
        return None;
    }
    let tied: Vec<usize> = (0..5).filter(|&c| counts[c] == best).collect();
    tied.iter().copied().find(|&c| INACCESSIBLE[c]).or(tied.first().copied())
}

fn aggregation_oracle() -> Check {
    let mut checked = 0u64;
    let mut labels = Vec::with_capacity(8);
    let mut classes = Vec::with_capacity(8);
    for len in 0..=8u32 {
        for code in 0..6u64.pow(len) {
            labels.clear();
            classes.clear();
            let mut rest = code;
            for _ in 0..len {
                labels.push((rest % 6) as usize);
                classes.push(SurfaceClass::ALL[(rest % 6) as usize]);
                rest /= 6;
            }
            let got = aggregate_label(&classes).ok().map(SurfaceClass::index);
            let want = exhaustive_plurality(&labels);
            ensure(got == want, || format!("{classes:?}: {got:?} vs {want:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} sequences of length 0..=8"))
}

fn preprocessing_golden() -> Check {
    let portrait = Image::from_fn(480, 640, |x, y| ((x * 7 + y * 13) % 256) as u8);
    let crop = crop_to_square(&portrait).map_err(|e| e.to_string())?;
    ensure((crop.width(), crop.height()) == (480, 480), || format!("crop {}x{}", crop.width(), crop.height()))?;
    ensure(crop.pixels() == &portrait.pixels()[..480 * 480], || "crop is not the top 480 rows".into())?;

    let flat = preprocess(&Image::filled(480, 640, 137), 224).map_err(|e| e.to_string())?;
    ensure((flat.width(), flat.height()) == (224, 224) && flat.pixels().iter().all(|&p| p == 137), || {
        "constant image not constant after preprocessing".into()
    })?;
    for target in [1, 3, 100, 224, 479, 480, 700] {
        let out = resize_bilinear(&Image::filled(480, 480, 59), target).map_err(|e| e.to_string())?;
        ensure(out.pixels().iter().all(|&p| p == 59), || format!("constant resize to {target}"))?;
    }

    let tiny = Image::gray(2, 2, vec![0, 2, 4, 6]).map_err(|e| e.to_string())?;
    let one = resize_bilinear(&tiny, 1).map_err(|e| e.to_string())?;
    ensure(one.pixels() == [3], || format!("2x2 -> 1x1 gave {:?}", one.pixels()))?;
    Ok("480x640 crop, constant resize, [[0,2],[4,6]] -> [3]".into())
}

fn end_to_end(scratch: &Path) -> Check {
    let config = GeneratorConfig::three_cities(DEFAULT_SEED, LARGE_STYLE_SHIFT);
    let ds = generate(&config, &scratch.join("three_cities")).map_err(|e| e.to_string())?;
    let data = DataSpec {
        manifest: ds.manifest_path,
        regions: ds.regions_path,
        images: None,
        predictions: None,
    };
    let run = |protocol, city: Option<&str>| {
        let eval = EvalSpec {
            protocol,
            city: city.map(str::to_string),
            ..EvalSpec::default()
        };
        evaluate_data(&data, &eval).map_err(|e| e.to_string())
    };
    let (_, conservative) = run(Protocol::Conservative, Some("Bremen"))?;
    let (frames, loro) = run(Protocol::Loro, Some("Bremen"))?;
    let sw = streetwise(&frames, &loro, &SegmentSpec::default()).map_err(|e| e.to_string())?;
    let (_, cross) = run(Protocol::CrossCity, None)?;

    let cons_f1 = conservative.pooled.macro_f1;
    let loro_f1 = loro.pooled.macro_f1;
    let street_f1 = sw.report.macro_f1;
    let binary_f1 = sw.binary.f1;
    let cross_f1 = away_city_f1(&cross, "Bremen");
    let detail = format!(
        "conservative {cons_f1:.4}, loro {loro_f1:.4}, streetwise {street_f1:.4}, binary {binary_f1:.4}, cross-city {cross_f1:.4} (shift {LARGE_STYLE_SHIFT})"
    );
    // Written so that a NaN anywhere fails.
    let orderings = [
        (cons_f1 <= loro_f1, "a: conservative > loro"),
        (street_f1 >= loro_f1, "b: streetwise < framewise"),
        (binary_f1 >= street_f1, "c: binary < streetwise"),
        (cross_f1 < loro_f1, "d: cross-city not below within-city"),
    ];
    let failed: Vec<&str> = orderings.iter().filter(|(ok, _)| !ok).map(|(_, what)| *what).collect();
    if failed.is_empty() { Ok(detail) } else { Err(format!("{}; {detail}", failed.join(", "))) }
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism(scratch: &Path) -> Check {
    let job = Job::Pipeline {
        generator: GeneratorConfig::bremen_like(DEFAULT_SEED),
        eval: EvalSpec::default(),
        segments: SegmentSpec::default(),
    };
    let run_json = scratch.join(RUN_FILE);
    write_json(&run_json, &serde_json::to_value(RunRecord::new(job)).unwrap()).map_err(|e| e.to_string())?;
    let (a, b) = (scratch.join("run_a"), scratch.join("run_b"));
    replay(&run_json, &a).map_err(|e| e.to_string())?;
    replay(&run_json, &b).map_err(|e| e.to_string())?;
    let (ta, tb) = (tree(&a), tree(&b));
    ensure(ta.keys().eq(tb.keys()), || "different file sets".into())?;
    for (name, bytes) in &ta {
        ensure(&tb[name] == bytes, || format!("{} differs", name.display()))?;
    }
    for required in ["report.json", "streetwise.json", "segments.geojson", "predictions.csv", RUN_FILE] {
        ensure(ta.contains_key(Path::new(required)), || format!("{required} missing"))?;
    }
    ensure(ta[Path::new(RUN_FILE)] == std::fs::read(&run_json).unwrap(), || "run.json not reproduced".into())?;
    Ok(format!("{} files byte-identical across two replays", ta.len()))
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temp dir");
    let s = scratch.path();
    let criteria: Vec<Criterion> = vec![
        ("1 corpus-fixture", Duration::from_secs(5), Box::new(corpus_fixture)),
        ("2 route-model", Duration::MAX, Box::new(route_model)),
        ("3 anti-leakage", Duration::from_secs(10), Box::new(anti_leakage)),
        ("4 metrics-oracle", Duration::from_secs(10), Box::new(metrics_oracle)),
        ("5 aggregation-oracle", Duration::from_secs(60), Box::new(aggregation_oracle)),
        ("6 preprocessing-golden", Duration::MAX, Box::new(preprocessing_golden)),
        ("7 end-to-end-orderings", Duration::from_secs(300), Box::new(move || end_to_end(s))),
        ("8 determinism", Duration::MAX, Box::new(move || determinism(s))),
    ];
    let mut failures = 0;
    for (name, budget, check) in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or("panic".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > *budget => Err(format!("took {:.1} s, budget {} s; {detail}", elapsed.as_secs_f64(), budget.as_secs())),
            other => other,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag}  {name:<24} {:>7.2} s  {detail}", elapsed.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
