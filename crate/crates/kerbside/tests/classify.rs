mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use common::tiny_config;
use kerbside::classify::{BaselineClassifier, DEFAULT_K, FeatureCache, Model, predict_frames};
use kerbside::pipeline::{DataSpec, EvalSpec, evaluate_data};
use kerbside::synth::{Dataset, generate};
use kerbside_core::frame::{Frame, FrameSet};
use kerbside_core::taxonomy::SurfaceClass;

fn in_regions(frames: &FrameSet, regions: &[&str]) -> Vec<Frame> {
    frames
        .iter()
        .filter(|f| f.region_id.as_deref().is_some_and(|r| regions.contains(&r)))
        .cloned()
        .collect()
}

/// Model trained on regions A and B of `ds`.
fn trained(ds: &Dataset) -> (FeatureCache, Vec<Frame>) {
    let train = FrameSet::new(in_regions(&ds.frames, &["A", "B"])).unwrap();
    let cache = FeatureCache::build(&train, &ds.image_root).unwrap();
    (cache, train.into_frames())
}

fn model(cache: &FeatureCache, train: &[Frame]) -> Model {
    let refs: Vec<&Frame> = train.iter().collect();
    BaselineClassifier::new(cache, DEFAULT_K).train(&refs).unwrap()
}

fn copy_images(frames: &[Frame], from: &Path, to: &Path) {
    for f in frames {
        let dst = to.join(&f.image_ref);
        std::fs::create_dir_all(dst.parent().unwrap()).unwrap();
        std::fs::copy(from.join(&f.image_ref), dst).unwrap();
    }
}

#[test]
fn predictions_ignore_order_and_neighbours() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate(&tiny_config(21), &dir.path().join("data")).unwrap();
    let (cache, train) = trained(&ds);
    let m = model(&cache, &train);
    let baseline = BaselineClassifier::new(&cache, DEFAULT_K);

    let test = in_regions(&ds.frames, &["C", "D"]);
    let forward = predict_frames(&baseline, &m, &FrameSet::new(test.clone()).unwrap(), &ds.image_root).unwrap();
    assert_eq!(forward.len(), test.len());
    let mut shuffled = test.clone();
    shuffled.reverse();
    shuffled.rotate_left(test.len() / 3);
    let permuted = predict_frames(&baseline, &m, &FrameSet::new(shuffled).unwrap(), &ds.image_root).unwrap();
    assert_eq!(forward, permuted);

    // Overwrite one frame's image with that of a frame predicted differently.
    let (victim, donor) = test
        .iter()
        .flat_map(|a| test.iter().map(move |b| (a, b)))
        .find(|(a, b)| forward.class_of(&a.frame_id) != forward.class_of(&b.frame_id))
        .expect("test regions contain more than one predicted class");
    let mutated_root = dir.path().join("mutated");
    copy_images(&test, &ds.image_root, &mutated_root);
    std::fs::copy(ds.image_root.join(&donor.image_ref), mutated_root.join(&victim.image_ref)).unwrap();
    let after = predict_frames(&baseline, &m, &FrameSet::new(test.clone()).unwrap(), &mutated_root).unwrap();
    for f in &test {
        if f.frame_id == victim.frame_id {
            assert_eq!(after.get(&f.frame_id), forward.get(&donor.frame_id));
            assert_ne!(after.class_of(&f.frame_id), forward.class_of(&f.frame_id));
        } else {
            assert_eq!(after.get(&f.frame_id), forward.get(&f.frame_id), "{}", f.frame_id);
        }
    }

    let empty = predict_frames(&baseline, &m, &FrameSet::new(Vec::new()).unwrap(), &ds.image_root).unwrap();
    assert!(empty.is_empty());
}

#[test]
fn missing_image_is_reported_by_frame() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate(&tiny_config(22), dir.path()).unwrap();
    let victim = ds.frames.iter().nth(3).unwrap();
    std::fs::remove_file(dir.path().join(&victim.image_ref)).unwrap();
    let err = FeatureCache::build(&ds.frames, &ds.image_root).unwrap_err();
    assert_eq!(err.code(), "missing_image");
    assert!(err.to_string().contains(&victim.frame_id));
}

#[test]
fn two_well_separated_classes_are_learned() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_config(23);
    config.class_mix = BTreeMap::from([("asphalt".into(), 1.0), ("grass".into(), 1.0)]);
    config.segments_per_region = 6;
    let ds = generate(&config, dir.path()).unwrap();
    let data = DataSpec {
        manifest: ds.manifest_path,
        regions: ds.regions_path,
        images: None,
        predictions: None,
    };
    let (frames, result) = evaluate_data(&data, &EvalSpec::default()).unwrap();
    assert_eq!(result.predictions.len(), frames.len());
    let present: BTreeSet<SurfaceClass> = frames.iter().filter_map(|f| f.true_label).collect();
    assert!(present.contains(&SurfaceClass::Asphalt) && present.contains(&SurfaceClass::Grass));
    let correct = result
        .predictions
        .iter()
        .filter(|(id, p)| frames.get(id).unwrap().true_label == Some(*p))
        .count();
    let accuracy = correct as f64 / frames.len() as f64;
    assert!(accuracy >= 0.95, "per-frame accuracy {accuracy:.4}");
}
