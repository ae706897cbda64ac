//! Baseline classifier: cached hand-crafted descriptors and kNN, plus
//! import of externally produced predictions.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use kerbside_core::eval::{Fold, FoldClassifier};
use kerbside_core::features::{FeatureVector, extract_features};
use kerbside_core::frame::{Frame, FrameSet};
use kerbside_core::image::{MODEL_SIDE, preprocess};
use kerbside_core::knn::{KnnClassifier, Standardizer};
use kerbside_core::predictions::{PredictionError, PredictionSet};
use kerbside_core::taxonomy::{SurfaceClass, parse_surface_class};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imageio::read_image;

pub const DEFAULT_K: usize = 5;

/// Descriptor per frame id, computed once per dataset.
#[derive(Debug, Clone, Default)]
pub struct FeatureCache {
    features: BTreeMap<String, FeatureVector>,
}

impl FeatureCache {
    /// Reads, preprocesses and describes every frame image under `root`.
    /// Unreadable or missing images fail with the offending frame id.
    pub fn build(frames: &FrameSet, root: &Path) -> Result<Self> {
        let features = frames
            .frames()
            .par_iter()
            .map(|f| {
                let img = read_image(&root.join(&f.image_ref)).map_err(|e| match e {
                    Error::Io { .. } => Error::MissingImage(f.frame_id.clone()),
                    other => other,
                })?;
                let fv = extract_features(&preprocess(&img, MODEL_SIDE)?)?;
                Ok((f.frame_id.clone(), fv))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(FeatureCache { features })
    }

    pub fn from_map(features: BTreeMap<String, FeatureVector>) -> Self {
        FeatureCache { features }
    }

    pub fn get(&self, frame_id: &str) -> Result<&FeatureVector> {
        self.features
            .get(frame_id)
            .ok_or_else(|| Error::MissingImage(frame_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// A fitted baseline: scaler plus reference set.
pub struct Model {
    pub scaler: Standardizer,
    pub knn: KnnClassifier,
}

/// kNN over cached descriptors, retrained per fold on the fold's training
/// frames only. Descriptors are z-scored with training statistics.
pub struct BaselineClassifier<'a> {
    pub cache: &'a FeatureCache,
    pub k: usize,
}

impl<'a> BaselineClassifier<'a> {
    pub fn new(cache: &'a FeatureCache, k: usize) -> Self {
        BaselineClassifier { cache, k }
    }

    pub fn train(&self, train: &[&Frame]) -> Result<Model> {
        let scaler = Standardizer::fit(
            train
                .iter()
                .map(|f| self.cache.get(&f.frame_id))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let examples = train
            .iter()
            .map(|f| {
                let label = f
                    .true_label
                    .ok_or(Error::Eval(kerbside_core::eval::EvalError::UnlabeledFrames(1)))?;
                Ok((scaler.apply(self.cache.get(&f.frame_id)?)?, label))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Model {
            scaler,
            knn: KnnClassifier::train(examples, self.k)?,
        })
    }

    /// Predictions with confidences for `test`, in order.
    pub fn predict(&self, model: &Model, test: &[&Frame]) -> Result<Vec<(SurfaceClass, f64)>> {
        test.par_iter()
            .map(|f| {
                let p = model.knn.predict(&model.scaler.apply(self.cache.get(&f.frame_id)?)?)?;
                Ok((p.class, p.confidence))
            })
            .collect()
    }
}

impl FoldClassifier for BaselineClassifier<'_> {
    type Error = Error;

    fn classify(&mut self, _fold: &Fold, train: &[&Frame], test: &[&Frame]) -> Result<Vec<SurfaceClass>> {
        let model = self.train(train)?;
        Ok(self.predict(&model, test)?.into_iter().map(|(c, _)| c).collect())
    }
}

/// Predicts every frame of `frames` from its own image only; the result
/// does not depend on frame order or on other frames.
pub fn predict_frames(baseline: &BaselineClassifier, model: &Model, frames: &FrameSet, image_root: &Path) -> Result<PredictionSet> {
    let cache = FeatureCache::build(frames, image_root)?;
    let scorer = BaselineClassifier::new(&cache, baseline.k);
    let all: Vec<&Frame> = frames.iter().collect();
    let mut out = PredictionSet::new();
    for (f, (class, conf)) in all.iter().zip(scorer.predict(model, &all)?) {
        out.insert(f.frame_id.clone(), class, conf)?;
    }
    Ok(out)
}

/// Trains on `train_regions` and predicts every frame of `test_regions`.
pub fn predict_regions(
    frames: &FrameSet,
    cache: &FeatureCache,
    k: usize,
    train_regions: &BTreeSet<String>,
    test_regions: &BTreeSet<String>,
) -> Result<PredictionSet> {
    let pick = |set: &BTreeSet<String>| -> Vec<&Frame> {
        frames
            .iter()
            .filter(|f| f.region_id.as_ref().is_some_and(|r| set.contains(r)))
            .collect()
    };
    let baseline = BaselineClassifier::new(cache, k);
    let model = baseline.train(&pick(train_regions))?;
    let test = pick(test_regions);
    let mut out = PredictionSet::new();
    for (f, (class, conf)) in test.iter().zip(baseline.predict(&model, &test)?) {
        out.insert(f.frame_id.clone(), class, conf)?;
    }
    Ok(out)
}

pub const PREDICTION_HEADER: [&str; 3] = ["frame_id", "predicted_label", "confidence"];

/// Reads `frame_id,predicted_label[,confidence]`. Every id must exist in
/// `frames`; confidence defaults to 1.
pub fn read_predictions<R: Read>(reader: R, path: &Path, frames: &FrameSet) -> Result<PredictionSet> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = csv
        .headers()
        .map_err(|e| Error::parse(path, 1, "header", e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.len() < 2 || header.len() > 3 || header.iter().zip(PREDICTION_HEADER).any(|(a, b)| a != b) {
        return Err(Error::parse(path, 1, "header", "expected `frame_id,predicted_label[,confidence]`"));
    }
    let mut set = PredictionSet::new();
    for record in csv.records() {
        let record = record.map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line()), "*", e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("").trim();
        if frames.get(id).is_none() {
            return Err(PredictionError::UnknownFrameId(id.to_string()).into());
        }
        let label = parse_surface_class(record.get(1).unwrap_or("").trim())
            .map_err(|e| Error::parse(path, line, "predicted_label", e.to_string()))?;
        let confidence = match record.get(2).map(str::trim).filter(|s| !s.is_empty()) {
            None => 1.0,
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|c| (0.0..=1.0).contains(c))
                .ok_or_else(|| Error::parse(path, line, "confidence", format!("not in [0, 1]: {s:?}")))?,
        };
        set.insert(id, label, confidence)?;
    }
    Ok(set)
}

pub fn load_predictions(path: &Path, frames: &FrameSet) -> Result<PredictionSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(file, path, frames)
}

pub fn write_predictions<W: Write>(writer: W, predictions: &PredictionSet) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::Config(format!("csv write: {e}"));
    csv.write_record(PREDICTION_HEADER).map_err(wrap)?;
    for (id, p) in predictions.iter() {
        csv.write_record([id, p.class.canonical_name(), &format!("{:.6}", p.confidence)])
            .map_err(wrap)?;
    }
    csv.flush().map_err(|e| Error::Config(format!("csv write: {e}")))?;
    Ok(())
}
