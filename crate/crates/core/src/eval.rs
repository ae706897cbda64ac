//! Region-aware split protocols, confusion matrices and F1 reports.
//!
//! No protocol here ever places one region in both the training and the
//! testing side of a fold; random k-fold splitting over frames is
//! deliberately absent because neighbouring frames are near-duplicates.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::frame::{Frame, FrameSet};
use crate::taxonomy::SurfaceClass;

const N: usize = SurfaceClass::COUNT;

/// How regions are grouped into folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitProtocol {
    /// Each group (usually a pair of adjacent regions) is tested together
    /// and trained on the remaining groups only.
    Conservative { groups: Vec<Vec<String>> },
    /// One fold per region; training is every other listed region.
    LeaveOneRegionOut { regions: Vec<String> },
    /// One fold per city; training is every region of the other cities.
    CrossCity { cities: Vec<String> },
}

impl SplitProtocol {
    /// The fixed Bremen pairing: S1 = {A, B}, S2 = {C, D}, S3 = {E, F}.
    pub fn bremen_conservative() -> Self {
        let pair = |a: &str, b: &str| alloc::vec![a.to_string(), b.to_string()];
        SplitProtocol::Conservative {
            groups: alloc::vec![pair("A", "B"), pair("C", "D"), pair("E", "F")],
        }
    }

    /// Short machine name used in reports and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            SplitProtocol::Conservative { .. } => "conservative",
            SplitProtocol::LeaveOneRegionOut { .. } => "loro",
            SplitProtocol::CrossCity { .. } => "cross-city",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub fold_id: String,
    pub test_regions: BTreeSet<String>,
    pub train_regions: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    UnknownRegion(String),
    UnknownCity(String),
    EmptyRegion(String),
    /// A region appears twice in a protocol or on both sides of a fold.
    OverlapViolation(String),
    /// A fold has nothing to train on.
    EmptyTraining(String),
    LengthMismatch { truth: usize, pred: usize },
    EmptyInput,
    EmptyMatrix,
    UnlabeledFrames(usize),
    /// The classifier returned the wrong number of predictions for a fold.
    PredictionCount { fold_id: String, expected: usize, actual: usize },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::UnknownRegion(r) => write!(f, "unknown region {r:?}"),
            EvalError::UnknownCity(c) => write!(f, "no region belongs to city {c:?}"),
            EvalError::EmptyRegion(r) => write!(f, "region {r:?} has no frames"),
            EvalError::OverlapViolation(r) => write!(f, "region {r:?} is used more than once"),
            EvalError::EmptyTraining(id) => write!(f, "fold {id:?} has no training regions"),
            EvalError::LengthMismatch { truth, pred } => {
                write!(f, "{truth} true labels but {pred} predictions")
            }
            EvalError::EmptyInput => f.write_str("no items to evaluate"),
            EvalError::EmptyMatrix => f.write_str("confusion matrix is empty"),
            EvalError::UnlabeledFrames(n) => write!(f, "{n} frames in scope lack a true label"),
            EvalError::PredictionCount { fold_id, expected, actual } => write!(
                f,
                "fold {fold_id:?}: classifier returned {actual} predictions for {expected} frames"
            ),
        }
    }
}

impl core::error::Error for EvalError {}

fn frames_per_region(frames: &FrameSet) -> BTreeMap<&str, usize> {
    let mut counts = BTreeMap::new();
    for f in frames {
        if let Some(r) = f.region_id.as_deref() {
            *counts.entry(r).or_insert(0) += 1;
        }
    }
    counts
}

fn check_region(counts: &BTreeMap<&str, usize>, frames: &FrameSet, region: &str) -> Result<(), EvalError> {
    if frames.regions().get(region).is_none() && !counts.contains_key(region) {
        return Err(EvalError::UnknownRegion(region.into()));
    }
    if counts.get(region).copied().unwrap_or(0) == 0 {
        return Err(EvalError::EmptyRegion(region.into()));
    }
    Ok(())
}

fn fold(id: String, test: BTreeSet<String>, all: &BTreeSet<String>) -> Result<Fold, EvalError> {
    let train: BTreeSet<String> = all.difference(&test).cloned().collect();
    if let Some(r) = test.intersection(&train).next() {
        return Err(EvalError::OverlapViolation(r.clone()));
    }
    if train.is_empty() {
        return Err(EvalError::EmptyTraining(id));
    }
    Ok(Fold {
        fold_id: id,
        test_regions: test,
        train_regions: train,
    })
}

/// Expands a protocol into folds over the regions present in `frames`.
pub fn make_folds(frames: &FrameSet, protocol: &SplitProtocol) -> Result<Vec<Fold>, EvalError> {
    let counts = frames_per_region(frames);
    match protocol {
        SplitProtocol::Conservative { groups } => {
            let mut all = BTreeSet::new();
            for region in groups.iter().flatten() {
                check_region(&counts, frames, region)?;
                if !all.insert(region.clone()) {
                    return Err(EvalError::OverlapViolation(region.clone()));
                }
            }
            groups
                .iter()
                .enumerate()
                .map(|(i, g)| fold(alloc::format!("S{}", i + 1), g.iter().cloned().collect(), &all))
                .collect()
        }
        SplitProtocol::LeaveOneRegionOut { regions } => {
            let mut all = BTreeSet::new();
            for region in regions {
                check_region(&counts, frames, region)?;
                if !all.insert(region.clone()) {
                    return Err(EvalError::OverlapViolation(region.clone()));
                }
            }
            regions
                .iter()
                .map(|r| fold(r.clone(), BTreeSet::from([r.clone()]), &all))
                .collect()
        }
        SplitProtocol::CrossCity { cities } => {
            let mut by_city: Vec<(String, BTreeSet<String>)> = Vec::new();
            let mut all = BTreeSet::new();
            for city in cities {
                if by_city.iter().any(|(c, _)| c == city) {
                    return Err(EvalError::OverlapViolation(city.clone()));
                }
                let members: BTreeSet<String> = frames
                    .regions()
                    .iter()
                    .filter(|r| &r.city == city && counts.contains_key(r.region_id.as_str()))
                    .map(|r| r.region_id.clone())
                    .collect();
                if members.is_empty() {
                    return Err(EvalError::UnknownCity(city.clone()));
                }
                all.extend(members.iter().cloned());
                by_city.push((city.clone(), members));
            }
            by_city
                .into_iter()
                .map(|(city, members)| fold(city, members, &all))
                .collect()
        }
    }
}

/// Square matrix indexed `[true][predicted]` in canonical class order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    counts: [[u64; N]; N],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: [[u64; N]; N]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn add(&mut self, truth: SurfaceClass, pred: SurfaceClass) {
        self.counts[truth.index()][pred.index()] += 1;
    }

    pub fn get(&self, truth: SurfaceClass, pred: SurfaceClass) -> u64 {
        self.counts[truth.index()][pred.index()]
    }

    pub fn counts(&self) -> &[[u64; N]; N] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Row sum: items whose true class is `class`.
    pub fn support(&self, class: SurfaceClass) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    pub fn predicted(&self, class: SurfaceClass) -> u64 {
        self.counts.iter().map(|row| row[class.index()]).sum()
    }

    pub fn correct(&self) -> u64 {
        (0..N).map(|i| self.counts[i][i]).sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
    }
}

/// Tallies paired labels into a matrix.
pub fn confusion(truth: &[SurfaceClass], pred: &[SurfaceClass]) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut m = ConfusionMatrix::new();
    for (t, p) in truth.iter().zip(pred) {
        m.add(*t, *p);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub class: SurfaceClass,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Which classes a report covers and whether Transition enters the macro mean.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsOptions {
    pub classes: Vec<SurfaceClass>,
}

impl MetricsOptions {
    /// All six classes.
    pub fn framewise() -> Self {
        MetricsOptions {
            classes: SurfaceClass::ALL.to_vec(),
        }
    }

    /// The five surfaces.
    pub fn surfaces() -> Self {
        MetricsOptions {
            classes: SurfaceClass::SURFACES.to_vec(),
        }
    }

    pub fn with_transition(include: bool) -> Self {
        if include {
            Self::framewise()
        } else {
            Self::surfaces()
        }
    }
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self::framewise()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub protocol: String,
    pub fold_id: String,
    pub confusion: ConfusionMatrix,
    /// One entry per class in the report's class space.
    pub per_class: Vec<ClassMetrics>,
    /// Unweighted mean F1 over classes with positive support.
    pub macro_f1: f64,
    pub accuracy: f64,
}

impl EvaluationReport {
    pub fn class(&self, class: SurfaceClass) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|m| m.class == class)
    }

    pub fn with_labels(mut self, protocol: impl Into<String>, fold_id: impl Into<String>) -> Self {
        self.protocol = protocol.into();
        self.fold_id = fold_id.into();
        self
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 { 0.0 } else { num as f64 / den as f64 }
}

/// Precision, recall, F1 for one class given raw counts; zero denominators
/// give zero.
pub fn precision_recall_f1(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Six-class report with Transition included.
pub fn metrics(matrix: &ConfusionMatrix) -> Result<EvaluationReport, EvalError> {
    metrics_with(matrix, &MetricsOptions::default())
}

pub fn metrics_with(
    matrix: &ConfusionMatrix,
    options: &MetricsOptions,
) -> Result<EvaluationReport, EvalError> {
    let total = matrix.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let per_class: Vec<ClassMetrics> = options
        .classes
        .iter()
        .map(|&class| {
            let tp = matrix.get(class, class);
            let support = matrix.support(class);
            let fp = matrix.predicted(class) - tp;
            let (precision, recall, f1) = precision_recall_f1(tp, fp, support - tp);
            ClassMetrics {
                class,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let scored: Vec<f64> = per_class.iter().filter(|m| m.support > 0).map(|m| m.f1).collect();
    let macro_f1 = if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    Ok(EvaluationReport {
        protocol: String::new(),
        fold_id: String::new(),
        confusion: *matrix,
        per_class,
        macro_f1,
        accuracy: ratio(matrix.correct(), total),
    })
}

/// Trains on one side of a fold and labels the other.
pub trait FoldClassifier {
    type Error;

    /// Returns one label per frame of `test`, in order.
    fn classify(
        &mut self,
        fold: &Fold,
        train: &[&Frame],
        test: &[&Frame],
    ) -> Result<Vec<SurfaceClass>, Self::Error>;
}

impl<E, F> FoldClassifier for F
where
    F: FnMut(&Fold, &[&Frame], &[&Frame]) -> Result<Vec<SurfaceClass>, E>,
{
    type Error = E;

    fn classify(
        &mut self,
        fold: &Fold,
        train: &[&Frame],
        test: &[&Frame],
    ) -> Result<Vec<SurfaceClass>, E> {
        self(fold, train, test)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunError<E> {
    Eval(EvalError),
    Classifier(E),
}

impl<E: fmt::Display> fmt::Display for RunError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Eval(e) => e.fmt(f),
            RunError::Classifier(e) => write!(f, "classifier failed: {e}"),
        }
    }
}

impl<E: fmt::Debug + fmt::Display> core::error::Error for RunError<E> {}

impl<E> From<EvalError> for RunError<E> {
    fn from(e: EvalError) -> Self {
        RunError::Eval(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: Fold,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub protocol: String,
    pub folds: Vec<FoldResult>,
    /// Metrics of the summed fold matrices.
    pub pooled: EvaluationReport,
    /// Plain mean of the per-fold macro F1 values.
    pub mean_fold_macro_f1: f64,
    /// Every tested frame's prediction, sorted by frame id.
    pub predictions: Vec<(String, SurfaceClass)>,
}

/// Runs every fold of `protocol` through `classifier` and scores it.
pub fn run_protocol<C: FoldClassifier>(
    frames: &FrameSet,
    protocol: &SplitProtocol,
    options: &MetricsOptions,
    classifier: &mut C,
) -> Result<ProtocolResult, RunError<C::Error>> {
    let folds = make_folds(frames, protocol)?;
    let in_scope = |f: &&Frame| {
        f.region_id
            .as_deref()
            .is_some_and(|r| folds.iter().any(|fold| fold.test_regions.contains(r) || fold.train_regions.contains(r)))
    };
    let unlabeled = frames.iter().filter(in_scope).filter(|f| f.true_label.is_none()).count();
    if unlabeled > 0 {
        return Err(EvalError::UnlabeledFrames(unlabeled).into());
    }

    let mut results = Vec::with_capacity(folds.len());
    let mut pooled = ConfusionMatrix::new();
    let mut predictions = Vec::new();
    for fold in folds.iter() {
        let side = |set: &BTreeSet<String>| -> Vec<&Frame> {
            frames
                .iter()
                .filter(|f| f.region_id.as_ref().is_some_and(|r| set.contains(r)))
                .collect()
        };
        let train = side(&fold.train_regions);
        let test = side(&fold.test_regions);
        let predicted = classifier
            .classify(fold, &train, &test)
            .map_err(RunError::Classifier)?;
        if predicted.len() != test.len() {
            return Err(EvalError::PredictionCount {
                fold_id: fold.fold_id.clone(),
                expected: test.len(),
                actual: predicted.len(),
            }
            .into());
        }
        let truth: Vec<SurfaceClass> = test.iter().map(|f| f.true_label.unwrap()).collect();
        let matrix = confusion(&truth, &predicted)?;
        pooled.merge(&matrix);
        predictions.extend(test.iter().zip(&predicted).map(|(f, p)| (f.frame_id.clone(), *p)));
        let report = metrics_with(&matrix, options)?.with_labels(protocol.name(), fold.fold_id.clone());
        results.push(FoldResult {
            fold: fold.clone(),
            report,
        });
    }
    predictions.sort_by(|a, b| a.0.cmp(&b.0));

    let mean_fold_macro_f1 =
        results.iter().map(|r| r.report.macro_f1).sum::<f64>() / results.len().max(1) as f64;
    Ok(ProtocolResult {
        protocol: protocol.name().into(),
        pooled: metrics_with(&pooled, options)?.with_labels(protocol.name(), "pooled"),
        folds: results,
        mean_fold_macro_f1,
        predictions,
    })
}
