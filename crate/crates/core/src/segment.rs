//! Street segments: derivation from a frame stream, plurality aggregation,
//! streetwise and binary reports, and the independent-segment route model.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::eval::{ConfusionMatrix, EvalError, EvaluationReport, MetricsOptions, metrics_with, precision_recall_f1};
use crate::frame::{Frame, FrameSet, GeoPoint};
use crate::geo::distance_m;
use crate::predictions::PredictionSet;
use crate::taxonomy::{Accessibility, CollapseTable, SurfaceClass};

/// Thresholds for splitting a stream of frames without explicit segment ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationConfig {
    /// Consecutive frames further apart in time start a new segment.
    pub max_gap_ms: i64,
    /// Consecutive frames further apart in space start a new segment.
    pub max_jump_m: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            max_gap_ms: 5_000,
            max_jump_m: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub segment_id: String,
    /// Member frame ids in capture order; transition frames are never members.
    pub frames: Vec<String>,
    pub true_class: SurfaceClass,
    /// Filled by [`assign_predictions`].
    pub predicted_class: Option<SurfaceClass>,
    /// Winner share minus runner-up share of the predicted vote.
    pub vote_margin: Option<f64>,
    pub geometry: Vec<GeoPoint>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentError {
    NoSegmentableFrames,
    OnlyTransitions,
    UnlabeledFrame(String),
    MissingPredictions(String),
    InvalidRouteModel,
    Eval(EvalError),
}

impl fmt::Display for SegmentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentError::NoSegmentableFrames => f.write_str("no non-transition frames to segment"),
            SegmentError::OnlyTransitions => f.write_str("only transition labels to aggregate"),
            SegmentError::UnlabeledFrame(id) => write!(f, "frame {id:?} has no label"),
            SegmentError::MissingPredictions(id) => {
                write!(f, "segment {id:?} has frames without predictions")
            }
            SegmentError::InvalidRouteModel => f.write_str("route model out of range"),
            SegmentError::Eval(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for SegmentError {}

impl From<EvalError> for SegmentError {
    fn from(e: EvalError) -> Self {
        SegmentError::Eval(e)
    }
}

/// Plurality vote outcome over non-transition labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote {
    pub winner: SurfaceClass,
    pub counts: [usize; SurfaceClass::COUNT],
}

impl Vote {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn margin(&self) -> f64 {
        let mut sorted = self.counts;
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        (sorted[0] - sorted[1]) as f64 / self.total() as f64
    }
}

/// Plurality over non-transition labels. Ties go to a class that collapses
/// to inaccessible under `table`, then to canonical order.
pub fn vote(labels: &[SurfaceClass], table: &CollapseTable) -> Result<Vote, SegmentError> {
    let mut counts = [0usize; SurfaceClass::COUNT];
    for l in labels.iter().filter(|l| !l.is_transition()) {
        counts[l.index()] += 1;
    }
    let winner = SurfaceClass::SURFACES
        .into_iter()
        .filter(|c| counts[c.index()] > 0)
        .min_by_key(|c| {
            let safe = table.collapse(*c) != Accessibility::Inaccessible;
            (core::cmp::Reverse(counts[c.index()]), safe, *c)
        })
        .ok_or(SegmentError::OnlyTransitions)?;
    Ok(Vote { winner, counts })
}

/// Segment label under the default collapse table.
pub fn aggregate_label(labels: &[SurfaceClass]) -> Result<SurfaceClass, SegmentError> {
    vote(labels, &CollapseTable::default()).map(|v| v.winner)
}

/// Segments over ground-truth labels. See [`derive_segments_by`].
pub fn derive_segments(frames: &FrameSet, config: &SegmentationConfig) -> Result<Vec<Segment>, SegmentError> {
    derive_segments_by(frames, config, |f| f.true_label)
}

/// Groups frames into segments using `label_of` for transition detection and
/// the segment's reference class.
///
/// Frames carrying a segment id are grouped by it. Frames without one are
/// treated as a time-ordered stream, split at transition frames, at time gaps
/// above `max_gap_ms` and at jumps above `max_jump_m`; derived segments are
/// named `seg-NNNN`. Transition frames join no segment, and groups with no
/// other frames are dropped.
pub fn derive_segments_by<F>(
    frames: &FrameSet,
    config: &SegmentationConfig,
    label_of: F,
) -> Result<Vec<Segment>, SegmentError>
where
    F: Fn(&Frame) -> Option<SurfaceClass>,
{
    let mut groups: Vec<(String, Vec<(&Frame, SurfaceClass)>)> = Vec::new();
    let mut derived = 0usize;
    let mut open = false;
    let mut previous: Option<&Frame> = None;

    for frame in frames {
        let label = label_of(frame).ok_or_else(|| SegmentError::UnlabeledFrame(frame.frame_id.clone()))?;
        match &frame.segment_id {
            Some(id) => {
                open = false;
                if label.is_transition() {
                    continue;
                }
                match groups.last_mut() {
                    Some((last, members)) if last == id => members.push((frame, label)),
                    _ => groups.push((id.clone(), alloc::vec![(frame, label)])),
                }
            }
            None => {
                if label.is_transition() {
                    open = false;
                    previous = Some(frame);
                    continue;
                }
                let split = previous.is_some_and(|p| {
                    frame.timestamp_ms - p.timestamp_ms > config.max_gap_ms
                        || distance_m(p.location, frame.location) > config.max_jump_m
                });
                if !open || split {
                    derived += 1;
                    groups.push((alloc::format!("seg-{derived:04}"), Vec::new()));
                    open = true;
                }
                groups.last_mut().unwrap().1.push((frame, label));
                previous = Some(frame);
            }
        }
    }

    if groups.is_empty() {
        return Err(SegmentError::NoSegmentableFrames);
    }
    groups
        .into_iter()
        .map(|(segment_id, members)| {
            let labels: Vec<SurfaceClass> = members.iter().map(|(_, l)| *l).collect();
            Ok(Segment {
                segment_id,
                frames: members.iter().map(|(f, _)| f.frame_id.clone()).collect(),
                true_class: aggregate_label(&labels)?,
                predicted_class: None,
                vote_margin: None,
                geometry: members.iter().map(|(f, _)| f.location).collect(),
            })
        })
        .collect()
}

/// Sets each segment's predicted class to the plurality of its members'
/// predictions. A segment whose members were all predicted as transitions
/// is labelled Transition, which counts as a miss downstream.
pub fn assign_predictions(
    segments: &[Segment],
    predictions: &PredictionSet,
    table: &CollapseTable,
) -> Result<Vec<Segment>, SegmentError> {
    segments
        .iter()
        .map(|segment| {
            let labels: Option<Vec<SurfaceClass>> =
                segment.frames.iter().map(|id| predictions.class_of(id)).collect();
            let labels = labels.ok_or_else(|| SegmentError::MissingPredictions(segment.segment_id.clone()))?;
            let mut out = segment.clone();
            match vote(&labels, table) {
                Ok(v) => {
                    out.predicted_class = Some(v.winner);
                    out.vote_margin = Some(v.margin());
                }
                Err(SegmentError::OnlyTransitions) => {
                    out.predicted_class = Some(SurfaceClass::Transition);
                    out.vote_margin = Some(0.0);
                }
                Err(e) => return Err(e),
            }
            Ok(out)
        })
        .collect()
}

/// Five-class report over segments after assigning predictions.
pub fn streetwise_report(
    segments: &[Segment],
    predictions: &PredictionSet,
) -> Result<(Vec<Segment>, EvaluationReport), SegmentError> {
    let labelled = assign_predictions(segments, predictions, &CollapseTable::default())?;
    let report = streetwise_report_of(&labelled)?;
    Ok((labelled, report))
}

/// Five-class report over segments that already carry predictions.
pub fn streetwise_report_of(segments: &[Segment]) -> Result<EvaluationReport, SegmentError> {
    let mut matrix = ConfusionMatrix::new();
    for s in segments {
        let pred = s
            .predicted_class
            .ok_or_else(|| SegmentError::MissingPredictions(s.segment_id.clone()))?;
        matrix.add(s.true_class, pred);
    }
    Ok(metrics_with(&matrix, &MetricsOptions::surfaces())?.with_labels("streetwise", "all"))
}

/// Accessible/inaccessible outcome over segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryReport {
    /// `[truth][pred]`, index 0 = accessible, 1 = inaccessible.
    pub matrix: [[u64; 2]; 2],
    pub precision: f64,
    pub recall: f64,
    /// F1 of the accessible class.
    pub f1: f64,
    pub accuracy: f64,
}

fn binary_index(a: Accessibility) -> usize {
    match a {
        Accessibility::Accessible => 0,
        // Unresolved (all-transition) predictions are treated as unsafe.
        Accessibility::Inaccessible | Accessibility::Excluded => 1,
    }
}

/// Collapses aggregated segment classes and scores the accessible class.
/// Segments must already carry predictions.
pub fn binary_report_of(segments: &[Segment], table: &CollapseTable) -> Result<BinaryReport, SegmentError> {
    let mut matrix = [[0u64; 2]; 2];
    for s in segments {
        let pred = s
            .predicted_class
            .ok_or_else(|| SegmentError::MissingPredictions(s.segment_id.clone()))?;
        matrix[binary_index(table.collapse(s.true_class))][binary_index(table.collapse(pred))] += 1;
    }
    let total: u64 = matrix.iter().flatten().sum();
    if total == 0 {
        return Err(EvalError::EmptyMatrix.into());
    }
    let (precision, recall, f1) = precision_recall_f1(matrix[0][0], matrix[1][0], matrix[0][1]);
    Ok(BinaryReport {
        matrix,
        precision,
        recall,
        f1,
        accuracy: (matrix[0][0] + matrix[1][1]) as f64 / total as f64,
    })
}

/// Aggregates predictions per segment (six-class vote), then collapses.
pub fn binary_report(
    segments: &[Segment],
    predictions: &PredictionSet,
    table: &CollapseTable,
) -> Result<BinaryReport, SegmentError> {
    binary_report_of(&assign_predictions(segments, predictions, table)?, table)
}

/// Probability that a route of independent segments is classified correctly
/// end to end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteModel {
    p_segment: f64,
    segments_per_route: u32,
}

impl RouteModel {
    pub fn new(p_segment: f64, segments_per_route: u32) -> Result<Self, SegmentError> {
        if !(0.0..=1.0).contains(&p_segment) {
            return Err(SegmentError::InvalidRouteModel);
        }
        Ok(RouteModel {
            p_segment,
            segments_per_route,
        })
    }

    pub fn p_segment(&self) -> f64 {
        self.p_segment
    }

    pub fn segments_per_route(&self) -> u32 {
        self.segments_per_route
    }
}

pub fn route_accuracy(model: &RouteModel) -> f64 {
    libm::pow(model.p_segment, model.segments_per_route as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use SurfaceClass::*;

    fn stream(labels: &[SurfaceClass]) -> FrameSet {
        FrameSet::new(
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let loc = GeoPoint { lat: 53.0 + i as f64 * 1e-5, lon: 8.8 };
                    Frame::new(alloc::format!("f{i:02}"), i as i64 * 800, loc, "x").with_label(*l)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn transitions_split_the_stream() {
        let frames = stream(&[Pavement, Pavement, Pavement, Transition, Transition, Cobblestone, Cobblestone]);
        let segs = derive_segments(&frames, &SegmentationConfig::default()).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].frames, ["f00", "f01", "f02"]);
        assert_eq!(segs[0].true_class, Pavement);
        assert_eq!(segs[1].frames, ["f05", "f06"]);
        assert_eq!(segs[1].true_class, Cobblestone);
        assert_eq!(segs[1].geometry.len(), 2);
    }

    #[test]
    fn explicit_ids_win_over_labels() {
        let origin = GeoPoint { lat: 0.0, lon: 0.0 };
        let frames = FrameSet::new(vec![
            Frame::new("a", 0, origin, "x").with_label(Pavement).with_segment("s1"),
            Frame::new("b", 1, origin, "x").with_label(Grass).with_segment("s1"),
            Frame::new("c", 2, origin, "x").with_label(Grass).with_segment("s2"),
        ])
        .unwrap();
        let segs = derive_segments(&frames, &SegmentationConfig::default()).unwrap();
        assert_eq!(segs.iter().map(|s| s.segment_id.as_str()).collect::<Vec<_>>(), ["s1", "s2"]);
        assert_eq!(segs[0].true_class, Grass);
    }

    #[test]
    fn time_gaps_and_jumps_split() {
        let mut frames = stream(&[Asphalt; 6]).into_frames();
        for f in &mut frames[3..] {
            f.timestamp_ms += 6_000;
        }
        let segs = derive_segments(&FrameSet::new(frames).unwrap(), &SegmentationConfig::default()).unwrap();
        assert_eq!(segs.len(), 2);

        let mut frames = stream(&[Asphalt; 6]).into_frames();
        for f in &mut frames[4..] {
            f.location.lat += 0.001;
        }
        let segs = derive_segments(&FrameSet::new(frames).unwrap(), &SegmentationConfig::default()).unwrap();
        assert_eq!(segs.iter().map(Segment::len).collect::<Vec<_>>(), [4, 2]);
    }

    #[test]
    fn all_transitions_cannot_be_segmented() {
        let frames = stream(&[Transition, Transition]);
        assert_eq!(
            derive_segments(&frames, &SegmentationConfig::default()),
            Err(SegmentError::NoSegmentableFrames)
        );
    }

    #[test]
    fn aggregation_rules() {
        assert_eq!(aggregate_label(&[Asphalt, Asphalt, Grass]), Ok(Asphalt));
        assert_eq!(aggregate_label(&[Asphalt, Grass]), Ok(Grass));
        assert_eq!(aggregate_label(&[Pavement, Asphalt]), Ok(Asphalt));
        assert_eq!(aggregate_label(&[Cobblestone, Grass, Transition, Transition, Transition]), Ok(Cobblestone));
        assert_eq!(aggregate_label(&[Transition]), Err(SegmentError::OnlyTransitions));
        assert_eq!(aggregate_label(&[]), Err(SegmentError::OnlyTransitions));
    }

    fn segment(id: &str, frames: &[&str], truth: SurfaceClass) -> Segment {
        Segment {
            segment_id: id.into(),
            frames: frames.iter().map(|s| String::from(*s)).collect(),
            true_class: truth,
            predicted_class: None,
            vote_margin: None,
            geometry: vec![GeoPoint { lat: 0.0, lon: 0.0 }; frames.len()],
        }
    }

    #[test]
    fn majority_absorbs_minority_errors() {
        let ids: Vec<String> = (0..9).map(|i| alloc::format!("f{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let seg = segment("s", &refs, Pavement);
        let preds: PredictionSet = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), if i < 5 { Pavement } else { SurfaceClass::ALL[i % 4] }))
            .collect();
        let (labelled, report) = streetwise_report(&[seg], &preds).unwrap();
        assert_eq!(labelled[0].predicted_class, Some(Pavement));
        assert_eq!(report.macro_f1, 1.0);
        assert_eq!(report.per_class.len(), 5);
    }

    #[test]
    fn missing_predictions_are_reported() {
        let seg = segment("s", &["a", "b"], Pavement);
        let preds: PredictionSet = [(String::from("a"), Pavement)].into_iter().collect();
        assert_eq!(
            streetwise_report(&[seg], &preds).unwrap_err(),
            SegmentError::MissingPredictions("s".into())
        );
    }

    #[test]
    fn binary_collapse_forgives_surface_confusion() {
        let segs = vec![segment("a", &["1"], Pavement), segment("b", &["2"], Pavement)];
        let preds: PredictionSet =
            [("1".into(), Asphalt), ("2".into(), Asphalt)].into_iter().collect();
        let r = binary_report(&segs, &preds, &CollapseTable::default()).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.f1, 1.0);
        let (_, six) = streetwise_report(&segs, &preds).unwrap();
        assert_eq!(six.accuracy, 0.0);
    }

    #[test]
    fn binary_f1_hand_computed() {
        let segs = vec![
            segment("a", &["1"], Pavement),
            segment("b", &["2"], Asphalt),
            segment("c", &["3"], Grass),
        ];
        let preds: PredictionSet = [("1".into(), Pavement), ("2".into(), Cobblestone), ("3".into(), Grass)]
            .into_iter()
            .collect();
        let r = binary_report(&segs, &preds, &CollapseTable::default()).unwrap();
        assert_eq!(r.matrix, [[1, 1], [0, 1]]);
        // P = 1/1, R = 1/2 -> F1 = 2/3.
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn route_model() {
        let r = route_accuracy(&RouteModel::new(0.952, 4).unwrap());
        assert!((r - 0.8214).abs() < 1e-4, "{r}");
        assert_eq!(route_accuracy(&RouteModel::new(0.3, 0).unwrap()), 1.0);
        assert_eq!(route_accuracy(&RouteModel::new(1.0, 17).unwrap()), 1.0);
        assert!(RouteModel::new(1.01, 1).is_err());
        assert!(RouteModel::new(f64::NAN, 1).is_err());
    }
}
