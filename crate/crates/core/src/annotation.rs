//! Batch annotation: runs of consecutive unlabelled frames are proposed as
//! one batch, labelled with a few range decisions, and recorded in an
//! append-only log.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::frame::{Frame, FrameSet};
use crate::geo::distance_m;
use crate::segment::SegmentationConfig;
use crate::taxonomy::SurfaceClass;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationBatch {
    pub batch_id: String,
    /// Capture order.
    pub frame_ids: Vec<String>,
}

/// Labels the half-open range `start..end` of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelDecision {
    pub start: usize,
    pub end: usize,
    pub label: SurfaceClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelEvent {
    pub frame_id: String,
    pub label: SurfaceClass,
    pub annotator: String,
    pub timestamp_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnotationError {
    UnknownBatch(String),
    /// Position `at` of the batch is not covered.
    RangeGap { at: usize },
    /// Position `at` is covered twice (or a range is empty / out of bounds).
    RangeOverlap { at: usize },
    InvalidMaxBatch,
}

impl fmt::Display for AnnotationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnotationError::UnknownBatch(id) => write!(f, "unknown batch {id:?}"),
            AnnotationError::RangeGap { at } => write!(f, "batch position {at} is not labelled"),
            AnnotationError::RangeOverlap { at } => {
                write!(f, "batch position {at} is labelled more than once")
            }
            AnnotationError::InvalidMaxBatch => f.write_str("max batch size must be at least 1"),
        }
    }
}

impl core::error::Error for AnnotationError {}

/// Groups unlabelled frames into time-ordered batches of adjacent frames.
///
/// Two frames are adjacent when they are consecutive in capture order, share
/// a segment id (or both lack one), are at most `max_gap_ms` apart in time
/// and `max_jump_m` apart in space. A labelled frame breaks adjacency.
pub fn propose_batches(
    frames: &FrameSet,
    max_batch: usize,
    config: &SegmentationConfig,
) -> Result<Vec<AnnotationBatch>, AnnotationError> {
    if max_batch == 0 {
        return Err(AnnotationError::InvalidMaxBatch);
    }
    let mut ordered: Vec<&Frame> = frames.iter().collect();
    ordered.sort_by(|a, b| (a.timestamp_ms, &a.frame_id).cmp(&(b.timestamp_ms, &b.frame_id)));

    let mut runs: Vec<Vec<&Frame>> = Vec::new();
    let mut previous: Option<&Frame> = None;
    for frame in ordered {
        if frame.true_label.is_some() {
            previous = None;
            continue;
        }
        let adjacent = previous.is_some_and(|p| {
            p.segment_id == frame.segment_id
                && frame.timestamp_ms - p.timestamp_ms <= config.max_gap_ms
                && distance_m(p.location, frame.location) <= config.max_jump_m
        });
        match runs.last_mut() {
            Some(run) if adjacent && run.len() < max_batch => run.push(frame),
            _ => runs.push(alloc::vec![frame]),
        }
        previous = Some(frame);
    }

    Ok(runs
        .into_iter()
        .map(|run| AnnotationBatch {
            batch_id: alloc::format!("{}+{}", run[0].frame_id, run.len()),
            frame_ids: run.iter().map(|f| f.frame_id.clone()).collect(),
        })
        .collect())
}

/// Checks that `decisions` tile `0..len` exactly.
pub fn validate_decisions(len: usize, decisions: &[LabelDecision]) -> Result<(), AnnotationError> {
    let mut sorted: Vec<&LabelDecision> = decisions.iter().collect();
    sorted.sort_by_key(|d| (d.start, d.end));
    let mut cursor = 0;
    for d in sorted {
        if d.start > cursor {
            return Err(AnnotationError::RangeGap { at: cursor });
        }
        if d.start < cursor || d.end <= d.start || d.end > len {
            return Err(AnnotationError::RangeOverlap { at: d.start });
        }
        cursor = d.end;
    }
    if cursor < len {
        return Err(AnnotationError::RangeGap { at: cursor });
    }
    Ok(())
}

/// Append-only label log with a materialised last-write-wins view.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelStore {
    log: Vec<LabelEvent>,
    current: BTreeMap<String, SurfaceClass>,
}

impl LabelStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds the view by folding over `log`.
    pub fn replay(log: Vec<LabelEvent>) -> Self {
        let mut store = LabelStore::new();
        for event in log {
            store.append(event);
        }
        store
    }

    pub fn append(&mut self, event: LabelEvent) {
        self.current.insert(event.frame_id.clone(), event.label);
        self.log.push(event);
    }

    pub fn log(&self) -> &[LabelEvent] {
        &self.log
    }

    pub fn label(&self, frame_id: &str) -> Option<SurfaceClass> {
        self.current.get(frame_id).copied()
    }

    pub fn labels(&self) -> &BTreeMap<String, SurfaceClass> {
        &self.current
    }

    pub fn labeled_count(&self) -> usize {
        self.current.len()
    }

    /// Validates `decisions` against the batch and appends one event per
    /// frame. Returns the appended events.
    pub fn apply_labels(
        &mut self,
        batches: &[AnnotationBatch],
        batch_id: &str,
        decisions: &[LabelDecision],
        annotator: &str,
        timestamp_ms: i64,
    ) -> Result<Vec<LabelEvent>, AnnotationError> {
        let batch = batches
            .iter()
            .find(|b| b.batch_id == batch_id)
            .ok_or_else(|| AnnotationError::UnknownBatch(batch_id.into()))?;
        validate_decisions(batch.frame_ids.len(), decisions)?;
        let mut sorted: Vec<&LabelDecision> = decisions.iter().collect();
        sorted.sort_by_key(|d| d.start);
        let mut events = Vec::with_capacity(batch.frame_ids.len());
        for d in sorted {
            for frame_id in &batch.frame_ids[d.start..d.end] {
                let event = LabelEvent {
                    frame_id: frame_id.clone(),
                    label: d.label,
                    annotator: annotator.into(),
                    timestamp_ms,
                };
                self.append(event.clone());
                events.push(event);
            }
        }
        Ok(events)
    }

    /// Copies the materialised labels onto matching frames as ground truth.
    pub fn apply_to(&self, frames: &mut FrameSet) {
        frames.update(|f| {
            if let Some(l) = self.current.get(&f.frame_id) {
                f.true_label = Some(*l);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::GeoPoint;
    use SurfaceClass::*;

    fn unlabeled(n: usize) -> FrameSet {
        FrameSet::new(
            (0..n)
                .map(|i| {
                    Frame::new(
                        alloc::format!("f{i:02}"),
                        i as i64 * 800,
                        GeoPoint { lat: 53.0 + i as f64 * 1e-5, lon: 8.8 },
                        "x",
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn batches_are_capped() {
        let batches = propose_batches(&unlabeled(10), 4, &SegmentationConfig::default()).unwrap();
        let sizes: Vec<usize> = batches.iter().map(|b| b.frame_ids.len()).collect();
        assert_eq!(sizes, [4, 4, 2]);
        assert_eq!(batches[0].batch_id, "f00+4");
    }

    #[test]
    fn labelled_frames_yield_no_batches() {
        let mut frames = unlabeled(5);
        frames.update(|f| f.true_label = Some(Grass));
        assert!(propose_batches(&frames, 3, &SegmentationConfig::default()).unwrap().is_empty());
        assert_eq!(
            propose_batches(&frames, 0, &SegmentationConfig::default()),
            Err(AnnotationError::InvalidMaxBatch)
        );
    }

    #[test]
    fn time_gap_splits_batches() {
        let mut frames = unlabeled(6).into_frames();
        for f in &mut frames[3..] {
            f.timestamp_ms += 6_000;
        }
        let batches =
            propose_batches(&FrameSet::new(frames).unwrap(), 100, &SegmentationConfig::default()).unwrap();
        assert_eq!(batches.len(), 2);
    }

    fn batch(n: usize) -> AnnotationBatch {
        AnnotationBatch {
            batch_id: "b".into(),
            frame_ids: (0..n).map(|i| alloc::format!("f{i}")).collect(),
        }
    }

    #[test]
    fn whole_batch_decision() {
        let mut store = LabelStore::new();
        let d = [LabelDecision { start: 0, end: 5, label: Pavement }];
        store.apply_labels(&[batch(5)], "b", &d, "ann", 1).unwrap();
        assert_eq!(store.labeled_count(), 5);
        assert!(store.labels().values().all(|l| *l == Pavement));
    }

    #[test]
    fn split_batch_decision() {
        let mut store = LabelStore::new();
        let d = [
            LabelDecision { start: 2, end: 5, label: Transition },
            LabelDecision { start: 0, end: 2, label: Pavement },
        ];
        store.apply_labels(&[batch(5)], "b", &d, "ann", 1).unwrap();
        assert_eq!(store.label("f1"), Some(Pavement));
        assert_eq!(store.label("f2"), Some(Transition));
    }

    #[test]
    fn decision_errors() {
        let mut store = LabelStore::new();
        let b = [batch(5)];
        let overlap = [
            LabelDecision { start: 0, end: 3, label: Pavement },
            LabelDecision { start: 2, end: 5, label: Grass },
        ];
        assert_eq!(
            store.apply_labels(&b, "b", &overlap, "a", 0),
            Err(AnnotationError::RangeOverlap { at: 2 })
        );
        let gap = [
            LabelDecision { start: 0, end: 2, label: Pavement },
            LabelDecision { start: 3, end: 5, label: Grass },
        ];
        assert_eq!(store.apply_labels(&b, "b", &gap, "a", 0), Err(AnnotationError::RangeGap { at: 2 }));
        let short = [LabelDecision { start: 0, end: 4, label: Pavement }];
        assert_eq!(store.apply_labels(&b, "b", &short, "a", 0), Err(AnnotationError::RangeGap { at: 4 }));
        assert_eq!(
            store.apply_labels(&b, "zz", &short, "a", 0),
            Err(AnnotationError::UnknownBatch("zz".into()))
        );
        assert!(store.log().is_empty());
    }

    #[test]
    fn relabel_last_write_wins_and_replays() {
        let mut store = LabelStore::new();
        let b = [batch(2)];
        store
            .apply_labels(&b, "b", &[LabelDecision { start: 0, end: 2, label: Grass }], "a", 0)
            .unwrap();
        store
            .apply_labels(&b, "b", &[LabelDecision { start: 0, end: 2, label: Asphalt }], "a", 1)
            .unwrap();
        assert_eq!(store.label("f0"), Some(Asphalt));
        assert_eq!(store.log().len(), 4);
        assert_eq!(LabelStore::replay(store.log().to_vec()), store);
    }
}
