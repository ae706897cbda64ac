//! Dataset summaries: per-region class distributions and label run lengths.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::frame::FrameSet;
use crate::taxonomy::SurfaceClass;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributionRow {
    pub region_id: String,
    /// Counts in canonical class order.
    pub counts: [u64; SurfaceClass::COUNT],
}

impl DistributionRow {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, class: SurfaceClass) -> u64 {
        self.counts[class.index()]
    }
}

/// Frames per region and class, with marginals.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DistributionTable {
    pub rows: Vec<DistributionRow>,
}

impl DistributionTable {
    pub fn class_totals(&self) -> [u64; SurfaceClass::COUNT] {
        let mut totals = [0; SurfaceClass::COUNT];
        for row in &self.rows {
            for (t, c) in totals.iter_mut().zip(row.counts) {
                *t += c;
            }
        }
        totals
    }

    pub fn grand_total(&self) -> u64 {
        self.rows.iter().map(DistributionRow::total).sum()
    }

    pub fn row(&self, region_id: &str) -> Option<&DistributionRow> {
        self.rows.iter().find(|r| r.region_id == region_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatsError {
    UnlabeledFrames(usize),
    EmptySequence,
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::UnlabeledFrames(n) => write!(f, "{n} frames have no ground-truth label"),
            StatsError::EmptySequence => f.write_str("label sequence is empty"),
        }
    }
}

impl core::error::Error for StatsError {}

/// Label used for frames outside every region.
pub const UNASSIGNED_REGION: &str = "(none)";

/// Counts labelled frames per region and class.
///
/// Rows follow the order of the attached region set; frames whose region is
/// unknown to that set come next sorted by id, and frames with no region
/// form a final [`UNASSIGNED_REGION`] row.
pub fn class_distribution(frames: &FrameSet) -> Result<DistributionTable, StatsError> {
    let unlabeled = frames.iter().filter(|f| f.true_label.is_none()).count();
    if unlabeled > 0 {
        return Err(StatsError::UnlabeledFrames(unlabeled));
    }
    let mut counts: BTreeMap<Option<&str>, [u64; SurfaceClass::COUNT]> = BTreeMap::new();
    for frame in frames {
        let label = frame.true_label.expect("checked above");
        counts.entry(frame.region_id.as_deref()).or_default()[label.index()] += 1;
    }

    let mut rows = Vec::with_capacity(counts.len());
    for region in frames.regions() {
        if let Some(c) = counts.remove(&Some(region.region_id.as_str())) {
            rows.push(DistributionRow {
                region_id: region.region_id.clone(),
                counts: c,
            });
        }
    }
    let unassigned = counts.remove(&None);
    rows.extend(counts.into_iter().map(|(id, c)| DistributionRow {
        region_id: id.unwrap_or_default().into(),
        counts: c,
    }));
    if let Some(c) = unassigned {
        rows.push(DistributionRow {
            region_id: UNASSIGNED_REGION.into(),
            counts: c,
        });
    }
    Ok(DistributionTable { rows })
}

/// Number of maximal runs of equal consecutive labels and their mean length.
pub fn run_length_stats<T: PartialEq>(labels: &[T]) -> Result<(usize, f64), StatsError> {
    if labels.is_empty() {
        return Err(StatsError::EmptySequence);
    }
    let runs = 1 + labels.windows(2).filter(|w| w[0] != w[1]).count();
    Ok((runs, labels.len() as f64 / runs as f64))
}
