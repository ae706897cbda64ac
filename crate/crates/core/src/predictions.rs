//! Per-frame predictions, whether produced by the baseline or imported.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

use crate::frame::FrameSet;
use crate::knn::Prediction;
use crate::taxonomy::SurfaceClass;

#[derive(Debug, Clone, PartialEq)]
pub enum PredictionError {
    ConfidenceOutOfRange { frame_id: String, confidence: f64 },
    DuplicatePrediction(String),
    UnknownFrameId(String),
}

impl fmt::Display for PredictionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictionError::ConfidenceOutOfRange { frame_id, confidence } => {
                write!(f, "frame {frame_id:?}: confidence {confidence} not in [0, 1]")
            }
            PredictionError::DuplicatePrediction(id) => write!(f, "frame {id:?} predicted twice"),
            PredictionError::UnknownFrameId(id) => write!(f, "unknown frame id {id:?}"),
        }
    }
}

impl core::error::Error for PredictionError {}

/// Frame id to predicted class and confidence, iterated in frame-id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    entries: BTreeMap<String, Prediction>,
}

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        frame_id: impl Into<String>,
        class: SurfaceClass,
        confidence: f64,
    ) -> Result<(), PredictionError> {
        let frame_id = frame_id.into();
        if !(0.0..=1.0).contains(&confidence) {
            return Err(PredictionError::ConfidenceOutOfRange {
                frame_id,
                confidence,
            });
        }
        if self.entries.contains_key(&frame_id) {
            return Err(PredictionError::DuplicatePrediction(frame_id));
        }
        self.entries.insert(frame_id, Prediction { class, confidence });
        Ok(())
    }

    pub fn get(&self, frame_id: &str) -> Option<&Prediction> {
        self.entries.get(frame_id)
    }

    pub fn class_of(&self, frame_id: &str) -> Option<SurfaceClass> {
        self.entries.get(frame_id).map(|p| p.class)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Prediction)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Fails on the first prediction whose frame is not in `frames`.
    pub fn check_against(&self, frames: &FrameSet) -> Result<(), PredictionError> {
        let known: alloc::collections::BTreeSet<&str> =
            frames.iter().map(|f| f.frame_id.as_str()).collect();
        match self.entries.keys().find(|id| !known.contains(id.as_str())) {
            Some(id) => Err(PredictionError::UnknownFrameId(id.clone())),
            None => Ok(()),
        }
    }

    /// Copies predictions onto the matching frames.
    pub fn apply_to(&self, frames: &mut FrameSet) {
        frames.update(|f| {
            if let Some(p) = self.entries.get(&f.frame_id) {
                f.predicted_label = Some(p.class);
                f.confidence = Some(p.confidence);
            }
        });
    }
}

impl FromIterator<(String, SurfaceClass)> for PredictionSet {
    /// Later duplicates overwrite earlier ones; confidence is 1.
    fn from_iter<I: IntoIterator<Item = (String, SurfaceClass)>>(iter: I) -> Self {
        PredictionSet {
            entries: iter
                .into_iter()
                .map(|(id, class)| (id, Prediction { class, confidence: 1.0 }))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{Frame, GeoPoint};
    use alloc::vec;

    #[test]
    fn insert_validates() {
        let mut set = PredictionSet::new();
        set.insert("a", SurfaceClass::Pavement, 0.5).unwrap();
        assert_eq!(
            set.insert("a", SurfaceClass::Grass, 0.5),
            Err(PredictionError::DuplicatePrediction("a".into()))
        );
        assert!(matches!(
            set.insert("b", SurfaceClass::Grass, 1.2),
            Err(PredictionError::ConfidenceOutOfRange { .. })
        ));
    }

    #[test]
    fn unknown_frames_are_detected() {
        let frames = FrameSet::new(vec![Frame::new("a", 0, GeoPoint { lat: 0.0, lon: 0.0 }, "x")]).unwrap();
        let mut set = PredictionSet::new();
        set.insert("a", SurfaceClass::Pavement, 1.0).unwrap();
        assert_eq!(set.check_against(&frames), Ok(()));
        set.insert("zz", SurfaceClass::Pavement, 1.0).unwrap();
        assert_eq!(
            set.check_against(&frames),
            Err(PredictionError::UnknownFrameId("zz".into()))
        );
    }
}
