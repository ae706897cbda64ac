//! Frames, regions and the sorted frame collection shared by every stage.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::taxonomy::SurfaceClass;

/// WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, FrameError> {
        let point = GeoPoint { lat, lon };
        if point.is_valid() {
            Ok(point)
        } else {
            Err(FrameError::CoordinateOutOfRange { lat, lon })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// One camera capture.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: i64,
    pub location: GeoPoint,
    /// Image path relative to the image root.
    pub image_ref: String,
    pub region_id: Option<String>,
    pub segment_id: Option<String>,
    pub true_label: Option<SurfaceClass>,
    pub predicted_label: Option<SurfaceClass>,
    pub confidence: Option<f64>,
}

impl Frame {
    pub fn new(
        frame_id: impl Into<String>,
        timestamp_ms: i64,
        location: GeoPoint,
        image_ref: impl Into<String>,
    ) -> Self {
        Frame {
            frame_id: frame_id.into(),
            timestamp_ms,
            location,
            image_ref: image_ref.into(),
            region_id: None,
            segment_id: None,
            true_label: None,
            predicted_label: None,
            confidence: None,
        }
    }

    pub fn with_label(mut self, label: SurfaceClass) -> Self {
        self.true_label = Some(label);
        self
    }

    pub fn with_segment(mut self, segment_id: impl Into<String>) -> Self {
        self.segment_id = Some(segment_id.into());
        self
    }

    pub fn with_region(mut self, region_id: impl Into<String>) -> Self {
        self.region_id = Some(region_id.into());
        self
    }

    fn sort_key(&self) -> (Option<&str>, i64, &str) {
        (self.segment_id.as_deref(), self.timestamp_ms, &self.frame_id)
    }
}

/// A named evaluation area with a polygonal boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub region_id: String,
    pub city: String,
    /// Open ring: the closing vertex is not repeated.
    pub boundary: Vec<GeoPoint>,
}

impl Region {
    /// Validates the boundary: at least three vertices, all in range, no two
    /// non-adjacent edges touching.
    pub fn new(
        region_id: impl Into<String>,
        city: impl Into<String>,
        mut boundary: Vec<GeoPoint>,
    ) -> Result<Self, FrameError> {
        let region_id = region_id.into();
        if boundary.len() > 1 && boundary.first() == boundary.last() {
            boundary.pop();
        }
        if boundary.len() < 3 {
            return Err(FrameError::InvalidPolygon {
                region_id,
                reason: "fewer than 3 vertices",
            });
        }
        if let Some(p) = boundary.iter().find(|p| !p.is_valid()) {
            return Err(FrameError::CoordinateOutOfRange { lat: p.lat, lon: p.lon });
        }
        if crate::geo::is_self_intersecting(&boundary) {
            return Err(FrameError::InvalidPolygon {
                region_id,
                reason: "self-intersecting boundary",
            });
        }
        Ok(Region {
            region_id,
            city: city.into(),
            boundary,
        })
    }

    pub fn contains(&self, point: GeoPoint) -> bool {
        crate::geo::point_in_polygon(point, &self.boundary)
    }
}

/// Regions keyed by id, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionSet {
    regions: Vec<Region>,
}

impl RegionSet {
    pub fn new(regions: Vec<Region>) -> Result<Self, FrameError> {
        let mut seen = BTreeSet::new();
        for region in &regions {
            if !seen.insert(region.region_id.as_str()) {
                return Err(FrameError::DuplicateRegionId(region.region_id.clone()));
            }
        }
        Ok(RegionSet { regions })
    }

    pub fn get(&self, region_id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.region_id == region_id)
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Region> {
        self.regions.iter()
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn city_of(&self, region_id: &str) -> Option<&str> {
        self.get(region_id).map(|r| r.city.as_str())
    }
}

impl<'a> IntoIterator for &'a RegionSet {
    type Item = &'a Region;
    type IntoIter = core::slice::Iter<'a, Region>;

    fn into_iter(self) -> Self::IntoIter {
        self.regions.iter()
    }
}

/// Frames ordered by `(segment_id, timestamp_ms, frame_id)` with unique ids.
///
/// Frames without a segment id sort first. The ordering is re-established
/// after every mutation that can affect it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameSet {
    frames: Vec<Frame>,
    regions: RegionSet,
}

impl FrameSet {
    pub fn new(frames: Vec<Frame>) -> Result<Self, FrameError> {
        Self::with_regions(frames, RegionSet::default())
    }

    pub fn with_regions(mut frames: Vec<Frame>, regions: RegionSet) -> Result<Self, FrameError> {
        let mut seen = BTreeSet::new();
        for frame in &frames {
            if !frame.location.is_valid() {
                return Err(FrameError::CoordinateOutOfRange {
                    lat: frame.location.lat,
                    lon: frame.location.lon,
                });
            }
            if let Some(c) = frame.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(FrameError::ConfidenceOutOfRange(c));
                }
            }
            if !seen.insert(frame.frame_id.as_str()) {
                return Err(FrameError::DuplicateFrameId(frame.frame_id.clone()));
            }
        }
        frames.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Ok(FrameSet { frames, regions })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn regions(&self) -> &RegionSet {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn get(&self, frame_id: &str) -> Option<&Frame> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Frame> {
        self.frames.iter()
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn set_regions(&mut self, regions: RegionSet) {
        self.regions = regions;
    }

    /// Applies `f` to every frame, then restores the ordering invariant.
    pub fn update<F: FnMut(&mut Frame)>(&mut self, mut f: F) {
        for frame in &mut self.frames {
            f(frame);
        }
        self.frames.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    /// Region ids that have at least one frame, in region-set order, followed
    /// by any ids only present on frames (sorted).
    pub fn region_ids(&self) -> Vec<String> {
        let on_frames: BTreeSet<&str> = self
            .frames
            .iter()
            .filter_map(|f| f.region_id.as_deref())
            .collect();
        let mut ids: Vec<String> = self
            .regions
            .iter()
            .filter(|r| on_frames.contains(r.region_id.as_str()))
            .map(|r| r.region_id.clone())
            .collect();
        for id in on_frames {
            if self.regions.get(id).is_none() {
                ids.push(id.into());
            }
        }
        ids
    }
}

impl<'a> IntoIterator for &'a FrameSet {
    type Item = &'a Frame;
    type IntoIter = core::slice::Iter<'a, Frame>;

    fn into_iter(self) -> Self::IntoIter {
        self.frames.iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameError {
    CoordinateOutOfRange { lat: f64, lon: f64 },
    ConfidenceOutOfRange(f64),
    DuplicateFrameId(String),
    DuplicateRegionId(String),
    InvalidPolygon { region_id: String, reason: &'static str },
}

impl fmt::Display for FrameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameError::CoordinateOutOfRange { lat, lon } => {
                write!(f, "coordinate ({lat}, {lon}) out of range")
            }
            FrameError::ConfidenceOutOfRange(c) => write!(f, "confidence {c} not in [0, 1]"),
            FrameError::DuplicateFrameId(id) => write!(f, "duplicate frame id {id:?}"),
            FrameError::DuplicateRegionId(id) => write!(f, "duplicate region id {id:?}"),
            FrameError::InvalidPolygon { region_id, reason } => {
                write!(f, "region {region_id:?}: {reason}")
            }
        }
    }
}

impl core::error::Error for FrameError {}
