//! Planar geometry on raw (lat, lon) degrees: containment, polygon validity,
//! region assignment and short-range distances.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::frame::{FrameSet, GeoPoint, RegionSet};

const EPS: f64 = 1e-12;

/// Mean Earth radius in metres.
const EARTH_RADIUS_M: f64 = 6_371_008.8;

fn cross(o: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon)
}

fn on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool {
    let scale = (b.lon - a.lon).abs().max((b.lat - a.lat).abs()).max(1.0);
    cross(a, b, p).abs() <= EPS * scale
        && p.lon >= a.lon.min(b.lon) - EPS
        && p.lon <= a.lon.max(b.lon) + EPS
        && p.lat >= a.lat.min(b.lat) - EPS
        && p.lat <= a.lat.max(b.lat) + EPS
}

/// Even-odd ray casting. Points on the boundary count as inside.
pub fn point_in_polygon(p: GeoPoint, ring: &[GeoPoint]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if on_segment(p, a, b) {
            return true;
        }
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let lon_at = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if p.lon < lon_at {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn segments_intersect(p1: GeoPoint, p2: GeoPoint, q1: GeoPoint, q2: GeoPoint) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
    {
        return true;
    }
    on_segment(p1, q1, q2)
        || on_segment(p2, q1, q2)
        || on_segment(q1, p1, p2)
        || on_segment(q2, p1, p2)
}

/// True if any two non-adjacent edges of the closed ring touch, or if two
/// consecutive vertices coincide.
pub fn is_self_intersecting(ring: &[GeoPoint]) -> bool {
    let n = ring.len();
    let edge = |i: usize| (ring[i], ring[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = edge(i);
        if a == b {
            return true;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = edge(j);
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Equirectangular distance in metres; accurate to well under a percent at
/// the sub-kilometre scale used for segment splitting.
pub fn distance_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let to_rad = core::f64::consts::PI / 180.0;
    let mean_lat = (a.lat + b.lat) * 0.5 * to_rad;
    let dx = (b.lon - a.lon) * to_rad * libm::cos(mean_lat);
    let dy = (b.lat - a.lat) * to_rad;
    EARTH_RADIUS_M * libm::sqrt(dx * dx + dy * dy)
}

/// Counts produced alongside a region assignment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssignmentDiagnostics {
    /// Frames inside no region.
    pub unassigned: usize,
    /// `(region_id, frame count)` in region-set order.
    pub per_region: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeoError {
    OverlappingRegions { frame_id: String, regions: Vec<String> },
}

impl fmt::Display for GeoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeoError::OverlappingRegions { frame_id, regions } => {
                write!(f, "frame {frame_id:?} lies in several regions: {regions:?}")
            }
        }
    }
}

impl core::error::Error for GeoError {}

/// Tags every frame with the unique region containing it (or none) and
/// attaches `regions` to the returned set.
pub fn assign_regions(
    mut frames: FrameSet,
    regions: &RegionSet,
) -> Result<(FrameSet, AssignmentDiagnostics), GeoError> {
    let mut assignment: Vec<Option<usize>> = Vec::with_capacity(frames.len());
    for frame in frames.iter() {
        let mut hits = regions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.contains(frame.location));
        let first = hits.next();
        if let Some((_, second)) = hits.next() {
            let mut ids = Vec::from([first.unwrap().1.region_id.clone(), second.region_id.clone()]);
            ids.extend(hits.map(|(_, r)| r.region_id.clone()));
            return Err(GeoError::OverlappingRegions {
                frame_id: frame.frame_id.clone(),
                regions: ids,
            });
        }
        assignment.push(first.map(|(i, _)| i));
    }

    let mut diagnostics = AssignmentDiagnostics {
        unassigned: assignment.iter().filter(|a| a.is_none()).count(),
        per_region: regions.iter().map(|r| (r.region_id.clone(), 0)).collect(),
    };
    for index in assignment.iter().flatten() {
        diagnostics.per_region[*index].1 += 1;
    }

    // Region ids do not participate in the sort key, so order is stable.
    let mut slots = assignment.into_iter();
    frames.update(|frame| {
        frame.region_id = slots
            .next()
            .flatten()
            .map(|i| regions.iter().nth(i).unwrap().region_id.clone());
    });
    frames.set_regions(regions.clone());
    Ok((frames, diagnostics))
}
