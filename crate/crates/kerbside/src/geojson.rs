//! Segment map export. One LineString per segment, `[lon, lat]` order.
//! A single-frame segment repeats its only position, since a LineString
//! needs two.

use kerbside_core::segment::Segment;
use kerbside_core::taxonomy::{Accessibility, CollapseTable};
use serde_json::{Value, json};

pub fn export_geojson(segments: &[Segment], table: &CollapseTable) -> Value {
    let features: Vec<Value> = segments.iter().map(|s| feature(s, table)).collect();
    json!({ "type": "FeatureCollection", "features": features })
}

fn feature(s: &Segment, table: &CollapseTable) -> Value {
    let mut coords: Vec<[f64; 2]> = s.geometry.iter().map(|p| [p.lon, p.lat]).collect();
    if coords.len() == 1 {
        coords.push(coords[0]);
    }
    let surface = s.predicted_class.unwrap_or(s.true_class);
    // Unresolved segments are reported as not accessible.
    let accessible = table.collapse(surface) == Accessibility::Accessible;
    json!({
        "type": "Feature",
        "geometry": { "type": "LineString", "coordinates": coords },
        "properties": {
            "segment_id": s.segment_id,
            "surface": surface.canonical_name(),
            "true_surface": s.true_class.canonical_name(),
            "accessible": accessible,
            "vote_margin": s.vote_margin,
            "n_frames": s.frames.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use kerbside_core::frame::GeoPoint;
    use kerbside_core::taxonomy::SurfaceClass;

    fn segment(id: &str, points: &[(f64, f64)], pred: Option<SurfaceClass>) -> Segment {
        Segment {
            segment_id: id.into(),
            frames: (0..points.len()).map(|i| format!("{id}-{i}")).collect(),
            true_class: SurfaceClass::Pavement,
            predicted_class: pred,
            vote_margin: pred.map(|_| 0.5),
            geometry: points.iter().map(|&(lat, lon)| GeoPoint { lat, lon }).collect(),
        }
    }

    #[test]
    fn empty_is_valid_collection() {
        let doc = export_geojson(&[], &CollapseTable::default());
        assert_eq!(doc, json!({ "type": "FeatureCollection", "features": [] }));
    }

    #[test]
    fn lon_lat_order_and_properties() {
        let segs = [
            segment("s1", &[(53.0, 8.0), (53.1, 8.1)], Some(SurfaceClass::Grass)),
            segment("s2", &[(52.0, 9.0)], None),
            segment("s3", &[(52.0, 9.0), (52.0, 9.1)], Some(SurfaceClass::Transition)),
        ];
        let doc = export_geojson(&segs, &CollapseTable::default());
        let f = &doc["features"];
        assert_eq!(f[0]["geometry"]["type"], "LineString");
        assert_eq!(f[0]["geometry"]["coordinates"][0], json!([8.0, 53.0]));
        assert_eq!(f[0]["properties"]["surface"], "grass");
        assert_eq!(f[0]["properties"]["accessible"], false);
        assert_eq!(f[0]["properties"]["n_frames"], 2);
        assert_eq!(f[1]["geometry"], json!({ "type": "LineString", "coordinates": [[9.0, 52.0], [9.0, 52.0]] }));
        assert_eq!(f[1]["properties"]["accessible"], true);
        assert_eq!(f[1]["properties"]["vote_margin"], Value::Null);
        assert_eq!(f[2]["properties"]["accessible"], false);
        assert_eq!(f[2]["properties"]["surface"], "transition");
    }
}
