//! Region definitions as a GeoJSON FeatureCollection of Polygons carrying
//! `region_id` and `city` properties. Coordinates are `[lon, lat]`.

use std::fs;
use std::path::Path;

use kerbside_core::frame::{GeoPoint, Region, RegionSet};
use serde_json::{Value, json};

use crate::error::{Error, Result};

pub fn load_regions(path: &Path) -> Result<RegionSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_regions(&text, path)
}

pub fn parse_regions(text: &str, path: &Path) -> Result<RegionSet> {
    let doc: Value = serde_json::from_str(text)?;
    let bad = |feature: usize, reason: &str| Error::parse(path, feature as u64, "feature", reason);
    if doc["type"] != "FeatureCollection" {
        return Err(bad(0, "top level is not a FeatureCollection"));
    }
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| bad(0, "missing features array"))?;

    let mut regions = Vec::with_capacity(features.len());
    for (i, feature) in features.iter().enumerate() {
        let props = &feature["properties"];
        let id = props["region_id"]
            .as_str()
            .ok_or_else(|| bad(i, "missing properties.region_id"))?;
        let city = props["city"].as_str().ok_or_else(|| bad(i, "missing properties.city"))?;
        let geometry = &feature["geometry"];
        if geometry["type"] != "Polygon" {
            return Err(bad(i, "geometry is not a Polygon"));
        }
        let rings = geometry["coordinates"]
            .as_array()
            .ok_or_else(|| bad(i, "missing coordinates"))?;
        if rings.len() != 1 {
            return Err(bad(i, "polygons with holes are not supported"));
        }
        let ring = rings[0].as_array().ok_or_else(|| bad(i, "ring is not an array"))?;
        let boundary = ring
            .iter()
            .map(|pos| match pos.as_array().map(Vec::as_slice) {
                Some([lon, lat, ..]) => match (lon.as_f64(), lat.as_f64()) {
                    (Some(lon), Some(lat)) => Ok(GeoPoint { lat, lon }),
                    _ => Err(bad(i, "non-numeric position")),
                },
                _ => Err(bad(i, "position is not [lon, lat]")),
            })
            .collect::<Result<Vec<_>>>()?;
        regions.push(Region::new(id, city, boundary)?);
    }
    Ok(RegionSet::new(regions)?)
}

pub fn regions_to_geojson(regions: &RegionSet) -> Value {
    let features: Vec<Value> = regions
        .iter()
        .map(|r| {
            let mut ring: Vec<[f64; 2]> = r.boundary.iter().map(|p| [p.lon, p.lat]).collect();
            ring.push(ring[0]);
            json!({
                "type": "Feature",
                "properties": { "region_id": r.region_id, "city": r.city },
                "geometry": { "type": "Polygon", "coordinates": [ring] },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

pub fn save_regions(path: &Path, regions: &RegionSet) -> Result<()> {
    let text = serde_json::to_string_pretty(&regions_to_geojson(regions))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
      "type": "FeatureCollection",
      "features": [{
        "type": "Feature",
        "properties": {"region_id": "A", "city": "Bremen"},
        "geometry": {"type": "Polygon", "coordinates": [[[8.80, 53.07], [8.81, 53.07], [8.81, 53.08], [8.80, 53.08], [8.80, 53.07]]]}
      }]
    }"#;

    #[test]
    fn parses_polygon_in_lon_lat_order() {
        let set = parse_regions(DOC, Path::new("r.geojson")).unwrap();
        let a = set.get("A").unwrap();
        assert_eq!(a.city, "Bremen");
        assert_eq!(a.boundary.len(), 4);
        assert_eq!(a.boundary[0], GeoPoint { lat: 53.07, lon: 8.80 });
        assert!(a.contains(GeoPoint { lat: 53.075, lon: 8.805 }));

        let again = parse_regions(&regions_to_geojson(&set).to_string(), Path::new("r")).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn rejects_bad_documents() {
        let p = Path::new("r");
        assert!(parse_regions(r#"{"type": "Feature"}"#, p).is_err());
        assert!(parse_regions(&DOC.replace("\"city\": \"Bremen\"", "\"town\": \"x\""), p).is_err());
        assert!(parse_regions(&DOC.replace("Polygon", "LineString"), p).is_err());
        let bowtie = DOC.replace(
            "[[8.80, 53.07], [8.81, 53.07], [8.81, 53.08], [8.80, 53.08], [8.80, 53.07]]",
            "[[8.80, 53.07], [8.81, 53.08], [8.81, 53.07], [8.80, 53.08], [8.80, 53.07]]",
        );
        assert!(matches!(parse_regions(&bowtie, p), Err(Error::Frame(_))));
    }
}
