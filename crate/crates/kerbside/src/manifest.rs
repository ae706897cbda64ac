//! Frame manifest CSV: `frame_id,timestamp_ms,lat,lon,image_ref,segment_id,label`.
//!
//! Loading is all-or-nothing: the first malformed row aborts the whole file.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use kerbside_core::frame::{Frame, FrameSet, GeoPoint};
use kerbside_core::taxonomy::parse_surface_class;

use crate::error::{Error, Result};

pub const HEADER: [&str; 7] = ["frame_id", "timestamp_ms", "lat", "lon", "image_ref", "segment_id", "label"];

pub fn load_manifest(path: &Path) -> Result<FrameSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(file, path)
}

/// Parses manifest CSV from any reader; `path` is only used in errors.
pub fn read_manifest<R: Read>(reader: R, path: &Path) -> Result<FrameSet> {
    let mut csv = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut records = csv.records();

    let header = match records.next() {
        Some(h) => h.map_err(|e| csv_error(path, e))?,
        None => return Err(Error::parse(path, 1, "header", "missing header row")),
    };
    if header.iter().map(str::trim).ne(HEADER) {
        return Err(Error::parse(path, 1, "header", format!("expected `{}`", HEADER.join(","))));
    }

    let mut frames = Vec::new();
    let mut missing_fix = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != HEADER.len() {
            return Err(Error::parse(path, line, "*", format!("expected 7 fields, found {}", record.len())));
        }
        let field = |i: usize| record[i].trim();
        let opt = |i: usize| Some(field(i)).filter(|s| !s.is_empty());

        if field(2).is_empty() || field(3).is_empty() {
            missing_fix.push(line);
            continue;
        }
        let number = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, HEADER[i], format!("not a number: {:?}", field(i))))
        };
        let timestamp_ms = field(1)
            .parse::<i64>()
            .map_err(|_| Error::parse(path, line, "timestamp_ms", format!("not an integer: {:?}", field(1))))?;
        let (lat, lon) = (number(2)?, number(3)?);
        let location = GeoPoint::new(lat, lon)
            .map_err(|_| Error::parse(path, line, if (-90.0..=90.0).contains(&lat) { "lon" } else { "lat" }, "out of range"))?;
        if field(0).is_empty() {
            return Err(Error::parse(path, line, "frame_id", "empty frame id"));
        }
        let mut frame = Frame::new(field(0), timestamp_ms, location, field(4));
        frame.segment_id = opt(5).map(String::from);
        frame.true_label = opt(6)
            .map(parse_surface_class)
            .transpose()
            .map_err(|e| Error::parse(path, line, "label", e.to_string()))?;
        frames.push(frame);
    }
    if let Some(first_line) = missing_fix.first() {
        return Err(Error::MissingGpsFix {
            count: missing_fix.len(),
            first_line: *first_line,
        });
    }
    Ok(FrameSet::new(frames)?)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::parse(path, line, "*", e.to_string())
}

/// Writes frames in their set order. Labels use canonical names.
pub fn write_manifest<W: Write>(writer: W, frames: &FrameSet) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::Config(format!("csv write: {e}"));
    csv.write_record(HEADER).map_err(wrap)?;
    for f in frames {
        csv.write_record([
            f.frame_id.as_str(),
            &f.timestamp_ms.to_string(),
            &f.location.lat.to_string(),
            &f.location.lon.to_string(),
            &f.image_ref,
            f.segment_id.as_deref().unwrap_or(""),
            f.true_label.map_or("", |l| l.canonical_name()),
        ])
        .map_err(wrap)?;
    }
    csv.flush().map_err(|e| Error::Config(format!("csv write: {e}")))?;
    Ok(())
}

pub fn save_manifest(path: &Path, frames: &FrameSet) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_manifest(std::io::BufWriter::new(file), frames)
}
