//! Append-only NDJSON label log, one event per line:
//! `{"frame_id":..,"label":..,"annotator":..,"timestamp_ms":..}`.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use kerbside_core::annotation::LabelEvent;
use kerbside_core::taxonomy::parse_surface_class;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    frame_id: String,
    label: String,
    annotator: String,
    timestamp_ms: i64,
}

pub fn event_to_line(event: &LabelEvent) -> String {
    serde_json::to_string(&Line {
        frame_id: event.frame_id.clone(),
        label: event.label.canonical_name().into(),
        annotator: event.annotator.clone(),
        timestamp_ms: event.timestamp_ms,
    })
    .expect("plain fields serialise")
}

/// Parses a whole log. Blank lines are skipped; anything else malformed
/// fails with its line number.
pub fn read_events(path: &Path) -> Result<Vec<LabelEvent>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i as u64 + 1;
        let raw: Line = serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, "*", e.to_string()))?;
        let label = parse_surface_class(&raw.label).map_err(|e| Error::parse(path, lineno, "label", e.to_string()))?;
        events.push(LabelEvent {
            frame_id: raw.frame_id,
            label,
            annotator: raw.annotator,
            timestamp_ms: raw.timestamp_ms,
        });
    }
    Ok(events)
}

/// Open handle for appending; each `append` is flushed before returning.
#[derive(Debug)]
pub struct LabelLog {
    path: PathBuf,
    file: File,
}

impl LabelLog {
    /// Reads existing events and opens the file for appending.
    pub fn open(path: &Path) -> Result<(Self, Vec<LabelEvent>)> {
        let events = read_events(path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok((
            LabelLog {
                path: path.to_path_buf(),
                file,
            },
            events,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, events: &[LabelEvent]) -> Result<()> {
        let mut buf = String::new();
        for e in events {
            buf.push_str(&event_to_line(e));
            buf.push('\n');
        }
        self.file
            .write_all(buf.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use kerbside_core::SurfaceClass;

    fn event(id: &str, label: SurfaceClass, ts: i64) -> LabelEvent {
        LabelEvent {
            frame_id: id.into(),
            label,
            annotator: "ann".into(),
            timestamp_ms: ts,
        }
    }

    #[test]
    fn append_then_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.ndjson");
        let (mut log, existing) = LabelLog::open(&path).unwrap();
        assert!(existing.is_empty());
        log.append(&[event("a", SurfaceClass::Grass, 1), event("b", SurfaceClass::Asphalt, 1)]).unwrap();
        drop(log);
        let (mut log, existing) = LabelLog::open(&path).unwrap();
        assert_eq!(existing.len(), 2);
        log.append(&[event("a", SurfaceClass::Pavement, 2)]).unwrap();
        let all = read_events(&path).unwrap();
        assert_eq!(all, vec![
            event("a", SurfaceClass::Grass, 1),
            event("b", SurfaceClass::Asphalt, 1),
            event("a", SurfaceClass::Pavement, 2),
        ]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"frame_id":"a","label":"grass","annotator":"ann","timestamp_ms":1}"#));
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.ndjson");
        std::fs::write(&path, format!("{}\n\n{{\"frame_id\":1}}\n", event_to_line(&event("a", SurfaceClass::Grass, 0)))).unwrap();
        assert!(matches!(read_events(&path), Err(Error::Parse { line: 3, .. })));
        std::fs::write(&path, r#"{"frame_id":"a","label":"snow","annotator":"x","timestamp_ms":0}"#).unwrap();
        assert!(matches!(read_events(&path), Err(Error::Parse { ref column, .. }) if column == "label"));
    }
}
