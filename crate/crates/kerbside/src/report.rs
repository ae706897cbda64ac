//! JSON and CSV renderings of evaluation results.
//!
//! Everything here is a pure function of its inputs: no clocks, no absolute
//! paths, maps in sorted order. Re-running a job yields identical bytes.

use std::fs;
use std::path::Path;

use kerbside_core::eval::{ConfusionMatrix, EvaluationReport, ProtocolResult};
use kerbside_core::segment::{BinaryReport, Segment};
use kerbside_core::stats::DistributionTable;
use kerbside_core::taxonomy::{Accessibility, CollapseTable, SurfaceClass};
use serde_json::{Value, json};

use crate::error::{Error, Result};

pub fn evaluation_json(report: &EvaluationReport) -> Value {
    let per_class: Vec<Value> = report
        .per_class
        .iter()
        .map(|m| {
            json!({
                "class": m.class.canonical_name(),
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
            })
        })
        .collect();
    json!({
        "protocol": report.protocol,
        "fold_id": report.fold_id,
        "macro_f1": report.macro_f1,
        "accuracy": report.accuracy,
        "per_class": per_class,
        "confusion": confusion_json(&report.confusion),
    })
}

pub fn confusion_json(matrix: &ConfusionMatrix) -> Value {
    json!({
        "classes": SurfaceClass::ALL.map(SurfaceClass::canonical_name),
        "counts": matrix.counts(),
    })
}

pub fn protocol_json(result: &ProtocolResult) -> Value {
    let folds: Vec<Value> = result
        .folds
        .iter()
        .map(|f| {
            json!({
                "fold_id": f.fold.fold_id,
                "test_regions": f.fold.test_regions,
                "train_regions": f.fold.train_regions,
                "report": evaluation_json(&f.report),
            })
        })
        .collect();
    json!({
        "protocol": result.protocol,
        "folds": folds,
        "pooled": evaluation_json(&result.pooled),
        "mean_fold_macro_f1": result.mean_fold_macro_f1,
        "n_predictions": result.predictions.len(),
    })
}

/// Rows are truth, columns predictions, both in canonical order.
pub fn confusion_csv(matrix: &ConfusionMatrix) -> String {
    let mut out = String::from("true\\pred");
    for c in SurfaceClass::ALL {
        out.push(',');
        out.push_str(c.canonical_name());
    }
    out.push('\n');
    for t in SurfaceClass::ALL {
        out.push_str(t.canonical_name());
        for p in SurfaceClass::ALL {
            out.push_str(&format!(",{}", matrix.get(t, p)));
        }
        out.push('\n');
    }
    out
}

/// Five-class segment matrix; a final `unresolved` column counts segments
/// whose members were all predicted as transitions.
pub fn segment_confusion_csv(matrix: &ConfusionMatrix) -> String {
    let mut out = String::from("true\\pred");
    for c in SurfaceClass::SURFACES {
        out.push(',');
        out.push_str(c.canonical_name());
    }
    out.push_str(",unresolved\n");
    for t in SurfaceClass::SURFACES {
        out.push_str(t.canonical_name());
        for p in SurfaceClass::ALL {
            out.push_str(&format!(",{}", matrix.get(t, p)));
        }
        out.push('\n');
    }
    out
}

pub fn binary_json(report: &BinaryReport) -> Value {
    json!({
        "classes": ["accessible", "inaccessible"],
        "counts": report.matrix,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "accuracy": report.accuracy,
    })
}

pub fn binary_csv(report: &BinaryReport) -> String {
    let m = report.matrix;
    format!(
        "true\\pred,accessible,inaccessible\naccessible,{},{}\ninaccessible,{},{}\n",
        m[0][0], m[0][1], m[1][0], m[1][1]
    )
}

fn accessibility_name(a: Accessibility) -> &'static str {
    match a {
        Accessibility::Accessible => "accessible",
        Accessibility::Inaccessible => "inaccessible",
        Accessibility::Excluded => "excluded",
    }
}

pub fn segments_json(segments: &[Segment], table: &CollapseTable) -> Value {
    let rows: Vec<Value> = segments
        .iter()
        .map(|s| {
            let predicted = s.predicted_class;
            json!({
                "segment_id": s.segment_id,
                "n_frames": s.frames.len(),
                "true_class": s.true_class.canonical_name(),
                "predicted_class": predicted.map(SurfaceClass::canonical_name),
                "true_accessibility": accessibility_name(table.collapse(s.true_class)),
                "predicted_accessibility": predicted.map(|p| accessibility_name(table.collapse(p))),
                "vote_margin": s.vote_margin,
            })
        })
        .collect();
    Value::Array(rows)
}

/// Region rows plus a Total row, classes in canonical order.
pub fn distribution_csv(table: &DistributionTable) -> String {
    let mut out = String::from("region");
    for c in SurfaceClass::ALL {
        out.push(',');
        out.push_str(c.canonical_name());
    }
    out.push_str(",total\n");
    for row in &table.rows {
        out.push_str(&csv_field(&row.region_id));
        for n in row.counts {
            out.push_str(&format!(",{n}"));
        }
        out.push_str(&format!(",{}\n", row.total()));
    }
    out.push_str("Total");
    for n in table.class_totals() {
        out.push_str(&format!(",{n}"));
    }
    out.push_str(&format!(",{}\n", table.grand_total()));
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
