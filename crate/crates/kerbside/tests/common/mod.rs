#![allow(dead_code)]

use std::path::PathBuf;

use kerbside::pipeline::DataSpec;
use kerbside::synth::GeneratorConfig;
use kerbside_core::eval::{ConfusionMatrix, MetricsOptions, ProtocolResult, metrics_with};

/// Per-region frame counts of the reference corpus, in canonical class order
/// (asphalt, cobblestone, grass, ground_unimproved, pavement, transition).
pub const CORPUS_COUNTS: [(&str, [u64; 6]); 8] = [
    ("A", [0, 1656, 0, 0, 930, 632]),
    ("B", [44, 577, 0, 1224, 1696, 423]),
    ("C", [1017, 47, 0, 0, 3501, 300]),
    ("D", [78, 132, 662, 4252, 0, 39]),
    ("E", [1500, 476, 571, 288, 1940, 161]),
    ("F", [1249, 785, 807, 730, 2677, 192]),
    ("G", [619, 563, 381, 572, 3034, 227]),
    ("H", [1136, 1090, 333, 957, 3612, 211]),
];
pub const CORPUS_ROW_TOTALS: [u64; 8] = [3218, 3964, 4865, 5163, 4936, 6440, 5396, 7339];
pub const CORPUS_GRAND_TOTAL: u64 = 41321;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn corpus_data() -> DataSpec {
    DataSpec {
        manifest: fixture("corpus_manifest.csv"),
        regions: fixture("corpus_regions.geojson"),
        images: None,
        predictions: None,
    }
}

/// Four regions, few short segments: enough for the whole pipeline in seconds.
pub fn tiny_config(seed: u64) -> GeneratorConfig {
    let mut c = GeneratorConfig::bremen_like(seed);
    c.cities[0].n_regions = 4;
    c.segments_per_region = 4;
    c.frames_per_segment_range = (5, 7);
    c
}

/// Macro F1 over the cross-city folds that test a city other than `home`.
pub fn away_city_f1(result: &ProtocolResult, home: &str) -> f64 {
    let mut pooled = ConfusionMatrix::new();
    for f in result.folds.iter().filter(|f| f.fold.fold_id != home) {
        pooled.merge(&f.report.confusion);
    }
    metrics_with(&pooled, &MetricsOptions::default()).unwrap().macro_f1
}
