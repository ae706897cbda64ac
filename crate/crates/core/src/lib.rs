//! kerbside-core: the pure, allocation-only half of the kerbside pipeline.
//!
//! Everything here works on in-memory values. File formats, image decoding,
//! the synthetic data generator, the CLI and the annotation service live in
//! the `kerbside` crate.
//!
//! Module map:
//!
//! * [`taxonomy`]: the six surface classes and the accessibility collapse.
//! * [`frame`], [`geo`]: frames, regions, point-in-polygon assignment.
//! * [`stats`]: per-region class distributions and run-length statistics.
//! * [`image`], [`features`], [`knn`]: preprocessing, the texture
//!   descriptor and the baseline nearest-neighbour classifier.
//! * [`eval`]: split protocols, confusion matrices and F1 reports.
//! * [`segment`]: street segments, label aggregation, binary reports and the
//!   route model.
//! * [`annotation`]: batch proposals and the append-only label store.

#![no_std]

extern crate alloc;

pub mod annotation;
pub mod eval;
pub mod features;
pub mod frame;
pub mod geo;
pub mod image;
pub mod knn;
pub mod predictions;
pub mod segment;
pub mod stats;
pub mod taxonomy;

pub use annotation::{AnnotationBatch, LabelDecision, LabelEvent, LabelStore};
pub use eval::{
    ConfusionMatrix, EvaluationReport, Fold, ProtocolResult, SplitProtocol, metrics, run_protocol,
};
pub use features::{FeatureVector, extract_features};
pub use frame::{Frame, FrameSet, GeoPoint, Region, RegionSet};
pub use image::Image;
pub use knn::{KnnClassifier, Prediction, Standardizer};
pub use predictions::PredictionSet;
pub use segment::{RouteModel, Segment, SegmentationConfig};
pub use taxonomy::{Accessibility, CollapseTable, SurfaceClass};
