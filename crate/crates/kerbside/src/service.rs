//! Local HTTP API for the labelling front end.
//!
//! Labels live only in the NDJSON log; manifest labels are ignored so that
//! every frame starts unlabelled. Writes go through one mutex, so log order
//! equals acceptance order.

use std::collections::BTreeMap;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderMap, StatusCode, header};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kerbside_core::annotation::{AnnotationBatch, AnnotationError, LabelDecision, LabelStore, propose_batches};
use kerbside_core::frame::{Frame, FrameSet};
use kerbside_core::segment::{SegmentationConfig, derive_segments};
use kerbside_core::stats::run_length_stats;
use kerbside_core::taxonomy::{CollapseTable, SurfaceClass, parse_surface_class};
use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::geojson::export_geojson;
use crate::imageio::ImageFormat;
use crate::labels::LabelLog;

pub const DEFAULT_PORT: u16 = 8377;
pub const PORT_ENV: &str = "KERBSIDE_PORT";
pub const DEFAULT_MAX_BATCH: usize = 32;

pub struct ServiceState {
    frames: FrameSet,
    image_root: PathBuf,
    segmentation: SegmentationConfig,
    collapse: CollapseTable,
    store: LabelStore,
    log: LabelLog,
    outstanding: BTreeMap<String, AnnotationBatch>,
    clock: fn() -> i64,
}

fn wall_clock_ms() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as i64)
}

impl ServiceState {
    /// Replays the log at `log_path` (created if absent). Events naming
    /// frames outside `frames` are rejected.
    pub fn open(frames: FrameSet, image_root: PathBuf, log_path: &std::path::Path) -> Result<Self> {
        let (log, events) = LabelLog::open(log_path)?;
        if let Some(e) = events.iter().find(|e| frames.get(&e.frame_id).is_none()) {
            return Err(kerbside_core::predictions::PredictionError::UnknownFrameId(e.frame_id.clone()).into());
        }
        let mut frames = frames;
        frames.update(|f| f.true_label = None);
        Ok(ServiceState {
            frames,
            image_root,
            segmentation: SegmentationConfig::default(),
            collapse: CollapseTable::default(),
            store: LabelStore::replay(events),
            log,
            outstanding: BTreeMap::new(),
            clock: wall_clock_ms,
        })
    }

    pub fn with_clock(mut self, clock: fn() -> i64) -> Self {
        self.clock = clock;
        self
    }

    pub fn store(&self) -> &LabelStore {
        &self.store
    }

    fn labelled_frames(&self) -> FrameSet {
        let mut frames = self.frames.clone();
        self.store.apply_to(&mut frames);
        frames
    }
}

type Shared = Arc<Mutex<ServiceState>>;

pub fn router(state: ServiceState) -> Router {
    Router::new()
        .route("/api/batches/next", get(next_batch))
        .route("/api/batches/{id}/labels", post(post_labels))
        .route("/api/frames/{id}/image", get(frame_image))
        .route("/api/progress", get(progress))
        .route("/api/export/geojson", get(export))
        .with_state(Arc::new(Mutex::new(state)))
}

/// The port from `KERBSIDE_PORT` when set, else `fallback`.
pub fn resolve_port(fallback: u16) -> Result<u16> {
    match std::env::var(PORT_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{PORT_ENV}={v:?} is not a port number"))),
        Err(_) => Ok(fallback),
    }
}

/// Serves on 127.0.0.1 only until ctrl-c.
pub async fn serve(state: ServiceState, port: u16) -> Result<()> {
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Config(format!("cannot bind {addr}: {e}")))?;
    log::info!("listening on http://{}", listener.local_addr().map_or(addr, |a| a));
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Config(format!("server error: {e}")))
}

struct ApiError(StatusCode, String, String);

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError(status, code.into(), message.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1, "message": self.2 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.code(), e.to_string())
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let status = match e {
            AnnotationError::UnknownBatch(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, "annotation", e.to_string())
    }
}

fn lock(state: &Shared) -> std::sync::MutexGuard<'_, ServiceState> {
    state.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

#[derive(Deserialize)]
struct NextQuery {
    max: Option<usize>,
}

/// Path-segment encoding for ids used in URLs.
fn image_url(frame_id: &str) -> String {
    let mut out = String::from("/api/frames/");
    for b in frame_id.bytes() {
        if b.is_ascii_alphanumeric() || b"-._~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out.push_str("/image");
    out
}

fn frame_json(f: &Frame) -> serde_json::Value {
    json!({
        "frame_id": f.frame_id,
        "timestamp_ms": f.timestamp_ms,
        "lat": f.location.lat,
        "lon": f.location.lon,
        "segment_id": f.segment_id,
    })
}

async fn next_batch(State(state): State<Shared>, Query(q): Query<NextQuery>) -> std::result::Result<Response, ApiError> {
    let max = q.max.unwrap_or(DEFAULT_MAX_BATCH);
    let mut st = lock(&state);
    let frames = st.labelled_frames();
    let batches = propose_batches(&frames, max, &st.segmentation)?;
    let Some(batch) = batches.into_iter().next() else {
        return Ok(StatusCode::NO_CONTENT.into_response());
    };
    let body = json!({
        "batch_id": batch.batch_id,
        "frame_ids": batch.frame_ids,
        "image_urls": batch.frame_ids.iter().map(|id| image_url(id)).collect::<Vec<_>>(),
        "classes": SurfaceClass::ALL.map(SurfaceClass::canonical_name),
        "frames": batch.frame_ids.iter().map(|id| frame_json(frames.get(id).expect("proposed from set"))).collect::<Vec<_>>(),
    });
    st.outstanding.insert(batch.batch_id.clone(), batch);
    Ok(Json(body).into_response())
}

#[derive(Deserialize)]
struct RawDecision {
    start: usize,
    end: usize,
    label: String,
}

#[derive(Deserialize)]
struct LabelsBody {
    decisions: Vec<RawDecision>,
}

async fn post_labels(
    State(state): State<Shared>,
    UrlPath(batch_id): UrlPath<String>,
    headers: HeaderMap,
    Json(body): Json<LabelsBody>,
) -> std::result::Result<StatusCode, ApiError> {
    let decisions = body
        .decisions
        .into_iter()
        .map(|d| {
            let label = parse_surface_class(&d.label)
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_class", e.to_string()))?;
            Ok(LabelDecision {
                start: d.start,
                end: d.end,
                label,
            })
        })
        .collect::<std::result::Result<Vec<_>, ApiError>>()?;
    let annotator = headers
        .get("x-annotator")
        .and_then(|v| v.to_str().ok())
        .unwrap_or("anonymous")
        .to_string();

    let mut st = lock(&state);
    let batch = st
        .outstanding
        .get(&batch_id)
        .cloned()
        .ok_or_else(|| AnnotationError::UnknownBatch(batch_id.clone()))?;
    let now = (st.clock)();
    // Validate against a scratch copy so a failed log write leaves no trace.
    let mut scratch = st.store.clone();
    let events = scratch.apply_labels(std::slice::from_ref(&batch), &batch_id, &decisions, &annotator, now)?;
    st.log.append(&events)?;
    st.store = scratch;
    st.outstanding.remove(&batch_id);
    Ok(StatusCode::NO_CONTENT)
}

async fn frame_image(State(state): State<Shared>, UrlPath(frame_id): UrlPath<String>) -> std::result::Result<Response, ApiError> {
    let path = {
        let st = lock(&state);
        let frame = st
            .frames
            .get(&frame_id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_frame_id", format!("no frame {frame_id:?}")))?;
        st.image_root.join(&frame.image_ref)
    };
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "missing_image", format!("image for frame {frame_id:?} is missing")))?;
    let content_type = match ImageFormat::detect(&bytes) {
        Some(ImageFormat::Png) => "image/png",
        Some(ImageFormat::Pnm) if bytes[1] == b'5' => ImageFormat::Pnm.content_type(1),
        Some(ImageFormat::Pnm) => ImageFormat::Pnm.content_type(3),
        None => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}

async fn progress(State(state): State<Shared>) -> Json<serde_json::Value> {
    let st = lock(&state);
    let mut labelled: Vec<&Frame> = st.frames.iter().filter(|f| st.store.label(&f.frame_id).is_some()).collect();
    labelled.sort_by(|a, b| (a.timestamp_ms, &a.frame_id).cmp(&(b.timestamp_ms, &b.frame_id)));
    let sequence: Vec<_> = labelled.iter().map(|f| st.store.label(&f.frame_id)).collect();
    let mean_run_length = run_length_stats(&sequence).map_or(0.0, |(_, mean)| mean);
    Json(json!({
        "labeled": st.store.labeled_count(),
        "total": st.frames.len(),
        "mean_run_length": mean_run_length,
    }))
}

async fn export(State(state): State<Shared>) -> std::result::Result<Json<serde_json::Value>, ApiError> {
    let st = lock(&state);
    let labelled = FrameSet::new(
        st.labelled_frames()
            .into_frames()
            .into_iter()
            .filter(|f| f.true_label.is_some())
            .collect(),
    )
    .map_err(Error::from)?;
    let segments = if labelled.is_empty() {
        Vec::new()
    } else {
        match derive_segments(&labelled, &st.segmentation) {
            Ok(s) => s,
            Err(kerbside_core::segment::SegmentError::NoSegmentableFrames) => Vec::new(),
            Err(e) => return Err(Error::from(e).into()),
        }
    };
    Ok(Json(export_geojson(&segments, &st.collapse)))
}
