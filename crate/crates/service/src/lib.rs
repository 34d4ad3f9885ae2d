//! HTTP labeling service.
//!
//! Clients open a session over a dataset, stream its points, fetch the
//! ranked viewpoint recommendations and send lasso polygons drawn from a
//! given camera; the server does the selection so every client sees one
//! canonical projection.

mod error;
mod state;

use std::collections::{BTreeMap, BTreeSet};
use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fittsview_core::io::labels_to_le_bytes;
use fittsview_core::metrics::miou;
use fittsview_core::optimizer::ViewpointRecommendation;
use fittsview_core::session::{overview_viewpoint, LabelSession, LassoOutcome, LassoRequest, ReviewState};
use fittsview_core::Viewpoint;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use error::{ApiError, ApiResult};
pub use state::{AppState, DatasetEntry, RecState, ServiceConfig, SessionHandle};

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/datasets", get(list_datasets))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/points", get(points))
        .route("/sessions/{id}/recommendations", get(recommendations))
        .route("/sessions/{id}/lasso", post(lasso))
        .route("/sessions/{id}/checked", post(checked))
        .route("/sessions/{id}/metrics", get(metrics))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/overview", get(overview))
        .fallback(|| async { ApiError::not_found("route") })
        .with_state(state)
}

/// Serves until `shutdown` resolves, then drains open connections.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Shared,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    name: &'static str,
    version: &'static str,
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok",
        name: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
    })
}

#[derive(Serialize)]
struct DatasetInfo {
    name: String,
    categories: BTreeMap<u32, String>,
    has_ground_truth: bool,
    has_instances: bool,
}

async fn list_datasets(State(st): State<Shared>) -> Json<Vec<DatasetInfo>> {
    Json(
        st.datasets
            .values()
            .map(|e| DatasetInfo {
                name: e.manifest.name.clone(),
                categories: e.manifest.categories.clone(),
                has_ground_truth: e.manifest.ground_truth_label_path.is_some(),
                has_instances: e.manifest.instance_label_path.is_some(),
            })
            .collect(),
    )
}

#[derive(Serialize)]
struct SessionInfo {
    id: String,
    dataset: String,
    points: usize,
    categories: BTreeSet<u32>,
    edits: usize,
    checked: BTreeSet<u32>,
    overview: Viewpoint,
}

fn info(handle: &SessionHandle, s: &LabelSession, st: &AppState) -> ApiResult<SessionInfo> {
    Ok(SessionInfo {
        id: s.id.clone(),
        dataset: s.dataset.clone(),
        points: s.labels().len(),
        categories: s.categories.clone(),
        edits: s.edits().len(),
        checked: s.checked(),
        overview: overview_viewpoint(&handle.dataset.cloud, st.config.pipeline.min_distance)?,
    })
}

async fn load_dataset(st: &Shared, entry: &Arc<DatasetEntry>) -> ApiResult<Arc<fittsview_core::io::Dataset>> {
    let (entry, cfg) = (entry.clone(), st.config.pipeline.clone());
    tokio::task::spawn_blocking(move || entry.dataset(&cfg))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Deserialize)]
struct CreateSession {
    dataset: String,
}

async fn create_session(State(st): State<Shared>, body: Bytes) -> ApiResult<(StatusCode, Json<SessionInfo>)> {
    let req: CreateSession = parse(&body)?;
    let entry = st
        .datasets
        .get(&req.dataset)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("dataset {:?}", req.dataset)))?;
    let dataset = load_dataset(&st, &entry).await?;
    let initial = dataset
        .cloud
        .semantic_labels()
        .map_or_else(|| vec![0; dataset.cloud.len()], <[u32]>::to_vec);
    let session = LabelSession::new(
        st.new_session_id(),
        req.dataset,
        st.config.pipeline.viewport,
        entry.categories(&dataset),
        initial,
    )?;
    entry.ensure_recommendations(dataset.clone(), st.config.pipeline.clone());
    if let Some(store) = &st.store {
        store.save(&session)?;
    }
    let handle = Arc::new(SessionHandle {
        dataset,
        entry,
        session: tokio::sync::RwLock::new(session),
    });
    let body = {
        let s = handle.session.read().await;
        info(&handle, &s, &st)?
    };
    st.sessions.write().await.insert(body.id.clone(), handle);
    Ok((StatusCode::CREATED, Json(body)))
}

/// In-memory session, or one restored from the store.
async fn handle(st: &Shared, id: &str) -> ApiResult<Arc<SessionHandle>> {
    if let Some(h) = st.sessions.read().await.get(id) {
        return Ok(h.clone());
    }
    let store = st.store.as_ref().ok_or_else(|| ApiError::not_found(format!("session {id:?}")))?;
    let session = store.load(id)?;
    let entry = st
        .datasets
        .get(&session.dataset)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("dataset {:?}", session.dataset)))?;
    let dataset = load_dataset(st, &entry).await?;
    if dataset.cloud.len() != session.labels().len() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "dataset_changed",
            format!("session has {} labels, dataset {} points", session.labels().len(), dataset.cloud.len()),
        ));
    }
    entry.ensure_recommendations(dataset.clone(), st.config.pipeline.clone());
    let h = Arc::new(SessionHandle {
        dataset,
        entry,
        session: tokio::sync::RwLock::new(session),
    });
    Ok(st.sessions.write().await.entry(id.to_string()).or_insert(h).clone())
}

async fn session_info(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<SessionInfo>> {
    let h = handle(&st, &id).await?;
    let s = h.session.read().await;
    Ok(Json(info(&h, &s, &st)?))
}

/// `u32` count, then `f32` x, y, z per point, then `u32` labels, all
/// little-endian.
async fn points(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let h = handle(&st, &id).await?;
    let labels = h.session.read().await.labels().to_vec();
    let pts = h.dataset.cloud.points();
    let mut out = Vec::with_capacity(4 + 16 * pts.len());
    out.extend_from_slice(&(pts.len() as u32).to_le_bytes());
    for p in pts {
        for c in p.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    out.extend_from_slice(&labels_to_le_bytes(&labels));
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], out).into_response())
}

#[derive(Serialize)]
struct RecommendationList {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    recommendations: Vec<ViewpointRecommendation>,
}

/// Copies finished recommendations into the session if it has none yet.
async fn sync_recommendations(h: &SessionHandle) -> RecommendationList {
    {
        let s = h.session.read().await;
        if s.has_recommendations() {
            return RecommendationList {
                status: "ready",
                message: None,
                recommendations: s.recommendations(),
            };
        }
    }
    match h.entry.rec_state() {
        Some(RecState::Ready { recommendations }) => {
            let mut s = h.session.write().await;
            if !s.has_recommendations() {
                s.set_recommendations(recommendations.as_ref().clone());
            }
            RecommendationList {
                status: "ready",
                message: None,
                recommendations: s.recommendations(),
            }
        }
        Some(RecState::Failed { message }) => RecommendationList {
            status: "failed",
            message: Some(message),
            recommendations: Vec::new(),
        },
        Some(RecState::Pending) | None => RecommendationList {
            status: "pending",
            message: None,
            recommendations: Vec::new(),
        },
    }
}

async fn recommendations(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<RecommendationList>> {
    let h = handle(&st, &id).await?;
    Ok(Json(sync_recommendations(&h).await))
}

fn persist(st: &AppState, s: &LabelSession) -> ApiResult<()> {
    if let Some(store) = &st.store {
        store.save(s)?;
    }
    Ok(())
}

async fn lasso(State(st): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<LassoOutcome>> {
    let req: LassoRequest = parse(&body)?;
    let h = handle(&st, &id).await?;
    sync_recommendations(&h).await;
    let mut s = h.session.write().await;
    let outcome = s.apply_lasso(h.dataset.cloud.points(), req)?;
    persist(&st, &s)?;
    Ok(Json(outcome))
}

#[derive(Deserialize)]
struct CheckRequest {
    recommendation_id: u32,
}

#[derive(Serialize)]
struct CheckResponse {
    recommendation_id: u32,
    state: ReviewState,
}

async fn checked(State(st): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<CheckResponse>> {
    let req: CheckRequest = parse(&body)?;
    let h = handle(&st, &id).await?;
    sync_recommendations(&h).await;
    let mut s = h.session.write().await;
    s.mark_checked(req.recommendation_id)?;
    persist(&st, &s)?;
    Ok(Json(CheckResponse {
        recommendation_id: req.recommendation_id,
        state: s.review_state(req.recommendation_id).unwrap_or(ReviewState::Pending),
    }))
}

#[derive(Serialize)]
struct Metrics {
    miou: f64,
    per_category: BTreeMap<u32, f64>,
    initial_miou: f64,
    delta_miou: f64,
}

async fn metrics(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Metrics>> {
    let h = handle(&st, &id).await?;
    let truth = h.dataset.ground_truth.as_ref().ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "no_ground_truth", "dataset has no ground truth labels")
    })?;
    let s = h.session.read().await;
    let now = miou(s.labels(), truth, None)?;
    let before = miou(s.initial_labels(), truth, None)?;
    Ok(Json(Metrics {
        miou: now.miou,
        per_category: now.per_category,
        initial_miou: before.miou,
        delta_miou: now.miou - before.miou,
    }))
}

async fn export(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let h = handle(&st, &id).await?;
    let bytes = labels_to_le_bytes(h.session.read().await.labels());
    let disposition = format!("attachment; filename=\"{id}.label\"");
    Ok((
        [
            (header::CONTENT_TYPE, "application/octet-stream".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}

async fn overview(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Viewpoint>> {
    let h = handle(&st, &id).await?;
    Ok(Json(overview_viewpoint(&h.dataset.cloud, st.config.pipeline.min_distance)?))
}
