//! Triage HTTP API over loaded cases and the label log.
//!
//! | method | path                                   |
//! |--------|----------------------------------------|
//! | GET    | `/api/taxonomy`                        |
//! | GET    | `/api/cases?source&transform&offset&limit` |
//! | GET    | `/api/cases/{source}/{id}`             |
//! | GET    | `/api/cases/{source}/{id}/labels`      |
//! | POST   | `/api/cases/{source}/{id}/labels`      |
//! | GET    | `/api/report`                          |
//!
//! Images are served under `/images/original/<id>.png` and
//! `/images/transformed/<transform>/<id>.png`; a UI bundle, if any, at `/`.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use anyhow::{Context, Result};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use glitchscope_core::audit::{
    now_utc_seconds, taxonomy, CaseCatalog, CaseLabel, CaseRef, CaseSource, LabelStore,
};
use glitchscope_core::tcac::{cross_check_daf, TcacCase};
use glitchscope_core::transform::TransformKind;
use glitchscope_core::{Error, ErrorClass};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::args::ServeArgs;

pub const DEFAULT_LIMIT: usize = 50;
pub const MAX_LIMIT: usize = 1000;

pub struct AppState {
    pub catalog: CaseCatalog,
    /// Single writer; readers take the same lock, so a read sees every
    /// label written before it.
    pub labels: Mutex<LabelStore>,
}

impl AppState {
    /// Loads case files and replays the label log. Fails on the first
    /// malformed line, naming the file and line.
    pub fn load(daf_cases: Option<&std::path::Path>, tcac_cases: Option<&std::path::Path>, labels: &std::path::Path) -> Result<Self> {
        let files: Vec<&std::path::Path> = daf_cases.into_iter().chain(tcac_cases).collect();
        let catalog = CaseCatalog::load_files(&files)?;
        let labels = LabelStore::open(labels)?;
        Ok(AppState {
            catalog,
            labels: Mutex::new(labels),
        })
    }
}

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match (&self.0, self.0.class()) {
            (Error::UnknownCase(_), _) => StatusCode::NOT_FOUND,
            (_, ErrorClass::Validation) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, Default, Deserialize)]
pub struct CaseQuery {
    pub source: Option<String>,
    pub transform: Option<String>,
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelInput {
    #[serde(default)]
    pub fault_ids: Vec<String>,
    #[serde(default)]
    pub note: String,
    pub annotator: String,
    /// UTC seconds; the server clock when omitted.
    pub timestamp: Option<i64>,
}

fn original_url(image_id: &str) -> String {
    format!("/images/original/{image_id}.png")
}

fn transformed_url(transform: TransformKind, image_id: &str) -> String {
    format!("/images/transformed/{transform}/{image_id}.png")
}

fn tcac_summary(c: &TcacCase, labels: usize) -> Value {
    json!({
        "source": "tcac",
        "id": c.case_id(),
        "image_id": c.image_id,
        "transform": c.transform,
        "diff_count": c.diff_count,
        "labels": labels,
    })
}

async fn get_taxonomy() -> Json<Value> {
    Json(json!(taxonomy()))
}

async fn list_cases(State(state): State<Arc<AppState>>, Query(q): Query<CaseQuery>) -> ApiResult<Json<Value>> {
    let source: Option<CaseSource> = q.source.as_deref().map(str::parse).transpose()?;
    let transform: Option<TransformKind> = q.transform.as_deref().map(str::parse).transpose()?;
    let offset = q.offset.unwrap_or(0);
    let limit = q.limit.unwrap_or(DEFAULT_LIMIT).min(MAX_LIMIT);
    let store = state.labels.lock().expect("label store lock");
    let count = |r: CaseRef| store.labels_for(&r).len();

    let mut items: Vec<Value> = Vec::new();
    if transform.is_none() && source != Some(CaseSource::Tcac) {
        items.extend(state.catalog.daf().iter().map(|c| {
            json!({
                "source": "daf",
                "id": c.query_id,
                "image_id": c.query_id,
                "divergence": c.score(),
                "jaccard_at_k": c.divergence.jaccard_at_k,
                "rbo": c.divergence.rbo,
                "labels": count(CaseRef::new(CaseSource::Daf, &c.query_id)),
            })
        }));
    }
    if source != Some(CaseSource::Daf) {
        items.extend(
            state
                .catalog
                .tcac()
                .iter()
                .filter(|c| transform.is_none_or(|t| c.transform == t))
                .map(|c| tcac_summary(c, count(CaseRef::new(CaseSource::Tcac, c.case_id())))),
        );
    }
    let total = items.len();
    let page: Vec<Value> = items.into_iter().skip(offset).take(limit).collect();
    Ok(Json(json!({ "total": total, "offset": offset, "limit": limit, "cases": page })))
}

fn resolve(state: &AppState, source: &str, id: &str) -> ApiResult<CaseRef> {
    let r = CaseRef::new(source.parse()?, id);
    if !state.catalog.contains(&r) {
        return Err(Error::UnknownCase(r.to_string()).into());
    }
    Ok(r)
}

async fn get_case(State(state): State<Arc<AppState>>, Path((source, id)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let r = resolve(&state, &source, &id)?;
    let store = state.labels.lock().expect("label store lock");
    let labels: Vec<&CaseLabel> = store.labels_for(&r);
    let body = match r.source {
        CaseSource::Daf => {
            let c = state.catalog.daf_case(&id).expect("resolved");
            json!({
                "source": "daf",
                "id": id,
                "image_id": c.query_id,
                "original_image_url": original_url(&c.query_id),
                "neighbor_image_urls": c.referenced_ids().into_iter().skip(1).map(|n| (n.to_string(), original_url(n))).collect::<std::collections::BTreeMap<_, _>>(),
                "case": c,
                "labels": labels,
            })
        }
        CaseSource::Tcac => {
            let c = state.catalog.tcac_case(&id).expect("resolved");
            let daf = c.daf.clone().unwrap_or_else(|| cross_check_daf(c, state.catalog.daf()));
            json!({
                "source": "tcac",
                "id": id,
                "image_id": c.image_id,
                "transform": c.transform,
                "original_image_url": original_url(&c.image_id),
                "transformed_image_url": transformed_url(c.transform, &c.image_id),
                "case": c,
                "daf": daf,
                "labels": labels,
            })
        }
    };
    Ok(Json(body))
}

async fn get_labels(State(state): State<Arc<AppState>>, Path((source, id)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let r = resolve(&state, &source, &id)?;
    let store = state.labels.lock().expect("label store lock");
    let history: Vec<&CaseLabel> = store.history().iter().filter(|l| l.case_ref == r).collect();
    Ok(Json(json!({ "current": store.labels_for(&r), "history": history })))
}

async fn post_label(
    State(state): State<Arc<AppState>>,
    Path((source, id)): Path<(String, String)>,
    Json(input): Json<LabelInput>,
) -> ApiResult<(StatusCode, Json<CaseLabel>)> {
    let r = resolve(&state, &source, &id)?;
    let label = CaseLabel {
        case_ref: r,
        fault_ids: input.fault_ids,
        note: input.note,
        annotator: input.annotator,
        timestamp: input.timestamp.unwrap_or_else(now_utc_seconds),
    };
    let saved = label.clone();
    tokio::task::spawn_blocking(move || {
        let mut store = state.labels.lock().expect("label store lock");
        store.record_label(label, &state.catalog)
    })
    .await
    .expect("label writer panicked")?;
    Ok((StatusCode::CREATED, Json(saved)))
}

async fn get_report(State(state): State<Arc<AppState>>) -> Json<Value> {
    let store = state.labels.lock().expect("label store lock");
    Json(json!(store.report(&state.catalog)))
}

pub struct Assets {
    pub images: Option<PathBuf>,
    pub transformed: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

pub fn router(state: Arc<AppState>, assets: &Assets) -> Router {
    let mut app = Router::new()
        .route("/api/taxonomy", get(get_taxonomy))
        .route("/api/cases", get(list_cases))
        .route("/api/cases/{source}/{id}", get(get_case))
        .route("/api/cases/{source}/{id}/labels", get(get_labels).post(post_label))
        .route("/api/report", get(get_report))
        .with_state(state);
    if let Some(dir) = &assets.images {
        app = app.nest_service("/images/original", ServeDir::new(dir));
    }
    if let Some(dir) = &assets.transformed {
        app = app.nest_service("/images/transformed", ServeDir::new(dir));
    }
    if let Some(dir) = &assets.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app
}

/// Serves until `shutdown` resolves, then flushes the label log.
pub async fn serve_until(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    assets: &Assets,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let app = router(state.clone(), assets);
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .context("server error")?;
    state.labels.lock().expect("label store lock").flush()?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let state = Arc::new(AppState::load(args.daf_cases.as_deref(), args.tcac_cases.as_deref(), &args.labels)?);
    let assets = Assets {
        images: args.images.clone(),
        transformed: args.transformed.clone(),
        static_dir: args.static_dir.clone(),
    };
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| Error::invalid("listen address", format!("{}:{}: {e}", args.host, args.port)))?;
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(format!("{addr}"), e))?;
        eprintln!(
            "serving {} DAF and {} TCAC cases on http://{addr}",
            state.catalog.daf().len(),
            state.catalog.tcac().len()
        );
        serve_until(listener, state, &assets, shutdown_signal()).await
    })
}
