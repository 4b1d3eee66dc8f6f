//! JSON-over-HTTP front end for an [`AnnotationStore`].
//!
//! | method | path                      | body / query                                   |
//! |--------|---------------------------|------------------------------------------------|
//! | GET    | `/api/tasks/next`         | `?annotator=ID`                                |
//! | POST   | `/api/labels`             | `{annotator_id, triple_id, label, timestamp?}` |
//! | GET    | `/api/progress`           |                                                |
//! | GET    | `/api/agreement`          | `?a=ID&b=ID`                                   |
//! | GET    | `/api/benchmark/export`   | `?policy=agree_only\|third_pass&adjudicator=&a=&b=&strict=` |
//!
//! Errors come back as `{"error": kind, "message": text}`.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::Deserialize;
use serde_json::json;

use super::{AdjudicationPolicy, AnnotationRecord, AnnotationStore};
use crate::corpus::{LabeledRecord, ValidityLabel};
use crate::error::Error;

pub type SharedStore = Arc<RwLock<AnnotationStore>>;

struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::UnknownInstance(_) => StatusCode::NOT_FOUND,
            Error::ValidationError(_) | Error::SessionError(_) | Error::InvalidRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            Error::EmptyOverlap(..) | Error::IncompleteAnnotation(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({"error": self.0.kind(), "message": self.0.to_string()});
        (status, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn bad(message: &str) -> ApiError {
    ApiError(Error::ValidationError(message.to_string()))
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

async fn next_task(State(store): State<SharedStore>, Query(q): Query<NextQuery>) -> ApiResult {
    let annotator = q.annotator.ok_or_else(|| bad("missing `annotator` query parameter"))?;
    let store = store.read().expect("store lock");
    Ok(Json(store.next_task(&annotator)?).into_response())
}

#[derive(Deserialize)]
struct LabelBody {
    annotator_id: Option<String>,
    triple_id: Option<String>,
    label: Option<String>,
    timestamp: Option<DateTime<Utc>>,
}

async fn submit_label(State(store): State<SharedStore>, body: Option<Json<serde_json::Value>>) -> ApiResult {
    let Json(value) = body.ok_or_else(|| bad("body must be a JSON object"))?;
    let body: LabelBody = serde_json::from_value(value).map_err(|e| bad(&e.to_string()))?;
    let label: ValidityLabel = body.label.ok_or_else(|| bad("missing `label`"))?.parse()?;
    let record = AnnotationRecord {
        annotator_id: body.annotator_id.ok_or_else(|| bad("missing `annotator_id`"))?,
        triple_id: body.triple_id.ok_or_else(|| bad("missing `triple_id`"))?,
        label,
        timestamp: body.timestamp.unwrap_or_else(Utc::now),
    };
    let mut store = store.write().expect("store lock");
    Ok(Json(store.submit(record)?).into_response())
}

async fn progress(State(store): State<SharedStore>) -> ApiResult {
    Ok(Json(store.read().expect("store lock").progress()).into_response())
}

#[derive(Deserialize)]
struct PairQuery {
    a: Option<String>,
    b: Option<String>,
}

async fn agreement(State(store): State<SharedStore>, Query(q): Query<PairQuery>) -> ApiResult {
    let (Some(a), Some(b)) = (q.a, q.b) else {
        return Err(bad("`a` and `b` query parameters are required"));
    };
    Ok(Json(store.read().expect("store lock").agreement(&a, &b)?).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    policy: Option<String>,
    adjudicator: Option<String>,
    a: Option<String>,
    b: Option<String>,
    #[serde(default)]
    strict: bool,
}

async fn export(State(store): State<SharedStore>, Query(q): Query<ExportQuery>) -> ApiResult {
    let policy = match q.policy.as_deref().unwrap_or("agree_only").to_ascii_lowercase().as_str() {
        "agree_only" => AdjudicationPolicy::AgreeOnly,
        "third_pass" => AdjudicationPolicy::ThirdPass {
            adjudicator: q.adjudicator.ok_or_else(|| bad("third_pass needs `adjudicator`"))?,
        },
        other => return Err(bad(&format!("unknown policy `{other}`"))),
    };
    let store = store.read().expect("store lock");
    let (a, b) = match (q.a, q.b) {
        (Some(a), Some(b)) => (a, b),
        _ => match store.annotators().as_slice() {
            [a, b] => (a.clone(), b.clone()),
            _ => return Err(bad("pass `a` and `b` unless exactly two annotators exist")),
        },
    };
    let result = store.adjudicate((&a, &b), &policy, q.strict)?;
    let gold: Vec<LabeledRecord> = result.gold.iter().map(LabeledRecord::from).collect();
    Ok(Json(json!({
        "annotator_a": a,
        "annotator_b": b,
        "policy": policy,
        "gold": gold,
        "quarantined": result.quarantined,
        "pending": result.pending,
        "incomplete": result.incomplete,
    }))
    .into_response())
}

pub fn router(store: SharedStore) -> Router {
    Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/labels", post(submit_label))
        .route("/api/progress", get(progress))
        .route("/api/agreement", get(agreement))
        .route("/api/benchmark/export", get(export))
        .with_state(store)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, store: AnnotationStore) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(RwLock::new(store)))).await
}
