use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use foodpair_core::pairscore::ScoreStats;
use foodpair_core::recommend::{PairingAnswer, PairingEngine, PairingStatus, RankFilter};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

const MAX_LIMIT: usize = 200;
const DEFAULT_LIMIT: usize = 20;
const MAX_K: usize = 1000;
const DEFAULT_K: usize = 10;
const MAX_GRID_SIDE: usize = 10;

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<PairingEngine>,
    pub stats: ScoreStats,
    pub cors_allowed_origin: Option<HeaderValue>,
}

impl AppState {
    pub fn new(engine: PairingEngine, stats: ScoreStats, cors_allowed_origin: Option<&str>) -> Self {
        Self {
            engine: Arc::new(engine),
            stats,
            cors_allowed_origin: cors_allowed_origin.and_then(|o| HeaderValue::from_str(o).ok()),
        }
    }
}

/// One pair lookup as returned by `/api/score` and inside `/api/compare` grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBody {
    pub a: String,
    pub b: String,
    pub predicted_score: f64,
    pub status: PairingStatus,
    pub true_score: Option<f64>,
    pub cooccurrence: Option<u64>,
}

impl ScoreBody {
    fn new(a: &str, answer: PairingAnswer) -> Self {
        Self {
            a: a.to_owned(),
            b: answer.partner,
            predicted_score: answer.predicted_score,
            status: answer.status,
            true_score: answer.true_score,
            cooccurrence: answer.cooccurrence,
        }
    }
}

struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            body: json!({ "error": code, "message": message.into() }),
        }
    }
}

impl From<foodpair_core::Error> for ApiError {
    fn from(e: foodpair_core::Error) -> Self {
        use foodpair_core::Error as E;
        match e {
            E::UnknownIngredient { token, suggestions } => Self {
                status: StatusCode::NOT_FOUND,
                body: json!({ "error": "unknown_ingredient", "token": token, "suggestions": suggestions }),
            },
            E::SelfPair(t) => Self::bad_request("self_pair", format!("`{t}` cannot be paired with itself")),
            E::InvalidArgument(m) => Self::bad_request("invalid_argument", m),
            other => Self {
                status: StatusCode::INTERNAL_SERVER_ERROR,
                body: json!({ "error": "internal", "message": other.to_string() }),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type Params = Query<HashMap<String, String>>;

fn required<'a>(q: &'a HashMap<String, String>, name: &str) -> Result<&'a str, ApiError> {
    q.get(name)
        .map(String::as_str)
        .ok_or_else(|| ApiError::bad_request("missing_parameter", format!("`{name}` is required")))
}

fn bounded(q: &HashMap<String, String>, name: &str, default: usize, max: usize) -> Result<usize, ApiError> {
    let Some(raw) = q.get(name) else {
        return Ok(default);
    };
    match raw.parse::<usize>() {
        Ok(v) if (1..=max).contains(&v) => Ok(v),
        _ => Err(ApiError::bad_request(
            "invalid_parameter",
            format!("`{name}` must be an integer in 1..={max}"),
        )),
    }
}

async fn health(State(s): State<AppState>) -> Json<Value> {
    Json(json!({ "status": "ok", "vocab_size": s.engine.vocab_size() }))
}

async fn stats(State(s): State<AppState>) -> Json<Value> {
    Json(json!({
        "predictor": s.engine.predictor().name(),
        "vocab_size": s.engine.vocab_size(),
        "known_pairs": s.engine.dataset().len(),
        "mean": s.stats.mean,
        "std": s.stats.std,
        "top_threshold": s.stats.top_threshold,
    }))
}

async fn ingredients(State(s): State<AppState>, Query(q): Params) -> Result<Json<Value>, ApiError> {
    let limit = bounded(&q, "limit", DEFAULT_LIMIT, MAX_LIMIT)?;
    let prefix = q.get("prefix").map(String::as_str).unwrap_or("");
    let hits: Vec<Value> = s
        .engine
        .search(prefix, limit)
        .into_iter()
        .map(|(token, occurrence)| json!({ "token": token, "occurrence": occurrence }))
        .collect();
    Ok(Json(Value::Array(hits)))
}

async fn score(State(s): State<AppState>, Query(q): Params) -> Result<Json<ScoreBody>, ApiError> {
    let a = required(&q, "a")?;
    let b = required(&q, "b")?;
    let answer = s.engine.score_pair(a, b)?;
    Ok(Json(ScoreBody::new(a, answer)))
}

async fn rank(State(s): State<AppState>, Query(q): Params) -> Result<Json<Vec<PairingAnswer>>, ApiError> {
    let ingredient = required(&q, "ingredient")?;
    let k = bounded(&q, "k", DEFAULT_K, MAX_K)?;
    let filter = match q.get("filter") {
        None => RankFilter::All,
        Some(f) => f
            .parse()
            .map_err(|e: foodpair_core::Error| ApiError::bad_request("invalid_parameter", e.to_string()))?,
    };
    Ok(Json(s.engine.rank_partners(ingredient, k, filter)?))
}

#[derive(Deserialize)]
struct CompareRequest {
    targets: Vec<String>,
    probes: Vec<String>,
}

async fn compare(State(s): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: CompareRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request("invalid_body", e.to_string()))?;
    for (name, list) in [("targets", &req.targets), ("probes", &req.probes)] {
        if list.is_empty() || list.len() > MAX_GRID_SIDE {
            return Err(ApiError::bad_request(
                "invalid_body",
                format!("`{name}` must hold 1..={MAX_GRID_SIDE} ingredients"),
            ));
        }
    }
    let unknown = s
        .engine
        .unknown_tokens(req.targets.iter().chain(&req.probes).map(String::as_str));
    if !unknown.is_empty() {
        let suggestions: BTreeMap<&str, Vec<String>> =
            unknown.iter().map(|t| (t.as_str(), s.engine.suggestions(t))).collect();
        return Err(ApiError {
            status: StatusCode::NOT_FOUND,
            body: json!({ "error": "unknown_ingredient", "tokens": unknown, "suggestions": suggestions }),
        });
    }
    let targets: Vec<&str> = req.targets.iter().map(String::as_str).collect();
    let probes: Vec<&str> = req.probes.iter().map(String::as_str).collect();
    let grid = s.engine.compare_targets(&targets, &probes)?;
    let grid: Vec<Vec<ScoreBody>> = grid
        .into_iter()
        .zip(&targets)
        .map(|(row, t)| row.into_iter().map(|a| ScoreBody::new(t, a)).collect())
        .collect();
    Ok(Json(json!({ "targets": targets, "probes": probes, "grid": grid })))
}

async fn cors(State(s): State<AppState>, req: Request, next: Next) -> Response {
    let Some(origin) = s.cors_allowed_origin.clone() else {
        return next.run(req).await;
    };
    let mut res = if req.method() == Method::OPTIONS {
        StatusCode::NO_CONTENT.into_response()
    } else {
        next.run(req).await
    };
    let h = res.headers_mut();
    h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, origin);
    h.insert(header::ACCESS_CONTROL_ALLOW_METHODS, HeaderValue::from_static("GET, POST, OPTIONS"));
    h.insert(header::ACCESS_CONTROL_ALLOW_HEADERS, HeaderValue::from_static("content-type"));
    res
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        body: json!({ "error": "not_found" }),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/stats", get(stats))
        .route("/api/ingredients", get(ingredients))
        .route("/api/score", get(score))
        .route("/api/rank", get(rank))
        .route("/api/compare", axum::routing::post(compare))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(state.clone(), cors))
        .with_state(state)
}
