//! REST routes.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lde_core::metamodel::{Artifact, ArtifactKind};
use lde_core::metrics::{RankLevel, ResultSource};
use lde_core::{QueryFilter, Store};
use serde::de::DeserializeOwned;
use uuid::Uuid;

use crate::analysis::{self, RunQuery, DEFAULT_METRIC};
use crate::error::{ApiError, ErrorCode};

type ApiResult<T> = Result<T, ApiError>;
type AppState = Arc<Store>;

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/v1/objects", post(put_object))
        .route("/v1/objects/{hash}", get(get_object))
        .route("/v1/recommend", post(recommend))
        .route("/v1/analysis/variability", post(variability))
        .route("/v1/analysis/regret", post(regret))
        .route("/v1/experiments/runs", get(experiment_runs))
        .route("/v1/datasets/{id}/top-pipelines", get(top_pipelines))
        .route("/v1/datasets/{id}/top-params", get(top_params))
        .route("/v1/datasets/{id}/similar", get(similar))
        .route("/v1/pipelines/{id}/best-params", get(best_params))
        .route("/v1/{kind}", post(create).get(list))
        .route("/v1/{kind}/{id}", get(read_one).put(replace).delete(remove))
        .fallback(|| async { ApiError::not_found("no such route") })
        .with_state(store)
}

fn kind_of(route: &str) -> ApiResult<ArtifactKind> {
    ArtifactKind::from_route_name(route)
        .ok_or_else(|| ApiError::not_found(format!("unknown collection '{route}'")))
}

fn parse_id(s: &str) -> ApiResult<Uuid> {
    Uuid::parse_str(s).map_err(|_| ApiError::bad_request(format!("'{s}' is not a UUID")))
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn query_pairs(raw: Option<String>) -> ApiResult<Vec<(String, String)>> {
    serde_urlencoded::from_str(raw.as_deref().unwrap_or(""))
        .map_err(|e| ApiError::bad_request(format!("bad query string: {e}")))
}

/// Single-valued query parameters; repeated keys keep the last value.
struct Params(BTreeMap<String, String>);

impl Params {
    fn new(raw: Option<String>, allowed: &[&str]) -> ApiResult<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in query_pairs(raw)? {
            if !allowed.contains(&k.as_str()) {
                return Err(ApiError::bad_request(format!(
                    "unknown query parameter '{k}'"
                )));
            }
            map.insert(k, v);
        }
        Ok(Self(map))
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str, default: T) -> ApiResult<T> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ApiError::bad_request(format!("bad value for '{key}': '{v}'"))),
        }
    }

    fn source(&self) -> ApiResult<ResultSource> {
        match self.str("source") {
            None => Ok(ResultSource::MeanAggregated),
            Some(s) => s.parse().map_err(ApiError::from),
        }
    }
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?
}

async fn create(
    State(store): State<AppState>,
    Path(kind): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let kind = kind_of(&kind)?;
    let value: serde_json::Value = parse_body(&body)?;
    let doc = Artifact::from_json(kind, value)?;
    let id = store.put_artifact(doc)?;
    let stored = store.get_artifact(kind, id)?;
    Ok((StatusCode::CREATED, Json(stored)).into_response())
}

/// `tag` may repeat; `author` filters on authors; any other key is a link
/// field that must equal the given id.
async fn list(
    State(store): State<AppState>,
    Path(kind): Path<String>,
    RawQuery(raw): RawQuery,
) -> ApiResult<Json<Vec<Artifact>>> {
    let kind = kind_of(&kind)?;
    let mut filter = QueryFilter::all();
    for (k, v) in query_pairs(raw)? {
        filter = match k.as_str() {
            "tag" => filter.tag(v),
            "author" => filter.author(v),
            _ => filter.link(k, parse_id(&v)?),
        };
    }
    Ok(Json(store.query_artifacts(kind, &filter)))
}

async fn read_one(
    State(store): State<AppState>,
    Path((kind, id)): Path<(String, String)>,
) -> ApiResult<Json<Artifact>> {
    let kind = kind_of(&kind)?;
    Ok(Json(store.get_artifact(kind, parse_id(&id)?)?))
}

async fn replace(
    State(store): State<AppState>,
    Path((kind, id)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<Artifact>> {
    let kind = kind_of(&kind)?;
    let id = parse_id(&id)?;
    let value: serde_json::Value = parse_body(&body)?;
    let mut doc = Artifact::from_json(kind, value)?;
    if doc.id().is_nil() {
        doc.header_mut().id = id;
    } else if doc.id() != id {
        return Err(ApiError::bad_request("body id differs from path id"));
    }
    store.update_artifact(doc)?;
    Ok(Json(store.get_artifact(kind, id)?))
}

async fn remove(
    State(store): State<AppState>,
    Path((kind, id)): Path<(String, String)>,
) -> ApiResult<StatusCode> {
    let kind = kind_of(&kind)?;
    store.delete_artifact(kind, parse_id(&id)?)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn put_object(State(store): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let r = store.put_object(&body)?;
    Ok((StatusCode::CREATED, Json(r)).into_response())
}

async fn get_object(
    State(store): State<AppState>,
    Path(hash): Path<String>,
) -> ApiResult<Response> {
    let bytes = store.fetch_object(&hash)?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

const RANK_PARAMS: [&str; 3] = ["metric", "source", "n"];

async fn top(
    store: AppState,
    dataset: String,
    raw: Option<String>,
    level: RankLevel,
) -> ApiResult<Response> {
    let p = Params::new(raw, &RANK_PARAMS)?;
    let metric = p.str("metric").unwrap_or(DEFAULT_METRIC).to_string();
    let (source, n) = (p.source()?, p.parse("n", 10usize)?);
    let r = blocking(move || {
        analysis::top_entities(&store, &dataset, level, &metric, source, n).map_err(Into::into)
    })
    .await?;
    Ok(Json(r).into_response())
}

async fn top_pipelines(
    State(store): State<AppState>,
    Path(id): Path<String>,
    RawQuery(raw): RawQuery,
) -> ApiResult<Response> {
    top(store, id, raw, RankLevel::Pipeline).await
}

async fn top_params(
    State(store): State<AppState>,
    Path(id): Path<String>,
    RawQuery(raw): RawQuery,
) -> ApiResult<Response> {
    top(store, id, raw, RankLevel::ParamConfig).await
}

async fn best_params(
    State(store): State<AppState>,
    Path(id): Path<String>,
    RawQuery(raw): RawQuery,
) -> ApiResult<Response> {
    let p = Params::new(raw, &RANK_PARAMS)?;
    let metric = p.str("metric").unwrap_or(DEFAULT_METRIC).to_string();
    let (source, n) = (p.source()?, p.parse("n", 10usize)?);
    let r = blocking(move || {
        analysis::best_params(&store, &id, &metric, source, n).map_err(Into::into)
    })
    .await?;
    Ok(Json(r).into_response())
}

async fn similar(
    State(store): State<AppState>,
    Path(id): Path<String>,
    RawQuery(raw): RawQuery,
) -> ApiResult<Response> {
    let k = Params::new(raw, &["k"])?.parse("k", 5usize)?;
    let r =
        blocking(move || analysis::similar_datasets(&store, &id, k).map_err(Into::into)).await?;
    Ok(Json(r).into_response())
}

async fn experiment_runs(
    State(store): State<AppState>,
    RawQuery(raw): RawQuery,
) -> ApiResult<Response> {
    let p = Params::new(
        raw,
        &["dataset", "dataset_params", "pipeline", "pipeline_params"],
    )?;
    let q = RunQuery {
        dataset: p.str("dataset").map(str::to_string),
        dataset_params: p.str("dataset_params").map(str::to_string),
        pipeline: p.str("pipeline").map(str::to_string),
        pipeline_params: p.str("pipeline_params").map(str::to_string),
    };
    Ok(Json(analysis::experiment_runs(&store, &q)?).into_response())
}

async fn recommend(State(store): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: analysis::RecommendRequest = parse_body(&body)?;
    let r = blocking(move || analysis::recommend(&store, &req).map_err(Into::into)).await?;
    Ok(Json(r).into_response())
}

async fn variability(State(store): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: analysis::VariabilityRequest = parse_body(&body)?;
    let r = blocking(move || analysis::variability(&store, &req).map_err(Into::into)).await?;
    Ok(Json(r).into_response())
}

async fn regret(State(store): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: analysis::RegretRequest = parse_body(&body)?;
    let r = blocking(move || analysis::regret(&store, &req).map_err(Into::into)).await?;
    Ok(Json(r).into_response())
}
