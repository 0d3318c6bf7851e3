use std::collections::BTreeMap;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::{Deserialize, Serialize};
use solarec::community::{AverageDay, CommunityState, ProducerSpec, SharingReport, SharingSummary};
use solarec::profiles::parse_consumption_csv;
use solarec::recommender::{Recommendation, Scorer, with_member};

use crate::error::ApiError;
use crate::state::{AppState, Change, Committed};

/// Canonical JSON body with an `ETag` carrying the revision when given.
pub(crate) fn json_response<T: Serialize>(status: StatusCode, value: &T, revision: Option<u64>) -> Response {
    let body = match solarec::json::to_canonical_string(value) {
        Ok(text) => text,
        Err(e) => return (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    };
    let mut response = Response::new(Body::from(body));
    *response.status_mut() = status;
    response.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    if let Some(rev) = revision {
        if let Ok(v) = HeaderValue::from_str(&format!("\"{rev}\"")) {
            response.headers_mut().insert(header::ETAG, v);
        }
    }
    response
}

/// Accepts `3`, `"3"` and `W/"3"`.
fn if_match(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    let Some(value) = headers.get(header::IF_MATCH) else { return Ok(None) };
    let text = value.to_str().map_err(|_| ApiError::bad_request("BadIfMatch", "If-Match is not ASCII"))?;
    let trimmed = text.trim().trim_start_matches("W/").trim_matches('"');
    trimmed
        .parse()
        .map(Some)
        .map_err(|_| ApiError::bad_request("BadIfMatch", format!("If-Match `{text}` is not a revision number")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    revision: u64,
}

pub(crate) async fn health(State(state): State<AppState>) -> Response {
    let revision = state.revision();
    json_response(StatusCode::OK, &Health { status: "ok", revision }, Some(revision))
}

#[derive(Serialize)]
struct MemberSummary<'a> {
    consumer_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster: Option<usize>,
    total_kwh: f64,
}

#[derive(Serialize)]
struct CommunitySummary<'a> {
    members: Vec<MemberSummary<'a>>,
    producers: &'a [ProducerSpec],
    horizon_hours: usize,
    initial_soc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    start_date: Option<chrono::NaiveDate>,
}

#[derive(Serialize)]
struct CommunityView<'a> {
    revision: u64,
    community: CommunitySummary<'a>,
    report: SharingSummary,
    average_day: AverageDay,
}

fn summarize(c: &CommunityState) -> CommunitySummary<'_> {
    CommunitySummary {
        members: c
            .members
            .iter()
            .map(|m| MemberSummary { consumer_id: &m.consumer_id, cluster: m.cluster, total_kwh: m.series.iter().sum() })
            .collect(),
        producers: &c.producers,
        horizon_hours: c.horizon_hours,
        initial_soc: c.initial_soc,
        start_date: c.start_date,
    }
}

pub(crate) async fn community(State(state): State<AppState>) -> Response {
    let current = state.read();
    let view = CommunityView {
        revision: current.revision,
        community: summarize(&current.community),
        report: current.report.summary(),
        average_day: current.report.average_day(),
    };
    json_response(StatusCode::OK, &view, Some(current.revision))
}

pub(crate) async fn model(State(state): State<AppState>) -> Response {
    let current = state.read();
    json_response(StatusCode::OK, &*current.model, Some(current.revision))
}

#[derive(Serialize)]
struct CandidateView {
    candidate_id: String,
    records: usize,
    span_hours: usize,
    total_kwh: f64,
    whatif: Option<Recommendation>,
    whatif_revision: Option<u64>,
}

#[derive(Serialize)]
struct CandidateList {
    revision: u64,
    candidates: Vec<CandidateView>,
}

pub(crate) async fn list_candidates(State(state): State<AppState>) -> Response {
    let current = state.read();
    let candidates = current
        .candidates
        .values()
        .map(|d| {
            let cached = state.cached_whatif(&d.consumer_id);
            CandidateView {
                candidate_id: d.consumer_id.clone(),
                records: d.len(),
                span_hours: d.span_hours(),
                total_kwh: d.total_kwh(),
                whatif_revision: cached.as_ref().map(|(rev, _)| *rev),
                whatif: cached.map(|(_, r)| r),
            }
        })
        .collect();
    json_response(StatusCode::OK, &CandidateList { revision: current.revision, candidates }, Some(current.revision))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UploadJson {
    candidate_id: Option<String>,
    csv: String,
}

#[derive(Deserialize)]
pub(crate) struct UploadQuery {
    candidate_id: Option<String>,
}

#[derive(Serialize)]
struct Uploaded {
    candidate_id: String,
    revision: u64,
}

fn is_json(headers: &HeaderMap) -> bool {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.trim_start().starts_with("application/json"))
}

/// Stores a candidate from a `text/csv` body or `{"candidate_id", "csv"}` JSON.
pub(crate) async fn upload_candidate(
    State(state): State<AppState>,
    Query(query): Query<UploadQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = if_match(&headers)?;
    let (requested_id, csv) = if is_json(&headers) {
        let upload: UploadJson = serde_json::from_slice(&body)
            .map_err(|e| ApiError::bad_request("MalformedBody", format!("invalid JSON body: {e}")))?;
        (upload.candidate_id.or(query.candidate_id), upload.csv.into_bytes())
    } else {
        (query.candidate_id, body.to_vec())
    };
    if requested_id.as_deref().is_some_and(|id| id.trim().is_empty()) {
        return Err(ApiError::bad_request("MalformedBody", "candidate_id must not be empty"));
    }

    let (revision, candidate_id) = blocking(move || {
        state.mutate(expected, |current| {
            let id = requested_id.unwrap_or_else(|| format!("candidate-{}", current.revision + 1));
            let taken = current.candidates.contains_key(&id) || current.community.members.iter().any(|m| m.consumer_id == id);
            if taken {
                return Err(ApiError::bad_request("DuplicateCandidate", format!("id `{id}` is already in use")));
            }
            let dataset = parse_consumption_csv(csv.as_slice(), &id)
                .map_err(|e| ApiError::bad_request(e.kind(), e.to_string()))?;
            let mut candidates = (*current.candidates).clone();
            candidates.insert(id.clone(), std::sync::Arc::new(dataset));
            Ok((Change { community: None, candidates }, id))
        })
    })
    .await?;
    Ok(json_response(StatusCode::CREATED, &Uploaded { candidate_id, revision }, Some(revision)))
}

fn lookup(current: &Committed, candidate_id: &str) -> Result<std::sync::Arc<solarec::profiles::ConsumerDataset>, ApiError> {
    current.candidates.get(candidate_id).cloned().ok_or_else(|| ApiError::UnknownCandidate(candidate_id.to_string()))
}

/// Scores a candidate against the current revision without changing it.
pub(crate) async fn whatif(State(state): State<AppState>, Path(candidate_id): Path<String>) -> Result<Response, ApiError> {
    let current = state.read();
    let dataset = lookup(&current, &candidate_id)?;
    let revision = current.revision;
    let rec = blocking(move || {
        let scorer = Scorer::new(&current.community, &current.model, &current.policy)?;
        Ok(scorer.score(&dataset)?)
    })
    .await?;
    state.cache_whatif(revision, rec.clone());
    Ok(json_response(StatusCode::OK, &rec, Some(revision)))
}

#[derive(Serialize)]
struct Admitted {
    revision: u64,
    candidate_id: String,
    report: SharingReport,
}

pub(crate) async fn admit(
    State(state): State<AppState>,
    Path(candidate_id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let expected = if_match(&headers)?;
    let st = state.clone();
    let id = candidate_id.clone();
    let (revision, report) = blocking(move || {
        let (revision, ()) = st.mutate(expected, |current| {
            let dataset = lookup(current, &id)?;
            let scorer = Scorer::new(&current.community, &current.model, &current.policy)?;
            let (member, _) = scorer.candidate_member(&dataset)?;
            let community: CommunityState = with_member(&current.community, member);
            let mut candidates = (*current.candidates).clone();
            candidates.remove(&id);
            Ok((Change { community: Some(community), candidates }, ()))
        })?;
        Ok((revision, (*st.read().report).clone()))
    })
    .await?;
    state.forget_whatif(&candidate_id);
    Ok(json_response(StatusCode::OK, &Admitted { revision, candidate_id, report }, Some(revision)))
}

#[derive(Serialize)]
struct Rejected {
    revision: u64,
    candidate_id: String,
}

pub(crate) async fn reject(
    State(state): State<AppState>,
    Path(candidate_id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let expected = if_match(&headers)?;
    let st = state.clone();
    let id = candidate_id.clone();
    let (revision, ()) = blocking(move || {
        st.mutate(expected, |current| {
            lookup(current, &id)?;
            let mut candidates: BTreeMap<_, _> = (*current.candidates).clone();
            candidates.remove(&id);
            Ok((Change { community: None, candidates }, ()))
        })
    })
    .await?;
    state.forget_whatif(&candidate_id);
    Ok(json_response(StatusCode::OK, &Rejected { revision, candidate_id }, Some(revision)))
}
