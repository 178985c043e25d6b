use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use serde_json::{json, Value};

use super::console;
use super::live::{start_session, DecisionKind, DecisionRequest, StartError, Submit};
use super::{LiveSession, Service, SessionView};
use crate::action::parse_response;
use crate::pipeline::{Mode, Phase};
use crate::score::BBox;
use crate::store::{
    annotate_bbox, step_dir_name, LoadedStep, NewSession, OsTag, StoreError, STEPS_DIR,
};

type Shared = Arc<Service>;

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<Value>) -> Self {
        Self {
            status,
            code,
            detail: detail.into(),
        }
    }

    fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "error": self.code, "detail": self.detail })),
        )
            .into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSession(_) | StoreError::UnknownStep(_) => Self::not_found(e),
            StoreError::InvalidAnnotation(m) => {
                Self::new(StatusCode::BAD_REQUEST, "invalid_annotation", m)
            }
            StoreError::StorageFull => Self::new(
                StatusCode::INSUFFICIENT_STORAGE,
                "storage_full",
                e.to_string(),
            ),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(service: Arc<Service>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(snapshot))
        .route("/sessions/{id}/screenshot", get(screenshot))
        .route("/sessions/{id}/pending", get(pending))
        .route("/sessions/{id}/decision", post(decision))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/steps/{step}", get(step))
        .route("/sessions/{id}/steps/{step}/{file}", get(step_png))
        .route("/sessions/{id}/steps/{step}/bbox", post(bbox))
        .route_layer(middleware::from_fn_with_state(service.clone(), auth));
    let app = api.route("/healthz", get(|| async { "ok" }));
    let app = if service.config.console_dir.is_some() {
        app.route("/", get(console::index))
            .route("/{*path}", get(console::file))
    } else {
        app
    };
    app.with_state(service)
}

#[derive(Deserialize)]
struct TokenQuery {
    access_token: Option<String>,
}

async fn auth(
    State(s): State<Shared>,
    Query(q): Query<TokenQuery>,
    headers: HeaderMap,
    req: Request,
    next: Next,
) -> Response {
    if let Some(token) = &s.config.token {
        let bearer = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if bearer != Some(token) && q.access_token.as_ref() != Some(token) {
            return ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "missing or wrong token",
            )
            .into_response();
        }
    }
    next.run(req).await
}

#[derive(Deserialize)]
struct CreateBody {
    task_prompt: String,
    #[serde(default)]
    mode: Mode,
    #[serde(default)]
    theme: Option<String>,
    #[serde(default)]
    language: Option<String>,
    #[serde(default)]
    os: OsTag,
}

async fn create(State(s): State<Shared>, Json(body): Json<CreateBody>) -> ApiResult<Response> {
    if body.task_prompt.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_request",
            "task_prompt is empty",
        ));
    }
    let new = NewSession {
        task_prompt: body.task_prompt,
        language: body.language.unwrap_or_else(|| "en".into()),
        os: body.os,
        theme: body.theme,
        screen: (0, 0),
        mode: body.mode,
    };
    let svc = s.clone();
    let live = tokio::task::spawn_blocking(move || start_session(&svc, new))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| match e {
            StartError::EnvUnreachable(m) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "env_unreachable", m)
            }
            StartError::Store(e) => e.into(),
        })?;
    Ok((StatusCode::CREATED, Json(json!({ "id": live.id }))).into_response())
}

async fn list(State(s): State<Shared>) -> ApiResult<Json<Vec<String>>> {
    Ok(Json(s.config.store.session_ids()?))
}

fn live_or_404(s: &Service, id: &str) -> ApiResult<Arc<LiveSession>> {
    s.live(id)
        .ok_or_else(|| ApiError::not_found(format!("no running session {id}")))
}

fn stored_view(s: &Service, id: &str) -> ApiResult<SessionView> {
    let m = s.config.store.load_session(id)?;
    let plan = m
        .steps
        .iter()
        .rev()
        .find_map(|st| {
            let p: Vec<String> = st
                .actions
                .iter()
                .filter_map(|g| match &g.action {
                    crate::action::Action::Plan { element } => Some(element.clone()),
                    _ => None,
                })
                .collect();
            (!p.is_empty()).then_some(p)
        })
        .unwrap_or_default();
    Ok(SessionView {
        id: m.manifest.id.clone(),
        task_prompt: m.manifest.task_prompt.clone(),
        mode: m.manifest.mode,
        phase: m.manifest.final_phase.unwrap_or(Phase::Failed),
        plan,
        cursor: 0,
        step_count: m.manifest.step_count,
        retries: Vec::new(),
        reformulations: 0,
        failure: m.manifest.failure.clone(),
        pending: None,
        live: false,
    })
}

async fn snapshot(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    match s.live(&id) {
        Some(live) => Ok(Json(live.view())),
        None => Ok(Json(stored_view(&s, &id)?)),
    }
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn screenshot(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    if let Some(shot) = s.live(&id).and_then(|l| l.screenshot()) {
        return Ok(png(tokio::task::spawn_blocking(move || shot.to_png())
            .await
            .map_err(|e| {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
            })?));
    }
    let m = s.config.store.load_session(&id)?;
    let last = m
        .steps
        .last()
        .ok_or_else(|| ApiError::not_found("no screenshot yet"))?;
    Ok(png(last.after_png()?))
}

async fn pending(State(s): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let live = live_or_404(&s, &id)?;
    Ok(match live.pending() {
        Some(p) => Json(p).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn decision(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<DecisionRequest>,
) -> ApiResult<Response> {
    let live = live_or_404(&s, &id)?;
    if let DecisionKind::Edit { response } = &req.decision {
        let outcome = parse_response(response);
        if !outcome.is_clean() {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "edit_parse_error",
                json!({
                    "faults": serde_json::to_value(&outcome.faults).unwrap_or_default(),
                    "actions": outcome.actions.len(),
                }),
            ));
        }
    }
    let step_id = req.step_id;
    match live.submit(req) {
        Submit::Applied => {
            Ok(Json(json!({ "status": "applied", "step_id": step_id })).into_response())
        }
        Submit::Repeated => {
            Ok(Json(json!({ "status": "already_applied", "step_id": step_id })).into_response())
        }
        Submit::Conflict(prev) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "conflict",
            format!("step {step_id} was already decided: {prev}"),
        )),
        Submit::NotPending => Err(ApiError::new(
            StatusCode::CONFLICT,
            "not_pending",
            format!("step {step_id} is not awaiting a decision"),
        )),
    }
}

async fn events(
    State(s): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let live = live_or_404(&s, &id)?;
    let rx = live.subscribe();
    let first = Event::default()
        .event("snapshot")
        .json_data(live.view())
        .expect("view serializes");
    let finished = live.is_finished();
    let stream = futures::stream::unfold(
        (Some(first), rx, finished),
        |(first, mut rx, done)| async move {
            if let Some(e) = first {
                return Some((Ok(e), (None, rx, done)));
            }
            if done {
                return None;
            }
            loop {
                match rx.recv().await {
                    Ok(e) => {
                        let last = e.is_final();
                        let ev = Event::default()
                            .event(e.name())
                            .json_data(&e)
                            .expect("event serializes");
                        return Some((Ok(ev), (None, rx, last)));
                    }
                    Err(tokio::sync::broadcast::error::RecvError::Lagged(n)) => {
                        let ev = Event::default().event("lagged").data(n.to_string());
                        return Some((Ok(ev), (None, rx, false)));
                    }
                    Err(tokio::sync::broadcast::error::RecvError::Closed) => return None,
                }
            }
        },
    );
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

fn load_step(s: &Service, id: &str, step: u32) -> ApiResult<LoadedStep> {
    let dir = s
        .config
        .store
        .session_dir(id)
        .join(STEPS_DIR)
        .join(step_dir_name(step));
    if !dir.is_dir() {
        return Err(ApiError::not_found(format!("no step {step} in {id}")));
    }
    Ok(LoadedStep::load(dir)?)
}

async fn step(
    State(s): State<Shared>,
    Path((id, step)): Path<(String, u32)>,
) -> ApiResult<Json<Value>> {
    let st = load_step(&s, &id, step)?;
    Ok(Json(json!({
        "meta": st.meta,
        "prompt": st.prompt,
        "response": st.response,
        "golden": st.golden,
        "actions": st.actions.iter().map(|a| a.to_json()).collect::<Vec<_>>(),
        "evaluation": st.evaluation,
    })))
}

async fn step_png(
    State(s): State<Shared>,
    Path((id, step, file)): Path<(String, u32, String)>,
) -> ApiResult<Response> {
    let st = load_step(&s, &id, step)?;
    match file.as_str() {
        "before.png" => Ok(png(st.before_png()?)),
        "after.png" => Ok(png(st.after_png()?)),
        _ => Err(ApiError::not_found(file)),
    }
}

#[derive(Deserialize)]
struct BBoxBody {
    action_index: usize,
    bbox: BBox,
}

async fn bbox(
    State(s): State<Shared>,
    Path((id, step)): Path<(String, u32)>,
    Json(body): Json<BBoxBody>,
) -> ApiResult<Json<Value>> {
    let dir = s.config.store.session_dir(&id);
    if !dir.join(crate::store::MANIFEST).is_file() {
        return Err(ApiError::not_found(format!("no session {id}")));
    }
    annotate_bbox(&dir, step, body.action_index, body.bbox)?;
    let st = load_step(&s, &id, step)?;
    Ok(Json(json!({
        "actions": st.actions.iter().map(|a| a.to_json()).collect::<Vec<_>>(),
    })))
}
