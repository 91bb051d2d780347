//! HTTP inference over a loaded bootstrap ensemble.
//!
//! The ensemble is loaded once, in the background, and never mutated; until
//! it is installed every model endpoint answers `503`. Request bodies are
//! validated field by field and rejected with `400` and a list of
//! `{field, message}` entries.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::bootstrap::{BootstrapEnsemble, ConfidenceBin, GridMode};
use crate::coach::CoachModel;
use crate::engine::{Decision, DecisionBranch, FieldError, FourthDownState, GridCell};
use crate::error::{Error, Result};

/// Confidence level of the intervals the service reports.
pub const DEFAULT_LEVEL: f64 = 0.9;

/// Season assumed by `/coach_probs` when the request names none.
pub const DEFAULT_SEASON: u16 = 2022;

/// Everything the endpoints read, fixed at load time.
pub struct Loaded {
    pub ensemble: BootstrapEnsemble,
    pub fingerprint: String,
    pub coach: Option<CoachModel>,
    pub level: f64,
}

impl Loaded {
    pub fn new(ensemble: BootstrapEnsemble, coach: Option<CoachModel>, level: f64) -> Result<Loaded> {
        let fingerprint = ensemble.fingerprint()?;
        Ok(Loaded { ensemble, fingerprint, coach, level })
    }

    /// Reads an ensemble directory and an optional coach model file.
    pub fn from_paths(ensemble: &std::path::Path, coach: Option<&std::path::Path>, level: f64) -> Result<Loaded> {
        let ensemble = BootstrapEnsemble::load(ensemble)?;
        let coach = match coach {
            Some(p) => Some(CoachModel::from_json(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?),
            None => None,
        };
        Loaded::new(ensemble, coach, level)
    }
}

/// Shared service state: empty until [`ServiceState::install`] is called.
#[derive(Default)]
pub struct ServiceState {
    loaded: OnceLock<Loaded>,
}

impl ServiceState {
    pub fn new() -> Arc<ServiceState> {
        Arc::new(ServiceState::default())
    }

    pub fn ready(loaded: Loaded) -> Arc<ServiceState> {
        let s = ServiceState::new();
        s.install(loaded);
        s
    }

    /// Installs the loaded ensemble. Later calls are ignored.
    pub fn install(&self, loaded: Loaded) {
        if self.loaded.set(loaded).is_err() {
            log::warn!("ensemble already loaded; ignoring a second load");
        }
    }

    pub fn get(&self) -> Option<&Loaded> {
        self.loaded.get()
    }
}

/// Allowed browser origins; empty means any origin.
#[derive(Clone, Debug, Default)]
pub struct CorsConfig {
    pub origins: Vec<String>,
}

impl CorsConfig {
    fn layer(&self) -> Result<CorsLayer> {
        let base = CorsLayer::new().allow_methods(Any).allow_headers(Any);
        if self.origins.is_empty() {
            return Ok(base.allow_origin(Any));
        }
        let origins = self
            .origins
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| Error::InvalidInput(format!("bad CORS origin {o:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(base.allow_origin(AllowOrigin::list(origins)))
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<FieldError>,
}

fn error(status: StatusCode, message: impl Into<String>, fields: Vec<FieldError>) -> Response {
    (status, Json(ErrorBody { error: message.into(), fields })).into_response()
}

fn not_ready() -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, "ensemble is still loading", Vec::new())
}

fn bad_request(fields: Vec<FieldError>) -> Response {
    let message = fields.iter().map(|f| f.message.clone()).collect::<Vec<_>>().join("; ");
    error(StatusCode::BAD_REQUEST, message, fields)
}

fn internal(e: impl std::fmt::Display) -> Response {
    error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), Vec::new())
}

fn field(name: &'static str, message: impl Into<String>) -> FieldError {
    FieldError { field: name, message: message.into() }
}

/// Parses and validates a state from a JSON object.
fn parse_state(value: Value) -> std::result::Result<FourthDownState, Vec<FieldError>> {
    let state: FourthDownState = serde_json::from_value(value).map_err(|e| vec![field("body", e.to_string())])?;
    state.validate()?;
    Ok(state)
}

fn parse_object(body: &[u8]) -> std::result::Result<serde_json::Map<String, Value>, Vec<FieldError>> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(vec![field("body", "expected a JSON object")]),
        Err(e) => Err(vec![field("body", e.to_string())]),
    }
}

#[derive(Debug, Serialize)]
struct RecommendResponse {
    wp_go: f64,
    wp_fg: Option<f64>,
    wp_punt: Option<f64>,
    best: Decision,
    effect_size: Option<f64>,
    boot_pct: f64,
    ci: [f64; 2],
    level: f64,
    bin: ConfidenceBin,
    #[serde(rename = "B")]
    b: usize,
    gains: Vec<f64>,
    branches: Vec<DecisionBranch>,
}

async fn health(State(s): State<Arc<ServiceState>>) -> Response {
    match s.get() {
        None => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({ "status": "loading" }))).into_response(),
        Some(l) => Json(json!({
            "status": "ok",
            "ensemble_fingerprint": l.fingerprint,
            "B": l.ensemble.b(),
            "level": l.level,
            "coach_model": l.coach.is_some(),
        }))
        .into_response(),
    }
}

async fn recommend(State(s): State<Arc<ServiceState>>, body: Bytes) -> Response {
    if s.get().is_none() {
        return not_ready();
    }
    let state = match parse_object(&body).and_then(|m| parse_state(Value::Object(m))) {
        Ok(st) => st,
        Err(fields) => return bad_request(fields),
    };
    let result = tokio::task::spawn_blocking(move || {
        let l = s.get().expect("checked above");
        let report = l.ensemble.report(&state, l.level)?;
        let breakdown = l.ensemble.point.breakdown(&state, &l.ensemble.availability)?;
        let v = report.values;
        Ok::<_, Error>(RecommendResponse {
            wp_go: v.wp_go,
            wp_fg: v.wp_fg,
            wp_punt: v.wp_punt,
            best: v.best,
            effect_size: v.effect_size,
            boot_pct: report.boot_pct,
            ci: [report.ci_lo, report.ci_hi],
            level: report.level,
            bin: report.bin,
            b: report.b,
            gains: report.gains,
            branches: breakdown.branches,
        })
    })
    .await;
    match result {
        Ok(Ok(r)) => Json(r).into_response(),
        Ok(Err(e)) => internal(e),
        Err(e) => internal(e),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryRequest {
    state: Value,
    #[serde(default = "default_y_range")]
    y_range: [u8; 2],
    #[serde(default = "default_z_range")]
    z_range: [u8; 2],
    #[serde(default)]
    mode: GridMode,
}

fn default_y_range() -> [u8; 2] {
    [1, 99]
}

fn default_z_range() -> [u8; 2] {
    [1, 10]
}

#[derive(Debug, Serialize)]
struct BoundaryResponse {
    mode: GridMode,
    cells: Vec<GridCell>,
}

fn check_range(name: &'static str, r: [u8; 2], errs: &mut Vec<FieldError>) {
    if r[0] == 0 || r[1] > 99 || r[0] > r[1] {
        errs.push(field(name, format!("[{}, {}] must satisfy 1 <= lo <= hi <= 99", r[0], r[1])));
    }
}

async fn boundary(State(s): State<Arc<ServiceState>>, body: Bytes) -> Response {
    if s.get().is_none() {
        return not_ready();
    }
    let req: BoundaryRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return bad_request(vec![field("body", e.to_string())]),
    };
    let mut errs = Vec::new();
    check_range("y_range", req.y_range, &mut errs);
    check_range("z_range", req.z_range, &mut errs);
    // The template's own yardline and distance are replaced per cell, so
    // only the remaining fields need to be valid.
    let template = match serde_json::from_value::<FourthDownState>(req.state) {
        Ok(t) => {
            let probe = FourthDownState { yardline: 50, ydstogo: 1, ..t.clone() };
            if let Err(mut e) = probe.validate() {
                errs.append(&mut e);
            }
            Some(t)
        }
        Err(e) => {
            errs.push(field("state", e.to_string()));
            None
        }
    };
    let Some(template) = template.filter(|_| errs.is_empty()) else {
        return bad_request(errs);
    };
    let mode = req.mode;
    let (y, z) = (req.y_range, req.z_range);
    let result = tokio::task::spawn_blocking(move || {
        let l = s.get().expect("checked above");
        l.ensemble.boundary(&template, y[0]..=y[1], z[0]..=z[1], mode)
    })
    .await;
    match result {
        Ok(Ok(cells)) => Json(BoundaryResponse { mode, cells }).into_response(),
        Ok(Err(e)) => internal(e),
        Err(e) => internal(e),
    }
}

async fn coach_probs(State(s): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let Some(l) = s.get() else {
        return not_ready();
    };
    let Some(coach) = &l.coach else {
        return error(StatusCode::NOT_FOUND, "no coach model loaded", Vec::new());
    };
    let mut map = match parse_object(&body) {
        Ok(m) => m,
        Err(fields) => return bad_request(fields),
    };
    let season = match map.remove("season") {
        None | Some(Value::Null) => DEFAULT_SEASON,
        Some(v) => match v.as_u64().and_then(|s| u16::try_from(s).ok()) {
            Some(s) => s,
            None => return bad_request(vec![field("season", "must be a non-negative integer year")]),
        },
    };
    match parse_state(Value::Object(map)) {
        Ok(state) => Json(coach.probs(&state, season)).into_response(),
        Err(fields) => bad_request(fields),
    }
}

/// The service routes over `state`.
pub fn router(state: Arc<ServiceState>, cors: &CorsConfig) -> Result<Router> {
    Ok(Router::new()
        .route("/health", get(health))
        .route("/recommend", post(recommend))
        .route("/boundary", post(boundary))
        .route("/coach_probs", post(coach_probs))
        .layer(cors.layer()?)
        .with_state(state))
}

/// Where to listen and what to load.
#[derive(Clone, Debug)]
pub struct ServeOptions {
    pub listen: SocketAddr,
    pub ensemble_dir: PathBuf,
    pub coach_model: Option<PathBuf>,
    pub level: f64,
    pub cors: CorsConfig,
}

/// Binds, starts loading the ensemble in the background and serves until
/// the process is stopped. Requests that arrive during loading get `503`.
pub async fn serve(opts: ServeOptions) -> Result<()> {
    let state = ServiceState::new();
    let app = router(state.clone(), &opts.cors)?;
    let listener = tokio::net::TcpListener::bind(opts.listen)
        .await
        .map_err(|e| Error::io(opts.listen.to_string(), e))?;
    log::info!("listening on {}", opts.listen);
    let loader = state.clone();
    tokio::task::spawn_blocking(move || {
        match Loaded::from_paths(&opts.ensemble_dir, opts.coach_model.as_deref(), opts.level) {
            Ok(l) => {
                log::info!("ensemble loaded: B = {}, fingerprint {}", l.ensemble.b(), l.fingerprint);
                loader.install(l);
            }
            Err(e) => {
                log::error!("failed to load ensemble: {e}");
                std::process::exit(1);
            }
        }
    });
    axum::serve(listener, app).await.map_err(|e| Error::io("server", e))
}
