//! HTTP front end for planning, execution and scenario generation.
//!
//! Successful responses are `{"request_id": .., "result": <document>}` where
//! the document text is exactly what the command line prints for the same
//! inputs with `--format structured`. Failures are
//! `{"request_id": .., "error": {"code", "message", "location"}}`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sketchbot_core::error::IoError;
use sketchbot_core::geometry::Point2;
use sketchbot_core::io::{self, Document, NoiseLevels, ParamsFile, SceneFile, SketchFile, SCHEMA_VERSION};
use sketchbot_core::metrics::ToleranceName;
use sketchbot_core::service::{self, ExecuteOptions, ServiceError};
use sketchbot_core::world::{NoiseModel, ScenarioSpec, SceneGrid};
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub const REQUEST_ID_HEADER: &str = "x-request-id";

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Root holding `scenes/<id>.json` and `assets/<id>`.
    pub data_dir: Option<PathBuf>,
    /// Allowed CORS origins; empty allows any origin.
    pub allowed_origins: Vec<String>,
    pub max_body_bytes: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            allowed_origins: Vec::new(),
            max_body_bytes: 16 * 1024 * 1024,
        }
    }
}

pub fn router(config: GatewayConfig) -> Router {
    let cors = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE, header::HeaderName::from_static(REQUEST_ID_HEADER)])
        .expose_headers([header::HeaderName::from_static(REQUEST_ID_HEADER)]);
    let cors = if config.allowed_origins.is_empty() {
        cors.allow_origin(Any)
    } else {
        let origins: Vec<HeaderValue> = config
            .allowed_origins
            .iter()
            .filter_map(|o| HeaderValue::from_str(o).ok())
            .collect();
        cors.allow_origin(AllowOrigin::list(origins))
    };
    let limit = config.max_body_bytes;
    Router::new()
        .route("/plan", post(plan))
        .route("/execute", post(execute))
        .route("/scenario", post(scenario))
        .route("/scenes", get(scenes))
        .route("/scene/{id}", get(scene))
        .route("/asset/{id}", get(asset))
        .with_state(Arc::new(config))
        .layer(DefaultBodyLimit::max(limit))
        .layer(cors)
        .layer(CatchPanicLayer::custom(internal_error))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub location: Option<String>,
}

struct Failure {
    status: StatusCode,
    body: ErrorBody,
}

impl Failure {
    fn new(status: StatusCode, code: &str, message: impl ToString, location: Option<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.to_string(),
                location,
            },
        }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found"), None)
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        let status = match e {
            ServiceError::Validation(_) => StatusCode::BAD_REQUEST,
            ServiceError::Runtime(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Failure::new(status, e.code(), &e, e.location().map(str::to_string))
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        ServiceError::Validation(e).into()
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn with_id(mut resp: Response, id: &str) -> Response {
    if let Ok(v) = HeaderValue::from_str(id) {
        resp.headers_mut().insert(REQUEST_ID_HEADER, v);
    }
    resp
}

/// Envelope around the canonical text of `doc`.
fn success<T: Serialize>(id: &str, doc: &T) -> Response {
    let text = io::to_string(doc);
    let body = format!(
        "{{\n\"request_id\": {},\n\"result\": {}\n}}\n",
        json_string(id),
        text.trim_end()
    );
    let resp = (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], body).into_response();
    with_id(resp, id)
}

fn failure(id: &str, f: Failure) -> Response {
    #[derive(Serialize)]
    struct Envelope<'a> {
        request_id: &'a str,
        error: &'a ErrorBody,
    }
    let body = io::to_string(&Envelope {
        request_id: id,
        error: &f.body,
    });
    let resp = (f.status, [(header::CONTENT_TYPE, "application/json")], body).into_response();
    with_id(resp, id)
}

fn internal_error(_: Box<dyn std::any::Any + Send + 'static>) -> Response {
    let id = uuid::Uuid::new_v4().to_string();
    failure(
        &id,
        Failure::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            format!("internal error (reference {id})"),
            None,
        ),
    )
}

fn request_id(headers: &HeaderMap, body_id: Option<&str>) -> String {
    body_id
        .map(str::to_string)
        .or_else(|| headers.get(REQUEST_ID_HEADER).and_then(|v| v.to_str().ok()).map(str::to_string))
        .unwrap_or_else(|| uuid::Uuid::new_v4().to_string())
}

/// Request id from a body that failed to parse, when it can still be read.
fn loose_request_id(body: &[u8]) -> Option<String> {
    #[derive(Deserialize)]
    struct Probe {
        request_id: Option<String>,
    }
    serde_json::from_slice::<Probe>(body).ok().and_then(|p| p.request_id)
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, Failure> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Failure::new(
            StatusCode::BAD_REQUEST,
            "validation",
            e.into_inner(),
            Some(if path == "." { "$".into() } else { path }),
        )
    })
}

/// Validate a nested document, prefixing error locations with `field`.
fn nested<T: Document>(doc: &T, version: u32, field: &str) -> Result<(), Failure> {
    let prefix = |e: IoError| match e {
        IoError::Validation { location, message } | IoError::Parse { location, message } => IoError::Validation {
            location: format!("{field}.{location}"),
            message,
        },
        IoError::SchemaVersionUnknown { found, supported } => IoError::Validation {
            location: format!("{field}.schema_version"),
            message: format!("unknown schema version {found} (supported: {supported})"),
        },
        e => e,
    };
    if version != SCHEMA_VERSION {
        return Err(prefix(IoError::SchemaVersionUnknown {
            found: version.to_string(),
            supported: SCHEMA_VERSION,
        })
        .into());
    }
    doc.validate().map_err(|e| prefix(e).into())
}

fn scenes_dir(config: &GatewayConfig) -> Option<PathBuf> {
    config.data_dir.as_ref().map(|d| d.join("scenes"))
}

/// Ids are plain file stems: letters, digits, `-`, `_` and inner dots.
fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && !id.contains("..")
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn load_scene_by_id(config: &GatewayConfig, id: &str) -> Result<SceneFile, Failure> {
    let dir = scenes_dir(config).ok_or_else(|| Failure::not_found("scene"))?;
    if !valid_id(id) {
        return Err(Failure::not_found("scene"));
    }
    let path = dir.join(format!("{id}.json"));
    if !path.is_file() {
        return Err(Failure::not_found("scene"));
    }
    io::read::<SceneFile>(&path).map_err(|e| match e {
        IoError::File { .. } => Failure::not_found("scene"),
        e => Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", format!("stored scene {id} is invalid: {e}"), None),
    })
}

fn resolve_scene(config: &GatewayConfig, inline: Option<&SceneFile>, id: Option<&str>) -> Result<Option<SceneGrid>, Failure> {
    match (inline, id) {
        (Some(_), Some(_)) => Err(Failure::new(
            StatusCode::BAD_REQUEST,
            "validation",
            "give either scene or scene_id, not both",
            Some("scene_id".into()),
        )),
        (Some(s), None) => {
            nested(s, s.schema_version, "scene")?;
            Ok(Some(s.to_grid()?))
        }
        (None, Some(id)) => Ok(Some(load_scene_by_id(config, id)?.to_grid()?)),
        (None, None) => Ok(None),
    }
}

fn params_or_default(p: Option<ParamsFile>) -> Result<ParamsFile, Failure> {
    let p = p.unwrap_or_default();
    nested(&p, p.schema_version, "params")?;
    Ok(p)
}

async fn blocking<F>(f: F) -> Response
where
    F: FnOnce() -> Response + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r,
        Err(_) => internal_error(Box::new(())),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    #[serde(default)]
    pub request_id: Option<String>,
    pub sketch: SketchFile,
    #[serde(default)]
    pub scene: Option<SceneFile>,
    #[serde(default)]
    pub scene_id: Option<String>,
    #[serde(default)]
    pub params: Option<ParamsFile>,
    #[serde(default)]
    pub policy: Option<String>,
}

async fn plan(State(config): State<Arc<GatewayConfig>>, headers: HeaderMap, body: Bytes) -> Response {
    blocking(move || {
        let req: PlanRequest = match parse_body(&body) {
            Ok(r) => r,
            Err(f) => return failure(&request_id(&headers, loose_request_id(&body).as_deref()), f),
        };
        let id = request_id(&headers, req.request_id.as_deref());
        let run = || -> Result<service::PlanOutput, Failure> {
            nested(&req.sketch, req.sketch.schema_version, "sketch")?;
            let scene = resolve_scene(&config, req.scene.as_ref(), req.scene_id.as_deref())?;
            let params = params_or_default(req.params.clone())?;
            let policy = req.policy.as_deref().unwrap_or("rules");
            Ok(service::plan(&req.sketch, scene.as_ref(), &params, policy)?)
        };
        match run() {
            Ok(out) => success(&id, &out),
            Err(f) => failure(&id, f),
        }
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecuteRequest {
    #[serde(default)]
    pub request_id: Option<String>,
    pub sketch: SketchFile,
    #[serde(default)]
    pub scene: Option<SceneFile>,
    #[serde(default)]
    pub scene_id: Option<String>,
    #[serde(default)]
    pub params: Option<ParamsFile>,
    #[serde(default)]
    pub policy: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: Option<NoiseLevels>,
    #[serde(default)]
    pub tolerance_profile: ToleranceName,
    #[serde(default)]
    pub reference: Option<Vec<Point2>>,
}

async fn execute(State(config): State<Arc<GatewayConfig>>, headers: HeaderMap, body: Bytes) -> Response {
    blocking(move || {
        let req: ExecuteRequest = match parse_body(&body) {
            Ok(r) => r,
            Err(f) => return failure(&request_id(&headers, loose_request_id(&body).as_deref()), f),
        };
        let id = request_id(&headers, req.request_id.as_deref());
        let run = || -> Result<io::TrialFile, Failure> {
            nested(&req.sketch, req.sketch.schema_version, "sketch")?;
            let scene = resolve_scene(&config, req.scene.as_ref(), req.scene_id.as_deref())?.ok_or_else(|| {
                Failure::new(StatusCode::BAD_REQUEST, "validation", "a scene or scene_id is required", Some("scene".into()))
            })?;
            let params = params_or_default(req.params.clone())?;
            let noise = req
                .noise
                .unwrap_or_else(|| NoiseLevels::from_model(&NoiseModel::calibrated(0)))
                .model(req.seed);
            let opts = ExecuteOptions {
                noise,
                policy: req.policy.clone().unwrap_or_else(|| "rules".into()),
                tolerance: req.tolerance_profile.profile(),
            };
            Ok(service::execute(&req.sketch, &scene, &params, &opts, req.reference.as_deref())?)
        };
        match run() {
            Ok(out) => success(&id, &out),
            Err(f) => failure(&id, f),
        }
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRequest {
    #[serde(default)]
    pub request_id: Option<String>,
    pub spec: ScenarioSpec,
    #[serde(default)]
    pub params: Option<ParamsFile>,
}

async fn scenario(headers: HeaderMap, body: Bytes) -> Response {
    blocking(move || {
        let req: ScenarioRequest = match parse_body(&body) {
            Ok(r) => r,
            Err(f) => return failure(&request_id(&headers, loose_request_id(&body).as_deref()), f),
        };
        let id = request_id(&headers, req.request_id.as_deref());
        let run = || -> Result<io::ScenarioFile, Failure> {
            let params = params_or_default(req.params.clone())?;
            Ok(service::scenario(&req.spec, &params)?)
        };
        match run() {
            Ok(out) => success(&id, &out),
            Err(f) => failure(&id, f),
        }
    })
    .await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneListing {
    pub scenes: Vec<SceneEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub id: String,
}

fn list_scenes(dir: &Path) -> Vec<SceneEntry> {
    let Ok(rd) = std::fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut ids: Vec<String> = rd
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let id = name.strip_suffix(".json")?;
            valid_id(id).then(|| id.to_string())
        })
        .collect();
    ids.sort();
    ids.into_iter().map(|id| SceneEntry { id }).collect()
}

async fn scenes(State(config): State<Arc<GatewayConfig>>, headers: HeaderMap) -> Response {
    let id = request_id(&headers, None);
    let scenes = scenes_dir(&config).map(|d| list_scenes(&d)).unwrap_or_default();
    success(&id, &SceneListing { scenes })
}

async fn scene(State(config): State<Arc<GatewayConfig>>, UrlPath(scene_id): UrlPath<String>, headers: HeaderMap) -> Response {
    blocking(move || {
        let id = request_id(&headers, None);
        match load_scene_by_id(&config, &scene_id) {
            Ok(s) => success(&id, &s),
            Err(f) => failure(&id, f),
        }
    })
    .await
}

fn content_type(id: &str) -> &'static str {
    let ext = id.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("svg") => "image/svg+xml",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    }
}

async fn asset(State(config): State<Arc<GatewayConfig>>, UrlPath(asset_id): UrlPath<String>, headers: HeaderMap) -> Response {
    let id = request_id(&headers, None);
    let Some(dir) = config.data_dir.as_ref().map(|d| d.join("assets")) else {
        return failure(&id, Failure::not_found("asset"));
    };
    if !valid_id(&asset_id) {
        return failure(&id, Failure::not_found("asset"));
    }
    match tokio::fs::read(dir.join(&asset_id)).await {
        Ok(bytes) => with_id(
            (StatusCode::OK, [(header::CONTENT_TYPE, content_type(&asset_id))], bytes).into_response(),
            &id,
        ),
        Err(_) => failure(&id, Failure::not_found("asset")),
    }
}
