use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sketchbot_core::io::{self, SceneFile, SketchFile};
use sketchbot_core::service;
use sketchbot_core::world::{LengthCategory, ScenarioSpec, SceneType};
use sketchbot_gateway::{router, GatewayConfig};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

async fn send(app: &Router, req: Request<Body>) -> Reply {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

async fn post(app: &Router, uri: &str, body: &Value) -> Reply {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

fn fixture() -> (SceneFile, SketchFile, tempfile::TempDir) {
    let spec = ScenarioSpec::new(LengthCategory::Short, SceneType::Kitchen, 4);
    let sc = service::scenario(&spec, &Default::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("scenes")).unwrap();
    std::fs::create_dir_all(dir.path().join("assets")).unwrap();
    io::write(dir.path().join("scenes/kitchen-4.json"), &sc.scene).unwrap();
    std::fs::write(dir.path().join("assets/kitchen-4.png"), b"\x89PNG fake").unwrap();
    std::fs::write(dir.path().join("secret.txt"), b"no").unwrap();
    (sc.scene, sc.sketch, dir)
}

fn app(dir: &tempfile::TempDir) -> Router {
    router(GatewayConfig {
        data_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    })
}

/// The `result` member exactly as sent.
fn raw_result(body: &[u8]) -> String {
    #[derive(serde::Deserialize)]
    struct Env<'a> {
        #[serde(borrow)]
        result: &'a serde_json::value::RawValue,
    }
    let env: Env = serde_json::from_slice(body).unwrap();
    env.result.get().to_string()
}

#[tokio::test]
async fn plan_echoes_request_id_and_matches_service() {
    let (scene, sketch, dir) = fixture();
    let app = app(&dir);
    let r = post(&app, "/plan", &json!({"request_id": "abc", "sketch": sketch, "scene": scene})).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["request_id"], "abc");
    assert_eq!(r.headers.get("x-request-id").unwrap(), "abc");
    let grid = scene.to_grid().unwrap();
    let expected = service::plan(&sketch, Some(&grid), &Default::default(), "rules").unwrap();
    assert_eq!(raw_result(&r.body), io::to_string(&expected).trim_end());
}

#[tokio::test]
async fn execute_by_scene_id() {
    let (_, sketch, dir) = fixture();
    let app = app(&dir);
    let r = post(&app, "/execute", &json!({"sketch": sketch, "scene_id": "kitchen-4", "seed": 3})).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let v = r.json();
    assert!(!v["result"]["trial"]["trace"].as_array().unwrap().is_empty());
    assert!(!v["result"]["trial"]["events"].as_array().unwrap().is_empty());
    assert_eq!(v["result"]["trial"]["noise"]["seed"], 3);
    assert!(v["request_id"].as_str().is_some_and(|s| !s.is_empty()));
}

#[tokio::test]
async fn execute_requires_scene() {
    let (_, sketch, dir) = fixture();
    let r = post(&app(&dir), "/execute", &json!({"sketch": sketch})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"]["location"], "scene");
}

#[tokio::test]
async fn scenario_endpoint() {
    let (_, _, dir) = fixture();
    let spec = json!({"length_category": "long", "scene_type": "corridor", "seed": 9});
    let r = post(&app(&dir), "/scenario", &json!({"spec": spec})).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.body));
    let v = r.json();
    assert!(v["result"]["corner_count"].as_u64().unwrap() >= 6);
    assert!(v["result"]["reference"].as_array().unwrap().len() >= 8);
}

#[tokio::test]
async fn scene_listing_and_lookup() {
    let (scene, _, dir) = fixture();
    let app = app(&dir);
    let r = get(&app, "/scenes").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["result"]["scenes"], json!([{"id": "kitchen-4"}]));
    let r = get(&app, "/scene/kitchen-4").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(raw_result(&r.body), io::to_string(&scene).trim_end());
    let r = get(&app, "/scene/nope").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["error"]["code"], "not_found");
}

#[tokio::test]
async fn assets_are_served_raw() {
    let (_, _, dir) = fixture();
    let app = app(&dir);
    let r = get(&app, "/asset/kitchen-4.png").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers.get(header::CONTENT_TYPE).unwrap(), "image/png");
    assert_eq!(r.body, b"\x89PNG fake");
    assert_eq!(get(&app, "/asset/..%2Fsecret.txt").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/asset/missing.png").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn validation_errors_carry_locations() {
    let (scene, mut sketch, dir) = fixture();
    let app = app(&dir);
    sketch.strokes[0].points[1].u = 10_000.0;
    let r = post(&app, "/plan", &json!({"request_id": "v1", "sketch": sketch, "scene": scene})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let v = r.json();
    assert_eq!(v["request_id"], "v1");
    assert_eq!(v["error"]["code"], "validation");
    assert_eq!(v["error"]["location"], "sketch.strokes[0].points[1]");
    assert!(v.get("result").is_none());

    let r = post(&app, "/plan", &json!({"request_id": "v2", "sketch": {"strokes": 3}})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["request_id"], "v2");
    assert!(r.json()["error"]["location"].as_str().unwrap().starts_with("sketch"));

    let r = post(&app, "/plan", &json!({"sketch": {}, "scene": scene, "scene_id": "kitchen-4"})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    let params = json!({"schema_version": 1, "control": {"d_safety_m": 0.15}});
    let r = post(&app, "/scenario", &json!({"spec": {"length_category": "short", "scene_type": "kitchen", "seed": 1}, "params": params})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"]["location"], "params.control.d_safety_m");
}

#[tokio::test]
async fn cors_preflight() {
    let (_, _, dir) = fixture();
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/plan")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let r = send(&app(&dir), req).await;
    assert!(r.status.is_success());
    assert_eq!(r.headers.get(header::ACCESS_CONTROL_ALLOW_ORIGIN).unwrap(), "*");

    let restricted = router(GatewayConfig {
        allowed_origins: vec!["http://studio.local".into()],
        ..Default::default()
    });
    let req = Request::get("/scenes")
        .header(header::ORIGIN, "http://elsewhere")
        .body(Body::empty())
        .unwrap();
    let r = send(&restricted, req).await;
    assert!(r.headers.get(header::ACCESS_CONTROL_ALLOW_ORIGIN).is_none());
}
