use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use woundpatch::capture::{encode_bundle, CaptureBundle, DepthMap, Intrinsics, RgbImage, ScoreMap};
use woundpatch::fabricate::{parse_stl, stl_volume, GcodeProgram};
use woundpatch::raster::Raster;
use woundpatch::segmentation::MaskRle;
use woundpatch_service::{router, AppState};

const W: usize = 160;
const H: usize = 120;

/// Flat scene at 200 mm; score falls off radially from (80, 60).
fn bundle() -> CaptureBundle {
    let k = Intrinsics::new(600.0, 600.0, 80.0, 60.0, W, H).unwrap();
    let depth = DepthMap::from_raster(Raster::filled(W, H, 0.2)).unwrap();
    let score = Raster::from_fn(W, H, |x, y| {
        let r = (x as f64 - 80.0).hypot(y as f64 - 60.0);
        (1.0 - r / 60.0).clamp(0.0, 1.0) as f32
    });
    CaptureBundle::new(
        RgbImage::solid(W, H, [200, 160, 150]),
        depth,
        k,
        Some(ScoreMap::from_raster(score).unwrap()),
        0.5,
    )
    .unwrap()
}

const BOUNDARY: &str = "XBOUNDARYX";

fn multipart(fields: &[(&str, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, bytes) in fields {
        body.extend_from_slice(format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}\"\r\nContent-Type: application/octet-stream\r\n\r\n").as_bytes());
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

fn upload_body(with_depth: bool) -> Vec<u8> {
    let p = encode_bundle(&bundle()).unwrap();
    let score = p.score_f32.unwrap();
    let mut fields: Vec<(&str, &[u8])> = vec![("manifest", &p.manifest), ("rgb", &p.rgb_png), ("score", &score)];
    if with_depth {
        fields.push(("depth", &p.depth_png));
    }
    multipart(&fields)
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn json_of(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = send(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn create(app: &Router, with_depth: bool) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(Method::POST)
        .uri("/sessions")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(upload_body(with_depth)))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn new_session(app: &Router) -> String {
    let (s, v) = create(app, true).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

fn square(x0: f64, y0: f64, side: f64) -> Value {
    json!({ "vertices": [[x0, y0], [x0 + side, y0], [x0 + side, y0 + side], [x0, y0 + side]] })
}

#[tokio::test]
async fn upload_and_summary() {
    let app = router(AppState::in_memory());
    let (s, v) = create(&app, true).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!((v["width"].as_u64(), v["height"].as_u64()), (Some(160), Some(120)));
    assert_eq!(v["has_score"], json!(true));
    let id = v["id"].as_str().unwrap();
    let (s, v) = json_of(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["threshold"], json!(0.5));
    assert_eq!(v["boundary"], Value::Null);
}

#[tokio::test]
async fn upload_errors() {
    let app = router(AppState::in_memory());
    let (s, v) = create(&app, false).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["stage"], json!("capture"));
    let (s, v) = json_of(&app, Method::GET, "/sessions/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], json!("not_found"));
}

#[tokio::test]
async fn seed_preview_and_threshold_nesting() {
    let app = router(AppState::in_memory());
    let id = new_session(&app).await;
    let (s, v) = json_of(&app, Method::POST, &format!("/sessions/{id}/seed"), Some(json!({"x": 80, "y": 60}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert!(v["polygon"].as_array().unwrap().len() >= 3);
    let mut prev: Option<woundpatch::raster::Mask> = None;
    for t in [0.2, 0.4, 0.6, 0.8] {
        let (s, v) = json_of(&app, Method::POST, &format!("/sessions/{id}/threshold"), Some(json!({"value": t}))).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        let mask: MaskRle = serde_json::from_value(v["mask"].clone()).unwrap();
        let m = mask.decode();
        if let Some(p) = &prev {
            assert!(m.is_subset_of(p));
            assert!(m.count() < p.count());
        }
        prev = Some(m);
    }
}

#[tokio::test]
async fn seed_below_threshold_payload() {
    let app = router(AppState::in_memory());
    let id = new_session(&app).await;
    let (s, v) = json_of(&app, Method::POST, &format!("/sessions/{id}/seed"), Some(json!({"x": 2, "y": 2}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v, json!({"stage": "segmentation", "code": "seed_below_threshold", "message": v["message"]}));
    let (s, v) = json_of(&app, Method::POST, &format!("/sessions/{id}/threshold"), Some(json!({"value": 0.3}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], json!("no_seed"));
    let (s, _) = json_of(&app, Method::POST, &format!("/sessions/{id}/threshold"), Some(json!({"value": 1.5}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn boundary_validation() {
    let app = router(AppState::in_memory());
    let id = new_session(&app).await;
    let bowtie = json!({"vertices": [[10.0, 10.0], [50.0, 50.0], [50.0, 10.0], [10.0, 50.0]]});
    let (s, v) = json_of(&app, Method::PUT, &format!("/sessions/{id}/boundary"), Some(bowtie)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], json!("self_intersection"));
    let (s, v) = json_of(&app, Method::PUT, &format!("/sessions/{id}/boundary"), Some(square(150.0, 10.0, 40.0))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], json!("outside_raster"));
    let (s, v) = json_of(&app, Method::PUT, &format!("/sessions/{id}/boundary"), Some(square(50.0, 30.0, 60.0))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["area_px"], json!(3600.0));
    let (s, _) = json_of(&app, Method::PUT, &format!("/sessions/{id}/boundary"), Some(json!({"vertices": "x"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn generate_square_patch_and_download() {
    let app = router(AppState::in_memory());
    let id = new_session(&app).await;
    let (s, v) = json_of(&app, Method::POST, &format!("/sessions/{id}/generate"), Some(json!({"thickness_mm": 2.0}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], json!("no_boundary"));
    let (s, _) = send(&app, Method::GET, &format!("/sessions/{id}/artifacts/stl"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);

    json_of(&app, Method::PUT, &format!("/sessions/{id}/boundary"), Some(square(50.0, 30.0, 60.0))).await;
    let (s, m) = json_of(&app, Method::POST, &format!("/sessions/{id}/generate"), Some(json!({"thickness_mm": 2.0}))).await;
    assert_eq!(s, StatusCode::OK, "{m}");
    assert_eq!(m["cached"], json!(false));

    let (s, stl) = send(&app, Method::GET, &format!("/sessions/{id}/artifacts/stl"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(stl.len(), m["stl_bytes"].as_u64().unwrap() as usize);
    let volume = stl_volume(&parse_stl(&stl).unwrap());
    let expected = m["flat_area_cm2"].as_f64().unwrap() * 100.0 * 2.0;
    assert!((volume - expected).abs() / expected < 1e-3, "{volume} vs {expected}");
    // 60 px at 200 mm and 600 px focal length is 20 mm
    assert!((m["flat_area_cm2"].as_f64().unwrap() - 4.0).abs() < 1e-6);

    let (s, gcode) = send(&app, Method::GET, &format!("/sessions/{id}/artifacts/gcode"), None).await;
    assert_eq!(s, StatusCode::OK);
    let prog = GcodeProgram::parse(std::str::from_utf8(&gcode).unwrap()).unwrap();
    prog.check_monotone().unwrap();

    let (_, again) = json_of(&app, Method::POST, &format!("/sessions/{id}/generate"), Some(json!({"thickness_mm": 2.0}))).await;
    assert_eq!(again["cached"], json!(true));
    let (_, stl2) = send(&app, Method::GET, &format!("/sessions/{id}/artifacts/stl"), None).await;
    assert_eq!(stl, stl2);

    let (s, v) = json_of(
        &app,
        Method::POST,
        &format!("/sessions/{id}/generate"),
        Some(json!({"thickness_mm": 2.0, "slicer": {"layer_height": 0.3}})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["cached"], json!(false));
    let (s, _) = send(&app, Method::GET, &format!("/sessions/{id}/artifacts/obj"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn generate_errors_name_their_stage() {
    let app = router(AppState::in_memory());
    let id = new_session(&app).await;
    json_of(&app, Method::PUT, &format!("/sessions/{id}/boundary"), Some(square(50.0, 30.0, 60.0))).await;
    let (s, v) = json_of(&app, Method::POST, &format!("/sessions/{id}/generate"), Some(json!({"thickness_mm": 0.1}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!((v["stage"].as_str(), v["code"].as_str()), (Some("fabricate"), Some("too_thin")));
    let (s, v) = json_of(&app, Method::POST, &format!("/sessions/{id}/generate"), Some(json!({"thickness_mm": -1.0}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["stage"], json!("flatten"));
    let (s, _) = send(&app, Method::POST, &format!("/sessions/{id}/cancel"), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
}

#[tokio::test]
async fn edits_invalidate_artifacts() {
    let app = router(AppState::in_memory());
    let id = new_session(&app).await;
    json_of(&app, Method::PUT, &format!("/sessions/{id}/boundary"), Some(square(50.0, 30.0, 60.0))).await;
    json_of(&app, Method::POST, &format!("/sessions/{id}/generate"), Some(json!({"thickness_mm": 1.0}))).await;
    let (_, v) = json_of(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert!(v["artifacts"].is_object());
    json_of(&app, Method::PUT, &format!("/sessions/{id}/boundary"), Some(square(40.0, 30.0, 60.0))).await;
    let (_, v) = json_of(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(v["artifacts"], Value::Null);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn sessions_run_concurrently() {
    let app = router(AppState::in_memory());
    let mut ids = Vec::new();
    for _ in 0..3 {
        ids.push(new_session(&app).await);
    }
    let mut tasks = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let app = app.clone();
        let id = id.clone();
        tasks.push(tokio::spawn(async move {
            json_of(&app, Method::PUT, &format!("/sessions/{id}/boundary"), Some(square(40.0 + 5.0 * i as f64, 30.0, 50.0))).await;
            json_of(&app, Method::POST, &format!("/sessions/{id}/generate"), Some(json!({"thickness_mm": 1.0}))).await
        }));
    }
    for (i, t) in tasks.into_iter().enumerate() {
        let (s, v) = t.await.unwrap();
        assert_eq!(s, StatusCode::OK, "{i}: {v}");
    }
    // requests against one session are serialized: both see a consistent boundary
    let id = ids[0].clone();
    let a = {
        let app = app.clone();
        let id = id.clone();
        tokio::spawn(async move { json_of(&app, Method::PUT, &format!("/sessions/{id}/boundary"), Some(square(20.0, 20.0, 30.0))).await })
    };
    let b = {
        let app = app.clone();
        let id = id.clone();
        tokio::spawn(async move { json_of(&app, Method::PUT, &format!("/sessions/{id}/boundary"), Some(square(60.0, 40.0, 30.0))).await })
    };
    let (ra, rb) = (a.await.unwrap(), b.await.unwrap());
    assert_eq!((ra.0, rb.0), (StatusCode::OK, StatusCode::OK));
    let (_, v) = json_of(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    let final_b = v["boundary"].clone();
    assert!(final_b == ra.1["vertices"] || final_b == rb.1["vertices"]);
}

#[tokio::test]
async fn state_dir_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::with_state_dir(dir.path()).unwrap());
    let id = new_session(&app).await;
    json_of(&app, Method::POST, &format!("/sessions/{id}/seed"), Some(json!({"x": 80, "y": 60}))).await;
    json_of(&app, Method::POST, &format!("/sessions/{id}/threshold"), Some(json!({"value": 0.7}))).await;
    let (_, before) = json_of(&app, Method::GET, &format!("/sessions/{id}"), None).await;

    let state = AppState::with_state_dir(dir.path()).unwrap();
    assert_eq!(state.session_count().await, 1);
    let app = router(state);
    let (s, after) = json_of(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(after, before);
    assert_eq!(after["threshold"], json!(0.7));
}
