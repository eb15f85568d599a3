use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use momoc::server::{app, AppState};
use momoc_core::pmas::{fit_bt, parse_comparisons, BtOptions};
use momoc_core::{Dims, RealVolume32};
use serde_json::{json, Value};
use std::sync::Arc;
use tower::ServiceExt;

const IDS: [&str; 4] = ["S1_1", "S2_3", "S5_2", "S7_1"];

fn volumes() -> Vec<(String, RealVolume32)> {
    IDS.iter()
        .enumerate()
        .map(|(k, id)| {
            (
                id.to_string(),
                RealVolume32::from_fn(Dims::new(8, 6, 4), |y, z, x| (y + z + x + k) as f32),
            )
        })
        .collect()
}

fn state(dir: &tempfile::TempDir) -> Arc<AppState> {
    Arc::new(AppState::new(volumes(), dir.path().join("log.jsonl"), 5).unwrap())
}

async fn call(st: &Arc<AppState>, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app(st.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (
        status,
        resp.into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec(),
    )
}

async fn get_json(st: &Arc<AppState>, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(st, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

async fn post_json(st: &Arc<AppState>, body: Value) -> (StatusCode, Value) {
    let req = Request::post("/api/comparisons")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, b) = call(st, req).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn assert_blind(payload: &str) {
    for id in IDS {
        assert!(!payload.contains(id), "payload leaks {id}: {payload}");
    }
}

#[tokio::test]
async fn next_pair_is_idempotent_until_answered() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(&dir);
    let (s1, a) = get_json(&st, "/api/pairs/next").await;
    let (_, b) = get_json(&st, "/api/pairs/next").await;
    assert_eq!(s1, StatusCode::OK);
    assert_eq!(a, b);
    assert_eq!(a["n_total"], 6);
    assert_eq!(a["n_done"], 0);
    assert_ne!(a["left_id_opaque"], a["right_id_opaque"]);
    assert_blind(&a.to_string());
}

#[tokio::test]
async fn full_round_robin_then_pmas_matches_offline_fit() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(&dir);
    let outcomes = ["left_worse", "similar", "right_worse"];
    let mut seen = std::collections::BTreeSet::new();
    for k in 0..6 {
        let (_, next) = get_json(&st, "/api/pairs/next").await;
        assert_blind(&next.to_string());
        assert_eq!(next["n_done"], k);
        let mut pair = [
            next["left_id_opaque"].as_str().unwrap(),
            next["right_id_opaque"].as_str().unwrap(),
        ];
        pair.sort();
        assert!(
            seen.insert((pair[0].to_string(), pair[1].to_string())),
            "pair repeated"
        );
        let body = json!({"pair_token": next["pair_token"], "outcome": outcomes[k % 3], "annotator": "r1"});
        let (s, resp) = post_json(&st, body.clone()).await;
        assert_eq!(s, StatusCode::CREATED);
        assert_blind(&resp.to_string());
        let (again, err) = post_json(&st, body).await;
        assert_eq!(again, StatusCode::CONFLICT);
        assert!(err["error"].is_string());
    }
    let (_, last) = get_json(&st, "/api/pairs/next").await;
    assert!(last["pair_token"].is_null());
    assert_eq!(last["n_done"], 6);

    let log = std::fs::read_to_string(dir.path().join("log.jsonl")).unwrap();
    let records = parse_comparisons(&log).unwrap();
    assert_eq!(records.len(), 6);
    let offline = fit_bt(&records, &BtOptions::default()).unwrap();
    let (_, online) = get_json(&st, "/api/pmas").await;
    assert_eq!(online["n_comparisons"], 6);
    for (id, beta) in &offline.scores {
        assert!((online["scores"][id].as_f64().unwrap() - beta).abs() <= 1e-9);
    }

    let reopened = state(&dir);
    let (_, resumed) = get_json(&reopened, "/api/pairs/next").await;
    assert_eq!(resumed["n_done"], 6);
}

#[tokio::test]
async fn posting_updates_pmas() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(&dir);
    let (_, empty) = get_json(&st, "/api/pmas").await;
    assert_eq!(empty["n_comparisons"], 0);
    let (_, next) = get_json(&st, "/api/pairs/next").await;
    post_json(
        &st,
        json!({"pair_token": next["pair_token"], "outcome": "left_worse", "annotator": "r1"}),
    )
    .await;
    let (_, scores) = get_json(&st, "/api/pmas").await;
    assert_eq!(scores["n_comparisons"], 1);
    let positive = scores["scores"]
        .as_object()
        .unwrap()
        .values()
        .filter(|v| v.as_f64().unwrap() > 0.0)
        .count();
    assert_eq!(positive, 1);
}

#[tokio::test]
async fn annotator_sessions_are_independent() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(&dir);
    let (_, a) = get_json(&st, "/api/pairs/next?annotator=r1").await;
    post_json(
        &st,
        json!({"pair_token": a["pair_token"], "outcome": "similar", "annotator": "r1"}),
    )
    .await;
    let (_, r1) = get_json(&st, "/api/pairs/next?annotator=r1").await;
    let (_, r2) = get_json(&st, "/api/pairs/next?annotator=r2").await;
    assert_eq!(r1["n_done"], 1);
    assert_eq!(r2["n_done"], 0);
}

#[tokio::test]
async fn malformed_requests_get_json_errors() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(&dir);
    let (s, e) = post_json(
        &st,
        json!({"pair_token": "nope", "outcome": "similar", "annotator": "r1"}),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(e["error"].is_string());
    let (_, next) = get_json(&st, "/api/pairs/next").await;
    let (s, e) = post_json(
        &st,
        json!({"pair_token": next["pair_token"], "outcome": "worse", "annotator": "r1"}),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(e["error"].as_str().unwrap().contains("outcome"));
    let (s, e) = post_json(&st, json!({"outcome": "similar"})).await;
    assert!(s.is_client_error());
    assert!(e["error"].is_string());
}

#[tokio::test]
async fn slices_are_png_with_range_checks() {
    let dir = tempfile::tempdir().unwrap();
    let st = state(&dir);
    let (_, next) = get_json(&st, "/api/pairs/next").await;
    let opaque = next["left_id_opaque"].as_str().unwrap();
    for (axis, n, w, h) in [("x", 4, 6, 8), ("y", 8, 4, 6), ("z", 6, 4, 8)] {
        let (s, body) = call(
            &st,
            Request::get(format!("/api/slices/{opaque}/{axis}/0.png"))
                .body(Body::empty())
                .unwrap(),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
        let dec = png::Decoder::new(std::io::Cursor::new(body));
        let reader = dec.read_info().unwrap();
        assert_eq!((reader.info().width, reader.info().height), (w, h));
        let (s, body) = call(
            &st,
            Request::get(format!("/api/slices/{opaque}/{axis}/{n}.png"))
                .body(Body::empty())
                .unwrap(),
        )
        .await;
        assert_eq!(s, StatusCode::NOT_FOUND);
        let err: Value = serde_json::from_slice(&body).unwrap();
        assert!(err["error"].as_str().unwrap().contains("out of range"));
    }
    let (s, _) = call(
        &st,
        Request::get(format!("/api/slices/{opaque}/w/0.png"))
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(
        &st,
        Request::get("/api/slices/S1_1/x/0.png")
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}
