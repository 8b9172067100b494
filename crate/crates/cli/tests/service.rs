use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mbdiag::dpi::to_dpi_json;
use mbdiag::fixtures::full_adder;
use mbdiag_cli::registry::load_problem;
use mbdiag_cli::service::{app, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(router: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn create(router: &Router, body: Value) -> (String, Value) {
    let (status, v) = call(router, "POST", "/api/sessions", Some(body.to_string())).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    (v["session_id"].as_str().unwrap().to_string(), v["state"].clone())
}

fn uniform_fulladder() -> Value {
    json!({"problem_id": "fulladder", "heuristic": "ent", "mode": "dynamic", "k": 3, "sigma": 1.0, "posterior": "uniform"})
}

#[tokio::test]
async fn full_adder_session_isolates_o1_x2() {
    let router = app(AppState::new(vec![]));
    let (id, state) = create(&router, uniform_fulladder()).await;
    assert_eq!(state["query"], "A2=1");
    assert_eq!(state["token"], "1-A2");
    assert_eq!(state["stopped"], false);
    let uri = format!("/api/sessions/{id}/answer");
    let mut last = state;
    for _ in 0..2 {
        let body = json!({"value": true, "token": last["token"]}).to_string();
        let (status, v) = call(&router, "POST", &uri, Some(body)).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        last = v;
    }
    assert_eq!(last["stopped"], true);
    assert_eq!(last["stop_reason"], "single_remaining");
    assert_eq!(last["final_diagnoses"][0]["comps"], json!(["O1", "X2"]));
    assert_eq!(last["step"], 2);

    let (status, fetched) = call(&router, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fetched["final_diagnoses"], last["final_diagnoses"]);
    let (status, _) = call(&router, "POST", &uri, Some(json!({"value": true}).to_string())).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn stale_token_is_rejected() {
    let router = app(AppState::new(vec![]));
    let (id, state) = create(&router, uniform_fulladder()).await;
    let uri = format!("/api/sessions/{id}/answer");
    let token = state["token"].as_str().unwrap().to_string();
    let (status, _) = call(&router, "POST", &uri, Some(json!({"value": true, "token": token}).to_string())).await;
    assert_eq!(status, StatusCode::OK);
    // Replaying the same token must not apply a second answer.
    let (status, v) = call(&router, "POST", &uri, Some(json!({"value": false, "token": token}).to_string())).await;
    assert_eq!(status, StatusCode::CONFLICT, "{v}");
    let (_, now) = call(&router, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(now["step"], 1);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let router = app(AppState::new(vec![]));
    let (status, _) = call(&router, "GET", "/api/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&router, "POST", "/api/sessions/nope/answer", Some(json!({"value": true}).to_string())).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&router, "DELETE", "/api/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_bodies_are_422() {
    let router = app(AppState::new(vec![]));
    for body in [
        "not json".to_string(),
        json!({"problem_id": "fulladder", "heuristic": "nope"}).to_string(),
        json!({"problem_id": "fulladder", "k": 1}).to_string(),
        json!({"problem_id": "fulladder", "sigma": 0.0}).to_string(),
        json!({"problem_id": "/etc/passwd"}).to_string(),
        json!({}).to_string(),
        json!({"problem_id": "fulladder", "circuit": "gate G buf a"}).to_string(),
    ] {
        let (status, v) = call(&router, "POST", "/api/sessions", Some(body.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}: {v}");
        assert!(v["error"].is_string());
    }
    let (id, _) = create(&router, uniform_fulladder()).await;
    let uri = format!("/api/sessions/{id}/answer");
    for body in [json!({"value": 3}), json!({"value": "perhaps"}), json!({"token": "1-A2"})] {
        let (status, _) = call(&router, "POST", &uri, Some(body.to_string())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    }
    let (status, _) = call(&router, "POST", &format!("/api/sessions/{id}/propose"), Some(json!({"wire": "zz"}).to_string())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn inline_instances_and_listing() {
    let extra = load_problem("random:5").unwrap();
    let router = app(AppState::new(vec![extra]));
    let (status, list) = call(&router, "GET", "/api/problems", None).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = list.as_array().unwrap().iter().map(|p| p["id"].as_str().unwrap()).collect();
    assert!(ids.contains(&"fulladder") && ids.contains(&"random:5:8"));

    let dpi: Value = serde_json::from_str(&to_dpi_json(&full_adder())).unwrap();
    let (_, state) = create(&router, json!({"dpi": dpi, "k": 3, "posterior": "uniform"})).await;
    assert_eq!(state["remaining"].as_array().unwrap().len(), 3);
    let (_, state) = create(&router, json!({"circuit": mbdiag::fixtures::FULL_ADDER_DSL, "k": 3})).await;
    assert_eq!(state["problem_id"], "inline");
    create(&router, json!({"problem_id": "random:5:8"})).await;
}

#[tokio::test]
async fn skip_marks_wire_and_propose_overrides() {
    let router = app(AppState::new(vec![]));
    let (id, state) = create(&router, uniform_fulladder()).await;
    let (status, v) = call(
        &router,
        "POST",
        &format!("/api/sessions/{id}/answer"),
        Some(json!({"value": "skip", "token": state["token"]}).to_string()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["answer"], "skip");
    assert_ne!(v["query"], "A2=1");
    let (status, v) = call(&router, "POST", &format!("/api/sessions/{id}/propose"), Some(json!({"wire": "X1"}).to_string())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["query"], "X1=1");
    assert_eq!(v["token"], "3-X1");
}

#[tokio::test]
async fn delete_and_expiry_reclaim_sessions() {
    let state = AppState::with_ttl(vec![], Duration::ZERO);
    let router = app(state.clone());
    let (id, _) = create(&router, uniform_fulladder()).await;
    let (status, _) = call(&router, "DELETE", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&router, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    // With a zero time to live every older session is reaped on the next create.
    create(&router, uniform_fulladder()).await;
    create(&router, uniform_fulladder()).await;
    assert_eq!(state.session_count(), 1);
}

#[tokio::test]
async fn concurrent_answers_apply_once() {
    let router = app(AppState::new(vec![]));
    let (id, state) = create(&router, uniform_fulladder()).await;
    let uri = format!("/api/sessions/{id}/answer");
    let body = json!({"value": true, "token": state["token"]}).to_string();
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let (router, uri, body) = (router.clone(), uri.clone(), body.clone());
            tokio::spawn(async move { call(&router, "POST", &uri, Some(body)).await.0 })
        })
        .collect();
    let mut ok = 0;
    for h in handles {
        match h.await.unwrap() {
            StatusCode::OK => ok += 1,
            s => assert_eq!(s, StatusCode::CONFLICT),
        }
    }
    assert_eq!(ok, 1);
}
