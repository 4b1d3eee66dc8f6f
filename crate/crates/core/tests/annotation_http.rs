use std::sync::{Arc, RwLock};

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use negkb::annotation::server::router;
use negkb::annotation::AnnotationStore;
use negkb::corpus::{EventText, Relation, Source, Split, Triple};
use serde_json::{json, Value};
use tower::ServiceExt;

fn benchmark() -> Vec<Triple> {
    (0..10)
        .map(|i| {
            Triple::original(
                Source::Atomic,
                Split::Test,
                EventText::affirmative(&format!("PersonX paints fence {i}")).unwrap(),
                Relation::XWant,
                EventText::affirmative("to rest").unwrap(),
            )
        })
        .collect()
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
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
    let bytes = to_bytes(resp.into_body(), 1 << 20).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn label(app: &Router, who: &str, id: &str, label: &str) -> Value {
    let (status, body) = call(
        app,
        "POST",
        "/api/labels",
        Some(json!({"annotator_id": who, "triple_id": id, "label": label})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body
}

#[tokio::test]
async fn two_annotators_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = AnnotationStore::create(dir.path(), &benchmark()).unwrap();
    let app = router(Arc::new(RwLock::new(store)));

    let (status, task) = call(&app, "GET", "/api/tasks/next?annotator=ann1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(task["done"], false);
    assert_eq!(task["position"], 1);
    assert_eq!(task["total"], 10);
    assert!(task["statement"].as_str().unwrap().starts_with("If PersonX paints fence"));

    let b_labels = ["Valid", "Valid", "Invalid", "Invalid", "Ambiguous", "Valid", "Valid", "Invalid", "Valid", "Ambiguous"];
    let a_labels = ["Valid", "Valid", "Invalid", "Valid", "Ambiguous", "Valid", "Invalid", "Invalid", "Valid", "Valid"];
    for who in ["ann1", "ann2"] {
        let labels = if who == "ann1" { a_labels } else { b_labels };
        for l in labels {
            let (_, task) = call(&app, "GET", &format!("/api/tasks/next?annotator={who}"), None).await;
            label(&app, who, task["triple_id"].as_str().unwrap(), l).await;
        }
        let (_, task) = call(&app, "GET", &format!("/api/tasks/next?annotator={who}"), None).await;
        assert_eq!(task, json!({"done": true}));
    }

    let (_, progress) = call(&app, "GET", "/api/progress", None).await;
    assert_eq!(progress, json!({"total": 10, "annotators": {"ann1": 10, "ann2": 10}}));

    let (status, report) = call(&app, "GET", "/api/agreement?a=ann1&b=ann2", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["n_items"], 10);
    let observed = 7.0 / 10.0;
    let a_marg = [6.0, 3.0, 1.0];
    let b_marg = [5.0, 3.0, 2.0];
    let expected: f64 = a_marg.iter().zip(b_marg).map(|(x, y)| x * y / 100.0).sum();
    let kappa = (observed - expected) / (1.0 - expected);
    assert!((report["kappa"].as_f64().unwrap() - kappa).abs() < 1e-12);

    let (status, export) = call(&app, "GET", "/api/benchmark/export?policy=agree_only", None).await;
    assert_eq!(status, StatusCode::OK, "{export}");
    let agreed = a_labels.iter().zip(b_labels).filter(|(x, y)| **x == *y).count();
    assert_eq!(export["gold"].as_array().unwrap().len(), agreed);
    assert_eq!(export["quarantined"].as_array().unwrap().len(), 10 - agreed);
    assert!(export["gold"].as_array().unwrap().iter().all(|g| g["label_source"] == "gold"));
}

#[tokio::test]
async fn resubmission_overwrites_and_persists() {
    let dir = tempfile::tempdir().unwrap();
    let items = benchmark();
    let store = AnnotationStore::create(dir.path(), &items).unwrap();
    let app = router(Arc::new(RwLock::new(store)));
    let id = items[0].id.as_str();
    assert_eq!(label(&app, "ann1", id, "Valid").await, json!({"stored": true, "overwritten": false}));
    assert_eq!(label(&app, "ann1", id, "Ambiguous").await, json!({"stored": true, "overwritten": true}));
    drop(app);
    let reopened = AnnotationStore::open(dir.path()).unwrap();
    let label = &reopened.labels()[&("ann1".to_string(), id.to_string())];
    assert_eq!(label.label.to_string(), "Ambiguous");
}

#[tokio::test]
async fn errors_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let items = benchmark();
    let store = AnnotationStore::create(dir.path(), &items).unwrap();
    let app = router(Arc::new(RwLock::new(store)));

    let (status, body) = call(
        &app,
        "POST",
        "/api/labels",
        Some(json!({"annotator_id": "a", "triple_id": "nope", "label": "Valid"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "UnknownInstance");

    let (status, body) = call(
        &app,
        "POST",
        "/api/labels",
        Some(json!({"annotator_id": "a", "triple_id": items[0].id, "label": "Sure"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["message"].is_string());

    let (status, body) = call(&app, "POST", "/api/labels", Some(json!({"triple_id": items[0].id, "label": "Valid"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "ValidationError");

    let (status, _) = call(&app, "GET", "/api/tasks/next", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    label(&app, "a", &items[0].id, "Valid").await;
    label(&app, "b", &items[1].id, "Valid").await;
    let (status, body) = call(&app, "GET", "/api/agreement?a=a&b=b", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "EmptyOverlap");

    let (status, body) = call(&app, "GET", "/api/benchmark/export?policy=agree_only&strict=true", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "IncompleteAnnotation");

    let (status, _) = call(&app, "GET", "/api/benchmark/export?policy=third_pass", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn third_pass_queue() {
    let dir = tempfile::tempdir().unwrap();
    let items = benchmark();
    let mut store = AnnotationStore::create(dir.path(), &items[..3]).unwrap();
    store.set_adjudication("a", "b", "c");
    let app = router(Arc::new(RwLock::new(store)));
    for (i, t) in items[..3].iter().enumerate() {
        label(&app, "a", &t.id, "Valid").await;
        label(&app, "b", &t.id, if i == 1 { "Invalid" } else { "Valid" }).await;
    }
    let (_, task) = call(&app, "GET", "/api/tasks/next?annotator=c", None).await;
    assert_eq!(task["triple_id"], items[1].id.as_str());
    assert_eq!(task["total"], 1);
    let uri = "/api/benchmark/export?policy=third_pass&adjudicator=c&a=a&b=b&strict=true";
    assert_eq!(call(&app, "GET", uri, None).await.0, StatusCode::CONFLICT);
    label(&app, "c", &items[1].id, "Invalid").await;
    let (status, export) = call(&app, "GET", uri, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(export["gold"].as_array().unwrap().len(), 3);
}
