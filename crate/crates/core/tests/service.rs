mod common;

use std::path::PathBuf;
use std::sync::Arc;

use common::*;
use foiltree::foil::TreeExport;
use foiltree::service::{serve_with_shutdown, AppState, ExplainResponse, ServiceConfig, TrainResponse};
use reqwest::StatusCode;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

struct Server {
    base: String,
    client: reqwest::Client,
    stop: Option<oneshot::Sender<()>>,
    handle: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl Server {
    async fn start(cache_size: usize) -> Server {
        let mut config = ServiceConfig::new(data_dir());
        config.cache_size = cache_size;
        let state = Arc::new(AppState::new(config).unwrap());
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel();
        let handle = tokio::spawn(serve_with_shutdown(listener, state, async {
            let _ = rx.await;
        }));
        Server {
            base,
            client: reqwest::Client::new(),
            stop: Some(tx),
            handle,
        }
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status(), r.json().await.unwrap())
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self
            .client
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        (r.status(), r.json().await.unwrap())
    }

    async fn train(&self, dataset: &str, kind: &str) -> TrainResponse {
        let (s, v) = self.post("/models", json!({"dataset_id": dataset, "kind": kind, "seed": 0})).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        serde_json::from_value(v).unwrap()
    }

    async fn stop(mut self) {
        self.stop.take().unwrap().send(()).unwrap();
        self.handle.await.unwrap().unwrap();
    }
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/datasets.json")
}

#[tokio::test]
async fn dataset_listing_matches_golden_and_grows() {
    let s = Server::start(10).await;
    let (status, v) = s.get("/datasets").await;
    assert_eq!(status, StatusCode::OK);
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 3);
    let pretty = serde_json::to_string_pretty(&v).unwrap() + "\n";
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(golden_path(), &pretty).unwrap();
    }
    assert_eq!(pretty, std::fs::read_to_string(golden_path()).unwrap());

    let csv = "a,b,label\n1,2,x\n2,1,y\n3,3,x\n4,0,y\n5,5,x\n6,1,y\n";
    let (status, v) = s.post("/datasets", json!({"id": "tiny", "csv": csv})).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    assert_eq!(v["n_instances"], 6);
    assert_eq!(v["class_names"], json!(["x", "y"]));
    let (_, v) = s.get("/datasets").await;
    assert_eq!(v.as_array().unwrap().len(), 4);

    let (status, v) = s.post("/datasets", json!({"id": "tiny", "csv": csv})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "DUPLICATE_ID");
    let (status, v) = s.post("/datasets", json!({"id": "bad", "csv": "a,label\nnope,x\n"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "MALFORMED_CSV");

    let (status, v) = s.get("/datasets/iris/test").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 45);
    assert_eq!(v[0]["index"], 0);
    let (status, v) = s.get("/datasets/nope/test").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "DATASET_NOT_FOUND");
    s.stop().await;
}

#[tokio::test]
async fn training_models() {
    let s = Server::start(10).await;
    let a = s.train("iris", "mlp").await;
    assert!(a.f1 >= 0.90, "{}", a.f1);
    let b = s.train("iris", "mlp").await;
    assert_ne!(a.model_id, b.model_id);
    assert_eq!(a.f1, b.f1);

    let (status, v) = s.post("/models", json!({"dataset_id": "iris", "kind": "perceptron"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "UNKNOWN_MODEL_KIND");
    let (status, v) = s.post("/models", json!({"dataset_id": "wine", "kind": "mlp"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "DATASET_NOT_FOUND");
    let (status, v) = s.post("/models", json!({"kind": "mlp"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "INVALID_REQUEST");

    let (status, v) = s.post("/predict", json!({"model_id": a.model_id, "instance": [5.1, 3.5, 1.4, 0.2]})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["class_name"], "setosa");
    let total: f64 = v["distribution"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let (status, v) = s.post("/predict", json!({"model_id": a.model_id, "instance": [5.1]})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "ARITY_MISMATCH");
    s.stop().await;
}

#[tokio::test]
async fn explaining_and_tree_retrieval() {
    let s = Server::start(10).await;
    let m = s.train("iris", "random-forest").await;

    // Test index 0 of iris is a setosa.
    let (status, v) = s.post("/explain", json!({"model_id": m.model_id, "instance": 0, "foil": "versicolor"})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let r: ExplainResponse = serde_json::from_value(v).unwrap();
    assert_eq!((r.fact_name.as_str(), r.foil_name.as_str()), ("setosa", "versicolor"));
    assert_eq!(r.dialogue[1], "User: Why 'setosa' and not 'versicolor'?");
    assert_eq!(r.dialogue.len(), 3);

    let (_, v) = s.post("/explain", json!({"model_id": m.model_id, "instance": 0})).await;
    assert_eq!(v["explanation"]["foil"], json!(r.explanation.foil));
    assert!(v["foil_name"].is_string());

    let (status, v) = s
        .post("/explain", json!({"model_id": m.model_id, "instance": 0, "foil": "setosa"}))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "FOIL_EQUALS_FACT");
    let (status, v) = s.post("/explain", json!({"model_id": "m999", "instance": 0})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "MODEL_NOT_FOUND");
    let (status, v) = s.post("/explain", json!({"model_id": m.model_id, "instance": 9999})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "INDEX_OUT_OF_RANGE");

    let (status, v) = s.get(&format!("/trees/{}", r.tree_id)).await;
    assert_eq!(status, StatusCode::OK);
    let tree: TreeExport = serde_json::from_value(v).unwrap();
    assert!(!tree.nodes.is_empty());
    assert_eq!(tree.fact_leaf, Some(r.explanation.fact_leaf));
    assert_eq!(tree.foil_leaf, r.explanation.foil_leaf);
    // Client-side recheck of the exported fact path.
    let mut node = r.explanation.fact_leaf;
    while let Some(parent) = tree.nodes[node].parent {
        let p = &tree.nodes[parent];
        let v = r.explanation.instance[p.feature.unwrap()];
        if p.left == Some(node) {
            assert!(v <= p.threshold.unwrap());
        } else {
            assert!(v > p.threshold.unwrap());
        }
        node = parent;
    }
    let (status, v) = s.get("/trees/t999").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "TREE_NOT_FOUND");
    s.stop().await;
}

#[tokio::test]
async fn quantitative_verbosity_adds_follow_up() {
    let s = Server::start(10).await;
    let m = s.train("iris", "mlp").await;
    let (status, v) = s
        .post(
            "/explain",
            json!({"model_id": m.model_id, "instance": [5.0, 3.4, 1.5, 0.2], "foil": 1, "verbosity": "quantitative"}),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let dialogue = v["dialogue"].as_array().unwrap();
    assert_eq!(dialogue.len(), 5);
    assert!(dialogue[3].as_str().unwrap().starts_with("User: How much"));
    s.stop().await;
}

#[tokio::test]
async fn trees_are_evicted_beyond_cache_size() {
    let s = Server::start(1).await;
    let m = s.train("iris", "logistic-regression").await;
    let (_, a) = s.post("/explain", json!({"model_id": m.model_id, "instance": 0})).await;
    let (_, b) = s.post("/explain", json!({"model_id": m.model_id, "instance": 1})).await;
    let (status, _) = s.get(&format!("/trees/{}", a["tree_id"].as_str().unwrap())).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = s.get(&format!("/trees/{}", b["tree_id"].as_str().unwrap())).await;
    assert_eq!(status, StatusCode::OK);
    s.stop().await;
}

#[tokio::test]
async fn concurrent_explains_equal_serial_ones() {
    let s = Server::start(100).await;
    let m = s.train("heart", "mlp").await;
    let body = |i: usize| json!({"model_id": m.model_id, "instance": i, "seed": 3});
    let mut serial = Vec::new();
    for i in 0..8 {
        let (_, v) = s.post("/explain", body(i)).await;
        serial.push(v["explanation"].clone());
    }
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let (client, url, b) = (s.client.clone(), format!("{}/explain", s.base), body(i));
            tokio::spawn(async move {
                let r = client.post(url).json(&b).send().await.unwrap();
                (r.status(), r.json::<Value>().await.unwrap())
            })
        })
        .collect();
    for (a, h) in serial.iter().zip(handles) {
        let (status, b) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        assert_eq!(*a, b["explanation"]);
    }
    s.stop().await;
}
