//! HTTP/JSON facade over datasets, models, explanations and trees.
//!
//! Endpoints:
//!
//! | method | path                     | body / result |
//! |--------|--------------------------|---------------|
//! | GET    | `/datasets`              | list of dataset summaries |
//! | POST   | `/datasets`              | `{id, csv}` registers a generic CSV (last column = label) |
//! | GET    | `/datasets/{id}/test`    | held-out instances with labels |
//! | POST   | `/models`                | `{dataset_id, kind, seed, hyperparams?}` -> `{model_id, f1}` |
//! | POST   | `/predict`               | `{model_id, instance}` -> class and distribution |
//! | POST   | `/explain`               | `{model_id, instance, foil?, verbosity?, seed?}` |
//! | GET    | `/trees/{id}`            | tree export of a recent explanation |
//!
//! Errors are `{"code": "...", "message": "..."}` with a 4xx/5xx status.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lru::LruCache;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::dataset::{
    load_fixture, parse_csv, split, Dataset, Scaler, Schema, DEFAULT_SPLIT_SEED, DEFAULT_TEST_FRACTION,
};
use crate::error::Error;
use crate::explanation::{explain_prepared, render_text, ExplainerConfig, Explanation, Verbosity};
use crate::foil::TreeExport;
use crate::models::{fit, ClassifierOracle, Hyperparams, ModelKind, TrainedModel};

pub const DEFAULT_CACHE_SIZE: usize = 100;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub cache_size: usize,
    pub explainer: ExplainerConfig,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            cache_size: DEFAULT_CACHE_SIZE,
            explainer: ExplainerConfig::default(),
        }
    }
}

struct DatasetEntry {
    dataset: Dataset,
    train: Dataset,
    test: Dataset,
    scaler: Scaler,
}

impl DatasetEntry {
    fn new(dataset: Dataset) -> Result<Self, Error> {
        let (train, test) = split(&dataset, DEFAULT_TEST_FRACTION, DEFAULT_SPLIT_SEED)?;
        let scaler = Scaler::fit(&train.x)?;
        Ok(DatasetEntry {
            dataset,
            train,
            test,
            scaler,
        })
    }
}

struct ModelEntry {
    model: TrainedModel,
    data: Arc<DatasetEntry>,
}

/// Shared session state. Datasets and models are immutable once stored.
pub struct AppState {
    config: ServiceConfig,
    datasets: RwLock<Vec<(String, Arc<DatasetEntry>)>>,
    models: RwLock<HashMap<String, Arc<ModelEntry>>>,
    trees: Mutex<LruCache<String, Arc<TreeExport>>>,
    next_model: AtomicU64,
    next_tree: AtomicU64,
}

impl AppState {
    /// Loads every bundled fixture found in the data directory.
    pub fn new(config: ServiceConfig) -> Result<Self, Error> {
        let mut datasets = Vec::new();
        for schema in Schema::NAMED {
            let d = load_fixture(&config.data_dir, schema)?;
            datasets.push((schema.id().to_string(), Arc::new(DatasetEntry::new(d)?)));
        }
        let cap = NonZeroUsize::new(config.cache_size)
            .ok_or_else(|| Error::InvalidArgument("cache size must be >= 1".into()))?;
        config.explainer.validate()?;
        Ok(AppState {
            config,
            datasets: RwLock::new(datasets),
            models: RwLock::new(HashMap::new()),
            trees: Mutex::new(LruCache::new(cap)),
            next_model: AtomicU64::new(1),
            next_tree: AtomicU64::new(1),
        })
    }

    fn dataset(&self, id: &str) -> Result<Arc<DatasetEntry>, ApiError> {
        self.datasets
            .read()
            .expect("dataset lock")
            .iter()
            .find(|(k, _)| k == id)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| ApiError::not_found("DATASET_NOT_FOUND", format!("no dataset '{id}'")))
    }

    fn model(&self, id: &str) -> Result<Arc<ModelEntry>, ApiError> {
        self.models
            .read()
            .expect("model lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("MODEL_NOT_FOUND", format!("no model '{id}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn not_found(code: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, code, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } | Error::ModelFormat(_) | Error::LeafNotInTree(_) | Error::InconsistentConditions { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "INVALID_REQUEST", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub n_instances: usize,
    pub n_features: usize,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub n_test: usize,
}

fn info(id: &str, e: &DatasetEntry) -> DatasetInfo {
    DatasetInfo {
        id: id.to_string(),
        n_instances: e.dataset.n_instances(),
        n_features: e.dataset.n_features(),
        class_names: e.dataset.class_names.clone(),
        feature_names: e.dataset.feature_names(),
        n_test: e.test.n_instances(),
    }
}

async fn list_datasets(State(state): State<Arc<AppState>>) -> Json<Vec<DatasetInfo>> {
    let guard = state.datasets.read().expect("dataset lock");
    Json(guard.iter().map(|(id, e)| info(id, e)).collect())
}

#[derive(Debug, Deserialize)]
struct LoadDatasetRequest {
    id: String,
    csv: String,
}

async fn load_dataset(
    State(state): State<Arc<AppState>>,
    body: Result<Json<LoadDatasetRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<DatasetInfo>), ApiError> {
    let Json(req) = body?;
    if req.id.trim().is_empty() {
        return Err(Error::InvalidArgument("dataset id must be non-empty".into()).into());
    }
    let id = req.id.clone();
    let entry = blocking(move || {
        let d = parse_csv(req.csv.as_bytes(), Schema::Generic, req.id)?;
        Ok(DatasetEntry::new(d)?)
    })
    .await?;
    let mut guard = state.datasets.write().expect("dataset lock");
    if guard.iter().any(|(k, _)| *k == id) {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "DUPLICATE_ID",
            format!("dataset '{id}' already exists"),
        ));
    }
    let out = info(&id, &entry);
    guard.push((id, Arc::new(entry)));
    Ok((StatusCode::CREATED, Json(out)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestInstance {
    pub index: usize,
    pub x: Vec<f64>,
    pub label: usize,
    pub label_name: String,
}

async fn test_instances(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Vec<TestInstance>> {
    let e = state.dataset(&id)?;
    let t = &e.test;
    Ok(Json(
        t.x.iter()
            .zip(&t.y)
            .enumerate()
            .map(|(index, (x, &label))| TestInstance {
                index,
                x: x.clone(),
                label,
                label_name: t.class_names[label].clone(),
            })
            .collect(),
    ))
}

#[derive(Debug, Deserialize)]
struct TrainRequest {
    dataset_id: String,
    kind: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    hyperparams: Hyperparams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub model_id: String,
    pub f1: f64,
    pub kind: ModelKind,
    pub dataset_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

async fn train_model(
    State(state): State<Arc<AppState>>,
    body: Result<Json<TrainRequest>, JsonRejection>,
) -> ApiResult<TrainResponse> {
    let Json(req) = body?;
    let data = state.dataset(&req.dataset_id)?;
    let kind: ModelKind = req.kind.parse()?;
    let d = data.clone();
    let (model, f1) = blocking(move || {
        let m = fit(kind, &d.train, &req.hyperparams, req.seed)?;
        let f1 = m.score(&d.test)?;
        Ok((m, f1))
    })
    .await?;
    let model_id = format!("m{}", state.next_model.fetch_add(1, Ordering::Relaxed));
    let warning = model.warning.clone();
    state
        .models
        .write()
        .expect("model lock")
        .insert(model_id.clone(), Arc::new(ModelEntry { model, data }));
    Ok(Json(TrainResponse {
        model_id,
        f1,
        kind,
        dataset_id: req.dataset_id,
        warning,
    }))
}

/// A feature vector, or an index into the held-out split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceRef {
    Values(Vec<f64>),
    TestIndex(usize),
}

/// A class given by name or by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassRef {
    Index(usize),
    Name(String),
}

fn resolve_instance(entry: &ModelEntry, r: &InstanceRef) -> Result<Vec<f64>, Error> {
    match r {
        InstanceRef::Values(v) => {
            let d = entry.data.dataset.n_features();
            if v.len() != d {
                return Err(Error::ArityMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("instance values must be finite".into()));
            }
            Ok(v.clone())
        }
        InstanceRef::TestIndex(i) => entry.data.test.x.get(*i).cloned().ok_or(Error::IndexOutOfRange {
            index: *i,
            len: entry.data.test.n_instances(),
        }),
    }
}

fn resolve_class(d: &Dataset, c: &ClassRef) -> Result<usize, Error> {
    match c {
        ClassRef::Index(i) if *i < d.n_classes() => Ok(*i),
        ClassRef::Index(i) => Err(Error::ClassOutOfRange {
            index: *i,
            n_classes: d.n_classes(),
        }),
        ClassRef::Name(n) => d
            .class_index(n)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown class '{n}'"))),
    }
}

#[derive(Debug, Deserialize)]
struct PredictRequest {
    model_id: String,
    instance: InstanceRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub class: usize,
    pub class_name: String,
    pub distribution: Vec<f64>,
}

async fn predict(
    State(state): State<Arc<AppState>>,
    body: Result<Json<PredictRequest>, JsonRejection>,
) -> ApiResult<PredictResponse> {
    let Json(req) = body?;
    let entry = state.model(&req.model_id)?;
    let x = resolve_instance(&entry, &req.instance)?;
    let distribution = entry.model.predict_distribution(&x);
    let class = crate::models::argmax(&distribution);
    Ok(Json(PredictResponse {
        class,
        class_name: entry.data.dataset.class_names[class].clone(),
        distribution,
    }))
}

#[derive(Debug, Deserialize)]
struct ExplainRequest {
    model_id: String,
    instance: InstanceRef,
    #[serde(default)]
    foil: Option<ClassRef>,
    #[serde(default)]
    verbosity: Verbosity,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainResponse {
    pub explanation: Explanation,
    pub fact_name: String,
    pub foil_name: String,
    pub dialogue: Vec<String>,
    pub tree_id: String,
}

async fn explain_handler(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ExplainRequest>, JsonRejection>,
) -> ApiResult<ExplainResponse> {
    let Json(req) = body?;
    let entry = state.model(&req.model_id)?;
    let x = resolve_instance(&entry, &req.instance)?;
    let foil = req
        .foil
        .as_ref()
        .map(|c| resolve_class(&entry.data.dataset, c))
        .transpose()?;
    let config = state.config.explainer;
    let e = entry.clone();
    let outcome = blocking(move || {
        Ok(explain_prepared(
            &e.model,
            &e.data.train,
            &e.data.scaler,
            &x,
            foil,
            &config,
            req.seed,
        )?)
    })
    .await?;
    let ex = outcome.explanation;
    let d = &entry.data.dataset;
    let export = outcome.tree.export(Some(&d.features), Some(ex.fact_leaf), ex.foil_leaf);
    let tree_id = format!("t{}", state.next_tree.fetch_add(1, Ordering::Relaxed));
    state
        .trees
        .lock()
        .expect("tree cache lock")
        .put(tree_id.clone(), Arc::new(export));
    Ok(Json(ExplainResponse {
        dialogue: render_text(&ex, &d.class_names, &d.features, req.verbosity),
        fact_name: d.class_names[ex.fact].clone(),
        foil_name: d.class_names[ex.foil].clone(),
        explanation: ex,
        tree_id,
    }))
}

async fn get_tree(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<TreeExport>, ApiError> {
    let tree = state
        .trees
        .lock()
        .expect("tree cache lock")
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("TREE_NOT_FOUND", format!("no tree '{id}' (unknown or evicted)")))?;
    Ok(Json((*tree).clone()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/datasets", get(list_datasets).post(load_dataset))
        .route("/datasets/{id}/test", get(test_instances))
        .route("/models", post(train_model))
        .route("/predict", post(predict))
        .route("/explain", post(explain_handler))
        .route("/trees/{id}", get(get_tree))
        .with_state(state)
}

/// Serves on an already-bound listener until `shutdown` resolves; in-flight
/// requests are allowed to finish.
pub async fn serve_with_shutdown(
    listener: TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    serve_with_shutdown(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
        log::info!("shutting down");
    })
    .await
}
