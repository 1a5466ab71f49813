//! The opaque classifier contract the explainer consumes, and the built-in
//! trainable classifiers used by the benchmark grid.
//!
//! The explainer only ever calls [`ClassifierOracle::predict`] and
//! [`ClassifierOracle::predict_distribution`]; anything implementing the
//! trait can be explained.

mod forest;
mod logistic;
mod mlp;
mod svm;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{f1_score, Averaging};

pub use forest::{ClassificationTree, RandomForest};
pub use logistic::LogisticRegression;
pub use mlp::Mlp;
pub use svm::LinearSvm;

/// Everything the explainer knows about a model.
///
/// Implementations must be pure: the same input always yields the same
/// output. `predict` must agree with the argmax of `predict_distribution`
/// (lowest index wins ties), which the default method guarantees.
pub trait ClassifierOracle: Send + Sync {
    fn n_classes(&self) -> usize;

    fn n_features(&self) -> usize;

    /// Probability-like scores summing to one.
    fn predict_distribution(&self, x: &[f64]) -> Vec<f64>;

    fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.predict_distribution(x))
    }

    fn predict_batch(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

impl<T: ClassifierOracle + ?Sized> ClassifierOracle for &T {
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn predict_distribution(&self, x: &[f64]) -> Vec<f64> {
        (**self).predict_distribution(x)
    }
    fn predict(&self, x: &[f64]) -> usize {
        (**self).predict(x)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Normalizes non-negative scores; all-zero input becomes uniform.
pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        v.iter_mut().for_each(|p| *p /= sum);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|p| *p = u);
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LogisticRegression,
    RandomForest,
    Mlp,
    /// Linear one-vs-rest SVM trained with hinge loss.
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::RandomForest,
        ModelKind::LogisticRegression,
        ModelKind::Svm,
        ModelKind::Mlp,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "logistic-regression",
            ModelKind::RandomForest => "random-forest",
            ModelKind::Mlp => "mlp",
            ModelKind::Svm => "svm",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "Logistic Regression",
            ModelKind::RandomForest => "Random Forest",
            ModelKind::Mlp => "Neural Network",
            ModelKind::Svm => "SVM",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "logistic-regression" | "logreg" | "lr" => Ok(ModelKind::LogisticRegression),
            "random-forest" | "rf" => Ok(ModelKind::RandomForest),
            "mlp" | "neural-network" | "nn" => Ok(ModelKind::Mlp),
            "svm" | "linear-svm" => Ok(ModelKind::Svm),
            _ => Err(Error::UnknownModelKind(s.to_string())),
        }
    }
}

/// Named numeric hyperparameters. Keys not understood by a model kind are
/// rejected.
pub type Hyperparams = BTreeMap<String, f64>;

pub(crate) struct ParamReader<'a> {
    params: &'a Hyperparams,
    known: &'static [&'static str],
}

impl<'a> ParamReader<'a> {
    pub(crate) fn new(params: &'a Hyperparams, known: &'static [&'static str]) -> Result<Self> {
        if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::InvalidHyperparameter(format!(
                "unknown key '{k}', expected one of {known:?}"
            )));
        }
        Ok(ParamReader { params, known })
    }

    pub(crate) fn positive(&self, key: &str, default: f64) -> Result<f64> {
        debug_assert!(self.known.contains(&key));
        let v = self.params.get(key).copied().unwrap_or(default);
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidHyperparameter(format!("{key} must be > 0, got {v}")));
        }
        Ok(v)
    }

    pub(crate) fn non_negative(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.params.get(key).copied().unwrap_or(default);
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidHyperparameter(format!("{key} must be >= 0, got {v}")));
        }
        Ok(v)
    }

    pub(crate) fn count(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.params.get(key).copied().unwrap_or(default as f64);
        if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "{key} must be a non-negative integer, got {v}"
            )));
        }
        Ok(v as usize)
    }

    pub(crate) fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.params.get(key) {
            None => Ok(default),
            Some(&0.0) => Ok(false),
            Some(&1.0) => Ok(true),
            Some(v) => Err(Error::InvalidHyperparameter(format!("{key} must be 0 or 1, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "kebab-case")]
pub enum ModelParams {
    LogisticRegression(LogisticRegression),
    RandomForest(RandomForest),
    Mlp(Mlp),
    Svm(LinearSvm),
}

/// Serialization format version written into saved models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub train_seed: u64,
    pub hyperparams: Hyperparams,
    pub n_features: usize,
    pub n_classes: usize,
    /// Set when training hit its iteration cap with a diverging loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: TrainedModel =
            serde_json::from_str(s).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {}",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    /// Macro F1 on a labelled dataset.
    pub fn score(&self, d: &Dataset) -> Result<f64> {
        let pred = self.predict_batch(&d.x);
        f1_score(&pred, &d.y, Averaging::Macro)
    }
}

impl ClassifierOracle for TrainedModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_distribution(&self, x: &[f64]) -> Vec<f64> {
        match &self.params {
            ModelParams::LogisticRegression(m) => m.predict_distribution(x),
            ModelParams::RandomForest(m) => m.predict_distribution(x),
            ModelParams::Mlp(m) => m.predict_distribution(x),
            ModelParams::Svm(m) => m.predict_distribution(x),
        }
    }
}

/// Trains a model of `kind` on `train`. Deterministic for a fixed seed.
pub fn fit(kind: ModelKind, train: &Dataset, hyperparams: &Hyperparams, seed: u64) -> Result<TrainedModel> {
    if train.n_instances() == 0 {
        return Err(Error::EmptyDataset);
    }
    let (params, warning) = match kind {
        ModelKind::LogisticRegression => {
            let (m, w) = LogisticRegression::fit(train, hyperparams)?;
            (ModelParams::LogisticRegression(m), w)
        }
        ModelKind::RandomForest => (
            ModelParams::RandomForest(RandomForest::fit(train, hyperparams, seed)?),
            None,
        ),
        ModelKind::Mlp => {
            let (m, w) = Mlp::fit(train, hyperparams, seed)?;
            (ModelParams::Mlp(m), w)
        }
        ModelKind::Svm => {
            let (m, w) = LinearSvm::fit(train, hyperparams, seed)?;
            (ModelParams::Svm(m), w)
        }
    };
    if let Some(w) = &warning {
        log::warn!("{kind} on {}: {w}", train.name);
    }
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        kind,
        train_seed: seed,
        hyperparams: hyperparams.clone(),
        n_features: train.n_features(),
        n_classes: train.n_classes(),
        warning,
        params,
    })
}

/// Flags a loss curve that ended non-finite or above where it started.
pub(crate) fn divergence_warning(initial: f64, last: f64, epochs: usize) -> Option<String> {
    if !last.is_finite() || last > initial {
        Some(format!(
            "no convergence after {epochs} epochs (loss {initial:.4} -> {last:.4})"
        ))
    } else {
        None
    }
}
