//! Contrastive explanations for tabular classifiers.
//!
//! Given a trained model, an instance and a contrasting class (the foil),
//! a one-versus-all decision tree is trained on a proximity-weighted local
//! sample labelled by the model. The conditions separating the instance's
//! leaf from the nearest foil leaf form the explanation.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod explanation;
pub mod foil;
pub mod metrics;
pub mod models;
pub mod sampling;
pub mod service;

pub use dataset::{load_csv, load_fixture, parse_csv, split, split_indices, Dataset, FeatureKind, FeatureMeta, Scaler, Schema};
pub use error::{Error, Result};
pub use evaluation::{evaluate_pair, run_grid, BenchmarkReport, BenchmarkRow, EvalConfig};
pub use explanation::{
    explain, explain_prepared, explain_with_tree, render_text, ExplainOutcome, ExplainerConfig, Explanation,
    Verbosity,
};
pub use foil::{FoilTree, Literal, SearchStrategy, StrategyKind, TreeParams};
pub use metrics::{binary_f1, f1_score, Averaging};
pub use models::{fit, ClassifierOracle, Hyperparams, ModelKind, TrainedModel};
pub use sampling::{generate_local, LocalSample, SamplingMethod};
