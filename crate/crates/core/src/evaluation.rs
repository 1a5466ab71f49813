//! Benchmark harness: explains every test instance of each (dataset, model)
//! pair and reports mean explanation length, foil-tree accuracy and
//! fidelity, and time per explanation.
//!
//! Each explanation's tree is scored on the whole test split for its own
//! one-versus-all task (foil = that explanation's foil). Predictions from
//! all trees of a repetition are pooled before computing a single binary
//! F1: against the true labels for accuracy, against the model's outputs
//! for fidelity. Rows average three repetitions with fresh explanation
//! seeds on a fixed stratified split.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{split, Dataset, Scaler};
use crate::error::{Error, Result};
use crate::explanation::{explain_prepared, ExplainerConfig};
use crate::foil::path_conditions;
use crate::metrics::binary_f1;
use crate::models::{fit, ClassifierOracle, Hyperparams, ModelKind, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub explainer: ExplainerConfig,
    pub test_fraction: f64,
    pub repetitions: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            explainer: ExplainerConfig::default(),
            test_fraction: 0.3,
            repetitions: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub dataset: String,
    pub model: ModelKind,
    pub model_f1: f64,
    pub mean_length: f64,
    pub n_features: usize,
    pub accuracy: f64,
    pub fidelity: f64,
    pub mean_time_s: f64,
    /// Explanations attempted per repetition.
    pub n_explained: usize,
    /// Total zero-length explanations over all repetitions.
    pub zero_length_count: usize,
    /// Total explanations whose tree had no foil leaf.
    pub no_foil_region_count: usize,
    /// Total per-instance failures (errors), never silently dropped.
    pub failures: usize,
    /// Explanations whose fact path was not satisfied by the instance.
    pub fact_path_violations: usize,
    pub max_length: usize,
    /// Mean local fidelity of the trees on their own weighted samples.
    pub mean_local_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: String,
    pub n_instances: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Instance and feature counts quoted in the dataset's published
    /// description, when they are known to differ from the file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub described_as: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSeeds {
    pub dataset: String,
    pub model: ModelKind,
    pub split_seed: u64,
    pub model_seed: u64,
    pub repetition_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFailure {
    pub dataset: String,
    pub model: ModelKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub failures: Vec<PairFailure>,
    pub datasets: Vec<DatasetSummary>,
    pub config: EvalConfig,
    pub master_seed: u64,
    pub seeds: Vec<PairSeeds>,
}

/// SplitMix64 finalizer over `a ^ f(b)`; used to derive independent seeds.
pub fn derive_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct InstanceOutcome {
    length: usize,
    zero_length: bool,
    no_foil_region: bool,
    fact_path_ok: bool,
    seconds: f64,
    foil: usize,
    local_fidelity: f64,
    /// Tree output on every test instance.
    tree_on_test: Vec<bool>,
}

fn explain_one<M: ClassifierOracle + ?Sized>(
    model: &M,
    train: &Dataset,
    scaler: &Scaler,
    test: &Dataset,
    i: usize,
    config: &ExplainerConfig,
    seed: u64,
) -> Result<InstanceOutcome> {
    let x_q = &test.x[i];
    let start = Instant::now();
    let outcome = explain_prepared(model, train, scaler, x_q, None, config, seed)?;
    let seconds = start.elapsed().as_secs_f64();
    let e = &outcome.explanation;
    let fact_path_ok = path_conditions(&outcome.tree, e.fact_leaf)?
        .iter()
        .all(|c| c.satisfied_by(x_q));
    Ok(InstanceOutcome {
        length: e.literals.len(),
        zero_length: e.zero_length,
        no_foil_region: !e.foil_region_found,
        fact_path_ok,
        seconds,
        foil: e.foil,
        local_fidelity: e.fidelity,
        tree_on_test: test.x.iter().map(|x| outcome.tree.predicts_foil(x)).collect(),
    })
}

/// Evaluates one trained model; `seeds` holds one explanation seed per
/// repetition.
pub fn evaluate_pair<M: ClassifierOracle + ?Sized>(
    train: &Dataset,
    test: &Dataset,
    model: &M,
    kind: ModelKind,
    config: &EvalConfig,
    seeds: &[u64],
) -> Result<BenchmarkRow> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one repetition seed".into()));
    }
    if test.n_instances() == 0 {
        return Err(Error::EmptyDataset);
    }
    let scaler = Scaler::fit(&train.x)?;
    let model_pred = model.predict_batch(&test.x);
    let model_f1 = crate::metrics::f1_score(&model_pred, &test.y, crate::metrics::Averaging::Macro)?;
    let max_depth = config.explainer.tree.max_depth;

    let mut lengths = Vec::new();
    let mut accuracies = Vec::new();
    let mut fidelities = Vec::new();
    let mut times = Vec::new();
    let mut local_fidelity = Vec::new();
    let mut zero_length_count = 0;
    let mut no_foil_region_count = 0;
    let mut failures = 0;
    let mut fact_path_violations = 0;
    let mut max_length = 0;

    for &rep_seed in seeds {
        let outcomes: Vec<Result<InstanceOutcome>> = (0..test.n_instances())
            .into_par_iter()
            .map(|i| {
                explain_one(
                    model,
                    train,
                    &scaler,
                    test,
                    i,
                    &config.explainer,
                    derive_seed(rep_seed, i as u64),
                )
            })
            .collect();

        let mut tree_pred = Vec::new();
        let mut vs_truth = Vec::new();
        let mut vs_model = Vec::new();
        let mut rep_len = 0usize;
        let mut rep_ok = 0usize;
        for (i, outcome) in outcomes.into_iter().enumerate() {
            let o = match outcome {
                Ok(o) => o,
                Err(e) => {
                    log::warn!("{} / {kind}: instance {i} failed: {e}", test.name);
                    failures += 1;
                    continue;
                }
            };
            rep_ok += 1;
            rep_len += o.length;
            max_length = max_length.max(o.length);
            zero_length_count += o.zero_length as usize;
            no_foil_region_count += o.no_foil_region as usize;
            fact_path_violations += (!o.fact_path_ok || o.length > max_depth) as usize;
            times.push(o.seconds);
            local_fidelity.push(o.local_fidelity);
            for (j, &p) in o.tree_on_test.iter().enumerate() {
                tree_pred.push(p);
                vs_truth.push(test.y[j] == o.foil);
                vs_model.push(model_pred[j] == o.foil);
            }
        }
        if rep_ok == 0 {
            continue;
        }
        lengths.push(rep_len as f64 / rep_ok as f64);
        accuracies.push(binary_f1(&tree_pred, &vs_truth)?);
        fidelities.push(binary_f1(&tree_pred, &vs_model)?);
    }
    if lengths.is_empty() {
        return Err(Error::InsufficientData(format!(
            "every explanation failed for {} / {kind}",
            test.name
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(BenchmarkRow {
        dataset: test.name.clone(),
        model: kind,
        model_f1,
        mean_length: mean(&lengths),
        n_features: test.n_features(),
        accuracy: mean(&accuracies),
        fidelity: mean(&fidelities),
        mean_time_s: mean(&times),
        n_explained: test.n_instances(),
        zero_length_count,
        no_foil_region_count,
        failures,
        fact_path_violations,
        max_length,
        mean_local_fidelity: mean(&local_fidelity),
    })
}

fn described_as(id: &str) -> Option<(usize, usize)> {
    match id {
        "diabetes" => Some((769, 9)),
        _ => None,
    }
}

/// Runs every (dataset, model) pair. Deterministic under `master_seed`
/// apart from the timing column.
pub fn run_grid(
    datasets: &[Dataset],
    kinds: &[ModelKind],
    config: &EvalConfig,
    master_seed: u64,
) -> Result<BenchmarkReport> {
    config.explainer.validate()?;
    if config.repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be >= 1".into()));
    }
    let mut report = BenchmarkReport {
        rows: Vec::new(),
        failures: Vec::new(),
        datasets: Vec::new(),
        config: config.clone(),
        master_seed,
        seeds: Vec::new(),
    };
    for (di, d) in datasets.iter().enumerate() {
        let split_seed = derive_seed(master_seed, di as u64);
        let (train, test) = match split(d, config.test_fraction, split_seed) {
            Ok(s) => s,
            Err(e) => {
                for &kind in kinds {
                    report.failures.push(PairFailure {
                        dataset: d.name.clone(),
                        model: kind,
                        reason: e.to_string(),
                    });
                }
                continue;
            }
        };
        report.datasets.push(DatasetSummary {
            id: d.name.clone(),
            n_instances: d.n_instances(),
            n_features: d.n_features(),
            n_classes: d.n_classes(),
            n_train: train.n_instances(),
            n_test: test.n_instances(),
            described_as: described_as(&d.name),
        });
        for (ki, &kind) in kinds.iter().enumerate() {
            let pair_seed = derive_seed(split_seed, ki as u64 + 1);
            let model_seed = derive_seed(pair_seed, 0);
            let repetition_seeds: Vec<u64> = (0..config.repetitions)
                .map(|r| derive_seed(pair_seed, r as u64 + 1))
                .collect();
            report.seeds.push(PairSeeds {
                dataset: d.name.clone(),
                model: kind,
                split_seed,
                model_seed,
                repetition_seeds: repetition_seeds.clone(),
            });
            log::info!("evaluating {} / {kind}", d.name);
            let result = fit(kind, &train, &Hyperparams::new(), model_seed).and_then(|m: TrainedModel| {
                evaluate_pair(&train, &test, &m, kind, config, &repetition_seeds)
            });
            match result {
                Ok(row) => report.rows.push(row),
                Err(e) => report.failures.push(PairFailure {
                    dataset: d.name.clone(),
                    model: kind,
                    reason: e.to_string(),
                }),
            }
        }
    }
    Ok(report)
}

/// Aggregates over all rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeans {
    pub model_f1: f64,
    pub mean_length: f64,
    pub accuracy: f64,
    pub fidelity: f64,
    pub mean_time_s: f64,
}

impl BenchmarkReport {
    pub fn means(&self) -> Option<GridMeans> {
        if self.rows.is_empty() {
            return None;
        }
        let n = self.rows.len() as f64;
        let avg = |f: fn(&BenchmarkRow) -> f64| self.rows.iter().map(f).sum::<f64>() / n;
        Some(GridMeans {
            model_f1: avg(|r| r.model_f1),
            mean_length: avg(|r| r.mean_length),
            accuracy: avg(|r| r.accuracy),
            fidelity: avg(|r| r.fidelity),
            mean_time_s: avg(|r| r.mean_time_s),
        })
    }

    /// Structured form. Without timing the output is byte-identical across
    /// runs with the same seed.
    pub fn to_json(&self, include_timing: bool) -> String {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if !include_timing {
            if let Some(rows) = value.get_mut("rows").and_then(|r| r.as_array_mut()) {
                for row in rows {
                    if let Some(obj) = row.as_object_mut() {
                        obj.remove("mean_time_s");
                    }
                }
            }
        }
        serde_json::to_string_pretty(&value).expect("report serializes")
    }

    /// Aligned plain-text table.
    pub fn render_table(&self, include_timing: bool) -> String {
        let mut header = vec![
            "Data set".to_string(),
            "Model".to_string(),
            "F1".to_string(),
            "Mean length".to_string(),
            "Accuracy".to_string(),
            "Fidelity".to_string(),
        ];
        if include_timing {
            header.push("Time (s)".to_string());
        }
        header.push("Zero-length".to_string());
        header.push("No foil".to_string());
        header.push("Failures".to_string());

        let mut rows: Vec<Vec<String>> = Vec::new();
        for r in &self.rows {
            let mut cells = vec![
                r.dataset.clone(),
                r.model.display_name().to_string(),
                format!("{:.2}", r.model_f1),
                format!("{:.2} ({})", r.mean_length, r.n_features),
                format!("{:.2}", r.accuracy),
                format!("{:.2}", r.fidelity),
            ];
            if include_timing {
                cells.push(format!("{:.3}", r.mean_time_s));
            }
            cells.push(r.zero_length_count.to_string());
            cells.push(r.no_foil_region_count.to_string());
            cells.push(r.failures.to_string());
            rows.push(cells);
        }
        if let Some(m) = self.means() {
            let mut cells = vec![
                "mean".to_string(),
                String::new(),
                format!("{:.2}", m.model_f1),
                format!("{:.2}", m.mean_length),
                format!("{:.2}", m.accuracy),
                format!("{:.2}", m.fidelity),
            ];
            if include_timing {
                cells.push(format!("{:.3}", m.mean_time_s));
            }
            cells.extend([String::new(), String::new(), String::new()]);
            rows.push(cells);
        }

        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].len())
                    .chain([header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c < 2 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = String::new();
        let _ = writeln!(out, "{}", line(&header));
        let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        let n_rows = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if i + 1 == n_rows && self.means().is_some() {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
            let _ = writeln!(out, "{}", line(r));
        }
        for d in &self.datasets {
            let _ = write!(
                out,
                "\n{}: {} instances ({} train / {} test), {} features, {} classes",
                d.id, d.n_instances, d.n_train, d.n_test, d.n_features, d.n_classes
            );
            if let Some((n, f)) = d.described_as {
                let _ = write!(out, "; documented elsewhere as {n} instances with {f} features");
            }
        }
        for f in &self.failures {
            let _ = write!(out, "\nFAILED {} / {}: {}", f.dataset, f.model, f.reason);
        }
        let _ = writeln!(out, "\nmaster seed {}", self.master_seed);
        out
    }
}
