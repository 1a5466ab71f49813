//! Local training sets around a questioned instance, and proximity weights.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Scaler};
use crate::error::{Error, Result};

pub const MIN_SAMPLE_SIZE: usize = 50;
pub const DEFAULT_SAMPLE_SIZE: usize = 1000;
/// Weights never drop below this value.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMethod {
    /// Rows drawn uniformly with replacement from the training data.
    #[default]
    SampledExisting,
    /// Independent per-feature normals with the training mean and std.
    Gaussian,
    /// Each feature drawn independently from its empirical training values.
    Marginal,
}

impl SamplingMethod {
    pub fn id(self) -> &'static str {
        match self {
            SamplingMethod::SampledExisting => "sampled-existing",
            SamplingMethod::Gaussian => "gaussian",
            SamplingMethod::Marginal => "marginal",
        }
    }
}

impl fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SamplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampled-existing" | "existing" => Ok(SamplingMethod::SampledExisting),
            "gaussian" | "normal" => Ok(SamplingMethod::Gaussian),
            "marginal" => Ok(SamplingMethod::Marginal),
            _ => Err(Error::InvalidArgument(format!("unknown sampling method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSample {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub origin: SamplingMethod,
}

impl LocalSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Adds the questioned instance itself with weight 1.0, so that the
    /// trained tree has a leaf holding it.
    pub fn push_query(&mut self, x_q: &[f64]) {
        self.points.push(x_q.to_vec());
        self.weights.push(1.0);
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Draws `m` points around `x_q` with unit weights. `x_q` is not part of
/// the output; see [`LocalSample::push_query`].
pub fn generate_local(
    train: &Dataset,
    x_q: &[f64],
    method: SamplingMethod,
    m: usize,
    seed: u64,
) -> Result<LocalSample> {
    if m < MIN_SAMPLE_SIZE {
        return Err(Error::InvalidArgument(format!(
            "local sample size must be at least {MIN_SAMPLE_SIZE}, got {m}"
        )));
    }
    if train.n_instances() == 0 {
        return Err(Error::InsufficientData("training data is empty".into()));
    }
    if x_q.len() != train.n_features() {
        return Err(Error::ArityMismatch {
            expected: train.n_features(),
            got: x_q.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = train.n_instances();
    let points: Vec<Vec<f64>> = match method {
        SamplingMethod::SampledExisting => (0..m)
            .map(|_| train.x[rng.random_range(0..n)].clone())
            .collect(),
        SamplingMethod::Gaussian => {
            let scaler = Scaler::fit(&train.x)?;
            let normals: Vec<Option<Normal<f64>>> = scaler
                .mean
                .iter()
                .zip(&train_std(&train.x, &scaler.mean))
                .map(|(&mu, &sd)| (sd > 0.0).then(|| Normal::new(mu, sd).expect("finite std")))
                .collect();
            (0..m)
                .map(|_| {
                    normals
                        .iter()
                        .zip(&scaler.mean)
                        .map(|(dist, &mu)| dist.map_or(mu, |d| d.sample(&mut rng)))
                        .collect()
                })
                .collect()
        }
        SamplingMethod::Marginal => (0..m)
            .map(|_| {
                (0..train.n_features())
                    .map(|j| train.x[rng.random_range(0..n)][j])
                    .collect()
            })
            .collect(),
    };
    Ok(LocalSample {
        weights: vec![1.0; points.len()],
        points,
        origin: method,
    })
}

/// Unfloored population std, so constant columns stay exactly constant.
fn train_std(rows: &[Vec<f64>], mean: &[f64]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut var = vec![0.0; mean.len()];
    for r in rows {
        for ((v, x), m) in var.iter_mut().zip(r).zip(mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.into_iter().map(|v| (v / n).sqrt()).collect()
}

/// `0.75 * sqrt(n_features)`.
pub fn default_kernel_width(n_features: usize) -> f64 {
    0.75 * (n_features as f64).sqrt()
}

/// Exponential kernel on the squared Euclidean distance in standardized
/// space: `w = exp(-d^2 / width^2)`, floored at [`WEIGHT_FLOOR`].
pub fn kernel_weight(distance: f64, kernel_width: f64) -> f64 {
    (-(distance * distance) / (kernel_width * kernel_width))
        .exp()
        .max(WEIGHT_FLOOR)
}

pub fn proximity_weights(
    mut sample: LocalSample,
    x_q: &[f64],
    scaler: &Scaler,
    kernel_width: f64,
) -> Result<LocalSample> {
    if !(kernel_width > 0.0 && kernel_width.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "kernel width must be > 0, got {kernel_width}"
        )));
    }
    let zq = scaler.transform(x_q);
    sample.weights = sample
        .points
        .iter()
        .map(|p| {
            let d2: f64 = scaler
                .transform(p)
                .iter()
                .zip(&zq)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            kernel_weight(d2.sqrt(), kernel_width)
        })
        .collect();
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureMeta;

    fn train() -> Dataset {
        Dataset::new(
            "t",
            vec![
                FeatureMeta::numeric("a"),
                FeatureMeta::numeric("const"),
                FeatureMeta::numeric("c"),
            ],
            (0..60)
                .map(|i| vec![i as f64 * 0.5, 7.0, ((i * 37) % 11) as f64])
                .collect(),
            (0..60).map(|i| i % 2).collect(),
            vec!["x".into(), "y".into()],
        )
        .unwrap()
    }

    #[test]
    fn sample_size_must_reach_minimum() {
        let t = train();
        assert!(matches!(
            generate_local(&t, &t.x[0], SamplingMethod::SampledExisting, 49, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn gaussian_keeps_constant_columns_constant() {
        let t = train();
        let s = generate_local(&t, &t.x[0], SamplingMethod::Gaussian, 500, 4).unwrap();
        assert!(s.points.iter().all(|p| p[1] == 7.0));
        assert!(s.points.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn query_point_gets_unit_weight() {
        let t = train();
        let scaler = Scaler::fit(&t.x).unwrap();
        let mut s = generate_local(&t, &t.x[3], SamplingMethod::Marginal, 100, 1).unwrap();
        s.push_query(&t.x[3]);
        let s = proximity_weights(s, &t.x[3], &scaler, 1.0).unwrap();
        assert_eq!(*s.weights.last().unwrap(), 1.0);
        assert!(s.weights.iter().all(|&w| w > 0.0 && w.is_finite()));
    }

    #[test]
    fn kernel_at_width_is_inverse_e() {
        // exp(-w^2/w^2) = e^-1
        assert!((kernel_weight(2.0, 2.0) - 0.36787944117144233).abs() < 1e-15);
        assert!(kernel_weight(0.5, 1.0) > kernel_weight(0.6, 1.0));
        assert_eq!(kernel_weight(1e6, 1.0), WEIGHT_FLOOR);
    }

    #[test]
    fn non_positive_width_rejected() {
        let t = train();
        let scaler = Scaler::fit(&t.x).unwrap();
        let s = generate_local(&t, &t.x[0], SamplingMethod::SampledExisting, 50, 0).unwrap();
        assert!(proximity_weights(s, &t.x[0], &scaler, 0.0).is_err());
    }
}
