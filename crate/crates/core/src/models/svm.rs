use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{divergence_warning, softmax_in_place, Hyperparams, ParamReader};
use crate::dataset::{Dataset, Scaler};
use crate::error::Result;

const KEYS: &[&str] = &["l2", "epochs", "learning_rate", "batch_size"];

/// One-vs-rest linear SVM: hinge loss with an L2 penalty, minimized by
/// mini-batch subgradient descent. Decision scores are turned into a
/// distribution with a softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    scaler: Scaler,
    weights: Vec<Vec<f64>>,
}

fn score(w: &[f64], z: &[f64]) -> f64 {
    w[0] + z.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>()
}

impl LinearSvm {
    pub(crate) fn fit(train: &Dataset, hp: &Hyperparams, seed: u64) -> Result<(Self, Option<String>)> {
        let p = ParamReader::new(hp, KEYS)?;
        let l2 = p.non_negative("l2", 1e-3)?;
        let epochs = p.count("epochs", 500)?;
        let lr0 = p.positive("learning_rate", 0.1)?;
        let batch = p.count("batch_size", 16)?.max(1);

        let scaler = Scaler::fit(&train.x)?;
        let z: Vec<Vec<f64>> = train.x.iter().map(|r| scaler.transform(r)).collect();
        let d = train.n_features();
        let mut weights = Vec::with_capacity(train.n_classes());
        let mut warning = None;

        for class in 0..train.n_classes() {
            let t: Vec<f64> = train
                .y
                .iter()
                .map(|&c| if c == class { 1.0 } else { -1.0 })
                .collect();
            let objective = |w: &[f64]| {
                let hinge: f64 = z
                    .iter()
                    .zip(&t)
                    .map(|(r, ti)| (1.0 - ti * score(w, r)).max(0.0))
                    .sum::<f64>()
                    / z.len() as f64;
                hinge + 0.5 * l2 * w[1..].iter().map(|v| v * v).sum::<f64>()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(class as u64 + 1);
            let mut w = vec![0.0; d + 1];
            let initial = objective(&w);
            let mut order: Vec<usize> = (0..z.len()).collect();
            let mut step = 0usize;
            for _ in 0..epochs {
                order.shuffle(&mut rng);
                for chunk in order.chunks(batch) {
                    let lr = lr0 / (1.0 + lr0 * l2 * step as f64);
                    step += 1;
                    let mut grad = vec![0.0; d + 1];
                    for &i in chunk {
                        if t[i] * score(&w, &z[i]) < 1.0 {
                            grad[0] -= t[i];
                            for (g, v) in grad[1..].iter_mut().zip(&z[i]) {
                                *g -= t[i] * v;
                            }
                        }
                    }
                    let m = chunk.len() as f64;
                    w[0] -= lr * grad[0] / m;
                    for (wj, g) in w[1..].iter_mut().zip(&grad[1..]) {
                        *wj -= lr * (g / m + l2 * *wj);
                    }
                }
            }
            if warning.is_none() && epochs > 0 {
                warning = divergence_warning(initial, objective(&w), epochs);
            }
            weights.push(w);
        }
        Ok((LinearSvm { scaler, weights }, warning))
    }

    pub fn predict_distribution(&self, x: &[f64]) -> Vec<f64> {
        let z = self.scaler.transform(x);
        let mut s: Vec<f64> = self.weights.iter().map(|w| score(w, &z)).collect();
        softmax_in_place(&mut s);
        s
    }
}
