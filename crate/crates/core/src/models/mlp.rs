use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{divergence_warning, sigmoid, softmax_in_place, Hyperparams, ParamReader};
use crate::dataset::{Dataset, Scaler};
use crate::error::Result;

const KEYS: &[&str] = &["hidden", "epochs", "learning_rate", "l2", "batch_size"];

/// One hidden layer of logistic units, softmax output, cross-entropy loss,
/// trained with Adam on mini-batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    scaler: Scaler,
    /// hidden x (inputs + 1), bias first.
    w1: Vec<Vec<f64>>,
    /// classes x (hidden + 1), bias first.
    w2: Vec<Vec<f64>>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
        }
    }
}

impl Mlp {
    fn forward(&self, z: &[f64], hidden: &mut Vec<f64>) -> Vec<f64> {
        hidden.clear();
        hidden.extend(
            self.w1
                .iter()
                .map(|w| sigmoid(w[0] + z.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>())),
        );
        let mut out: Vec<f64> = self
            .w2
            .iter()
            .map(|w| w[0] + hidden.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        softmax_in_place(&mut out);
        out
    }

    pub(crate) fn fit(train: &Dataset, hp: &Hyperparams, seed: u64) -> Result<(Self, Option<String>)> {
        let p = ParamReader::new(hp, KEYS)?;
        let n_hidden = p.count("hidden", 16)?.max(1);
        let epochs = p.count("epochs", 500)?;
        let lr = p.positive("learning_rate", 0.01)?;
        let l2 = p.non_negative("l2", 1e-4)?;
        let batch = p.count("batch_size", 16)?.max(1);

        let scaler = Scaler::fit(&train.x)?;
        let z: Vec<Vec<f64>> = train.x.iter().map(|r| scaler.transform(r)).collect();
        let d = train.n_features();
        let k = train.n_classes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let limit1 = (6.0 / (d + n_hidden) as f64).sqrt();
        let limit2 = (6.0 / (n_hidden + k) as f64).sqrt();
        let w1 = (0..n_hidden)
            .map(|_| {
                let mut w = vec![0.0];
                w.extend((0..d).map(|_| rng.random_range(-limit1..limit1)));
                w
            })
            .collect();
        let w2 = (0..k)
            .map(|_| {
                let mut w = vec![0.0];
                w.extend((0..n_hidden).map(|_| rng.random_range(-limit2..limit2)));
                w
            })
            .collect();
        let mut net = Mlp { scaler, w1, w2 };

        let n1 = n_hidden * (d + 1);
        let n2 = k * (n_hidden + 1);
        let mut adam1 = Adam::new(n1);
        let mut adam2 = Adam::new(n2);
        let mut g1 = vec![0.0; n1];
        let mut g2 = vec![0.0; n2];
        let mut flat1 = vec![0.0; n1];
        let mut flat2 = vec![0.0; n2];
        let mut order: Vec<usize> = (0..z.len()).collect();
        let mut hidden = Vec::with_capacity(n_hidden);
        let mut initial = f64::NAN;
        let mut last = f64::NAN;

        for epoch in 0..epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                g1.iter_mut().for_each(|g| *g = 0.0);
                g2.iter_mut().for_each(|g| *g = 0.0);
                for &i in chunk {
                    let out = net.forward(&z[i], &mut hidden);
                    epoch_loss -= out[train.y[i]].max(1e-15).ln();
                    // dL/dlogit = p - onehot
                    let delta_out: Vec<f64> = out
                        .iter()
                        .enumerate()
                        .map(|(c, p)| p - (c == train.y[i]) as u8 as f64)
                        .collect();
                    for (c, dc) in delta_out.iter().enumerate() {
                        let row = &mut g2[c * (n_hidden + 1)..(c + 1) * (n_hidden + 1)];
                        row[0] += dc;
                        for (g, h) in row[1..].iter_mut().zip(&hidden) {
                            *g += dc * h;
                        }
                    }
                    for (j, h) in hidden.iter().enumerate() {
                        let back: f64 = delta_out
                            .iter()
                            .zip(&net.w2)
                            .map(|(dc, w)| dc * w[j + 1])
                            .sum();
                        let dh = back * h * (1.0 - h);
                        let row = &mut g1[j * (d + 1)..(j + 1) * (d + 1)];
                        row[0] += dh;
                        for (g, v) in row[1..].iter_mut().zip(&z[i]) {
                            *g += dh * v;
                        }
                    }
                }
                let m = chunk.len() as f64;
                for (j, w) in net.w1.iter().enumerate() {
                    for (q, wq) in w.iter().enumerate() {
                        let idx = j * (d + 1) + q;
                        g1[idx] = g1[idx] / m + if q > 0 { l2 * wq } else { 0.0 };
                        flat1[idx] = *wq;
                    }
                }
                for (c, w) in net.w2.iter().enumerate() {
                    for (q, wq) in w.iter().enumerate() {
                        let idx = c * (n_hidden + 1) + q;
                        g2[idx] = g2[idx] / m + if q > 0 { l2 * wq } else { 0.0 };
                        flat2[idx] = *wq;
                    }
                }
                adam1.step(&mut flat1, &g1, lr);
                adam2.step(&mut flat2, &g2, lr);
                for (j, w) in net.w1.iter_mut().enumerate() {
                    w.copy_from_slice(&flat1[j * (d + 1)..(j + 1) * (d + 1)]);
                }
                for (c, w) in net.w2.iter_mut().enumerate() {
                    w.copy_from_slice(&flat2[c * (n_hidden + 1)..(c + 1) * (n_hidden + 1)]);
                }
            }
            epoch_loss /= z.len() as f64;
            if epoch == 0 {
                initial = epoch_loss;
            }
            last = epoch_loss;
        }
        let warning = if epochs > 0 {
            divergence_warning(initial, last, epochs)
        } else {
            None
        };
        Ok((net, warning))
    }

    pub fn predict_distribution(&self, x: &[f64]) -> Vec<f64> {
        let z = self.scaler.transform(x);
        let mut hidden = Vec::with_capacity(self.w1.len());
        self.forward(&z, &mut hidden)
    }
}
