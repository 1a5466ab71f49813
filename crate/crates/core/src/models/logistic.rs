use serde::{Deserialize, Serialize};

use super::{divergence_warning, normalize, sigmoid, Hyperparams, ParamReader};
use crate::dataset::{Dataset, Scaler};
use crate::error::Result;

const KEYS: &[&str] = &["l2", "epochs", "learning_rate"];

/// One-vs-rest L2-regularized logistic regression trained by full-batch
/// gradient descent on standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    scaler: Scaler,
    /// Per class: bias followed by one weight per feature.
    weights: Vec<Vec<f64>>,
}

impl LogisticRegression {
    pub(crate) fn fit(train: &Dataset, hp: &Hyperparams) -> Result<(Self, Option<String>)> {
        let p = ParamReader::new(hp, KEYS)?;
        let l2 = p.non_negative("l2", 1e-4)?;
        let epochs = p.count("epochs", 500)?;
        let lr = p.positive("learning_rate", 0.5)?;

        let scaler = Scaler::fit(&train.x)?;
        let z: Vec<Vec<f64>> = train.x.iter().map(|r| scaler.transform(r)).collect();
        let n = z.len() as f64;
        let d = train.n_features();

        let mut weights = Vec::with_capacity(train.n_classes());
        let mut warning = None;
        for class in 0..train.n_classes() {
            let targets: Vec<f64> = train.y.iter().map(|&c| (c == class) as u8 as f64).collect();
            let mut w = vec![0.0; d + 1];
            let mut initial = f64::NAN;
            let mut last = f64::NAN;
            for epoch in 0..epochs {
                let mut grad = vec![0.0; d + 1];
                let mut loss = 0.0;
                for (row, &t) in z.iter().zip(&targets) {
                    let s = w[0] + row.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
                    let prob = sigmoid(s);
                    loss -= t * prob.max(1e-15).ln() + (1.0 - t) * (1.0 - prob).max(1e-15).ln();
                    let err = prob - t;
                    grad[0] += err;
                    for (g, v) in grad[1..].iter_mut().zip(row) {
                        *g += err * v;
                    }
                }
                loss = loss / n + 0.5 * l2 * w[1..].iter().map(|v| v * v).sum::<f64>();
                if epoch == 0 {
                    initial = loss;
                }
                last = loss;
                w[0] -= lr * grad[0] / n;
                for (wj, g) in w[1..].iter_mut().zip(&grad[1..]) {
                    *wj -= lr * (g / n + l2 * *wj);
                }
            }
            if warning.is_none() && epochs > 0 {
                warning = divergence_warning(initial, last, epochs);
            }
            weights.push(w);
        }
        Ok((LogisticRegression { scaler, weights }, warning))
    }

    pub fn predict_distribution(&self, x: &[f64]) -> Vec<f64> {
        let z = self.scaler.transform(x);
        let scores = self
            .weights
            .iter()
            .map(|w| sigmoid(w[0] + z.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>()))
            .collect();
        normalize(scores)
    }
}

#[cfg(test)]
mod tests {
    use crate::dataset::{Dataset, FeatureMeta};
    use crate::models::{fit, ClassifierOracle, Hyperparams, ModelKind};

    /// Two clusters separated by the line x0 + x1 = 0 with margin >= 1.
    fn separable() -> Dataset {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            let t = i as f64 * 0.4;
            x.push(vec![1.0 + t, 0.5 + 0.3 * t]);
            y.push(1);
            x.push(vec![-1.0 - 0.3 * t, -0.5 - t]);
            y.push(0);
        }
        Dataset::new(
            "toy",
            vec![FeatureMeta::numeric("a"), FeatureMeta::numeric("b")],
            x,
            y,
            vec!["neg".into(), "pos".into()],
        )
        .unwrap()
    }

    #[test]
    fn separable_toy_is_fit_perfectly() {
        let d = separable();
        // Enumerate the toy set to confirm it is separable by a0 + a1 = 0.
        for (row, &c) in d.x.iter().zip(&d.y) {
            assert_eq!((row[0] + row[1] > 0.0) as usize, c);
        }
        let m = fit(ModelKind::LogisticRegression, &d, &Hyperparams::new(), 0).unwrap();
        let acc = d
            .x
            .iter()
            .zip(&d.y)
            .filter(|(r, &c)| m.predict(r) == c)
            .count();
        assert_eq!(acc, 20);
        assert!(m.warning.is_none());
    }
}
