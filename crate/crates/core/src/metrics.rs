//! F1 scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// F1 of class `1` against everything else.
    Binary,
    /// Unweighted mean of per-class F1 over classes `0..=max label`.
    Macro,
}

/// Per-class confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn for_class(predicted: &[usize], truth: &[usize], class: usize) -> Self {
        let mut c = Counts::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == class, t == class) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
        c
    }

    /// A class absent from both vectors scores 1.0.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

pub fn f1_score(predicted: &[usize], truth: &[usize], averaging: Averaging) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("f1 of empty vectors".into()));
    }
    Ok(match averaging {
        Averaging::Binary => Counts::for_class(predicted, truth, 1).f1(),
        Averaging::Macro => {
            let n_classes = predicted.iter().chain(truth).copied().max().unwrap_or(0) + 1;
            (0..n_classes)
                .map(|c| Counts::for_class(predicted, truth, c).f1())
                .sum::<f64>()
                / n_classes as f64
        }
    })
}

/// Binary F1 over boolean labels (`true` is the positive class).
pub fn binary_f1(predicted: &[bool], truth: &[bool]) -> Result<f64> {
    let p: Vec<usize> = predicted.iter().map(|&b| b as usize).collect();
    let t: Vec<usize> = truth.iter().map(|&b| b as usize).collect();
    f1_score(&p, &t, Averaging::Binary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_prediction_scores_one() {
        let v = vec![0, 2, 1, 1, 0];
        assert_eq!(f1_score(&v, &v, Averaging::Macro).unwrap(), 1.0);
        let b = vec![0, 0, 0];
        assert_eq!(f1_score(&b, &b, Averaging::Binary).unwrap(), 1.0);
    }

    #[test]
    fn binary_hand_computed() {
        // tp=1 fp=1 fn=1 -> precision 0.5, recall 0.5
        let f = f1_score(&[1, 0, 1], &[1, 1, 0], Averaging::Binary).unwrap();
        assert_abs_diff_eq!(f, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn all_wrong_is_zero() {
        let f = f1_score(&[0, 1, 0, 1], &[1, 0, 1, 0], Averaging::Binary).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn macro_averages_classes() {
        // class 0: tp1 fp0 fn1 -> 2/3; class 1: tp1 fp1 fn0 -> 2/3; class 2 absent -> 1.0
        let f = f1_score(&[0, 1, 1], &[0, 1, 0], Averaging::Macro).unwrap();
        assert_abs_diff_eq!(f, 2.0 / 3.0, epsilon = 1e-12);
        let f = f1_score(&[0, 1, 1, 3], &[0, 1, 0, 3], Averaging::Macro).unwrap();
        assert_abs_diff_eq!(f, (2.0 / 3.0 + 2.0 / 3.0 + 1.0 + 1.0) / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            f1_score(&[0, 1], &[0], Averaging::Binary),
            Err(Error::LengthMismatch { left: 2, right: 1 })
        ));
    }
}
