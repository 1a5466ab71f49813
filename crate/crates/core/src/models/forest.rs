use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Hyperparams, ParamReader};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::foil::midpoint;
use crate::foil::partition;

const KEYS: &[&str] = &["n_trees", "max_depth", "bootstrap", "max_features", "min_samples_split"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        distribution: Vec<f64>,
    },
}

/// Multiclass Gini CART used as the forest's base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTree {
    nodes: Vec<Node>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_depth: Option<usize>,
    max_features: usize,
    min_samples_split: usize,
    nodes: Vec<Node>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &i in idx.iter() {
            counts[self.y[i]] += 1;
        }
        let id = self.nodes.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_reached || idx.len() < self.min_samples_split {
            self.nodes.push(leaf(&counts));
            return id;
        }
        let Some((feature, threshold)) = self.best_split(idx, &counts, rng) else {
            self.nodes.push(leaf(&counts));
            return id;
        };
        // Reserve this slot; children are appended after it.
        self.nodes.push(Node::Leaf { distribution: Vec::new() });
        let mid = partition(idx, |i| self.x[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(mid);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Examines features in random order; stops after `max_features` once a
    /// valid split has been seen.
    fn best_split(&self, idx: &[usize], counts: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let n_features = self.x[0].len();
        let mut order: Vec<usize> = (0..n_features).collect();
        order.shuffle(rng);
        let parent = gini(counts, idx.len());
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = idx.to_vec();
        for (visited, &f) in order.iter().enumerate() {
            if visited >= self.max_features && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = vec![0usize; self.n_classes];
            let n = sorted.len();
            for k in 0..n - 1 {
                left[self.y[sorted[k]]] += 1;
                let (a, b) = (self.x[sorted[k]][f], self.x[sorted[k + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = k + 1;
                let right: Vec<usize> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let child = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                let gain = parent - child;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, midpoint(a, b)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn leaf(counts: &[usize]) -> Node {
    let total: usize = counts.iter().sum();
    Node::Leaf {
        distribution: counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect(),
    }
}

impl ClassificationTree {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn fit_indices(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        idx: &mut [usize],
        max_depth: Option<usize>,
        max_features: usize,
        min_samples_split: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut b = Builder {
            x,
            y,
            n_classes,
            max_depth,
            max_features: max_features.max(1),
            min_samples_split: min_samples_split.max(2),
            nodes: Vec::new(),
        };
        b.build(idx, 0, rng);
        ClassificationTree { nodes: b.nodes }
    }

    pub fn distribution(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { distribution } => return distribution,
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

/// Bagged Gini trees; the distribution is the mean of leaf class fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<ClassificationTree>,
    n_classes: usize,
}

impl RandomForest {
    pub(crate) fn fit(train: &Dataset, hp: &Hyperparams, seed: u64) -> Result<Self> {
        let p = ParamReader::new(hp, KEYS)?;
        let n_trees = p.count("n_trees", 100)?.max(1);
        let max_depth = match p.count("max_depth", 0)? {
            0 => None,
            d => Some(d),
        };
        let bootstrap = p.flag("bootstrap", true)?;
        let d = train.n_features();
        let max_features = match p.count("max_features", 0)? {
            0 => ((d as f64).sqrt().floor() as usize).max(1),
            m => m.min(d),
        };
        let min_samples_split = p.count("min_samples_split", 2)?;

        let n = train.n_instances();
        let mut trees = Vec::with_capacity(n_trees);
        for t in 0..n_trees {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            let mut idx: Vec<usize> = if bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            trees.push(ClassificationTree::fit_indices(
                &train.x,
                &train.y,
                train.n_classes(),
                &mut idx,
                max_depth,
                max_features,
                min_samples_split,
                &mut rng,
            ));
        }
        Ok(RandomForest {
            trees,
            n_classes: train.n_classes(),
        })
    }

    pub fn predict_distribution(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.distribution(x)) {
                *a += p;
            }
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
