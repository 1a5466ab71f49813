use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ClassifierOracle;
use crate::sampling::LocalSample;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeafLabel {
    Foil,
    NotFoil,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// `x[feature] <= threshold` goes left.
    pub threshold: f64,
    pub left: NodeId,
    pub right: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub depth: usize,
    pub split: Option<Split>,
    pub foil_weight: f64,
    pub notfoil_weight: f64,
    pub n_samples: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn total_weight(&self) -> f64 {
        self.foil_weight + self.notfoil_weight
    }

    /// Weighted share of the majority label at this node.
    pub fn node_accuracy(&self) -> f64 {
        let total = self.total_weight();
        if total > 0.0 {
            self.foil_weight.max(self.notfoil_weight) / total
        } else {
            1.0
        }
    }

    /// Majority label; ties go to not-foil.
    pub fn majority(&self) -> LeafLabel {
        if self.foil_weight > self.notfoil_weight {
            LeafLabel::Foil
        } else {
            LeafLabel::NotFoil
        }
    }

    pub fn leaf_label(&self) -> Option<LeafLabel> {
        self.is_leaf().then(|| self.majority())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum leaf weight as a fraction of the total sample weight.
    pub min_weight_fraction_leaf: f64,
    pub min_impurity_decrease: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 6,
            min_weight_fraction_leaf: 0.01,
            min_impurity_decrease: 1e-7,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidArgument("max_depth must be >= 1".into()));
        }
        if !(self.min_weight_fraction_leaf > 0.0 && self.min_weight_fraction_leaf < 0.5) {
            return Err(Error::InvalidArgument(
                "min_weight_fraction_leaf must lie in (0, 0.5)".into(),
            ));
        }
        if !(self.min_impurity_decrease >= 0.0 && self.min_impurity_decrease.is_finite()) {
            return Err(Error::InvalidArgument("min_impurity_decrease must be >= 0".into()));
        }
        Ok(())
    }
}

/// A binary one-versus-all tree recognising the foil class. Nodes are
/// stored in preorder; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoilTree {
    pub nodes: Vec<TreeNode>,
    pub fact_class: usize,
    pub foil_class: usize,
    pub params: TreeParams,
    pub train_seed: u64,
    pub n_features: usize,
    /// All training labels were identical, so the tree is a single leaf.
    pub degenerate: bool,
}

/// Two-class Gini impurity `2p(1-p)` scaled by the node weight.
fn weighted_gini(foil: f64, notfoil: f64) -> f64 {
    let total = foil + notfoil;
    if total <= 0.0 {
        0.0
    } else {
        2.0 * foil * notfoil / total
    }
}

/// Weighted impurity decrease of a split, normalized by the total sample
/// weight: `(W*G - W_l*G_l - W_r*G_r) / W_total`.
pub fn impurity_decrease(parent: (f64, f64), left: (f64, f64), total_weight: f64) -> f64 {
    let right = (parent.0 - left.0, parent.1 - left.1);
    (weighted_gini(parent.0, parent.1) - weighted_gini(left.0, left.1) - weighted_gini(right.0, right.1))
        / total_weight
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Grower<'a> {
    points: &'a [Vec<f64>],
    weights: &'a [f64],
    labels: &'a [bool],
    params: TreeParams,
    min_leaf: f64,
    total_weight: f64,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn stats(&self, idx: &[usize]) -> (f64, f64) {
        idx.iter().fold((0.0, 0.0), |(f, n), &i| {
            if self.labels[i] {
                (f + self.weights[i], n)
            } else {
                (f, n + self.weights[i])
            }
        })
    }

    fn grow(&mut self, idx: &mut [usize], parent: Option<NodeId>, depth: usize) -> NodeId {
        let (foil, notfoil) = self.stats(idx);
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            id,
            parent,
            depth,
            split: None,
            foil_weight: foil,
            notfoil_weight: notfoil,
            n_samples: idx.len(),
        });
        let pure = foil <= 0.0 || notfoil <= 0.0;
        if pure || depth >= self.params.max_depth || foil + notfoil < 2.0 * self.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(idx, (foil, notfoil)) else {
            return id;
        };
        let mid = partition(idx, |i| self.points[i][best.feature] <= best.threshold);
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, Some(id), depth + 1);
        let right = self.grow(r, Some(id), depth + 1);
        self.nodes[id].split = Some(Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        });
        id
    }

    /// Exhaustive search over features and midpoints between consecutive
    /// distinct values. The first best candidate (lowest feature, then
    /// lowest threshold) wins exact ties.
    fn best_split(&self, idx: &[usize], parent: (f64, f64)) -> Option<Candidate> {
        let n_features = self.points[idx[0]].len();
        let mut best: Option<Candidate> = None;
        let mut sorted = idx.to_vec();
        for f in 0..n_features {
            sorted.sort_by(|&a, &b| self.points[a][f].total_cmp(&self.points[b][f]));
            let mut left = (0.0, 0.0);
            for k in 0..sorted.len() - 1 {
                let i = sorted[k];
                if self.labels[i] {
                    left.0 += self.weights[i];
                } else {
                    left.1 += self.weights[i];
                }
                let (a, b) = (self.points[i][f], self.points[sorted[k + 1]][f]);
                if a == b {
                    continue;
                }
                let wl = left.0 + left.1;
                let wr = parent.0 + parent.1 - wl;
                if wl < self.min_leaf || wr < self.min_leaf {
                    continue;
                }
                let gain = impurity_decrease(parent, left, self.total_weight);
                if gain > 0.0
                    && gain >= self.params.min_impurity_decrease
                    && best.is_none_or(|c| gain > c.gain)
                {
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        threshold: midpoint(a, b),
                    });
                }
            }
        }
        best
    }
}

/// Midpoint of two consecutive distinct values, strictly below `b`.
pub fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

pub(crate) fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut k = 0;
    for j in 0..idx.len() {
        if pred(idx[j]) {
            idx.swap(k, j);
            k += 1;
        }
    }
    k
}

/// One-versus-all labels: `true` where the model outputs `foil`.
pub fn foil_labels<M: ClassifierOracle + ?Sized>(points: &[Vec<f64>], model: &M, foil: usize) -> Vec<bool> {
    points.iter().map(|p| model.predict(p) == foil).collect()
}

impl FoilTree {
    /// Grows a weighted Gini CART on pre-computed binary labels.
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        points: &[Vec<f64>],
        weights: &[f64],
        labels: &[bool],
        fact_class: usize,
        foil_class: usize,
        params: TreeParams,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        if points.is_empty() {
            return Err(Error::InsufficientData("empty local sample".into()));
        }
        if points.len() != weights.len() || points.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: points.len(),
                right: weights.len().min(labels.len()),
            });
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument("sample weights must be positive and finite".into()));
        }
        if fact_class == foil_class {
            return Err(Error::FoilEqualsFact(foil_class));
        }
        let n_features = points[0].len();
        if let Some(bad) = points.iter().find(|p| p.len() != n_features) {
            return Err(Error::ArityMismatch {
                expected: n_features,
                got: bad.len(),
            });
        }
        let total_weight: f64 = weights.iter().sum();
        let mut grower = Grower {
            points,
            weights,
            labels,
            params,
            min_leaf: params.min_weight_fraction_leaf * total_weight,
            total_weight,
            nodes: Vec::new(),
        };
        let mut idx: Vec<usize> = (0..points.len()).collect();
        grower.grow(&mut idx, None, 0);
        let degenerate = labels.iter().all(|&l| l == labels[0]);
        Ok(FoilTree {
            nodes: grower.nodes,
            fact_class,
            foil_class,
            params,
            train_seed: seed,
            n_features,
            degenerate,
        })
    }

    /// Builds a tree from an explicit node arena, checking the structural
    /// invariants (preorder-independent; node `i` must have id `i`).
    pub fn from_nodes(
        nodes: Vec<TreeNode>,
        fact_class: usize,
        foil_class: usize,
        n_features: usize,
        params: TreeParams,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("tree needs at least one node".into()));
        }
        if fact_class == foil_class {
            return Err(Error::FoilEqualsFact(foil_class));
        }
        let mut seen_as_child = vec![false; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::InvalidArgument(format!("node {i} has id {}", n.id)));
            }
            if let Some(s) = n.split {
                for c in [s.left, s.right] {
                    if c >= nodes.len() || c == i || seen_as_child[c] || nodes[c].parent != Some(i) {
                        return Err(Error::InvalidArgument(format!("bad child {c} of node {i}")));
                    }
                    seen_as_child[c] = true;
                }
                if s.feature >= n_features {
                    return Err(Error::ArityMismatch {
                        expected: n_features,
                        got: s.feature + 1,
                    });
                }
            }
        }
        if nodes[0].parent.is_some() || seen_as_child.iter().skip(1).any(|c| !c) {
            return Err(Error::InvalidArgument("tree is not connected from node 0".into()));
        }
        let degenerate = nodes.len() == 1;
        Ok(FoilTree {
            nodes,
            fact_class,
            foil_class,
            params,
            train_seed: 0,
            n_features,
            degenerate,
        })
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes.get(id).is_some_and(TreeNode::is_leaf)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Leaf reached by routing `x` (`<=` goes left).
    pub fn route(&self, x: &[f64]) -> NodeId {
        let mut id = self.root();
        while let Some(s) = self.nodes[id].split {
            id = if x[s.feature] <= s.threshold { s.left } else { s.right };
        }
        id
    }

    /// `true` if the tree classifies `x` as the foil class.
    pub fn predicts_foil(&self, x: &[f64]) -> bool {
        self.nodes[self.route(x)].majority() == LeafLabel::Foil
    }

    /// Node ids from the root down to `id`, inclusive.
    pub fn path_from_root(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    pub fn lowest_common_ancestor(&self, a: NodeId, b: NodeId) -> NodeId {
        let (mut a, mut b) = (a, b);
        while self.nodes[a].depth > self.nodes[b].depth {
            a = self.nodes[a].parent.expect("non-root has parent");
        }
        while self.nodes[b].depth > self.nodes[a].depth {
            b = self.nodes[b].parent.expect("non-root has parent");
        }
        while a != b {
            a = self.nodes[a].parent.expect("non-root has parent");
            b = self.nodes[b].parent.expect("non-root has parent");
        }
        a
    }

    /// Weighted agreement between the tree and `labels` on `points`.
    pub fn weighted_agreement(&self, points: &[Vec<f64>], weights: &[f64], labels: &[bool]) -> f64 {
        let (mut hit, mut total) = (0.0, 0.0);
        for ((p, &w), &l) in points.iter().zip(weights).zip(labels) {
            total += w;
            if self.predicts_foil(p) == l {
                hit += w;
            }
        }
        if total > 0.0 {
            hit / total
        } else {
            1.0
        }
    }
}

/// Labels the weighted local sample with the model and grows the tree.
pub fn train_foil_tree<M: ClassifierOracle + ?Sized>(
    sample: &LocalSample,
    model: &M,
    fact: usize,
    foil: usize,
    params: TreeParams,
    seed: u64,
) -> Result<FoilTree> {
    if foil >= model.n_classes() {
        return Err(Error::ClassOutOfRange {
            index: foil,
            n_classes: model.n_classes(),
        });
    }
    let labels = foil_labels(&sample.points, model, foil);
    let tree = FoilTree::fit(&sample.points, &sample.weights, &labels, fact, foil, params, seed)?;
    if tree.degenerate {
        log::debug!("local sample has a single label; foil tree is one leaf");
    }
    Ok(tree)
}
