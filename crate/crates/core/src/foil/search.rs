//! Fact determination and foil-leaf search.
//!
//! The tree is treated as an undirected graph. A [`SearchStrategy`] assigns
//! a positive weight to every traversed edge and the foil-leaf is the
//! foil-labelled leaf with the cheapest path from the fact-leaf.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tree::{FoilTree, LeafLabel, NodeId};
use crate::error::{Error, Result};
use crate::models::ClassifierOracle;

pub trait SearchStrategy {
    /// Cost of moving from `from` to the adjacent node `to`. Must be
    /// strictly positive and finite.
    fn edge_weight(&self, tree: &FoilTree, from: NodeId, to: NodeId) -> f64;
}

/// Every edge costs one: the nearest foil-leaf in decision nodes.
#[derive(Debug, Clone, Copy, Default)]
pub struct NearestLeaf;

impl SearchStrategy for NearestLeaf {
    fn edge_weight(&self, _: &FoilTree, _: NodeId, _: NodeId) -> f64 {
        1.0
    }
}

/// `1 + lambda * (1 - accuracy(to))`: entering impure nodes costs more, so
/// more distant but better supported foil-leaves can win.
#[derive(Debug, Clone, Copy)]
pub struct AccuracyWeighted {
    pub lambda: f64,
}

impl Default for AccuracyWeighted {
    fn default() -> Self {
        AccuracyWeighted { lambda: 2.0 }
    }
}

impl SearchStrategy for AccuracyWeighted {
    fn edge_weight(&self, tree: &FoilTree, _from: NodeId, to: NodeId) -> f64 {
        1.0 + self.lambda * (1.0 - tree.node(to).node_accuracy())
    }
}

/// Serializable strategy selector used by configuration surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum StrategyKind {
    #[default]
    Nearest,
    AccuracyWeighted { lambda: f64 },
}


impl StrategyKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            StrategyKind::AccuracyWeighted { lambda } if !(lambda.is_finite() && *lambda >= 0.0) => {
                Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")))
            }
            _ => Ok(()),
        }
    }
}

impl SearchStrategy for StrategyKind {
    fn edge_weight(&self, tree: &FoilTree, from: NodeId, to: NodeId) -> f64 {
        match *self {
            StrategyKind::Nearest => NearestLeaf.edge_weight(tree, from, to),
            StrategyKind::AccuracyWeighted { lambda } => {
                AccuracyWeighted { lambda }.edge_weight(tree, from, to)
            }
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Nearest => f.write_str("nearest"),
            StrategyKind::AccuracyWeighted { lambda } => write!(f, "accuracy-weighted(lambda={lambda})"),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    /// Accepts `nearest` and `accuracy-weighted` (lambda defaults to 2.0).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" | "unit" => Ok(StrategyKind::Nearest),
            "accuracy-weighted" | "accuracy" => Ok(StrategyKind::AccuracyWeighted {
                lambda: AccuracyWeighted::default().lambda,
            }),
            _ => Err(Error::InvalidArgument(format!("unknown strategy '{s}'"))),
        }
    }
}

/// The class the model outputs for `x_q` is the fact; the foil is the
/// requested class, or else the most likely class other than the fact
/// (lowest index on ties).
pub fn determine_foil<M: ClassifierOracle + ?Sized>(
    model: &M,
    x_q: &[f64],
    requested: Option<usize>,
) -> Result<usize> {
    let n_classes = model.n_classes();
    if n_classes < 2 {
        return Err(Error::InvalidArgument("a contrast needs at least two classes".into()));
    }
    let dist = model.predict_distribution(x_q);
    let fact = crate::models::argmax(&dist);
    match requested {
        Some(foil) if foil >= n_classes => Err(Error::ClassOutOfRange {
            index: foil,
            n_classes,
        }),
        Some(foil) if foil == fact => Err(Error::FoilEqualsFact(foil)),
        Some(foil) => Ok(foil),
        None => {
            let mut best: Option<usize> = None;
            for (c, &p) in dist.iter().enumerate() {
                if c != fact && best.is_none_or(|b| p > dist[b]) {
                    best = Some(c);
                }
            }
            Ok(best.expect("at least two classes"))
        }
    }
}

/// Leaf reached by `x_q`.
pub fn find_fact_leaf(tree: &FoilTree, x_q: &[f64]) -> Result<NodeId> {
    if x_q.len() != tree.n_features {
        return Err(Error::ArityMismatch {
            expected: tree.n_features,
            got: x_q.len(),
        });
    }
    Ok(tree.route(x_q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    cost: f64,
    node: NodeId,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then node id
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn neighbours(tree: &FoilTree, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
    let n = tree.node(id);
    n.parent
        .into_iter()
        .chain(n.split.into_iter().flat_map(|s| [s.left, s.right]))
}

/// Dijkstra distances from `source` to every node under `strategy`.
pub fn path_costs(tree: &FoilTree, source: NodeId, strategy: &dyn SearchStrategy) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; tree.nodes.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier {
        cost: 0.0,
        node: source,
    });
    while let Some(Frontier { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for next in neighbours(tree, node) {
            let w = strategy.edge_weight(tree, node, next);
            assert!(
                w > 0.0 && w.is_finite(),
                "search strategy returned invalid edge weight {w}"
            );
            let c = cost + w;
            if c < dist[next] {
                dist[next] = c;
                heap.push(Frontier { cost: c, node: next });
            }
        }
    }
    dist
}

fn costs_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Cheapest foil-labelled leaf from `fact_leaf`. Ties prefer the larger
/// foil weight, then the lower id. A foil-labelled fact-leaf is returned
/// as is; `None` means the tree has no foil leaf.
pub fn find_foil_leaf(tree: &FoilTree, fact_leaf: NodeId, strategy: &dyn SearchStrategy) -> Option<NodeId> {
    if !tree.is_leaf(fact_leaf) {
        return None;
    }
    if tree.node(fact_leaf).leaf_label() == Some(LeafLabel::Foil) {
        return Some(fact_leaf);
    }
    let dist = path_costs(tree, fact_leaf, strategy);
    let mut best: Option<NodeId> = None;
    for leaf in tree.leaves().filter(|l| l.majority() == LeafLabel::Foil) {
        let better = match best {
            None => true,
            Some(b) => {
                let (cl, cb) = (dist[leaf.id], dist[b]);
                if costs_equal(cl, cb) {
                    let (fl, fb) = (leaf.foil_weight, tree.node(b).foil_weight);
                    fl > fb || (fl == fb && leaf.id < b)
                } else {
                    cl < cb
                }
            }
        };
        if better {
            best = Some(leaf.id);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<f64>);

    impl ClassifierOracle for Fixed {
        fn n_classes(&self) -> usize {
            self.0.len()
        }
        fn n_features(&self) -> usize {
            1
        }
        fn predict_distribution(&self, _: &[f64]) -> Vec<f64> {
            self.0.clone()
        }
    }

    #[test]
    fn second_most_likely_is_default_foil() {
        let m = Fixed(vec![0.7, 0.2, 0.1]);
        assert_eq!(determine_foil(&m, &[0.0], None).unwrap(), 1);
    }

    #[test]
    fn explicit_foil_is_honoured() {
        let m = Fixed(vec![0.7, 0.2, 0.1]);
        assert_eq!(determine_foil(&m, &[0.0], Some(2)).unwrap(), 2);
    }

    #[test]
    fn foil_equal_to_prediction_is_an_error() {
        let m = Fixed(vec![0.7, 0.2, 0.1]);
        assert!(matches!(
            determine_foil(&m, &[0.0], Some(0)),
            Err(Error::FoilEqualsFact(0))
        ));
        assert!(matches!(
            determine_foil(&m, &[0.0], Some(3)),
            Err(Error::ClassOutOfRange { .. })
        ));
    }

    #[test]
    fn foil_ties_pick_lowest_index() {
        let m = Fixed(vec![0.2, 0.6, 0.1, 0.1]);
        assert_eq!(determine_foil(&m, &[0.0], None).unwrap(), 0);
        let m = Fixed(vec![0.6, 0.2, 0.2]);
        assert_eq!(determine_foil(&m, &[0.0], None).unwrap(), 1);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("nearest".parse::<StrategyKind>().unwrap(), StrategyKind::Nearest);
        assert_eq!(
            "accuracy-weighted".parse::<StrategyKind>().unwrap(),
            StrategyKind::AccuracyWeighted { lambda: 2.0 }
        );
        assert!(StrategyKind::AccuracyWeighted { lambda: -1.0 }.validate().is_err());
    }
}
