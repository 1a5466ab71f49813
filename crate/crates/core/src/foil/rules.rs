//! Decision-node conditions, the fact/foil rule complement, and merging of
//! conditions into per-feature literals.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::tree::{FoilTree, NodeId};
use crate::dataset::FeatureMeta;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// `x <= threshold`
    #[serde(rename = "<=")]
    Le,
    /// `x > threshold`
    #[serde(rename = ">")]
    Gt,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Le => "<=",
            Branch::Gt => ">",
        })
    }
}

/// One decision node together with the branch taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub node: NodeId,
    pub feature: usize,
    pub threshold: f64,
    pub branch: Branch,
}

impl Condition {
    pub fn satisfied_by(&self, x: &[f64]) -> bool {
        match self.branch {
            Branch::Le => x[self.feature] <= self.threshold,
            Branch::Gt => x[self.feature] > self.threshold,
        }
    }
}

fn step(tree: &FoilTree, parent: NodeId, child: NodeId) -> Condition {
    let s = tree.node(parent).split.expect("parent is a decision node");
    Condition {
        node: parent,
        feature: s.feature,
        threshold: s.threshold,
        branch: if s.left == child { Branch::Le } else { Branch::Gt },
    }
}

fn check_leaf(tree: &FoilTree, id: NodeId) -> Result<()> {
    if tree.is_leaf(id) {
        Ok(())
    } else {
        Err(Error::LeafNotInTree(id))
    }
}

/// All conditions from the root down to `leaf`.
pub fn path_conditions(tree: &FoilTree, leaf: NodeId) -> Result<Vec<Condition>> {
    check_leaf(tree, leaf)?;
    Ok(tree
        .path_from_root(leaf)
        .windows(2)
        .map(|w| step(tree, w[0], w[1]))
        .collect())
}

/// Decision nodes that hold for `foil_leaf` but not for `fact_leaf`: the
/// foil-side conditions from the lowest common ancestor (inclusive) down
/// to the foil-leaf. Empty iff the two leaves coincide.
pub fn complement(tree: &FoilTree, fact_leaf: NodeId, foil_leaf: NodeId) -> Result<Vec<Condition>> {
    check_leaf(tree, fact_leaf)?;
    check_leaf(tree, foil_leaf)?;
    if fact_leaf == foil_leaf {
        return Ok(Vec::new());
    }
    let lca = tree.lowest_common_ancestor(fact_leaf, foil_leaf);
    let path = tree.path_from_root(foil_leaf);
    let start = path
        .iter()
        .position(|&n| n == lca)
        .expect("lca lies on the root path");
    Ok(path[start..]
        .windows(2)
        .map(|w| step(tree, w[0], w[1]))
        .collect())
}

/// A merged condition on one feature: `lower < x <= upper`, with either
/// bound optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Literal {
    pub feature: usize,
    #[serde(rename = "feature_name")]
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Literal {
    pub fn satisfied_by(&self, x: &[f64]) -> bool {
        let v = x[self.feature];
        self.lower.is_none_or(|l| v > l) && self.upper.is_none_or(|u| v <= u)
    }
}

/// Collapses conditions on the same feature: `>` thresholds into their
/// maximum (strict lower bound), `<=` thresholds into their minimum (upper
/// bound). Literals are ordered by the first appearance of their feature.
pub fn merge_literals(conds: &[Condition], features: &[FeatureMeta]) -> Result<Vec<Literal>> {
    let mut out: Vec<Literal> = Vec::new();
    for c in conds {
        let meta = features.get(c.feature).ok_or(Error::ArityMismatch {
            expected: features.len(),
            got: c.feature + 1,
        })?;
        let lit = match out.iter_mut().find(|l| l.feature == c.feature) {
            Some(l) => l,
            None => {
                out.push(Literal {
                    feature: c.feature,
                    name: meta.name.clone(),
                    lower: None,
                    upper: None,
                });
                out.last_mut().expect("just pushed")
            }
        };
        match c.branch {
            Branch::Gt => lit.lower = Some(lit.lower.map_or(c.threshold, |l| l.max(c.threshold))),
            Branch::Le => lit.upper = Some(lit.upper.map_or(c.threshold, |u| u.min(c.threshold))),
        }
    }
    for l in &out {
        if let (Some(lower), Some(upper)) = (l.lower, l.upper) {
            if lower >= upper {
                return Err(Error::InconsistentConditions {
                    feature: l.feature,
                    lower,
                    upper,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(n: usize) -> Vec<FeatureMeta> {
        (0..n).map(|i| FeatureMeta::numeric(format!("f{i}"))).collect()
    }

    fn cond(feature: usize, threshold: f64, branch: Branch) -> Condition {
        Condition {
            node: 0,
            feature,
            threshold,
            branch,
        }
    }

    #[test]
    fn tighter_lower_bound_dominates() {
        let lits = merge_literals(&[cond(1, 2.0, Branch::Gt), cond(1, 3.0, Branch::Gt)], &feats(2)).unwrap();
        assert_eq!(lits.len(), 1);
        assert_eq!((lits[0].lower, lits[0].upper), (Some(3.0), None));
    }

    #[test]
    fn opposite_bounds_form_interval() {
        let lits = merge_literals(&[cond(2, 5.0, Branch::Le), cond(2, 2.0, Branch::Gt)], &feats(3)).unwrap();
        assert_eq!((lits[0].lower, lits[0].upper), (Some(2.0), Some(5.0)));
        assert!(lits[0].satisfied_by(&[0.0, 0.0, 5.0]));
        assert!(!lits[0].satisfied_by(&[0.0, 0.0, 2.0]));
    }

    #[test]
    fn order_follows_first_appearance() {
        let lits = merge_literals(
            &[cond(3, 1.0, Branch::Le), cond(0, 1.0, Branch::Gt), cond(3, 0.5, Branch::Le)],
            &feats(4),
        )
        .unwrap();
        assert_eq!(lits.iter().map(|l| l.feature).collect::<Vec<_>>(), vec![3, 0]);
        assert_eq!(lits[0].upper, Some(0.5));
    }

    #[test]
    fn contradictory_bounds_are_rejected() {
        let err = merge_literals(&[cond(0, 5.0, Branch::Gt), cond(0, 2.0, Branch::Le)], &feats(1)).unwrap_err();
        assert!(matches!(err, Error::InconsistentConditions { feature: 0, .. }));
    }
}
