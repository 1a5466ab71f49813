use serde::{Deserialize, Serialize};

use super::tree::{FoilTree, LeafLabel, NodeId};
use crate::dataset::FeatureMeta;

/// One node of the structured tree export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right: Option<NodeId>,
    pub foil_weight: f64,
    pub notfoil_weight: f64,
    pub n_samples: usize,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<LeafLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeExport {
    pub fact_class: usize,
    pub foil_class: usize,
    pub root: NodeId,
    pub fact_leaf: Option<NodeId>,
    pub foil_leaf: Option<NodeId>,
    pub nodes: Vec<ExportNode>,
}

impl FoilTree {
    /// Node list with ids, splits, weights and leaf labels. Feature names
    /// are filled in when `features` is given.
    pub fn export(
        &self,
        features: Option<&[FeatureMeta]>,
        fact_leaf: Option<NodeId>,
        foil_leaf: Option<NodeId>,
    ) -> TreeExport {
        let nodes = self
            .nodes
            .iter()
            .map(|n| ExportNode {
                id: n.id,
                parent: n.parent,
                depth: n.depth,
                feature: n.split.map(|s| s.feature),
                feature_name: n
                    .split
                    .and_then(|s| features.and_then(|f| f.get(s.feature)).map(|m| m.name.clone())),
                threshold: n.split.map(|s| s.threshold),
                left: n.split.map(|s| s.left),
                right: n.split.map(|s| s.right),
                foil_weight: n.foil_weight,
                notfoil_weight: n.notfoil_weight,
                n_samples: n.n_samples,
                accuracy: n.node_accuracy(),
                label: n.leaf_label(),
            })
            .collect();
        TreeExport {
            fact_class: self.fact_class,
            foil_class: self.foil_class,
            root: self.root(),
            fact_leaf,
            foil_leaf,
            nodes,
        }
    }
}
