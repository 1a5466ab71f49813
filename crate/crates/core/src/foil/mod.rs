//! The foil tree: a locally trained, proximity-weighted one-versus-all
//! decision tree, plus the leaf search and rule complement built on it.

mod export;
mod rules;
mod search;
mod tree;

pub use export::{ExportNode, TreeExport};
pub use rules::{complement, merge_literals, path_conditions, Branch, Condition, Literal};
pub use search::{
    determine_foil, find_fact_leaf, find_foil_leaf, path_costs, AccuracyWeighted, NearestLeaf,
    SearchStrategy, StrategyKind,
};
pub(crate) use tree::partition;
pub use tree::{
    foil_labels, impurity_decrease, midpoint, train_foil_tree, FoilTree, LeafLabel, NodeId, Split,
    TreeNode, TreeParams,
};
