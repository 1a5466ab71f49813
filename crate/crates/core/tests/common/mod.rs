//! Independent oracles shared by the property tests and the acceptance run.
//! Each suite returns the number of checks performed, or a description of
//! the first disagreement.
#![allow(dead_code)]

use std::path::PathBuf;

use foiltree::dataset::{load_fixture, Dataset, FeatureMeta, Schema};
use foiltree::foil::{
    complement, find_foil_leaf, merge_literals, path_conditions, AccuracyWeighted, Branch, Condition, FoilTree,
    NearestLeaf, NodeId, Split, TreeNode, TreeParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn fixture(schema: Schema) -> Dataset {
    load_fixture(data_dir(), schema).expect("bundled fixture loads")
}

pub fn features(n: usize) -> Vec<FeatureMeta> {
    (0..n).map(|i| FeatureMeta::numeric(format!("f{i}"))).collect()
}

pub const BOX: f64 = 10.0;

/// Random tree whose thresholds always cut the current region, so every
/// leaf covers a non-empty box. Leaf weights are random with occasional
/// exact ties between foil and not-foil weight.
pub fn random_tree(rng: &mut ChaCha8Rng, n_features: usize, max_depth: usize) -> FoilTree {
    fn grow(
        rng: &mut ChaCha8Rng,
        nodes: &mut Vec<TreeNode>,
        parent: Option<NodeId>,
        depth: usize,
        max_depth: usize,
        region: &mut Vec<(f64, f64)>,
    ) -> NodeId {
        let id = nodes.len();
        let tie = rng.random_bool(0.1);
        let foil: f64 = rng.random_range(0.0..5.0);
        let notfoil = if tie { foil } else { rng.random_range(0.0..5.0) };
        nodes.push(TreeNode {
            id,
            parent,
            depth,
            split: None,
            foil_weight: foil,
            notfoil_weight: notfoil,
            n_samples: rng.random_range(1..50),
        });
        let p_split = if depth == 0 { 0.95 } else { 0.75 };
        if depth < max_depth && rng.random_bool(p_split) {
            let feature = rng.random_range(0..region.len());
            let (lo, hi) = region[feature];
            let threshold = rng.random_range(lo + (hi - lo) * 0.05..hi - (hi - lo) * 0.05);
            region[feature] = (lo, threshold);
            let left = grow(rng, nodes, Some(id), depth + 1, max_depth, region);
            region[feature] = (threshold, hi);
            let right = grow(rng, nodes, Some(id), depth + 1, max_depth, region);
            region[feature] = (lo, hi);
            nodes[id].split = Some(Split {
                feature,
                threshold,
                left,
                right,
            });
        }
        id
    }
    let mut nodes = Vec::new();
    let mut region = vec![(-BOX, BOX); n_features];
    grow(rng, &mut nodes, None, 0, max_depth, &mut region);
    FoilTree::from_nodes(nodes, 0, 1, n_features, TreeParams::default()).expect("generated tree is valid")
}

fn ancestors(tree: &FoilTree, mut id: NodeId) -> Vec<NodeId> {
    let mut out = vec![id];
    while let Some(p) = tree.nodes[id].parent {
        out.push(p);
        id = p;
    }
    out
}

/// Number of edges between two nodes, from ancestor lists.
pub fn edge_distance(tree: &FoilTree, a: NodeId, b: NodeId) -> usize {
    let up_a = ancestors(tree, a);
    let up_b = ancestors(tree, b);
    let (i, j) = up_a
        .iter()
        .enumerate()
        .find_map(|(i, n)| up_b.iter().position(|m| m == n).map(|j| (i, j)))
        .expect("nodes share the root");
    i + j
}

/// Node sequence between two nodes along the unique tree path.
fn tree_path(tree: &FoilTree, a: NodeId, b: NodeId) -> Vec<NodeId> {
    let up_a = ancestors(tree, a);
    let up_b = ancestors(tree, b);
    let (i, j) = up_a
        .iter()
        .enumerate()
        .find_map(|(i, n)| up_b.iter().position(|m| m == n).map(|j| (i, j)))
        .expect("nodes share the root");
    let mut path: Vec<NodeId> = up_a[..=i].to_vec();
    path.extend(up_b[..j].iter().rev());
    path
}

fn is_foil_leaf(n: &TreeNode) -> bool {
    n.split.is_none() && n.foil_weight > n.notfoil_weight
}

/// Enumerates every foil leaf and keeps the cheapest one under `cost`,
/// ties to larger foil weight then lower id.
fn brute_force_foil_leaf(tree: &FoilTree, fact: NodeId, cost: impl Fn(NodeId, NodeId) -> f64) -> Option<NodeId> {
    if is_foil_leaf(&tree.nodes[fact]) {
        return Some(fact);
    }
    let mut best: Option<(f64, f64, NodeId)> = None;
    for n in tree.nodes.iter().filter(|n| is_foil_leaf(n)) {
        let c = cost(fact, n.id);
        let better = match best {
            None => true,
            Some((bc, bw, bid)) => {
                if (c - bc).abs() <= 1e-9 * c.abs().max(1.0) {
                    n.foil_weight > bw || (n.foil_weight == bw && n.id < bid)
                } else {
                    c < bc
                }
            }
        };
        if better {
            best = Some((c, n.foil_weight, n.id));
        }
    }
    best.map(|b| b.2)
}

fn leaf_ids(tree: &FoilTree) -> Vec<NodeId> {
    tree.nodes.iter().filter(|n| n.split.is_none()).map(|n| n.id).collect()
}

/// Unit-weight search against path-length enumeration, every leaf as the
/// fact leaf.
pub fn unit_search_matches_brute_force(n_trees: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0;
    for t in 0..n_trees {
        let depth = rng.random_range(1..=6);
        let tree = random_tree(&mut rng, 3, depth);
        for fact in leaf_ids(&tree) {
            let got = find_foil_leaf(&tree, fact, &NearestLeaf);
            let want = brute_force_foil_leaf(&tree, fact, |a, b| edge_distance(&tree, a, b) as f64);
            if got != want {
                return Err(format!("tree {t}, fact leaf {fact}: search {got:?}, enumeration {want:?}"));
            }
            checks += 1;
        }
    }
    Ok(checks)
}

/// Accuracy-weighted search against summing edge weights along the unique
/// tree path to every foil leaf.
pub fn weighted_search_matches_path_sums(n_trees: usize, lambda: f64, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strategy = AccuracyWeighted { lambda };
    let mut checks = 0;
    for t in 0..n_trees {
        let depth = rng.random_range(1..=6);
        let tree = random_tree(&mut rng, 3, depth);
        let acc = |id: NodeId| {
            let n = &tree.nodes[id];
            let w = n.foil_weight + n.notfoil_weight;
            if w > 0.0 {
                n.foil_weight.max(n.notfoil_weight) / w
            } else {
                1.0
            }
        };
        for fact in leaf_ids(&tree) {
            let got = find_foil_leaf(&tree, fact, &strategy);
            let want = brute_force_foil_leaf(&tree, fact, |a, b| {
                tree_path(&tree, a, b)
                    .iter()
                    .skip(1)
                    .map(|&n| 1.0 + lambda * (1.0 - acc(n)))
                    .sum()
            });
            if got != want {
                return Err(format!("tree {t}, fact leaf {fact}: search {got:?}, path sums {want:?}"));
            }
            checks += 1;
        }
    }
    Ok(checks)
}

/// With lambda = 0 the accuracy-weighted strategy picks the same leaves as
/// the unit strategy.
pub fn lambda_zero_equals_unit(n_trees: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = AccuracyWeighted { lambda: 0.0 };
    let mut checks = 0;
    for t in 0..n_trees {
        let depth = rng.random_range(1..=6);
        let tree = random_tree(&mut rng, 4, depth);
        for fact in leaf_ids(&tree) {
            let a = find_foil_leaf(&tree, fact, &NearestLeaf);
            let b = find_foil_leaf(&tree, fact, &zero);
            if a != b {
                return Err(format!("tree {t}, fact leaf {fact}: unit {a:?}, lambda=0 {b:?}"));
            }
            checks += 1;
        }
    }
    Ok(checks)
}

fn gini_term(f: f64, n: f64) -> f64 {
    let w = f + n;
    if w <= 0.0 {
        0.0
    } else {
        w * (1.0 - (f / w).powi(2) - (n / w).powi(2))
    }
}

/// Best (gain, feature, threshold) over every feature and every midpoint of
/// consecutive distinct values, honouring the leaf-weight floor and the
/// minimum decrease. Gains are recomputed from scratch per candidate.
pub fn exhaustive_root_split(
    points: &[Vec<f64>],
    weights: &[f64],
    labels: &[bool],
    params: &TreeParams,
) -> Option<(f64, usize, f64)> {
    let total: f64 = weights.iter().sum();
    let min_leaf = params.min_weight_fraction_leaf * total;
    let (pf, pn) = labels.iter().zip(weights).fold((0.0, 0.0), |(f, n), (&l, &w)| {
        if l {
            (f + w, n)
        } else {
            (f, n + w)
        }
    });
    if pf <= 0.0 || pn <= 0.0 || params.max_depth == 0 || total < 2.0 * min_leaf {
        return None;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..points[0].len() {
        let mut values: Vec<f64> = points.iter().map(|p| p[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut lf, mut ln) = (0.0, 0.0);
            for ((p, &l), &wt) in points.iter().zip(labels).zip(weights) {
                if p[f] <= t {
                    if l {
                        lf += wt
                    } else {
                        ln += wt
                    }
                }
            }
            let (rf, rn) = (pf - lf, pn - ln);
            if lf + ln < min_leaf || rf + rn < min_leaf {
                continue;
            }
            let gain = (gini_term(pf, pn) - gini_term(lf, ln) - gini_term(rf, rn)) / total;
            if gain > 0.0 && gain >= params.min_impurity_decrease && best.is_none_or(|b| gain > b.0) {
                best = Some((gain, f, t));
            }
        }
    }
    best
}

fn split_gain(points: &[Vec<f64>], weights: &[f64], labels: &[bool], feature: usize, t: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    let (mut pf, mut pn, mut lf, mut ln) = (0.0, 0.0, 0.0, 0.0);
    for ((p, &l), &w) in points.iter().zip(labels).zip(weights) {
        let left = p[feature] <= t;
        match (l, left) {
            (true, true) => {
                pf += w;
                lf += w
            }
            (true, false) => pf += w,
            (false, true) => {
                pn += w;
                ln += w
            }
            (false, false) => pn += w,
        }
    }
    (gini_term(pf, pn) - gini_term(lf, ln) - gini_term(pf - lf, pn - ln)) / total
}

/// Root split of the fitted tree against exhaustive search, for every
/// sample size from 2 to `max_points` under each of `n_seeds` seeds.
pub fn root_split_matches_exhaustive(n_seeds: u64, max_points: usize) -> Result<usize, String> {
    let mut checks = 0;
    for seed in 0..n_seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for n in 2..=max_points {
            let d = rng.random_range(1..=4);
            // Coarse grid values force duplicates and ties.
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(0..8) as f64 * 0.5 - 1.0).collect())
                .collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..2.0)).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let params = TreeParams {
                max_depth: 1,
                ..TreeParams::default()
            };
            let tree = FoilTree::fit(&points, &weights, &labels, 0, 1, params, seed).map_err(|e| e.to_string())?;
            let want = exhaustive_root_split(&points, &weights, &labels, &params);
            let got = tree.nodes[0].split;
            match (got, want) {
                (None, None) => {}
                (Some(s), Some((best_gain, _, _))) => {
                    let gain = split_gain(&points, &weights, &labels, s.feature, s.threshold);
                    let valid_threshold = {
                        let mut v: Vec<f64> = points.iter().map(|p| p[s.feature]).collect();
                        v.sort_by(f64::total_cmp);
                        v.dedup();
                        v.windows(2).any(|w| (w[0] + w[1]) / 2.0 == s.threshold)
                    };
                    if !valid_threshold || (gain - best_gain).abs() > 1e-9 {
                        return Err(format!(
                            "seed {seed}, n {n}: tree split (f{}, {}) gain {gain}, exhaustive best {want:?}",
                            s.feature, s.threshold
                        ));
                    }
                }
                (g, w) => {
                    return Err(format!("seed {seed}, n {n}: tree split {g:?}, exhaustive {w:?}"));
                }
            }
            checks += 1;
        }
    }
    Ok(checks)
}

fn all_hold(conds: &[Condition], x: &[f64]) -> bool {
    conds.iter().all(|c| c.satisfied_by(x))
}

/// Random point, half the time inside the box carved by `conds` and with
/// some coordinates snapped exactly onto thresholds.
#[allow(clippy::needless_range_loop)]
fn probe_point(rng: &mut ChaCha8Rng, conds: &[Condition], d: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(-BOX - 1.0..BOX + 1.0)).collect();
    if rng.random_bool(0.5) {
        for f in 0..d {
            let lo = conds
                .iter()
                .filter(|c| c.feature == f && c.branch == Branch::Gt)
                .map(|c| c.threshold)
                .fold(-BOX, f64::max);
            let hi = conds
                .iter()
                .filter(|c| c.feature == f && c.branch == Branch::Le)
                .map(|c| c.threshold)
                .fold(BOX, f64::min);
            if lo < hi {
                x[f] = rng.random_range(lo..=hi);
            }
        }
    }
    if !conds.is_empty() && rng.random_bool(0.3) {
        let c = &conds[rng.random_range(0..conds.len())];
        x[c.feature] = c.threshold;
    }
    x
}

/// Merged literal sets hold exactly where the raw conditions hold.
pub fn merge_is_satisfaction_equivalent(n_paths: usize, n_points: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 3;
    let feats = features(d);
    let mut paths = 0;
    let mut checks = 0;
    while paths < n_paths {
        let tree = random_tree(&mut rng, d, 6);
        let leaves = leaf_ids(&tree);
        if leaves.len() < 2 {
            continue;
        }
        let fact = leaves[rng.random_range(0..leaves.len())];
        let foil = leaves[rng.random_range(0..leaves.len())];
        let conds = if rng.random_bool(0.5) || fact == foil {
            path_conditions(&tree, foil).map_err(|e| e.to_string())?
        } else {
            complement(&tree, fact, foil).map_err(|e| e.to_string())?
        };
        let lits = merge_literals(&conds, &feats).map_err(|e| format!("path {paths}: {e}"))?;
        let mut seen = std::collections::HashSet::new();
        if lits.iter().any(|l| !seen.insert(l.feature)) {
            return Err(format!("path {paths}: repeated feature after merging"));
        }
        for _ in 0..n_points {
            let x = probe_point(&mut rng, &conds, d);
            let raw = all_hold(&conds, &x);
            let merged = lits.iter().all(|l| l.satisfied_by(&x));
            if raw != merged {
                return Err(format!("path {paths}: x = {x:?}, raw {raw}, merged {merged}, conds {conds:?}"));
            }
            checks += 1;
        }
        paths += 1;
    }
    Ok(checks)
}

/// Per-feature interval propagation: `true` if the conjunction is empty.
pub fn intervals_empty(conds: &[Condition], d: usize) -> bool {
    let mut lo = vec![f64::NEG_INFINITY; d];
    let mut hi = vec![f64::INFINITY; d];
    for c in conds {
        match c.branch {
            Branch::Gt => lo[c.feature] = lo[c.feature].max(c.threshold),
            Branch::Le => hi[c.feature] = hi[c.feature].min(c.threshold),
        }
    }
    lo.iter().zip(&hi).any(|(l, h)| l >= h)
}

/// Fact-path conditions together with the complement are unsatisfiable
/// for every pair of distinct leaves; each path on its own is not.
pub fn complement_contradicts_fact_path(n_trees: usize, max_depth: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 3;
    let mut checks = 0;
    for t in 0..n_trees {
        let depth = rng.random_range(1..=max_depth);
        let tree = random_tree(&mut rng, d, depth);
        let leaves = leaf_ids(&tree);
        for &fact in &leaves {
            let fact_path = path_conditions(&tree, fact).map_err(|e| e.to_string())?;
            if intervals_empty(&fact_path, d) {
                return Err(format!("tree {t}: fact path of leaf {fact} is itself empty"));
            }
            for &foil in &leaves {
                if foil == fact {
                    continue;
                }
                let comp = complement(&tree, fact, foil).map_err(|e| e.to_string())?;
                if comp.is_empty() {
                    return Err(format!("tree {t}: empty complement for distinct leaves {fact}, {foil}"));
                }
                let mut joint = fact_path.clone();
                joint.extend(comp);
                if !intervals_empty(&joint, d) {
                    return Err(format!("tree {t}: leaves {fact}, {foil} jointly satisfiable"));
                }
                checks += 1;
            }
        }
    }
    Ok(checks)
}
