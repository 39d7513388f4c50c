//! Greedy top-down tree growth: CART impurity decrease, pluggable split criteria,
//! random forests and non-adaptive (uniformly random) trees.
//!
//! Every node draws its randomness (feature subsampling, tie breaks, random splits) from a
//! stream keyed on the master seed and the node's root path. Growth therefore does not
//! depend on visiting order, and a tree grown with threshold `gamma` equals the
//! `gamma = 0` tree truncated wherever the weighted stopping score falls below `gamma`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolcube::{bit, Cell, Dataset};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::trees::{Forest, Node, TreeModel};

/// Mean squared deviation of the responses from their mean.
pub fn impurity(responses: &[f64]) -> Result<f64> {
    if responses.is_empty() {
        return Err(Error::EmptyCell);
    }
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    Ok(responses.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n)
}

/// `I(C) - (N_R/N) I(C_R) - (N_L/N) I(C_L)`; an empty child contributes 0.
pub fn impurity_decrease(k: usize, cell: &Cell, data: &Dataset) -> Result<f64> {
    if cell.is_fixed(k) {
        return Err(Error::FeatureAlreadyFixed(k));
    }
    if k == 0 || k > data.d() {
        return Err(Error::IndexOutOfRange {
            index: k,
            dim: data.d(),
        });
    }
    let members = crate::boolcube::cell_members(cell, data)?;
    let ys: Vec<f64> = members.indices.iter().map(|&i| data.responses()[i]).collect();
    let parent = impurity(&ys)?;
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for &i in &members.indices {
        if data.x(i, k) < 0 {
            left.push(data.responses()[i]);
        } else {
            right.push(data.responses()[i]);
        }
    }
    let n = ys.len() as f64;
    let term = |side: &[f64]| -> f64 {
        if side.is_empty() {
            0.0
        } else {
            side.len() as f64 / n * impurity(side).expect("nonempty")
        }
    };
    if left.is_empty() || right.is_empty() {
        return Ok(0.0);
    }
    Ok((parent - term(&right) - term(&left)).max(0.0))
}

/// Sufficient statistics of a candidate split: `minus` is the `x_k = -1` side.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SplitStats {
    pub n_minus: usize,
    pub sum_minus: f64,
    pub sumsq_minus: f64,
    pub n_plus: usize,
    pub sum_plus: f64,
    pub sumsq_plus: f64,
}

impl SplitStats {
    pub fn n(&self) -> usize {
        self.n_minus + self.n_plus
    }

    /// `p(1-p)(Ybar_plus - Ybar_minus)^2`, the CART impurity decrease.
    pub fn cart_decrease(&self) -> f64 {
        if self.n_minus == 0 || self.n_plus == 0 {
            return 0.0;
        }
        let n = self.n() as f64;
        let p = self.n_plus as f64 / n;
        let gap = self.sum_plus / self.n_plus as f64 - self.sum_minus / self.n_minus as f64;
        p * (1.0 - p) * gap * gap
    }
}

/// A split score `O(k; C, D)` computed from the `k`-th covariate and the responses in `C`.
///
/// Implementations should be symmetric under `X_k -> -X_k` (swap of the two sides);
/// this is not enforced.
pub trait GreedyCriterion: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, stats: &SplitStats) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Cart;

impl GreedyCriterion for Cart {
    fn name(&self) -> &str {
        "cart"
    }

    fn score(&self, stats: &SplitStats) -> f64 {
        stats.cart_decrease()
    }
}

/// `sqrt(p(1-p)) |Ybar_plus - Ybar_minus|`; same argmax as CART within a node but a
/// different scale for the stopping threshold.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanGap;

impl GreedyCriterion for MeanGap {
    fn name(&self) -> &str {
        "mean-gap"
    }

    fn score(&self, stats: &SplitStats) -> f64 {
        stats.cart_decrease().sqrt()
    }
}

/// Criteria addressable by name.
#[derive(Clone)]
pub struct CriterionRegistry {
    entries: BTreeMap<String, Arc<dyn GreedyCriterion>>,
}

impl Default for CriterionRegistry {
    fn default() -> Self {
        let mut r = CriterionRegistry {
            entries: BTreeMap::new(),
        };
        r.register(Arc::new(Cart));
        r.register(Arc::new(MeanGap));
        r
    }
}

impl CriterionRegistry {
    pub fn register(&mut self, c: Arc<dyn GreedyCriterion>) {
        self.entries.insert(c.name().to_string(), c);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn GreedyCriterion>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            Error::Config(format!(
                "unknown criterion {name:?} (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartParams {
    /// Minimum weighted impurity decrease `gamma`.
    pub gamma: f64,
    pub max_depth: Option<usize>,
    pub tie_break: TieBreak,
    /// Number of features drawn per node.
    pub mtry: Option<usize>,
    /// Nodes with at most this many samples become leaves.
    pub min_samples: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            gamma: 0.0,
            max_depth: None,
            tie_break: TieBreak::LowestIndex,
            mtry: None,
            min_samples: 1,
        }
    }
}

impl CartParams {
    pub fn grow_to_purity() -> Self {
        Self::default()
    }

    fn validate(&self, d: usize) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidArgs(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > d {
                return Err(Error::InvalidArgs(format!("mtry must be in 1..={d}, got {m}")));
            }
        }
        if self.min_samples == 0 {
            return Err(Error::InvalidArgs("min_samples must be positive".into()));
        }
        Ok(())
    }
}

/// A grown tree that keeps each internal node's stopping score `(N(C)/n) max_k score`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPath {
    dim: usize,
    root: GrownNode,
}

#[derive(Debug, Clone, PartialEq)]
enum GrownNode {
    Leaf {
        mean: f64,
    },
    Split {
        feature: usize,
        mean: f64,
        stop_score: f64,
        left: Box<GrownNode>,
        right: Box<GrownNode>,
    },
}

impl GreedyPath {
    /// The tree obtained with stopping threshold `gamma`.
    pub fn at_gamma(&self, gamma: f64) -> TreeModel {
        fn build(node: &GrownNode, gamma: f64) -> Node {
            match node {
                GrownNode::Leaf { mean } => Node::leaf(*mean),
                GrownNode::Split {
                    feature,
                    mean,
                    stop_score,
                    left,
                    right,
                } => {
                    if *stop_score < gamma {
                        Node::leaf(*mean)
                    } else {
                        Node::split(*feature, build(left, gamma), build(right, gamma))
                    }
                }
            }
        }
        TreeModel::new(self.dim, build(&self.root, gamma)).expect("grown tree is valid")
    }
}

#[inline]
fn child_key(key: u64, feature: usize, right: bool) -> u64 {
    rng::derive_seed(key, "child", (feature as u64) << 1 | u64::from(right))
}

struct Grower<'a> {
    data: &'a Dataset,
    params: &'a CartParams,
    criterion: &'a dyn GreedyCriterion,
    seed: u64,
    gamma: f64,
}

impl Grower<'_> {
    fn grow(&self, idx: Vec<usize>, used: u64, depth: usize, key: u64) -> GrownNode {
        let ys = self.data.responses();
        let rows = self.data.rows();
        let n_node = idx.len();
        let sum: f64 = idx.iter().map(|&i| ys[i]).sum();
        let mean = sum / n_node as f64;
        let leaf = GrownNode::Leaf { mean };
        if n_node <= self.params.min_samples
            || self.params.max_depth.is_some_and(|m| depth >= m)
            || idx.iter().all(|&i| ys[i] == ys[idx[0]])
        {
            return leaf;
        }
        let d = self.data.d();
        let sumsq: f64 = idx.iter().map(|&i| ys[i] * ys[i]).sum();
        let free = crate::boolcube::dim_mask(d) & !used;
        let mut cnt = vec![0usize; d];
        let mut s1 = vec![0.0f64; d];
        let mut s2 = vec![0.0f64; d];
        for &i in &idx {
            let mut m = rows[i] & free;
            let y = ys[i];
            while m != 0 {
                let j = m.trailing_zeros() as usize;
                cnt[j] += 1;
                s1[j] += y;
                s2[j] += y * y;
                m &= m - 1;
            }
        }
        let mut node_rng: Option<StreamRng> = None;
        let mut rng_for = || -> StreamRng { rng::stream(self.seed, "node", key) };
        let allowed: u64 = match self.params.mtry {
            Some(m) if m < d => {
                let r = node_rng.get_or_insert_with(&mut rng_for);
                sample(r, d, m).iter().fold(0u64, |acc, j| acc | (1 << j))
            }
            _ => u64::MAX,
        };
        let mut best = f64::NEG_INFINITY;
        let mut scored: Vec<(usize, f64)> = Vec::new();
        for j in 0..d {
            if free & (1 << j) == 0 || allowed & (1 << j) == 0 || cnt[j] == 0 || cnt[j] == n_node {
                continue;
            }
            let stats = SplitStats {
                n_minus: cnt[j],
                sum_minus: s1[j],
                sumsq_minus: s2[j],
                n_plus: n_node - cnt[j],
                sum_plus: sum - s1[j],
                sumsq_plus: sumsq - s2[j],
            };
            let score = self.criterion.score(&stats);
            best = best.max(score);
            scored.push((j + 1, score));
        }
        if scored.is_empty() {
            return leaf;
        }
        let tol = 1e-12 * best.abs().max(1e-300);
        let ties: Vec<usize> = scored
            .iter()
            .filter(|(_, s)| *s >= best - tol)
            .map(|(k, _)| *k)
            .collect();
        let feature = match self.params.tie_break {
            TieBreak::LowestIndex => ties[0],
            TieBreak::Random if ties.len() == 1 => ties[0],
            TieBreak::Random => {
                let r = node_rng.get_or_insert_with(&mut rng_for);
                ties[r.random_range(0..ties.len())]
            }
        };
        let stop_score = n_node as f64 / self.data.n() as f64 * best;
        if stop_score < self.gamma {
            return leaf;
        }
        let m = bit(feature);
        let (left, right): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows[i] & m != 0);
        GrownNode::Split {
            feature,
            mean,
            stop_score,
            left: Box::new(self.grow(left, used | m, depth + 1, child_key(key, feature, false))),
            right: Box::new(self.grow(right, used | m, depth + 1, child_key(key, feature, true))),
        }
    }
}

/// Grows with stopping threshold `params.gamma`, keeping stop scores so the result can
/// be truncated at any larger threshold.
pub fn fit_cart_path(
    data: &Dataset,
    params: &CartParams,
    criterion: &dyn GreedyCriterion,
    seed: u64,
) -> Result<GreedyPath> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    params.validate(data.d())?;
    let g = Grower {
        data,
        params,
        criterion,
        seed,
        gamma: params.gamma,
    };
    Ok(GreedyPath {
        dim: data.d(),
        root: g.grow((0..data.n()).collect(), 0, 0, 0),
    })
}

/// Fits a greedy tree with the given criterion. Leaves are labeled with node means.
pub fn fit_greedy(
    data: &Dataset,
    params: &CartParams,
    criterion: &dyn GreedyCriterion,
    seed: u64,
) -> Result<TreeModel> {
    Ok(fit_cart_path(data, params, criterion, seed)?.at_gamma(params.gamma))
}

/// CART: [`fit_greedy`] with the impurity-decrease criterion.
pub fn fit_cart(data: &Dataset, params: &CartParams, seed: u64) -> Result<TreeModel> {
    fit_greedy(data, params, &Cart, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    pub bootstrap: bool,
    /// Features drawn per node; `None` means `ceil(sqrt(d))`.
    pub mtry: Option<usize>,
    pub cart: CartParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            bootstrap: true,
            mtry: None,
            cart: CartParams::default(),
            seed: 0,
        }
    }
}

/// Size-`n` resample with replacement used for tree `m`.
pub fn bootstrap_indices(n: usize, seed: u64, m: usize) -> Vec<usize> {
    let mut r = rng::stream(seed, "bootstrap", m as u64);
    (0..n).map(|_| r.random_range(0..n)).collect()
}

/// Indices never drawn by [`bootstrap_indices`] for tree `m`.
pub fn out_of_bag(n: usize, seed: u64, m: usize) -> Vec<usize> {
    let mut seen = vec![false; n];
    for i in bootstrap_indices(n, seed, m) {
        seen[i] = true;
    }
    (0..n).filter(|&i| !seen[i]).collect()
}

pub fn fit_forest(data: &Dataset, params: &ForestParams) -> Result<Forest> {
    fit_forest_with(data, params, &Cart)
}

pub fn fit_forest_with(data: &Dataset, params: &ForestParams, criterion: &dyn GreedyCriterion) -> Result<Forest> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.trees == 0 {
        return Err(Error::InvalidArgs("forest needs at least one tree".into()));
    }
    let d = data.d();
    let mtry = params
        .mtry
        .unwrap_or_else(|| ((d as f64).sqrt().ceil() as usize).clamp(1, d));
    let cart = CartParams {
        mtry: Some(mtry),
        ..params.cart.clone()
    };
    cart.validate(d)?;
    let trees = (0..params.trees)
        .into_par_iter()
        .map(|m| {
            let tree_seed = rng::derive_seed(params.seed, "forest-tree", m as u64);
            if params.bootstrap {
                let sample = data.subset(&bootstrap_indices(data.n(), params.seed, m));
                fit_greedy(&sample, &cart, criterion, tree_seed)
            } else {
                fit_greedy(data, &cart, criterion, tree_seed)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Forest::new(trees)
}

/// Non-adaptive tree: each cell splits on a feature drawn uniformly from its free
/// features, until `depth_budget` or at most one sample. Responses only set leaf labels.
pub fn fit_random_tree(data: &Dataset, depth_budget: usize, seed: u64) -> Result<TreeModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = data.d();
    let global = data.mean().expect("nonempty");
    #[allow(clippy::too_many_arguments)]
    fn grow(
        data: &Dataset,
        idx: Vec<usize>,
        used: u64,
        depth: usize,
        budget: usize,
        seed: u64,
        key: u64,
        global: f64,
    ) -> Node {
        let ys = data.responses();
        let label = if idx.is_empty() {
            global
        } else {
            idx.iter().map(|&i| ys[i]).sum::<f64>() / idx.len() as f64
        };
        let d = data.d();
        if depth >= budget || idx.len() <= 1 || depth >= d {
            return Node::leaf(label);
        }
        let free: Vec<usize> = (1..=d).filter(|&k| used & bit(k) == 0).collect();
        let mut r = rng::stream(seed, "node", key);
        let k = free[r.random_range(0..free.len())];
        let m = bit(k);
        let rows = data.rows();
        let (left, right): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows[i] & m != 0);
        Node::split(
            k,
            grow(
                data,
                left,
                used | m,
                depth + 1,
                budget,
                seed,
                child_key(key, k, false),
                global,
            ),
            grow(
                data,
                right,
                used | m,
                depth + 1,
                budget,
                seed,
                child_key(key, k, true),
                global,
            ),
        )
    }
    let root = grow(data, (0..data.n()).collect(), 0, 0, depth_budget, seed, 0, global);
    TreeModel::new(d, root)
}
