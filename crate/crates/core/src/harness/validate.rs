use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boolcube::{bit, dim_mask, sample_dataset, NoiseModel};
use crate::bounds::{selection_prob_bounds, SelectionKind};
use crate::error::{Error, Result};
use crate::fourier::{SparseFourier, Subset};
use crate::greedy::{fit_cart, fit_random_tree, CartParams, TieBreak};
use crate::rng;
use crate::trees::{Node, TreeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Mean query-path length of grow-to-purity CART on pure noise.
    Depth,
    /// Fraction of the sample in the root child containing a random query point.
    Halving,
    /// Frequency of `{1,2} ∩ J(x) ≠ ∅` for CART on noiseless `x1 x2`.
    XorSelection,
    /// Frequency of `S* ∩ J(x) ≠ ∅` for random trees with a uniformly drawn `S*`.
    NonadaptiveSelection,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Depth,
        Suite::Halving,
        Suite::XorSelection,
        Suite::NonadaptiveSelection,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Depth => "depth",
            Suite::Halving => "halving",
            Suite::XorSelection => "xor_selection",
            Suite::NonadaptiveSelection => "nonadaptive_selection",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidArgs(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationParams {
    pub runs: usize,
    pub queries: usize,
    pub d: usize,
    pub log2n: u32,
    /// Size of the random relevant set (non-adaptive suite only).
    pub s: usize,
    pub seed: u64,
}

impl ValidationParams {
    pub fn defaults(suite: Suite) -> Self {
        let base = ValidationParams {
            runs: 200,
            queries: 50,
            d: 20,
            log2n: 10,
            s: 2,
            seed: 0,
        };
        match suite {
            Suite::Depth => base,
            Suite::Halving => ValidationParams {
                runs: 500,
                queries: 1,
                ..base
            },
            Suite::XorSelection => ValidationParams {
                runs: 400,
                queries: 5,
                d: 50,
                log2n: 7,
                ..base
            },
            Suite::NonadaptiveSelection => ValidationParams {
                runs: 400,
                queries: 5,
                d: 50,
                log2n: 9,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub suite: Suite,
    pub params: ValidationParams,
    pub statistic: f64,
    pub se: f64,
    /// Theoretical value the statistic is compared with.
    pub bound: f64,
    /// Acceptance interval for the statistic.
    pub accept_low: f64,
    pub accept_high: f64,
    pub pass: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: statistic={:.6} se={:.6} bound={:.6} accept=[{:.6}, {:.6}] runs={} queries={} d={} n=2^{}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.statistic,
            self.se,
            self.bound,
            self.accept_low,
            self.accept_high,
            self.params.runs,
            self.params.queries,
            self.params.d,
            self.params.log2n
        )
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn binomial(hits: usize, total: usize) -> (f64, f64) {
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

fn purity_params() -> CartParams {
    CartParams {
        tie_break: TieBreak::Random,
        ..CartParams::default()
    }
}

fn query_masks(seed: u64, suite: Suite, run: usize, d: usize, count: usize) -> Vec<u64> {
    let mut r = rng::stream(seed, &format!("{suite}-queries"), run as u64);
    (0..count).map(|_| r.random::<u64>() & dim_mask(d)).collect()
}

fn path_hits(tree: &TreeModel, queries: &[u64], target: Subset) -> usize {
    queries
        .iter()
        .filter(|&&q| tree.query_path_mask(q).iter().any(|&k| target.contains(k)))
        .count()
}

pub fn run_validation(suite: Suite, params: &ValidationParams) -> Result<ValidationReport> {
    let p = params;
    if p.runs == 0 || p.queries == 0 {
        return Err(Error::InvalidArgs("runs and queries must be positive".into()));
    }
    if p.d == 0 || p.d > crate::boolcube::MAX_DIM || p.log2n > 24 {
        return Err(Error::InvalidArgs(format!(
            "unsupported size d={} log2n={}",
            p.d, p.log2n
        )));
    }
    let n = 1usize << p.log2n;
    let n_f = n as f64;
    let run_seed = |run: usize| rng::derive_seed(p.seed, suite.name(), run as u64);
    let (statistic, se, bound, low, high) = match suite {
        Suite::Depth => {
            let noise = SparseFourier::zero(p.d)?;
            let per_run = (0..p.runs)
                .into_par_iter()
                .map(|run| {
                    let s = run_seed(run);
                    let data = sample_dataset(&noise, p.d, n, NoiseModel::gaussian(1.0)?, s)?;
                    let tree = fit_cart(&data, &purity_params(), rng::derive_seed(s, "fit", 0))?;
                    let qs = query_masks(p.seed, suite, run, p.d, p.queries);
                    let total: usize = qs.iter().map(|&q| tree.query_path_mask(q).len()).sum();
                    Ok(total as f64 / qs.len() as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (m, se) = mean_se(&per_run);
            let bound = selection_prob_bounds(SelectionKind::Depth { n: n_f })?;
            (m, se, bound, f64::NEG_INFINITY, bound + 3.0 * se)
        }
        Suite::Halving => {
            let noise = SparseFourier::zero(p.d)?;
            let per_run = (0..p.runs)
                .into_par_iter()
                .map(|run| {
                    let s = run_seed(run);
                    let data = sample_dataset(&noise, p.d, n, NoiseModel::gaussian(1.0)?, s)?;
                    let tree = fit_cart(&data, &purity_params(), rng::derive_seed(s, "fit", 0))?;
                    let qs = query_masks(p.seed, suite, run, p.d, p.queries);
                    let ratios: Vec<f64> = qs
                        .iter()
                        .map(|&q| match tree.root() {
                            Node::Split { split, .. } => {
                                let side = q & bit(*split);
                                let count = data.rows().iter().filter(|&&r| r & bit(*split) == side).count();
                                count as f64 / n_f
                            }
                            Node::Leaf { .. } => 1.0,
                        })
                        .collect();
                    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (m, se) = mean_se(&per_run);
            (m, se, 0.5, 0.47, 0.53)
        }
        Suite::XorSelection => {
            if p.d < 3 {
                return Err(Error::InvalidArgs("xor selection needs d >= 3".into()));
            }
            let f = SparseFourier::parse("x1*x2", p.d)?;
            let target = Subset(0b11);
            let hits = (0..p.runs)
                .into_par_iter()
                .map(|run| {
                    let s = run_seed(run);
                    let data = sample_dataset(&f, p.d, n, NoiseModel::None, s)?;
                    let tree = fit_cart(&data, &purity_params(), rng::derive_seed(s, "fit", 0))?;
                    Ok(path_hits(
                        &tree,
                        &query_masks(p.seed, suite, run, p.d, p.queries),
                        target,
                    ))
                })
                .collect::<Result<Vec<usize>>>()?;
            let (freq, se) = binomial(hits.iter().sum(), p.runs * p.queries);
            let bound = selection_prob_bounds(SelectionKind::Xor { d: p.d, n: n_f })?;
            (freq, se, bound, f64::NEG_INFINITY, bound + 3.0 * se)
        }
        Suite::NonadaptiveSelection => {
            if p.s == 0 || p.s > p.d {
                return Err(Error::InvalidArgs(format!("need 0 < s <= d, got s={}", p.s)));
            }
            let hits = (0..p.runs)
                .into_par_iter()
                .map(|run| {
                    let s = run_seed(run);
                    let mut r = rng::stream(s, "relevant-set", 0);
                    let target = Subset(sample(&mut r, p.d, p.s).iter().fold(0u64, |m, j| m | (1 << j)));
                    let f = SparseFourier::new(p.d, [(target, 1.0)])?;
                    let data = sample_dataset(&f, p.d, n, NoiseModel::None, s)?;
                    let tree = fit_random_tree(&data, p.log2n as usize, rng::derive_seed(s, "fit", 0))?;
                    Ok(path_hits(
                        &tree,
                        &query_masks(p.seed, suite, run, p.d, p.queries),
                        target,
                    ))
                })
                .collect::<Result<Vec<usize>>>()?;
            let (freq, se) = binomial(hits.iter().sum(), p.runs * p.queries);
            let bound = selection_prob_bounds(SelectionKind::Nonadaptive { s: p.s, d: p.d, n: n_f })?;
            (freq, se, bound, f64::NEG_INFINITY, bound + 3.0 * se)
        }
    };
    Ok(ValidationReport {
        suite,
        params: p.clone(),
        statistic,
        se,
        bound,
        accept_low: low,
        accept_high: high,
        pass: statistic >= low && statistic <= high,
    })
}
