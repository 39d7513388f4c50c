//! Exact empirical-risk-minimizing trees over depth-bounded structures.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::boolcube::{bit, dim_mask, Dataset};
use crate::error::{Error, Result};
use crate::trees::{Node, TreeModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErmParams {
    pub depth_budget: usize,
    /// Leaf labels are clipped to `[-clip, clip]`.
    pub clip: f64,
    /// Maximum number of memoized `(cell, depth)` states.
    pub state_cap: usize,
}

impl Default for ErmParams {
    fn default() -> Self {
        ErmParams {
            depth_budget: 2,
            clip: 1e9,
            state_cap: 1 << 24,
        }
    }
}

impl ErmParams {
    pub fn new(depth_budget: usize, clip: f64) -> Self {
        ErmParams {
            depth_budget,
            clip,
            ..Default::default()
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.depth_budget > d {
            return Err(Error::InvalidArgs(format!(
                "depth budget {} exceeds dimension {d}",
                self.depth_budget
            )));
        }
        if !(self.clip > 0.0) {
            return Err(Error::InvalidArgs(format!("clip must be positive, got {}", self.clip)));
        }
        if self.state_cap == 0 {
            return Err(Error::InvalidArgs("state_cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErmFit {
    pub tree: TreeModel,
    /// `(1/n) sum (Y_i - g(X_i))^2` at the optimum.
    pub empirical_risk: f64,
}

/// Upper bound on the number of reachable `(cell, depth)` states.
pub fn estimated_states(d: usize, depth: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for k in 0..=depth.min(d) {
        total = total.saturating_add(binom.saturating_mul(1u128 << k.min(127)));
        binom = binom * (d - k) as u128 / (k + 1) as u128;
    }
    total
}

fn leaf_label(ys: &[f64], idx: &[usize], clip: f64) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let mean = idx.iter().map(|&i| ys[i]).sum::<f64>() / idx.len() as f64;
    mean.clamp(-clip, clip)
}

fn leaf_sse(ys: &[f64], idx: &[usize], label: f64) -> f64 {
    idx.iter().map(|&i| (ys[i] - label).powi(2)).sum()
}

#[derive(Clone, Copy)]
enum Choice {
    Leaf(f64),
    Split(usize),
}

struct Solver<'a> {
    data: &'a Dataset,
    params: &'a ErmParams,
    memo: HashMap<(u64, u64, usize), (f64, Choice)>,
}

impl Solver<'_> {
    fn best(&mut self, fixed: u64, neg: u64, h: usize, idx: &[usize]) -> Result<f64> {
        if let Some(&(sse, _)) = self.memo.get(&(fixed, neg, h)) {
            return Ok(sse);
        }
        if self.memo.len() >= self.params.state_cap {
            return Err(Error::StateCapExceeded {
                cap: self.params.state_cap,
                estimated: estimated_states(self.data.d(), self.params.depth_budget),
            });
        }
        let ys = self.data.responses();
        let label = leaf_label(ys, idx, self.params.clip);
        let mut best = leaf_sse(ys, idx, label);
        let mut choice = Choice::Leaf(label);
        if h > 0 && best > 0.0 {
            let rows = self.data.rows();
            let free = dim_mask(self.data.d()) & !fixed;
            for k in 1..=self.data.d() {
                let m = bit(k);
                if free & m == 0 {
                    continue;
                }
                let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| rows[i] & m != 0);
                let l = self.best(fixed | m, neg | m, h - 1, &left)?;
                let r = self.best(fixed | m, neg, h - 1, &right)?;
                if l + r < best {
                    best = l + r;
                    choice = Choice::Split(k);
                }
            }
        }
        self.memo.insert((fixed, neg, h), (best, choice));
        Ok(best)
    }

    fn build(&self, fixed: u64, neg: u64, h: usize) -> Node {
        match self.memo.get(&(fixed, neg, h)) {
            Some((_, Choice::Split(k))) => {
                let m = bit(*k);
                Node::split(
                    *k,
                    self.build(fixed | m, neg | m, h - 1),
                    self.build(fixed | m, neg, h - 1),
                )
            }
            Some((_, Choice::Leaf(v))) => Node::leaf(*v),
            None => unreachable!("state solved before build"),
        }
    }
}

/// Minimizes the empirical squared error over trees of depth at most `depth_budget`
/// with clipped mean leaf labels. Ties prefer a leaf, then the lowest split feature.
pub fn fit_erm(data: &Dataset, params: &ErmParams) -> Result<ErmFit> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    params.validate(data.d())?;
    let mut solver = Solver {
        data,
        params,
        memo: HashMap::new(),
    };
    let idx: Vec<usize> = (0..data.n()).collect();
    let sse = solver.best(0, 0, params.depth_budget, &idx)?;
    let tree = TreeModel::new(data.d(), solver.build(0, 0, params.depth_budget))?;
    Ok(ErmFit {
        tree,
        empirical_risk: sse / data.n() as f64,
    })
}

/// Brute force over every tree structure of depth at most `depth_budget`.
/// Limited to `d <= 6` and depth `<= 3`.
pub fn enumerate_erm_oracle(data: &Dataset, params: &ErmParams) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.d() > 6 || params.depth_budget > 3 {
        return Err(Error::TooLarge(format!(
            "oracle needs d <= 6 and depth <= 3, got d={} depth={}",
            data.d(),
            params.depth_budget
        )));
    }
    params.validate(data.d())?;

    // SSE of every structure rooted at the cell holding `idx`.
    fn all(data: &Dataset, idx: &[usize], used: &mut Vec<usize>, h: usize, clip: f64) -> Vec<f64> {
        let ys = data.responses();
        let mut out = vec![leaf_sse(ys, idx, leaf_label(ys, idx, clip))];
        if h == 0 {
            return out;
        }
        for k in 1..=data.d() {
            if used.contains(&k) {
                continue;
            }
            let left: Vec<usize> = idx.iter().copied().filter(|&i| data.x(i, k) < 0).collect();
            let right: Vec<usize> = idx.iter().copied().filter(|&i| data.x(i, k) > 0).collect();
            used.push(k);
            let ls = all(data, &left, used, h - 1, clip);
            let rs = all(data, &right, used, h - 1, clip);
            used.pop();
            for l in &ls {
                for r in &rs {
                    out.push(l + r);
                }
            }
        }
        out
    }

    let idx: Vec<usize> = (0..data.n()).collect();
    let sses = all(data, &idx, &mut Vec::new(), params.depth_budget, params.clip);
    let best = sses.into_iter().fold(f64::INFINITY, f64::min);
    Ok(best / data.n() as f64)
}
