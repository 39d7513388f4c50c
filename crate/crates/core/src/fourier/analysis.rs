//! Structural analyses on the Fourier graph: MSP closure, residual, stability under
//! restriction (SMSP / SID), traversals and vertex cuts.
//!
//! Stability quantities quantify over subcubes. Only cells whose fixed coordinates lie in
//! the support `S*` are enumerated (`3^s` of them): fixing a coordinate outside `S*`
//! leaves every restricted coefficient unchanged, so each remaining cell has the same
//! restriction as its projection onto the support, up to the extra free coordinates that
//! carry no terms. The unit tests cross-check this against full-cell enumeration.

use rand::Rng;
use serde::Serialize;

use super::{SparseFourier, Subset};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_SPARSITY_CAP: usize = 16;
pub const DEFAULT_TRAVERSAL_CAP: usize = 8;

/// Vertices `𝒮 ∪ {∅}` weighted by `alpha_S^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierGraph {
    dim: usize,
    vertices: Vec<(Subset, f64)>,
}

impl FourierGraph {
    pub fn new(f: &SparseFourier) -> Self {
        let mut vertices: Vec<(Subset, f64)> = f.terms().iter().map(|(s, a)| (*s, a * a)).collect();
        if !vertices.iter().any(|(s, _)| s.is_empty()) {
            vertices.insert(0, (Subset::EMPTY, 0.0));
        }
        FourierGraph { dim: f.dim(), vertices }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[(Subset, f64)] {
        &self.vertices
    }

    pub fn weight(&self, s: Subset) -> f64 {
        self.vertices
            .iter()
            .find(|(t, _)| *t == s)
            .map(|(_, w)| *w)
            .unwrap_or(0.0)
    }

    pub fn total_weight(&self, set: &[Subset]) -> f64 {
        set.iter().map(|s| self.weight(*s)).sum()
    }

    /// Vertices reachable from `∅` after deleting `removed`, with the features they cover.
    pub fn reachable(&self, removed: &[Subset]) -> (Vec<Subset>, u64) {
        let nodes: Vec<Subset> = self
            .vertices
            .iter()
            .map(|(s, _)| *s)
            .filter(|s| !s.is_empty() && !removed.contains(s))
            .collect();
        let order: Vec<usize> = (0..nodes.len()).collect();
        let (reached, covered) = closure(&nodes, &order);
        (reached.into_iter().map(|i| nodes[i]).collect(), covered)
    }
}

/// Fixed point of absorbing any vertex with at most one uncovered feature.
/// Returns indices of absorbed vertices (in absorption order) and the covered mask.
fn closure(nodes: &[Subset], order: &[usize]) -> (Vec<usize>, u64) {
    let mut covered = 0u64;
    let mut absorbed = vec![false; nodes.len()];
    let mut out = Vec::new();
    loop {
        let mut changed = false;
        for &i in order {
            if !absorbed[i] && (nodes[i].0 & !covered).count_ones() <= 1 {
                absorbed[i] = true;
                covered |= nodes[i].0;
                out.push(i);
                changed = true;
            }
        }
        if !changed {
            return (out, covered);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MspClosure {
    /// Vertices of `𝒮` connected to `∅` (`𝒮_MSP`), in canonical order.
    pub reachable: Vec<Subset>,
    /// Vertices disconnected from `∅`.
    pub unreached: Vec<Subset>,
    /// `S*_MSP`, the union of reachable vertices.
    pub covered: Subset,
    pub is_msp: bool,
}

impl MspClosure {
    pub fn s_msp(&self) -> usize {
        self.covered.len()
    }
}

impl Serialize for Subset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.features().serialize(s)
    }
}

fn sort_canonical(v: &mut [Subset]) {
    v.sort_by(|a, b| a.canonical_cmp(b));
}

/// MSP closure of the nonempty subsets in `subsets`, scanning candidates in `order`.
/// The result does not depend on `order`.
pub fn msp_closure_ordered(subsets: &[Subset], order: &[usize]) -> MspClosure {
    let (reached, covered) = closure(subsets, order);
    let mut reachable: Vec<Subset> = reached.iter().map(|&i| subsets[i]).collect();
    let mut unreached: Vec<Subset> = (0..subsets.len())
        .filter(|i| !reached.contains(i))
        .map(|i| subsets[i])
        .collect();
    sort_canonical(&mut reachable);
    sort_canonical(&mut unreached);
    MspClosure {
        is_msp: unreached.is_empty(),
        reachable,
        unreached,
        covered: Subset(covered),
    }
}

pub fn msp_closure(f: &SparseFourier) -> MspClosure {
    let subsets: Vec<Subset> = f.terms().iter().map(|(s, _)| *s).collect();
    let order: Vec<usize> = (0..subsets.len()).collect();
    msp_closure_ordered(&subsets, &order)
}

/// `r_MSP`: the terms disconnected from `∅`.
pub fn msp_residual(f: &SparseFourier) -> SparseFourier {
    let c = msp_closure(f);
    f.filter_terms(|s| c.unreached.contains(&s))
}

/// Iterates the `3^s` cells fixing only support coordinates, as `(fixed, neg)` masks.
pub fn support_cells(support: Subset) -> impl Iterator<Item = (u64, u64)> {
    let feats: Vec<u64> = support.features().iter().map(|k| 1u64 << (k - 1)).collect();
    let total = 3u64.pow(feats.len() as u32);
    (0..total).map(move |mut code| {
        let (mut fixed, mut neg) = (0u64, 0u64);
        for m in &feats {
            match code % 3 {
                1 => fixed |= m,
                2 => {
                    fixed |= m;
                    neg |= m;
                }
                _ => {}
            }
            code /= 3;
        }
        (fixed, neg)
    })
}

fn check_cap(f: &SparseFourier, cap: usize) -> Result<()> {
    let s = f.sparsity();
    if s > cap {
        Err(Error::SparsityCapExceeded { sparsity: s, cap })
    } else {
        Ok(())
    }
}

/// True iff every restriction of `f` to a subcube is MSP.
pub fn is_smsp(f: &SparseFourier) -> Result<bool> {
    is_smsp_with_cap(f, DEFAULT_SPARSITY_CAP)
}

pub fn is_smsp_with_cap(f: &SparseFourier, cap: usize) -> Result<bool> {
    check_cap(f, cap)?;
    Ok(support_cells(f.support()).all(|(fixed, neg)| msp_closure(&f.restrict_masks(fixed, neg)).is_msp))
}

/// Minimum over nonconstant cells of `score(restriction, |J(C)|)`.
fn min_over_cells(f: &SparseFourier, cap: usize, score: impl Fn(&SparseFourier, f64, usize) -> f64) -> Result<f64> {
    check_cap(f, cap)?;
    let mut best: Option<f64> = None;
    for (fixed, neg) in support_cells(f.support()) {
        let g = f.restrict_masks(fixed, neg);
        let var = g.variance();
        if var <= 0.0 {
            continue;
        }
        let v = score(&g, var, fixed.count_ones() as usize);
        best = Some(best.map_or(v, |b: f64| b.min(v)));
    }
    best.ok_or(Error::ConstantFunction)
}

fn max_singleton_sq(g: &SparseFourier) -> f64 {
    g.terms()
        .iter()
        .filter(|(s, _)| s.len() == 1)
        .fold(0.0, |m, (_, a)| m.max(a * a))
}

/// `min_C max_k Corr^2{f(X), X_k | X in C}` over cells where `f|_C` is nonconstant.
pub fn sid_lambda(f: &SparseFourier) -> Result<f64> {
    sid_lambda_with_cap(f, DEFAULT_SPARSITY_CAP)
}

pub fn sid_lambda_with_cap(f: &SparseFourier, cap: usize) -> Result<f64> {
    min_over_cells(f, cap, |g, var, _| max_singleton_sq(g) / var)
}

/// `min_C max_k Cov^2{f(X), X_k | X in C} 2^{-|J(C) ∩ S*|}` over nonconstant cells.
pub fn smsp_lambda(f: &SparseFourier) -> Result<f64> {
    smsp_lambda_with_cap(f, DEFAULT_SPARSITY_CAP)
}

pub fn smsp_lambda_with_cap(f: &SparseFourier, cap: usize) -> Result<f64> {
    min_over_cells(f, cap, |g, _, depth| max_singleton_sq(g) * 0.5f64.powi(depth as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Traversal {
    pub features: Subset,
    pub size: usize,
}

/// Smallest `T` disjoint from `forbidden` with `|T ∩ S| >= 2` for every target;
/// lexicographically first among those of minimum size.
pub fn min_traversal(targets: &[Subset], forbidden: Subset) -> Result<Traversal> {
    min_traversal_with_cap(targets, forbidden, DEFAULT_TRAVERSAL_CAP)
}

pub fn min_traversal_with_cap(targets: &[Subset], forbidden: Subset, cap: usize) -> Result<Traversal> {
    if targets.iter().any(|s| (s.0 & !forbidden.0).count_ones() < 2) {
        return Err(Error::NoTraversal);
    }
    if targets.is_empty() {
        return Ok(Traversal {
            features: Subset::EMPTY,
            size: 0,
        });
    }
    let union = targets.iter().fold(0u64, |m, s| m | s.0) & !forbidden.0;
    let candidates: Vec<u64> = Subset(union).features().iter().map(|k| 1u64 << (k - 1)).collect();
    let ok = |t: u64| targets.iter().all(|s| (s.0 & t).count_ones() >= 2);
    for r in 2..=candidates.len() {
        if r > cap {
            return Err(Error::SearchCapExceeded(cap));
        }
        // lexicographic combinations of r candidate positions
        let mut idx: Vec<usize> = (0..r).collect();
        loop {
            let t = idx.iter().fold(0u64, |m, &i| m | candidates[i]);
            if ok(t) {
                return Ok(Traversal {
                    features: Subset(t),
                    size: r,
                });
            }
            if !next_combination(&mut idx, candidates.len()) {
                break;
            }
        }
    }
    // unreachable: the full candidate set is always a traversal
    Err(Error::NoTraversal)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let r = idx.len();
    for i in (0..r).rev() {
        if idx[i] < n - r + i {
            idx[i] += 1;
            for j in i + 1..r {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Closure of the Fourier graph after deleting a vertex set `B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutAnalysis {
    pub cut: Vec<Subset>,
    /// `w(B)`.
    pub cut_weight: f64,
    /// `𝒮_{-B,MSP}`.
    pub msp_component: Vec<Subset>,
    /// `𝒮_{-B,-MSP}`.
    pub disconnected: Vec<Subset>,
    /// `w(𝒮_{-B,-MSP})`.
    pub disconnected_weight: f64,
    /// `S*_{-B,MSP}`.
    pub covered: Subset,
}

impl CutAnalysis {
    pub fn s_msp(&self) -> usize {
        self.covered.len()
    }
}

pub fn cut_analysis(f: &SparseFourier, cut: &[Subset]) -> Result<CutAnalysis> {
    for b in cut {
        if !f.terms().iter().any(|(s, _)| s == b) {
            return Err(Error::UnknownVertex(b.to_string()));
        }
    }
    let remaining: Vec<Subset> = f.terms().iter().map(|(s, _)| *s).filter(|s| !cut.contains(s)).collect();
    let order: Vec<usize> = (0..remaining.len()).collect();
    let c = msp_closure_ordered(&remaining, &order);
    let graph = FourierGraph::new(f);
    let mut cut_sorted = cut.to_vec();
    sort_canonical(&mut cut_sorted);
    Ok(CutAnalysis {
        cut_weight: graph.total_weight(cut),
        disconnected_weight: graph.total_weight(&c.unreached),
        cut: cut_sorted,
        msp_component: c.reachable,
        disconnected: c.unreached,
        covered: c.covered,
    })
}

/// Coefficients with magnitude uniform on `[0.5, 1.5]` and an independent random sign.
pub fn random_coefficients(supports: &[Subset], dim: usize, seed: u64) -> Result<SparseFourier> {
    if supports.is_empty() {
        return Err(Error::InvalidArgs("supports must be nonempty".into()));
    }
    let mut r = rng::stream(seed, "coefficients", 0);
    let terms: Vec<(Subset, f64)> = supports
        .iter()
        .map(|s| {
            let mag = r.random_range(0.5..=1.5);
            let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
            (*s, sign * mag)
        })
        .collect();
    SparseFourier::new(dim, terms)
}
