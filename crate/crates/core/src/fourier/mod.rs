//! Sparse Fourier (Walsh) representation of functions on `{-1,+1}^d`.
//!
//! A function is stored as `f(x) = sum_S alpha_S chi_S(x)` with `chi_S(x) = prod_{j in S} x_j`.
//! Subsets are bit masks over 1-based features, so `chi_S` at a point with sign mask
//! `neg` is `(-1)^popcount(S & neg)`.

mod analysis;
mod parse;

pub use analysis::{
    cut_analysis, is_smsp, is_smsp_with_cap, min_traversal, min_traversal_with_cap, msp_closure, msp_closure_ordered,
    msp_residual, random_coefficients, sid_lambda, sid_lambda_with_cap, smsp_lambda, smsp_lambda_with_cap,
    support_cells, CutAnalysis, FourierGraph, MspClosure, Traversal, DEFAULT_SPARSITY_CAP, DEFAULT_TRAVERSAL_CAP,
};
pub use parse::{FunctionFile, ParseOptions, TermRecord};

use std::collections::BTreeMap;
use std::fmt;

use crate::boolcube::{Cell, Point};
use crate::error::{Error, Result};

/// Relative threshold below which a (restricted) coefficient counts as cancelled.
pub const CANCELLATION_TOL: f64 = 1e-12;

/// A subset of features `S ⊆ {1..64}` as a bit mask (bit `k-1` for feature `k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Subset(pub u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_features(features: &[usize]) -> Result<Self> {
        let mut m = 0u64;
        for &k in features {
            if k == 0 || k > 64 {
                return Err(Error::IndexOutOfRange { index: k, dim: 64 });
            }
            m |= 1 << (k - 1);
        }
        Ok(Subset(m))
    }

    pub fn features(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut m = self.0;
        while m != 0 {
            out.push(m.trailing_zeros() as usize + 1);
            m &= m - 1;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, k: usize) -> bool {
        (1..=64).contains(&k) && self.0 & (1 << (k - 1)) != 0
    }

    pub fn max_feature(&self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(64 - self.0.leading_zeros() as usize)
        }
    }

    /// Canonical order: by size, then lexicographically by sorted features.
    pub fn canonical_cmp(&self, other: &Subset) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.features().cmp(&other.features()))
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.features().iter().map(|k| k.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// A Boolean regression function as a list of nonzero Fourier terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFourier {
    dim: usize,
    terms: Vec<(Subset, f64)>,
}

impl SparseFourier {
    /// Builds a function from `(subset, coefficient)` terms. Zero coefficients are dropped;
    /// repeated subsets are an error.
    pub fn new(dim: usize, terms: impl IntoIterator<Item = (Subset, f64)>) -> Result<Self> {
        if dim > 64 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut out: Vec<(Subset, f64)> = Vec::new();
        for (s, a) in terms {
            if !a.is_finite() {
                return Err(Error::InvalidArgs(format!("coefficient of {s} is not finite")));
            }
            if let Some(max_feature) = s.max_feature() {
                if max_feature > dim {
                    return Err(Error::SupportExceedsDimension { max_feature, dim });
                }
            }
            if out.iter().any(|(t, _)| *t == s) {
                return Err(Error::InvalidArgs(format!("duplicate subset {s}")));
            }
            if a != 0.0 {
                out.push((s, a));
            }
        }
        out.sort_by(|a, b| a.0.canonical_cmp(&b.0));
        Ok(SparseFourier { dim, terms: out })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(dim, [])
    }

    /// Accumulated coefficients with the cancellation guard applied relative to `scale`.
    fn from_accumulated(dim: usize, acc: BTreeMap<u64, f64>, scale: f64) -> Self {
        let tol = CANCELLATION_TOL * scale;
        let mut terms: Vec<(Subset, f64)> = acc
            .into_iter()
            .filter(|(_, a)| a.abs() > tol)
            .map(|(m, a)| (Subset(m), a))
            .collect();
        terms.sort_by(|a, b| a.0.canonical_cmp(&b.0));
        SparseFourier { dim, terms }
    }

    /// `1{x_1 = ... = x_s = 1} = prod_{j<=s} (1 + x_j) / 2`.
    pub fn and(s: usize, dim: usize) -> Result<Self> {
        if s > dim {
            return Err(Error::SupportExceedsDimension { max_feature: s, dim });
        }
        let scale = 0.5f64.powi(s as i32);
        Self::new(dim, (0u64..(1u64 << s)).map(|m| (Subset(m), scale)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(Subset, f64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, s: Subset) -> f64 {
        self.terms.iter().find(|(t, _)| *t == s).map(|(_, a)| *a).unwrap_or(0.0)
    }

    /// Union of all subsets, `S*`.
    pub fn support(&self) -> Subset {
        Subset(self.terms.iter().fold(0, |m, (s, _)| m | s.0))
    }

    pub fn sparsity(&self) -> usize {
        self.support().len()
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.support().max_feature()
    }

    pub fn mean(&self) -> f64 {
        self.coefficient(Subset::EMPTY)
    }

    /// `Var f(X) = sum_{S != ∅} alpha_S^2` under the uniform measure.
    pub fn variance(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(s, _)| !s.is_empty())
            .map(|(_, a)| a * a)
            .sum()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, (_, a)| m.max(a.abs()))
    }

    /// `sup |f|`, exact by enumerating support patterns when `s <= 20`,
    /// otherwise the bound `sum |alpha_S|`.
    pub fn sup_norm(&self) -> f64 {
        let support = self.support().features();
        if support.len() > 20 {
            return self.terms.iter().map(|(_, a)| a.abs()).sum();
        }
        let mut best = 0.0f64;
        for code in 0u64..(1u64 << support.len()) {
            let mut neg = 0u64;
            for (b, k) in support.iter().enumerate() {
                if code & (1 << b) != 0 {
                    neg |= 1 << (k - 1);
                }
            }
            best = best.max(self.eval_mask(neg).abs());
        }
        best
    }

    #[inline]
    pub fn eval_mask(&self, neg: u64) -> f64 {
        self.terms
            .iter()
            .map(|(s, a)| if (s.0 & neg).count_ones() & 1 == 0 { *a } else { -*a })
            .sum()
    }

    pub fn eval(&self, x: &Point) -> Result<f64> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        Ok(self.eval_mask(x.neg_mask()))
    }

    /// Restriction to a cell, as a function of the free coordinates:
    /// `alpha^C_S = sum_{U : U \ J(C) = S} (prod_{j in U ∩ J(C)} z_j) alpha_U`.
    pub fn restrict(&self, cell: &Cell) -> Result<SparseFourier> {
        if cell.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: cell.dim(),
            });
        }
        Ok(self.restrict_masks(cell.fixed_mask(), cell.neg_mask()))
    }

    pub(crate) fn restrict_masks(&self, fixed: u64, neg: u64) -> SparseFourier {
        if fixed & self.support().0 == 0 {
            return self.clone();
        }
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        for (u, a) in &self.terms {
            let s = u.0 & !fixed;
            let flip = (u.0 & fixed & neg).count_ones() & 1 == 1;
            *acc.entry(s).or_insert(0.0) += if flip { -*a } else { *a };
        }
        Self::from_accumulated(self.dim, acc, self.max_abs_coefficient())
    }

    /// Keeps only the terms whose subsets satisfy `keep`.
    pub fn filter_terms(&self, keep: impl Fn(Subset) -> bool) -> SparseFourier {
        SparseFourier {
            dim: self.dim,
            terms: self.terms.iter().copied().filter(|(s, _)| keep(*s)).collect(),
        }
    }

    /// Canonical text form, parseable by [`SparseFourier::parse`].
    pub fn to_text(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(s, a)| {
                let mut t = format!("{a:?}");
                for k in s.features() {
                    t.push_str(&format!("*x{k}"));
                }
                t
            })
            .collect();
        parts.join(" + ")
    }

    /// Stable short digest of the dimension and canonical terms.
    pub fn hash(&self) -> String {
        crate::rng::digest_hex(&format!("dim={};{}", self.dim, self.to_text()), 16)
    }

    /// Values over `{-1,+1}^s` in WHT bit order (see [`wht`]).
    pub fn to_table(&self, s: usize) -> Result<Vec<f64>> {
        if let Some(max_feature) = self.max_feature() {
            if max_feature > s {
                return Err(Error::SupportExceedsDimension { max_feature, dim: s });
            }
        }
        if s > 30 {
            return Err(Error::TooLarge(format!("table of 2^{s} entries")));
        }
        let mut table = vec![0.0; 1 << s];
        for (sub, a) in &self.terms {
            table[sub.0 as usize] = *a;
        }
        fwht(&mut table);
        Ok(table)
    }
}

impl fmt::Display for SparseFourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// In-place unnormalized fast Walsh-Hadamard transform.
fn fwht(a: &mut [f64]) {
    let n = a.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let (u, v) = (a[i], a[i + h]);
                a[i] = u + v;
                a[i + h] = u - v;
            }
        }
        h *= 2;
    }
}

/// Fourier coefficients of a table of `2^s` values.
///
/// Bit order: bit `b` of the table index encodes coordinate `x_{b+1}`, with bit value 0
/// meaning `x = +1` and 1 meaning `x = -1`. Coefficients are `2^-s sum_x f(x) chi_S(x)`.
pub fn wht(table: &[f64]) -> Result<SparseFourier> {
    let len = table.len();
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NonPowerOfTwoLength(len));
    }
    let s = len.trailing_zeros() as usize;
    if s > 30 {
        return Err(Error::TooLarge(format!("table of 2^{s} entries")));
    }
    let mut a = table.to_vec();
    fwht(&mut a);
    let scale = 1.0 / len as f64;
    let acc: BTreeMap<u64, f64> = a.iter().enumerate().map(|(m, v)| (m as u64, v * scale)).collect();
    let max = acc.values().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(SparseFourier::from_accumulated(s, acc, max))
}

/// Inverse of [`wht`]: the table of `f` over `{-1,+1}^s`.
pub fn inverse_wht(f: &SparseFourier, s: usize) -> Result<Vec<f64>> {
    f.to_table(s)
}
