//! Closed-form lower bounds, thresholds and rates for tree estimators.
//!
//! Every calculator solves its sample-size condition for the smallest admissible `δ`.
//! A `δ >= 1` is reported as [`DeltaStatus::Vacuous`] with a zero bound; it is never an
//! error. Rates are constant-free order guides, not certified constants.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{cut_analysis, min_traversal, msp_closure, msp_residual, SparseFourier, Subset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DeltaStatus {
    /// Smallest `δ ∈ (0, 1)` meeting the sample-size condition.
    Admissible { delta: f64 },
    /// The condition needs `δ >= 1` (value shown) so the bound says nothing.
    Vacuous { delta: f64 },
}

impl DeltaStatus {
    fn from_required(delta: f64) -> Self {
        if delta.is_finite() && delta < 1.0 {
            DeltaStatus::Admissible { delta }
        } else {
            DeltaStatus::Vacuous { delta }
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match self {
            DeltaStatus::Admissible { delta } => Some(*delta),
            DeltaStatus::Vacuous { .. } => None,
        }
    }

    pub fn is_vacuous(&self) -> bool {
        matches!(self, DeltaStatus::Vacuous { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: String,
    pub inputs: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    pub derived: BTreeMap<String, f64>,
    pub delta: DeltaStatus,
    /// Risk lower bound for single trees.
    pub bound: f64,
    /// Risk lower bound for ensembles, when a response bound `M` is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble_bound: Option<f64>,
}

impl BoundReport {
    fn new(theorem: &str) -> Self {
        BoundReport {
            theorem: theorem.to_string(),
            inputs: BTreeMap::new(),
            function: None,
            derived: BTreeMap::new(),
            delta: DeltaStatus::Vacuous { delta: f64::INFINITY },
            bound: 0.0,
            ensemble_bound: None,
        }
    }

    fn input(mut self, key: &str, v: f64) -> Self {
        self.inputs.insert(key.to_string(), v);
        self
    }

    fn derive(&mut self, key: &str, v: f64) {
        self.derived.insert(key.to_string(), v);
    }

    /// Sets `δ` and the bounds `(1-δ)·var` and `(1-κ·g(δ))·var`.
    fn finish(mut self, required: f64, var: f64, kappa: Option<f64>, ensemble_delta: impl Fn(f64) -> f64) -> Self {
        self.delta = DeltaStatus::from_required(required);
        match self.delta {
            DeltaStatus::Admissible { delta } => {
                self.bound = (1.0 - delta) * var;
                self.ensemble_bound = kappa.map(|k| ((1.0 - k * ensemble_delta(delta)) * var).max(0.0));
            }
            DeltaStatus::Vacuous { .. } => {
                self.bound = 0.0;
                self.ensemble_bound = kappa.map(|_| 0.0);
            }
        }
        self
    }

    /// Human-readable multi-line form.
    pub fn to_text(&self) -> String {
        let mut out = format!("theorem: {}\n", self.theorem);
        if let Some(f) = &self.function {
            out += &format!("function: {f}\n");
        }
        for (k, v) in &self.inputs {
            out += &format!("input {k} = {v}\n");
        }
        for (k, v) in &self.derived {
            out += &format!("derived {k} = {v}\n");
        }
        match self.delta {
            DeltaStatus::Admissible { delta } => out += &format!("delta = {delta}\n"),
            DeltaStatus::Vacuous { delta } => out += &format!("delta = {delta} (vacuous)\n"),
        }
        out += &format!("bound = {}\n", self.bound);
        if let Some(e) = self.ensemble_bound {
            out += &format!("ensemble_bound = {e}\n");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn check_n(n: f64) -> Result<()> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::InvalidArgs(format!("n must be >= 1, got {n}")));
    }
    Ok(())
}

fn check_m(m: Option<f64>) -> Result<()> {
    match m {
        Some(m) if !(m > 0.0) => Err(Error::InvalidArgs(format!("M must be positive, got {m}"))),
        _ => Ok(()),
    }
}

/// Parity `x1 x2` hidden among `d` features: `log2 n <= δ(d-1)/2 - 2`.
pub fn xor_bound(d: usize, n: f64, m: Option<f64>) -> Result<BoundReport> {
    if d < 3 {
        return Err(Error::InvalidArgs(format!("d must be >= 3, got {d}")));
    }
    check_n(n)?;
    check_m(m)?;
    let mut r = BoundReport::new("xor").input("d", d as f64).input("n", n);
    if let Some(m) = m {
        r = r.input("M", m);
        r.derive("kappa", 2.0 * m);
    }
    r.derive("variance", 1.0);
    let required = 2.0 * (n.log2() + 2.0) / (d as f64 - 1.0);
    Ok(r.finish(required, 1.0, m.map(|m| 2.0 * m), |delta| delta))
}

/// Non-MSP functions: `log2 n <= δ(d - s_MSP - s_T + 1)/s_T - 2`, bound `(1-δ)Var{r_MSP}`.
pub fn nonmsp_bound(f: &SparseFourier, d: usize, n: f64, m: Option<f64>) -> Result<BoundReport> {
    check_n(n)?;
    check_m(m)?;
    if let Some(k) = f.max_feature() {
        if k > d {
            return Err(Error::SupportExceedsDimension { max_feature: k, dim: d });
        }
    }
    let closure = msp_closure(f);
    if closure.is_msp {
        return Err(Error::FunctionIsMsp);
    }
    let traversal = min_traversal(&closure.unreached, closure.covered)?;
    let s_msp = closure.s_msp() as f64;
    let s_t = traversal.size as f64;
    let var_r = msp_residual(f).variance();
    let var_f = f.variance();
    let mut r = BoundReport::new("nonmsp").input("d", d as f64).input("n", n);
    r.function = Some(f.to_text());
    let kappa = m.map(|m| 2.0 * m / var_f.sqrt());
    if let Some(m) = m {
        r = r.input("M", m);
    }
    r.derive("s_msp", s_msp);
    r.derive("s_t", s_t);
    r.derive("var_residual", var_r);
    r.derive("variance", var_f);
    if let Some(k) = kappa {
        r.derive("kappa", k);
    }
    let denom = d as f64 - s_msp - s_t + 1.0;
    let required = if denom > 0.0 {
        s_t * (n.log2() + 2.0) / denom
    } else {
        f64::INFINITY
    };
    Ok(r.finish(required, var_r, kappa, |delta| delta))
}

/// Robust bound for a vertex cut `B`:
/// `log2 n <= min{δ(d - s_{-B,MSP} - s_T)/(2 s_T) - 2, log2(δ²σ²/w(B)) - 1}`,
/// bound `(1-δ) w(𝒮_{-B,-MSP})`.
///
/// The first denominator has no `+1` and an extra factor 2 compared with
/// [`nonmsp_bound`]; both are kept as stated rather than harmonized.
pub fn robust_bound(f: &SparseFourier, cut: &[Subset], d: usize, n: f64, sigma: f64) -> Result<BoundReport> {
    check_n(n)?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgs(format!("sigma must be positive, got {sigma}")));
    }
    let ca = cut_analysis(f, cut)?;
    let mut r = BoundReport::new("robust")
        .input("d", d as f64)
        .input("n", n)
        .input("sigma", sigma);
    r.function = Some(f.to_text());
    let s_b = ca.s_msp() as f64;
    r.derive("s_msp", s_b);
    r.derive("cut_weight", ca.cut_weight);
    r.derive("disconnected_weight", ca.disconnected_weight);
    r.derive("cut_size", ca.cut.len() as f64);
    if ca.disconnected.is_empty() {
        r.derive("s_t", 0.0);
        r.delta = DeltaStatus::Vacuous { delta: f64::INFINITY };
        return Ok(r);
    }
    let s_t = min_traversal(&ca.disconnected, ca.covered)?.size as f64;
    r.derive("s_t", s_t);
    let denom = d as f64 - s_b - s_t;
    let first = if denom > 0.0 {
        2.0 * s_t * (n.log2() + 2.0) / denom
    } else {
        f64::INFINITY
    };
    let second = (2.0 * ca.cut_weight * n).sqrt() / sigma;
    r.derive("delta_traversal", first);
    r.derive("delta_noise", second);
    Ok(r.finish(first.max(second), ca.disconnected_weight, None, |delta| delta))
}

/// Largest [`robust_bound`] over every cut `B ⊆ 𝒮` (nonempty subsets only).
pub fn best_robust_bound(f: &SparseFourier, d: usize, n: f64, sigma: f64) -> Result<BoundReport> {
    const MAX_VERTICES: usize = 12;
    let vertices: Vec<Subset> = f.terms().iter().map(|(s, _)| *s).filter(|s| !s.is_empty()).collect();
    if vertices.len() > MAX_VERTICES {
        return Err(Error::TooLarge(format!(
            "{} vertices, cut enumeration limited to {MAX_VERTICES}",
            vertices.len()
        )));
    }
    let mut best: Option<BoundReport> = None;
    for mask in 0u32..(1 << vertices.len()) {
        let cut: Vec<Subset> = (0..vertices.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| vertices[i])
            .collect();
        let report = robust_bound(f, &cut, d, n, sigma)?;
        if best.as_ref().is_none_or(|b| report.bound > b.bound) {
            best = Some(report);
        }
    }
    let mut best = best.expect("at least the empty cut");
    best.theorem = "robust_best".to_string();
    Ok(best)
}

/// Non-adaptive trees with a uniformly random relevant set: `n <= 2^{δd/s}`, bound
/// `(1-δ)Var{f}`; ensembles `(1-κδ^{1/2})Var{f}` with `κ = 2M/Var{f}`.
pub fn nonadaptive_bound(f: &SparseFourier, d: usize, n: f64, m: Option<f64>) -> Result<BoundReport> {
    check_n(n)?;
    check_m(m)?;
    let s = f.sparsity();
    if s == 0 {
        return Err(Error::ConstantFunction);
    }
    let var = f.variance();
    let kappa = m.map(|m| 2.0 * m / var);
    let mut r = BoundReport::new("nonadaptive").input("d", d as f64).input("n", n);
    r.function = Some(f.to_text());
    if let Some(m) = m {
        r = r.input("M", m);
    }
    r.derive("s", s as f64);
    r.derive("variance", var);
    if let Some(k) = kappa {
        r.derive("kappa", k);
    }
    let required = s as f64 * n.log2() / d as f64;
    Ok(r.finish(required, var, kappa, f64::sqrt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaWindow {
    pub tau: f64,
    /// `[γ_min, γ_max)`, absent when empty.
    pub window: Option<(f64, f64)>,
    /// `8τ/λ`; the window is empty unless `n` exceeds it.
    pub min_n: f64,
}

/// `τ = 18(9‖f‖∞² + σ²)((s+2) ln 3 + ln(2dn))` and the admissible stopping window
/// `τ/n <= γ < (√(λ/2) - √(τ/n))₊²`.
pub fn gamma_window(f_inf_norm: f64, sigma: f64, s: usize, d: usize, n: f64, lambda: f64) -> Result<GammaWindow> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgs(format!("lambda must be positive, got {lambda}")));
    }
    check_n(n)?;
    let tau = 18.0
        * (9.0 * f_inf_norm * f_inf_norm + sigma * sigma)
        * ((s as f64 + 2.0) * 3f64.ln() + (2.0 * d as f64 * n).ln());
    let min_n = 8.0 * tau / lambda;
    let lo = tau / n;
    let hi = ((lambda / 2.0).sqrt() - lo.sqrt()).max(0.0).powi(2);
    let window = (n > min_n && hi > lo).then_some((lo, hi));
    Ok(GammaWindow { tau, window, min_n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateValues {
    /// `2^s σ² ln d / n`.
    pub minimax: f64,
    /// `(σ² + M²)(2^s ln d + ln n)/n`.
    pub erm: f64,
    /// `2^s (M² + σ²)(s + ln n)/n`.
    pub cart_upper: f64,
    /// Smallest `δ` with `n <= 2^{δd/s}`.
    pub nonadaptive_delta: f64,
}

/// Constant-free rates (natural logarithms). Order guides only.
pub fn rate_values(s: usize, d: usize, n: f64, sigma: f64, m: f64) -> Result<RateValues> {
    if s == 0 || d == 0 || !(sigma >= 0.0) || !(m >= 0.0) {
        return Err(Error::InvalidArgs(format!(
            "rates need s, d > 0 and sigma, M >= 0 (s={s}, d={d}, sigma={sigma}, M={m})"
        )));
    }
    check_n(n)?;
    let two_s = 2f64.powi(s as i32);
    let (sig2, m2) = (sigma * sigma, m * m);
    let ln_d = (d as f64).ln();
    Ok(RateValues {
        minimax: two_s * sig2 * ln_d / n,
        erm: (sig2 + m2) * (two_s * ln_d + n.ln()) / n,
        cart_upper: two_s * (m2 + sig2) * (s as f64 + n.ln()) / n,
        nonadaptive_delta: s as f64 * n.log2() / d as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionKind {
    /// `P{{1,2} ∩ J(X) ≠ ∅} <= 2(log2 n + 2)/(d-1)`.
    Xor { d: usize, n: f64 },
    /// `s_T(log2 n + 2)/(d - s_MSP - s_T + 1)`.
    NonMsp { d: usize, n: f64, s_msp: usize, s_t: usize },
    /// `(s/d) log2 n` for non-adaptive trees.
    Nonadaptive { s: usize, d: usize, n: f64 },
    /// Expected query-path length `<= log2 n + 2`.
    Depth { n: f64 },
}

pub fn selection_prob_bounds(kind: SelectionKind) -> Result<f64> {
    let bad = |msg: String| Err(Error::InvalidArgs(msg));
    match kind {
        SelectionKind::Xor { d, n } => {
            check_n(n)?;
            if d < 2 {
                return bad(format!("xor selection needs d >= 2, got {d}"));
            }
            Ok(2.0 * (n.log2() + 2.0) / (d as f64 - 1.0))
        }
        SelectionKind::NonMsp { d, n, s_msp, s_t } => {
            check_n(n)?;
            if s_t == 0 || s_msp + s_t > d {
                return bad(format!(
                    "need 0 < s_T and s_MSP + s_T <= d (d={d}, s_MSP={s_msp}, s_T={s_t})"
                ));
            }
            Ok(s_t as f64 * (n.log2() + 2.0) / (d - s_msp - s_t + 1) as f64)
        }
        SelectionKind::Nonadaptive { s, d, n } => {
            check_n(n)?;
            if d == 0 || s == 0 || s > d {
                return bad(format!("need 0 < s <= d (s={s}, d={d})"));
            }
            Ok(s as f64 / d as f64 * n.log2())
        }
        SelectionKind::Depth { n } => {
            check_n(n)?;
            Ok(n.log2() + 2.0)
        }
    }
}
