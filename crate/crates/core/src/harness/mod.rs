//! Experiment configuration, sweeps over data-generating grids, and Monte-Carlo
//! validation suites.

mod config;
mod sweep;
mod validate;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    default_gamma_candidates, EstimatorConfig, ExperimentConfig, GammaSelection, Grid, GridPoint, Metric,
    ALPHA_PLACEHOLDER,
};
pub use sweep::{fit_estimator, render_csv, run_fit, run_sweep, sweep_rows, write_sweep, FitOutcome, SweepRow};
pub use validate::{run_validation, Suite, ValidationParams, ValidationReport};

use crate::boolcube::{sample_dataset, NoiseModel};
use crate::error::{Error, Result};
use crate::fourier::SparseFourier;
use crate::greedy::{fit_cart, CartParams, TieBreak};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageEntry {
    pub feature: usize,
    pub mean: f64,
    pub se: f64,
}

/// Mean split coverage of grow-to-purity CART trees over `replicates` fresh datasets.
#[allow(clippy::too_many_arguments)]
pub fn coverage_study(
    f: &SparseFourier,
    d: usize,
    n: usize,
    noise: NoiseModel,
    replicates: usize,
    features: &[usize],
    tie_break: TieBreak,
    seed: u64,
) -> Result<Vec<CoverageEntry>> {
    if replicates == 0 {
        return Err(Error::InvalidArgs("replicates must be >= 1".into()));
    }
    if let Some(&k) = features.iter().find(|&&k| k == 0 || k > d) {
        return Err(Error::IndexOutOfRange { index: k, dim: d });
    }
    let params = CartParams {
        tie_break,
        ..CartParams::grow_to_purity()
    };
    let per_rep = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let s = rng::derive_seed(seed, "coverage", r as u64);
            let data = sample_dataset(f, d, n, noise, s)?;
            let tree = fit_cart(&data, &params, rng::derive_seed(s, "fit", 0))?;
            features.iter().map(|&k| tree.coverage(k)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let m = replicates as f64;
    Ok(features
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let mean = per_rep.iter().map(|v| v[j]).sum::<f64>() / m;
            let var = if replicates > 1 {
                per_rep.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            CoverageEntry {
                feature: k,
                mean,
                se: (var / m).sqrt(),
            }
        })
        .collect())
}
