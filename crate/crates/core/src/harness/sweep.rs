use std::path::Path;

use rayon::prelude::*;

use super::config::{EstimatorConfig, ExperimentConfig, GammaSelection, GridPoint, Metric};
use crate::boolcube::{sample_dataset, Dataset, NoiseModel};
use crate::erm::fit_erm;
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::fourier::SparseFourier;
use crate::greedy::{fit_cart_path, fit_forest_with, fit_random_tree, CartParams, CriterionRegistry, ForestParams};
use crate::rng;
use crate::trees::{Model, RiskMethod};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: Model,
    /// Stopping threshold actually used (`None` for estimators without one).
    pub gamma_used: Option<f64>,
    pub validation_mse: Option<f64>,
}

fn mse(model: &Model, data: &Dataset) -> f64 {
    let sum: f64 = (0..data.n())
        .map(|i| (model.predict_mask(data.rows()[i]) - data.responses()[i]).powi(2))
        .sum();
    sum / data.n() as f64
}

fn split_sample(data: &Dataset, frac: f64) -> (Dataset, Dataset) {
    let n = data.n();
    let n_train = ((frac * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let idx: Vec<usize> = (0..n).collect();
    (data.subset(&idx[..n_train]), data.subset(&idx[n_train..]))
}

/// Picks the candidate with the lowest validation MSE; ties go to the smallest `γ`.
fn select_gamma(
    candidates: &[f64],
    valid: &Dataset,
    mut fit: impl FnMut(f64) -> Result<Model>,
) -> Result<(f64, Model, f64)> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut best: Option<(f64, Model, f64)> = None;
    for g in sorted {
        let model = fit(g)?;
        let err = mse(&model, valid);
        if best.as_ref().is_none_or(|(_, _, e)| err < *e) {
            best = Some((g, model, err));
        }
    }
    Ok(best.expect("nonempty candidate list"))
}

/// Fits the configured estimator, selecting `γ` on a held-out split in grid mode.
pub fn fit_estimator(
    data: &Dataset,
    estimator: &EstimatorConfig,
    gamma: &GammaSelection,
    seed: u64,
) -> Result<FitOutcome> {
    let fit_seed = rng::derive_seed(seed, "fit", 0);
    match estimator {
        EstimatorConfig::Cart {
            criterion,
            max_depth,
            tie_break,
            mtry,
            min_samples,
        } => {
            let criterion = CriterionRegistry::default().get(criterion)?;
            let params = CartParams {
                gamma: 0.0,
                max_depth: *max_depth,
                tie_break: *tie_break,
                mtry: *mtry,
                min_samples: *min_samples,
            };
            match gamma {
                GammaSelection::Fixed { value } => {
                    let params = CartParams {
                        gamma: *value,
                        ..params
                    };
                    let path = fit_cart_path(data, &params, criterion.as_ref(), fit_seed)?;
                    Ok(FitOutcome {
                        model: Model::Tree(path.at_gamma(*value)),
                        gamma_used: Some(*value),
                        validation_mse: None,
                    })
                }
                GammaSelection::Grid { candidates, split } => {
                    let (train, valid) = split_sample(data, *split);
                    let path = fit_cart_path(&train, &params, criterion.as_ref(), fit_seed)?;
                    let (g, model, err) = select_gamma(candidates, &valid, |g| Ok(Model::Tree(path.at_gamma(g))))?;
                    Ok(FitOutcome {
                        model,
                        gamma_used: Some(g),
                        validation_mse: Some(err),
                    })
                }
            }
        }
        EstimatorConfig::Rf {
            trees,
            bootstrap,
            mtry,
            max_depth,
            tie_break,
        } => {
            let make = |g: f64| ForestParams {
                trees: *trees,
                bootstrap: *bootstrap,
                mtry: *mtry,
                cart: CartParams {
                    gamma: g,
                    max_depth: *max_depth,
                    tie_break: *tie_break,
                    ..CartParams::default()
                },
                seed: fit_seed,
            };
            let cart = crate::greedy::Cart;
            match gamma {
                GammaSelection::Fixed { value } => Ok(FitOutcome {
                    model: Model::Forest(fit_forest_with(data, &make(*value), &cart)?),
                    gamma_used: Some(*value),
                    validation_mse: None,
                }),
                GammaSelection::Grid { candidates, split } => {
                    let (train, valid) = split_sample(data, *split);
                    let (g, model, err) = select_gamma(candidates, &valid, |g| {
                        Ok(Model::Forest(fit_forest_with(&train, &make(g), &cart)?))
                    })?;
                    Ok(FitOutcome {
                        model,
                        gamma_used: Some(g),
                        validation_mse: Some(err),
                    })
                }
            }
        }
        EstimatorConfig::Erm { .. } => {
            let params = estimator.erm_params().expect("erm estimator");
            Ok(FitOutcome {
                model: Model::Tree(fit_erm(data, &params)?.tree),
                gamma_used: None,
                validation_mse: None,
            })
        }
        EstimatorConfig::Random { depth } => Ok(FitOutcome {
            model: Model::Tree(fit_random_tree(data, *depth, fit_seed)?),
            gamma_used: None,
            validation_mse: None,
        }),
    }
}

/// One `(grid point, replicate)` result.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub experiment_id: String,
    pub function_hash: String,
    pub point: GridPoint,
    pub estimator: String,
    pub gamma_used: Option<f64>,
    pub replicate: usize,
    pub seed: u64,
    pub risk_exact: Option<f64>,
    pub risk_method: Option<RiskMethod>,
    pub risk_se: Option<f64>,
    pub mean_depth: Option<f64>,
    pub node_count: Option<usize>,
    /// Probability that a uniform query path meets the support of the function.
    pub selection: Option<f64>,
    /// `(k, coverage(k))`; empty when `k > d`.
    pub coverage: Vec<(usize, Option<f64>)>,
}

const FIXED_COLUMNS: [&str; 16] = [
    "experiment_id",
    "function_hash",
    "d",
    "log2n",
    "sigma2",
    "alpha",
    "estimator",
    "gamma_used",
    "replicate",
    "seed",
    "risk_exact",
    "risk_method",
    "risk_se",
    "mean_depth",
    "node_count",
    "selection",
];

fn opt(v: Option<f64>) -> String {
    v.map(g17).unwrap_or_default()
}

impl SweepRow {
    pub fn header(coverage_features: &[usize]) -> String {
        let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|c| c.to_string()).collect();
        cols.extend(coverage_features.iter().map(|k| format!("coverage_x{k}")));
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let p = &self.point;
        let mut cols = vec![
            self.experiment_id.clone(),
            self.function_hash.clone(),
            p.d.to_string(),
            p.log2n.to_string(),
            g17(p.sigma2),
            g17(p.alpha),
            self.estimator.clone(),
            opt(self.gamma_used),
            self.replicate.to_string(),
            self.seed.to_string(),
            opt(self.risk_exact),
            match self.risk_method {
                Some(RiskMethod::Exact) => "exact".into(),
                Some(RiskMethod::Mc) => "mc".into(),
                None => String::new(),
            },
            opt(self.risk_se),
            opt(self.mean_depth),
            self.node_count.map(|c| c.to_string()).unwrap_or_default(),
            opt(self.selection),
        ];
        cols.extend(self.coverage.iter().map(|(_, c)| opt(*c)));
        cols.join(",")
    }
}

fn noise_for(sigma2: f64) -> Result<NoiseModel> {
    if sigma2 == 0.0 {
        Ok(NoiseModel::None)
    } else {
        NoiseModel::gaussian(sigma2.sqrt())
    }
}

fn run_fit_inner(config: &ExperimentConfig, point: &GridPoint, replicate: usize) -> Result<SweepRow> {
    let f: SparseFourier = config.function_at(point)?;
    let seed = config.seed(point, replicate);
    let data = sample_dataset(&f, point.d, point.n(), noise_for(point.sigma2)?, seed)?;
    let fit = fit_estimator(&data, &config.estimator, &config.gamma, seed)?;
    let model = &fit.model;
    let (mut risk_exact, mut risk_method, mut risk_se) = (None, None, None);
    if config.wants(Metric::RiskExact) {
        let report = model.risk_report(&f, rng::derive_seed(seed, "risk", 0))?;
        risk_exact = Some(report.risk);
        risk_method = Some(report.method);
        risk_se = report.se;
    }
    let depth = config.wants(Metric::Depth);
    let coverage = if config.wants(Metric::Coverage) {
        config
            .coverage_features
            .iter()
            .map(|&k| Ok((k, if k <= point.d { Some(model.coverage(k)?) } else { None })))
            .collect::<Result<Vec<_>>>()?
    } else {
        config.coverage_features.iter().map(|&k| (k, None)).collect()
    };
    Ok(SweepRow {
        experiment_id: config.id.clone(),
        function_hash: f.hash(),
        point: *point,
        estimator: config.estimator.name().to_string(),
        gamma_used: fit.gamma_used,
        replicate,
        seed,
        risk_exact,
        risk_method,
        risk_se,
        mean_depth: depth.then(|| model.mean_depth()),
        node_count: depth.then(|| model.node_count()),
        selection: config
            .wants(Metric::Selection)
            .then(|| model.selection_probability(f.support())),
        coverage,
    })
}

/// Generates the data for one grid point and replicate, fits, and computes the
/// requested metrics. Errors carry the grid point.
pub fn run_fit(config: &ExperimentConfig, point: &GridPoint, replicate: usize) -> Result<SweepRow> {
    run_fit_inner(config, point, replicate).map_err(|e| e.context(format!("{} replicate={replicate}", point.key())))
}

/// All rows, sorted by (grid point, replicate).
pub fn sweep_rows(config: &ExperimentConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let tasks: Vec<(GridPoint, usize)> = config
        .points()
        .into_iter()
        .flat_map(|p| (0..config.replicates).map(move |r| (p, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgs(e.to_string()))?;
    let mut rows = pool.install(|| {
        tasks
            .par_iter()
            .map(|(p, r)| run_fit(config, p, *r))
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by_key(|r| (r.point.index, r.replicate));
    Ok(rows)
}

/// Full CSV text: a `# config_hash=` comment, the header, then one line per row.
pub fn render_csv(config: &ExperimentConfig, rows: &[SweepRow]) -> String {
    let mut out = format!("# config_hash={}\n", config.hash());
    out += &SweepRow::header(&config.coverage_features);
    out.push('\n');
    for r in rows {
        out += &r.to_csv();
        out.push('\n');
    }
    out
}

pub fn run_sweep(config: &ExperimentConfig, jobs: usize) -> Result<String> {
    Ok(render_csv(config, &sweep_rows(config, jobs)?))
}

pub fn write_sweep(config: &ExperimentConfig, jobs: usize, out: &Path) -> Result<usize> {
    let rows = sweep_rows(config, jobs)?;
    std::fs::write(out, render_csv(config, &rows)).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    Ok(rows.len())
}
