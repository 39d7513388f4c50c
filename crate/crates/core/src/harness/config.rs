use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::erm::ErmParams;
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::fourier::{ParseOptions, SparseFourier};
use crate::greedy::TieBreak;
use crate::rng;

pub const ALPHA_PLACEHOLDER: &str = "{alpha}";

/// `{2^-k : k = 0..12}` plus 0. Useful thresholds shrink like 1/n, so a fixed positive
/// floor would stop noiseless fits at the root for large n.
pub fn default_gamma_candidates() -> Vec<f64> {
    (0..=12).map(|k| 2f64.powi(-k)).chain([0.0]).collect()
}

fn default_split() -> f64 {
    0.7
}

fn default_alpha() -> Vec<f64> {
    vec![0.0]
}

fn default_sigma2() -> Vec<f64> {
    vec![0.0]
}

fn default_replicates() -> usize {
    1
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::RiskExact, Metric::Depth]
}

fn default_coverage_features() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_criterion() -> String {
    "cart".into()
}

fn default_min_samples() -> usize {
    1
}

fn default_trees() -> usize {
    100
}

fn default_true() -> bool {
    true
}

fn default_clip() -> f64 {
    1e9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub d: Vec<usize>,
    pub log2n: Vec<u32>,
    #[serde(default = "default_sigma2")]
    pub sigma2: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    Cart {
        #[serde(default = "default_criterion")]
        criterion: String,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "random_ties")]
        tie_break: TieBreak,
        #[serde(default)]
        mtry: Option<usize>,
        #[serde(default = "default_min_samples")]
        min_samples: usize,
    },
    Rf {
        #[serde(default = "default_trees")]
        trees: usize,
        #[serde(default = "default_true")]
        bootstrap: bool,
        #[serde(default)]
        mtry: Option<usize>,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "random_ties")]
        tie_break: TieBreak,
    },
    Erm {
        depth: usize,
        #[serde(default = "default_clip")]
        clip: f64,
        #[serde(default)]
        state_cap: Option<usize>,
    },
    Random {
        depth: usize,
    },
}

fn random_ties() -> TieBreak {
    TieBreak::Random
}

impl EstimatorConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorConfig::Cart { .. } => "cart",
            EstimatorConfig::Rf { .. } => "rf",
            EstimatorConfig::Erm { .. } => "erm",
            EstimatorConfig::Random { .. } => "random",
        }
    }

    pub fn uses_gamma(&self) -> bool {
        matches!(self, EstimatorConfig::Cart { .. } | EstimatorConfig::Rf { .. })
    }

    pub fn cart_default() -> Self {
        EstimatorConfig::Cart {
            criterion: default_criterion(),
            max_depth: None,
            tie_break: TieBreak::Random,
            mtry: None,
            min_samples: 1,
        }
    }

    pub(crate) fn erm_params(&self) -> Option<ErmParams> {
        match self {
            EstimatorConfig::Erm { depth, clip, state_cap } => Some(ErmParams {
                depth_budget: *depth,
                clip: *clip,
                state_cap: state_cap.unwrap_or(ErmParams::default().state_cap),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSelection {
    Fixed {
        value: f64,
    },
    /// Fit on the first `split` fraction of the sample, pick the candidate with the
    /// lowest validation MSE on the rest (ties go to the smallest `γ`).
    Grid {
        #[serde(default = "default_gamma_candidates")]
        candidates: Vec<f64>,
        #[serde(default = "default_split")]
        split: f64,
    },
}

impl Default for GammaSelection {
    fn default() -> Self {
        GammaSelection::Fixed { value: 0.0 }
    }
}

impl GammaSelection {
    pub fn grid() -> Self {
        GammaSelection::Grid {
            candidates: default_gamma_candidates(),
            split: default_split(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RiskExact,
    Coverage,
    Depth,
    Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    /// Function grammar; `{alpha}` is replaced by each value of `grid.alpha`.
    pub function: String,
    pub grid: Grid,
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub gamma: GammaSelection,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_coverage_features")]
    pub coverage_features: Vec<usize>,
}

/// One `(d, log2 n, σ², α)` combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub d: usize,
    pub log2n: u32,
    pub sigma2: f64,
    pub alpha: f64,
}

impl GridPoint {
    pub fn n(&self) -> usize {
        1usize << self.log2n
    }

    /// Stable textual key; seeds derive from it, not from enumeration order.
    pub fn key(&self) -> String {
        format!(
            "d={};log2n={};sigma2={};alpha={}",
            self.d,
            self.log2n,
            g17(self.sigma2),
            g17(self.alpha)
        )
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let g = &self.grid;
        if g.d.is_empty() || g.log2n.is_empty() || g.sigma2.is_empty() || g.alpha.is_empty() {
            return bad("every grid list must be nonempty".into());
        }
        if let Some(d) = g.d.iter().find(|&&d| d == 0 || d > crate::boolcube::MAX_DIM) {
            return bad(format!("d = {d} outside 1..=64"));
        }
        if let Some(l) = g.log2n.iter().find(|&&l| l > 30) {
            return bad(format!("log2n = {l} too large"));
        }
        if g.sigma2.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return bad("sigma2 values must be finite and >= 0".into());
        }
        if g.alpha.iter().any(|a| !a.is_finite()) {
            return bad("alpha values must be finite".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        match &self.gamma {
            GammaSelection::Fixed { value } if !(*value >= 0.0) => {
                return bad(format!("gamma must be >= 0, got {value}"));
            }
            GammaSelection::Grid { candidates, split } => {
                if candidates.is_empty() || candidates.iter().any(|c| !(*c >= 0.0)) {
                    return bad("gamma candidates must be a nonempty list of values >= 0".into());
                }
                if !(*split > 0.0 && *split < 1.0) {
                    return bad(format!("split fraction must lie in (0, 1), got {split}"));
                }
                if g.log2n.contains(&0) {
                    return bad("gamma grid needs n >= 2 for a validation split".into());
                }
            }
            _ => {}
        }
        if self.coverage_features.contains(&0) {
            return bad("coverage features are 1-based".into());
        }
        if let EstimatorConfig::Cart { criterion, .. } = &self.estimator {
            crate::greedy::CriterionRegistry::default()
                .get(criterion)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        for p in self.points() {
            self.function_at(&p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.key())))?;
        }
        Ok(())
    }

    /// Grid points in config order: `d`, then `log2n`, `sigma2`, `alpha`.
    pub fn points(&self) -> Vec<GridPoint> {
        let g = &self.grid;
        let mut out = Vec::new();
        for &d in &g.d {
            for &log2n in &g.log2n {
                for &sigma2 in &g.sigma2 {
                    for &alpha in &g.alpha {
                        out.push(GridPoint {
                            index: out.len(),
                            d,
                            log2n,
                            sigma2,
                            alpha,
                        });
                    }
                }
            }
        }
        out
    }

    /// The regression function at a grid point; zero-coefficient terms from `{alpha}`
    /// substitution are dropped.
    pub fn function_at(&self, p: &GridPoint) -> Result<SparseFourier> {
        let text = self.function.replace(ALPHA_PLACEHOLDER, &g17(p.alpha));
        SparseFourier::parse_with(&text, p.d, ParseOptions { drop_zero: true })
    }

    pub fn seed(&self, p: &GridPoint, replicate: usize) -> u64 {
        rng::derive_seed(self.master_seed, &p.key(), replicate as u64)
    }

    /// Digest of the canonical (serialized) config.
    pub fn hash(&self) -> String {
        rng::digest_hex(&serde_json::to_string(self).expect("config serializes"), 16)
    }

    pub fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }
}
