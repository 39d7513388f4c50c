use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cubetrees::bounds::{
    best_robust_bound, gamma_window, nonadaptive_bound, nonmsp_bound, rate_values, robust_bound, xor_bound,
};
use cubetrees::fourier::{is_smsp, min_traversal, msp_closure, sid_lambda, smsp_lambda, SparseFourier, Subset};
use cubetrees::greedy::{CriterionRegistry, TieBreak};
use cubetrees::harness::{
    coverage_study, default_gamma_candidates, fit_estimator, run_validation, write_sweep, EstimatorConfig,
    ExperimentConfig, GammaSelection, Suite, ValidationParams,
};
use cubetrees::{sample_dataset, Error, NoiseModel};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "cubetrees", version, about = "Tree learning on the Boolean hypercube")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural analysis of a function and the applicable lower bounds
    Analyze(AnalyzeArgs),
    /// Fit one estimator to one simulated dataset
    Fit(FitArgs),
    /// Run an experiment config and write the sweep CSV
    Sweep(SweepArgs),
    /// Split coverage of grow-to-purity CART trees
    Coverage(CoverageArgs),
    /// Monte-Carlo checks of query-path statistics against their bounds
    Validate(ValidateArgs),
}

#[derive(Args)]
struct FunctionArgs {
    /// Function in the term grammar, e.g. "1.0*x1*x2 + 0.02*x1"
    #[arg(long)]
    function: String,
    #[arg(long)]
    d: usize,
}

impl FunctionArgs {
    fn parse(&self) -> cubetrees::Result<SparseFourier> {
        SparseFourier::parse(&self.function, self.d).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    f: FunctionArgs,
    /// Sample size for the bound calculators
    #[arg(long)]
    n: Option<f64>,
    /// Noise standard deviation (robust bounds)
    #[arg(long)]
    sigma: Option<f64>,
    /// Response bound M for ensemble bounds
    #[arg(long = "m")]
    m: Option<f64>,
    /// Vertex of the cut B, as comma-separated features; repeatable
    #[arg(long = "cut")]
    cut: Vec<String>,
    /// Signal level for the stopping-threshold window
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorKind {
    Cart,
    Rf,
    Erm,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ties {
    LowestIndex,
    Random,
}

impl From<Ties> for TieBreak {
    fn from(t: Ties) -> Self {
        match t {
            Ties::LowestIndex => TieBreak::LowestIndex,
            Ties::Random => TieBreak::Random,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    f: FunctionArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = EstimatorKind::Cart)]
    estimator: EstimatorKind,
    /// Fixed stopping threshold
    #[arg(long, conflicts_with = "gamma_grid")]
    gamma: Option<f64>,
    /// Select the threshold on a 70/30 split; optional comma-separated candidates
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    gamma_grid: Option<String>,
    #[arg(long, default_value = "cart")]
    criterion: String,
    #[arg(long, value_enum, default_value_t = Ties::Random)]
    tie_break: Ties,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Depth budget for erm and random trees
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 1e9)]
    clip: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also print the fitted model
    #[arg(long)]
    show_model: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    f: FunctionArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    /// Comma-separated features
    #[arg(long, default_value = "1,2,3")]
    features: String,
    #[arg(long, value_enum, default_value_t = Ties::Random)]
    tie_break: Ties,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ValidateArgs {
    /// depth | halving | xor_selection | nonadaptive_selection | all
    #[arg(long)]
    suite: String,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    log2n: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_features(text: &str) -> cubetrees::Result<Vec<usize>> {
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| config_err(format!("bad feature {t:?}")))
        })
        .collect()
}

fn noise(sigma: f64) -> cubetrees::Result<NoiseModel> {
    if sigma == 0.0 {
        Ok(NoiseModel::None)
    } else {
        NoiseModel::gaussian(sigma).map_err(|e| config_err(e.to_string()))
    }
}

fn analyze(a: &AnalyzeArgs) -> cubetrees::Result<()> {
    let f = a.f.parse()?;
    let d = a.f.d;
    let closure = msp_closure(&f);
    let mut out = serde_json::Map::new();
    out.insert("function".into(), f.to_text().into());
    out.insert("dim".into(), d.into());
    out.insert("variance".into(), f.variance().into());
    out.insert("closure".into(), serde_json::to_value(&closure).expect("serializes"));
    if !closure.is_msp {
        let t = min_traversal(&closure.unreached, closure.covered)?;
        out.insert(
            "traversal".into(),
            serde_json::to_value(t.features).expect("serializes"),
        );
    }
    if f.sparsity() <= cubetrees::fourier::DEFAULT_SPARSITY_CAP && f.variance() > 0.0 {
        out.insert("smsp".into(), is_smsp(&f)?.into());
        out.insert("sid_lambda".into(), sid_lambda(&f)?.into());
        out.insert("smsp_lambda".into(), smsp_lambda(&f)?.into());
    }
    let mut reports = Vec::new();
    if let Some(n) = a.n {
        if closure.is_msp {
            if let Some(lambda) = a.lambda {
                let w = gamma_window(f.sup_norm(), a.sigma.unwrap_or(0.0), f.sparsity(), d, n, lambda)?;
                out.insert("gamma_window".into(), serde_json::to_value(w).expect("serializes"));
            }
        } else {
            reports.push(nonmsp_bound(&f, d, n, a.m)?);
            if f.terms().len() == 1 && f.coefficient(Subset(0b11)) == 1.0 && d >= 3 {
                reports.push(xor_bound(d, n, a.m)?);
            }
        }
        if f.sparsity() > 0 {
            reports.push(nonadaptive_bound(&f, d, n, a.m)?);
        }
        if let Some(sigma) = a.sigma.filter(|s| *s > 0.0) {
            if a.cut.is_empty() {
                reports.push(best_robust_bound(&f, d, n, sigma)?);
            } else {
                let cut = a
                    .cut
                    .iter()
                    .map(|c| Subset::from_features(&parse_features(c)?))
                    .collect::<cubetrees::Result<Vec<_>>>()?;
                reports.push(robust_bound(&f, &cut, d, n, sigma)?);
            }
        }
        if f.sparsity() > 0 {
            let rates = rate_values(f.sparsity(), d, n, a.sigma.unwrap_or(0.0), a.m.unwrap_or(f.sup_norm()))?;
            out.insert("rates".into(), serde_json::to_value(rates).expect("serializes"));
        }
    }
    out.insert("bounds".into(), serde_json::to_value(&reports).expect("serializes"));
    match a.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&out).expect("serializes")),
        Format::Text => {
            println!("function: {}", f.to_text());
            println!("msp: {} (covered {})", closure.is_msp, closure.covered);
            for r in &reports {
                println!("---");
                print!("{}", r.to_text());
            }
        }
    }
    Ok(())
}

fn fit(a: &FitArgs) -> cubetrees::Result<()> {
    let f = a.f.parse()?;
    let estimator = match a.estimator {
        EstimatorKind::Cart => {
            CriterionRegistry::default()
                .get(&a.criterion)
                .map_err(|e| config_err(e.to_string()))?;
            EstimatorConfig::Cart {
                criterion: a.criterion.clone(),
                max_depth: a.max_depth,
                tie_break: a.tie_break.into(),
                mtry: a.mtry,
                min_samples: 1,
            }
        }
        EstimatorKind::Rf => EstimatorConfig::Rf {
            trees: a.trees,
            bootstrap: true,
            mtry: a.mtry,
            max_depth: a.max_depth,
            tie_break: a.tie_break.into(),
        },
        EstimatorKind::Erm => EstimatorConfig::Erm {
            depth: a.depth,
            clip: a.clip,
            state_cap: None,
        },
        EstimatorKind::Random => EstimatorConfig::Random { depth: a.depth },
    };
    let gamma = match (&a.gamma, &a.gamma_grid) {
        (_, Some(list)) => {
            let candidates = if list.is_empty() {
                default_gamma_candidates()
            } else {
                list.split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| config_err(format!("bad gamma {t:?}")))
                    })
                    .collect::<cubetrees::Result<Vec<_>>>()?
            };
            GammaSelection::Grid { candidates, split: 0.7 }
        }
        (Some(g), None) => GammaSelection::Fixed { value: *g },
        (None, None) => GammaSelection::Fixed { value: 0.0 },
    };
    let data = sample_dataset(&f, a.f.d, a.n, noise(a.sigma)?, a.seed)?;
    let outcome = fit_estimator(&data, &estimator, &gamma, a.seed)?;
    let risk = outcome.model.risk_report(&f, a.seed)?;
    let mut out = serde_json::json!({
        "estimator": estimator.name(),
        "function": f.to_text(),
        "d": a.f.d,
        "n": a.n,
        "sigma": a.sigma,
        "seed": a.seed,
        "gamma_used": outcome.gamma_used,
        "validation_mse": outcome.validation_mse,
        "risk": risk,
        "mean_depth": outcome.model.mean_depth(),
        "node_count": outcome.model.node_count(),
    });
    if a.show_model {
        out["model"] = serde_json::from_str(&outcome.model.to_json()).expect("model json");
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("serializes"));
    Ok(())
}

fn sweep(a: &SweepArgs) -> cubetrees::Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let rows = write_sweep(&cfg, a.jobs, &a.out)?;
    eprintln!("wrote {rows} rows to {}", a.out.display());
    Ok(())
}

fn coverage(a: &CoverageArgs) -> cubetrees::Result<()> {
    let f = a.f.parse()?;
    let features = parse_features(&a.features)?;
    let entries = coverage_study(
        &f,
        a.f.d,
        a.n,
        noise(a.sigma)?,
        a.replicates,
        &features,
        a.tie_break.into(),
        a.seed,
    )?;
    println!("{}", serde_json::to_string_pretty(&entries).expect("serializes"));
    Ok(())
}

fn validate(a: &ValidateArgs) -> cubetrees::Result<bool> {
    let suites: Vec<Suite> = if a.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![a.suite.parse().map_err(|e: Error| config_err(e.to_string()))?]
    };
    let mut all_pass = true;
    for suite in suites {
        let mut p = ValidationParams::defaults(suite);
        p.runs = a.runs.unwrap_or(p.runs);
        p.queries = a.queries.unwrap_or(p.queries);
        p.d = a.d.unwrap_or(p.d);
        p.log2n = a.log2n.unwrap_or(p.log2n);
        p.seed = a.seed;
        let report = run_validation(suite, &p)?;
        println!("{report}");
        all_pass &= report.pass;
    }
    Ok(all_pass)
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Parse(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(a) => analyze(a).map(|_| true),
        Command::Fit(a) => fit(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Coverage(a) => coverage(a).map(|_| true),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
