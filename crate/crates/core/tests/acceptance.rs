//! End-to-end acceptance checks. Runs as a plain binary so each criterion prints one
//! PASS/FAIL line; exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cubetrees::bounds::{
    gamma_window, nonadaptive_bound, nonmsp_bound, rate_values, robust_bound, selection_prob_bounds, xor_bound,
    SelectionKind,
};
use cubetrees::erm::{enumerate_erm_oracle, fit_erm, ErmParams};
use cubetrees::fourier::{
    inverse_wht, is_smsp, msp_closure_ordered, random_coefficients, sid_lambda, smsp_lambda, wht,
};
use cubetrees::greedy::{impurity_decrease, TieBreak};
use cubetrees::harness::{
    coverage_study, run_validation, sweep_rows, EstimatorConfig, ExperimentConfig, GammaSelection, Grid, Metric, Suite,
    ValidationParams,
};
use cubetrees::{cell_members, fit_cart, CartParams, Cell, Dataset, NoiseModel, Point, SparseFourier, Subset};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_subset(r: &mut ChaCha8Rng, universe: usize, max_size: usize) -> Subset {
    let size = r.random_range(1..=max_size.min(universe));
    let mut feats: Vec<usize> = (1..=universe).collect();
    feats.shuffle(r);
    Subset::from_features(&feats[..size]).unwrap()
}

fn random_function(r: &mut ChaCha8Rng, d: usize, s: usize, terms: usize) -> SparseFourier {
    let mut out: Vec<(Subset, f64)> = Vec::new();
    if r.random_bool(0.5) {
        out.push((Subset::EMPTY, r.sample::<f64, _>(StandardNormal)));
    }
    let target = out.len() + terms.min((1usize << s) - 1);
    while out.len() < target {
        let sub = random_subset(r, s, s);
        if out.iter().all(|(t, _)| *t != sub) {
            out.push((sub, r.sample::<f64, _>(StandardNormal)));
        }
    }
    SparseFourier::new(d, out).unwrap()
}

fn random_cell(r: &mut ChaCha8Rng, d: usize, max_depth: usize) -> Cell {
    let depth = r.random_range(0..=max_depth.min(d));
    let mut feats: Vec<usize> = (1..=d).collect();
    feats.shuffle(r);
    let cons: Vec<(usize, i8)> = feats[..depth]
        .iter()
        .map(|&k| (k, if r.random_bool(0.5) { 1 } else { -1 }))
        .collect();
    Cell::from_constraints(d, &cons).unwrap()
}

fn brute_variance(f: &SparseFourier) -> f64 {
    let d = f.dim();
    let pts: Vec<Point> = Cell::full(d).unwrap().points().collect();
    let vals: Vec<f64> = pts.iter().map(|p| f.eval(p).unwrap()).collect();
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64
}

// 1. three forms of the impurity decrease
fn impurity_identity() -> Check {
    let mut r = rng(1);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 500 {
        let d = r.random_range(1..=10);
        let n = r.random_range(2..=200);
        let rows: Vec<u64> = (0..n).map(|_| r.random::<u64>() & ((1u64 << d) - 1)).collect();
        let ys: Vec<f64> = (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let data = Dataset::from_masks(d, rows, ys).unwrap();
        let cell = random_cell(&mut r, d, d.saturating_sub(1).min(3));
        let free: Vec<usize> = (1..=d).filter(|&k| !cell.is_fixed(k)).collect();
        let k = free[r.random_range(0..free.len())];
        let members = cell_members(&cell, &data).unwrap();
        let idx = members.indices;
        let (plus, minus): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| data.x(i, k) > 0);
        if plus.is_empty() || minus.is_empty() {
            continue;
        }
        let y = |i: usize| data.responses()[i];
        let nn = idx.len() as f64;
        let mean = |set: &[usize]| set.iter().map(|&i| y(i)).sum::<f64>() / set.len() as f64;
        let p = plus.len() as f64 / nn;
        let pq_form = p * (1.0 - p) * (mean(&plus) - mean(&minus)).powi(2);
        let ybar = mean(&idx);
        let xbar = idx.iter().map(|&i| data.x(i, k) as f64).sum::<f64>() / nn;
        let var_y = idx.iter().map(|&i| (y(i) - ybar).powi(2)).sum::<f64>() / nn;
        let var_x = idx.iter().map(|&i| (data.x(i, k) as f64 - xbar).powi(2)).sum::<f64>() / nn;
        let cov = idx
            .iter()
            .map(|&i| (y(i) - ybar) * (data.x(i, k) as f64 - xbar))
            .sum::<f64>()
            / nn;
        let corr_form = var_y * cov * cov / (var_y * var_x);
        let lib = impurity_decrease(k, &cell, &data).map_err(|e| e.to_string())?;
        let err = (lib - pq_form).abs().max((lib - corr_form).abs());
        worst = worst.max(err);
        ensure(err <= 1e-10, || {
            format!("triple {checked}: definition {lib}, p(1-p) {pq_form}, corr {corr_form}")
        })?;
        checked += 1;
    }
    Ok(format!("500 triples, max discrepancy {worst:.2e}"))
}

// 2. transforms, restriction, Parseval
fn fourier_suite() -> Check {
    let mut r = rng(2);
    let mut worst_wht: f64 = 0.0;
    for s in 0..=10 {
        for _ in 0..5 {
            let table: Vec<f64> = (0..1usize << s).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let f = wht(&table).map_err(|e| e.to_string())?;
            let back = inverse_wht(&f, s).map_err(|e| e.to_string())?;
            let err = table.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst_wht = worst_wht.max(err);
            // coefficient definition by direct inner product
            for &(sub, a) in f.terms() {
                let direct = (0..1usize << s)
                    .map(|i| {
                        let sign = if (i as u64 & sub.0).count_ones() % 2 == 1 {
                            -1.0
                        } else {
                            1.0
                        };
                        table[i] * sign
                    })
                    .sum::<f64>()
                    / (1usize << s) as f64;
                ensure((direct - a).abs() <= 1e-12, || {
                    format!("s={s}: coefficient {sub} {a} vs {direct}")
                })?;
            }
        }
    }
    ensure(worst_wht <= 1e-12, || format!("wht round trip error {worst_wht:.2e}"))?;

    let mut points = 0usize;
    for case in 0..200 {
        let s = r.random_range(1..=8);
        let terms = r.random_range(1..=6);
        let f = random_function(&mut r, s, s, terms);
        let cell = random_cell(&mut r, s, s);
        let g = f.restrict(&cell).map_err(|e| e.to_string())?;
        for x in cell.points() {
            let (a, b) = (f.eval(&x).unwrap(), g.eval(&x).unwrap());
            ensure((a - b).abs() <= 1e-12 * (1.0 + a.abs()), || {
                format!("restrict case {case}: {a} vs {b} at {:?}", x.coords())
            })?;
            points += 1;
        }
    }

    let mut worst_parseval: f64 = 0.0;
    for case in 0..200 {
        let s = r.random_range(1..=8);
        let terms = r.random_range(1..=8);
        let f = random_function(&mut r, s, s, terms);
        let err = (f.variance() - brute_variance(&f)).abs();
        worst_parseval = worst_parseval.max(err);
        ensure(err <= 1e-10, || {
            format!("Parseval case {case}: {} vs {}", f.variance(), brute_variance(&f))
        })?;
    }
    Ok(format!(
        "wht err {worst_wht:.1e}, restrict checked on {points} points, Parseval err {worst_parseval:.1e}"
    ))
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn msp_by_orderings(sets: &[Subset]) -> bool {
    permutations(sets.len()).into_iter().any(|order| {
        let mut covered = 0u64;
        order.iter().all(|&i| {
            let ok = (sets[i].0 & !covered).count_ones() <= 1;
            covered |= sets[i].0;
            ok
        })
    })
}

// 3. closure vs ordering search; SMSP vs SID
fn msp_oracle() -> Check {
    let mut r = rng(3);
    let mut msp_count = 0;
    for case in 0..500 {
        let m = r.random_range(1..=6);
        let mut sets: Vec<Subset> = Vec::new();
        while sets.len() < m {
            let s = random_subset(&mut r, 6, 3);
            if !sets.contains(&s) {
                sets.push(s);
            }
        }
        let order: Vec<usize> = (0..m).collect();
        let lib = msp_closure_ordered(&sets, &order).is_msp;
        let oracle = msp_by_orderings(&sets);
        ensure(lib == oracle, || {
            format!("case {case}: {sets:?} closure {lib} oracle {oracle}")
        })?;
        msp_count += usize::from(oracle);
    }

    let (mut smsp_true, mut smsp_false) = (0, 0);
    for case in 0..100u64 {
        let m = r.random_range(1..=5);
        let mut sets: Vec<Subset> = Vec::new();
        while sets.len() < m {
            let s = random_subset(&mut r, 5, 3);
            if !sets.contains(&s) {
                sets.push(s);
            }
        }
        let f = random_coefficients(&sets, 5, 1000 + case).map_err(|e| e.to_string())?;
        let smsp = is_smsp(&f).map_err(|e| e.to_string())?;
        let sid = sid_lambda(&f).map_err(|e| e.to_string())?;
        ensure(smsp == (sid > 0.0), || {
            format!("draw {case}: {} smsp {smsp} sid {sid}", f.to_text())
        })?;
        if smsp {
            smsp_true += 1;
        } else {
            smsp_false += 1;
        }
    }
    ensure(smsp_true > 0 && smsp_false > 0, || {
        "draws did not mix both classes".into()
    })?;
    Ok(format!(
        "500 collections ({msp_count} MSP), 100 draws ({smsp_true} SMSP, {smsp_false} not)"
    ))
}

// 4. AND function constants
fn and_constants() -> Check {
    let mut lines = Vec::new();
    for s in [2usize, 3] {
        let f = SparseFourier::and(s, s).map_err(|e| e.to_string())?;
        let sid = sid_lambda(&f).map_err(|e| e.to_string())?;
        let smsp = smsp_lambda(&f).map_err(|e| e.to_string())?;
        let want_sid = 1.0 / (2f64.powi(s as i32) - 1.0);
        let want_smsp = 2f64.powi(-2 * s as i32);
        ensure((sid - want_sid).abs() <= 1e-12, || {
            format!("AND_{s} sid {sid} want {want_sid}")
        })?;
        ensure((smsp - want_smsp).abs() <= 1e-12, || {
            format!("AND_{s} smsp {smsp} want {want_smsp}")
        })?;
        // along the all-ones path with j coordinates fixed, the next coordinate has
        // squared correlation 1/(2^(s-j) - 1)
        for j in 0..s {
            let cons: Vec<(usize, i8)> = (1..=j).map(|k| (k, 1)).collect();
            let cell = Cell::from_constraints(s, &cons).unwrap();
            let g = f.restrict(&cell).map_err(|e| e.to_string())?;
            let next = Subset::from_features(&[j + 1]).unwrap();
            let from_restrict = g.coefficient(next).powi(2) / g.variance();
            // population moments over the cell from the indicator itself
            let pts: Vec<Point> = cell.points().collect();
            let vals: Vec<f64> = pts
                .iter()
                .map(|p| if p.coords().iter().all(|&c| c == 1) { 1.0 } else { 0.0 })
                .collect();
            let m = pts.len() as f64;
            let fm = vals.iter().sum::<f64>() / m;
            let xm = pts.iter().map(|p| p.get(j + 1) as f64).sum::<f64>() / m;
            let cov = pts
                .iter()
                .zip(&vals)
                .map(|(p, v)| (v - fm) * (p.get(j + 1) as f64 - xm))
                .sum::<f64>()
                / m;
            let vf = vals.iter().map(|v| (v - fm).powi(2)).sum::<f64>() / m;
            let vx = pts.iter().map(|p| (p.get(j + 1) as f64 - xm).powi(2)).sum::<f64>() / m;
            let pop = cov * cov / (vf * vx);
            let want = 1.0 / (2f64.powi((s - j) as i32) - 1.0);
            ensure(
                (pop - want).abs() <= 1e-12 && (from_restrict - want).abs() <= 1e-12,
                || format!("AND_{s}, {j} fixed: restrict {from_restrict}, moments {pop}, want {want}"),
            )?;
            lines.push(format!("{want:.4}"));
        }
    }
    Ok(format!(
        "sid/smsp exact for s=2,3; path correlations {}",
        lines.join(" ")
    ))
}

// 5. DP vs brute force, ERM <= CART
fn erm_oracle() -> Check {
    let mut r = rng(5);
    for case in 0..100 {
        let d = r.random_range(1..=5);
        let n = r.random_range(1..=40);
        let depth = r.random_range(0..=2usize.min(d));
        let s = d.min(3);
        let terms = r.random_range(1..=3);
        let f = random_function(&mut r, d, s, terms);
        let sigma = if r.random_bool(0.5) { 0.0 } else { 0.5 };
        let noise = if sigma == 0.0 {
            NoiseModel::None
        } else {
            NoiseModel::gaussian(sigma).unwrap()
        };
        let data = cubetrees::sample_dataset(&f, d, n, noise, case).map_err(|e| e.to_string())?;
        let params = ErmParams::new(depth, 1e9);
        let dp = fit_erm(&data, &params).map_err(|e| e.to_string())?;
        let brute = enumerate_erm_oracle(&data, &params).map_err(|e| e.to_string())?;
        ensure(dp.empirical_risk == brute, || {
            format!("case {case}: dp {} brute {brute}", dp.empirical_risk)
        })?;
        let cart = fit_cart(
            &data,
            &CartParams {
                max_depth: Some(depth),
                ..CartParams::default()
            },
            case,
        )
        .map_err(|e| e.to_string())?;
        let cart_risk = (0..n)
            .map(|i| (cart.predict_mask(data.rows()[i]) - data.responses()[i]).powi(2))
            .sum::<f64>()
            / n as f64;
        ensure(dp.empirical_risk <= cart_risk + 1e-12 * (1.0 + cart_risk), || {
            format!("case {case}: erm {} above cart {cart_risk}", dp.empirical_risk)
        })?;
    }
    Ok("100 instances: DP equals enumeration exactly, ERM <= CART".into())
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let m = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt())
}

fn cart_grid_config(
    id: &str,
    function: &str,
    d: Vec<usize>,
    log2n: Vec<u32>,
    sigma2: f64,
    reps: usize,
) -> ExperimentConfig {
    ExperimentConfig {
        id: id.into(),
        function: function.into(),
        grid: Grid {
            d,
            log2n,
            sigma2: vec![sigma2],
            alpha: vec![0.0],
        },
        estimator: EstimatorConfig::cart_default(),
        gamma: GammaSelection::grid(),
        replicates: reps,
        master_seed: 2024,
        metrics: vec![Metric::RiskExact],
        coverage_features: vec![],
    }
}

fn risks(cfg: &ExperimentConfig) -> std::result::Result<Vec<Vec<f64>>, String> {
    let rows = sweep_rows(cfg, 0).map_err(|e| e.to_string())?;
    let mut out = vec![Vec::new(); cfg.points().len()];
    for row in rows {
        out[row.point.index].push(row.risk_exact.unwrap());
    }
    Ok(out)
}

// 6. parity is not learned at d=50, n=2^7
fn xor_hardness() -> Check {
    let cfg = cart_grid_config("xor", "x1*x2", vec![50], vec![7], 0.0, 100);
    let (risk, risk_se) = mean_se(&risks(&cfg)?[0]);
    ensure(risk >= 0.6, || format!("mean risk {risk:.4} < 0.6"))?;
    let f = SparseFourier::parse("x1*x2", 50).unwrap();
    let cov =
        coverage_study(&f, 50, 128, NoiseModel::None, 100, &[2], TieBreak::Random, 77).map_err(|e| e.to_string())?;
    let bound = 18.0 / 49.0;
    ensure(cov[0].mean <= bound + 3.0 * cov[0].se, || {
        format!("coverage(x2) {:.4} > {bound:.4} + 3*{:.4}", cov[0].mean, cov[0].se)
    })?;
    Ok(format!(
        "mean risk {risk:.4} (se {risk_se:.4}) >= 0.6; coverage(x2) {:.4} (se {:.4}) <= {bound:.4} + 3 se",
        cov[0].mean, cov[0].se
    ))
}

// 7. staircase functions are learned
fn msp_learnability() -> Check {
    let cfg = cart_grid_config("msp", "x1 + x2 + x1*x2*x3", vec![50], vec![12], 0.01, 50);
    let (risk, se) = mean_se(&risks(&cfg)?[0]);
    ensure(risk <= 0.05, || format!("x1+x2+x1x2x3 mean risk {risk:.4} > 0.05"))?;

    let logs: Vec<u32> = (7..=15).collect();
    let cfg = cart_grid_config("stair", "x1*x2 + 0.02*x1", vec![10], logs.clone(), 0.0, 50);
    let stats: Vec<(f64, f64)> = risks(&cfg)?.iter().map(|v| mean_se(v)).collect();
    let path: Vec<String> = stats.iter().map(|(m, _)| format!("{m:.3}")).collect();
    for w in 0..stats.len() - 1 {
        let ((a, sa), (b, sb)) = (stats[w], stats[w + 1]);
        ensure(b <= a + 2.0 * (sa * sa + sb * sb).sqrt() + 1e-12, || {
            format!(
                "risk rises from {a:.3e} (n=2^{}) to {b:.3e} (n=2^{}); path {}",
                logs[w],
                logs[w + 1],
                path.join(" ")
            )
        })?;
    }
    let last = stats.last().unwrap().0;
    ensure(last <= 0.1, || format!("risk at n=2^15 is {last:.4} > 0.1"))?;
    Ok(format!(
        "x1+x2+x1x2x3 risk {risk:.4} (se {se:.4}); x1x2+0.02x1 over log2n 7..15: {}",
        path.join(" ")
    ))
}

// 8. query-path statistics
fn query_path_suite() -> Check {
    let mut parts = Vec::new();
    let mut failed = Vec::new();
    for suite in [Suite::Depth, Suite::Halving, Suite::NonadaptiveSelection] {
        let rep = run_validation(suite, &ValidationParams::defaults(suite)).map_err(|e| e.to_string())?;
        parts.push(format!(
            "{suite} {:.4}±{:.4} vs {:.4}",
            rep.statistic, rep.se, rep.bound
        ));
        if !rep.pass {
            failed.push(rep.to_string());
        }
    }
    ensure(failed.is_empty(), || failed.join("; "))?;
    Ok(parts.join("; "))
}

fn close6(a: f64, b: f64) -> bool {
    (a - b).abs() <= 5e-7 * b.abs().max(f64::MIN_POSITIVE)
}

// 9. calculator regressions and monotonicity
fn bound_regressions() -> Check {
    let e = |x: cubetrees::Error| x.to_string();
    let xor = xor_bound(50, 128.0, None).map_err(e)?;
    ensure(close6(xor.delta.delta().unwrap(), 0.3673469387755102), || {
        format!("xor delta {:?}", xor.delta)
    })?;
    ensure(close6(xor.bound, 0.6326530612244898), || {
        format!("xor bound {}", xor.bound)
    })?;
    let w = gamma_window(1.0, 0.0, 2, 10, 1e6, 1.0 / 16.0).map_err(e)?;
    let (lo, hi) = w.window.ok_or("empty window")?;
    ensure(close6(w.tau, 3435.322101762894), || format!("tau {}", w.tau))?;
    ensure(
        close6(lo, 0.003435322101762894) && close6(hi, 0.013962984812731968),
        || format!("window [{lo}, {hi})"),
    )?;
    let g = SparseFourier::parse("x1*x2 + 0.02*x1", 10).unwrap();
    let b1 = Subset::from_features(&[1]).unwrap();
    let rb = robust_bound(&g, &[b1], 10, 100.0, 1.0).map_err(e)?;
    ensure(close6(rb.derived["cut_weight"], 4e-4), || {
        format!("w(B) {}", rb.derived["cut_weight"])
    })?;
    let nm = nonmsp_bound(&SparseFourier::parse("x1 + x3*x4", 50).unwrap(), 50, 512.0, None).map_err(e)?;
    ensure(
        close6(nm.delta.delta().unwrap(), 22.0 / 48.0) && close6(nm.bound, 26.0 / 48.0),
        || format!("nonmsp {:?} {}", nm.delta, nm.bound),
    )?;
    let na = selection_prob_bounds(SelectionKind::Nonadaptive { s: 2, d: 50, n: 512.0 }).map_err(e)?;
    ensure(close6(na, 0.36), || format!("nonadaptive selection {na}"))?;
    let rate = rate_values(2, 50, 1e4, 1.0, 1.0).map_err(e)?;
    ensure(close6(rate.minimax, 0.0015648092021712584), || {
        format!("minimax {}", rate.minimax)
    })?;

    // lower bounds: non-increasing in n, non-decreasing in d
    let functions = ["x1*x2", "x1 + x3*x4", "x1*x2*x3 + x4", "x1*x2 + x3*x4*x5"];
    let ns: Vec<f64> = (0..=20).map(|k| 2f64.powi(k)).collect();
    let ds: Vec<usize> = (6..=64).step_by(2).collect();
    let mut grid_points = 0;
    for d in &ds {
        let series: Vec<f64> = ns.iter().map(|&n| xor_bound(*d, n, Some(1.0)).unwrap().bound).collect();
        ensure(series.windows(2).all(|w| w[1] <= w[0]), || {
            format!("xor not monotone in n at d={d}")
        })?;
        for &n in &ns {
            let a = xor_bound(*d, n, None).unwrap();
            let b = nonmsp_bound(&SparseFourier::parse("x1*x2", *d).unwrap(), *d, n, None).unwrap();
            ensure(a.delta == b.delta && a.bound == b.bound, || {
                format!("specialization fails at d={d} n={n}")
            })?;
            grid_points += 1;
        }
    }
    for &n in &ns {
        for text in functions {
            let by_d: Vec<f64> = ds
                .iter()
                .map(|&d| {
                    nonmsp_bound(&SparseFourier::parse(text, d).unwrap(), d, n, None)
                        .unwrap()
                        .bound
                })
                .collect();
            ensure(by_d.windows(2).all(|w| w[1] >= w[0]), || {
                format!("{text} not monotone in d at n={n}")
            })?;
            let by_d: Vec<f64> = ds
                .iter()
                .map(|&d| {
                    robust_bound(&SparseFourier::parse(text, d).unwrap(), &[], d, n, 1.0)
                        .unwrap()
                        .bound
                })
                .collect();
            ensure(by_d.windows(2).all(|w| w[1] >= w[0]), || {
                format!("robust {text} not monotone in d")
            })?;
            grid_points += 2 * ds.len();
        }
        let by_d: Vec<f64> = ds.iter().map(|&d| xor_bound(d, n, None).unwrap().bound).collect();
        ensure(by_d.windows(2).all(|w| w[1] >= w[0]), || {
            format!("xor not monotone in d at n={n}")
        })?;
    }
    for text in functions {
        for &d in &ds {
            let f = SparseFourier::parse(text, d).unwrap();
            let s = |n: f64| nonmsp_bound(&f, d, n, None).unwrap().bound;
            let r = |n: f64| robust_bound(&f, &[], d, n, 1.0).unwrap().bound;
            let na = |n: f64| nonadaptive_bound(&f, d, n, None).unwrap().bound;
            for w in ns.windows(2) {
                ensure(s(w[1]) <= s(w[0]) && r(w[1]) <= r(w[0]) && na(w[1]) <= na(w[0]), || {
                    format!("{text} not monotone in n at d={d}")
                })?;
            }
            // empty cut: same bound as the non-MSP formula at the robust δ
            for &n in &ns {
                let rb = robust_bound(&f, &[], d, n, 1.0).unwrap();
                if let Some(delta) = rb.delta.delta() {
                    let var_r = nonmsp_bound(&f, d, n, None).unwrap().derived["var_residual"];
                    ensure((rb.bound - (1.0 - delta) * var_r).abs() <= 1e-12, || {
                        format!("{text}: robust empty cut {} vs {}", rb.bound, (1.0 - delta) * var_r)
                    })?;
                }
            }
        }
    }
    // robust bound with a cut: larger n can only tighten the noise condition
    for d in [20usize, 40, 64] {
        let series: Vec<f64> = ns
            .iter()
            .map(|&n| robust_bound(&g_at(d), &[b1], d, n, 1.0).unwrap().bound)
            .collect();
        ensure(series.windows(2).all(|w| w[1] <= w[0]), || {
            format!("robust cut bound not monotone in n at d={d}")
        })?;
    }
    Ok(format!(
        "regression values match; monotonicity holds on {grid_points}+ grid points"
    ))
}

fn g_at(d: usize) -> SparseFourier {
    SparseFourier::parse("x1*x2 + 0.02*x1", d).unwrap()
}

type Criterion = (&'static str, fn() -> Check, Duration);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("impurity identity", impurity_identity, Duration::from_secs(5)),
        ("fourier suite", fourier_suite, Duration::from_secs(10)),
        ("msp oracle", msp_oracle, Duration::from_secs(30)),
        ("and constants", and_constants, Duration::from_secs(1)),
        ("erm oracle", erm_oracle, Duration::from_secs(60)),
        ("xor hardness", xor_hardness, Duration::from_secs(300)),
        ("msp learnability", msp_learnability, Duration::from_secs(600)),
        ("query-path suite", query_path_suite, Duration::from_secs(300)),
        ("bound regressions", bound_regressions, Duration::from_secs(1)),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(msg) if elapsed > budget => Err(format!("{msg}; exceeded {}s budget", budget.as_secs())),
            other => other,
        };
        match result {
            Ok(msg) => println!("criterion {} {name}: PASS ({:.2}s) {msg}", i + 1, elapsed.as_secs_f64()),
            Err(msg) => {
                failures += 1;
                println!("criterion {} {name}: FAIL ({:.2}s) {msg}", i + 1, elapsed.as_secs_f64());
            }
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
