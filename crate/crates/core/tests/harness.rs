use cubetrees::harness::{sweep_rows, ExperimentConfig, GammaSelection, SweepRow};

const CONFIGS: [(&str, &str); 4] = [
    ("fig1", include_str!("../../../configs/fig1.toml")),
    ("fig1_small", include_str!("../../../configs/fig1_small.toml")),
    ("fig2", include_str!("../../../configs/fig2.toml")),
    ("fig2_small", include_str!("../../../configs/fig2_small.toml")),
];

fn shipped(name: &str) -> ExperimentConfig {
    let text = CONFIGS.iter().find(|(n, _)| *n == name).unwrap().1;
    ExperimentConfig::from_toml(text).unwrap()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let m = v.iter().sum::<f64>() / k;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt())
}

#[test]
fn shipped_configs_validate() {
    for (name, _) in CONFIGS {
        let cfg = shipped(name);
        cfg.validate().unwrap();
        assert_eq!(cfg.id, name);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back.hash(), cfg.hash());
    }
    assert_eq!(shipped("fig1").points().len(), 5 * 5 * 2 * 2);
    assert_eq!(shipped("fig2").points().len(), 5 * 5);
}

#[test]
fn coverage_config_emits_feature_columns() {
    let mut cfg = shipped("fig2_small");
    cfg.replicates = 2;
    cfg.grid.log2n = vec![7];
    cfg.grid.d = vec![10];
    let rows = sweep_rows(&cfg, 1).unwrap();
    let header = SweepRow::header(&cfg.coverage_features);
    for k in 1..=3 {
        assert!(header.contains(&format!("coverage_x{k}")));
    }
    assert!(rows.iter().all(|r| r.coverage.iter().all(|(_, c)| c.is_some())));
}

#[test]
fn xor_is_learned_in_low_dimension() {
    let cfg = ExperimentConfig::from_toml(
        r#"
id = "xor-corner"
function = "x1*x2"
replicates = 20
master_seed = 5

[grid]
d = [10]
log2n = [15]

[estimator]
kind = "cart"

[gamma]
mode = "grid"
"#,
    )
    .unwrap();
    assert!(matches!(cfg.gamma, GammaSelection::Grid { .. }));
    let rows = sweep_rows(&cfg, 0).unwrap();
    let good = rows.iter().filter(|r| r.risk_exact.unwrap() <= 0.05).count();
    assert!(
        good * 10 >= rows.len() * 9,
        "{good} of {} replicates learned",
        rows.len()
    );
}

#[test]
fn irrelevant_coverage_is_bounded() {
    let mut cfg = shipped("fig2_small");
    cfg.replicates = 30;
    cfg.grid.log2n = vec![7, 9];
    let rows = sweep_rows(&cfg, 0).unwrap();
    for p in cfg.points() {
        let x3: Vec<f64> = rows
            .iter()
            .filter(|r| r.point.index == p.index)
            .map(|r| r.coverage.iter().find(|(k, _)| *k == 3).unwrap().1.unwrap())
            .collect();
        let (m, se) = mean_se(&x3);
        let bound = p.log2n as f64 / p.d as f64 + 3.0 * se;
        assert!(m <= bound, "d={} log2n={}: coverage {m} > {bound}", p.d, p.log2n);
    }
}
