//! Axis-aligned binary trees on the hypercube and uniform-average forests.
//!
//! An internal node splitting on `x_k` sends `x_k = -1` left and `x_k = +1` right. Leaf
//! cells have measure `2^-depth`, which makes risk, coverage and path-length quantities
//! exact sums over leaves.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boolcube::{bit, check_dim, dim_mask, Cell, Point};
use crate::error::{Error, Result};
use crate::fourier::{SparseFourier, Subset};
use crate::rng;

pub const TREE_SCHEMA: &str = "cubetrees.tree/1";
pub const FOREST_SCHEMA: &str = "cubetrees.forest/1";
/// Default cap on the number of cells in a forest's common refinement.
pub const DEFAULT_REFINEMENT_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Leaf {
        leaf: f64,
    },
    Split {
        split: usize,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn leaf(value: f64) -> Node {
        Node::Leaf { leaf: value }
    }

    pub fn split(feature: usize, left: Node, right: Node) -> Node {
        Node::Split {
            split: feature,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => 1 + left.count() + right.count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    dim: usize,
    root: Node,
}

/// Leaf with its cell, depth and label.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafInfo {
    pub cell: Cell,
    pub value: f64,
    /// Split features on the root path, in depth order.
    pub path: Vec<usize>,
}

impl LeafInfo {
    pub fn depth(&self) -> usize {
        self.path.len()
    }
}

impl TreeModel {
    /// Validates feature range, that no path repeats a feature, and finite leaf labels.
    pub fn new(dim: usize, root: Node) -> Result<Self> {
        check_dim(dim)?;
        fn walk(node: &Node, dim: usize, used: u64) -> Result<()> {
            match node {
                Node::Leaf { leaf } => {
                    if leaf.is_finite() {
                        Ok(())
                    } else {
                        Err(Error::InvalidArgs("non-finite leaf label".into()))
                    }
                }
                Node::Split { split, left, right } => {
                    let k = *split;
                    if k == 0 || k > dim {
                        return Err(Error::IndexOutOfRange { index: k, dim });
                    }
                    if used & bit(k) != 0 {
                        return Err(Error::FeatureAlreadyFixed(k));
                    }
                    walk(left, dim, used | bit(k))?;
                    walk(right, dim, used | bit(k))
                }
            }
        }
        walk(&root, dim, 0)?;
        let tree = TreeModel { dim, root };
        debug_assert!((tree.leaves().iter().map(|l| l.cell.measure()).sum::<f64>() - 1.0).abs() < 1e-12);
        Ok(tree)
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        Self::new(dim, Node::leaf(value))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn node_count(&self) -> usize {
        self.root.count()
    }

    pub fn leaves(&self) -> Vec<LeafInfo> {
        let mut out = Vec::new();
        fn walk(node: &Node, cell: Cell, path: &mut Vec<usize>, out: &mut Vec<LeafInfo>) {
            match node {
                Node::Leaf { leaf } => out.push(LeafInfo {
                    cell,
                    value: *leaf,
                    path: path.clone(),
                }),
                Node::Split { split, left, right } => {
                    path.push(*split);
                    walk(left, cell.split(*split, -1).expect("validated"), path, out);
                    walk(right, cell.split(*split, 1).expect("validated"), path, out);
                    path.pop();
                }
            }
        }
        walk(
            &self.root,
            Cell::full(self.dim).expect("dim"),
            &mut Vec::new(),
            &mut out,
        );
        out
    }

    pub fn max_depth(&self) -> usize {
        self.leaves().iter().map(|l| l.depth()).max().unwrap_or(0)
    }

    /// `sum_L depth(L) 2^-depth(L)`, the expected query-path length under uniform `X`.
    pub fn expected_path_length(&self) -> f64 {
        self.leaves().iter().map(|l| l.depth() as f64 * l.cell.measure()).sum()
    }

    #[inline]
    pub fn predict_mask(&self, neg: u64) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { leaf } => return *leaf,
                Node::Split { split, left, right } => {
                    node = if neg & bit(*split) != 0 { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &Point) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.predict_mask(x.neg_mask()))
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        if x.dim() != self.dim {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn query_path_mask(&self, neg: u64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut node = &self.root;
        while let Node::Split { split, left, right } = node {
            out.push(*split);
            node = if neg & bit(*split) != 0 { left } else { right };
        }
        out
    }

    /// Split features on the root-to-leaf path of `x`, in depth order.
    pub fn query_path(&self, x: &Point) -> Result<Vec<usize>> {
        self.check_point(x)?;
        Ok(self.query_path_mask(x.neg_mask()))
    }

    /// `P{k in J(X)}` for uniform `X`.
    pub fn coverage(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.dim {
            return Err(Error::IndexOutOfRange {
                index: k,
                dim: self.dim,
            });
        }
        Ok(self
            .leaves()
            .iter()
            .filter(|l| l.path.contains(&k))
            .map(|l| l.cell.measure())
            .sum())
    }

    /// `P{J(X) ∩ S != ∅}` for uniform `X`.
    pub fn selection_probability(&self, features: Subset) -> f64 {
        self.leaves()
            .iter()
            .filter(|l| l.path.iter().any(|k| features.contains(*k)))
            .map(|l| l.cell.measure())
            .sum()
    }

    /// `E (g(X) - f(X))^2` exactly, leaf by leaf through restrictions of `f`.
    pub fn exact_risk(&self, f: &SparseFourier) -> Result<f64> {
        if f.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: f.dim(),
            });
        }
        fn walk(node: &Node, g: &SparseFourier, measure: f64) -> f64 {
            match node {
                Node::Leaf { leaf } => measure * ((leaf - g.mean()).powi(2) + g.variance()),
                Node::Split { split, left, right } => {
                    let m = bit(*split);
                    walk(left, &g.restrict_masks(m, m), measure * 0.5)
                        + walk(right, &g.restrict_masks(m, 0), measure * 0.5)
                }
            }
        }
        Ok(walk(&self.root, f, 1.0))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TreeFile {
            schema: TREE_SCHEMA.into(),
            dim: self.dim,
            root: self.root.clone(),
        })
        .expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TreeFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("tree: {e}")))?;
        if file.schema != TREE_SCHEMA {
            return Err(Error::Parse(format!("unsupported tree schema {:?}", file.schema)));
        }
        TreeModel::new(file.dim, file.root)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeFile {
    schema: String,
    dim: usize,
    root: Node,
}

#[derive(Debug, Serialize, Deserialize)]
struct ForestFile {
    schema: String,
    dim: usize,
    trees: Vec<Node>,
}

/// Uniform average of trees over a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    dim: usize,
    trees: Vec<TreeModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskMethod {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub risk: f64,
    pub method: RiskMethod,
    /// Standard error; `None` for exact evaluation.
    pub se: Option<f64>,
}

impl Forest {
    pub fn new(trees: Vec<TreeModel>) -> Result<Self> {
        let dim = trees
            .first()
            .map(|t| t.dim)
            .ok_or_else(|| Error::InvalidArgs("a forest needs at least one tree".into()))?;
        if let Some(t) = trees.iter().find(|t| t.dim != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: t.dim,
            });
        }
        Ok(Forest { dim, trees })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn predict_mask(&self, neg: u64) -> f64 {
        self.trees.iter().map(|t| t.predict_mask(neg)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Point) -> Result<f64> {
        self.trees[0].check_point(x)?;
        Ok(self.predict_mask(x.neg_mask()))
    }

    /// Exact risk over the common refinement of all leaf partitions.
    pub fn exact_risk(&self, f: &SparseFourier, cap: usize) -> Result<f64> {
        if f.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: f.dim(),
            });
        }
        struct Walk<'a> {
            trees: &'a [TreeModel],
            cells: usize,
            cap: usize,
        }
        impl Walk<'_> {
            // descend tree `t` from `node` inside the cell (fixed, neg)
            fn go(&mut self, t: usize, node: &Node, fixed: u64, neg: u64, g: &SparseFourier, sum: f64) -> Result<f64> {
                match node {
                    Node::Leaf { leaf } => {
                        let sum = sum + leaf;
                        if t + 1 < self.trees.len() {
                            let next = &self.trees[t + 1].root;
                            return self.go(t + 1, next, fixed, neg, g, sum);
                        }
                        self.cells += 1;
                        if self.cells > self.cap {
                            return Err(Error::RefinementCapExceeded { cap: self.cap });
                        }
                        let pred = sum / self.trees.len() as f64;
                        let measure = 0.5f64.powi(fixed.count_ones() as i32);
                        Ok(measure * ((pred - g.mean()).powi(2) + g.variance()))
                    }
                    Node::Split { split, left, right } => {
                        let m = bit(*split);
                        if fixed & m != 0 {
                            let child = if neg & m != 0 { left } else { right };
                            return self.go(t, child, fixed, neg, g, sum);
                        }
                        let gl = g.restrict_masks(m, m);
                        let gr = g.restrict_masks(m, 0);
                        Ok(self.go(t, left, fixed | m, neg | m, &gl, sum)?
                            + self.go(t, right, fixed | m, neg, &gr, sum)?)
                    }
                }
            }
        }
        let mut w = Walk {
            trees: &self.trees,
            cells: 0,
            cap,
        };
        w.go(0, &self.trees[0].root, 0, 0, f, 0.0)
    }

    /// Monte-Carlo risk with its standard error.
    pub fn mc_risk(&self, f: &SparseFourier, samples: usize, seed: u64) -> Result<RiskReport> {
        if f.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: f.dim(),
            });
        }
        Ok(mc_risk_of(|m| self.predict_mask(m), f, self.dim, samples, seed))
    }

    /// Exact risk when the refinement fits under `cap`, otherwise a Monte-Carlo estimate.
    pub fn risk_report(&self, f: &SparseFourier, cap: usize, samples: usize, seed: u64) -> Result<RiskReport> {
        match self.exact_risk(f, cap) {
            Ok(risk) => Ok(RiskReport {
                risk,
                method: RiskMethod::Exact,
                se: None,
            }),
            Err(Error::RefinementCapExceeded { .. }) => self.mc_risk(f, samples, seed),
            Err(e) => Err(e),
        }
    }

    pub fn coverage(&self, k: usize) -> Result<f64> {
        let mut total = 0.0;
        for t in &self.trees {
            total += t.coverage(k)?;
        }
        Ok(total / self.trees.len() as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ForestFile {
            schema: FOREST_SCHEMA.into(),
            dim: self.dim,
            trees: self.trees.iter().map(|t| t.root.clone()).collect(),
        })
        .expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ForestFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("forest: {e}")))?;
        if file.schema != FOREST_SCHEMA {
            return Err(Error::Parse(format!("unsupported forest schema {:?}", file.schema)));
        }
        let trees = file
            .trees
            .into_iter()
            .map(|root| TreeModel::new(file.dim, root))
            .collect::<Result<Vec<_>>>()?;
        Forest::new(trees)
    }
}

pub(crate) fn mc_risk_of(
    predict: impl Fn(u64) -> f64,
    f: &SparseFourier,
    dim: usize,
    samples: usize,
    seed: u64,
) -> RiskReport {
    let mut r = rng::stream(seed, "mc-risk", 0);
    let mask = dim_mask(dim);
    let (mut s, mut ss) = (0.0, 0.0);
    for _ in 0..samples {
        let x = r.random::<u64>() & mask;
        let e = (predict(x) - f.eval_mask(x)).powi(2);
        s += e;
        ss += e * e;
    }
    let n = samples as f64;
    let mean = s / n;
    let var = ((ss / n - mean * mean) * n / (n - 1.0)).max(0.0);
    RiskReport {
        risk: mean,
        method: RiskMethod::Mc,
        se: Some((var / n).sqrt()),
    }
}

/// Either a single tree or a forest.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Tree(TreeModel),
    Forest(Forest),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Tree(t) => t.dim(),
            Model::Forest(f) => f.dim(),
        }
    }

    pub fn predict_mask(&self, neg: u64) -> f64 {
        match self {
            Model::Tree(t) => t.predict_mask(neg),
            Model::Forest(f) => f.predict_mask(neg),
        }
    }

    pub fn predict(&self, x: &Point) -> Result<f64> {
        match self {
            Model::Tree(t) => t.predict(x),
            Model::Forest(f) => f.predict(x),
        }
    }

    pub fn risk_report(&self, f: &SparseFourier, seed: u64) -> Result<RiskReport> {
        match self {
            Model::Tree(t) => Ok(RiskReport {
                risk: t.exact_risk(f)?,
                method: RiskMethod::Exact,
                se: None,
            }),
            Model::Forest(forest) => forest.risk_report(f, DEFAULT_REFINEMENT_CAP, 200_000, seed),
        }
    }

    fn trees(&self) -> &[TreeModel] {
        match self {
            Model::Tree(t) => std::slice::from_ref(t),
            Model::Forest(f) => f.trees(),
        }
    }

    /// Mean over trees of the expected query-path length.
    pub fn mean_depth(&self) -> f64 {
        let t = self.trees();
        t.iter().map(|t| t.expected_path_length()).sum::<f64>() / t.len() as f64
    }

    pub fn node_count(&self) -> usize {
        self.trees().iter().map(|t| t.node_count()).sum()
    }

    /// Mean over trees of `coverage(k)`.
    pub fn coverage(&self, k: usize) -> Result<f64> {
        let t = self.trees();
        let mut total = 0.0;
        for tree in t {
            total += tree.coverage(k)?;
        }
        Ok(total / t.len() as f64)
    }

    pub fn selection_probability(&self, features: Subset) -> f64 {
        let t = self.trees();
        t.iter().map(|t| t.selection_probability(features)).sum::<f64>() / t.len() as f64
    }

    pub fn to_json(&self) -> String {
        match self {
            Model::Tree(t) => t.to_json(),
            Model::Forest(f) => f.to_json(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_tree(dim: usize) -> TreeModel {
        // x1 = -1 left; leaves carry x1*x2
        TreeModel::new(
            dim,
            Node::split(
                1,
                Node::split(2, Node::leaf(1.0), Node::leaf(-1.0)),
                Node::split(2, Node::leaf(-1.0), Node::leaf(1.0)),
            ),
        )
        .unwrap()
    }

    fn f(text: &str, dim: usize) -> SparseFourier {
        SparseFourier::parse(text, dim).unwrap()
    }

    #[test]
    fn predict_examples() {
        let c = TreeModel::constant(3, 2.5).unwrap();
        for p in Cell::full(3).unwrap().points() {
            assert_eq!(c.predict(&p).unwrap(), 2.5);
        }
        let t = xor_tree(4);
        let zero = TreeModel::constant(4, 0.0).unwrap();
        let forest = Forest::new(vec![t.clone(), zero]).unwrap();
        for p in Cell::full(4).unwrap().points() {
            let x1x2 = f64::from(p.get(1) * p.get(2));
            assert_eq!(t.predict(&p).unwrap(), x1x2);
            assert_eq!(forest.predict(&p).unwrap(), x1x2 / 2.0);
        }
        assert!(t.predict(&Point::new(&[1, 1]).unwrap()).is_err());
    }

    #[test]
    fn validation_rejects_repeated_feature() {
        let bad = Node::split(1, Node::split(1, Node::leaf(0.0), Node::leaf(0.0)), Node::leaf(0.0));
        assert_eq!(TreeModel::new(3, bad), Err(Error::FeatureAlreadyFixed(1)));
        let oob = Node::split(4, Node::leaf(0.0), Node::leaf(0.0));
        assert!(TreeModel::new(3, oob).is_err());
    }

    #[test]
    fn risk_examples() {
        let xor = f("x1*x2", 4);
        assert_eq!(TreeModel::constant(4, 0.0).unwrap().exact_risk(&xor).unwrap(), 1.0);
        let one_split = TreeModel::new(4, Node::split(1, Node::leaf(0.0), Node::leaf(0.0))).unwrap();
        assert_eq!(one_split.exact_risk(&xor).unwrap(), 1.0);
        assert_eq!(xor_tree(4).exact_risk(&xor).unwrap(), 0.0);
        // constant offset: (0.5 - 0)^2 + 1
        assert_eq!(TreeModel::constant(4, 0.5).unwrap().exact_risk(&xor).unwrap(), 1.25);
    }

    #[test]
    fn query_path_examples() {
        let leaf = TreeModel::constant(6, 0.0).unwrap();
        assert!(leaf.query_path(&Point::all_ones(6).unwrap()).unwrap().is_empty());
        for p in Cell::full(3).unwrap().points() {
            assert_eq!(xor_tree(3).query_path(&p).unwrap(), vec![1, 2]);
        }
        let t = TreeModel::new(
            6,
            Node::split(3, Node::leaf(0.0), Node::split(5, Node::leaf(0.0), Node::leaf(1.0))),
        )
        .unwrap();
        let x = Point::new(&[-1, 1, 1, -1, 1, 1]).unwrap();
        assert_eq!(t.query_path(&x).unwrap(), vec![3, 5]);
    }

    #[test]
    fn coverage_examples() {
        let t = TreeModel::new(
            4,
            Node::split(1, Node::leaf(0.0), Node::split(2, Node::leaf(0.0), Node::leaf(1.0))),
        )
        .unwrap();
        assert_eq!(t.coverage(1).unwrap(), 1.0);
        assert_eq!(t.coverage(2).unwrap(), 0.5);
        assert_eq!(t.coverage(3).unwrap(), 0.0);
        assert!(t.coverage(5).is_err());
        let leaf = TreeModel::constant(4, 1.0).unwrap();
        for k in 1..=4 {
            assert_eq!(leaf.coverage(k).unwrap(), 0.0);
        }
        let total: f64 = (1..=4).map(|k| t.coverage(k).unwrap()).sum();
        assert_eq!(total, t.expected_path_length());
    }

    #[test]
    fn coverage_matches_query_path_frequency() {
        let t = TreeModel::new(
            8,
            Node::split(
                3,
                Node::split(1, Node::leaf(0.0), Node::split(7, Node::leaf(0.0), Node::leaf(1.0))),
                Node::split(7, Node::leaf(0.0), Node::leaf(1.0)),
            ),
        )
        .unwrap();
        let n = 100_000;
        let mut r = rng::stream(1, "cov", 0);
        let mut hits = 0usize;
        for _ in 0..n {
            let x = r.random::<u64>() & 0xff;
            if t.query_path_mask(x).contains(&7) {
                hits += 1;
            }
        }
        let p = t.coverage(7).unwrap();
        assert_eq!(p, 0.75);
        let freq = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * se, "freq {freq} vs {p}");
    }

    #[test]
    fn forest_refinement_risk() {
        let g = f("x1*x2 + 0.3*x3", 5);
        let a = xor_tree(5);
        let b = TreeModel::new(5, Node::split(3, Node::leaf(-0.3), Node::leaf(0.3))).unwrap();
        let forest = Forest::new(vec![a, b]).unwrap();
        // brute force over all 32 points
        let brute: f64 = Cell::full(5)
            .unwrap()
            .points()
            .map(|p| (forest.predict(&p).unwrap() - g.eval(&p).unwrap()).powi(2))
            .sum::<f64>()
            / 32.0;
        let exact = forest.exact_risk(&g, 1 << 20).unwrap();
        assert!((exact - brute).abs() < 1e-14);
        assert_eq!(forest.exact_risk(&g, 3), Err(Error::RefinementCapExceeded { cap: 3 }));
        let rep = forest.risk_report(&g, 3, 50_000, 4).unwrap();
        assert_eq!(rep.method, RiskMethod::Mc);
        assert!((rep.risk - brute).abs() < 4.0 * rep.se.unwrap() + 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let t = xor_tree(3);
        let text = t.to_json();
        assert!(text.contains(TREE_SCHEMA));
        assert_eq!(TreeModel::from_json(&text).unwrap(), t);
        let forest = Forest::new(vec![t.clone(), TreeModel::constant(3, 0.25).unwrap()]).unwrap();
        assert_eq!(Forest::from_json(&forest.to_json()).unwrap(), forest);
        assert!(TreeModel::from_json(&text.replace("tree/1", "tree/9")).is_err());
    }

    #[test]
    fn golden_tree_format() {
        let t = TreeModel::new(2, Node::split(2, Node::leaf(-0.5), Node::leaf(1.0))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "schema": "cubetrees.tree/1",
                "dim": 2,
                "root": {"split": 2, "left": {"leaf": -0.5}, "right": {"leaf": 1.0}}
            })
        );
    }
}
