//! Points, cells (subcubes) and datasets on the hypercube `{-1,+1}^d`.
//!
//! A point is stored as a sign mask: bit `k-1` is set iff `x_k = -1`. With `d <= 64`
//! a whole covariate row fits one word, and a split scan over a node is a linear pass
//! testing one bit per row.

use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::SparseFourier;
use crate::rng;

pub const MAX_DIM: usize = 64;

#[inline]
pub(crate) fn dim_mask(d: usize) -> u64 {
    if d >= 64 {
        u64::MAX
    } else {
        (1u64 << d) - 1
    }
}

#[inline]
pub(crate) fn bit(k: usize) -> u64 {
    1u64 << (k - 1)
}

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        Err(Error::UnsupportedDimension(d))
    } else {
        Ok(())
    }
}

fn check_index(k: usize, d: usize) -> Result<()> {
    if k == 0 || k > d {
        Err(Error::IndexOutOfRange { index: k, dim: d })
    } else {
        Ok(())
    }
}

/// A vertex of `{-1,+1}^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Point {
    dim: usize,
    neg: u64,
}

impl Point {
    pub fn new(coords: &[i8]) -> Result<Self> {
        check_dim(coords.len())?;
        let mut neg = 0u64;
        for (j, &c) in coords.iter().enumerate() {
            match c {
                1 => {}
                -1 => neg |= 1 << j,
                other => return Err(Error::InvalidSign(other.into())),
            }
        }
        Ok(Point { dim: coords.len(), neg })
    }

    pub fn from_mask(dim: usize, neg: u64) -> Result<Self> {
        check_dim(dim)?;
        Ok(Point {
            dim,
            neg: neg & dim_mask(dim),
        })
    }

    pub fn all_ones(dim: usize) -> Result<Self> {
        Self::from_mask(dim, 0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bit `k-1` set iff `x_k = -1`.
    pub fn neg_mask(&self) -> u64 {
        self.neg
    }

    /// Coordinate `x_k` for 1-based `k`.
    pub fn get(&self, k: usize) -> i8 {
        if self.neg & bit(k) != 0 {
            -1
        } else {
            1
        }
    }

    pub fn coords(&self) -> Vec<i8> {
        (1..=self.dim).map(|k| self.get(k)).collect()
    }
}

/// The subcube of points agreeing with a set of fixed coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    dim: usize,
    fixed: u64,
    neg: u64,
}

impl Cell {
    pub fn full(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Cell { dim, fixed: 0, neg: 0 })
    }

    /// Builds a cell from `(feature, sign)` pairs with 1-based features.
    pub fn from_constraints(dim: usize, constraints: &[(usize, i8)]) -> Result<Self> {
        let mut cell = Cell::full(dim)?;
        for &(k, z) in constraints {
            cell = cell.split(k, z)?;
        }
        Ok(cell)
    }

    #[cfg(test)]
    pub(crate) fn from_masks(dim: usize, fixed: u64, neg: u64) -> Self {
        Cell {
            dim,
            fixed,
            neg: neg & fixed,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fixed_mask(&self) -> u64 {
        self.fixed
    }

    pub fn neg_mask(&self) -> u64 {
        self.neg
    }

    /// Number of fixed coordinates `|J(C)|`.
    pub fn depth(&self) -> usize {
        self.fixed.count_ones() as usize
    }

    /// Fraction of the cube covered, `2^-|J(C)|`.
    pub fn measure(&self) -> f64 {
        0.5f64.powi(self.depth() as i32)
    }

    pub fn is_fixed(&self, k: usize) -> bool {
        k >= 1 && k <= self.dim && self.fixed & bit(k) != 0
    }

    pub fn sign_of(&self, k: usize) -> Option<i8> {
        if !self.is_fixed(k) {
            None
        } else if self.neg & bit(k) != 0 {
            Some(-1)
        } else {
            Some(1)
        }
    }

    /// Sorted `(feature, sign)` pairs.
    pub fn constraints(&self) -> Vec<(usize, i8)> {
        (1..=self.dim).filter_map(|k| self.sign_of(k).map(|z| (k, z))).collect()
    }

    pub fn split(&self, k: usize, z: i8) -> Result<Cell> {
        check_index(k, self.dim)?;
        if z != 1 && z != -1 {
            return Err(Error::InvalidSign(z.into()));
        }
        if self.fixed & bit(k) != 0 {
            return Err(Error::FeatureAlreadyFixed(k));
        }
        let neg = if z < 0 { self.neg | bit(k) } else { self.neg };
        Ok(Cell {
            dim: self.dim,
            fixed: self.fixed | bit(k),
            neg,
        })
    }

    #[inline]
    pub fn contains_mask(&self, point_neg: u64) -> bool {
        (point_neg ^ self.neg) & self.fixed == 0
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.dim == self.dim && self.contains_mask(x.neg)
    }

    /// All points of the cell; only sensible for small free dimension.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        let free: Vec<u64> = (1..=self.dim).filter(|&k| self.fixed & bit(k) == 0).map(bit).collect();
        assert!(free.len() < 32, "cell has too many free coordinates to enumerate");
        (0u64..(1u64 << free.len())).map(move |code| {
            let mut neg = self.neg;
            for (b, m) in free.iter().enumerate() {
                if code & (1 << b) != 0 {
                    neg |= m;
                }
            }
            Point { dim: self.dim, neg }
        })
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .constraints()
            .iter()
            .map(|(k, z)| format!("x{k}={}", if *z > 0 { "+1" } else { "-1" }))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Free-function form of [`Cell::split`].
pub fn split_cell(cell: &Cell, k: usize, z: i8) -> Result<Cell> {
    cell.split(k, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseModel {
    None,
    Gaussian { sigma: f64 },
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgs(format!("noise sigma must be >= 0, got {sigma}")));
        }
        if sigma == 0.0 {
            Ok(NoiseModel::None)
        } else {
            Ok(NoiseModel::Gaussian { sigma })
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { sigma } => *sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub function_hash: String,
    pub sigma: f64,
    pub seed: u64,
}

/// `n` covariate rows on `{-1,+1}^d` with real responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    rows: Vec<u64>,
    responses: Vec<f64>,
    provenance: Option<Provenance>,
}

impl Dataset {
    /// Rows are sign masks (bit `k-1` set iff `x_k = -1`).
    pub fn from_masks(d: usize, rows: Vec<u64>, responses: Vec<f64>) -> Result<Self> {
        check_dim(d)?;
        if rows.len() != responses.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: responses.len(),
            });
        }
        if let Some(i) = responses.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFiniteResponse(i));
        }
        let mask = dim_mask(d);
        let rows = rows.into_iter().map(|r| r & mask).collect();
        Ok(Dataset {
            d,
            rows,
            responses,
            provenance: None,
        })
    }

    pub fn from_points(points: &[Point], responses: Vec<f64>) -> Result<Self> {
        let d = points.first().map(|p| p.dim).unwrap_or(1);
        if let Some(p) = points.iter().find(|p| p.dim != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.dim,
            });
        }
        Self::from_masks(d, points.iter().map(|p| p.neg).collect(), responses)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn point(&self, i: usize) -> Point {
        Point {
            dim: self.d,
            neg: self.rows[i],
        }
    }

    /// Covariate `X_{ik}` for 1-based `k`.
    pub fn x(&self, i: usize, k: usize) -> i8 {
        if self.rows[i] & bit(k) != 0 {
            -1
        } else {
            1
        }
    }

    pub fn mean(&self) -> Option<f64> {
        mean(&self.responses)
    }

    /// Rows selected by `indices`, in that order (repeats allowed).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            d: self.d,
            rows: indices.iter().map(|&i| self.rows[i]).collect(),
            responses: indices.iter().map(|&i| self.responses[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Same covariates with replaced responses.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Dataset> {
        let mut out = Self::from_masks(self.d, self.rows.clone(), responses)?;
        out.provenance = None;
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.d).map(|k| format!("x{k}")).collect();
        writeln!(w, "{},y", header.join(","))?;
        let mut line = String::new();
        for (i, y) in self.responses.iter().enumerate() {
            line.clear();
            for k in 1..=self.d {
                line.push_str(if self.x(i, k) < 0 { "-1," } else { "1," });
            }
            line.push_str(&crate::fmt::g17(*y));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Dataset> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let d = cols.len().saturating_sub(1);
        check_dim(d)?;
        for (j, c) in cols[..d].iter().enumerate() {
            if *c != format!("x{}", j + 1) {
                return Err(Error::Parse(format!("unexpected header column {c:?}")));
            }
        }
        if cols[d] != "y" {
            return Err(Error::Parse("last header column must be y".into()));
        }
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != d + 1 {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 1,
                    fields.len(),
                    d + 1
                )));
            }
            let mut neg = 0u64;
            for (j, f) in fields[..d].iter().enumerate() {
                match *f {
                    "1" => {}
                    "-1" => neg |= 1 << j,
                    other => return Err(Error::Parse(format!("row {}: invalid sign {other:?}", lineno + 1))),
                }
            }
            let y: f64 = fields[d]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad response", lineno + 1)))?;
            rows.push(neg);
            ys.push(y);
        }
        Dataset::from_masks(d, rows, ys)
    }
}

pub(crate) fn mean(ys: &[f64]) -> Option<f64> {
    if ys.is_empty() {
        None
    } else {
        Some(ys.iter().sum::<f64>() / ys.len() as f64)
    }
}

/// Members of a cell within a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMembers {
    pub indices: Vec<usize>,
    /// Mean response; `None` for an empty cell.
    pub mean: Option<f64>,
}

impl CellMembers {
    pub fn count(&self) -> usize {
        self.indices.len()
    }
}

pub fn cell_members(cell: &Cell, data: &Dataset) -> Result<CellMembers> {
    if cell.dim != data.d {
        return Err(Error::DimensionMismatch {
            expected: data.d,
            got: cell.dim,
        });
    }
    let indices: Vec<usize> = data
        .rows
        .iter()
        .enumerate()
        .filter(|(_, &r)| cell.contains_mask(r))
        .map(|(i, _)| i)
        .collect();
    let mean = if indices.is_empty() {
        None
    } else {
        Some(indices.iter().map(|&i| data.responses[i]).sum::<f64>() / indices.len() as f64)
    };
    Ok(CellMembers { indices, mean })
}

/// Draws `n` uniform covariate rows and responses `f(X_i) + noise`.
///
/// Covariates and noise come from separate streams derived from `seed`.
pub fn sample_dataset(f: &SparseFourier, d: usize, n: usize, noise: NoiseModel, seed: u64) -> Result<Dataset> {
    check_dim(d)?;
    if let Some(max_feature) = f.max_feature() {
        if max_feature > d {
            return Err(Error::SupportExceedsDimension { max_feature, dim: d });
        }
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mask = dim_mask(d);
    let mut xrng = rng::stream(seed, "covariates", 0);
    let rows: Vec<u64> = (0..n).map(|_| xrng.random::<u64>() & mask).collect();
    let mut responses: Vec<f64> = rows.iter().map(|&r| f.eval_mask(r)).collect();
    if let NoiseModel::Gaussian { sigma } = noise {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgs(format!("noise: {e}")))?;
        let mut erng = rng::stream(seed, "noise", 0);
        for y in responses.iter_mut() {
            *y += normal.sample(&mut erng);
        }
    }
    let mut data = Dataset::from_masks(d, rows, responses)?;
    data.provenance = Some(Provenance {
        function_hash: f.hash(),
        sigma: noise.sigma(),
        seed,
    });
    Ok(data)
}
