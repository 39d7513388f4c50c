//! Text and structured-file forms of a [`SparseFourier`].
//!
//! Text grammar: terms joined by `+` (or `-`), each term `coef*x<i>*x<j>...`; a bare
//! `coef` is the constant term and a bare monomial `x1*x2` has coefficient 1.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{SparseFourier, Subset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Silently drop terms whose coefficient is exactly zero instead of rejecting them.
    /// Used after `{alpha}` template substitution.
    pub drop_zero: bool,
}

fn split_terms(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut terms = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let is_sign = c == '+' || c == '-';
        let in_exponent =
            i >= 2 && matches!(chars[i - 1], 'e' | 'E') && (chars[i - 2].is_ascii_digit() || chars[i - 2] == '.');
        if is_sign && !cur.is_empty() && !in_exponent {
            terms.push(std::mem::take(&mut cur));
        }
        if c == '+' && !in_exponent {
            continue;
        }
        cur.push(c);
    }
    if !cur.is_empty() {
        terms.push(cur);
    }
    terms
}

fn parse_term(raw: &str) -> Result<(Subset, f64)> {
    let (negate, body) = match raw.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, raw),
    };
    if body.is_empty() {
        return Err(Error::Parse(format!("empty term in {raw:?}")));
    }
    let mut coef: Option<f64> = None;
    let mut features: Vec<usize> = Vec::new();
    for factor in body.split('*') {
        if let Some(idx) = factor.strip_prefix('x') {
            let k: usize = idx
                .parse()
                .map_err(|_| Error::Parse(format!("bad variable {factor:?}")))?;
            if k == 0 || k > 64 {
                return Err(Error::Parse(format!("variable index {k} outside 1..=64")));
            }
            if features.contains(&k) {
                return Err(Error::Parse(format!("x{k} repeated in term {raw:?}")));
            }
            features.push(k);
        } else {
            if coef.is_some() {
                return Err(Error::Parse(format!("two coefficients in term {raw:?}")));
            }
            let v: f64 = factor
                .parse()
                .map_err(|_| Error::Parse(format!("bad coefficient {factor:?}")))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("non-finite coefficient in {raw:?}")));
            }
            coef = Some(v);
        }
    }
    let mut c = coef.unwrap_or(1.0);
    if negate {
        c = -c;
    }
    Ok((Subset::from_features(&features)?, c))
}

impl SparseFourier {
    /// Parses the text grammar with declared dimension `dim`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        Self::parse_with(text, dim, ParseOptions::default())
    }

    pub fn parse_with(text: &str, dim: usize, opts: ParseOptions) -> Result<Self> {
        let terms = parse_terms(text, opts)?;
        Self::new(dim, terms)
    }
}

fn parse_terms(text: &str, opts: ParseOptions) -> Result<Vec<(Subset, f64)>> {
    let raw = split_terms(text);
    if raw.is_empty() {
        return Err(Error::Parse("empty function".into()));
    }
    let mut terms: Vec<(Subset, f64)> = Vec::new();
    for r in raw {
        let (s, a) = parse_term(&r)?;
        if terms.iter().any(|(t, _)| *t == s) {
            return Err(Error::Parse(format!("duplicate subset {s}")));
        }
        if a == 0.0 {
            // a lone literal "0" denotes the zero function
            if opts.drop_zero || (s.is_empty() && text.trim() == "0") {
                continue;
            }
            return Err(Error::Parse(format!("zero coefficient for subset {s}")));
        }
        terms.push((s, a));
    }
    Ok(terms)
}

impl FromStr for SparseFourier {
    type Err = Error;

    /// Parses with the dimension set to the largest feature index present.
    fn from_str(s: &str) -> Result<Self> {
        let terms = parse_terms(s, ParseOptions::default())?;
        let dim = terms.iter().filter_map(|(s, _)| s.max_feature()).max().unwrap_or(0);
        SparseFourier::new(dim, terms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub subset: Vec<usize>,
    pub coef: f64,
}

/// Structured (JSON/TOML) form: `{ dim, terms: [{subset: [..], coef}] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionFile {
    pub dim: usize,
    pub terms: Vec<TermRecord>,
}

impl TryFrom<&FunctionFile> for SparseFourier {
    type Error = Error;

    fn try_from(file: &FunctionFile) -> Result<Self> {
        let mut terms = Vec::with_capacity(file.terms.len());
        for t in &file.terms {
            let s = Subset::from_features(&t.subset)?;
            if s.len() != t.subset.len() {
                return Err(Error::Parse(format!("repeated feature in subset {:?}", t.subset)));
            }
            if t.coef == 0.0 {
                return Err(Error::Parse(format!("zero coefficient for subset {s}")));
            }
            terms.push((s, t.coef));
        }
        SparseFourier::new(file.dim, terms)
    }
}

impl From<&SparseFourier> for FunctionFile {
    fn from(f: &SparseFourier) -> Self {
        FunctionFile {
            dim: f.dim(),
            terms: f
                .terms()
                .iter()
                .map(|(s, a)| TermRecord {
                    subset: s.features(),
                    coef: *a,
                })
                .collect(),
        }
    }
}
