//! Majorization ordering on finite real vectors, and the permutation
//! machinery used to relate two schedules of the same busy cycle.
//!
//! All indices are 0-based. A vector `x` is majorized by `y` (`x ≺ y`) when
//! both have the same total and, for every `m < n`, the sum of the `m`
//! largest entries of `x` is at most the sum of the `m` largest entries of
//! `y`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance used when comparing floating-point sums.
pub const DEFAULT_SUM_TOLERANCE: f64 = 1e-9;

/// A bijection on `{0, .., n-1}`, stored as its image sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &m in &mapping {
            if m >= mapping.len() || seen[m] {
                return Err(Error::Domain(format!("{mapping:?} is not a permutation")));
            }
            seen[m] = true;
        }
        Ok(Permutation(mapping))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// The transposition exchanging `i` and `j` on `{0, .., n-1}`.
    pub fn transposition(n: usize, i: usize, j: usize) -> Result<Self> {
        if i >= n || j >= n {
            return Err(Error::Domain(format!(
                "swap({i},{j}) out of range for n={n}"
            )));
        }
        let mut p = Self::identity(n);
        p.0.swap(i, j);
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &m)| i == m)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &m) in self.0.iter().enumerate() {
            inv[m] = i;
        }
        Permutation(inv)
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        check_len(self.len(), other.len())?;
        Ok(Permutation(other.0.iter().map(|&i| self.0[i]).collect()))
    }

    /// `out[i] = x[self(i)]`.
    pub fn apply<T: Copy>(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.len(), x.len())?;
        Ok(self.0.iter().map(|&i| x[i]).collect())
    }

    /// If this permutation exchanges exactly one pair, returns it as `(i, j)`
    /// with `i < j`.
    pub fn as_transposition(&self) -> Option<(usize, usize)> {
        let moved: Vec<usize> = (0..self.len()).filter(|&i| self.0[i] != i).collect();
        match moved.as_slice() {
            &[i, j] if self.0[i] == j && self.0[j] == i => Some((i, j)),
            _ => None,
        }
    }
}

impl std::ops::Index<usize> for Permutation {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, m) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, ")")
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

fn check_vector(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Domain("empty vector".into()));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite entry {v}")));
    }
    Ok(())
}

/// Ascending version of `x` together with the permutation `α` such that
/// `sorted[i] = x[α(i)]`. Ties keep their original index order.
pub fn sort_with_permutation(x: &[f64]) -> Result<(Vec<f64>, Permutation)> {
    check_vector(x)?;
    let mut idx: Vec<usize> = (0..x.len()).collect();
    // sort_by is stable; entries are finite so partial_cmp never fails
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let sorted = idx.iter().map(|&i| x[i]).collect();
    Ok((sorted, Permutation(idx)))
}

/// Returns `true` iff `x ≺ y`.
///
/// Sums are compared with slack `sum_tolerance * max(1, |Σy|)`; pass `0.0`
/// for exact comparison of integer-valued inputs.
pub fn majorizes(x: &[f64], y: &[f64], sum_tolerance: f64) -> Result<bool> {
    check_len(x.len(), y.len())?;
    check_vector(x)?;
    check_vector(y)?;
    if !(sum_tolerance >= 0.0) {
        return Err(Error::Domain(format!("negative tolerance {sum_tolerance}")));
    }
    let desc = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        s
    };
    let (xs, ys) = (desc(x), desc(y));
    let total_y: f64 = ys.iter().sum();
    let slack = sum_tolerance * total_y.abs().max(1.0);

    let (mut px, mut py) = (0.0, 0.0);
    for (k, (a, b)) in xs.iter().zip(&ys).enumerate() {
        px += a;
        py += b;
        if k + 1 < xs.len() && px > py + slack {
            return Ok(false);
        }
    }
    let total_x: f64 = xs.iter().sum();
    Ok((total_x - total_y).abs() <= slack)
}

/// `true` iff `g` exchanges exactly one pair `i < j` with `x[i] > x[j]`.
pub fn is_reordering_transposition(g: &Permutation, x: &[f64]) -> Result<bool> {
    check_len(g.len(), x.len())?;
    Ok(matches!(g.as_transposition(), Some((i, j)) if x[i] > x[j]))
}

pub fn apply_permutation(g: &Permutation, x: &[f64]) -> Result<Vec<f64>> {
    g.apply(x)
}

/// Writes `g` as a sequence of reordering transpositions of `v`.
///
/// Positions are scanned in ascending order. Whenever the permutation built
/// so far disagrees with `g` at position `i`, the entry that `g` wants there
/// sits at some `j > i`; that pair is exchanged, which is only allowed when
/// the current values at `i` and `j` are inverted. Applying the returned
/// transpositions one after the other to `v` yields `g` applied to `v`.
pub fn decompose_into_reorderings(g: &Permutation, v: &[f64]) -> Result<Vec<Permutation>> {
    check_len(g.len(), v.len())?;
    let n = g.len();
    // current = v ∘ p; where[k] locates original index k inside p
    let mut p: Vec<usize> = (0..n).collect();
    let mut where_is: Vec<usize> = (0..n).collect();
    let mut current = v.to_vec();
    let mut steps = Vec::new();

    for i in 0..n {
        if p[i] == g[i] {
            continue;
        }
        let j = where_is[g[i]];
        debug_assert!(j > i);
        if !(current[i] > current[j]) {
            return Err(Error::NotDecomposable {
                position: i,
                current,
            });
        }
        steps.push(Permutation::transposition(n, i, j)?);
        current.swap(i, j);
        p.swap(i, j);
        where_is[p[i]] = i;
        where_is[p[j]] = j;
    }
    Ok(steps)
}

/// Built-in convex functions `g`, evaluated coordinatewise as `F(x) = Σ g(x_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ConvexFn {
    /// `t⁻ = max(-t, 0)`; on residual patience this is the lateness.
    NegativePart,
    Square,
    Abs,
    /// `max(t - c, 0)`.
    Hinge(f64),
    /// `t`
    Linear,
    /// `-t`
    NegLinear,
}

impl ConvexFn {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            ConvexFn::NegativePart => (-t).max(0.0),
            ConvexFn::Square => t * t,
            ConvexFn::Abs => t.abs(),
            ConvexFn::Hinge(c) => (t - c).max(0.0),
            ConvexFn::Linear => t,
            ConvexFn::NegLinear => -t,
        }
    }

    pub fn sum(self, x: &[f64]) -> f64 {
        x.iter().map(|&t| self.eval(t)).sum()
    }

    /// `{t⁻, t², |t|, max(t,0), max(t-1,0), t, -t}`.
    pub fn default_family() -> Vec<ConvexFn> {
        vec![
            ConvexFn::NegativePart,
            ConvexFn::Square,
            ConvexFn::Abs,
            ConvexFn::Hinge(0.0),
            ConvexFn::Hinge(1.0),
            ConvexFn::Linear,
            ConvexFn::NegLinear,
        ]
    }
}

impl fmt::Display for ConvexFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvexFn::NegativePart => write!(f, "lateness"),
            ConvexFn::Square => write!(f, "square"),
            ConvexFn::Abs => write!(f, "abs"),
            ConvexFn::Hinge(c) => write!(f, "hinge:{c}"),
            ConvexFn::Linear => write!(f, "linear"),
            ConvexFn::NegLinear => write!(f, "neglinear"),
        }
    }
}

impl FromStr for ConvexFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "lateness" | "negpart" | "t-" => ConvexFn::NegativePart,
            "square" | "t2" => ConvexFn::Square,
            "abs" => ConvexFn::Abs,
            "linear" | "t" => ConvexFn::Linear,
            "neglinear" | "-t" => ConvexFn::NegLinear,
            _ => match s.strip_prefix("hinge:") {
                Some(c) => match c.parse::<f64>() {
                    Ok(c) if c.is_finite() => ConvexFn::Hinge(c),
                    _ => return Err(Error::UnknownFunction(s.to_string())),
                },
                None => return Err(Error::UnknownFunction(s.to_string())),
            },
        })
    }
}

impl TryFrom<String> for ConvexFn {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ConvexFn> for String {
    fn from(g: ConvexFn) -> Self {
        g.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceEntry {
    pub g: ConvexFn,
    pub fx: f64,
    pub fy: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceReport {
    pub entries: Vec<DominanceEntry>,
}

impl DominanceReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// Evaluates `F(x) ≤ F(y)` for `F(x) = Σ g(x_i)` and every `g` in `family`,
/// with relative slack 1e-9.
pub fn convex_dominance_check(
    x: &[f64],
    y: &[f64],
    family: &[ConvexFn],
) -> Result<DominanceReport> {
    check_len(x.len(), y.len())?;
    let entries = family
        .iter()
        .map(|&g| {
            let (fx, fy) = (g.sum(x), g.sum(y));
            let pass = fx <= fy + DEFAULT_SUM_TOLERANCE * fy.abs().max(1.0);
            DominanceEntry { g, fx, fy, pass }
        })
        .collect();
    Ok(DominanceReport { entries })
}
