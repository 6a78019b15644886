//! Sample mean, Pearson correlation, the tie-averaging rank function and the
//! rank-based Spearman and quadrant coefficients.
//!
//! The rank function is built literally from its helper definitions:
//!
//! ```text
//! rank(a, A)     = avg(index_set(a, sort(A)))
//! index_set(a,B) = { j in 1..=|B| : B_j == a }
//! ```
//!
//! [`ranks`] is the vectorised form used on hot paths; it agrees with
//! [`rank`] element by element. Equality is exact floating-point equality.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

/// Largest overshoot past ±1 that is silently clamped, in units of f64 ulp at 1.0.
const CLAMP_ULPS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("series lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("value {0} does not occur in the series")]
    ElementAbsent(f64),
    #[error("correlation {0} lies outside [-1, 1] beyond rounding tolerance")]
    OutOfRange(f64),
}

/// Why a coefficient could not be computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Undefined {
    ZeroVarianceLeft,
    ZeroVarianceRight,
    /// Quadrant only: every sign product vanished.
    AllSignsZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationValue {
    Defined(f64),
    Undefined(Undefined),
}

impl CorrelationValue {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Defined(v) => Some(v),
            Self::Undefined(_) => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Self::Defined(_))
    }
}

/// Ranks of a series, one per element, in the original element order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector(Vec<f64>);

impl RankVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for RankVector {
    fn from(ranks: Vec<f64>) -> Self {
        Self(ranks)
    }
}

impl FromIterator<f64> for RankVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl AsRef<[f64]> for RankVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Sample mean. An empty slice yields NaN.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    // Inputs are finite; NaN would be a caller bug.
    a.partial_cmp(b).expect("series values must not be NaN")
}

/// Nondecreasing permutation of the input.
pub fn sort(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    out.sort_by(cmp_f64);
    out
}

/// Number of elements exactly equal to `a`.
pub fn count(a: f64, values: &[f64]) -> usize {
    values.iter().filter(|&&v| v == a).count()
}

/// One-based positions `j` with `sorted[j-1] == a`.
///
/// `sorted` must already be sorted; the result is empty when `a` is absent.
pub fn index_set(a: f64, sorted: &[f64]) -> BTreeSet<usize> {
    sorted
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == a)
        .map(|(j, _)| j + 1)
        .collect()
}

fn avg(positions: &BTreeSet<usize>) -> Option<f64> {
    if positions.is_empty() {
        return None;
    }
    let total: usize = positions.iter().sum();
    Some(total as f64 / positions.len() as f64)
}

/// Rank of `a` within `values`: the average of its tied positions in sorted order.
pub fn rank(a: f64, values: &[f64]) -> Result<f64, StatsError> {
    avg(&index_set(a, &sort(values))).ok_or(StatsError::ElementAbsent(a))
}

/// Rank of every element, ties averaged.
pub fn ranks(values: &[f64]) -> RankVector {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| cmp_f64(&values[i], &values[j]));

    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let v = values[order[start]];
        let mut end = start + 1;
        while end < n && values[order[end]] == v {
            end += 1;
        }
        // positions start+1 ..= end; their sum over their count
        let sum = (start + 1 + end) * (end - start) / 2;
        let r = sum as f64 / (end - start) as f64;
        for &idx in &order[start..end] {
            out[idx] = r;
        }
        start = end;
    }
    RankVector(out)
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<usize, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(StatsError::TooShort(a.len()));
    }
    Ok(a.len())
}

/// Clamp a computed coefficient into [-1, 1], tolerating a few ulp of overshoot.
pub(crate) fn clamp_unit(r: f64) -> Result<f64, StatsError> {
    let limit = 1.0 + CLAMP_ULPS * f64::EPSILON;
    if !r.is_finite() || r.abs() > limit {
        return Err(StatsError::OutOfRange(r));
    }
    Ok(r.clamp(-1.0, 1.0))
}

/// Pearson correlation from pre-centred series and their sums of squares.
///
/// The engine uses this to centre each ideal once instead of once per voxel.
pub(crate) fn pearson_centered(
    ca: &[f64],
    ssa: f64,
    cb: &[f64],
    ssb: f64,
) -> Result<CorrelationValue, StatsError> {
    if ssa == 0.0 {
        return Ok(CorrelationValue::Undefined(Undefined::ZeroVarianceLeft));
    }
    if ssb == 0.0 {
        return Ok(CorrelationValue::Undefined(Undefined::ZeroVarianceRight));
    }
    let cross: f64 = ca.iter().zip(cb).map(|(x, y)| x * y).sum();
    let r = cross / (ssa * ssb).sqrt();
    clamp_unit(r).map(CorrelationValue::Defined)
}

/// Mean-centred copy of `values` and its centred sum of squares.
///
/// A constant series reports a sum of squares of exactly zero; the rounded
/// mean of a constant need not equal the constant itself.
pub(crate) fn center(values: &[f64]) -> (Vec<f64>, f64) {
    let m = mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - m).collect();
    let constant = values.windows(2).all(|w| w[0] == w[1]);
    let ss = if constant {
        0.0
    } else {
        centered.iter().map(|d| d * d).sum()
    };
    (centered, ss)
}

/// Pearson correlation, two-pass: means first, then centred sums.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<CorrelationValue, StatsError> {
    check_pair(a, b)?;
    let (ca, ssa) = center(a);
    let (cb, ssb) = center(b);
    pearson_centered(&ca, ssa, &cb, ssb)
}

/// Spearman correlation: Pearson over the tie-averaged ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<CorrelationValue, StatsError> {
    check_pair(a, b)?;
    pearson(ranks(a).as_slice(), ranks(b).as_slice())
}

fn signum0(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Quadrant sign products from two rank vectors, averaged over `n`.
pub(crate) fn quadrant_from_ranks(ra: &[f64], rb: &[f64]) -> CorrelationValue {
    let n = ra.len();
    let mid = (n as f64 + 1.0) / 2.0;
    let mut sum = 0i64;
    let mut nonzero = false;
    for (x, y) in ra.iter().zip(rb) {
        let p = signum0(x - mid) * signum0(y - mid);
        nonzero |= p != 0;
        sum += p;
    }
    if !nonzero {
        return CorrelationValue::Undefined(Undefined::AllSignsZero);
    }
    CorrelationValue::Defined(sum as f64 / n as f64)
}

/// Quadrant correlation: mean product of signs of each rank's offset from
/// the median rank `(n+1)/2`, with `sgn(0) = 0`.
///
/// This median-centred reading of the quadrant coefficient is an
/// interpretation; reports label it as such.
pub fn quadrant(a: &[f64], b: &[f64]) -> Result<CorrelationValue, StatsError> {
    check_pair(a, b)?;
    Ok(quadrant_from_ranks(ranks(a).as_slice(), ranks(b).as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defined(v: CorrelationValue) -> f64 {
        v.value().expect("defined")
    }

    #[test]
    fn mean_small_cases() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(mean(&[5.0]), 5.0);
    }

    #[test]
    fn sort_keeps_ties() {
        assert_eq!(sort(&[3.0, 1.0, 2.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(sort(&[2.0, 1.0, 2.0]), vec![1.0, 2.0, 2.0]);
    }

    #[test]
    fn count_and_index_set() {
        let s = [1.0, 2.0, 2.0, 3.0];
        assert_eq!(count(2.0, &s), 2);
        assert_eq!(count(9.0, &s), 0);
        assert_eq!(index_set(2.0, &s), BTreeSet::from([2, 3]));
        assert_eq!(index_set(1.0, &s), BTreeSet::from([1]));
        assert!(index_set(7.0, &s).is_empty());
    }

    #[test]
    fn rank_tie_rule() {
        assert_eq!(rank(2.0, &[1.0, 2.0, 2.0, 3.0]).unwrap(), 2.5);
        assert_eq!(rank(1.0, &[1.0, 1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(rank(3.0, &[3.0, 1.0, 2.0]).unwrap(), 3.0);
        assert_eq!(
            rank(4.0, &[1.0, 2.0]),
            Err(StatsError::ElementAbsent(4.0))
        );
    }

    #[test]
    fn ranks_vectorised() {
        assert_eq!(ranks(&[10.0, 20.0, 30.0]).into_vec(), vec![1.0, 2.0, 3.0]);
        assert_eq!(
            ranks(&[1.0, 2.0, 2.0, 3.0]).into_vec(),
            vec![1.0, 2.5, 2.5, 4.0]
        );
        assert!(ranks(&[]).as_slice().is_empty());
    }

    #[test]
    fn signed_zero_ties() {
        assert_eq!(ranks(&[0.0, -0.0, 1.0]).into_vec(), vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn pearson_exact_cases() {
        assert_eq!(defined(pearson(&[1., 2., 3.], &[2., 4., 6.]).unwrap()), 1.0);
        assert_eq!(defined(pearson(&[1., 2., 3.], &[6., 4., 2.]).unwrap()), -1.0);
        assert_eq!(
            pearson(&[1., 2., 3.], &[7., 7., 7.]).unwrap(),
            CorrelationValue::Undefined(Undefined::ZeroVarianceRight)
        );
        assert_eq!(
            pearson(&[7., 7., 7.], &[1., 2., 3.]).unwrap(),
            CorrelationValue::Undefined(Undefined::ZeroVarianceLeft)
        );
        // 0.1 * 3 / 3 != 0.1, the constant must still be caught
        assert_eq!(
            pearson(&[0.1, 0.1, 0.1], &[1., 2., 3.]).unwrap(),
            CorrelationValue::Undefined(Undefined::ZeroVarianceLeft)
        );
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(
            pearson(&[1., 2.], &[1., 2., 3.]),
            Err(StatsError::LengthMismatch { left: 2, right: 3 })
        );
        assert_eq!(pearson(&[1.], &[1.]), Err(StatsError::TooShort(1)));
        assert_eq!(quadrant(&[1.], &[1.]), Err(StatsError::TooShort(1)));
    }

    #[test]
    fn spearman_monotone_cases() {
        assert_eq!(defined(spearman(&[1., 2., 3.], &[1., 8., 27.]).unwrap()), 1.0);
        assert_eq!(defined(spearman(&[1., 2., 3.], &[9., 4., 1.]).unwrap()), -1.0);
        assert!(!spearman(&[4., 4., 4.], &[1., 2., 3.]).unwrap().is_defined());
    }

    #[test]
    fn quadrant_cases() {
        assert_eq!(
            defined(quadrant(&[1., 2., 3., 4.], &[2., 3., 5., 9.]).unwrap()),
            1.0
        );
        assert_eq!(
            defined(quadrant(&[1., 2., 3., 4.], &[9., 5., 3., 2.]).unwrap()),
            -1.0
        );
        // signs (-,+,0,0) against (0,0,-,+)
        assert_eq!(
            quadrant(&[1., 4., 2., 2.], &[2., 2., 1., 3.]).unwrap(),
            CorrelationValue::Undefined(Undefined::AllSignsZero)
        );
    }

    #[test]
    fn clamp_tolerance() {
        assert_eq!(clamp_unit(1.0 + 2.0 * f64::EPSILON).unwrap(), 1.0);
        assert_eq!(clamp_unit(-1.0 - 4.0 * f64::EPSILON).unwrap(), -1.0);
        assert!(clamp_unit(1.0 + 1e-9).is_err());
        assert!(clamp_unit(f64::NAN).is_err());
    }
}
