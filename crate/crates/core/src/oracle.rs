//! Pseudo-oracle: every statistic recomputed by a different algorithm.
//!
//! Nothing here calls into [`crate::stats`] or [`crate::engine`]; only result
//! types are shared. The formulations differ on purpose:
//!
//! | quantity | main path | oracle |
//! |----------|-----------|--------|
//! | mean     | f64 sum / n | double-double sum / n |
//! | Pearson  | two-pass centred sums in f64 | single-pass raw moments in double-double, cov/(σσ) |
//! | ranks    | sort then average tied positions | `#{less} + (#{equal} + 1) / 2` by counting |
//! | quadrant | signs of `rank - (n+1)/2` | signs of `#{less} - #{greater}` |
//! | best ideal | chunked transpose, centred ideals cached | per voxel, nothing cached |

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{CorrelationMap, Statistic};
use crate::nifti::VolumeGrid4D;
use crate::stats::{CorrelationValue, RankVector, StatsError, Undefined};
use crate::timeseries::IdealSeries;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, roughly 106 bits of precision.
#[derive(Debug, Clone, Copy, Default)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let (t, f) = two_sum(self.lo, other.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn sub(self, other: Self) -> Self {
        self.add(other.neg())
    }

    fn mul(self, other: Self) -> Self {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + (self.hi * other.lo + self.lo * other.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }

    fn div(self, other: Self) -> Self {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul(Self::from_f64(q1)));
        let q2 = r.hi / other.hi;
        let r = r.sub(other.mul(Self::from_f64(q2)));
        let q3 = r.hi / other.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }.add(Self::from_f64(q3))
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::default();
        }
        // one Newton step from the f64 root
        let x = self.hi.sqrt();
        let xx = Self::from_f64(x).mul(Self::from_f64(x));
        let corr = self.sub(xx).hi / (2.0 * x);
        let (hi, lo) = quick_two_sum(x, corr);
        Self { hi, lo }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn dd_sum(values: impl IntoIterator<Item = f64>) -> DoubleDouble {
    values
        .into_iter()
        .fold(DoubleDouble::default(), |acc, v| acc.add(DoubleDouble::from_f64(v)))
}

/// Mean in double-double precision, rounded once.
pub fn oracle_mean(values: &[f64]) -> f64 {
    dd_sum(values.iter().copied())
        .div(DoubleDouble::from_f64(values.len() as f64))
        .to_f64()
}

fn is_constant(values: &[f64]) -> bool {
    values.iter().all(|&v| v == values[0])
}

fn check(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(StatsError::TooShort(a.len()));
    }
    Ok(())
}

/// Pearson r as cov(A,B) / (σ_A σ_B) from single-pass raw moments.
pub fn oracle_pearson(a: &[f64], b: &[f64]) -> Result<CorrelationValue, StatsError> {
    check(a, b)?;
    if is_constant(a) {
        return Ok(CorrelationValue::Undefined(Undefined::ZeroVarianceLeft));
    }
    if is_constant(b) {
        return Ok(CorrelationValue::Undefined(Undefined::ZeroVarianceRight));
    }
    let zero = DoubleDouble::default();
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (zero, zero, zero, zero, zero);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (DoubleDouble::from_f64(x), DoubleDouble::from_f64(y));
        sa = sa.add(x);
        sb = sb.add(y);
        saa = saa.add(x.mul(x));
        sbb = sbb.add(y.mul(y));
        sab = sab.add(x.mul(y));
    }
    let n = DoubleDouble::from_f64(a.len() as f64);
    let cov = sab.sub(sa.mul(sb).div(n));
    let var_a = saa.sub(sa.mul(sa).div(n));
    let var_b = sbb.sub(sb.mul(sb).div(n));
    let r = cov.div(var_a.sqrt().mul(var_b.sqrt())).to_f64();
    if !r.is_finite() || r.abs() > 1.0 + 4.0 * f64::EPSILON {
        return Err(StatsError::OutOfRange(r));
    }
    Ok(CorrelationValue::Defined(r.clamp(-1.0, 1.0)))
}

fn less_equal_greater(x: f64, values: &[f64]) -> (usize, usize, usize) {
    values.iter().fold((0, 0, 0), |(l, e, g), &v| {
        if v < x {
            (l + 1, e, g)
        } else if v == x {
            (l, e + 1, g)
        } else {
            (l, e, g + 1)
        }
    })
}

/// Ranks by counting: `#{a_j < a_i} + (#{a_j == a_i} + 1) / 2`.
pub fn oracle_ranks(values: &[f64]) -> RankVector {
    values
        .iter()
        .map(|&x| {
            let (less, equal, _) = less_equal_greater(x, values);
            less as f64 + (equal as f64 + 1.0) / 2.0
        })
        .collect()
}

pub fn oracle_spearman(a: &[f64], b: &[f64]) -> Result<CorrelationValue, StatsError> {
    check(a, b)?;
    oracle_pearson(oracle_ranks(a).as_slice(), oracle_ranks(b).as_slice())
}

/// Quadrant coefficient by sign enumeration: an element lies above the median
/// rank exactly when more elements are below it than above it.
pub fn oracle_quadrant(a: &[f64], b: &[f64]) -> Result<CorrelationValue, StatsError> {
    check(a, b)?;
    let sign = |x: f64, values: &[f64]| {
        let (less, _, greater) = less_equal_greater(x, values);
        (less as i64 - greater as i64).signum()
    };
    let products: Vec<i64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| sign(x, a) * sign(y, b))
        .collect();
    if products.iter().all(|&p| p == 0) {
        return Ok(CorrelationValue::Undefined(Undefined::AllSignsZero));
    }
    let positive = products.iter().filter(|&&p| p > 0).count() as f64;
    let negative = products.iter().filter(|&&p| p < 0).count() as f64;
    Ok(CorrelationValue::Defined(
        (positive - negative) / a.len() as f64,
    ))
}

pub fn oracle_statistic(
    statistic: Statistic,
    a: &[f64],
    b: &[f64],
) -> Result<CorrelationValue, StatsError> {
    match statistic {
        Statistic::Pearson => oracle_pearson(a, b),
        Statistic::Spearman => oracle_spearman(a, b),
        Statistic::Quadrant => oracle_quadrant(a, b),
    }
}

/// Recompute one statistic for every voxel in storage order, one voxel at a
/// time, reading samples through [`VolumeGrid4D::get`].
pub fn oracle_map(
    volume: &VolumeGrid4D,
    ideals: &[IdealSeries],
    statistic: Statistic,
) -> Result<Vec<CorrelationValue>, StatsError> {
    let (nx, ny, nz, nt) = volume.dims();
    (0..nx * ny * nz)
        .into_par_iter()
        .map(|v| {
            let (i, j, k) = (v % nx, (v / nx) % ny, v / (nx * ny));
            let series: Vec<f64> = (0..nt).map(|t| volume.get(i, j, k, t)).collect();
            let mut best: Option<(usize, f64)> = None;
            for (e, ideal) in ideals.iter().enumerate() {
                if let Some(r) = oracle_pearson(&series, ideal.values())?.value() {
                    match best {
                        Some((_, b)) if r.abs() <= b.abs() => {}
                        _ => best = Some((e, r)),
                    }
                }
            }
            Ok(match best {
                None => CorrelationValue::Undefined(Undefined::ZeroVarianceLeft),
                Some((_, r)) if statistic == Statistic::Pearson => CorrelationValue::Defined(r),
                Some((e, _)) => oracle_statistic(statistic, &series, ideals[e].values())?,
            })
        })
        .collect()
}

/// `|a - b|` scaled by `max(|a|, |b|, 1)`; correlations live in [-1, 1], so the
/// unit floor keeps values near zero from inflating the ratio.
pub fn relative_discrepancy(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapDiscrepancy {
    pub statistic: Statistic,
    pub max_discrepancy: f64,
    /// First voxel (storage order) exceeding the tolerance, if any.
    pub first_offender: Option<(usize, usize, usize)>,
    /// Voxels where one side is defined and the other is not.
    pub definedness_mismatches: usize,
}

impl MapDiscrepancy {
    pub fn passes(&self) -> bool {
        self.first_offender.is_none()
    }
}

/// Compare a computed map against oracle values.
///
/// `slack(oracle_value)` is the allowed discrepancy for that voxel on top of
/// `tolerance`; pass `|_| 0.0` for in-memory maps.
pub fn compare_map(
    map: &CorrelationMap,
    oracle: &[CorrelationValue],
    tolerance: f64,
    slack: impl Fn(f64) -> f64,
) -> MapDiscrepancy {
    let mut max_discrepancy: f64 = 0.0;
    let mut first_offender = None;
    let mut definedness_mismatches = 0;
    for (v, expected) in oracle.iter().enumerate() {
        let computed = map.defined[v].then_some(map.values[v]);
        let (bad, d) = match (computed, expected.value()) {
            (Some(c), Some(o)) => {
                let d = relative_discrepancy(c, o);
                (d > tolerance + slack(o), d)
            }
            (None, None) => (false, 0.0),
            _ => {
                definedness_mismatches += 1;
                (true, f64::INFINITY)
            }
        };
        max_discrepancy = max_discrepancy.max(d);
        if bad && first_offender.is_none() {
            first_offender = Some(map.coords(v));
        }
    }
    MapDiscrepancy {
        statistic: map.statistic,
        max_discrepancy,
        first_offender,
        definedness_mismatches,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn val(v: Result<CorrelationValue, StatsError>) -> f64 {
        v.unwrap().value().unwrap()
    }

    #[test]
    fn double_double_recovers_lost_bits() {
        let s = dd_sum([1.0, 1e-20, -1.0]);
        assert_eq!(s.to_f64(), 1e-20);
        assert_eq!(oracle_mean(&[1e16, 1.0, -1e16, 3.0]), 1.0);
        let q = DoubleDouble::from_f64(1.0).div(DoubleDouble::from_f64(3.0));
        let back = q.mul(DoubleDouble::from_f64(3.0));
        assert!((back.hi - 1.0 + back.lo).abs() < 1e-30);
        let r = DoubleDouble::from_f64(2.0).sqrt();
        let sq = r.mul(r).sub(DoubleDouble::from_f64(2.0));
        assert!(sq.to_f64().abs() < 1e-30);
    }

    #[test]
    fn pearson_linear_cases() {
        assert_eq!(val(oracle_pearson(&[1., 2., 3.], &[2., 4., 6.])), 1.0);
        assert_eq!(val(oracle_pearson(&[1., 2., 3.], &[6., 4., 2.])), -1.0);
        assert_eq!(
            oracle_pearson(&[1., 2., 3.], &[7., 7., 7.]).unwrap(),
            CorrelationValue::Undefined(Undefined::ZeroVarianceRight)
        );
    }

    #[test]
    fn exhaustive_ternary_triples() {
        let patterns: Vec<[f64; 3]> = (0..27)
            .map(|m| [(m % 3) as f64 - 1.0, ((m / 3) % 3) as f64 - 1.0, (m / 9) as f64 - 1.0])
            .filter(|p| !(p[0] == p[1] && p[1] == p[2]))
            .collect();
        assert_eq!(patterns.len(), 24);
        for a in &patterns {
            for b in &patterns {
                let ab = val(oracle_pearson(a, b));
                let ba = val(oracle_pearson(b, a));
                assert!((-1.0..=1.0).contains(&ab));
                assert_eq!(ab, ba);
            }
        }
    }

    #[test]
    fn counting_ranks() {
        assert_eq!(oracle_ranks(&[1., 2., 2., 3.]).into_vec(), vec![1., 2.5, 2.5, 4.]);
        assert_eq!(oracle_ranks(&[7.]).into_vec(), vec![1.]);
        assert_eq!(oracle_ranks(&[4., 4., 4., 4.]).into_vec(), vec![2.5; 4]);
    }

    #[test]
    fn quadrant_cases() {
        assert_eq!(val(oracle_quadrant(&[1., 2., 3., 4.], &[2., 3., 5., 9.])), 1.0);
        assert_eq!(val(oracle_quadrant(&[1., 2., 3., 4.], &[9., 5., 3., 2.])), -1.0);
        assert_eq!(
            oracle_quadrant(&[1., 4., 2., 2.], &[2., 2., 1., 3.]).unwrap(),
            CorrelationValue::Undefined(Undefined::AllSignsZero)
        );
    }

    #[test]
    fn discrepancy_scale() {
        assert_eq!(relative_discrepancy(0.5, 0.5), 0.0);
        assert_eq!(relative_discrepancy(1e-20, 0.0), 1e-20);
        assert_eq!(relative_discrepancy(2.0, 1.0), 0.5);
    }
}
