//! Orderings, Lorenz-type curves and the indices read off them.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Stable ascending ordering of `values`.
///
/// Entry `i` of the result is the (zero-based) position of the `i`-th
/// smallest value. Ties keep their original relative order.
pub fn compute_ranks<T: Scalar>(values: &[T]) -> Result<Vec<usize>> {
    if values.len() < 2 {
        return Err(Error::TooShort {
            min: 2,
            got: values.len(),
        });
    }
    check_finite(values)?;
    Ok(stable_order(values))
}

pub(crate) fn stable_order<T: Scalar>(values: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // sort_by is stable, so equal values keep ascending index order
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(Ordering::Equal)
    });
    order
}

fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite_value()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Amount to add to every entry so that the smallest becomes strictly
/// positive. Zero when the vector is already positive.
///
/// The shifted minimum sits `1e-9 * range` above zero.
pub fn positive_shift<T: Scalar>(values: &[T]) -> T {
    let mut min = values[0];
    let mut max = values[0];
    for &v in values {
        if v < min {
            min = v;
        }
        if v > max {
            max = v;
        }
    }
    if min > T::zero() {
        return T::zero();
    }
    let mut range = max - min;
    if range == T::zero() {
        range = T::one().max_of(min.abs());
    }
    let eps = T::from_f64(1e-9).expect("literal") * range;
    eps - min
}

/// A finite vector of non-negative responses together with its ascending
/// ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSample<T> {
    values: Vec<T>,
    ordering: Vec<usize>,
    total: T,
}

impl<T: Scalar> RankedSample<T> {
    /// Builds a sample from strictly positive values.
    pub fn new(values: Vec<T>) -> Result<Self> {
        Self::validate_len(&values)?;
        check_finite(&values)?;
        if let Some(index) = values.iter().position(|v| *v <= T::zero()) {
            return Err(Error::NonPositive {
                index,
                value: values[index].to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self::build(values))
    }

    /// Like [`RankedSample::new`] but admits zero entries, provided the
    /// total stays positive. Only the variability indices are meaningful on
    /// such samples.
    pub fn new_nonnegative(values: Vec<T>) -> Result<Self> {
        Self::validate_len(&values)?;
        check_finite(&values)?;
        if let Some(index) = values.iter().position(|v| *v < T::zero()) {
            return Err(Error::NonPositive {
                index,
                value: values[index].to_f64().unwrap_or(f64::NAN),
            });
        }
        let sample = Self::build(values);
        if sample.total <= T::zero() {
            return Err(Error::Degenerate("all entries are zero".into()));
        }
        Ok(sample)
    }

    /// Opt-in preprocessing: shifts the values by [`positive_shift`] and
    /// returns the shift that was applied so callers can report it.
    pub fn shifted_to_positive(mut values: Vec<T>) -> Result<(Self, T)> {
        Self::validate_len(&values)?;
        check_finite(&values)?;
        let shift = positive_shift(&values);
        if shift != T::zero() {
            for v in values.iter_mut() {
                *v = *v + shift;
            }
        }
        Ok((Self::new(values)?, shift))
    }

    fn validate_len(values: &[T]) -> Result<()> {
        if values.len() < 2 {
            return Err(Error::TooShort {
                min: 2,
                got: values.len(),
            });
        }
        Ok(())
    }

    fn build(values: Vec<T>) -> Self {
        let ordering = stable_order(&values);
        let total = values.iter().copied().sum();
        Self {
            values,
            ordering,
            total,
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Zero-based ascending ordering.
    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn total(&self) -> T {
        self.total
    }

    pub fn mean(&self) -> T {
        self.total / T::from_count(self.len())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values in ascending order.
    pub fn sorted(&self) -> impl DoubleEndedIterator<Item = T> + ExactSizeIterator + '_ {
        self.ordering.iter().map(move |&i| self.values[i])
    }

    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }
}

/// Piecewise-linear curve on `[0, 1]` with knots at `k / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PLCurve<T> {
    knots: Vec<T>,
}

impl<T: Scalar> PLCurve<T> {
    /// `knots[k]` is the curve value at `t = k / N`; `knots[0]` must be zero.
    pub fn from_knots(knots: Vec<T>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::TooShort {
                min: 2,
                got: knots.len(),
            });
        }
        if knots[0] != T::zero() {
            return Err(Error::InvalidParameter(
                "curve must start at zero".into(),
            ));
        }
        Ok(Self { knots })
    }

    fn cumulative(values: impl Iterator<Item = T>, n: usize) -> Self {
        let mut knots = Vec::with_capacity(n + 1);
        let mut acc = T::zero();
        knots.push(acc);
        for v in values {
            acc = acc + v;
            knots.push(acc);
        }
        Self { knots }
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Number of segments `N`.
    pub fn segments(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn end_value(&self) -> T {
        self.knots[self.knots.len() - 1]
    }

    /// Linear interpolation between knots; `t` is clamped to `[0, 1]`.
    pub fn eval(&self, t: T) -> T {
        let n = self.segments();
        let nt = T::from_count(n);
        let pos = (t * nt).max_of(T::zero());
        let pos = if pos > nt { nt } else { pos };
        let idx = pos.to_f64().map(|x| x.floor() as usize).unwrap_or(0).min(n - 1);
        let frac = pos - T::from_count(idx);
        let (a, b) = (self.knots[idx], self.knots[idx + 1]);
        a + (b - a) * frac
    }

    /// Every knot divided by the end value.
    pub fn normalized(&self) -> Self {
        let total = self.end_value();
        Self {
            knots: self.knots.iter().map(|&k| k / total).collect(),
        }
    }

    /// Exact integral over `[0, 1]` (trapezoid rule is exact here).
    pub fn area(&self) -> T {
        let n = self.segments();
        let two = T::one() + T::one();
        let sum: T = self
            .knots
            .windows(2)
            .map(|w| (w[0] + w[1]) / two)
            .sum();
        sum / T::from_count(n)
    }
}

/// Lorenz curve: cumulative sums of the values in ascending order.
pub fn lorenz_curve<T: Scalar>(s: &RankedSample<T>) -> PLCurve<T> {
    PLCurve::cumulative(s.sorted(), s.len())
}

/// Dual Lorenz curve: cumulative sums in descending order.
pub fn dual_lorenz_curve<T: Scalar>(s: &RankedSample<T>) -> PLCurve<T> {
    PLCurve::cumulative(s.sorted().rev(), s.len())
}

/// Cumulative sums of `y` taken in the ordering induced by `z`.
pub fn concordance_curve<T: Scalar>(y: &RankedSample<T>, z: &[T]) -> Result<PLCurve<T>> {
    if z.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: z.len(),
        });
    }
    let order = compute_ranks(z)?;
    let values = y.values();
    Ok(PLCurve::cumulative(order.iter().map(|&i| values[i]), y.len()))
}

/// Pointwise gap `upper - lower` at each knot. Gaps within `1e-12` of the
/// curve scale are rounding noise and are clamped to zero; fractional
/// powers would otherwise amplify them.
fn knot_gaps<T: Scalar>(lower: &PLCurve<T>, upper: &PLCurve<T>) -> Result<Vec<T>> {
    if lower.segments() != upper.segments() {
        return Err(Error::GridMismatch {
            left: lower.segments(),
            right: upper.segments(),
        });
    }
    let scale = lower
        .knots
        .iter()
        .chain(upper.knots.iter())
        .fold(T::zero(), |m, k| m.max_of(k.abs()));
    let tol = T::from_f64(1e-12).expect("literal") * scale;
    lower
        .knots
        .iter()
        .zip(upper.knots.iter())
        .enumerate()
        .map(|(knot, (&a, &b))| {
            let gap = b - a;
            if gap.abs() <= tol {
                Ok(T::zero())
            } else if gap > T::zero() {
                Ok(gap)
            } else {
                Err(Error::CurveOrder {
                    knot,
                    gap: gap.to_f64().unwrap_or(f64::NAN),
                })
            }
        })
        .collect()
}

/// Exact `∫₀¹ (upper − lower) dt`.
pub fn pl_gap_area<T: Scalar>(lower: &PLCurve<T>, upper: &PLCurve<T>) -> Result<T> {
    let gaps = knot_gaps(lower, upper)?;
    let two = T::one() + T::one();
    let sum: T = gaps.windows(2).map(|w| (w[0] + w[1]) / two).sum();
    Ok(sum / T::from_count(lower.segments()))
}

/// Mean of `d(s)^p` over a segment on which `d` runs linearly from `d0` to
/// `d1` (both non-negative).
pub(crate) fn linear_power_mean<T: Real>(d0: T, d1: T, p: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    if p == one {
        return (d0 + d1) / two;
    }
    if p == two {
        return (d0 * d0 + d0 * d1 + d1 * d1) / T::lit(3.0);
    }
    let (lo, hi) = if d0 <= d1 { (d0, d1) } else { (d1, d0) };
    if hi <= T::zero() {
        return T::zero();
    }
    let width = hi - lo;
    let r = width / hi;
    if r < T::lit(1e-3) {
        // series around the midpoint; the next term is O(rho^6)
        let m = (hi + lo) / two;
        let rho = width / m;
        let rho2 = rho * rho;
        let c2 = p * (p - one) / T::lit(24.0);
        let c4 = p * (p - one) * (p - two) * (p - T::lit(3.0)) / T::lit(1920.0);
        return m.powf(p) * (one + c2 * rho2 + c4 * rho2 * rho2);
    }
    // (hi^{p+1} - lo^{p+1}) / ((p+1)(hi - lo)) written in terms of r = 1 - lo/hi
    let q = p + one;
    let tail = -((q * (-r).ln_1p()).exp_m1());
    hi.powf(p) * tail / (q * r)
}

/// Per-segment means of `(upper − lower)^p`.
pub fn segment_power_means<T: Real>(
    lower: &PLCurve<T>,
    upper: &PLCurve<T>,
    p: T,
) -> Result<Vec<T>> {
    if !(p > T::zero()) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "exponent p must be positive and finite, got {p:?}"
        )));
    }
    let gaps = knot_gaps(lower, upper)?;
    Ok(gaps
        .windows(2)
        .map(|w| linear_power_mean(w[0], w[1], p))
        .collect())
}

/// Exact `∫₀¹ (b − a)^p dt` for piecewise-linear `a ≤ b` on a shared grid.
pub fn pl_power_integral<T: Real>(a: &PLCurve<T>, b: &PLCurve<T>, p: T) -> Result<T> {
    let means = segment_power_means(a, b, p)?;
    let n = T::from_count(means.len());
    Ok(means.into_iter().sum::<T>() / n)
}

/// Gini index, `1 − 2∫L̂` with `L̂` the normalised Lorenz curve.
pub fn gini<T: Scalar>(s: &RankedSample<T>) -> T {
    let l = lorenz_curve(s).normalized();
    let two = T::one() + T::one();
    T::one() - two * l.area()
}

/// Pietra index: largest vertical gap between the equality line and the
/// normalised Lorenz curve. The supremum is attained at a knot.
pub fn pietra<T: Scalar>(s: &RankedSample<T>) -> T {
    let l = lorenz_curve(s).normalized();
    let n = T::from_count(l.segments());
    l.knots()
        .iter()
        .enumerate()
        .map(|(k, &v)| T::from_count(k) / n - v)
        .fold(T::zero(), |m, g| m.max_of(g))
}
