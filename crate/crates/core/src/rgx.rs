//! The S_p variability index and the RGX_p family of rank graduation
//! metrics.
//!
//! All areas are taken between curves normalised by the response total, so
//! `numerator` and `denominator` in [`RgxResult`] are dimensionless.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rank::{
    concordance_curve, dual_lorenz_curve, lorenz_curve, pl_gap_area, segment_power_means,
    RankedSample,
};
use crate::scalar::{Real, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgxResult<T> {
    pub value: T,
    pub p: T,
    /// `∫ |L̂_{Y,Z} − L̂_Y|^p`
    pub numerator: T,
    /// `∫ |L̂ᶜ_Y − L̂_Y|^p`
    pub denominator: T,
}

impl<T: Scalar> RgxResult<T> {
    fn from_areas(numerator: T, denominator: T, p: T) -> Result<Self> {
        if denominator <= T::zero() {
            return Err(Error::Degenerate(
                "response has no variability (zero denominator)".into(),
            ));
        }
        let mut value = T::one() - numerator / denominator;
        if value < T::zero() {
            value = T::zero();
        } else if value > T::one() {
            value = T::one();
        }
        Ok(Self {
            value,
            p,
            numerator,
            denominator,
        })
    }
}

fn check_p<T: Real>(p: T) -> Result<()> {
    if p > T::zero() && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "exponent p must be positive and finite, got {p:?}"
        )))
    }
}

fn reject_constant<T: Scalar>(y: &RankedSample<T>) -> Result<()> {
    if y.is_constant() {
        Err(Error::Degenerate(
            "constant response: the metric is undefined when the Gini index is zero".into(),
        ))
    } else {
        Ok(())
    }
}

/// `S_p(Y) = (∫ |L̂ᶜ_Y − L̂_Y|^p)^{1/p}`.
pub fn s_p<T: Real>(y: &RankedSample<T>, p: T) -> Result<T> {
    check_p(p)?;
    let lower = lorenz_curve(y).normalized();
    let upper = dual_lorenz_curve(y).normalized();
    let means = segment_power_means(&lower, &upper, p)?;
    let integral = means.iter().copied().sum::<T>() / T::from_count(means.len());
    Ok(integral.powf(p.recip()))
}

/// Limit of `S_p` as `p → ∞`: the largest normalised gap between the dual
/// and ordinary Lorenz curves.
pub fn s_inf<T: Scalar>(y: &RankedSample<T>) -> T {
    let lower = lorenz_curve(y);
    let upper = dual_lorenz_curve(y);
    let gap = lower
        .knots()
        .iter()
        .zip(upper.knots())
        .fold(T::zero(), |m, (&a, &b)| m.max_of(b - a));
    gap / y.total()
}

/// `RGX_p(Y, Z)`: one minus the ratio of the p-power area between the
/// concordance and Lorenz curves to the one between dual and Lorenz curves.
pub fn rgx_p<T: Real>(y: &RankedSample<T>, z: &[T], p: T) -> Result<RgxResult<T>> {
    check_p(p)?;
    reject_constant(y)?;
    let lower = lorenz_curve(y).normalized();
    let upper = dual_lorenz_curve(y).normalized();
    let conc = concordance_curve(y, z)?.normalized();
    let n = T::from_count(lower.segments());
    let num = segment_power_means(&lower, &conc, p)?
        .into_iter()
        .sum::<T>()
        / n;
    let den = segment_power_means(&lower, &upper, p)?
        .into_iter()
        .sum::<T>()
        / n;
    RgxResult::from_areas(num, den, p)
}

/// `RGX_1` over any [`Scalar`], including exact rationals.
pub fn rgx_area<T: Scalar>(y: &RankedSample<T>, z: &[T]) -> Result<RgxResult<T>> {
    reject_constant(y)?;
    let lower = lorenz_curve(y).normalized();
    let upper = dual_lorenz_curve(y).normalized();
    let conc = concordance_curve(y, z)?.normalized();
    let num = pl_gap_area(&lower, &conc)?;
    let den = pl_gap_area(&lower, &upper)?;
    RgxResult::from_areas(num, den, T::one())
}

/// Weighted `RGX_p`: segment `i` of the ascending ordering carries weight
/// `Y_(i) / ΣY` instead of `1 / N`.
pub fn wrgx_p<T: Real>(y: &RankedSample<T>, z: &[T], p: T) -> Result<RgxResult<T>> {
    check_p(p)?;
    reject_constant(y)?;
    let lower = lorenz_curve(y).normalized();
    let upper = dual_lorenz_curve(y).normalized();
    let conc = concordance_curve(y, z)?.normalized();
    let total = y.total();
    let weights: Vec<T> = y.sorted().map(|v| v / total).collect();
    let weigh = |means: Vec<T>| -> T {
        means
            .into_iter()
            .zip(weights.iter())
            .map(|(m, &w)| m * w)
            .sum()
    };
    let num = weigh(segment_power_means(&lower, &conc, p)?);
    let den = weigh(segment_power_means(&lower, &upper, p)?);
    RgxResult::from_areas(num, den, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneCheck<T> {
    pub original: RgxResult<T>,
    pub transformed: RgxResult<T>,
    pub direction: Monotonicity,
}

/// Evaluates `RGX_p(Y, Z)` and `RGX_p(Y, f(Z))`, after confirming that `f`
/// is strictly monotone on the observed values of `Z`.
pub fn rgx_monotone_check<T, F>(
    y: &RankedSample<T>,
    z: &[T],
    f: F,
    p: T,
) -> Result<MonotoneCheck<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    let fz: Vec<T> = z.iter().map(|&v| f(v)).collect();
    let order = crate::rank::compute_ranks(z)?;
    let mut direction = None;
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if z[a] == z[b] {
            if fz[a] != fz[b] {
                return Err(Error::InvalidParameter(
                    "transform is not a function of z (equal inputs, different outputs)".into(),
                ));
            }
            continue;
        }
        let step = if fz[b] > fz[a] {
            Monotonicity::Increasing
        } else if fz[b] < fz[a] {
            Monotonicity::Decreasing
        } else {
            return Err(Error::InvalidParameter(
                "transform is not strictly monotone on the sample".into(),
            ));
        };
        match direction {
            None => direction = Some(step),
            Some(d) if d != step => {
                return Err(Error::InvalidParameter(
                    "transform is not monotone on the sample".into(),
                ))
            }
            _ => {}
        }
    }
    let direction = direction.ok_or_else(|| {
        Error::Degenerate("z is constant; monotonicity cannot be established".into())
    })?;
    Ok(MonotoneCheck {
        original: rgx_p(y, z, p)?,
        transformed: rgx_p(y, &fz, p)?,
        direction,
    })
}
