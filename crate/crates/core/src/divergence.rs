//! Empirical CDFs and the distances between them: Cramér–von Mises of order
//! p, 1-D Wasserstein, energy distance, the concordance function, and the
//! two squared-CvM error decompositions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Right-continuous step CDF of a finite weighted atom set.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCDF<T> {
    locations: Vec<T>,
    weights: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Real> StepCDF<T> {
    /// Sorts, merges equal locations and normalises the weights to sum to one.
    pub fn from_atoms(locations: &[T], weights: &[T]) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::Empty("CDF needs at least one atom".into()));
        }
        if locations.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: locations.len(),
                right: weights.len(),
            });
        }
        if let Some(index) = locations.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(index) = weights.iter().position(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weight at position {index} must be positive and finite"
            )));
        }
        let mut pairs: Vec<(T, T)> = locations
            .iter()
            .copied()
            .zip(weights.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite locations"));
        let mut locs: Vec<T> = Vec::with_capacity(pairs.len());
        let mut ws: Vec<T> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match locs.last() {
                Some(&last) if last == x => {
                    let k = ws.len() - 1;
                    ws[k] = ws[k] + w;
                }
                _ => {
                    locs.push(x);
                    ws.push(w);
                }
            }
        }
        let total: T = ws.iter().copied().sum();
        for w in ws.iter_mut() {
            *w = *w / total;
        }
        let mut cumulative = Vec::with_capacity(ws.len());
        let mut acc = T::zero();
        for &w in &ws {
            acc = acc + w;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = T::one();
        }
        Ok(Self {
            locations: locs,
            weights: ws,
            cumulative,
        })
    }

    /// Point mass at `x`.
    pub fn dirac(x: T) -> Self {
        Self::from_atoms(&[x], &[T::one()]).expect("single finite atom")
    }

    pub fn locations(&self) -> &[T] {
        &self.locations
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn cumulative(&self) -> &[T] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.locations
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    /// `F(x) = P(X ≤ x)`.
    pub fn eval(&self, x: T) -> T {
        let k = self.locations.partition_point(|&l| l <= x);
        if k == 0 {
            T::zero()
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Generalised inverse `inf { x : F(x) ≥ q }`; levels at or below zero
    /// map to the smallest atom.
    pub fn quantile(&self, q: T) -> T {
        let k = self.cumulative.partition_point(|&c| c < q);
        self.locations[k.min(self.len() - 1)]
    }

    pub fn mean(&self) -> T {
        self.atoms().map(|(x, w)| x * w).sum()
    }

    /// Same law translated by `c`.
    pub fn shifted(&self, c: T) -> Self {
        Self {
            locations: self.locations.iter().map(|&x| x + c).collect(),
            weights: self.weights.clone(),
            cumulative: self.cumulative.clone(),
        }
    }

    /// Pointwise probability-weighted average of CDFs, itself a CDF.
    pub fn mixture(components: &[(&StepCDF<T>, T)]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("mixture needs at least one component".into()));
        }
        let mut locs = Vec::new();
        let mut ws = Vec::new();
        for (cdf, prob) in components {
            if *prob < T::zero() {
                return Err(Error::InvalidParameter("negative mixture weight".into()));
            }
            if *prob == T::zero() {
                continue;
            }
            for (x, w) in cdf.atoms() {
                locs.push(x);
                ws.push(w * *prob);
            }
        }
        Self::from_atoms(&locs, &ws)
    }
}

/// Empirical CDF of a sample, optionally weighted.
pub fn empirical_cdf<T: Real>(sample: &[T], weights: Option<&[T]>) -> Result<StepCDF<T>> {
    if sample.is_empty() {
        return Err(Error::Empty("sample".into()));
    }
    match weights {
        Some(w) => StepCDF::from_atoms(sample, w),
        None => StepCDF::from_atoms(sample, &vec![T::one(); sample.len()]),
    }
}

/// `CvM_p(F_X, F_Y) = ∫ |F_X − F_Y|^p dF_X`, both CDFs evaluated
/// right-continuously at the atoms of `x`. This is the integral itself, not
/// its p-th root.
pub fn cvm_p<T: Real>(x: &StepCDF<T>, y: &StepCDF<T>, p: T) -> Result<T> {
    if !(p > T::zero()) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "exponent p must be positive, got {p:?}"
        )));
    }
    Ok(x
        .atoms()
        .zip(x.cumulative.iter())
        .map(|((loc, w), &fx)| w * (fx - y.eval(loc)).abs().powf(p))
        .sum())
}

/// Concordance function `C(q) = F_X(F_Y^{[−1]}(q))` on `[0, 1]`, with the
/// convention `C(1) = 1`, returned as the (right-continuous) CDF of a law on
/// `[0, 1]`.
pub fn concordance_function<T: Real>(x: &StepCDF<T>, y: &StepCDF<T>) -> StepCDF<T> {
    let m = y.len();
    let fx: Vec<T> = y.locations.iter().map(|&l| x.eval(l)).collect();
    let mut locs = Vec::with_capacity(m + 1);
    let mut ws = Vec::with_capacity(m + 1);
    let mut push = |loc: T, w: T| {
        if w > T::zero() {
            locs.push(loc);
            ws.push(w);
        }
    };
    // C is constant F_X(y_j) on (c_{j-1}, c_j]; its jumps sit at the levels c_j.
    push(T::zero(), fx[0]);
    for j in 1..m {
        push(y.cumulative[j - 1], fx[j] - fx[j - 1]);
    }
    push(T::one(), T::one() - fx[m - 1]);
    StepCDF::from_atoms(&locs, &ws).expect("concordance law has positive total mass")
}

/// Raw `∫₀¹ |F_X^{[−1]} − F_Y^{[−1]}|^p dq` by merging the quantile
/// breakpoints of both laws.
fn quantile_power_integral<T: Real>(x: &StepCDF<T>, y: &StepCDF<T>, p: T) -> T {
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = T::zero();
    let mut acc = T::zero();
    while i < x.len() && j < y.len() {
        let (cx, cy) = (x.cumulative[i], y.cumulative[j]);
        let u = if cx < cy { cx } else { cy };
        let gap = (x.locations[i] - y.locations[j]).abs();
        if u > prev {
            acc = acc + (u - prev) * gap.powf(p);
            prev = u;
        }
        if cx <= cy {
            i += 1;
        }
        if cy <= cx {
            j += 1;
        }
    }
    acc
}

/// `W_p` between two one-dimensional laws, computed exactly from their
/// quantile functions.
pub fn wasserstein_1d<T: Real>(x: &StepCDF<T>, y: &StepCDF<T>, p: T) -> Result<T> {
    if !(p >= T::one()) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Wasserstein order must be at least 1, got {p:?}"
        )));
    }
    Ok(quantile_power_integral(x, y, p).powf(p.recip()))
}

fn mean_abs_difference<T: Real>(a: &StepCDF<T>, b: &StepCDF<T>) -> T {
    a.atoms()
        .map(|(xa, wa)| {
            wa * b
                .atoms()
                .map(|(xb, wb)| wb * (xa - xb).abs())
                .sum::<T>()
        })
        .sum()
}

/// Energy distance `2E|X−Y| − E|X−X′| − E|Y−Y′|` by exact double sums.
///
/// This is twice [`cramer_distance`]. In particular the energy distance
/// between the uniform and the concordance function `C_{X,Y}` is `2·CvM_2(X, Y)`.
pub fn energy_distance<T: Real>(x: &StepCDF<T>, y: &StepCDF<T>) -> T {
    let two = T::lit(2.0);
    let e = two * mean_abs_difference(x, y) - mean_abs_difference(x, x) - mean_abs_difference(y, y);
    e.max(T::zero())
}

/// Cramér distance `2∫ (F_X − F_Y)² dt` by enumerating the segments between
/// the merged atom locations. Equal to the energy distance in one dimension.
pub fn cramer_distance<T: Real>(x: &StepCDF<T>, y: &StepCDF<T>) -> T {
    let mut grid: Vec<T> = x.locations.iter().chain(y.locations.iter()).copied().collect();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    grid.dedup();
    let integral: T = grid
        .windows(2)
        .map(|w| {
            let d = x.eval(w[0]) - y.eval(w[0]);
            (w[1] - w[0]) * d * d
        })
        .sum();
    T::lit(2.0) * integral
}

/// Uniform law on `[0, 1]` discretised at the cell midpoints `(k − ½)/K`.
pub fn uniform_grid<T: Real>(k: usize) -> StepCDF<T> {
    let kk = T::from_count(k);
    let locs: Vec<T> = (0..k)
        .map(|i| (T::from_count(i) + T::lit(0.5)) / kk)
        .collect();
    StepCDF::from_atoms(&locs, &vec![T::one(); k]).expect("non-empty grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvmWassersteinReport<T> {
    pub p: T,
    pub grid: usize,
    /// `CvM_p(x, y)`
    pub cvm: T,
    /// `CvM_p(x, y)^{1/p}`
    pub cvm_root: T,
    /// `W_p(𝒰_grid, C_{x,y})`
    pub wasserstein: T,
    pub residual: T,
}

/// Compares `CvM_p(x, y)^{1/p}` with `W_p` between the discretised uniform
/// law and the concordance law `C_{x,y}`. The grid has as many cells as the
/// larger of the two inputs.
pub fn verify_cvm_wasserstein<T: Real>(
    x: &StepCDF<T>,
    y: &StepCDF<T>,
    p: T,
) -> Result<CvmWassersteinReport<T>> {
    let cvm = cvm_p(x, y, p)?;
    let grid = x.len().max(y.len());
    let u = uniform_grid(grid);
    let c = concordance_function(x, y);
    let wasserstein = wasserstein_1d(&u, &c, p)?;
    let cvm_root = cvm.powf(p.recip());
    Ok(CvmWassersteinReport {
        p,
        grid,
        cvm,
        cvm_root,
        wasserstein,
        residual: (cvm_root - wasserstein).abs(),
    })
}

/// `∫ (a − b)(c − d) dF` against the atoms of `measure`.
fn cross_integral<T: Real>(
    measure: &StepCDF<T>,
    a: &StepCDF<T>,
    b: &StepCDF<T>,
    c: &StepCDF<T>,
    d: &StepCDF<T>,
) -> T {
    measure
        .atoms()
        .map(|(u, w)| w * (a.eval(u) - b.eval(u)) * (c.eval(u) - d.eval(u)))
        .sum()
}

/// `∫ (a − b)² dF` against the atoms of `measure`.
pub fn squared_cvm<T: Real>(measure: &StepCDF<T>, a: &StepCDF<T>, b: &StepCDF<T>) -> T {
    cross_integral(measure, a, b, a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BVReport<T> {
    /// `E_ξ ∫ (F_D − F)² dF`
    pub total_error: T,
    /// `E_ξ ∫ (F_D − F̂)² dF`
    pub variance_term: T,
    /// `∫ (F̂ − F)² dF`
    pub bias_term: T,
    /// Optimisation gap; zero for the classical decomposition.
    pub approx_term: T,
    pub residual: T,
}

/// Classical bias–variance split of the expected squared CvM error of an
/// ensemble of trained CDFs `F_D` (with probabilities) against the truth.
pub fn bias_variance_decompose<T: Real>(
    ensemble: &[(StepCDF<T>, T)],
    truth: &StepCDF<T>,
) -> Result<BVReport<T>> {
    if ensemble.is_empty() {
        return Err(Error::Empty("ensemble".into()));
    }
    let total_prob: T = ensemble.iter().map(|(_, p)| *p).sum();
    if ensemble.iter().any(|(_, p)| *p < T::zero())
        || (total_prob - T::one()).abs() > T::lit(1e-9)
    {
        return Err(Error::InvalidParameter(
            "ensemble probabilities must be non-negative and sum to one".into(),
        ));
    }
    // pointwise F̂ at the atoms of the truth
    let mean_at: Vec<T> = truth
        .locations
        .iter()
        .map(|&u| ensemble.iter().map(|(f, p)| *p * f.eval(u)).sum())
        .collect();
    let truth_at: Vec<T> = truth.cumulative.clone();
    let mut total = T::zero();
    let mut variance = T::zero();
    for (member, prob) in ensemble {
        let mut t = T::zero();
        let mut v = T::zero();
        for (k, (u, w)) in truth.atoms().enumerate() {
            let fd = member.eval(u);
            t = t + w * (fd - truth_at[k]).powi(2);
            v = v + w * (fd - mean_at[k]).powi(2);
        }
        total = total + *prob * t;
        variance = variance + *prob * v;
    }
    let bias: T = truth
        .atoms()
        .enumerate()
        .map(|(k, (_, w))| w * (mean_at[k] - truth_at[k]).powi(2))
        .sum();
    Ok(BVReport {
        total_error: total,
        variance_term: variance,
        bias_term: bias,
        approx_term: T::zero(),
        residual: total - (variance + bias),
    })
}

/// `∫ (H − F_D)(F_D − F) dF`; zero for every `H` in a convex family when
/// `F_D` is the projection of `F` onto that family.
pub fn orthogonality_residual<T: Real>(
    h: &StepCDF<T>,
    f_d: &StepCDF<T>,
    truth: &StepCDF<T>,
) -> T {
    cross_integral(truth, h, f_d, f_d, truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalDecomposition<T> {
    /// `∫ (F_T − F)² dF`
    pub total: T,
    /// `∫ (F_T − F_D)² dF`
    pub approximation: T,
    /// `∫ (F_D − F)² dF`
    pub estimation: T,
    /// `∫ (F_T − F_D)(F_D − F) dF`
    pub orthogonality: T,
    pub residual: T,
}

/// Splits the error of a trained model `F_T` into the part due to imperfect
/// optimisation and the part due to estimation from data. `f_d` must be the
/// projection of `truth` onto the family containing `f_t`; this is checked
/// through the orthogonality residual against `tolerance`.
pub fn global_decompose<T: Real>(
    f_t: &StepCDF<T>,
    f_d: &StepCDF<T>,
    truth: &StepCDF<T>,
    tolerance: T,
) -> Result<GlobalDecomposition<T>> {
    let orthogonality = orthogonality_residual(f_t, f_d, truth);
    if orthogonality.abs() > tolerance {
        return Err(Error::NotProjection {
            residual: orthogonality.to_f64().unwrap_or(f64::NAN),
            tolerance: tolerance.to_f64().unwrap_or(f64::NAN),
        });
    }
    let total = squared_cvm(truth, f_t, truth);
    let approximation = squared_cvm(truth, f_t, f_d);
    let estimation = squared_cvm(truth, f_d, truth);
    Ok(GlobalDecomposition {
        total,
        approximation,
        estimation,
        orthogonality,
        residual: total - (approximation + estimation),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cdf(xs: &[f64]) -> StepCDF<f64> {
        empirical_cdf(xs, None).unwrap()
    }

    #[test]
    fn empirical_cdf_examples() {
        let f = cdf(&[0.0, 1.0]);
        assert_eq!(f.locations(), &[0.0, 1.0]);
        assert_eq!(f.weights(), &[0.5, 0.5]);
        let f = cdf(&[1.0, 1.0, 2.0]);
        assert_eq!(f.locations(), &[1.0, 2.0]);
        assert!((f.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        let f = empirical_cdf(&[0.0, 1.0], Some(&[1.0, 3.0])).unwrap();
        assert_eq!(f.weights(), &[0.25, 0.75]);
        assert!(empirical_cdf::<f64>(&[], None).is_err());
        assert!(empirical_cdf(&[0.0, 1.0], Some(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn eval_and_quantile_conventions() {
        let f = cdf(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(f.eval(-0.1), 0.0);
        assert_eq!(f.eval(0.0), 0.25);
        assert_eq!(f.eval(1.5), 0.5);
        assert_eq!(f.eval(3.0), 1.0);
        assert_eq!(f.quantile(0.25), 0.0);
        assert_eq!(f.quantile(0.2500001), 1.0);
        assert_eq!(f.quantile(1.0), 3.0);
        assert_eq!(f.quantile(0.0), 0.0);
    }

    #[test]
    fn cvm_examples() {
        let f = cdf(&[0.3, 1.2, 2.0]);
        assert_eq!(cvm_p(&f, &f, 2.0).unwrap(), 0.0);
        let d0 = StepCDF::dirac(0.0);
        let d1 = StepCDF::dirac(1.0);
        for &p in &[0.5, 1.0, 2.0, 3.0] {
            assert_eq!(cvm_p(&d0, &d1, p).unwrap(), 1.0);
        }
        let u = cdf(&[0.0, 1.0]);
        assert_eq!(cvm_p(&d0, &u, 1.0).unwrap(), 0.5);
        assert_eq!(cvm_p(&u, &d0, 1.0).unwrap(), 0.25);
        assert!(cvm_p(&u, &d0, 0.0).is_err());
    }

    #[test]
    fn concordance_function_examples() {
        let d0 = StepCDF::dirac(0.0);
        let d1 = StepCDF::dirac(1.0);
        let c = concordance_function(&d0, &d1);
        for q in [0.0, 0.3, 0.99, 1.0] {
            assert_eq!(c.eval(q), 1.0);
        }
        let f = cdf(&[0.1, 0.4, 0.5, 0.9]);
        let c = concordance_function(&f, &f);
        for &q in c.locations() {
            assert!(c.eval(q) >= q);
        }
        assert_eq!(c.eval(1.0), 1.0);
    }

    #[test]
    fn wasserstein_examples() {
        let f = cdf(&[0.2, 0.5, 1.7]);
        assert_eq!(wasserstein_1d(&f, &f, 2.0).unwrap(), 0.0);
        let d0 = StepCDF::dirac(0.0);
        let d1 = StepCDF::dirac(1.0);
        assert_eq!(wasserstein_1d(&d0, &d1, 1.0).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&d0, &d1, 3.0).unwrap(), 1.0);
        let g = f.shifted(-0.75);
        assert!((wasserstein_1d(&f, &g, 2.0).unwrap() - 0.75).abs() < 1e-15);
        assert!(wasserstein_1d(&f, &g, 0.5).is_err());
    }

    #[test]
    fn energy_examples() {
        let f = cdf(&[0.0, 1.0]);
        assert_eq!(energy_distance(&f, &f), 0.0);
        assert_eq!(energy_distance(&StepCDF::dirac(0.0), &StepCDF::dirac(1.0)), 2.0);
        let g = cdf(&[0.3, 0.9, 1.4]);
        assert!((energy_distance(&f, &g) - cramer_distance(&f, &g)).abs() < 1e-12);
    }

    #[test]
    fn bias_variance_small_cases() {
        let truth = cdf(&[0.0, 1.0, 2.0, 3.0]);
        let single = vec![(cdf(&[0.5, 1.5]), 1.0)];
        let r = bias_variance_decompose(&single, &truth).unwrap();
        assert_eq!(r.variance_term, 0.0);
        assert!((r.total_error - r.bias_term).abs() < 1e-15);
        // two members mirrored around the truth at its atoms: F ± 0.1 below the top atom
        let locs = [0.0, 1.0, 2.0, 3.0];
        let up = StepCDF::from_atoms(&locs, &[0.35, 0.25, 0.25, 0.15]).unwrap();
        let down = StepCDF::from_atoms(&locs, &[0.15, 0.25, 0.25, 0.35]).unwrap();
        let pair = vec![(up, 0.5), (down, 0.5)];
        let r = bias_variance_decompose(&pair, &truth).unwrap();
        assert!(r.bias_term.abs() < 1e-15);
        assert!((r.total_error - r.variance_term).abs() < 1e-15);
        assert!(bias_variance_decompose(&[], &truth).is_err());
    }

    #[test]
    fn global_decompose_trivial_cases() {
        let truth = cdf(&[0.0, 1.0, 2.0]);
        let fd = cdf(&[0.5, 1.5]);
        let g = global_decompose(&fd, &fd, &truth, 1e-12).unwrap();
        assert_eq!(g.approximation, 0.0);
        let g = global_decompose(&fd, &truth, &truth, 1e-12).unwrap();
        assert_eq!(g.estimation, 0.0);
        assert!((g.total - g.approximation).abs() < 1e-15);
        let ft = cdf(&[5.0]);
        assert!(matches!(
            global_decompose(&ft, &fd, &truth, 1e-12),
            Err(Error::NotProjection { .. })
        ));
    }
}
