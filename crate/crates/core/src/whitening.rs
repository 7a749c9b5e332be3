//! Correlation whitening (ZCA-cor and Cholesky) and the λ-weighted
//! multivariate Gini and RGX_p built on it.
//!
//! A fitted [`WhiteningTransform`] maps an observation `x` to
//! `W · diag(1/σ) · x`, where `σ` are the column standard deviations of the
//! fitting data and `W` satisfies `WᵀW = C⁻¹` for the correlation matrix `C`.
//! Observations are not centred before whitening, so the whitened means `m*`
//! carry the location information used for the λ weights.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rank::{gini, RankedSample};
use crate::rgx::{rgx_p, RgxResult};

/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const SINGULARITY_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WhiteningScheme {
    #[default]
    ZcaCor,
    Cholesky,
}

impl std::fmt::Display for WhiteningScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WhiteningScheme::ZcaCor => f.write_str("zca-cor"),
            WhiteningScheme::Cholesky => f.write_str("cholesky"),
        }
    }
}

impl std::str::FromStr for WhiteningScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zca" | "zca-cor" | "zca_cor" => Ok(WhiteningScheme::ZcaCor),
            "cholesky" | "chol" => Ok(WhiteningScheme::Cholesky),
            other => Err(Error::InvalidParameter(format!(
                "unknown whitening scheme '{other}'"
            ))),
        }
    }
}

/// What to do when a vector that must be positive is not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftPolicy {
    /// Add `−min + 1e-9·range` and report the shift.
    #[default]
    Shift,
    Reject,
}

/// Builds the sample that plays the `Y` role of an RGX computation, shifting
/// it to positive values when the policy allows. Returns the applied shift.
pub fn positive_sample(values: Vec<f64>, policy: ShiftPolicy) -> Result<(RankedSample<f64>, f64)> {
    match policy {
        ShiftPolicy::Shift => RankedSample::shifted_to_positive(values),
        ShiftPolicy::Reject => Ok((RankedSample::new(values)?, 0.0)),
    }
}

fn column_stats(data: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::TooShort { min: 2, got: n });
    }
    let mut means = Vec::with_capacity(data.ncols());
    let mut sds = Vec::with_capacity(data.ncols());
    for (j, col) in data.column_iter().enumerate() {
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i * data.ncols() + j });
        }
        let mean = col.sum() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if !(sd > 0.0) {
            return Err(Error::Degenerate(format!(
                "column {j} is constant; its correlation is undefined"
            )));
        }
        means.push(mean);
        sds.push(sd);
    }
    Ok((means, sds))
}

/// Pearson correlation matrix of the columns of an `n × d` data matrix.
pub fn correlation_matrix(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (means, sds) = column_stats(data)?;
    Ok(correlation_from(data, &means, &sds))
}

fn correlation_from(data: &DMatrix<f64>, means: &[f64], sds: &[f64]) -> DMatrix<f64> {
    let n = data.nrows() as f64;
    let d = data.ncols();
    let mut z = data.clone();
    for j in 0..d {
        for v in z.column_mut(j).iter_mut() {
            *v = (*v - means[j]) / sds[j];
        }
    }
    let mut c = z.transpose() * &z / (n - 1.0);
    for i in 0..d {
        c[(i, i)] = 1.0;
        for j in 0..i {
            let v = (0.5 * (c[(i, j)] + c[(j, i)])).clamp(-1.0, 1.0);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Eigendecomposition with the singularity check applied.
fn checked_eigen(c: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let eig = SymmetricEigen::new(c.clone());
    let max = eig.eigenvalues.max();
    let (idx, &min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite eigenvalues"))
        .expect("non-empty");
    if !(min > SINGULARITY_RATIO * max) {
        return Err(Error::Singular {
            eigenvalue: min,
            direction: eig.eigenvectors.column(idx).iter().copied().collect(),
        });
    }
    Ok(eig)
}

/// A fitted whitening map together with the λ weights derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TransformRecord", try_from = "TransformRecord")]
pub struct WhiteningTransform {
    scheme: WhiteningScheme,
    matrix: DMatrix<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
    whitened_means: Vec<f64>,
    lambdas: Option<Vec<f64>>,
}

impl WhiteningTransform {
    pub fn fit(data: &DMatrix<f64>, scheme: WhiteningScheme) -> Result<Self> {
        match scheme {
            WhiteningScheme::ZcaCor => fit_zca_cor(data),
            WhiteningScheme::Cholesky => fit_cholesky(data),
        }
    }

    fn from_parts(
        scheme: WhiteningScheme,
        matrix: DMatrix<f64>,
        means: Vec<f64>,
        scales: Vec<f64>,
    ) -> Self {
        let scaled_mean = DVector::from_iterator(
            means.len(),
            means.iter().zip(scales.iter()).map(|(m, s)| m / s),
        );
        let whitened_means: Vec<f64> = (&matrix * scaled_mean).iter().copied().collect();
        let lambdas = lambda_weights(&whitened_means).ok();
        Self {
            scheme,
            matrix,
            means,
            scales,
            whitened_means,
            lambdas,
        }
    }

    pub fn scheme(&self) -> WhiteningScheme {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    /// `W`, acting on standardised coordinates: `WᵀW = C⁻¹`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `W · diag(1/σ)`, acting on raw coordinates: its Gram matrix is the
    /// inverse covariance.
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let mut m = self.matrix.clone();
        for (j, s) in self.scales.iter().enumerate() {
            for v in m.column_mut(j).iter_mut() {
                *v /= s;
            }
        }
        m
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn whitened_means(&self) -> &[f64] {
        &self.whitened_means
    }

    /// λ weights; an error when every whitened mean is zero.
    pub fn lambdas(&self) -> Result<&[f64]> {
        self.lambdas.as_deref().ok_or_else(|| {
            Error::Degenerate(
                "all whitened means are zero; whiten the unstandardised responses so that \
                 λ weights are defined"
                    .into(),
            )
        })
    }

    fn check_width(&self, data: &DMatrix<f64>) -> Result<()> {
        if data.ncols() != self.dim() {
            return Err(Error::LengthMismatch {
                left: self.dim(),
                right: data.ncols(),
            });
        }
        Ok(())
    }

    /// Whitens the rows of `data` (uncentred).
    pub fn apply(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(data)?;
        Ok(data * self.full_matrix().transpose())
    }

    /// Whitens the rows of `data` after centring with the fitted means.
    pub fn apply_centered(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(data)?;
        let mut centred = data.clone();
        for (j, m) in self.means.iter().enumerate() {
            for v in centred.column_mut(j).iter_mut() {
                *v -= m;
            }
        }
        Ok(centred * self.full_matrix().transpose())
    }
}

#[derive(Serialize, Deserialize)]
struct TransformRecord {
    scheme: WhiteningScheme,
    matrix: Vec<Vec<f64>>,
    means: Vec<f64>,
    scales: Vec<f64>,
    whitened_means: Vec<f64>,
    lambdas: Option<Vec<f64>>,
}

impl From<WhiteningTransform> for TransformRecord {
    fn from(t: WhiteningTransform) -> Self {
        let matrix = t
            .matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        Self {
            scheme: t.scheme,
            matrix,
            means: t.means,
            scales: t.scales,
            whitened_means: t.whitened_means,
            lambdas: t.lambdas,
        }
    }
}

impl TryFrom<TransformRecord> for WhiteningTransform {
    type Error = String;

    fn try_from(r: TransformRecord) -> std::result::Result<Self, String> {
        let d = r.scales.len();
        if r.matrix.len() != d || r.matrix.iter().any(|row| row.len() != d) || r.means.len() != d {
            return Err(format!("whitening record is not {d}×{d}"));
        }
        let matrix = DMatrix::from_fn(d, d, |i, j| r.matrix[i][j]);
        Ok(Self {
            scheme: r.scheme,
            matrix,
            means: r.means,
            scales: r.scales,
            whitened_means: r.whitened_means,
            lambdas: r.lambdas,
        })
    }
}

/// ZCA-cor whitening: `C = O D Oᵀ`, `W = O D^{−1/2} Oᵀ`.
pub fn fit_zca_cor(data: &DMatrix<f64>) -> Result<WhiteningTransform> {
    let (means, scales) = column_stats(data)?;
    let c = correlation_from(data, &means, &scales);
    let eig = checked_eigen(&c)?;
    let o = &eig.eigenvectors;
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.sqrt().recip()));
    let w = o * inv_sqrt * o.transpose();
    let w = 0.5 * (&w + w.transpose());
    Ok(WhiteningTransform::from_parts(
        WhiteningScheme::ZcaCor,
        w,
        means,
        scales,
    ))
}

/// Cholesky whitening: `W = Lᵀ` with `L Lᵀ = C⁻¹`, `L` lower triangular.
pub fn fit_cholesky(data: &DMatrix<f64>) -> Result<WhiteningTransform> {
    let (means, scales) = column_stats(data)?;
    let c = correlation_from(data, &means, &scales);
    let eig = checked_eigen(&c)?;
    let o = &eig.eigenvectors;
    let inv = o * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::recip)) * o.transpose();
    let inv = 0.5 * (&inv + inv.transpose());
    let chol = nalgebra::Cholesky::new(inv).ok_or_else(|| Error::Singular {
        eigenvalue: eig.eigenvalues.min(),
        direction: Vec::new(),
    })?;
    let w = chol.l().transpose();
    Ok(WhiteningTransform::from_parts(
        WhiteningScheme::Cholesky,
        w,
        means,
        scales,
    ))
}

/// `λᵢ = |m*ᵢ| / Σⱼ |m*ⱼ|`.
pub fn lambda_weights(whitened_means: &[f64]) -> Result<Vec<f64>> {
    if whitened_means.is_empty() {
        return Err(Error::Empty("whitened means".into()));
    }
    let total: f64 = whitened_means.iter().map(|m| m.abs()).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate(
            "all whitened means are zero; λ weights are undefined".into(),
        ));
    }
    Ok(whitened_means.iter().map(|m| m.abs() / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateGini {
    pub value: f64,
    pub per_coordinate: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub shifts: Vec<f64>,
}

/// `Σᵢ λᵢ G(Y*ᵢ)` over the whitened coordinates of `data`.
pub fn multivariate_gini(
    data: &DMatrix<f64>,
    transform: &WhiteningTransform,
    policy: ShiftPolicy,
) -> Result<MultivariateGini> {
    let whitened = transform.apply(data)?;
    let lambdas = transform.lambdas()?.to_vec();
    let mut per_coordinate = Vec::with_capacity(whitened.ncols());
    let mut shifts = Vec::with_capacity(whitened.ncols());
    for col in whitened.column_iter() {
        let (s, shift) = positive_sample(col.iter().copied().collect(), policy)?;
        if s.is_constant() {
            return Err(Error::Degenerate("whitened coordinate is constant".into()));
        }
        per_coordinate.push(gini(&s));
        shifts.push(shift);
    }
    let value = lambdas
        .iter()
        .zip(per_coordinate.iter())
        .map(|(l, g)| l * g)
        .sum();
    Ok(MultivariateGini {
        value,
        per_coordinate,
        lambdas,
        shifts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateRgx {
    pub value: f64,
    pub per_coordinate: Vec<RgxResult<f64>>,
    pub lambdas: Vec<f64>,
    /// Shift applied to each whitened coordinate of `Y` (zero when it was
    /// already positive).
    pub shifts: Vec<f64>,
    pub transform: WhiteningTransform,
}

/// `Σᵢ λᵢ RGX_p(Y*ᵢ, Z*ᵢ)`, where both `Y` and `Z` are whitened with the
/// matrix fitted on `Y` and λ comes from the whitened means of `Y`.
pub fn multivariate_rgx_p(
    y: &DMatrix<f64>,
    z: &DMatrix<f64>,
    p: f64,
    scheme: WhiteningScheme,
    policy: ShiftPolicy,
) -> Result<MultivariateRgx> {
    if y.shape() != z.shape() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: z.len(),
        });
    }
    let transform = WhiteningTransform::fit(y, scheme)?;
    let lambdas = transform.lambdas()?.to_vec();
    let wy = transform.apply(y)?;
    let wz = transform.apply(z)?;
    let mut per_coordinate = Vec::with_capacity(wy.ncols());
    let mut shifts = Vec::with_capacity(wy.ncols());
    for j in 0..wy.ncols() {
        let yj: Vec<f64> = wy.column(j).iter().copied().collect();
        let zj: Vec<f64> = wz.column(j).iter().copied().collect();
        let (s, shift) = positive_sample(yj, policy)?;
        per_coordinate.push(rgx_p(&s, &zj, p)?);
        shifts.push(shift);
    }
    let value = lambdas
        .iter()
        .zip(per_coordinate.iter())
        .map(|(l, r)| l * r.value)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(MultivariateRgx {
        value,
        per_coordinate,
        lambdas,
        shifts,
        transform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_like(w: &DMatrix<f64>, tol: f64) -> bool {
        let d = w.nrows();
        (0..d).all(|i| (0..d).all(|j| (w[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < tol))
    }

    #[test]
    fn pearson_hand_example() {
        let data = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1.0, 2.0, 4.0]);
        let c = correlation_matrix(&data).unwrap();
        let want = 4.0 / (2.0f64 * 78.0 / 9.0).sqrt();
        assert!((c[(0, 1)] - want).abs() < 1e-12);
        assert!((c[(0, 1)] - 0.9608).abs() < 1e-4);
        assert_eq!(c[(0, 0)], 1.0);
    }

    #[test]
    fn constant_column_rejected() {
        let data = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 3.0, 1.0, 5.0]);
        assert!(matches!(
            correlation_matrix(&data),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn collinear_columns_are_singular() {
        let data = DMatrix::from_fn(10, 2, |i, j| (i as f64 + 1.0) * if j == 0 { 1.0 } else { 2.0 });
        let c = correlation_matrix(&data).unwrap();
        assert!((c[(0, 1)] - 1.0).abs() < 1e-12);
        for scheme in [WhiteningScheme::ZcaCor, WhiteningScheme::Cholesky] {
            match WhiteningTransform::fit(&data, scheme) {
                Err(Error::Singular { direction, .. }) => {
                    assert_eq!(direction.len(), 2);
                    assert!((direction[0].abs() - direction[1].abs()).abs() < 1e-6);
                }
                other => panic!("expected singular error, got {other:?}"),
            }
        }
    }

    #[test]
    fn zca_two_by_two_closed_form() {
        // data whose sample correlation is exactly 0.5: x = a, y = a/2 + (√3/2) b with
        // a, b centred, orthogonal and of equal norm
        let a = [1.0, -1.0, 1.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0];
        let h = 3.0f64.sqrt() / 2.0;
        let data = DMatrix::from_fn(4, 2, |i, j| {
            if j == 0 {
                a[i] + 3.0
            } else {
                0.5 * a[i] + h * b[i] + 3.0
            }
        });
        let c = correlation_matrix(&data).unwrap();
        assert!((c[(0, 1)] - 0.5).abs() < 1e-12);
        let t = fit_zca_cor(&data).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let o = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.5f64.powf(-0.5), 0.5f64.powf(-0.5)]));
        let want = &o * d * o.transpose();
        assert!((t.matrix() - want).abs().max() < 1e-12);
    }

    #[test]
    fn identity_correlation_gives_identity() {
        let a = [1.0, -1.0, 1.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0];
        let data = DMatrix::from_fn(4, 2, |i, j| if j == 0 { a[i] + 5.0 } else { 2.0 * b[i] + 1.0 });
        for scheme in [WhiteningScheme::ZcaCor, WhiteningScheme::Cholesky] {
            let t = WhiteningTransform::fit(&data, scheme).unwrap();
            assert!(identity_like(t.matrix(), 1e-12), "{scheme}");
        }
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_weights(&[2.0, -2.0, 2.0]).unwrap(), vec![1.0 / 3.0; 3]);
        let l = lambda_weights(&[0.4129 * 7.0, -0.2721 * 7.0, 0.3150 * 7.0]).unwrap();
        for (got, want) in l.iter().zip([0.4129, 0.2721, 0.3150]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(matches!(
            lambda_weights(&[0.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn transform_json_round_trip() {
        let data = DMatrix::from_row_slice(
            5,
            2,
            &[1.0, 2.0, 2.0, 2.5, 3.0, 5.0, 4.0, 4.5, 6.0, 7.0],
        );
        let t = fit_cholesky(&data).unwrap();
        let text = serde_json::to_string(&t).unwrap();
        let back: WhiteningTransform = serde_json::from_str(&text).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("zca".parse::<WhiteningScheme>().unwrap(), WhiteningScheme::ZcaCor);
        assert_eq!("Cholesky".parse::<WhiteningScheme>().unwrap(), WhiteningScheme::Cholesky);
        assert!("pca".parse::<WhiteningScheme>().is_err());
    }
}
