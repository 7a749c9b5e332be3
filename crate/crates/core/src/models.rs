//! Prediction models used by the evaluation pipelines: ordinary least
//! squares and a one-hidden-layer ReLU network.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one mark the design
/// as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ols,
    Mlp,
}

impl ModelKind {
    /// Short label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ols => "LM",
            ModelKind::Mlp => "NN",
        }
    }

    pub(crate) fn tag(self) -> u64 {
        match self {
            ModelKind::Ols => 1,
            ModelKind::Mlp => 2,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" | "lm" | "linear" => Ok(ModelKind::Ols),
            "mlp" | "nn" => Ok(ModelKind::Mlp),
            other => Err(Error::InvalidParameter(format!("unknown model kind '{other}'"))),
        }
    }
}

fn check_xy(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.nrows(),
        });
    }
    if y.ncols() == 0 {
        return Err(Error::Empty("targets".into()));
    }
    if let Some(i) = x.iter().chain(y.iter()).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    Ok(())
}

/// Linear model `ŷ = β₀ + xᵀβ`, one column of coefficients per output.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsModel {
    pub intercept: DVector<f64>,
    /// `k × m`
    pub coefficients: DMatrix<f64>,
}

impl OlsModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x * &self.coefficients;
        for mut row in out.row_iter_mut() {
            row += self.intercept.transpose();
        }
        out
    }
}

/// Least squares with an intercept, solved through the SVD of the design.
pub fn fit_ols(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<OlsModel> {
    check_xy(x, y)?;
    let (n, k) = x.shape();
    if n <= k + 1 {
        return Err(Error::TooShort { min: k + 2, got: n });
    }
    let design = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let svd = design.svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if !(min > RANK_TOLERANCE * max) {
        return Err(Error::RankDeficient {
            condition: if min > 0.0 { max / min } else { f64::INFINITY },
        });
    }
    let beta = svd
        .solve(y, 0.0)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok(OlsModel {
        intercept: beta.row(0).transpose(),
        coefficients: beta.rows(1, k).into_owned(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub max_iter: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 5,
            max_iter: 1000,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

/// Weights of a network `x ↦ W₂ relu(W₁x + b₁) + b₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// `hidden × inputs`
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// `outputs × hidden`
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl MlpParams {
    /// Uniform initialisation on `±1/√fan_in`, zero biases. Input columns are
    /// drawn one at a time so dropping a column leaves the other draws intact.
    pub fn init(inputs: usize, hidden: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = 1.0 / (inputs.max(1) as f64).sqrt();
        let mut w1 = DMatrix::zeros(hidden, inputs);
        for j in 0..inputs {
            for i in 0..hidden {
                w1[(i, j)] = rng.random_range(-a1..a1);
            }
        }
        let a2 = 1.0 / (hidden as f64).sqrt();
        let w2 = DMatrix::from_fn(outputs, hidden, |_, _| rng.random_range(-a2..a2));
        Self {
            w1,
            b1: DVector::zeros(hidden),
            w2,
            b2: DVector::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w2.nrows()
    }

    /// Removes the given input columns from the first layer.
    pub fn drop_inputs(&self, columns: &[usize]) -> Self {
        let keep: Vec<usize> = (0..self.inputs()).filter(|j| !columns.contains(j)).collect();
        let w1 = DMatrix::from_fn(self.hidden(), keep.len(), |i, j| self.w1[(i, keep[j])]);
        Self {
            w1,
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameters in the order `W₁, b₁, W₂, b₂` (matrices row-major).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend(self.w1.transpose().iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.transpose().iter());
        out.extend(self.b2.iter());
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "flat parameter length");
        let (h, k, m) = (self.hidden(), self.inputs(), self.outputs());
        let mut it = flat.iter().copied();
        for i in 0..h {
            for j in 0..k {
                self.w1[(i, j)] = it.next().unwrap();
            }
        }
        for v in self.b1.iter_mut() {
            *v = it.next().unwrap();
        }
        for i in 0..m {
            for j in 0..h {
                self.w2[(i, j)] = it.next().unwrap();
            }
        }
        for v in self.b2.iter_mut() {
            *v = it.next().unwrap();
        }
    }

    fn hidden_pre(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * self.w1.transpose();
        for mut row in z.row_iter_mut() {
            row += self.b1.transpose();
        }
        z
    }

    fn output(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = h * self.w2.transpose();
        for mut row in out.row_iter_mut() {
            row += self.b2.transpose();
        }
        out
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.output(&self.hidden_pre(x).map(|v| v.max(0.0)))
    }

    /// Mean squared error over all entries of `y`.
    pub fn loss(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        let r = self.forward(x) - y;
        r.norm_squared() / r.len() as f64
    }

    /// Loss and its gradient with respect to every parameter, by
    /// backpropagation.
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> (f64, MlpParams) {
        let z = self.hidden_pre(x);
        let h = z.map(|v| v.max(0.0));
        let r = self.output(&h) - y;
        let scale = 1.0 / r.len() as f64;
        let loss = r.norm_squared() * scale;
        let d_out = r * (2.0 * scale);
        let w2 = d_out.transpose() * &h;
        let b2 = row_sums(&d_out);
        let mut d_z = &d_out * &self.w2;
        d_z.zip_apply(&z, |g, zv| {
            if zv <= 0.0 {
                *g = 0.0
            }
        });
        let w1 = d_z.transpose() * x;
        let b1 = row_sums(&d_z);
        (loss, MlpParams { w1, b1, w2, b2 })
    }
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

/// A trained network together with the target standardisation it learned
/// on.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub params: MlpParams,
    pub target_mean: Vec<f64>,
    pub target_scale: Vec<f64>,
    pub config: MlpConfig,
    /// Training loss (standardised targets) before the first step.
    pub initial_loss: f64,
    pub final_loss: f64,
}

impl MlpModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.params.forward(x);
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= self.target_scale[j];
            col.add_scalar_mut(self.target_mean[j]);
        }
        out
    }
}

pub fn fit_mlp(x: &DMatrix<f64>, y: &DMatrix<f64>, config: &MlpConfig) -> Result<MlpModel> {
    let init = MlpParams::init(x.ncols(), config.hidden, y.ncols(), config.seed);
    fit_mlp_from(x, y, config, init)
}

/// Trains from the given starting weights with full-batch Adam on the mean
/// squared error of standardised targets.
pub fn fit_mlp_from(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    config: &MlpConfig,
    init: MlpParams,
) -> Result<MlpModel> {
    check_xy(x, y)?;
    if config.hidden == 0 {
        return Err(Error::InvalidParameter("hidden size must be at least 1".into()));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        )));
    }
    if x.nrows() < 2 {
        return Err(Error::TooShort { min: 2, got: x.nrows() });
    }
    if init.inputs() != x.ncols() || init.outputs() != y.ncols() || init.hidden() != config.hidden {
        return Err(Error::InvalidParameter(
            "initial weights do not match the data shape".into(),
        ));
    }
    let n = y.nrows() as f64;
    let mut target_mean = Vec::with_capacity(y.ncols());
    let mut target_scale = Vec::with_capacity(y.ncols());
    let mut ys = y.clone();
    for mut col in ys.column_iter_mut() {
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        col.apply(|v| *v = (*v - mean) / scale);
        target_mean.push(mean);
        target_scale.push(scale);
    }

    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let mut params = init;
    let mut theta = params.to_flat();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut initial_loss = f64::NAN;
    for t in 0..config.max_iter {
        let (l, grad) = params.loss_and_gradient(x, &ys);
        if !l.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: t });
        }
        if t == 0 {
            initial_loss = l;
        }
        let g = grad.to_flat();
        let b1t = 1.0 - BETA1.powi(t as i32 + 1);
        let b2t = 1.0 - BETA2.powi(t as i32 + 1);
        for i in 0..theta.len() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            theta[i] -= config.learning_rate * (m[i] / b1t) / ((v[i] / b2t).sqrt() + EPS);
        }
        params.set_flat(&theta);
    }
    let final_loss = params.loss(x, &ys);
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            iteration: config.max_iter,
        });
    }
    if config.max_iter == 0 {
        initial_loss = final_loss;
    }
    Ok(MlpModel {
        params,
        target_mean,
        target_scale,
        config: config.clone(),
        initial_loss,
        final_loss,
    })
}

/// A trained model of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelAdapter {
    Ols(OlsModel),
    Mlp(MlpModel),
}

impl ModelAdapter {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelAdapter::Ols(_) => ModelKind::Ols,
            ModelAdapter::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            ModelAdapter::Ols(m) => m.predict(x),
            ModelAdapter::Mlp(m) => m.predict(x),
        }
    }
}
