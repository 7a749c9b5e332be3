//! Cross-validated accuracy, robustness and explainability (RGA, RGR, RGE)
//! for univariate and whitened multivariate targets.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{complement, derive_seed, kfold_split, mean, perturb, sample_sd};
use crate::data::{encode_features, fit_standardization, ColumnKind, Dataset, Design, Encoding};
use crate::error::{Error, Result};
use crate::models::{fit_mlp_from, fit_ols, MlpConfig, MlpParams, ModelAdapter, ModelKind};
use crate::rgx::rgx_p;
use crate::whitening::{positive_sample, ShiftPolicy, WhiteningScheme, WhiteningTransform};

pub(crate) const PURPOSE_INIT: u64 = 1;
pub(crate) const PURPOSE_PERTURB: u64 = 2;
pub(crate) const PURPOSE_SHAPLEY: u64 = 3;

/// Which rows the target whitening is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WhiteningScope {
    /// Training rows of each fold.
    #[default]
    Fold,
    /// All rows, once.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafeConfig {
    pub folds: usize,
    pub p: f64,
    pub perturbation_scale: f64,
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub hidden_univariate: usize,
    pub hidden_multivariate: usize,
    pub max_iter: usize,
    pub learning_rate: f64,
    pub positivity: ShiftPolicy,
    pub scheme: WhiteningScheme,
    pub whitening_scope: WhiteningScope,
}

impl Default for SafeConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            p: 1.0,
            perturbation_scale: 0.5,
            seed: 0,
            models: vec![ModelKind::Ols, ModelKind::Mlp],
            hidden_univariate: 5,
            hidden_multivariate: 10,
            max_iter: 1000,
            learning_rate: 0.01,
            positivity: ShiftPolicy::Shift,
            scheme: WhiteningScheme::ZcaCor,
            whitening_scope: WhiteningScope::Fold,
        }
    }
}

impl SafeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must be positive, got {}", self.p)));
        }
        if !(self.perturbation_scale > 0.0 && self.perturbation_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "perturbation scale must be positive, got {}",
                self.perturbation_scale
            )));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidParameter("no model kinds selected".into()));
        }
        if self.hidden_univariate == 0 || self.hidden_multivariate == 0 {
            return Err(Error::InvalidParameter("hidden size must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn mlp_config(&self, multivariate: bool, seed: u64) -> MlpConfig {
        MlpConfig {
            hidden: if multivariate {
                self.hidden_multivariate
            } else {
                self.hidden_univariate
            },
            max_iter: self.max_iter,
            learning_rate: self.learning_rate,
            seed,
        }
    }
}

/// A graduation value together with the shift applied to the vector in
/// the response role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Graded {
    pub value: f64,
    pub shift: f64,
}

fn graded(y: &[f64], z: &[f64], p: f64, policy: ShiftPolicy) -> Result<Graded> {
    let (sample, shift) = positive_sample(y.to_vec(), policy)?;
    Ok(Graded {
        value: rgx_p(&sample, z, p)?.value,
        shift,
    })
}

/// Accuracy: `RGX_p(truth, prediction)`.
pub fn rga(y_true: &[f64], y_pred: &[f64], p: f64, policy: ShiftPolicy) -> Result<Graded> {
    graded(y_true, y_pred, p, policy)
}

/// Robustness: `RGX_p(prediction, perturbed prediction)`.
pub fn rgr(y_pred: &[f64], y_perturbed: &[f64], p: f64, policy: ShiftPolicy) -> Result<Graded> {
    graded(y_pred, y_perturbed, p, policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rge {
    /// `1 − RGX_p(full, reduced)`: zero when removing the feature changes
    /// nothing.
    pub contribution: f64,
    /// `RGX_p(full, reduced)`.
    pub concordance: f64,
    pub shift: f64,
}

/// Explainability of one feature from full- and reduced-model predictions.
pub fn rge(y_full: &[f64], y_reduced: &[f64], p: f64, policy: ShiftPolicy) -> Result<Rge> {
    let g = graded(y_full, y_reduced, p, policy)?;
    Ok(Rge {
        contribution: 1.0 - g.value,
        concordance: g.value,
        shift: g.shift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub sd: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: mean(values),
            sd: sample_sd(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgeRecord {
    pub feature: String,
    pub contribution: f64,
    pub concordance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub metric: String,
    pub dimension: usize,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub rga: f64,
    pub rgr: f64,
    pub rge: Vec<RgeRecord>,
    pub rga_by_dimension: Vec<f64>,
    pub rgr_by_dimension: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Non-zero positivity shifts applied in this fold.
    pub shifts: Vec<ShiftRecord>,
    pub perturbation_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub feature: String,
    pub contribution: Summary,
    pub concordance: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelKind,
    pub rga: Summary,
    pub rgr: Summary,
    pub rge: Vec<FeatureSummary>,
    pub folds: Vec<FoldRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Univariate,
    Multivariate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub mode: Mode,
    /// Column heading used in tables: the target name, or "Multivariate".
    pub label: String,
    pub targets: Vec<String>,
    pub features: Vec<String>,
    pub p: f64,
    pub seed: u64,
    pub folds: usize,
    pub perturbation_scale: f64,
    pub positivity: ShiftPolicy,
    pub scheme: Option<WhiteningScheme>,
    pub whitening_scope: Option<WhiteningScope>,
    pub hidden: usize,
    pub max_iter: usize,
    pub learning_rate: f64,
    pub sd_convention: String,
    pub rge_convention: String,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeReport {
    pub metadata: ReportMetadata,
    pub models: Vec<ModelReport>,
}

impl SafeReport {
    pub fn model(&self, kind: ModelKind) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == kind)
    }
}

/// Everything about a fold that does not depend on the model kind.
pub(crate) struct PreparedFold {
    pub index: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub stats: crate::data::StandardizationStats,
    pub y_train: DMatrix<f64>,
    pub y_test: DMatrix<f64>,
    pub transform: Option<WhiteningTransform>,
}

impl PreparedFold {
    pub fn lambdas(&self) -> Result<Vec<f64>> {
        match &self.transform {
            Some(t) => Ok(t.lambdas()?.to_vec()),
            None => Ok(vec![1.0]),
        }
    }

    /// Whitens a matrix of responses, or returns it as is for univariate
    /// runs.
    pub fn whiten(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.transform {
            Some(t) => t.apply(m),
            None => Ok(m.clone()),
        }
    }

    pub fn design(&self, ds: &Dataset, features: &[String], kind: ModelKind, test: bool) -> Result<Design> {
        let rows = if test { &self.test } else { &self.train };
        encode_features(ds, features, rows, &self.stats, encoding_for(kind))
    }
}

pub(crate) fn encoding_for(kind: ModelKind) -> Encoding {
    match kind {
        ModelKind::Ols => Encoding::DropFirst,
        ModelKind::Mlp => Encoding::Full,
    }
}

pub(crate) fn validate_columns(ds: &Dataset, targets: &[String], features: &[String]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("no target columns given".into()));
    }
    if features.is_empty() {
        return Err(Error::InvalidParameter("no feature columns given".into()));
    }
    for t in targets {
        if ds.column(t)?.kind() != ColumnKind::Continuous {
            return Err(Error::InvalidParameter(format!("target '{t}' must be numeric")));
        }
        if features.contains(t) {
            return Err(Error::InvalidParameter(format!(
                "'{t}' is used both as target and feature"
            )));
        }
    }
    for f in features {
        ds.column(f)?;
    }
    Ok(())
}

pub(crate) fn prepare_folds(
    ds: &Dataset,
    targets: &[String],
    features: &[String],
    config: &SafeConfig,
    multivariate: bool,
) -> Result<Vec<PreparedFold>> {
    config.validate()?;
    validate_columns(ds, targets, features)?;
    let n = ds.n_rows();
    let splits = kfold_split(n, config.folds, derive_seed(config.seed, &[0]))?;
    let full_transform = if multivariate && config.whitening_scope == WhiteningScope::Full {
        let all: Vec<usize> = (0..n).collect();
        Some(WhiteningTransform::fit(&ds.matrix(targets, &all)?, config.scheme)?)
    } else {
        None
    };
    splits
        .into_iter()
        .enumerate()
        .map(|(index, test)| {
            let train = complement(n, &test);
            let stats = fit_standardization(ds, &train, features)?;
            let y_train = ds.matrix(targets, &train)?;
            let y_test = ds.matrix(targets, &test)?;
            let transform = match (&full_transform, multivariate) {
                (Some(t), _) => Some(t.clone()),
                (None, true) => Some(WhiteningTransform::fit(&y_train, config.scheme)?),
                (None, false) => None,
            };
            Ok(PreparedFold {
                index,
                train,
                test,
                stats,
                y_train,
                y_test,
                transform,
            })
        })
        .collect()
}

/// Fits `kind` on the training design. For the network, `drop` removes
/// input columns from the shared initial weights so an ablated refit starts
/// from the same draws as the full model.
pub(crate) fn fit_model(
    kind: ModelKind,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    config: &SafeConfig,
    multivariate: bool,
    init_seed: u64,
    full_inputs: usize,
    drop: &[usize],
) -> Result<ModelAdapter> {
    match kind {
        ModelKind::Ols => Ok(ModelAdapter::Ols(fit_ols(x, y)?)),
        ModelKind::Mlp => {
            let cfg = config.mlp_config(multivariate, init_seed);
            let init = MlpParams::init(full_inputs, cfg.hidden, y.ncols(), init_seed).drop_inputs(drop);
            Ok(ModelAdapter::Mlp(fit_mlp_from(x, y, &cfg, init)?))
        }
    }
}

fn column(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

fn weighted(lambdas: &[f64], values: &[f64]) -> f64 {
    lambdas
        .iter()
        .zip(values)
        .map(|(l, v)| l * v)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

fn evaluate_fold(
    ds: &Dataset,
    features: &[String],
    fold: &PreparedFold,
    kind: ModelKind,
    config: &SafeConfig,
    multivariate: bool,
) -> Result<FoldRecord> {
    let policy = config.positivity;
    let p = config.p;
    let lambdas = fold.lambdas()?;
    let train_design = fold.design(ds, features, kind, false)?;
    let test_design = fold.design(ds, features, kind, true)?;
    let init_seed = derive_seed(config.seed, &[fold.index as u64 + 1, kind.tag(), PURPOSE_INIT]);
    let full_inputs = train_design.n_inputs();
    let model = fit_model(
        kind,
        &train_design.matrix,
        &fold.y_train,
        config,
        multivariate,
        init_seed,
        full_inputs,
        &[],
    )?;
    let truth = fold.whiten(&fold.y_test)?;
    let pred = fold.whiten(&model.predict(&test_design.matrix))?;
    let dims = truth.ncols();

    let mut shifts = Vec::new();
    let mut note = |metric: &str, dimension: usize, shift: f64| {
        if shift != 0.0 {
            shifts.push(ShiftRecord {
                metric: metric.to_string(),
                dimension,
                shift,
            });
        }
    };

    let mut rga_dims = Vec::with_capacity(dims);
    let mut rgr_dims = Vec::with_capacity(dims);
    let mut degenerate = false;
    let pred_cols: Vec<Vec<f64>> = (0..dims).map(|j| column(&pred, j)).collect();
    for j in 0..dims {
        let a = rga(&column(&truth, j), &pred_cols[j], p, policy)?;
        note("rga", j, a.shift);
        rga_dims.push(a.value);
        let seed = derive_seed(
            config.seed,
            &[fold.index as u64 + 1, kind.tag(), PURPOSE_PERTURB, j as u64],
        );
        let noisy = perturb(&pred_cols[j], config.perturbation_scale, seed)?;
        degenerate |= noisy.degenerate;
        let r = rgr(&pred_cols[j], &noisy.values, p, policy)?;
        note("rgr", j, r.shift);
        rgr_dims.push(r.value);
    }

    let mut rge_records = Vec::with_capacity(features.len());
    for (g, group) in train_design.groups.iter().enumerate() {
        let drop = train_design.group_columns(g);
        let reduced = fit_model(
            kind,
            &train_design.without_group(g),
            &fold.y_train,
            config,
            multivariate,
            init_seed,
            full_inputs,
            &drop,
        )?;
        let reduced_pred = fold.whiten(&reduced.predict(&test_design.without_group(g)))?;
        let mut concordance = Vec::with_capacity(dims);
        for j in 0..dims {
            let e = rge(&pred_cols[j], &column(&reduced_pred, j), p, policy)?;
            note(&format!("rge:{}", group.name), j, e.shift);
            concordance.push(e.concordance);
        }
        let conc = weighted(&lambdas, &concordance);
        rge_records.push(RgeRecord {
            feature: group.name.clone(),
            contribution: (1.0 - conc).clamp(0.0, 1.0),
            concordance: conc,
        });
    }

    Ok(FoldRecord {
        fold: fold.index,
        train_size: fold.train.len(),
        test_size: fold.test.len(),
        rga: weighted(&lambdas, &rga_dims),
        rgr: weighted(&lambdas, &rgr_dims),
        rge: rge_records,
        rga_by_dimension: rga_dims,
        rgr_by_dimension: rgr_dims,
        lambdas,
        shifts,
        perturbation_degenerate: degenerate,
    })
}

fn summarize(kind: ModelKind, features: &[String], folds: Vec<FoldRecord>) -> ModelReport {
    let rga: Vec<f64> = folds.iter().map(|f| f.rga).collect();
    let rgr: Vec<f64> = folds.iter().map(|f| f.rgr).collect();
    let rge = features
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let c: Vec<f64> = folds.iter().map(|f| f.rge[k].contribution).collect();
            let r: Vec<f64> = folds.iter().map(|f| f.rge[k].concordance).collect();
            FeatureSummary {
                feature: name.clone(),
                contribution: Summary::of(&c),
                concordance: Summary::of(&r),
            }
        })
        .collect();
    ModelReport {
        model: kind,
        rga: Summary::of(&rga),
        rgr: Summary::of(&rgr),
        rge,
        folds,
    }
}

fn run_pipeline(
    ds: &Dataset,
    targets: &[String],
    features: &[String],
    config: &SafeConfig,
    multivariate: bool,
) -> Result<SafeReport> {
    let folds = prepare_folds(ds, targets, features, config, multivariate)?;
    let mut models = Vec::with_capacity(config.models.len());
    for &kind in &config.models {
        let records = folds
            .par_iter()
            .map(|f| evaluate_fold(ds, features, f, kind, config, multivariate))
            .collect::<Result<Vec<_>>>()?;
        models.push(summarize(kind, features, records));
    }
    let metadata = ReportMetadata {
        mode: if multivariate {
            Mode::Multivariate
        } else {
            Mode::Univariate
        },
        label: if multivariate {
            "Multivariate".to_string()
        } else {
            targets[0].clone()
        },
        targets: targets.to_vec(),
        features: features.to_vec(),
        p: config.p,
        seed: config.seed,
        folds: config.folds,
        perturbation_scale: config.perturbation_scale,
        positivity: config.positivity,
        scheme: multivariate.then_some(config.scheme),
        whitening_scope: multivariate.then_some(config.whitening_scope),
        hidden: config.mlp_config(multivariate, 0).hidden,
        max_iter: config.max_iter,
        learning_rate: config.learning_rate,
        sd_convention: "sample (n-1)".into(),
        rge_convention: "contribution = 1 - RGX_p(full, reduced); concordance = RGX_p(full, reduced)"
            .into(),
        provenance: ds.provenance.clone(),
    };
    Ok(SafeReport { metadata, models })
}

/// K-fold RGA/RGR/RGE for one target.
pub fn run_univariate_pipeline(
    ds: &Dataset,
    target: &str,
    features: &[String],
    config: &SafeConfig,
) -> Result<SafeReport> {
    run_pipeline(ds, &[target.to_string()], features, config, false)
}

/// K-fold λ-weighted RGA/RGR/RGE on whitened targets.
pub fn run_multivariate_pipeline(
    ds: &Dataset,
    targets: &[String],
    features: &[String],
    config: &SafeConfig,
) -> Result<SafeReport> {
    run_pipeline(ds, targets, features, config, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_roles() {
        let y = [0.1, 0.5, 0.3, 0.9];
        assert_eq!(rga(&y, &y, 1.0, ShiftPolicy::Reject).unwrap().value, 1.0);
        assert_eq!(rgr(&y, &y, 2.0, ShiftPolicy::Reject).unwrap().value, 1.0);
        let e = rge(&y, &y, 1.0, ShiftPolicy::Reject).unwrap();
        assert_eq!(e.contribution, 0.0);
        let neg = [-1.0, 0.0, 2.0];
        assert!(rga(&neg, &neg, 1.0, ShiftPolicy::Reject).is_err());
        let g = rga(&neg, &neg, 1.0, ShiftPolicy::Shift).unwrap();
        assert!(g.shift > 1.0);
        assert_eq!(g.value, 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(SafeConfig::default().validate().is_ok());
        let bad = SafeConfig {
            folds: 1,
            ..SafeConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SafeConfig {
            p: 0.0,
            ..SafeConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn summary_uses_sample_sd() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, 1.0);
    }
}
