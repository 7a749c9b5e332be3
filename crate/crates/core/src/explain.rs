//! Monte Carlo permutation Shapley values, importance normalisation and
//! rank coherence between importance vectors.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{derive_seed, rng_for};
use crate::data::{Dataset, FeatureGroup};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::safe::{fit_model, prepare_folds, SafeConfig, Summary, PURPOSE_INIT, PURPOSE_SHAPLEY};

/// Permutations per instance when none is given.
pub const DEFAULT_PERMUTATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyResult {
    pub features: Vec<String>,
    /// `n_explain × d` per-instance contributions.
    pub contributions: Vec<Vec<f64>>,
    /// Standard error of each contribution across permutations (zero when
    /// only one permutation was drawn).
    pub standard_errors: Vec<Vec<f64>>,
    /// Mean absolute contribution per feature.
    pub mean_abs: Vec<f64>,
    pub mean_abs_se: Vec<f64>,
    /// Percentages summing to 100; `None` when every contribution is zero.
    pub importance: Option<Vec<f64>>,
    /// Mean prediction over the background rows.
    pub baseline: f64,
    pub permutations: usize,
    pub seed: u64,
}

/// Permutation Shapley values with marginal imputation: for each sampled
/// ordering one background row supplies the values of features outside the
/// coalition. Each group of input columns is treated as one player.
pub fn shapley_mc<F>(
    predict: F,
    background: &DMatrix<f64>,
    explain: &DMatrix<f64>,
    groups: &[FeatureGroup],
    permutations: usize,
    seed: u64,
) -> Result<ShapleyResult>
where
    F: Fn(&DMatrix<f64>) -> Vec<f64> + Sync,
{
    if background.nrows() == 0 {
        return Err(Error::Empty("background set".into()));
    }
    if explain.nrows() == 0 {
        return Err(Error::Empty("instances to explain".into()));
    }
    if permutations == 0 {
        return Err(Error::InvalidParameter("at least one permutation is required".into()));
    }
    if groups.is_empty() {
        return Err(Error::Empty("feature groups".into()));
    }
    let width = background.ncols();
    if explain.ncols() != width {
        return Err(Error::LengthMismatch {
            left: width,
            right: explain.ncols(),
        });
    }
    if groups.iter().any(|g| g.columns.end > width) {
        return Err(Error::InvalidParameter("feature group exceeds the input width".into()));
    }
    let d = groups.len();
    let m = permutations;

    let per_instance: Vec<(Vec<f64>, Vec<f64>)> = (0..explain.nrows())
        .into_par_iter()
        .map(|i| {
            let mut rows = DMatrix::zeros(m * (d + 1), width);
            let mut orders = Vec::with_capacity(m);
            for k in 0..m {
                let mut rng = rng_for(seed, &[i as u64, k as u64]);
                let mut order: Vec<usize> = (0..d).collect();
                order.shuffle(&mut rng);
                let b = rng.random_range(0..background.nrows());
                let base = k * (d + 1);
                rows.row_mut(base).copy_from(&background.row(b));
                for (t, &g) in order.iter().enumerate() {
                    let prev = rows.row(base + t).into_owned();
                    let mut row = rows.row_mut(base + t + 1);
                    row.copy_from(&prev);
                    for c in groups[g].columns.clone() {
                        row[c] = explain[(i, c)];
                    }
                }
                orders.push(order);
            }
            let f = predict(&rows);
            let mut sum = vec![0.0; d];
            let mut sum_sq = vec![0.0; d];
            for (k, order) in orders.iter().enumerate() {
                let base = k * (d + 1);
                for (t, &g) in order.iter().enumerate() {
                    let delta = f[base + t + 1] - f[base + t];
                    sum[g] += delta;
                    sum_sq[g] += delta * delta;
                }
            }
            let mf = m as f64;
            let phi: Vec<f64> = sum.iter().map(|s| s / mf).collect();
            let se = phi
                .iter()
                .zip(&sum_sq)
                .map(|(mu, ss)| {
                    if m < 2 {
                        0.0
                    } else {
                        ((ss - mf * mu * mu).max(0.0) / (mf - 1.0) / mf).sqrt()
                    }
                })
                .collect();
            (phi, se)
        })
        .collect();

    let n = explain.nrows() as f64;
    let (contributions, standard_errors): (Vec<Vec<f64>>, Vec<Vec<f64>>) = per_instance.into_iter().unzip();
    let mean_abs: Vec<f64> = (0..d)
        .map(|j| contributions.iter().map(|r| r[j].abs()).sum::<f64>() / n)
        .collect();
    let mean_abs_se: Vec<f64> = (0..d)
        .map(|j| standard_errors.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt() / n)
        .collect();
    let base = predict(background);
    let baseline = base.iter().sum::<f64>() / base.len() as f64;
    Ok(ShapleyResult {
        features: groups.iter().map(|g| g.name.clone()).collect(),
        contributions,
        standard_errors,
        importance: normalize_importance(&mean_abs).ok(),
        mean_abs,
        mean_abs_se,
        baseline,
        permutations,
        seed,
    })
}

/// `100 · φ̄ⱼ / Σₖ φ̄ₖ`.
pub fn normalize_importance(phi_bar: &[f64]) -> Result<Vec<f64>> {
    if phi_bar.is_empty() {
        return Err(Error::Empty("importances".into()));
    }
    if let Some(i) = phi_bar.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "importance at position {i} must be finite and non-negative"
        )));
    }
    let total: f64 = phi_bar.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("all importances are zero".into()));
    }
    Ok(phi_bar.iter().map(|v| 100.0 * v / total).collect())
}

/// `Σₖ λₖ · Importance⁽ᵏ⁾`, one row of `per_dim` per target dimension.
pub fn aggregate_multivariate_importance(per_dim: &[Vec<f64>], lambdas: &[f64]) -> Result<Vec<f64>> {
    if per_dim.len() != lambdas.len() {
        return Err(Error::LengthMismatch {
            left: per_dim.len(),
            right: lambdas.len(),
        });
    }
    let width = per_dim.first().map_or(0, Vec::len);
    if width == 0 {
        return Err(Error::Empty("importance rows".into()));
    }
    if let Some(row) = per_dim.iter().find(|r| r.len() != width) {
        return Err(Error::LengthMismatch {
            left: width,
            right: row.len(),
        });
    }
    let total: f64 = lambdas.iter().sum();
    if lambdas.iter().any(|l| *l < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "λ weights must be non-negative and sum to 1 (sum {total})"
        )));
    }
    Ok((0..width)
        .map(|j| per_dim.iter().zip(lambdas).map(|(r, l)| l * r[j]).sum())
        .collect())
}

/// 1-based ranks in ascending order of `values`, ties sharing their
/// average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Ranks importances in descending order: 1 is the most important, ties
/// share their average rank.
pub fn rank_features(importances: &[f64]) -> Vec<f64> {
    let negated: Vec<f64> = importances.iter().map(|v| -v).collect();
    average_ranks(&negated)
}

/// Spearman's `ρ = 1 − 6Σd²/(n(n²−1))` on the average ranks of `a` and `b`.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooShort { min: 2, got: a.len() });
    }
    if let Some(i) = a.iter().chain(b).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i % a.len() });
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((1.0 - 6.0 * d2 / (n * (n * n - 1.0))).clamp(-1.0, 1.0))
}

/// Pairwise Spearman coefficients between importance vectors.
pub fn spearman_matrix(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![vec![1.0; vectors.len()]; vectors.len()];
    for i in 0..vectors.len() {
        for j in 0..i {
            let r = spearman(&vectors[i], &vectors[j])?;
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyFold {
    pub fold: usize,
    /// λ-weighted mean absolute contributions.
    pub mean_abs: Vec<f64>,
    pub mean_abs_se: Vec<f64>,
    /// λ-weighted percentage importances.
    pub importance: Vec<f64>,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyFeatureSummary {
    pub feature: String,
    pub shapley: Summary,
    pub importance: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    /// Target name, or "Multivariate".
    pub label: String,
    pub model: ModelKind,
    pub features: Vec<String>,
    pub permutations: usize,
    pub seed: u64,
    pub summary: Vec<ShapleyFeatureSummary>,
    pub folds: Vec<ShapleyFold>,
}

impl ShapleyReport {
    pub fn mean_importance(&self) -> Vec<f64> {
        self.summary.iter().map(|s| s.importance.mean).collect()
    }
}

/// Cross-validated Shapley importances: each fold's model is explained on
/// its test rows against its training rows. With several targets the
/// whitened prediction coordinates are explained separately and combined
/// with the fold's λ weights.
pub fn run_shapley_cv(
    ds: &Dataset,
    targets: &[String],
    features: &[String],
    config: &SafeConfig,
    permutations: usize,
) -> Result<Vec<ShapleyReport>> {
    let multivariate = targets.len() > 1;
    let folds = prepare_folds(ds, targets, features, config, multivariate)?;
    let mut reports = Vec::with_capacity(config.models.len());
    for &kind in &config.models {
        let records = folds
            .par_iter()
            .map(|fold| -> Result<ShapleyFold> {
                let train = fold.design(ds, features, kind, false)?;
                let test = fold.design(ds, features, kind, true)?;
                let init_seed =
                    derive_seed(config.seed, &[fold.index as u64 + 1, kind.tag(), PURPOSE_INIT]);
                let model = fit_model(
                    kind,
                    &train.matrix,
                    &fold.y_train,
                    config,
                    multivariate,
                    init_seed,
                    train.n_inputs(),
                    &[],
                )?;
                let lambdas = fold.lambdas()?;
                let mut mean_abs = Vec::with_capacity(lambdas.len());
                let mut se = Vec::with_capacity(lambdas.len());
                let mut importance = Vec::with_capacity(lambdas.len());
                for j in 0..lambdas.len() {
                    let seed = derive_seed(
                        config.seed,
                        &[fold.index as u64 + 1, kind.tag(), PURPOSE_SHAPLEY, j as u64],
                    );
                    let predict = |x: &DMatrix<f64>| -> Vec<f64> {
                        let out = fold
                            .whiten(&model.predict(x))
                            .expect("prediction width matches the fitted targets");
                        out.column(j).iter().copied().collect()
                    };
                    let r = shapley_mc(predict, &train.matrix, &test.matrix, &train.groups, permutations, seed)?;
                    importance.push(r.importance.clone().ok_or_else(|| {
                        Error::Degenerate("model output does not depend on any feature".into())
                    })?);
                    mean_abs.push(r.mean_abs);
                    se.push(r.mean_abs_se);
                }
                let combine = |rows: &[Vec<f64>]| -> Vec<f64> {
                    (0..features.len())
                        .map(|k| rows.iter().zip(&lambdas).map(|(r, l)| l * r[k]).sum())
                        .collect()
                };
                let se_combined = (0..features.len())
                    .map(|k| {
                        se.iter()
                            .zip(&lambdas)
                            .map(|(r, l)| (l * r[k]).powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect();
                Ok(ShapleyFold {
                    fold: fold.index,
                    mean_abs: combine(&mean_abs),
                    mean_abs_se: se_combined,
                    importance: aggregate_multivariate_importance(&importance, &lambdas)?,
                    lambdas,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let summary = features
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let s: Vec<f64> = records.iter().map(|f| f.mean_abs[k]).collect();
                let i: Vec<f64> = records.iter().map(|f| f.importance[k]).collect();
                ShapleyFeatureSummary {
                    feature: name.clone(),
                    shapley: Summary::of(&s),
                    importance: Summary::of(&i),
                }
            })
            .collect();
        reports.push(ShapleyReport {
            label: if multivariate {
                "Multivariate".into()
            } else {
                targets[0].clone()
            },
            model: kind,
            features: features.to_vec(),
            permutations,
            seed: config.seed,
            summary,
            folds: records,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(d: usize) -> Vec<FeatureGroup> {
        (0..d)
            .map(|j| FeatureGroup {
                name: format!("f{j}"),
                columns: j..j + 1,
            })
            .collect()
    }

    #[test]
    fn constant_model_has_zero_contributions() {
        let bg = DMatrix::from_fn(5, 2, |i, j| (i + j) as f64);
        let r = shapley_mc(|x| vec![3.0; x.nrows()], &bg, &bg, &groups(2), 10, 1).unwrap();
        assert!(r.contributions.iter().flatten().all(|v| *v == 0.0));
        assert!(r.importance.is_none());
    }

    #[test]
    fn shapley_errors() {
        let bg = DMatrix::<f64>::zeros(0, 2);
        let x = DMatrix::from_element(1, 2, 1.0);
        assert!(shapley_mc(|x| vec![0.0; x.nrows()], &bg, &x, &groups(2), 10, 1).is_err());
        assert!(shapley_mc(|x| vec![0.0; x.nrows()], &x, &x, &groups(2), 0, 1).is_err());
    }

    #[test]
    fn importance_examples() {
        assert_eq!(normalize_importance(&[1.0, 1.0, 2.0]).unwrap(), vec![25.0, 25.0, 50.0]);
        assert_eq!(normalize_importance(&[0.3]).unwrap(), vec![100.0]);
        assert!(normalize_importance(&[0.0, 0.0]).is_err());
        let rows = vec![vec![50.0, 50.0], vec![10.0, 90.0], vec![30.0, 70.0]];
        assert_eq!(aggregate_multivariate_importance(&rows, &[1.0, 0.0, 0.0]).unwrap(), rows[0]);
        assert!(aggregate_multivariate_importance(&rows, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap(), 0.5);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn feature_ranks() {
        assert_eq!(rank_features(&[50.0, 30.0, 20.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(rank_features(&[40.0, 40.0, 20.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
