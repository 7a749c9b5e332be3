//! Fold splitting, prediction perturbation and seed derivation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixes a base seed with a path of indices into an independent stream
/// seed (SplitMix64 finaliser applied after each component).
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

pub fn rng_for(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}

/// Splits `0..n` into `k` disjoint test folds of near-equal size after a
/// seeded shuffle. Indices inside each fold are sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::TooShort { min: k, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = idx[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

/// Indices of `0..n` that are not in `fold` (which must be sorted).
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| fold.binary_search(i).is_err()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub values: Vec<f64>,
    /// Sample standard deviation of the unperturbed predictions.
    pub sigma: f64,
    /// Set when the predictions were constant and returned unchanged.
    pub degenerate: bool,
}

/// Adds `N(0, (scale·σ̂)²)` noise to each prediction.
pub fn perturb(predictions: &[f64], scale: f64, seed: u64) -> Result<Perturbation> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "perturbation scale must be positive, got {scale}"
        )));
    }
    if predictions.len() < 2 {
        return Err(Error::TooShort {
            min: 2,
            got: predictions.len(),
        });
    }
    if let Some(i) = predictions.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let sigma = sample_sd(predictions);
    if !(sigma > 0.0) {
        return Ok(Perturbation {
            values: predictions.to_vec(),
            sigma,
            degenerate: true,
        });
    }
    let noise = Normal::new(0.0, scale * sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = predictions.iter().map(|v| v + rng.sample(noise)).collect();
    Ok(Perturbation {
        values,
        sigma,
        degenerate: false,
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (`n − 1` denominator); zero for fewer than two
/// values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}
