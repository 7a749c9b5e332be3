use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rgx_core::cv::{complement, derive_seed, kfold_split, perturb, sample_sd};
use rgx_core::models::{fit_mlp, fit_ols, MlpConfig, MlpParams};

fn gaussian(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn mse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).map(|v| v * v).mean()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn ols_matches_normal_equations(seed in any::<u64>(), n in 20usize..80, k in 1usize..6, m in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian(&mut rng, n, k);
        let y = gaussian(&mut rng, n, m);
        let model = fit_ols(&x, &y).unwrap();

        let design = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let gram = design.transpose() * &design;
        let beta = gram.try_inverse().unwrap() * design.transpose() * &y;
        for j in 0..m {
            prop_assert!((model.intercept[j] - beta[(0, j)]).abs() < 1e-8);
            for i in 0..k {
                prop_assert!((model.coefficients[(i, j)] - beta[(i + 1, j)]).abs() < 1e-8);
            }
        }

        let residual = &y - model.predict(&x);
        let orth = design.transpose() * residual;
        prop_assert!(orth.abs().max() < 1e-8);
    }

    #[test]
    fn kfold_partitions(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let folds = kfold_split(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(&folds, &kfold_split(n, k, seed).unwrap());
        for f in &folds {
            prop_assert_eq!(complement(n, f).len() + f.len(), n);
        }
    }
}

#[test]
fn ols_exact_line() {
    let x = DMatrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
    let y = x.map(|v| 2.0 * v + 1.0);
    let m = fit_ols(&x, &y).unwrap();
    assert!((m.intercept[0] - 1.0).abs() < 1e-12);
    assert!((m.coefficients[(0, 0)] - 2.0).abs() < 1e-12);
    assert!((m.predict(&x) - &y).abs().max() < 1e-12);
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for point in 0..10 {
        let (k, h, m) = (3, 5, 1 + point % 2);
        let x = gaussian(&mut rng, 30, k);
        let y = gaussian(&mut rng, 30, m);
        let params = MlpParams::init(k, h, m, point as u64);
        let (_, grad) = params.loss_and_gradient(&x, &y);
        let analytic = grad.to_flat();
        let theta = params.to_flat();
        let step = 1e-6;
        let mut numeric = Vec::with_capacity(theta.len());
        for i in 0..theta.len() {
            let mut probe = params.clone();
            let mut t = theta.clone();
            t[i] += step;
            probe.set_flat(&t);
            let up = probe.loss(&x, &y);
            t[i] -= 2.0 * step;
            probe.set_flat(&t);
            let down = probe.loss(&x, &y);
            numeric.push((up - down) / (2.0 * step));
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-5, "point {point}: relative error {}", diff / norm);
    }
}

#[test]
fn mlp_close_to_ols_on_linear_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = gaussian(&mut rng, 300, 4);
    let beta = DMatrix::from_column_slice(4, 1, &[1.0, -0.5, 2.0, 0.3]);
    let noise = gaussian(&mut rng, 300, 1) * 0.3;
    let y = &x * beta + noise;
    let ols = fit_ols(&x, &y).unwrap();
    let mlp = fit_mlp(&x, &y, &MlpConfig::default()).unwrap();
    let (e_ols, e_mlp) = (mse(&ols.predict(&x), &y), mse(&mlp.predict(&x), &y));
    assert!(e_mlp <= 1.5 * e_ols, "mlp {e_mlp} vs ols {e_ols}");
    assert!(mlp.final_loss < mlp.initial_loss);
}

#[test]
fn mlp_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = gaussian(&mut rng, 80, 3);
    let y = gaussian(&mut rng, 80, 2);
    let config = MlpConfig { hidden: 10, seed: 5, max_iter: 200, ..MlpConfig::default() };
    let a = fit_mlp(&x, &y, &config).unwrap();
    let b = fit_mlp(&x, &y, &config).unwrap();
    assert_eq!(a.params.to_flat(), b.params.to_flat());
    let other = fit_mlp(&x, &y, &MlpConfig { seed: 6, ..config }).unwrap();
    assert_ne!(a.params.to_flat(), other.params.to_flat());
}

#[test]
fn perturbation_scales_with_prediction_spread() {
    let preds: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() * 3.0 + 10.0).collect();
    let p = perturb(&preds, 0.5, derive_seed(1, &[2, 0, 1])).unwrap();
    assert!((p.sigma - sample_sd(&preds)).abs() < 1e-12);
    let noise: Vec<f64> = p.values.iter().zip(&preds).map(|(a, b)| a - b).collect();
    assert!((sample_sd(&noise) / (0.5 * p.sigma) - 1.0).abs() < 0.1);
    assert_eq!(p.values, perturb(&preds, 0.5, derive_seed(1, &[2, 0, 1])).unwrap().values);
    assert_ne!(derive_seed(1, &[2, 0, 1]), derive_seed(1, &[2, 0, 2]));
}
