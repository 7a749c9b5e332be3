use proptest::prelude::*;
use rgx_core::rank::{
    compute_ranks, concordance_curve, dual_lorenz_curve, gini, lorenz_curve, pietra,
    pl_power_integral, RankedSample,
};
use rgx_core::rgx::{rgx_area, rgx_p, s_inf, s_p, wrgx_p};
use rgx_core::{Rational64, Sample};

fn positive_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..100.0, 2..=max_len)
}

fn pairwise_gini(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let mut s = 0.0;
    for a in y {
        for b in y {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * n * mean)
}

fn sample(y: &[f64]) -> Sample {
    RankedSample::new(y.to_vec()).unwrap()
}

/// Trapezoid rule on the normalised knot values, independent of the
/// library's integration code.
fn trapezoid(a: &[f64], b: &[f64]) -> f64 {
    let n = (a.len() - 1) as f64;
    let (ta, tb) = (a[a.len() - 1], b[b.len() - 1]);
    (1..a.len())
        .map(|k| {
            let d0 = b[k - 1] / tb - a[k - 1] / ta;
            let d1 = b[k] / tb - a[k] / ta;
            (d0 + d1) / (2.0 * n)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gini_matches_pairwise_formula(y in positive_vec(50)) {
        let g = gini(&sample(&y));
        prop_assert!((g - pairwise_gini(&y)).abs() < 1e-12);
    }

    #[test]
    fn s1_is_gini(y in positive_vec(50)) {
        let s = sample(&y);
        prop_assert!((s_p(&s, 1.0).unwrap() - gini(&s)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn curves_are_ordered(y in positive_vec(40), seed in any::<u64>()) {
        let s = sample(&y);
        let z: Vec<f64> = (0..y.len()).map(|i| ((i as u64).wrapping_mul(seed | 1) % 97) as f64).collect();
        let l = lorenz_curve(&s);
        let c = concordance_curve(&s, &z).unwrap();
        let u = dual_lorenz_curve(&s);
        for k in 0..l.knots().len() {
            let tol = 1e-9 * s.total();
            prop_assert!(l.knots()[k] <= c.knots()[k] + tol);
            prop_assert!(c.knots()[k] <= u.knots()[k] + tol);
        }
    }

    #[test]
    fn dual_is_reflected_lorenz(y in positive_vec(40)) {
        let s = sample(&y);
        let l = lorenz_curve(&s);
        let u = dual_lorenz_curve(&s);
        let n = y.len();
        let total = s.total();
        for k in 0..=n {
            let want = total * (1.0 - l.knots()[n - k] / total);
            prop_assert!((u.knots()[k] - want).abs() < 1e-9 * total);
        }
    }

    #[test]
    fn p1_integral_equals_trapezoid(y in positive_vec(40)) {
        let s = sample(&y);
        let l = lorenz_curve(&s);
        let u = dual_lorenz_curve(&s);
        let got = pl_power_integral(&l.normalized(), &u.normalized(), 1.0).unwrap();
        prop_assert!((got - trapezoid(l.knots(), u.knots())).abs() < 1e-14);
    }

    #[test]
    fn ranks_ignore_increasing_transforms(y in positive_vec(40)) {
        let t: Vec<f64> = y.iter().map(|v| v.ln() * 3.0 + 1.0).collect();
        prop_assert_eq!(compute_ranks(&y).unwrap(), compute_ranks(&t).unwrap());
    }

    #[test]
    fn pietra_sandwich(y in positive_vec(50)) {
        let s = sample(&y);
        let (p, si) = (pietra(&s), s_inf(&s));
        prop_assert!(p <= si + 1e-12);
        prop_assert!(si <= 2.0 * p + 1e-12);
    }

    #[test]
    fn large_p_approaches_sup_norm(y in prop::collection::vec(0.01f64..100.0, 10..=50)) {
        let s = sample(&y);
        prop_assert!((s_p(&s, 64.0).unwrap() - s_inf(&s)).abs() < 0.05);
    }

    #[test]
    fn rgx_bounded_and_extreme(y in positive_vec(40), z in prop::collection::vec(-5.0f64..5.0, 40), p in 0.25f64..6.0) {
        let s = sample(&y);
        let z = &z[..y.len()];
        let r = rgx_p(&s, z, p);
        if s.is_constant() {
            prop_assert!(r.is_err());
        } else {
            let v = r.unwrap().value;
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(rgx_p(&s, &y, p).unwrap().value, 1.0);
            let anti: Vec<f64> = y.iter().map(|v| -v).collect();
            let a = rgx_p(&s, &anti, p).unwrap().value;
            prop_assert!(a.abs() < 1e-12, "anti-concordant gave {}", a);
            let w = wrgx_p(&s, z, p).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&w));
            prop_assert_eq!(wrgx_p(&s, &y, p).unwrap().value, 1.0);
        }
    }

    #[test]
    fn rgx_scale_invariance(y in positive_vec(40), z in prop::collection::vec(0.1f64..5.0, 40), p in 0.5f64..4.0) {
        let s = sample(&y);
        prop_assume!(!s.is_constant());
        let z = &z[..y.len()];
        let base = rgx_p(&s, z, p).unwrap().value;
        for g in [0.5, 3.0, 1e6] {
            let sy = sample(&y.iter().map(|v| v * g).collect::<Vec<_>>());
            let sz: Vec<f64> = z.iter().map(|v| v * g).collect();
            prop_assert!((rgx_p(&sy, &sz, p).unwrap().value - base).abs() < 1e-12);
        }
    }

    #[test]
    fn rgx_transform_invariance(y in positive_vec(40), z in prop::collection::vec(0.1f64..5.0, 40)) {
        let s = sample(&y);
        prop_assume!(!s.is_constant());
        let z = &z[..y.len()];
        let base = rgx_p(&s, z, 1.0).unwrap().value;
        let inc: Vec<f64> = z.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        prop_assert_eq!(rgx_p(&s, &inc, 1.0).unwrap().value, base);
        let dec: Vec<f64> = z.iter().map(|v| -v.ln()).collect();
        let flipped = rgx_p(&s, &dec, 1.0).unwrap().value;
        let distinct = {
            let mut zs = z.to_vec();
            zs.sort_by(f64::total_cmp);
            zs.windows(2).all(|w| w[0] < w[1])
        };
        if distinct {
            prop_assert!((flipped - (1.0 - base)).abs() < 1e-12);
        }
    }
}

mod axioms {
    use super::*;

    const PS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn scale_invariance(y in positive_vec(30), g in 0.01f64..100.0) {
            let s = sample(&y);
            let t = sample(&y.iter().map(|v| v * g).collect::<Vec<_>>());
            for p in PS {
                prop_assert!((s_p(&s, p).unwrap() - s_p(&t, p).unwrap()).abs() < 1e-12);
            }
        }

        #[test]
        fn rising_tide(y in positive_vec(30), c in 0.01f64..50.0) {
            let s = sample(&y);
            let t = sample(&y.iter().map(|v| v + c).collect::<Vec<_>>());
            for p in PS {
                prop_assert!(s_p(&t, p).unwrap() <= s_p(&s, p).unwrap() + 1e-12);
            }
        }

        #[test]
        fn cloning(y in positive_vec(30)) {
            let s = sample(&y);
            let t = sample(&y.iter().flat_map(|v| [*v, *v]).collect::<Vec<_>>());
            for p in PS {
                prop_assert!((s_p(&s, p).unwrap() - s_p(&t, p).unwrap()).abs() < 1e-12);
            }
        }

        #[test]
        fn robin_hood(y in positive_vec(30), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
            let (i, j) = (a.index(y.len()), b.index(y.len()));
            prop_assume!(y[i] < y[j]);
            let mut sorted = y.clone();
            sorted.sort_by(f64::total_cmp);
            let gap = sorted
                .windows(2)
                .map(|w| w[1] - w[0])
                .filter(|d| *d > 0.0)
                .fold(f64::INFINITY, f64::min);
            let eps = 0.4 * gap;
            let mut moved = y.clone();
            moved[i] += eps;
            moved[j] -= eps;
            let (s, t) = (sample(&y), sample(&moved));
            for p in PS {
                prop_assert!(s_p(&t, p).unwrap() <= s_p(&s, p).unwrap() + 1e-12);
            }
        }

        #[test]
        fn bill_gates(y in positive_vec(30), k in any::<prop::sample::Index>()) {
            let k = k.index(y.len());
            let top = y.iter().cloned().fold(0.0, f64::max);
            for p in PS {
                let values: Vec<f64> = (1..=20)
                    .map(|m| {
                        let mut v = y.clone();
                        v[k] = top * 2f64.powi(m);
                        s_p(&sample(&v), p).unwrap()
                    })
                    .collect();
                for w in values[10..].windows(2) {
                    prop_assert!(w[1] >= w[0] - 1e-12);
                }
            }
        }

        #[test]
        fn babies(y in positive_vec(30)) {
            let s = sample(&y);
            let mut with_zero = y.clone();
            with_zero.push(0.0);
            let t = RankedSample::new_nonnegative(with_zero).unwrap();
            for p in PS {
                prop_assert!(s_p(&t, p).unwrap() > s_p(&s, p).unwrap());
            }
        }
    }
}

#[test]
fn worked_example_exact_and_oracle() {
    let r = Rational64::from_integer;
    let y = RankedSample::new(vec![r(1), r(2), r(3)]).unwrap();
    let exact = rgx_area(&y, &[r(2), r(1), r(3)]).unwrap();
    assert_eq!(exact.value, Rational64::new(3, 4));
    assert_eq!(exact.numerator, Rational64::new(1, 18));
    assert_eq!(exact.denominator, Rational64::new(2, 9));

    let s = sample(&[1.0, 2.0, 3.0]);
    let z = [2.0, 1.0, 3.0];
    let l = lorenz_curve(&s);
    let c = concordance_curve(&s, &z).unwrap();
    let u = dual_lorenz_curve(&s);
    let oracle = 1.0 - trapezoid(l.knots(), c.knots()) / trapezoid(l.knots(), u.knots());
    assert!((oracle - 0.75).abs() < 1e-15);
    assert!((rgx_p(&s, &z, 1.0).unwrap().value - 0.75).abs() < 1e-15);
}

#[test]
fn single_precision_agrees() {
    let y32 = RankedSample::new(vec![1.0f32, 2.0, 3.0, 7.0]).unwrap();
    let y64 = sample(&[1.0, 2.0, 3.0, 7.0]);
    assert!((f64::from(gini(&y32)) - gini(&y64)).abs() < 1e-6);
    let r32 = rgx_p(&y32, &[2.0f32, 1.0, 3.0, 4.0], 2.0).unwrap().value;
    let r64 = rgx_p(&y64, &[2.0, 1.0, 3.0, 4.0], 2.0).unwrap().value;
    assert!((f64::from(r32) - r64).abs() < 1e-5);
}
