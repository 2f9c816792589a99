use approx::assert_abs_diff_eq;
use dgcopula::diagnostics::kappa::kappa;
use dgcopula::diagnostics::krippendorff::alpha_point;
use dgcopula::diagnostics::ks::{ks_p_value, ks_test};
use dgcopula::diagnostics::{fit_chisq_mle, fit_gamma_mle, krippendorff_alpha, ks_test_chisq};
use dgcopula::{CopulaModel, CorrelationModel, Marginal, ParamVector, Purpose, StreamKey};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand_distr::{ChiSquared, Distribution, Exp, Normal};

fn key(i: u64) -> StreamKey {
    StreamKey::new(515, Purpose::Test, i)
}

#[test]
fn ks_p_values_are_uniform_under_the_null() {
    let chi = ChiSquared::new(3.0).unwrap();
    let mut rng = key(0).rng();
    let p: Vec<f64> = (0..10_000)
        .map(|_| {
            let s: Vec<f64> = (0..100).map(|_| chi.sample(&mut rng)).collect();
            ks_test_chisq(&s, 3.0).unwrap().p_value
        })
        .collect();
    let outer = ks_test(&p, |u| u.clamp(0.0, 1.0)).unwrap();
    assert!(outer.p_value > 0.001, "KS of KS p-values: {outer:?}");
}

#[test]
fn kolmogorov_series_matches_reference_implementation() {
    // scipy.stats.kstwobign.sf((√n + 0.12 + 0.11/√n)·D)
    for (d, n, p) in [
        (0.05, 100, 0.9596004458626864),
        (0.1, 50, 0.676620149700246),
        (0.2, 20, 0.36131292028978945),
        (0.03, 1000, 0.32456290190111164),
        (0.15, 200, 0.00020961823485173296),
        (0.08, 200, 0.14752990351258327),
    ] {
        assert_abs_diff_eq!(ks_p_value(d, n), p, epsilon = 1e-6);
    }
}

#[test]
fn chisq_fit_recovers_df() {
    let chi = ChiSquared::new(3.0).unwrap();
    let mut chisq_wins = 0;
    for seed in 0..21 {
        let mut rng = key(100 + seed).rng();
        let s: Vec<f64> = (0..1000).map(|_| chi.sample(&mut rng)).collect();
        let c = fit_chisq_mle(&s).unwrap();
        let g = fit_gamma_mle(&s).unwrap();
        assert!((c.df - 3.0).abs() <= 4.0 * c.se, "df {} ± {}", c.df, c.se);
        if c.aic < g.aic {
            chisq_wins += 1;
        }
    }
    assert!(
        chisq_wins > 10,
        "χ² AIC smaller in only {chisq_wins} of 21 samples"
    );
}

#[test]
fn gamma_fit_on_exponential() {
    let e = Exp::new(1.0).unwrap();
    let mut rng = key(7).rng();
    let s: Vec<f64> = (0..2000).map(|_| e.sample(&mut rng)).collect();
    let g = fit_gamma_mle(&s).unwrap();
    assert!((g.shape - 1.0).abs() <= 4.0 * g.shape_se, "{g:?}");
}

#[test]
fn alpha_near_zero_for_independent_raters() {
    let nd = Normal::new(2.0, 1.5).unwrap();
    let mut rng = key(8).rng();
    let x: Vec<f64> = (0..10_000).map(|_| nd.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..10_000).map(|_| nd.sample(&mut rng)).collect();
    let a = krippendorff_alpha(&x, &y, 200, 3).unwrap();
    assert!(a.alpha.abs() < 0.05, "{a:?}");
    assert!(a.ci.0 <= a.alpha && a.alpha <= a.ci.1);
}

proptest! {
    #[test]
    fn alpha_symmetric_and_affine_invariant(
        pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..40),
        scale in prop::sample::select(vec![-3.0, -0.5, 0.25, 2.0, 7.5]),
        shift in -100.0..100.0f64,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let a = alpha_point(&x, &y).unwrap();
        prop_assert!((a - alpha_point(&y, &x).unwrap()).abs() < 1e-12);
        let map = |v: &[f64]| v.iter().map(|t| scale * t + shift).collect::<Vec<_>>();
        let b = alpha_point(&map(&x), &map(&y)).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

fn anova() -> CopulaModel {
    CopulaModel::new(
        CorrelationModel::exchangeable(0.7, 3, 20).unwrap(),
        Marginal::poisson(3.0).unwrap(),
    )
}

#[test]
fn kappa_is_the_same_at_any_parallelism() {
    let theta = ParamVector::natural(vec![0.7, 3.0]);
    let one = kappa(&anova(), &theta, 64, 11, 1).unwrap();
    let three = kappa(&anova(), &theta, 64, 11, 3).unwrap();
    assert_eq!(one, three);
    assert_eq!(one.kappa_hat.to_bits(), three.kappa_hat.to_bits());
}

#[test]
fn kappa_matrices_are_consistent() {
    let theta = ParamVector::natural(vec![0.8, 2.0]);
    let k = kappa(&anova(), &theta, 300, 5, 1).unwrap();
    assert!(k.j_hat.is_symmetric() && k.v_hat.is_symmetric());
    let recomputed = k.j_hat.sub(&k.v_hat).frobenius_norm();
    assert!((recomputed - k.kappa_hat).abs() <= 1e-12);
    let p = k.v_hat.dim();
    let v = DMatrix::from_fn(p, p, |i, j| k.v_hat[(i, j)]);
    let smallest = v.symmetric_eigen().eigenvalues.min();
    assert!(smallest >= -1e-10, "V̂ eigenvalue {smallest}");
    assert_eq!(k.n_b + k.dropped, 300);
}

#[test]
fn kappa_shrinks_under_independence() {
    // ℓ_DT is the exact likelihood with identity correlation.
    let model = CopulaModel::new(
        CorrelationModel::identity(60),
        Marginal::poisson(3.0).unwrap(),
    );
    let theta = ParamVector::natural(vec![3.0]);
    let small = kappa(&model, &theta, 250, 21, 1).unwrap().kappa_hat;
    let large = kappa(&model, &theta, 16_000, 21, 1).unwrap().kappa_hat;
    assert!(large < small, "{small} -> {large}");
    // Fisher information is n/λ = 20; the mismatch is a small fraction of it.
    assert!(large < 2.0, "{large}");
}

#[test]
fn kappa_rejects_single_replicate() {
    let theta = ParamVector::natural(vec![0.7, 3.0]);
    assert!(kappa(&anova(), &theta, 1, 0, 1).is_err());
}
