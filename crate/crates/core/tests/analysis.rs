use approx::assert_relative_eq;
use lrex::analysis::*;
use proptest::prelude::*;
use statrs::function::gamma::gamma;

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slope_is_bitwise_stable_under_power_of_two_scaling(
        beta in -3.0f64..3.0,
        k in -40i32..40,
        noise in proptest::collection::vec(-0.05f64..0.05, 12),
    ) {
        let x = logspace(1.0, 5.0, 12);
        let y: Vec<f64> = x.iter().zip(&noise).map(|(v, e)| v.powf(beta) * e.exp()).collect();
        let c = 2f64.powi(k);
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let z = vec![0.0; 12];
        let a = fit_in_window(&x, &y, &z, Correction::None, 0, 11).unwrap();
        let b = fit_in_window(&x, &ys, &z, Correction::None, 0, 11).unwrap();
        prop_assert_eq!(a.beta_hat.to_bits(), b.beta_hat.to_bits());
        prop_assert!((b.intercept - a.intercept - c.ln()).abs() < 1e-9);
        let fa = fit_exponent(&x, &y, &z, Correction::None).unwrap();
        let fb = fit_exponent(&x, &ys, &z, Correction::None).unwrap();
        prop_assert_eq!(fa.beta_hat.to_bits(), fb.beta_hat.to_bits());
        prop_assert_eq!(fa.window, fb.window);
    }

    #[test]
    fn slope_nearly_stable_under_any_scaling(beta in -3.0f64..3.0, c in 1e-6f64..1e6) {
        let x = logspace(0.5, 4.0, 9);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(beta) * (1.0 + 0.1 / v)).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let z = vec![0.0; 9];
        let a = fit_in_window(&x, &y, &z, Correction::None, 0, 8).unwrap();
        let b = fit_in_window(&x, &ys, &z, Correction::None, 0, 8).unwrap();
        prop_assert!((a.beta_hat - b.beta_hat).abs() < 1e-12);
    }

    #[test]
    fn exact_power_laws_are_recovered(beta in -3.0f64..3.0, amp in 1e-3f64..1e3) {
        let x = logspace(2.0, 6.0, 9);
        let y: Vec<f64> = x.iter().map(|v| amp * v.powf(beta) * v.ln()).collect();
        let f = fit_exponent(&x, &y, &[0.0; 9], Correction::Log).unwrap();
        prop_assert!((f.beta_hat - beta).abs() < 1e-10);
        prop_assert!((f.intercept - amp.ln()).abs() < 1e-8);
    }

    #[test]
    fn hurst_map_is_continuous_inside(a in 1.0001f64..1.9999, eps in 1e-9f64..1e-4) {
        let h = hurst_target(a, 1).h().unwrap();
        let h2 = hurst_target((a + eps).min(1.99999), 1).h().unwrap();
        // dH/dα = 1/(2α²) ≤ 1/2
        prop_assert!((h2 - h).abs() <= 0.5 * eps + 1e-15);
        prop_assert!(h > 0.5 && h < 0.75);
    }
}

#[test]
fn hurst_boundaries() {
    assert_eq!(hurst_target(1.0, 1), HurstTarget::Fbm(0.5));
    assert_eq!(hurst_target(1.5, 1), HurstTarget::Fbm(2.0 / 3.0));
    assert_eq!(hurst_target(2.0, 1), HurstTarget::Fbm(0.75));
    assert_eq!(hurst_target(3.0, 1), HurstTarget::Fbm(0.75));
    assert_eq!(hurst_target(0.5, 1), HurstTarget::Fbm(0.5));
    assert_eq!(hurst_target(2.5, 2), HurstTarget::Fbm(0.5));
    assert!((hurst_target(1.0 + 1e-12, 1).h().unwrap() - 0.5).abs() < 1e-11);
    assert!((hurst_target(2.0 - 1e-12, 1).h().unwrap() - 0.75).abs() < 1e-11);
    assert_eq!(hurst_target_for_degree(2.0, 1, 2), HurstTarget::OneTimeGaussian);
    assert_eq!(hurst_target_for_degree(1.5, 1, 2), HurstTarget::Fbm(0.5));
}

#[test]
fn synthetic_fbm_passes_covariance_test() {
    let times = [0.25, 0.5, 1.0, 2.0, 4.0];
    for (k, h) in [0.5, 2.0 / 3.0, 0.75].into_iter().enumerate() {
        let paths = synthetic_fbm_paths(&times, h, 1000, 40 + k as u64).unwrap();
        let t = fbm_covariance_test(&paths, &times, h).unwrap();
        assert!(t.passes(3.0), "H={h}: max |z| {}", t.max_abs_z());
        assert_relative_eq!(t.empirical[(2, 2)], 1.0, max_relative = 1e-12);
    }
}

#[test]
fn covariance_test_detects_wrong_hurst() {
    let times = [0.25, 0.5, 1.0, 2.0, 4.0];
    let paths = synthetic_fbm_paths(&times, 0.75, 4000, 9).unwrap();
    let t = fbm_covariance_test(&paths, &times, 0.5).unwrap();
    assert!(!t.passes(4.0));
}

#[test]
fn tauberian_check_on_power_law() {
    let beta = 1.5;
    let t = logspace(-4.0, 5.0, 400);
    let v: Vec<f64> = t.iter().map(|x| x.powf(beta)).collect();
    let lam = [1e-3f64, 1e-2, 0.1, 1.0];
    let l: Vec<f64> = lam.iter().map(|x| gamma(beta + 1.0) * x.powf(-beta - 1.0)).collect();
    let r = tauberian_check((&t, &v), (&lam, &l)).unwrap();
    assert!(r.max_deviation() < 1e-6, "{}", r.csv());
    for row in &r.rows {
        assert_relative_eq!(row.tauber_ratio, gamma(beta + 1.0), max_relative = 1e-6);
    }
    let short = &t[..200];
    assert!(matches!(
        tauberian_check((short, &v[..200]), (&lam, &l)),
        Err(AnalysisError::GridMismatch(_))
    ));
}

#[test]
fn fit_report_row() {
    let x = logspace(2.0, 6.0, 9);
    let y: Vec<f64> = x.iter().map(|v| v.powf(4.0 / 3.0)).collect();
    let f = fit_exponent(&x, &y, &[0.0; 9], Correction::None).unwrap();
    let row = FitRow::new("variance_t", 1.5, 1, 0.5, &f, 4.0 / 3.0, 0.02);
    let line = row.csv();
    assert_eq!(line.split(',').count(), FIT_CSV_HEADER.split(',').count());
    assert!(line.starts_with("variance_t,1.5,1,0.5,"));
    assert!(line.ends_with(",true"), "{line}");
}

#[test]
fn bad_inputs() {
    let x = logspace(0.0, 2.0, 4);
    let y = vec![1.0; 4];
    assert!(matches!(
        fit_exponent(&x, &y, &[0.0; 4], Correction::None),
        Err(AnalysisError::InsufficientPoints { needed: 5, got: 4 })
    ));
    let x = logspace(0.0, 2.0, 6);
    assert!(fit_exponent(&x, &[1.0, 2.0, -1.0, 3.0, 4.0, 5.0], &[0.0; 6], Correction::None).is_err());
    assert!("inv_sqrt_log".parse::<Correction>().unwrap() == Correction::InvSqrtLog);
    assert!("cubic".parse::<Correction>().is_err());
}
