use approx::assert_relative_eq;
use lrex::kernel::{JumpKernel, KernelSpec, Variant};
use lrex::oracle::{build_exact, build_exact_with, OracleError};
use lrex::sim::FunctionalSpec;
use std::f64::consts::PI;

fn sym(alpha: f64, r: usize) -> JumpKernel {
    JumpKernel::new(KernelSpec::symmetric(1, alpha, r)).unwrap()
}

fn la(alpha: f64, r: usize) -> JumpKernel {
    JumpKernel::new(KernelSpec::new(1, alpha, &[2.0], &[1.0], Variant::La, r)).unwrap()
}

/// θ_L(k) of the kernel folded onto a ring of side L.
fn ring_symbol(k: &JumpKernel, side: usize) -> Vec<f64> {
    (0..side)
        .map(|m| k.entries().map(|(y, p)| p * (1.0 - (2.0 * PI * (m as f64) * (y[0] as f64) / side as f64).cos())).sum())
        .collect()
}

/// For symmetric exclusion Cov(η_s(0), η_0(0)) = χ p_s(0, 0); integrate twice in closed form.
fn duality_variance(k: &JumpKernel, side: usize, rho: f64, t: f64) -> f64 {
    let chi = rho * (1.0 - rho);
    let g = |th: f64| if th == 0.0 { 0.5 * t * t } else { (th * t + (-th * t).exp() - 1.0) / (th * th) };
    2.0 * chi * ring_symbol(k, side).iter().map(|&th| g(th)).sum::<f64>() / side as f64
}

#[test]
fn symmetric_variance_matches_single_particle_modes() {
    for (alpha, side, rho) in [(1.5, 10, 0.5), (0.8, 8, 0.3), (3.0, 9, 0.5)] {
        let k = sym(alpha, side / 2);
        let sys = build_exact(&k, side, rho).unwrap();
        for t in [0.3, 1.0, 5.0, 20.0] {
            let v = sys.exact_variance(t).unwrap();
            let want = duality_variance(&k, side, rho, t);
            assert_relative_eq!(v.value, want, max_relative = 1e-10);
            assert!(v.err_bound < 1e-10 * want);
        }
    }
}

#[test]
fn symmetric_resolvent_matches_discrete_analog() {
    let k = sym(1.5, 5);
    let sys = build_exact(&k, 10, 0.5).unwrap();
    for l in [0.01, 0.1, 1.0, 7.0] {
        let want = lrex::spectral::laplace_sym_discrete(&k, 10, 0.5, l).unwrap();
        assert_relative_eq!(sys.exact_resolvent(l).unwrap(), want, max_relative = 1e-10);
    }
}

#[test]
fn generator_conserves_probability_and_product_measure() {
    for k in [sym(1.5, 4), la(1.5, 4), la(0.7, 3)] {
        let sys = build_exact(&k, 8, 0.4).unwrap();
        assert!(sys.row_sum_residual() < 1e-13);
        assert!(sys.stationarity_residual() < 1e-14);
        assert!(sys.min_off_diagonal() > 0.0);
    }
}

#[test]
fn reversibility_only_for_symmetric() {
    let s = build_exact(&sym(1.5, 4), 8, 0.5).unwrap();
    assert!(s.reversibility_residual() < 1e-15);
    let a = build_exact(&la(1.5, 4), 8, 0.5).unwrap();
    assert!(a.reversibility_residual() > 1e-4);
}

#[test]
fn short_time_variance_is_quadratic() {
    let sys = build_exact(&la(1.5, 5), 10, 0.5).unwrap();
    let t = 1e-4;
    assert_relative_eq!(sys.exact_variance(t).unwrap().value / (t * t), 0.25, max_relative = 1e-3);
}

#[test]
fn resolvent_and_time_domain_laplace_agree_asymmetric() {
    let sys = build_exact(&la(1.5, 5), 10, 0.5).unwrap();
    for l in [0.1, 0.5, 2.0] {
        let direct = sys.exact_resolvent(l).unwrap();
        let lt = sys.laplace_of_variance(l).unwrap();
        assert_relative_eq!(direct, lt.value, max_relative = 1e-8);
    }
}

#[test]
fn degree_two_functional_has_quadratic_start() {
    let f = FunctionalSpec::degree2(0, 1, 0.5);
    let sys = build_exact_with(&sym(1.5, 4), 8, 0.5, &f).unwrap();
    let t = 1e-4;
    assert_relative_eq!(sys.exact_variance(t).unwrap().value / (t * t), sys.f_variance(), max_relative = 1e-3);
}

#[test]
fn size_limits() {
    assert!(matches!(build_exact(&sym(1.5, 4), 13, 0.5), Err(OracleError::TooLarge(13))));
    let k2 = JumpKernel::new(KernelSpec::symmetric(2, 1.5, 2)).unwrap();
    assert!(matches!(build_exact(&k2, 4, 0.5), Err(OracleError::NotOneDim)));
}
