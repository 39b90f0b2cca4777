use approx::assert_relative_eq;
use lrex::kernel::{FKind, RKind, Symbol};
use lrex::kernel::{JumpKernel, KernelSpec, Variant};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

fn zeta(s: f64) -> f64 {
    // direct sum with an Euler-Maclaurin tail
    let n = 2000.0f64;
    let head: f64 = (1..2000).map(|k| (k as f64).powf(-s)).sum();
    head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
}

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    (0.3f64..3.5, 1usize..=2, 1usize..24, 0.2f64..3.0, 0.2f64..3.0, 0.2f64..3.0, 0.2f64..3.0, 0usize..3).prop_map(
        |(alpha, dim, r, a, b, c, d, v)| {
            let bp = [a, c];
            let bm = [b, d];
            let variant = [Variant::Sym, Variant::La, Variant::Fr][v];
            match variant {
                Variant::Sym => KernelSpec::new(dim, alpha, &bp[..dim], &bp[..dim], variant, r),
                _ => {
                    let mut bm = bm;
                    if (bp[0] - bm[0]).abs() < 1e-3 {
                        bm[0] += 0.5;
                    }
                    KernelSpec::new(dim, alpha, &bp[..dim], &bm[..dim], variant, r.max(2))
                }
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn table_is_a_probability_with_split_parts(spec in kernel_strategy()) {
        let k = JumpKernel::new(spec).unwrap();
        prop_assert!((k.table_sum() - 1.0).abs() < 1e-12);
        for (y, p) in k.entries() {
            prop_assert!(p > 0.0);
            let neg = [-y[0], -y[1]];
            prop_assert!((k.s(y) - k.s(neg)).abs() < 1e-15);
            prop_assert!((k.a(y) + k.a(neg)).abs() < 1e-15);
            prop_assert!((k.s(y) + k.a(y) - p).abs() < 1e-15);
        }
    }

    #[test]
    fn symbol_is_even_periodic_and_nonnegative(alpha in 0.3f64..3.5, u in 0.0f64..1.0) {
        let s = Symbol::symmetric(1, alpha);
        let t = s.theta(&[u]);
        prop_assert!(t >= 0.0);
        prop_assert!((t - s.theta(&[1.0 - u])).abs() <= 1e-12 * (1.0 + t));
        prop_assert!((t - s.theta(&[-u])).abs() <= 1e-12 * (1.0 + t));
        prop_assert!(t <= 2.0 + 1e-12);
    }

    #[test]
    fn a_hat_is_odd(alpha in 0.5f64..3.0, bp in 0.2f64..3.0, bm in 0.2f64..3.0, u in 0.01f64..0.49) {
        prop_assume!((bp - bm).abs() > 1e-3);
        let spec = KernelSpec::new(1, alpha, &[bp], &[bm], Variant::La, 1);
        let s = Symbol::from_spec(&spec, RKind::S).unwrap();
        let a = s.a_hat_im(&[u]);
        prop_assert!((a + s.a_hat_im(&[-u])).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert!((a + s.a_hat_im(&[1.0 - u])).abs() <= 1e-10 * (1.0 + a.abs()));
    }
}

#[test]
fn mean_zero_kernels_have_zero_drift() {
    for r in [2, 5, 30] {
        let spec = KernelSpec::new(1, 1.5, &[1.2], &[0.9], Variant::Mza, r);
        let k = JumpKernel::new(spec).unwrap();
        assert!(k.mean()[0].abs() < 1e-14, "r={r}: {:?}", k.mean());
    }
}

#[test]
fn theta_matches_direct_sum_at_moderate_u() {
    // s(z) = |z|^{-1-α} / (2ζ(1+α)) in one dimension
    for alpha in [0.5, 1.5, 3.0] {
        let s = Symbol::symmetric(1, alpha);
        let z = zeta(1.0 + alpha);
        for u in [0.1, 0.25, 0.4] {
            let n = 400_000;
            let direct: f64 = (1..=n)
                .rev()
                .map(|k| {
                    let kf = k as f64;
                    kf.powf(-1.0 - alpha) * (1.0 - (2.0 * PI * u * kf).cos())
                })
                .sum::<f64>()
                / z;
            // tail bounded by 2 Σ_{k>n} k^{-1-α}/ζ
            let tail = 2.0 * (n as f64).powf(-alpha) / alpha / z;
            assert!((s.theta(&[u]) - direct).abs() <= tail + 1e-12, "alpha={alpha} u={u}");
        }
    }
}

#[test]
fn theta_small_u_constant() {
    for alpha in [0.5, 1.5, 3.0] {
        let s = Symbol::symmetric(1, alpha);
        let amp = 0.5 / zeta(1.0 + alpha);
        let j = if alpha < 2.0 {
            let k = PI.powf(alpha) * 2f64.powf(alpha - 1.0) * (-gamma(-alpha) * (PI * alpha / 2.0).cos());
            4.0 * amp * k
        } else {
            2.0 * PI * PI * amp * 2.0 * zeta(alpha - 1.0)
        };
        let u = 2f64.powi(-14);
        let r = s.theta(&[u]) / FKind::for_alpha(alpha).eval(alpha, u);
        assert_relative_eq!(r, j, max_relative = 0.02);
        assert_relative_eq!(s.asymptote().unwrap().j, j, max_relative = 1e-6);
    }
}

#[test]
fn sampler_frequencies_match_table() {
    let k = JumpKernel::new(KernelSpec::new(1, 1.5, &[2.0], &[1.0], Variant::La, 3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 200_000;
    let mut counts = std::collections::HashMap::new();
    for _ in 0..n {
        *counts.entry(k.sample(&mut rng)).or_insert(0usize) += 1;
    }
    for (y, p) in k.entries() {
        let c = *counts.get(&y).unwrap_or(&0) as f64;
        let se = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((c - n as f64 * p).abs() < 4.5 * se, "{y:?}: {c} vs {}", n as f64 * p);
    }
}

#[test]
fn spec_round_trips_through_kv() {
    let spec = KernelSpec::new(2, 1.25, &[1.0, 2.0], &[0.5, 2.0], Variant::La, 7);
    assert_eq!(KernelSpec::from_kv(&spec.to_kv()).unwrap(), spec);
    assert!(JumpKernel::new(KernelSpec::new(1, 1.5, &[1.0], &[1.0], Variant::La, 4)).is_err());
}
