//! Jacobi-type theta sums in τ and Mellin integrals over them.
//!
//! |z|^{-2σ} = Γ(σ)^{-1} ∫_0^∞ τ^{σ-1} e^{-τ|z|²} dτ turns lattice sums with
//! power-law weights into one-dimensional integrals of Gaussian sums, which
//! separate across axes and admit Poisson duals for small τ.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::quad::{integrate, QuadError, Tolerance};
use crate::special::{dawson, gamma, hurwitz_zeta, zeta};

/// Reduce v to its distance from the nearest integer, in [0, 1/2].
pub(crate) fn fold_half(v: f64) -> f64 {
    let f = v - v.floor();
    f.min(1.0 - f)
}

/// Θ(τ, v) = Σ_n e^{-τn²} cos(2πvn).
pub fn jacobi_theta(tau: f64, v: f64) -> f64 {
    let v = fold_half(v);
    if tau >= 1.0 {
        let mut s = 1.0;
        for n in 1..64 {
            let nf = n as f64;
            let e = (-tau * nf * nf).exp();
            if e < 1e-18 {
                break;
            }
            s += 2.0 * e * (2.0 * PI * v * nf).cos();
        }
        s
    } else {
        let mut s = 0.0;
        for k in -4i32..=4 {
            let d = k as f64 - v;
            s += (-PI * PI * d * d / tau).exp();
        }
        (PI / tau).sqrt() * s
    }
}

/// Θ(τ, 0) - 1.
pub(crate) fn theta0_m1(tau: f64) -> f64 {
    if tau >= 1.0 {
        (1..64).map(|n| 2.0 * (-tau * (n * n) as f64).exp()).sum()
    } else {
        jacobi_theta(tau, 0.0) - 1.0
    }
}

/// D(τ, v) = Θ(τ, 0) - Θ(τ, v) = 4 Σ_{n≥1} e^{-τn²} sin²(πvn), computed without cancellation.
pub fn jacobi_theta_diff(tau: f64, v: f64) -> f64 {
    let v = fold_half(v);
    if v == 0.0 {
        return 0.0;
    }
    if tau >= 1.0 {
        let mut s = 0.0;
        for n in 1..64 {
            let nf = n as f64;
            let e = (-tau * nf * nf).exp();
            if e < 1e-18 {
                break;
            }
            let sn = (PI * v * nf).sin();
            s += e * sn * sn;
        }
        4.0 * s
    } else {
        let c = PI * PI / tau;
        let mut s = -(-c * v * v).exp_m1();
        for k in 1..=4 {
            let kf = k as f64;
            s += 2.0 * (-c * kf * kf).exp() - (-c * (kf - v) * (kf - v)).exp() - (-c * (kf + v) * (kf + v)).exp();
        }
        (PI / tau).sqrt() * s
    }
}

/// ζ(2k) for k = 1..=60.
fn zeta_even() -> &'static [f64] {
    static Z: OnceLock<Vec<f64>> = OnceLock::new();
    Z.get_or_init(|| (1..=60).map(|k| zeta(2.0 * k as f64)).collect())
}

/// T(τ, v) = Σ_{n≥1} e^{-τn²} sin(2πvn).
///
/// Direct sum for τ ≥ 1/4. Below that, the Poisson dual
/// T = τ^{-1/2} Σ_k F(π(v+k)/√τ) with F the Dawson function; the 1/(2x)
/// parts of F sum to ½cot(πv), and the remainders cancel in ±k pairs.
pub fn half_theta(tau: f64, v: f64) -> f64 {
    let mut f = v - v.floor();
    let mut sign = 1.0;
    if f > 0.5 {
        f = 1.0 - f;
        sign = -1.0;
    }
    if f == 0.0 || f == 0.5 {
        return 0.0;
    }
    if tau >= 0.25 {
        let b = 2.0 * PI * f;
        let mut s = 0.0;
        for n in 1..64 {
            let nf = n as f64;
            let e = (-tau * nf * nf).exp();
            if e < 1e-19 {
                break;
            }
            s += e * (b * nf).sin();
        }
        return sign * s;
    }
    let st = tau.sqrt();
    let rem = |x: f64| dawson(x) - 0.5 / x;
    let mut pairs = 0.0;
    for k in (1..=60).rev() {
        let kf = k as f64;
        pairs += rem(PI * (f + kf) / st) + rem(PI * (f - kf) / st);
    }
    // k > 60 from F(x) - 1/(2x) ≈ 1/(4x³) + 3/(8x⁵)
    let (kp, km) = (61.0 + f, 61.0 - f);
    let q = st / PI;
    pairs += 0.25 * q.powi(3) * (hurwitz_zeta(3.0, kp) - hurwitz_zeta(3.0, km))
        + 0.375 * q.powi(5) * (hurwitz_zeta(5.0, kp) - hurwitz_zeta(5.0, km));
    let head = dawson(PI * f / st) / st;
    sign * (head + 0.5 * cot_minus_inv(PI * f) + pairs / st)
}

/// cot x - 1/x, accurate for small x.
fn cot_minus_inv(x: f64) -> f64 {
    if x > 0.5 {
        return 1.0 / x.tan() - 1.0 / x;
    }
    // -Σ_k 2 ζ(2k) x^{2k-1} / π^{2k}
    let z2 = zeta_even();
    let r = (x / PI) * (x / PI);
    let mut p = r / x;
    let mut s = 0.0;
    for z in z2.iter() {
        let t = 2.0 * z * p;
        s -= t;
        if t.abs() < 1e-18 * s.abs() {
            break;
        }
        p *= r;
    }
    s
}

/// Limit of T(τ, v) as τ → 0 (Abel sum of Σ sin(2πvn)).
pub(crate) fn half_theta_limit(v: f64) -> f64 {
    let f = v - v.floor();
    if f == 0.0 {
        return 0.0;
    }
    0.5 / (PI * f).tan()
}

/// ∫_{τ_lo}^{τ_hi} τ^σ g(τ) d(log τ) by adaptive GK in x = log τ.
pub(crate) fn mellin<G: FnMut(f64) -> f64>(
    mut g: G,
    sigma: f64,
    tau_lo: f64,
    tau_hi: f64,
    marks: &[f64],
    tol: Tolerance,
) -> Result<f64, QuadError> {
    let (x0, x1) = (tau_lo.ln(), tau_hi.ln());
    let mut br = vec![x0, x1];
    let mut x = x0;
    while x < x1 {
        br.push(x);
        x += 2.0;
    }
    for &m in marks {
        if m > 0.0 {
            let lm = m.ln();
            for d in [-3.0, -1.0, 0.0, 1.0, 3.0] {
                if lm + d > x0 && lm + d < x1 {
                    br.push(lm + d);
                }
            }
        }
    }
    br.sort_by(f64::total_cmp);
    br.dedup();
    let r = integrate(
        |x| {
            let t = x.exp();
            (sigma * x).exp() * g(t)
        },
        &br,
        tol,
    )?;
    Ok(r.value)
}

pub(crate) const TAU_HI: f64 = 90.0;

fn mellin_tol() -> Tolerance {
    Tolerance::new(0.0, 1e-13).with_max(2000)
}

/// Epstein zeta Σ_{z∈Z², z≠0} |z|^{-2σ}, σ > 1.
pub fn epstein_zeta_2d(sigma: f64) -> f64 {
    assert!(sigma > 1.0);
    // below τ_lo, Θ0² - 1 = π/τ - 1 up to e^{-π²/τ_lo}
    let tau_lo: f64 = 0.01;
    let head = PI * tau_lo.powf(sigma - 1.0) / (sigma - 1.0) - tau_lo.powf(sigma) / sigma;
    let body = mellin(
        |t| {
            let th = jacobi_theta(t, 0.0);
            th * th - 1.0
        },
        sigma,
        tau_lo,
        TAU_HI,
        &[],
        mellin_tol(),
    )
    .expect("smooth Mellin integral");
    (head + body) / gamma(sigma)
}

/// Σ_{z∈Z², z≠0} z_1² |z|^{-2σ}, σ > 2.
pub fn second_moment_2d(sigma: f64) -> f64 {
    assert!(sigma > 2.0);
    // Σ n² e^{-τn²} Θ(τ,0); small τ: (√π/2) τ^{-3/2} √(π/τ) = π/(2τ²)
    let tau_lo: f64 = 0.01;
    let head = 0.5 * PI * tau_lo.powf(sigma - 2.0) / (sigma - 2.0);
    let body = mellin(
        |t| {
            let m2 = if t >= 1.0 {
                (1..64).map(|n| (n * n) as f64 * (-t * (n * n) as f64).exp()).sum::<f64>() * 2.0
            } else {
                // Poisson dual of Σ_n n² e^{-τn²}
                let c = PI * PI / t;
                let mut s = 0.0;
                for k in -4i32..=4 {
                    let kk = (k * k) as f64;
                    s += (1.0 - 2.0 * c * kk) * (-c * kk).exp();
                }
                0.5 * PI.sqrt() * t.powf(-1.5) * s
            };
            m2 * jacobi_theta(t, 0.0)
        },
        sigma,
        tau_lo,
        TAU_HI,
        &[],
        mellin_tol(),
    )
    .expect("smooth Mellin integral");
    (head + body) / gamma(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn direct_theta(tau: f64, v: f64) -> f64 {
        (-200i64..=200).map(|n| (-tau * (n * n) as f64).exp() * (2.0 * PI * v * n as f64).cos()).sum()
    }

    #[test]
    fn theta_both_branches_agree_with_direct() {
        for &t in &[0.05, 0.3, 0.99, 1.0, 3.0] {
            for &v in &[0.0, 0.1, 0.37, 0.5, 0.9] {
                assert_relative_eq!(jacobi_theta(t, v), direct_theta(t, v), max_relative = 1e-12, epsilon = 1e-14);
                let d = direct_theta(t, 0.0) - direct_theta(t, v);
                assert!((jacobi_theta_diff(t, v) - d).abs() < 1e-12 * direct_theta(t, 0.0));
            }
        }
    }

    #[test]
    fn diff_small_v_relative_accuracy() {
        // D ≈ 4π² v² Σ n² e^{-τn²} for tiny v
        let t = 0.02;
        let v = 1e-9;
        let m2: f64 = (1..2000).map(|n| (n * n) as f64 * (-t * (n * n) as f64).exp()).sum();
        assert_relative_eq!(jacobi_theta_diff(t, v), 4.0 * PI * PI * v * v * m2, max_relative = 1e-8);
    }

    #[test]
    fn half_theta_matches_direct() {
        for &t in &[0.001, 0.01, 0.1, 0.24, 0.26, 2.0] {
            for &v in &[1e-4, 0.03, 0.25, 0.49, 0.7] {
                let d: f64 = (1..200_000)
                    .map(|n: i64| (-t * (n * n) as f64).exp() * (2.0 * PI * v * n as f64).sin())
                    .sum();
                let h = half_theta(t, v);
                assert!((h - d).abs() < 1e-11 * d.abs().max(1.0), "t={t} v={v}: {h} vs {d}");
            }
        }
    }

    #[test]
    fn half_theta_limit_is_cotangent() {
        assert_relative_eq!(half_theta(1e-9, 0.2), half_theta_limit(0.2), max_relative = 1e-6);
    }

    #[test]
    fn epstein_known_value() {
        // Σ |z|^{-2s} = 4 ζ(s) β(s); at s = 2: 4 ζ(2) G (Catalan)
        let catalan = 0.915_965_594_177_219;
        assert_relative_eq!(epstein_zeta_2d(2.0), 4.0 * zeta(2.0) * catalan, max_relative = 1e-11);
    }

    #[test]
    fn second_moment_matches_epstein() {
        // isotropy: Σ z1²|z|^{-2σ} = ½ Σ |z|^{2-2σ}
        assert_relative_eq!(second_moment_2d(2.5), 0.5 * epstein_zeta_2d(1.5), max_relative = 1e-10);
    }
}
