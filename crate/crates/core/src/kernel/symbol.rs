//! Fourier symbols θ_d(u; r) = 2 Σ_z r(z) sin²(π u·z) and â(u) of the infinite-support kernels.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::jacobi::{
    epstein_zeta_2d, fold_half, half_theta, half_theta_limit, jacobi_theta, jacobi_theta_diff, mellin,
    second_moment_2d, theta0_m1, TAU_HI,
};
use super::{JumpKernel, KernelError, KernelSpec, Variant};
use crate::quad::{graded_breaks, integrate, Tolerance};
use crate::special::{gamma, zeta, PolylogUnit};

/// Which symmetric weight feeds θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RKind {
    /// Radial reference kernel s0(z) = c0/|z|^{d+α}.
    S0,
    /// Symmetric part s of the kernel itself.
    S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierSymbolParams {
    pub dim: usize,
    pub alpha: f64,
    pub r_kind: RKind,
    /// b_i^+ + b_i^- per axis (only used for r = s).
    pub axis_weights: Vec<f64>,
    pub series_cut: usize,
    pub tail_tol: f64,
}

impl FourierSymbolParams {
    pub fn new(dim: usize, alpha: f64, r_kind: RKind) -> Self {
        Self {
            dim,
            alpha,
            r_kind,
            axis_weights: vec![2.0; dim],
            series_cut: if dim == 1 { 4096 } else { 64 },
            tail_tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |m: &str| Err(KernelError::BadParameter(m.to_string()));
        if self.dim != 1 && self.dim != 2 {
            return bad("dim must be 1 or 2");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if self.series_cut < 64 {
            return bad("series_cut must be at least 64");
        }
        if !(self.tail_tol > 0.0 && self.tail_tol <= 1e-6) {
            return bad("tail_tol must lie in (0, 1e-6]");
        }
        if self.axis_weights.len() != self.dim || self.axis_weights.iter().any(|b| !(*b >= 0.0)) {
            return bad("axis_weights need one nonnegative entry per axis");
        }
        if self.axis_weights.iter().sum::<f64>() <= 0.0 {
            return bad("axis_weights must not all vanish");
        }
        Ok(())
    }
}

/// Shape of the small-|u| law of θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FKind {
    /// |x|^α, α < 2
    PowAlpha,
    /// |x|² |log |x||, α = 2
    Pow2Log,
    /// |x|², α > 2
    Pow2,
}

impl FKind {
    pub fn for_alpha(alpha: f64) -> Self {
        if alpha < 2.0 {
            FKind::PowAlpha
        } else if alpha == 2.0 {
            FKind::Pow2Log
        } else {
            FKind::Pow2
        }
    }

    pub fn eval(self, alpha: f64, x: f64) -> f64 {
        let a = x.abs();
        match self {
            FKind::PowAlpha => a.powf(alpha),
            FKind::Pow2Log => a * a * a.ln().abs(),
            FKind::Pow2 => a * a,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FKind::PowAlpha => "pow_alpha",
            FKind::Pow2Log => "pow2_log",
            FKind::Pow2 => "pow2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptote {
    pub j: f64,
    pub f_kind: FKind,
}

/// Truncated-series value with its tail bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub z_max: usize,
}

/// Analytic evaluator for θ and â of a constant-weight kernel on Z^d.
#[derive(Debug, Clone)]
pub struct Symbol {
    pub dim: usize,
    pub alpha: f64,
    pub r_kind: RKind,
    sigma: f64,
    /// normalization of p over Z^d
    c: f64,
    /// s0 normalization
    c0: f64,
    b_sum: [f64; 2],
    b_diff: [f64; 2],
    poly: Option<PolylogUnit>,
}

impl Symbol {
    /// Symbol of the kernel described by `spec` (constant weights: SYM or LA).
    pub fn from_spec(spec: &KernelSpec, r_kind: RKind) -> Result<Self, KernelError> {
        if !matches!(spec.variant, Variant::Sym | Variant::La) {
            return Err(KernelError::BadVariant {
                variant: spec.variant,
                reason: "analytic symbol needs constant direction weights".into(),
            });
        }
        let mut b_sum = [0.0; 2];
        let mut b_diff = [0.0; 2];
        for i in 0..spec.dim {
            b_sum[i] = spec.b_plus[i] + spec.b_minus[i];
            b_diff[i] = spec.b_plus[i] - spec.b_minus[i];
        }
        Ok(Self::build(spec.dim, spec.alpha, r_kind, b_sum, b_diff))
    }

    pub fn from_params(params: &FourierSymbolParams) -> Result<Self, KernelError> {
        params.validate()?;
        let mut b_sum = [0.0; 2];
        b_sum[..params.dim].copy_from_slice(&params.axis_weights);
        Ok(Self::build(params.dim, params.alpha, params.r_kind, b_sum, [0.0; 2]))
    }

    /// Unit symmetric kernel (s = s0 in d = 1).
    pub fn symmetric(dim: usize, alpha: f64) -> Self {
        let mut b = [0.0; 2];
        b[..dim].fill(2.0);
        Self::build(dim, alpha, RKind::S, b, [0.0; 2])
    }

    fn build(dim: usize, alpha: f64, r_kind: RKind, b_sum: [f64; 2], b_diff: [f64; 2]) -> Self {
        let s = dim as f64 + alpha;
        let sigma = 0.5 * s;
        let (c, c0) = if dim == 1 {
            (1.0 / (b_sum[0] * zeta(s)), 1.0 / (2.0 * zeta(s)))
        } else {
            let e = epstein_zeta_2d(sigma);
            (2.0 / ((b_sum[0] + b_sum[1]) * (e - 2.0 * zeta(s))), 1.0 / e)
        };
        let poly = (dim == 1 && !PolylogUnit::near_integer(s)).then(|| PolylogUnit::new(s));
        Self { dim, alpha, r_kind, sigma, c, c0, b_sum, b_diff, poly }
    }

    /// Normalizing constant c of p over Z^d.
    pub fn c_norm(&self) -> f64 {
        self.c
    }

    /// Normalizing constant of s0.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn is_symmetric(&self) -> bool {
        self.b_diff.iter().all(|d| *d == 0.0)
    }

    /// r(z) for the chosen kind.
    pub fn r(&self, z: [i64; 2]) -> f64 {
        if z == [0, 0] {
            return 0.0;
        }
        let n2 = (z[0] * z[0] + z[1] * z[1]) as f64;
        let w = n2.powf(-self.sigma);
        match self.r_kind {
            RKind::S0 => self.c0 * w,
            RKind::S => {
                let mut g = 0.0;
                for i in 0..self.dim {
                    if z[i] != 0 {
                        g += self.b_sum[i];
                    }
                }
                0.5 * self.c * g * w
            }
        }
    }

    /// Large-|z| amplitude A of r(z) ≈ A |z|^{-(d+α)}.
    pub fn amplitude(&self) -> f64 {
        match self.r_kind {
            RKind::S0 => self.c0,
            RKind::S => 0.5 * self.c * (self.b_sum[0] + self.b_sum[1]),
        }
    }

    /// θ_d(u).
    pub fn theta(&self, u: &[f64]) -> f64 {
        if self.dim == 1 {
            if let Some(p) = &self.poly {
                let v = fold_half(u[0]);
                if v == 0.0 {
                    return 0.0;
                }
                let (re, _) = p.eval(2.0 * PI * v);
                return (-re / zeta(p.s())).max(0.0);
            }
        }
        self.theta_mellin(u)
    }

    /// θ via the Gaussian Mellin representation (any d, any α).
    pub fn theta_mellin(&self, u: &[f64]) -> f64 {
        let sg = self.sigma;
        let rp = PI.sqrt();
        if self.dim == 1 {
            let v = fold_half(u[0]);
            if v == 0.0 {
                return 0.0;
            }
            let tau_lo = 1e-3 * v * v;
            let head = rp * tau_lo.powf(sg - 0.5) / (sg - 0.5);
            let body = mellin(|t| jacobi_theta_diff(t, v), sg, tau_lo, TAU_HI, &[PI * PI * v * v], tol())
                .unwrap_or_else(|e| e.value);
            // θ = 2 c0 Σ_{z≥1} z^{-2σ} 2 sin² = c0 Γ(σ)^{-1} ∫ τ^{σ-1} D dτ
            return self.c0 * (head + body) / gamma(sg);
        }
        let (v1, v2) = (fold_half(u[0]), fold_half(u[1]));
        if v1 == 0.0 && v2 == 0.0 {
            return 0.0;
        }
        let nz = [v1, v2].into_iter().filter(|v| *v > 0.0).fold(1.0f64, |m, v| m.min(v * v));
        let tau_lo = 1e-3 * nz;
        let marks = [PI * PI * v1 * v1, PI * PI * v2 * v2];
        match self.r_kind {
            RKind::S0 => {
                let head = PI * tau_lo.powf(sg - 1.0) / (sg - 1.0);
                let body = mellin(
                    |t| {
                        let (d1, d2) = (jacobi_theta_diff(t, v1), jacobi_theta_diff(t, v2));
                        jacobi_theta(t, 0.0) * d2 + jacobi_theta(t, v2) * d1
                    },
                    sg,
                    tau_lo,
                    TAU_HI,
                    &marks,
                    tol(),
                )
                .unwrap_or_else(|e| e.value);
                self.c0 * (head + body) / gamma(sg)
            }
            RKind::S => {
                // axis i part: Σ_{z_i≠0} |z|^{-2σ}(1 - cos 2πu·z)
                let axis = |va: f64, vb: f64| {
                    let head = PI * tau_lo.powf(sg - 1.0) / (sg - 1.0)
                        - if vb > 0.0 { rp * tau_lo.powf(sg - 0.5) / (sg - 0.5) } else { 0.0 };
                    let body = mellin(
                        |t| theta0_m1(t) * jacobi_theta_diff(t, vb) + jacobi_theta(t, vb) * jacobi_theta_diff(t, va),
                        sg,
                        tau_lo,
                        TAU_HI,
                        &marks,
                        tol(),
                    )
                    .unwrap_or_else(|e| e.value);
                    head + body
                };
                let mut acc = 0.0;
                if self.b_sum[0] > 0.0 {
                    acc += self.b_sum[0] * axis(v1, v2);
                }
                if self.b_sum[1] > 0.0 {
                    acc += self.b_sum[1] * axis(v2, v1);
                }
                0.5 * self.c * acc / gamma(sg)
            }
        }
    }

    /// Imaginary part of â(u) = Σ_y a(y) e^{2πi u·y}.
    pub fn a_hat_im(&self, u: &[f64]) -> f64 {
        if self.is_symmetric() {
            return 0.0;
        }
        if self.dim == 1 {
            let f = u[0] - u[0].floor();
            if f == 0.0 || f == 0.5 {
                return 0.0;
            }
            if let Some(p) = &self.poly {
                let (v, sign) = if f > 0.5 { (1.0 - f, -1.0) } else { (f, 1.0) };
                let (_, im) = p.eval(2.0 * PI * v);
                return sign * self.c * self.b_diff[0] * im;
            }
            return self.c * self.b_diff[0] * self.sine_series_mellin(f, None);
        }
        let [a0, a1] = self.a_hat_im_axes([u[0], u[1]]);
        a0 + a1
    }

    /// Per-axis parts of Im â in d = 2; part i is odd in u_i and even in the other coordinate.
    pub fn a_hat_im_axes(&self, u: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for i in 0..2 {
            if self.b_diff[i] != 0.0 {
                // a(y) = (c/2) Σ_i Δ_i sign(y_i)|y|^{-2σ}; sum over y_i ≠ 0 gives 2 T(u_i) Θ(u_other)
                out[i] = self.c * self.b_diff[i] * self.sine_series_mellin(u[i], Some(u[1 - i]));
            }
        }
        out
    }

    /// â(u) as a complex number (purely imaginary).
    pub fn a_hat(&self, u: &[f64]) -> Complex64 {
        Complex64::new(0.0, self.a_hat_im(u))
    }

    /// Mellin route for â in d = 1 (kept for cross-checks).
    pub fn a_hat_im_mellin(&self, u: f64) -> f64 {
        if self.is_symmetric() {
            return 0.0;
        }
        self.c * self.b_diff[0] * self.sine_series_mellin(u, None)
    }

    /// Σ_{n≥1} sin(2πvn) n^{-2σ} (other = None) or
    /// Σ_{n≥1} Σ_m sin(2πvn) cos(2πwm) (n²+m²)^{-σ} (other = Some(w)).
    fn sine_series_mellin(&self, v: f64, other: Option<f64>) -> f64 {
        let sg = self.sigma;
        let fv = fold_half(v);
        if fv == 0.0 || fv == 0.5 {
            return 0.0;
        }
        let w = other.map(fold_half);
        let nz = [Some(fv), w].into_iter().flatten().filter(|x| *x > 0.0).fold(1.0f64, |m, x| m.min(x * x));
        let tau_lo = 1e-8 * nz;
        let lim = half_theta_limit(v);
        let (head, body) = match w {
            None => {
                let head = lim * tau_lo.powf(sg) / sg;
                let body = mellin(|t| half_theta(t, v), sg, tau_lo, TAU_HI, &[PI * PI * fv * fv], tol())
                    .unwrap_or_else(|e| e.value);
                (head, body)
            }
            Some(w) => {
                let head = if w == 0.0 { lim * PI.sqrt() * tau_lo.powf(sg - 0.5) / (sg - 0.5) } else { 0.0 };
                let body = mellin(
                    |t| half_theta(t, v) * jacobi_theta(t, w),
                    sg,
                    tau_lo,
                    TAU_HI,
                    &[PI * PI * fv * fv, PI * PI * w * w],
                    tol(),
                )
                .unwrap_or_else(|e| e.value);
                (head, body)
            }
        };
        (head + body) / gamma(sg)
    }

    /// J(d, α) with θ_d(u e_1) ~ J F_α(u) as u → 0.
    pub fn asymptote(&self) -> Result<Asymptote, KernelError> {
        let a = self.alpha;
        let kind = FKind::for_alpha(a);
        let amp = self.amplitude();
        let j = match kind {
            FKind::PowAlpha => {
                let k1 = sin2_power_integral(a)?;
                let line = if self.dim == 1 { 2.0 * k1 } else { cross_section_integral(a)? * 2.0 * k1 };
                2.0 * amp * line
            }
            // 2π² A |S^{d-1}|/d
            FKind::Pow2Log => {
                if self.dim == 1 {
                    4.0 * PI * PI * amp
                } else {
                    2.0 * PI.powi(3) * amp
                }
            }
            FKind::Pow2 => 2.0 * PI * PI * self.second_moment_e1(),
        };
        Ok(Asymptote { j, f_kind: kind })
    }

    /// Σ_z r(z) z_1².
    fn second_moment_e1(&self) -> f64 {
        let s = self.dim as f64 + self.alpha;
        if self.dim == 1 {
            return self.amplitude() * 2.0 * zeta(s - 2.0);
        }
        let m = second_moment_2d(self.sigma);
        match self.r_kind {
            RKind::S0 => self.c0 * m,
            RKind::S => 0.5 * self.c * (self.b_sum[0] * m + self.b_sum[1] * (m - 2.0 * zeta(s - 2.0))),
        }
    }

    /// Direct truncated lattice sum with a tail bound, raising the cut until the bound meets `tol`.
    pub fn theta_series(&self, u: &[f64], z_start: usize, tol: f64) -> Result<SeriesValue, KernelError> {
        let cap = if self.dim == 1 { 1 << 22 } else { 1024 };
        let mut z = z_start.max(1);
        loop {
            let (value, tail) = self.series_at(u, z);
            if tail <= tol {
                return Ok(SeriesValue { value, tail_bound: tail, z_max: z });
            }
            if z >= cap {
                return Err(KernelError::TailNotConverged { bound: tail, tol, z_max: z });
            }
            z = (2 * z).min(cap);
        }
    }

    fn series_at(&self, u: &[f64], zmax: usize) -> (f64, f64) {
        let a = self.alpha;
        let rmax = match self.r_kind {
            RKind::S0 => self.c0,
            RKind::S => 0.5 * self.c * (self.b_sum[0] + self.b_sum[1]),
        };
        if self.dim == 1 {
            let mut acc = 0.0;
            for z in (1..=zmax as i64).rev() {
                let sn = (PI * u[0] * z as f64).sin();
                acc += 2.0 * self.r([z, 0]) * sn * sn;
            }
            // both signs, 2 sin² ≤ 2, Σ_{z>Z} z^{-1-α} ≤ Z^{-α}/α
            (2.0 * acc, 4.0 * rmax * (zmax as f64).powf(-a) / a)
        } else {
            let zm = zmax as i64;
            let mut acc = 0.0;
            for z0 in -zm..=zm {
                for z1 in -zm..=zm {
                    let sn = (PI * (u[0] * z0 as f64 + u[1] * z1 as f64)).sin();
                    acc += 2.0 * self.r([z0, z1]) * sn * sn;
                }
            }
            // |z|_∞ > Z lies outside the disc of radius Z; the unit cells of those points sit beyond Z - 1
            let r0 = (zmax as f64 - 1.0).max(1.0);
            (acc, 2.0 * rmax * 2.0 * PI * r0.powf(-a) / a)
        }
    }
}

fn tol() -> Tolerance {
    Tolerance::new(0.0, 1e-12).with_max(3000)
}

/// ∫_0^∞ sin²(πq) q^{-1-α} dq for 0 < α < 2.
fn sin2_power_integral(alpha: f64) -> Result<f64, KernelError> {
    let q_max: f64 = 2000.0;
    let mut br = graded_breaks(0.0, 1.0, &[0.0], 60);
    br.extend((2..=q_max as usize).map(|k| k as f64));
    let body = integrate(
        |q: f64| {
            if q == 0.0 {
                return 0.0;
            }
            let s = (PI * q).sin();
            s * s * q.powf(-1.0 - alpha)
        },
        &br,
        Tolerance::new(1e-15, 1e-13).with_max(20_000),
    )
    .map_err(|e| KernelError::QuadratureFail(e.to_string()))?;
    // ∫_Q^∞ sin² q^{-β} = Q^{-α}/(2α) - ½∫_Q^∞ cos(2πq) q^{-β}, integrated by parts at integer Q
    let beta = 1.0 + alpha;
    let cos_tail = beta * q_max.powf(-beta - 1.0) / (4.0 * PI * PI)
        - beta * (beta + 1.0) * (beta + 2.0) * q_max.powf(-beta - 3.0) / (16.0 * PI.powi(4));
    Ok(body.value + q_max.powf(-alpha) / (2.0 * alpha) - 0.5 * cos_tail)
}

/// ∫_R (1 + t²)^{-(2+α)/2} dt.
fn cross_section_integral(alpha: f64) -> Result<f64, KernelError> {
    let sg = 0.5 * (2.0 + alpha);
    // t = sinh x
    let br: Vec<f64> = (0..=40).map(|k| -40.0 + 2.0 * k as f64).collect();
    integrate(|x: f64| x.cosh().powf(1.0 - 2.0 * sg), &br, Tolerance::new(1e-16, 1e-14))
        .map(|r| r.value)
        .map_err(|e| KernelError::QuadratureFail(e.to_string()))
}

/// θ_d(u; r) for the reference kernels described by `params`.
pub fn theta(params: &FourierSymbolParams, u: &[f64]) -> Result<f64, KernelError> {
    let sym = Symbol::from_params(params)?;
    if u.len() != params.dim || u.iter().any(|x| !(0.0..1.0).contains(x)) {
        return Err(KernelError::BadParameter("u must lie in [0,1)^d".into()));
    }
    Ok(sym.theta(u))
}

/// Truncated lattice sum for θ, with adaptive cut and tail bracket.
pub fn theta_series(params: &FourierSymbolParams, u: &[f64]) -> Result<SeriesValue, KernelError> {
    let sym = Symbol::from_params(params)?;
    sym.theta_series(u, params.series_cut, params.tail_tol)
}

/// J(d, α) and the F_α family.
pub fn theta_asymptote(params: &FourierSymbolParams) -> Result<Asymptote, KernelError> {
    Symbol::from_params(params)?.asymptote()
}

/// â(u) of the kernel. Constant-weight kernels use the infinite-support
/// analytic transform; the finite-shell variants use their table, where the
/// asymmetry is confined to finitely many displacements.
pub fn a_hat(kernel: &JumpKernel, u: &[f64]) -> Complex64 {
    match Symbol::from_spec(&kernel.spec, RKind::S) {
        Ok(s) => s.a_hat(u),
        Err(_) => Complex64::new(0.0, kernel.a_hat_table(u)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn odd_zeta_closed_form_at_half() {
        let sym = Symbol::symmetric(1, 1.0);
        assert_relative_eq!(sym.theta(&[0.5]), 1.5, max_relative = 1e-13);
        for &a in &[0.5, 1.5, 3.0] {
            let s = Symbol::symmetric(1, a);
            assert_relative_eq!(s.theta(&[0.5]), 2.0 * (1.0 - 2f64.powf(-1.0 - a)), max_relative = 1e-12);
        }
    }

    #[test]
    fn polylog_and_mellin_routes_agree_in_d1() {
        for &a in &[0.5, 1.0, 1.5, 2.0, 3.0] {
            let s = Symbol::symmetric(1, a);
            for &u in &[1e-7, 1e-3, 0.05, 0.3, 0.5] {
                let p = s.theta(&[u]);
                let m = s.theta_mellin(&[u]);
                assert_relative_eq!(p, m, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn series_matches_analytic_when_converged() {
        let s = Symbol::symmetric(1, 2.5);
        let v = s.theta_series(&[0.123], 4096, 1e-6).unwrap();
        assert!((v.value - s.theta(&[0.123])).abs() <= v.tail_bound);
    }

    #[test]
    fn series_tail_error_for_heavy_tails() {
        let p = FourierSymbolParams { series_cut: 64, tail_tol: 1e-9, ..FourierSymbolParams::new(1, 0.5, RKind::S0) };
        assert!(matches!(theta_series(&p, &[0.3]), Err(KernelError::TailNotConverged { .. })));
    }

    #[test]
    fn two_d_radial_matches_series() {
        let p = FourierSymbolParams::new(2, 2.5, RKind::S0);
        let s = Symbol::from_params(&p).unwrap();
        for u in [[0.1, 0.2], [0.5, 0.5], [0.01, 0.0], [0.3, 0.7]] {
            let v = s.theta_series(&u, 256, 1e-4).unwrap();
            let m = s.theta(&u);
            assert!((v.value - m).abs() <= v.tail_bound, "{u:?}: {} vs {m}", v.value);
            assert!((v.value - m).abs() < 1e-5);
        }
    }

    #[test]
    fn two_d_axis_kernel_matches_series() {
        let spec = KernelSpec::new(2, 2.5, &[1.0, 0.3], &[1.0, 0.3], Variant::Sym, 1);
        let s = Symbol::from_spec(&spec, RKind::S).unwrap();
        for u in [[0.1, 0.2], [0.5, 0.0], [0.0, 0.25]] {
            let v = s.theta_series(&u, 256, 1e-4).unwrap();
            assert!((v.value - s.theta(&u)).abs() < 1e-5, "{u:?}");
        }
    }

    #[test]
    fn j_closed_forms() {
        // ∫_0^∞ sin²(πq) q^{-1-α} dq = π^α 2^{α-1} (-Γ(-α) cos(πα/2))
        for &a in &[0.5, 1.5] {
            let want = PI.powf(a) * 2f64.powf(a - 1.0) * (-gamma(-a) * (PI * a / 2.0).cos());
            assert_relative_eq!(sin2_power_integral(a).unwrap(), want, max_relative = 1e-10);
        }
        let a = 1.5;
        let sg: f64 = 0.5 * (2.0 + a);
        let want = PI.sqrt() * gamma(sg - 0.5) / gamma(sg);
        assert_relative_eq!(cross_section_integral(a).unwrap(), want, max_relative = 1e-12);
    }

    #[test]
    fn a_hat_small_u_slope() {
        let spec = KernelSpec::new(1, 1.5, &[2.0], &[1.0], Variant::La, 1);
        let s = Symbol::from_spec(&spec, RKind::S).unwrap();
        // Σ_{y≥1} sin(2πuy) y^{-s} = 2πu ζ(s-1) + Γ(1-s) sin(πs/2) (2πu)^{s-1} + O(u³)
        let u: f64 = 1e-4;
        let sv = 2.5;
        let x = 2.0 * PI * u;
        let want = s.c_norm() * (x * zeta(sv - 1.0) + gamma(1.0 - sv) * (PI * sv / 2.0).sin() * x.powf(sv - 1.0));
        assert_relative_eq!(s.a_hat_im(&[u]), want, max_relative = 1e-6);
        assert_relative_eq!(s.a_hat_im(&[u]), s.a_hat_im_mellin(u), max_relative = 1e-9);
        assert_relative_eq!(s.a_hat_im(&[0.2]), s.a_hat_im_mellin(0.2), max_relative = 1e-9);
        assert!(s.a_hat_im(&[0.5]).abs() < 1e-15);
        assert_relative_eq!(s.a_hat_im(&[0.3]), -s.a_hat_im(&[0.7]), max_relative = 1e-13);
    }

    #[test]
    fn a_hat_2d_matches_direct_sum() {
        let spec = KernelSpec::new(2, 2.5, &[2.0, 1.0], &[1.0, 1.5], Variant::La, 1);
        let s = Symbol::from_spec(&spec, RKind::S).unwrap();
        let u = [0.13, 0.31];
        let r = 400i64;
        let mut acc = 0.0;
        for y0 in -r..=r {
            for y1 in -r..=r {
                if y0 == 0 && y1 == 0 {
                    continue;
                }
                let w = ((y0 * y0 + y1 * y1) as f64).powf(-s.sigma);
                let a = 0.5 * s.c * (s.b_diff[0] * (y0.signum() as f64) + s.b_diff[1] * (y1.signum() as f64)) * w;
                acc += a * (2.0 * PI * (u[0] * y0 as f64 + u[1] * y1 as f64)).sin();
            }
        }
        assert!((s.a_hat_im(&u) - acc).abs() < 1e-5, "{} vs {acc}", s.a_hat_im(&u));
    }
}
