//! Exponent fits, Hurst targets, fractional-Brownian covariance diagnostics
//! and Laplace-transform consistency checks.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::quad::{integrate, Tolerance};

pub const FIT_CSV_HEADER: &str = "quantity,alpha,dim,rho,beta_hat,beta_se,window_lo,window_hi,target_beta,pass";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("grids do not match: {0}")]
    GridMismatch(String),
}

/// Slowly varying factor divided out before the log-log fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Correction {
    None,
    Log,
    SqrtLog,
    InvSqrtLog,
    LogLog,
}

impl Correction {
    pub fn as_str(self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::Log => "log",
            Correction::SqrtLog => "sqrt_log",
            Correction::InvSqrtLog => "inv_sqrt_log",
            Correction::LogLog => "loglog",
        }
    }

    /// ln of the correction factor at x.
    fn ln_factor(self, x: f64) -> f64 {
        match self {
            Correction::None => 0.0,
            Correction::Log => x.ln().ln(),
            Correction::SqrtLog => 0.5 * x.ln().ln(),
            Correction::InvSqrtLog => -0.5 * x.ln().ln(),
            Correction::LogLog => x.ln().ln().ln(),
        }
    }

    /// Smallest x at which the factor is positive.
    fn domain_min(self) -> f64 {
        match self {
            Correction::None => 0.0,
            Correction::Log | Correction::SqrtLog | Correction::InvSqrtLog => 1.0,
            Correction::LogLog => std::f64::consts::E,
        }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Correction {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Correction::None, Correction::Log, Correction::SqrtLog, Correction::InvSqrtLog, Correction::LogLog]
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| AnalysisError::BadInput(format!("unknown correction model '{s}'")))
    }
}

/// Weighted log-log regression result.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub x_grid: Vec<f64>,
    pub y_values: Vec<f64>,
    pub y_errors: Vec<f64>,
    pub beta_hat: f64,
    pub intercept: f64,
    pub beta_se: f64,
    /// inclusive indices into the grid
    pub window: (usize, usize),
    pub model: Correction,
    /// standardized residuals over the window
    pub residuals: Vec<f64>,
    /// lag-one autocorrelation of the residuals
    pub lag1: f64,
    pub white: bool,
}

impl ScalingFit {
    pub fn window_lo(&self) -> f64 {
        self.x_grid[self.window.0]
    }

    pub fn window_hi(&self) -> f64 {
        self.x_grid[self.window.1]
    }

    /// Whether β̂ lies within `tol` of `target`.
    pub fn within(&self, target: f64, tol: f64) -> bool {
        (self.beta_hat - target).abs() <= tol
    }
}

/// Least squares of ln y − ln c(x) against ln x over `lo..=hi`.
pub fn fit_in_window(
    x: &[f64],
    y: &[f64],
    y_err: &[f64],
    model: Correction,
    lo: usize,
    hi: usize,
) -> Result<ScalingFit, AnalysisError> {
    check_inputs(x, y, y_err, model)?;
    if hi >= x.len() || lo > hi || hi - lo + 1 < 5 {
        return Err(AnalysisError::InsufficientPoints { needed: 5, got: if hi >= lo { hi + 1 - lo } else { 0 } });
    }
    let weighted = y_err.iter().any(|e| *e > 0.0);
    let idx: Vec<usize> = (lo..=hi).collect();
    // logs taken relative to the first point so that rescaling y by a power of two is exact
    let y0 = y[lo];
    let lx: Vec<f64> = idx.iter().map(|&i| (x[i] / x[lo]).ln()).collect();
    let ly: Vec<f64> = idx.iter().map(|&i| (y[i] / y0).ln() - model.ln_factor(x[i])).collect();
    let w: Vec<f64> = idx
        .iter()
        .map(|&i| if weighted { (y[i] / y_err[i].max(1e-300 * y[i])).powi(2) } else { 1.0 })
        .collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(&lx).map(|(w, v)| w * v).sum::<f64>() / sw;
    let my = w.iter().zip(&ly).map(|(w, v)| w * v).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for k in 0..idx.len() {
        sxx += w[k] * (lx[k] - mx).powi(2);
        sxy += w[k] * (lx[k] - mx) * (ly[k] - my);
    }
    if !(sxx > 0.0) {
        return Err(AnalysisError::BadInput("x values in the window coincide".into()));
    }
    let beta = sxy / sxx;
    let a = my - beta * mx;
    let res: Vec<f64> = (0..idx.len()).map(|k| (ly[k] - a - beta * lx[k]) * w[k].sqrt()).collect();
    let rss: f64 = res.iter().map(|r| r * r).sum();
    let dof = (idx.len() - 2) as f64;
    let se = if weighted { (1.0 / sxx).sqrt() } else { (rss / dof / sxx).sqrt() };
    let scale = if weighted { 1.0 } else { (rss / dof).sqrt() };
    let std_res: Vec<f64> = res.iter().map(|r| if scale > 0.0 { r / scale } else { 0.0 }).collect();
    let lag1 = lag_one(&std_res);
    let chi2_ok = !weighted || rss / dof < 1.0 + 3.0 * (2.0 / dof).sqrt();
    let white = lag1.abs() <= 2.0 / (idx.len() as f64).sqrt() && chi2_ok;
    Ok(ScalingFit {
        x_grid: x.to_vec(),
        y_values: y.to_vec(),
        y_errors: y_err.to_vec(),
        beta_hat: beta,
        // intercept of ln y = intercept + β ln x + ln c(x)
        intercept: a + y0.ln() - beta * x[lo].ln(),
        beta_se: se,
        window: (lo, hi),
        model,
        residuals: std_res,
        lag1,
        white,
    })
}

/// Fit with the window chosen automatically: the widest window (in ln x) whose
/// residuals look white; ties go to the window reaching larger x. Falls back to
/// the full grid when no window qualifies.
pub fn fit_exponent(x: &[f64], y: &[f64], y_err: &[f64], model: Correction) -> Result<ScalingFit, AnalysisError> {
    check_inputs(x, y, y_err, model)?;
    let n = x.len();
    if n < 5 {
        return Err(AnalysisError::InsufficientPoints { needed: 5, got: n });
    }
    let mut windows: Vec<(usize, usize)> = (0..n).flat_map(|lo| (lo + 4..n).map(move |hi| (lo, hi))).collect();
    windows.sort_by(|a, b| {
        let sa = (x[a.1] / x[a.0]).ln();
        let sb = (x[b.1] / x[b.0]).ln();
        sb.total_cmp(&sa).then(b.1.cmp(&a.1))
    });
    for (lo, hi) in windows {
        let f = fit_in_window(x, y, y_err, model, lo, hi)?;
        if f.white {
            return Ok(f);
        }
    }
    fit_in_window(x, y, y_err, model, 0, n - 1)
}

fn check_inputs(x: &[f64], y: &[f64], y_err: &[f64], model: Correction) -> Result<(), AnalysisError> {
    if x.len() != y.len() || (!y_err.is_empty() && y_err.len() != y.len()) {
        return Err(AnalysisError::BadInput("x, y and y_err lengths differ".into()));
    }
    if y_err.is_empty() {
        return Err(AnalysisError::BadInput("y_err must be given (zeros for unweighted)".into()));
    }
    if y.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(AnalysisError::BadInput("all y must be positive".into()));
    }
    if x.iter().any(|v| !(*v > model.domain_min())) || x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::BadInput("x must be increasing and inside the model's domain".into()));
    }
    if y_err.iter().any(|e| !(*e >= 0.0)) {
        return Err(AnalysisError::BadInput("errors must be nonnegative".into()));
    }
    Ok(())
}

fn lag_one(r: &[f64]) -> f64 {
    let ss: f64 = r.iter().map(|v| v * v).sum();
    if ss == 0.0 {
        return 0.0;
    }
    r.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / ss
}

/// Row of the fit report.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub quantity: String,
    pub alpha: f64,
    pub dim: usize,
    pub rho: f64,
    pub beta_hat: f64,
    pub beta_se: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub target_beta: f64,
    pub pass: bool,
}

impl FitRow {
    pub fn new(quantity: &str, alpha: f64, dim: usize, rho: f64, fit: &ScalingFit, target: f64, tol: f64) -> Self {
        Self {
            quantity: quantity.to_string(),
            alpha,
            dim,
            rho,
            beta_hat: fit.beta_hat,
            beta_se: fit.beta_se,
            window_lo: fit.window_lo(),
            window_hi: fit.window_hi(),
            target_beta: target,
            pass: fit.within(target, tol),
        }
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.3e},{:e},{:e},{:.6},{}",
            self.quantity,
            self.alpha,
            self.dim,
            self.rho,
            self.beta_hat,
            self.beta_se,
            self.window_lo,
            self.window_hi,
            self.target_beta,
            self.pass
        )
    }
}

/// Limit law of Γ_f(tN)/σ_N(f).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HurstTarget {
    /// fractional Brownian motion with this Hurst parameter
    Fbm(f64),
    /// only a one-time Gaussian limit is known (degree two, d = 1, α ≥ 2)
    OneTimeGaussian,
}

impl HurstTarget {
    pub fn h(self) -> Option<f64> {
        match self {
            HurstTarget::Fbm(h) => Some(h),
            HurstTarget::OneTimeGaussian => None,
        }
    }
}

/// Hurst parameter for a degree-one functional.
pub fn hurst_target(alpha: f64, dim: usize) -> HurstTarget {
    hurst_target_for_degree(alpha, dim, 1)
}

/// Hurst parameter by degree of the functional. Admissible cases (variance
/// linear in t) give Brownian motion.
pub fn hurst_target_for_degree(alpha: f64, dim: usize, degree: usize) -> HurstTarget {
    if dim != 1 {
        return HurstTarget::Fbm(0.5);
    }
    match degree {
        1 => {
            if alpha <= 1.0 {
                HurstTarget::Fbm(0.5)
            } else if alpha < 2.0 {
                // one rounding, so α = 3/2 gives exactly 2/3
                HurstTarget::Fbm((2.0 * alpha - 1.0) / (2.0 * alpha))
            } else {
                HurstTarget::Fbm(0.75)
            }
        }
        2 if alpha >= 2.0 => HurstTarget::OneTimeGaussian,
        _ => HurstTarget::Fbm(0.5),
    }
}

/// ½(s^{2H} + t^{2H} − |t − s|^{2H}).
pub fn fbm_covariance(s: f64, t: f64, h: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (s.powf(e) + t.powf(e) - (t - s).abs().powf(e))
}

/// Empirical covariance of normalized paths against the FBM kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmTest {
    pub h: f64,
    pub times: Vec<f64>,
    pub n_replicas: usize,
    pub empirical: DMatrix<f64>,
    pub theoretical: DMatrix<f64>,
    pub z: DMatrix<f64>,
    /// grid index whose variance fixes the normalization
    pub norm_index: usize,
}

impl FbmTest {
    pub fn max_abs_z(&self) -> f64 {
        self.z.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest |z| among off-diagonal entries.
    pub fn max_abs_z_offdiag(&self) -> f64 {
        let n = self.times.len();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.z[(i, j)].abs());
                }
            }
        }
        m
    }

    pub fn passes(&self, z_max: f64) -> bool {
        self.max_abs_z() < z_max
    }
}

/// Compare Cov(Γ(s), Γ(t)) with the FBM kernel after scaling so that the
/// variance at the grid time nearest 1 equals t^{2H}. Each z-score uses a
/// delta-method standard error of the ratio estimator.
/// `paths[k][i]` is replica k at `times[i]`.
pub fn fbm_covariance_test(paths: &[Vec<f64>], times: &[f64], h: f64) -> Result<FbmTest, AnalysisError> {
    let n = paths.len();
    let m = times.len();
    if n < 2 {
        return Err(AnalysisError::InsufficientPoints { needed: 2, got: n });
    }
    if m == 0 || paths.iter().any(|p| p.len() != m) {
        return Err(AnalysisError::GridMismatch("every path needs one value per time".into()));
    }
    if !(h > 0.0 && h < 1.0) || times.iter().any(|t| !(*t > 0.0)) {
        return Err(AnalysisError::BadInput("need 0 < H < 1 and positive times".into()));
    }
    let norm_index = (0..m).min_by(|&a, &b| (times[a].ln().abs()).total_cmp(&times[b].ln().abs())).unwrap();
    let nf = n as f64;
    let mean: Vec<f64> = (0..m).map(|i| paths.iter().map(|p| p[i]).sum::<f64>() / nf).collect();
    let cen: Vec<Vec<f64>> = paths.iter().map(|p| (0..m).map(|i| p[i] - mean[i]).collect()).collect();
    let cov = |i: usize, j: usize| cen.iter().map(|c| c[i] * c[j]).sum::<f64>() / (nf - 1.0);
    let tn = times[norm_index].powf(2.0 * h);
    let b = cov(norm_index, norm_index) / tn;
    if !(b > 0.0) {
        return Err(AnalysisError::BadInput("paths have zero variance at the normalization time".into()));
    }
    let mut emp = DMatrix::zeros(m, m);
    let mut theo = DMatrix::zeros(m, m);
    let mut z = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let a = cov(i, j);
            let r = a / b;
            let k = fbm_covariance(times[i], times[j], h);
            // influence of each replica on A/B
            let infl: Vec<f64> = cen
                .iter()
                .map(|c| {
                    let pa = c[i] * c[j] - a;
                    let pb = (c[norm_index] * c[norm_index]) / tn - b;
                    pa / b - a * pb / (b * b)
                })
                .collect();
            let var = infl.iter().map(|v| v * v).sum::<f64>() / (nf - 1.0) / nf;
            let zz = if var > 0.0 && !(i == norm_index && j == norm_index) { (r - k) / var.sqrt() } else { 0.0 };
            emp[(i, j)] = r;
            emp[(j, i)] = r;
            theo[(i, j)] = k;
            theo[(j, i)] = k;
            z[(i, j)] = zz;
            z[(j, i)] = zz;
        }
    }
    Ok(FbmTest { h, times: times.to_vec(), n_replicas: n, empirical: emp, theoretical: theo, z, norm_index })
}

/// Exact FBM samples on `times` through the Cholesky factor of the kernel.
pub fn synthetic_fbm_paths(times: &[f64], h: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>, AnalysisError> {
    let m = times.len();
    let k = DMatrix::from_fn(m, m, |i, j| fbm_covariance(times[i], times[j], h));
    let chol = nalgebra::Cholesky::new(k).ok_or_else(|| AnalysisError::BadInput("FBM kernel not positive definite on this grid".into()))?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let g = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            (&l * g).iter().copied().collect()
        })
        .collect())
}

/// Brownian paths built from independent Gaussian increments.
pub fn synthetic_brownian_paths(times: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut acc = 0.0;
            let mut prev = 0.0;
            times
                .iter()
                .map(|&t| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    acc += g * (t - prev).sqrt();
                    prev = t;
                    acc
                })
                .collect()
        })
        .collect()
}

/// Natural cubic spline through (x_i, y_i).
#[derive(Debug, Clone)]
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for the second derivatives, natural ends
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let cc = h1 / 6.0;
                let r = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
                let denom = b - a * c[i - 1];
                c[i] = cc / denom;
                d[i] = (r - a * d[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        Self { x: x.to_vec(), y: y.to_vec(), m }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(k) => return self.y[k],
            Err(k) => k.clamp(1, n - 1),
        };
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        a * self.y[k - 1]
            + b * self.y[k]
            + ((a * a * a - a) * self.m[k - 1] + (b * b * b - b) * self.m[k]) * h * h / 6.0
    }
}

/// Variance curve interpolated in log-log coordinates, extended by t² below
/// the grid and by the last local power law above it.
#[derive(Debug, Clone)]
pub struct ExtendedCurve {
    spline: Spline,
    t_min: f64,
    t_max: f64,
    v_min: f64,
    v_max: f64,
    tail_slope: f64,
}

impl ExtendedCurve {
    pub fn new(t: &[f64], v: &[f64]) -> Result<Self, AnalysisError> {
        if t.len() != v.len() {
            return Err(AnalysisError::GridMismatch("variance grid and values differ in length".into()));
        }
        if t.len() < 4 {
            return Err(AnalysisError::InsufficientPoints { needed: 4, got: t.len() });
        }
        if t.windows(2).any(|w| w[1] <= w[0]) || t[0] <= 0.0 || v.iter().any(|x| !(*x > 0.0)) {
            return Err(AnalysisError::BadInput("need increasing positive times and positive variances".into()));
        }
        let lt: Vec<f64> = t.iter().map(|x| x.ln()).collect();
        let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let n = t.len();
        let tail_slope = (lv[n - 1] - lv[n - 2]) / (lt[n - 1] - lt[n - 2]);
        Ok(Self { spline: Spline::new(&lt, &lv), t_min: t[0], t_max: t[n - 1], v_min: v[0], v_max: v[n - 1], tail_slope })
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t < self.t_min {
            self.v_min * (t / self.t_min).powi(2)
        } else if t > self.t_max {
            self.v_max * (t / self.t_max).powf(self.tail_slope)
        } else {
            self.spline.eval(t.ln()).exp()
        }
    }

    /// ∫_0^∞ e^{−λt} σ²(t) dt.
    pub fn laplace(&self, lambda: f64) -> Result<f64, AnalysisError> {
        let mut br = vec![0.0, self.t_min];
        let mut s = self.t_min;
        while s < self.t_max {
            s = (s * 2.0).min(self.t_max);
            br.push(s);
        }
        let end = self.t_max.max(80.0 / lambda);
        while s < end {
            s *= 2.0;
            br.push(s);
        }
        integrate(|t| (-lambda * t).exp() * self.eval(t), &br, Tolerance::new(0.0, 1e-10).with_max(20_000))
            .map(|r| r.value)
            .map_err(|e| AnalysisError::BadInput(e.to_string()))
    }
}

/// Per-λ outcome of the Laplace consistency check.
#[derive(Debug, Clone, PartialEq)]
pub struct TauberRow {
    pub lambda: f64,
    pub laplace_given: f64,
    pub laplace_from_variance: f64,
    pub rel_deviation: f64,
    /// λ L(λ) / σ²(1/λ)
    pub tauber_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauberReport {
    pub rows: Vec<TauberRow>,
}

impl TauberReport {
    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().fold(0.0f64, |m, r| m.max(r.rel_deviation))
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("lambda,laplace,laplace_from_variance,rel_deviation,tauber_ratio\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:e},{:.12e},{:.12e},{:.3e},{:.6}\n",
                r.lambda, r.laplace_given, r.laplace_from_variance, r.rel_deviation, r.tauber_ratio
            ));
        }
        s
    }
}

/// Laplace-transform the variance curve and compare with the given L(λ).
/// The t-grid must reach 10/λ_min above and 0.1/λ_max below.
pub fn tauberian_check(
    variance_curve: (&[f64], &[f64]),
    laplace_curve: (&[f64], &[f64]),
) -> Result<TauberReport, AnalysisError> {
    let (t, v) = variance_curve;
    let (lam, lv) = laplace_curve;
    if lam.len() != lv.len() || lam.is_empty() {
        return Err(AnalysisError::GridMismatch("laplace grid and values differ in length".into()));
    }
    let curve = ExtendedCurve::new(t, v)?;
    let l_min = lam.iter().cloned().fold(f64::INFINITY, f64::min);
    let l_max = lam.iter().cloned().fold(0.0, f64::max);
    if !(l_min > 0.0) {
        return Err(AnalysisError::BadInput("lambda must be positive".into()));
    }
    if curve.t_max < 10.0 / l_min || curve.t_min > 0.1 / l_max {
        return Err(AnalysisError::GridMismatch(format!(
            "t-grid [{:e}, {:e}] does not cover [{:e}, {:e}]",
            curve.t_min,
            curve.t_max,
            0.1 / l_max,
            10.0 / l_min
        )));
    }
    let mut rows = Vec::with_capacity(lam.len());
    for (&l, &given) in lam.iter().zip(lv) {
        let from_v = curve.laplace(l)?;
        rows.push(TauberRow {
            lambda: l,
            laplace_given: given,
            laplace_from_variance: from_v,
            rel_deviation: ((from_v - given) / given).abs(),
            tauber_ratio: l * given / curve.eval(1.0 / l),
        });
    }
    Ok(TauberReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn spline_reproduces_cubics_inside() {
        let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let s = Spline::new(&x, &y);
        assert_relative_eq!(s.eval(1.234), 2.0 * 1.234 + 1.0, max_relative = 1e-13);
    }

    #[test]
    fn correction_models_divide_out() {
        let x = logspace(2.0, 6.0, 17);
        let zeros = vec![0.0; x.len()];
        let y: Vec<f64> = x.iter().map(|v| v * v.ln().sqrt()).collect();
        let f = fit_in_window(&x, &y, &zeros, Correction::SqrtLog, 0, 16).unwrap();
        assert!((f.beta_hat - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| v * v.ln().ln()).collect();
        let f = fit_in_window(&x, &y, &zeros, Correction::LogLog, 0, 16).unwrap();
        assert!((f.beta_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brownian_paths_have_unit_rate() {
        let t = [0.25, 0.5, 1.0, 2.0];
        let p = synthetic_brownian_paths(&t, 4000, 3);
        let test = fbm_covariance_test(&p, &t, 0.5).unwrap();
        assert_eq!(test.norm_index, 2);
        assert!(test.max_abs_z() < 4.0, "{}", test.z);
    }
}
