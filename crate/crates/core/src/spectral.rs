//! Quadrature over the Fourier torus: occupation-time variance, its Laplace
//! transform, the asymmetric lower-bound integral, J_α and the Green's function.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::kernel::{FourierSymbolParams, JumpKernel, KernelError, KernelSpec, RKind, Symbol, Variant};
use crate::quad::{gk_nodes, graded_breaks, integrate, QuadError, QuadResult, Tolerance};

pub const SPECTRAL_CSV_HEADER: &str = "target,dim,alpha,rho,t_or_lambda,value,err_est,regime_tag";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    VarianceT,
    LaplaceLambda,
    IdAlphaT,
    ILowerBound,
    JAlphaBound,
    GreenUt,
}

impl Target {
    pub const ALL: [Target; 6] = [
        Target::VarianceT,
        Target::LaplaceLambda,
        Target::IdAlphaT,
        Target::ILowerBound,
        Target::JAlphaBound,
        Target::GreenUt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::VarianceT => "variance_t",
            Target::LaplaceLambda => "laplace_lambda",
            Target::IdAlphaT => "id_alpha_t",
            Target::ILowerBound => "i_lower_bound",
            Target::JAlphaBound => "j_alpha_bound",
            Target::GreenUt => "green_ut",
        }
    }

    /// Whether the job's abscissa is a time (else a resolvent parameter).
    pub fn uses_time(self) -> bool {
        matches!(self, Target::VarianceT | Target::IdAlphaT | Target::GreenUt)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = SpectralError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.trim().chars().filter(|c| *c != '_').collect::<String>().to_ascii_lowercase();
        Target::ALL
            .into_iter()
            .find(|t| t.as_str().replace('_', "") == key)
            .ok_or_else(|| SpectralError::BadJob(format!("unknown target '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("invalid job: {0}")]
    BadJob(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("quadrature failed: value {value:e}, error estimate {err:e}")]
    QuadratureFail { value: f64, err: f64 },
    #[error("inner grid too coarse: {coarse:e} against refined {fine:e}")]
    InnerGridTooCoarse { coarse: f64, fine: f64 },
    #[error("value {value:e} exceeds the fitted bound {bound:e}")]
    BoundViolated { value: f64, bound: f64 },
}

impl From<QuadError> for SpectralError {
    fn from(e: QuadError) -> Self {
        SpectralError::QuadratureFail { value: e.value, err: e.err }
    }
}

/// One quadrature evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralJob {
    pub target: Target,
    pub kernel: KernelSpec,
    pub rho: f64,
    pub t: f64,
    pub lambda: f64,
    pub delta: f64,
    pub u: f64,
    /// lattice site x for the Green's function
    pub site: [i64; 2],
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// innermost graded cell, in units of the job's natural length scale
    pub singular_pad: f64,
    /// also compute the time-domain Laplace transform (LaplaceLambda only)
    pub cross_check: bool,
    /// outer grid side for the two-dimensional lower-bound integral
    pub grid_n: usize,
}

impl SpectralJob {
    pub fn new(target: Target, kernel: KernelSpec, rho: f64) -> Self {
        Self {
            target,
            kernel,
            rho,
            t: 1.0,
            lambda: 1.0,
            delta: 0.05,
            u: 0.01,
            site: [0, 0],
            abs_tol: 1e-13,
            rel_tol: 1e-6,
            singular_pad: 0.01,
            cross_check: false,
            grid_n: 64,
        }
    }

    /// Unit symmetric kernel at ρ = 1/2.
    pub fn symmetric(target: Target, dim: usize, alpha: f64) -> Self {
        Self::new(target, KernelSpec::symmetric(dim, alpha, 1), 0.5)
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.alpha
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_j(mut self, lambda: f64, delta: f64, u: f64) -> Self {
        self.lambda = lambda;
        self.delta = delta;
        self.u = u;
        self
    }

    pub fn with_site(mut self, x: [i64; 2]) -> Self {
        self.site = x;
        self
    }

    pub fn with_tol(mut self, abs: f64, rel: f64) -> Self {
        self.abs_tol = abs;
        self.rel_tol = rel;
        self
    }

    pub fn with_pad(mut self, pad: f64) -> Self {
        self.singular_pad = pad;
        self
    }

    pub fn with_cross_check(mut self, on: bool) -> Self {
        self.cross_check = on;
        self
    }

    pub fn t_or_lambda(&self) -> f64 {
        if self.target.uses_time() {
            self.t
        } else {
            self.lambda
        }
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        let bad = |m: String| Err(SpectralError::BadJob(m));
        self.kernel.validate()?;
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0,1)".into());
        }
        for (name, v) in [("abs_tol", self.abs_tol), ("rel_tol", self.rel_tol)] {
            if !(v > 0.0 && v <= 1e-3) {
                return bad(format!("{name} must lie in (0, 1e-3]"));
            }
        }
        if !(self.singular_pad > 0.0 && self.singular_pad < 0.1) {
            return bad("singular_pad must lie in (0, 0.1)".into());
        }
        let finite_pos = |x: f64| x > 0.0 && x.is_finite();
        match self.target {
            Target::VarianceT | Target::IdAlphaT | Target::GreenUt => {
                if !finite_pos(self.t) {
                    return bad("t must be positive".into());
                }
            }
            Target::LaplaceLambda | Target::ILowerBound => {
                if !finite_pos(self.lambda) {
                    return bad("lambda must be positive".into());
                }
            }
            Target::JAlphaBound => {
                if self.dim() != 1 {
                    return bad("j_alpha_bound is one-dimensional".into());
                }
                if !(finite_pos(self.lambda) && self.u > 0.0 && self.u < self.delta && self.delta < 0.1) {
                    return bad("need lambda > 0 and 0 < u < delta < 0.1".into());
                }
            }
        }
        if self.target == Target::GreenUt && self.kernel.b_plus != self.kernel.b_minus {
            return bad("green_ut needs a symmetric kernel".into());
        }
        if self.target == Target::ILowerBound && self.dim() == 2 && (self.grid_n < 8 || !self.grid_n.is_multiple_of(2)) {
            return bad("grid_n must be even and at least 8".into());
        }
        Ok(())
    }

    /// Flat key=value form; the kernel block is embedded.
    pub fn to_kv(&self) -> String {
        let mut s = format!("target={}\n", self.target);
        s.push_str(&self.kernel.to_kv());
        s.push_str(&format!(
            "rho={}\nt={}\nlambda={}\ndelta={}\nu={}\nx={},{}\nabs_tol={}\nrel_tol={}\nsingular_pad={}\ncross_check={}\ngrid_n={}\n",
            self.rho,
            self.t,
            self.lambda,
            self.delta,
            self.u,
            self.site[0],
            self.site[1],
            self.abs_tol,
            self.rel_tol,
            self.singular_pad,
            self.cross_check,
            self.grid_n
        ));
        s
    }

    /// Parse a job; kernel keys default to a unit symmetric kernel with truncation radius 1.
    pub fn from_kv(text: &str) -> Result<Self, SpectralError> {
        const KERNEL_KEYS: [&str; 7] = ["dim", "alpha", "b_plus", "b_minus", "variant", "trunc_radius", "inner_radius"];
        let mut kernel_lines = Vec::new();
        let mut map = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SpectralError::BadJob(format!("line {}: expected key=value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if KERNEL_KEYS.contains(&k) {
                kernel_lines.push((k.to_string(), v.to_string()));
            } else {
                map.insert(k.to_string(), v.to_string());
            }
        }
        let get_k = |k: &str| kernel_lines.iter().find(|(a, _)| a == k).map(|(_, v)| v.clone());
        let dim: usize = get_k("dim").ok_or_else(|| SpectralError::BadJob("missing key 'dim'".into()))?.parse().map_err(|_| SpectralError::BadJob("bad dim".into()))?;
        let ones = vec!["1"; dim].join(",");
        let mut kv = String::new();
        for k in KERNEL_KEYS {
            let v = get_k(k).unwrap_or_else(|| match k {
                "b_plus" | "b_minus" => ones.clone(),
                "variant" => "SYM".into(),
                "trunc_radius" | "inner_radius" => "1".into(),
                _ => String::new(),
            });
            if !v.is_empty() {
                kv.push_str(&format!("{k}={v}\n"));
            }
        }
        let kernel = KernelSpec::from_kv(&kv)?;
        let target: Target = map.remove("target").ok_or_else(|| SpectralError::BadJob("missing key 'target'".into()))?.parse()?;
        let mut job = SpectralJob::new(target, kernel, 0.5);
        for (k, v) in map {
            let num = || v.parse::<f64>().map_err(|_| SpectralError::BadJob(format!("bad number for '{k}'")));
            match k.as_str() {
                "rho" => job.rho = num()?,
                "t" => job.t = num()?,
                "lambda" => job.lambda = num()?,
                "delta" => job.delta = num()?,
                "u" => job.u = num()?,
                "abs_tol" => job.abs_tol = num()?,
                "rel_tol" => job.rel_tol = num()?,
                "singular_pad" => job.singular_pad = num()?,
                "grid_n" => job.grid_n = num()? as usize,
                "cross_check" => {
                    job.cross_check = v.parse().map_err(|_| SpectralError::BadJob("cross_check must be true or false".into()))?
                }
                "x" => {
                    let parts: Result<Vec<i64>, _> = v.split(',').map(|p| p.trim().parse::<i64>()).collect();
                    let parts = parts.map_err(|_| SpectralError::BadJob("bad site 'x'".into()))?;
                    job.site = [parts.first().copied().unwrap_or(0), parts.get(1).copied().unwrap_or(0)];
                }
                _ => return Err(SpectralError::BadJob(format!("unknown key '{k}'"))),
            }
        }
        job.validate()?;
        Ok(job)
    }
}

/// Result of one job.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralValue {
    pub value: f64,
    pub err_est: f64,
    pub regime_tag: String,
    /// fitted analytic bound (JAlphaBound)
    pub bound: Option<f64>,
    /// time-domain Laplace transform of the variance (LaplaceLambda with cross_check)
    pub companion: Option<f64>,
}

impl SpectralValue {
    fn plain(value: f64, err_est: f64, tag: &str) -> Self {
        Self { value, err_est, regime_tag: tag.to_string(), bound: None, companion: None }
    }

    pub fn csv_row(&self, job: &SpectralJob) -> String {
        format!(
            "{},{},{},{},{:e},{:.17e},{:.3e},{}",
            job.target,
            job.dim(),
            job.alpha(),
            job.rho,
            job.t_or_lambda(),
            self.value,
            self.err_est,
            self.regime_tag
        )
    }
}

fn chi(rho: f64) -> f64 {
    rho * (1.0 - rho)
}

/// (x - 1 + e^{-x}) / x², regular at 0.
fn g_var(x: f64) -> f64 {
    if x < 1e-3 {
        0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0
    } else {
        (x + (-x).exp_m1()) / (x * x)
    }
}

/// (1 - e^{-x}) / x, regular at 0.
fn e_green(x: f64) -> f64 {
    if x < 1e-3 {
        1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0
    } else {
        -(-x).exp_m1() / x
    }
}

fn eff_alpha(alpha: f64) -> f64 {
    alpha.min(2.0)
}

/// Graded-mesh depth so that the innermost cell of a panel of length `len` is `pad * ell`.
fn depth_for(len: f64, pad: f64, ell: f64) -> u32 {
    let ratio = len / (pad * ell).max(1e-300);
    (ratio.log2().ceil().max(4.0) as u32).min(90)
}

fn time_scale(alpha: f64, t: f64) -> f64 {
    t.powf(-1.0 / eff_alpha(alpha)).min(0.5)
}

fn lambda_scale(alpha: f64, lambda: f64) -> f64 {
    lambda.powf(1.0 / eff_alpha(alpha)).min(0.5)
}

/// θ of the kernel's symmetric part (constant-weight kernels).
fn symmetric_symbol(job: &SpectralJob) -> Result<Symbol, SpectralError> {
    match job.kernel.variant {
        Variant::Sym | Variant::La => Ok(Symbol::from_spec(&job.kernel, RKind::S)?),
        v => Err(SpectralError::BadJob(format!("{v} kernel has no analytic symbol; use SYM or LA"))),
    }
}

fn reference_symbol(job: &SpectralJob) -> Result<Symbol, SpectralError> {
    Ok(Symbol::from_params(&FourierSymbolParams::new(job.dim(), job.alpha(), RKind::S0))?)
}

/// ∫_{T^1} f(θ(u), u) du through the fundamental half period.
fn torus_1d<F: FnMut(f64) -> f64>(f: F, depth: u32, abs: f64, rel: f64) -> Result<QuadResult, SpectralError> {
    let br = graded_breaks(0.0, 0.5, &[0.0], depth);
    let r = integrate(f, &br, Tolerance::new(0.5 * abs, rel).with_max(40_000))?;
    Ok(QuadResult { value: 2.0 * r.value, err: 2.0 * r.err, evals: r.evals })
}

/// Tensor GK15 nodes over [0,1/2]² in polar coordinates (angle split at the
/// diagonal, radius graded geometrically toward the origin), with θ tabulated once.
/// Inside the innermost pad cell θ is continued from the cell edge by the
/// leading power law, which keeps the analytic evaluator away from |u| → 0.
#[derive(Debug)]
pub struct PolarMesh {
    pub depth: u32,
    pub u: Vec<[f64; 2]>,
    wk: Vec<f64>,
    wg: Vec<f64>,
    pub theta: Vec<f64>,
}

impl PolarMesh {
    /// `depth` is rounded up to even; the innermost cell has radius r_max 2^-depth.
    pub fn build(sym: &Symbol, depth: u32) -> Self {
        let depth = depth.div_ceil(2) * 2;
        let (x, wk, wg) = gk_nodes();
        let mut u = Vec::new();
        let mut wks = Vec::new();
        let mut wgs = Vec::new();
        // (node index, index of the cell-edge node it is continued from, r / r_edge)
        let mut inner = Vec::new();
        for p in 0..2 {
            let (a, b) = (p as f64 * PI / 4.0, (p + 1) as f64 * PI / 4.0);
            let (cp, hp) = (0.5 * (a + b), 0.5 * (b - a));
            for i in 0..15 {
                let phi = cp + hp * x[i];
                let (c, s) = (phi.cos(), phi.sin());
                let r_max = 0.5 / c.max(s);
                // radial panels shrink by 4
                let edges: Vec<f64> = (0..=depth / 2).map(|k| r_max * 0.25f64.powi(k as i32)).collect();
                for w in edges.windows(2) {
                    let (r1, r0) = (w[0], w[1]);
                    let (cr, hr) = (0.5 * (r0 + r1), 0.5 * (r1 - r0));
                    for j in 0..15 {
                        let r = cr + hr * x[j];
                        u.push([r * c, r * s]);
                        wks.push(hp * wk[i] * hr * wk[j] * r);
                        wgs.push(hp * wg[i] * hr * wg[j] * r);
                    }
                }
                let r_in = *edges.last().unwrap();
                let edge = u.len();
                u.push([r_in * c, r_in * s]);
                wks.push(0.0);
                wgs.push(0.0);
                let hr = 0.5 * r_in;
                for j in 0..15 {
                    let r = hr + hr * x[j];
                    inner.push((u.len(), edge, r / r_in));
                    u.push([r * c, r * s]);
                    wks.push(hp * wk[i] * hr * wk[j] * r);
                    wgs.push(hp * wg[i] * hr * wg[j] * r);
                }
            }
        }
        let exact: Vec<bool> = {
            let mut e = vec![true; u.len()];
            for &(k, _, _) in &inner {
                e[k] = false;
            }
            e
        };
        let eval = |k: usize| if exact[k] { sym.theta(&u[k]) } else { 0.0 };
        // nested inside a batch worker the outer batch already owns the pool
        let mut theta: Vec<f64> = if rayon::current_thread_index().is_some() {
            (0..u.len()).map(eval).collect()
        } else {
            (0..u.len()).into_par_iter().map(eval).collect()
        };
        let a = eff_alpha(sym.alpha);
        for (k, edge, q) in inner {
            theta[k] = theta[edge] * q.powf(a);
        }
        Self { depth, u, wk: wks, wg: wgs, theta }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// ∫_{T²} f(θ(u), u) du with the embedded-Gauss error estimate.
    pub fn integrate<F: Fn(f64, [f64; 2]) -> f64>(&self, f: F) -> QuadResult {
        let (mut k, mut g) = (0.0, 0.0);
        for n in 0..self.u.len() {
            if self.wk[n] == 0.0 {
                continue;
            }
            let v = f(self.theta[n], self.u[n]);
            k += self.wk[n] * v;
            g += self.wg[n] * v;
        }
        QuadResult { value: 4.0 * k, err: 4.0 * (k - g).abs(), evals: self.u.len() }
    }
}

type MeshKey = (String, u64);

fn mesh_cache() -> &'static Mutex<HashMap<MeshKey, Arc<PolarMesh>>> {
    static CACHE: OnceLock<Mutex<HashMap<MeshKey, Arc<PolarMesh>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn mesh_key(job: &SpectralJob, reference: bool) -> MeshKey {
    let spec_key = if reference { format!("s0:{}", job.alpha()) } else { job.kernel.symmetrized().to_kv() };
    (spec_key, job.singular_pad.to_bits())
}

/// A cached mesh at least `depth_for(pad, ell)` deep; deeper meshes are reused.
fn mesh_for(job: &SpectralJob, sym: &Symbol, reference: bool, ell: f64) -> Arc<PolarMesh> {
    let depth = depth_for(0.5, job.singular_pad, ell);
    let key = mesh_key(job, reference);
    if let Some(m) = mesh_cache().lock().unwrap().get(&key) {
        if m.depth >= depth {
            return m.clone();
        }
    }
    // built outside the lock; a concurrent duplicate build is harmless
    let mesh = Arc::new(PolarMesh::build(sym, depth));
    let mut cache = mesh_cache().lock().unwrap();
    let slot = cache.entry(key).or_insert_with(|| mesh.clone());
    if slot.depth < mesh.depth {
        *slot = mesh;
    }
    slot.clone()
}

fn check_mesh(r: QuadResult, job: &SpectralJob) -> Result<QuadResult, SpectralError> {
    if r.err > job.abs_tol.max(job.rel_tol * r.value.abs()) || !r.value.is_finite() {
        return Err(SpectralError::QuadratureFail { value: r.value, err: r.err });
    }
    Ok(r)
}

/// ∫_{T^d} t² G(θ t) du for the chosen symbol.
fn variance_integral(job: &SpectralJob, sym: &Symbol, reference: bool) -> Result<QuadResult, SpectralError> {
    let t = job.t;
    let ell = time_scale(job.alpha(), t);
    let scale = t * t;
    if job.dim() == 1 {
        let depth = depth_for(0.5, job.singular_pad, ell);
        let r = torus_1d(|u| g_var(sym.theta(&[u]) * t), depth, job.abs_tol / scale, job.rel_tol)?;
        Ok(QuadResult { value: scale * r.value, err: scale * r.err, evals: r.evals })
    } else {
        let mesh = mesh_for(job, sym, reference, ell);
        let r = mesh.integrate(|th, _| g_var(th * t));
        let r = QuadResult { value: scale * r.value, err: scale * r.err, evals: r.evals };
        check_mesh(r, job)
    }
}

/// Growth law of ∫ (θt − 1 + e^{−θt})/θ² du.
pub fn variance_regime(dim: usize, alpha: f64) -> &'static str {
    if dim == 1 {
        if alpha < 1.0 {
            "t"
        } else if alpha == 1.0 {
            "t*log(t)"
        } else if alpha < 2.0 {
            "t^(2-1/alpha)"
        } else if alpha == 2.0 {
            "t^(3/2)*log(t)^(-1/2)"
        } else {
            "t^(3/2)"
        }
    } else if alpha < 2.0 {
        "t"
    } else if alpha == 2.0 {
        "t*log(log(t))"
    } else {
        "t*log(t)"
    }
}

/// Growth law of L_f(λ) for a symmetric kernel.
pub fn laplace_regime(dim: usize, alpha: f64) -> &'static str {
    if dim == 1 {
        if alpha < 1.0 {
            "lambda^(-2)"
        } else if alpha == 1.0 {
            "lambda^(-2)*log(1/lambda)"
        } else if alpha < 2.0 {
            "lambda^(1/alpha-3)"
        } else if alpha == 2.0 {
            "lambda^(-5/2)*log(1/lambda)^(-1/2)"
        } else {
            "lambda^(-5/2)"
        }
    } else if alpha < 2.0 {
        "lambda^(-2)"
    } else if alpha == 2.0 {
        "lambda^(-2)*log(log(1/lambda))"
    } else {
        "lambda^(-2)*log(1/lambda)"
    }
}

/// σ_t²(η(0) − ρ) = 2χ(ρ) ∫ (θt − 1 + e^{−θt})/θ² du with θ from the kernel's symmetric part.
pub fn variance_sym(job: &SpectralJob) -> Result<SpectralValue, SpectralError> {
    expect(job, Target::VarianceT)?;
    let sym = symmetric_symbol(job)?;
    let c = 2.0 * chi(job.rho);
    let r = variance_integral(job, &sym, false)?;
    Ok(SpectralValue::plain(c * r.value, c * r.err, variance_regime(job.dim(), job.alpha())))
}

/// I_{d,α}(t) with θ built from the radial reference kernel.
pub fn id_alpha_t(job: &SpectralJob) -> Result<SpectralValue, SpectralError> {
    expect(job, Target::IdAlphaT)?;
    let sym = reference_symbol(job)?;
    let r = variance_integral(job, &sym, true)?;
    Ok(SpectralValue::plain(r.value, r.err, variance_regime(job.dim(), job.alpha())))
}

fn resolvent_integral(job: &SpectralJob, sym: &Symbol) -> Result<QuadResult, SpectralError> {
    let l = job.lambda;
    let ell = lambda_scale(job.alpha(), l);
    if job.dim() == 1 {
        let depth = depth_for(0.5, job.singular_pad, ell);
        torus_1d(|u| 1.0 / (l + sym.theta(&[u])), depth, job.abs_tol, job.rel_tol)
    } else {
        let mesh = mesh_for(job, sym, false, ell);
        check_mesh(mesh.integrate(|th, _| 1.0 / (l + th)), job)
    }
}

/// L_f(λ) = 2χ(ρ) λ^{-2} ∫ du/(λ + θ); with `cross_check` the companion
/// ∫_0^∞ e^{−λt} σ_t² dt is computed from `variance_sym` in the time domain.
pub fn laplace_sym(job: &SpectralJob) -> Result<SpectralValue, SpectralError> {
    expect(job, Target::LaplaceLambda)?;
    let sym = symmetric_symbol(job)?;
    let l = job.lambda;
    let c = 2.0 * chi(job.rho) / (l * l);
    let r = resolvent_integral(job, &sym)?;
    let mut out = SpectralValue::plain(c * r.value, c * r.err, laplace_regime(job.dim(), job.alpha()));
    if job.cross_check {
        out.companion = Some(time_domain_laplace(job)?);
    }
    Ok(out)
}

/// ∫_0^∞ e^{−λt} σ_t² dt = λ^{-1} ∫_0^∞ e^{−x} σ²(x/λ) dx by nested quadrature.
fn time_domain_laplace(job: &SpectralJob) -> Result<f64, SpectralError> {
    let l = job.lambda;
    let inner_rel = (job.rel_tol * 1e-2).max(1e-12);
    let mut failure = None;
    let mut br = graded_breaks(0.0, 1.0, &[0.0], 30);
    br.extend([2.0, 4.0, 8.0, 16.0, 32.0, 48.0, 64.0, 80.0]);
    let r = integrate(
        |x| {
            if x == 0.0 {
                return 0.0;
            }
            let inner = SpectralJob { target: Target::VarianceT, t: x / l, rel_tol: inner_rel, ..job.clone() };
            match variance_sym(&inner) {
                Ok(v) => (-x).exp() * v.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        &br,
        Tolerance::new(0.0, job.rel_tol.max(1e-9)).with_max(2000),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r.value / l)
}

/// L_f(λ) on the discrete torus of side L: 2χ λ^{-2} L^{-1} Σ_k 1/(λ + θ_L(k)),
/// θ_L built from the kernel table folded mod L. One-dimensional, symmetric kernels.
pub fn laplace_sym_discrete(kernel: &JumpKernel, side: usize, rho: f64, lambda: f64) -> Result<f64, SpectralError> {
    if kernel.dim() != 1 || kernel.spec.b_plus != kernel.spec.b_minus {
        return Err(SpectralError::BadJob("discrete analog needs a one-dimensional symmetric kernel".into()));
    }
    if !(lambda > 0.0) || side == 0 {
        return Err(SpectralError::BadJob("need lambda > 0 and L > 0".into()));
    }
    let n = side as f64;
    let mut acc = 0.0;
    for k in 0..side {
        let th: f64 = kernel
            .entries()
            .map(|(y, p)| p * (1.0 - (2.0 * PI * k as f64 * y[0] as f64 / n).cos()))
            .sum();
        acc += 1.0 / (lambda + th);
    }
    Ok(2.0 * chi(rho) * acc / (n * lambda * lambda))
}

/// â of the kernel: analytic for constant weights, table otherwise.
enum AHat {
    Analytic(Symbol),
    Table(JumpKernel),
}

impl AHat {
    fn new(spec: &KernelSpec) -> Result<Self, SpectralError> {
        Ok(match spec.variant {
            Variant::Sym | Variant::La => AHat::Analytic(Symbol::from_spec(spec, RKind::S)?),
            _ => AHat::Table(JumpKernel::new(spec.clone())?),
        })
    }

    fn im(&self, u: &[f64]) -> f64 {
        match self {
            AHat::Analytic(s) => s.a_hat_im(u),
            AHat::Table(k) => k.a_hat_table(u),
        }
    }
}

/// Exponent law attached to I_d(λ, ρ).
pub fn lower_bound_regime(dim: usize, alpha: f64, rho: f64) -> &'static str {
    if dim == 2 {
        return "log(log(1/lambda)) (not asserted)";
    }
    if rho != 0.5 {
        return "open";
    }
    if alpha < 1.0 {
        "bounded"
    } else if alpha == 1.0 {
        "log(1/lambda)"
    } else if alpha <= 1.5 {
        "lambda^(1/alpha-1)"
    } else if alpha < 2.0 {
        "lambda^(-1/(2alpha))"
    } else if alpha == 2.0 {
        "lambda^(-1/4)*log(1/lambda)^(1/4)"
    } else {
        "open"
    }
}

struct LowerBoundParts {
    theta: Symbol,
    ahat: AHat,
    lambda: f64,
    chi: f64,
    m: f64,
}

impl LowerBoundParts {
    fn inner(&self, u: f64, depth: u32, tol: Tolerance) -> Result<QuadResult, SpectralError> {
        let br = graded_breaks(0.0, 1.0, &[0.0, u, 1.0], depth);
        let l = self.lambda;
        Ok(integrate(
            |s| {
                let d = u - s;
                let a = self.ahat.im(&[s]) + self.ahat.im(&[d]);
                a * a / (l + self.theta.theta(&[s]) + self.theta.theta(&[d]))
            },
            &br,
            tol,
        )?)
    }

    fn f_value(&self, u: f64, inner: f64) -> f64 {
        let th = self.theta.theta(&[u]);
        let a = self.ahat.im(&[u]);
        let base = self.lambda + th;
        base + self.m * a * a / base + self.chi * inner
    }
}

/// I_d(λ, ρ) = ∫_{T^d} du / F(u), F the three-term lower-bound symbol.
pub fn i_lower_bound(job: &SpectralJob) -> Result<SpectralValue, SpectralError> {
    expect(job, Target::ILowerBound)?;
    let parts = LowerBoundParts {
        theta: reference_symbol(job)?,
        ahat: AHat::new(&job.kernel)?,
        lambda: job.lambda,
        chi: chi(job.rho),
        m: (1.0 - 2.0 * job.rho).powi(2),
    };
    let tag = lower_bound_regime(job.dim(), job.alpha(), job.rho);
    if job.dim() == 2 {
        return i_lower_bound_2d(job, &parts, tag);
    }
    let ell = lambda_scale(job.alpha(), job.lambda);
    let inner_rel = job.rel_tol / 10.0;
    let inner_tol = Tolerance::new(0.0, inner_rel).with_max(20_000);
    let inner_depth = |u: f64| depth_for(1.0, job.singular_pad, ell.min(u.max(1e-300)).min(0.5));
    // refinement probes of the inner mesh
    for probe in [ell.min(0.25), 0.05, 0.3] {
        let coarse = parts.inner(probe, inner_depth(probe), inner_tol)?.value;
        let fine = parts.inner(probe, inner_depth(probe) + 8, Tolerance::new(0.0, inner_rel / 100.0).with_max(40_000))?.value;
        if (coarse - fine).abs() > job.rel_tol * fine.abs() + job.abs_tol {
            return Err(SpectralError::InnerGridTooCoarse { coarse, fine });
        }
    }
    let mut failure = None;
    let outer_depth = depth_for(0.5, job.singular_pad, ell);
    let r = torus_1d(
        |u| {
            let inner = if parts.chi > 0.0 {
                match parts.inner(u, inner_depth(u), inner_tol) {
                    Ok(r) => r.value,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            } else {
                0.0
            };
            1.0 / parts.f_value(u, inner)
        },
        outer_depth,
        job.abs_tol,
        job.rel_tol,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(SpectralValue::plain(r.value, r.err + inner_rel * r.value, tag))
}

/// Midpoint sums on an n×n outer grid with the inner integral on the same
/// grid; compared against the 2n grid.
fn i_lower_bound_2d(job: &SpectralJob, parts: &LowerBoundParts, tag: &str) -> Result<SpectralValue, SpectralError> {
    let n = job.grid_n;
    let coarse = i2_grid(parts, n)?;
    let fine = i2_grid(parts, 2 * n)?;
    let diff = (fine - coarse).abs();
    if diff > job.rel_tol * fine.abs() + job.abs_tol {
        return Err(SpectralError::InnerGridTooCoarse { coarse, fine });
    }
    Ok(SpectralValue::plain(fine, diff, tag))
}

fn i2_grid(parts: &LowerBoundParts, n: usize) -> Result<f64, SpectralError> {
    let m = 2 * n;
    let h = 1.0 / m as f64;
    let fold = |i: usize| i.min(m - i);
    // θ and the per-axis parts of Im â on the fundamental quarter of the 1/(2n) grid
    let quarter: Vec<(usize, usize)> = (0..=n).flat_map(|i| (0..=n).map(move |j| (i, j))).collect();
    let th_q: Vec<f64> = quarter.par_iter().map(|&(i, j)| parts.theta.theta(&[i as f64 * h, j as f64 * h])).collect();
    let theta = |i: usize, j: usize| th_q[fold(i) * (n + 1) + fold(j)];
    let a_tab: Vec<f64> = match &parts.ahat {
        AHat::Analytic(sym) if !sym.is_symmetric() => {
            let aq: Vec<[f64; 2]> =
                quarter.par_iter().map(|&(i, j)| sym.a_hat_im_axes([i as f64 * h, j as f64 * h])).collect();
            let sign = |i: usize| if i == 0 || i == n { 0.0 } else if i < n { 1.0 } else { -1.0 };
            (0..m * m)
                .map(|k| {
                    let (i, j) = (k / m, k % m);
                    let q = aq[fold(i) * (n + 1) + fold(j)];
                    sign(i) * q[0] + sign(j) * q[1]
                })
                .collect()
        }
        AHat::Analytic(_) => vec![0.0; m * m],
        AHat::Table(k) => (0..m * m).into_par_iter().map(|k2| k.a_hat_table(&[(k2 / m) as f64 * h, (k2 % m) as f64 * h])).collect(),
    };
    let a = |i: usize, j: usize| a_tab[(i % m) * m + (j % m)];
    let l = parts.lambda;
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|p| {
            let ui = 2 * p + 1;
            let mut row = 0.0;
            for q in 0..n {
                let uj = 2 * q + 1;
                let mut inner = 0.0;
                if parts.chi > 0.0 {
                    for c in 0..n {
                        let si = 2 * c + 1;
                        let di = (ui + m - si) % m;
                        for d in 0..n {
                            let sj = 2 * d + 1;
                            let dj = (uj + m - sj) % m;
                            let s = a(si, sj) + a(di, dj);
                            inner += s * s / (l + theta(si, sj) + theta(di, dj));
                        }
                    }
                    inner /= (n * n) as f64;
                }
                let base = l + theta(ui, uj);
                let av = a(ui, uj);
                row += 1.0 / (base + parts.m * av * av / base + parts.chi * inner);
            }
            row
        })
        .sum();
    let v = total / (n * n) as f64;
    if !v.is_finite() {
        return Err(SpectralError::QuadratureFail { value: v, err: f64::INFINITY });
    }
    Ok(v)
}

/// Branch of the J_α bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JBranch {
    /// α < 1: J stays bounded
    Bounded,
    /// α = 1
    Log,
    /// 1 < α < 2
    Power,
    /// α = 2
    SqrtLog,
    /// α > 2
    Diffusive,
}

impl JBranch {
    pub fn for_alpha(alpha: f64) -> Self {
        if alpha < 1.0 {
            JBranch::Bounded
        } else if alpha == 1.0 {
            JBranch::Log
        } else if alpha < 2.0 {
            JBranch::Power
        } else if alpha == 2.0 {
            JBranch::SqrtLog
        } else {
            JBranch::Diffusive
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JBranch::Bounded => "bounded",
            JBranch::Log => "log",
            JBranch::Power => "power",
            JBranch::SqrtLog => "sqrt_log",
            JBranch::Diffusive => "diffusive",
        }
    }
}

/// Frozen constants of the J_α bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JBoundConstants {
    pub alpha: f64,
    pub branch: JBranch,
    /// inf over (0, 0.1] of θ(s)/F_α(s)
    pub kappa0: f64,
    pub c0: f64,
    pub c1: f64,
}

/// Reference point at which C₀ is fitted.
pub const J_REFERENCE: (f64, f64, f64) = (1e-3, 1e-2, 0.09);
/// Headroom multiplying the fitted C₀.
pub const J_SAFETY: f64 = 2.0;

impl JBoundConstants {
    /// Bound shape without C₀.
    pub fn shape(&self, lambda: f64, u: f64) -> f64 {
        let a = self.alpha;
        match self.branch {
            JBranch::Bounded => 1.0,
            JBranch::Log => (1.0 + self.c1 / (lambda + u / self.c1)).ln(),
            JBranch::Power => (lambda + u.powf(a) / self.c1).powf(1.0 / a - 1.0),
            JBranch::SqrtLog => {
                let x = lambda + self.c1 * (u * u * u.ln()).abs();
                (x * x.ln().abs()).powf(-0.5)
            }
            JBranch::Diffusive => (lambda + u * u / self.c1).powf(-0.5),
        }
    }

    pub fn bound(&self, lambda: f64, u: f64) -> f64 {
        self.c0 * self.shape(lambda, u)
    }
}

fn j_integral(theta: &Symbol, lambda: f64, delta: f64, u: f64, pad: f64, tol: Tolerance) -> Result<QuadResult, SpectralError> {
    let ell = lambda_scale(theta.alpha, lambda).min(u);
    let depth = depth_for(delta, pad, ell);
    let br = graded_breaks(0.0, delta, &[0.0, u], depth);
    Ok(integrate(|s| 1.0 / (lambda + theta.theta(&[s]) + theta.theta(&[s - u])), &br, tol)?)
}

fn j_cache() -> &'static Mutex<HashMap<u64, JBoundConstants>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, JBoundConstants>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Fit C₀, C₁ once per α at `J_REFERENCE`; later calls return the frozen values.
pub fn j_bound_constants(alpha: f64) -> Result<JBoundConstants, SpectralError> {
    if let Some(c) = j_cache().lock().unwrap().get(&alpha.to_bits()) {
        return Ok(*c);
    }
    let theta = Symbol::from_params(&FourierSymbolParams::new(1, alpha, RKind::S0))?;
    let branch = JBranch::for_alpha(alpha);
    let f_shape = |s: f64| match branch {
        JBranch::Bounded | JBranch::Log | JBranch::Power => s.powf(alpha),
        JBranch::SqrtLog => s * s * s.ln().abs(),
        JBranch::Diffusive => s * s,
    };
    let kappa0 = (0..=200)
        .map(|k| 1e-6 * 1e5f64.powf(k as f64 / 200.0))
        .map(|s| theta.theta(&[s]) / f_shape(s))
        .fold(f64::INFINITY, f64::min);
    // θ(s) + θ(s − u) ≥ κ₀ F(u/2) on [0, δ]
    let c1 = match branch {
        JBranch::Bounded => 1.0,
        JBranch::Log => 1.0 / kappa0,
        JBranch::Power => 2f64.powf(alpha) / kappa0,
        JBranch::SqrtLog => kappa0 / 4.0,
        JBranch::Diffusive => 4.0 / kappa0,
    };
    let mut c = JBoundConstants { alpha, branch, kappa0, c0: 1.0, c1 };
    let (l, u, d) = J_REFERENCE;
    let v = j_integral(&theta, l, d, u, 0.01, Tolerance::new(0.0, 1e-9).with_max(20_000))?.value;
    c.c0 = J_SAFETY * v / c.shape(l, u);
    Ok(*j_cache().lock().unwrap().entry(alpha.to_bits()).or_insert(c))
}

/// J_α(λ, δ, u) by quadrature together with the fitted bound.
pub fn j_alpha_bound(job: &SpectralJob) -> Result<SpectralValue, SpectralError> {
    expect(job, Target::JAlphaBound)?;
    let theta = reference_symbol(job)?;
    let c = j_bound_constants(job.alpha())?;
    let r = j_integral(&theta, job.lambda, job.delta, job.u, job.singular_pad, Tolerance::new(job.abs_tol, job.rel_tol).with_max(20_000))?;
    let bound = c.bound(job.lambda, job.u);
    if r.value > bound {
        return Err(SpectralError::BoundViolated { value: r.value, bound });
    }
    Ok(SpectralValue {
        value: r.value,
        err_est: r.err,
        regime_tag: format!("{}:bound={bound:e}", c.branch.as_str()),
        bound: Some(bound),
        companion: None,
    })
}

/// Growth of sup_x u_t(x) = u_t(0).
pub fn green_regime(dim: usize, alpha: f64) -> &'static str {
    let a = alpha;
    if dim == 1 {
        if a < 1.0 {
            "bounded"
        } else if a == 1.0 {
            "log(t)"
        } else if a < 2.0 {
            "t^(1-1/alpha)"
        } else if a == 2.0 {
            "(t/log(t))^(1/2)"
        } else {
            "t^(1/2)"
        }
    } else if a < 2.0 {
        "bounded"
    } else if a == 2.0 {
        "log(log(t))"
    } else {
        "log(t)"
    }
}

/// u_t(x) = ∫ cos(2πk·x) (1 − e^{−θ(k)t})/θ(k) dk; the sine part vanishes because θ is even.
pub fn green_ut(job: &SpectralJob) -> Result<SpectralValue, SpectralError> {
    expect(job, Target::GreenUt)?;
    let sym = symmetric_symbol(job)?;
    debug_assert!((sym.theta(&[0.3]) - sym.theta(&[0.7])).abs() <= 1e-12 * sym.theta(&[0.3]));
    let t = job.t;
    let ell = time_scale(job.alpha(), t);
    let x = job.site;
    let r = if job.dim() == 1 {
        let depth = depth_for(0.5, job.singular_pad, ell);
        let mut br = graded_breaks(0.0, 0.5, &[0.0], depth);
        let ax = x[0].unsigned_abs() as usize;
        if ax > 0 {
            let pieces = (4 * ax).min(4000);
            br.extend((1..pieces).map(|k| 0.5 * k as f64 / pieces as f64));
            br.sort_by(f64::total_cmp);
            br.dedup();
        }
        let r = integrate(
            |k| (2.0 * PI * k * x[0] as f64).cos() * t * e_green(sym.theta(&[k]) * t),
            &br,
            Tolerance::new(0.5 * job.abs_tol, job.rel_tol).with_max(40_000),
        )?;
        QuadResult { value: 2.0 * r.value, err: 2.0 * r.err, evals: r.evals }
    } else {
        let mesh = mesh_for(job, &sym, false, ell);
        let (x0, x1) = (x[0] as f64, x[1] as f64);
        let r = mesh.integrate(|th, k| (2.0 * PI * k[0] * x0).cos() * (2.0 * PI * k[1] * x1).cos() * t * e_green(th * t));
        check_mesh(r, job)?
    };
    if r.value < -(r.err + job.abs_tol) {
        return Err(SpectralError::QuadratureFail { value: r.value, err: r.err });
    }
    Ok(SpectralValue::plain(r.value.max(0.0), r.err, green_regime(job.dim(), job.alpha())))
}

/// Σ_x u_t(x)² = ∫ ((1 − e^{−θt})/θ)² dk by Parseval.
pub fn green_square_sum(job: &SpectralJob) -> Result<SpectralValue, SpectralError> {
    expect(job, Target::GreenUt)?;
    let sym = symmetric_symbol(job)?;
    let t = job.t;
    let ell = time_scale(job.alpha(), t);
    let r = if job.dim() == 1 {
        let depth = depth_for(0.5, job.singular_pad, ell);
        torus_1d(|k| (t * e_green(sym.theta(&[k]) * t)).powi(2), depth, job.abs_tol, job.rel_tol)?
    } else {
        let mesh = mesh_for(job, &sym, false, ell);
        check_mesh(mesh.integrate(|th, _| (t * e_green(th * t)).powi(2)), job)?
    };
    Ok(SpectralValue::plain(r.value, r.err, "sum_x u_t(x)^2"))
}

fn expect(job: &SpectralJob, target: Target) -> Result<(), SpectralError> {
    if job.target != target {
        return Err(SpectralError::BadJob(format!("job target is {}, expected {target}", job.target)));
    }
    job.validate()
}

/// Dispatch on the job target.
pub fn run_job(job: &SpectralJob) -> Result<SpectralValue, SpectralError> {
    match job.target {
        Target::VarianceT => variance_sym(job),
        Target::LaplaceLambda => laplace_sym(job),
        Target::IdAlphaT => id_alpha_t(job),
        Target::ILowerBound => i_lower_bound(job),
        Target::JAlphaBound => j_alpha_bound(job),
        Target::GreenUt => green_ut(job),
    }
}

/// Independent jobs evaluated data-parallel; results keep the input order.
pub fn run_batch(jobs: &[SpectralJob]) -> Vec<Result<SpectralValue, SpectralError>> {
    prepare_meshes(jobs);
    jobs.par_iter().map(run_job).collect()
}

/// Build each shared two-dimensional mesh once, at the deepest level any job
/// in the batch needs, before the parallel section.
fn prepare_meshes(jobs: &[SpectralJob]) {
    let mut deepest: HashMap<MeshKey, (usize, f64, bool)> = HashMap::new();
    for (k, job) in jobs.iter().enumerate() {
        if job.dim() != 2 || job.validate().is_err() {
            continue;
        }
        let (reference, ell) = match job.target {
            Target::VarianceT | Target::GreenUt => (false, time_scale(job.alpha(), job.t)),
            Target::IdAlphaT => (true, time_scale(job.alpha(), job.t)),
            Target::LaplaceLambda => (false, lambda_scale(job.alpha(), job.lambda)),
            _ => continue,
        };
        let e = deepest.entry(mesh_key(job, reference)).or_insert((k, ell, reference));
        if ell < e.1 {
            *e = (k, ell, reference);
        }
    }
    for (_, (k, ell, reference)) in deepest {
        let job = &jobs[k];
        let sym = if reference { reference_symbol(job) } else { symmetric_symbol(job) };
        if let Ok(sym) = sym {
            mesh_for(job, &sym, reference, ell);
        }
    }
}
