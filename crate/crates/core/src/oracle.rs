//! Exact occupation-time statistics on tiny rings from the full Markov generator.
//!
//! States are occupancy bitmasks of a ring of L ≤ 12 sites, weighted by the
//! Bernoulli product measure. The generator conserves particle number, so
//! dense work (linear solves, eigen decompositions) is done per sector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::kernel::JumpKernel;
use crate::quad::{integrate, Tolerance};
use crate::sim::functional::FunctionalSpec;

pub const MAX_SIDE: usize = 12;

/// Taylor order per panel; with h‖Q‖ ≤ 1 the remainder is below 1e-25.
const TAYLOR_ORDER: usize = 24;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("L = {0} gives too many states (L must be at most 12)")]
    TooLarge(usize),
    #[error("exact system needs a one-dimensional kernel")]
    NotOneDim,
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("quadrature failed: {0}")]
    QuadratureFail(String),
    #[error("linear solve failed in sector with {0} particles")]
    SolveFail(usize),
}

/// Value with an absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactValue {
    pub value: f64,
    pub err_bound: f64,
}

/// Generator, observable and stationary weights of a ring of side L.
#[derive(Debug, Clone)]
pub struct ExactSystem {
    pub side: usize,
    pub rho: f64,
    pub alpha: f64,
    pub variant: String,
    /// rate of a jump by offset dz (mod L), aggregated over the kernel table
    pub offset_rates: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    pub f: Vec<f64>,
    pub pi: Vec<f64>,
    sectors: Vec<Vec<u32>>,
}

/// Generator of the exclusion process with kernel `kernel` folded onto the ring, and f = η(0) − ρ.
pub fn build_exact(kernel: &JumpKernel, side: usize, rho: f64) -> Result<ExactSystem, OracleError> {
    build_exact_with(kernel, side, rho, &FunctionalSpec::degree1(0, rho))
}

pub fn build_exact_with(
    kernel: &JumpKernel,
    side: usize,
    rho: f64,
    f: &FunctionalSpec,
) -> Result<ExactSystem, OracleError> {
    if side > MAX_SIDE {
        return Err(OracleError::TooLarge(side));
    }
    if side < 2 {
        return Err(OracleError::BadParameter("L must be at least 2".into()));
    }
    if kernel.dim() != 1 {
        return Err(OracleError::NotOneDim);
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(OracleError::BadParameter("rho must lie in (0,1)".into()));
    }
    if f.sites().iter().any(|&x| x >= side) {
        return Err(OracleError::BadParameter("functional sites outside the ring".into()));
    }
    let l = side as i64;
    let mut offset_rates = vec![0.0; side];
    for (y, p) in kernel.entries() {
        let dz = y[0].rem_euclid(l) as usize;
        if dz != 0 {
            offset_rates[dz] += p;
        }
    }
    let n_states = 1usize << side;
    let mut row_ptr = Vec::with_capacity(n_states + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = vec![0.0; n_states];
    let mut fv = Vec::with_capacity(n_states);
    let mut pi = Vec::with_capacity(n_states);
    let mut sectors = vec![Vec::new(); side + 1];
    row_ptr.push(0);
    let mut row: Vec<(u32, f64)> = Vec::new();
    for s in 0..n_states {
        row.clear();
        for x in 0..side {
            if s >> x & 1 == 0 {
                continue;
            }
            for (dz, &r) in offset_rates.iter().enumerate().skip(1) {
                if r == 0.0 {
                    continue;
                }
                let z = (x + dz) % side;
                if s >> z & 1 == 0 {
                    row.push(((s ^ (1 << x) ^ (1 << z)) as u32, r));
                }
            }
        }
        row.sort_by_key(|e| e.0);
        let mut exit = 0.0;
        for &(c, r) in &row {
            cols.push(c);
            vals.push(r);
            exit += r;
        }
        diag[s] = -exit;
        row_ptr.push(cols.len());
        let n = (s as u32).count_ones() as usize;
        sectors[n].push(s as u32);
        pi.push(rho.powi(n as i32) * (1.0 - rho).powi((side - n) as i32));
        fv.push(f.eval(|x| s >> x & 1 == 1));
    }
    Ok(ExactSystem {
        side,
        rho,
        alpha: kernel.alpha(),
        variant: kernel.variant().to_string(),
        offset_rates,
        row_ptr,
        cols,
        vals,
        diag,
        f: fv,
        pi,
        sectors,
    })
}

impl ExactSystem {
    pub fn n_states(&self) -> usize {
        self.diag.len()
    }

    /// Q(from, to).
    pub fn q(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return self.diag[from];
        }
        let (a, b) = (self.row_ptr[from], self.row_ptr[from + 1]);
        match self.cols[a..b].binary_search(&(to as u32)) {
            Ok(k) => self.vals[a + k],
            Err(_) => 0.0,
        }
    }

    /// Off-diagonal entries of one row.
    pub fn row(&self, from: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[from], self.row_ptr[from + 1]);
        self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&c, &v)| (c as usize, v))
    }

    /// out = Q v.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (s, o) in out.iter_mut().enumerate() {
            let mut acc = self.diag[s] * v[s];
            for k in self.row_ptr[s]..self.row_ptr[s + 1] {
                acc += self.vals[k] * v[self.cols[k] as usize];
            }
            *o = acc;
        }
    }

    /// ‖Q‖_∞.
    pub fn norm_inf(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |m, d| m.max(2.0 * d.abs()))
    }

    /// ⟨u, v⟩_π.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.pi).map(|((a, b), p)| a * b * p).sum()
    }

    /// Var_π[f].
    pub fn f_variance(&self) -> f64 {
        let m = self.inner(&self.f, &vec![1.0; self.n_states()]);
        self.inner(&self.f, &self.f) - m * m
    }

    /// max_s |Σ_t Q(s,t)|.
    pub fn row_sum_residual(&self) -> f64 {
        (0..self.n_states())
            .map(|s| (self.diag[s] + self.row(s).map(|e| e.1).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_off_diagonal(&self) -> f64 {
        self.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// max_t |(πQ)(t)|.
    pub fn stationarity_residual(&self) -> f64 {
        let mut r: Vec<f64> = (0..self.n_states()).map(|s| self.pi[s] * self.diag[s]).collect();
        for s in 0..self.n_states() {
            for (t, v) in self.row(s) {
                r[t] += self.pi[s] * v;
            }
        }
        r.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// max |π(s)Q(s,t) − π(t)Q(t,s)|: zero iff D_π Q is symmetric.
    pub fn reversibility_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for s in 0..self.n_states() {
            for (t, v) in self.row(s) {
                worst = worst.max((self.pi[s] * v - self.pi[t] * self.q(t, s)).abs());
            }
        }
        worst
    }

    /// lim_{s→∞} ⟨f, T_s f⟩_π: the part of f carried by the conserved particle number.
    pub fn covariance_limit(&self) -> f64 {
        let mut acc = 0.0;
        for sector in &self.sectors {
            let w: f64 = sector.iter().map(|&s| self.pi[s as usize]).sum();
            if w == 0.0 {
                continue;
            }
            let m: f64 = sector.iter().map(|&s| self.pi[s as usize] * self.f[s as usize]).sum::<f64>() / w;
            acc += w * m * m;
        }
        let mean = self.inner(&self.f, &vec![1.0; self.n_states()]);
        acc - mean * mean
    }

    /// Piecewise-polynomial representation of s ↦ ⟨f, T_s f⟩_π on [0, t_max].
    pub fn variance_curve(&self, t_max: f64) -> VarianceCurve {
        let n = self.n_states();
        let mean = self.inner(&self.f, &vec![1.0; n]);
        let fc: Vec<f64> = self.f.iter().map(|x| x - mean).collect();
        let qn = self.norm_inf();
        let h_max = if qn > 0.0 { 1.0 / qn } else { t_max.max(1.0) };
        let f_sup = fc.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let f_l1: f64 = fc.iter().zip(&self.pi).map(|(x, p)| x.abs() * p).sum();
        // Taylor remainder of e^{hQ} in ∞-norm per panel
        let mut fact = 1.0;
        for k in 1..=TAYLOR_ORDER + 1 {
            fact *= k as f64;
        }
        let rem = (h_max * qn).powi(TAYLOR_ORDER as i32 + 1) / fact * (h_max * qn).exp();

        let mut v = fc.clone();
        let mut w = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut panels = Vec::new();
        let (mut a, mut a_cum, mut b_cum) = (0.0, 0.0, 0.0);
        let mut k_panel = 0usize;
        while a < t_max {
            let h = h_max.min(t_max - a);
            let mut coef = Vec::with_capacity(TAYLOR_ORDER + 1);
            next.copy_from_slice(&v);
            let mut term = v.clone();
            coef.push(self.inner(&fc, &term));
            let mut hk = 1.0;
            for k in 1..=TAYLOR_ORDER {
                self.apply(&term, &mut w);
                let inv = 1.0 / k as f64;
                for (t, x) in term.iter_mut().zip(&w) {
                    *t = x * inv;
                }
                coef.push(self.inner(&fc, &term));
                hk *= h;
                for (nx, t) in next.iter_mut().zip(&term) {
                    *nx += hk * t;
                }
            }
            let p = Panel { a, h, coef, a_cum, b_cum };
            let (da, db) = p.partial(h);
            a_cum += da;
            b_cum += db;
            panels.push(p);
            std::mem::swap(&mut v, &mut next);
            a += h;
            k_panel += 1;
        }
        // error in C after k panels is at most k · rem · ‖f‖∞ ‖f‖_{1,π}
        let c_err = k_panel as f64 * rem * f_sup * f_l1;
        VarianceCurve { panels, t_max, c_limit: self.covariance_limit(), c_err }
    }

    /// σ_t² = 2 ∫_0^t (t − s) ⟨f, T_s f⟩_π ds.
    pub fn exact_variance(&self, t: f64) -> Result<ExactValue, OracleError> {
        if !(t > 0.0) {
            return Err(OracleError::BadParameter("t must be positive".into()));
        }
        Ok(self.variance_curve(t).variance(t))
    }

    /// σ_t² through the spectral decomposition of each sector (reversible kernels only).
    pub fn exact_variance_eigen(&self, t: f64) -> Result<f64, OracleError> {
        let modes = self.symmetric_modes()?;
        Ok(2.0 * modes.iter().map(|&(mu, w)| w * kernel_g(mu, t)).sum::<f64>())
    }

    /// (eigenvalue, π-weight of f on its eigenvector) across all sectors.
    pub fn symmetric_modes(&self) -> Result<Vec<(f64, f64)>, OracleError> {
        let mut out = Vec::new();
        let mean = self.inner(&self.f, &vec![1.0; self.n_states()]);
        for sector in &self.sectors {
            let q = self.sector_matrix(sector);
            if (&q - q.transpose()).amax() > 1e-12 {
                return Err(OracleError::BadParameter("eigen route needs a reversible kernel".into()));
            }
            let w = self.pi[sector[0] as usize];
            let fv = DVector::from_iterator(sector.len(), sector.iter().map(|&s| self.f[s as usize] - mean));
            let eig = SymmetricEigen::new(q);
            for k in 0..sector.len() {
                let c = eig.eigenvectors.column(k).dot(&fv);
                out.push((eig.eigenvalues[k].min(0.0), w * c * c));
            }
        }
        Ok(out)
    }

    fn sector_matrix(&self, sector: &[u32]) -> DMatrix<f64> {
        let m = sector.len();
        let mut pos = vec![u32::MAX; self.n_states()];
        for (i, &s) in sector.iter().enumerate() {
            pos[s as usize] = i as u32;
        }
        let mut q = DMatrix::zeros(m, m);
        for (i, &s) in sector.iter().enumerate() {
            q[(i, i)] = self.diag[s as usize];
            for (t, v) in self.row(s as usize) {
                q[(i, pos[t] as usize)] += v;
            }
        }
        q
    }

    /// L_f(λ) = 2 λ^{-2} ⟨f, (λ − Q)^{-1} f⟩_π by a dense solve per sector.
    pub fn exact_resolvent(&self, lambda: f64) -> Result<f64, OracleError> {
        if !(lambda > 0.0) {
            return Err(OracleError::BadParameter("lambda must be positive".into()));
        }
        let mean = self.inner(&self.f, &vec![1.0; self.n_states()]);
        let mut acc = 0.0;
        for (n, sector) in self.sectors.iter().enumerate() {
            let q = self.sector_matrix(sector);
            let a = DMatrix::identity(sector.len(), sector.len()) * lambda - q;
            let fv = DVector::from_iterator(sector.len(), sector.iter().map(|&s| self.f[s as usize] - mean));
            let u = a.lu().solve(&fv).ok_or(OracleError::SolveFail(n))?;
            if !u.iter().all(|x| x.is_finite()) {
                return Err(OracleError::SolveFail(n));
            }
            acc += self.pi[sector[0] as usize] * fv.dot(&u);
        }
        Ok(2.0 * acc / (lambda * lambda))
    }

    /// ∫_0^∞ e^{-λt} σ_t² dt from the time-domain variance.
    pub fn laplace_of_variance(&self, lambda: f64) -> Result<ExactValue, OracleError> {
        if !(lambda > 0.0) {
            return Err(OracleError::BadParameter("lambda must be positive".into()));
        }
        let t_end = 45.0 / lambda;
        let curve = self.variance_curve(t_end);
        curve.laplace(lambda).map_err(OracleError::QuadratureFail)
    }
}

/// ∫_0^t (t − s) e^{μs} ds.
fn kernel_g(mu: f64, t: f64) -> f64 {
    let x = mu * t;
    if x.abs() < 1e-3 {
        t * t * (0.5 + x / 6.0 + x * x / 24.0 + x * x * x / 120.0)
    } else {
        (x.exp_m1() - x) / (mu * mu)
    }
}

#[derive(Debug, Clone)]
struct Panel {
    a: f64,
    h: f64,
    /// C(a + τ) = Σ coef_k τ^k
    coef: Vec<f64>,
    /// ∫_0^a C and ∫_0^a s C
    a_cum: f64,
    b_cum: f64,
}

impl Panel {
    /// (∫_a^{a+τ} C, ∫_a^{a+τ} s C).
    fn partial(&self, tau: f64) -> (f64, f64) {
        let (mut i0, mut i1) = (0.0, 0.0);
        let mut tp = tau;
        for (k, c) in self.coef.iter().enumerate() {
            let kf = k as f64;
            i0 += c * tp / (kf + 1.0);
            i1 += c * tp * tau / (kf + 2.0);
            tp *= tau;
        }
        (i0, self.a * i0 + i1)
    }

    fn c(&self, tau: f64) -> f64 {
        self.coef.iter().rev().fold(0.0, |acc, c| acc * tau + c)
    }
}

/// Exact covariance and variance curves on [0, t_max].
#[derive(Debug, Clone)]
pub struct VarianceCurve {
    panels: Vec<Panel>,
    pub t_max: f64,
    /// lim_{s→∞} C(s)
    pub c_limit: f64,
    /// uniform bound on the error in C
    pub c_err: f64,
}

impl VarianceCurve {
    fn locate(&self, t: f64) -> &Panel {
        let k = self.panels.partition_point(|p| p.a + p.h < t);
        &self.panels[k.min(self.panels.len() - 1)]
    }

    /// ⟨f, T_s f⟩_π.
    pub fn covariance(&self, s: f64) -> f64 {
        assert!((0.0..=self.t_max * (1.0 + 1e-12)).contains(&s));
        let p = self.locate(s);
        p.c(s - p.a)
    }

    /// (∫_0^t C, ∫_0^t s C).
    fn moments(&self, t: f64) -> (f64, f64) {
        let p = self.locate(t);
        let (i0, i1) = p.partial(t - p.a);
        (p.a_cum + i0, p.b_cum + i1)
    }

    pub fn variance(&self, t: f64) -> ExactValue {
        assert!(t <= self.t_max * (1.0 + 1e-12), "t beyond the computed curve");
        let (m0, m1) = self.moments(t);
        ExactValue { value: 2.0 * (t * m0 - m1), err_bound: self.c_err * t * t }
    }

    /// d σ_t²/dt = 2 ∫_0^t C.
    pub fn variance_slope(&self, t: f64) -> f64 {
        2.0 * self.moments(t).0
    }

    /// ∫_0^∞ e^{-λt} σ_t² dt, with C frozen at its limit beyond t_max.
    pub fn laplace(&self, lambda: f64) -> Result<ExactValue, String> {
        let te = self.t_max;
        let mut br: Vec<f64> = (0..=60).map(|k| te * k as f64 / 60.0).collect();
        br.extend([0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|x| x / lambda).filter(|x| *x < te));
        br.sort_by(f64::total_cmp);
        br.dedup();
        let r = integrate(|t| (-lambda * t).exp() * self.variance(t).value, &br, Tolerance::new(0.0, 1e-13).with_max(20_000))
            .map_err(|e| e.to_string())?;
        let (s_end, ds_end) = (self.variance(te).value, self.variance_slope(te));
        let tail = (-lambda * te).exp()
            * (s_end / lambda + ds_end / (lambda * lambda) + 2.0 * self.c_limit / lambda.powi(3));
        let err = r.err + self.c_err * 2.0 / lambda.powi(3);
        Ok(ExactValue { value: r.value + tail, err_bound: err })
    }
}

/// One line of the oracle CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub side: usize,
    pub alpha: f64,
    pub variant: String,
    pub rho: f64,
    pub t_or_lambda: f64,
    pub value: f64,
    pub err_bound: f64,
}

pub const ORACLE_CSV_HEADER: &str = "L,alpha,variant,rho,t_or_lambda,value,err_bound";

impl OracleRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.17e},{:.3e}",
            self.side, self.alpha, self.variant, self.rho, self.t_or_lambda, self.value, self.err_bound
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{JumpKernel, KernelSpec, Variant};
    use approx::assert_relative_eq;

    fn sym(l: usize) -> JumpKernel {
        JumpKernel::new(KernelSpec::symmetric(1, 1.5, l / 2)).unwrap()
    }

    fn la(l: usize) -> JumpKernel {
        JumpKernel::new(KernelSpec::new(1, 1.5, &[2.0], &[1.0], Variant::La, l / 2)).unwrap()
    }

    #[test]
    fn two_site_chain() {
        let k = sym(2);
        let sys = build_exact(&k, 2, 0.5).unwrap();
        // states 01 and 10 exchange at the full rate of the folded offset
        assert_relative_eq!(sys.q(0b01, 0b10), 1.0, max_relative = 1e-14);
        assert_eq!(sys.q(0b00, 0b01), 0.0);
        assert_eq!(sys.q(0b11, 0b11), 0.0);
    }

    #[test]
    fn generator_identities() {
        let sys = build_exact(&sym(8), 8, 0.5).unwrap();
        assert!(sys.row_sum_residual() < 1e-13);
        assert!(sys.stationarity_residual() < 1e-10);
        assert!(sys.reversibility_residual() < 1e-10);
        assert!(sys.min_off_diagonal() > 0.0);
        let asym = build_exact(&la(8), 8, 0.3).unwrap();
        assert!(asym.stationarity_residual() < 1e-10);
        assert!(asym.reversibility_residual() > 1e-3);
    }

    #[test]
    fn taylor_and_eigen_routes_agree() {
        let sys = build_exact(&sym(8), 8, 0.5).unwrap();
        for t in [0.3, 1.0, 5.0] {
            let a = sys.exact_variance(t).unwrap();
            let b = sys.exact_variance_eigen(t).unwrap();
            assert_relative_eq!(a.value, b, max_relative = 1e-11);
        }
    }

    #[test]
    fn small_time_limit() {
        let sys = build_exact(&la(6), 6, 0.4).unwrap();
        let t = 1e-4;
        assert_relative_eq!(sys.exact_variance(t).unwrap().value / (t * t), sys.f_variance(), max_relative = 1e-3);
    }

    #[test]
    fn resolvent_matches_laplace() {
        let sys = build_exact(&la(6), 6, 0.5).unwrap();
        for lambda in [0.5, 2.0] {
            let r = sys.exact_resolvent(lambda).unwrap();
            let l = sys.laplace_of_variance(lambda).unwrap();
            assert_relative_eq!(r, l.value, max_relative = 1e-9);
        }
    }

    #[test]
    fn symmetric_dominates_asymmetric() {
        let s = build_exact(&la(8).symmetrized().unwrap(), 8, 0.5).unwrap();
        let a = build_exact(&la(8), 8, 0.5).unwrap();
        for lambda in [0.1, 0.5, 2.0] {
            assert!(a.exact_resolvent(lambda).unwrap() <= s.exact_resolvent(lambda).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn too_large() {
        assert!(matches!(build_exact(&sym(13), 13, 0.5), Err(OracleError::TooLarge(13))));
    }
}
