//! Python module `lrex`: thin wrappers over the core crate.

use pyo3::prelude::*;

#[pymodule(name = "lrex")]
pub mod lrex_module {
    use pyo3::exceptions::PyValueError;
    use pyo3::prelude::*;

    use ::lrex::analysis::{self, Correction};
    use ::lrex::kernel::{JumpKernel, KernelSpec, Symbol, Variant};
    use ::lrex::oracle::build_exact;
    use ::lrex::sim::{run_occupation, FunctionalSpec, RunOptions};
    use ::lrex::spectral::{self, SpectralJob, Target};
    use ::lrex::verify::CRITERIA;

    fn err(e: impl std::fmt::Display) -> PyErr {
        PyValueError::new_err(e.to_string())
    }

    fn kernel_spec(alpha: f64, side: usize, variant: &str, b_plus: f64, b_minus: f64) -> PyResult<KernelSpec> {
        let v: Variant = variant.parse().map_err(err)?;
        let spec = KernelSpec::new(1, alpha, &[b_plus], &[b_minus], v, side / 2);
        spec.validate().map_err(err)?;
        Ok(spec)
    }

    #[pymodule_init]
    fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
        m.add("__version__", env!("CARGO_PKG_VERSION"))
    }

    /// Fourier symbol θ(u) of the symmetric kernel; `u` has one entry per dimension.
    #[pyfunction]
    fn theta(alpha: f64, u: Vec<f64>) -> PyResult<f64> {
        if !(u.len() == 1 || u.len() == 2) {
            return Err(err("u must have one or two components"));
        }
        Ok(Symbol::symmetric(u.len(), alpha).theta(&u))
    }

    /// (σ_t², error estimate) on Z^d by spectral quadrature, symmetric kernel, ρ = 1/2.
    #[pyfunction]
    #[pyo3(signature = (alpha, t, dim = 1))]
    fn variance_sym(py: Python<'_>, alpha: f64, t: f64, dim: usize) -> PyResult<(f64, f64)> {
        let job = SpectralJob::symmetric(Target::VarianceT, dim, alpha).with_t(t);
        let v = py.detach(|| spectral::variance_sym(&job)).map_err(err)?;
        Ok((v.value, v.err_est))
    }

    /// (L(λ), error estimate), the Laplace transform of σ_t² on Z^d.
    #[pyfunction]
    #[pyo3(signature = (alpha, lam, dim = 1))]
    fn laplace_sym(py: Python<'_>, alpha: f64, lam: f64, dim: usize) -> PyResult<(f64, f64)> {
        let job = SpectralJob::symmetric(Target::LaplaceLambda, dim, alpha).with_lambda(lam);
        let v = py.detach(|| spectral::laplace_sym(&job)).map_err(err)?;
        Ok((v.value, v.err_est))
    }

    /// (σ_t², error bound) for f = η(0) − ρ on a ring of `side` sites, exactly.
    #[pyfunction]
    #[pyo3(signature = (alpha, side, t, rho = 0.5, variant = "SYM", b_plus = 1.0, b_minus = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn exact_variance(
        py: Python<'_>,
        alpha: f64,
        side: usize,
        t: f64,
        rho: f64,
        variant: &str,
        b_plus: f64,
        b_minus: f64,
    ) -> PyResult<(f64, f64)> {
        let kernel = JumpKernel::new(kernel_spec(alpha, side, variant, b_plus, b_minus)?).map_err(err)?;
        let v = py.detach(|| build_exact(&kernel, side, rho).and_then(|s| s.exact_variance(t))).map_err(err)?;
        Ok((v.value, v.err_bound))
    }

    /// Monte Carlo σ_t² with standard errors at each time, symmetric kernel on a ring.
    #[pyfunction]
    #[pyo3(signature = (alpha, side, times, n_replicas, seed, rho = 0.5))]
    fn simulate_variance(
        py: Python<'_>,
        alpha: f64,
        side: usize,
        times: Vec<f64>,
        n_replicas: usize,
        seed: u64,
        rho: f64,
    ) -> PyResult<Vec<(f64, f64)>> {
        let kernel = JumpKernel::new(kernel_spec(alpha, side, "SYM", 1.0, 1.0)?).map_err(err)?;
        let f = FunctionalSpec::degree1(0, rho);
        let opts = RunOptions { translation_average: true, coupled: false };
        let stats = py.detach(|| run_occupation(&kernel, side, rho, &times, n_replicas, &f, seed, opts)).map_err(err)?;
        Ok((0..times.len()).map(|k| stats.variance(k)).map(|e| (e.value, e.se)).collect())
    }

    /// Best-window log-log fit; returns (beta_hat, beta_se, x_lo, x_hi).
    #[pyfunction]
    #[pyo3(signature = (x, y, correction = "none"))]
    fn fit_exponent(x: Vec<f64>, y: Vec<f64>, correction: &str) -> PyResult<(f64, f64, f64, f64)> {
        let model: Correction = correction.parse().map_err(err)?;
        let zeros = vec![0.0; x.len()];
        let f = analysis::fit_exponent(&x, &y, &zeros, model).map_err(err)?;
        Ok((f.beta_hat, f.beta_se, f.window_lo(), f.window_hi()))
    }

    /// Hurst index of the rescaled occupation time, or None outside the Gaussian regimes.
    #[pyfunction]
    #[pyo3(signature = (alpha, dim = 1))]
    fn hurst_target(alpha: f64, dim: usize) -> Option<f64> {
        analysis::hurst_target(alpha, dim).h()
    }

    /// Run acceptance criterion `id` (1 to 8); returns (pass, detail).
    #[pyfunction]
    fn run_criterion(py: Python<'_>, id: usize) -> PyResult<(bool, String)> {
        let c = CRITERIA.iter().find(|c| c.id == id).ok_or_else(|| err(format!("no criterion {id}")))?;
        let r = py.detach(|| c.run());
        Ok((r.pass, r.detail))
    }
}

/// Register `lrex` in `sys.modules`, for embedding without building a wheel.
pub fn register(py: Python<'_>) -> PyResult<()> {
    let m = pyo3::wrap_pymodule!(lrex_module)(py);
    py.import("sys")?.getattr("modules")?.set_item("lrex", m)
}
