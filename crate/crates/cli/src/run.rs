//! Dispatch a parsed configuration to the owning module and write its artifacts.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use lrex::analysis::{fit_exponent, AnalysisError, FitRow, FIT_CSV_HEADER};
use lrex::kernel::{JumpKernel, KernelError};
use lrex::oracle::{build_exact_with, OracleError, OracleRow, ORACLE_CSV_HEADER};
use lrex::sim::{covariance_identity_check, run_occupation, FunctionalSpec, RunOptions, SimError};
use lrex::spectral::{run_batch, SpectralError, SpectralJob, Target, SPECTRAL_CSV_HEADER};
use lrex::verify::{run_criteria, VERIFY_CSV_HEADER};

use crate::config::{ConfigError, ExperimentConfig, FitSource, Mode};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("kernel: {0}")]
    Kernel(#[from] KernelError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("exact oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("quadrature: {0}")]
    Spectral(#[from] SpectralError),
    #[error("analysis: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("fit input: {0}")]
    Input(String),
    #[error("acceptance criteria failed: {0:?}")]
    CriteriaFailed(Vec<usize>),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl RunError {
    /// Process exit code; each module owns one.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io { .. } | RunError::Pool(_) => 3,
            RunError::Kernel(_) => 10,
            RunError::Sim(_) => 11,
            RunError::Oracle(_) => 12,
            RunError::Spectral(_) => 13,
            RunError::Analysis(_) | RunError::Input(_) => 14,
            RunError::CriteriaFailed(_) => 20,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), RunError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(contents.as_bytes()).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| RunError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

/// Resolved configuration prefixed by comment lines carrying the version and a timestamp.
/// The workspace shares one version, so the CLI's is the library's.
pub fn manifest_text(cfg: &ExperimentConfig) -> String {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("# lrex {}\n# written_unix_secs = {now}\n{}", env!("CARGO_PKG_VERSION"), cfg.to_text())
}

fn functional(cfg: &ExperimentConfig) -> FunctionalSpec {
    match cfg.sim.sites[..] {
        [x, y] => FunctionalSpec::degree2(x, y, cfg.rho),
        _ => FunctionalSpec::degree1(cfg.sim.sites[0], cfg.rho),
    }
}

/// Run the experiment, writing the manifest and the mode's CSV into `cfg.out`.
/// Returns the written paths, manifest first.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let manifest = cfg.out.join(MANIFEST_NAME);
    write_atomic(&manifest, &manifest_text(cfg))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build().map_err(|e| RunError::Pool(e.to_string()))?;
    let (name, body, failed) = pool.install(|| dispatch(cfg))?;
    let path = cfg.out.join(name);
    write_atomic(&path, &body)?;
    if !failed.is_empty() {
        return Err(RunError::CriteriaFailed(failed));
    }
    Ok(vec![manifest, path])
}

type Artifact = (&'static str, String, Vec<usize>);

fn dispatch(cfg: &ExperimentConfig) -> Result<Artifact, RunError> {
    let csv = match cfg.mode {
        Mode::Simulate => ("simulate.csv", simulate(cfg)?),
        Mode::Exact => ("exact.csv", exact(cfg)?),
        Mode::Quadrature => ("quadrature.csv", quadrature(cfg)?),
        Mode::Fit => ("fit.csv", fit(cfg)?),
        Mode::SecondClass => ("secondclass.csv", secondclass(cfg)?),
        Mode::VerifyAll => return Ok(verify_all(cfg)),
    };
    Ok((csv.0, csv.1, Vec::new()))
}

fn simulate(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let kernel = JumpKernel::new(cfg.kernel.clone())?;
    let opts = RunOptions { translation_average: cfg.sim.translation_average, coupled: false };
    let stats = run_occupation(&kernel, cfg.side, cfg.rho, &cfg.t_grid, cfg.sim.n_replicas, &functional(cfg), cfg.seed, opts)?;
    log::info!("suppressed jump fraction {:.4}", stats.suppressed_fraction());
    Ok(stats.stats_csv())
}

/// Variance rows on the t grid, then resolvent rows on the λ grid; the quantity column tells them apart.
fn exact(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let kernel = JumpKernel::new(cfg.kernel.clone())?;
    let sys = build_exact_with(&kernel, cfg.side, cfg.rho, &functional(cfg))?;
    let row = |x: f64, value: f64, err_bound: f64| OracleRow {
        side: cfg.side,
        alpha: cfg.kernel.alpha,
        variant: cfg.kernel.variant.as_str().to_string(),
        rho: cfg.rho,
        t_or_lambda: x,
        value,
        err_bound,
    };
    let mut out = format!("quantity,{ORACLE_CSV_HEADER}\n");
    for &t in &cfg.t_grid {
        let v = sys.exact_variance(t)?;
        out.push_str(&format!("variance_t,{}\n", row(t, v.value, v.err_bound).csv()));
    }
    for &l in &cfg.lambda_grid {
        let v = sys.exact_resolvent(l)?;
        // dense LU in double precision
        let err = v.abs() * f64::EPSILON * sys.n_states() as f64;
        out.push_str(&format!("resolvent_lambda,{}\n", row(l, v, err).csv()));
    }
    Ok(out)
}

fn spectral_job(cfg: &ExperimentConfig, target: Target, x: f64) -> SpectralJob {
    let q = &cfg.quadrature;
    let mut job = SpectralJob::new(target, cfg.kernel.clone(), cfg.rho);
    job = if target.uses_time() { job.with_t(x) } else { job.with_lambda(x) };
    job.delta = q.delta;
    job.u = q.u;
    job.site = q.site;
    job.abs_tol = q.abs_tol;
    job.rel_tol = q.rel_tol;
    job.singular_pad = q.singular_pad;
    job.cross_check = q.cross_check && target == Target::LaplaceLambda;
    job.grid_n = q.grid_n;
    job
}

fn quadrature(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let jobs: Vec<SpectralJob> = cfg
        .quadrature
        .targets
        .iter()
        .flat_map(|&target| {
            let grid = if target.uses_time() { &cfg.t_grid } else { &cfg.lambda_grid };
            grid.iter().map(move |&x| spectral_job(cfg, target, x))
        })
        .collect();
    for j in &jobs {
        j.validate()?;
    }
    let mut out = format!("{SPECTRAL_CSV_HEADER}\n");
    for (job, res) in jobs.iter().zip(run_batch(&jobs)) {
        out.push_str(&res?.csv_row(job));
        out.push('\n');
    }
    Ok(out)
}

/// x, y and y_err.
pub type Columns = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Named columns of a CSV file with a header line; a missing error column reads as zeros.
pub fn read_columns(path: &Path, x_col: &str, y_col: &str, err_col: Option<&str>) -> Result<Columns, RunError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| RunError::Input(format!("{}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| RunError::Input(e.to_string()))?.clone();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| RunError::Input(format!("{}: no column '{name}'", path.display())))
    };
    let (ix, iy) = (find(x_col)?, find(y_col)?);
    let ie = err_col.map(find).transpose()?;
    let (mut x, mut y, mut e) = (Vec::new(), Vec::new(), Vec::new());
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| RunError::Input(e.to_string()))?;
        let get = |i: usize| -> Result<f64, RunError> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| RunError::Input(format!("{}: row {} column {} is not a number", path.display(), n + 2, i + 1)))
        };
        x.push(get(ix)?);
        y.push(get(iy)?);
        e.push(ie.map(get).transpose()?.unwrap_or(0.0));
    }
    Ok((x, y, e))
}

fn fit(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let f = &cfg.fit;
    let (x, y, e) = match f.source {
        FitSource::File => {
            let path = f.input.as_ref().ok_or_else(|| RunError::Input("no input file".into()))?;
            read_columns(path, &f.x_col, &f.y_col, f.err_col.as_deref())?
        }
        FitSource::Quadrature => {
            let jobs: Vec<_> = cfg.t_grid.iter().map(|&t| spectral_job(cfg, Target::VarianceT, t)).collect();
            let vals = run_batch(&jobs).into_iter().collect::<Result<Vec<_>, _>>()?;
            (cfg.t_grid.clone(), vals.iter().map(|v| v.value).collect(), vals.iter().map(|v| v.err_est).collect())
        }
    };
    let s = fit_exponent(&x, &y, &e, f.correction)?;
    let row = FitRow::new(&f.quantity, cfg.kernel.alpha, cfg.kernel.dim, cfg.rho, &s, f.target_beta, f.tol);
    Ok(format!("{FIT_CSV_HEADER}\n{}\n", row.csv()))
}

fn secondclass(cfg: &ExperimentConfig) -> Result<String, RunError> {
    let kernel = JumpKernel::new(cfg.kernel.clone())?;
    let sc = &cfg.secondclass;
    let report = covariance_identity_check(&kernel, cfg.side, cfg.rho, &cfg.t_grid, sc.n_plain, sc.n_coupled, cfg.seed)?;
    if report.finite_size_warning {
        log::warn!("the walk spread exceeds L/4 on this grid; finite-size effects are possible");
    }
    Ok(report.csv())
}

fn verify_all(cfg: &ExperimentConfig) -> Artifact {
    let reports = run_criteria(&cfg.criteria, |r| println!("{}", r.line()));
    let mut out = format!("{VERIFY_CSV_HEADER}\n");
    for r in &reports {
        out.push_str(&r.csv());
        out.push('\n');
    }
    let failed = reports.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    ("verify.csv", out, failed)
}
