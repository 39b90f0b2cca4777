//! Experiment configuration: flat key=value lines, `#` comments, `[section]` headers.
//!
//! Every field has a resolved value after parsing, and `to_text` writes all of them
//! back in canonical order, so a manifest parses to the same configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use lrex::analysis::Correction;
use lrex::kernel::{KernelSpec, Variant};
use lrex::oracle::MAX_SIDE;
use lrex::spectral::Target;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid field '{field}': {msg}")]
    Validation { field: String, msg: String },
}

fn invalid(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.to_string(), msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Exact,
    Quadrature,
    Fit,
    SecondClass,
    VerifyAll,
}

impl Mode {
    pub const ALL: [Mode; 6] = [Mode::Simulate, Mode::Exact, Mode::Quadrature, Mode::Fit, Mode::SecondClass, Mode::VerifyAll];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Exact => "exact",
            Mode::Quadrature => "quadrature",
            Mode::Fit => "fit",
            Mode::SecondClass => "secondclass",
            Mode::VerifyAll => "verify_all",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().replace('-', "_");
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| format!("unknown mode '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitSource {
    /// fit the spectral variance of the configured kernel on the t grid
    Quadrature,
    /// fit two columns of a CSV file
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimBlock {
    pub n_replicas: usize,
    pub sites: Vec<usize>,
    pub translation_average: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadBlock {
    pub targets: Vec<Target>,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub singular_pad: f64,
    pub delta: f64,
    pub u: f64,
    pub site: [i64; 2],
    pub cross_check: bool,
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitBlock {
    pub source: FitSource,
    pub input: Option<PathBuf>,
    pub x_col: String,
    pub y_col: String,
    pub err_col: Option<String>,
    pub correction: Correction,
    pub target_beta: f64,
    pub tol: f64,
    pub quantity: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondClassBlock {
    pub n_plain: usize,
    pub n_coupled: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub out: PathBuf,
    /// worker threads; 0 uses every core
    pub threads: usize,
    pub kernel: KernelSpec,
    pub side: usize,
    pub rho: f64,
    pub t_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub sim: SimBlock,
    pub quadrature: QuadBlock,
    pub fit: FitBlock,
    pub secondclass: SecondClassBlock,
    pub criteria: Vec<usize>,
}

/// Accepted keys, as `section.key` (empty section for top level).
const KEYS: &[&str] = &[
    "mode",
    "seed",
    "out",
    "threads",
    "kernel.dim",
    "kernel.alpha",
    "kernel.variant",
    "kernel.b_plus",
    "kernel.b_minus",
    "kernel.trunc_radius",
    "kernel.inner_radius",
    "lattice.L",
    "lattice.rho",
    "grid.t",
    "grid.lambda",
    "sim.n_replicas",
    "sim.sites",
    "sim.translation_average",
    "quadrature.targets",
    "quadrature.abs_tol",
    "quadrature.rel_tol",
    "quadrature.singular_pad",
    "quadrature.delta",
    "quadrature.u",
    "quadrature.x",
    "quadrature.cross_check",
    "quadrature.grid_n",
    "fit.source",
    "fit.input",
    "fit.x_col",
    "fit.y_col",
    "fit.err_col",
    "fit.correction",
    "fit.target_beta",
    "fit.tol",
    "fit.quantity",
    "secondclass.n_plain",
    "secondclass.n_coupled",
    "verify.criteria",
];

/// Top-level shortcuts for the most common fields.
const ALIASES: [(&str, &str); 4] =
    [("alpha", "kernel.alpha"), ("dim", "kernel.dim"), ("L", "lattice.L"), ("rho", "lattice.rho")];

/// Raw values keyed by `section.key`, with the line each came from.
struct Raw(BTreeMap<String, (String, usize)>);

impl Raw {
    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key).map(|(v, _)| v)
    }

    fn num<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| invalid(key, format!("cannot parse '{v}'"))),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        self.take(key).map(|v| parse_list(key, &v)).transpose()
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .map(|x| x.trim().parse().map_err(|_| invalid(key, format!("cannot parse '{}'", x.trim()))))
        .collect()
}

/// A grid: either `a, b, c` or `logspace(lo, hi, n)` in decades.
fn parse_grid(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let v = v.trim();
    if let Some(inner) = v.strip_prefix("logspace(").and_then(|r| r.strip_suffix(')')) {
        let p: Vec<f64> = parse_list(key, inner)?;
        let (lo, hi, n) = match p[..] {
            [lo, hi, n] if n >= 2.0 && n.fract() == 0.0 => (lo, hi, n as usize),
            _ => return Err(invalid(key, "logspace takes (lo, hi, n) with integer n >= 2")),
        };
        return Ok((0..n).map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (n - 1) as f64)).collect());
    }
    parse_list(key, v)
}

fn check_grid(key: &str, g: &[f64]) -> Result<(), ConfigError> {
    if g.is_empty() || g.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(invalid(key, "values must be positive and finite"));
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(key, "values must be increasing"));
    }
    Ok(())
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(key, format!("expected true or false, got '{v}'"))),
    }
}

fn tokenize(text: &str) -> Result<Raw, ConfigError> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Parse { line: line_no, msg: "unterminated section header".into() })?
                .trim();
            if !KEYS.iter().any(|k| k.split_once('.').is_some_and(|(s, _)| s == name)) {
                return Err(invalid(name, format!("unknown section on line {line_no}")));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line: line_no, msg: format!("expected key = value, got '{line}'") })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Parse { line: line_no, msg: "empty key".into() });
        }
        let full = if section.is_empty() {
            ALIASES.iter().find(|(a, _)| *a == k).map_or(k.to_string(), |(_, f)| f.to_string())
        } else {
            format!("{section}.{k}")
        };
        if !KEYS.contains(&full.as_str()) {
            return Err(invalid(&full, format!("unknown key on line {line_no}")));
        }
        if let Some((_, first)) = map.insert(full.clone(), (v.trim().to_string(), line_no)) {
            return Err(invalid(&full, format!("set on line {first} and again on line {line_no}")));
        }
    }
    Ok(Raw(map))
}

/// Variance exponent and log model of the symmetric process on Z^d.
pub fn symmetric_variance_law(dim: usize, alpha: f64) -> (f64, Correction) {
    match dim {
        1 if alpha < 1.0 => (1.0, Correction::None),
        1 if alpha == 1.0 => (1.0, Correction::Log),
        1 if alpha < 2.0 => (2.0 - 1.0 / alpha, Correction::None),
        1 if alpha == 2.0 => (1.5, Correction::InvSqrtLog),
        1 => (1.5, Correction::None),
        _ if alpha < 2.0 => (1.0, Correction::None),
        _ if alpha == 2.0 => (1.0, Correction::LogLog),
        _ => (1.0, Correction::Log),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_for(text, None, &[])
}

/// Parse, taking the mode from `mode` when the text has none; a text whose
/// mode disagrees with `mode` is rejected. `overrides` replace top-level
/// keys (`seed`, `out`, `threads`) whether or not the text sets them.
pub fn parse_config_for(text: &str, mode: Option<Mode>, overrides: &[(&str, String)]) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = tokenize(text)?;
    for (k, v) in overrides {
        if !["seed", "out", "threads"].contains(k) {
            return Err(invalid(k, "only seed, out and threads can be overridden"));
        }
        raw.0.insert(k.to_string(), (v.clone(), 0));
    }
    let mode = match (raw.take("mode"), mode) {
        (Some(v), m) => {
            let parsed: Mode = v.parse().map_err(|e: String| invalid("mode", e))?;
            if m.is_some_and(|m| m != parsed) {
                return Err(invalid("mode", format!("config says '{parsed}' but '{}' was requested", m.unwrap())));
            }
            parsed
        }
        (None, Some(m)) => m,
        (None, None) => return Err(invalid("mode", "missing")),
    };
    let verify = mode == Mode::VerifyAll;

    // verify_all runs fixed-seed criteria, so only the other modes need a seed
    let seed = match raw.take("seed") {
        Some(v) => v.parse().map_err(|_| invalid("seed", format!("expected an unsigned integer, got '{v}'")))?,
        None if verify => 0,
        None => return Err(invalid("seed", "missing; every run needs an explicit seed")),
    };
    let out = PathBuf::from(raw.take("out").unwrap_or_else(|| "out".into()));
    let threads = raw.num("threads", 0usize)?;

    let dim = raw.num("kernel.dim", 1usize)?;
    if !(dim == 1 || dim == 2) {
        return Err(invalid("kernel.dim", "must be 1 or 2"));
    }
    let alpha = match raw.take("kernel.alpha") {
        Some(v) => v.parse().map_err(|_| invalid("kernel.alpha", format!("cannot parse '{v}'")))?,
        None if verify => 1.5,
        None => return Err(invalid("kernel.alpha", "missing")),
    };
    let variant: Variant = match raw.take("kernel.variant") {
        Some(v) => v.parse().map_err(|e| invalid("kernel.variant", format!("{e}")))?,
        None => Variant::Sym,
    };
    let ones = vec![1.0; dim];
    let b_plus = raw.list("kernel.b_plus")?.unwrap_or_else(|| ones.clone());
    let b_minus = raw.list("kernel.b_minus")?.unwrap_or(ones);

    let default_side = match (mode, dim) {
        (Mode::Exact, _) => 8,
        (Mode::SecondClass, 1) => 256,
        (_, 1) => 64,
        _ => 16,
    };
    let side = raw.num("lattice.L", default_side)?;
    if side < 2 {
        return Err(invalid("lattice.L", "must be at least 2"));
    }
    if mode == Mode::Exact && side > MAX_SIDE {
        return Err(invalid("lattice.L", format!("exact mode supports L <= {MAX_SIDE}")));
    }
    let rho = raw.num("lattice.rho", 0.5f64)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid("lattice.rho", "must lie in (0, 1)"));
    }
    let trunc_radius = raw.num("kernel.trunc_radius", side / 2)?;
    let inner_radius = raw.num("kernel.inner_radius", 1usize)?;
    let kernel = KernelSpec::new(dim, alpha, &b_plus, &b_minus, variant, trunc_radius).with_inner_radius(inner_radius);
    kernel.validate().map_err(|e| invalid("kernel", e.to_string()))?;

    let t_default = match mode {
        Mode::Quadrature | Mode::Fit => "logspace(2, 6, 17)",
        _ => "1, 2, 5",
    };
    let t_grid = parse_grid("grid.t", &raw.take("grid.t").unwrap_or_else(|| t_default.into()))?;
    check_grid("grid.t", &t_grid)?;
    let lambda_grid = parse_grid("grid.lambda", &raw.take("grid.lambda").unwrap_or_else(|| "logspace(-4, 0, 5)".into()))?;
    check_grid("grid.lambda", &lambda_grid)?;

    let n_replicas = raw.num("sim.n_replicas", 1000usize)?;
    if mode == Mode::Simulate && n_replicas < 2 {
        return Err(invalid("sim.n_replicas", "need at least two replicas"));
    }
    let sites: Vec<usize> = raw.list("sim.sites")?.unwrap_or_else(|| vec![0]);
    let n_sites = side.pow(dim as u32);
    match sites[..] {
        [x] if x < n_sites => {}
        [x, y] if x < n_sites && y < n_sites && x != y => {}
        _ => return Err(invalid("sim.sites", format!("one site or two distinct sites below {n_sites}"))),
    }
    let translation_average = match raw.take("sim.translation_average") {
        Some(v) => parse_bool("sim.translation_average", &v)?,
        None => true,
    };
    let sim = SimBlock { n_replicas, sites, translation_average };

    let targets = match raw.take("quadrature.targets") {
        Some(v) => v
            .split(',')
            .map(|t| t.trim().parse::<Target>().map_err(|e| invalid("quadrature.targets", e.to_string())))
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![Target::VarianceT],
    };
    let site: Vec<i64> = raw.list("quadrature.x")?.unwrap_or_else(|| vec![0, 0]);
    let site = match site[..] {
        [x] => [x, 0],
        [x, y] => [x, y],
        _ => return Err(invalid("quadrature.x", "one or two integers")),
    };
    let quadrature = QuadBlock {
        targets,
        abs_tol: raw.num("quadrature.abs_tol", 1e-13)?,
        rel_tol: raw.num("quadrature.rel_tol", 1e-6)?,
        singular_pad: raw.num("quadrature.singular_pad", 0.01)?,
        delta: raw.num("quadrature.delta", 0.05)?,
        u: raw.num("quadrature.u", 0.01)?,
        site,
        cross_check: match raw.take("quadrature.cross_check") {
            Some(v) => parse_bool("quadrature.cross_check", &v)?,
            None => false,
        },
        grid_n: raw.num("quadrature.grid_n", 64usize)?,
    };

    let source = match raw.take("fit.source").as_deref().map(str::trim) {
        None | Some("quadrature") => FitSource::Quadrature,
        Some("file") => FitSource::File,
        Some(v) => return Err(invalid("fit.source", format!("expected quadrature or file, got '{v}'"))),
    };
    let input = raw.take("fit.input").map(PathBuf::from);
    if mode == Mode::Fit && source == FitSource::File && input.is_none() {
        return Err(invalid("fit.input", "required when fit.source = file"));
    }
    let (law_beta, law_model) = symmetric_variance_law(dim, alpha);
    let correction = match raw.take("fit.correction") {
        Some(v) => v.parse().map_err(|e: lrex::analysis::AnalysisError| invalid("fit.correction", e.to_string()))?,
        None => law_model,
    };
    let target_beta = match raw.take("fit.target_beta") {
        Some(v) => v.parse().map_err(|_| invalid("fit.target_beta", format!("cannot parse '{v}'")))?,
        None if mode == Mode::Fit && source == FitSource::File => {
            return Err(invalid("fit.target_beta", "required when fit.source = file"))
        }
        None => law_beta,
    };
    let fit = FitBlock {
        source,
        input,
        x_col: raw.take("fit.x_col").unwrap_or_else(|| "t".into()),
        y_col: raw.take("fit.y_col").unwrap_or_else(|| "var_gamma".into()),
        err_col: raw.take("fit.err_col"),
        correction,
        target_beta,
        tol: raw.num("fit.tol", 0.02)?,
        quantity: raw.take("fit.quantity").unwrap_or_else(|| "variance_t".into()),
    };

    let secondclass = SecondClassBlock {
        n_plain: raw.num("secondclass.n_plain", 4000usize)?,
        n_coupled: raw.num("secondclass.n_coupled", 40000usize)?,
    };
    if mode == Mode::SecondClass && (secondclass.n_plain < 2 || secondclass.n_coupled < 2) {
        return Err(invalid("secondclass.n_plain", "both replica counts need at least two replicas"));
    }

    let criteria: Vec<usize> = raw.list("verify.criteria")?.unwrap_or_else(|| (1..=8).collect());
    if criteria.iter().any(|c| !(1..=8).contains(c)) {
        return Err(invalid("verify.criteria", "criteria are numbered 1 to 8"));
    }

    debug_assert!(raw.0.is_empty(), "unconsumed keys {:?}", raw.0.keys());
    Ok(ExperimentConfig {
        mode,
        seed,
        out,
        threads,
        kernel,
        side,
        rho,
        t_grid,
        lambda_grid,
        sim,
        quadrature,
        fit,
        secondclass,
        criteria,
    })
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Canonical text with every field resolved.
    pub fn to_text(&self) -> String {
        let k = &self.kernel;
        let q = &self.quadrature;
        let f = &self.fit;
        let mut s = String::new();
        s.push_str(&format!("mode = {}\nseed = {}\nout = {}\nthreads = {}\n", self.mode, self.seed, self.out.display(), self.threads));
        s.push_str(&format!(
            "\n[kernel]\ndim = {}\nalpha = {}\nvariant = {}\nb_plus = {}\nb_minus = {}\ntrunc_radius = {}\ninner_radius = {}\n",
            k.dim,
            k.alpha,
            k.variant,
            join(&k.b_plus),
            join(&k.b_minus),
            k.trunc_radius,
            k.inner_radius
        ));
        s.push_str(&format!("\n[lattice]\nL = {}\nrho = {}\n", self.side, self.rho));
        s.push_str(&format!("\n[grid]\nt = {}\nlambda = {}\n", join(&self.t_grid), join(&self.lambda_grid)));
        s.push_str(&format!(
            "\n[sim]\nn_replicas = {}\nsites = {}\ntranslation_average = {}\n",
            self.sim.n_replicas,
            join(&self.sim.sites),
            self.sim.translation_average
        ));
        s.push_str(&format!(
            "\n[quadrature]\ntargets = {}\nabs_tol = {}\nrel_tol = {}\nsingular_pad = {}\ndelta = {}\nu = {}\nx = {}, {}\ncross_check = {}\ngrid_n = {}\n",
            join(&q.targets),
            q.abs_tol,
            q.rel_tol,
            q.singular_pad,
            q.delta,
            q.u,
            q.site[0],
            q.site[1],
            q.cross_check,
            q.grid_n
        ));
        s.push_str(&format!(
            "\n[fit]\nsource = {}\n",
            match f.source {
                FitSource::Quadrature => "quadrature",
                FitSource::File => "file",
            }
        ));
        if let Some(p) = &f.input {
            s.push_str(&format!("input = {}\n", p.display()));
        }
        s.push_str(&format!("x_col = {}\ny_col = {}\n", f.x_col, f.y_col));
        if let Some(c) = &f.err_col {
            s.push_str(&format!("err_col = {c}\n"));
        }
        s.push_str(&format!(
            "correction = {}\ntarget_beta = {}\ntol = {}\nquantity = {}\n",
            f.correction.as_str(),
            f.target_beta,
            f.tol,
            f.quantity
        ));
        s.push_str(&format!(
            "\n[secondclass]\nn_plain = {}\nn_coupled = {}\n",
            self.secondclass.n_plain, self.secondclass.n_coupled
        ));
        s.push_str(&format!("\n[verify]\ncriteria = {}\n", join(&self.criteria)));
        s
    }
}
