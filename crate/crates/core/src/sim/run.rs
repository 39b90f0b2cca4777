//! Replica driver: occupation-time integrals, covariances and second-class returns on a time grid.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::functional::{FunctionalKind, FunctionalSpec};
use super::lattice::{Change, Event, LatticeConfig, SimError};
use crate::kernel::{Disp, JumpKernel};

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn of(samples: impl Iterator<Item = f64> + Clone) -> Self {
        let n = samples.clone().count();
        let mean = samples.clone().sum::<f64>() / n as f64;
        let var = if n > 1 { samples.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Self { value: mean, se: (var / n as f64).sqrt(), n }
    }

    /// z-score of the difference of two independent estimates.
    pub fn z_against(&self, other: &Estimate) -> f64 {
        let s = (self.se * self.se + other.se * other.se).sqrt();
        if s == 0.0 {
            if self.value == other.value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - other.value) / s
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// average Γ² and f(η_t)f(η_0) over all translates of f
    pub translation_average: bool,
    /// start from ν_ρ with a second-class particle at site 0 and follow the basic coupling
    pub coupled: bool,
}

/// Per-replica samples on a common time grid, laid out `[replica][grid]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaStats {
    pub t_grid: Vec<f64>,
    pub gamma_samples: Vec<Vec<f64>>,
    /// Γ² (averaged over translates when requested)
    pub gamma_sq_samples: Vec<Vec<f64>>,
    pub cov_samples: Vec<Vec<f64>>,
    pub r0_hits: Vec<Vec<f64>>,
    pub attempts: u64,
    pub suppressed: u64,
    pub finite_size_warning: bool,
}

impl ReplicaStats {
    fn empty(t_grid: &[f64]) -> Self {
        Self {
            t_grid: t_grid.to_vec(),
            gamma_samples: Vec::new(),
            gamma_sq_samples: Vec::new(),
            cov_samples: Vec::new(),
            r0_hits: Vec::new(),
            attempts: 0,
            suppressed: 0,
            finite_size_warning: false,
        }
    }

    pub fn n_replicas(&self) -> usize {
        self.gamma_samples.len().max(self.r0_hits.len())
    }

    /// Concatenate replicas from another run on the same grid.
    pub fn merge(mut self, other: ReplicaStats) -> Self {
        assert_eq!(self.t_grid, other.t_grid, "merging stats on different grids");
        self.gamma_samples.extend(other.gamma_samples);
        self.gamma_sq_samples.extend(other.gamma_sq_samples);
        self.cov_samples.extend(other.cov_samples);
        self.r0_hits.extend(other.r0_hits);
        self.attempts += other.attempts;
        self.suppressed += other.suppressed;
        self.finite_size_warning |= other.finite_size_warning;
        self
    }

    fn column(data: &[Vec<f64>], k: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        data.iter().map(move |r| r[k])
    }

    pub fn gamma_mean(&self, k: usize) -> Estimate {
        Estimate::of(Self::column(&self.gamma_samples, k))
    }

    /// σ_t² = E[Γ_f(t)²], using that Γ_f has mean zero under ν_ρ.
    pub fn variance(&self, k: usize) -> Estimate {
        Estimate::of(Self::column(&self.gamma_sq_samples, k))
    }

    /// E[f(η_t) f(η_0)].
    pub fn covariance(&self, k: usize) -> Estimate {
        Estimate::of(Self::column(&self.cov_samples, k))
    }

    /// P(second-class particle at its start site).
    pub fn return_probability(&self, k: usize) -> Estimate {
        Estimate::of(Self::column(&self.r0_hits, k))
    }

    pub fn suppressed_fraction(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.suppressed as f64 / self.attempts as f64
        }
    }

    /// CSV with columns t,var_gamma,stderr,n.
    pub fn stats_csv(&self) -> String {
        let mut out = String::from("t,var_gamma,stderr,n\n");
        for (k, t) in self.t_grid.iter().enumerate() {
            let v = self.variance(k);
            out.push_str(&format!("{t},{:.10e},{:.4e},{}\n", v.value, v.se, v.n));
        }
        out
    }
}

/// Lazily integrated translates of f: each anchor's integral is brought up to
/// date only when one of its sites changes, so readouts do not depend on the grid.
struct Tracker {
    rho: f64,
    offsets: Vec<Disp>,
    /// anchors tracked: all sites, or the single anchor of f
    all: bool,
    anchor: usize,
    acc: Vec<f64>,
    t_last: Vec<f64>,
    f0: Vec<f64>,
}

impl Tracker {
    fn new(f: &FunctionalSpec, cfg: &LatticeConfig, all: bool) -> Self {
        let (anchor, offsets) = match f.kind {
            FunctionalKind::Degree1(x) => (x, vec![[0, 0]]),
            FunctionalKind::Degree2(x, y) => (x, vec![[0, 0], cfg.offset(x, y)]),
        };
        let n = if all { cfg.n_sites() } else { 1 };
        let mut t = Self { rho: f.rho, offsets, all, anchor, acc: vec![0.0; n], t_last: vec![0.0; n], f0: vec![0.0; n] };
        for i in 0..n {
            t.f0[i] = t.value(cfg, t.site_of(i), None);
        }
        t
    }

    fn site_of(&self, i: usize) -> usize {
        if self.all {
            i
        } else {
            self.anchor
        }
    }

    /// f at anchor `a`; `moved` overrides the occupancy of a (from, to) pair with its pre-move state.
    fn value(&self, cfg: &LatticeConfig, a: usize, moved: Option<(usize, usize)>) -> f64 {
        let mut v = 1.0;
        for o in &self.offsets {
            let z = cfg.shift(a, *o);
            let occ = match moved {
                Some((from, _)) if z == from => true,
                Some((_, to)) if z == to => false,
                _ => cfg.occupied(z),
            };
            v *= if occ { 1.0 - self.rho } else { -self.rho };
        }
        v
    }

    /// Called after an η move from `from` to `to` at time t.
    fn on_move(&mut self, cfg: &LatticeConfig, from: usize, to: usize, t: f64) {
        for site in [from, to] {
            for k in 0..self.offsets.len() {
                let o = self.offsets[k];
                let a = cfg.shift(site, [-o[0], -o[1]]);
                let idx = if self.all {
                    a
                } else if a == self.anchor {
                    0
                } else {
                    continue;
                };
                if self.t_last[idx] == t {
                    continue;
                }
                let v = self.value(cfg, a, Some((from, to)));
                self.acc[idx] += v * (t - self.t_last[idx]);
                self.t_last[idx] = t;
            }
        }
    }

    fn gamma(&self, cfg: &LatticeConfig, i: usize, t: f64) -> f64 {
        self.acc[i] + self.value(cfg, self.site_of(i), None) * (t - self.t_last[i])
    }
}

/// Samples from one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRecord {
    pub gamma: Vec<f64>,
    pub gamma_sq: Vec<f64>,
    pub cov: Vec<f64>,
    pub r0: Vec<f64>,
    pub attempts: u64,
    pub suppressed: u64,
    pub log: Option<Vec<Event>>,
}

/// Drive one trajectory from `cfg` using `next` as the event source (a fresh draw or a log replay).
fn drive<N>(
    mut cfg: LatticeConfig,
    f: Option<&FunctionalSpec>,
    t_grid: &[f64],
    translation_average: bool,
    keep_log: bool,
    mut next: N,
) -> Result<ReplicaRecord, SimError>
where
    N: FnMut(&LatticeConfig) -> Result<Option<(f64, usize, Disp)>, SimError>,
{
    let mut tracker = f.map(|f| Tracker::new(f, &cfg, translation_average));
    let origin = cfg.second_class;
    let g = t_grid.len();
    let mut rec = ReplicaRecord {
        gamma: Vec::with_capacity(g),
        gamma_sq: Vec::with_capacity(g),
        cov: Vec::with_capacity(g),
        r0: Vec::with_capacity(g),
        attempts: 0,
        suppressed: 0,
        log: keep_log.then(Vec::new),
    };
    let mut gi = 0;
    let record = |cfg: &LatticeConfig, tracker: &Option<Tracker>, t: f64, rec: &mut ReplicaRecord| {
        if let Some(tr) = tracker {
            let n = tr.acc.len();
            let (mut sq, mut cv) = (0.0, 0.0);
            for i in 0..n {
                let gm = tr.gamma(cfg, i, t);
                sq += gm * gm;
                cv += tr.value(cfg, tr.site_of(i), None) * tr.f0[i];
            }
            let own = if tr.all { tr.anchor } else { 0 };
            rec.gamma.push(tr.gamma(cfg, own, t));
            rec.gamma_sq.push(sq / n as f64);
            rec.cov.push(cv / n as f64);
        }
        if let Some(o) = origin {
            rec.r0.push(if cfg.second_class == Some(o) { 1.0 } else { 0.0 });
        }
    };
    while gi < g {
        let Some((t_ev, x, y)) = next(&cfg)? else { break };
        while gi < g && t_grid[gi] <= t_ev {
            record(&cfg, &tracker, t_grid[gi], &mut rec);
            gi += 1;
        }
        if gi == g {
            break;
        }
        let (ev, change) = cfg.apply(x, y, t_ev);
        rec.attempts += 1;
        if !ev.accepted {
            rec.suppressed += 1;
        }
        if let (Some(tr), Change::Hop { from, to } | Change::Swap { from, to }) = (tracker.as_mut(), change) {
            tr.on_move(&cfg, from, to, t_ev);
        }
        if let Some(log) = rec.log.as_mut() {
            log.push(ev);
        }
    }
    // a log that ends early freezes the configuration
    while gi < g {
        record(&cfg, &tracker, t_grid[gi], &mut rec);
        gi += 1;
    }
    Ok(rec)
}

fn check_grid(t_grid: &[f64]) -> Result<(), SimError> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(SimError::BadParameter("time grid must be nonempty, finite and nonnegative".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::BadParameter("time grid must be increasing".into()));
    }
    Ok(())
}

/// Initial configuration of replica `seed`: ν_ρ, or ν_ρ with the discrepancy at site 0.
pub fn initial_config(
    side: usize,
    dim: usize,
    rho: f64,
    seed: u64,
    coupled: bool,
) -> Result<(LatticeConfig, ChaCha8Rng), SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = if coupled {
        LatticeConfig::coupled(side, dim, rho, 0, &mut rng)?
    } else {
        LatticeConfig::bernoulli(side, dim, rho, &mut rng)?
    };
    Ok((cfg, rng))
}

/// One replica with a fresh random trajectory.
pub fn run_replica(
    kernel: &JumpKernel,
    side: usize,
    rho: f64,
    t_grid: &[f64],
    f: Option<&FunctionalSpec>,
    seed: u64,
    opts: RunOptions,
    keep_log: bool,
) -> Result<(LatticeConfig, ReplicaRecord), SimError> {
    check_grid(t_grid)?;
    let (cfg, mut rng) = initial_config(side, kernel.dim(), rho, seed, opts.coupled)?;
    let start = cfg.clone();
    // an empty or full lattice is frozen; Γ keeps integrating its constant f
    let rec = drive(cfg, f, t_grid, opts.translation_average, keep_log, |c| match c.propose(kernel, &mut rng) {
        Ok(e) => Ok(Some(e)),
        Err(SimError::EmptyOrFull) => Ok(None),
        Err(e) => Err(e),
    })?;
    Ok((start, rec))
}

/// Re-run a logged trajectory from its initial configuration.
pub fn replay(
    start: &LatticeConfig,
    events: &[Event],
    f: &FunctionalSpec,
    t_grid: &[f64],
    translation_average: bool,
) -> Result<ReplicaRecord, SimError> {
    check_grid(t_grid)?;
    let mut it = events.iter();
    drive(start.clone(), Some(f), t_grid, translation_average, false, |_| Ok(it.next().map(|e| (e.time, e.mover, e.disp))))
}

/// Event log as CSV with columns time,mover_site,displacement,accepted.
pub fn event_log_csv(events: &[Event], dim: usize) -> String {
    let mut out = String::from("time,mover_site,displacement,accepted\n");
    for e in events {
        let d = if dim == 1 { e.disp[0].to_string() } else { format!("{};{}", e.disp[0], e.disp[1]) };
        out.push_str(&format!("{:.17e},{},{},{}\n", e.time, e.mover, d, u8::from(e.accepted)));
    }
    out
}

/// Spread of the walk by time t, t^{max(1/α, 1/2)}, compared with L/4.
pub fn finite_size_exceeded(alpha: f64, side: usize, t_max: f64) -> bool {
    t_max.powf((1.0 / alpha).max(0.5)) > side as f64 / 4.0
}

/// Independent replicas with seeds `seed + i`, run in parallel and merged in replica order.
pub fn run_occupation(
    kernel: &JumpKernel,
    side: usize,
    rho: f64,
    t_grid: &[f64],
    n_replicas: usize,
    f: &FunctionalSpec,
    seed: u64,
    opts: RunOptions,
) -> Result<ReplicaStats, SimError> {
    if n_replicas < 2 {
        return Err(SimError::BadParameter("need at least two replicas".into()));
    }
    check_grid(t_grid)?;
    let n_sites = side.pow(kernel.dim() as u32);
    if f.sites().iter().any(|&x| x >= n_sites) {
        return Err(SimError::BadParameter("functional sites outside the lattice".into()));
    }
    let warn = finite_size_exceeded(kernel.alpha(), side, *t_grid.last().unwrap());
    if warn {
        log::warn!("run reaches t = {} where the walk spread exceeds L/4 = {}", t_grid.last().unwrap(), side / 4);
    }
    let track = (!opts.coupled).then_some(f);
    let records: Vec<ReplicaRecord> = (0..n_replicas as u64)
        .into_par_iter()
        .map(|i| run_replica(kernel, side, rho, t_grid, track, seed.wrapping_add(i), opts, false).map(|r| r.1))
        .collect::<Result<_, _>>()?;
    let mut stats = ReplicaStats::empty(t_grid);
    stats.finite_size_warning = warn;
    for r in records {
        stats.attempts += r.attempts;
        stats.suppressed += r.suppressed;
        if track.is_some() {
            stats.gamma_samples.push(r.gamma);
            stats.gamma_sq_samples.push(r.gamma_sq);
            stats.cov_samples.push(r.cov);
        }
        if opts.coupled {
            stats.r0_hits.push(r.r0);
        }
    }
    Ok(stats)
}

/// One row of the covariance identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingRow {
    pub s: f64,
    pub cov: Estimate,
    pub chi_p0: Estimate,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub rows: Vec<CouplingRow>,
    pub finite_size_warning: bool,
}

impl CouplingReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.z.abs()))
    }

    /// CSV with columns s,cov_hat,cov_se,chi_p0_hat,chi_p0_se,z.
    pub fn csv(&self) -> String {
        let mut out = String::from("s,cov_hat,cov_se,chi_p0_hat,chi_p0_se,z\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.8e},{:.3e},{:.8e},{:.3e},{:.3}\n",
                r.s, r.cov.value, r.cov.se, r.chi_p0.value, r.chi_p0.se, r.z
            ));
        }
        out
    }
}

/// Compare E_ρ[f(η_s)f(η_0)] from plain runs (translation averaged) with
/// χ(ρ)·P(R_s = R_0) from coupled runs, for f = η(0) − ρ.
/// Plain runs use seeds `seed + i`, coupled runs `seed + n_plain + i`.
pub fn covariance_identity_check(
    kernel: &JumpKernel,
    side: usize,
    rho: f64,
    s_grid: &[f64],
    n_plain: usize,
    n_coupled: usize,
    seed: u64,
) -> Result<CouplingReport, SimError> {
    let f = FunctionalSpec::degree1(0, rho);
    let plain = run_occupation(
        kernel,
        side,
        rho,
        s_grid,
        n_plain,
        &f,
        seed,
        RunOptions { translation_average: true, coupled: false },
    )?;
    let coupled = run_occupation(
        kernel,
        side,
        rho,
        s_grid,
        n_coupled,
        &f,
        seed.wrapping_add(n_plain as u64),
        RunOptions { translation_average: false, coupled: true },
    )?;
    let chi = rho * (1.0 - rho);
    let rows = s_grid
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let cov = plain.covariance(k);
            let p = coupled.return_probability(k);
            let chi_p0 = Estimate { value: chi * p.value, se: chi * p.se, n: p.n };
            CouplingRow { s, cov, chi_p0, z: cov.z_against(&chi_p0) }
        })
        .collect();
    Ok(CouplingReport { rows, finite_size_warning: plain.finite_size_warning })
}
