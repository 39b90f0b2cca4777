//! Acceptance criteria as a library routine, shared by the test suite and the CLI.

use std::f64::consts::PI;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use crate::analysis::*;
use crate::kernel::{FKind, JumpKernel, KernelSpec, Symbol, Variant};
use crate::oracle::build_exact;
use crate::sim::*;
use crate::spectral::*;

struct Outcome {
    pass: bool,
    detail: String,
}

type Res<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

fn zeta(s: f64) -> f64 {
    let n = 4000.0f64;
    let head: f64 = (1..4000).map(|k| (k as f64).powf(-s)).sum();
    head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

fn sym1(alpha: f64, r: usize) -> Res<JumpKernel> {
    Ok(JumpKernel::new(KernelSpec::symmetric(1, alpha, r))?)
}

fn la1(alpha: f64, r: usize) -> Res<JumpKernel> {
    Ok(JumpKernel::new(KernelSpec::new(1, alpha, &[2.0], &[1.0], Variant::La, r))?)
}

/// Small-u constant of θ for s(z) = |z|^{-1-α}/(2ζ(1+α)), from closed forms.
fn j_reference(alpha: f64) -> f64 {
    let amp = 0.5 / zeta(1.0 + alpha);
    if alpha < 2.0 {
        // 2 ∫_0^∞ sin²(πq) q^{-1-α} dq
        let line = 2.0 * PI.powf(alpha) * 2f64.powf(alpha - 1.0) * (-gamma(-alpha) * (PI * alpha / 2.0).cos());
        2.0 * amp * line
    } else {
        2.0 * PI * PI * 2.0 * amp * zeta(alpha - 1.0)
    }
}

fn criterion_1() -> Res<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 1.5, 3.0] {
        let s = Symbol::symmetric(1, alpha);
        let j = j_reference(alpha);
        let errs: Vec<f64> = (6..=14)
            .map(|k| {
                let u = 2f64.powi(-k);
                (s.theta(&[u]) / FKind::for_alpha(alpha).eval(alpha, u) / j - 1.0).abs()
            })
            .collect();
        let (first, last) = (errs[0], errs[errs.len() - 1]);
        // the deviation should shrink along the sequence
        let shrinking = last < first;
        pass &= last < 0.02 && shrinking;
        parts.push(format!("a={alpha}: rel err {last:.2e} at k=14"));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn variance_slope(dim: usize, alpha: f64, model: Correction) -> Res<f64> {
    let ts = logspace(2.0, 6.0, 17);
    let jobs: Vec<SpectralJob> = ts.iter().map(|&t| SpectralJob::symmetric(Target::VarianceT, dim, alpha).with_t(t)).collect();
    let v = values(run_batch(&jobs))?;
    Ok(fit_in_window(&ts, &v, &vec![0.0; v.len()], model, 0, ts.len() - 1)?.beta_hat)
}

fn values(r: Vec<Result<SpectralValue, SpectralError>>) -> Res<Vec<f64>> {
    Ok(r.into_iter().map(|v| v.map(|v| v.value)).collect::<Result<_, _>>()?)
}

fn criterion_2() -> Res<Outcome> {
    let cases = [
        (1, 0.5, Correction::None, 1.0, 0.02),
        (1, 1.5, Correction::None, 4.0 / 3.0, 0.02),
        (1, 3.0, Correction::None, 1.5, 0.02),
        (2, 1.5, Correction::None, 1.0, 0.02),
        (1, 1.0, Correction::Log, 1.0, 0.05),
        (1, 2.0, Correction::InvSqrtLog, 1.5, 0.05),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, a, m, target, tol) in cases {
        let b = variance_slope(d, a, m)?;
        pass &= (b - target).abs() <= tol;
        parts.push(format!("d={d} a={a} [{m}] {b:.4}/{target:.3}"));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn criterion_3() -> Res<Outcome> {
    let k = sym1(1.5, 4)?;
    let sys = build_exact(&k, 8, 0.5)?;
    let lams = [0.1, 0.5, 2.0];
    let mut worst_direct = 0.0f64;
    let mut given = Vec::new();
    for &l in &lams {
        let r = sys.exact_resolvent(l)?;
        let lt = sys.laplace_of_variance(l)?.value;
        worst_direct = worst_direct.max(((lt - r) / r).abs());
        given.push(r);
    }
    // spline-extended route over a tabulated variance curve
    let curve = sys.variance_curve(400.0);
    let t = logspace(-3.0, 400f64.log10(), 800);
    let v: Vec<f64> = t.iter().map(|&x| curve.variance(x).value).collect();
    let spline = tauberian_check((&t, &v), (&lams, &given))?.max_deviation();

    let l = 1e-2;
    let job = SpectralJob::symmetric(Target::LaplaceLambda, 1, 1.5).with_lambda(l).with_cross_check(true);
    let lap = laplace_sym(&job)?;
    let spectral_dev = ((lap.companion.ok_or("missing time-domain companion")? - lap.value) / lap.value).abs();
    let ts = logspace(-1.0, 4.0, 41);
    let jobs: Vec<SpectralJob> = ts.iter().map(|&t| SpectralJob::symmetric(Target::VarianceT, 1, 1.5).with_t(t)).collect();
    let sv = values(run_batch(&jobs))?;
    let spectral_spline = tauberian_check((&ts, &sv), (&[l], &[lap.value]))?.max_deviation();

    let pass = worst_direct < 1e-4 && spline < 1e-4 && spectral_dev < 1e-2 && spectral_spline < 1e-2;
    Ok(Outcome {
        pass,
        detail: format!(
            "oracle L=8: {worst_direct:.1e} (piecewise), {spline:.1e} (spline); spectral lambda=1e-2: {spectral_dev:.1e} (nested), {spectral_spline:.1e} (spline)"
        ),
    })
}

fn criterion_4() -> Res<Outcome> {
    let grid = [1.0, 2.0, 5.0];
    let f = FunctionalSpec::degree1(0, 0.5);
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, k, seed) in [("SYM", sym1(1.5, 5)?, 1u64 << 32), ("LA", la1(1.5, 5)?, 2u64 << 32)] {
        let sys = build_exact(&k, 10, 0.5)?;
        let s = run_occupation(&k, 10, 0.5, &grid, 100_000, &f, seed, RunOptions::default())?;
        let mut worst = 0.0f64;
        for (i, &t) in grid.iter().enumerate() {
            let exact = sys.exact_variance(t)?.value;
            let mc = s.variance(i);
            worst = worst.max(((mc.value - exact) / mc.se).abs());
        }
        pass &= worst < 3.0;
        parts.push(format!("{name} max|z| {worst:.2}"));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn criterion_5() -> Res<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    let specs = [
        ("SYM", KernelSpec::symmetric(1, 1.5, 128), 3u64 << 32),
        ("LA", KernelSpec::new(1, 1.5, &[2.0], &[1.0], Variant::La, 128), 4u64 << 32),
    ];
    for (name, spec, seed) in specs {
        let k = JumpKernel::new(spec)?;
        let r = covariance_identity_check(&k, 256, 0.5, &[0.5, 1.0, 2.0], 4000, 80_000, seed)?;
        pass &= r.max_abs_z() < 3.0 && !r.finite_size_warning;
        parts.push(format!("{name} max|z| {:.2}", r.max_abs_z()));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn criterion_6() -> Res<Outcome> {
    let lams = logspace(-6.0, -3.0, 7);
    let mut pass = true;
    let mut parts = Vec::new();
    for (a, target) in [(1.25, 1.0 / 1.25 - 1.0), (1.5, -1.0 / 3.0)] {
        let spec = KernelSpec::new(1, a, &[2.0], &[1.0], Variant::La, 1);
        let jobs: Vec<SpectralJob> =
            lams.iter().map(|&l| SpectralJob::new(Target::ILowerBound, spec.clone(), 0.5).with_lambda(l)).collect();
        let v = values(run_batch(&jobs))?;
        let b = fit_in_window(&lams, &v, &vec![0.0; v.len()], Correction::None, 0, lams.len() - 1)?.beta_hat;
        pass &= (b - target).abs() <= 0.05;
        parts.push(format!("a={a}: {b:.4}/{target:.4}"));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn criterion_7() -> Res<Outcome> {
    let map_ok = hurst_target(1.0, 1) == HurstTarget::Fbm(0.5)
        && hurst_target(1.5, 1) == HurstTarget::Fbm(2.0 / 3.0)
        && hurst_target(2.0, 1) == HurstTarget::Fbm(0.75);
    let times = [0.25, 0.5, 1.0, 2.0, 4.0];
    let mut synth = 0.0f64;
    for (i, h) in [0.5, 2.0 / 3.0, 0.75].into_iter().enumerate() {
        let paths = synthetic_fbm_paths(&times, h, 1000, 70 + i as u64)?;
        synth = synth.max(fbm_covariance_test(&paths, &times, h)?.max_abs_z());
    }
    // simulated Γ on a long ring, times rescaled so that the middle one is 1
    let k = sym1(1.5, 128)?;
    let f = FunctionalSpec::degree1(0, 0.5);
    let sim_times = [40.0, 80.0, 160.0, 320.0];
    let s = run_occupation(&k, 512, 0.5, &sim_times, 2000, &f, 5u64 << 32, RunOptions::default())?;
    let tn: Vec<f64> = sim_times.iter().map(|t| t / 160.0).collect();
    let sim = fbm_covariance_test(&s.gamma_samples, &tn, 2.0 / 3.0)?.max_abs_z();
    let pass = map_ok && synth < 3.0 && sim < 4.0 && !s.finite_size_warning;
    Ok(Outcome {
        pass,
        detail: format!("map exact: {map_ok}; synthetic max|z| {synth:.2}; simulation (L=512, N=2000) max|z| {sim:.2}"),
    })
}

/// E[ξ_s(0)] and E[η_s(0)] of the coupled pair against the one-particle return probability.
fn coupling_marginals(k: &JumpKernel, side: usize, rho: f64, s: f64, n: usize) -> Res<(f64, f64, bool)> {
    let mut upper = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut conserved = true;
    for i in 0..n {
        let (mut c, mut rng) = initial_config(side, 1, rho, (6u64 << 32) + i as u64, true)?;
        let n0 = c.n_particles();
        loop {
            let (t, x, y) = c.propose(k, &mut rng)?;
            if t > s {
                break;
            }
            c.apply(x, y, t);
        }
        conserved &= c.n_particles() == n0 && c.second_class.is_some() && c.consistent();
        upper.push(f64::from(u8::from(c.occupied_upper(0))));
        lower.push(f64::from(u8::from(c.occupied(0))));
    }
    let p0: f64 = (0..side)
        .map(|m| {
            let th: f64 =
                k.entries().map(|(y, p)| p * (1.0 - (2.0 * PI * m as f64 * y[0] as f64 / side as f64).cos())).sum();
            (-s * th).exp()
        })
        .sum::<f64>()
        / side as f64;
    let eu = Estimate::of(upper.iter().copied());
    let el = Estimate::of(lower.iter().copied());
    let zu = (eu.value - (rho + (1.0 - rho) * p0)) / eu.se;
    let zl = (el.value - rho * (1.0 - p0)) / el.se;
    Ok((zu, zl, conserved))
}

fn criterion_8() -> Res<Outcome> {
    let mut failures = Vec::new();
    // particle conservation in long runs, d = 1 and 2
    let kernels = [
        JumpKernel::new(KernelSpec::symmetric(1, 1.5, 16))?,
        JumpKernel::new(KernelSpec::new(1, 1.2, &[1.2], &[0.9], Variant::Mza, 8))?,
        JumpKernel::new(KernelSpec::new(2, 1.5, &[2.0, 1.0], &[1.0, 1.0], Variant::La, 6))?,
    ];
    for (i, k) in kernels.iter().enumerate() {
        let side = if k.dim() == 1 { 64 } else { 16 };
        let mut c = init_bernoulli(side, k.dim(), 0.4, 100 + i as u64)?;
        let mut rng = ChaCha8Rng::seed_from_u64(200 + i as u64);
        let n0 = c.n_particles();
        for _ in 0..100_000 {
            c.step(k, &mut rng)?;
        }
        if c.n_particles() != n0 || !c.consistent() {
            failures.push(format!("conservation kernel {i}"));
        }
    }
    // generator identities on the exact system
    let mut worst_rows = 0.0f64;
    let mut worst_pi = 0.0f64;
    for k in [sym1(1.5, 4)?, la1(1.5, 4)?, JumpKernel::new(KernelSpec::new(1, 1.2, &[1.2], &[0.9], Variant::Mza, 4))?] {
        let sys = build_exact(&k, 8, 0.3)?;
        worst_rows = worst_rows.max(sys.row_sum_residual());
        worst_pi = worst_pi.max(sys.stationarity_residual());
    }
    if worst_rows > 1e-13 {
        failures.push(format!("row sums {worst_rows:.1e}"));
    }
    if worst_pi > 1e-14 {
        failures.push(format!("piQ {worst_pi:.1e}"));
    }
    let rev_sym = build_exact(&sym1(1.5, 4)?, 8, 0.3)?.reversibility_residual();
    let rev_la = build_exact(&la1(1.5, 4)?, 8, 0.3)?.reversibility_residual();
    if rev_sym > 1e-15 || rev_la < 1e-6 {
        failures.push(format!("reversibility sym {rev_sym:.1e} la {rev_la:.1e}"));
    }
    // stationarity of ν_ρ under the dynamics: one-site density and Γ mean
    let f = FunctionalSpec::degree1(0, 0.3);
    let st = run_occupation(&la1(1.5, 16)?, 64, 0.3, &[5.0], 20_000, &f, 7u64 << 32, RunOptions::default())?;
    let g = st.gamma_mean(0);
    let cov = st.covariance(0);
    if (g.value / g.se).abs() > 4.0 {
        failures.push(format!("Gamma mean z {:.2}", g.value / g.se));
    }
    // E[(η_5(0) − ρ)(η_0(0) − ρ)] stays within the χ bound
    if !(cov.value.abs() <= 0.21 + 4.0 * cov.se) {
        failures.push("covariance bound".into());
    }
    // coupling marginals
    let (zu, zl, conserved) = coupling_marginals(&sym1(1.5, 32)?, 64, 0.5, 1.0, 20_000)?;
    if zu.abs() > 4.0 || zl.abs() > 4.0 || !conserved {
        failures.push(format!("coupling marginals z {zu:.2}/{zl:.2} conserved {conserved}"));
    }
    Ok(Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "rows {worst_rows:.1e}, piQ {worst_pi:.1e}, rev {rev_sym:.1e}, Gamma z {:.2}, coupling z {zu:.2}/{zl:.2}",
                g.value / g.se
            )
        } else {
            failures.join("; ")
        },
    })
}


/// One acceptance criterion with its wall-clock budget.
#[derive(Debug, Clone, Copy)]
pub struct Criterion {
    pub id: usize,
    pub key: &'static str,
    pub name: &'static str,
    pub budget_secs: f64,
    run: fn() -> Res<Outcome>,
}

pub const CRITERIA: [Criterion; 8] = [
    Criterion { id: 1, key: "theta_asymptote", name: "theta asymptote", budget_secs: 60.0, run: criterion_1 },
    Criterion { id: 2, key: "symmetric_variance", name: "symmetric variance exponents", budget_secs: 300.0, run: criterion_2 },
    Criterion { id: 3, key: "laplace_identity", name: "Laplace identity", budget_secs: 120.0, run: criterion_3 },
    Criterion { id: 4, key: "mc_vs_exact", name: "Monte Carlo vs exact", budget_secs: 600.0, run: criterion_4 },
    Criterion { id: 5, key: "second_class", name: "second-class identity", budget_secs: 600.0, run: criterion_5 },
    Criterion { id: 6, key: "asymmetric_lower_bound", name: "asymmetric lower-bound exponents", budget_secs: 600.0, run: criterion_6 },
    Criterion { id: 7, key: "hurst_fbm", name: "Hurst map and FBM covariance", budget_secs: 600.0, run: criterion_7 },
    Criterion { id: 8, key: "invariants", name: "invariants", budget_secs: 300.0, run: criterion_8 },
];

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: usize,
    pub key: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub seconds: f64,
    pub detail: String,
}

pub const VERIFY_CSV_HEADER: &str = "criterion,key,pass,seconds,detail";

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {} [{}] {}: ({:.1}s) {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }

    pub fn csv(&self) -> String {
        format!("{},{},{},{:.3},\"{}\"", self.id, self.key, self.pass, self.seconds, self.detail.replace('"', "'"))
    }
}

impl Criterion {
    /// Run and time; an error inside the criterion counts as a failure.
    pub fn run(&self) -> CriterionReport {
        let start = Instant::now();
        let out = (self.run)();
        let seconds = start.elapsed().as_secs_f64();
        let (pass, detail) = match out {
            Ok(o) => (o.pass && seconds <= self.budget_secs, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionReport { id: self.id, key: self.key, name: self.name, pass, seconds, detail }
    }
}

/// Run the selected criteria (all when `ids` is empty), calling `each` as each finishes.
pub fn run_criteria(ids: &[usize], mut each: impl FnMut(&CriterionReport)) -> Vec<CriterionReport> {
    CRITERIA
        .iter()
        .filter(|c| ids.is_empty() || ids.contains(&c.id))
        .map(|c| {
            let r = c.run();
            each(&r);
            r
        })
        .collect()
}
