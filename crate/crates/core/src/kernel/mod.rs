//! Long-range jump kernels p(y) = γ(y)/|y|^{d+α}: construction, sampling and Fourier symbols.

mod jacobi;
mod symbol;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

pub use jacobi::{epstein_zeta_2d, half_theta, jacobi_theta, jacobi_theta_diff, second_moment_2d};
pub use symbol::{
    a_hat, theta, theta_asymptote, theta_series, Asymptote, FKind, FourierSymbolParams, RKind, SeriesValue, Symbol,
};

/// Lattice displacement; the second coordinate is unused (zero) in d = 1.
pub type Disp = [i64; 2];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("symmetric part does not generate the lattice")]
    NonIrreducible,
    #[error("weights contradict variant {variant}: {reason}")]
    BadVariant { variant: Variant, reason: String },
    #[error("invalid kernel parameter: {0}")]
    BadParameter(String),
    #[error("series tail bound {bound:e} exceeds tolerance {tol:e} at cut {z_max}")]
    TailNotConverged { bound: f64, tol: f64, z_max: usize },
    #[error("quadrature failed: {0}")]
    QuadratureFail(String),
    #[error("cannot parse kernel spec: {0}")]
    Parse(String),
}

/// Jump class of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Long-range asymmetric: constant weights, b_i^+ != b_i^- somewhere.
    La,
    /// Short-range asymmetry: (b^+, b^-) inside the inner radius, symmetric mean weights outside.
    Sa,
    /// Nearest-neighbour asymmetry: SA with inner radius 1.
    Nna,
    /// Mean-zero asymmetric: asymmetry on the first shell compensated on the second.
    Mza,
    /// Finite range: weights vanish beyond the inner radius.
    Fr,
    Sym,
}

impl Variant {
    pub const ALL: [Variant; 6] = [Variant::La, Variant::Sa, Variant::Nna, Variant::Mza, Variant::Fr, Variant::Sym];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::La => "LA",
            Variant::Sa => "SA",
            Variant::Nna => "NNA",
            Variant::Mza => "MZA",
            Variant::Fr => "FR",
            Variant::Sym => "SYM",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = KernelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| KernelError::Parse(format!("unknown variant '{s}'")))
    }
}

/// Parameters defining a kernel, independent of any table.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub dim: usize,
    pub alpha: f64,
    pub b_plus: Vec<f64>,
    pub b_minus: Vec<f64>,
    pub variant: Variant,
    pub trunc_radius: usize,
    /// Radius (max-norm) of the inner shell used by SA, MZA and FR; NNA forces 1.
    pub inner_radius: usize,
}

impl KernelSpec {
    pub fn new(dim: usize, alpha: f64, b_plus: &[f64], b_minus: &[f64], variant: Variant, trunc_radius: usize) -> Self {
        Self {
            dim,
            alpha,
            b_plus: b_plus.to_vec(),
            b_minus: b_minus.to_vec(),
            variant,
            trunc_radius,
            inner_radius: 1,
        }
    }

    /// Symmetric kernel with unit weights on every axis.
    pub fn symmetric(dim: usize, alpha: f64, trunc_radius: usize) -> Self {
        let ones = vec![1.0; dim];
        Self::new(dim, alpha, &ones, &ones, Variant::Sym, trunc_radius)
    }

    pub fn with_inner_radius(mut self, r: usize) -> Self {
        self.inner_radius = r;
        self
    }

    pub fn with_trunc_radius(mut self, r: usize) -> Self {
        self.trunc_radius = r;
        self
    }

    /// Symmetrized spec: each axis gets (b^+ + b^-)/2 in both directions.
    pub fn symmetrized(&self) -> Self {
        let m: Vec<f64> = self.b_plus.iter().zip(&self.b_minus).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut s = self.clone();
        s.b_plus = m.clone();
        s.b_minus = m;
        s.variant = Variant::Sym;
        s
    }

    fn effective_inner(&self) -> usize {
        match self.variant {
            Variant::Nna => 1,
            Variant::Mza => 1,
            _ => self.inner_radius,
        }
    }

    /// Compensating weight difference on the second shell for MZA, per axis.
    fn mza_second_shell(&self) -> Vec<f64> {
        let s = self.dim as f64 + self.alpha;
        (0..self.dim)
            .map(|i| {
                let (s1, s2) = (shell_moment(self.dim, i, 1, s), shell_moment(self.dim, i, 2, s));
                -(self.b_plus[i] - self.b_minus[i]) * s1 / s2
            })
            .collect()
    }

    /// Direction weights (b_i^+(y), b_i^-(y)) on axis i at displacement y.
    fn axis_weights(&self, i: usize, y: &Disp, mza: &[f64]) -> (f64, f64) {
        let r = y[0].unsigned_abs().max(y[1].unsigned_abs()) as usize;
        let (bp, bm) = (self.b_plus[i], self.b_minus[i]);
        let mean = 0.5 * (bp + bm);
        match self.variant {
            Variant::Sym | Variant::La => (bp, bm),
            Variant::Sa | Variant::Nna => {
                if r <= self.effective_inner() {
                    (bp, bm)
                } else {
                    (mean, mean)
                }
            }
            Variant::Mza => match r {
                1 => (bp, bm),
                2 => (mean + 0.5 * mza[i], mean - 0.5 * mza[i]),
                _ => (mean, mean),
            },
            Variant::Fr => {
                if r <= self.inner_radius {
                    (bp, bm)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }

    /// Unnormalized γ(y)/c.
    fn gamma_weight(&self, y: &Disp, mza: &[f64]) -> f64 {
        let mut g = 0.0;
        for i in 0..self.dim {
            let (bp, bm) = self.axis_weights(i, y, mza);
            if y[i] > 0 {
                g += bp;
            } else if y[i] < 0 {
                g += bm;
            }
        }
        g
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |m: &str| Err(KernelError::BadParameter(m.to_string()));
        if self.dim != 1 && self.dim != 2 {
            return bad("dim must be 1 or 2");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive and finite");
        }
        if self.b_plus.len() != self.dim || self.b_minus.len() != self.dim {
            return bad("b_plus and b_minus need one entry per axis");
        }
        if self.b_plus.iter().chain(&self.b_minus).any(|b| !(b.is_finite() && *b >= 0.0)) {
            return bad("weights must be finite and nonnegative");
        }
        if !(0..self.dim).any(|i| self.b_plus[i] + self.b_minus[i] > 0.0) {
            return bad("at least one axis needs positive weight");
        }
        if self.trunc_radius < 1 {
            return bad("trunc_radius must be at least 1");
        }
        if self.inner_radius < 1 {
            return bad("inner_radius must be at least 1");
        }
        let asym: f64 = (0..self.dim).map(|i| (self.b_plus[i] - self.b_minus[i]).abs()).sum();
        let min_w = (0..self.dim).map(|i| self.b_plus[i].min(self.b_minus[i])).fold(f64::INFINITY, f64::min);
        let fail = |reason: &str| {
            Err(KernelError::BadVariant { variant: self.variant, reason: reason.to_string() })
        };
        match self.variant {
            Variant::Sym => {
                if asym != 0.0 {
                    return fail("b_plus must equal b_minus on every axis");
                }
            }
            Variant::La => {
                if !(min_w > 0.0) {
                    return fail("needs min_i b_i^+ ∧ b_i^- > 0");
                }
                if asym == 0.0 {
                    return fail("needs b_i^+ != b_i^- on some axis");
                }
            }
            Variant::Sa | Variant::Nna => {
                if asym == 0.0 {
                    return fail("needs an asymmetric inner shell");
                }
            }
            Variant::Mza => {
                if asym == 0.0 {
                    return fail("needs b_i^+ != b_i^- on some axis");
                }
                if self.trunc_radius < 2 {
                    return fail("needs trunc_radius >= 2 for the compensating shell");
                }
                let d2 = self.mza_second_shell();
                for i in 0..self.dim {
                    let mean = 0.5 * (self.b_plus[i] + self.b_minus[i]);
                    if mean < 0.5 * d2[i].abs() {
                        return fail("weights too asymmetric to compensate on the second shell");
                    }
                }
            }
            Variant::Fr => {}
        }
        Ok(())
    }

    /// Flat key=value block.
    pub fn to_kv(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        format!(
            "dim={}\nalpha={}\nb_plus={}\nb_minus={}\nvariant={}\ntrunc_radius={}\ninner_radius={}\n",
            self.dim,
            self.alpha,
            join(&self.b_plus),
            join(&self.b_minus),
            self.variant,
            self.trunc_radius,
            self.inner_radius
        )
    }

    pub fn from_kv(text: &str) -> Result<Self, KernelError> {
        let mut map = HashMap::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| KernelError::Parse(format!("no '=' in '{line}'")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| map.get(k).ok_or_else(|| KernelError::Parse(format!("missing key '{k}'")));
        let num = |k: &str| -> Result<f64, KernelError> {
            get(k)?.parse().map_err(|_| KernelError::Parse(format!("bad number for '{k}'")))
        };
        let list = |k: &str| -> Result<Vec<f64>, KernelError> {
            get(k)?
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| KernelError::Parse(format!("bad list for '{k}'"))))
                .collect()
        };
        for k in map.keys() {
            if !["dim", "alpha", "b_plus", "b_minus", "variant", "trunc_radius", "inner_radius"].contains(&k.as_str()) {
                return Err(KernelError::Parse(format!("unknown key '{k}'")));
            }
        }
        Ok(Self {
            dim: num("dim")? as usize,
            alpha: num("alpha")?,
            b_plus: list("b_plus")?,
            b_minus: list("b_minus")?,
            variant: get("variant")?.parse()?,
            trunc_radius: num("trunc_radius")? as usize,
            inner_radius: if map.contains_key("inner_radius") { num("inner_radius")? as usize } else { 1 },
        })
    }
}

/// Σ over the max-norm shell |y|_∞ = r with y_i > 0 of y_i/|y|^s.
fn shell_moment(dim: usize, i: usize, r: i64, s: f64) -> f64 {
    let mut acc = 0.0;
    for_each_disp(dim, r as usize, |y| {
        let m = y[0].abs().max(y[1].abs());
        if m == r && y[i] > 0 {
            acc += y[i] as f64 / norm(y).powf(s);
        }
    });
    acc
}

fn for_each_disp(dim: usize, r: usize, mut f: impl FnMut(Disp)) {
    let r = r as i64;
    if dim == 1 {
        for y in -r..=r {
            if y != 0 {
                f([y, 0]);
            }
        }
    } else {
        for y0 in -r..=r {
            for y1 in -r..=r {
                if y0 != 0 || y1 != 0 {
                    f([y0, y1]);
                }
            }
        }
    }
}

fn norm(y: Disp) -> f64 {
    ((y[0] * y[0] + y[1] * y[1]) as f64).sqrt()
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Whether the vectors generate Z^dim.
fn generates_lattice(dim: usize, vs: &[Disp]) -> bool {
    if dim == 1 {
        return vs.iter().fold(0, |g, v| gcd(g, v[0])) == 1;
    }
    let mut g = 0;
    for (k, a) in vs.iter().enumerate() {
        for b in &vs[k + 1..] {
            g = gcd(g, a[0] * b[1] - a[1] * b[0]);
            if g == 1 {
                return true;
            }
        }
    }
    false
}

/// Normalized, truncated kernel with an alias table for sampling.
#[derive(Debug, Clone)]
pub struct JumpKernel {
    pub spec: KernelSpec,
    pub c_norm: f64,
    disps: Vec<Disp>,
    probs: Vec<f64>,
    index: HashMap<Disp, usize>,
    alias: WeightedAliasIndex<f64>,
}

/// Build and normalize the truncated kernel table.
pub fn build_kernel(
    dim: usize,
    alpha: f64,
    b_plus: &[f64],
    b_minus: &[f64],
    variant: Variant,
    trunc_radius: usize,
) -> Result<JumpKernel, KernelError> {
    JumpKernel::new(KernelSpec::new(dim, alpha, b_plus, b_minus, variant, trunc_radius))
}

impl JumpKernel {
    pub fn new(spec: KernelSpec) -> Result<Self, KernelError> {
        spec.validate()?;
        let mza = if spec.variant == Variant::Mza { spec.mza_second_shell() } else { vec![0.0; spec.dim] };
        let s = spec.dim as f64 + spec.alpha;
        let mut disps = Vec::new();
        let mut raw = Vec::new();
        for_each_disp(spec.dim, spec.trunc_radius, |y| {
            let g = spec.gamma_weight(&y, &mza);
            if g > 0.0 {
                disps.push(y);
                raw.push(g / norm(y).powf(s));
            }
        });
        // small terms first for a stable total
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
        let total: f64 = order.iter().map(|&k| raw[k]).sum();
        if !(total > 0.0) {
            return Err(KernelError::BadParameter("kernel has empty support".into()));
        }
        let probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let index: HashMap<Disp, usize> = disps.iter().enumerate().map(|(k, d)| (*d, k)).collect();

        // symmetric part positive on a generating set
        let sym_support: Vec<Disp> = disps
            .iter()
            .filter(|y| {
                let neg = [-y[0], -y[1]];
                probs[index[*y]] + index.get(&neg).map_or(0.0, |&k| probs[k]) > 0.0
            })
            .copied()
            .collect();
        if !generates_lattice(spec.dim, &sym_support) {
            return Err(KernelError::NonIrreducible);
        }
        let alias = WeightedAliasIndex::new(probs.clone()).map_err(|e| KernelError::BadParameter(e.to_string()))?;
        Ok(Self { c_norm: 1.0 / total, spec, disps, probs, index, alias })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    pub fn variant(&self) -> Variant {
        self.spec.variant
    }

    pub fn len(&self) -> usize {
        self.disps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disps.is_empty()
    }

    /// (displacement, probability) pairs.
    pub fn entries(&self) -> impl Iterator<Item = (Disp, f64)> + '_ {
        self.disps.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn p(&self, y: Disp) -> f64 {
        self.index.get(&y).map_or(0.0, |&k| self.probs[k])
    }

    pub fn s(&self, y: Disp) -> f64 {
        0.5 * (self.p(y) + self.p([-y[0], -y[1]]))
    }

    pub fn a(&self, y: Disp) -> f64 {
        0.5 * (self.p(y) - self.p([-y[0], -y[1]]))
    }

    /// Mean displacement m = Σ y p(y).
    pub fn mean(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (y, p) in self.entries() {
            m[0] += y[0] as f64 * p;
            m[1] += y[1] as f64 * p;
        }
        m
    }

    pub fn table_sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// O(1) draw from the table.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Disp {
        self.disps[self.alias.sample(rng)]
    }

    /// The symmetrized kernel s as a table of its own.
    pub fn symmetrized(&self) -> Result<JumpKernel, KernelError> {
        JumpKernel::new(self.spec.symmetrized())
    }

    /// Finite-table transform Σ_y a(y) e^{2πi u·y}, returned as its imaginary part.
    pub fn a_hat_table(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (y, _) in self.entries() {
            let a = self.a(y);
            if a != 0.0 {
                let ph = 2.0 * std::f64::consts::PI * (u[0] * y[0] as f64 + u.get(1).copied().unwrap_or(0.0) * y[1] as f64);
                acc += a * ph.sin();
            }
        }
        acc
    }

    /// CSV audit dump with columns y,p,s,a (d = 2 writes y as "y0;y1").
    pub fn table_csv(&self) -> String {
        let mut out = String::from("y,p,s,a\n");
        for (y, p) in self.entries() {
            let ys = if self.dim() == 1 { y[0].to_string() } else { format!("{};{}", y[0], y[1]) };
            out.push_str(&format!("{ys},{p:e},{:e},{:e}\n", self.s(y), self.a(y)));
        }
        out
    }
}

/// Draw a displacement from the kernel.
pub fn sample_displacement<R: Rng + ?Sized>(kernel: &JumpKernel, rng: &mut R) -> Disp {
    kernel.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::zeta;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_normalization_approaches_zeta() {
        let k = build_kernel(1, 1.5, &[1.0], &[1.0], Variant::Sym, 1_000_000).unwrap();
        // truncated sum misses about 2 * R^{-1.5}/1.5 of 2ζ(2.5)
        let c_inf = 1.0 / (2.0 * zeta(2.5));
        assert_relative_eq!(k.c_norm, c_inf, max_relative = 1e-8);
        assert!((k.table_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variants_validate() {
        assert!(matches!(
            build_kernel(1, 1.5, &[2.0], &[1.0], Variant::Sym, 10),
            Err(KernelError::BadVariant { .. })
        ));
        assert!(matches!(
            build_kernel(1, 1.5, &[1.0], &[0.0], Variant::La, 10),
            Err(KernelError::BadVariant { .. })
        ));
        assert!(build_kernel(1, 1.5, &[2.0], &[1.0], Variant::La, 10).unwrap().mean()[0] > 0.0);
        assert!(matches!(
            build_kernel(1, 1.5, &[1.0], &[1.0], Variant::La, 10),
            Err(KernelError::BadVariant { .. })
        ));
        assert!(build_kernel(1, -1.0, &[1.0], &[1.0], Variant::Sym, 10).is_err());
        assert!(build_kernel(1, 1.0, &[0.0], &[0.0], Variant::Sym, 10).is_err());
    }

    #[test]
    fn mean_zero_asymmetric() {
        for dim in [1, 2] {
            let b = vec![1.2; dim];
            let c = vec![0.8; dim];
            let k = JumpKernel::new(KernelSpec::new(dim, 1.5, &b, &c, Variant::Mza, 8)).unwrap();
            let m = k.mean();
            assert!(m[0].abs() < 1e-12 && m[1].abs() < 1e-12, "{m:?}");
            assert!(k.entries().any(|(y, _)| k.a(y).abs() > 1e-6));
        }
    }

    #[test]
    fn finite_range_irreducibility() {
        // second axis has no weight but diagonal moves still generate Z^2
        let k = JumpKernel::new(KernelSpec::new(2, 1.0, &[1.0, 0.0], &[1.0, 0.0], Variant::Fr, 3)).unwrap();
        assert!(k.p([0, 1]) == 0.0 && k.p([1, 1]) > 0.0);
        // even-only support in d = 1 is reducible
        let ks = KernelSpec::new(1, 1.0, &[1.0], &[1.0], Variant::Fr, 3).with_inner_radius(1);
        assert!(JumpKernel::new(ks).is_ok());
    }

    #[test]
    fn nna_two_sided_law() {
        let k = build_kernel(1, 1.5, &[3.0], &[1.0], Variant::Nna, 5).unwrap();
        assert_relative_eq!(k.p([1, 0]) / k.p([-1, 0]), 3.0, max_relative = 1e-14);
        assert_relative_eq!(k.p([2, 0]), k.p([-2, 0]), max_relative = 1e-14);
    }

    #[test]
    fn kv_round_trip() {
        let s = KernelSpec::new(2, 1.25, &[1.0, 0.5], &[2.0, 0.5], Variant::La, 7);
        assert_eq!(KernelSpec::from_kv(&s.to_kv()).unwrap(), s);
        assert!(KernelSpec::from_kv("dim=1\nalpah=1").is_err());
    }

    #[test]
    fn sampler_deterministic_and_nonzero() {
        let k = build_kernel(2, 1.5, &[1.0, 1.0], &[1.0, 1.0], Variant::Sym, 6).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = k.sample(&mut r1);
            assert_eq!(a, k.sample(&mut r2));
            assert_ne!(a, [0, 0]);
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let k = build_kernel(1, 1.5, &[2.0], &[1.0], Variant::La, 3).unwrap();
        let csv = k.table_csv();
        assert!(csv.starts_with("y,p,s,a\n"));
        assert_eq!(csv.lines().count(), 7);
    }
}
