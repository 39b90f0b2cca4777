//! Special functions used by the symbol and quadrature code.

use std::f64::consts::PI;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// B_{2k} for k = 1..=12.
const BERNOULLI_2K: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

/// Riemann zeta on the real line, s != 1.
///
/// Direct partial sum to N plus the Euler-Maclaurin tail; negative side by
/// the functional equation.
pub fn zeta(s: f64) -> f64 {
    assert!(s != 1.0, "zeta has a pole at s = 1");
    if s < 0.5 {
        if s == s.floor() && (s as i64) % 2 == 0 {
            return if s == 0.0 { -0.5 } else { 0.0 };
        }
        let z = 1.0 - s;
        return 2f64.powf(s) * PI.powf(s - 1.0) * (PI * s / 2.0).sin() * gamma(z) * zeta(z);
    }
    if s > 60.0 {
        return 1.0 + 2f64.powf(-s) + 3f64.powf(-s);
    }
    euler_maclaurin_zeta(s, 1.0, 24)
}

/// Hurwitz zeta ζ(s, a) for a > 0, s != 1; valid for any real s once n_direct
/// is large compared with |s|.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(a > 0.0 && s != 1.0);
    let n = 24usize.max((s.abs() as usize) + 16);
    euler_maclaurin_zeta(s, a, n)
}

fn euler_maclaurin_zeta(s: f64, a: f64, n: usize) -> f64 {
    let mut sum = 0.0;
    for k in 0..n {
        sum += (k as f64 + a).powf(-s);
    }
    let big_n = n as f64 + a;
    let mut tail = big_n.powf(1.0 - s) / (s - 1.0) + 0.5 * big_n.powf(-s);
    // term_k = B_{2k}/(2k)! * s(s+1)...(s+2k-2) N^{-s-2k+1}
    let mut rising = s; // s (s+1) ... (s+2k-2)
    let mut fact = 2.0; // (2k)!
    let mut npow = big_n.powf(-s - 1.0);
    for (k, b) in BERNOULLI_2K.iter().enumerate() {
        let term = b / fact * rising * npow;
        tail += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        let k2 = 2.0 * (k as f64 + 1.0);
        rising *= (s + k2 - 1.0) * (s + k2);
        fact *= (k2 + 1.0) * (k2 + 2.0);
        npow /= big_n * big_n;
    }
    sum + tail
}

/// Harmonic number H_n.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Expansion of Li_s(e^{ix}) around x = 0 with the constant ζ(s) removed,
/// split into real and imaginary parts.
///
/// Li_s(e^{ix}) = ζ(s) + Γ(1-s)(-ix)^{s-1} + Σ_{k≥1} ζ(s-k)(ix)^k/k!   (s not an integer)
///
/// For integer s = n the k = n-1 term and the Γ term merge into
/// (ix)^{n-1}/(n-1)! [H_{n-1} - log(-ix)].
#[derive(Debug, Clone)]
pub struct PolylogUnit {
    s: f64,
    /// ζ(s-k)/k!, k = 0.. (entry k = n-1 unused for integer s = n)
    coef: Vec<f64>,
    lead: f64,
    integer: Option<usize>,
}

impl PolylogUnit {
    /// Number of series terms; the ratio of successive terms is about x/(2π).
    const TERMS: usize = 64;

    pub fn new(s: f64) -> Self {
        assert!(s > 1.0);
        let integer = if (s - s.round()).abs() < 1e-12 { Some(s.round() as usize) } else { None };
        let mut coef = Vec::with_capacity(Self::TERMS);
        let mut kfact = 1.0;
        for k in 0..Self::TERMS {
            if k > 0 {
                kfact *= k as f64;
            }
            let z = s - k as f64;
            let c = if let Some(n) = integer {
                if k == n - 1 { 0.0 } else { zeta(n as f64 - k as f64) / kfact }
            } else {
                zeta(z) / kfact
            };
            coef.push(c);
        }
        let lead = if integer.is_some() { 0.0 } else { gamma(1.0 - s) };
        Self { s, coef, lead, integer }
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Whether s is close enough to an integer that the split series cancels badly.
    pub fn near_integer(s: f64) -> bool {
        let d = (s - s.round()).abs();
        d > 1e-12 && d < 0.02
    }

    /// (Re, Im) of Li_s(e^{ix}) - ζ(s) for x in [0, π].
    pub fn eval(&self, x: f64) -> (f64, f64) {
        debug_assert!((0.0..=PI + 1e-12).contains(&x));
        if x == 0.0 {
            return (0.0, 0.0);
        }
        let (mut re, mut im) = (0.0, 0.0);
        match self.integer {
            None => {
                // (-ix)^{s-1} = x^{s-1} e^{-iπ(s-1)/2}
                let mag = self.lead * x.powf(self.s - 1.0);
                let ph = -PI * (self.s - 1.0) / 2.0;
                re += mag * ph.cos();
                im += mag * ph.sin();
            }
            Some(n) => {
                let m = n - 1;
                let mut fact = 1.0;
                for j in 1..=m {
                    fact *= j as f64;
                }
                let xp = x.powi(m as i32) / fact;
                // i^m (H_m - ln x + iπ/2)
                let (a, b) = (harmonic(m) - x.ln(), PI / 2.0);
                let (ir, ii) = i_pow(m);
                re += xp * (ir * a - ii * b);
                im += xp * (ir * b + ii * a);
            }
        }
        let mut xp = 1.0;
        for k in 1..Self::TERMS {
            xp *= x;
            let t = self.coef[k] * xp;
            match k % 4 {
                0 => re += t,
                1 => im += t,
                2 => re -= t,
                _ => im -= t,
            }
            if xp * self.coef[k].abs().max(1e-300) < 1e-19 && k > 8 && xp < 1e-17 {
                break;
            }
        }
        (re, im)
    }
}

fn i_pow(m: usize) -> (f64, f64) {
    match m % 4 {
        0 => (1.0, 0.0),
        1 => (0.0, 1.0),
        2 => (-1.0, 0.0),
        _ => (0.0, -1.0),
    }
}

/// Dawson's integral F(x) = e^{-x²} ∫_0^x e^{t²} dt.
///
/// Rybicki's sampling-theorem sum with h = 0.2 (error ~ e^{-(π/2h)²}) for
/// moderate x, asymptotic series beyond.
pub fn dawson(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 0.2 {
        // Σ (-2x²)^n x / (2n+1)!!
        let x2 = x * x;
        let (mut t, mut s) = (x, x);
        for n in 1..20 {
            t *= -2.0 * x2 / (2 * n + 1) as f64;
            s += t;
            if t.abs() < 1e-17 * s.abs() {
                break;
            }
        }
        return s;
    }
    if ax > 50.0 {
        // Σ (2k-1)!! / (2^{k+1} x^{2k+1})
        let y = 1.0 / (2.0 * x * x);
        let (mut t, mut s) = (1.0, 1.0);
        for k in 1..12 {
            t *= (2 * k - 1) as f64 * y;
            s += t;
            if t < 1e-17 {
                break;
            }
        }
        return s / (2.0 * x);
    }
    const H: f64 = 0.2;
    let n0 = 2 * ((0.5 * ax / H).round() as i64);
    let xp = ax - n0 as f64 * H;
    let mut sum = 0.0;
    let mut n = 1i64;
    while n <= 71 {
        let a = xp - n as f64 * H;
        let b = xp + n as f64 * H;
        sum += (-a * a).exp() / (n + n0) as f64 + (-b * b).exp() / (n0 - n) as f64;
        n += 2;
    }
    x.signum() * sum / PI.sqrt()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Kronrod 15-point nodes (non-negative half) with Kronrod and embedded Gauss 7 weights.
pub const GK15_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
pub const GK15_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for nodes GK15_X[1], [3], [5], [7].
pub const G7_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];
