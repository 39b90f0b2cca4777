//! Adaptive Gauss-Kronrod quadrature on intervals and rectangles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::special::{G7_W, GK15_WK, GK15_X};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub err: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("adaptive quadrature did not converge: value {value:e}, error estimate {err:e}")]
pub struct QuadError {
    pub value: f64,
    pub err: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, max_subdivisions: 4000 }
    }

    pub fn with_max(mut self, n: usize) -> Self {
        self.max_subdivisions = n;
        self
    }

    fn met(&self, value: f64, err: f64) -> bool {
        err <= self.abs.max(self.rel * value.abs())
    }
}

/// One GK15 panel: (kronrod, |kronrod - gauss|).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK15_WK[7];
    let mut g = fc * G7_W[3];
    for j in 0..7 {
        let dx = h * GK15_X[j];
        let s = f(c - dx) + f(c + dx);
        k += GK15_WK[j] * s;
        if j % 2 == 1 {
            g += G7_W[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Seg {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Seg {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Seg {}
impl PartialOrd for Seg {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Seg {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive GK15 over the panels delimited by `breaks` (sorted, at least two points).
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: Tolerance) -> Result<QuadResult, QuadError> {
    assert!(breaks.len() >= 2);
    let mut heap = BinaryHeap::new();
    let (mut total, mut err_total) = (0.0, 0.0);
    let mut evals = 0;
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk15(&mut f, w[0], w[1]);
        evals += 15;
        total += v;
        err_total += e;
        heap.push(Seg { a: w[0], b: w[1], val: v, err: e });
    }
    let mut splits = 0;
    while !tol.met(total, err_total) {
        if splits >= tol.max_subdivisions {
            return Err(QuadError { value: total, err: err_total });
        }
        let Some(s) = heap.pop() else { break };
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            // interval exhausted at machine precision; keep its estimate
            heap.push(Seg { err: 0.0, ..s });
            err_total -= s.err;
            continue;
        }
        let (v1, e1) = gk15(&mut f, s.a, m);
        let (v2, e2) = gk15(&mut f, m, s.b);
        evals += 30;
        total += v1 + v2 - s.val;
        err_total += e1 + e2 - s.err;
        heap.push(Seg { a: s.a, b: m, val: v1, err: e1 });
        heap.push(Seg { a: m, b: s.b, val: v2, err: e2 });
        splits += 1;
    }
    // re-sum to shed accumulated cancellation
    let (value, err) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.val, e + s.err));
    Ok(QuadResult { value, err, evals })
}

/// Breakpoints from `a` to `b` with geometric refinement (ratio 1/2) toward
/// each listed point, down to scale `(b - a) * 2^-depth`.
pub fn graded_breaks(a: f64, b: f64, points: &[f64], depth: u32) -> Vec<f64> {
    let mut v = vec![a, b];
    let len = b - a;
    for &p in points {
        if p < a || p > b {
            continue;
        }
        v.push(p);
        let mut h = len;
        for _ in 0..depth {
            h *= 0.5;
            if p - h > a {
                v.push(p - h);
            }
            if p + h < b {
                v.push(p + h);
            }
        }
    }
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

struct Cell {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Full GK15 rule on [-1, 1]: (nodes, Kronrod weights, embedded Gauss weights or 0).
pub fn gk_nodes() -> ([f64; 15], [f64; 15], [f64; 15]) {
    let mut x = [0.0; 15];
    let mut wk = [0.0; 15];
    let mut wg = [0.0; 15];
    for j in 0..7 {
        x[j] = -GK15_X[j];
        x[14 - j] = GK15_X[j];
        wk[j] = GK15_WK[j];
        wk[14 - j] = GK15_WK[j];
        if j % 2 == 1 {
            wg[j] = G7_W[j / 2];
            wg[14 - j] = G7_W[j / 2];
        }
    }
    x[7] = 0.0;
    wk[7] = GK15_WK[7];
    wg[7] = G7_W[3];
    (x, wk, wg)
}

fn cell_rule<F: FnMut(f64, f64) -> f64>(f: &mut F, x0: f64, x1: f64, y0: f64, y1: f64) -> (f64, f64) {
    let (x, wk, wg) = gk_nodes();
    let (cx, hx) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
    let (cy, hy) = (0.5 * (y0 + y1), 0.5 * (y1 - y0));
    let (mut k, mut g) = (0.0, 0.0);
    for i in 0..15 {
        let xi = cx + hx * x[i];
        for j in 0..15 {
            let v = f(xi, cy + hy * x[j]);
            k += wk[i] * wk[j] * v;
            g += wg[i] * wg[j] * v;
        }
    }
    let s = hx * hy;
    (k * s, ((k - g) * s).abs())
}

/// Adaptive tensor-GK cubature over a union of rectangles `(x0, x1, y0, y1)`.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    cells: &[(f64, f64, f64, f64)],
    tol: Tolerance,
) -> Result<QuadResult, QuadError> {
    let mut heap = BinaryHeap::new();
    let (mut total, mut err_total) = (0.0, 0.0);
    let mut evals = 0;
    for &(x0, x1, y0, y1) in cells {
        let (v, e) = cell_rule(&mut f, x0, x1, y0, y1);
        evals += 225;
        total += v;
        err_total += e;
        heap.push(Cell { x0, x1, y0, y1, val: v, err: e });
    }
    let mut splits = 0;
    while !tol.met(total, err_total) {
        if splits >= tol.max_subdivisions {
            return Err(QuadError { value: total, err: err_total });
        }
        let Some(c) = heap.pop() else { break };
        // split along the longer side
        let halves = if c.x1 - c.x0 >= c.y1 - c.y0 {
            let m = 0.5 * (c.x0 + c.x1);
            [(c.x0, m, c.y0, c.y1), (m, c.x1, c.y0, c.y1)]
        } else {
            let m = 0.5 * (c.y0 + c.y1);
            [(c.x0, c.x1, c.y0, m), (c.x0, c.x1, m, c.y1)]
        };
        total -= c.val;
        err_total -= c.err;
        for (x0, x1, y0, y1) in halves {
            let (v, e) = cell_rule(&mut f, x0, x1, y0, y1);
            evals += 225;
            total += v;
            err_total += e;
            heap.push(Cell { x0, x1, y0, y1, val: v, err: e });
        }
        splits += 1;
    }
    let (value, err) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.val, e + s.err));
    Ok(QuadResult { value, err, evals })
}

/// Square `[0, h]^2` decomposed into L-shaped rings graded toward the origin:
/// each ring `[0, r]^2 \ [0, r/2]^2` is three cells; the innermost square is kept whole.
pub fn corner_graded_cells(h: f64, depth: u32) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::new();
    let mut r = h;
    for _ in 0..depth {
        let q = 0.5 * r;
        out.push((q, r, 0.0, q));
        out.push((0.0, q, q, r));
        out.push((q, r, q, r));
        r = q;
    }
    out.push((0.0, r, 0.0, r));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smooth_integral() {
        let r = integrate(|x: f64| x.sin(), &[0.0, std::f64::consts::PI], Tolerance::new(1e-14, 1e-14)).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-13);
    }

    #[test]
    fn endpoint_singularity_with_grading() {
        let br = graded_breaks(0.0, 1.0, &[0.0], 40);
        let r = integrate(|x: f64| x.powf(-0.5), &br, Tolerance::new(1e-12, 1e-12)).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn interior_kink() {
        let br = graded_breaks(-1.0, 1.0, &[0.3], 10);
        let r = integrate(|x: f64| (x - 0.3).abs(), &br, Tolerance::new(1e-13, 1e-13)).unwrap();
        assert_relative_eq!(r.value, 0.5 * (1.3f64.powi(2) + 0.7f64.powi(2)), max_relative = 1e-12);
    }

    #[test]
    fn reports_failure() {
        let e = integrate(|x: f64| 1.0 / x, &[0.0, 1.0], Tolerance::new(1e-12, 1e-12).with_max(50));
        assert!(e.is_err());
    }

    #[test]
    fn cubature_with_corner_singularity() {
        // ∫_{[0,1]^2} (x²+y²)^{-1/2} = 2 ln(1+√2)
        let cells = corner_graded_cells(1.0, 40);
        let r = integrate_2d(|x, y| 1.0 / (x * x + y * y).sqrt().max(1e-300), &cells, Tolerance::new(1e-10, 1e-10)).unwrap();
        assert_relative_eq!(r.value, 2.0 * (1.0 + 2f64.sqrt()).ln(), max_relative = 1e-9);
    }
}
