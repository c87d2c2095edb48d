//! Numerical quadrature: Gauss-Legendre rules, adaptive Gauss-Kronrod on
//! finite and infinite intervals, and tensor-product rules with a refinement
//! check.

use crate::{Error, Result, C64};
use std::collections::BinaryHeap;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[a, b]`, as (node, weight) pairs.
pub fn gl_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (h, c) = (0.5 * (b - a), 0.5 * (b + a));
    x.iter().zip(&w).map(|(&xi, &wi)| (c + h * xi, h * wi)).collect()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a quadrature with its error estimate and evaluation count.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    pub evals: usize,
}

fn gk15(f: &mut impl FnMut(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let (h, c) = (0.5 * (b - a), 0.5 * (b + a));
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let (f1, f2) = (f(c - h * XGK[j]), f(c + h * XGK[j]));
        k += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            g += (f1 + f2) * WG[j / 2];
        }
    }
    ((k * h), ((k - g) * h).norm())
}

struct Seg {
    a: f64,
    b: f64,
    val: C64,
    err: f64,
}

impl PartialEq for Seg {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Seg {}
impl PartialOrd for Seg {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Seg {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol |I|)`.
pub fn adaptive(
    mut f: impl FnMut(f64) -> C64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    let max_segments = 20_000;
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&mut f, a, b);
    heap.push(Seg { a, b, val: v, err: e });
    let mut evals = 15;
    loop {
        let total: C64 = heap.iter().map(|s| s.val).sum();
        let err: f64 = heap.iter().map(|s| s.err).sum();
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::Divergence("non-finite integrand value".into()));
        }
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok(QuadResult { value: total, error: err, evals });
        }
        if heap.len() >= max_segments {
            return Err(Error::Quadrature { achieved: err, partial: format!("{}", total) });
        }
        let s = heap.pop().unwrap();
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            return Err(Error::Quadrature { achieved: err, partial: format!("{}", total) });
        }
        let (v1, e1) = gk15(&mut f, s.a, m);
        let (v2, e2) = gk15(&mut f, m, s.b);
        evals += 30;
        heap.push(Seg { a: s.a, b: m, val: v1, err: e1 });
        heap.push(Seg { a: m, b: s.b, val: v2, err: e2 });
    }
}

/// Adaptive quadrature over the real line via `x = t / (1 - t^2)`.
pub fn adaptive_real_line(f: impl Fn(f64) -> C64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult> {
    adaptive(
        |t| {
            let d = 1.0 - t * t;
            if d <= 0.0 {
                return C64::new(0.0, 0.0);
            }
            let x = t / d;
            let jac = (1.0 + t * t) / (d * d);
            let v = f(x) * jac;
            if v.re.is_finite() && v.im.is_finite() {
                v
            } else {
                C64::new(0.0, 0.0)
            }
        },
        -1.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Adaptive quadrature over `[a, ∞)` via `x = a + t / (1 - t)`.
pub fn adaptive_half_line(f: impl Fn(f64) -> C64, a: f64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult> {
    adaptive(
        |t| {
            let d = 1.0 - t;
            if d <= 0.0 {
                return C64::new(0.0, 0.0);
            }
            let v = f(a + t / d) / (d * d);
            if v.re.is_finite() && v.im.is_finite() {
                v
            } else {
                C64::new(0.0, 0.0)
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// One axis of a tensor-product rule: an interval and a node count.
#[derive(Clone, Copy, Debug)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Axis {
        Axis { lo, hi, n }
    }
}

/// Tensor-product Gauss-Legendre rule over a box.
pub fn tensor_gl(axes: &[Axis], f: impl Fn(&[f64]) -> C64 + Sync) -> C64 {
    use rayon::prelude::*;
    let rules: Vec<Vec<(f64, f64)>> = axes.iter().map(|a| gl_interval(a.n, a.lo, a.hi)).collect();
    if rules.is_empty() {
        return f(&[]);
    }
    let rest = &rules[1..];
    let total: usize = rest.iter().map(|r| r.len()).product();
    rules[0]
        .par_iter()
        .map(|&(x0, w0)| {
            let mut x = vec![0.0; rules.len()];
            x[0] = x0;
            let mut acc = C64::new(0.0, 0.0);
            let mut comp = C64::new(0.0, 0.0);
            for idx in 0..total {
                let mut r = idx;
                let mut w = w0;
                for (d, rule) in rest.iter().enumerate().rev() {
                    let k = r % rule.len();
                    r /= rule.len();
                    x[d + 1] = rule[k].0;
                    w *= rule[k].1;
                }
                // Kahan summation keeps the reduction order-insensitive.
                let y = f(&x) * w - comp;
                let t = acc + y;
                comp = (t - acc) - y;
                acc = t;
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Tensor rule evaluated at `n` and `ceil(1.5 n)` nodes per axis; returns the
/// finer value and the difference as an error estimate.
pub fn tensor_gl_checked(axes: &[Axis], f: impl Fn(&[f64]) -> C64 + Sync) -> QuadResult {
    let coarse = tensor_gl(axes, &f);
    let fine_axes: Vec<Axis> = axes.iter().map(|a| Axis::new(a.lo, a.hi, (3 * a.n).div_ceil(2))).collect();
    let fine = tensor_gl(&fine_axes, &f);
    let evals = axes.iter().map(|a| a.n).product::<usize>() + fine_axes.iter().map(|a| a.n).product::<usize>();
    QuadResult { value: fine, error: (fine - coarse).norm(), evals }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        for k in 0..20 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((got - want).abs() < 1e-14, "k={} got {}", k, got);
        }
    }

    #[test]
    fn adaptive_gaussian_and_singular_like() {
        let r = adaptive_real_line(|x| C64::new((-x * x).exp(), 0.0), 1e-13, 1e-13).unwrap();
        assert!((r.value.re - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let r = adaptive(|x| C64::new(x.sqrt(), 0.0), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((r.value.re - 2.0 / 3.0).abs() < 1e-11);
        let r = adaptive_half_line(|x| C64::new((-x).exp(), 0.0), 1.0, 1e-13, 1e-13).unwrap();
        assert!((r.value.re - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn tensor_box() {
        let axes = [Axis::new(0.0, 1.0, 8), Axis::new(-1.0, 2.0, 8), Axis::new(0.0, 2.0, 6)];
        let v = tensor_gl(&axes, |x| C64::new(x[0] * x[1] * x[1] + x[2], 0.0));
        // ∫x dx ∫y^2 dy ∫dz + ∫dx ∫dy ∫z dz = 0.5*3*2 + 1*3*2
        assert!((v.re - 9.0).abs() < 1e-12);
    }
}
