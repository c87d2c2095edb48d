//! Spectral estimators: density of states, the semicircle law, and the
//! generating function of ratios of spectral determinants by Monte Carlo and
//! (at N = 1) by deterministic quadrature.

use crate::ensembles::{eigenvalues, sample_h, EnsembleSpec, SymmetryClass};
use crate::mc::{mc_chunks, mc_stats, Rng};
use crate::quadrature::{adaptive_half_line, adaptive_real_line};
use crate::{Error, Result, C64};
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::Serialize;
use std::f64::consts::PI;

/// Energy arguments of the generating function.
#[derive(Clone, Debug, Serialize)]
pub struct SourceMatrix {
    pub cls: SymmetryClass,
    pub alphas: Vec<C64>,
    pub betas: Vec<C64>,
    /// Number of advanced (`Im α < 0`) and retarded (`Im α > 0`) entries.
    pub n_a: usize,
    pub n_r: usize,
}

impl SourceMatrix {
    /// Validates the half-plane conditions: all `Im α < 0` for the
    /// particle-hole and chiral classes; advanced entries first for the
    /// Wigner-Dyson classes.
    pub fn new(cls: SymmetryClass, alphas: Vec<C64>, betas: Vec<C64>) -> Result<SourceMatrix> {
        if alphas.len() != betas.len() || alphas.is_empty() {
            return Err(Error::Invalid("need equally many alphas and betas, at least one".into()));
        }
        if alphas.iter().any(|a| a.im == 0.0) {
            return Err(Error::Invalid("every alpha needs a nonzero imaginary part (pole on the real axis)".into()));
        }
        let n_a = alphas.iter().take_while(|a| a.im < 0.0).count();
        let n_r = alphas.len() - n_a;
        if alphas[n_a..].iter().any(|a| a.im < 0.0) {
            return Err(Error::Invalid("alphas in the lower half-plane must come first".into()));
        }
        if cls.particle_hole() && n_r > 0 {
            return Err(Error::Invalid(format!("class {}: every alpha must satisfy Im alpha < 0", cls)));
        }
        Ok(SourceMatrix { cls, alphas, betas, n_a, n_r })
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    /// Boson-boson and fermion-fermion diagonals of `ω`; particle-hole and
    /// chiral classes carry an extra `σ_z` factor.
    pub fn omega_diagonals(&self) -> (Vec<C64>, Vec<C64>) {
        if self.cls.particle_hole() {
            let b = self.alphas.iter().flat_map(|&a| [a, -a]).collect();
            let f = self.betas.iter().flat_map(|&b| [b, -b]).collect();
            (b, f)
        } else {
            (self.alphas.clone(), self.betas.clone())
        }
    }

    /// Copy with every energy multiplied by `s`.
    pub fn scaled(&self, s: f64) -> SourceMatrix {
        SourceMatrix {
            cls: self.cls,
            alphas: self.alphas.iter().map(|a| a * s).collect(),
            betas: self.betas.iter().map(|b| b * s).collect(),
            n_a: self.n_a,
            n_r: self.n_r,
        }
    }

    /// Ratio `∏_i ∏_λ (λ - β_i)/(λ - α_i)` for a spectrum.
    pub fn ratio(&self, spectrum: &[f64]) -> C64 {
        let mut z = C64::new(1.0, 0.0);
        for (a, b) in self.alphas.iter().zip(&self.betas) {
            for &l in spectrum {
                z *= (l - b) / (l - a);
            }
        }
        z
    }
}

/// Semicircle density `(N/πv) sqrt(1 - (E/2v)²)` on `|E| ≤ 2v`.
pub fn semicircle_density(e: f64, n: usize, v: f64) -> f64 {
    let x = e / (2.0 * v);
    if x.abs() >= 1.0 {
        0.0
    } else {
        n as f64 / (PI * v) * (1.0 - x * x).sqrt()
    }
}

/// Integral of the semicircle density over `[lo, hi]`.
pub fn semicircle_mass(lo: f64, hi: f64, n: usize, v: f64) -> f64 {
    let cdf = |e: f64| {
        let x = (e / (2.0 * v)).clamp(-1.0, 1.0);
        // ∫ (2/π) sqrt(1 - x²) dx = (x sqrt(1-x²) + asin x)/π
        (x * (1.0 - x * x).sqrt() + x.asin()) / PI
    };
    n as f64 * (cdf(hi) - cdf(lo))
}

/// How spectra are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpectralMethod {
    /// Dense sample of `H` followed by a full eigensolve.
    Dense,
    /// Tridiagonal (class A) or bidiagonal (class C) models with the same
    /// eigenvalue law; other classes fall back to `Dense`.
    Fast,
}

impl SpectralMethod {
    pub fn auto(cls: SymmetryClass) -> SpectralMethod {
        match cls {
            SymmetryClass::A | SymmetryClass::C => SpectralMethod::Fast,
            _ => SpectralMethod::Dense,
        }
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix (implicit QL); `off[i]`
/// couples rows `i` and `i + 1`.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l || iter > 100 {
                break;
            }
            iter += 1;
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.total_cmp(b));
    d
}

/// Symmetric tridiagonal model `(diag, off)` of the class A or class C
/// spectrum. For class A the matrix is the Hamiltonian itself; for class C
/// its eigenvalues are the squares `λ²` of the positive eigenvalues.
pub fn tridiagonal_model(spec: &EnsembleSpec, rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = spec.n;
    let nf = n as f64;
    let v = spec.v;
    match spec.cls {
        SymmetryClass::A => {
            let s = v / nf.sqrt();
            let diag: Vec<f64> = (0..n).map(|_| s * { let z: f64 = StandardNormal.sample(rng); z }).collect();
            let off: Vec<f64> = (1..n)
                .map(|i| {
                    let k = (n - i) as f64;
                    s * (ChiSquared::new(2.0 * k).unwrap().sample(rng) / 2.0).sqrt()
                })
                .collect();
            Ok((diag, off))
        }
        SymmetryClass::C => {
            // Lower bidiagonal B with diagonal χ_{2N-2i+3}, subdiagonal χ_{2(N-i)};
            // λ² are the eigenvalues of (v²/2N) B Bᵀ.
            let dg: Vec<f64> = (1..=n)
                .map(|i| ChiSquared::new((2 * n + 3 - 2 * i) as f64).unwrap().sample(rng).sqrt())
                .collect();
            let sd: Vec<f64> = (1..n).map(|i| ChiSquared::new((2 * (n - i)) as f64).unwrap().sample(rng).sqrt()).collect();
            let s = v * v / (2.0 * nf);
            let diag = (0..n)
                .map(|i| s * (dg[i] * dg[i] + if i > 0 { sd[i - 1] * sd[i - 1] } else { 0.0 }))
                .collect();
            let off = (0..n.saturating_sub(1)).map(|i| s * dg[i] * sd[i]).collect();
            Ok((diag, off))
        }
        c => Err(Error::Unsupported(format!("no tridiagonal model for class {}", c))),
    }
}

/// `det(T - β) / det(T - α)` for symmetric tridiagonal `T` via the pivot
/// recurrence of the `LDLᵀ` factorization.
pub fn tridiagonal_det_ratio(diag: &[f64], off: &[f64], alpha: C64, beta: C64) -> C64 {
    let mut z = C64::new(1.0, 0.0);
    let mut pa = C64::new(1.0, 0.0);
    let mut pb = C64::new(1.0, 0.0);
    for k in 0..diag.len() {
        let b2 = if k > 0 { off[k - 1] * off[k - 1] } else { 0.0 };
        pa = if k > 0 { (diag[k] - alpha) - b2 / pa } else { diag[k] - alpha };
        pb = if k > 0 { (diag[k] - beta) - b2 / pb } else { diag[k] - beta };
        z *= pb / pa;
    }
    z
}

/// One sampled spectrum, ascending.
pub fn sample_spectrum(spec: &EnsembleSpec, method: SpectralMethod, rng: &mut Rng) -> Result<Vec<f64>> {
    if method == SpectralMethod::Fast && matches!(spec.cls, SymmetryClass::A | SymmetryClass::C) {
        let (d, o) = tridiagonal_model(spec, rng)?;
        let ev = tridiagonal_eigenvalues(&d, &o);
        if spec.cls == SymmetryClass::A {
            return Ok(ev);
        }
        let pos: Vec<f64> = ev.iter().map(|x| x.max(0.0).sqrt()).collect();
        let mut all: Vec<f64> = pos.iter().map(|x| -x).chain(pos.iter().copied()).collect();
        all.sort_by(|a, b| a.total_cmp(b));
        return Ok(all);
    }
    eigenvalues(&sample_h(spec, rng))
}

/// Histogram of eigenvalues normalized to a density per matrix.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    pub nsamples: usize,
    pub class: String,
    pub n: usize,
    pub v: f64,
    pub seed: u64,
}

impl SpectralHistogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// CSV with columns `bin_lo,bin_hi,density,stderr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,density,stderr\n");
        for i in 0..self.counts.len() {
            s += &format!("{},{},{},{}\n", self.edges[i], self.edges[i + 1], self.density[i], self.stderr[i]);
        }
        s
    }

    /// Largest relative deviation `|ρ_hist / ρ_sc - 1|` over bins inside
    /// `|E| ≤ window`, comparing against the bin-averaged semicircle.
    pub fn semicircle_deviation(&self, window: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.counts.len() {
            let (lo, hi) = (self.edges[i], self.edges[i + 1]);
            if lo < -window || hi > window {
                continue;
            }
            let exact = semicircle_mass(lo, hi, self.n, self.v) / (hi - lo);
            worst = worst.max((self.density[i] / exact - 1.0).abs());
        }
        worst
    }
}

/// Equal-width binning of `[lo, hi]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

/// Density of states estimate from `nsamples` spectra.
pub fn dos_estimate(spec: &EnsembleSpec, nsamples: usize, bins: Bins, seed: u64, method: SpectralMethod) -> Result<SpectralHistogram> {
    if nsamples < 100 {
        return Err(Error::Invalid("dos_estimate needs at least 100 samples".into()));
    }
    if bins.n == 0 || !(bins.hi > bins.lo) {
        return Err(Error::Invalid("bins need n >= 1 and hi > lo".into()));
    }
    let w = (bins.hi - bins.lo) / bins.n as f64;
    let parts = mc_chunks(seed, nsamples, |rng, len| -> Result<(Vec<u64>, Vec<f64>)> {
        let mut tot = vec![0u64; bins.n];
        let mut sq = vec![0.0f64; bins.n];
        let mut cur = vec![0u64; bins.n];
        for _ in 0..len {
            cur.iter_mut().for_each(|c| *c = 0);
            for e in sample_spectrum(spec, method, rng)? {
                let k = ((e - bins.lo) / w).floor();
                if k >= 0.0 && (k as usize) < bins.n {
                    cur[k as usize] += 1;
                }
            }
            for k in 0..bins.n {
                tot[k] += cur[k];
                sq[k] += (cur[k] * cur[k]) as f64;
            }
        }
        Ok((tot, sq))
    });
    let mut counts = vec![0u64; bins.n];
    let mut sq = vec![0.0f64; bins.n];
    for p in parts {
        let (t, s) = p?;
        for k in 0..bins.n {
            counts[k] += t[k];
            sq[k] += s[k];
        }
    }
    let m = nsamples as f64;
    let density = counts.iter().map(|&c| c as f64 / (m * w)).collect();
    let stderr = (0..bins.n)
        .map(|k| {
            let mean = counts[k] as f64 / m;
            let var = ((sq[k] / m - mean * mean) * m / (m - 1.0)).max(0.0);
            (var / m).sqrt() / w
        })
        .collect();
    Ok(SpectralHistogram {
        edges: (0..=bins.n).map(|k| bins.lo + k as f64 * w).collect(),
        counts,
        density,
        stderr,
        nsamples,
        class: spec.cls.label().into(),
        n: spec.n,
        v: spec.v,
        seed,
    })
}

/// Monte Carlo estimate of `Z_n = < ∏_i Det(H - β_i)/Det(H - α_i) >`.
pub fn z_gen_mc(spec: &EnsembleSpec, src: &SourceMatrix, nsamples: usize, seed: u64, method: SpectralMethod) -> Result<(C64, f64)> {
    if nsamples < 2 {
        return Err(Error::Invalid("nsamples >= 2 required".into()));
    }
    if src.cls != spec.cls {
        return Err(Error::Invalid("source matrix built for a different class".into()));
    }
    let fast = method == SpectralMethod::Fast && matches!(spec.cls, SymmetryClass::A | SymmetryClass::C);
    let st = mc_stats(seed, nsamples, |rng| {
        if fast {
            let (d, o) = tridiagonal_model(spec, rng).expect("fast model");
            let mut z = C64::new(1.0, 0.0);
            for (a, b) in src.alphas.iter().zip(&src.betas) {
                if spec.cls == SymmetryClass::A {
                    z *= tridiagonal_det_ratio(&d, &o, *a, *b);
                } else {
                    // (λ-β)(-λ-β)/((λ-α)(-λ-α)) = (λ²-β²)/(λ²-α²)
                    z *= tridiagonal_det_ratio(&d, &o, a * a, b * b);
                }
            }
            z
        } else {
            let ev = eigenvalues(&sample_h(spec, rng)).expect("sampled H is self-adjoint");
            src.ratio(&ev)
        }
    });
    Ok((st.mean(), st.stderr()))
}

/// Deterministic `Z_n` at `N = 1` for classes A and C.
///
/// Class A integrates the scalar Gaussian; class C integrates the radial
/// variable `r = |λ|` of `(a, Re b, Im b)`, whose law is `χ₃` with scale `v/√2`.
pub fn z_gen_quadrature(spec: &EnsembleSpec, src: &SourceMatrix) -> Result<(C64, f64)> {
    if spec.n != 1 {
        return Err(Error::Unsupported("z_gen_quadrature requires N = 1".into()));
    }
    if src.alphas == src.betas {
        return Ok((C64::new(1.0, 0.0), 0.0));
    }
    let v = spec.v;
    let r = match spec.cls {
        SymmetryClass::A => {
            let norm = 1.0 / ((2.0 * PI).sqrt() * v);
            adaptive_real_line(|h| src.ratio(&[h]) * (norm * (-h * h / (2.0 * v * v)).exp()), 1e-12, 1e-12)?
        }
        SymmetryClass::C => {
            let norm = 4.0 / (PI.sqrt() * v * v * v);
            adaptive_half_line(
                |r| {
                    let mut z = C64::new(norm * r * r * (-r * r / (v * v)).exp(), 0.0);
                    for (a, b) in src.alphas.iter().zip(&src.betas) {
                        z *= (r * r - b * b) / (r * r - a * a);
                    }
                    z
                },
                0.0,
                1e-12,
                1e-12,
            )?
        }
        c => return Err(Error::Unsupported(format!("z_gen_quadrature supports classes A and C, not {}", c))),
    };
    if r.error > 1e-8 {
        return Err(Error::Quadrature { achieved: r.error, partial: format!("{}", r.value) });
    }
    Ok((r.value, r.error))
}

/// Large-N limit of the class C generating function at `n = 1` in units of
/// the level spacing `πv/N`.
pub fn class_c_z_infinity(alpha_hat: C64, beta_hat: C64) -> C64 {
    let i = C64::new(0.0, 1.0);
    let t1 = (alpha_hat + beta_hat) * (-2.0 * PI * i * (alpha_hat - beta_hat)).exp();
    let t2 = (alpha_hat - beta_hat) * (-2.0 * PI * i * (alpha_hat + beta_hat)).exp();
    (t1 - t2) / (2.0 * beta_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::substream;

    #[test]
    fn semicircle_values() {
        assert!((semicircle_density(0.0, 10, 2.0) - 10.0 / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(semicircle_density(4.0, 10, 2.0), 0.0);
        assert!((semicircle_density(1.0, 3, 1.0) - 3.0 / PI * 3f64.sqrt() / 2.0).abs() < 1e-14);
        assert!((semicircle_mass(-5.0, 5.0, 7, 1.3) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn ql_matches_dense() {
        let d = [1.0, -0.5, 2.0, 0.3, 0.0];
        let o = [0.7, -1.1, 0.2, 0.9];
        let m = nalgebra::DMatrix::from_fn(5, 5, |i, j| {
            if i == j {
                d[i]
            } else if i + 1 == j {
                o[i]
            } else if j + 1 == i {
                o[j]
            } else {
                0.0
            }
        });
        let mut want: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        want.sort_by(|a, b| a.total_cmp(b));
        let got = tridiagonal_eigenvalues(&d, &o);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        let (a, b) = (C64::new(0.2, -0.7), C64::new(-0.4, 0.1));
        let direct: C64 = want.iter().map(|&l| (l - b) / (l - a)).product();
        assert!((tridiagonal_det_ratio(&d, &o, a, b) - direct).norm() < 1e-12);
    }

    #[test]
    fn source_validation() {
        let c = |re, im| C64::new(re, im);
        assert!(SourceMatrix::new(SymmetryClass::C, vec![c(0.0, 1.0)], vec![c(0.0, 0.0)]).is_err());
        assert!(SourceMatrix::new(SymmetryClass::C, vec![c(1.0, 0.0)], vec![c(0.0, 0.0)]).is_err());
        let s = SourceMatrix::new(SymmetryClass::A, vec![c(0.0, -1.0), c(0.0, 1.0)], vec![c(0.0, 0.0); 2]).unwrap();
        assert_eq!((s.n_a, s.n_r), (1, 1));
        assert!(SourceMatrix::new(SymmetryClass::A, vec![c(0.0, 1.0), c(0.0, -1.0)], vec![c(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn fast_and_dense_agree_class_c() {
        let spec = EnsembleSpec::new(SymmetryClass::C, 3, 1.0).unwrap();
        let src = SourceMatrix::new(SymmetryClass::C, vec![C64::new(0.1, -0.4)], vec![C64::new(0.3, 0.0)]).unwrap();
        let (zf, sf) = z_gen_mc(&spec, &src, 20_000, 1, SpectralMethod::Fast).unwrap();
        let (zd, sd) = z_gen_mc(&spec, &src, 20_000, 2, SpectralMethod::Dense).unwrap();
        assert!((zf - zd).norm() < 4.0 * (sf * sf + sd * sd).sqrt(), "{} {}", zf, zd);
        let mut rng = substream(5, 0);
        let ev = sample_spectrum(&spec, SpectralMethod::Fast, &mut rng).unwrap();
        assert_eq!(ev.len(), 6);
        for i in 0..6 {
            assert!((ev[i] + ev[5 - i]).abs() < 1e-12);
        }
    }
}
