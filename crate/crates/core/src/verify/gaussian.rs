//! Gaussian superintegral identity
//! `∫ D(ψ,ψ̃) exp(i Tr A ψψ̃ - i STr B ψ̃ψ) = SDet(A⊗1 - 1⊗B)^{-c}`.
//!
//! The fermionic part is expanded symbolically; the bosonic part is a
//! tensor Gauss-Legendre quadrature over the real integration domain.

use super::{Method, VerificationReport};
use crate::ensembles::{kron, pauli, CMat};
use crate::quadrature::gl_interval;
use crate::superalg::{s_det, GrassmannElement as GE, Pool, SuperMatrix};
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

type GMat = Vec<Vec<GE>>;

/// Form of the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaussianKind {
    /// `c = 1`: `V = C^N`, `ψ̃_B = ψ_B^†`, independent `ψ_F`, `ψ̃_F`.
    Unitary,
    /// `c = 1/2`: `V = C^2 ⊗ C^N`, `ψ̃ = -γ ψ^T C^{-1}` with `C = iσ_y ⊗ 1`,
    /// `γ_B = σ_x`, `γ_F = iσ_y`, domain `ψ̃_B = (σ_z ⊗ 1) ψ_B^†`.
    ParticleHole,
}

impl GaussianKind {
    pub fn c(&self) -> f64 {
        match self {
            GaussianKind::Unitary => 1.0,
            GaussianKind::ParticleHole => 0.5,
        }
    }

    pub fn from_c(c: f64) -> Result<GaussianKind> {
        if c == 1.0 {
            Ok(GaussianKind::Unitary)
        } else if c == 0.5 {
            Ok(GaussianKind::ParticleHole)
        } else {
            Err(Error::Unsupported(format!("c = {} (only c = 1 and c = 1/2 are verified)", c)))
        }
    }
}

/// Quadrature settings: Gauss-Legendre nodes per whitened real coordinate on
/// `[-radius, radius]`; the error estimate comes from a rule with 1.5x nodes.
#[derive(Clone, Copy, Debug)]
pub struct GaussOptions {
    pub nodes: usize,
    pub radius: f64,
    pub rel_tol: f64,
}

impl Default for GaussOptions {
    fn default() -> Self {
        GaussOptions { nodes: 36, radius: 6.5, rel_tol: 1e-5 }
    }
}

fn cz(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn gadd(a: &GMat, b: &GMat) -> GMat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

/// `L X R` for numeric `L`, `R`.
fn sandwich(pool: Pool, l: &CMat, x: &GMat, r: &CMat) -> GMat {
    let (p, q) = (l.nrows(), r.ncols());
    let mut out = vec![vec![pool.zero(); q]; p];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, o) in row.iter_mut().enumerate() {
            let mut acc = pool.zero();
            for (k1, xr) in x.iter().enumerate() {
                for (k2, e) in xr.iter().enumerate() {
                    let c = l[(i, k1)] * r[(k2, j)];
                    if c != cz(0.0) && !e.is_zero() {
                        acc = &acc + &e.scale(c);
                    }
                }
            }
            *o = acc;
        }
    }
    out
}

fn transpose(x: &GMat) -> GMat {
    if x.is_empty() {
        return vec![];
    }
    (0..x[0].len()).map(|j| x.iter().map(|r| r[j].clone()).collect()).collect()
}

/// `i Tr_V(A ψψ̃) - i STr_W(B ψ̃ψ)`.
fn energy(pool: Pool, a: &CMat, b: &SuperMatrix, psi: &GMat, psit: &GMat) -> GE {
    let dv = psi.len();
    let kb = b.rows().0;
    let kw = b.nrows();
    let i = C64::new(0.0, 1.0);
    let mut t1 = pool.zero();
    for u in 0..dv {
        for v in 0..dv {
            if a[(v, u)] == cz(0.0) {
                continue;
            }
            let mut s = pool.zero();
            for w in 0..kw {
                s = &s + &(&psi[u][w] * &psit[w][v]);
            }
            t1 = &t1 + &s.scale(a[(v, u)]);
        }
    }
    let mut x = vec![vec![pool.zero(); kw]; kw];
    for (w1, row) in x.iter_mut().enumerate() {
        for (w2, e) in row.iter_mut().enumerate() {
            for u in 0..dv {
                *e = &*e + &(&psit[w1][u] * &psi[u][w2]);
            }
        }
    }
    let mut t2 = pool.zero();
    for w in 0..kw {
        let mut s = pool.zero();
        for w2 in 0..kw {
            let bw = b.get(w, w2);
            if !bw.is_zero() {
                s = &s + &(bw * &x[w2][w]);
            }
        }
        t2 = if w < kb { &t2 + &s } else { &t2 - &s };
    }
    &t1.scale(i) - &t2.scale(i)
}

/// Integration variables, fermion fields and the map between real
/// coordinates and the formal variables `w = (z, z̄)`.
struct Layout {
    ext: Pool,
    pool: Pool,
    psi_gens: Vec<usize>,
    psi_f: GMat,
    psit_f: GMat,
    /// `(∂ψ_B/∂w_j, ∂ψ̃_B/∂w_j)`.
    vars: Vec<(CMat, CMat)>,
    /// `w = C x` with `x` the real coordinates.
    cmap: CMat,
}

fn layout(kind: GaussianKind, dv: usize, kb: usize, kf: usize, ext: Pool) -> Result<Layout> {
    let n_ext = ext.size();
    let n_psi = match kind {
        GaussianKind::Unitary => 2 * dv * kf,
        GaussianKind::ParticleHole => dv * kf,
    };
    let pool = ext.extended(n_psi);
    let psi_gens: Vec<usize> = (n_ext..n_ext + n_psi).collect();
    let kw = kb + kf;
    let mut psi_f = vec![vec![pool.zero(); kw]; dv];
    let mut g = n_ext;
    for row in psi_f.iter_mut() {
        for e in row.iter_mut().skip(kb) {
            *e = pool.gen(g);
            g += 1;
        }
    }
    let mut psit_f = vec![vec![pool.zero(); dv]; kw];
    let mut vars = vec![];
    let m;
    match kind {
        GaussianKind::Unitary => {
            for row in psit_f.iter_mut().skip(kb) {
                for e in row.iter_mut() {
                    *e = pool.gen(g);
                    g += 1;
                }
            }
            m = dv * kb;
            let unit = |u: usize, w: usize, r: usize, c: usize| {
                let mut x = CMat::zeros(r, c);
                x[(u, w)] = cz(1.0);
                x
            };
            for u in 0..dv {
                for w in 0..kb {
                    vars.push((unit(u, w, dv, kb), CMat::zeros(kb, dv)));
                }
            }
            for u in 0..dv {
                for w in 0..kb {
                    vars.push((CMat::zeros(dv, kb), unit(w, u, kb, dv)));
                }
            }
        }
        GaussianKind::ParticleHole => {
            if !dv.is_multiple_of(2) || !kb.is_multiple_of(2) || !kf.is_multiple_of(2) {
                return Err(Error::DimMismatch("c = 1/2 needs even-dimensional V, W_B, W_F".into()));
            }
            let (nn, n) = (dv / 2, kb / 2);
            let cinv = kron(&pauli('j'), &CMat::identity(nn, nn)).try_inverse().unwrap();
            let gb = kron(&pauli('x'), &CMat::identity(n, n));
            let gf = kron(&pauli('j'), &CMat::identity(kf / 2, kf / 2));
            // ψ̃_F = -γ_F ψ_F^T C^{-1}
            let fcols: GMat = psi_f.iter().map(|r| r[kb..].to_vec()).collect();
            let t = sandwich(pool, &gf.map(|z| -z), &transpose(&fcols), &cinv);
            for (w, row) in t.into_iter().enumerate() {
                psit_f[kb + w] = row;
            }
            // ψ_B = [[a, b], [b̄, -ā]] with a, b complex N×n.
            m = 2 * nn * n;
            let mut holo = vec![];
            let mut anti = vec![];
            for blk in 0..2 {
                for i in 0..nn {
                    for j in 0..n {
                        let mut p = CMat::zeros(dv, kb);
                        let mut q = CMat::zeros(dv, kb);
                        if blk == 0 {
                            p[(i, j)] = cz(1.0);
                            q[(nn + i, n + j)] = cz(-1.0);
                        } else {
                            p[(i, n + j)] = cz(1.0);
                            q[(nn + i, j)] = cz(1.0);
                        }
                        holo.push(p);
                        anti.push(q);
                    }
                }
            }
            for p in holo.into_iter().chain(anti) {
                // ψ̃_B = -γ_B ψ_B^T C^{-1}
                let pt = -(&gb * p.transpose() * &cinv);
                vars.push((p, pt));
            }
        }
    }
    let mut cmap = CMat::zeros(2 * m, 2 * m);
    for j in 0..m {
        cmap[(j, 2 * j)] = cz(1.0);
        cmap[(j, 2 * j + 1)] = C64::new(0.0, 1.0);
        cmap[(m + j, 2 * j)] = cz(1.0);
        cmap[(m + j, 2 * j + 1)] = C64::new(0.0, -1.0);
    }
    Ok(Layout { ext, pool, psi_gens, psi_f, psit_f, vars, cmap })
}

/// Polynomial in `w` with Grassmann coefficients over the external pool,
/// stored as coefficient vectors indexed by external mask.
type Poly = Vec<(Vec<u8>, Vec<C64>)>;

/// Symbolic part: `E = E_B(w) + Σ_j w_j M_j + E_F`; returns the real
/// quadratic form `S` with `E_B = -x^T S x` and the polynomial
/// `Berezin[exp(E_F) exp(Σ w_j M_j)]`.
fn expand(lay: &Layout, a: &CMat, b: &SuperMatrix) -> Result<(CMat, Poly)> {
    let pool = lay.pool;
    let dv = lay.psi_f.len();
    let kw = b.nrows();
    let kb = b.rows().0;
    let zero_f: GMat = vec![vec![pool.zero(); kw]; dv];
    let zero_t: GMat = vec![vec![pool.zero(); dv]; kw];
    let pad = |p: &CMat| -> GMat {
        let mut g = zero_f.clone();
        for u in 0..dv {
            for w in 0..kb {
                g[u][w] = pool.scalar(p[(u, w)]);
            }
        }
        g
    };
    let padt = |p: &CMat| -> GMat {
        let mut g = zero_t.clone();
        for w in 0..kb {
            for u in 0..dv {
                g[w][u] = pool.scalar(p[(w, u)]);
            }
        }
        g
    };
    let e_f = energy(pool, a, b, &lay.psi_f, &lay.psit_f);
    if e_f.body() != cz(0.0) {
        return Err(Error::Invalid("fermionic exponent has a body".into()));
    }
    let nv = lay.vars.len();
    let pads: Vec<(GMat, GMat)> = lay.vars.iter().map(|(p, q)| (pad(p), padt(q))).collect();
    let mut mix = vec![];
    let mut kdiag = vec![cz(0.0); nv];
    for (j, (p, q)) in pads.iter().enumerate() {
        let pure = energy(pool, a, b, p, q);
        let full = energy(pool, a, b, &gadd(p, &lay.psi_f), &gadd(q, &lay.psit_f));
        mix.push(&(&full - &pure) - &e_f);
        kdiag[j] = pure.body();
    }
    let mut k = CMat::zeros(nv, nv);
    for j in 0..nv {
        k[(j, j)] = kdiag[j];
        for l in 0..j {
            let pq = (gadd(&pads[j].0, &pads[l].0), gadd(&pads[j].1, &pads[l].1));
            let both = energy(pool, a, b, &pq.0, &pq.1).body();
            let off = (both - kdiag[j] - kdiag[l]) * 0.5;
            k[(j, l)] = off;
            k[(l, j)] = off;
        }
    }
    let s = -(lay.cmap.transpose() * &k * &lay.cmap);
    let s = (&s + s.transpose()).map(|z| z * 0.5);

    let mut terms: Vec<(Vec<u8>, GE)> = vec![(vec![0; nv], e_f.exp())];
    for (j, mj) in mix.iter().enumerate() {
        let mut next = vec![];
        for (p, g) in terms {
            let mut cur = g;
            let mut pw = 0u8;
            while !cur.is_zero() {
                let mut q = p.clone();
                q[j] = pw;
                next.push((q, cur.clone()));
                pw += 1;
                cur = (&cur * mj).scale_re(1.0 / pw as f64);
            }
        }
        terms = next;
    }
    let n_masks = 1usize << lay.ext.size();
    let mut poly = Poly::new();
    for (p, g) in terms {
        let r = g.berezin(&lay.psi_gens)?;
        let mut coef = vec![cz(0.0); n_masks];
        for &(mask, c) in r.terms() {
            coef[mask as usize] = c;
        }
        if coef.iter().any(|c| c.norm() > 0.0) {
            poly.push((p, coef));
        }
    }
    Ok((s, poly))
}

/// `∫ d^{2m}x exp(-x^T S x) P(Cx)` by tensor Gauss-Legendre in whitened
/// coordinates; returns the finer value and the coarse/fine difference.
fn quad_poly(s: &CMat, cmap: &CMat, poly: &Poly, n_masks: usize, opts: &GaussOptions) -> Result<(Vec<C64>, f64, usize)> {
    let d = s.nrows();
    let re = DMatrix::from_fn(d, d, |i, j| s[(i, j)].re);
    let eig = re.clone().symmetric_eigen();
    let kappa = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if kappa <= 1e-12 * re.norm().max(1.0) {
        return Err(Error::Divergence(format!(
            "bosonic Gaussian form is not damped (smallest eigenvalue {:.3e}); convergence requires Im alpha < 0 for the boson-boson entries of B relative to A",
            kappa
        )));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let jac: f64 = eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).product();
    let wc = w.map(cz);
    let cw = cmap * &wc;
    let sw = wc.transpose() * s * &wc;
    let maxp = poly.iter().flat_map(|(p, _)| p.iter().copied()).max().unwrap_or(0) as usize;
    let nv = cmap.nrows();
    let run = |n: usize| -> Vec<C64> {
        let rule = gl_interval(n, -opts.radius, opts.radius);
        let total = n.pow(d as u32);
        let chunks: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|first| {
                let mut acc = vec![cz(0.0); n_masks];
                let mut y = vec![0.0; d];
                let mut pw = vec![vec![cz(1.0); maxp + 1]; nv];
                for idx in 0..total / n {
                    let mut r = idx;
                    let mut wt = rule[first].1;
                    y[0] = rule[first].0;
                    for slot in y.iter_mut().skip(1) {
                        let k = r % n;
                        r /= n;
                        *slot = rule[k].0;
                        wt *= rule[k].1;
                    }
                    let mut e = cz(0.0);
                    for i in 0..d {
                        for j in 0..d {
                            e -= sw[(i, j)] * (y[i] * y[j]);
                        }
                    }
                    let f = e.exp() * wt;
                    for v in 0..nv {
                        let mut wv = cz(0.0);
                        for (i, yi) in y.iter().enumerate() {
                            wv += cw[(v, i)] * *yi;
                        }
                        for p in 1..=maxp {
                            pw[v][p] = pw[v][p - 1] * wv;
                        }
                    }
                    for (p, coef) in poly {
                        let mut mono = f;
                        for (v, &k) in p.iter().enumerate() {
                            if k > 0 {
                                mono *= pw[v][k as usize];
                            }
                        }
                        for (a, c) in acc.iter_mut().zip(coef) {
                            *a += mono * c;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![cz(0.0); n_masks];
        for c in chunks {
            for (o, x) in out.iter_mut().zip(c) {
                *o += x * jac;
            }
        }
        out
    };
    let coarse = run(opts.nodes);
    let fine_n = (3 * opts.nodes).div_ceil(2);
    let fine = run(fine_n);
    let err = coarse.iter().zip(&fine).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok((fine, err, opts.nodes.pow(d as u32) + fine_n.pow(d as u32)))
}

/// Exact `∫ d^{2m}x exp(-x^T S x)` for real positive definite `S`.
fn gaussian_volume(s: &CMat) -> Result<f64> {
    let d = s.nrows();
    if s.iter().any(|z| z.im.abs() > 1e-12) {
        return Err(Error::Invalid("reference form is not real".into()));
    }
    let re = DMatrix::from_fn(d, d, |i, j| s[(i, j)].re);
    let det = re.determinant();
    if det <= 0.0 {
        return Err(Error::Invalid("reference form is not positive".into()));
    }
    Ok(std::f64::consts::PI.powi(d as i32 / 2) / det.sqrt())
}

/// Reference Gaussian that fixes the normalization of `D(ψ,ψ̃)`:
/// `exp(-Tr ψψ̃)` for `c = 1`; `exp(-STr Σ_z ψ̃ψ)` for `c = 1/2`, where the
/// former has no bosonic damping on the `c = 1/2` domain.
fn reference(kind: GaussianKind, dv: usize, kb: usize, kf: usize, ext: Pool) -> (CMat, SuperMatrix) {
    let i = C64::new(0.0, 1.0);
    match kind {
        GaussianKind::Unitary => (CMat::identity(dv, dv).map(|z| z * i), SuperMatrix::zeros(ext, (kb, kf), (kb, kf))),
        GaussianKind::ParticleHole => {
            let sz = |k: usize| kron(&pauli('z'), &CMat::identity(k / 2, k / 2));
            let d0: Vec<C64> = sz(kb).diagonal().iter().map(|z| -i * z).collect();
            let d1: Vec<C64> = sz(kf).diagonal().iter().map(|z| -i * z).collect();
            (CMat::zeros(dv, dv), SuperMatrix::diag(ext, &d0, &d1))
        }
    }
}

/// Left-hand side for one connected block of `V`.
fn lhs_block(kind: GaussianKind, a: &CMat, b: &SuperMatrix, opts: &GaussOptions) -> Result<(GE, f64, usize, usize, usize)> {
    let ext = b.pool();
    let (kb, kf) = b.rows();
    let dv = a.nrows();
    let lay = layout(kind, dv, kb, kf, ext)?;
    let n_masks = 1usize << ext.size();
    let (ra, rb) = reference(kind, dv, kb, kf, ext);
    let (s_ref, p_ref) = expand(&lay, &ra, &rb)?;
    if p_ref.len() != 1 || p_ref[0].0.iter().any(|&k| k != 0) {
        return Err(Error::Invalid("reference Gaussian couples bosons and fermions".into()));
    }
    let norm = gaussian_volume(&s_ref)? * p_ref[0].1[0];
    let (s, poly) = expand(&lay, a, b)?;
    let (vals, err, evals) = quad_poly(&s, &lay.cmap, &poly, n_masks, opts)?;
    let terms = vals.iter().enumerate().map(|(m, v)| (m as u64, v / norm)).collect();
    Ok((GE::from_terms(ext, terms), err / norm.norm(), evals, s.nrows(), lay.psi_gens.len()))
}

/// Connected blocks of `V` under `A` (for `c = 1/2` the rows `i` and `N + i`
/// always belong together); returns index lists into `V`.
fn blocks(kind: GaussianKind, a: &CMat) -> Vec<Vec<usize>> {
    let dv = a.nrows();
    let (units, rows_of): (usize, Box<dyn Fn(usize) -> Vec<usize>>) = match kind {
        GaussianKind::Unitary => (dv, Box::new(|u| vec![u])),
        GaussianKind::ParticleHole => (dv / 2, Box::new(move |i| vec![i, dv / 2 + i])),
    };
    let mut label: Vec<usize> = (0..units).collect();
    fn find(l: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while l[r] != r {
            r = l[r];
        }
        l[x] = r;
        r
    }
    for i in 0..units {
        for j in 0..units {
            let coupled = rows_of(i).iter().any(|&u| rows_of(j).iter().any(|&v| a[(u, v)].norm() > 0.0));
            if coupled {
                let (ri, rj) = (find(&mut label, i), find(&mut label, j));
                label[ri] = rj;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![];
    let mut keys: Vec<usize> = vec![];
    for i in 0..units {
        let r = find(&mut label, i);
        match keys.iter().position(|&k| k == r) {
            Some(g) => groups[g].push(i),
            None => {
                keys.push(r);
                groups.push(vec![i]);
            }
        }
    }
    groups
        .into_iter()
        .map(|g| match kind {
            GaussianKind::Unitary => g,
            GaussianKind::ParticleHole => g.iter().copied().chain(g.iter().map(|i| dv / 2 + i)).collect(),
        })
        .collect()
}

/// `SDet_{V⊗W}(A ⊗ 1 - 1 ⊗ B)`.
pub fn tensor_sdet(a: &CMat, b: &SuperMatrix) -> Result<GE> {
    let pool = b.pool();
    let (kb, kf) = b.rows();
    let dv = a.nrows();
    let kw = kb + kf;
    let idx = |u: usize, w: usize| if w < kb { u * kb + w } else { dv * kb + u * kf + (w - kb) };
    let d = dv * kw;
    let mut e = vec![pool.zero(); d * d];
    for u in 0..dv {
        for w in 0..kw {
            for u2 in 0..dv {
                for w2 in 0..kw {
                    let mut x = pool.zero();
                    if w == w2 && a[(u, u2)] != cz(0.0) {
                        x = pool.scalar(a[(u, u2)]);
                    }
                    if u == u2 {
                        x = &x - b.get(w, w2);
                    }
                    e[idx(u, w) * d + idx(u2, w2)] = x;
                }
            }
        }
    }
    s_det(&SuperMatrix::new(pool, (dv * kb, dv * kf), (dv * kb, dv * kf), e)?)
}

/// Right-hand side `SDet^{-c}`; for `c = 1/2` the branch is the one whose body
/// equals `∏_λ (λ - y)/(λ - z)` over the eigenvalues `λ` of `A`, with `±z`
/// (`±y`) the boson-boson (fermion-fermion) eigenvalues of the body of `B`.
pub fn gaussian_rhs(kind: GaussianKind, a: &CMat, b: &SuperMatrix) -> Result<GE> {
    let sd = tensor_sdet(a, b)?;
    match kind {
        GaussianKind::Unitary => sd.inv(),
        GaussianKind::ParticleHole => {
            let r = sd.powc(cz(-0.5))?;
            let body = b.body();
            let (kb, kf) = b.rows();
            if kb != 2 || kf != 2 {
                return Err(Error::Unsupported("c = 1/2 branch selection needs n = 1".into()));
            }
            let z = body.view((0, 0), (2, 2)).into_owned().eigenvalues().ok_or(Error::Invalid("B_BB eigenvalues".into()))?;
            let bff = body.view((2, 2), (2, 2)).into_owned();
            let y = (-(bff.determinant())).sqrt();
            let lam = a.clone().schur().eigenvalues().ok_or(Error::Invalid("A eigenvalues".into()))?;
            let reference: C64 = lam.iter().map(|l| (l - y) / (l - z[0])).product();
            let rb = r.body();
            Ok(if (rb - reference).norm() <= (rb + reference).norm() { r } else { r.scale_re(-1.0) })
        }
    }
}

/// Residual of `B = -γ B^{st} γ^{-1}` and `A = -C A^T C^{-1}` for `c = 1/2`.
pub fn particle_hole_residual(a: &CMat, b: &SuperMatrix) -> f64 {
    let (kb, kf) = b.rows();
    let dv = a.nrows();
    let cm = kron(&pauli('j'), &CMat::identity(dv / 2, dv / 2));
    let ra = (a + &cm * a.transpose() * cm.clone().try_inverse().unwrap()).norm();
    let g = crate::ensembles::block_diag(&kron(&pauli('x'), &CMat::identity(kb / 2, kb / 2)), &kron(&pauli('j'), &CMat::identity(kf / 2, kf / 2)));
    let gi = g.clone().try_inverse().unwrap();
    let mut masks: Vec<u64> = b.entries().iter().flat_map(|e| e.terms().iter().map(|t| t.0)).collect();
    masks.sort_unstable();
    masks.dedup();
    let d = kb + kf;
    let mut rb: f64 = 0.0;
    for m in masks {
        let x = CMat::from_fn(d, d, |i, j| b.get(i, j).coeff(m));
        rb = rb.max((&x + &g * odd_supertranspose(&x, kb) * &gi).norm());
    }
    ra.max(rb)
}

fn sub_matrix(a: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

/// Left-hand side as a Grassmann element over the pool of `B`, with error
/// estimate, evaluation count, total real quadrature dimension and number
/// of expanded generators.
pub fn gaussian_lhs(kind: GaussianKind, a: &CMat, b: &SuperMatrix, opts: &GaussOptions) -> Result<(GE, f64, usize, usize, usize)> {
    let mut out = b.pool().one();
    let (mut err, mut evals, mut dims, mut gens) = (0.0, 0, 0, 0);
    for idx in blocks(kind, a) {
        let sub = sub_matrix(a, &idx);
        if matches!(kind, GaussianKind::ParticleHole) && idx.len() > 2 {
            return Err(Error::Unsupported("c = 1/2 with A coupling several rows needs a quadrature above 4 dimensions".into()));
        }
        let (v, e, n, d, g) = lhs_block(kind, &sub, b, opts)?;
        err += e * out.max_abs().max(1.0);
        out = &out * &v;
        evals += n;
        dims = dims.max(d);
        gens += g;
    }
    Ok((out, err, evals, dims, gens))
}

/// Checks the Gaussian identity for one instance `(A, B)`; `B` may carry odd
/// entries in its own generator pool, compared coefficientwise.
pub fn gaussian_identity_check(c: f64, a: &CMat, b: &SuperMatrix, opts: &GaussOptions) -> Result<VerificationReport> {
    let kind = GaussianKind::from_c(c)?;
    let (kb, kf) = b.rows();
    if kb != kf || a.nrows() != a.ncols() {
        return Err(Error::DimMismatch("need square A and B of type (n|n)".into()));
    }
    if kind == GaussianKind::ParticleHole {
        let r = particle_hole_residual(a, b);
        if r > 1e-10 {
            return Err(Error::Invalid(format!("A, B violate A = -C A^T C^-1, B = -gamma B^st gamma^-1 (residual {:.2e})", r)));
        }
    }
    let (lhs, err, evals, dims, gens) = gaussian_lhs(kind, a, b, opts)?;
    let rhs = gaussian_rhs(kind, a, b)?;
    // α = β control: B_FF replaced by B_BB, odd part dropped.
    let body = b.body();
    let mut ctl = body.clone();
    for i in 0..kb {
        for j in 0..kb {
            ctl[(kb + i, kb + j)] = body[(i, j)];
            ctl[(i, kb + j)] = cz(0.0);
            ctl[(kb + i, j)] = cz(0.0);
        }
    }
    let ctl_b = SuperMatrix::from_complex(b.pool(), kb, kf, &ctl)?;
    let (ctl_v, _, _, _, _) = gaussian_lhs(kind, a, &ctl_b, opts)?;
    let method = Method {
        quad_dims: dims,
        grassmann: gens + b.pool().size(),
        samples: evals,
        seed: None,
        error_estimate: err,
        notes: vec![format!("c = {}, dim V = {}, W = ({}|{})", c, a.nrows(), kb, kf)],
    };
    let id = format!("gaussian_c{}_N{}", if c == 1.0 { "1" } else { "1/2" }, a.nrows() / if c == 1.0 { 1 } else { 2 });
    Ok(VerificationReport::graded(id, &lhs, &rhs, 1e-12, opts.rel_tol, method)?.with_control(ctl_v.body()))
}

/// Supertranspose `[[A, B], [C, D]] -> [[A^T, -C^T], [B^T, D^T]]` of a
/// numeric `k|k` matrix whose odd blocks hold the coefficients of one odd
/// generator. This is the convention under which `STr(B ψ̃ψ)` with
/// `ψ̃ = -γ ψ^T C^{-1}` only sees the part of `B` obeying
/// `B = -γ B^{st} γ^{-1}`.
pub fn odd_supertranspose(x: &CMat, k: usize) -> CMat {
    let mut t = x.transpose();
    for i in 0..k {
        for j in k..2 * k {
            t[(i, j)] = -t[(i, j)];
        }
    }
    t
}

/// Odd solutions `X = -γ X^{st} γ^{-1}` with `γ = γ_B ⊕ γ_F`, `k|k` grading.
pub(crate) fn odd_solutions(g: &CMat, k: usize) -> Vec<CMat> {
    let d = 2 * k;
    let pos: Vec<(usize, usize)> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).filter(|&(i, j)| (i < k) != (j < k)).collect();
    let gi = g.clone().try_inverse().unwrap();
    let mut m = CMat::zeros(d * d, pos.len());
    for (col, &(i, j)) in pos.iter().enumerate() {
        let mut x = CMat::zeros(d, d);
        x[(i, j)] = cz(1.0);
        let img = &x + g * odd_supertranspose(&x, k) * &gi;
        for r in 0..d * d {
            m[(r, col)] = img[(r / d, r % d)];
        }
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.unwrap();
    let mut out = vec![];
    for (r, s) in svd.singular_values.iter().enumerate() {
        if *s < 1e-10 {
            let mut x = CMat::zeros(d, d);
            for (col, &(i, j)) in pos.iter().enumerate() {
                x[(i, j)] = vt[(r, col)].conj();
            }
            out.push(x);
        }
    }
    out
}

/// One test instance of the identity.
#[derive(Clone, Debug)]
pub struct GaussianInstance {
    pub label: String,
    pub c: f64,
    pub a: CMat,
    pub b: SuperMatrix,
}

fn with_odd(body: &CMat, k: usize, odd: &[(CMat, usize)], pool: Pool) -> Result<SuperMatrix> {
    let d = 2 * k;
    let mut e = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut x = pool.scalar(body[(i, j)]);
            for (m, g) in odd {
                if m[(i, j)] != cz(0.0) {
                    x = &x + &pool.gen(*g).scale(m[(i, j)]);
                }
            }
            e.push(x);
        }
    }
    SuperMatrix::new(pool, (k, k), (k, k), e)
}

/// Seeded instances: for each `c`, `n_diag` diagonal `A` and `n_full`
/// non-diagonal `A`, all with odd entries in `B` built from two external
/// generators. Diagonal instances alternate `N = 1, 2`; non-diagonal ones
/// use `N = 2` for `c = 1` and `N = 1` for `c = 1/2`.
pub fn gaussian_instances(seed: u64, n_diag: usize, n_full: usize) -> Result<Vec<GaussianInstance>> {
    use rand::Rng as _;
    let mut rng = crate::mc::substream(seed, 0);
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let mut out = vec![];
    let i = C64::new(0.0, 1.0);
    for (ci, c) in [1.0, 0.5].into_iter().enumerate() {
        for t in 0..n_diag + n_full {
            let diag = t < n_diag;
            let pool = Pool::new(2);
            let nn = if diag { 1 + t % 2 } else if c == 1.0 { 2 } else { 1 };
            let alpha = C64::new(u(-0.5, 0.5), u(-1.6, -0.8));
            let beta = C64::new(u(-0.8, 0.8), u(-0.5, 0.5));
            let s1 = C64::new(u(-0.6, 0.6), u(-0.6, 0.6));
            let s2 = C64::new(u(-0.6, 0.6), u(-0.6, 0.6));
            let (a, b) = if c == 1.0 {
                let a = if diag {
                    CMat::from_fn(nn, nn, |p, q| if p == q { cz(u(-1.0, 1.0)) } else { cz(0.0) })
                } else {
                    let x = CMat::from_fn(nn, nn, |_, _| C64::new(u(-0.6, 0.6), u(-0.6, 0.6)));
                    (&x + x.adjoint()).map(|z| z * 0.5)
                };
                let body = CMat::from_row_slice(2, 2, &[alpha, cz(0.0), cz(0.0), beta]);
                let mut m1 = CMat::zeros(2, 2);
                m1[(0, 1)] = s1;
                let mut m2 = CMat::zeros(2, 2);
                m2[(1, 0)] = s2;
                (a, with_odd(&body, 1, &[(m1, 0), (m2, 1)], pool)?)
            } else {
                let a = if diag {
                    let xs: Vec<f64> = (0..nn).map(|_| u(0.2, 1.2)).collect();
                    kron(&pauli('z'), &CMat::from_fn(nn, nn, |p, q| if p == q { cz(xs[p]) } else { cz(0.0) }))
                } else {
                    let th = u(0.0, std::f64::consts::PI);
                    let ph = u(0.0, 2.0 * std::f64::consts::PI);
                    let x = u(0.3, 1.2);
                    let nv = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
                    (pauli('x').map(|z| z * nv[0]) + pauli('y').map(|z| z * nv[1]) + pauli('z').map(|z| z * nv[2])).map(|z| z * x)
                };
                let mut body = CMat::zeros(4, 4);
                body[(0, 0)] = alpha;
                body[(1, 1)] = -alpha;
                if diag {
                    body[(2, 2)] = beta;
                    body[(3, 3)] = -beta;
                } else {
                    let (p, q, r) = (beta, C64::new(u(-0.4, 0.4), u(-0.4, 0.4)), C64::new(u(-0.4, 0.4), u(-0.4, 0.4)));
                    body[(2, 2)] = p;
                    body[(3, 3)] = -p;
                    body[(2, 3)] = q;
                    body[(3, 2)] = r;
                }
                let g = crate::ensembles::block_diag(&pauli('x'), &pauli('j'));
                let basis = odd_solutions(&g, 2);
                let comb = |w: &[C64]| basis.iter().zip(w).fold(CMat::zeros(4, 4), |acc, (x, c)| acc + x.map(|z| z * c));
                let w1: Vec<C64> = (0..basis.len()).map(|_| C64::new(u(-0.5, 0.5), u(-0.5, 0.5))).collect();
                let w2: Vec<C64> = (0..basis.len()).map(|_| C64::new(u(-0.5, 0.5), u(-0.5, 0.5))).collect();
                let _ = i;
                (a, with_odd(&body, 2, &[(comb(&w1), 0), (comb(&w2), 1)], pool)?)
            };
            out.push(GaussianInstance {
                label: format!("c{}_{}_N{}_{}", if ci == 0 { "1" } else { "1/2" }, if diag { "diag" } else { "full" }, nn, t),
                c,
                a,
                b,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn unitary_scalar_closed_form() {
        let p = Pool::new(0);
        let (h, al, be) = (0.7, c(0.2, -1.0), c(-0.4, 0.3));
        let a = CMat::from_element(1, 1, c(h, 0.0));
        let b = SuperMatrix::diag(p, &[al], &[be]);
        let r = gaussian_identity_check(1.0, &a, &b, &GaussOptions::default()).unwrap();
        let want = (h - be) / (h - al);
        assert!((r.rhs - want).norm() < 1e-14);
        assert!(r.rel_dev < 1e-6, "{:?}", r);
        assert!(r.pass);
    }

    #[test]
    fn particle_hole_diagonal_example() {
        let p = Pool::new(0);
        let (x, y, z) = (1.0, c(2.0, 0.0), c(0.0, -1.0));
        let a = kron(&pauli('z'), &CMat::from_element(1, 1, c(x, 0.0)));
        let b = SuperMatrix::diag(p, &[z, -z], &[y, -y]);
        let r = gaussian_identity_check(0.5, &a, &b, &GaussOptions::default()).unwrap();
        assert!((r.rhs - c(-1.5, 0.0)).norm() < 1e-13, "{}", r.rhs);
        assert!(r.rel_dev < 1e-6, "{:?}", r);
        assert!(r.pass);
    }

    #[test]
    fn random_instances_with_odd_sources() {
        for inst in gaussian_instances(11, 2, 1).unwrap() {
            let t = std::time::Instant::now();
            let r = gaussian_identity_check(inst.c, &inst.a, &inst.b, &GaussOptions::default()).unwrap();
            eprintln!("{} rel {:.2e} err {:.2e} ctl {} {:?}", inst.label, r.rel_dev, r.method.error_estimate, r.control.unwrap(), t.elapsed());
            assert!(r.pass, "{:?}", r);
        }
    }

    #[test]
    fn divergence_named() {
        let p = Pool::new(0);
        let a = CMat::from_element(1, 1, c(0.3, 0.0));
        let b = SuperMatrix::diag(p, &[c(0.0, 1.0)], &[c(0.0, 0.0)]);
        match gaussian_identity_check(1.0, &a, &b, &GaussOptions::default()) {
            Err(Error::Divergence(m)) => assert!(m.contains("Im alpha < 0")),
            other => panic!("{:?}", other),
        }
    }
}
