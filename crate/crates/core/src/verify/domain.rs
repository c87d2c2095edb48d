//! Schäfer-Wegner integration domain for the class C boson-boson block:
//! `φ_b(X, Y) = b (X + e^Y β e^{-Y})` with `X ∈ 𝒦 ≃ u(n)`, `Y ∈ 𝓜`,
//! `𝒦 ⊕ 𝓜 = so*(2n)`, `β = σ_z ⊗ 1_n`.

use super::{cmax, Method, VerificationReport};
use crate::ensembles::{kron, pauli, CMat};
use crate::mc::substream;
use crate::{Error, Result, C64};
use rand::Rng as _;
use rand_distr::StandardNormal;

fn beta(n: usize) -> CMat {
    kron(&pauli('z'), &CMat::identity(n, n))
}

fn gamma_b(n: usize) -> CMat {
    kron(&pauli('x'), &CMat::identity(n, n))
}

/// Largest violation of the defining relations of `𝒦` (`kind = 1`) or
/// `𝓜` (`kind = -1`): `Z = -γ_B Z^T γ_B^{-1}`, `Z = kind · β Z β^{-1}`,
/// `Z† = -kind · Z`.
fn residual(z: &CMat, n: usize, kind: f64) -> f64 {
    let (b, g) = (beta(n), gamma_b(n));
    let r1 = cmax(&(z + &g * z.transpose() * &g));
    let r2 = cmax(&(z - (&b * z * &b).map(|x| x * kind)));
    let r3 = cmax(&(z.adjoint() + z.map(|x| x * kind)));
    r1.max(r2).max(r3)
}

/// `φ_b(X, Y)` after validating `b > 0`, `X ∈ 𝒦`, `Y ∈ 𝓜`.
pub fn schafer_wegner_embed(b: f64, x: &CMat, y: &CMat) -> Result<CMat> {
    if b.is_nan() || b <= 0.0 {
        return Err(Error::Invalid(format!("b = {} rejected: the coupling term is never positive only if b > 0", b)));
    }
    let d = x.nrows();
    if !d.is_multiple_of(2) || x.shape() != (d, d) || y.shape() != (d, d) {
        return Err(Error::DimMismatch("X and Y must be 2n x 2n".into()));
    }
    let n = d / 2;
    let tol = 1e-10 * (1.0 + cmax(x) + cmax(y));
    let (rx, ry) = (residual(x, n, 1.0), residual(y, n, -1.0));
    if rx > tol || ry > tol {
        return Err(Error::Invalid(format!("X not in K (residual {:.2e}) or Y not in M (residual {:.2e})", rx, ry)));
    }
    let e = y.clone().exp();
    let ei = y.map(|z| -z).exp();
    Ok((x + e * beta(n) * ei).map(|z| z * b))
}

/// Random `X = diag(A, -A^T)` with `A` antihermitian.
pub fn random_k(n: usize, rng: &mut crate::mc::Rng) -> CMat {
    let m = CMat::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let a = (&m - m.adjoint()).map(|z| z * 0.5);
    crate::ensembles::block_diag(&a, &a.transpose().map(|z| -z))
}

/// Random `Y = [[0, B], [B†, 0]]` with `B` skew.
pub fn random_m(n: usize, rng: &mut crate::mc::Rng) -> CMat {
    let m = CMat::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let bm = (&m - m.transpose()).map(|z| z * 0.5);
    let mut y = CMat::zeros(2 * n, 2 * n);
    y.view_mut((0, n), (n, n)).copy_from(&bm);
    y.view_mut((n, 0), (n, n)).copy_from(&bm.adjoint());
    y
}

/// Random bosonic field `ψ_B : C^{2n} → C^{2N}` obeying
/// `β ψ_B† = -γ_B ψ_B^T C^{-1}`, `C = iσ_y ⊗ 1_N`.
pub fn random_psi_b(n: usize, nn: usize, rng: &mut crate::mc::Rng) -> CMat {
    let p0 = CMat::from_fn(2 * nn, 2 * n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let c = kron(&pauli('j'), &CMat::identity(nn, nn));
    let gb = &gamma_b(n) * beta(n);
    let t = (&c * p0.map(|z| z.conj()) * gb).map(|z| -z);
    (p0 + t).map(|z| z * 0.5)
}

/// Real part of `N Tr Z²/2v² - Tr Z ψ̃_B ψ_B` minus its bound `N b² Tr β²/2v²`
/// at the base point; nonpositive on the domain for `b > 0`.
pub fn exponent_excess(z: &CMat, b: f64, psi: &CMat, nn: usize, v: f64) -> f64 {
    let n = z.nrows() / 2;
    let bt = beta(n);
    let pp = &bt * psi.adjoint() * psi;
    let nf = nn as f64;
    let e = (z * z).trace() * (nf / (2.0 * v * v)) - (z * pp).trace();
    e.re - nf * b * b * (2 * n) as f64 / (2.0 * v * v)
}

/// Domain probe at size `n`: base point `φ_b(0, 0) = bβ`, the exponent
/// bound at `npts` random points with random `ψ_B` (`N = 3`), and the
/// minimum pairwise distance of `npts` random images.
pub fn schafer_wegner_check(n: usize, b: f64, v: f64, npts: usize, seed: u64) -> Result<VerificationReport> {
    let mut rng = substream(seed, 0);
    let zero = CMat::zeros(2 * n, 2 * n);
    let base = schafer_wegner_embed(b, &zero, &zero)?;
    let want = beta(n).map(|z| z * b);
    let nn = 3;
    let mut worst = f64::NEG_INFINITY;
    let mut imgs = Vec::with_capacity(npts);
    for _ in 0..npts {
        let x = random_k(n, &mut rng);
        let y = random_m(n, &mut rng);
        let z = schafer_wegner_embed(b, &x, &y)?;
        let psi = random_psi_b(n, nn, &mut rng);
        worst = worst.max(exponent_excess(&z, b, &psi, nn, v) / (1.0 + cmax(&z).powi(2) + cmax(&psi).powi(2)));
        imgs.push(z);
    }
    let mut dmin = f64::INFINITY;
    for i in 0..imgs.len() {
        for j in 0..i {
            dmin = dmin.min((&imgs[i] - &imgs[j]).norm());
        }
    }
    let method = Method {
        quad_dims: 0,
        grassmann: 0,
        samples: npts,
        seed: Some(seed),
        error_estimate: 0.0,
        notes: vec![format!("n = {}, b = {}, v = {}, max scaled exponent excess {:.3e}, min pairwise distance {:.3e}", n, b, v, worst, dmin)],
    };
    let dev = cmax(&(&base - &want));
    Ok(VerificationReport::new(format!("schafer_wegner_n{}", n), C64::new(dev, 0.0), C64::new(0.0, 0.0), 1e-14, 0.0, method)
        .with_check("exponent bounded by base value", worst <= 1e-12)
        .with_check("images pairwise distinct", dmin > 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_point_and_rejection() {
        let z = CMat::zeros(4, 4);
        let p = schafer_wegner_embed(1.5, &z, &z).unwrap();
        assert!(cmax(&(p - beta(2).map(|x| x * 1.5))) == 0.0);
        assert!(schafer_wegner_embed(0.0, &z, &z).is_err());
        assert!(schafer_wegner_embed(-1.0, &z, &z).is_err());
        let mut rng = substream(1, 0);
        let y = random_m(2, &mut rng);
        assert!(schafer_wegner_embed(1.0, &y, &z).is_err());
    }

    #[test]
    fn samples_obey_relations() {
        let mut rng = substream(2, 0);
        for n in 1..4 {
            assert!(residual(&random_k(n, &mut rng), n, 1.0) < 1e-14);
            assert!(residual(&random_m(n, &mut rng), n, -1.0) < 1e-14);
            // ψ̃_B ψ_B = β ψ† ψ obeys the same symmetry as Z.
            let psi = random_psi_b(n, 2, &mut rng);
            let pp = beta(n) * psi.adjoint() * &psi;
            let g = gamma_b(n);
            assert!(cmax(&(&pp + &g * pp.transpose() * &g)) < 1e-12);
            // so the X coupling is imaginary
            let x = random_k(n, &mut rng);
            assert!((&x * &pp).trace().re.abs() < 1e-12);
        }
    }

    #[test]
    fn domain_probe_passes() {
        for b in [0.5, 1.0, 2.0] {
            let r = schafer_wegner_check(2, b, 1.0, 1000, 7).unwrap();
            assert!(r.pass, "{:?}", r);
        }
    }

    #[test]
    fn negative_b_breaks_the_bound() {
        let mut rng = substream(3, 0);
        let (x, y) = (random_k(2, &mut rng), random_m(2, &mut rng));
        let z = schafer_wegner_embed(1.0, &x, &y).unwrap().map(|c| -c);
        let psi = random_psi_b(2, 3, &mut rng);
        assert!(exponent_excess(&z, -1.0, &psi, 3, 1.0) > 0.0);
    }
}
