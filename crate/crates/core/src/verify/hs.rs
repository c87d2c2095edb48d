//! Hubbard-Stratonovich decoupling of the quartic term (class A, `n = N = 1`):
//! `exp(-(v²/2N) STr(ψ̃ψ)²) = ∫ DQ exp(i STr Qψ̃ψ - N STr Q²/2v²)`
//! with `Q = [[q, σ], [τ, it]]`, `q, t` real and `σ, τ` odd.

use super::{Method, VerificationReport};
use crate::quadrature::gl_interval;
use crate::superalg::{s_mul, s_trace, GrassmannElement as GE, Pool, SuperMatrix};
use crate::{Error, Result, C64};

/// `ψ̃ψ` for `ψ = (z, φ)`, `ψ̃ = (z̄, φ̃)`; with `symbolic` false the
/// fermionic components vanish.
fn bilinear(pool: Pool, z: C64, symbolic: bool) -> Result<SuperMatrix> {
    let (phi, phit) = if symbolic { (pool.gen(0), pool.gen(1)) } else { (pool.zero(), pool.zero()) };
    let zc = pool.scalar(z);
    let zb = pool.scalar(z.conj());
    SuperMatrix::from_blocks(pool, 1, 1, vec![&zb * &zc], vec![&zb * &phi], vec![&phit * &zc], vec![&phit * &phi])
}

/// Coefficientwise comparison of both sides at bosonic component `z`,
/// width `v`, size `N`, with `nodes` Gauss-Legendre nodes per axis on
/// `[-L, L]`, `L = 9v/√N`.
pub fn hs_step_check(z: C64, v: f64, n: usize, symbolic: bool, nodes: usize) -> Result<VerificationReport> {
    if v <= 0.0 || n == 0 {
        return Err(Error::Invalid("v > 0 and N >= 1 required".into()));
    }
    let nf = n as f64;
    let ext = Pool::new(2);
    let pool = ext.extended(2);
    let x = bilinear(pool, z, symbolic)?;
    let lhs = s_trace(&s_mul(&x, &x)?)?.scale_re(-v * v / (2.0 * nf)).exp();
    let x0 = bilinear(pool, C64::new(0.0, 0.0), false)?;
    let i = C64::new(0.0, 1.0);
    let integrand = |x: &SuperMatrix, q: f64, t: f64| -> Result<GE> {
        let qm = SuperMatrix::from_blocks(pool, 1, 1, vec![pool.real(q)], vec![pool.gen(2)], vec![pool.gen(3)], vec![pool.scalar(i * t)])?;
        let e1 = s_trace(&s_mul(&qm, x)?)?.scale(i);
        let e2 = s_trace(&s_mul(&qm, &qm)?)?.scale_re(-nf / (2.0 * v * v));
        (&e1 + &e2).exp().berezin(&[2, 3])
    };
    let l = 9.0 * v / nf.sqrt();
    let run = |m: usize| -> Result<(GE, GE)> {
        let rule = gl_interval(m, -l, l);
        let (mut num, mut den) = (pool.zero(), pool.zero());
        for &(q, wq) in &rule {
            for &(t, wt) in &rule {
                num = &num + &integrand(&x, q, t)?.scale_re(wq * wt);
                den = &den + &integrand(&x0, q, t)?.scale_re(wq * wt);
            }
        }
        Ok((num, den))
    };
    let (n1, d1) = run(nodes)?;
    let fine = (3 * nodes).div_ceil(2);
    let (n2, d2) = run(fine)?;
    let rhs = &n2 * &d2.inv()?;
    let coarse = &n1 * &d1.inv()?;
    let err = (&rhs - &coarse).max_abs();
    let narrow = |g: &GE| GE::from_terms(ext, g.terms().to_vec());
    let method = Method {
        quad_dims: 2,
        grassmann: 4,
        samples: 2 * (nodes * nodes + fine * fine),
        seed: None,
        error_estimate: err,
        notes: vec![format!("z = {}, v = {}, N = {}, symbolic psi_F = {}", z, v, n, symbolic)],
    };
    let id = if symbolic { "hs_step_symbolic" } else { "hs_step_bosonic" };
    VerificationReport::graded(id, &narrow(&lhs), &narrow(&rhs), 1e-8, 0.0, method)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_source_gives_one() {
        let r = hs_step_check(C64::new(0.0, 0.0), 0.8, 1, false, 48).unwrap();
        assert!((r.rhs - 1.0).norm() < 1e-12 && (r.lhs - 1.0).norm() < 1e-14);
        assert!(r.pass);
    }

    #[test]
    fn bosonic_closed_form() {
        let (z, v) = (C64::new(0.6, -0.3), 0.8);
        let r = hs_step_check(z, v, 1, false, 48).unwrap();
        let want = (-(v * v) * z.norm_sqr().powi(2) / 2.0).exp();
        assert!((r.lhs - want).norm() < 1e-14);
        assert!((r.rhs - want).norm() < 1e-9, "{}", r.rhs);
    }

    #[test]
    fn symbolic_coefficients_match() {
        let r = hs_step_check(C64::new(0.5, 0.4), 0.7, 1, true, 48).unwrap();
        assert!(r.pass, "{:?}", r);
    }
}
