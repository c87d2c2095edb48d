//! Randomized algebra laws shared by the property tests and the acceptance
//! harness.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use superrmt::superalg::*;
use superrmt::C64;

pub const K: usize = 4;

pub type Coeffs = Vec<(f64, f64)>;
type Law = std::result::Result<(), TestCaseError>;

pub fn coeffs() -> impl Strategy<Value = Coeffs> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1 << K)
}

pub fn mats(d: usize) -> impl Strategy<Value = Vec<Coeffs>> {
    prop::collection::vec(coeffs(), d * d)
}

/// Element whose monomials all have parity `parity` (`None` keeps both).
pub fn element(pool: Pool, cs: &[(f64, f64)], parity: Option<u32>) -> GrassmannElement {
    let terms = cs
        .iter()
        .enumerate()
        .filter(|(m, _)| parity.is_none_or(|p| (*m as u64).count_ones() % 2 == p))
        .map(|(m, &(re, im))| (m as u64, C64::new(re, im)))
        .collect();
    GrassmannElement::from_terms(pool, terms)
}

/// Even `m|n` supermatrix with `shift` added to the diagonal.
pub fn supermatrix(pool: Pool, m: usize, n: usize, cs: &[Coeffs], shift: f64) -> SuperMatrix {
    let d = m + n;
    let mut e = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let par = ((i >= m) as u32 + (j >= m) as u32) % 2;
            let mut x = element(pool, &cs[i * d + j], Some(par));
            if i == j {
                x = &x + &pool.real(shift);
            }
            e.push(x);
        }
    }
    SuperMatrix::new(pool, (m, n), (m, n), e).unwrap()
}

pub fn close(a: &GrassmannElement, b: &GrassmannElement, tol: f64) -> bool {
    (a - b).max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

pub fn close_m(a: &SuperMatrix, b: &SuperMatrix, tol: f64) -> bool {
    a.try_sub(b).unwrap().max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

pub fn graded_commutativity(a: &Coeffs, b: &Coeffs, pa: u32, pb: u32) -> Law {
    let pool = Pool::new(K);
    let (x, y) = (element(pool, a, Some(pa)), element(pool, b, Some(pb)));
    let sign = if pa * pb == 1 { -1.0 } else { 1.0 };
    prop_assert!(close(&(&x * &y), &(&y * &x).scale_re(sign), 1e-14));
    Ok(())
}

pub fn nilpotency(a: &Coeffs, k: usize) -> Law {
    let pool = Pool::new(K);
    let x = element(pool, a, None);
    prop_assert!(x.derive(k).unwrap().derive(k).unwrap().is_zero());
    prop_assert!(x.soul().powi(K as u32 + 1).max_abs() < 1e-14);
    let g = pool.gen(k);
    prop_assert!((&g * &g).is_zero());
    let all: Vec<usize> = (0..K).collect();
    let top = x.berezin(&all).unwrap();
    prop_assert!((top.body() - x.berezin_top()).norm() < 1e-14);
    prop_assert!(top.soul().is_zero());
    Ok(())
}

pub fn sdet_multiplicative(a: &[Coeffs], b: &[Coeffs]) -> Law {
    let pool = Pool::new(K);
    let (x, y) = (supermatrix(pool, 2, 1, a, 3.0), supermatrix(pool, 2, 1, b, 3.0));
    let lhs = s_det(&s_mul(&x, &y).unwrap()).unwrap();
    let rhs = &s_det(&x).unwrap() * &s_det(&y).unwrap();
    prop_assert!(close(&lhs, &rhs, 1e-10));
    Ok(())
}

pub fn sdet_exp_is_exp_str(a: &[Coeffs]) -> Law {
    let pool = Pool::new(K);
    let x = supermatrix(pool, 2, 1, a, 0.0).scale(C64::new(0.4, 0.0));
    let lhs = s_det(&s_exp(&x).unwrap()).unwrap();
    let rhs = s_trace(&x).unwrap().exp();
    prop_assert!(close(&lhs, &rhs, 1e-10));
    Ok(())
}

pub fn supertransposition(a: &[Coeffs], b: &[Coeffs]) -> Law {
    let pool = Pool::new(K);
    let (x, y) = (supermatrix(pool, 2, 1, a, 3.0), supermatrix(pool, 2, 1, b, 3.0));
    let st = s_transpose;
    prop_assert!(close_m(&st(&s_mul(&x, &y).unwrap()), &s_mul(&st(&y), &st(&x)).unwrap(), 1e-12));
    prop_assert!(close(&s_trace(&st(&x)).unwrap(), &s_trace(&x).unwrap(), 1e-14));
    prop_assert!(close(&s_det(&st(&x)).unwrap(), &s_det(&x).unwrap(), 1e-10));
    prop_assert!(close_m(&st(&st(&st(&st(&x)))), &x, 0.0));
    let sig = SuperMatrix::sigma(pool, 2, 1);
    let flipped = s_mul(&s_mul(&sig, &x).unwrap(), &sig).unwrap();
    prop_assert!(close_m(&st(&st(&x)), &flipped, 0.0));
    Ok(())
}

fn check<S: Strategy>(cases: u32, s: S, law: impl Fn(S::Value) -> Law) -> Option<String> {
    let cfg = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new(cfg).run(&s, law).err().map(|e| e.to_string())
}

/// Runs each law over `cases` random instances; returns (name, failure).
pub fn run_laws(cases: u32) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("graded commutativity", check(cases, (coeffs(), coeffs(), 0u32..2, 0u32..2), |(a, b, pa, pb)| graded_commutativity(&a, &b, pa, pb))),
        ("Berezin nilpotency", check(cases, (coeffs(), 0..K), |(a, k)| nilpotency(&a, k))),
        ("SDet multiplicativity", check(cases, (mats(3), mats(3)), |(a, b)| sdet_multiplicative(&a, &b))),
        ("SDet exp = exp STr", check(cases, mats(3), |a| sdet_exp_is_exp_str(&a))),
        ("supertransposition", check(cases, (mats(3), mats(3)), |(a, b)| supertransposition(&a, &b))),
    ]
}
