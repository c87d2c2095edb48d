use proptest::prelude::*;
use superrmt::ensembles::{eigenvalues, sample_h, symmetry_residual, EnsembleSpec, SymmetryClass};
use superrmt::mc::substream;
use superrmt::superalg::*;
use superrmt::C64;

mod common;
use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graded_commutativity(a in coeffs(), b in coeffs(), pa in 0u32..2, pb in 0u32..2) {
        common::graded_commutativity(&a, &b, pa, pb)?;
    }

    #[test]
    fn associativity_and_distributivity(a in coeffs(), b in coeffs(), c in coeffs()) {
        let pool = Pool::new(K);
        let (x, y, z) = (element(pool, &a, None), element(pool, &b, None), element(pool, &c, None));
        prop_assert!(close(&(&(&x * &y) * &z), &(&x * &(&y * &z)), 1e-13));
        prop_assert!(close(&(&x * &(&y + &z)), &(&(&x * &y) + &(&x * &z)), 1e-13));
    }

    #[test]
    fn nilpotency(a in coeffs(), k in 0usize..K) {
        common::nilpotency(&a, k)?;
    }

    #[test]
    fn exp_log_roundtrip(a in coeffs()) {
        let pool = Pool::new(K);
        let x = element(pool, &a, Some(0));
        let y = &x + &pool.real(3.0);
        prop_assert!(close(&y.log().unwrap().exp(), &y, 1e-12));
        prop_assert!(close(&(&y * &y.inv().unwrap()), &pool.one(), 1e-12));
    }

    #[test]
    fn sdet_multiplicative(a in mats(3), b in mats(3)) {
        common::sdet_multiplicative(&a, &b)?;
    }

    #[test]
    fn sdet_exp_is_exp_str(a in mats(3)) {
        common::sdet_exp_is_exp_str(&a)?;
    }

    #[test]
    fn supertrace_cyclic(a in mats(3), b in mats(3)) {
        let pool = Pool::new(K);
        let (x, y) = (supermatrix(pool, 1, 2, &a, 0.0), supermatrix(pool, 1, 2, &b, 0.0));
        let xy = s_trace(&s_mul(&x, &y).unwrap()).unwrap();
        let yx = s_trace(&s_mul(&y, &x).unwrap()).unwrap();
        prop_assert!(close(&xy, &yx, 1e-12));
    }

    #[test]
    fn supertransposition_laws(a in mats(3), b in mats(3)) {
        common::supertransposition(&a, &b)?;
    }

    #[test]
    fn sinv_is_inverse(a in mats(3)) {
        let pool = Pool::new(K);
        let x = supermatrix(pool, 1, 2, &a, 3.0);
        let p = s_mul(&x, &s_inv(&x).unwrap()).unwrap();
        prop_assert!(close_m(&p, &SuperMatrix::identity(pool, 1, 2), 1e-12));
    }
}

fn classes() -> impl Strategy<Value = SymmetryClass> {
    prop::sample::select(SymmetryClass::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn samples_respect_class_symmetries(cls in classes(), n in 1usize..4, seed in any::<u64>()) {
        let spec = EnsembleSpec::new(cls, n, 1.0).unwrap();
        let h = sample_h(&spec, &mut substream(seed, 0));
        prop_assert!(symmetry_residual(&spec, &h).unwrap() < 1e-12);
        let ev = eigenvalues(&h).unwrap();
        prop_assert_eq!(ev.len(), spec.dim());
        if cls.particle_hole() || cls.chiral() {
            let mut neg: Vec<f64> = ev.iter().map(|x| -x).collect();
            neg.sort_by(f64::total_cmp);
            let mut s = ev.clone();
            s.sort_by(f64::total_cmp);
            for (a, b) in s.iter().zip(&neg) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sampling_is_reproducible(cls in classes(), seed in any::<u64>()) {
        let spec = EnsembleSpec::new(cls, 2, 1.0).unwrap();
        let a = sample_h(&spec, &mut substream(seed, 3));
        let b = sample_h(&spec, &mut substream(seed, 3));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn basis_is_orthonormal(cls in classes(), n in 1usize..4) {
        let spec = EnsembleSpec::new(cls, n, 1.0).unwrap();
        let d = spec.dim();
        let dense: Vec<_> = spec.basis().iter().map(|e| {
            let mut m = superrmt::ensembles::eye(d) * C64::new(0.0, 0.0);
            for &(i, j, v) in &e.entries { m[(i, j)] += v; }
            m
        }).collect();
        for (i, x) in dense.iter().enumerate() {
            for (j, y) in dense.iter().enumerate().skip(i) {
                let ip = (x.adjoint() * y).trace();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((ip - want).norm() < 1e-12, "{} {} {}", i, j, ip);
            }
        }
    }
}
