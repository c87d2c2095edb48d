//! Saddle-point structure data of the ten classes.

use crate::ensembles::{block_diag, class_structure_split, eye, kron, kron3, pauli, CMat, SymmetryClass};
use crate::{Error, Result, C64};
use super::cmax;

/// Saddle-point structure of one class.
#[derive(Clone, Debug)]
pub struct SaddleData {
    pub class: SymmetryClass,
    pub n_a: usize,
    pub n_r: usize,
    pub v: f64,
    /// `Q_0 = iv 1_{B|F} ⊗ β` on `W = W_B ⊕ W_F`.
    pub q0: CMat,
    /// Second saddle orbit representative (classes D and DIII).
    pub q1: Option<CMat>,
    pub g_lambda: String,
    pub stability_group: String,
    pub coset: String,
    pub m_b: String,
    pub m_f: String,
    /// Table row: (class, comment, superspace type, dimension relations).
    pub table_row: [String; 4],
    /// `max |Q² + v²|` over the representatives.
    pub square_residual: f64,
    /// `STr(Q_0²/2v² + ln Q_0)`.
    pub f_q0: C64,
}

/// Saddle data with `n_a` advanced and `n_r` retarded auxiliary indices.
pub fn saddle_info_split(cls: SymmetryClass, n_a: usize, n_r: usize, v: f64) -> Result<SaddleData> {
    use SymmetryClass::*;
    if v <= 0.0 {
        return Err(Error::Invalid("v > 0 required".into()));
    }
    let n = n_a + n_r;
    let s = class_structure_split(cls, 1, n_a, n_r)?;
    let i = C64::new(0.0, 1.0);
    let iv = i * v;
    let beta = &s.aux.beta;
    let q0 = block_diag(beta, beta).map(|z| z * iv);
    let p = pauli;
    let e11 = CMat::from_fn(n, n, |a, b| C64::new(if a == 0 && b == 0 { 1.0 } else { 0.0 }, 0.0));
    let rest = eye(n) - &e11;
    let q1 = match cls {
        D => {
            let bb = kron(&p('z'), &eye(n));
            let ff = kron(&p('z'), &(&e11 - &rest));
            Some(block_diag(&bb, &ff).map(|z| z * iv))
        }
        DIII => {
            let bb = kron3(&p('z'), &p('1'), &eye(n));
            let ff = kron3(&p('1'), &p('x'), &e11) + kron3(&p('z'), &p('1'), &rest);
            Some(block_diag(&bb, &ff).map(|z| z * iv))
        }
        _ => None,
    };
    let target = eye(q0.nrows()).map(|z| z * (-v * v));
    let mut square_residual = cmax(&(&q0 * &q0 - &target));
    if let Some(q) = &q1 {
        square_residual = square_residual.max(cmax(&(q * q - &target)));
    }
    let (g_lambda, stability_group, coset, m_b, m_f) = names(cls, n_a, n_r);
    let dims = cls.rss_dims().to_string();
    let label = if cls.chiral() { format!("{} (p = q)", cls.label()) } else { cls.label().to_string() };
    Ok(SaddleData {
        class: cls,
        n_a,
        n_r,
        v,
        f_q0: saddle_function(&q0, s.aux.k, v),
        q0,
        q1,
        g_lambda,
        stability_group,
        coset,
        m_b,
        m_f,
        table_row: [label, cls.comment().to_string(), cls.rss().to_string(), dims],
        square_residual,
    })
}

/// Saddle data for `n` auxiliary indices; the Wigner-Dyson classes split
/// them as `n_A = ⌈n/2⌉`, `n_R = ⌊n/2⌋`.
pub fn saddle_info(cls: SymmetryClass, n: usize) -> Result<SaddleData> {
    if cls.particle_hole() {
        saddle_info_split(cls, n, 0, 1.0)
    } else {
        saddle_info_split(cls, n - n / 2, n / 2, 1.0)
    }
}

/// `F(Q) = STr(Q²/2v² + ln Q)` for diagonal `Q` with `k|k` grading.
pub fn saddle_function(q: &CMat, k: usize, v: f64) -> C64 {
    let mut f = C64::new(0.0, 0.0);
    for j in 0..2 * k {
        let z = q[(j, j)];
        let t = z * z / (2.0 * v * v) + z.ln();
        if j < k {
            f += t;
        } else {
            f -= t;
        }
    }
    f
}

fn names(cls: SymmetryClass, n_a: usize, n_r: usize) -> (String, String, String, String, String) {
    use SymmetryClass::*;
    let n = n_a + n_r;
    match cls {
        A => (
            format!("Gl({n}|{n})"),
            format!("Gl({n_a}|{n_a}) x Gl({n_r}|{n_r})"),
            format!("Gl({n}|{n})/Gl({n_a}|{n_a}) x Gl({n_r}|{n_r})"),
            format!("U({n_a},{n_r})/U({n_a}) x U({n_r})"),
            format!("U({n})/U({n_a}) x U({n_r})"),
        ),
        AI => (
            format!("Osp({}|{})", 2 * n, 2 * n),
            format!("Osp({}|{}) x Osp({}|{})", 2 * n_a, 2 * n_a, 2 * n_r, 2 * n_r),
            format!("Osp({}|{})/Osp({}|{}) x Osp({}|{})", 2 * n, 2 * n, 2 * n_a, 2 * n_a, 2 * n_r, 2 * n_r),
            format!("SO({},{})/SO({}) x SO({})", 2 * n_a, 2 * n_r, 2 * n_a, 2 * n_r),
            format!("Sp({n})/Sp({n_a}) x Sp({n_r})"),
        ),
        AII => (
            format!("Osp({}|{})", 2 * n, 2 * n),
            format!("Osp({}|{}) x Osp({}|{})", 2 * n_a, 2 * n_a, 2 * n_r, 2 * n_r),
            format!("Osp({}|{})/Osp({}|{}) x Osp({}|{})", 2 * n, 2 * n, 2 * n_a, 2 * n_a, 2 * n_r, 2 * n_r),
            format!("Sp({n_a},{n_r})/Sp({n_a}) x Sp({n_r})"),
            format!("SO({})/SO({}) x SO({})", 2 * n, 2 * n_a, 2 * n_r),
        ),
        AIII => (
            format!("Gl({n}|{n}) x Gl({n}|{n})"),
            format!("diag Gl({n}|{n})"),
            format!("Gl({n}|{n})"),
            format!("Gl({n},C)/U({n})"),
            format!("U({n})"),
        ),
        BDI => (
            format!("Gl({}|{})", 2 * n, 2 * n),
            format!("Osp({}|{})", 2 * n, 2 * n),
            format!("Gl({}|{})/Osp({}|{})", 2 * n, 2 * n, 2 * n, 2 * n),
            format!("Gl({},R)/O({})", 2 * n, 2 * n),
            format!("U({})/Sp({n})", 2 * n),
        ),
        CII => (
            format!("Gl({}|{})", 2 * n, 2 * n),
            format!("Osp({}|{})", 2 * n, 2 * n),
            format!("Gl({}|{})/Osp({}|{})", 2 * n, 2 * n, 2 * n, 2 * n),
            format!("U*({})/Sp({n})", 2 * n),
            format!("U({})/O({})", 2 * n, 2 * n),
        ),
        C => (
            format!("Osp({}|{})", 2 * n, 2 * n),
            format!("Gl({n}|{n})"),
            format!("Osp({}|{})/Gl({n}|{n})", 2 * n, 2 * n),
            format!("SO*({})/U({n})", 2 * n),
            format!("Sp({n})/U({n})"),
        ),
        D => (
            format!("Osp({}|{})", 2 * n, 2 * n),
            format!("Gl({n}|{n})"),
            format!("Osp({}|{})/Gl({n}|{n})", 2 * n, 2 * n),
            format!("Sp({n},R)/U({n})"),
            format!("SO({})/U({n})", 2 * n),
        ),
        CI => (
            format!("Osp({}|{}) x Osp({}|{})", 2 * n, 2 * n, 2 * n, 2 * n),
            format!("diag Osp({}|{})", 2 * n, 2 * n),
            format!("Osp({}|{})", 2 * n, 2 * n),
            format!("SO({},C)/SO({})", 2 * n, 2 * n),
            format!("Sp({n})"),
        ),
        DIII => (
            format!("Osp({}|{}) x Osp({}|{})", 2 * n, 2 * n, 2 * n, 2 * n),
            format!("diag Osp({}|{})", 2 * n, 2 * n),
            format!("Osp({}|{})", 2 * n, 2 * n),
            format!("Sp({n},C)/Sp({n})"),
            format!("SO({})", 2 * n),
        ),
    }
}

/// Tab-separated table of the ten classes and their superspaces.
pub fn class_table() -> Result<String> {
    let mut out = String::from("RMT\tcomments\tRSS\tdimensions\n");
    for cls in SymmetryClass::ALL {
        let d = saddle_info(cls, 1)?;
        out.push_str(&d.table_row.join("\t"));
        out.push('\n');
    }
    Ok(out)
}

/// Full saddle-data listing at `n` (one block per class).
pub fn saddle_listing(n: usize) -> Result<String> {
    let mut out = String::new();
    for cls in SymmetryClass::ALL {
        let d = saddle_info(cls, n)?;
        out.push_str(&format!(
            "{}\tRSS {}\tG/H = {}\tH = {}\tM_B = {}\tM_F = {}\tsaddles = {}\t|Q^2+v^2| = {:.1e}\n",
            cls,
            d.table_row[2],
            d.coset,
            d.stability_group,
            d.m_b,
            d.m_f,
            1 + d.q1.is_some() as usize,
            d.square_residual
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saddle_squares_and_names() {
        for cls in SymmetryClass::ALL {
            for n in 1..=3 {
                let d = saddle_info(cls, n).unwrap();
                assert_eq!(d.square_residual, 0.0, "{}", cls);
                assert!(d.f_q0.norm() < 1e-15, "{} {}", cls, d.f_q0);
                assert_eq!(d.q1.is_some(), cls.saddle_count() == 2);
            }
        }
        let c = saddle_info(SymmetryClass::C, 2).unwrap();
        assert_eq!(c.coset, "Osp(4|4)/Gl(2|2)");
        assert_eq!(c.m_b, "SO*(4)/U(2)");
        assert_eq!(c.m_f, "Sp(2)/U(2)");
    }

    #[test]
    fn saddles_lie_in_q_space() {
        for cls in SymmetryClass::ALL {
            let d = saddle_info(cls, 2).unwrap();
            let s = class_structure_split(cls, 1, d.n_a, d.n_r).unwrap();
            let k = s.aux.k;
            for q in std::iter::once(&d.q0).chain(d.q1.as_ref()) {
                for (kind, g, sign) in s.q_space_conditions() {
                    let inner = match kind {
                        crate::ensembles::Involution::Transpose => crate::ensembles::numeric_supertranspose(q, k),
                        crate::ensembles::Involution::Conjugation => q.clone(),
                    };
                    let img = (&g * inner * g.clone().try_inverse().unwrap()).map(|z| z * sign);
                    assert!(cmax(&(q - img)) < 1e-12, "{}", cls);
                }
            }
        }
    }
}
