//! The ten Gaussian ensembles over tangent spaces of Cartan's symmetric
//! spaces: class metadata, constraint structures, samplers and covariance laws.

use crate::mc::{mc_stats, Rng};
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub type CMat = DMatrix<C64>;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Pauli matrices and 2x2 helpers.
pub fn pauli(which: char) -> CMat {
    let z = c(0.0);
    let one = c(1.0);
    let i = C64::new(0.0, 1.0);
    match which {
        'x' => CMat::from_row_slice(2, 2, &[z, one, one, z]),
        'y' => CMat::from_row_slice(2, 2, &[z, -i, i, z]),
        'z' => CMat::from_row_slice(2, 2, &[one, z, z, -one]),
        // iσ_y = [[0, 1], [-1, 0]]
        'j' => CMat::from_row_slice(2, 2, &[z, one, -one, z]),
        '1' => CMat::identity(2, 2),
        _ => panic!("unknown 2x2 symbol {}", which),
    }
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron3(a: &CMat, b: &CMat, d: &CMat) -> CMat {
    a.kronecker(b).kronecker(d)
}

/// Block-diagonal matrix `diag(a, b)`.
pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let (m, n) = (a.nrows(), b.nrows());
    let mut out = CMat::zeros(m + n, m + n);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((m, m), (n, n)).copy_from(b);
    out
}

/// `diag(1_{n_a}, -1_{n_r})`.
pub fn split_sign(n_a: usize, n_r: usize) -> CMat {
    CMat::from_fn(n_a + n_r, n_a + n_r, |i, j| if i != j { c(0.0) } else if i < n_a { c(1.0) } else { c(-1.0) })
}

/// The ten symmetry classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SymmetryClass {
    A,
    AI,
    AII,
    AIII,
    BDI,
    CII,
    C,
    CI,
    D,
    DIII,
}

impl SymmetryClass {
    pub const ALL: [SymmetryClass; 10] = [
        SymmetryClass::A,
        SymmetryClass::AI,
        SymmetryClass::AII,
        SymmetryClass::AIII,
        SymmetryClass::BDI,
        SymmetryClass::CII,
        SymmetryClass::C,
        SymmetryClass::CI,
        SymmetryClass::D,
        SymmetryClass::DIII,
    ];

    pub fn label(&self) -> &'static str {
        use SymmetryClass::*;
        match self {
            A => "A",
            AI => "AI",
            AII => "AII",
            AIII => "AIII",
            BDI => "BDI",
            CII => "CII",
            C => "C",
            CI => "CI",
            D => "D",
            DIII => "DIII",
        }
    }

    /// Cartan family entry: (noncompact type, compact type).
    pub fn cartan_row(&self) -> (&'static str, &'static str) {
        use SymmetryClass::*;
        match self {
            A => ("Gl(N,C)/U(N)", "U(N)"),
            AI => ("Gl(N,R)/O(N)", "U(N)/O(N)"),
            AII => ("U*(2N)/Sp(N)", "U(2N)/Sp(N)"),
            AIII => ("U(p,q)/U(p)xU(q)", "U(p+q)/U(p)xU(q)"),
            BDI => ("SO(p,q)/SO(p)xSO(q)", "SO(p+q)/SO(p)xSO(q)"),
            CII => ("Sp(p,q)/Sp(p)xSp(q)", "Sp(p+q)/Sp(p)xSp(q)"),
            C => ("Sp(N,C)/Sp(N)", "Sp(N)"),
            CI => ("Sp(N,R)/U(N)", "Sp(N)/U(N)"),
            D => ("SO(N,C)/SO(N)", "SO(N)"),
            DIII => ("SO*(2N)/U(N)", "SO(2N)/U(N)"),
        }
    }

    /// Random-matrix name of the class.
    pub fn comment(&self) -> &'static str {
        use SymmetryClass::*;
        match self {
            A => "Wigner-Dyson (GUE)",
            AI => "Wigner-Dyson (GOE)",
            AII => "Wigner-Dyson (GSE)",
            AIII => "chiral GUE",
            BDI => "chiral GOE",
            CII => "chiral GSE",
            C | CI | D | DIII => "NS",
        }
    }

    /// Riemannian symmetric superspace reached in the large-N limit.
    pub fn rss(&self) -> &'static str {
        use SymmetryClass::*;
        match self {
            A => "AIII|AIII",
            AI => "BDI|CII",
            AII => "CII|BDI",
            AIII => "A|A",
            BDI => "AI|AII",
            CII => "AII|AI",
            C => "DIII|CI",
            CI => "D|C",
            D => "CI|DIII",
            DIII => "C|D",
        }
    }

    /// Dimension relations of the superspace.
    pub fn rss_dims(&self) -> &'static str {
        use SymmetryClass::*;
        match self {
            A => "m1 = n1 = nA, m2 = n2 = nR",
            AI | AII => "m1 = 2n1 = 2nA, m2 = 2n2 = 2nR",
            AIII | BDI | CII | C | D => "m = n",
            CI | DIII => "m = 2n",
        }
    }

    /// Number of dominant saddle-point orbits.
    pub fn saddle_count(&self) -> usize {
        match self {
            SymmetryClass::D | SymmetryClass::DIII => 2,
            _ => 1,
        }
    }

    /// Physical dimension is `size_factor() * N`.
    pub fn size_factor(&self) -> usize {
        use SymmetryClass::*;
        match self {
            A | AI => 1,
            AII | AIII | BDI | C | CI | D => 2,
            CII | DIII => 4,
        }
    }

    /// Classes whose spectrum is symmetric under `E -> -E`.
    pub fn particle_hole(&self) -> bool {
        !matches!(self, SymmetryClass::A | SymmetryClass::AI | SymmetryClass::AII)
    }

    /// Chiral classes, which require `p = q`.
    pub fn chiral(&self) -> bool {
        matches!(self, SymmetryClass::AIII | SymmetryClass::BDI | SymmetryClass::CII)
    }

    /// Real dimension of the constrained Hamiltonian space.
    pub fn tangent_dim(&self, n: usize) -> usize {
        use SymmetryClass::*;
        match self {
            A => n * n,
            AI => n * (n + 1) / 2,
            AII => n * (2 * n - 1),
            AIII => 2 * n * n,
            BDI => n * n,
            CII => 4 * n * n,
            C => n * (2 * n + 1),
            CI => n * (n + 1),
            D => n * (2 * n - 1),
            DIII => 2 * n * (2 * n - 1),
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl FromStr for SymmetryClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SymmetryClass::ALL
            .iter()
            .copied()
            .find(|c| c.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Invalid(format!("unknown symmetry class '{}'", s)))
    }
}

/// How a constraint matrix acts on `H`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Involution {
    /// `H -> M H^T M^{-1}`
    Transpose,
    /// `H -> M H M^{-1}`
    Conjugation,
}

/// Linear condition `H = sign * M op(H) M^{-1}`.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub name: &'static str,
    pub kind: Involution,
    pub matrix: CMat,
    pub sign: f64,
}

impl Constraint {
    pub fn apply(&self, h: &CMat) -> CMat {
        let inner = match self.kind {
            Involution::Transpose => h.transpose(),
            Involution::Conjugation => h.clone(),
        };
        let minv = self.matrix.clone().try_inverse().expect("constraint matrix invertible");
        (&self.matrix * inner * minv).map(|z| z * self.sign)
    }

    pub fn residual(&self, h: &CMat) -> f64 {
        (h - self.apply(h)).norm()
    }
}

/// Physical-space constraints for a class at size parameter `n`.
pub fn physical_constraints(cls: SymmetryClass, n: usize) -> Vec<Constraint> {
    use Involution::*;
    use SymmetryClass::*;
    let i_n = eye(n);
    let cc_c = kron(&pauli('j'), &i_n);
    let cc_d = kron(&pauli('x'), &i_n);
    let pp2 = kron(&pauli('z'), &i_n);
    let tt2 = kron(&pauli('j'), &i_n);
    let pp4 = kron3(&pauli('z'), &pauli('1'), &i_n);
    let tt4 = kron3(&pauli('1'), &pauli('j'), &i_n);
    let cc4 = kron3(&pauli('x'), &pauli('1'), &i_n);
    let d = cls.size_factor() * n;
    let tr = |name, m: CMat, sign| Constraint { name, kind: Transpose, matrix: m, sign };
    let cj = |name, m: CMat, sign| Constraint { name, kind: Conjugation, matrix: m, sign };
    match cls {
        A => vec![],
        AI => vec![tr("H = H^T", eye(d), 1.0)],
        AII => vec![tr("H = T H^T T^-1", tt2, 1.0)],
        AIII => vec![cj("H = -P H P^-1", pp2, -1.0)],
        BDI => vec![tr("H = H^T", eye(d), 1.0), cj("H = -P H P^-1", pp2, -1.0)],
        CII => vec![cj("H = -P H P^-1", pp4, -1.0), tr("H = -T H^T T^-1", tt4, -1.0)],
        C => vec![tr("H = -C H^T C^-1", cc_c, -1.0)],
        CI => vec![tr("H = H^T", eye(d), 1.0), tr("H = -C H^T C^-1", cc_c, -1.0)],
        D => vec![tr("H = -C H^T C^-1", cc_d, -1.0)],
        DIII => vec![tr("H = -C H^T C^-1", cc4, -1.0), tr("H = +T H^T T^-1", tt4, 1.0)],
    }
}

/// Sparse hermitian matrix stored as (row, col, value) entries.
#[derive(Clone, Debug)]
pub struct SparseHerm {
    pub entries: Vec<(usize, usize, C64)>,
}

/// Orthonormal basis (under `Tr XY`) of the constrained hermitian space.
///
/// All constraint matrices are signed permutations, so the group generated
/// by the involutions permutes the standard hermitian basis up to sign; each
/// orbit contributes at most one normalized orbit average.
pub fn constrained_basis(cls: SymmetryClass, n: usize) -> Vec<SparseHerm> {
    let d = cls.size_factor() * n;
    let cons = physical_constraints(cls, n);
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    // Standard element (i, j, kind): kind 0 diagonal, 1 symmetric, 2 antisymmetric.
    let std_entries = |i: usize, j: usize, kind: u8| -> Vec<(usize, usize, C64)> {
        match kind {
            0 => vec![(i, i, c(1.0))],
            1 => vec![(i, j, c(s2)), (j, i, c(s2))],
            _ => vec![(i, j, C64::new(0.0, s2)), (j, i, C64::new(0.0, -s2))],
        }
    };
    // Signed permutation of each constraint: column k has a single nonzero at perm[k].
    let perms: Vec<Vec<(usize, C64)>> = cons
        .iter()
        .map(|con| {
            (0..d)
                .map(|k| {
                    let r = (0..d).find(|&r| con.matrix[(r, k)].norm() > 0.5).expect("signed permutation");
                    (r, con.matrix[(r, k)])
                })
                .collect()
        })
        .collect();
    // Apply one involution to a sparse hermitian matrix.
    let act = |ci: usize, ents: &[(usize, usize, C64)]| -> Vec<(usize, usize, C64)> {
        let con = &cons[ci];
        let perm = &perms[ci];
        ents.iter()
            .map(|&(i, j, v)| {
                let (a, b) = match con.kind {
                    Involution::Transpose => (j, i),
                    Involution::Conjugation => (i, j),
                };
                // M E_ab M^{-1} = s_a conj(s_b) E_{perm a, perm b} for unitary signed permutations.
                let (pa, sa) = perm[a];
                let (pb, sb) = perm[b];
                (pa, pb, v * sa * sb.conj() * con.sign)
            })
            .collect()
    };
    let mut group: Vec<Vec<usize>> = vec![vec![]];
    for con in 0..cons.len() {
        let mut more = Vec::new();
        for g in &group {
            let mut h = g.clone();
            h.push(con);
            more.push(h);
        }
        group.extend(more);
    }
    let order = group.len() as f64;
    let mut basis = Vec::new();
    for i in 0..d {
        for j in i..d {
            let kinds: &[u8] = if i == j { &[0] } else { &[1, 2] };
            for &kind in kinds {
                let start = std_entries(i, j, kind);
                let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
                let mut minimal = true;
                for g in &group {
                    let mut e = start.clone();
                    for &con in g {
                        e = act(con, &e);
                    }
                    // Orbit representative: smallest (row, col, kind) with row <= col.
                    let &(p, q, v) = e.iter().find(|t| t.0 <= t.1).unwrap();
                    let k2 = if p == q { 0 } else if v.im.abs() > v.re.abs() { 2 } else { 1 };
                    if (p, q, k2) < (i, j, kind) {
                        minimal = false;
                        break;
                    }
                    for (p, q, v) in e {
                        *acc.entry((p, q)).or_insert(c(0.0)) += v / order;
                    }
                }
                if !minimal {
                    continue;
                }
                let ents: Vec<_> = acc.into_iter().filter(|(_, v)| v.norm() > 1e-12).map(|((p, q), v)| (p, q, v)).collect();
                if ents.is_empty() {
                    continue;
                }
                let norm: f64 = ents.iter().map(|t| t.2.norm_sqr()).sum::<f64>().sqrt();
                basis.push(SparseHerm { entries: ents.into_iter().map(|(p, q, v)| (p, q, v / norm)).collect() });
            }
        }
    }
    basis
}

/// Auxiliary-space structure matrices on `W = W_B + W_F`, each sector of
/// dimension `k`.
#[derive(Clone, Debug)]
pub struct AuxStructure {
    pub k: usize,
    pub gamma: Option<(CMat, CMat)>,
    pub tau: Option<(CMat, CMat)>,
    pub pi: Option<CMat>,
    /// Convergence matrix on `W_B`.
    pub beta: CMat,
    /// Whether the source matrix carries a `σ_z` factor.
    pub omega_sigma_z: bool,
    /// Value of `c` in the Gaussian identity where it is stated.
    pub c: Option<f64>,
}

/// Full structure record for a class.
#[derive(Clone, Debug)]
pub struct ClassStructure {
    pub cls: SymmetryClass,
    pub n_phys: usize,
    pub n_aux: usize,
    pub dim_v: usize,
    pub physical: Vec<Constraint>,
    /// Dimension of the constrained space (computed).
    pub constrained_dim: usize,
    /// Classical tangent-space dimension formula.
    pub classical_dim: usize,
    pub aux: AuxStructure,
}

/// Structure data with all `n` auxiliary indices advanced (`n_A = n`).
pub fn class_structure(cls: SymmetryClass, n_phys: usize, n_aux: usize) -> Result<ClassStructure> {
    class_structure_split(cls, n_phys, n_aux, 0)
}

/// Structure data with explicit chiral block sizes `p, q`.
pub fn class_structure_pq(cls: SymmetryClass, p: usize, q: usize, n_aux: usize) -> Result<ClassStructure> {
    if cls.chiral() && p != q {
        return Err(Error::Unsupported(format!(
            "class {} with p = {} != q = {}: only the case p = q is treated",
            cls, p, q
        )));
    }
    class_structure(cls, p, n_aux)
}

/// Structure data with `n_a` advanced and `n_r` retarded auxiliary indices
/// (only meaningful for the Wigner-Dyson classes).
pub fn class_structure_split(cls: SymmetryClass, n_phys: usize, n_a: usize, n_r: usize) -> Result<ClassStructure> {
    use SymmetryClass::*;
    let n = n_a + n_r;
    if n_phys == 0 || n == 0 {
        return Err(Error::Invalid("N >= 1 and n >= 1 required".into()));
    }
    if n_r > 0 && cls.particle_hole() {
        return Err(Error::Invalid(format!("class {} restricts all alpha to the lower half-plane", cls)));
    }
    let i_n = eye(n);
    let p = pauli;
    let b_wd = split_sign(n_a, n_r);
    let (k, gamma, tau, pi, beta, sz, cval) = match cls {
        A => (n, None, None, None, b_wd, false, Some(1.0)),
        AI => (
            2 * n,
            None,
            Some((kron(&p('x'), &i_n), kron(&p('j'), &i_n))),
            None,
            kron(&p('1'), &b_wd),
            false,
            None,
        ),
        AII => (
            2 * n,
            None,
            Some((kron(&p('j'), &i_n), kron(&p('x'), &i_n))),
            None,
            kron(&p('1'), &b_wd),
            false,
            None,
        ),
        AIII => (2 * n, None, None, Some(kron(&p('j'), &i_n)), kron(&p('z'), &i_n), true, None),
        BDI => (
            4 * n,
            None,
            Some((kron3(&p('1'), &p('x'), &i_n), kron3(&p('1'), &p('j'), &i_n))),
            Some(kron3(&p('j'), &p('1'), &i_n)),
            kron3(&p('z'), &p('1'), &i_n),
            true,
            None,
        ),
        CII => (
            4 * n,
            None,
            Some((kron3(&p('1'), &p('j'), &i_n), kron3(&p('1'), &p('x'), &i_n))),
            Some(kron3(&p('j'), &p('1'), &i_n)),
            kron3(&p('z'), &p('1'), &i_n),
            true,
            None,
        ),
        C => (
            2 * n,
            Some((kron(&p('x'), &i_n), kron(&p('j'), &i_n))),
            None,
            None,
            kron(&p('z'), &i_n),
            true,
            Some(0.5),
        ),
        D => (
            2 * n,
            Some((kron(&p('j'), &i_n), kron(&p('x'), &i_n))),
            None,
            None,
            kron(&p('z'), &i_n),
            true,
            Some(0.5),
        ),
        CI => (
            4 * n,
            Some((kron3(&p('x'), &p('z'), &i_n), kron3(&p('j'), &p('1'), &i_n))),
            Some((kron3(&p('1'), &p('x'), &i_n), kron3(&p('z'), &p('j'), &i_n))),
            None,
            kron3(&p('z'), &p('1'), &i_n),
            true,
            Some(0.25),
        ),
        DIII => (
            4 * n,
            Some((kron3(&p('j'), &p('1'), &i_n), kron3(&p('x'), &p('z'), &i_n))),
            Some((kron3(&p('z'), &p('j'), &i_n), kron3(&p('1'), &p('x'), &i_n))),
            None,
            kron3(&p('z'), &p('1'), &i_n),
            true,
            Some(0.25),
        ),
    };
    let physical = physical_constraints(cls, n_phys);
    let constrained_dim = constrained_basis(cls, n_phys).len();
    Ok(ClassStructure {
        cls,
        n_phys,
        n_aux: n,
        dim_v: cls.size_factor() * n_phys,
        physical,
        constrained_dim,
        classical_dim: cls.tangent_dim(n_phys),
        aux: AuxStructure { k, gamma, tau, pi, beta, omega_sigma_z: sz, c: cval },
    })
}

/// Supertranspose of a numeric supermatrix with `k|k` grading, odd blocks
/// holding the coefficients of odd elements.
pub fn numeric_supertranspose(x: &CMat, k: usize) -> CMat {
    let mut t = x.transpose();
    for i in k..2 * k {
        for j in 0..k {
            // block (F, B) of the result equals -X_BF^T
            t[(i, j)] = -t[(i, j)];
        }
    }
    t
}

impl ClassStructure {
    /// Even and odd superparity `σ` restricted to sectors: `σ_B = 1, σ_F = -1`.
    fn sigma_full(&self) -> CMat {
        let k = self.aux.k;
        block_diag(&eye(k), &(-eye(k)))
    }

    /// Consistency residuals of the auxiliary structure:
    /// class C and D style `γ = ±γ^T σ`, CI style `γ² = σ = τ²`, `γτ + τγ = 0`,
    /// DIII style `γ² = -σ = τ²`.
    pub fn consistency_residual(&self) -> f64 {
        use SymmetryClass::*;
        let k = self.aux.k;
        let sig = self.sigma_full();
        let full = |p: &(CMat, CMat)| block_diag(&p.0, &p.1);
        let mut r: f64 = 0.0;
        match self.cls {
            C => {
                let g = full(self.aux.gamma.as_ref().unwrap());
                r = r.max((&g - numeric_supertranspose(&g, k) * &sig).norm());
            }
            D => {
                let g = full(self.aux.gamma.as_ref().unwrap());
                r = r.max((&g + numeric_supertranspose(&g, k) * &sig).norm());
            }
            CI | DIII => {
                let g = full(self.aux.gamma.as_ref().unwrap());
                let t = full(self.aux.tau.as_ref().unwrap());
                let s = if self.cls == CI { sig.clone() } else { -sig.clone() };
                r = r.max((&g * &g - &s).norm());
                r = r.max((&t * &t - &s).norm());
                r = r.max((&g * &t + &t * &g).norm());
            }
            _ => {}
        }
        for con in &self.physical {
            let m = &con.matrix;
            let unitary = (m.adjoint() * m - eye(m.nrows())).norm();
            r = r.max(unitary);
        }
        r
    }

    /// Linear conditions `X = s G op(X) G^{-1}` defining the Lie superalgebra
    /// of the normalizer of the auxiliary Q-space.
    pub fn normalizer_conditions(&self) -> Vec<(Involution, CMat, f64)> {
        use SymmetryClass::*;
        let full = |p: &(CMat, CMat)| block_diag(&p.0, &p.1);
        let g = self.aux.gamma.as_ref().map(full);
        let t = self.aux.tau.as_ref().map(full);
        let pi = self.aux.pi.as_ref().map(|x| block_diag(x, x));
        match self.cls {
            A => vec![],
            C | D => vec![(Involution::Transpose, g.unwrap(), -1.0)],
            CI | DIII => vec![(Involution::Transpose, g.unwrap(), -1.0), (Involution::Transpose, t.unwrap(), -1.0)],
            AIII => vec![(Involution::Conjugation, pi.unwrap(), 1.0)],
            BDI | CII => vec![(Involution::Conjugation, pi.unwrap(), 1.0), (Involution::Transpose, t.unwrap(), -1.0)],
            AI | AII => vec![(Involution::Transpose, t.unwrap(), -1.0)],
        }
    }

    /// Linear conditions defining the auxiliary Q-space itself.
    pub fn q_space_conditions(&self) -> Vec<(Involution, CMat, f64)> {
        use SymmetryClass::*;
        let full = |p: &(CMat, CMat)| block_diag(&p.0, &p.1);
        let g = self.aux.gamma.as_ref().map(full);
        let t = self.aux.tau.as_ref().map(full);
        let pi = self.aux.pi.as_ref().map(|x| block_diag(x, x));
        match self.cls {
            A => vec![],
            C | D => vec![(Involution::Transpose, g.unwrap(), -1.0)],
            CI | DIII => vec![(Involution::Transpose, g.unwrap(), -1.0), (Involution::Transpose, t.unwrap(), 1.0)],
            AIII => vec![(Involution::Conjugation, pi.unwrap(), -1.0)],
            BDI | CII => vec![(Involution::Conjugation, pi.unwrap(), -1.0), (Involution::Transpose, t.unwrap(), 1.0)],
            AI | AII => vec![(Involution::Transpose, t.unwrap(), 1.0)],
        }
    }
}

/// Even and odd dimensions of `{X : X = s G op(X) G^{-1} for all conditions}`
/// inside `End(C^{k|k})`, by numerical rank.
pub fn solution_dims(k: usize, conds: &[(Involution, CMat, f64)]) -> (usize, usize) {
    let d = 2 * k;
    let coords: Vec<(usize, usize)> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).collect();
    let is_even = |i: usize, j: usize| (i < k) == (j < k);
    let mut dims = [0usize; 2];
    for (slot, parity_even) in [(0usize, true), (1usize, false)] {
        let vars: Vec<(usize, usize)> = coords.iter().copied().filter(|&(i, j)| is_even(i, j) == parity_even).collect();
        if conds.is_empty() {
            dims[slot] = vars.len();
            continue;
        }
        let rows = conds.len() * d * d;
        let mut m = CMat::zeros(rows, vars.len());
        for (col, &(i, j)) in vars.iter().enumerate() {
            let mut x = CMat::zeros(d, d);
            x[(i, j)] = c(1.0);
            for (ci, (kind, g, s)) in conds.iter().enumerate() {
                let inner = match kind {
                    Involution::Transpose => numeric_supertranspose(&x, k),
                    Involution::Conjugation => x.clone(),
                };
                let ginv = g.clone().try_inverse().expect("invertible structure matrix");
                let img = &x - (g * inner * ginv).map(|z| z * *s);
                for r in 0..d * d {
                    m[(ci * d * d + r, col)] = img[(r / d, r % d)];
                }
            }
        }
        let sv = m.singular_values();
        let rank = sv.iter().filter(|&&s| s > 1e-9).count();
        dims[slot] = vars.len() - rank;
    }
    (dims[0], dims[1])
}

/// Dimensions of the normalizer superalgebra of the auxiliary Q-space.
pub fn normalizer_dims(cls: SymmetryClass, n: usize) -> Result<(usize, usize)> {
    let s = class_structure(cls, 1, n)?;
    Ok(solution_dims(s.aux.k, &s.normalizer_conditions()))
}

/// Name and dimension of the superalgebra the normalizer should match.
pub fn expected_normalizer(cls: SymmetryClass, n: usize) -> (&'static str, (usize, usize)) {
    use SymmetryClass::*;
    let osp = 4 * n * n;
    match cls {
        A => ("gl(n|n)", (2 * n * n, 2 * n * n)),
        AIII => ("gl(n|n)+gl(n|n)", (4 * n * n, 4 * n * n)),
        BDI | CII => ("gl(2n|2n)", (8 * n * n, 8 * n * n)),
        C | D | AI | AII => ("osp(2n|2n)", (osp, osp)),
        CI | DIII => ("osp(2n|2n)+osp(2n|2n)", (2 * osp, 2 * osp)),
    }
}

/// Ensemble definition: class, size parameter and width.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub cls: SymmetryClass,
    pub n: usize,
    pub v: f64,
    pub layout: Vec<Constraint>,
    basis: std::sync::Arc<Vec<SparseHerm>>,
}

impl EnsembleSpec {
    pub fn new(cls: SymmetryClass, n: usize, v: f64) -> Result<EnsembleSpec> {
        if n == 0 {
            return Err(Error::Invalid("N >= 1 required".into()));
        }
        if !(v > 0.0) {
            return Err(Error::Invalid("width v must be positive".into()));
        }
        Ok(EnsembleSpec {
            cls,
            n,
            v,
            layout: physical_constraints(cls, n),
            basis: std::sync::Arc::new(constrained_basis(cls, n)),
        })
    }

    /// Chiral classes with explicit block sizes; `p != q` is rejected.
    pub fn with_pq(cls: SymmetryClass, p: usize, q: usize, v: f64) -> Result<EnsembleSpec> {
        if cls.chiral() && p != q {
            return Err(Error::Unsupported(format!(
                "class {} with p = {} != q = {}: only the case p = q is treated",
                cls, p, q
            )));
        }
        EnsembleSpec::new(cls, p, v)
    }

    pub fn dim(&self) -> usize {
        self.cls.size_factor() * self.n
    }

    pub fn basis(&self) -> &[SparseHerm] {
        &self.basis
    }

    /// Key-value form of the ensemble definition.
    pub fn to_kv(&self) -> String {
        format!("class={}\nN={}\nv={}\n", self.cls, self.n, self.v)
    }
}

/// Draws `H` with density proportional to `exp(-N Tr H² / 2v²)` on the
/// constrained space, as an orthonormal-basis expansion with i.i.d. normal
/// coefficients of variance `v²/N`.
pub fn sample_h(spec: &EnsembleSpec, rng: &mut Rng) -> CMat {
    let d = spec.dim();
    let sd = spec.v / (spec.n as f64).sqrt();
    let mut h = CMat::zeros(d, d);
    for e in spec.basis.iter() {
        let x: f64 = StandardNormal.sample(rng);
        let x = x * sd;
        for &(i, j, v) in &e.entries {
            h[(i, j)] += v * x;
        }
    }
    h
}

/// Largest Frobenius residual over hermiticity and the class constraints.
pub fn symmetry_residual(spec: &EnsembleSpec, h: &CMat) -> Result<f64> {
    let d = spec.dim();
    if h.nrows() != d || h.ncols() != d {
        return Err(Error::DimMismatch(format!("expected {}x{}, got {}x{}", d, d, h.nrows(), h.ncols())));
    }
    let mut r = (h - h.adjoint()).norm();
    for con in &spec.layout {
        r = r.max(con.residual(h));
    }
    Ok(r)
}

/// Closed-form second moment `∫ Tr(AH) Tr(BH) dμ(H)` per class.
pub fn second_moment_exact(spec: &EnsembleSpec, a: &CMat, b: &CMat) -> Result<C64> {
    use SymmetryClass::*;
    let d = spec.dim();
    if a.nrows() != d || a.ncols() != d || b.nrows() != d || b.ncols() != d {
        return Err(Error::DimMismatch("A and B must match the physical dimension".into()));
    }
    let n = spec.n;
    let v2 = spec.v * spec.v;
    let nf = n as f64;
    let i_n = eye(n);
    let inv = |m: &CMat| m.clone().try_inverse().unwrap();
    let conj = |m: &CMat, x: &CMat| m * x * inv(m);
    let bt = b.transpose();
    let val = match spec.cls {
        A => (a * b).trace() * (v2 / nf),
        AI => (a * (b + &bt)).trace() * (v2 / (2.0 * nf)),
        AII => {
            let t = kron(&pauli('j'), &i_n);
            (a * (b + conj(&t, &bt))).trace() * (v2 / (2.0 * nf))
        }
        AIII => {
            let p = kron(&pauli('z'), &i_n);
            (a * b - a * conj(&p, b)).trace() * (v2 / (2.0 * nf))
        }
        BDI => {
            let p = kron(&pauli('z'), &i_n);
            let s = b + &bt;
            (a * &s - a * conj(&p, &s)).trace() * (v2 / (4.0 * nf))
        }
        CII => {
            let p = kron3(&pauli('z'), &pauli('1'), &i_n);
            let t = kron3(&pauli('1'), &pauli('j'), &i_n);
            ((a - conj(&p, a)) * (b - conj(&t, &bt))).trace() * (v2 / (4.0 * nf))
        }
        C | D => {
            let cm = if spec.cls == C { kron(&pauli('j'), &i_n) } else { kron(&pauli('x'), &i_n) };
            (a * b - a * conj(&cm, &bt)).trace() * (v2 / (2.0 * nf))
        }
        CI => {
            let cm = kron(&pauli('j'), &i_n);
            let s = b + &bt;
            (a * &s - a * conj(&cm, &s)).trace() * (v2 / (4.0 * nf))
        }
        DIII => {
            let cm = kron3(&pauli('x'), &pauli('1'), &i_n);
            let t = kron3(&pauli('1'), &pauli('j'), &i_n);
            let ct = &cm * &t;
            (a * b - a * conj(&cm, &bt) + a * conj(&t, &bt) - a * conj(&ct, b)).trace() * (v2 / (4.0 * nf))
        }
    };
    Ok(val)
}

/// Monte Carlo estimate of the second moment with its standard error.
pub fn second_moment_mc(spec: &EnsembleSpec, a: &CMat, b: &CMat, nsamples: usize, seed: u64) -> Result<(C64, f64)> {
    if nsamples < 2 {
        return Err(Error::Invalid("nsamples >= 2 required".into()));
    }
    let d = spec.dim();
    if a.nrows() != d || b.nrows() != d {
        return Err(Error::DimMismatch("A and B must match the physical dimension".into()));
    }
    let st = mc_stats(seed, nsamples, |rng| {
        let h = sample_h(spec, rng);
        (a * &h).trace() * (b * &h).trace()
    });
    Ok((st.mean(), st.stderr()))
}

/// Ascending real spectrum of a self-adjoint matrix.
pub fn eigenvalues(h: &CMat) -> Result<Vec<f64>> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimMismatch("square matrix required".into()));
    }
    let scale = h.norm().max(1.0);
    if (h - h.adjoint()).norm() > 1e-10 * scale {
        return Err(Error::Invalid("matrix is not self-adjoint".into()));
    }
    let mut ev: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::substream;

    #[test]
    fn class_c_n1_form() {
        let spec = EnsembleSpec::new(SymmetryClass::C, 1, 1.0).unwrap();
        let mut rng = substream(3, 0);
        let h = sample_h(&spec, &mut rng);
        assert!(h[(0, 0)].im.abs() < 1e-15);
        assert!((h[(1, 1)] + h[(0, 0)]).norm() < 1e-15);
        assert!((h[(1, 0)] - h[(0, 1)].conj()).norm() < 1e-15);
        let ev = eigenvalues(&h).unwrap();
        let r = (h[(0, 0)].re.powi(2) + h[(0, 1)].norm_sqr()).sqrt();
        assert!((ev[1] - r).abs() < 1e-12 && (ev[0] + r).abs() < 1e-12);
    }

    #[test]
    fn dimensions_match_classical() {
        for cls in SymmetryClass::ALL {
            for n in 1..=3 {
                assert_eq!(constrained_basis(cls, n).len(), cls.tangent_dim(n), "{} N={}", cls, n);
            }
        }
    }

    #[test]
    fn generic_hermitian_violates_class_c() {
        let spec = EnsembleSpec::new(SymmetryClass::C, 2, 1.0).unwrap();
        let h = CMat::from_fn(4, 4, |i, j| if i == j { c(1.0 + i as f64) } else { c(0.3) });
        assert!(symmetry_residual(&spec, &h).unwrap() > 0.1);
        assert!(symmetry_residual(&spec, &CMat::zeros(3, 3)).is_err());
    }

    #[test]
    fn pq_restriction() {
        assert!(matches!(EnsembleSpec::with_pq(SymmetryClass::AIII, 2, 3, 1.0), Err(Error::Unsupported(_))));
        assert!(EnsembleSpec::with_pq(SymmetryClass::AIII, 2, 2, 1.0).is_ok());
    }

    #[test]
    fn non_hermitian_rejected() {
        let h = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(eigenvalues(&h).is_err());
        assert_eq!(eigenvalues(&CMat::zeros(3, 3)).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn normalizers_and_consistency() {
        for cls in SymmetryClass::ALL {
            let got = normalizer_dims(cls, 1).unwrap();
            assert_eq!(got, expected_normalizer(cls, 1).1, "{}", cls);
            let s = class_structure(cls, 2, 1).unwrap();
            assert!(s.consistency_residual() < 1e-12, "{}", cls);
        }
    }

    #[test]
    fn covariance_matches_mc() {
        for cls in SymmetryClass::ALL {
            let spec = EnsembleSpec::new(cls, 2, 0.8).unwrap();
            let d = spec.dim();
            let a = CMat::from_fn(d, d, |i, j| C64::new((i + 2 * j) as f64 * 0.1 - 0.3, (i as f64 - j as f64) * 0.07));
            let b = CMat::from_fn(d, d, |i, j| C64::new(((3 * i + j) % 5) as f64 * 0.2 - 0.4, (i * j) as f64 * 0.05));
            let exact = second_moment_exact(&spec, &a, &b).unwrap();
            let (mc, se) = second_moment_mc(&spec, &a, &b, 40_000, 11).unwrap();
            assert!((mc - exact).norm() < 5.0 * se + 1e-12, "{}: exact {} mc {} se {}", cls, exact, mc, se);
        }
    }
}
