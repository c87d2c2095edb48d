//! Grassmann algebra and supermatrix kernel.
//!
//! Generators are indexed from 0. Berezin derivatives are left derivatives;
//! the Berezin integral over all generators applies `∂_{q-1}` first and `∂_0`
//! last, so that `∂_0 ∂_1 (ξ0 ξ1) = -1`.

use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU32, Ordering};

static NEXT_POOL: AtomicU32 = AtomicU32::new(1);

/// Largest pool for which products are accumulated in a dense buffer.
const DENSE_LIMIT: usize = 12;
/// Hard limit given by the bitmask representation.
pub const MAX_GENERATORS: usize = 63;

/// Registry entry for a set of anticommuting generators.
///
/// Pools are append-only: [`Pool::extended`] keeps the id, so elements built
/// before the extension stay compatible with elements built after it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pool {
    id: u32,
    size: usize,
}

impl Pool {
    pub fn new(size: usize) -> Pool {
        assert!(size <= MAX_GENERATORS, "pool too large");
        Pool { id: NEXT_POOL.fetch_add(1, Ordering::Relaxed), size }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Same pool with `extra` generators appended.
    pub fn extended(&self, extra: usize) -> Pool {
        assert!(self.size + extra <= MAX_GENERATORS, "pool too large");
        Pool { id: self.id, size: self.size + extra }
    }

    pub fn zero(&self) -> GrassmannElement {
        GrassmannElement { pool: *self, terms: Vec::new() }
    }

    pub fn one(&self) -> GrassmannElement {
        self.scalar(C64::new(1.0, 0.0))
    }

    pub fn scalar(&self, c: C64) -> GrassmannElement {
        GrassmannElement::from_terms(*self, vec![(0, c)])
    }

    pub fn real(&self, x: f64) -> GrassmannElement {
        self.scalar(C64::new(x, 0.0))
    }

    /// The generator with index `k`.
    pub fn gen(&self, k: usize) -> GrassmannElement {
        assert!(k < self.size, "generator {} outside pool of size {}", k, self.size);
        GrassmannElement::from_terms(*self, vec![(1u64 << k, C64::new(1.0, 0.0))])
    }

    /// Product of generators in the given order.
    pub fn monomial(&self, ks: &[usize]) -> GrassmannElement {
        ks.iter().fold(self.one(), |acc, &k| &acc * &self.gen(k))
    }
}

/// Parity of a Grassmann element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

/// Element of the complex Grassmann algebra over a pool.
///
/// `terms` is sorted by bitmask and never stores an exactly zero coefficient.
#[derive(Clone, PartialEq)]
pub struct GrassmannElement {
    pool: Pool,
    terms: Vec<(u64, C64)>,
}

/// Sign from moving the generators of `b` to the right of those of `a`.
#[inline]
fn merge_sign(a: u64, b: u64) -> f64 {
    let mut s = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        s += (a >> j >> 1).count_ones();
        bb &= bb - 1;
    }
    if s & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

fn canonical(mut terms: Vec<(u64, C64)>) -> Vec<(u64, C64)> {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(u64, C64)> = Vec::with_capacity(terms.len());
    for (m, c) in terms {
        match out.last_mut() {
            Some(last) if last.0 == m => last.1 += c,
            _ => out.push((m, c)),
        }
    }
    out.retain(|t| t.1 != C64::new(0.0, 0.0));
    out
}

impl GrassmannElement {
    /// Builds an element from arbitrary (mask, coefficient) pairs.
    pub fn from_terms(pool: Pool, terms: Vec<(u64, C64)>) -> GrassmannElement {
        let limit = if pool.size >= 64 { u64::MAX } else { (1u64 << pool.size) - 1 };
        assert!(terms.iter().all(|t| t.0 & !limit == 0), "monomial outside pool");
        GrassmannElement { pool, terms: canonical(terms) }
    }

    pub fn pool(&self) -> Pool {
        self.pool
    }

    pub fn num_generators(&self) -> usize {
        self.pool.size
    }

    pub fn terms(&self) -> &[(u64, C64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, mask: u64) -> C64 {
        match self.terms.binary_search_by_key(&mask, |t| t.0) {
            Ok(i) => self.terms[i].1,
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Coefficient of the empty monomial.
    pub fn body(&self) -> C64 {
        self.coeff(0)
    }

    /// Element with the body removed.
    pub fn soul(&self) -> GrassmannElement {
        GrassmannElement {
            pool: self.pool,
            terms: self.terms.iter().copied().filter(|t| t.0 != 0).collect(),
        }
    }

    pub fn parity(&self) -> Parity {
        let even = self.terms.iter().all(|t| t.0.count_ones() % 2 == 0);
        let odd = self.terms.iter().all(|t| t.0.count_ones() % 2 == 1);
        match (even, odd) {
            (true, _) => Parity::Even,
            (false, true) => Parity::Odd,
            _ => Parity::Mixed,
        }
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.terms.iter().map(|t| t.1.norm()).fold(0.0, f64::max)
    }

    fn check_pool(&self, other: &GrassmannElement) -> Result<Pool> {
        if self.pool.id != other.pool.id {
            return Err(Error::PoolMismatch(self.pool.id, other.pool.id));
        }
        Ok(if self.pool.size >= other.pool.size { self.pool } else { other.pool })
    }

    pub fn try_add(&self, other: &GrassmannElement) -> Result<GrassmannElement> {
        let pool = self.check_pool(other)?;
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push(b[j]);
                j += 1;
            } else {
                let c = a[i].1 + b[j].1;
                if c != C64::new(0.0, 0.0) {
                    out.push((a[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        Ok(GrassmannElement { pool, terms: out })
    }

    pub fn scale(&self, c: C64) -> GrassmannElement {
        GrassmannElement {
            pool: self.pool,
            terms: self
                .terms
                .iter()
                .map(|&(m, x)| (m, x * c))
                .filter(|t| t.1 != C64::new(0.0, 0.0))
                .collect(),
        }
    }

    pub fn scale_re(&self, x: f64) -> GrassmannElement {
        self.scale(C64::new(x, 0.0))
    }

    pub fn try_mul(&self, other: &GrassmannElement) -> Result<GrassmannElement> {
        let pool = self.check_pool(other)?;
        if self.terms.is_empty() || other.terms.is_empty() {
            return Ok(pool.zero());
        }
        let terms = if pool.size <= DENSE_LIMIT {
            let mut buf = vec![C64::new(0.0, 0.0); 1usize << pool.size];
            let mut hit = vec![false; 1usize << pool.size];
            for &(ma, ca) in &self.terms {
                for &(mb, cb) in &other.terms {
                    if ma & mb == 0 {
                        let m = (ma | mb) as usize;
                        buf[m] += ca * cb * merge_sign(ma, mb);
                        hit[m] = true;
                    }
                }
            }
            buf.into_iter()
                .enumerate()
                .filter(|(m, c)| hit[*m] && *c != C64::new(0.0, 0.0))
                .map(|(m, c)| (m as u64, c))
                .collect()
        } else {
            let mut raw = Vec::with_capacity(self.terms.len() * other.terms.len());
            for &(ma, ca) in &self.terms {
                for &(mb, cb) in &other.terms {
                    if ma & mb == 0 {
                        raw.push((ma | mb, ca * cb * merge_sign(ma, mb)));
                    }
                }
            }
            canonical(raw)
        };
        Ok(GrassmannElement { pool, terms })
    }

    /// Left derivative with respect to generator `k`.
    pub fn derive(&self, k: usize) -> Result<GrassmannElement> {
        if k >= self.pool.size {
            return Err(Error::GeneratorIndex { index: k, size: self.pool.size });
        }
        let bit = 1u64 << k;
        let below = bit - 1;
        let terms = self
            .terms
            .iter()
            .filter(|t| t.0 & bit != 0)
            .map(|&(m, c)| {
                let s = if (m & below).count_ones() % 2 == 1 { -c } else { c };
                (m & !bit, s)
            })
            .collect();
        Ok(GrassmannElement { pool: self.pool, terms: canonical(terms) })
    }

    /// Berezin integral over the listed generators: `∂_{ks[0]} ... ∂_{ks[last]}`,
    /// with the rightmost derivative applied first.
    pub fn berezin(&self, ks: &[usize]) -> Result<GrassmannElement> {
        let mut x = self.clone();
        for &k in ks.iter().rev() {
            x = x.derive(k)?;
        }
        Ok(x)
    }

    /// Full Berezin integral `∂_0 ∂_1 ... ∂_{q-1}` returned as a number.
    pub fn berezin_top(&self) -> C64 {
        let q = self.pool.size;
        let full = if q >= 64 { u64::MAX } else { (1u64 << q) - 1 };
        // Applying ∂_{q-1}, ..., ∂_0 to ξ0...ξ_{q-1} gives (-1)^{q(q-1)/2}.
        let c = self.coeff(full);
        if (q * q.saturating_sub(1) / 2) % 2 == 1 {
            -c
        } else {
            c
        }
    }

    /// Integer power with nonnegative exponent.
    pub fn powi(&self, k: u32) -> GrassmannElement {
        let mut out = self.pool.one();
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Sum of a power series in the soul around the body:
    /// `Σ_k coeffs(k) soul^k` where the series terminates by nilpotency.
    fn soul_series(&self, mut coeff: impl FnMut(usize) -> C64) -> GrassmannElement {
        let n = self.soul();
        let mut out = self.pool.scalar(coeff(0));
        let mut p = self.pool.one();
        let mut k = 1;
        loop {
            p = &p * &n;
            if p.is_zero() {
                break;
            }
            out = &out + &p.scale(coeff(k));
            k += 1;
        }
        out
    }

    pub fn exp(&self) -> GrassmannElement {
        let e = self.body().exp();
        let mut fact = 1.0;
        self.soul_series(|k| {
            if k > 0 {
                fact *= k as f64;
            }
            e / fact
        })
    }

    /// Principal-branch logarithm.
    pub fn log(&self) -> Result<GrassmannElement> {
        let c = self.body();
        if c == C64::new(0.0, 0.0) {
            return Err(Error::SingularBody("logarithm of element with zero body".into()));
        }
        let ci = c.inv();
        Ok(self.soul_series(|k| {
            if k == 0 {
                c.ln()
            } else {
                let s = if k % 2 == 1 { 1.0 } else { -1.0 };
                ci.powi(k as i32) * (s / k as f64)
            }
        }))
    }

    pub fn inv(&self) -> Result<GrassmannElement> {
        let c = self.body();
        if c == C64::new(0.0, 0.0) {
            return Err(Error::SingularBody("inverse of element with zero body".into()));
        }
        let ci = c.inv();
        Ok(self.soul_series(|k| {
            let s = if k % 2 == 1 { -1.0 } else { 1.0 };
            ci.powi(k as i32 + 1) * s
        }))
    }

    /// Complex power `self^s = exp(s log self)` on the principal branch.
    pub fn powc(&self, s: C64) -> Result<GrassmannElement> {
        Ok(self.log()?.scale(s).exp())
    }

    /// Debug rendering with monomials sorted by degree then index.
    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut ts = self.terms.clone();
        ts.sort_by_key(|t| (t.0.count_ones(), t.0.reverse_bits()));
        let mut s = String::new();
        for (i, (m, c)) in ts.iter().enumerate() {
            if i > 0 {
                s.push_str(" + ");
            }
            s.push_str(&format!("({}{:+}i)", c.re, c.im));
            let mut mm = *m;
            while mm != 0 {
                let k = mm.trailing_zeros();
                s.push_str(&format!("ξ{}", k + 1));
                mm &= mm - 1;
            }
        }
        s
    }
}

impl fmt::Debug for GrassmannElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

impl Add for &GrassmannElement {
    type Output = GrassmannElement;
    fn add(self, rhs: &GrassmannElement) -> GrassmannElement {
        self.try_add(rhs).expect("pool mismatch")
    }
}

impl Sub for &GrassmannElement {
    type Output = GrassmannElement;
    fn sub(self, rhs: &GrassmannElement) -> GrassmannElement {
        self.try_add(&-rhs).expect("pool mismatch")
    }
}

impl Mul for &GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, rhs: &GrassmannElement) -> GrassmannElement {
        self.try_mul(rhs).expect("pool mismatch")
    }
}

impl Neg for &GrassmannElement {
    type Output = GrassmannElement;
    fn neg(self) -> GrassmannElement {
        GrassmannElement { pool: self.pool, terms: self.terms.iter().map(|&(m, c)| (m, -c)).collect() }
    }
}

/// Graded-commutative product.
pub fn g_mul(a: &GrassmannElement, b: &GrassmannElement) -> Result<GrassmannElement> {
    a.try_mul(b)
}

/// Left Berezin derivative with respect to generator `k`.
pub fn g_derive(a: &GrassmannElement, k: usize) -> Result<GrassmannElement> {
    a.derive(k)
}

pub fn g_exp(a: &GrassmannElement) -> GrassmannElement {
    a.exp()
}

pub fn g_log(a: &GrassmannElement) -> Result<GrassmannElement> {
    a.log()
}

/// Matrix with Grassmann entries and independent row and column gradings.
///
/// Rows `0..rows.0` and columns `0..cols.0` are even; the rest are odd. Entry
/// `(i, j)` must have parity `|i| + |j|`.
#[derive(Clone, PartialEq)]
pub struct SuperMatrix {
    pool: Pool,
    rows: (usize, usize),
    cols: (usize, usize),
    entries: Vec<GrassmannElement>,
}

impl SuperMatrix {
    pub fn new(
        pool: Pool,
        rows: (usize, usize),
        cols: (usize, usize),
        entries: Vec<GrassmannElement>,
    ) -> Result<SuperMatrix> {
        let (nr, nc) = (rows.0 + rows.1, cols.0 + cols.1);
        if entries.len() != nr * nc {
            return Err(Error::DimMismatch(format!("expected {} entries, got {}", nr * nc, entries.len())));
        }
        for i in 0..nr {
            for j in 0..nc {
                let e = &entries[i * nc + j];
                if e.pool.id != pool.id {
                    return Err(Error::PoolMismatch(pool.id, e.pool.id));
                }
                let want = ((i >= rows.0) as u8 + (j >= cols.0) as u8) % 2;
                let ok = e.is_zero()
                    || matches!((e.parity(), want), (Parity::Even, 0) | (Parity::Odd, 1));
                if !ok {
                    return Err(Error::Parity(format!("entry ({}, {}) is {:?}", i, j, e.parity())));
                }
            }
        }
        Ok(SuperMatrix { pool, rows, cols, entries })
    }

    /// Square supermatrix from its four blocks, each given row-major.
    pub fn from_blocks(
        pool: Pool,
        m: usize,
        n: usize,
        g00: Vec<GrassmannElement>,
        g01: Vec<GrassmannElement>,
        g10: Vec<GrassmannElement>,
        g11: Vec<GrassmannElement>,
    ) -> Result<SuperMatrix> {
        if g00.len() != m * m || g01.len() != m * n || g10.len() != n * m || g11.len() != n * n {
            return Err(Error::DimMismatch("block sizes".into()));
        }
        let d = m + n;
        let mut e = vec![pool.zero(); d * d];
        for i in 0..m {
            for j in 0..m {
                e[i * d + j] = g00[i * m + j].clone();
            }
            for j in 0..n {
                e[i * d + m + j] = g01[i * n + j].clone();
            }
        }
        for i in 0..n {
            for j in 0..m {
                e[(m + i) * d + j] = g10[i * m + j].clone();
            }
            for j in 0..n {
                e[(m + i) * d + m + j] = g11[i * n + j].clone();
            }
        }
        SuperMatrix::new(pool, (m, n), (m, n), e)
    }

    /// Numeric even supermatrix (off-diagonal blocks must vanish).
    pub fn from_complex(pool: Pool, m: usize, n: usize, a: &DMatrix<C64>) -> Result<SuperMatrix> {
        let d = m + n;
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::DimMismatch("numeric matrix size".into()));
        }
        let e = (0..d * d).map(|k| pool.scalar(a[(k / d, k % d)])).collect();
        SuperMatrix::new(pool, (m, n), (m, n), e)
    }

    pub fn zeros(pool: Pool, rows: (usize, usize), cols: (usize, usize)) -> SuperMatrix {
        let k = (rows.0 + rows.1) * (cols.0 + cols.1);
        SuperMatrix { pool, rows, cols, entries: vec![pool.zero(); k] }
    }

    pub fn identity(pool: Pool, m: usize, n: usize) -> SuperMatrix {
        let mut z = SuperMatrix::zeros(pool, (m, n), (m, n));
        for i in 0..m + n {
            z.entries[i * (m + n) + i] = pool.one();
        }
        z
    }

    /// Superparity matrix `diag(1_m, -1_n)`.
    pub fn sigma(pool: Pool, m: usize, n: usize) -> SuperMatrix {
        let mut z = SuperMatrix::identity(pool, m, n);
        for i in m..m + n {
            z.entries[i * (m + n) + i] = pool.real(-1.0);
        }
        z
    }

    /// Diagonal even supermatrix with numeric entries.
    pub fn diag(pool: Pool, d0: &[C64], d1: &[C64]) -> SuperMatrix {
        let (m, n) = (d0.len(), d1.len());
        let mut z = SuperMatrix::zeros(pool, (m, n), (m, n));
        for (i, c) in d0.iter().chain(d1.iter()).enumerate() {
            z.entries[i * (m + n) + i] = pool.scalar(*c);
        }
        z
    }

    pub fn pool(&self) -> Pool {
        self.pool
    }

    pub fn rows(&self) -> (usize, usize) {
        self.rows
    }

    pub fn cols(&self) -> (usize, usize) {
        self.cols
    }

    pub fn nrows(&self) -> usize {
        self.rows.0 + self.rows.1
    }

    pub fn ncols(&self) -> usize {
        self.cols.0 + self.cols.1
    }

    pub fn get(&self, i: usize, j: usize) -> &GrassmannElement {
        &self.entries[i * self.ncols() + j]
    }

    /// Sets an entry, enforcing the parity pattern.
    pub fn set(&mut self, i: usize, j: usize, x: GrassmannElement) -> Result<()> {
        let want = ((i >= self.rows.0) as u8 + (j >= self.cols.0) as u8) % 2;
        let ok = x.is_zero() || matches!((x.parity(), want), (Parity::Even, 0) | (Parity::Odd, 1));
        if !ok {
            return Err(Error::Parity(format!("entry ({}, {}) is {:?}", i, j, x.parity())));
        }
        if x.pool.id != self.pool.id {
            return Err(Error::PoolMismatch(self.pool.id, x.pool.id));
        }
        let nc = self.ncols();
        self.entries[i * nc + j] = x;
        Ok(())
    }

    pub fn entries(&self) -> &[GrassmannElement] {
        &self.entries
    }

    /// Numeric matrix of bodies.
    pub fn body(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| self.get(i, j).body())
    }

    /// Entrywise map, keeping gradings (caller keeps parities valid).
    pub fn map(&self, f: impl Fn(&GrassmannElement) -> GrassmannElement) -> SuperMatrix {
        SuperMatrix {
            pool: self.pool,
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> SuperMatrix {
        self.map(|x| x.scale(c))
    }

    pub fn try_add(&self, other: &SuperMatrix) -> Result<SuperMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimMismatch("addition".into()));
        }
        let mut entries = Vec::with_capacity(self.entries.len());
        for (a, b) in self.entries.iter().zip(&other.entries) {
            entries.push(a.try_add(b)?);
        }
        Ok(SuperMatrix { pool: self.pool, rows: self.rows, cols: self.cols, entries })
    }

    pub fn try_sub(&self, other: &SuperMatrix) -> Result<SuperMatrix> {
        self.try_add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Square block `(bi, bj)` with entries row-major.
    pub fn block(&self, bi: usize, bj: usize) -> Vec<GrassmannElement> {
        let (r0, r1) = if bi == 0 { (0, self.rows.0) } else { (self.rows.0, self.nrows()) };
        let (c0, c1) = if bj == 0 { (0, self.cols.0) } else { (self.cols.0, self.ncols()) };
        let mut out = Vec::with_capacity((r1 - r0) * (c1 - c0));
        for i in r0..r1 {
            for j in c0..c1 {
                out.push(self.get(i, j).clone());
            }
        }
        out
    }

    /// Largest coefficient modulus over all entries.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.max_abs()).fold(0.0, f64::max)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for i in 0..self.nrows() {
            let row: Vec<String> = (0..self.ncols()).map(|j| self.get(i, j).render()).collect();
            s.push_str(&format!("[{}]\n", row.join(", ")));
        }
        s
    }
}

impl fmt::Debug for SuperMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SuperMatrix{:?}x{:?}\n{}", self.rows, self.cols, self.render())
    }
}

/// Plain matrix product of Grassmann-valued matrices stored row-major.
fn gmat_mul(pool: Pool, a: &[GrassmannElement], b: &[GrassmannElement], r: usize, k: usize, c: usize) -> Vec<GrassmannElement> {
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            let mut acc = pool.zero();
            for l in 0..k {
                let (x, y) = (&a[i * k + l], &b[l * c + j]);
                if !x.is_zero() && !y.is_zero() {
                    acc = &acc + &(x * y);
                }
            }
            out.push(acc);
        }
    }
    out
}

pub fn s_mul(a: &SuperMatrix, b: &SuperMatrix) -> Result<SuperMatrix> {
    if a.pool.id != b.pool.id {
        return Err(Error::PoolMismatch(a.pool.id, b.pool.id));
    }
    if a.cols != b.rows {
        return Err(Error::DimMismatch(format!("{:?} times {:?}", a.cols, b.rows)));
    }
    let entries = gmat_mul(a.pool, &a.entries, &b.entries, a.nrows(), a.ncols(), b.ncols());
    Ok(SuperMatrix { pool: a.pool, rows: a.rows, cols: b.cols, entries })
}

/// Supertransposition: `(A^T)_{ji} = (-1)^{(|i|+|j|)|j|} A_{ij}`, which for a
/// square matrix reads `[[A00^T, A10^T], [-A01^T, A11^T]]`.
pub fn s_transpose(a: &SuperMatrix) -> SuperMatrix {
    let (nr, nc) = (a.nrows(), a.ncols());
    let mut entries = Vec::with_capacity(nr * nc);
    for j in 0..nc {
        for i in 0..nr {
            let pi = (i >= a.rows.0) as usize;
            let pj = (j >= a.cols.0) as usize;
            let x = a.get(i, j);
            entries.push(if ((pi + pj) * pj) % 2 == 1 { -x } else { x.clone() });
        }
    }
    SuperMatrix { pool: a.pool, rows: a.cols, cols: a.rows, entries }
}

pub fn s_trace(a: &SuperMatrix) -> Result<GrassmannElement> {
    if a.rows != a.cols {
        return Err(Error::DimMismatch("supertrace of non-square grading".into()));
    }
    let mut acc = a.pool.zero();
    for i in 0..a.nrows() {
        if i < a.rows.0 {
            acc = &acc + a.get(i, i);
        } else {
            acc = &acc - a.get(i, i);
        }
    }
    Ok(acc)
}

/// Determinant of a matrix of even (mutually commuting) elements by
/// elimination with pivoting on the body.
pub fn even_det(pool: Pool, a: &[GrassmannElement], k: usize) -> Result<GrassmannElement> {
    let mut m = a.to_vec();
    let mut det = pool.one();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&x, &y| m[x * k + col].body().norm().total_cmp(&m[y * k + col].body().norm()))
            .unwrap();
        if m[piv * k + col].body().norm() == 0.0 {
            return Err(Error::SingularBody("even matrix with singular body".into()));
        }
        if piv != col {
            for j in 0..k {
                m.swap(piv * k + j, col * k + j);
            }
            det = -&det;
        }
        let p = m[col * k + col].clone();
        det = &det * &p;
        let pinv = p.inv()?;
        for r in col + 1..k {
            let f = &m[r * k + col] * &pinv;
            if f.is_zero() {
                continue;
            }
            for j in col..k {
                let t = &f * &m[col * k + j];
                m[r * k + j] = &m[r * k + j] - &t;
            }
        }
    }
    Ok(det)
}

/// Inverse of a matrix of even elements by Gauss-Jordan elimination.
pub fn even_inv(pool: Pool, a: &[GrassmannElement], k: usize) -> Result<Vec<GrassmannElement>> {
    let mut m = a.to_vec();
    let mut inv: Vec<GrassmannElement> =
        (0..k * k).map(|x| if x / k == x % k { pool.one() } else { pool.zero() }).collect();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&x, &y| m[x * k + col].body().norm().total_cmp(&m[y * k + col].body().norm()))
            .unwrap();
        if m[piv * k + col].body().norm() == 0.0 {
            return Err(Error::SingularBody("even matrix with singular body".into()));
        }
        if piv != col {
            for j in 0..k {
                m.swap(piv * k + j, col * k + j);
                inv.swap(piv * k + j, col * k + j);
            }
        }
        let pinv = m[col * k + col].inv()?;
        for j in 0..k {
            m[col * k + j] = &m[col * k + j] * &pinv;
            inv[col * k + j] = &inv[col * k + j] * &pinv;
        }
        for r in 0..k {
            if r == col {
                continue;
            }
            let f = m[r * k + col].clone();
            if f.is_zero() {
                continue;
            }
            for j in 0..k {
                let t = &f * &m[col * k + j];
                m[r * k + j] = &m[r * k + j] - &t;
                let t = &f * &inv[col * k + j];
                inv[r * k + j] = &inv[r * k + j] - &t;
            }
        }
    }
    Ok(inv)
}

fn check_square(a: &SuperMatrix) -> Result<(usize, usize)> {
    if a.rows != a.cols {
        return Err(Error::DimMismatch("square grading required".into()));
    }
    Ok(a.rows)
}

/// Superdeterminant `Det(A00 - A01 A11^{-1} A10) / Det(A11)`.
pub fn s_det(a: &SuperMatrix) -> Result<GrassmannElement> {
    let (m, n) = check_square(a)?;
    let p = a.pool;
    let (g00, g01, g10, g11) = (a.block(0, 0), a.block(0, 1), a.block(1, 0), a.block(1, 1));
    let d11 = if n > 0 { even_det(p, &g11, n)? } else { p.one() };
    if m == 0 {
        return d11.inv();
    }
    let schur = if n > 0 {
        let i11 = even_inv(p, &g11, n)?;
        let t = gmat_mul(p, &g01, &i11, m, n, n);
        let t = gmat_mul(p, &t, &g10, m, n, m);
        g00.iter().zip(&t).map(|(x, y)| x - y).collect()
    } else {
        g00
    };
    let d = even_det(p, &schur, m)?;
    Ok(&d * &d11.inv()?)
}

/// Block inverse via Schur complements.
pub fn s_inv(a: &SuperMatrix) -> Result<SuperMatrix> {
    let (m, n) = check_square(a)?;
    let p = a.pool;
    if n == 0 {
        let e = even_inv(p, &a.entries, m)?;
        return Ok(SuperMatrix { pool: p, rows: a.rows, cols: a.cols, entries: e });
    }
    if m == 0 {
        let e = even_inv(p, &a.entries, n)?;
        return Ok(SuperMatrix { pool: p, rows: a.rows, cols: a.cols, entries: e });
    }
    let (g00, g01, g10, g11) = (a.block(0, 0), a.block(0, 1), a.block(1, 0), a.block(1, 1));
    let i11 = even_inv(p, &g11, n)?;
    let a01i11 = gmat_mul(p, &g01, &i11, m, n, n);
    let t = gmat_mul(p, &a01i11, &g10, m, n, m);
    let schur: Vec<_> = g00.iter().zip(&t).map(|(x, y)| x - y).collect();
    let si = even_inv(p, &schur, m)?;
    let i11a10 = gmat_mul(p, &i11, &g10, n, n, m);
    let b01: Vec<_> = gmat_mul(p, &si, &a01i11, m, m, n).iter().map(|x| -x).collect();
    let b10: Vec<_> = gmat_mul(p, &i11a10, &si, n, m, m).iter().map(|x| -x).collect();
    let corr = gmat_mul(p, &i11a10, &si, n, m, m);
    let corr = gmat_mul(p, &corr, &a01i11, n, m, n);
    let b11: Vec<_> = i11.iter().zip(&corr).map(|(x, y)| x + y).collect();
    SuperMatrix::from_blocks(p, m, n, si, b01, b10, b11)
}

/// Matrix exponential by scaling and squaring of the Taylor series.
pub fn s_exp(a: &SuperMatrix) -> Result<SuperMatrix> {
    let (m, n) = check_square(a)?;
    let d = m + n;
    let b = a.body();
    let norm = (0..d).map(|i| (0..d).map(|j| b[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let x = a.scale(C64::new(0.5f64.powi(s), 0.0));
    let mut term = SuperMatrix::identity(a.pool, m, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = s_mul(&term, &x)?.scale(C64::new(1.0 / k as f64, 0.0));
        if term.max_abs() == 0.0 {
            break;
        }
        sum = sum.try_add(&term)?;
    }
    for _ in 0..s {
        sum = s_mul(&sum, &sum)?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn anticommutation_and_distributivity() {
        let p = Pool::new(4);
        let (x1, x2) = (p.gen(0), p.gen(1));
        assert_eq!(&x2 * &x1, -&(&x1 * &x2));
        let lhs = &(&p.one() + &x1) * &(&p.one() + &x2);
        let rhs = &(&(&p.one() + &x1) + &x2) + &(&x1 * &x2);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn four_generator_product() {
        let p = Pool::new(4);
        let a = p.monomial(&[0, 1]).scale(c(2.0));
        let b = p.monomial(&[2, 3]).scale(c(3.0));
        let prod = &a * &b;
        assert_eq!(prod.terms(), &[(0b1111, c(6.0))]);
    }

    #[test]
    fn derivative_examples() {
        let p = Pool::new(3);
        assert_eq!(p.gen(0).derive(0).unwrap(), p.one());
        let x21 = p.monomial(&[1, 0]);
        assert_eq!(x21.derive(0).unwrap(), -&p.gen(1));
        let y = &p.one() + &p.monomial(&[0, 1]);
        assert!(y.derive(2).unwrap().is_zero());
        assert!(p.gen(0).derive(5).is_err());
        assert_eq!(p.monomial(&[0, 1]).berezin_top(), c(0.0));
        let q2 = Pool::new(2);
        assert_eq!(q2.monomial(&[0, 1]).berezin_top(), c(-1.0));
        assert_eq!(q2.monomial(&[0, 1]).berezin(&[0, 1]).unwrap(), q2.real(-1.0));
    }

    #[test]
    fn exp_log_examples() {
        let p = Pool::new(4);
        assert_eq!(p.zero().exp(), p.one());
        let cc = C64::new(0.3, -0.2);
        let a = &p.scalar(cc) + &p.monomial(&[0, 1]);
        let want = (&p.one() + &p.monomial(&[0, 1])).scale(cc.exp());
        assert!((&a.exp() - &want).max_abs() < 1e-15);
        let x = &(&p.one() + &p.monomial(&[0, 1]).scale(c(2.0))) + &p.monomial(&[2, 3]);
        let want = &(&p.monomial(&[0, 1]).scale(c(2.0)) + &p.monomial(&[2, 3])) - &p.monomial(&[0, 1, 2, 3]).scale(c(2.0));
        assert!((&x.log().unwrap() - &want).max_abs() < 1e-15);
        assert!(p.monomial(&[0, 1]).log().is_err());
    }

    #[test]
    fn pool_mismatch_is_error() {
        let (p, q) = (Pool::new(2), Pool::new(2));
        assert!(matches!(g_mul(&p.gen(0), &q.gen(0)), Err(Error::PoolMismatch(_, _))));
        let pe = p.extended(1);
        assert!(g_mul(&p.gen(0), &pe.gen(2)).is_ok());
    }

    #[test]
    fn parity_rejected_in_blocks() {
        let p = Pool::new(2);
        let r = SuperMatrix::from_blocks(p, 1, 1, vec![p.gen(0)], vec![p.gen(1)], vec![p.gen(0)], vec![p.one()]);
        assert!(matches!(r, Err(Error::Parity(_))));
    }

    #[test]
    fn small_supermatrix_facts() {
        let p = Pool::new(0);
        let s = SuperMatrix::sigma(p, 2, 2);
        assert_eq!(s_transpose(&s), s);
        assert!(s_trace(&SuperMatrix::identity(p, 2, 2)).unwrap().is_zero());
        let d = SuperMatrix::diag(p, &[c(2.0)], &[c(3.0)]);
        assert_eq!(s_trace(&d).unwrap(), p.real(-1.0));
        assert_eq!(s_det(&d).unwrap().body(), c(2.0 / 3.0));
        assert_eq!(s_det(&SuperMatrix::identity(p, 2, 3)).unwrap(), p.one());
        let z = SuperMatrix::diag(p, &[c(1.0)], &[c(0.0)]);
        assert!(matches!(s_det(&z), Err(Error::SingularBody(_))));
    }
}
