//! Chart-based Berezin integration on supermanifolds with boundary terms
//! across chart faces, the Gl(1|1) Haar measure, the J factor of a
//! symmetric-superspace tangent map, and the class C supersymmetric
//! sigma-model integral.

use crate::quadrature::{adaptive, tensor_gl_checked, Axis, QuadResult};
use crate::superalg::{s_det, s_exp, s_inv, s_mul, GrassmannElement, Pool, SuperMatrix};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

pub type GE = GrassmannElement;
pub type CMat = DMatrix<C64>;

/// Density or superfunction of chart coordinates (even, odd).
pub type ChartFn = Arc<dyn Fn(&[GE], &[GE]) -> Result<GE> + Send + Sync>;
/// Map from chart coordinates to ambient coordinates.
pub type EmbedFn = Arc<dyn Fn(&[GE], &[GE]) -> Result<Vec<GE>> + Send + Sync>;
/// Coordinate change from the first chart to the second.
pub type TransitionFn = Arc<dyn Fn(&[GE], &[GE]) -> Result<(Vec<GE>, Vec<GE>)> + Send + Sync>;
/// Explicit face-term density with respect to the outward solid angle, given
/// the face point in the first chart and the body of `f` there.
pub type FaceFn = Arc<dyn Fn(&[f64], C64) -> C64 + Send + Sync>;
/// Superfunction of ambient coordinates.
pub type AmbientFn<'a> = &'a (dyn Fn(&[GE]) -> Result<GE> + Sync);

fn c0() -> C64 {
    C64::new(0.0, 0.0)
}

/// `∂ξ0 ∂ξ1 (ξ0 ξ1)` under the crate's derivative convention.
pub fn berezin_sign() -> f64 {
    let p = Pool::new(2);
    p.monomial(&[0, 1]).berezin(&[0, 1]).map(|x| x.body().re).unwrap_or(f64::NAN)
}

/// Integration domain of a chart in its even coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    /// `|x| <= radius`.
    Ball { radius: f64 },
    /// All of `R^p`.
    Whole,
}

#[derive(Clone)]
pub struct BerezinChart {
    pub name: String,
    pub p: usize,
    pub q: usize,
    pub density: ChartFn,
    pub embed: EmbedFn,
    pub cell: Cell,
}

/// How the face term between the two cells is obtained.
#[derive(Clone)]
pub enum Anomaly {
    /// Computed from the transition map (requires `q = 2`).
    Derived,
    /// Given in closed form.
    Explicit(FaceFn),
    /// Omitted.
    Omit,
}

/// Which chart carries the face term; the total does not depend on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    First,
    Second,
}

#[derive(Clone, Copy, Debug)]
pub struct QuadSpec {
    pub radial: usize,
    pub angular: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { radial: 32, angular: 32 }
    }
}

/// A superintegration form given on one chart or on two cells glued along the
/// sphere `|x| = R` of the first chart.
#[derive(Clone)]
pub struct BerezinMeasure {
    pub name: String,
    pub pool: Pool,
    pub charts: Vec<BerezinChart>,
    pub transition: Option<TransitionFn>,
    pub anomaly: Anomaly,
    pub gauge: Gauge,
    pub quad: QuadSpec,
}

#[derive(Clone, Debug)]
pub struct BerezinResult {
    pub value: C64,
    pub error: f64,
    /// Contribution of each cell and of the face term.
    pub parts: Vec<(String, C64)>,
}

struct ErrSlot(Mutex<Option<Error>>);

impl ErrSlot {
    fn new() -> Self {
        ErrSlot(Mutex::new(None))
    }

    fn wrap(&self, r: Result<C64>) -> C64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                let mut g = self.0.lock().unwrap();
                if g.is_none() {
                    *g = Some(e);
                }
                c0()
            }
        }
    }

    fn check(&self) -> Result<()> {
        match self.0.lock().unwrap().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Unit vector and angular Jacobian for hyperspherical angles.
fn sphere_point(p: usize, ang: &[f64]) -> (Vec<f64>, f64) {
    let mut u = vec![0.0; p];
    let (mut s, mut jac) = (1.0, 1.0);
    for k in 0..p - 1 {
        u[k] = s * ang[k].cos();
        jac *= ang[k].sin().powi((p - 2 - k) as i32);
        s *= ang[k].sin();
    }
    u[p - 1] = s;
    (u, jac)
}

fn angle_axes(p: usize, n: usize) -> Vec<Axis> {
    (0..p - 1).map(|k| if k + 2 < p { Axis::new(0.0, PI, n) } else { Axis::new(0.0, 2.0 * PI, n) }).collect()
}

/// `∫_{cell} g(x) d^p x`.
fn integrate_cell(p: usize, cell: Cell, q: QuadSpec, g: impl Fn(&[f64]) -> C64 + Sync) -> Result<QuadResult> {
    if p == 0 {
        return Ok(QuadResult { value: g(&[]), error: 0.0, evals: 1 });
    }
    if p == 1 {
        let r = match cell {
            Cell::Ball { radius } => tensor_gl_checked(&[Axis::new(-radius, radius, q.radial)], |t| g(&[t[0]])),
            Cell::Whole => tensor_gl_checked(&[Axis::new(-1.0, 1.0, q.radial)], |t| {
                let d = 1.0 - t[0] * t[0];
                g(&[t[0] / d]) * ((1.0 + t[0] * t[0]) / (d * d))
            }),
        };
        return Ok(r);
    }
    let mut axes = vec![Axis::new(0.0, 1.0, q.radial)];
    axes.extend(angle_axes(p, q.angular));
    let r = tensor_gl_checked(&axes, |t| {
        let (rad, drad) = match cell {
            Cell::Ball { radius } => (radius * t[0], radius),
            Cell::Whole => (t[0] / (1.0 - t[0]), 1.0 / ((1.0 - t[0]) * (1.0 - t[0]))),
        };
        let (u, jac) = sphere_point(p, &t[1..]);
        let x: Vec<f64> = u.iter().map(|v| rad * v).collect();
        g(&x) * (drad * jac * rad.powi(p as i32 - 1))
    });
    Ok(r)
}

/// `∫_{|x|=R} g(x, x̂) dΩ` with the outward orientation.
fn integrate_face(p: usize, radius: f64, q: QuadSpec, g: impl Fn(&[f64], &[f64]) -> C64 + Sync) -> QuadResult {
    if p == 1 {
        let v = g(&[radius], &[1.0]) + g(&[-radius], &[-1.0]);
        return QuadResult { value: v, error: 0.0, evals: 2 };
    }
    tensor_gl_checked(&angle_axes(p, q.angular), |t| {
        let (u, jac) = sphere_point(p, t);
        let x: Vec<f64> = u.iter().map(|v| radius * v).collect();
        g(&x, &u) * jac
    })
}

fn scalars(pool: Pool, x: &[f64]) -> Vec<GE> {
    x.iter().map(|&v| pool.real(v)).collect()
}

fn gens(pool: Pool, q: usize) -> Vec<GE> {
    (0..q).map(|k| pool.gen(k)).collect()
}

/// Exact derivative along `x_k` of a map evaluated at scalar even
/// coordinates: `x_k` is shifted by the nilpotent even element `θa θb` built
/// from two appended generators, and the coefficient of `θa θb` is read off.
fn jet(eval: &dyn Fn(&[GE]) -> Result<Vec<GE>>, pool: Pool, x: &[f64], k: usize) -> Result<Vec<GE>> {
    let q = pool.size();
    let ext = pool.extended(2);
    let bits = (1u64 << q) | (1u64 << (q + 1));
    let mut xs = scalars(ext, x);
    xs[k] = &xs[k] + &(&ext.gen(q) * &ext.gen(q + 1));
    let out = eval(&xs)?;
    Ok(out
        .iter()
        .map(|e| {
            let t = e.terms().iter().filter(|t| t.0 & bits == bits).map(|&(m, c)| (m & !bits, c)).collect();
            GE::from_terms(ext, t)
        })
        .collect())
}

impl BerezinMeasure {
    pub fn p(&self) -> usize {
        self.charts[0].p
    }

    pub fn q(&self) -> usize {
        self.charts[0].q
    }

    fn principal(&self, chart: &BerezinChart, f: AmbientFn, slot: &ErrSlot) -> Result<QuadResult> {
        let pool = self.pool;
        integrate_cell(chart.p, chart.cell, self.quad, |x| {
            slot.wrap((|| {
                let ev = scalars(pool, x);
                let od = gens(pool, chart.q);
                let d = (chart.density)(&ev, &od)?;
                let fv = f(&(chart.embed)(&ev, &od)?)?;
                let top: Vec<usize> = (0..chart.q).collect();
                Ok(d.try_mul(&fv)?.berezin(&top)?.body())
            })())
        })
    }

    /// Face density at `x` on the boundary sphere, with respect to the outward
    /// solid angle, derived from the transition map.
    fn derived_face(&self, f: AmbientFn, x: &[f64], xhat: &[f64]) -> Result<C64> {
        let (pool, p, q) = (self.pool, self.p(), self.q());
        if q != 2 {
            return Err(Error::Unsupported(format!("derived face term needs q = 2, got {}", q)));
        }
        let tr = self.transition.as_ref().ok_or_else(|| Error::Invalid("no transition map".into()))?;
        let c2 = &self.charts[1];
        let (y, eta) = tr(&scalars(pool, x), &gens(pool, q))?;
        let w = DVector::from_iterator(p, y.iter().map(|e| e.coeff(0b11)));
        let body_map = |z: &[GE]| -> Result<Vec<GE>> {
            let (y, _) = tr(z, &vec![pool.zero(); q])?;
            Ok(y)
        };
        let mut du = CMat::zeros(p, p);
        for k in 0..p {
            let col = jet(&body_map, pool, x, k)?;
            for i in 0..p {
                du[(i, k)] = col[i].body();
            }
        }
        let mm = CMat::from_fn(q, q, |a, b| eta[a].coeff(1 << b));
        let ber0 = du.determinant() / mm.determinant();
        let v = du.clone().lu().solve(&w).ok_or_else(|| Error::SingularBody("transition Jacobian".into()))?;
        let ub: Vec<GE> = y.iter().map(|e| pool.scalar(e.body())).collect();
        let z = vec![pool.zero(); q];
        let f0 = (c2.density)(&ub, &z)?.body() * f(&(c2.embed)(&ub, &z)?)?.body();
        let vn: C64 = (0..p).map(|k| v[k] * xhat[k]).sum();
        let r = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        Ok(-berezin_sign() * f0 * ber0 * vn * r.powi(p as i32 - 1))
    }

    fn face(&self, f: AmbientFn, slot: &ErrSlot) -> Result<QuadResult> {
        let radius = match self.charts[0].cell {
            Cell::Ball { radius } => radius,
            Cell::Whole => return Err(Error::Invalid("first cell must be a ball".into())),
        };
        let (pool, q) = (self.pool, self.q());
        let c1 = &self.charts[0];
        let r = integrate_face(self.p(), radius, self.quad, |x, u| {
            slot.wrap(match &self.anomaly {
                Anomaly::Derived => self.derived_face(f, x, u),
                Anomaly::Explicit(g) => (|| {
                    let z = vec![pool.zero(); q];
                    let f0 = f(&(c1.embed)(&scalars(pool, x), &z)?)?.body();
                    Ok(g(x, f0))
                })(),
                Anomaly::Omit => Ok(c0()),
            })
        });
        Ok(r)
    }

    /// `∫ f` over the supermanifold.
    pub fn integrate(&self, f: AmbientFn) -> Result<BerezinResult> {
        let slot = ErrSlot::new();
        let mut parts = Vec::new();
        let (mut value, mut error) = (c0(), 0.0);
        for c in &self.charts {
            let r = self.principal(c, f, &slot)?;
            slot.check()?;
            value += r.value;
            error += r.error;
            parts.push((c.name.clone(), r.value));
        }
        if self.charts.len() == 2 && !matches!(self.anomaly, Anomaly::Omit) {
            let r = self.face(f, &slot)?;
            slot.check()?;
            // The face term enters as α1 - α2: either α1 = α12 or α2 = -α12.
            let (a1, a2) = match self.gauge {
                Gauge::First => (r.value, c0()),
                Gauge::Second => (c0(), -r.value),
            };
            let a = a1 - a2;
            value += a;
            error += r.error;
            parts.push(("face".into(), a));
        }
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::Divergence(format!("{}: non-finite value", self.name)));
        }
        Ok(BerezinResult { value, error, parts })
    }

    /// Largest `|ρ1 - Ber(∂(y,η)/∂(x,ξ)) ρ2|` over the given points of the
    /// first chart, relative to `max(1, |ρ1|)`.
    pub fn chart_consistency_residual(&self, points: &[Vec<f64>]) -> Result<f64> {
        let tr = self.transition.as_ref().ok_or_else(|| Error::Invalid("no transition map".into()))?;
        let (pool, p, q) = (self.pool, self.p(), self.q());
        let mut worst = 0.0f64;
        for x in points {
            let od = gens(pool, q);
            let (y, eta) = tr(&scalars(pool, x), &od)?;
            let eval = |z: &[GE]| -> Result<Vec<GE>> {
                let (y, eta) = tr(z, &gens(pool, q))?;
                Ok(y.into_iter().chain(eta).collect())
            };
            let d = p + q;
            let mut e = vec![pool.zero(); d * d];
            for k in 0..p {
                let col = jet(&eval, pool, x, k)?;
                for i in 0..d {
                    e[i * d + k] = col[i].clone();
                }
            }
            let out: Vec<&GE> = y.iter().chain(eta.iter()).collect();
            // Odd columns hold right derivatives; for even rows these are minus
            // the left derivatives.
            for b in 0..q {
                for i in 0..d {
                    let l = out[i].derive(b)?;
                    e[i * d + p + b] = if i < p { -&l } else { l };
                }
            }
            let ber = s_det(&SuperMatrix::new(pool, (p, q), (p, q), e)?)?;
            let r1 = (self.charts[0].density)(&scalars(pool, x), &od)?;
            let r2 = (self.charts[1].density)(&y, &eta)?;
            let res = (&r1 - &(&ber * &r2)).max_abs() / r1.max_abs().max(1.0);
            worst = worst.max(res);
        }
        Ok(worst)
    }
}

fn ipow(x: &GE, k: i32) -> Result<GE> {
    if k >= 0 {
        Ok(x.powi(k as u32))
    } else {
        Ok(x.inv()?.powi((-k) as u32))
    }
}

/// `Σ x_i^2 + 2 ξ0 ξ1`.
fn super_r2(x: &[GE], xi: &[GE]) -> GE {
    let mut s = &xi[0] * &xi[1];
    s = &s + &s;
    for v in x {
        s = &s + &(v * v);
    }
    s
}

/// Face density of the supersphere atlas in closed form, with respect to the
/// outward solid angle on `|x| = R`.
pub fn supersphere_face_explicit(p: usize) -> FaceFn {
    Arc::new(move |x: &[f64], f0: C64| {
        let r2: f64 = x.iter().map(|t| t * t).sum();
        let g = 2.0 * r2.sqrt().powi(p as i32 - 2) / (1.0 + r2).powi(p as i32 - 2);
        f0 * (-berezin_sign() * g)
    })
}

/// Two-chart stereographic atlas of the supersphere `S^{p|2}` cut at `|x| = cut`.
///
/// Ambient coordinates are `(x̃0, ..., x̃p, ξ̃0, ξ̃1)` with
/// `Σ x̃^2 + 2 ξ̃0 ξ̃1 = 1`.
pub fn supersphere_measure_cut(p: usize, cut: f64) -> Result<BerezinMeasure> {
    if p == 0 || cut <= 0.0 {
        return Err(Error::Invalid("supersphere needs p >= 1 and a positive cut radius".into()));
    }
    let pool = Pool::new(2);
    let pw = 2 - p as i32;
    let density: ChartFn = Arc::new(move |x: &[GE], xi: &[GE]| ipow(&(&pool.one() + &super_r2(x, xi)), pw));
    let embed1: EmbedFn = Arc::new(move |x: &[GE], xi: &[GE]| {
        let r2 = super_r2(x, xi);
        let den = (&pool.one() + &r2).inv()?;
        let mut out = vec![&(&pool.one() - &r2) * &den];
        out.extend(x.iter().map(|v| (v * &den).scale_re(2.0)));
        out.extend(xi.iter().map(|v| (v * &den).scale_re(2.0)));
        Ok(out)
    });
    let embed2: EmbedFn = Arc::new(move |y: &[GE], eta: &[GE]| {
        let s2 = super_r2(y, eta);
        let den = (&pool.one() + &s2).inv()?;
        let mut out = vec![&(&s2 - &pool.one()) * &den];
        for (i, v) in y.iter().enumerate() {
            out.push((v * &den).scale_re(if i == 0 { -2.0 } else { 2.0 }));
        }
        out.extend(eta.iter().map(|v| (v * &den).scale_re(2.0)));
        Ok(out)
    });
    let transition: TransitionFn = Arc::new(move |x: &[GE], xi: &[GE]| {
        let ir = super_r2(x, xi).inv()?;
        let y = x.iter().enumerate().map(|(i, v)| (v * &ir).scale_re(if i == 0 { -1.0 } else { 1.0 })).collect();
        let eta = xi.iter().map(|v| v * &ir).collect();
        Ok((y, eta))
    });
    let chart = |name: &str, embed: EmbedFn, radius: f64| BerezinChart {
        name: name.into(),
        p,
        q: 2,
        density: density.clone(),
        embed,
        cell: Cell::Ball { radius },
    };
    Ok(BerezinMeasure {
        name: format!("S^{}|2", p),
        pool,
        charts: vec![chart("north", embed1, cut), chart("south", embed2, 1.0 / cut)],
        transition: Some(transition),
        anomaly: Anomaly::Derived,
        gauge: Gauge::First,
        quad: QuadSpec::default(),
    })
}

/// [`supersphere_measure_cut`] cut at the equator.
pub fn supersphere_measure(p: usize) -> Result<BerezinMeasure> {
    supersphere_measure_cut(p, 1.0)
}

/// Single-chart form of `S^{p|2}` for `p >= 3`, where the density decays fast
/// enough that the missing point carries no weight.
pub fn supersphere_single_chart(p: usize) -> Result<BerezinMeasure> {
    if p < 3 {
        return Err(Error::Unsupported(format!("single-chart supersphere needs p >= 3, got {}", p)));
    }
    let mut m = supersphere_measure_cut(p, 1.0)?;
    m.charts.truncate(1);
    m.charts[0].cell = Cell::Whole;
    m.transition = None;
    m.anomaly = Anomaly::Omit;
    m.quad = QuadSpec { radial: 48, angular: 24 };
    Ok(m)
}

/// Berezin volume of `S^{p|2}`.
pub fn supersphere_volume(p: usize) -> Result<BerezinResult> {
    let m = supersphere_measure(p)?;
    let pool = m.pool;
    m.integrate(&move |_: &[GE]| Ok(pool.one()))
}

/// Options for [`gl11_integral`].
#[derive(Clone, Copy, Debug)]
pub struct Gl11Options {
    /// Truncation `|x| <= cutoff` of the noncompact direction.
    pub cutoff: f64,
    /// Gauss-Legendre nodes on the compact direction.
    pub nodes_y: usize,
    pub tol: f64,
}

impl Default for Gl11Options {
    fn default() -> Self {
        Gl11Options { cutoff: 24.0, nodes_y: 48, tol: 1e-11 }
    }
}

/// `z^2 / (cosh z - 1)`, continuous at `z = 0` where it equals 2.
pub fn gl11_kernel(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        return C64::new(2.0, 0.0) - z * z / 6.0;
    }
    let s = (z * 0.5).sinh();
    z * z / (s * s * 2.0)
}

/// `exp [[x, ζ0], [ζ1, i y]]` for the given Grassmann pool of size at least 2.
pub fn gl11_exp(pool: Pool, x: f64, y: f64) -> Result<SuperMatrix> {
    let a = SuperMatrix::from_blocks(
        pool,
        1,
        1,
        vec![pool.real(x)],
        vec![pool.gen(0)],
        vec![pool.gen(1)],
        vec![pool.scalar(C64::new(0.0, y))],
    )?;
    s_exp(&a)
}

/// Integral of a superfunction over `Gl(1|1)` with respect to the invariant
/// Berezin measure normalized so that `∫ 1 = 1`.
///
/// The group element passed to `f` is a (1|1) supermatrix over a pool of two
/// generators; `f` must decay as `|x| → ∞` where the body of the boson entry is
/// `e^x`. The result includes the boundary term carried by `diag(e^x, -1)`.
pub fn gl11_integral(f: &(dyn Fn(&SuperMatrix) -> Result<GE> + Sync), opts: Gl11Options) -> Result<QuadResult> {
    let pool = Pool::new(2);
    let slot = ErrSlot::new();
    let bulk_y = |x: f64, n: usize| -> C64 {
        let rule = crate::quadrature::gl_interval(n, -PI, PI);
        rule.iter()
            .map(|&(y, w)| {
                slot.wrap((|| {
                    let g = gl11_exp(pool, x, y)?;
                    let b = f(&g)?.berezin(&[0, 1])?.body();
                    Ok(gl11_kernel(C64::new(x, -y)) * b * w)
                })())
            })
            .sum::<C64>()
            / (4.0 * PI)
    };
    let edge = |x: f64| -> C64 {
        slot.wrap((|| {
            let g = SuperMatrix::diag(pool, &[C64::new(x.exp(), 0.0)], &[C64::new(-1.0, 0.0)]);
            Ok(f(&g)?.body() * (0.5 / (x.cosh() + 1.0)))
        })())
    };
    let (xc, n) = (opts.cutoff, opts.nodes_y);
    let bulk = adaptive(|x| bulk_y(x, n), -xc, xc, opts.tol, opts.tol)?;
    slot.check()?;
    let fine = adaptive(|x| bulk_y(x, n + n / 2), -xc, xc, opts.tol, opts.tol)?;
    slot.check()?;
    let bd = adaptive(edge, -xc, xc, opts.tol, opts.tol)?;
    slot.check()?;
    // Mass beyond the cutoff must be negligible.
    let mut tail = 0.0;
    for (a, b) in [(xc, 2.0 * xc), (-2.0 * xc, -xc)] {
        tail += adaptive(|x| bulk_y(x, n), a, b, opts.tol, opts.tol)?.value.norm();
        tail += adaptive(edge, a, b, opts.tol, opts.tol)?.value.norm();
        slot.check()?;
    }
    let value = fine.value + bd.value;
    let scale = value.norm().max(1.0);
    if tail > 1e3 * opts.tol * scale {
        return Err(Error::Divergence(format!("Gl(1|1) integrand does not decay: tail mass {:e}", tail)));
    }
    let error = fine.error + bd.error + (fine.value - bulk.value).norm() + tail;
    Ok(QuadResult { value, error, evals: bulk.evals + fine.evals + bd.evals })
}

/// A graded subspace `M` of `End(C^{m|n})` given by numeric templates: even
/// elements live in the diagonal blocks, odd ones in the off-diagonal blocks.
#[derive(Clone, Debug)]
pub struct TangentStructure {
    pub m: usize,
    pub n: usize,
    pub even: Vec<CMat>,
    pub odd: Vec<CMat>,
    dual_even: CMat,
    dual_odd: CMat,
}

fn flatten_rows(ts: &[CMat], d: usize) -> CMat {
    CMat::from_fn(ts.len(), d * d, |k, ab| ts[k][(ab / d, ab % d)])
}

fn dual_of(ts: &[CMat], d: usize) -> Result<CMat> {
    if ts.is_empty() {
        return Ok(CMat::zeros(0, d * d));
    }
    // Rows of the result are functionals picking out the template coefficients.
    let a = flatten_rows(ts, d).transpose();
    let pinv = a.clone().pseudo_inverse(1e-12).map_err(|e| Error::Invalid(e.into()))?;
    if (&pinv * &a - CMat::identity(ts.len(), ts.len())).norm() > 1e-9 {
        return Err(Error::Invalid("templates are linearly dependent".into()));
    }
    Ok(pinv)
}

impl TangentStructure {
    pub fn new(m: usize, n: usize, even: Vec<CMat>, odd: Vec<CMat>) -> Result<Self> {
        let d = m + n;
        for (t, want_odd) in even.iter().map(|t| (t, false)).chain(odd.iter().map(|t| (t, true))) {
            if t.nrows() != d || t.ncols() != d {
                return Err(Error::DimMismatch("template size".into()));
            }
            for i in 0..d {
                for j in 0..d {
                    if ((i >= m) != (j >= m)) != want_odd && t[(i, j)].norm() > 0.0 {
                        return Err(Error::Parity(format!("template entry ({}, {}) in wrong block", i, j)));
                    }
                }
            }
        }
        let (mut dual_even, mut dual_odd) = (dual_of(&even, d)?, dual_of(&odd, d)?);
        // Keep each functional supported on its own blocks.
        for ab in 0..d * d {
            let odd_pos = (ab / d >= m) != (ab % d >= m);
            let w = if odd_pos { &mut dual_even } else { &mut dual_odd };
            for k in 0..w.nrows() {
                w[(k, ab)] = C64::new(0.0, 0.0);
            }
        }
        Ok(TangentStructure { m, n, even, odd, dual_even, dual_odd })
    }

    /// Super dimension `(even, odd)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.even.len(), self.odd.len())
    }

    /// `Σ e_k x_k + Σ f_k ξ_k` with Grassmann coefficients.
    pub fn compose(&self, pool: Pool, even: &[GE], odd: &[GE]) -> Result<SuperMatrix> {
        let d = self.m + self.n;
        let mut e = vec![pool.zero(); d * d];
        for (ts, cs) in [(&self.even, even), (&self.odd, odd)] {
            for (t, c) in ts.iter().zip(cs) {
                for ab in 0..d * d {
                    let v = t[(ab / d, ab % d)];
                    if v.norm() > 0.0 {
                        e[ab] = &e[ab] + &c.scale(v);
                    }
                }
            }
        }
        SuperMatrix::new(pool, (self.m, self.n), (self.m, self.n), e)
    }

    /// Template coefficients of `x` and the residual `|x - compose(coords)|`.
    pub fn coords(&self, x: &SuperMatrix) -> Result<(Vec<GE>, Vec<GE>, f64)> {
        let d = self.m + self.n;
        let pool = x.pool();
        let lin = |w: &CMat| -> Vec<GE> {
            (0..w.nrows())
                .map(|k| {
                    (0..d * d).fold(pool.zero(), |acc, ab| {
                        let c = w[(k, ab)];
                        if c.norm() == 0.0 {
                            acc
                        } else {
                            &acc + &x.entries()[ab].scale(c)
                        }
                    })
                })
                .collect()
        };
        let (ev, od) = (lin(&self.dual_even), lin(&self.dual_odd));
        let back = self.compose(pool, &ev, &od)?;
        let res = x.try_sub(&back)?.max_abs();
        Ok((ev, od, res))
    }

    /// Matrix of a right-linear map `M ⊗ Λ → M ⊗ Λ` in template coordinates,
    /// as a supermatrix acting on coordinate columns.
    ///
    /// Odd columns are obtained by feeding `θ f_k` with an auxiliary
    /// generator `θ` and stripping it again.
    pub fn operator_matrix(
        &self,
        pool: Pool,
        op: &dyn Fn(&SuperMatrix) -> Result<SuperMatrix>,
    ) -> Result<SuperMatrix> {
        let (ne, no) = self.dims();
        let d = ne + no;
        let mut e = vec![pool.zero(); d * d];
        let tol = 1e-9;
        let check = |res: f64, scale: f64| -> Result<()> {
            if res > tol * scale.max(1.0) {
                Err(Error::Invalid(format!("map leaves the subspace (residual {:e})", res)))
            } else {
                Ok(())
            }
        };
        for k in 0..ne {
            let mut ev = vec![pool.zero(); ne];
            ev[k] = pool.one();
            let v = op(&self.compose(pool, &ev, &vec![pool.zero(); no])?)?;
            let (c, dd, res) = self.coords(&v)?;
            check(res, v.max_abs())?;
            for (i, x) in c.into_iter().chain(dd).enumerate() {
                e[i * d + k] = x;
            }
        }
        let q = pool.size();
        let ext = pool.extended(1);
        let theta = ext.gen(q);
        for k in 0..no {
            let mut od = vec![ext.zero(); no];
            od[k] = theta.clone();
            let v = op(&self.compose(ext, &vec![ext.zero(); ne], &od)?)?;
            let (c, dd, res) = self.coords(&v)?;
            check(res, v.max_abs())?;
            for (i, x) in c.into_iter().enumerate() {
                e[i * d + ne + k] = narrow(&-&x.derive(q)?, pool);
            }
            for (j, x) in dd.into_iter().enumerate() {
                e[(ne + j) * d + ne + k] = narrow(&x.derive(q)?, pool);
            }
        }
        SuperMatrix::new(pool, (ne, no), (ne, no), e)
    }
}

/// Element free of the generators beyond `pool` viewed over `pool`.
fn narrow(x: &GE, pool: Pool) -> GE {
    GE::from_terms(pool, x.terms().to_vec())
}

fn s_commutator(a: &SuperMatrix, b: &SuperMatrix) -> Result<SuperMatrix> {
    s_mul(a, b)?.try_sub(&s_mul(b, a)?)
}

/// `SDet_M( sinh(ad Z) / ad Z )` with `ad^2 Z` restricted to `M`; the series
/// `Σ (ad^2 Z)^k / (2k+1)!` is summed until terms drop below `1e-16`.
pub fn j_factor(z: &SuperMatrix, st: &TangentStructure) -> Result<GE> {
    let pool = z.pool();
    let ad2 = st.operator_matrix(pool, &|x: &SuperMatrix| {
        let zz = if x.pool().size() > pool.size() { lift(z, x.pool())? } else { z.clone() };
        s_commutator(&zz, &s_commutator(&zz, x)?)
    })?;
    let (ne, no) = st.dims();
    let mut term = SuperMatrix::identity(pool, ne, no);
    let mut sum = term.clone();
    let mut k = 0usize;
    loop {
        k += 1;
        term = s_mul(&term, &ad2)?.scale(C64::new(1.0 / ((2 * k) * (2 * k + 1)) as f64, 0.0));
        sum = sum.try_add(&term)?;
        if term.max_abs() <= 1e-16 * sum.max_abs() {
            break;
        }
        if k > 200 {
            return Err(Error::Divergence(format!("J series not converged: last term {:e}", term.max_abs())));
        }
    }
    s_det(&sum)
}

/// The same supermatrix viewed over an extension of its pool.
fn lift(a: &SuperMatrix, ext: Pool) -> Result<SuperMatrix> {
    let e = a.entries().iter().map(|x| GE::from_terms(ext, x.terms().to_vec())).collect();
    SuperMatrix::new(ext, a.rows(), a.cols(), e)
}

/// Tangent space of the class C target at one source pair: the part of
/// `osp(2|2)` odd under conjugation by `Σz = diag(σz, σz)`, with the boson
/// block of the even part removed. Coordinates are `(x1, x2 | ζ1, ζ2)` with
/// `Y_FF = x1 J + x2 iσx`, `Y_BF = [[0, ζ1], [ζ2, 0]]`, `Y_FB = [[0, ζ1], [-ζ2, 0]]`.
pub fn class_c_tangent() -> TangentStructure {
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let t = |pairs: &[((usize, usize), C64)]| {
        let mut m = CMat::zeros(4, 4);
        for &((a, b), v) in pairs {
            m[(a, b)] = v;
        }
        m
    };
    let even = vec![t(&[((2, 3), one), ((3, 2), -one)]), t(&[((2, 3), i), ((3, 2), i)])];
    let odd = vec![t(&[((0, 3), one), ((2, 1), one)]), t(&[((1, 2), one), ((3, 0), -one)])];
    TangentStructure::new(2, 2, even, odd).expect("class C templates")
}

fn sigma_z4(pool: Pool) -> SuperMatrix {
    let d = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
    SuperMatrix::diag(pool, &d, &d)
}

fn num4(pool: Pool, a: &CMat) -> Result<SuperMatrix> {
    SuperMatrix::from_complex(pool, 2, 2, a)
}

/// `Σz (1 - Y)(1 + Y)^{-1}`.
pub fn class_c_cayley(y: &SuperMatrix) -> Result<SuperMatrix> {
    let pool = y.pool();
    let id = SuperMatrix::identity(pool, 2, 2);
    let a = s_mul(&id.try_sub(y)?, &s_inv(&id.try_add(y)?)?)?;
    s_mul(&sigma_z4(pool), &a)
}

/// Invariant density `SDet_M(δ ↦ A δ A)^{1/2}` with `A = (1 - Y^2)^{-1}`.
pub fn class_c_density(st: &TangentStructure, y: &SuperMatrix) -> Result<GE> {
    let pool = y.pool();
    let id = SuperMatrix::identity(pool, 2, 2);
    let a = s_inv(&id.try_sub(&s_mul(y, y)?)?)?;
    let op = st.operator_matrix(pool, &|d: &SuperMatrix| {
        let aa = if d.pool().size() > pool.size() { lift(&a, d.pool())? } else { a.clone() };
        s_mul(&s_mul(&aa, d)?, &aa)
    })?;
    s_det(&op)?.powc(C64::new(0.5, 0.0))
}

#[derive(Clone, Copy, Debug)]
pub struct ClassCOptions {
    /// Polar angle of the seam between the two cells.
    pub seam: f64,
    /// Euler angles `(a, b, c)` of `u = e^{i a σz/2} e^{i b σy/2} e^{i c σz/2}`;
    /// the atlas is moved by `diag(1, u)`.
    pub rotation: [f64; 3],
    pub quad: QuadSpec,
}

impl Default for ClassCOptions {
    fn default() -> Self {
        ClassCOptions { seam: PI / 2.0, rotation: [0.0; 3], quad: QuadSpec { radial: 32, angular: 40 } }
    }
}

fn su2(e: [f64; 3]) -> CMat {
    let i = C64::new(0.0, 1.0);
    let rz = |t: f64| CMat::from_row_slice(2, 2, &[(i * t / 2.0).exp(), C64::new(0.0, 0.0), C64::new(0.0, 0.0), (-i * t / 2.0).exp()]);
    let (c, s) = ((e[1] / 2.0).cos(), (e[1] / 2.0).sin());
    let ry = CMat::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0), C64::new(c, 0.0)]);
    rz(e[0]) * ry * rz(e[2])
}

/// Two-cell atlas of the class C target; ambient coordinates are the 16
/// entries of `Λ` in row-major order.
pub fn class_c_superspace_measure(opts: ClassCOptions) -> Result<BerezinMeasure> {
    let pool = Pool::new(2);
    let st = Arc::new(class_c_tangent());
    let i2 = CMat::identity(2, 2);
    let j = crate::ensembles::pauli('j');
    let u = su2(opts.rotation);
    let blk = |a: &CMat, b: &CMat| crate::ensembles::block_diag(a, b);
    let k1 = blk(&i2, &u);
    let k2 = &k1 * blk(&i2, &j);
    let w_inv = blk(&i2, &(-&j));
    let ad = move |k: &CMat, x: &SuperMatrix| -> Result<SuperMatrix> {
        let p = x.pool();
        let kinv = k.clone().try_inverse().ok_or_else(|| Error::SingularBody("chart rotation".into()))?;
        s_mul(&s_mul(&num4(p, k)?, x)?, &num4(p, &kinv)?)
    };
    let density: ChartFn = {
        let st = st.clone();
        Arc::new(move |x: &[GE], z: &[GE]| class_c_density(&st, &st.compose(x[0].pool(), x, z)?))
    };
    let embed = |k: CMat| -> EmbedFn {
        let st = st.clone();
        Arc::new(move |x: &[GE], z: &[GE]| {
            let lam = ad(&k, &class_c_cayley(&st.compose(x[0].pool(), x, z)?)?)?;
            Ok(lam.entries().to_vec())
        })
    };
    let transition: TransitionFn = {
        let st = st.clone();
        Arc::new(move |x: &[GE], z: &[GE]| {
            let p = x[0].pool();
            let lam = ad(&w_inv, &class_c_cayley(&st.compose(p, x, z)?)?)?;
            let c = s_mul(&sigma_z4(p), &lam)?;
            let id = SuperMatrix::identity(p, 2, 2);
            let y2 = s_mul(&id.try_sub(&c)?, &s_inv(&id.try_add(&c)?)?)?;
            let (ev, od, res) = st.coords(&y2)?;
            if res > 1e-9 * y2.max_abs().max(1.0) {
                return Err(Error::Invalid(format!("chart transition leaves the tangent space ({:e})", res)));
            }
            Ok((ev, od))
        })
    };
    let rho = (opts.seam / 2.0).tan();
    let chart = |name: &str, e: EmbedFn, radius: f64| BerezinChart {
        name: name.into(),
        p: 2,
        q: 2,
        density: density.clone(),
        embed: e,
        cell: Cell::Ball { radius },
    };
    Ok(BerezinMeasure {
        name: "class C target".into(),
        pool,
        charts: vec![chart("north", embed(k1), rho), chart("south", embed(k2), 1.0 / rho)],
        transition: Some(transition),
        anomaly: Anomaly::Derived,
        gauge: Gauge::First,
        quad: opts.quad,
    })
}

/// Unnormalized `∫ exp(-iπ STr(ω̂ Λ))` with `ω̂ = diag(α̂, -α̂ | β̂, -β̂)`.
pub fn class_c_superspace_raw(alpha_hat: C64, beta_hat: C64, opts: ClassCOptions) -> Result<BerezinResult> {
    let m = class_c_superspace_measure(opts)?;
    let i = C64::new(0.0, 1.0);
    let f = move |l: &[GE]| -> Result<GE> {
        let sb = &l[0] - &l[5];
        let sf = &l[10] - &l[15];
        let e = &sb.scale(alpha_hat) - &sf.scale(beta_hat);
        Ok(e.scale(-i * PI).exp())
    };
    m.integrate(&f)
}

/// Source value at which the superspace integral is normalized to 1.
pub const CLASS_C_CALIBRATION: C64 = C64::new(0.0, -0.5);

/// Class C generating function at one source pair from the superspace
/// integral, normalized so that it equals 1 at `α̂ = β̂ = -i/2`.
/// Returns the value and an error estimate.
pub fn class_c_superspace_z(alpha_hat: C64, beta_hat: C64, opts: ClassCOptions) -> Result<(C64, f64)> {
    let r = class_c_superspace_raw(alpha_hat, beta_hat, opts)?;
    let c = class_c_superspace_raw(CLASS_C_CALIBRATION, CLASS_C_CALIBRATION, opts)?;
    let v = r.value / c.value;
    Ok((v, (r.error + v.norm() * c.error) / c.value.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn supersphere_volumes() {
        let v2 = supersphere_volume(2).unwrap();
        assert!(close(v2.value, C64::new(4.0 * PI, 0.0), 1e-8), "{:?}", v2);
        let v1 = supersphere_volume(1).unwrap();
        assert!(v1.value.norm() < 1e-8, "{:?}", v1);
        let v3 = supersphere_volume(3).unwrap();
        assert!(close(v3.value, C64::new(2.0 * PI * PI, 0.0), 1e-8), "{:?}", v3);
        let m = supersphere_single_chart(3).unwrap();
        let pool = m.pool;
        let s = m.integrate(&move |_: &[GE]| Ok(pool.one())).unwrap();
        assert!(close(s.value, C64::new(2.0 * PI * PI, 0.0), 1e-6), "{:?}", s);
    }

    #[test]
    fn supersphere_zonal_oracle() {
        // For f = F(x̃0) on S^{2|2}: ∫ f = 2π (F(1) + F(-1)).
        for cut in [0.5, 1.0, 2.0] {
            let m = supersphere_measure_cut(2, cut).unwrap();
            let f = |a: &[GE]| Ok(a[0].scale_re(0.7).exp());
            let r = m.integrate(&f).unwrap();
            let want = 2.0 * PI * (0.7f64.exp() + (-0.7f64).exp());
            assert!(close(r.value, C64::new(want, 0.0), 1e-8), "cut {} {:?}", cut, r);
        }
    }

    #[test]
    fn chart_consistency() {
        for p in 1..=3 {
            let m = supersphere_measure(p).unwrap();
            let pts: Vec<Vec<f64>> = (0..20)
                .map(|k| (0..p).map(|i| 0.3 + 0.1 * ((k * 7 + i * 3) % 11) as f64 - 0.5 * (i % 2) as f64).collect())
                .collect();
            let r = m.chart_consistency_residual(&pts).unwrap();
            assert!(r < 1e-10, "p={} residual {}", p, r);
        }
    }

    #[test]
    fn explicit_face_matches_derived() {
        for p in 1..=3 {
            let mut m = supersphere_measure_cut(p, 0.8).unwrap();
            let f = |a: &[GE]| Ok(&(&a[0] * &a[0]).scale_re(0.5) + &a[p].exp());
            let d = m.integrate(&f).unwrap();
            m.anomaly = Anomaly::Explicit(supersphere_face_explicit(p));
            let e = m.integrate(&f).unwrap();
            assert!(close(d.value, e.value, 1e-9), "p={} {:?} {:?}", p, d, e);
            m.gauge = Gauge::Second;
            assert!(close(m.integrate(&f).unwrap().value, e.value, 1e-12));
        }
    }

    fn gl11_test_fn(g: &SuperMatrix) -> Result<GE> {
        // exp(-(a + 1/a)/2 + (d + 1/d)/3) (1 + β γ), with a, d the diagonal entries.
        let (a, b, c, d) = (g.get(0, 0).clone(), g.get(0, 1).clone(), g.get(1, 0).clone(), g.get(1, 1).clone());
        let sa = &a + &a.inv()?;
        let sd = &d + &d.inv()?;
        let e = &sa.scale_re(-0.5) + &sd.scale_re(1.0 / 3.0);
        let bc = &b * &c;
        Ok(&e.exp() * &(&g.pool().one() + &bc.scale_re(0.7)))
    }

    #[test]
    fn gl11_normalized_and_invariant() {
        let opts = Gl11Options::default();
        let one = gl11_integral(&|g: &SuperMatrix| Ok(g.pool().one()), opts).unwrap();
        assert!((one.value - C64::new(1.0, 0.0)).norm() < 1e-9, "{:?}", one);
        let base = gl11_integral(&gl11_test_fn, opts).unwrap();
        for (l1, phi) in [(1.7, 0.4), (0.6, -2.1)] {
            let pool_l = |g: &SuperMatrix| {
                SuperMatrix::diag(g.pool(), &[C64::new(l1, 0.0)], &[C64::from_polar(1.0, phi)])
            };
            let left = gl11_integral(&|g: &SuperMatrix| gl11_test_fn(&s_mul(&pool_l(g), g)?), opts).unwrap();
            let right = gl11_integral(&|g: &SuperMatrix| gl11_test_fn(&s_mul(g, &pool_l(g))?), opts).unwrap();
            assert!((left.value - base.value).norm() < 1e-8, "{:?} {:?}", left, base);
            assert!((right.value - base.value).norm() < 1e-8, "{:?} {:?}", right, base);
        }
    }

    #[test]
    fn gl11_divergence_reported() {
        let r = gl11_integral(&|g: &SuperMatrix| Ok(g.get(0, 0).clone()), Gl11Options::default());
        assert!(matches!(r, Err(Error::Divergence(_))), "{:?}", r);
    }

    fn cm(rows: &[&[(f64, f64)]]) -> CMat {
        CMat::from_fn(rows.len(), rows[0].len(), |i, j| C64::new(rows[i][j].0, rows[i][j].1))
    }

    #[test]
    fn j_factor_oracles() {
        let o = (0.0, 0.0);
        let l = (1.0, 0.0);
        let m1 = (-1.0, 0.0);
        // SL(2)/SO(2) with M = span{σz, σx}, Z = σx/2: sinh(1).
        let st = TangentStructure::new(2, 0, vec![cm(&[&[l, o], &[o, m1]]), cm(&[&[o, l], &[l, o]])], vec![]).unwrap();
        let pool = Pool::new(2);
        let z = st.compose(pool, &[pool.zero(), pool.real(0.5)], &[]).unwrap();
        let j = j_factor(&z, &st).unwrap();
        assert!((j.body() - C64::new(1f64.sinh(), 0.0)).norm() < 1e-13, "{}", j.body());
        let z0 = st.compose(pool, &[pool.zero(), pool.zero()], &[]).unwrap();
        assert!((j_factor(&z0, &st).unwrap().body() - C64::new(1.0, 0.0)).norm() < 1e-15);
        // Graded version on C^{2|2}: boson and fermion factors cancel.
        let emb = |a: &CMat, b: &CMat, odd: bool| {
            let mut t = CMat::zeros(4, 4);
            for i in 0..2 {
                for j in 0..2 {
                    if odd {
                        t[(i, 2 + j)] = a[(i, j)];
                        t[(2 + i, j)] = b[(i, j)];
                    } else {
                        t[(i, j)] = a[(i, j)];
                        t[(2 + i, 2 + j)] = b[(i, j)];
                    }
                }
            }
            t
        };
        let sz = cm(&[&[l, o], &[o, m1]]);
        let sx = cm(&[&[o, l], &[l, o]]);
        let zero = CMat::zeros(2, 2);
        let st = TangentStructure::new(
            2,
            2,
            vec![emb(&sz, &zero, false), emb(&sx, &zero, false)],
            vec![emb(&sz, &sz, true), emb(&sx, &sx, true)],
        )
        .unwrap();
        let mut zm = CMat::zeros(4, 4);
        zm.view_mut((0, 0), (2, 2)).copy_from(&(&sx * C64::new(0.5, 0.0)));
        zm.view_mut((2, 2), (2, 2)).copy_from(&(&sx * C64::new(0.5, 0.0)));
        let z = SuperMatrix::from_complex(pool, 2, 2, &zm).unwrap();
        let j = j_factor(&z, &st).unwrap();
        assert!((j.body() - C64::new(1.0, 0.0)).norm() < 1e-12, "{}", j.render());
    }

    #[test]
    fn class_c_tangent_in_osp() {
        let cs = crate::ensembles::class_structure(crate::ensembles::SymmetryClass::C, 1, 1).unwrap();
        let g = cs.aux.gamma.as_ref().unwrap();
        let g = crate::ensembles::block_diag(&g.0, &g.1);
        let gi = g.clone().try_inverse().unwrap();
        let sz = sigma_z4(Pool::new(1)).body();
        let st = class_c_tangent();
        for t in st.even.iter().chain(&st.odd) {
            let r = t + &g * crate::ensembles::numeric_supertranspose(t, 2) * &gi;
            assert!(r.norm() < 1e-14, "{}", t);
            assert!((&sz * t + t * &sz).norm() < 1e-14);
        }
    }

    #[test]
    fn class_c_charts_consistent() {
        for rot in [[0.0; 3], [0.3, 1.1, -0.7]] {
            let m = class_c_superspace_measure(ClassCOptions { rotation: rot, ..Default::default() }).unwrap();
            let pts: Vec<Vec<f64>> = (0..12).map(|k| vec![0.2 + 0.07 * k as f64, -0.4 + 0.09 * ((k * 5) % 7) as f64]).collect();
            let r = m.chart_consistency_residual(&pts).unwrap();
            assert!(r < 1e-10, "residual {}", r);
        }
    }

    #[test]
    fn class_c_superspace_matches_closed_form() {
        let cases = [
            (C64::new(0.2, -0.3), C64::new(0.2, -0.3)),
            (C64::new(0.0, -0.3), C64::new(0.25, 0.0)),
            (C64::new(0.1, -0.6), C64::new(-0.3, 0.1)),
        ];
        let opts = [
            ClassCOptions::default(),
            ClassCOptions { seam: 1.1, rotation: [0.4, 0.9, -1.3], ..Default::default() },
        ];
        for o in opts {
            for (a, b) in cases {
                let (z, err) = class_c_superspace_z(a, b, o).unwrap();
                let want = crate::spectral::class_c_z_infinity(a, b);
                assert!((z - want).norm() < 1e-9, "{} {} {} {} (err {:e})", a, b, z, want, err);
            }
        }
    }
}
