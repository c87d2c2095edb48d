//! End-to-end numerical checks of the supersymmetric integral
//! representations: the Gaussian superintegral, the Hubbard-Stratonovich
//! step, the Schäfer-Wegner domain, the finite-N Q-integral and its large-N
//! limit, plus saddle-point structure data.

use crate::ensembles::CMat;
use crate::superalg::GrassmannElement as GE;
use crate::{Result, C64};
use serde::{Deserialize, Serialize};

mod domain;
mod gaussian;
mod hs;
mod limit;
mod qint;
mod saddle;
mod suite;

pub use domain::*;
pub use gaussian::*;
pub use hs::*;
pub use limit::*;
pub use qint::*;
pub use saddle::*;
pub use suite::*;

/// Method metadata attached to a report.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Method {
    /// Number of bosonic quadrature dimensions.
    pub quad_dims: usize,
    /// Number of Grassmann generators expanded symbolically.
    pub grassmann: usize,
    /// Integrand evaluations or Monte Carlo samples.
    pub samples: usize,
    pub seed: Option<u64>,
    /// Quadrature or Monte Carlo error estimate of the numerical side.
    pub error_estimate: f64,
    pub notes: Vec<String>,
}

/// Outcome of one identity check.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerificationReport {
    pub id: String,
    pub lhs: C64,
    pub rhs: C64,
    pub abs_dev: f64,
    pub rel_dev: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Magnitude the relative tolerance refers to.
    pub scale: f64,
    /// Value of the same computation at `α = β`, which must be 1.
    pub control: Option<C64>,
    /// Additional named conditions that must all hold.
    pub checks: Vec<(String, bool)>,
    /// Set when the numerical noise is too large to decide.
    pub inconclusive: bool,
    pub method: Method,
    pub pass: bool,
}

impl VerificationReport {
    /// Report with deviations computed from `lhs`, `rhs`; passes when
    /// `|lhs - rhs| ≤ max(abs_tol, rel_tol |rhs|)` and every check holds.
    pub fn new(id: impl Into<String>, lhs: C64, rhs: C64, abs_tol: f64, rel_tol: f64, method: Method) -> VerificationReport {
        let abs_dev = (lhs - rhs).norm();
        let rel_dev = if rhs.norm() > 0.0 { abs_dev / rhs.norm() } else { abs_dev };
        let mut r = VerificationReport {
            id: id.into(),
            lhs,
            rhs,
            abs_dev,
            rel_dev,
            abs_tol,
            rel_tol,
            scale: rhs.norm(),
            control: None,
            checks: vec![],
            inconclusive: false,
            method,
            pass: false,
        };
        r.update();
        r
    }

    /// Report comparing two Grassmann elements coefficientwise: `lhs`, `rhs`
    /// hold the bodies, deviations and scale refer to the largest
    /// coefficient.
    pub fn graded(id: impl Into<String>, lhs: &GE, rhs: &GE, abs_tol: f64, rel_tol: f64, method: Method) -> Result<VerificationReport> {
        let diff = lhs.try_add(&rhs.scale_re(-1.0))?;
        let mut r = VerificationReport::new(id, lhs.body(), rhs.body(), abs_tol, rel_tol, method);
        r.abs_dev = diff.max_abs();
        r.scale = rhs.max_abs();
        r.rel_dev = if r.scale > 0.0 { r.abs_dev / r.scale } else { r.abs_dev };
        r.update();
        Ok(r)
    }

    /// Tolerance actually applied to `abs_dev`.
    pub fn tolerance(&self) -> f64 {
        self.abs_tol.max(self.rel_tol * self.scale)
    }

    fn update(&mut self) {
        let control_ok = self.control.is_none_or(|c| (c - 1.0).norm() <= 1e-8);
        self.pass = self.abs_dev <= self.tolerance() && control_ok && self.checks.iter().all(|c| c.1);
    }

    pub fn with_control(mut self, c: C64) -> Self {
        self.control = Some(c);
        self.update();
        self
    }

    pub fn with_check(mut self, name: impl Into<String>, ok: bool) -> Self {
        self.checks.push((name.into(), ok));
        self.update();
        self
    }

    /// One fixed-width line for the pass/fail table.
    pub fn table_row(&self) -> String {
        format!(
            "{:<40} {:>4}  lhs={:<32} rhs={:<32} dev={:.2e} tol={:.2e}{}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            fmt_c(self.lhs),
            fmt_c(self.rhs),
            self.abs_dev,
            self.tolerance(),
            if self.inconclusive { " (inconclusive)" } else { "" }
        )
    }
}

/// Largest entry modulus.
pub fn cmax(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn fmt_c(z: C64) -> String {
    format!("{:.10}{:+.10}i", z.re, z.im)
}
