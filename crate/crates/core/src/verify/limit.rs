//! Large-N limit of the class C generating function at `n = 1`: Monte Carlo
//! values of `Z_{1,N}(πv ω̂/N)` against the superspace integral at `ω̂`.

use super::{saddle_function, saddle_info, Method, VerificationReport};
use crate::berezin::{class_c_superspace_z, ClassCOptions};
use crate::ensembles::{EnsembleSpec, SymmetryClass};
use crate::spectral::{z_gen_mc, SourceMatrix, SpectralMethod};
use crate::{Error, Result, C64};
use std::f64::consts::PI;

/// One row of the convergence table.
#[derive(Clone, Debug)]
pub struct LimitRow {
    pub n: usize,
    pub value: C64,
    pub stderr: f64,
    pub deviation: f64,
}

/// Per-N Monte Carlo values and deviations from the limit `z_inf`.
pub fn limit_rows(alpha_hat: C64, beta_hat: C64, v: f64, n_list: &[usize], nsamples: usize, seed: u64, z_inf: C64) -> Result<Vec<LimitRow>> {
    let hat = SourceMatrix::new(SymmetryClass::C, vec![alpha_hat], vec![beta_hat])?;
    n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let spec = EnsembleSpec::new(SymmetryClass::C, n, v)?;
            let src = hat.scaled(PI * v / n as f64);
            let (value, stderr) = z_gen_mc(&spec, &src, nsamples, seed.wrapping_add(k as u64), SpectralMethod::Fast)?;
            Ok(LimitRow { n, value, stderr, deviation: (value - z_inf).norm() })
        })
        .collect()
}

/// Passes when the deviations are non-increasing up to one violation and the
/// last one is within three standard errors (plus the quadrature error of
/// the limit). Inconclusive when the largest standard error exceeds the
/// range of deviations.
pub fn theorem34_convergence(alpha_hat: C64, beta_hat: C64, v: f64, n_list: &[usize], nsamples: usize, seed: u64) -> Result<VerificationReport> {
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("need at least three ascending N".into()));
    }
    if alpha_hat.im >= 0.0 {
        return Err(Error::Invalid("Im alpha < 0 required".into()));
    }
    let (z_inf, qerr) = class_c_superspace_z(alpha_hat, beta_hat, ClassCOptions::default())?;
    let rows = limit_rows(alpha_hat, beta_hat, v, n_list, nsamples, seed, z_inf)?;
    let violations = rows.windows(2).filter(|w| w[1].deviation > w[0].deviation).count();
    let last = rows.last().unwrap();
    let within = last.deviation <= 3.0 * last.stderr + qerr;
    let smax = rows.iter().map(|r| r.stderr).fold(0.0, f64::max);
    let dmax = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    let dmin = rows.iter().map(|r| r.deviation).fold(f64::INFINITY, f64::min);
    let ctl_hat = SourceMatrix::new(SymmetryClass::C, vec![alpha_hat], vec![alpha_hat])?;
    let ctl_n = n_list[0];
    let (ctl, _) = z_gen_mc(&EnsembleSpec::new(SymmetryClass::C, ctl_n, v)?, &ctl_hat.scaled(PI * v / ctl_n as f64), 16, seed, SpectralMethod::Fast)?;
    let s = saddle_info(SymmetryClass::C, 1)?;
    let f0 = saddle_function(&s.q0, 2, s.v).norm();
    let mut notes = vec![format!("alpha_hat = {}, beta_hat = {}, v = {}, limit = {} (+- {:.1e})", alpha_hat, beta_hat, v, z_inf, qerr)];
    for r in &rows {
        notes.push(format!("N = {}: Z = {} +- {:.2e}, deviation {:.3e}", r.n, r.value, r.stderr, r.deviation));
    }
    let method = Method {
        quad_dims: 2,
        grassmann: 4,
        samples: nsamples * rows.len(),
        seed: Some(seed),
        error_estimate: last.stderr,
        notes,
    };
    let mut r = VerificationReport::new("theorem34_convergence", last.value, z_inf, 3.0 * last.stderr + qerr, 0.0, method)
        .with_control(ctl)
        .with_check("deviations non-increasing (one violation allowed)", violations <= 1)
        .with_check("last N within 3 stderr", within)
        .with_check("saddle value F(Q0) = 0", f0 < 1e-14);
    r.inconclusive = smax > dmax - dmin;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_sources_give_one_exactly() {
        let a = C64::new(0.1, -0.4);
        let rows = limit_rows(a, a, 1.0, &[10, 20], 50, 3, C64::new(1.0, 0.0)).unwrap();
        assert!(rows.iter().all(|r| r.value == C64::new(1.0, 0.0) && r.stderr == 0.0));
    }

    #[test]
    fn rejects_bad_lists() {
        let (a, b) = (C64::new(0.0, -0.3), C64::new(0.25, 0.0));
        assert!(theorem34_convergence(a, b, 1.0, &[50, 100], 100, 1).is_err());
        assert!(theorem34_convergence(a, b, 1.0, &[50, 200, 100], 100, 1).is_err());
    }

    #[test]
    fn approaches_the_limit() {
        let (a, b) = (C64::new(0.0, -0.3), C64::new(0.25, 0.0));
        let r = theorem34_convergence(a, b, 1.0, &[50, 100, 200], 100_000, 20).unwrap();
        println!("{:#?}", r.method.notes);
        assert!(r.pass, "{:?}", r);
    }
}
