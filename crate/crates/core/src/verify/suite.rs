//! Named collections of verification jobs. Jobs run concurrently; reports
//! are merged in order of their ids.

use super::*;
use crate::ensembles::SymmetryClass;
use crate::spectral::SourceMatrix;
use crate::{Error, Result, C64};
use rayon::prelude::*;

type Job = Box<dyn Fn() -> Result<Vec<VerificationReport>> + Send + Sync>;

const CLASS_TABLE_SNAPSHOT: &str = include_str!("../../tests/data/class_table.tsv");

/// Suite names accepted by [`run_suite`].
pub const SUITES: [&str; 3] = ["quick", "core", "full"];

impl VerificationReport {
    /// Failing report for a job that returned an error.
    pub fn failed(id: impl Into<String>, err: &Error) -> VerificationReport {
        let z = C64::new(0.0, 0.0);
        let method = Method { notes: vec![err.to_string()], ..Method::default() };
        VerificationReport::new(id, z, z, 0.0, 0.0, method).with_check(format!("error: {}", err), false)
    }
}

fn job(id: &'static str, f: impl Fn() -> Result<Vec<VerificationReport>> + Send + Sync + 'static) -> (&'static str, Job) {
    (id, Box::new(f))
}

fn one(r: Result<VerificationReport>) -> Result<Vec<VerificationReport>> {
    r.map(|x| vec![x])
}

/// Saddle data for every class: `Q0² = -v²`, `F(Q0) = 0`, and the table
/// against its snapshot.
pub fn saddle_reports() -> Result<Vec<VerificationReport>> {
    let mut out = vec![];
    for cls in SymmetryClass::ALL {
        let s = saddle_info(cls, 2)?;
        let method = Method { notes: vec![format!("{} | {} | {}", s.coset, s.m_b, s.m_f)], ..Method::default() };
        out.push(
            VerificationReport::new(format!("saddle_{}", cls.label()), C64::new(s.square_residual, 0.0), C64::new(0.0, 0.0), 1e-14, 0.0, method)
                .with_check("F(Q0) = 0", s.f_q0.norm() < 1e-14),
        );
    }
    let table = class_table()?;
    let method = Method { notes: vec!["table against checked-in snapshot".into()], ..Method::default() };
    let same = table == CLASS_TABLE_SNAPSHOT;
    out.push(
        VerificationReport::new("saddle_class_table", C64::new(if same { 0.0 } else { 1.0 }, 0.0), C64::new(0.0, 0.0), 0.0, 0.0, method)
            .with_check("byte-identical", same),
    );
    Ok(out)
}

fn gaussian_job(seed: u64, n_diag: usize, n_full: usize) -> Result<Vec<VerificationReport>> {
    let opts = GaussOptions::default();
    gaussian_instances(seed, n_diag, n_full)?
        .into_iter()
        .map(|g| {
            let mut r = gaussian_identity_check(g.c, &g.a, &g.b, &opts)?;
            r.id = format!("gaussian_{}", g.label);
            Ok(r)
        })
        .collect()
}

/// Source pairs `(α, β)` of the Q-integral checks.
pub fn theorem33_sources(cls: SymmetryClass) -> Vec<(C64, C64)> {
    let c = C64::new;
    match cls {
        SymmetryClass::A => vec![(c(0.0, -1.0), c(0.0, 0.0)), (c(0.3, -0.8), c(-0.5, 0.0)), (c(-0.2, -1.5), c(0.7, 0.2))],
        _ => vec![(c(0.0, -1.0), c(0.3, 0.0)), (c(0.4, -0.9), c(0.6, -0.2)), (c(0.0, -0.5), c(1.1, 0.0))],
    }
}

/// Q-integral checks at `b = 1` for every source pair of the class.
pub fn theorem33_set(cls: SymmetryClass) -> Result<Vec<VerificationReport>> {
    theorem33_sources(cls)
        .into_iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let src = SourceMatrix::new(cls, vec![a], vec![b])?;
            let mut r = theorem33_check(cls, &src, 1.0, 1.0, Q33Options::default())?;
            r.id = format!("{}_{}", r.id, k);
            Ok(r)
        })
        .collect()
}

fn jobs(name: &str) -> Result<Vec<(&'static str, Job)>> {
    let i = C64::new(0.0, 1.0);
    let mut v: Vec<(&'static str, Job)> = vec![
        job("hs_step_bosonic", move || one(hs_step_check(C64::new(0.6, -0.3), 0.8, 1, false, 48))),
        job("hs_step_symbolic", move || one(hs_step_check(C64::new(0.5, 0.4), 0.7, 1, true, 48))),
        job("schafer_wegner", || one(schafer_wegner_check(2, 1.0, 1.0, 1000, 7))),
        job("saddle", saddle_reports),
        job("theorem33_A", || theorem33_set(SymmetryClass::A)),
    ];
    match name {
        "quick" => v.push(job("gaussian", || gaussian_job(11, 2, 1))),
        "core" | "full" => {
            v.push(job("gaussian", || gaussian_job(11, 10, 3)));
            v.push(job("theorem33_C", || theorem33_set(SymmetryClass::C)));
            v.push(job("theorem33_C_b_scan", move || {
                let src = SourceMatrix::new(SymmetryClass::C, vec![-i], vec![C64::new(0.3, 0.0)])?;
                one(theorem33_b_scan(&src, 1.0, &[0.5, 1.0, 2.0], Q33Options::default()))
            }));
            let samples = if name == "full" { 1_000_000 } else { 100_000 };
            v.push(job("theorem34_convergence", move || {
                one(theorem34_convergence(C64::new(0.0, -0.3), C64::new(0.25, 0.0), 1.0, &[50, 100, 200], samples, 20))
            }));
        }
        _ => return Err(Error::Invalid(format!("unknown suite '{}'; expected one of {:?}", name, SUITES))),
    }
    Ok(v)
}

/// Runs every job of suite `name` (`quick`, `core` or `full`); job errors
/// become failing reports. Reports are sorted by id.
pub fn run_suite(name: &str) -> Result<Vec<VerificationReport>> {
    let js = jobs(name)?;
    let mut out: Vec<VerificationReport> = js
        .par_iter()
        .map(|(id, f)| f().unwrap_or_else(|e| vec![VerificationReport::failed(*id, &e)]))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Human-readable pass/fail table.
pub fn report_table(reports: &[VerificationReport]) -> String {
    let mut s = String::new();
    for r in reports {
        s.push_str(&r.table_row());
        s.push('\n');
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    s.push_str(&format!("{}/{} passed\n", passed, reports.len()));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saddle_reports_pass() {
        for r in saddle_reports().unwrap() {
            assert!(r.pass, "{:?}", r);
        }
    }

    #[test]
    fn unknown_suite_rejected() {
        assert!(run_suite("nope").is_err());
    }

    #[test]
    fn failed_report_fails() {
        let r = VerificationReport::failed("x", &Error::Invalid("bad".into()));
        assert!(!r.pass);
    }
}

