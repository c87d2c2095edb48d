//! Command-line front end: `sample`, `dos`, `zgen`, `volumes`, `verify`,
//! `info`. Exit codes: 0 pass, 1 usage, 2 numerical failure, 3 IO.

use crate::berezin::{gl11_integral, supersphere_volume, Gl11Options};
use crate::ensembles::{eigenvalues, expected_normalizer, normalizer_dims, sample_h, EnsembleSpec, SymmetryClass};
use crate::mc::substream;
use crate::spectral::{dos_estimate, z_gen_mc, z_gen_quadrature, Bins, SourceMatrix, SpectralMethod};
use crate::superalg::GrassmannElement;
use crate::verify::{report_table, run_suite, saddle_info, saddle_listing, class_table, VerificationReport};
use crate::{Error, C64};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

// Stdout writes that tolerate a closed pipe.
macro_rules! say {
    () => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout());
    }};
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! say_raw {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

/// Version of the JSON envelope written by [`emit_results`].
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SUPERRMT_OUT_DIR";

const DEFAULT_OUT_DIR: &str = "superrmt-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "usage error: {}", s),
            CliError::Numerical(s) => write!(f, "numerical failure: {}", s),
            CliError::Io(s) => write!(f, "io error: {}", s),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(_) | Error::Unsupported(_) | Error::DimMismatch(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {}", path.display(), e))
}

#[derive(Parser, Debug)]
#[command(name = "superrmt", version, about = "Symmetry-class random matrices and supersymmetric integral checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Draw Hamiltonians and write their entries.
    Sample(Flags),
    /// Density-of-states histogram plus a gnuplot script.
    Dos(Flags),
    /// Generating function by quadrature (N = 1, classes A and C) and Monte Carlo.
    Zgen(Flags),
    /// Supersphere volume and the Gl(1|1) integral of 1.
    Volumes(Flags),
    /// Run a verification suite.
    Verify(Flags),
    /// Class and saddle-point metadata.
    Info(Flags),
}

#[derive(Args, Debug, Default, Clone)]
struct Flags {
    /// Symmetry class label (A, AI, AII, AIII, BDI, CII, C, CI, D, DIII).
    #[arg(long)]
    class: Option<String>,
    /// Matrix size parameter N.
    #[arg(long = "N")]
    big_n: Option<usize>,
    /// Ensemble width v.
    #[arg(long)]
    v: Option<f64>,
    /// Number of source pairs n (zgen) or auxiliary size (info).
    #[arg(long)]
    n: Option<usize>,
    /// Chiral block size p, or the even dimension of the supersphere.
    #[arg(long)]
    p: Option<usize>,
    /// Chiral block size q.
    #[arg(long)]
    q: Option<usize>,
    /// Source energies `re,im`; repeat the flag or separate with ';'.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Vec<String>,
    /// Source energies paired with --alpha, same syntax.
    #[arg(long, allow_hyphen_values = true)]
    beta: Vec<String>,
    /// Monte Carlo sample count.
    #[arg(long)]
    nsamples: Option<usize>,
    /// Number of histogram bins.
    #[arg(long)]
    bins: Option<usize>,
    /// Lower histogram edge.
    #[arg(long, allow_hyphen_values = true)]
    emin: Option<f64>,
    /// Upper histogram edge.
    #[arg(long, allow_hyphen_values = true)]
    emax: Option<f64>,
    /// Random seed; results do not depend on --workers.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default from $SUPERRMT_OUT_DIR, else ./superrmt-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Verification suite: quick, core or full.
    #[arg(long)]
    suite: Option<String>,
    /// Key-value config file (`key = value` per line); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Fully resolved run configuration, embedded in every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub class: String,
    #[serde(rename = "N")]
    pub n_big: usize,
    pub v: f64,
    pub n: usize,
    pub p: Option<usize>,
    pub q: Option<usize>,
    pub alphas: Vec<[f64; 2]>,
    pub betas: Vec<[f64; 2]>,
    pub nsamples: usize,
    pub bins: usize,
    pub emin: f64,
    pub emax: f64,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out_dir: String,
    pub format: Format,
    pub suite: String,
}

fn parse_complex(s: &str) -> Result<C64, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |x: &str| x.parse::<f64>().map_err(|_| CliError::Usage(format!("cannot parse '{}' as a number in '{}'", x, s)));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(CliError::Usage(format!("complex value '{}' must be 're' or 're,im'", s))),
    }
}

fn parse_list(vals: &[String]) -> Result<Vec<C64>, CliError> {
    vals.iter().flat_map(|v| v.split(';')).filter(|s| !s.trim().is_empty()).map(parse_complex).collect()
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut m = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected 'key = value'", path.display(), k + 1)))?;
        m.insert(key.trim().to_string(), val.trim().to_string());
    }
    Ok(m)
}

fn merge(mut f: Flags, file: &BTreeMap<String, String>) -> Result<Flags, CliError> {
    fn take<T: std::str::FromStr>(slot: &mut Option<T>, file: &BTreeMap<String, String>, key: &str) -> Result<(), CliError> {
        if slot.is_none() {
            if let Some(s) = file.get(key) {
                *slot = Some(s.parse().map_err(|_| CliError::Usage(format!("config key '{}': cannot parse '{}'", key, s)))?);
            }
        }
        Ok(())
    }
    const KEYS: [&str; 17] =
        ["class", "N", "v", "n", "p", "q", "alpha", "beta", "nsamples", "bins", "emin", "emax", "seed", "workers", "out", "format", "suite"];
    if let Some(k) = file.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(CliError::Usage(format!("unknown config key '{}'", k)));
    }
    take(&mut f.class, file, "class")?;
    take(&mut f.big_n, file, "N")?;
    take(&mut f.v, file, "v")?;
    take(&mut f.n, file, "n")?;
    take(&mut f.p, file, "p")?;
    take(&mut f.q, file, "q")?;
    take(&mut f.nsamples, file, "nsamples")?;
    take(&mut f.bins, file, "bins")?;
    take(&mut f.emin, file, "emin")?;
    take(&mut f.emax, file, "emax")?;
    take(&mut f.seed, file, "seed")?;
    take(&mut f.workers, file, "workers")?;
    take(&mut f.out, file, "out")?;
    take(&mut f.suite, file, "suite")?;
    if f.format.is_none() {
        if let Some(s) = file.get("format") {
            f.format = Some(Format::from_str(s, true).map_err(|_| CliError::Usage(format!("config key 'format': '{}' is not csv or json", s)))?);
        }
    }
    if f.alpha.is_empty() {
        f.alpha = file.get("alpha").cloned().into_iter().collect();
    }
    if f.beta.is_empty() {
        f.beta = file.get("beta").cloned().into_iter().collect();
    }
    Ok(f)
}

fn resolve(sub: &str, f: Flags) -> Result<RunConfig, CliError> {
    let f = match &f.config {
        Some(p) => merge(f.clone(), &read_config_file(p)?)?,
        None => f,
    };
    let class = f.class.unwrap_or_else(|| "A".into());
    let cls: SymmetryClass = class.parse().map_err(CliError::from)?;
    let v = f.v.unwrap_or(1.0);
    if !(v > 0.0) {
        return Err(CliError::Usage("v must be positive".into()));
    }
    let (dn, dsamples) = match sub {
        "sample" => (4, 1),
        "dos" => (200, 1000),
        "zgen" => (1, 10_000),
        _ => (1, 0),
    };
    let default_src = if sub == "zgen" { vec![C64::new(0.0, -1.0)] } else { vec![] };
    let mut alphas = parse_list(&f.alpha)?;
    let mut betas = parse_list(&f.beta)?;
    if alphas.is_empty() {
        alphas = default_src.clone();
    }
    if betas.is_empty() {
        betas = alphas.iter().map(|_| C64::new(0.0, 0.0)).collect();
    }
    let out_dir = f
        .out
        .map(|p| p.display().to_string())
        .or_else(|| std::env::var(OUT_DIR_ENV).ok())
        .unwrap_or_else(|| DEFAULT_OUT_DIR.into());
    let half = 2.5 * v * if cls.particle_hole() || cls.chiral() { 1.5 } else { 1.0 };
    Ok(RunConfig {
        subcommand: sub.into(),
        class: cls.label().into(),
        n_big: f.big_n.unwrap_or(dn),
        v,
        n: f.n.unwrap_or(alphas.len().max(1)),
        p: f.p,
        q: f.q,
        alphas: alphas.iter().map(|z| [z.re, z.im]).collect(),
        betas: betas.iter().map(|z| [z.re, z.im]).collect(),
        nsamples: f.nsamples.unwrap_or(dsamples),
        bins: f.bins.unwrap_or(60),
        emin: f.emin.unwrap_or(-half),
        emax: f.emax.unwrap_or(half),
        seed: f.seed.unwrap_or(1),
        workers: f.workers,
        out_dir,
        format: f.format.unwrap_or(Format::Csv),
        suite: f.suite.unwrap_or_else(|| "core".into()),
    })
}

impl RunConfig {
    pub fn class(&self) -> SymmetryClass {
        self.class.parse().expect("validated label")
    }

    fn complex(v: &[[f64; 2]]) -> Vec<C64> {
        v.iter().map(|z| C64::new(z[0], z[1])).collect()
    }

    /// Ensemble spec honoring `p`, `q` for chiral classes.
    pub fn spec(&self) -> Result<EnsembleSpec, CliError> {
        let cls = self.class();
        match (self.p, self.q) {
            (Some(p), Some(q)) if cls.chiral() => Ok(EnsembleSpec::with_pq(cls, p, q, self.v)?),
            (Some(_), _) | (_, Some(_)) if cls.chiral() => Err(CliError::Usage("chiral classes need both --p and --q".into())),
            _ => Ok(EnsembleSpec::new(cls, self.n_big, self.v)?),
        }
    }

    pub fn source(&self) -> Result<SourceMatrix, CliError> {
        Ok(SourceMatrix::new(self.class(), Self::complex(&self.alphas), Self::complex(&self.betas))?)
    }
}

/// Output record with a fixed CSV header.
pub trait Record: Serialize {
    const HEADER: &'static [&'static str];
    fn row(&self) -> Vec<String>;
}

#[derive(Clone, Debug, Serialize)]
pub struct MatrixEntry {
    pub sample: usize,
    pub row: usize,
    pub col: usize,
    pub re: f64,
    pub im: f64,
}

impl Record for MatrixEntry {
    const HEADER: &'static [&'static str] = &["sample", "row", "col", "re", "im"];
    fn row(&self) -> Vec<String> {
        vec![self.sample.to_string(), self.row.to_string(), self.col.to_string(), self.re.to_string(), self.im.to_string()]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub density: f64,
    pub stderr: f64,
}

impl Record for HistogramRow {
    const HEADER: &'static [&'static str] = &["bin_lo", "bin_hi", "density", "stderr"];
    fn row(&self) -> Vec<String> {
        vec![self.bin_lo.to_string(), self.bin_hi.to_string(), self.density.to_string(), self.stderr.to_string()]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValueRecord {
    pub quantity: String,
    pub method: String,
    pub re: f64,
    pub im: f64,
    pub error: f64,
}

impl Record for ValueRecord {
    const HEADER: &'static [&'static str] = &["quantity", "method", "re", "im", "error"];
    fn row(&self) -> Vec<String> {
        vec![self.quantity.clone(), self.method.clone(), self.re.to_string(), self.im.to_string(), self.error.to_string()]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassRecord {
    pub class: String,
    pub comment: String,
    pub cartan_noncompact: String,
    pub cartan_compact: String,
    pub rss: String,
    pub rss_dims: String,
    pub normalizer: String,
    pub normalizer_even: usize,
    pub normalizer_odd: usize,
    pub coset: String,
    pub m_b: String,
    pub m_f: String,
    pub saddles: usize,
}

impl Record for ClassRecord {
    const HEADER: &'static [&'static str] = &[
        "class",
        "comment",
        "cartan_noncompact",
        "cartan_compact",
        "rss",
        "rss_dims",
        "normalizer",
        "normalizer_even",
        "normalizer_odd",
        "coset",
        "m_b",
        "m_f",
        "saddles",
    ];
    fn row(&self) -> Vec<String> {
        vec![
            self.class.clone(),
            self.comment.clone(),
            self.cartan_noncompact.clone(),
            self.cartan_compact.clone(),
            self.rss.clone(),
            self.rss_dims.clone(),
            self.normalizer.clone(),
            self.normalizer_even.to_string(),
            self.normalizer_odd.to_string(),
            self.coset.clone(),
            self.m_b.clone(),
            self.m_f.clone(),
            self.saddles.to_string(),
        ]
    }
}

impl Record for VerificationReport {
    const HEADER: &'static [&'static str] =
        &["id", "pass", "inconclusive", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_dev", "rel_dev", "tolerance", "control_re", "control_im"];
    fn row(&self) -> Vec<String> {
        let (cr, ci) = self.control.map_or((String::new(), String::new()), |c| (c.re.to_string(), c.im.to_string()));
        vec![
            self.id.clone(),
            self.pass.to_string(),
            self.inconclusive.to_string(),
            self.lhs.re.to_string(),
            self.lhs.im.to_string(),
            self.rhs.re.to_string(),
            self.rhs.im.to_string(),
            self.abs_dev.to_string(),
            self.rel_dev.to_string(),
            self.tolerance().to_string(),
            cr,
            ci,
        ]
    }
}

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    schema_version: u32,
    kind: &'a str,
    config: &'a RunConfig,
    records: &'a [R],
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Writes `records` to `<stem>.csv` (plus `<stem>.config.json` holding the
/// config snapshot) or to `<stem>.json` (versioned envelope with config and
/// records). Returns the files written.
pub fn emit_results<R: Record>(records: &[R], kind: &str, format: Format, stem: &Path, config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    match format {
        Format::Csv => {
            let path = stem.with_extension("csv");
            let mut w = csv::WriterBuilder::new().from_writer(vec![]);
            let csv_err = |e: csv::Error| io_err(&path, e);
            w.write_record(R::HEADER).map_err(csv_err)?;
            for r in records {
                w.write_record(r.row()).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| io_err(&path, e))?;
            write_file(&path, &bytes)?;
            let side = stem.with_extension("config.json");
            let env: Envelope<'_, R> = Envelope { schema_version: SCHEMA_VERSION, kind, config, records: &[] };
            write_file(&side, &serde_json::to_vec_pretty(&env).map_err(|e| io_err(&side, e))?)?;
            Ok(vec![path, side])
        }
        Format::Json => {
            let path = stem.with_extension("json");
            let env = Envelope { schema_version: SCHEMA_VERSION, kind, config, records };
            write_file(&path, &serde_json::to_vec_pretty(&env).map_err(|e| io_err(&path, e))?)?;
            Ok(vec![path])
        }
    }
}

fn stem(cfg: &RunConfig, name: &str) -> PathBuf {
    Path::new(&cfg.out_dir).join(name)
}

fn announce(files: &[PathBuf]) {
    for f in files {
        say!("wrote {}", f.display());
    }
}

fn cmd_sample(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let mut recs = vec![];
    for s in 0..cfg.nsamples {
        let h = sample_h(&spec, &mut substream(cfg.seed, s as u64));
        for r in 0..h.nrows() {
            for c in 0..h.ncols() {
                recs.push(MatrixEntry { sample: s, row: r, col: c, re: h[(r, c)].re, im: h[(r, c)].im });
            }
        }
        let ev = eigenvalues(&h)?;
        say!("sample {}: dim {}, spectrum [{:.6}, {:.6}]", s, h.nrows(), ev[0], ev[ev.len() - 1]);
    }
    announce(&emit_results(&recs, "sample", cfg.format, &stem(cfg, "sample"), cfg)?);
    Ok(())
}

/// Plain-text gnuplot script for the histogram in `csv_name`.
pub fn gnuplot_script(cfg: &RunConfig, csv_name: &str) -> String {
    let mut s = format!(
        "# density of states: class {}, N = {}, v = {}, {} samples, seed {}\n\
         set datafile separator ','\n\
         set xlabel 'E'\n\
         set ylabel 'density of states'\n\
         N = {}\n\
         v = {}\n",
        cfg.class, cfg.n_big, cfg.v, cfg.nsamples, cfg.seed, cfg.n_big, cfg.v
    );
    if cfg.class() == SymmetryClass::A {
        s.push_str("sc(x) = abs(x) < 2*v ? N/(pi*v)*sqrt(1 - (x/(2*v))**2) : 0\n");
        s.push_str(&format!(
            "plot '{}' skip 1 using (($1+$2)/2):3:4 with yerrorbars title 'histogram', sc(x) with lines title 'semicircle'\n",
            csv_name
        ));
    } else {
        s.push_str(&format!("plot '{}' skip 1 using (($1+$2)/2):3:4 with yerrorbars title 'histogram'\n", csv_name));
    }
    s
}

fn cmd_dos(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let bins = Bins { lo: cfg.emin, hi: cfg.emax, n: cfg.bins };
    let h = dos_estimate(&spec, cfg.nsamples, bins, cfg.seed, SpectralMethod::auto(spec.cls))?;
    let recs: Vec<HistogramRow> = (0..h.counts.len())
        .map(|i| HistogramRow { bin_lo: h.edges[i], bin_hi: h.edges[i + 1], density: h.density[i], stderr: h.stderr[i] })
        .collect();
    let st = stem(cfg, "dos");
    let mut files = emit_results(&recs, "dos", cfg.format, &st, cfg)?;
    let data_name = if cfg.format == Format::Csv {
        "dos.csv".to_string()
    } else {
        // gnuplot reads the CSV; write it alongside the JSON.
        files.extend(emit_results(&recs, "dos", Format::Csv, &st, cfg)?);
        "dos.csv".to_string()
    };
    let gp = st.with_extension("gp");
    write_file(&gp, gnuplot_script(cfg, &data_name).as_bytes())?;
    files.push(gp);
    if spec.cls == SymmetryClass::A {
        say!("semicircle sup-norm relative deviation over |E| <= 1.5v: {:.4}", h.semicircle_deviation(1.5 * cfg.v));
    }
    announce(&files);
    Ok(())
}

fn cmd_zgen(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let src = cfg.source()?;
    let mut recs = vec![];
    if spec.n == 1 && matches!(spec.cls, SymmetryClass::A | SymmetryClass::C) {
        let (z, e) = z_gen_quadrature(&spec, &src)?;
        say!("quadrature: {:.12} {:+.12}i  (error {:.1e})", z.re, z.im, e);
        recs.push(ValueRecord { quantity: "Z".into(), method: "quadrature".into(), re: z.re, im: z.im, error: e });
    }
    if cfg.nsamples >= 2 {
        let (z, e) = z_gen_mc(&spec, &src, cfg.nsamples, cfg.seed, SpectralMethod::auto(spec.cls))?;
        say!("monte carlo: {:.12} {:+.12}i  (stderr {:.1e}, {} samples)", z.re, z.im, e, cfg.nsamples);
        recs.push(ValueRecord { quantity: "Z".into(), method: "monte_carlo".into(), re: z.re, im: z.im, error: e });
    }
    announce(&emit_results(&recs, "zgen", cfg.format, &stem(cfg, "zgen"), cfg)?);
    Ok(())
}

fn cmd_volumes(cfg: &RunConfig) -> Result<(), CliError> {
    let p = cfg.p.unwrap_or(2);
    let vol = supersphere_volume(p)?;
    say!("vol(S^{}|2) = {:.12} {:+.12}i  (error {:.1e})", p, vol.value.re, vol.value.im, vol.error);
    let one = |_: &crate::superalg::SuperMatrix| -> crate::Result<GrassmannElement> { Ok(crate::superalg::Pool::new(2).one()) };
    let g = gl11_integral(&one, Gl11Options::default())?;
    say!("Gl(1|1) integral of 1 = {:.12} {:+.12}i  (error {:.1e})", g.value.re, g.value.im, g.error);
    let recs = vec![
        ValueRecord { quantity: format!("vol(S^{}|2)", p), method: "two-cell berezin".into(), re: vol.value.re, im: vol.value.im, error: vol.error },
        ValueRecord { quantity: "gl11_integral_of_1".into(), method: "haar with boundary term".into(), re: g.value.re, im: g.value.im, error: g.error },
    ];
    announce(&emit_results(&recs, "volumes", cfg.format, &stem(cfg, "volumes"), cfg)?);
    Ok(())
}

fn cmd_verify(cfg: &RunConfig) -> Result<(), CliError> {
    let reports = run_suite(&cfg.suite)?;
    say_raw!("{}", report_table(&reports));
    announce(&emit_results(&reports, "verify", cfg.format, &stem(cfg, "verify"), cfg)?);
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("failed: {}", failed.join(", "))))
    }
}

fn cmd_info(cfg: &RunConfig, all: bool) -> Result<(), CliError> {
    let n = cfg.n.max(1);
    let classes: Vec<SymmetryClass> = if all { SymmetryClass::ALL.to_vec() } else { vec![cfg.class()] };
    let mut recs = vec![];
    for cls in classes {
        let (name, _) = expected_normalizer(cls, n);
        let (e, o) = normalizer_dims(cls, n)?;
        let s = saddle_info(cls, n)?;
        let (nc, c) = cls.cartan_row();
        recs.push(ClassRecord {
            class: cls.label().into(),
            comment: cls.comment().into(),
            cartan_noncompact: nc.into(),
            cartan_compact: c.into(),
            rss: cls.rss().into(),
            rss_dims: cls.rss_dims().into(),
            normalizer: name.into(),
            normalizer_even: e,
            normalizer_odd: o,
            coset: s.coset.clone(),
            m_b: s.m_b.clone(),
            m_f: s.m_f.clone(),
            saddles: 1 + s.q1.is_some() as usize,
        });
    }
    let table = class_table()?;
    say_raw!("{}", table);
    say!();
    say_raw!("{}", saddle_listing(n)?);
    let mut files = emit_results(&recs, "info", cfg.format, &stem(cfg, "info"), cfg)?;
    let tp = stem(cfg, "class_table.tsv");
    write_file(&tp, table.as_bytes())?;
    files.push(tp);
    announce(&files);
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    let (name, flags) = match cmd {
        Cmd::Sample(f) => ("sample", f),
        Cmd::Dos(f) => ("dos", f),
        Cmd::Zgen(f) => ("zgen", f),
        Cmd::Volumes(f) => ("volumes", f),
        Cmd::Verify(f) => ("verify", f),
        Cmd::Info(f) => ("info", f),
    };
    let all_classes = flags.class.is_none();
    let cfg = resolve(name, flags)?;
    let body = || match name {
        "sample" => cmd_sample(&cfg),
        "dos" => cmd_dos(&cfg),
        "zgen" => cmd_zgen(&cfg),
        "volumes" => cmd_volumes(&cfg),
        "verify" => cmd_verify(&cfg),
        _ => cmd_info(&cfg, all_classes),
    };
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {} workers: {}", w, e)))?
            .install(body),
        None => body(),
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e);
            e.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_lists() {
        let v = parse_list(&["0,-1".into(), "0.5;1,2".into()]).unwrap();
        assert_eq!(v, vec![C64::new(0.0, -1.0), C64::new(0.5, 0.0), C64::new(1.0, 2.0)]);
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = std::env::temp_dir().join(format!("superrmt-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("run.cfg");
        std::fs::write(&p, "class = C\nN = 7\nseed = 9 # comment\nalpha = 0,-2\n").unwrap();
        let f = Flags { big_n: Some(3), config: Some(p.clone()), ..Flags::default() };
        let c = resolve("zgen", f).unwrap();
        assert_eq!((c.class.as_str(), c.n_big, c.seed), ("C", 3, 9));
        assert_eq!(c.alphas, vec![[0.0, -2.0]]);
        std::fs::write(&p, "colour = red\n").unwrap();
        let f = Flags { config: Some(p), ..Flags::default() };
        assert!(matches!(resolve("zgen", f), Err(CliError::Usage(_))));
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(Error::Invalid("x".into())).code(), 1);
        assert_eq!(CliError::from(Error::Divergence("x".into())).code(), 2);
        assert_eq!(CliError::Io("x".into()).code(), 3);
    }
}
