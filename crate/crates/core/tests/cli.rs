use serde_json::Value;
use std::path::{Path, PathBuf};
use superrmt::cli::{emit_results, run, Format, HistogramRow, RunConfig};

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("superrmt-cli-{}-{}", name, std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn argv(args: &[&str]) -> Vec<String> {
    std::iter::once("superrmt").chain(args.iter().copied()).map(String::from).collect()
}

fn run_in(dir: &Path, args: &[&str]) -> i32 {
    let mut a = args.to_vec();
    let d = dir.to_str().unwrap();
    a.extend(["--out", d]);
    run(argv(&a))
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {}", p.display(), e))
}

/// Validator for the JSON Schema keywords used by the checked-in schema.
fn validate(v: &Value, s: &Value, root: &Value, at: &str) -> Result<(), String> {
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        let mut t = root;
        for part in r.trim_start_matches("#/").split('/') {
            t = &t[part];
        }
        return validate(v, t, root, at);
    }
    if let Some(ty) = s.get("type") {
        let tys: Vec<&str> = match ty {
            Value::String(x) => vec![x.as_str()],
            Value::Array(xs) => xs.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let ok = tys.iter().any(|t| match *t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            "number" => v.is_number(),
            "integer" => v.is_i64() || v.is_u64(),
            _ => false,
        });
        if !ok {
            return Err(format!("{}: expected {:?}, got {}", at, tys, v));
        }
    }
    if let Some(e) = s.get("enum").and_then(Value::as_array) {
        if !e.contains(v) {
            return Err(format!("{}: {} not in {:?}", at, v, e));
        }
    }
    if let Some(c) = s.get("const") {
        if c != v {
            return Err(format!("{}: {} != {}", at, v, c));
        }
    }
    if let Some(req) = s.get("required").and_then(Value::as_array) {
        for k in req {
            if v.get(k.as_str().unwrap()).is_none() {
                return Err(format!("{}: missing {}", at, k));
            }
        }
    }
    if let (Some(props), Some(obj)) = (s.get("properties").and_then(Value::as_object), v.as_object()) {
        for (k, sub) in props {
            if let Some(x) = obj.get(k) {
                validate(x, sub, root, &format!("{}.{}", at, k))?;
            }
        }
    }
    if let (Some(items), Some(arr)) = (s.get("items"), v.as_array()) {
        for (i, x) in arr.iter().enumerate() {
            validate(x, items, root, &format!("{}[{}]", at, i))?;
        }
    }
    if let Some(all) = s.get("allOf").and_then(Value::as_array) {
        for sub in all {
            let applies = sub.get("if").is_none_or(|c| validate(v, c, root, at).is_ok());
            if let (true, Some(then)) = (applies, sub.get("then")) {
                validate(v, then, root, at)?;
            }
        }
    }
    Ok(())
}

fn schema() -> Value {
    serde_json::from_str(&read(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/results.schema.json"))).unwrap()
}

#[test]
fn schema_validator_rejects_bad_documents() {
    let s = schema();
    let bad = serde_json::json!({"schema_version": 2, "kind": "verify", "config": {}, "records": []});
    assert!(validate(&bad, &s, &s, "$").is_err());
    let bad_rec = serde_json::json!({"id": 3});
    assert!(validate(&bad_rec, &s["$defs"]["verification_report"], &s, "$").is_err());
}

#[test]
fn volumes_example() {
    let d = tmp("volumes");
    assert_eq!(run_in(&d, &["volumes", "--p", "2"]), 0);
    let csv = read(d.join("volumes.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("quantity,method,re,im,error"));
    let re: f64 = lines.next().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((re - 4.0 * std::f64::consts::PI).abs() < 1e-6);
    let cfg: Value = serde_json::from_str(&read(d.join("volumes.config.json"))).unwrap();
    assert_eq!(cfg["config"]["p"], 2);
}

#[test]
fn zgen_example_prints_both_methods() {
    let d = tmp("zgen");
    assert_eq!(run_in(&d, &["zgen", "--class", "C", "--N", "1", "--alpha", "0,-1", "--beta", "0,0", "--nsamples", "2000"]), 0);
    let csv = read(d.join("zgen.csv"));
    assert!(csv.contains(",quadrature,") && csv.contains(",monte_carlo,"), "{}", csv);
}

#[test]
fn usage_and_io_exit_codes() {
    let d = tmp("codes");
    assert_eq!(run_in(&d, &["zgen", "--class", "Q"]), 1);
    assert_eq!(run_in(&d, &["zgen", "--class", "C", "--alpha", "0,1"]), 1);
    assert_eq!(run_in(&d, &["sample", "--class", "AIII", "--p", "2", "--q", "3"]), 1);
    assert_eq!(run(argv(&["frobnicate"])), 1);
    assert_eq!(run(argv(&["volumes", "--out", "/proc/no/such/dir"])), 3);
    let cfg = d.join("missing.cfg");
    assert_eq!(run_in(&d, &["info", "--config", cfg.to_str().unwrap()]), 3);
}

#[test]
fn empty_records_give_header_only_csv() {
    let d = tmp("empty");
    let cfg = RunConfig {
        subcommand: "dos".into(),
        class: "A".into(),
        n_big: 1,
        v: 1.0,
        n: 1,
        p: None,
        q: None,
        alphas: vec![],
        betas: vec![],
        nsamples: 0,
        bins: 0,
        emin: 0.0,
        emax: 0.0,
        seed: 0,
        workers: None,
        out_dir: d.display().to_string(),
        format: Format::Csv,
        suite: "core".into(),
    };
    let files = emit_results::<HistogramRow>(&[], "dos", Format::Csv, &d.join("empty"), &cfg).unwrap();
    assert_eq!(read(files[0].clone()), "bin_lo,bin_hi,density,stderr\n");
}

#[test]
fn dos_writes_four_columns_and_script() {
    let d = tmp("dos");
    assert_eq!(run_in(&d, &["dos", "--N", "40", "--nsamples", "200", "--bins", "20", "--seed", "5"]), 0);
    let csv = read(d.join("dos.csv"));
    assert_eq!(csv.lines().count(), 21);
    assert!(csv.lines().all(|l| l.split(',').count() == 4));
    let gp = read(d.join("dos.gp"));
    assert!(gp.contains("plot 'dos.csv'") && gp.contains("sc(x)"));
}

#[test]
fn same_seed_same_files() {
    let (a, b) = (tmp("rep-a"), tmp("rep-b"));
    for d in [&a, &b] {
        assert_eq!(run_in(d, &["zgen", "--class", "A", "--N", "6", "--nsamples", "3000", "--seed", "77", "--format", "json"]), 0);
        assert_eq!(run_in(d, &["sample", "--class", "DIII", "--N", "2", "--nsamples", "2", "--seed", "77"]), 0);
    }
    let strip = |s: String, d: &Path| s.replace(d.to_str().unwrap(), "OUT");
    assert_eq!(strip(read(a.join("zgen.json")), &a), strip(read(b.join("zgen.json")), &b));
    assert_eq!(read(a.join("sample.csv")), read(b.join("sample.csv")));
}

#[test]
fn config_file_with_flag_override() {
    let d = tmp("cfgfile");
    std::fs::create_dir_all(&d).unwrap();
    let cfg = d.join("run.cfg");
    std::fs::write(&cfg, "class = C\nN = 1\nalpha = 0,-1\nbeta = 0.3\nnsamples = 500\nformat = json\n").unwrap();
    assert_eq!(run_in(&d, &["zgen", "--config", cfg.to_str().unwrap(), "--nsamples", "800"]), 0);
    let j: Value = serde_json::from_str(&read(d.join("zgen.json"))).unwrap();
    assert_eq!(j["config"]["class"], "C");
    assert_eq!(j["config"]["nsamples"], 800);
    assert_eq!(j["config"]["betas"][0][0], 0.3);
}

#[test]
fn env_var_sets_default_output_dir() {
    let d = tmp("env");
    let st = std::process::Command::new(env!("CARGO_BIN_EXE_superrmt"))
        .args(["volumes", "--p", "1"])
        .env("SUPERRMT_OUT_DIR", &d)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(d.join("volumes.csv").exists());
}

#[test]
fn info_dumps_table() {
    let d = tmp("info");
    assert_eq!(run_in(&d, &["info", "--format", "json"]), 0);
    let j: Value = serde_json::from_str(&read(d.join("info.json"))).unwrap();
    let s = schema();
    validate(&j, &s, &s, "$").unwrap();
    assert_eq!(j["records"].as_array().unwrap().len(), 10);
    let snap = read(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/class_table.tsv"));
    assert_eq!(read(d.join("class_table.tsv")), snap);
}

#[test]
fn verify_quick_suite_validates_against_schema() {
    let d = tmp("verify");
    assert_eq!(run_in(&d, &["verify", "--suite", "quick", "--format", "json"]), 0);
    let j: Value = serde_json::from_str(&read(d.join("verify.json"))).unwrap();
    let s = schema();
    validate(&j, &s, &s, "$").unwrap();
    let recs = j["records"].as_array().unwrap();
    assert!(recs.len() > 10);
    assert!(recs.iter().all(|r| r["pass"] == true));
}
