use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn afree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afree"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_spec(spec: &Value, out: &Path, extra: &[&str]) -> Output {
    let dir = out.parent().unwrap();
    let path = dir.join(format!("{}.json", out.file_name().unwrap().to_string_lossy()));
    std::fs::write(&path, serde_json::to_vec(spec).unwrap()).unwrap();
    let mut args = vec!["--spec", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    afree(&args)
}

fn report(out: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn garding_spec() -> Value {
    json!({
        "command": "garding",
        "operator": {"builtin": "curl", "d": 2, "m": 2},
        "grid": {"d": 2, "n": 9},
        "density": {"kind": "quadratic", "matrix": [[2,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,3]]},
        "garding": {"n_fields": 6}
    })
}

#[test]
fn garding_on_quadratic_density_passes_with_zero_c1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let o = run_spec(&garding_spec(), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["result"]["garding"]["c1_fit"].as_f64(), Some(0.0));
    for f in ["rows.csv", "summary.txt"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn aqc_on_negative_dirichlet_energy_exits_two_with_certificate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let spec = json!({
        "command": "aqc",
        "operator": {"builtin": "curl", "d": 2, "m": 2},
        "density": {"kind": "isotropic", "n": 4, "c": -2.0},
        "aqc": {"lambda": [1, 0, 0, 1], "budget": {"n_random": 4, "n_descent_steps": 5, "n_refine": 1}}
    });
    let o = run_spec(&spec, &out, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(report(&out)["status"], "violation");
    let cert = afree::spectral::io::load_field(&out.join("certificate.field")).unwrap();
    assert!(matches!(cert, afree::spectral::io::FieldData::Samples(f) if f.fiber() == 4));
}

#[test]
fn even_grid_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = garding_spec();
    spec["grid"]["n"] = json!(8);
    let o = run_spec(&spec, &tmp.path().join("e"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n must be odd"), "{}", stderr(&o));
}

#[test]
fn unknown_key_names_its_path() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = garding_spec();
    spec["garding"]["n_feilds"] = json!(3);
    let o = run_spec(&spec, &tmp.path().join("u"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("garding.n_feilds") && msg.contains("unknown field"), "{msg}");
}

#[test]
fn missing_section_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = json!({"command": "aqc", "operator": {"builtin": "curl", "d": 2, "m": 2},
                      "density": {"kind": "det"}});
    let o = run_spec(&spec, &tmp.path().join("m"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("needs `aqc`"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = json!({
        "command": "dynamics",
        "grid": {"d": 1, "n": 17},
        "system": {"system": "psystem1d", "sigma": [1.0, 0.0, 0.5]},
        "dynamics": {"background": {"kind": "random_afree", "band": 2, "amplitude": 0.2},
                     "perturbation": {"kind": "random_afree", "band": 3, "amplitude": 0.05, "seed_offset": 7},
                     "dt": 0.005, "t_final": 0.05, "viscosity_weak": 0.001}
    });
    let (a, b) = (tmp.path().join("r1"), tmp.path().join("r2"));
    assert_eq!(run_spec(&spec, &a, &[]).status.code(), Some(0));
    assert_eq!(run_spec(&spec, &b, &[]).status.code(), Some(0));
    for f in ["rows.csv", "report.json", "summary.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn report_embeds_hash_and_version() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("h");
    assert_eq!(run_spec(&garding_spec(), &out, &[]).status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["version"], afree::VERSION);
    assert_eq!(r["tool"], "afree");
    let hash = r["spec_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.bytes().all(|b| b.is_ascii_hexdigit()));

    let other = tmp.path().join("h2");
    assert_eq!(run_spec(&garding_spec(), &other, &["--seed", "5"]).status.code(), Some(0));
    assert_ne!(report(&other)["spec_sha256"], r["spec_sha256"]);
}

#[test]
fn overrides_reach_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run_spec(&garding_spec(), &out, &["--set", "grid.n=11", "--set", "garding.bands=[1]", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["spec"]["grid"]["n"], 11);
    assert_eq!(r["spec"]["garding"]["bands"], json!([1]));
    assert_eq!(r["seed"], 9);
}

#[test]
fn shipped_schema_is_current() {
    let o = afree(&["--print-schema"]);
    assert_eq!(o.status.code(), Some(0));
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schema/runspec.schema.json");
    let shipped: Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    assert_eq!(printed, shipped, "regenerate with `afree --print-schema`");
}

#[test]
fn example_specs_run() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    let tmp = tempfile::tempdir().unwrap();
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let out = tmp.path().join(&name);
        let o = afree(&["--spec", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
        let expected = if name.starts_with("aqc_concave") { 2 } else { 0 };
        assert_eq!(o.status.code(), Some(expected), "{name}: {}", stderr(&o));
        n += 1;
    }
    assert!(n >= 9);
}
