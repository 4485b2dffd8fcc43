//! Report, table and field files of a run.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::commands::Outcome;
use crate::spec::RunSpec;

/// The spec with defaults filled and the output location dropped.
pub fn canonical(spec: &RunSpec) -> RunSpec {
    RunSpec {
        output_dir: None,
        ..spec.clone()
    }
}

/// SHA-256 of the compact canonical spec.
pub fn spec_hash(spec: &RunSpec) -> String {
    let canonical = serde_json::to_vec(&canonical(spec)).expect("spec serializes");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write(dir: &Path, spec: &RunSpec, out: &Outcome) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let report = json!({
        "tool": "afree",
        "version": afree::VERSION,
        "spec_sha256": spec_hash(spec),
        "command": spec.command,
        "seed": spec.seed,
        "status": if out.violation { "violation" } else { "pass" },
        "spec": canonical(spec),
        "result": out.result,
    });
    let put = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
    };
    put("report.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
    put("rows.csv", out.table.to_csv_string()?.as_bytes())?;
    let mut summary = out.summary.join("\n");
    summary.push('\n');
    put("summary.txt", summary.as_bytes())?;
    for (name, f) in &out.fields {
        afree::spectral::io::save_samples(&dir.join(name), f).with_context(|| format!("writing {name}"))?;
    }
    Ok(())
}
