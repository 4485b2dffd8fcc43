//! `afree`: run one verification described by a JSON run-spec.
//!
//! Exit status is 0 when every checked property holds, 2 when one is
//! violated and 1 on any error.

mod commands;
mod output;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(name = "afree", version, about = "Spectral checks for constrained fields on the torus")]
struct Cli {
    /// Run-spec JSON file; `-` reads stdin.
    #[arg(long, required_unless_present = "print_schema")]
    spec: Option<PathBuf>,
    /// Override a spec entry, e.g. `--set grid.n=17`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; overrides `output_dir` in the spec.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the spec seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Do not print the summary.
    #[arg(long)]
    quiet: bool,
    /// Print the run-spec JSON schema and exit.
    #[arg(long)]
    print_schema: bool,
}

fn load(cli: &Cli) -> anyhow::Result<spec::RunSpec> {
    let path = cli.spec.as_ref().expect("clap enforces --spec");
    let text = if path.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin()).context("reading spec from stdin")?
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    let mut doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    for s in &cli.set {
        spec::apply_override(&mut doc, s)?;
    }
    if let Some(seed) = cli.seed {
        spec::apply_override(&mut doc, &format!("seed={seed}"))?;
    }
    if let Some(out) = &cli.out {
        doc.as_object_mut()
            .context("run-spec must be a JSON object")?
            .insert("output_dir".into(), Value::String(out.display().to_string()));
    }
    spec::parse(&doc)
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let spec = load(cli)?;
    let outcome = commands::run(&spec)?;
    let dir = spec.output_dir.clone().unwrap_or_else(|| PathBuf::from("afree-out"));
    output::write(&dir, &spec, &outcome)?;
    if !cli.quiet {
        for line in &outcome.summary {
            println!("{line}");
        }
        println!(
            "{}: results in {}",
            if outcome.violation { "VIOLATION" } else { "ok" },
            dir.display()
        );
    }
    Ok(outcome.violation)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_schema {
        println!("{}", serde_json::to_string_pretty(&spec::schema()).expect("schema serializes"));
        return ExitCode::SUCCESS;
    }
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
