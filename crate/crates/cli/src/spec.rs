//! The run-spec: one JSON document describing a verification run.

use std::path::PathBuf;

use afree::convexity::{AqcBudget, DensitySpec, GardingSearchBudget};
use afree::dynamics::SystemSpec;
use afree::opsym::OperatorSpec;
use afree::projection::DecomposeOptions;
use afree::statics::MinimalityOptions;
use anyhow::{anyhow, bail, Context};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_SEED: u64 = afree::opsym::sampling::DEFAULT_SEED;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Symbol,
    Wavecone,
    Project,
    Primitive,
    Decompose,
    Garding,
    Aqc,
    Dynamics,
    Statics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d: usize,
    /// Points per axis; must be odd.
    pub n: usize,
}

/// Where a field comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    Zero {},
    /// The same value at every point.
    Constant { value: Vec<f64> },
    /// Seeded zero-mean band-limited field with the given L² norm.
    Random {
        band: usize,
        amplitude: f64,
        #[serde(default)]
        seed_offset: u64,
    },
    /// As `random`, projected onto the constraint.
    RandomAfree {
        band: usize,
        amplitude: f64,
        #[serde(default)]
        seed_offset: u64,
    },
    /// A field file written by this tool.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SymbolOptions {
    pub n_samples: usize,
    pub tol: f64,
    /// Extra directions reported row by row.
    pub xis: Vec<Vec<f64>>,
}

impl Default for SymbolOptions {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            tol: 1e-10,
            xis: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct WaveconeOptions {
    pub n_dirs: usize,
}

impl Default for WaveconeOptions {
    fn default() -> Self {
        Self { n_dirs: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FieldOptions {
    pub input: FieldSource,
    /// Write the output field next to the report.
    #[serde(default)]
    pub save_field: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSpec {
    pub sequence: Vec<FieldSource>,
    pub k_schedule: Vec<f64>,
    pub p: f64,
    #[serde(default)]
    pub options: DecomposeOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GardingOptions {
    pub background: FieldSource,
    pub n_fields: usize,
    pub bands: Vec<usize>,
    pub amplitudes: Vec<f64>,
    /// Defaults to the density's growth exponent.
    pub p: Option<f64>,
    /// Run the adversarial search against the fitted pair.
    pub adversarial: Option<GardingSearchBudget>,
}

impl Default for GardingOptions {
    fn default() -> Self {
        Self {
            background: FieldSource::Zero {},
            n_fields: 24,
            bands: vec![1, 2, 3],
            amplitudes: vec![0.05, 0.5, 2.0],
            p: None,
            adversarial: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AqcSpec {
    /// Background matrix `lambda`.
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub budget: AqcBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    /// Initial data of the strong solution.
    pub background: FieldSource,
    /// Added to the background to get the weak initial data.
    pub perturbation: FieldSource,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub viscosity_weak: f64,
    #[serde(default = "one")]
    pub stride: usize,
    /// Windows `[t, t + eps]` for the dissipation check of the weak run.
    #[serde(default)]
    pub dissipation_windows: Vec<[f64; 2]>,
    /// Write initial and final states of both runs.
    #[serde(default)]
    pub save_fields: bool,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct StaticsSpec {
    pub background: FieldSource,
    #[serde(default)]
    pub options: MinimalityOptions,
}

/// Pass/fail thresholds applied by the front end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest accepted A-free, round-trip and additivity residual.
    pub afree: f64,
    /// Most negative accepted dissipation margin of a viscous run.
    pub dissipation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            afree: 1e-9,
            dissipation: 1e-8,
        }
    }
}

/// A verification run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<SymbolOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavecone: Option<WaveconeOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<FieldOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<FieldOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decompose: Option<DecomposeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub garding: Option<GardingOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aqc: Option<AqcSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statics: Option<StaticsSpec>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

pub fn schema() -> Value {
    serde_json::to_value(schemars::schema_for!(RunSpec)).expect("schema serializes")
}

/// Applies `a.b.c=value`; `value` is parsed as JSON, falling back to a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> anyhow::Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{assignment}`"))?;
    if key.is_empty() {
        bail!("--set key is empty");
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .with_context(|| format!("`{part}` in `{key}` indexes an array"))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| anyhow!("index {idx} out of range in `{key}`"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => bail!("`{key}` descends into a scalar"),
        };
    }
    unreachable!("loop returns on the last key")
}

/// Parses a spec document, reporting the JSON path of the first bad key.
pub fn parse(doc: &Value) -> anyhow::Result<RunSpec> {
    let spec: RunSpec = serde_path_to_error::deserialize(doc.clone()).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("invalid run-spec at `{path}`: {}", e.into_inner())
    })?;
    if let Some(g) = spec.grid {
        afree::spectral::Grid::new(g.d, g.n).map_err(|e| anyhow!("invalid run-spec at `grid`: {e}"))?;
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn override_parses_json_then_falls_back_to_string() {
        let mut doc = json!({"grid": {"d": 2, "n": 9}, "aqc": {"lambda": [0, 0]}});
        apply_override(&mut doc, "grid.n=11").unwrap();
        apply_override(&mut doc, "aqc.lambda.1=2.5").unwrap();
        apply_override(&mut doc, "output_dir=runs/a").unwrap();
        apply_override(&mut doc, "dynamics.dt=0.01").unwrap();
        assert_eq!(doc["grid"]["n"], 11);
        assert_eq!(doc["aqc"]["lambda"], json!([0, 2.5]));
        assert_eq!(doc["output_dir"], "runs/a");
        assert_eq!(doc["dynamics"]["dt"], 0.01);
    }

    #[test]
    fn override_rejects_malformed_assignments() {
        let mut doc = json!({"grid": {"n": 9}, "xs": [1]});
        assert!(apply_override(&mut doc, "grid.n").is_err());
        assert!(apply_override(&mut doc, "=3").is_err());
        assert!(apply_override(&mut doc, "grid.n.x=1").is_err());
        assert!(apply_override(&mut doc, "xs.4=1").is_err());
        assert!(apply_override(&mut doc, "xs.a=1").is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let spec = parse(&json!({"command": "symbol", "operator": {"builtin": "div", "d": 3, "m": 1}})).unwrap();
        assert_eq!(spec.seed, DEFAULT_SEED);
        assert_eq!(spec.tolerances, Tolerances::default());
        assert!(parse(&json!({"command": "nope"})).unwrap_err().to_string().contains("command"));
    }
}
