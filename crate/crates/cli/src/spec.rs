use std::fs;
use std::path::{Path, PathBuf};

use dualsav::{MeshWeight, PresetName, PresetOverrides};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Which output files to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emit {
    #[serde(default = "yes")]
    pub diagnostics: bool,
    #[serde(default = "yes")]
    pub snapshots: bool,
    #[serde(default = "yes")]
    pub summary: bool,
}

fn yes() -> bool {
    true
}

impl Default for Emit {
    fn default() -> Self {
        Self {
            diagnostics: true,
            snapshots: true,
            summary: true,
        }
    }
}

/// One JSON run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub preset: PresetName,
    #[serde(default)]
    pub overrides: PresetOverrides,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Defaults to the initial and final time.
    #[serde(default)]
    pub snapshot_times: Option<Vec<f64>>,
    #[serde(default)]
    pub emit: Emit,
    /// Time steps of a convergence sweep.
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
    /// Vertex counts of a resolution sweep.
    #[serde(default)]
    pub vertices_sweep: Option<Vec<usize>>,
    /// Mesh weights to compare side by side.
    #[serde(default)]
    pub compare: Option<Vec<MeshWeight>>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

pub fn parse_weight(s: &str) -> Result<MeshWeight, String> {
    match s.trim() {
        "uniform" => Ok(MeshWeight::Uniform),
        "lagrangian_reference" | "lagrangian" => Ok(MeshWeight::LagrangianReference),
        other => Err(format!(
            "unknown mesh weight `{other}` (expected uniform or lagrangian_reference)"
        )),
    }
}

pub fn weight_name(w: MeshWeight) -> &'static str {
    match w {
        MeshWeight::Uniform => "uniform",
        MeshWeight::LagrangianReference => "lagrangian_reference",
    }
}
