use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qpart_core::digits::Basis;
use qpart_core::hamiltonian::TfimSpec;
use qpart_core::variance_lab::{CoefficientModel, VarianceScanSpec};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Vqe(VqeExperiment),
    Classify(ClassifyExperiment),
    BpScan(BpScanExperiment),
    ConjugateDump(ConjugateDumpExperiment),
    HaarCheck(HaarCheckExperiment),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Vqe(_) => "vqe",
            Experiment::Classify(_) => "classify",
            Experiment::BpScan(_) => "bp-scan",
            Experiment::ConjugateDump(_) => "conjugate-dump",
            Experiment::HaarCheck(_) => "haar-check",
        }
    }
}

fn two() -> usize {
    2
}
fn one() -> usize {
    1
}
fn lr() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeExperiment {
    pub tfim: TfimSpec,
    pub subsystems: usize,
    /// Restricted-unitary generators, 1-based labels such as `"Z3 Y4"`.
    pub generators: Vec<String>,
    #[serde(default = "two")]
    pub ansatz_layers: usize,
    #[serde(default)]
    pub optimizer: VqeOptimizer,
    /// Independent initializations with seeds `seed, seed+1, …`; the best is reported.
    #[serde(default = "one")]
    pub restarts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqeOptimizer {
    #[serde(default = "lr")]
    pub learning_rate: f64,
    pub steps: usize,
}

impl Default for VqeOptimizer {
    fn default() -> Self {
        VqeOptimizer {
            learning_rate: 0.1,
            steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyExperiment {
    /// Headerless 64-pixel + label CSV; the bundled corpus when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    pub basis: Basis,
    #[serde(default)]
    pub optimizer: ClassifyOptimizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyOptimizer {
    #[serde(default = "lr")]
    pub learning_rate: f64,
    pub epochs: usize,
    pub coeff_init_std: f64,
}

impl Default for ClassifyOptimizer {
    fn default() -> Self {
        ClassifyOptimizer {
            learning_rate: 0.1,
            epochs: 400,
            coeff_init_std: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpScanExperiment {
    pub subsystem_qubits: usize,
    pub subsystem_counts: Vec<usize>,
    pub trials: usize,
    #[serde(default = "two")]
    pub layers: usize,
    pub coefficients: CoefficientModel,
}

impl BpScanExperiment {
    pub fn to_spec(&self, seed: u64) -> VarianceScanSpec {
        VarianceScanSpec {
            subsystem_qubits: self.subsystem_qubits,
            subsystem_counts: self.subsystem_counts.clone(),
            trials: self.trials,
            layers: self.layers,
            coefficients: self.coefficients,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateDumpExperiment {
    pub tfim: TfimSpec,
    pub subsystems: usize,
    pub generators: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaarCheckExperiment {
    pub qubits: usize,
    pub depth: usize,
    pub samples: usize,
}

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../presets/", $name, ".json")))),*]
    };
}

/// Shipped configurations, keyed `<kind>-<name>`.
pub const PRESETS: &[(&str, &str)] = presets!(
    "vqe-n4",
    "vqe-n6",
    "vqe-n8",
    "vqe-n10",
    "vqe-n12",
    "vqe-n16",
    "classify-full",
    "classify-reduced",
    "bp-scan-default",
    "bp-scan-normal",
    "conjugate-dump-n8",
    "haar-check-q2",
    "haar-check-q3",
);

pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

/// Looks up `name` for `kind`, accepting either `n8` or `vqe-n8`.
pub fn preset(kind: &str, name: &str) -> Result<ExperimentConfig, CliError> {
    let full = if name.starts_with(&format!("{kind}-")) {
        name.to_string()
    } else {
        format!("{kind}-{name}")
    };
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == full).ok_or_else(|| {
        let known: Vec<&str> = PRESETS
            .iter()
            .filter(|(n, _)| n.starts_with(&format!("{kind}-")))
            .map(|(n, _)| &n[kind.len() + 1..])
            .collect();
        CliError::Config(format!(
            "no {kind} preset {name:?}; known: {}",
            known.join(", ")
        ))
    })?;
    let cfg = parse_config(text, &format!("preset {full}"))?;
    if cfg.experiment.kind() != kind {
        return Err(CliError::Config(format!(
            "preset {full} is a {} config",
            cfg.experiment.kind()
        )));
    }
    Ok(cfg)
}

pub fn default_preset(kind: &str) -> &'static str {
    match kind {
        "vqe" => "n4",
        "classify" => "reduced",
        "conjugate-dump" => "n8",
        "haar-check" => "q2",
        _ => "default",
    }
}
