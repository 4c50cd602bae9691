//! JSON run configuration. Flags override config; missing fields keep the
//! built-in defaults, so a bare `sweep` over synthetic data works without any
//! config file.

use std::path::PathBuf;

use serde::Deserialize;

use coolsweep_core::solver::SolverConfig;
use coolsweep_core::sweep::{AssignmentPolicy, FractionMode};
use coolsweep_core::{PlantParams, Strategy};

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantParams,
    pub solver: SolverConfig,
    pub sweep: SweepSection,
    pub io: IoSection,
    /// Worker threads; 0 or absent uses the runtime default.
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub k_min: usize,
    pub k_max: usize,
    /// Explicit partition list, e.g. ["(19, 6)", "(14, 6, 5)"]; overrides the
    /// K range when present.
    pub partitions: Option<Vec<String>>,
    pub strategies: Vec<Strategy>,
    pub assignments: Vec<AssignmentPolicy>,
    pub fraction_modes: Vec<FractionMode>,
    pub alpha_grid: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 6,
            partitions: None,
            strategies: vec![Strategy::A, Strategy::B, Strategy::C],
            assignments: vec![AssignmentPolicy::Balanced, AssignmentPolicy::WorstCase],
            fraction_modes: vec![FractionMode::Proportional, FractionMode::Optimized],
            alpha_grid: vec![0.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub dataset: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        cfg.plant
            .validate()
            .map_err(|e| format!("invalid plant parameters in {}: {e}", path.display()))?;
        Ok(cfg)
    }
}
