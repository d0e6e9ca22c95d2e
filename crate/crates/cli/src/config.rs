//! TOML experiment configuration for the `simulate` subcommand.
//!
//! Schema (see `configs/` for ready-made files):
//!
//! ```toml
//! n = 100            # number of blocks
//! d = 15             # block length
//! trials = 20        # recoveries per (m, k) cell
//! master_seed = 42
//! out_prefix = "table1_desk"   # optional; file outputs get .csv/.theory.csv/.config.json
//!
//! [[sweep]]
//! m = 50
//! k = [25, 26, 27, 28, 29, 30, 31]
//!
//! [solver]           # optional; defaults shown
//! penalty = 1.0
//! max_iters = 10000
//! primal_tol = 1e-6
//! dual_tol = 1e-6
//! success_tol = 1e-3
//! ```

use crate::CliError;
use blocksparse::harness::{ExperimentConfig, Sweep};
use blocksparse::solver::SolverConfig;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSchema {
    n: usize,
    d: usize,
    trials: usize,
    master_seed: u64,
    out_prefix: Option<PathBuf>,
    #[serde(default)]
    sweep: Vec<SweepSchema>,
    #[serde(default)]
    solver: SolverSchema,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSchema {
    m: usize,
    k: Vec<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSchema {
    penalty: Option<f64>,
    max_iters: Option<usize>,
    primal_tol: Option<f64>,
    dual_tol: Option<f64>,
    success_tol: Option<f64>,
}

pub struct LoadedExperiment {
    pub experiment: ExperimentConfig,
    pub out_prefix: Option<PathBuf>,
}

pub fn load_experiment(path: &Path) -> Result<LoadedExperiment, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let schema: FileSchema = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;

    let defaults = SolverConfig::default();
    let solver = SolverConfig {
        penalty: schema.solver.penalty.unwrap_or(defaults.penalty),
        max_iters: schema.solver.max_iters.unwrap_or(defaults.max_iters),
        primal_tol: schema.solver.primal_tol.unwrap_or(defaults.primal_tol),
        dual_tol: schema.solver.dual_tol.unwrap_or(defaults.dual_tol),
        success_tol: schema.solver.success_tol.unwrap_or(defaults.success_tol),
    };
    let experiment = ExperimentConfig {
        n: schema.n,
        d: schema.d,
        sweeps: schema.sweep.into_iter().map(|s| Sweep { m: s.m, k_list: s.k }).collect(),
        trials: schema.trials,
        master_seed: schema.master_seed,
        solver,
    };
    Ok(LoadedExperiment { experiment, out_prefix: schema.out_prefix })
}
