//! Random instance generation, (m, k) phase sweeps, and comparison of the
//! empirical transition against the theoretical weak-threshold curve.
//!
//! Reproducibility contract: every trial derives its own ChaCha8 stream
//! from `seed_base ^ trial_index`, and each (m, k) cell derives `seed_base`
//! from the master seed by a splitmix64 chain, so results are bit-identical
//! regardless of execution order or worker count.

use crate::error::{Error, Result};
use crate::solver::{
    recovery_success, solve_l2l1, BlockDims, BlockSignal, ProblemInstance, SolverConfig,
};
use crate::threshold::{self, ThresholdKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

/// One measurement column of the sweep: a fixed m and the k values to try.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sweep {
    pub m: usize,
    pub k_list: Vec<usize>,
}

/// Full phase-experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub sweeps: Vec<Sweep>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default = "SolverConfig::default")]
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::Config("n and d must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        for sweep in &self.sweeps {
            if sweep.m == 0 || sweep.m > self.n {
                return Err(Error::Config(format!("m={} must lie in 1..=n={}", sweep.m, self.n)));
            }
            for &k in &sweep.k_list {
                if k > self.n {
                    return Err(Error::Config(format!("k={k} exceeds n={}", self.n)));
                }
            }
        }
        self.solver.validate()
    }
}

/// Aggregated outcome of one (m, k) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    /// Trials whose estimate missed the planted signal at `tolerance_used`.
    pub failures: usize,
    /// Trials on which the splitting iteration hit its cap; tallied
    /// separately so numerical stalls are not confused with genuine
    /// mis-recovery (a stalled trial still counts as a failure if its
    /// estimate misses the planted signal).
    pub nonconverged: usize,
    pub tolerance_used: f64,
    pub seed_base: u64,
}

/// Theoretical weak threshold at one undersampling fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPoint {
    pub alpha: f64,
    pub beta_weak: f64,
}

/// All cells of a sweep plus the config echo and the theory overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub cells: Vec<PhaseCell>,
    pub config: ExperimentConfig,
    pub theory: Vec<TheoryPoint>,
}

/// Per-m comparison of the empirical 50%-failure crossing against the
/// theoretical weak threshold. `empirical_k50` is `None` when the k sweep
/// never straddles 50% (the NoBracket case).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub m: usize,
    pub alpha: f64,
    pub k_theory: f64,
    pub empirical_k50: Option<f64>,
    pub delta: Option<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-cell seed from the master seed and the cell position.
pub fn cell_seed(master_seed: u64, m: usize, k: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ m as u64) ^ k as u64)
}

/// Draw a planted instance: i.i.d. standard normal measurement matrix,
/// uniformly random k-block support, i.i.d. standard normal entries on the
/// support, `y = A x`. The draw order (matrix by columns, then support,
/// then block entries in support order) is fixed as part of the
/// reproducibility contract.
pub fn generate_instance(dims: &BlockDims, seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = dims.measurement_len();
    let cols = dims.signal_len();
    let mut matrix = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            matrix[(i, j)] = rng.sample(StandardNormal);
        }
    }

    // partial Fisher-Yates for the support, then fill in index order
    let mut indices: Vec<usize> = (0..dims.n).collect();
    for t in 0..dims.k {
        let j = rng.gen_range(t..dims.n);
        indices.swap(t, j);
    }
    let mut support: Vec<usize> = indices[..dims.k].to_vec();
    support.sort_unstable();

    let mut x = DVector::zeros(cols);
    for &b in &support {
        for r in 0..dims.d {
            x[b * dims.d + r] = rng.sample(StandardNormal);
        }
    }
    let measurements = &matrix * &x;
    ProblemInstance {
        matrix,
        measurements,
        planted: BlockSignal::new(x, *dims).expect("generated signal matches dims"),
        seed,
    }
}

fn run_trial(dims: &BlockDims, config: &SolverConfig, seed_base: u64, trial: usize) -> Result<(bool, bool)> {
    let instance = generate_instance(dims, seed_base ^ trial as u64);
    let report = solve_l2l1(&instance, config)?;
    let success = recovery_success(&report.estimate, &instance.planted, config.success_tol)?;
    Ok((!success, !report.converged))
}

/// Run `trials` independent recoveries for one (m, k) cell, counting
/// failures and solver stalls. Trials run on the rayon pool when the
/// `parallel` feature is enabled.
pub fn run_cell(dims: &BlockDims, trials: usize, config: &SolverConfig, seed_base: u64) -> Result<PhaseCell> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    config.validate()?;
    #[cfg(feature = "parallel")]
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(dims, config, seed_base, t))
        .collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<(bool, bool)> =
        (0..trials).map(|t| run_trial(dims, config, seed_base, t)).collect::<Result<_>>()?;
    Ok(tally(dims, trials, config, seed_base, &outcomes))
}

/// Sequential twin of [`run_cell`]; must produce identical cells.
pub fn run_cell_seq(dims: &BlockDims, trials: usize, config: &SolverConfig, seed_base: u64) -> Result<PhaseCell> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    config.validate()?;
    let outcomes: Vec<(bool, bool)> =
        (0..trials).map(|t| run_trial(dims, config, seed_base, t)).collect::<Result<_>>()?;
    Ok(tally(dims, trials, config, seed_base, &outcomes))
}

fn tally(
    dims: &BlockDims,
    trials: usize,
    config: &SolverConfig,
    seed_base: u64,
    outcomes: &[(bool, bool)],
) -> PhaseCell {
    PhaseCell {
        m: dims.m,
        k: dims.k,
        trials,
        failures: outcomes.iter().filter(|o| o.0).count(),
        nonconverged: outcomes.iter().filter(|o| o.1).count(),
        tolerance_used: config.success_tol,
        seed_base,
    }
}

/// Run every cell of the sweep. See [`run_grid_with`] for resume support.
pub fn run_grid(config: &ExperimentConfig) -> Result<PhaseTable> {
    run_grid_with(config, &[], |_| {})
}

/// Run the sweep, skipping cells already present in `completed` (resume
/// after interruption) and invoking `on_cell` after each newly computed
/// cell so callers can persist partial results.
pub fn run_grid_with(
    config: &ExperimentConfig,
    completed: &[PhaseCell],
    mut on_cell: impl FnMut(&PhaseCell),
) -> Result<PhaseTable> {
    config.validate()?;
    let done: BTreeSet<(usize, usize)> = completed.iter().map(|c| (c.m, c.k)).collect();
    let mut cells: Vec<PhaseCell> = completed.to_vec();
    for sweep in &config.sweeps {
        for &k in &sweep.k_list {
            if done.contains(&(sweep.m, k)) {
                continue;
            }
            let dims = BlockDims::new(config.n, config.d, sweep.m, k)?;
            let seed = cell_seed(config.master_seed, sweep.m, k);
            let cell = run_cell(&dims, config.trials, &config.solver, seed)?;
            on_cell(&cell);
            cells.push(cell);
        }
    }
    cells.sort_by_key(|c| (c.m, c.k));

    let ms: BTreeSet<usize> = cells.iter().map(|c| c.m).collect();
    let mut theory = Vec::new();
    for m in ms {
        let alpha = m as f64 / config.n as f64;
        let beta = threshold_beta_for(config.d, alpha)?;
        theory.push(TheoryPoint { alpha, beta_weak: beta });
    }
    Ok(PhaseTable { cells, config: config.clone(), theory })
}

fn threshold_beta_for(d: usize, alpha: f64) -> Result<f64> {
    let d = u32::try_from(d).map_err(|_| Error::Config(format!("block length {d} too large")))?;
    Ok(threshold::threshold_beta(ThresholdKind::Weak, alpha, d, 0.0)?.beta)
}

/// Interpolate the 50%-failure crossing per m and compare with
/// `n * threshold_beta(weak, m/n, d)`.
pub fn compare_to_theory(table: &PhaseTable) -> Result<Vec<TheoryRow>> {
    let n = table.config.n;
    let ms: BTreeSet<usize> = table.cells.iter().map(|c| c.m).collect();
    let mut rows = Vec::new();
    for m in ms {
        let alpha = m as f64 / n as f64;
        let k_theory = n as f64 * threshold_beta_for(table.config.d, alpha)?;
        let mut cells: Vec<&PhaseCell> = table.cells.iter().filter(|c| c.m == m).collect();
        cells.sort_by_key(|c| c.k);
        let empirical_k50 = crossing_at_half(&cells);
        rows.push(TheoryRow {
            m,
            alpha,
            k_theory,
            empirical_k50,
            delta: empirical_k50.map(|k50| k50 - k_theory),
        });
    }
    Ok(rows)
}

/// Linear interpolation of the failure fraction at 50%, scanning the first
/// adjacent pair that straddles it.
fn crossing_at_half(cells: &[&PhaseCell]) -> Option<f64> {
    let frac = |c: &PhaseCell| c.failures as f64 / c.trials as f64;
    for pair in cells.windows(2) {
        let (f1, f2) = (frac(pair[0]), frac(pair[1]));
        if f1 < 0.5 && f2 >= 0.5 {
            let (k1, k2) = (pair[0].k as f64, pair[1].k as f64);
            return Some(k1 + (0.5 - f1) * (k2 - k1) / (f2 - f1));
        }
    }
    None
}

/// Comment line carrying the crate version and the full parameter echo,
/// prepended to every CSV this module writes.
pub fn csv_header_comment(config: &ExperimentConfig) -> String {
    format!(
        "# blocksparse v{} n={} d={} trials={} master_seed={} success_tol={} penalty={} max_iters={}",
        env!("CARGO_PKG_VERSION"),
        config.n,
        config.d,
        config.trials,
        config.master_seed,
        config.solver.success_tol,
        config.solver.penalty,
        config.solver.max_iters,
    )
}

pub const PHASE_CSV_COLUMNS: &str = "m,k,trials,failures,nonconverged,seed_base";

pub fn phase_csv_row(cell: &PhaseCell) -> String {
    format!(
        "{},{},{},{},{},{}",
        cell.m, cell.k, cell.trials, cell.failures, cell.nonconverged, cell.seed_base
    )
}

/// Write the phase table CSV (`m,k,trials,failures,nonconverged,seed_base`).
pub fn write_phase_csv(path: &Path, table: &PhaseTable) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "{}", csv_header_comment(&table.config))?;
    writeln!(out, "{PHASE_CSV_COLUMNS}")?;
    for cell in &table.cells {
        writeln!(out, "{}", phase_csv_row(cell))?;
    }
    Ok(())
}

/// Read cells back from a phase CSV, ignoring the comment and header lines.
/// Used to resume an interrupted sweep.
pub fn read_phase_csv(path: &Path) -> Result<Vec<PhaseCell>> {
    let text = std::fs::read_to_string(path)?;
    let mut cells = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('m') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Config(format!("malformed phase CSV line: {line}")));
        }
        let parse = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| Error::Config(format!("malformed phase CSV field `{s}`: {e}")))
        };
        cells.push(PhaseCell {
            m: parse(fields[0])? as usize,
            k: parse(fields[1])? as usize,
            trials: parse(fields[2])? as usize,
            failures: parse(fields[3])? as usize,
            nonconverged: parse(fields[4])? as usize,
            tolerance_used: f64::NAN,
            seed_base: parse(fields[5])?,
        });
    }
    Ok(cells)
}

/// Write the theory overlay CSV (`alpha,beta_weak_theory`).
pub fn write_theory_csv(path: &Path, table: &PhaseTable) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "{}", csv_header_comment(&table.config))?;
    writeln!(out, "alpha,beta_weak_theory")?;
    for point in &table.theory {
        writeln!(out, "{},{}", point.alpha, point.beta_weak)?;
    }
    Ok(())
}

/// Write the JSON sidecar echoing the full configuration.
pub fn write_config_sidecar(path: &Path, config: &ExperimentConfig) -> Result<()> {
    let json = serde_json::to_string_pretty(config)
        .map_err(|e| Error::Config(format!("config serialization failed: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}
