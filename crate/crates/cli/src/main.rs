//! `blocksparse` command line: threshold computation, curve export, Monte
//! Carlo phase experiments, and the tiny-instance null-space oracle.
//!
//! Exit codes: 0 success, 2 invalid usage or configuration, 3 mathematical
//! failure (no certifiable threshold, kernel too large for the oracle, or
//! a numerical method that cannot converge).

mod config;

use blocksparse::error::Error as CoreError;
use blocksparse::harness::{self, ExperimentConfig, PhaseCell};
use blocksparse::oracle;
use blocksparse::solver::{BlockDims, SolverConfig};
use blocksparse::threshold::{
    asymptotic_threshold_beta, required_alpha, threshold_beta, ThresholdKind,
};
use clap::{Args, Parser, Subcommand};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 2;
const EXIT_MATH: u8 = 3;

#[derive(Parser)]
#[command(name = "blocksparse", version, about = "Block-sparse recovery thresholds, l2/l1 phase experiments, and null-space oracles")]
struct Cli {
    /// Cap the number of worker threads for parallel sections.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a threshold: beta from --alpha, or the required alpha from --beta.
    Threshold(ThresholdArgs),
    /// Export (alpha, beta, theta_hat) curves over an alpha grid as CSV files.
    Curve(CurveArgs),
    /// Run a Monte Carlo phase experiment described by a TOML config.
    Simulate(SimulateArgs),
    /// Cross-validate the weak null-space check against the solver on tiny instances.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct ThresholdArgs {
    /// strong, sectional, or weak
    #[arg(long)]
    kind: ThresholdKind,
    /// Undersampling fraction m/n in (0, 1]; computes the threshold beta.
    #[arg(long, conflicts_with = "beta")]
    alpha: Option<f64>,
    /// Sparsity fraction k/n in [0, 1); computes the required alpha.
    #[arg(long)]
    beta: Option<f64>,
    /// Block length.
    #[arg(long)]
    d: u32,
    /// Concentration slack (0 gives the asymptotic curves).
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Emit a JSON object instead of a bare scalar.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    kind: ThresholdKind,
    /// Comma-separated block lengths; `inf` selects the closed forms.
    #[arg(long, value_delimiter = ',', required = true)]
    d: Vec<String>,
    /// Number of alpha grid points.
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[arg(long, default_value_t = 0.02)]
    alpha_min: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Output directory for the per-(kind, d) CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML experiment description; see configs/ for the schema.
    #[arg(long)]
    config: PathBuf,
    /// Override the output prefix from the config.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
    /// Continue an interrupted run, skipping cells already in the CSV.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid resolution; defaults to 10^4 angles (kernel dim 2) or 10^5
    /// sphere points (kernel dim 3).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    success_tol: f64,
}

/// Usage/config errors exit 2; mathematical failures exit 3.
enum CliError {
    Usage(String),
    Math(String),
    Failure(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_mathematical() {
            CliError::Math(e.to_string())
        } else {
            match e {
                CoreError::Domain(_) | CoreError::Config(_) => CliError::Usage(e.to_string()),
                other => CliError::Failure(other.to_string()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || match &cli.command {
        Command::Threshold(args) => cmd_threshold(args),
        Command::Curve(args) => cmd_curve(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    let result = match cli.workers {
        Some(workers) if workers > 0 => {
            match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                Ok(pool) => pool.install(run),
                Err(e) => Err(CliError::Failure(format!("could not build worker pool: {e}"))),
            }
        }
        Some(_) => Err(CliError::Usage("--workers must be at least 1".into())),
        None => run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Math(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_MATH)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_threshold(args: &ThresholdArgs) -> Result<(), CliError> {
    if args.epsilon < 0.0 {
        return Err(CliError::Usage("--epsilon must be nonnegative".into()));
    }
    let (alpha, beta, theta_hat) = match (args.alpha, args.beta) {
        (Some(alpha), None) => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(CliError::Usage(format!("--alpha must lie in (0, 1], got {alpha}")));
            }
            let result = threshold_beta(args.kind, alpha, args.d, args.epsilon)?;
            if !result.certified {
                return Err(CliError::Math(format!(
                    "no sparsity fraction is certifiable at alpha={alpha} for {} d={}",
                    args.kind, args.d
                )));
            }
            let cert = required_alpha(args.kind, result.beta, args.d, args.epsilon)?;
            warn_on_multiple_roots(cert.sign_changes);
            (alpha, result.beta, cert.theta_hat)
        }
        (None, Some(beta)) => {
            if !(0.0..1.0).contains(&beta) {
                return Err(CliError::Usage(format!("--beta must lie in [0, 1), got {beta}")));
            }
            let cert = required_alpha(args.kind, beta, args.d, args.epsilon)?;
            warn_on_multiple_roots(cert.sign_changes);
            (cert.required_alpha, beta, cert.theta_hat)
        }
        _ => {
            return Err(CliError::Usage("provide exactly one of --alpha or --beta".into()));
        }
    };
    if args.json {
        let obj = serde_json::json!({
            "kind": args.kind,
            "d": args.d,
            "alpha": alpha,
            "beta": beta,
            "theta_hat": theta_hat,
            "epsilon": args.epsilon,
        });
        println!("{obj}");
    } else if args.alpha.is_some() {
        println!("{beta:.12}");
    } else {
        println!("{alpha:.12}");
    }
    Ok(())
}

fn warn_on_multiple_roots(sign_changes: usize) {
    if sign_changes > 1 {
        eprintln!(
            "warning: theta equation has {sign_changes} sign changes; using the largest root"
        );
    }
}

enum BlockLength {
    Finite(u32),
    Infinite,
}

fn parse_block_length(s: &str) -> Result<BlockLength, CliError> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(BlockLength::Infinite);
    }
    s.parse::<u32>()
        .ok()
        .filter(|&d| d >= 1)
        .map(BlockLength::Finite)
        .ok_or_else(|| CliError::Usage(format!("invalid block length `{s}` (expected a positive integer or `inf`)")))
}

fn cmd_curve(args: &CurveArgs) -> Result<(), CliError> {
    if args.points == 0 {
        return Err(CliError::Usage("--points must be at least 1".into()));
    }
    if !(args.alpha_min > 0.0 && args.alpha_max <= 1.0 && args.alpha_min <= args.alpha_max) {
        return Err(CliError::Usage(format!(
            "need 0 < alpha_min <= alpha_max <= 1, got [{}, {}]",
            args.alpha_min, args.alpha_max
        )));
    }
    let alphas: Vec<f64> = (0..args.points)
        .map(|i| {
            if args.points == 1 {
                args.alpha_min
            } else {
                args.alpha_min
                    + (args.alpha_max - args.alpha_min) * i as f64 / (args.points - 1) as f64
            }
        })
        .collect();
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Failure(format!("cannot create {}: {e}", args.out.display())))?;

    for spec in &args.d {
        let (label, rows) = match parse_block_length(spec)? {
            BlockLength::Infinite => {
                let rows: Vec<(f64, f64, f64)> = alphas
                    .iter()
                    .map(|&a| (a, asymptotic_threshold_beta(args.kind, a), 1.0))
                    .collect();
                ("inf".to_string(), rows)
            }
            BlockLength::Finite(d) => {
                let rows = curve_rows(args.kind, d, args.epsilon, &alphas)?;
                (d.to_string(), rows)
            }
        };
        let path = args.out.join(format!("curve_{}_d{}.csv", args.kind, label));
        write_curve_csv(&path, args, spec, &rows)
            .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn curve_rows(
    kind: ThresholdKind,
    d: u32,
    epsilon: f64,
    alphas: &[f64],
) -> Result<Vec<(f64, f64, f64)>, CliError> {
    use rayon::prelude::*;
    let rows: Result<Vec<_>, CoreError> = alphas
        .par_iter()
        .map(|&alpha| {
            let result = threshold_beta(kind, alpha, d, epsilon)?;
            if !result.certified {
                return Ok((alpha, 0.0, 0.0));
            }
            let cert = required_alpha(kind, result.beta, d, epsilon)?;
            Ok((alpha, result.beta, cert.theta_hat))
        })
        .collect();
    Ok(rows?)
}

fn write_curve_csv(
    path: &Path,
    args: &CurveArgs,
    d_label: &str,
    rows: &[(f64, f64, f64)],
) -> std::io::Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(
        out,
        "# blocksparse v{} kind={} d={} epsilon={} alpha_min={} alpha_max={} points={}",
        env!("CARGO_PKG_VERSION"),
        args.kind,
        d_label,
        args.epsilon,
        args.alpha_min,
        args.alpha_max,
        args.points
    )?;
    writeln!(out, "alpha,beta,theta_hat")?;
    for (alpha, beta, theta) in rows {
        writeln!(out, "{alpha},{beta},{theta}")?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let loaded = config::load_experiment(&args.config)?;
    let config = loaded.experiment;
    config.validate()?;

    let prefix = args
        .out_prefix
        .clone()
        .or(loaded.out_prefix)
        .unwrap_or_else(|| PathBuf::from("phase"));
    let csv_path = with_suffix(&prefix, ".csv");
    let theory_path = with_suffix(&prefix, ".theory.csv");
    let sidecar_path = with_suffix(&prefix, ".config.json");
    let marker_path = with_suffix(&prefix, ".resume");

    let completed: Vec<PhaseCell> = if args.resume && csv_path.exists() {
        check_resume_config(&sidecar_path, &config)?;
        let cells = harness::read_phase_csv(&csv_path)?;
        eprintln!("resuming: {} cells already done", cells.len());
        cells
    } else {
        Vec::new()
    };

    harness::write_config_sidecar(&sidecar_path, &config)?;
    std::fs::write(&marker_path, "incomplete\n").map_err(CoreError::from)?;

    // incremental log so an interrupted run can resume
    let mut log = open_cell_log(&csv_path, &config, &completed)?;
    let table = harness::run_grid_with(&config, &completed, |cell| {
        let _ = writeln!(log, "{}", harness::phase_csv_row(cell));
        let _ = log.flush();
        eprintln!(
            "cell m={} k={}: {}/{} failures ({} nonconverged)",
            cell.m, cell.k, cell.failures, cell.trials, cell.nonconverged
        );
    })?;

    // canonical sorted rewrite once complete
    harness::write_phase_csv(&csv_path, &table)?;
    harness::write_theory_csv(&theory_path, &table)?;
    std::fs::remove_file(&marker_path).ok();
    println!("wrote {}", csv_path.display());
    println!("wrote {}", theory_path.display());

    for row in harness::compare_to_theory(&table)? {
        match (row.empirical_k50, row.delta) {
            (Some(k50), Some(delta)) => println!(
                "m={} alpha={:.3}: empirical k50={:.2} theory k*={:.2} delta={:+.2}",
                row.m, row.alpha, k50, row.k_theory, delta
            ),
            _ => println!(
                "m={} alpha={:.3}: theory k*={:.2}; failure fractions do not bracket 50%",
                row.m, row.alpha, row.k_theory
            ),
        }
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn check_resume_config(sidecar: &Path, config: &ExperimentConfig) -> Result<(), CliError> {
    let text = std::fs::read_to_string(sidecar).map_err(|e| {
        CliError::Usage(format!(
            "--resume requires the config sidecar {}: {e}",
            sidecar.display()
        ))
    })?;
    let previous: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("unreadable config sidecar: {e}")))?;
    if &previous != config {
        return Err(CliError::Usage(
            "config does not match the sidecar of the interrupted run; refusing to resume".into(),
        ));
    }
    Ok(())
}

fn open_cell_log(
    path: &Path,
    config: &ExperimentConfig,
    completed: &[PhaseCell],
) -> Result<std::fs::File, CliError> {
    use std::fs::OpenOptions;
    if completed.is_empty() {
        let mut f = std::fs::File::create(path).map_err(CoreError::from)?;
        writeln!(f, "{}", harness::csv_header_comment(config)).map_err(CoreError::from)?;
        writeln!(f, "{}", harness::PHASE_CSV_COLUMNS).map_err(CoreError::from)?;
        Ok(f)
    } else {
        Ok(OpenOptions::new().append(true).open(path).map_err(CoreError::from)?)
    }
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    if !(args.success_tol > 0.0) {
        return Err(CliError::Usage("--success-tol must be positive".into()));
    }
    let dims = BlockDims::new(args.n, args.d, args.m, args.k)?;
    let config = SolverConfig { success_tol: args.success_tol, ..SolverConfig::default() };
    let report = oracle::cross_validate(&dims, args.trials, args.seed, args.grid, &config)?;
    let p = dims.nullspace_dim();
    println!(
        "n={} d={} m={} k={} kernel_dim={} grid={} trials={}",
        args.n,
        args.d,
        args.m,
        args.k,
        p,
        args.grid.unwrap_or_else(|| oracle::default_grid_resolution(p)),
        report.trials
    );
    println!(
        "agreements={} boundary_excused={} hard_disagreements={} boundary_indeterminate={}",
        report.agreements,
        report.boundary_excused,
        report.hard_disagreements,
        report.boundary_indeterminate
    );
    println!("agreement_rate={:.4}", report.excused_rate());
    Ok(())
}
