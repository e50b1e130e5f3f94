//! Command-line entry point: scenario generation, trace evaluation,
//! fusion ablations, traversal sweeps, and paired strategy comparisons.
//!
//! Exit codes: 0 success, 2 input/config error, 3 insufficient data.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusionMode;
use crate::online::{self, ParamsChange, Strategy};
use crate::pso;
use crate::sim::{self, ScenarioConfig};
use crate::trace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 2;
pub const EXIT_INSUFFICIENT_DATA: i32 = 3;

#[derive(Parser)]
#[command(name = "vvp", version, about = "Online vehicle-velocity prediction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic traffic trace (CSV + .stats.json sidecar)
    Simulate {
        /// JSON scenario config mirroring the ScenarioConfig fields
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in scenario preset: urban | highway
        #[arg(long)]
        preset: Option<String>,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the trace duration, seconds
        #[arg(long)]
        duration: Option<u32>,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a trace through one strategy and write a run report
    Evaluate {
        #[arg(long)]
        trace: PathBuf,
        /// hvv | hvv-dis | hvv-dis-vfv | hvv-dis-vfv-tls
        #[arg(long)]
        mode: String,
        /// fixed:order=7,sigma=0.5 or adaptive:reopt=10,k=5,seed=1
        #[arg(long)]
        strategy: String,
        /// Override the adaptive strategy seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the cross-validation fold count
        #[arg(long)]
        k: Option<usize>,
        /// Override the re-optimization interval, seconds
        #[arg(long)]
        reopt: Option<u32>,
        /// Report JSON path; per-step CSV goes next to it as *.steps.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate all four fusion modes at their traversal-optimal parameters
    Ablate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive 13 x 20 (order, sigma) traversal grid for one mode
    Sweep {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        mode: String,
        /// Grid CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Run baseline and candidate strategies and report the improvement
    Compare {
        #[arg(long)]
        trace: PathBuf,
        /// Candidate fusion mode
        #[arg(long)]
        mode: String,
        /// Candidate strategy descriptor
        #[arg(long)]
        strategy: String,
        /// Baseline fusion mode (default hvv)
        #[arg(long, default_value = "hvv")]
        baseline_mode: String,
        /// Baseline strategy descriptor (default the fixed 7/0.50 benchmark)
        #[arg(long, default_value = "fixed:order=7,sigma=0.5")]
        baseline_strategy: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        reopt: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Summary of one strategy replay, serialized as the run report.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub trace_id: String,
    pub mode: String,
    pub strategy: String,
    pub armse: f64,
    pub params_history: Vec<ParamsChange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub improvement_vs_baseline: Option<f64>,
}

/// One row of the fusion-ablation table.
#[derive(Debug, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: String,
    pub best_order: usize,
    pub best_sigma: f64,
    pub armse: f64,
    /// Percent improvement over the HVV row; positive is better.
    pub improvement_vs_hvv: f64,
}

/// Paired baseline/candidate comparison report.
#[derive(Debug, Serialize, Deserialize)]
pub struct CompareReport {
    pub trace_id: String,
    pub baseline: RunReport,
    pub candidate: RunReport,
    pub improvement_pct: f64,
}

pub fn improvement_pct(baseline_armse: f64, candidate_armse: f64) -> f64 {
    (baseline_armse - candidate_armse) / baseline_armse * 100.0
}

/// Parses argv and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version output on stdout
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_OK };
        }
    };
    init_threads();
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InsufficientData { .. } | Error::TraceTooShort { .. } => {
                    EXIT_INSUFFICIENT_DATA
                }
                _ => EXIT_INPUT_ERROR,
            }
        }
    }
}

/// Honors `VVP_THREADS` (0 or unset = auto). Safe to call repeatedly; only
/// the first global pool wins.
fn init_threads() {
    if let Ok(value) = std::env::var("VVP_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, preset, seed, duration, out } => {
            cmd_simulate(config.as_deref(), preset.as_deref(), seed, duration, &out)
        }
        Command::Evaluate { trace, mode, strategy, seed, k, reopt, out } => {
            let mode: FusionMode = mode.parse()?;
            let strategy = build_strategy(&strategy, seed, k, reopt)?;
            cmd_evaluate(&trace, mode, &strategy, &out).map(|_| ())
        }
        Command::Ablate { trace, out } => cmd_ablate(&trace, &out),
        Command::Sweep { trace, mode, out } => {
            let mode: FusionMode = mode.parse()?;
            cmd_sweep(&trace, mode, &out)
        }
        Command::Compare {
            trace,
            mode,
            strategy,
            baseline_mode,
            baseline_strategy,
            seed,
            k,
            reopt,
            out,
        } => {
            let mode: FusionMode = mode.parse()?;
            let strategy = build_strategy(&strategy, seed, k, reopt)?;
            let baseline_mode: FusionMode = baseline_mode.parse()?;
            let baseline_strategy: Strategy = baseline_strategy.parse()?;
            cmd_compare(&trace, mode, &strategy, baseline_mode, &baseline_strategy, &out)
        }
    }
}

/// Descriptor string first, then explicit flags override its fields.
fn build_strategy(
    descriptor: &str,
    seed: Option<u64>,
    k: Option<usize>,
    reopt: Option<u32>,
) -> Result<Strategy> {
    let mut strategy: Strategy = descriptor.parse()?;
    if let Strategy::Adaptive { swarm, reopt_interval, k: folds } = &mut strategy {
        if let Some(seed) = seed {
            swarm.seed = seed;
        }
        if let Some(k) = k {
            *folds = k;
        }
        if let Some(reopt) = reopt {
            *reopt_interval = reopt;
        }
    }
    Ok(strategy)
}

fn trace_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    fs::write(path, body)?;
    Ok(())
}

pub fn cmd_simulate(
    config: Option<&Path>,
    preset: Option<&str>,
    seed: Option<u64>,
    duration: Option<u32>,
    out: &Path,
) -> Result<()> {
    let mut scenario = match (config, preset) {
        (Some(path), _) => {
            let body = fs::read_to_string(path)?;
            serde_json::from_str::<ScenarioConfig>(&body)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        (None, Some("urban")) => ScenarioConfig::urban(0),
        (None, Some("highway")) => ScenarioConfig::highway(0),
        (None, Some(other)) => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; expected urban or highway"
            )))
        }
        (None, None) => {
            return Err(Error::Config("either --config or --preset is required".into()))
        }
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    if let Some(duration) = duration {
        scenario.duration = duration;
    }
    let frames = sim::generate(&scenario)?;
    trace::write_trace(out, &frames)?;
    let stats = sim::compute_stats(&frames)?;
    write_json(&out.with_extension("stats.json"), &stats)?;
    println!(
        "wrote {} frames to {} (avg speed {:.2} m/s)",
        frames.len(),
        out.display(),
        stats.avg_speed
    );
    Ok(())
}

pub fn cmd_evaluate(
    trace_path: &Path,
    mode: FusionMode,
    strategy: &Strategy,
    out: &Path,
) -> Result<RunReport> {
    let frames = trace::read_trace(trace_path)?;
    let report = online::evaluate_trace(&frames, mode, strategy)?;
    let run = RunReport {
        trace_id: trace_id(trace_path),
        mode: mode.to_string(),
        strategy: strategy.descriptor(),
        armse: report.armse,
        params_history: report.params_history.clone(),
        improvement_vs_baseline: None,
    };
    write_json(out, &run)?;
    write_steps_csv(&out.with_extension("steps.csv"), &report.steps)?;
    println!("{} {} {} ARMSE {:.4} m/s", run.trace_id, run.mode, run.strategy, run.armse);
    Ok(run)
}

fn write_steps_csv(path: &Path, steps: &[online::StepRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let p = steps.first().map(|s| s.forecast.len()).unwrap_or(0);
    let mut header = vec!["t".to_string(), "order".into(), "sigma".into(), "rmse".into()];
    for j in 1..=p {
        header.push(format!("forecast_{j}"));
    }
    for j in 1..=p {
        header.push(format!("actual_{j}"));
    }
    writer.write_record(&header)?;
    for s in steps {
        let mut row = vec![
            s.t.to_string(),
            s.order.to_string(),
            format!("{:.3}", s.sigma),
            format!("{:.6}", s.rmse),
        ];
        row.extend(s.forecast.iter().map(|v| format!("{v:.4}")));
        row.extend(s.actual.iter().map(|v| format!("{v:.4}")));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn cmd_ablate(trace_path: &Path, out: &Path) -> Result<()> {
    let frames = trace::read_trace(trace_path)?;
    let mut rows = Vec::with_capacity(4);
    let mut hvv_armse = None;
    for mode in FusionMode::ALL {
        let grid = pso::traverse_grid(&frames, mode)?;
        let best = pso::grid_argmin(&grid).expect("grid is never empty");
        if mode == FusionMode::Hvv {
            hvv_armse = Some(best.armse);
        }
        let baseline = hvv_armse.expect("HVV is evaluated first");
        rows.push(AblationRow {
            mode: mode.to_string(),
            best_order: best.order,
            best_sigma: best.sigma,
            armse: best.armse,
            improvement_vs_hvv: improvement_pct(baseline, best.armse),
        });
    }
    write_json(out, &rows)?;
    for row in &rows {
        println!(
            "{:<16} best ({}, {:.2}) ARMSE {:.4} improvement {:+.1}%",
            row.mode, row.best_order, row.best_sigma, row.armse, row.improvement_vs_hvv
        );
    }
    Ok(())
}

pub fn cmd_sweep(trace_path: &Path, mode: FusionMode, out: &Path) -> Result<()> {
    let frames = trace::read_trace(trace_path)?;
    let grid = pso::traverse_grid(&frames, mode)?;
    let best = pso::grid_argmin(&grid).expect("grid is never empty");
    let mut writer = csv::Writer::from_path(out)?;
    writer.write_record(["row_type", "order", "sigma", "armse"])?;
    for cell in &grid {
        writer.write_record(&[
            "cell".to_string(),
            cell.order.to_string(),
            format!("{:.2}", cell.sigma),
            format!("{:.6}", cell.armse),
        ])?;
    }
    writer.write_record(&[
        "argmin".to_string(),
        best.order.to_string(),
        format!("{:.2}", best.sigma),
        format!("{:.6}", best.armse),
    ])?;
    writer.flush()?;
    println!(
        "sweep {} {}: argmin ({}, {:.2}) ARMSE {:.4}",
        trace_id(trace_path),
        mode,
        best.order,
        best.sigma,
        best.armse
    );
    Ok(())
}

pub fn cmd_compare(
    trace_path: &Path,
    mode: FusionMode,
    strategy: &Strategy,
    baseline_mode: FusionMode,
    baseline_strategy: &Strategy,
    out: &Path,
) -> Result<()> {
    let frames = trace::read_trace(trace_path)?;
    let id = trace_id(trace_path);
    let baseline_eval = online::evaluate_trace(&frames, baseline_mode, baseline_strategy)?;
    let candidate_eval = online::evaluate_trace(&frames, mode, strategy)?;
    let improvement = improvement_pct(baseline_eval.armse, candidate_eval.armse);
    let report = CompareReport {
        trace_id: id.clone(),
        baseline: RunReport {
            trace_id: id.clone(),
            mode: baseline_mode.to_string(),
            strategy: baseline_strategy.descriptor(),
            armse: baseline_eval.armse,
            params_history: baseline_eval.params_history,
            improvement_vs_baseline: None,
        },
        candidate: RunReport {
            trace_id: id.clone(),
            mode: mode.to_string(),
            strategy: strategy.descriptor(),
            armse: candidate_eval.armse,
            params_history: candidate_eval.params_history,
            improvement_vs_baseline: Some(improvement),
        },
        improvement_pct: improvement,
    };
    write_json(out, &report)?;
    println!(
        "{id}: baseline {:.4} candidate {:.4} improvement {:+.1}%",
        report.baseline.armse, report.candidate.armse, report.improvement_pct
    );
    Ok(())
}
