//! Acceptance gate: one test that exercises every release criterion in
//! order, printing a pass/fail line per criterion and failing at the end if
//! any criterion failed.
//!
//! The suite combines exact oracle checks (kernel math, metrics, counting
//! laws) with directional benchmark reproductions on generated traces
//! (fusion ablation ordering, self-adaptation gains, highway-vs-urban
//! regularity, grid percentiles), plus CLI determinism and simulator sanity.

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vvp::fusion::{FusionMode, SignalFrame};
use vvp::grnn::{self, GrnnParams, TrainingSet};
use vvp::metrics::{self, StepError};
use vvp::online::{self, benchmark_fixed_params, Strategy};
use vvp::pso::{self, GridCell, SwarmConfig};
use vvp::sim::{self, ScenarioConfig};

const URBAN_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn check(&mut self, criterion: usize, label: &str, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {criterion:>2} ({label}): {verdict} — {detail}");
        if !pass {
            self.failures.push(format!("criterion {criterion} ({label}): {detail}"));
        }
    }
}

fn synthetic_frame(t: u64, v: f64) -> SignalFrame {
    SignalFrame {
        t,
        v_ego: v,
        dist_front: 40.0 + (t % 17) as f64,
        v_front: v + 0.5,
        dist_tls: 250.0 - (t % 31) as f64 * 3.0,
    }
}

/// Independent direct evaluation of the kernel-weighted average, written
/// naively from the defining equations as the oracle for criterion 1.
fn direct_prediction(query: &[f64], patterns: &[Vec<f64>], targets: &[Vec<f64>], sigma: f64) -> Vec<f64> {
    let kernels: Vec<f64> = patterns
        .iter()
        .map(|p| {
            let d2: f64 = query.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = kernels.iter().sum();
    let h = targets[0].len();
    (0..h)
        .map(|j| {
            kernels
                .iter()
                .zip(targets)
                .map(|(k, y)| k * y[j])
                .sum::<f64>()
                / sum
        })
        .collect()
}

fn criterion_1_2(gate: &mut Gate) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut max_err = 0.0f64;
    let mut max_weight_sum_err = 0.0f64;
    for _ in 0..1_000 {
        let d = rng.gen_range(1..=4usize);
        let m = rng.gen_range(1..=5usize);
        let h = rng.gen_range(1..=3usize);
        let sigma = rng.gen_range(0.05..=1.0);
        let patterns: Vec<Vec<f64>> =
            (0..m).map(|_| (0..d).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let targets: Vec<Vec<f64>> =
            (0..m).map(|_| (0..h).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let query: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut set = TrainingSet::with_default_capacity();
        for (p, t) in patterns.iter().zip(&targets) {
            set.push(p.clone(), t.clone());
        }
        let predicted = grnn::predict(&query, &set, sigma).unwrap();
        let expected = direct_prediction(&query, &patterns, &targets, sigma);
        for (a, b) in predicted.iter().zip(&expected) {
            max_err = max_err.max((a - b).abs());
        }
        let weights = grnn::compute_weights(&query, &set, sigma).unwrap();
        max_weight_sum_err = max_weight_sum_err.max((weights.iter().sum::<f64>() - 1.0).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    gate.check(
        1,
        "GRNN oracle equivalence",
        max_err < 1e-12 && elapsed < 5.0,
        format!("1000 instances, max |Δ| = {max_err:.2e}, {elapsed:.2} s"),
    );

    // kernel limits: tiny sigma collapses onto the nearest stored target,
    // huge sigma approaches the plain target mean
    let mut set = TrainingSet::with_default_capacity();
    let separated = [([0.0, 0.0], 0.15), ([5.0, 5.0], 0.55), ([10.0, 0.0], 0.95)];
    for (p, y) in separated {
        set.push(p.to_vec(), vec![y]);
    }
    let nn = grnn::predict(&[4.7, 5.2], &set, 1e-3).unwrap();
    let nn_ok = (nn[0] - 0.55).abs() < 1e-12;
    let mean = grnn::predict(&[2.0, 2.0], &set, 1e3).unwrap();
    let mean_expected = (0.15 + 0.55 + 0.95) / 3.0;
    let mean_ok = (mean[0] - mean_expected).abs() < 1e-3;
    gate.check(
        2,
        "kernel limit properties",
        nn_ok && mean_ok && max_weight_sum_err < 1e-9,
        format!(
            "1-NN at σ=1e-3: {:.4}; mean at σ=1e3: {:.6} (expect {:.6}); weight-sum err {:.1e}",
            nn[0], mean[0], mean_expected, max_weight_sum_err
        ),
    );
}

fn criterion_3(gate: &mut Gate) {
    let p = GrnnParams::DEFAULT_HORIZON;
    let mut violations = 0usize;
    for t in 10..=1_000usize {
        let frames: Vec<SignalFrame> =
            (0..t as u64).map(|i| synthetic_frame(i, (i % 23) as f64)).collect();
        for l in [1usize, 7, 13] {
            let params = GrnnParams::new(l, 0.5).unwrap();
            let set = grnn::build_training_set(&frames, &params, FusionMode::Hvv).unwrap();
            let expected = (t + 1).saturating_sub(p + l).min(800);
            if set.len() != expected {
                violations += 1;
            }
        }
    }
    gate.check(
        3,
        "training-set law",
        violations == 0,
        format!("t = 10..=1000 × l ∈ {{1,7,13}}: {violations} count-law violations"),
    );
}

fn criterion_4(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4242);
    let mut max_err = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..=12usize);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..30.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..30.0)).collect();
        let brute = (a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64).sqrt();
        max_err = max_err.max((metrics::rmse(&a, &b).unwrap() - brute).abs());

        let steps: Vec<StepError> = (0..rng.gen_range(1..=20usize))
            .map(|i| StepError { step: i as u64, rmse: rng.gen_range(0.0..5.0) })
            .collect();
        let brute_avg = steps.iter().map(|s| s.rmse).sum::<f64>() / steps.len() as f64;
        max_err = max_err.max((metrics::armse(&steps).unwrap() - brute_avg).abs());
    }

    let mut partition_ok = true;
    for (m, k) in [(10usize, 2usize), (23, 5), (100, 7), (5, 5)] {
        let folds = metrics::kfold_partition(m, k, 99).unwrap();
        let mut seen = vec![false; m];
        for fold in &folds {
            for &i in fold {
                if seen[i] {
                    partition_ok = false; // overlap
                }
                seen[i] = true;
            }
        }
        partition_ok &= seen.iter().all(|&s| s); // covering
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        partition_ok &= hi - lo <= 1; // balanced
    }
    gate.check(
        4,
        "metrics oracle",
        max_err < 1e-12 && partition_ok,
        format!("rmse/armse max |Δ| = {max_err:.2e}; folds disjoint/covering/balanced: {partition_ok}"),
    );
}

fn criterion_5(gate: &mut Gate) {
    let start = Instant::now();
    let mut converged = 0usize;
    for seed in 0..100u64 {
        let config = SwarmConfig::with_seed(seed);
        let result = pso::minimize(&config, |pos| {
            Ok((pos[0] - 7.0).powi(2) + (pos[1] - 0.5).powi(2))
        })
        .unwrap();
        if result.score <= 1e-2 {
            converged += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    gate.check(
        5,
        "PSO surrogate convergence",
        converged >= 95 && elapsed < 10.0,
        format!("{converged}/100 runs reached ≤ 1e-2, {elapsed:.2} s"),
    );
}

/// Per-trace artifacts shared between the directional criteria.
struct UrbanRun {
    seed: u64,
    /// Traversal-optimal ARMSE per fusion mode, in `FusionMode::ALL` order.
    best: [f64; 4],
    /// The 260-cell full-fusion grid, kept for the percentile criterion.
    full_grid: Vec<GridCell>,
}

fn criterion_6(gate: &mut Gate, urban_traces: &[Vec<SignalFrame>]) -> Vec<UrbanRun> {
    let start = Instant::now();
    let mut runs = Vec::new();
    for (frames, &seed) in urban_traces.iter().zip(&URBAN_SEEDS) {
        let mut best = [0.0f64; 4];
        let mut full_grid = Vec::new();
        for (i, mode) in FusionMode::ALL.into_iter().enumerate() {
            let grid = pso::traverse_grid(frames, mode).unwrap();
            best[i] = pso::grid_argmin(&grid).unwrap().armse;
            if mode == FusionMode::HvvDisVfvTls {
                full_grid = grid;
            }
        }
        runs.push(UrbanRun { seed, best, full_grid });
    }
    let chains = runs
        .iter()
        .filter(|r| r.best[0] >= r.best[1] && r.best[1] >= r.best[2] && r.best[2] >= r.best[3])
        .count();
    let avg_hvv = runs.iter().map(|r| r.best[0]).sum::<f64>() / runs.len() as f64;
    let avg_full = runs.iter().map(|r| r.best[3]).sum::<f64>() / runs.len() as f64;
    let avg_improvement = (avg_hvv - avg_full) / avg_hvv * 100.0;
    let elapsed = start.elapsed().as_secs_f64();
    let mut detail = format!(
        "ordering holds in {chains}/5 traces; seed-avg full-fusion improvement {avg_improvement:+.1}%; {elapsed:.0} s;"
    );
    for r in &runs {
        write!(
            detail,
            " s{}=[{:.3},{:.3},{:.3},{:.3}]",
            r.seed, r.best[0], r.best[1], r.best[2], r.best[3]
        )
        .unwrap();
    }
    gate.check(
        6,
        "fusion ablation ordering",
        chains >= 4 && avg_improvement >= 5.0 && elapsed < 600.0,
        detail,
    );
    runs
}

fn criterion_7(gate: &mut Gate, urban_traces: &[Vec<SignalFrame>]) -> (Vec<f64>, Vec<f64>) {
    let baseline_strategy = Strategy::Fixed(benchmark_fixed_params());
    let mut improvements = Vec::new();
    let mut adaptive_armse = Vec::new();
    for (frames, &seed) in urban_traces.iter().zip(&URBAN_SEEDS) {
        let baseline = online::evaluate_trace(frames, FusionMode::Hvv, &baseline_strategy)
            .unwrap()
            .armse;
        let adaptive =
            online::evaluate_trace(frames, FusionMode::HvvDisVfvTls, &Strategy::adaptive(seed))
                .unwrap()
                .armse;
        improvements.push((baseline - adaptive) / baseline * 100.0);
        adaptive_armse.push(adaptive);
    }
    let all_positive = improvements.iter().all(|&i| i > 0.0);
    let avg = improvements.iter().sum::<f64>() / improvements.len() as f64;
    gate.check(
        7,
        "self-adaptation gain",
        all_positive && avg >= 15.0,
        format!(
            "urban improvements {:?}%, avg {avg:+.1}%",
            improvements.iter().map(|i| (i * 10.0).round() / 10.0).collect::<Vec<_>>()
        ),
    );
    (improvements, adaptive_armse)
}

fn criterion_8(gate: &mut Gate, urban_improvements: &[f64]) {
    let baseline_strategy = Strategy::Fixed(benchmark_fixed_params());
    let mut detail = String::new();
    let mut all_larger = true;
    for (&seed, &urban) in URBAN_SEEDS.iter().zip(urban_improvements) {
        let frames = sim::generate(&ScenarioConfig::highway(seed)).unwrap();
        let baseline = online::evaluate_trace(&frames, FusionMode::Hvv, &baseline_strategy)
            .unwrap()
            .armse;
        let adaptive =
            online::evaluate_trace(&frames, FusionMode::HvvDisVfv, &Strategy::adaptive(seed))
                .unwrap()
                .armse;
        let highway = (baseline - adaptive) / baseline * 100.0;
        all_larger &= highway > urban;
        write!(detail, " s{seed}: highway {highway:+.1}% vs urban {urban:+.1}%;").unwrap();
    }
    gate.check(8, "highway regularity", all_larger, detail.trim().to_string());
}

fn criterion_9(gate: &mut Gate, runs: &[UrbanRun], adaptive_armse: &[f64]) {
    let mut detail = String::new();
    let mut all_above = true;
    for (run, &armse) in runs.iter().zip(adaptive_armse) {
        let pct = pso::percentile_within_grid(armse, &run.full_grid);
        all_above &= pct >= 80.0;
        write!(detail, " s{}: {pct:.1}%;", run.seed).unwrap();
    }
    gate.check(9, "grid percentile", all_above, detail.trim().to_string());
}

fn run_cli(dir: &Path, args: &[&str]) -> (Vec<u8>, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_vvp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn vvp binary");
    (out.stdout, out.status.code().unwrap_or(-1))
}

fn criterion_10(gate: &mut Gate) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut identical = true;
    let mut detail = String::new();

    let command_sets: Vec<(&str, Vec<String>, Vec<&str>)> = vec![
        (
            "simulate",
            vec![
                "simulate".into(), "--preset".into(), "urban".into(),
                "--seed".into(), "9".into(), "--duration".into(), "240".into(),
                "--out".into(), "trace.csv".into(),
            ],
            vec!["trace.csv", "trace.stats.json"],
        ),
        (
            "evaluate-fixed",
            vec![
                "evaluate".into(), "--trace".into(), "trace.csv".into(),
                "--mode".into(), "hvv-dis-vfv-tls".into(),
                "--strategy".into(), "fixed:order=7,sigma=0.5".into(),
                "--out".into(), "fixed.json".into(),
            ],
            vec!["fixed.json", "fixed.steps.csv"],
        ),
        (
            "evaluate-adaptive",
            vec![
                "evaluate".into(), "--trace".into(), "trace.csv".into(),
                "--mode".into(), "hvv-dis-vfv-tls".into(),
                "--strategy".into(), "adaptive:reopt=10,k=5,seed=3".into(),
                "--out".into(), "adaptive.json".into(),
            ],
            vec!["adaptive.json", "adaptive.steps.csv"],
        ),
        (
            "sweep",
            vec![
                "sweep".into(), "--trace".into(), "trace.csv".into(),
                "--mode".into(), "hvv-dis".into(), "--out".into(), "sweep.csv".into(),
            ],
            vec!["sweep.csv"],
        ),
        (
            "ablate",
            vec![
                "ablate".into(), "--trace".into(), "trace.csv".into(),
                "--out".into(), "ablate.json".into(),
            ],
            vec!["ablate.json"],
        ),
        (
            "compare",
            vec![
                "compare".into(), "--trace".into(), "trace.csv".into(),
                "--mode".into(), "hvv-dis-vfv".into(),
                "--strategy".into(), "fixed:order=3,sigma=0.1".into(),
                "--out".into(), "compare.json".into(),
            ],
            vec!["compare.json"],
        ),
    ];

    for (name, args, outputs) in &command_sets {
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let (stdout_a, code_a) = run_cli(d, &argv);
        let first: Vec<Vec<u8>> =
            outputs.iter().map(|f| std::fs::read(d.join(f)).unwrap()).collect();
        let (stdout_b, code_b) = run_cli(d, &argv);
        let second: Vec<Vec<u8>> =
            outputs.iter().map(|f| std::fs::read(d.join(f)).unwrap()).collect();
        let same =
            code_a == 0 && code_b == 0 && stdout_a == stdout_b && first == second;
        identical &= same;
        if !same {
            write!(detail, " {name}: differs;").unwrap();
        }
    }
    if identical {
        detail = format!("{} commands byte-identical across reruns", command_sets.len());
    }
    gate.check(10, "determinism", identical, detail.trim().to_string());
}

fn criterion_11(gate: &mut Gate) {
    let reference = 31.70;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut collisions = 0usize;
    for seed in 0..20u64 {
        let trace = sim::generate(&ScenarioConfig::highway(seed)).unwrap();
        let stats = sim::compute_stats(&trace).unwrap();
        let dev = (stats.avg_speed - reference).abs() / reference;
        worst = worst.max(dev);
        ok &= dev <= 0.20;
        collisions += trace.iter().filter(|f| f.dist_front <= 0.0).count();
    }
    gate.check(
        11,
        "simulator sanity",
        ok && collisions == 0,
        format!("20 highway seeds: worst avg-speed deviation {:.1}%, {collisions} collisions", worst * 100.0),
    );
}

#[test]
fn acceptance() {
    let mut gate = Gate { failures: Vec::new() };

    criterion_1_2(&mut gate);
    criterion_3(&mut gate);
    criterion_4(&mut gate);
    criterion_5(&mut gate);

    let urban_traces: Vec<Vec<SignalFrame>> = URBAN_SEEDS
        .iter()
        .map(|&s| sim::generate(&ScenarioConfig::urban(s)).unwrap())
        .collect();

    let runs = criterion_6(&mut gate, &urban_traces);
    let (urban_improvements, adaptive_armse) = criterion_7(&mut gate, &urban_traces);
    criterion_8(&mut gate, &urban_improvements);
    criterion_9(&mut gate, &runs, &adaptive_armse);
    criterion_10(&mut gate);
    criterion_11(&mut gate);

    assert!(
        gate.failures.is_empty(),
        "acceptance failures:\n{}",
        gate.failures.join("\n")
    );
}
