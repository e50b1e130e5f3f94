//! Particle swarm optimization over the 2-D (order, sigma) space, plus the
//! exhaustive traversal sweep used to locate fixed-parameter optima.
//!
//! The swarm minimizes the k-fold cross-validation score of a GRNN; particle
//! positions are continuous and are mapped to network parameters by rounding
//! the order coordinate and clamping sigma.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FusionMode, SignalFrame};
use crate::grnn::GrnnParams;
use crate::online::{self, Strategy};

/// Search-space bounds: order in [1, 13], sigma in [0.01, 1].
pub const LOWER_BOUND: [f64; 2] = [1.0, 0.01];
pub const UPPER_BOUND: [f64; 2] = [13.0, 1.0];

/// Swarm configuration. The defaults are the canonical constriction-
/// equivalent coefficients with a swarm small enough for per-second use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    /// The run stops early once the global best reaches this score.
    pub target_score: f64,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
}

impl SwarmConfig {
    pub fn with_seed(seed: u64) -> Self {
        SwarmConfig { seed, ..Default::default() }
    }
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            swarm_size: 10,
            max_iterations: 20,
            target_score: 0.0,
            inertia: 0.729,
            cognitive: 1.494_45,
            social: 1.494_45,
            seed: 0,
        }
    }
}

/// Outcome of one swarm run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoResult {
    pub position: [f64; 2],
    pub score: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Maps a particle position to network parameters: nearest integer order in
/// [1, 13], sigma clamped to [0.01, 1], default horizon.
pub fn map_position_to_params(position: [f64; 2]) -> GrnnParams {
    let order = position[0]
        .round()
        .clamp(LOWER_BOUND[0], UPPER_BOUND[0]) as usize;
    let sigma = position[1].clamp(LOWER_BOUND[1], UPPER_BOUND[1]);
    GrnnParams { order, sigma, horizon: GrnnParams::DEFAULT_HORIZON }
}

struct Particle {
    position: [f64; 2],
    velocity: [f64; 2],
    best_position: [f64; 2],
    best_score: f64,
}

/// Minimizes `objective` over the bounded 2-D space with the standard
/// inertia-cognitive-social update. Deterministic for a fixed seed; particle
/// evaluations within one iteration run in parallel, with best-updates
/// reduced in particle-index order.
///
/// ```
/// use vvp::pso::{minimize, SwarmConfig};
///
/// // a smooth surrogate with its optimum at (7, 0.5)
/// let result = minimize(&SwarmConfig::with_seed(3), |pos| {
///     Ok((pos[0] - 7.0).powi(2) + (pos[1] - 0.5).powi(2))
/// })
/// .unwrap();
/// assert!(result.score < 1e-2);
/// ```
pub fn minimize<F>(config: &SwarmConfig, objective: F) -> Result<PsoResult>
where
    F: Fn([f64; 2]) -> Result<f64> + Sync,
{
    if config.swarm_size == 0 {
        return Err(Error::InvalidParameter("swarm_size must be >= 1".into()));
    }
    let range = [
        UPPER_BOUND[0] - LOWER_BOUND[0],
        UPPER_BOUND[1] - LOWER_BOUND[1],
    ];
    let vmax = [0.5 * range[0], 0.5 * range[1]];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut particles: Vec<Particle> = (0..config.swarm_size)
        .map(|_| {
            let position = [
                rng.gen_range(LOWER_BOUND[0]..=UPPER_BOUND[0]),
                rng.gen_range(LOWER_BOUND[1]..=UPPER_BOUND[1]),
            ];
            let velocity = [
                rng.gen_range(-0.1 * range[0]..=0.1 * range[0]),
                rng.gen_range(-0.1 * range[1]..=0.1 * range[1]),
            ];
            Particle {
                position,
                velocity,
                best_position: position,
                best_score: f64::INFINITY,
            }
        })
        .collect();

    let mut global_best_position = particles[0].position;
    let mut global_best_score = f64::INFINITY;
    let mut evaluations = 0;
    let mut iterations = 0;

    // initial evaluation plus up to max_iterations move/evaluate rounds
    for iter in 0..=config.max_iterations {
        let scores: Vec<Result<f64>> = particles
            .par_iter()
            .map(|p| objective(p.position))
            .collect();
        for (index, (particle, score)) in particles.iter_mut().zip(scores).enumerate() {
            let score = score?;
            evaluations += 1;
            if score < particle.best_score {
                particle.best_score = score;
                particle.best_position = particle.position;
            }
            if score < global_best_score {
                global_best_score = score;
                global_best_position = particle.position;
            }
            let _ = index; // ties keep the earlier particle by iteration order
        }
        iterations = iter;
        if global_best_score <= config.target_score || iter == config.max_iterations {
            break;
        }
        for particle in particles.iter_mut() {
            for d in 0..2 {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let v = config.inertia * particle.velocity[d]
                    + config.cognitive * r1 * (particle.best_position[d] - particle.position[d])
                    + config.social * r2 * (global_best_position[d] - particle.position[d]);
                particle.velocity[d] = v.clamp(-vmax[d], vmax[d]);
                particle.position[d] = (particle.position[d] + particle.velocity[d])
                    .clamp(LOWER_BOUND[d], UPPER_BOUND[d]);
            }
        }
    }

    Ok(PsoResult {
        position: global_best_position,
        score: global_best_score,
        iterations,
        evaluations,
    })
}

/// Minimizes a fitness defined on mapped [`GrnnParams`]. Positions that
/// round to the same (order, sigma at 1e-3) are evaluated once per run.
pub fn minimize_params<F>(config: &SwarmConfig, fitness: F) -> Result<(GrnnParams, f64)>
where
    F: Fn(&GrnnParams) -> Result<f64> + Sync,
{
    let cache: Mutex<HashMap<(usize, i64), f64>> = Mutex::new(HashMap::new());
    let result = minimize(config, |position| {
        let params = map_position_to_params(position);
        let key = (params.order, (params.sigma * 1000.0).round() as i64);
        if let Some(&score) = cache.lock().expect("cache lock").get(&key) {
            return Ok(score);
        }
        let score = fitness(&params)?;
        cache.lock().expect("cache lock").insert(key, score);
        Ok(score)
    })?;
    Ok((map_position_to_params(result.position), result.score))
}

/// One cell of the fixed-parameter traversal grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub order: usize,
    pub sigma: f64,
    pub armse: f64,
}

/// The sigma traversal values 0.05, 0.10, ..., 1.00.
pub fn grid_sigmas() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

/// Evaluates every (order, sigma) combination of the traversal grid as a
/// fixed online strategy over the trace, returning the 13 x 20 = 260 cells
/// in (order-major, sigma-minor) scan order.
pub fn traverse_grid(frames: &[SignalFrame], mode: FusionMode) -> Result<Vec<GridCell>> {
    let p = GrnnParams::DEFAULT_HORIZON;
    let min = GrnnParams::MAX_ORDER + 2 * p;
    if frames.len() <= min {
        return Err(Error::TraceTooShort { len: frames.len(), min });
    }
    let mut cells = Vec::with_capacity(260);
    for order in GrnnParams::MIN_ORDER..=GrnnParams::MAX_ORDER {
        for sigma in grid_sigmas() {
            cells.push((order, sigma));
        }
    }
    cells
        .into_par_iter()
        .map(|(order, sigma)| {
            let params = GrnnParams::new(order, sigma)?;
            let report = online::evaluate_trace(frames, mode, &Strategy::Fixed(params))?;
            Ok(GridCell { order, sigma, armse: report.armse })
        })
        .collect()
}

/// The cell with minimal ARMSE (ties to the earliest scan-order cell).
pub fn grid_argmin(grid: &[GridCell]) -> Option<GridCell> {
    grid.iter()
        .copied()
        .reduce(|best, c| if c.armse < best.armse { c } else { best })
}

/// Percentage of grid cells whose ARMSE is at least `armse` (weak
/// inequality), i.e. how much of the fixed-parameter grid a strategy beats.
pub fn percentile_within_grid(armse: f64, grid: &[GridCell]) -> f64 {
    if grid.is_empty() {
        return 0.0;
    }
    let beaten = grid.iter().filter(|c| c.armse >= armse).count();
    100.0 * beaten as f64 / grid.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(position: [f64; 2]) -> Result<f64> {
        Ok((position[0] - 7.0).powi(2) + (position[1] - 0.5).powi(2))
    }

    #[test]
    fn map_position_examples() {
        let p = map_position_to_params([6.7, 0.48]);
        assert_eq!((p.order, p.sigma), (7, 0.48));
        let p = map_position_to_params([13.0, 1.0]);
        assert_eq!((p.order, p.sigma), (13, 1.0));
        let p = map_position_to_params([1.0, 0.005]);
        assert_eq!((p.order, p.sigma), (1, 0.01));
        assert_eq!(p.horizon, 5);
    }

    #[test]
    fn degenerate_swarm_returns_initial_best() {
        let config = SwarmConfig {
            swarm_size: 1,
            max_iterations: 0,
            ..SwarmConfig::with_seed(5)
        };
        let result = minimize(&config, sphere).unwrap();
        assert_eq!(result.evaluations, 1);
        assert_eq!(result.score, sphere(result.position).unwrap());
    }

    #[test]
    fn sphere_converges_near_optimum() {
        let config = SwarmConfig {
            max_iterations: 50,
            ..SwarmConfig::with_seed(1)
        };
        let result = minimize(&config, sphere).unwrap();
        assert!((result.position[0] - 7.0).abs() < 0.05, "order {}", result.position[0]);
        assert!((result.position[1] - 0.5).abs() < 0.05, "sigma {}", result.position[1]);
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let config = SwarmConfig::with_seed(42);
        let a = minimize(&config, sphere).unwrap();
        let b = minimize(&config, sphere).unwrap();
        assert_eq!(a.position, b.position);
        assert_eq!(a.score.to_bits(), b.score.to_bits());
    }

    #[test]
    fn best_score_is_monotone_and_in_bounds() {
        // track every evaluated position through the objective
        let seen: Mutex<Vec<[f64; 2]>> = Mutex::new(Vec::new());
        let config = SwarmConfig::with_seed(9);
        let result = minimize(&config, |pos| {
            seen.lock().unwrap().push(pos);
            sphere(pos)
        })
        .unwrap();
        let seen = seen.into_inner().unwrap();
        assert_eq!(seen.len(), result.evaluations);
        for pos in &seen {
            assert!((LOWER_BOUND[0]..=UPPER_BOUND[0]).contains(&pos[0]));
            assert!((LOWER_BOUND[1]..=UPPER_BOUND[1]).contains(&pos[1]));
        }

        // per-iteration best is non-increasing
        let per_iter: Vec<f64> = seen
            .chunks(config.swarm_size)
            .scan(f64::INFINITY, |best, chunk| {
                for pos in chunk {
                    let s = sphere(*pos).unwrap();
                    if s < *best {
                        *best = s;
                    }
                }
                Some(*best)
            })
            .collect();
        for pair in per_iter.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn early_stop_on_target_score() {
        let config = SwarmConfig {
            target_score: 1e9, // any evaluation satisfies it
            ..SwarmConfig::with_seed(3)
        };
        let result = minimize(&config, sphere).unwrap();
        assert_eq!(result.iterations, 0);
        assert_eq!(result.evaluations, config.swarm_size);
    }

    #[test]
    fn minimize_params_caches_equal_keys() {
        let calls = Mutex::new(0usize);
        let config = SwarmConfig::with_seed(11);
        let (params, _) = minimize_params(&config, |p| {
            *calls.lock().unwrap() += 1;
            Ok((p.order as f64 - 7.0).powi(2) + (p.sigma - 0.5).powi(2))
        })
        .unwrap();
        assert_eq!(params.order, 7);
        assert!((params.sigma - 0.5).abs() < 0.05);
        // with rounding to integer orders, many evaluations collapse
        let calls = *calls.lock().unwrap();
        let config2 = SwarmConfig::with_seed(11);
        let raw = minimize(&config2, sphere).unwrap().evaluations;
        assert!(calls <= raw);
    }

    #[test]
    fn grid_helpers() {
        let sigmas = grid_sigmas();
        assert_eq!(sigmas.len(), 20);
        assert!((sigmas[0] - 0.05).abs() < 1e-12);
        assert!((sigmas[19] - 1.0).abs() < 1e-12);

        let grid = vec![
            GridCell { order: 1, sigma: 0.05, armse: 2.0 },
            GridCell { order: 1, sigma: 0.10, armse: 1.0 },
            GridCell { order: 2, sigma: 0.05, armse: 3.0 },
        ];
        let best = grid_argmin(&grid).unwrap();
        assert_eq!((best.order, best.sigma), (1, 0.10));
        assert!((percentile_within_grid(1.5, &grid) - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(percentile_within_grid(0.5, &grid), 100.0);
    }
}
