//! The per-second online prediction loop and its trace-replay evaluator.
//!
//! Each second the predictor ingests one telemetry frame, widens its
//! normalizer bounds, emits a forecast for the next `horizon` seconds in
//! m/s, appends the newly completed training column, and (under the adaptive
//! strategy) periodically re-runs the swarm optimizer to install fresh
//! (order, sigma) parameters.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{assemble_query, FusionMode, NormalizerBank, SignalFrame};
use crate::grnn::{self, GrnnParams, TrainingSet};
use crate::metrics::{self, StepError};
use crate::pso::{self, SwarmConfig};

/// Default seconds between adaptive re-optimizations.
pub const DEFAULT_REOPT_INTERVAL: u32 = 10;

/// Default fold count for the cross-validation fitness.
pub const DEFAULT_K: usize = 5;

/// The fixed benchmark parameters: order 7, sigma 0.50.
pub fn benchmark_fixed_params() -> GrnnParams {
    GrnnParams::new(7, 0.5).expect("benchmark params are in range")
}

/// How the predictor chooses its parameters over a run.
///
/// ```
/// use vvp::online::Strategy;
///
/// let fixed: Strategy = "fixed:order=7,sigma=0.5".parse().unwrap();
/// let adaptive: Strategy = "adaptive:reopt=10,k=5,seed=1".parse().unwrap();
/// assert_eq!(fixed.descriptor(), "fixed:order=7,sigma=0.5");
/// assert_eq!(adaptive.descriptor(), "adaptive:reopt=10,k=5,seed=1");
/// ```
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// One (order, sigma) pair for the whole trace.
    Fixed(GrnnParams),
    /// Re-run PSO every `reopt_interval` seconds with `k`-fold fitness.
    Adaptive {
        swarm: SwarmConfig,
        reopt_interval: u32,
        k: usize,
    },
}

impl Strategy {
    pub fn adaptive(seed: u64) -> Self {
        Strategy::Adaptive {
            swarm: SwarmConfig::with_seed(seed),
            reopt_interval: DEFAULT_REOPT_INTERVAL,
            k: DEFAULT_K,
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            Strategy::Fixed(p) => format!("fixed:order={},sigma={}", p.order, p.sigma),
            Strategy::Adaptive { swarm, reopt_interval, k } => format!(
                "adaptive:reopt={reopt_interval},k={k},seed={}",
                swarm.seed
            ),
        }
    }

    fn initial_params(&self) -> GrnnParams {
        match self {
            Strategy::Fixed(p) => *p,
            // mid-range placeholder until the first re-optimization
            Strategy::Adaptive { .. } => benchmark_fixed_params(),
        }
    }
}

/// Parses the CLI strategy descriptor: `fixed:order=7,sigma=0.5` or
/// `adaptive:reopt=10,k=5,seed=1` (adaptive fields optional).
impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut fields = HashMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("bad strategy field {part:?}, expected key=value"))
            })?;
            fields.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |fields: &HashMap<String, String>, key: &str| -> Option<String> {
            fields.get(key).cloned()
        };
        match kind {
            "fixed" => {
                let order: usize = get(&fields, "order")
                    .ok_or_else(|| Error::InvalidInput("fixed strategy needs order=".into()))?
                    .parse()
                    .map_err(|e| Error::InvalidInput(format!("bad order: {e}")))?;
                let sigma: f64 = get(&fields, "sigma")
                    .ok_or_else(|| Error::InvalidInput("fixed strategy needs sigma=".into()))?
                    .parse()
                    .map_err(|e| Error::InvalidInput(format!("bad sigma: {e}")))?;
                Ok(Strategy::Fixed(GrnnParams::new(order, sigma)?))
            }
            "adaptive" => {
                let parse_or = |key: &str, default: u64| -> Result<u64> {
                    match get(&fields, key) {
                        Some(v) => v
                            .parse()
                            .map_err(|e| Error::InvalidInput(format!("bad {key}: {e}"))),
                        None => Ok(default),
                    }
                };
                let reopt = parse_or("reopt", DEFAULT_REOPT_INTERVAL as u64)? as u32;
                let k = parse_or("k", DEFAULT_K as u64)? as usize;
                let seed = parse_or("seed", 0)?;
                Ok(Strategy::Adaptive {
                    swarm: SwarmConfig::with_seed(seed),
                    reopt_interval: reopt,
                    k,
                })
            }
            other => Err(Error::InvalidInput(format!(
                "unknown strategy {other:?}; expected fixed:... or adaptive:..."
            ))),
        }
    }
}

/// A p-second velocity forecast in m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub origin_t: u64,
    pub velocities: Vec<f64>,
    pub params_used: GrnnParams,
    /// True when the training set was still empty and the hold-last-velocity
    /// fallback was emitted instead of a network prediction.
    pub fallback: bool,
}

/// A recorded parameter installation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsChange {
    pub t: u64,
    pub order: usize,
    pub sigma: f64,
}

/// The streaming predictor state.
#[derive(Debug, Clone)]
pub struct OnlinePredictor {
    mode: FusionMode,
    strategy: Strategy,
    params: GrnnParams,
    frames: Vec<SignalFrame>,
    bank: NormalizerBank,
    training: TrainingSet,
    steps_since_reopt: u32,
    reopt_count: u64,
    params_history: Vec<ParamsChange>,
}

impl OnlinePredictor {
    pub fn new(mode: FusionMode, strategy: Strategy) -> Self {
        let params = strategy.initial_params();
        OnlinePredictor {
            mode,
            strategy,
            params,
            frames: Vec::new(),
            bank: NormalizerBank::new(),
            training: TrainingSet::with_default_capacity(),
            steps_since_reopt: 0,
            reopt_count: 0,
            params_history: Vec::new(),
        }
    }

    pub fn current_params(&self) -> GrnnParams {
        self.params
    }

    pub fn training_len(&self) -> usize {
        self.training.len()
    }

    pub fn params_history(&self) -> &[ParamsChange] {
        &self.params_history
    }

    pub fn frames(&self) -> &[SignalFrame] {
        &self.frames
    }

    /// Ingests one frame and returns the forecast issued from it.
    ///
    /// Order within a step: observe the frame, forecast with the parameters
    /// and training columns already installed, then append the training
    /// column that just completed, then (if due) re-optimize so new
    /// parameters take effect from the next step.
    pub fn step(&mut self, frame: SignalFrame) -> Result<Forecast> {
        if let Some(last) = self.frames.last() {
            if frame.t != last.t + 1 {
                return Err(Error::Sequence { expected: last.t + 1, got: frame.t });
            }
        }
        if !frame.is_valid() {
            return Err(Error::InvalidInput(format!(
                "frame at t = {} has non-finite or negative fields",
                frame.t
            )));
        }
        self.bank.observe_frame(&frame)?;
        self.frames.push(frame);

        let forecast = self.forecast(&frame)?;
        self.append_completed_column()?;
        self.maybe_reoptimize(frame.t)?;
        Ok(forecast)
    }

    fn forecast(&self, frame: &SignalFrame) -> Result<Forecast> {
        let p = self.params.horizon;
        if self.training.is_empty() {
            return Ok(Forecast {
                origin_t: frame.t,
                velocities: vec![frame.v_ego; p],
                params_used: self.params,
                fallback: true,
            });
        }
        let query = assemble_query(&self.frames, self.params.order, self.mode, &self.bank)?;
        let normalized = grnn::predict(&query, &self.training, self.params.sigma)?;
        let velocities = normalized
            .into_iter()
            .map(|u| Ok(self.bank.v_ego.denormalize(u)?.max(0.0)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Forecast {
            origin_t: frame.t,
            velocities,
            params_used: self.params,
            fallback: false,
        })
    }

    /// A training column completes once its `horizon` target seconds have
    /// elapsed; the window then ends `horizon` frames back from now.
    fn append_completed_column(&mut self) -> Result<()> {
        let (l, p) = (self.params.order, self.params.horizon);
        let n = self.frames.len();
        if n < l + p {
            return Ok(());
        }
        let end = n - 1 - p;
        let (pattern, target) =
            grnn::build_column(&self.frames, end, &self.params, self.mode, &self.bank)?;
        self.training.push(pattern, target);
        Ok(())
    }

    fn maybe_reoptimize(&mut self, t: u64) -> Result<()> {
        let Strategy::Adaptive { swarm, reopt_interval, k } = self.strategy else {
            return Ok(());
        };
        self.steps_since_reopt += 1;
        if self.steps_since_reopt < reopt_interval || self.training.len() < k {
            return Ok(());
        }
        let config = SwarmConfig {
            seed: mix_seed(swarm.seed, self.reopt_count),
            ..swarm
        };
        let fold_seed = mix_seed(swarm.seed.wrapping_add(0x9e37), self.reopt_count);
        // candidate orders need their own training matrices, rebuilt from the
        // raw frames; cache one set per order within this optimization
        let sets: Mutex<HashMap<usize, TrainingSet>> = Mutex::new(HashMap::new());
        let frames = &self.frames;
        let mode = self.mode;
        let best = pso::minimize_params(&config, |candidate: &GrnnParams| {
            let set = {
                let mut sets = sets.lock().expect("training cache lock");
                match sets.get(&candidate.order) {
                    Some(s) => s.clone(),
                    None => {
                        let s = grnn::build_training_set(frames, candidate, mode)?;
                        sets.insert(candidate.order, s.clone());
                        s
                    }
                }
            };
            if set.len() < k {
                // a larger order may not have enough columns yet
                return Ok(f64::INFINITY);
            }
            metrics::kfold_score(&set, candidate, k, fold_seed)
        });
        let (params, _score) = best?;
        let order_changed = params.order != self.params.order;
        self.params = params;
        if order_changed {
            self.training = grnn::build_training_set(&self.frames, &self.params, self.mode)?;
        }
        self.steps_since_reopt = 0;
        self.reopt_count += 1;
        self.params_history.push(ParamsChange {
            t,
            order: params.order,
            sigma: params.sigma,
        });
        Ok(())
    }
}

fn mix_seed(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One evaluated forecast step of a trace replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub forecast: Vec<f64>,
    pub actual: Vec<f64>,
    pub rmse: f64,
    pub fallback: bool,
    pub order: usize,
    pub sigma: f64,
}

/// Replay result: scored steps and their average RMSE in m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub steps: Vec<StepRecord>,
    pub armse: f64,
    pub params_history: Vec<ParamsChange>,
}

/// Replays a full trace through the online loop, scoring every non-fallback
/// forecast whose `horizon` actual future velocities exist in the trace.
pub fn evaluate_trace(
    frames: &[SignalFrame],
    mode: FusionMode,
    strategy: &Strategy,
) -> Result<EvalReport> {
    let initial = strategy.initial_params();
    let min = initial.order + 2 * initial.horizon;
    if frames.len() <= min {
        return Err(Error::TraceTooShort { len: frames.len(), min });
    }
    let p = initial.horizon;
    let mut predictor = OnlinePredictor::new(mode, strategy.clone());
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        let forecast = predictor.step(*frame)?;
        if forecast.fallback || i + p >= frames.len() {
            continue;
        }
        let actual: Vec<f64> = frames[i + 1..=i + p].iter().map(|f| f.v_ego).collect();
        let rmse = metrics::rmse(&forecast.velocities, &actual)?;
        errors.push(StepError { step: frame.t, rmse });
        steps.push(StepRecord {
            t: frame.t,
            forecast: forecast.velocities,
            actual,
            rmse,
            fallback: false,
            order: forecast.params_used.order,
            sigma: forecast.params_used.sigma,
        });
    }
    if errors.is_empty() {
        return Err(Error::TraceTooShort { len: frames.len(), min });
    }
    let armse = metrics::armse(&errors)?;
    Ok(EvalReport {
        steps,
        armse,
        params_history: predictor.params_history().to_vec(),
    })
}
