//! General Regression Neural Network core.
//!
//! A GRNN stores pattern/target column pairs; "training" is a single pass
//! that memorizes them, and prediction is a Gaussian-kernel-weighted average
//! of the stored targets. The only tunable parameters are the number of
//! historical velocity elements in the input vector (`order`) and the kernel
//! smoothing parameter `sigma`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::fusion::{FusionMode, NormalizerBank, SignalFrame};

/// Kernel sums below this floor switch prediction to the nearest-neighbor
/// fallback (the analytic limit of the weight ratio).
pub const KERNEL_SUM_FLOOR: f64 = 1e-300;

/// Default sliding-window capacity of the online training set, in columns.
pub const TRAINING_CAPACITY: usize = 800;

/// The tunable GRNN parameter pair plus the fixed forecast horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrnnParams {
    /// Count of historical velocity elements in the input vector, 1..=13.
    pub order: usize,
    /// Gaussian smoothing parameter, in (0, 1].
    pub sigma: f64,
    /// Count of predicted future seconds.
    pub horizon: usize,
}

impl GrnnParams {
    pub const MIN_ORDER: usize = 1;
    pub const MAX_ORDER: usize = 13;
    pub const MIN_SIGMA: f64 = 0.01;
    pub const MAX_SIGMA: f64 = 1.0;
    pub const DEFAULT_HORIZON: usize = 5;

    /// Validated constructor with the default 5-second horizon.
    pub fn new(order: usize, sigma: f64) -> Result<Self> {
        if !(Self::MIN_ORDER..=Self::MAX_ORDER).contains(&order) {
            return Err(Error::InvalidParameter(format!(
                "order {order} outside [{}, {}]",
                Self::MIN_ORDER,
                Self::MAX_ORDER
            )));
        }
        if !sigma.is_finite() || sigma <= 0.0 || sigma > Self::MAX_SIGMA {
            return Err(Error::InvalidParameter(format!(
                "sigma {sigma} outside (0, {}]",
                Self::MAX_SIGMA
            )));
        }
        Ok(GrnnParams {
            order,
            sigma,
            horizon: Self::DEFAULT_HORIZON,
        })
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }
}

/// Paired pattern/target matrices held as columns, newest last, with FIFO
/// eviction once the column count reaches `capacity`.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    patterns: VecDeque<Vec<f64>>,
    targets: VecDeque<Vec<f64>>,
    capacity: usize,
}

impl TrainingSet {
    pub fn new(capacity: usize) -> Self {
        TrainingSet {
            patterns: VecDeque::new(),
            targets: VecDeque::new(),
            capacity,
        }
    }

    pub fn with_default_capacity() -> Self {
        Self::new(TRAINING_CAPACITY)
    }

    /// Column count M.
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn pattern(&self, i: usize) -> &[f64] {
        &self.patterns[i]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i]
    }

    pub fn patterns(&self) -> impl Iterator<Item = &[f64]> {
        self.patterns.iter().map(Vec::as_slice)
    }

    pub fn targets(&self) -> impl Iterator<Item = &[f64]> {
        self.targets.iter().map(Vec::as_slice)
    }

    /// Appends a column, evicting the oldest one if at capacity.
    pub fn push(&mut self, pattern: Vec<f64>, target: Vec<f64>) {
        if self.capacity > 0 && self.patterns.len() == self.capacity {
            self.patterns.pop_front();
            self.targets.pop_front();
        }
        self.patterns.push_back(pattern);
        self.targets.push_back(target);
    }

    /// A new set containing only the columns at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> TrainingSet {
        let mut out = TrainingSet::new(self.capacity);
        for &i in indices {
            out.push(self.patterns[i].clone(), self.targets[i].clone());
        }
        out
    }
}

/// Gaussian kernel `exp(-||x - xi||^2 / (2 sigma^2))`.
///
/// ```
/// use vvp::grnn::gaussian_kernel;
///
/// let g = gaussian_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
/// assert!((g - (-0.5f64).exp()).abs() < 1e-15);
/// ```
pub fn gaussian_kernel(x: &[f64], xi: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: xi.len(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be > 0")));
    }
    Ok((-squared_distance(x, xi) / (2.0 * sigma * sigma)).exp())
}

fn squared_distance(x: &[f64], xi: &[f64]) -> f64 {
    x.iter()
        .zip(xi)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// Kernel weights of `query` against every stored pattern, normalized to sum
/// to 1. When every kernel underflows, the weight mass collapses onto the
/// nearest pattern (ties to the lowest index).
pub fn compute_weights(query: &[f64], training: &TrainingSet, sigma: f64) -> Result<Vec<f64>> {
    if training.is_empty() {
        return Err(Error::EmptyModel);
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be > 0")));
    }
    let m = training.len();
    let mut dists = Vec::with_capacity(m);
    for pattern in training.patterns() {
        if pattern.len() != query.len() {
            return Err(Error::DimensionMismatch {
                expected: pattern.len(),
                actual: query.len(),
            });
        }
        dists.push(squared_distance(query, pattern));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let kernels: Vec<f64> = dists.iter().map(|d| (-d * inv).exp()).collect();
    let sum: f64 = kernels.iter().sum();
    if sum < KERNEL_SUM_FLOOR {
        // the weight ratio is 0/0 here; its limit is the nearest neighbor
        let nearest = dists
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.partial_cmp(b).expect("distances are finite"))
            .map(|(i, _)| i)
            .expect("non-empty training set");
        let mut w = vec![0.0; m];
        w[nearest] = 1.0;
        return Ok(w);
    }
    Ok(kernels.into_iter().map(|k| k / sum).collect())
}

/// GRNN prediction: the weighted average of stored target columns.
/// Each output element is a convex combination of the corresponding
/// target-row values.
pub fn predict(query: &[f64], training: &TrainingSet, sigma: f64) -> Result<Vec<f64>> {
    let weights = compute_weights(query, training, sigma)?;
    let p = training.target(0).len();
    let mut out = vec![0.0; p];
    for (w, target) in weights.iter().zip(training.targets()) {
        for (o, y) in out.iter_mut().zip(target) {
            *o += w * y;
        }
    }
    Ok(out)
}

/// Builds the full training set for a frame history: for every window of
/// `order` seconds followed by `horizon` target seconds, one pattern/target
/// column pair, normalized against the bounds of the whole history. With `t`
/// frames the column count is `M = t - horizon - order + 1` (zero below the
/// `order + horizon` threshold), capped at [`TRAINING_CAPACITY`] with the
/// oldest columns evicted.
///
/// ```
/// use vvp::fusion::FusionMode;
/// use vvp::grnn::{build_training_set, GrnnParams};
/// use vvp::sim::ScenarioConfig;
///
/// let frames = vvp::sim::generate(&ScenarioConfig::urban(1)).unwrap();
/// let params = GrnnParams::new(7, 0.5).unwrap();
/// let set = build_training_set(&frames[..200], &params, FusionMode::Hvv).unwrap();
/// assert_eq!(set.len(), 200 - 5 - 7 + 1);
/// ```
pub fn build_training_set(
    frames: &[SignalFrame],
    params: &GrnnParams,
    mode: FusionMode,
) -> Result<TrainingSet> {
    let bank = NormalizerBank::from_frames(frames)?;
    build_training_set_with_bank(frames, params, mode, &bank)
}

/// As [`build_training_set`], but normalizing against a caller-supplied bank
/// (the online path keeps one bank across the whole trace).
pub fn build_training_set_with_bank(
    frames: &[SignalFrame],
    params: &GrnnParams,
    mode: FusionMode,
    bank: &NormalizerBank,
) -> Result<TrainingSet> {
    let (l, p) = (params.order, params.horizon);
    let mut set = TrainingSet::with_default_capacity();
    if frames.len() < l + p {
        return Ok(set);
    }
    // window ends at index j; targets are frames j+1 ..= j+p
    for j in (l - 1)..(frames.len() - p) {
        let (pattern, target) = build_column(frames, j, params, mode, bank)?;
        set.push(pattern, target);
    }
    Ok(set)
}

/// One pattern/target column for the window ending at frame index `end`.
pub(crate) fn build_column(
    frames: &[SignalFrame],
    end: usize,
    params: &GrnnParams,
    mode: FusionMode,
    bank: &NormalizerBank,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (l, p) = (params.order, params.horizon);
    let mut pattern = Vec::with_capacity(l + mode.extra_signals());
    for frame in &frames[end + 1 - l..=end] {
        pattern.push(bank.v_ego.normalize(frame.v_ego)?);
    }
    pattern.extend(bank.fused_tail(&frames[end], mode)?);
    let mut target = Vec::with_capacity(p);
    for frame in &frames[end + 1..=end + p] {
        target.push(bank.v_ego.normalize(frame.v_ego)?);
    }
    Ok((pattern, target))
}
