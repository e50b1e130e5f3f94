//! Telemetry normalization and GRNN input assembly.
//!
//! Raw signals (ego velocity, front-vehicle distance/velocity, traffic-light
//! distance) are scaled into `[0, 1]` with running min/max normalizers before
//! they enter the network. The [`FusionMode`] selects which extra signals are
//! appended to the historical-velocity window.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sensing-range cap for the front-vehicle distance, in meters. A missing
/// front vehicle is reported at this distance.
pub const FRONT_DIST_CAP: f64 = 250.0;

/// Sensing-range cap for the traffic-light distance, in meters. A missing
/// traffic light ahead is reported at this distance.
pub const TLS_DIST_CAP: f64 = 500.0;

/// One second of raw telemetry, sampled at 1 Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalFrame {
    /// Seconds since trace start; strictly increasing by 1 across a trace.
    pub t: u64,
    /// Ego-vehicle velocity, m/s.
    pub v_ego: f64,
    /// Distance to the front vehicle, m (capped at [`FRONT_DIST_CAP`]).
    pub dist_front: f64,
    /// Front-vehicle velocity, m/s.
    pub v_front: f64,
    /// Distance to the next traffic light ahead, m (capped at [`TLS_DIST_CAP`]).
    pub dist_tls: f64,
}

impl SignalFrame {
    pub fn is_valid(&self) -> bool {
        [self.v_ego, self.dist_front, self.v_front, self.dist_tls]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Which signal combination feeds the GRNN input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FusionMode {
    /// Historical ego velocity only.
    Hvv,
    /// Historical velocity plus front-vehicle distance.
    HvvDis,
    /// Plus front-vehicle velocity.
    HvvDisVfv,
    /// Plus traffic-light distance.
    HvvDisVfvTls,
}

impl FusionMode {
    pub const ALL: [FusionMode; 4] = [
        FusionMode::Hvv,
        FusionMode::HvvDis,
        FusionMode::HvvDisVfv,
        FusionMode::HvvDisVfvTls,
    ];

    /// Number of fused signals appended after the velocity window.
    pub fn extra_signals(self) -> usize {
        match self {
            FusionMode::Hvv => 0,
            FusionMode::HvvDis => 1,
            FusionMode::HvvDisVfv => 2,
            FusionMode::HvvDisVfvTls => 3,
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FusionMode::Hvv => "hvv",
            FusionMode::HvvDis => "hvv-dis",
            FusionMode::HvvDisVfv => "hvv-dis-vfv",
            FusionMode::HvvDisVfvTls => "hvv-dis-vfv-tls",
        };
        f.write_str(s)
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hvv" => Ok(FusionMode::Hvv),
            "hvv-dis" => Ok(FusionMode::HvvDis),
            "hvv-dis-vfv" => Ok(FusionMode::HvvDisVfv),
            "hvv-dis-vfv-tls" => Ok(FusionMode::HvvDisVfvTls),
            other => Err(Error::InvalidInput(format!(
                "unknown fusion mode {other:?}; expected hvv, hvv-dis, hvv-dis-vfv or hvv-dis-vfv-tls"
            ))),
        }
    }
}

/// Streaming min/max scaler for one signal.
///
/// Bounds grow as values are observed; [`Normalizer::normalize`] maps into
/// `[0, 1]` against the bounds in effect at call time, clamping values that
/// fall outside them.
///
/// ```
/// use vvp::fusion::Normalizer;
///
/// let mut n = Normalizer::new();
/// for v in [10.0, 20.0, 30.0] {
///     n.observe(v).unwrap();
/// }
/// assert_eq!(n.normalize(20.0).unwrap(), 0.5);
/// assert_eq!(n.normalize(30.0).unwrap(), 1.0);
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    min: f64,
    max: f64,
    count: u64,
}

impl Normalizer {
    pub fn new() -> Self {
        Normalizer {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            count: 0,
        }
    }

    pub fn observe(&mut self, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite(value));
        }
        self.min = self.min.min(value);
        self.max = self.max.max(value);
        self.count += 1;
        Ok(())
    }

    pub fn observed_count(&self) -> u64 {
        self.count
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        (self.count > 0).then_some((self.min, self.max))
    }

    /// Maps `value` to `[0, 1]` against the current bounds. A degenerate
    /// range (max = min) maps everything to 0.5; out-of-bounds values clamp.
    pub fn normalize(&self, value: f64) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::UnobservedNormalizer);
        }
        if self.max == self.min {
            return Ok(0.5);
        }
        Ok(((value - self.min) / (self.max - self.min)).clamp(0.0, 1.0))
    }

    /// Inverse of [`Normalizer::normalize`] for in-range values; used to map
    /// predicted velocities back to m/s.
    pub fn denormalize(&self, unit: f64) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::UnobservedNormalizer);
        }
        if self.max == self.min {
            return Ok(self.min);
        }
        Ok(self.min + unit * (self.max - self.min))
    }
}

impl Default for Normalizer {
    fn default() -> Self {
        Self::new()
    }
}

/// The per-signal normalizers a predictor carries through a trace.
#[derive(Debug, Clone, Default)]
pub struct NormalizerBank {
    pub v_ego: Normalizer,
    pub dist_front: Normalizer,
    pub v_front: Normalizer,
    pub dist_tls: Normalizer,
}

impl NormalizerBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe_frame(&mut self, frame: &SignalFrame) -> Result<()> {
        self.v_ego.observe(frame.v_ego)?;
        self.dist_front.observe(frame.dist_front)?;
        self.v_front.observe(frame.v_front)?;
        self.dist_tls.observe(frame.dist_tls)?;
        Ok(())
    }

    /// Builds a bank that has observed every frame in `frames`.
    pub fn from_frames(frames: &[SignalFrame]) -> Result<Self> {
        let mut bank = Self::new();
        for f in frames {
            bank.observe_frame(f)?;
        }
        Ok(bank)
    }

    /// The fused-signal tail of a pattern vector for `frame`, per `mode`.
    pub fn fused_tail(&self, frame: &SignalFrame, mode: FusionMode) -> Result<Vec<f64>> {
        let mut tail = Vec::with_capacity(mode.extra_signals());
        if mode.extra_signals() >= 1 {
            tail.push(self.dist_front.normalize(frame.dist_front)?);
        }
        if mode.extra_signals() >= 2 {
            tail.push(self.v_front.normalize(frame.v_front)?);
        }
        if mode.extra_signals() >= 3 {
            tail.push(self.dist_tls.normalize(frame.dist_tls)?);
        }
        Ok(tail)
    }
}

/// Assembles the GRNN query vector from the most recent history: the last
/// `order` normalized ego velocities in time order, then the current frame's
/// fused signals per `mode`. Length is always `order + mode.extra_signals()`.
pub fn assemble_query(
    frames: &[SignalFrame],
    order: usize,
    mode: FusionMode,
    bank: &NormalizerBank,
) -> Result<Vec<f64>> {
    if frames.len() < order {
        return Err(Error::ColdStart {
            needed: order,
            available: frames.len(),
        });
    }
    let mut query = Vec::with_capacity(order + mode.extra_signals());
    for frame in &frames[frames.len() - order..] {
        query.push(bank.v_ego.normalize(frame.v_ego)?);
    }
    let last = frames.last().expect("order >= 1 checked above");
    query.extend(bank.fused_tail(last, mode)?);
    Ok(query)
}
