//! Online vehicle-velocity prediction with a self-adaptive PSO-tuned GRNN
//! and traffic-information fusion.
//!
//! The toolkit predicts the next few seconds of an ego vehicle's velocity
//! from its recent history, optionally fused with front-vehicle and
//! traffic-light signals, and keeps the predictor's two parameters (input
//! order and kernel smoothing) tuned online with a particle swarm driven by
//! k-fold cross-validation. A deterministic traffic micro-simulator and a
//! benchmark CLI round out the experiment loop.
//!
//! ```
//! use vvp::fusion::FusionMode;
//! use vvp::online::{benchmark_fixed_params, OnlinePredictor, Strategy};
//! use vvp::sim::ScenarioConfig;
//!
//! let trace = vvp::sim::generate(&ScenarioConfig::urban(1)).unwrap();
//! let mut predictor =
//!     OnlinePredictor::new(FusionMode::HvvDisVfvTls, Strategy::Fixed(benchmark_fixed_params()));
//! let mut last = None;
//! for frame in &trace[..120] {
//!     last = Some(predictor.step(*frame).unwrap());
//! }
//! let forecast = last.unwrap();
//! assert_eq!(forecast.velocities.len(), 5); // m/s, five seconds ahead
//! ```

pub mod cli;
pub mod error;
pub mod fusion;
pub mod grnn;
pub mod metrics;
pub mod online;
pub mod pso;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
