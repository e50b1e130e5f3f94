//! Synthetic traffic-scenario generator.
//!
//! Produces 1 Hz telemetry traces of an ego vehicle following a lead vehicle
//! along a straight corridor, urban (signalized, stop-and-go) or highway
//! (free-flowing). Car-following uses the Intelligent Driver Model; the lead
//! vehicle chases seeded piecewise-constant speed targets. Everything is
//! deterministic for a fixed config.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{SignalFrame, FRONT_DIST_CAP, TLS_DIST_CAP};

const DT: f64 = 0.1;
const VEHICLE_LEN: f64 = 5.0;
const IDM_MIN_GAP: f64 = 2.0;
const IDM_HEADWAY: f64 = 1.5;
const STOP_LINE_MARGIN: f64 = 2.0;
/// Ego driver reaction lag for the car-following response, in `DT` steps
/// (1.2 s): the acceleration command computed from the sensed gap and lead
/// velocity takes effect this long after sensing. An instantaneous
/// emergency-braking guard still prevents collisions when the gap becomes
/// critical.
const EGO_REACTION_STEPS: usize = 12;
/// Ego driver reaction lag for the traffic-light response, in `DT` steps
/// (2.0 s): signals further up the road register later than the car ahead.
const EGO_LIGHT_REACTION_STEPS: usize = 20;
/// Deceleration the lead driver is willing to use when a light turns red,
/// m/s^2. Below it the lead commits through, clearing late reds.
const LEAD_COMMIT_DECEL: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Urban,
    Highway,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficDensity {
    Low,
    High,
}

/// Fixed-cycle signal timing, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightCycle {
    pub green: f64,
    pub red: f64,
}

/// Piecewise-constant lead-vehicle speed targets: a fresh target is drawn
/// uniformly from `[min_target, max_target]` every `min_dwell..=max_dwell`
/// seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub min_target: f64,
    pub max_target: f64,
    pub min_dwell: u32,
    pub max_dwell: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Trace length in seconds; at least 120.
    pub duration: u32,
    pub seed: u64,
    /// Meters between successive traffic lights (urban only).
    pub light_spacing: f64,
    pub light_cycle: LightCycle,
    pub lead_speed_profile: SpeedProfile,
    pub ego_max_speed: f64,
    pub ego_max_accel: f64,
    /// Magnitude of the strongest ego braking, m/s^2 (positive).
    pub ego_max_decel: f64,
    pub traffic_density: TrafficDensity,
}

impl ScenarioConfig {
    /// Signalized stop-and-go corridor.
    pub fn urban(seed: u64) -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Urban,
            duration: 900,
            seed,
            light_spacing: 140.0,
            light_cycle: LightCycle { green: 12.0, red: 23.0 },
            lead_speed_profile: SpeedProfile {
                min_target: 5.0,
                max_target: 12.0,
                min_dwell: 12,
                max_dwell: 30,
            },
            ego_max_speed: 12.0,
            ego_max_accel: 1.0,
            ego_max_decel: 2.5,
            traffic_density: TrafficDensity::High,
        }
    }

    /// Free-flowing high-speed segment, no signals.
    pub fn highway(seed: u64) -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Highway,
            duration: 900,
            seed,
            light_spacing: 0.0,
            light_cycle: LightCycle { green: 1.0, red: 0.0 },
            lead_speed_profile: SpeedProfile {
                min_target: 27.0,
                max_target: 36.0,
                min_dwell: 60,
                max_dwell: 120,
            },
            ego_max_speed: 36.5,
            ego_max_accel: 2.0,
            ego_max_decel: 3.0,
            traffic_density: TrafficDensity::Low,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration < 120 {
            return Err(Error::Config(format!(
                "duration {} s too short, need at least 120",
                self.duration
            )));
        }
        for (name, v) in [
            ("ego_max_speed", self.ego_max_speed),
            ("ego_max_accel", self.ego_max_accel),
            ("ego_max_decel", self.ego_max_decel),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.kind == ScenarioKind::Urban && !(self.light_spacing > 0.0) {
            return Err(Error::Config("urban scenarios need light_spacing > 0".into()));
        }
        let p = &self.lead_speed_profile;
        if p.min_target < 0.0 || p.max_target < p.min_target || p.min_dwell == 0
            || p.max_dwell < p.min_dwell
        {
            return Err(Error::Config("invalid lead_speed_profile".into()));
        }
        Ok(())
    }
}

/// Aggregate driving statistics of a trace, from 1 Hz first differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    /// Total distance covered, km.
    pub total_mileage: f64,
    pub max_speed: f64,
    pub avg_speed: f64,
    pub max_pos_accel: f64,
    /// Most negative 1 Hz acceleration (<= 0), m/s^2.
    pub max_neg_accel: f64,
    /// Fraction of seconds with dv > +0.05 m/s^2.
    pub accel_ratio: f64,
    /// Fraction of seconds with dv < -0.05 m/s^2.
    pub decel_ratio: f64,
}

const ACCEL_DEAD_BAND: f64 = 0.05;

pub fn compute_stats(trace: &[SignalFrame]) -> Result<TraceStats> {
    if trace.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 frames for stats, got {}",
            trace.len()
        )));
    }
    let speeds: Vec<f64> = trace.iter().map(|f| f.v_ego).collect();
    let n_diffs = speeds.len() - 1;
    let mut max_pos = 0.0f64;
    let mut max_neg = 0.0f64;
    let mut accel = 0usize;
    let mut decel = 0usize;
    for pair in speeds.windows(2) {
        let dv = pair[1] - pair[0];
        max_pos = max_pos.max(dv);
        max_neg = max_neg.min(dv);
        if dv > ACCEL_DEAD_BAND {
            accel += 1;
        } else if dv < -ACCEL_DEAD_BAND {
            decel += 1;
        }
    }
    Ok(TraceStats {
        total_mileage: speeds.iter().sum::<f64>() / 1000.0,
        max_speed: speeds.iter().copied().fold(0.0, f64::max),
        avg_speed: speeds.iter().sum::<f64>() / speeds.len() as f64,
        max_pos_accel: max_pos,
        max_neg_accel: max_neg,
        accel_ratio: accel as f64 / n_diffs as f64,
        decel_ratio: decel as f64 / n_diffs as f64,
    })
}

struct Lights {
    positions: Vec<f64>,
    offsets: Vec<f64>,
    cycle: LightCycle,
}

impl Lights {
    fn none() -> Self {
        Lights {
            positions: Vec::new(),
            offsets: Vec::new(),
            cycle: LightCycle { green: 1.0, red: 0.0 },
        }
    }

    fn next_ahead(&self, pos: f64) -> Option<(usize, f64)> {
        self.positions
            .iter()
            .enumerate()
            .find(|(_, &p)| p > pos)
            .map(|(i, &p)| (i, p))
    }

    fn is_red(&self, index: usize, time: f64) -> bool {
        let total = self.cycle.green + self.cycle.red;
        if total <= 0.0 || self.cycle.red <= 0.0 {
            return false;
        }
        let phase = (time + self.offsets[index]).rem_euclid(total);
        phase >= self.cycle.green
    }
}

struct Vehicle {
    pos: f64,
    vel: f64,
    /// Index of a red light being driven through because stopping was no
    /// longer feasible when it turned red.
    committed_through: Option<usize>,
}

/// IDM acceleration toward desired speed `v0` with an optional constraint
/// `(gap, closing_speed)` to the nearest obstacle.
fn idm_accel(v: f64, v0: f64, constraint: Option<(f64, f64)>, a_max: f64, b_comf: f64) -> f64 {
    let free = a_max * (1.0 - (v / v0).powi(4));
    match constraint {
        None => free,
        Some((gap, dv)) => {
            let gap = gap.max(0.1);
            let desired = IDM_MIN_GAP + v * IDM_HEADWAY + v * dv / (2.0 * (a_max * b_comf).sqrt());
            free - a_max * (desired.max(0.0) / gap).powi(2)
        }
    }
}

/// Red-light constraint for a vehicle at `pos`: the virtual standing
/// obstacle at the stop line, or `None` on green or once committed through.
fn light_constraint(
    vehicle: &mut Vehicle,
    lights: &Lights,
    time: f64,
    max_decel: f64,
) -> Option<(f64, f64)> {
    let (index, light_pos) = lights.next_ahead(vehicle.pos)?;
    if vehicle.committed_through == Some(index) {
        return None;
    }
    if vehicle.committed_through.is_some() {
        // the committed light is now behind us
        vehicle.committed_through = None;
    }
    if !lights.is_red(index, time) {
        return None;
    }
    let gap = light_pos - vehicle.pos - STOP_LINE_MARGIN;
    // dilemma zone: too close to brake to a stop, keep going
    if gap < vehicle.vel * vehicle.vel / (2.0 * max_decel) {
        vehicle.committed_through = Some(index);
        return None;
    }
    Some((gap, vehicle.vel))
}

/// Simulates the scenario and returns its 1 Hz trace.
///
/// ```
/// use vvp::sim::{compute_stats, generate, ScenarioConfig};
///
/// let trace = generate(&ScenarioConfig::highway(7)).unwrap();
/// let stats = compute_stats(&trace).unwrap();
/// assert!(stats.avg_speed > 25.0 && stats.avg_speed < 38.0); // m/s
/// ```
pub fn generate(config: &ScenarioConfig) -> Result<Vec<SignalFrame>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let lights = match config.kind {
        ScenarioKind::Highway => Lights::none(),
        ScenarioKind::Urban => {
            let reach = config.duration as f64 * config.ego_max_speed + 2.0 * config.light_spacing;
            let count = (reach / config.light_spacing).ceil() as usize;
            let cycle_total = config.light_cycle.green + config.light_cycle.red;
            let positions = (1..=count).map(|i| i as f64 * config.light_spacing).collect();
            let offsets = (0..count).map(|_| rng.gen_range(0.0..cycle_total)).collect();
            Lights { positions, offsets, cycle: config.light_cycle }
        }
    };

    let profile = config.lead_speed_profile;
    // beyond reinject_gap the departed lead is replaced by the next vehicle
    // ahead, so a front vehicle stays within a useful sensing range
    let (density_scale, init_gap, reinject_gap) = match (config.kind, config.traffic_density) {
        (ScenarioKind::Urban, TrafficDensity::High) => (0.8, 18.0, 55.0),
        (ScenarioKind::Urban, TrafficDensity::Low) => (1.0, 25.0, 90.0),
        (ScenarioKind::Highway, TrafficDensity::High) => (0.9, 45.0, 160.0),
        (ScenarioKind::Highway, TrafficDensity::Low) => (1.0, 60.0, 220.0),
    };

    let init_vel = 0.6 * (profile.min_target + profile.max_target) / 2.0
        + 0.4 * profile.min_target;
    let mut ego = Vehicle { pos: 0.0, vel: init_vel, committed_through: None };
    let mut lead = Vehicle {
        pos: init_gap + VEHICLE_LEN,
        vel: init_vel,
        committed_through: None,
    };

    let lead_a_max = 1.5f64.min(config.ego_max_accel);
    let lead_b = config.ego_max_decel.min(2.5);
    let mut lead_target = rng.gen_range(profile.min_target..=profile.max_target) * density_scale;
    let mut dwell_left = rng.gen_range(profile.min_dwell..=profile.max_dwell);

    let mut trace = Vec::with_capacity(config.duration as usize);
    let mut cmd_buf: std::collections::VecDeque<f64> =
        std::collections::VecDeque::with_capacity(EGO_REACTION_STEPS + 1);
    let mut light_cmd_buf: std::collections::VecDeque<f64> =
        std::collections::VecDeque::with_capacity(EGO_LIGHT_REACTION_STEPS + 1);
    let steps = config.duration as usize * 10;
    for step in 0..steps {
        let time = step as f64 * DT;

        if step % 10 == 0 {
            // record the frame at the top of each second
            let t = step as u64 / 10;
            let gap = lead.pos - ego.pos - VEHICLE_LEN;
            let dist_tls = lights
                .next_ahead(ego.pos)
                .map(|(_, p)| p - ego.pos)
                .unwrap_or(TLS_DIST_CAP);
            trace.push(SignalFrame {
                t,
                v_ego: ego.vel,
                dist_front: gap.min(FRONT_DIST_CAP),
                v_front: lead.vel,
                dist_tls: dist_tls.min(TLS_DIST_CAP),
            });

            // lead retargets on whole seconds
            if dwell_left == 0 {
                lead_target =
                    rng.gen_range(profile.min_target..=profile.max_target) * density_scale;
                dwell_left = rng.gen_range(profile.min_dwell..=profile.max_dwell);
            }
            dwell_left -= 1;

            // once the lead has pulled far ahead, the next vehicle in the
            // stream becomes the relevant front vehicle
            if lead.pos - ego.pos - VEHICLE_LEN > reinject_gap {
                lead = Vehicle {
                    pos: ego.pos + VEHICLE_LEN + init_gap + rng.gen_range(0.0..15.0),
                    vel: ego.vel,
                    committed_through: None,
                };
                lead_target =
                    rng.gen_range(profile.min_target..=profile.max_target) * density_scale;
                dwell_left = rng.gen_range(profile.min_dwell..=profile.max_dwell);
            }
        }

        // lead vehicle: chase its target speed, stop for reds. The commit
        // threshold uses comfortable braking only, so the lead clears late
        // reds that the ego then stops for on its own.
        let lead_light = light_constraint(&mut lead, &lights, time, LEAD_COMMIT_DECEL);
        let lead_v0 = lead_target.max(0.1);
        let a_lead = idm_accel(lead.vel, lead_v0, lead_light, lead_a_max, lead_b)
            .clamp(-lead_b, lead_a_max);
        // ego: IDM against the lead and the nearest red light
        let gap = lead.pos - ego.pos - VEHICLE_LEN;
        let follow = Some((gap, ego.vel - lead.vel));
        let ego_light = light_constraint(&mut ego, &lights, time, config.ego_max_decel);
        let a_follow = idm_accel(ego.vel, config.ego_max_speed, follow, config.ego_max_accel, config.ego_max_decel);
        let a_light = match ego_light {
            Some(c) => idm_accel(ego.vel, config.ego_max_speed, Some(c), config.ego_max_accel, config.ego_max_decel),
            None => f64::INFINITY,
        };
        cmd_buf.push_back(a_follow.clamp(-config.ego_max_decel, config.ego_max_accel));
        light_cmd_buf.push_back(a_light.min(config.ego_max_accel));
        let follow_delayed = if cmd_buf.len() > EGO_REACTION_STEPS {
            cmd_buf.pop_front().expect("buffer past the reaction lag")
        } else {
            0.0
        };
        let light_delayed = if light_cmd_buf.len() > EGO_LIGHT_REACTION_STEPS {
            light_cmd_buf.pop_front().expect("buffer past the reaction lag")
        } else {
            f64::INFINITY
        };
        let mut a_ego = follow_delayed
            .min(light_delayed)
            .clamp(-config.ego_max_decel, config.ego_max_accel);
        // emergency guard: brake immediately once the stopping distance no
        // longer fits in the gap, regardless of the lagged command
        if gap < IDM_MIN_GAP + ego.vel * ego.vel / (2.0 * config.ego_max_decel) {
            a_ego = -config.ego_max_decel;
        }

        lead.vel = (lead.vel + a_lead * DT).max(0.0);
        lead.pos += lead.vel * DT;
        ego.vel = (ego.vel + a_ego * DT).max(0.0);
        ego.pos += ego.vel * DT;
    }

    Ok(trace)
}
