use serde::{Deserialize, Serialize};

use crate::config::{DEFAULT_HEADWAY, SPEED_LIMIT};
use crate::error::{Error, Result};

/// Intelligent Driver Model parameters. CAVs share these values and only
/// override `time_headway` with the active command.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmParams {
    /// v0, m/s. The engine replaces it with the speed limit at the vehicle.
    pub desired_speed: f64,
    /// T, s.
    pub time_headway: f64,
    /// a, m/s².
    pub max_accel: f64,
    /// b, m/s².
    pub comfortable_decel: f64,
    /// delta.
    pub accel_exponent: f64,
    /// s0, m.
    pub min_gap: f64,
    pub vehicle_length: f64,
    /// Deceleration a leader is assumed capable of when bounding the safe speed, m/s².
    pub safe_decel: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: SPEED_LIMIT,
            time_headway: DEFAULT_HEADWAY,
            max_accel: 2.6,
            comfortable_decel: 4.5,
            accel_exponent: 4.0,
            min_gap: 2.0,
            vehicle_length: 5.0,
            safe_decel: 4.5,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [
            self.desired_speed,
            self.time_headway,
            self.max_accel,
            self.comfortable_decel,
            self.accel_exponent,
            self.min_gap,
            self.vehicle_length,
            self.safe_decel,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive {
            return Err(Error::Config("IDM parameters must be finite and positive".into()));
        }
        Ok(())
    }

    pub fn with_headway(mut self, time_headway: f64) -> Self {
        self.time_headway = time_headway;
        self
    }

    pub fn with_desired_speed(mut self, desired_speed: f64) -> Self {
        self.desired_speed = desired_speed;
        self
    }

    /// Desired dynamic gap s*(v, dv), floored at s0.
    pub fn desired_gap(&self, v: f64, approach_rate: f64) -> f64 {
        let dynamic =
            v * self.time_headway + v * approach_rate / (2.0 * (self.max_accel * self.comfortable_decel).sqrt());
        self.min_gap + dynamic.max(0.0)
    }
}

/// The vehicle ahead as seen from the follower: bumper-to-bumper gap and speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leader {
    pub gap: f64,
    pub speed: f64,
}

impl Leader {
    pub fn new(gap: f64, speed: f64) -> Self {
        Self { gap, speed }
    }
}

/// Smallest gap used inside the IDM interaction term.
const GAP_FLOOR: f64 = 1e-3;

pub(crate) fn accel(v: f64, leader: Option<Leader>, p: &IdmParams) -> f64 {
    let free = 1.0 - (v / p.desired_speed).powf(p.accel_exponent);
    match leader {
        None => p.max_accel * free,
        Some(l) => {
            let s_star = p.desired_gap(v, v - l.speed);
            let ratio = s_star / l.gap.max(GAP_FLOOR);
            p.max_accel * (free - ratio * ratio)
        }
    }
}

/// IDM acceleration of a vehicle at speed `v` behind `leader` (or on a free
/// road when `None`).
pub fn idm_acceleration(v: f64, leader: Option<Leader>, p: &IdmParams) -> Result<f64> {
    let leader_finite = leader.is_none_or(|l| l.gap.is_finite() && l.speed.is_finite());
    if !v.is_finite() || !leader_finite {
        return Err(Error::NonFinite("idm_acceleration"));
    }
    Ok(accel(v.max(0.0), leader, p))
}

/// Largest speed for the coming step such that, after driving `dt` at that
/// speed and then braking at `p.safe_decel`, the follower stops behind the
/// point where a leader braking at the same rate comes to rest:
///
/// `v dt + v² / 2b <= gap + v_l² / 2b`
pub fn safe_velocity(gap: f64, leader_speed: f64, dt: f64, p: &IdmParams) -> f64 {
    let b = p.safe_decel;
    let budget = gap.max(0.0) + leader_speed * leader_speed / (2.0 * b);
    if budget <= 0.0 {
        return 0.0;
    }
    b * (-dt + (dt * dt + 2.0 * budget / b).sqrt())
}
