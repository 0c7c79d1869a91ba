//! Scenario configuration.
//!
//! A scenario is read from TOML with one table per concern. Every key has a
//! default, so an empty file describes the single-lane merge scenario:
//!
//! ```toml
//! [geometry]
//! mainline_length = 2000.0     # m
//! mainline_lanes = 1           # 1 or 4
//! ramp_length = 300.0          # m
//! merge_position = 1000.0      # m from mainline start, where the ramp ends
//! merge_lane_length = 200.0    # final ramp stretch that runs alongside lane 0
//! segment_length = 100.0       # target sensing segment length, m
//! speed_limit_mainline = 31.29 # m/s
//! speed_limit_ramp = 31.29     # m/s
//!
//! [demand]
//! mainline_inflow_per_lane = 1800.0  # veh/h/lane
//! ramp_inflow = 1800.0               # veh/h
//! merge_start = 200.0                # s
//! merge_duration = 30.0              # s
//! cav_fraction = 0.0
//!
//! [driver.idm]
//! time_headway = 1.5
//! max_accel = 2.6
//! comfortable_decel = 4.5
//! accel_exponent = 4.0
//! min_gap = 2.0
//! vehicle_length = 5.0
//! safe_decel = 4.5
//!
//! [driver.lane_change]
//! assertiveness = 3.0
//! speed_gain_weight = 5.0
//! cooperation = 1.0
//! safe_decel_limit = 1.0
//!
//! [control]
//! num_control_segments = 2
//! action_interval = 2.5
//! activation_distance = 200.0
//! min_headway = 1.5
//! max_headway = 6.0
//!
//! [simulation]
//! horizon = 500.0
//! step_length = 0.5
//!
//! [reward]
//! scale = 1e-5
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{IdmParams, LaneChangeParams};
use crate::error::{Error, Result};

/// Fixed simulation step length, s.
pub const STEP_LENGTH: f64 = 0.5;
/// Default (and minimum commanded) time-headway, s.
pub const DEFAULT_HEADWAY: f64 = 1.5;
/// Largest headway a command may carry, s.
pub const MAX_HEADWAY: f64 = 6.0;
/// Posted mainline speed limit (70 mph), m/s.
pub const SPEED_LIMIT: f64 = 31.29;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub mainline_length: f64,
    pub mainline_lanes: usize,
    pub ramp_length: f64,
    pub merge_position: f64,
    pub merge_lane_length: f64,
    pub segment_length: f64,
    pub speed_limit_mainline: f64,
    pub speed_limit_ramp: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            mainline_length: 2000.0,
            mainline_lanes: 1,
            ramp_length: 300.0,
            merge_position: 1000.0,
            merge_lane_length: 200.0,
            segment_length: 100.0,
            speed_limit_mainline: SPEED_LIMIT,
            speed_limit_ramp: SPEED_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    /// veh/h/lane entering every mainline lane from t = 0.
    pub mainline_inflow_per_lane: f64,
    /// veh/h entering the ramp during the merge window. Zero disables the ramp.
    pub ramp_inflow: f64,
    pub merge_start: f64,
    pub merge_duration: f64,
    pub cav_fraction: f64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self {
            mainline_inflow_per_lane: 1800.0,
            ramp_inflow: 1800.0,
            merge_start: 200.0,
            merge_duration: 30.0,
            cav_fraction: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverConfig {
    pub idm: IdmParams,
    pub lane_change: LaneChangeParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub num_control_segments: usize,
    /// Seconds between controller invocations; commands are held in between.
    pub action_interval: f64,
    /// Ramp stretch (m before the merge) whose occupancy activates the fixed controller.
    pub activation_distance: f64,
    pub min_headway: f64,
    pub max_headway: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            num_control_segments: 2,
            action_interval: 2.5,
            activation_distance: 200.0,
            min_headway: DEFAULT_HEADWAY,
            max_headway: MAX_HEADWAY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub step_length: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { horizon: 500.0, step_length: STEP_LENGTH }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// The reward normalisation 1/C.
    pub scale: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { scale: 1e-5 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    pub demand: DemandConfig,
    pub driver: DriverConfig,
    pub control: ControlConfig,
    pub simulation: SimulationConfig,
    pub reward: RewardConfig,
}

impl ScenarioConfig {
    /// Single-lane mainline with a single-lane ramp merging for 30 s.
    pub fn single_lane() -> Self {
        Self::default()
    }

    /// Four-lane mainline; the ramp merges for 50 s.
    pub fn multi_lane() -> Self {
        let mut cfg = Self::default();
        cfg.geometry.mainline_lanes = 4;
        cfg.demand.merge_duration = 50.0;
        cfg
    }

    /// Shortened single-lane episode used for desk-scale policy training:
    /// 150 s horizon with the merge starting once the road has filled, every
    /// vehicle a CAV.
    pub fn desk() -> Self {
        let mut cfg = Self::default();
        cfg.demand.cav_fraction = 1.0;
        cfg.simulation.horizon = 150.0;
        cfg.demand.merge_start = 70.0;
        cfg.demand.merge_duration = 30.0;
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serialises")
    }

    /// Stable digest of the full configuration, recorded in checkpoints.
    pub fn digest(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn num_steps(&self) -> usize {
        (self.simulation.horizon / self.simulation.step_length).round() as usize
    }

    /// Engine steps between controller invocations.
    pub fn action_steps(&self) -> usize {
        ((self.control.action_interval / self.simulation.step_length).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(g.mainline_length > 0.0 && g.ramp_length > 0.0 && g.segment_length > 0.0) {
            return bad("road and segment lengths must be positive");
        }
        if g.mainline_lanes != 1 && g.mainline_lanes != 4 {
            return bad("mainline_lanes must be 1 or 4");
        }
        if !(g.merge_position > 0.0 && g.merge_position < g.mainline_length) {
            return bad("merge_position must lie strictly inside the mainline");
        }
        if !(g.merge_lane_length > 0.0 && g.merge_lane_length <= g.ramp_length) {
            return bad("merge_lane_length must be in (0, ramp_length]");
        }
        if g.merge_lane_length > g.merge_position {
            return bad("merge lane extends upstream of the mainline start");
        }
        if !(g.speed_limit_mainline > 0.0 && g.speed_limit_ramp > 0.0) {
            return bad("speed limits must be positive");
        }
        let d = &self.demand;
        if !(0.0..=1.0).contains(&d.cav_fraction) {
            return bad("cav_fraction must be in [0, 1]");
        }
        if d.mainline_inflow_per_lane < 0.0 || d.ramp_inflow < 0.0 {
            return bad("inflows must be non-negative");
        }
        if d.merge_start < 0.0 || d.merge_duration < 0.0 {
            return bad("merge window must be non-negative");
        }
        self.driver.idm.validate()?;
        self.driver.lane_change.validate()?;
        let c = &self.control;
        if c.num_control_segments == 0 {
            return bad("num_control_segments must be at least 1");
        }
        if !(c.min_headway >= DEFAULT_HEADWAY && c.max_headway >= c.min_headway) {
            return bad("headway bounds must satisfy 1.5 <= min <= max");
        }
        if c.action_interval < self.simulation.step_length {
            return bad("action_interval must be at least one step");
        }
        if (self.simulation.step_length - STEP_LENGTH).abs() > 1e-12 {
            return bad("step_length is fixed at 0.5 s");
        }
        if self.simulation.horizon <= 0.0 {
            return bad("horizon must be positive");
        }
        if self.reward.scale <= 0.0 {
            return bad("reward scale must be positive");
        }
        Ok(())
    }
}
