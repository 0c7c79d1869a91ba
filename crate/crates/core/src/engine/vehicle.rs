use serde::{Deserialize, Serialize};

use crate::network::Road;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleClass {
    Human,
    Cav,
}

impl VehicleClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleClass::Human => "human",
            VehicleClass::Cav => "cav",
        }
    }
}

/// Kinematic and identity state of one vehicle on the road. `x` is the front
/// bumper position along the vehicle's current road.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleState {
    pub id: u32,
    pub class: VehicleClass,
    pub road: Road,
    pub lane: usize,
    pub x: f64,
    pub v: f64,
    /// Active time-headway T, s.
    pub headway: f64,
    pub planned_entry: f64,
    pub actual_entry: Option<f64>,
    pub exit_time: Option<f64>,
    /// Distance driven since insertion, m.
    pub distance: f64,
    pub(crate) last_lane_change: f64,
}

impl VehicleState {
    pub fn is_cav(&self) -> bool {
        self.class == VehicleClass::Cav
    }
}
