//! Segment-level traffic state: mean speed and per-lane density.

use serde::{Deserialize, Serialize};

use crate::dynamics::IdmParams;
use crate::engine::VehicleState;
use crate::network::{Road, RoadNetwork};

/// Aggregates for every segment at one instant. Empty segments report the
/// segment's speed limit as their mean speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentObservation {
    pub time: f64,
    /// m/s, indexed by segment.
    pub mean_speed: Vec<f64>,
    /// veh/km/lane, indexed by segment.
    pub density: Vec<f64>,
    /// Vehicles per segment.
    pub count: Vec<usize>,
}

fn road_of(network: &RoadNetwork, segment: usize) -> Road {
    if segment == network.ramp_segment() {
        Road::Ramp
    } else {
        Road::Mainline
    }
}

pub fn observe(vehicles: &[VehicleState], network: &RoadNetwork, time: f64) -> SegmentObservation {
    let n = network.num_segments();
    let mut count = vec![0usize; n];
    let mut speed_sum = vec![0.0; n];
    for v in vehicles {
        let x = v.x.clamp(0.0, network.length(v.road));
        let seg = network.segment_of(x, v.road == Road::Ramp).expect("clamped position lies on the road");
        count[seg] += 1;
        speed_sum[seg] += v.v;
    }
    let mut mean_speed = Vec::with_capacity(n);
    let mut density = Vec::with_capacity(n);
    for (seg, spec) in network.segments.iter().enumerate() {
        let road = road_of(network, seg);
        let lane_km = spec.length() / 1000.0 * network.lanes(road) as f64;
        density.push(count[seg] as f64 / lane_km);
        mean_speed.push(if count[seg] == 0 { network.speed_limit(road) } else { speed_sum[seg] / count[seg] as f64 });
    }
    SegmentObservation { time, mean_speed, density, count }
}

impl SegmentObservation {
    pub fn empty(network: &RoadNetwork, time: f64) -> Self {
        observe(&[], network, time)
    }

    /// Vehicles implied by the densities: `sum density * length_km * lanes`.
    pub fn implied_count(&self, network: &RoadNetwork) -> f64 {
        network
            .segments
            .iter()
            .enumerate()
            .map(|(seg, spec)| self.density[seg] * spec.length() / 1000.0 * network.lanes(road_of(network, seg)) as f64)
            .sum()
    }

    /// Policy input: speeds over the segment speed limit, then densities over
    /// the jam density `1000 / (vehicle_length + min_gap)`.
    pub fn features(&self, network: &RoadNetwork, idm: &IdmParams) -> Vec<f64> {
        let jam = 1000.0 / (idm.vehicle_length + idm.min_gap);
        let speeds = self.mean_speed.iter().enumerate().map(|(seg, v)| v / network.speed_limit(road_of(network, seg)));
        let densities = self.density.iter().map(|k| k / jam);
        speeds.chain(densities).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::engine::VehicleClass;
    use crate::network::build_merge_network;
    use proptest::prelude::*;

    fn vehicle(id: u32, road: Road, lane: usize, x: f64, v: f64) -> VehicleState {
        VehicleState {
            id,
            class: VehicleClass::Human,
            road,
            lane,
            x,
            v,
            headway: 1.5,
            planned_entry: 0.0,
            actual_entry: Some(0.0),
            exit_time: None,
            distance: 0.0,
            last_lane_change: f64::NEG_INFINITY,
        }
    }

    #[test]
    fn empty_network() {
        let net = build_merge_network(&ScenarioConfig::single_lane()).unwrap();
        let obs = SegmentObservation::empty(&net, 0.0);
        assert_eq!(obs.density.len(), 21);
        assert!(obs.density.iter().all(|&k| k == 0.0));
        assert!(obs.mean_speed.iter().all(|&v| v == 31.29));
        assert_eq!(obs.features(&net, &IdmParams::default()).len(), 42);
    }

    #[test]
    fn packed_segment() {
        let net = build_merge_network(&ScenarioConfig::single_lane()).unwrap();
        let vs: Vec<_> = (0..10).map(|i| vehicle(i, Road::Mainline, 0, 305.0 + 7.0 * i as f64, 0.0)).collect();
        let obs = observe(&vs, &net, 1.0);
        assert!((obs.density[3] - 100.0).abs() < 1e-9);
        assert_eq!(obs.mean_speed[3], 0.0);
        let f = obs.features(&net, &IdmParams::default());
        assert!((f[21 + 3] - 100.0 / (1000.0 / 7.0)).abs() < 1e-12);
    }

    fn strategy() -> impl Strategy<Value = Vec<(bool, usize, f64, f64)>> {
        prop::collection::vec((any::<bool>(), 0usize..4, 0.0f64..1.0, 0.0f64..31.29), 0..120)
    }

    proptest! {
        #[test]
        fn matches_brute_force_binning(raw in strategy(), multi in any::<bool>()) {
            let cfg = if multi { ScenarioConfig::multi_lane() } else { ScenarioConfig::single_lane() };
            let net = build_merge_network(&cfg).unwrap();
            let vs: Vec<_> = raw.iter().enumerate().map(|(i, &(ramp, lane, frac, v))| {
                let road = if ramp { Road::Ramp } else { Road::Mainline };
                let lane = if ramp { 0 } else { lane % net.mainline_lanes };
                vehicle(i as u32, road, lane, frac * net.length(road), v)
            }).collect();
            let obs = observe(&vs, &net, 0.0);

            // oracle: scan each segment's extent independently
            for (seg, spec) in net.segments.iter().enumerate() {
                let members: Vec<&VehicleState> = vs.iter().filter(|v| {
                    if spec.is_ramp {
                        v.road == Road::Ramp
                    } else {
                        let last = seg + 1 == net.num_mainline_segments();
                        v.road == Road::Mainline && v.x >= spec.start && (v.x < spec.end || (last && v.x <= spec.end))
                    }
                }).collect();
                let lanes = if spec.is_ramp { 1.0 } else { net.mainline_lanes as f64 };
                let expect_k = members.len() as f64 / (spec.length() / 1000.0 * lanes);
                prop_assert_eq!(obs.density[seg], expect_k);
                prop_assert_eq!(obs.count[seg], members.len());
                if members.is_empty() {
                    prop_assert_eq!(obs.mean_speed[seg], 31.29);
                } else {
                    let mean = members.iter().map(|v| v.v).sum::<f64>() / members.len() as f64;
                    prop_assert!((obs.mean_speed[seg] - mean).abs() < 1e-12);
                }
            }
            prop_assert!((obs.implied_count(&net) - vs.len() as f64).abs() < 1e-9);
            prop_assert_eq!(obs.count.iter().sum::<usize>(), vs.len());

            let mut reversed = vs.clone();
            reversed.reverse();
            let again = observe(&reversed, &net, 0.0);
            prop_assert_eq!(&obs.density, &again.density);
            for (a, b) in obs.mean_speed.iter().zip(&again.mean_speed) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
