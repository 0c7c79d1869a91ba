use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::vehicle::VehicleClass;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::network::Road;
use crate::rng::{stream_rng, Stream};

/// One planned vehicle; every route runs from its origin to the mainline end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledVehicle {
    pub id: u32,
    pub class: VehicleClass,
    pub origin: Road,
    pub lane: usize,
    pub planned_entry: f64,
}

/// Per-vehicle route file contents, ordered by planned entry time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DemandSchedule {
    vehicles: Vec<ScheduledVehicle>,
}

/// Uniform arrivals at `interval` starting at `offset` within `[start, end)`.
fn arrivals(start: f64, end: f64, interval: f64, offset: f64) -> impl Iterator<Item = f64> {
    (0..).map(move |k| start + offset + interval * k as f64).take_while(move |&t| t < end)
}

/// Builds the demand for one episode.
///
/// Each mainline lane receives vehicles every `3600 / inflow` seconds from a
/// random phase in `[0, interval)`; the ramp does the same inside the merge
/// window. Exactly `round(cav_fraction * N)` vehicles, chosen uniformly at
/// random, are CAVs.
pub fn generate_demand(cfg: &ScenarioConfig, seed: u64) -> Result<DemandSchedule> {
    let d = &cfg.demand;
    if !(0.0..=1.0).contains(&d.cav_fraction) {
        return Err(Error::Config(format!("CAV fraction {} outside [0, 1]", d.cav_fraction)));
    }
    let horizon = cfg.simulation.horizon;
    let mut phase_rng = stream_rng(seed, Stream::Demand);
    let mut planned: Vec<(f64, Road, usize)> = Vec::new();

    if d.mainline_inflow_per_lane > 0.0 {
        let interval = 3600.0 / d.mainline_inflow_per_lane;
        for lane in 0..cfg.geometry.mainline_lanes {
            let offset = phase_rng.random_range(0.0..interval);
            planned.extend(arrivals(0.0, horizon, interval, offset).map(|t| (t, Road::Mainline, lane)));
        }
    }
    if d.ramp_inflow > 0.0 && d.merge_duration > 0.0 {
        let interval = 3600.0 / d.ramp_inflow;
        let offset = phase_rng.random_range(0.0..interval);
        let end = (d.merge_start + d.merge_duration).min(horizon);
        planned.extend(arrivals(d.merge_start, end, interval, offset).map(|t| (t, Road::Ramp, 0)));
    }

    planned.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1 == Road::Ramp).cmp(&(b.1 == Road::Ramp))).then(a.2.cmp(&b.2)));

    let n = planned.len();
    let num_cav = (d.cav_fraction * n as f64).round() as usize;
    let mut classes: Vec<VehicleClass> =
        (0..n).map(|i| if i < num_cav { VehicleClass::Cav } else { VehicleClass::Human }).collect();
    classes.shuffle(&mut stream_rng(seed, Stream::VehicleClass));

    let vehicles = planned
        .into_iter()
        .zip(classes)
        .enumerate()
        .map(|(i, ((t, origin, lane), class))| ScheduledVehicle { id: i as u32, class, origin, lane, planned_entry: t })
        .collect();
    Ok(DemandSchedule { vehicles })
}

impl DemandSchedule {
    /// Vehicles must be sorted by planned entry and carry ids `0..n` in order.
    pub fn new(vehicles: Vec<ScheduledVehicle>) -> Result<Self> {
        for (i, v) in vehicles.iter().enumerate() {
            if v.id as usize != i {
                return Err(Error::Config(format!("vehicle ids must be 0..n in order (row {i})")));
            }
            if !(v.planned_entry.is_finite() && v.planned_entry >= 0.0) {
                return Err(Error::Config(format!("vehicle {i} has an invalid entry time")));
            }
        }
        if vehicles.windows(2).any(|w| w[1].planned_entry < w[0].planned_entry) {
            return Err(Error::Config("planned entries must be non-decreasing".into()));
        }
        Ok(Self { vehicles })
    }

    pub fn vehicles(&self) -> &[ScheduledVehicle] {
        &self.vehicles
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn count(&self, origin: Road) -> usize {
        self.vehicles.iter().filter(|v| v.origin == origin).count()
    }

    pub fn cav_count(&self) -> usize {
        self.vehicles.iter().filter(|v| v.class == VehicleClass::Cav).count()
    }

    /// Same schedule with every vehicle human-driven.
    pub fn all_human(&self) -> Self {
        let vehicles =
            self.vehicles.iter().map(|v| ScheduledVehicle { class: VehicleClass::Human, ..v.clone() }).collect();
        Self { vehicles }
    }

    /// SHA-256 over the exported route file.
    pub fn digest(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        Sha256::digest(&buf).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Digest ignoring vehicle classes: arrivals only.
    pub fn arrivals_digest(&self) -> String {
        self.all_human().digest()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for v in &self.vehicles {
            w.serialize(v)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let vehicles = r.deserialize().collect::<std::result::Result<Vec<ScheduledVehicle>, _>>()?;
        Self::new(vehicles)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mainline_count_single_lane() {
        let mut cfg = ScenarioConfig::single_lane();
        cfg.demand.ramp_inflow = 0.0;
        for seed in 0..20 {
            let s = generate_demand(&cfg, seed).unwrap();
            assert_eq!(s.count(Road::Mainline), 250);
            assert_eq!(s.count(Road::Ramp), 0);
        }
        let with_ramp = generate_demand(&ScenarioConfig::single_lane(), 3).unwrap();
        assert_eq!(with_ramp.count(Road::Ramp), 15);
        let multi = generate_demand(&ScenarioConfig::multi_lane(), 3).unwrap();
        assert_eq!(multi.count(Road::Mainline), 1000);
        assert_eq!(multi.count(Road::Ramp), 25);
    }

    #[test]
    fn arrivals_uniform_per_lane() {
        let s = generate_demand(&ScenarioConfig::multi_lane(), 9).unwrap();
        for lane in 0..4 {
            let times: Vec<f64> = s
                .vehicles()
                .iter()
                .filter(|v| v.origin == Road::Mainline && v.lane == lane)
                .map(|v| v.planned_entry)
                .collect();
            assert!(times[0] < 2.0);
            for w in times.windows(2) {
                assert!((w[1] - w[0] - 2.0).abs() < 1e-9);
            }
        }
        let ramp: Vec<f64> = s.vehicles().iter().filter(|v| v.origin == Road::Ramp).map(|v| v.planned_entry).collect();
        assert!(ramp.iter().all(|&t| (200.0..250.0).contains(&t)));
    }

    #[test]
    fn cav_fraction_bounds() {
        let mut cfg = ScenarioConfig::single_lane();
        cfg.demand.cav_fraction = 0.0;
        assert_eq!(generate_demand(&cfg, 1).unwrap().cav_count(), 0);
        for f in [0.2, 0.4, 0.6, 0.8, 1.0] {
            cfg.demand.cav_fraction = f;
            let s = generate_demand(&cfg, 5).unwrap();
            let expected = f * s.len() as f64;
            assert!((s.cav_count() as f64 - expected).abs() <= 1.0);
        }
        cfg.demand.cav_fraction = 1.5;
        assert!(generate_demand(&cfg, 1).is_err());
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let mut cfg = ScenarioConfig::single_lane();
        cfg.demand.cav_fraction = 0.4;
        let a = generate_demand(&cfg, 42).unwrap();
        let b = generate_demand(&cfg, 42).unwrap();
        let c = generate_demand(&cfg, 43).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn csv_round_trip() {
        let s = generate_demand(&ScenarioConfig::multi_lane(), 2).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with("id,class,origin,lane,planned_entry\n"));
        assert_eq!(DemandSchedule::read_csv(&buf[..]).unwrap(), s);
    }

    #[test]
    fn ordered_ids_required() {
        let v = |id, t| ScheduledVehicle {
            id,
            class: VehicleClass::Human,
            origin: Road::Mainline,
            lane: 0,
            planned_entry: t,
        };
        assert!(DemandSchedule::new(vec![v(0, 1.0), v(1, 0.5)]).is_err());
        assert!(DemandSchedule::new(vec![v(1, 0.0)]).is_err());
        assert!(DemandSchedule::new(vec![v(0, 0.0), v(1, 0.5)]).is_ok());
    }
}
