//! Episode records and their delimited-text export.
//!
//! `vehicles.csv` columns:
//! `id,class,origin,lane,planned_entry,actual_entry,exit_time,distance,free_flow_time,reward_sum`
//! (empty `actual_entry` = never inserted, empty `exit_time` = still on the
//! road or queued at the horizon).
//!
//! `steps.csv` columns:
//! `step,time,reward,queued,active,exited,min_gap,cmd_0..cmd_{k-1},speed_0..speed_{n-1},density_0..density_{n-1}`
//! with `time` the end of the step, speeds in m/s and densities in veh/km/lane.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::vehicle::VehicleClass;
use crate::error::{Error, Result};
use crate::network::Road;
use crate::sensing::SegmentObservation;

/// Timing and accumulated quantities of one scheduled vehicle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: u32,
    pub class: VehicleClass,
    pub origin: Road,
    pub lane: usize,
    pub planned_entry: f64,
    pub actual_entry: Option<f64>,
    pub exit_time: Option<f64>,
    /// Distance driven inside the network, m.
    pub distance: f64,
    /// Time the driven distance takes at the posted limits, s.
    pub free_flow_time: f64,
    /// Unscaled sum of this vehicle's reward terms, `sum (v / v_free - 1) dt`.
    pub reward_sum: f64,
}

impl VehicleRecord {
    pub fn completed(&self) -> bool {
        self.exit_time.is_some()
    }

    /// Entry delay, s; censored at `horizon` for vehicles never inserted.
    pub fn entry_delay(&self, horizon: f64) -> f64 {
        self.actual_entry.unwrap_or(horizon) - self.planned_entry
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// End of the step, s.
    pub time: f64,
    pub reward: f64,
    pub queued: usize,
    pub active: usize,
    /// Vehicles that have left the network so far.
    pub exited: usize,
    /// Vehicles whose planned entry is at or before `time`.
    pub due: usize,
    /// Smallest bumper-to-bumper gap on the road after the step.
    pub min_gap: Option<f64>,
    pub command: Vec<f64>,
    pub observation: SegmentObservation,
    pub state_hash: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub horizon: f64,
    pub step_length: f64,
    pub reward_scale: f64,
    pub schedule_digest: String,
    pub vehicles: Vec<VehicleRecord>,
    pub steps: Vec<StepRecord>,
    pub collisions: usize,
}

impl EpisodeRecord {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn max_queue(&self) -> usize {
        self.steps.iter().map(|s| s.queued).max().unwrap_or(0)
    }

    pub fn min_gap(&self) -> f64 {
        self.steps.iter().filter_map(|s| s.min_gap).fold(f64::INFINITY, f64::min)
    }

    /// Vehicles leaving the mainline end with `from < exit_time <= to`.
    pub fn exits_between(&self, from: f64, to: f64) -> usize {
        self.vehicles.iter().filter_map(|v| v.exit_time).filter(|&t| t > from && t <= to).count()
    }

    pub fn write_vehicles_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for v in &self.vehicles {
            w.serialize(v)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_steps_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let (k, n) = match self.steps.first() {
            Some(s) => (s.command.len(), s.observation.mean_speed.len()),
            None => (0, 0),
        };
        let mut header: Vec<String> =
            ["step", "time", "reward", "queued", "active", "exited", "min_gap"].iter().map(|s| s.to_string()).collect();
        header.extend((0..k).map(|i| format!("cmd_{i}")));
        header.extend((0..n).map(|i| format!("speed_{i}")));
        header.extend((0..n).map(|i| format!("density_{i}")));
        w.write_record(&header)?;
        for s in &self.steps {
            let mut row = vec![
                s.step.to_string(),
                s.time.to_string(),
                s.reward.to_string(),
                s.queued.to_string(),
                s.active.to_string(),
                s.exited.to_string(),
                s.min_gap.map(|g| g.to_string()).unwrap_or_default(),
            ];
            row.extend(s.command.iter().map(f64::to_string));
            row.extend(s.observation.mean_speed.iter().map(f64::to_string));
            row.extend(s.observation.density.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `vehicles.csv`, `steps.csv` and `record.json` into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.write_vehicles_csv(std::fs::File::create(dir.join("vehicles.csv"))?)?;
        self.write_steps_csv(std::fs::File::create(dir.join("steps.csv"))?)?;
        serde_json::to_writer(std::io::BufWriter::new(std::fs::File::create(dir.join("record.json"))?), self)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

/// Per-step observations read back from a `steps.csv` export.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTable {
    pub time: Vec<f64>,
    pub mean_speed: Vec<Vec<f64>>,
    pub density: Vec<Vec<f64>>,
}

impl StepTable {
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let cols = |prefix: &str| -> Vec<usize> {
            header.iter().enumerate().filter(|(_, h)| h.starts_with(prefix)).map(|(i, _)| i).collect()
        };
        let speed_cols = cols("speed_");
        let density_cols = cols("density_");
        let time_col = header
            .iter()
            .position(|h| h == "time")
            .ok_or_else(|| Error::Config("steps table has no time column".into()))?;
        if speed_cols.is_empty() || speed_cols.len() != density_cols.len() {
            return Err(Error::Config("steps table has no per-segment observations".into()));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Config(format!("bad number '{s}' in steps table")))
        };
        let mut table = StepTable { time: Vec::new(), mean_speed: Vec::new(), density: Vec::new() };
        for row in r.records() {
            let row = row?;
            table.time.push(parse(&row[time_col])?);
            table.mean_speed.push(speed_cols.iter().map(|&i| parse(&row[i])).collect::<Result<_>>()?);
            table.density.push(density_cols.iter().map(|&i| parse(&row[i])).collect::<Result<_>>()?);
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn from_record(record: &EpisodeRecord) -> Self {
        StepTable {
            time: record.steps.iter().map(|s| s.time).collect(),
            mean_speed: record.steps.iter().map(|s| s.observation.mean_speed.clone()).collect(),
            density: record.steps.iter().map(|s| s.observation.density.clone()).collect(),
        }
    }
}
