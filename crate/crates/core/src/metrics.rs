//! Delay-aware congestion metrics.
//!
//! A vehicle's average speed counts the time it spent waiting to enter at
//! zero speed, so a controller cannot improve the metric by keeping vehicles
//! out of the network. The per-step reward measures the same delay relative
//! to free flow; summed over an episode it equals minus the total time delay.

use serde::{Deserialize, Serialize};

use crate::engine::{EpisodeRecord, VehicleRecord};
use crate::error::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Reward scale `1/C`.
    pub reward_scale: f64,
    pub horizon: f64,
    /// Free-flow speed (posted limit) on the mainline and the ramp, m/s.
    pub v_free_mainline: f64,
    pub v_free_ramp: f64,
}

/// Timing of one scheduled vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleTiming {
    pub distance: f64,
    pub planned_entry: f64,
    pub exit_time: Option<f64>,
    /// Time the driven distance takes at free-flow speed, s.
    pub free_flow_time: f64,
}

impl From<&VehicleRecord> for VehicleTiming {
    fn from(r: &VehicleRecord) -> Self {
        Self {
            distance: r.distance,
            planned_entry: r.planned_entry,
            exit_time: r.exit_time,
            free_flow_time: r.free_flow_time,
        }
    }
}

impl VehicleTiming {
    /// Delay against free flow, `(T_f - T_s) - T_free`; `None` until exit.
    pub fn delay(&self) -> Option<f64> {
        self.exit_time.map(|tf| tf - self.planned_entry - self.free_flow_time)
    }
}

/// Distance over time since the planned entry, censored at `horizon`.
pub fn average_speed(t: &VehicleTiming, horizon: f64) -> Result<f64> {
    let end = t.exit_time.map_or(horizon, |tf| tf.min(horizon));
    let elapsed = end - t.planned_entry;
    if elapsed.is_nan() || elapsed <= 0.0 {
        return Err(Error::Metric(format!("no elapsed time between planned entry {} and {end}", t.planned_entry)));
    }
    Ok(t.distance / elapsed)
}

/// Average speed of every scheduled vehicle, in id order.
pub fn average_speeds(record: &EpisodeRecord) -> Result<Vec<f64>> {
    record.vehicles.iter().map(|v| average_speed(&VehicleTiming::from(v), record.horizon)).collect()
}

/// Mean relative speed change of `control` against `baseline`, vehicle by
/// vehicle.
pub fn delta_v(control: &[f64], baseline: &[f64]) -> Result<f64> {
    if control.len() != baseline.len() {
        return Err(Error::Metric(format!(
            "{} control vehicles against {} baseline vehicles",
            control.len(),
            baseline.len()
        )));
    }
    if control.is_empty() {
        return Err(Error::Metric("no vehicles".into()));
    }
    let mut sum = 0.0;
    for (c, b) in control.iter().zip(baseline) {
        if *b == 0.0 {
            return Err(Error::Metric("baseline vehicle with zero average speed".into()));
        }
        sum += (c - b) / b;
    }
    Ok(sum / control.len() as f64)
}

/// [`delta_v`] over the vehicles whose baseline speed is positive. Vehicles
/// scheduled in the last moments of an episode may never move in either run.
pub fn delta_v_moving(control: &[f64], baseline: &[f64]) -> Result<(f64, usize)> {
    if control.len() != baseline.len() {
        return Err(Error::Metric(format!(
            "{} control vehicles against {} baseline vehicles",
            control.len(),
            baseline.len()
        )));
    }
    let (c, b): (Vec<f64>, Vec<f64>) =
        control.iter().zip(baseline).filter(|(_, b)| **b > 0.0).map(|(c, b)| (*c, *b)).unzip();
    let excluded = control.len() - c.len();
    Ok((delta_v(&c, &b)?, excluded))
}

/// One vehicle's contribution to a step reward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardTerm {
    /// Speed, 0 while waiting to enter.
    pub speed: f64,
    pub v_free: f64,
}

/// Scaled time-delay reward of one step over all vehicles that are due and
/// have not exited.
pub fn step_reward(terms: &[RewardTerm], scale: f64, dt: f64) -> f64 {
    scale * terms.iter().map(|t| (t.speed - t.v_free) / t.v_free * dt).sum::<f64>()
}

/// Residual `|sum r / scale + sum dT|` over the vehicles that completed their
/// route, using each vehicle's accumulated reward terms.
pub fn episode_delay_identity(record: &EpisodeRecord) -> Result<f64> {
    if record.vehicles.is_empty() {
        return Ok(0.0);
    }
    let completed: Vec<&VehicleRecord> = record.vehicles.iter().filter(|v| v.completed()).collect();
    if completed.is_empty() {
        return Err(Error::Metric("no vehicle completed its route".into()));
    }
    let reward: f64 = completed.iter().map(|v| v.reward_sum).sum();
    let delay: f64 = completed.iter().map(|v| VehicleTiming::from(*v).delay().expect("completed")).sum();
    Ok((reward + delay).abs())
}

/// Total delay of completed vehicles, s.
pub fn total_delay(record: &EpisodeRecord) -> f64 {
    record.vehicles.iter().filter_map(|v| VehicleTiming::from(v).delay()).sum()
}

/// Sample mean with a normal-approximation 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub std_dev: f64,
    pub n: usize,
    pub low: f64,
    pub high: f64,
}

impl MeanCi {
    /// Uses the unbiased sample standard deviation; a single sample gives a
    /// zero-width interval.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_dev: f64::NAN, n, low: f64::NAN, high: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_dev =
            if n > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        let half = Z_95 * std_dev / (n as f64).sqrt();
        Self { mean, std_dev, n, low: mean - half, high: mean + half }
    }

    pub fn half_width(&self) -> f64 {
        (self.high - self.low) / 2.0
    }

    pub fn excludes_zero(&self) -> bool {
        self.low > 0.0 || self.high < 0.0
    }

    pub fn overlaps(&self, other: &MeanCi) -> bool {
        self.low <= other.high && other.low <= self.high
    }
}
