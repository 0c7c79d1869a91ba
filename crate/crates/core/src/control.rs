//! Segment-addressed time-headway commands and the controllers that issue them.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ControlConfig, ScenarioConfig, DEFAULT_HEADWAY, MAX_HEADWAY};
use crate::dynamics::IdmParams;
use crate::engine::VehicleState;
use crate::error::{Error, Result};
use crate::experiment::{baselines, evaluate_cells};
use crate::learn::PolicyParameters;
use crate::metrics::MeanCi;
use crate::network::{Road, RoadNetwork};
use crate::rng::{stream_rng, Stream};
use crate::sensing::SegmentObservation;

/// Desired time-headway per controlled segment, upstream first. Values lie
/// in `[1.5, 6]` s: commands can only lengthen the default headway.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadwayCommand(Vec<f64>);

impl HeadwayCommand {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(DEFAULT_HEADWAY..=MAX_HEADWAY).contains(*v)) {
            return Err(Error::Config(format!("headway {bad} outside [1.5, 6] s")));
        }
        Ok(Self(values))
    }

    /// Clips arbitrary (possibly non-finite) values into `[1.5, 6]`.
    pub fn clipped(raw: &[f64]) -> Self {
        Self(
            raw.iter()
                .map(|v| if v.is_nan() { DEFAULT_HEADWAY } else { v.clamp(DEFAULT_HEADWAY, MAX_HEADWAY) })
                .collect(),
        )
    }

    pub fn uniform(segments: usize, headway: f64) -> Result<Self> {
        Self::new(vec![headway; segments])
    }

    pub fn default_for(segments: usize) -> Self {
        Self(vec![DEFAULT_HEADWAY; segments])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sets every vehicle's active headway: CAVs on a controlled mainline segment
/// take that segment's command, every other vehicle the default.
pub fn apply_commands(vehicles: &mut [VehicleState], network: &RoadNetwork, cmd: &HeadwayCommand) {
    for v in vehicles {
        v.headway = DEFAULT_HEADWAY;
        if !v.is_cav() || v.road != Road::Mainline {
            continue;
        }
        let x = v.x.clamp(0.0, network.mainline_length);
        let slot = network.segment_of(x, false).ok().and_then(|seg| network.control_slot(seg));
        if let Some(value) = slot.and_then(|k| cmd.values().get(k)) {
            v.headway = *value;
        }
    }
}

/// What a controller sees at each invocation.
pub struct ControlContext<'a> {
    pub time: f64,
    pub step: usize,
    pub vehicles: &'a [VehicleState],
    pub network: &'a RoadNetwork,
    pub observation: &'a SegmentObservation,
    pub config: &'a ControlConfig,
    pub idm: &'a IdmParams,
}

pub trait Controller: Send {
    fn act(&mut self, ctx: &ControlContext<'_>) -> Result<HeadwayCommand>;

    /// Whether queued vehicles may enter at `time`. Real controllers never
    /// block entries; test harnesses use this to exercise the delay metrics.
    fn admits_entries(&self, _time: f64) -> bool {
        true
    }
}

/// Always commands the default headway; equivalent to human driving.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullController;

impl Controller for NullController {
    fn act(&mut self, ctx: &ControlContext<'_>) -> Result<HeadwayCommand> {
        Ok(HeadwayCommand::default_for(ctx.network.controlled_segments().len()))
    }
}

/// Commands `headway` on every controlled segment while a vehicle occupies
/// the last `activation_distance` metres of the ramp.
#[derive(Clone, Copy, Debug)]
pub struct FixedController {
    pub headway: f64,
}

impl FixedController {
    pub fn new(headway: f64) -> Result<Self> {
        if !(DEFAULT_HEADWAY..=MAX_HEADWAY).contains(&headway) {
            return Err(Error::Config(format!("fixed headway {headway} outside [1.5, 6] s")));
        }
        Ok(Self { headway })
    }
}

pub fn fixed_controller_act(
    vehicles: &[VehicleState],
    network: &RoadNetwork,
    activation_distance: f64,
    headway: f64,
) -> HeadwayCommand {
    let window_start = network.ramp_length - activation_distance;
    let active = vehicles.iter().any(|v| v.road == Road::Ramp && v.x >= window_start);
    let value = if active { headway } else { DEFAULT_HEADWAY };
    HeadwayCommand(vec![value; network.controlled_segments().len()])
}

impl Controller for FixedController {
    fn act(&mut self, ctx: &ControlContext<'_>) -> Result<HeadwayCommand> {
        Ok(fixed_controller_act(ctx.vehicles, ctx.network, ctx.config.activation_distance, self.headway))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    /// Sample from the Gaussian (training).
    Stochastic,
    /// Use the mean (evaluation).
    Deterministic,
}

/// One policy invocation, kept for training.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub step: usize,
    pub features: Vec<f64>,
    /// Unclipped action; log-probabilities refer to this value.
    pub raw_action: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

/// Forwards the normalised observation through the policy and clips the
/// resulting action into a valid command.
pub fn policy_controller_act(
    features: &[f64],
    policy: &PolicyParameters,
    mode: ActionMode,
    rng: &mut ChaCha8Rng,
) -> Result<(HeadwayCommand, Decision)> {
    let out = policy.forward(features)?;
    let raw_action = match mode {
        ActionMode::Deterministic => out.mean.clone(),
        ActionMode::Stochastic => out.sample(rng),
    };
    let log_prob = out.log_prob(&raw_action);
    let cmd = HeadwayCommand::clipped(&raw_action);
    let decision = Decision { step: 0, features: features.to_vec(), raw_action, log_prob, value: out.value };
    Ok((cmd, decision))
}

/// Dynamic headway controller backed by a policy network.
pub struct PolicyController {
    policy: Arc<PolicyParameters>,
    mode: ActionMode,
    rng: ChaCha8Rng,
    decisions: Vec<Decision>,
}

impl PolicyController {
    /// `seed` selects the action-sampling stream; it is ignored in
    /// deterministic mode.
    pub fn new(policy: Arc<PolicyParameters>, mode: ActionMode, seed: u64) -> Self {
        Self { policy, mode, rng: stream_rng(seed, Stream::Policy), decisions: Vec::new() }
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn take_decisions(&mut self) -> Vec<Decision> {
        std::mem::take(&mut self.decisions)
    }
}

impl Controller for PolicyController {
    fn act(&mut self, ctx: &ControlContext<'_>) -> Result<HeadwayCommand> {
        let features = ctx.observation.features(ctx.network, ctx.idm);
        let (cmd, mut decision) = policy_controller_act(&features, &self.policy, self.mode, &mut self.rng)?;
        decision.step = ctx.step;
        self.decisions.push(decision);
        Ok(cmd)
    }
}

/// One grid value of a fixed-headway sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub headway: f64,
    pub delta_v: MeanCi,
    pub per_seed: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub best_headway: f64,
}

impl SweepResult {
    pub fn best(&self) -> &SweepRow {
        self.rows.iter().find(|r| r.headway == self.best_headway).expect("best headway is one of the rows")
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["headway", "mean_delta_v", "ci_low", "ci_high", "seeds", "best"])?;
        for r in &self.rows {
            w.write_record([
                r.headway.to_string(),
                r.delta_v.mean.to_string(),
                r.delta_v.low.to_string(),
                r.delta_v.high.to_string(),
                r.per_seed.len().to_string(),
                (r.headway == self.best_headway).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Picks the grid value with the largest mean; ties go to the smaller headway.
pub fn select_best(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .min_by(|a, b| b.delta_v.mean.total_cmp(&a.delta_v.mean).then(a.headway.total_cmp(&b.headway)))
        .map(|r| r.headway)
}

/// Evaluates the fixed controller at every grid value against paired human
/// baselines and returns per-value ΔV means with 95% intervals.
pub fn sweep_fixed_headway(cfg: &ScenarioConfig, grid: &[f64], seeds: &[u64]) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty headway grid".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    for &h in grid {
        FixedController::new(h)?;
    }
    let bases = baselines(cfg, seeds)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &headway in grid {
        let cells = evaluate_cells(cfg, &bases, |_| Box::new(FixedController { headway }))?;
        let per_seed: Vec<f64> = cells.iter().map(|(c, _)| c.delta_v).collect();
        rows.push(SweepRow { headway, delta_v: MeanCi::from_samples(&per_seed), per_seed });
    }
    let best_headway = select_best(&rows).expect("non-empty grid");
    Ok(SweepResult { rows, best_headway })
}
