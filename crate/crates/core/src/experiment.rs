//! Multi-seed experiment protocol: paired baselines, controller cells,
//! time-space grids and the headway versus speed-limit comparison.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::control::{
    sweep_fixed_headway, ActionMode, ControlContext, Controller, FixedController, HeadwayCommand, NullController,
    PolicyController, SweepResult,
};
use crate::engine::{generate_demand, run_episode_with, EpisodeOptions, EpisodeRecord, SpeedLimitZone, StepTable};
use crate::error::{Error, Result};
use crate::learn::PolicyParameters;
use crate::metrics::{average_speeds, delta_v_moving, MeanCi};
use crate::network::{build_merge_network, RoadNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    SingleLane,
    MultiLane,
}

impl ScenarioKind {
    pub fn config(self) -> ScenarioConfig {
        match self {
            ScenarioKind::SingleLane => ScenarioConfig::single_lane(),
            ScenarioKind::MultiLane => ScenarioConfig::multi_lane(),
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-lane" | "single" => Ok(Self::SingleLane),
            "multi-lane" | "multi" => Ok(Self::MultiLane),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Which controller drives the CAVs of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ControllerSpec {
    Human,
    Fixed(f64),
    /// Fixed controller at the best value of a sweep grid.
    FixedSweep,
    Policy(PathBuf),
}

impl FromStr for ControllerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "human" => Ok(Self::Human),
            Some(("fixed", "sweep")) => Ok(Self::FixedSweep),
            Some(("fixed", t)) => {
                let t: f64 = t.parse().map_err(|_| Error::Config(format!("bad headway '{t}'")))?;
                FixedController::new(t)?;
                Ok(Self::Fixed(t))
            }
            Some(("policy", path)) if !path.is_empty() => Ok(Self::Policy(PathBuf::from(path))),
            _ => Err(Error::Config(format!("unknown controller '{s}'"))),
        }
    }
}

impl fmt::Display for ControllerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Human => write!(f, "human"),
            Self::Fixed(t) => write!(f, "fixed:{t}"),
            Self::FixedSweep => write!(f, "fixed:sweep"),
            Self::Policy(p) => write!(f, "policy:{}", p.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub fractions: Vec<f64>,
    pub controller: ControllerSpec,
    pub seeds: usize,
    /// Grid for `fixed:sweep`.
    pub sweep_grid: Vec<f64>,
    pub out_dir: Option<PathBuf>,
    /// Also write every episode record.
    pub save_records: bool,
}

impl ExperimentSpec {
    pub fn new(scenario: ScenarioConfig, controller: ControllerSpec) -> Self {
        Self {
            scenario,
            fractions: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            controller,
            seeds: 30,
            sweep_grid: vec![2.0, 2.5, 3.0, 3.5],
            out_dir: None,
            save_records: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() || self.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config("fractions must be a non-empty list within [0, 1]".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.scenario.validate()
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).collect()
    }
}

/// Human-driven run of a seed's demand, shared by every controller cell of
/// that seed.
#[derive(Clone, Debug)]
pub struct Baseline {
    pub seed: u64,
    pub speeds: Vec<f64>,
    pub record: EpisodeRecord,
    arrivals: String,
}

impl Baseline {
    pub fn run(cfg: &ScenarioConfig, network: &RoadNetwork, seed: u64) -> Result<Self> {
        let schedule = generate_demand(cfg, seed)?;
        let arrivals = schedule.arrivals_digest();
        let record = run_episode_with(
            cfg,
            network,
            schedule.all_human(),
            &mut NullController,
            seed,
            &EpisodeOptions::default(),
        )?;
        Ok(Self { seed, speeds: average_speeds(&record)?, record, arrivals })
    }
}

/// Outcome of one (controller, seed) cell against its paired baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub seed: u64,
    pub delta_v: f64,
    /// Vehicles that never moved in the baseline and are left out of ΔV.
    pub excluded: usize,
    pub control_return: f64,
    pub baseline_return: f64,
    pub control_mean_speed: f64,
    pub baseline_mean_speed: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Runs `controller` on the seed's demand and compares it with `baseline`.
pub fn evaluate_against(
    cfg: &ScenarioConfig,
    network: &RoadNetwork,
    baseline: &Baseline,
    controller: &mut dyn Controller,
) -> Result<(CellOutcome, EpisodeRecord)> {
    let schedule = generate_demand(cfg, baseline.seed)?;
    if schedule.arrivals_digest() != baseline.arrivals {
        return Err(Error::Metric("paired runs do not share their arrivals".into()));
    }
    let record = run_episode_with(cfg, network, schedule, controller, baseline.seed, &EpisodeOptions::default())?;
    let speeds = average_speeds(&record)?;
    let (delta_v, excluded) = delta_v_moving(&speeds, &baseline.speeds)?;
    let outcome = CellOutcome {
        seed: baseline.seed,
        delta_v,
        excluded,
        control_return: record.total_reward(),
        baseline_return: baseline.record.total_reward(),
        control_mean_speed: mean(&speeds),
        baseline_mean_speed: mean(&baseline.speeds),
    };
    Ok((outcome, record))
}

/// One controller cell with a fresh baseline.
pub fn paired_delta_v(cfg: &ScenarioConfig, controller: &mut dyn Controller, seed: u64) -> Result<CellOutcome> {
    let network = build_merge_network(cfg)?;
    let baseline = Baseline::run(cfg, &network, seed)?;
    Ok(evaluate_against(cfg, &network, &baseline, controller)?.0)
}

/// Baselines for every seed, computed in parallel.
pub fn baselines(cfg: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<Baseline>> {
    let network = build_merge_network(cfg)?;
    seeds.par_iter().map(|&s| Baseline::run(cfg, &network, s)).collect()
}

/// Evaluates a controller built per seed by `make` against `baselines`.
pub fn evaluate_cells<F>(
    cfg: &ScenarioConfig,
    baselines: &[Baseline],
    make: F,
) -> Result<Vec<(CellOutcome, EpisodeRecord)>>
where
    F: Fn(u64) -> Box<dyn Controller> + Sync,
{
    let network = build_merge_network(cfg)?;
    baselines.par_iter().map(|b| evaluate_against(cfg, &network, b, make(b.seed).as_mut())).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionReport {
    pub fraction: f64,
    pub controller: String,
    /// Selected value when the controller is `fixed:sweep`.
    pub sweep: Option<SweepResult>,
    pub delta_v: MeanCi,
    pub control_return: MeanCi,
    pub baseline_return: MeanCi,
    pub cells: Vec<CellOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub scenario_digest: String,
    pub seeds: usize,
    pub fractions: Vec<FractionReport>,
}

fn load_policy(path: &Path) -> Result<Arc<PolicyParameters>> {
    let p = if path.is_dir() { path.join("policy.json") } else { path.to_path_buf() };
    Ok(Arc::new(PolicyParameters::load(p)?))
}

/// Runs every (fraction, seed) cell of `spec` with its paired baseline.
pub fn simulate(spec: &ExperimentSpec) -> Result<SimulateReport> {
    spec.validate()?;
    let seeds = spec.seed_list();
    let policy = match &spec.controller {
        ControllerSpec::Policy(path) => Some(load_policy(path)?),
        _ => None,
    };
    let mut fractions = Vec::new();
    for &fraction in &spec.fractions {
        let mut cfg = spec.scenario.clone();
        cfg.demand.cav_fraction = fraction;
        let bases = baselines(&cfg, &seeds)?;
        let (headway, sweep) = match &spec.controller {
            ControllerSpec::FixedSweep => {
                let sweep = sweep_fixed_headway(&cfg, &spec.sweep_grid, &seeds)?;
                (Some(sweep.best_headway), Some(sweep))
            }
            ControllerSpec::Fixed(t) => (Some(*t), None),
            _ => (None, None),
        };
        let cells = evaluate_cells(&cfg, &bases, |seed| -> Box<dyn Controller> {
            match (&spec.controller, headway, &policy) {
                (ControllerSpec::Human, ..) => Box::new(NullController),
                (_, Some(t), _) => Box::new(FixedController { headway: t }),
                (_, None, Some(p)) => Box::new(PolicyController::new(p.clone(), ActionMode::Deterministic, seed)),
                _ => unreachable!("controller resolved above"),
            }
        })?;
        if let Some(dir) = &spec.out_dir {
            if spec.save_records {
                for ((cell, record), base) in cells.iter().zip(&bases) {
                    let cell_dir = dir.join(format!("p{fraction}")).join(format!("seed{}", cell.seed));
                    record.save_dir(cell_dir.join("control"))?;
                    base.record.save_dir(cell_dir.join("baseline"))?;
                }
            }
        }
        let outcomes: Vec<CellOutcome> = cells.into_iter().map(|(c, _)| c).collect();
        let pick = |f: fn(&CellOutcome) -> f64| MeanCi::from_samples(&outcomes.iter().map(f).collect::<Vec<_>>());
        fractions.push(FractionReport {
            fraction,
            controller: spec.controller.to_string(),
            sweep,
            delta_v: pick(|c| c.delta_v),
            control_return: pick(|c| c.control_return),
            baseline_return: pick(|c| c.baseline_return),
            cells: outcomes,
        });
    }
    let report = SimulateReport { scenario_digest: spec.scenario.digest(), seeds: spec.seeds, fractions };
    if let Some(dir) = &spec.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        report.write_summary_csv(std::fs::File::create(dir.join("summary.csv"))?)?;
    }
    Ok(report)
}

impl SimulateReport {
    pub fn write_summary_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fraction", "controller", "headway", "mean_delta_v", "ci_low", "ci_high", "seeds"])?;
        for f in &self.fractions {
            w.write_record([
                f.fraction.to_string(),
                f.controller.clone(),
                f.sweep.as_ref().map(|s| s.best_headway.to_string()).unwrap_or_default(),
                f.delta_v.mean.to_string(),
                f.delta_v.low.to_string(),
                f.delta_v.high.to_string(),
                f.delta_v.n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// Mean speed, m/s.
    Speed,
    /// Density times speed, veh/h/lane.
    Throughput,
    /// veh/km/lane.
    Density,
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed" => Ok(Self::Speed),
            "throughput" => Ok(Self::Throughput),
            "density" => Ok(Self::Density),
            other => Err(Error::Config(format!("unknown quantity '{other}'"))),
        }
    }
}

/// Time-binned values per segment; row `i` covers `(times[i] - bin, times[i]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub quantity: Quantity,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn timespace_grid(table: &StepTable, quantity: Quantity, bin: f64) -> Result<Grid> {
    if bin.is_nan() || bin <= 0.0 {
        return Err(Error::Config("time bin must be positive".into()));
    }
    let segments = table.mean_speed.first().map_or(0, Vec::len);
    let mut times: Vec<f64> = Vec::new();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for (i, &t) in table.time.iter().enumerate() {
        let b = ((t / bin).ceil() as usize).saturating_sub(1);
        while times.len() <= b {
            times.push((times.len() + 1) as f64 * bin);
            sums.push(vec![0.0; segments]);
            counts.push(0);
        }
        for ((sum, v), k) in sums[b].iter_mut().zip(&table.mean_speed[i]).zip(&table.density[i]) {
            *sum += match quantity {
                Quantity::Speed => *v,
                Quantity::Density => *k,
                Quantity::Throughput => k * v * 3.6,
            };
        }
        counts[b] += 1;
    }
    let (times, values) = times
        .into_iter()
        .zip(sums)
        .zip(counts)
        .filter(|(_, c)| *c > 0)
        .map(|((t, s), c)| (t, s.into_iter().map(|x| x / c as f64).collect()))
        .unzip();
    Ok(Grid { quantity, times, values })
}

impl Grid {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let segments = self.values.first().map_or(0, Vec::len);
        let mut header = vec!["time".to_string()];
        header.extend((0..segments).map(|s| format!("seg_{s}")));
        w.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Commands `headway` on every controlled segment during `[start, end)`.
#[derive(Clone, Copy, Debug)]
pub struct WindowedHeadway {
    pub headway: f64,
    pub start: f64,
    pub end: f64,
}

impl Controller for WindowedHeadway {
    fn act(&mut self, ctx: &ControlContext<'_>) -> Result<HeadwayCommand> {
        let k = ctx.network.controlled_segments().len();
        let on = ctx.time >= self.start && ctx.time < self.end;
        HeadwayCommand::uniform(k, if on { self.headway } else { crate::config::DEFAULT_HEADWAY })
    }
}

/// Constant headway against constant speed limit on the controlled stretch
/// of a single-lane road without ramp traffic, every vehicle a CAV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig2cSetup {
    pub inflow: f64,
    pub start: f64,
    pub duration: f64,
    pub headway: f64,
    pub speed_limit: f64,
    pub horizon: f64,
    /// Moving-average window for the downstream density ratio, s.
    pub smoothing: f64,
    /// Transient after the command onset ignored by the ratio check, s.
    pub transient: f64,
    pub seed: u64,
}

impl Default for Fig2cSetup {
    fn default() -> Self {
        Self {
            inflow: 1500.0,
            start: 200.0,
            duration: 100.0,
            headway: 3.0,
            speed_limit: 15.0,
            horizon: 400.0,
            smoothing: 5.0,
            transient: 10.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fig2cOutcome {
    pub setup: Fig2cSetup,
    pub uncontrolled: EpisodeRecord,
    pub headway: EpisodeRecord,
    pub speed_limit: EpisodeRecord,
    /// The three segments just downstream of the controlled stretch.
    pub downstream: Vec<usize>,
}

impl Fig2cSetup {
    pub fn scenario(&self) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::single_lane();
        cfg.demand.mainline_inflow_per_lane = self.inflow;
        cfg.demand.ramp_inflow = 0.0;
        cfg.demand.cav_fraction = 1.0;
        cfg.simulation.horizon = self.horizon;
        cfg
    }

    pub fn run(&self) -> Result<Fig2cOutcome> {
        let cfg = self.scenario();
        let network = build_merge_network(&cfg)?;
        let schedule = generate_demand(&cfg, self.seed)?;
        let end = self.start + self.duration;
        let controlled = network.controlled_segments();
        let (from, to) = (
            network.segments[controlled[0]].start,
            network.segments[*controlled.last().expect("controlled segments")].end,
        );
        let last = *controlled.last().expect("controlled segments");
        let downstream: Vec<usize> = (last + 1..network.num_mainline_segments()).take(3).collect();

        let uncontrolled = run_episode_with(
            &cfg,
            &network,
            schedule.clone(),
            &mut NullController,
            self.seed,
            &EpisodeOptions::default(),
        )?;
        let mut ctl = WindowedHeadway { headway: self.headway, start: self.start, end };
        let headway =
            run_episode_with(&cfg, &network, schedule.clone(), &mut ctl, self.seed, &EpisodeOptions::default())?;
        let zone = SpeedLimitZone { start_time: self.start, end_time: end, from, to, limit: self.speed_limit };
        let options = EpisodeOptions { speed_zone: Some(zone) };
        let speed_limit = run_episode_with(&cfg, &network, schedule, &mut NullController, self.seed, &options)?;
        Ok(Fig2cOutcome { setup: self.clone(), uncontrolled, headway, speed_limit, downstream })
    }
}

impl Fig2cOutcome {
    /// Moving-average downstream density per step, veh/km/lane.
    pub fn downstream_density(&self, record: &EpisodeRecord) -> Vec<(f64, f64)> {
        let raw: Vec<f64> = record
            .steps
            .iter()
            .map(|s| {
                self.downstream.iter().map(|&i| s.observation.density[i]).sum::<f64>() / self.downstream.len() as f64
            })
            .collect();
        let w = ((self.setup.smoothing / record.step_length).round() as usize).max(1);
        record
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let lo = (i + 1).saturating_sub(w);
                (s.time, raw[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64)
            })
            .collect()
    }

    /// Controlled over uncontrolled smoothed density inside the command
    /// window, after the transient.
    pub fn density_ratio(&self, record: &EpisodeRecord) -> Vec<(f64, f64)> {
        let base = self.downstream_density(&self.uncontrolled);
        let run = self.downstream_density(record);
        let from = self.setup.start + self.setup.transient;
        let to = self.setup.start + self.setup.duration;
        run.iter().zip(&base).filter(|((t, _), _)| *t >= from && *t <= to).map(|((t, c), (_, b))| (*t, c / b)).collect()
    }

    /// The constant headway keeps downstream density at most `bound` times
    /// the uncontrolled density for the whole window.
    pub fn headway_holds(&self, bound: f64) -> bool {
        self.density_ratio(&self.headway).iter().all(|(_, r)| *r <= bound)
    }

    /// The speed limit's downstream density first departs from the
    /// uncontrolled run by more than `tol` and later comes back within `tol`
    /// before the window ends.
    pub fn speed_limit_recovers(&self, tol: f64) -> bool {
        let ratios = self.density_ratio(&self.speed_limit);
        let Some(departed) = ratios.iter().position(|(_, r)| (r - 1.0).abs() > tol) else {
            return false;
        };
        ratios[departed..].iter().any(|(_, r)| (r - 1.0).abs() <= tol)
    }

    /// Writes the three quantities of all three runs as time-space grids.
    pub fn write_grids(&self, dir: &Path, bin: f64) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, record) in
            [("uncontrolled", &self.uncontrolled), ("headway", &self.headway), ("speed_limit", &self.speed_limit)]
        {
            let table = StepTable::from_record(record);
            for q in [Quantity::Speed, Quantity::Throughput, Quantity::Density] {
                let grid = timespace_grid(&table, q, bin)?;
                let file = dir.join(format!("{name}_{}.csv", serde_json::to_value(q)?.as_str().unwrap_or("q")));
                grid.write_csv(std::fs::File::create(file)?)?;
            }
        }
        Ok(())
    }
}
