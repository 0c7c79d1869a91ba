use std::collections::hash_map::DefaultHasher;
use std::collections::VecDeque;
use std::hash::{Hash, Hasher};

use super::demand::{generate_demand, DemandSchedule};
use super::record::{EpisodeRecord, StepRecord, VehicleRecord};
use super::vehicle::VehicleState;
use crate::config::{ScenarioConfig, DEFAULT_HEADWAY};
use crate::control::{apply_commands, ControlContext, Controller, HeadwayCommand};
use crate::dynamics::{
    accel, lane_change_decision, safe_velocity, Ego, IdmParams, LaneChangeKind, LaneView, Leader, Neighbor,
    Neighborhood, Side,
};
use crate::error::{Error, Result};
use crate::network::{build_merge_network, Road, RoadNetwork};
use crate::sensing::{observe, SegmentObservation};

/// Clearance kept by the position guard behind a leader's new position, m.
const GUARD_GAP: f64 = 0.01;

/// Temporary override of the desired speed on a mainline stretch.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeedLimitZone {
    pub start_time: f64,
    pub end_time: f64,
    pub from: f64,
    pub to: f64,
    pub limit: f64,
}

impl SpeedLimitZone {
    fn applies(&self, time: f64, road: Road, x: f64) -> bool {
        road == Road::Mainline && time >= self.start_time && time < self.end_time && x >= self.from && x < self.to
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeOptions {
    pub speed_zone: Option<SpeedLimitZone>,
}

/// One running episode. Create with [`Simulation::new`], advance with
/// [`Simulation::step`], and collect the record with [`Simulation::finish`].
pub struct Simulation {
    cfg: ScenarioConfig,
    network: RoadNetwork,
    schedule: DemandSchedule,
    seed: u64,
    options: EpisodeOptions,
    vehicles: Vec<VehicleState>,
    records: Vec<VehicleRecord>,
    /// Blocked entries per origin lane; the ramp queue comes last.
    queues: Vec<VecDeque<u32>>,
    next_due: usize,
    exited: usize,
    step_index: usize,
    steps: Vec<StepRecord>,
    observation: SegmentObservation,
}

impl Simulation {
    pub fn new(
        cfg: &ScenarioConfig,
        network: &RoadNetwork,
        schedule: DemandSchedule,
        seed: u64,
        options: EpisodeOptions,
    ) -> Result<Self> {
        cfg.validate()?;
        for v in schedule.vehicles() {
            let lanes = network.lanes(v.origin);
            if v.lane >= lanes {
                return Err(Error::Config(format!("vehicle {} enters lane {} of {lanes}", v.id, v.lane)));
            }
        }
        let records = schedule
            .vehicles()
            .iter()
            .map(|s| VehicleRecord {
                id: s.id,
                class: s.class,
                origin: s.origin,
                lane: s.lane,
                planned_entry: s.planned_entry,
                actual_entry: None,
                exit_time: None,
                distance: 0.0,
                free_flow_time: 0.0,
                reward_sum: 0.0,
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            network: network.clone(),
            schedule,
            seed,
            options,
            vehicles: Vec::new(),
            records,
            queues: vec![VecDeque::new(); network.mainline_lanes + 1],
            next_due: 0,
            exited: 0,
            step_index: 0,
            steps: Vec::new(),
            observation: SegmentObservation::empty(network, 0.0),
        })
    }

    fn dt(&self) -> f64 {
        self.cfg.simulation.step_length
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.dt()
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn network(&self) -> &RoadNetwork {
        &self.network
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn observation(&self) -> &SegmentObservation {
        &self.observation
    }

    pub fn queued(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn is_done(&self) -> bool {
        self.step_index >= self.cfg.num_steps()
    }

    fn lane_key(&self, v: &VehicleState) -> usize {
        match v.road {
            Road::Mainline => v.lane,
            Road::Ramp => self.network.mainline_lanes,
        }
    }

    fn ramp_key(&self) -> usize {
        self.network.mainline_lanes
    }

    /// Vehicle indices per lane, sorted downstream first.
    fn build_lanes(&self) -> Vec<Vec<usize>> {
        let mut lanes = vec![Vec::new(); self.network.mainline_lanes + 1];
        for (i, v) in self.vehicles.iter().enumerate() {
            lanes[self.lane_key(v)].push(i);
        }
        for lane in &mut lanes {
            self.sort_lane(lane);
        }
        lanes
    }

    fn sort_lane(&self, lane: &mut [usize]) {
        lane.sort_by(|&a, &b| {
            let (va, vb) = (&self.vehicles[a], &self.vehicles[b]);
            vb.x.total_cmp(&va.x).then(va.id.cmp(&vb.id))
        });
    }

    fn desired_speed(&self, road: Road, x: f64, time: f64) -> f64 {
        match &self.options.speed_zone {
            Some(zone) if zone.applies(time, road, x) => zone.limit,
            _ => self.network.speed_limit(road),
        }
    }

    fn idm_for(&self, v: &VehicleState, time: f64) -> IdmParams {
        self.cfg.driver.idm.with_headway(v.headway).with_desired_speed(self.desired_speed(v.road, v.x, time))
    }

    /// Leader and follower of position `x` in lane `key`, skipping `exclude`.
    fn view(&self, lane: &[usize], x: f64, exclude: usize, time: f64) -> LaneView {
        let len = self.cfg.driver.idm.vehicle_length;
        let mut view = LaneView::default();
        for &j in lane {
            if j == exclude {
                continue;
            }
            let other = &self.vehicles[j];
            if other.x >= x {
                view.leader = Some(Neighbor { gap: other.x - len - x, speed: other.v, idm: self.idm_for(other, time) });
            } else {
                view.follower =
                    Some(Neighbor { gap: x - len - other.x, speed: other.v, idm: self.idm_for(other, time) });
                break;
            }
        }
        view
    }

    /// Nearest vehicle of `lane` whose rear is ahead of position `x`.
    fn mainline_leader(&self, lane: &[usize], x: f64) -> Option<Leader> {
        let len = self.cfg.driver.idm.vehicle_length;
        lane.iter().rev().map(|&j| &self.vehicles[j]).find(|o| o.x - len > x).map(|o| Leader::new(o.x - len - x, o.v))
    }

    fn lane_change_phase(&mut self, time: f64) {
        let mut lanes = self.build_lanes();
        let lc = self.cfg.driver.lane_change;
        let n_lanes = self.network.mainline_lanes;
        let merge_start = self.network.merge_lane_start();

        let mut decisions: Vec<(usize, Side)> = Vec::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            let ego = Ego { speed: v.v, idm: self.idm_for(v, time) };
            let key = self.lane_key(v);
            let current = self.view(&lanes[key], v.x, i, time);
            let decision = match v.road {
                Road::Ramp => {
                    if v.x < merge_start {
                        continue;
                    }
                    let urgency = (v.x - merge_start) / self.network.merge_lane_length;
                    let x_main = self.network.ramp_to_mainline(v.x);
                    let nb = Neighborhood { current, left: Some(self.view(&lanes[0], x_main, i, time)), right: None };
                    lane_change_decision(&ego, &nb, LaneChangeKind::Mandatory { urgency }, &lc)
                }
                Road::Mainline => {
                    if n_lanes == 1 || time - v.last_lane_change < lc.cooldown {
                        continue;
                    }
                    let nb = Neighborhood {
                        current,
                        left: (v.lane + 1 < n_lanes).then(|| self.view(&lanes[v.lane + 1], v.x, i, time)),
                        right: (v.lane > 0).then(|| self.view(&lanes[v.lane - 1], v.x, i, time)),
                    };
                    lane_change_decision(&ego, &nb, LaneChangeKind::Discretionary, &lc)
                }
            };
            if let Some(side) = decision {
                decisions.push((i, side));
            }
        }

        // Decisions come from the frozen snapshot; applying them in order
        // re-checks that the target gaps are still open.
        for (i, side) in decisions {
            let v = &self.vehicles[i];
            let (target_key, x_new) = match (v.road, side) {
                (Road::Ramp, _) => (0, self.network.ramp_to_mainline(v.x)),
                (Road::Mainline, Side::Left) => (v.lane + 1, v.x),
                (Road::Mainline, Side::Right) => (v.lane - 1, v.x),
            };
            let view = self.view(&lanes[target_key], x_new, i, time);
            let open = view.leader.is_none_or(|l| l.gap > 0.0) && view.follower.is_none_or(|f| f.gap > 0.0);
            if !open {
                continue;
            }
            let old_key = self.lane_key(v);
            lanes[old_key].retain(|&j| j != i);
            let v = &mut self.vehicles[i];
            v.road = Road::Mainline;
            v.lane = target_key;
            v.x = x_new;
            v.last_lane_change = time;
            lanes[target_key].push(i);
            let mut lane = std::mem::take(&mut lanes[target_key]);
            self.sort_lane(&mut lane);
            lanes[target_key] = lane;
        }
    }

    /// Advances one step of `dt`.
    pub fn step(&mut self, command: &HeadwayCommand, admit_entries: bool) -> Result<&StepRecord> {
        let dt = self.dt();
        let t0 = self.time();
        let t1 = (self.step_index + 1) as f64 * dt;
        let len = self.cfg.driver.idm.vehicle_length;

        // (1) headways from the active command
        apply_commands(&mut self.vehicles, &self.network, command);

        // (2) lane changes
        self.lane_change_phase(t0);

        // (3) + (4) accelerations, safety clamp, semi-implicit integration
        let lanes = self.build_lanes();
        let n = self.vehicles.len();
        let cooperation = self.cfg.driver.lane_change.cooperation;
        // merge-lane vehicles in mainline coordinates, upstream first
        let merging: Vec<Leader> = lanes[self.ramp_key()]
            .iter()
            .rev()
            .map(|&j| &self.vehicles[j])
            .filter(|r| r.x >= self.network.merge_lane_start())
            .map(|r| Leader::new(self.network.ramp_to_mainline(r.x), r.v))
            .collect();
        let mut new_x = vec![0.0; n];
        let mut new_v = vec![0.0; n];
        for (key, lane) in lanes.iter().enumerate() {
            let on_ramp = key == self.ramp_key();
            let mut ahead: Option<usize> = None;
            for &i in lane {
                let v = &self.vehicles[i];
                let p = self.idm_for(v, t0);
                let (leader, limit) = match ahead {
                    Some(j) => {
                        let l = &self.vehicles[j];
                        (Some(Leader::new(l.x - len - v.x, l.v)), Some(new_x[j] - len - GUARD_GAP))
                    }
                    // the ramp end acts as a stopped obstacle
                    None if on_ramp => {
                        (Some(Leader::new(self.network.ramp_length - v.x, 0.0)), Some(self.network.ramp_length))
                    }
                    None => (None, None),
                };
                let mut a = accel(v.v, leader, &p);
                if on_ramp && v.x >= self.network.merge_lane_start() {
                    // merging vehicles also adapt to the mainline vehicle
                    // ahead of them, braking at most comfortably for it
                    let x_main = self.network.ramp_to_mainline(v.x);
                    if let Some(l) = self.mainline_leader(&lanes[0], x_main) {
                        let target = accel(v.v, Some(l), &p).max(-p.comfortable_decel);
                        a = a.min(target);
                    }
                }
                if key == 0 && cooperation > 0.0 {
                    // cooperative drivers open a gap for the merging vehicle ahead
                    if let Some(r) = merging.iter().find(|r| r.gap - len > v.x) {
                        let gap = Leader::new(r.gap - len - v.x, r.speed);
                        let target = accel(v.v, Some(gap), &p).max(-cooperation * p.comfortable_decel);
                        a = a.min(target);
                    }
                }
                let mut speed = (v.v + a * dt).max(0.0);
                if let Some(l) = leader {
                    speed = speed.min(safe_velocity(l.gap, l.speed, dt, &p));
                }
                let mut x = v.x + speed * dt;
                if let Some(limit) = limit {
                    if x > limit {
                        x = limit.max(v.x);
                        speed = (x - v.x) / dt;
                    }
                }
                new_x[i] = x;
                new_v[i] = speed;
                ahead = Some(i);
            }
            for pair in lane.windows(2) {
                let (j, i) = (pair[0], pair[1]);
                let gap = new_x[j] - len - new_x[i];
                if gap <= 0.0 {
                    return Err(Error::Collision {
                        time: t1,
                        follower: self.vehicles[i].id,
                        leader: self.vehicles[j].id,
                        gap,
                    });
                }
            }
        }

        let end = self.network.mainline_length;
        let mut reward_sum = 0.0;
        for (i, v) in self.vehicles.iter_mut().enumerate() {
            let v_free = self.network.speed_limit(v.road);
            let dx = new_x[i] - v.x;
            let rec = &mut self.records[v.id as usize];
            // a vehicle leaving the road is accounted up to the moment its
            // front crosses the end
            let (driven, held) = if v.road == Road::Mainline && new_x[i] >= end {
                let tau = if new_v[i] > 0.0 { ((end - v.x) / new_v[i]).clamp(0.0, dt) } else { 0.0 };
                rec.exit_time = Some(t0 + tau);
                (end - v.x, tau)
            } else {
                (dx, dt)
            };
            let term = (new_v[i] / v_free - 1.0) * held;
            rec.reward_sum += term;
            rec.free_flow_time += driven / v_free;
            rec.distance += driven;
            reward_sum += term;
            v.x = new_x[i];
            v.v = new_v[i];
            v.distance += dx;
        }
        // vehicles waiting to enter count at zero speed for the part of the
        // step after their planned entry
        for queue in &self.queues {
            for &id in queue {
                let rec = &mut self.records[id as usize];
                rec.reward_sum -= dt;
                reward_sum -= dt;
            }
        }
        for s in &self.schedule.vehicles()[self.next_due..] {
            if s.planned_entry >= t1 {
                break;
            }
            let waited = t1 - s.planned_entry.max(t0);
            self.records[s.id as usize].reward_sum -= waited;
            reward_sum -= waited;
        }

        // (5) exits, timed above
        let mut exited_now = 0;
        self.vehicles.retain(|v| {
            let leaving = v.road == Road::Mainline && v.x >= end;
            exited_now += leaving as usize;
            !leaving
        });
        self.exited += exited_now;

        // (6) insertions
        let schedule = self.schedule.vehicles();
        while self.next_due < schedule.len() && schedule[self.next_due].planned_entry <= t1 {
            let s = &schedule[self.next_due];
            let key = match s.origin {
                Road::Mainline => s.lane,
                Road::Ramp => self.network.mainline_lanes,
            };
            self.queues[key].push_back(s.id);
            self.next_due += 1;
        }
        if admit_entries {
            self.insert_due(t1);
        }

        // (7) observation and record
        self.observation = observe(&self.vehicles, &self.network, t1);
        let command_values = command.values().to_vec();
        let min_gap = self.min_gap();
        let state_hash = self.state_hash();
        self.step_index += 1;
        self.steps.push(StepRecord {
            step: self.step_index - 1,
            time: t1,
            reward: self.cfg.reward.scale * reward_sum,
            queued: self.queued(),
            active: self.vehicles.len(),
            exited: self.exited,
            due: self.next_due,
            min_gap,
            command: command_values,
            observation: self.observation.clone(),
            state_hash,
        });
        Ok(self.steps.last().expect("just pushed"))
    }

    fn insert_due(&mut self, time: f64) {
        let idm = self.cfg.driver.idm;
        for key in 0..self.queues.len() {
            let Some(&id) = self.queues[key].front() else { continue };
            let road = if key == self.ramp_key() { Road::Ramp } else { Road::Mainline };
            let tail = self
                .vehicles
                .iter()
                .filter(|v| self.lane_key(v) == key)
                .min_by(|a, b| a.x.total_cmp(&b.x).then(b.id.cmp(&a.id)));
            let v0 = self.desired_speed(road, 0.0, time);
            let speed = match tail {
                None => v0,
                Some(t) => {
                    let gap = t.x - idm.vehicle_length;
                    if gap <= idm.min_gap + idm.vehicle_length {
                        continue;
                    }
                    v0.min(safe_velocity(gap, t.v, self.dt(), &idm))
                }
            };
            self.queues[key].pop_front();
            let rec = &mut self.records[id as usize];
            rec.actual_entry = Some(time);
            self.vehicles.push(VehicleState {
                id,
                class: rec.class,
                road,
                lane: if road == Road::Ramp { 0 } else { key },
                x: 0.0,
                v: speed,
                headway: DEFAULT_HEADWAY,
                planned_entry: rec.planned_entry,
                actual_entry: Some(time),
                exit_time: None,
                distance: 0.0,
                last_lane_change: f64::NEG_INFINITY,
            });
        }
    }

    fn min_gap(&self) -> Option<f64> {
        let len = self.cfg.driver.idm.vehicle_length;
        self.build_lanes()
            .iter()
            .flat_map(|lane| lane.windows(2).map(|p| self.vehicles[p[0]].x - len - self.vehicles[p[1]].x))
            .reduce(f64::min)
    }

    fn state_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for v in &self.vehicles {
            (v.id, v.lane, v.road, v.x.to_bits(), v.v.to_bits(), v.headway.to_bits()).hash(&mut h);
        }
        for q in &self.queues {
            q.len().hash(&mut h);
        }
        h.finish()
    }

    pub fn finish(self) -> EpisodeRecord {
        EpisodeRecord {
            seed: self.seed,
            horizon: self.cfg.simulation.horizon,
            step_length: self.cfg.simulation.step_length,
            reward_scale: self.cfg.reward.scale,
            schedule_digest: self.schedule.digest(),
            vehicles: self.records,
            steps: self.steps,
            collisions: 0,
        }
    }
}

/// Runs one episode on the default demand for `seed`.
pub fn run_episode(cfg: &ScenarioConfig, controller: &mut dyn Controller, seed: u64) -> Result<EpisodeRecord> {
    let network = build_merge_network(cfg)?;
    let schedule = generate_demand(cfg, seed)?;
    run_episode_with(cfg, &network, schedule, controller, seed, &EpisodeOptions::default())
}

/// Runs one episode on an explicit schedule. The controller is invoked every
/// `action_interval`; its command is held in between.
pub fn run_episode_with(
    cfg: &ScenarioConfig,
    network: &RoadNetwork,
    schedule: DemandSchedule,
    controller: &mut dyn Controller,
    seed: u64,
    options: &EpisodeOptions,
) -> Result<EpisodeRecord> {
    let mut sim = Simulation::new(cfg, network, schedule, seed, options.clone())?;
    let every = cfg.action_steps();
    let k = network.controlled_segments().len();
    let mut command = HeadwayCommand::default_for(k);
    while !sim.is_done() {
        let time = sim.time();
        if sim.step_index() % every == 0 {
            let ctx = ControlContext {
                time,
                step: sim.step_index(),
                vehicles: sim.vehicles(),
                network: sim.network(),
                observation: sim.observation(),
                config: &cfg.control,
                idm: &cfg.driver.idm,
            };
            command = controller.act(&ctx)?;
            if command.len() != k {
                return Err(Error::Dimension { expected: k, actual: command.len() });
            }
        }
        let admit = controller.admits_entries(time);
        sim.step(&command, admit)?;
    }
    Ok(sim.finish())
}
