use headway::control::{sweep_fixed_headway, FixedController, NullController};
use headway::engine::{run_episode, StepTable};
use headway::experiment::{
    evaluate_against, simulate, timespace_grid, Baseline, ControllerSpec, ExperimentSpec, Quantity,
};
use headway::network::build_merge_network;
use headway::ScenarioConfig;

fn quick(controller: ControllerSpec) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(ScenarioConfig::single_lane(), controller);
    spec.fractions = vec![0.5, 1.0];
    spec.seeds = 3;
    spec
}

#[test]
fn human_and_default_headway_give_zero_change() {
    for controller in [ControllerSpec::Human, ControllerSpec::Fixed(1.5)] {
        let report = simulate(&quick(controller)).unwrap();
        assert_eq!(report.fractions.len(), 2);
        for f in &report.fractions {
            assert_eq!(f.cells.len(), 3);
            for c in &f.cells {
                assert_eq!(c.delta_v, 0.0);
                assert_eq!(c.control_return, c.baseline_return);
            }
        }
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = quick(ControllerSpec::Human);
    spec.fractions = vec![1.2];
    assert!(simulate(&spec).is_err());
    let mut spec = quick(ControllerSpec::Human);
    spec.fractions.clear();
    assert!(simulate(&spec).is_err());
    let mut spec = quick(ControllerSpec::Human);
    spec.seeds = 0;
    assert!(simulate(&spec).is_err());
    let spec = quick(ControllerSpec::Policy("/nonexistent/policy.json".into()));
    assert!(simulate(&spec).is_err());
}

#[test]
fn controller_specs_round_trip() {
    for text in ["human", "fixed:2.5", "fixed:sweep", "policy:runs/a/policy.json"] {
        let spec: ControllerSpec = text.parse().unwrap();
        assert_eq!(spec.to_string(), text);
    }
    for bad in ["", "robot", "fixed:", "fixed:1.0", "fixed:7", "fixed:abc", "policy:"] {
        assert!(bad.parse::<ControllerSpec>().is_err(), "{bad}");
    }
}

#[test]
fn sweep_picks_its_best_row() {
    let mut cfg = ScenarioConfig::single_lane();
    cfg.demand.cav_fraction = 1.0;
    let result = sweep_fixed_headway(&cfg, &[2.0, 2.5, 3.0], &[0, 1]).unwrap();
    assert_eq!(result.rows.len(), 3);
    let best = result.rows.iter().map(|r| r.delta_v.mean).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(result.best().delta_v.mean, best);
    assert!([2.0, 2.5, 3.0].contains(&result.best_headway));
    assert!(sweep_fixed_headway(&cfg, &[], &[0]).is_err());
    assert!(sweep_fixed_headway(&cfg, &[1.0], &[0]).is_err());

    let mut spec = quick(ControllerSpec::FixedSweep);
    spec.fractions = vec![1.0];
    spec.sweep_grid = vec![2.0, 2.5, 3.0];
    let report = simulate(&spec).unwrap();
    let sweep = report.fractions[0].sweep.as_ref().unwrap();
    assert_eq!(sweep.rows.len(), 3);
    assert!(spec.sweep_grid.contains(&sweep.best_headway));
}

#[test]
fn baselines_must_share_arrivals() {
    let cfg = ScenarioConfig::single_lane();
    let network = build_merge_network(&cfg).unwrap();
    let baseline = Baseline::run(&cfg, &network, 0).unwrap();
    assert!(evaluate_against(&cfg, &network, &baseline, &mut NullController).is_ok());
    let mut other = cfg.clone();
    other.demand.ramp_inflow = 900.0;
    assert!(evaluate_against(&other, &network, &baseline, &mut NullController).is_err());
}

#[test]
fn grid_bins_average_their_steps() {
    let table = StepTable {
        time: vec![0.5, 1.0, 1.5, 2.0, 2.5],
        mean_speed: vec![vec![10.0, 20.0], vec![12.0, 20.0], vec![14.0, 0.0], vec![16.0, 0.0], vec![30.0, 5.0]],
        density: vec![vec![1.0, 0.0], vec![3.0, 0.0], vec![5.0, 40.0], vec![7.0, 40.0], vec![9.0, 10.0]],
    };
    let speed = timespace_grid(&table, Quantity::Speed, 1.0).unwrap();
    assert_eq!(speed.times, vec![1.0, 2.0, 3.0]);
    assert_eq!(speed.values, vec![vec![11.0, 20.0], vec![15.0, 0.0], vec![30.0, 5.0]]);
    let flow = timespace_grid(&table, Quantity::Throughput, 1.0).unwrap();
    let oracle = (10.0 * 1.0 + 12.0 * 3.0) / 2.0 * 3.6;
    assert!((flow.values[0][0] - oracle).abs() < 1e-12);
    assert!(timespace_grid(&table, Quantity::Density, 0.0).is_err());
    assert!("occupancy".parse::<Quantity>().is_err());
}

#[test]
fn free_flow_grid_obeys_flow_identity() {
    let mut cfg = ScenarioConfig::single_lane();
    cfg.demand.mainline_inflow_per_lane = 600.0;
    cfg.demand.ramp_inflow = 0.0;
    let rec = run_episode(&cfg, &mut NullController, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    rec.save_dir(dir.path()).unwrap();
    let table = StepTable::load(dir.path().join("steps.csv")).unwrap();
    assert_eq!(table, StepTable::from_record(&rec));

    let v0 = cfg.driver.idm.desired_speed;
    let speed = timespace_grid(&table, Quantity::Speed, 50.0).unwrap();
    let flow = timespace_grid(&table, Quantity::Throughput, 50.0).unwrap();
    let mainline = build_merge_network(&cfg).unwrap().num_mainline_segments();
    for (i, t) in speed.times.iter().enumerate() {
        if *t <= 100.0 {
            continue;
        }
        for s in 0..mainline {
            assert!((speed.values[i][s] - v0).abs() < 0.05 * v0, "t {t} seg {s}");
            assert!((flow.values[i][s] - 600.0).abs() < 120.0, "t {t} seg {s}: {}", flow.values[i][s]);
        }
    }
}

#[test]
fn empty_road_has_zero_density() {
    let mut cfg = ScenarioConfig::single_lane();
    cfg.demand.mainline_inflow_per_lane = 0.0;
    cfg.demand.ramp_inflow = 0.0;
    let rec = run_episode(&cfg, &mut NullController, 0).unwrap();
    let grid = timespace_grid(&StepTable::from_record(&rec), Quantity::Density, 10.0).unwrap();
    assert!(grid.values.iter().flatten().all(|d| *d == 0.0));
}

#[test]
fn merge_opens_a_slow_zone_upstream() {
    let mut cfg = ScenarioConfig::single_lane();
    cfg.demand.cav_fraction = 1.0;
    let rec = run_episode(&cfg, &mut FixedController::new(1.5).unwrap(), 0).unwrap();
    let grid = timespace_grid(&StepTable::from_record(&rec), Quantity::Speed, 10.0).unwrap();
    let network = build_merge_network(&cfg).unwrap();
    let upstream = network.segment_of(network.merge_position - 50.0, false).unwrap();
    let before = grid.times.iter().position(|t| *t == 200.0).unwrap();
    let free = grid.values[before][upstream];
    let slowest = |seg: usize| {
        grid.values[before..]
            .iter()
            .enumerate()
            .map(|(i, row)| (row[seg], before + i))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    };
    let (near, t_near) = slowest(upstream);
    assert!(near < 0.4 * free, "slowest {near} against {free}");
    let (far, t_far) = slowest(upstream - 4);
    assert!(far < 0.4 * free);
    assert!(t_far > t_near, "jam reaches 400 m further upstream later");
}
