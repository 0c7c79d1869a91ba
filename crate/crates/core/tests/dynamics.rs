use approx::assert_relative_eq;
use headway::control::NullController;
use headway::dynamics::{
    idm_acceleration, lane_change_decision, safe_velocity, Ego, IdmParams, LaneChangeKind, LaneChangeParams, LaneView,
    Leader, Neighbor, Neighborhood,
};
use headway::engine::run_episode;
use headway::ScenarioConfig;
use proptest::prelude::*;

/// Treiber's formula written out term by term.
fn idm_by_hand(v: f64, gap: f64, vl: f64, p: &IdmParams) -> f64 {
    let s_star =
        p.min_gap + (v * p.time_headway + v * (v - vl) / (2.0 * (p.max_accel * p.comfortable_decel).sqrt())).max(0.0);
    p.max_accel * (1.0 - (v / p.desired_speed).powi(4) - (s_star / gap).powi(2))
}

/// Equilibrium flow maximised over speed, veh/h.
fn static_capacity(p: &IdmParams) -> f64 {
    (1..31_290)
        .map(|i| {
            let v = i as f64 * 1e-3;
            let s = (p.min_gap + v * p.time_headway) / (1.0 - (v / p.desired_speed).powi(4)).sqrt();
            3600.0 * v / (s + p.vehicle_length)
        })
        .fold(0.0, f64::max)
}

#[test]
fn acceleration_matches_hand_formula() {
    let p = IdmParams::default();
    for &(v, gap, vl) in &[(20.0, 40.0, 20.0), (25.0, 15.0, 10.0), (5.0, 80.0, 25.0), (31.0, 200.0, 31.0)] {
        let a = idm_acceleration(v, Some(Leader::new(gap, vl)), &p).unwrap();
        assert_relative_eq!(a, idm_by_hand(v, gap, vl, &p), max_relative = 1e-12);
    }
    assert_eq!(idm_acceleration(0.0, None, &p).unwrap(), p.max_accel);
}

#[test]
fn default_headway_capacity_brackets_inflow() {
    let p = IdmParams::default();
    let cap = static_capacity(&p);
    assert!((1800.0..1850.0).contains(&cap), "capacity {cap}");
    assert!(static_capacity(&p.with_headway(3.0)) < 1100.0);
}

#[test]
fn saturated_entry_never_beats_static_capacity() {
    let mut cfg = ScenarioConfig::single_lane();
    cfg.demand.ramp_inflow = 0.0;
    cfg.demand.mainline_inflow_per_lane = 3600.0;
    let rec = run_episode(&cfg, &mut NullController, 0).unwrap();
    let served = rec.exits_between(300.0, 500.0) as f64 * 18.0;
    assert!(served <= static_capacity(&cfg.driver.idm), "{served}");
    assert!(rec.max_queue() > 0);
}

fn neighbor(gap: f64, speed: f64) -> Neighbor {
    Neighbor { gap, speed, idm: IdmParams::default() }
}

proptest! {
    #[test]
    fn safe_velocity_stops_in_time(gap in 0.0f64..200.0, vl in 0.0f64..35.0) {
        let p = IdmParams::default();
        let dt = 0.5;
        let v = safe_velocity(gap, vl, dt, &p);
        prop_assert!(v >= 0.0);
        let b = p.safe_decel;
        let lhs = v * dt + v * v / (2.0 * b);
        let rhs = gap + vl * vl / (2.0 * b);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
        prop_assert!(safe_velocity(gap + 1.0, vl, dt, &p) > v);
    }

    #[test]
    fn acceleration_bounded_by_max(v in 0.0f64..35.0, gap in 0.1f64..500.0, vl in 0.0f64..35.0) {
        let p = IdmParams::default();
        let a = idm_acceleration(v, Some(Leader::new(gap, vl)), &p).unwrap();
        prop_assert!(a <= p.max_accel);
        let free = idm_acceleration(v, None, &p).unwrap();
        prop_assert!(a <= free + 1e-12);
    }

    #[test]
    fn accepted_merges_leave_the_follower_a_safe_gap(
        lead_gap in 0.5f64..60.0,
        follow_gap in 0.5f64..60.0,
        v in 0.0f64..30.0,
        vf in 0.0f64..30.0,
        vl in 0.0f64..30.0,
        urgency in 0.0f64..=1.0,
    ) {
        let p = IdmParams::default();
        let nb = Neighborhood {
            current: LaneView::default(),
            left: Some(LaneView { leader: Some(neighbor(lead_gap, vl)), follower: Some(neighbor(follow_gap, vf)) }),
            right: None,
        };
        let ego = Ego { speed: v, idm: p };
        let kind = LaneChangeKind::Mandatory { urgency };
        if lane_change_decision(&ego, &nb, kind, &LaneChangeParams::default()).is_some() {
            prop_assert!(safe_velocity(follow_gap, v, 0.5, &p) >= vf - p.safe_decel * 0.5);
            prop_assert!(safe_velocity(lead_gap, vl, 0.5, &p) >= v - p.safe_decel * 0.5);
        }
    }

    #[test]
    fn more_urgency_never_rejects_an_accepted_merge(
        gap in 1.0f64..60.0,
        v in 0.0f64..30.0,
        vf in 0.0f64..30.0,
        u in 0.0f64..0.9,
    ) {
        let nb = Neighborhood {
            current: LaneView::default(),
            left: Some(LaneView { leader: None, follower: Some(neighbor(gap, vf)) }),
            right: None,
        };
        let ego = Ego { speed: v, idm: IdmParams::default() };
        let lc = LaneChangeParams::default();
        let low = lane_change_decision(&ego, &nb, LaneChangeKind::Mandatory { urgency: u }, &lc);
        let high = lane_change_decision(&ego, &nb, LaneChangeKind::Mandatory { urgency: u + 0.1 }, &lc);
        prop_assert!(low.is_none() || high.is_some());
    }
}
