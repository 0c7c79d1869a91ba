//! MOBIL-style lane changing with an assertiveness knob.
//!
//! A change is safe when neither the ego vehicle nor its prospective follower
//! would have to brake harder than `safe_decel_limit * assertiveness`.
//! Discretionary changes additionally need an acceleration incentive above
//! `incentive_threshold / speed_gain_weight`, net of the cooperation-weighted
//! losses imposed on both affected followers. Mandatory changes (ramp
//! vehicles in the merge lane) use the safety test only, weighted by
//! `1 - urgency`, so at the end of the merge lane only the bare non-collision
//! bound remains: after the change both the ego vehicle and its new follower
//! must be able to stay collision-free without braking harder than
//! `safe_decel`. That bound applies to every change.

use serde::{Deserialize, Serialize};

use super::idm::{accel, safe_velocity, IdmParams, Leader};
use crate::config::STEP_LENGTH;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneChangeParams {
    /// Scales the deceleration a change may impose; larger accepts smaller gaps.
    pub assertiveness: f64,
    /// Eagerness to change for speed; zero disables discretionary changes.
    pub speed_gain_weight: f64,
    /// Politeness towards followers in [-1, 1]; negative values ignore them.
    /// Positive values also make lane-0 drivers brake, by at most
    /// `cooperation` times their comfortable deceleration, to open a gap for
    /// a merging vehicle ahead.
    pub cooperation: f64,
    /// Base deceleration bound of the safety test, m/s².
    pub safe_decel_limit: f64,
    /// Base acceleration gain a discretionary change must exceed, m/s².
    pub incentive_threshold: f64,
    /// Minimum time between two discretionary changes of one vehicle, s.
    pub cooldown: f64,
}

impl Default for LaneChangeParams {
    fn default() -> Self {
        Self {
            assertiveness: 3.0,
            speed_gain_weight: 5.0,
            cooperation: 1.0,
            safe_decel_limit: 1.0,
            incentive_threshold: 1.0,
            cooldown: 3.0,
        }
    }
}

impl LaneChangeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.assertiveness > 0.0 && self.safe_decel_limit > 0.0) {
            return Err(Error::Config("assertiveness and safe_decel_limit must be positive".into()));
        }
        if !(-1.0..=1.0).contains(&self.cooperation) {
            return Err(Error::Config("cooperation must be in [-1, 1]".into()));
        }
        if self.speed_gain_weight < 0.0 || self.incentive_threshold < 0.0 || self.cooldown < 0.0 {
            return Err(Error::Config("lane-change weights must be non-negative".into()));
        }
        Ok(())
    }

    fn decel_bound(&self) -> f64 {
        self.safe_decel_limit * self.assertiveness
    }
}

/// A neighbouring vehicle; `gap` is bumper-to-bumper from the ego vehicle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub gap: f64,
    pub speed: f64,
    pub idm: IdmParams,
}

/// Leader and follower abreast of the ego vehicle in one lane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LaneView {
    pub leader: Option<Neighbor>,
    pub follower: Option<Neighbor>,
}

/// Current lane plus the adjacent lanes; `None` means no lane on that side.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Neighborhood {
    pub current: LaneView,
    pub left: Option<LaneView>,
    pub right: Option<LaneView>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ego {
    pub speed: f64,
    pub idm: IdmParams,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LaneChangeKind {
    Discretionary,
    /// Must reach the left lane; `urgency` grows from 0 to 1 along the merge lane.
    Mandatory {
        urgency: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// A follower at `speed` behind a leader at `leader_speed`, `gap` ahead, can
/// avoid a collision while braking at most at its `safe_decel`.
fn collision_free(gap: f64, speed: f64, leader_speed: f64, idm: &IdmParams) -> bool {
    safe_velocity(gap, leader_speed, STEP_LENGTH, idm) >= speed - idm.safe_decel * STEP_LENGTH
}

fn leader_of(n: Option<Neighbor>) -> Option<Leader> {
    n.map(|l| Leader::new(l.gap, l.speed))
}

struct Evaluation {
    safe: bool,
    incentive: f64,
}

fn evaluate(ego: &Ego, current: &LaneView, target: &LaneView, p: &LaneChangeParams, weight: f64) -> Evaluation {
    let len = ego.idm.vehicle_length;
    let gaps_positive = target.leader.is_none_or(|l| l.gap > 0.0) && target.follower.is_none_or(|f| f.gap > 0.0);
    let collision_free = gaps_positive
        && target.leader.is_none_or(|l| collision_free(l.gap, ego.speed, l.speed, &ego.idm))
        && target.follower.is_none_or(|f| collision_free(f.gap, f.speed, ego.speed, &f.idm));
    if !collision_free {
        return Evaluation { safe: false, incentive: f64::NEG_INFINITY };
    }

    let ego_new = accel(ego.speed, leader_of(target.leader), &ego.idm);
    let follower_new = target.follower.map(|f| accel(f.speed, Some(Leader::new(f.gap, ego.speed)), &f.idm));

    let bound = p.decel_bound();
    let worst = ego_new.min(follower_new.unwrap_or(0.0)).min(0.0);
    let safe = -worst * weight <= bound;

    let ego_old = accel(ego.speed, leader_of(current.leader), &ego.idm);
    // follower in the target lane currently trails the target leader
    let new_follower_gain = target.follower.map_or(0.0, |f| {
        let before = accel(f.speed, target.leader.map(|l| Leader::new(f.gap + len + l.gap, l.speed)), &f.idm);
        follower_new.unwrap_or(before) - before
    });
    // follower in the current lane closes up to the current leader
    let old_follower_gain = current.follower.map_or(0.0, |f| {
        let before = accel(f.speed, Some(Leader::new(f.gap, ego.speed)), &f.idm);
        let after = accel(f.speed, current.leader.map(|l| Leader::new(f.gap + len + l.gap, l.speed)), &f.idm);
        after - before
    });
    let politeness = p.cooperation.max(0.0);
    let incentive = ego_new - ego_old + politeness * (new_follower_gain + old_follower_gain);
    Evaluation { safe, incentive }
}

/// Decides whether the ego vehicle changes lane this step.
pub fn lane_change_decision(
    ego: &Ego,
    neighborhood: &Neighborhood,
    kind: LaneChangeKind,
    p: &LaneChangeParams,
) -> Option<Side> {
    match kind {
        LaneChangeKind::Mandatory { urgency } => {
            let target = neighborhood.left.as_ref()?;
            let weight = 1.0 - urgency.clamp(0.0, 1.0);
            evaluate(ego, &neighborhood.current, target, p, weight).safe.then_some(Side::Left)
        }
        LaneChangeKind::Discretionary => {
            if p.speed_gain_weight <= 0.0 {
                return None;
            }
            let threshold = p.incentive_threshold / p.speed_gain_weight;
            let mut best: Option<(Side, f64)> = None;
            for (side, view) in [(Side::Left, neighborhood.left), (Side::Right, neighborhood.right)] {
                let Some(view) = view else { continue };
                let e = evaluate(ego, &neighborhood.current, &view, p, 1.0);
                if e.safe && e.incentive > threshold && best.is_none_or(|(_, b)| e.incentive > b) {
                    best = Some((side, e.incentive));
                }
            }
            best.map(|(side, _)| side)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idm() -> IdmParams {
        IdmParams::default()
    }

    fn ego(speed: f64) -> Ego {
        Ego { speed, idm: idm() }
    }

    fn neighbor(gap: f64, speed: f64) -> Neighbor {
        Neighbor { gap, speed, idm: idm() }
    }

    #[test]
    fn no_adjacent_lane_no_change() {
        let nb = Neighborhood {
            current: LaneView { leader: Some(neighbor(10.0, 5.0)), follower: None },
            left: None,
            right: None,
        };
        let p = LaneChangeParams::default();
        assert_eq!(lane_change_decision(&ego(20.0), &nb, LaneChangeKind::Discretionary, &p), None);
        assert_eq!(lane_change_decision(&ego(20.0), &nb, LaneChangeKind::Mandatory { urgency: 1.0 }, &p), None);
    }

    #[test]
    fn empty_lane_beside_slow_leader_is_taken() {
        // 3-vehicle configuration: ego at 20 m/s, slow leader 30 m ahead at 10 m/s,
        // left lane empty. Hand evaluation of both criteria:
        let p = LaneChangeParams::default();
        let d = idm();
        let v = 20.0_f64;
        let free = d.max_accel * (1.0 - (v / d.desired_speed).powi(4));
        let s_star =
            d.min_gap + v * d.time_headway + v * (v - 10.0) / (2.0 * (d.max_accel * d.comfortable_decel).sqrt());
        let stuck = d.max_accel * (1.0 - (v / d.desired_speed).powi(4) - (s_star / 30.0).powi(2));
        // safety: no new follower, ego accelerates on the free lane
        assert!(free > -p.safe_decel_limit * p.assertiveness);
        // incentive: gain above threshold / speed_gain_weight
        assert!(free - stuck > p.incentive_threshold / p.speed_gain_weight);

        let nb = Neighborhood {
            current: LaneView { leader: Some(neighbor(30.0, 10.0)), follower: None },
            left: Some(LaneView::default()),
            right: None,
        };
        assert_eq!(lane_change_decision(&ego(20.0), &nb, LaneChangeKind::Discretionary, &p), Some(Side::Left));
    }

    #[test]
    fn unsafe_for_new_follower_rejected() {
        let p = LaneChangeParams::default();
        // fast follower 5 m behind in the target lane cannot even stop in time
        let follower = neighbor(5.0, 25.0);
        let a = accel(25.0, Some(Leader::new(5.0, 10.0)), &idm());
        assert!(-a > p.safe_decel_limit * p.assertiveness);
        let nb = Neighborhood {
            current: LaneView { leader: Some(neighbor(15.0, 5.0)), follower: None },
            left: Some(LaneView { leader: None, follower: Some(follower) }),
            right: None,
        };
        assert_eq!(lane_change_decision(&ego(10.0), &nb, LaneChangeKind::Discretionary, &p), None);
        assert_eq!(lane_change_decision(&ego(10.0), &nb, LaneChangeKind::Mandatory { urgency: 1.0 }, &p), None);
    }

    #[test]
    fn urgency_relaxes_to_non_collision_bound() {
        let p = LaneChangeParams::default();
        // follower 15 m behind at 15 m/s: IDM braking near 12 m/s², yet it
        // can still stop behind the ego vehicle within safe_decel
        let d = idm();
        let a = accel(15.0, Some(Leader::new(15.0, 10.0)), &d);
        assert!(-a > p.safe_decel_limit * p.assertiveness);
        assert!(safe_velocity(15.0, 10.0, STEP_LENGTH, &d) >= 15.0 - d.safe_decel * STEP_LENGTH);
        let nb = Neighborhood {
            current: LaneView::default(),
            left: Some(LaneView { leader: None, follower: Some(neighbor(15.0, 15.0)) }),
            right: None,
        };
        let decide = |u| lane_change_decision(&ego(10.0), &nb, LaneChangeKind::Mandatory { urgency: u }, &p);
        assert_eq!(decide(0.0), None);
        assert_eq!(decide(0.5), None);
        assert_eq!(decide(1.0), Some(Side::Left));
    }

    #[test]
    fn mandatory_rejects_overlap() {
        let p = LaneChangeParams::default();
        let nb = Neighborhood {
            current: LaneView::default(),
            left: Some(LaneView { leader: Some(neighbor(-1.0, 20.0)), follower: None }),
            right: None,
        };
        assert_eq!(lane_change_decision(&ego(20.0), &nb, LaneChangeKind::Mandatory { urgency: 1.0 }, &p), None);
    }

    #[test]
    fn zero_speed_gain_disables_discretionary() {
        let p = LaneChangeParams { speed_gain_weight: 0.0, ..Default::default() };
        let nb = Neighborhood {
            current: LaneView { leader: Some(neighbor(30.0, 10.0)), follower: None },
            left: Some(LaneView::default()),
            right: Some(LaneView::default()),
        };
        assert_eq!(lane_change_decision(&ego(20.0), &nb, LaneChangeKind::Discretionary, &p), None);
    }

    #[test]
    fn deterministic() {
        let p = LaneChangeParams::default();
        let nb = Neighborhood {
            current: LaneView { leader: Some(neighbor(25.0, 12.0)), follower: Some(neighbor(20.0, 15.0)) },
            left: Some(LaneView { leader: Some(neighbor(60.0, 20.0)), follower: Some(neighbor(30.0, 18.0)) }),
            right: Some(LaneView { leader: Some(neighbor(40.0, 19.0)), follower: Some(neighbor(35.0, 16.0)) }),
        };
        let first = lane_change_decision(&ego(15.0), &nb, LaneChangeKind::Discretionary, &p);
        for _ in 0..10 {
            assert_eq!(lane_change_decision(&ego(15.0), &nb, LaneChangeKind::Discretionary, &p), first);
        }
    }
}
