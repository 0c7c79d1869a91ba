use approx::assert_relative_eq;
use headway::metrics::{average_speed, delta_v, step_reward, MeanCi, RewardTerm, VehicleTiming};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::Statistics;

#[test]
fn confidence_interval_matches_statrs() {
    let xs = [0.12, -0.03, 0.08, 0.15, 0.02, -0.01, 0.09, 0.11, 0.04, 0.07];
    let ci = MeanCi::from_samples(&xs);
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.975);
    let sd = xs.std_dev();
    let half = z * sd / (xs.len() as f64).sqrt();
    assert_relative_eq!(ci.mean, xs.mean(), max_relative = 1e-12);
    assert_relative_eq!(ci.std_dev, sd, max_relative = 1e-12);
    assert!((ci.half_width() - half).abs() < 1e-9);
    assert!((ci.low - (xs.mean() - half)).abs() < 1e-9);
    assert!(ci.excludes_zero());
}

#[test]
fn interval_overlap() {
    let a = MeanCi::from_samples(&[1.0, 2.0, 3.0]);
    let b = MeanCi::from_samples(&[2.5, 3.5, 4.5]);
    let c = MeanCi::from_samples(&[100.0, 100.5]);
    assert!(a.overlaps(&b) && b.overlaps(&a));
    assert!(!a.overlaps(&c));
    assert!(MeanCi::from_samples(&[]).mean.is_nan());
}

#[test]
fn reward_sums_relative_speed_deficit() {
    let terms = [
        RewardTerm { speed: 10.0, v_free: 20.0 },
        RewardTerm { speed: 0.0, v_free: 20.0 },
        RewardTerm { speed: 20.0, v_free: 20.0 },
    ];
    let expected = 1e-5 * 0.5 * (-0.5 - 1.0 + 0.0);
    assert_relative_eq!(step_reward(&terms, 1e-5, 0.5), expected, max_relative = 1e-14);
    assert_eq!(step_reward(&[], 1e-5, 0.5), 0.0);
}

#[test]
fn unfinished_vehicles_are_timed_to_the_horizon() {
    let t = VehicleTiming { distance: 900.0, planned_entry: 50.0, exit_time: None, free_flow_time: 30.0 };
    assert_relative_eq!(average_speed(&t, 500.0).unwrap(), 2.0);
    assert_eq!(t.delay(), None);
    let done = VehicleTiming { exit_time: Some(140.0), distance: 2000.0, ..t };
    assert_relative_eq!(done.delay().unwrap(), 60.0);
}

proptest! {
    #[test]
    fn uniform_scaling_gives_scale_minus_one(
        base in prop::collection::vec(0.1f64..40.0, 1..50),
        k in 0.0f64..3.0,
    ) {
        let scaled: Vec<f64> = base.iter().map(|v| k * v).collect();
        let dv = delta_v(&scaled, &base).unwrap();
        prop_assert!((dv - (k - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn delta_v_is_the_mean_relative_change(
        pairs in prop::collection::vec((0.0f64..40.0, 0.1f64..40.0), 1..50),
    ) {
        let (c, b): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
        let oracle = pairs.iter().map(|(c, b)| c / b - 1.0).sum::<f64>() / pairs.len() as f64;
        prop_assert!((delta_v(&c, &b).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn interval_contains_the_mean(xs in prop::collection::vec(-1.0f64..1.0, 1..40)) {
        let ci = MeanCi::from_samples(&xs);
        prop_assert!(ci.low <= ci.mean && ci.mean <= ci.high);
        prop_assert_eq!(ci.n, xs.len());
    }
}
