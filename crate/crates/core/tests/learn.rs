use headway::control::{policy_controller_act, ActionMode};
use headway::learn::{
    compute_gae, normalize_advantages, ppo_loss, train, train_from, Checkpoint, NetShape, PolicyParameters, Sample,
    TrainConfig,
};
use headway::rng::{stream_rng, Stream};
use headway::ScenarioConfig;
use proptest::prelude::*;

/// Advantages as explicit discounted sums of TD errors.
fn gae_oracle(r: &[f64], v: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    let value = |t: usize| if t < n { v[t] } else { 0.0 };
    (0..n)
        .map(|t| (t..n).map(|l| (gamma * lambda).powi((l - t) as i32) * (r[l] + gamma * value(l + 1) - v[l])).sum())
        .collect()
}

fn tiny() -> TrainConfig {
    TrainConfig {
        hidden: 16,
        batch_size: 120,
        minibatch_size: 32,
        sgd_iters: 2,
        episodes: 8,
        lr: 1e-3,
        ..TrainConfig::default()
    }
}

/// Offset of the policy-head bias within the flat weight vector.
fn head_bias_offset(shape: NetShape) -> usize {
    let layers = shape.layers();
    layers[..2].iter().map(|(r, c)| r * c + r).sum::<usize>() + layers[2].0 * layers[2].1
}

proptest! {
    #[test]
    fn gae_matches_double_sum(
        pairs in prop::collection::vec((-1.0f64..0.0, -5.0f64..5.0), 1..40),
        gamma in 0.5f64..0.999,
        lambda in 0.0f64..=1.0,
    ) {
        let (r, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (adv, ret) = compute_gae(&r, &v, 0.0, gamma, lambda).unwrap();
        let oracle = gae_oracle(&r, &v, gamma, lambda);
        for t in 0..r.len() {
            prop_assert!((adv[t] - oracle[t]).abs() < 1e-9);
            prop_assert!((ret[t] - oracle[t] - v[t]).abs() < 1e-9);
        }
    }

    #[test]
    fn normalized_advantages_are_standard(xs in prop::collection::vec(-10.0f64..10.0, 2..60)) {
        let mut a = xs.clone();
        normalize_advantages(&mut a);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread > 1e-6 {
            let var = a.iter().map(|x| x * x).sum::<f64>() / n;
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn policy_actions_are_clipped_into_range() {
    let shape = NetShape::new(4, 8, 2);
    let offset = head_bias_offset(shape);
    let mut rng = stream_rng(0, Stream::Policy);
    for (bias, expected) in [(3.75, 3.75), (10.0, 6.0), (0.2, 1.5), (-3.0, 1.5)] {
        let mut p = PolicyParameters::zeros(shape);
        p.weights[offset] = bias;
        p.weights[offset + 1] = bias;
        let (cmd, d) = policy_controller_act(&[0.3, -0.2, 1.0, 0.0], &p, ActionMode::Deterministic, &mut rng).unwrap();
        assert_eq!(cmd.values(), &[expected, expected]);
        assert_eq!(d.raw_action, vec![bias, bias]);
    }
}

#[test]
fn fresh_policy_starts_mid_range() {
    let shape = NetShape::new(42, 64, 2);
    let p = PolicyParameters::init(shape, 3);
    let out = p.forward(&[0.5; 42]).unwrap();
    for (m, ls) in out.mean.iter().zip(&out.log_std) {
        assert!((m - 3.75).abs() < 0.1, "mean {m}");
        assert!(ls.abs() < 0.1);
    }
    assert!(p.forward(&[0.0; 41]).is_err());
}

#[test]
fn unchanged_policy_clips_nothing() {
    let shape = NetShape::new(6, 16, 2);
    let p = PolicyParameters::init(shape, 9);
    let mut rng = stream_rng(1, Stream::Policy);
    let samples: Vec<Sample> = (0..20)
        .map(|i| {
            let obs: Vec<f64> = (0..6).map(|j| ((i * 7 + j) as f64 * 0.37).sin()).collect();
            let (_, d) = policy_controller_act(&obs, &p, ActionMode::Stochastic, &mut rng).unwrap();
            Sample {
                obs,
                action: d.raw_action,
                log_prob_old: d.log_prob,
                advantage: if i % 2 == 0 { 1.0 } else { -1.0 },
                value_target: -0.1,
            }
        })
        .collect();
    let refs: Vec<&Sample> = samples.iter().collect();
    let loss = ppo_loss(&p, &refs, &TrainConfig::default()).unwrap();
    assert_eq!(loss.clip_fraction, 0.0);
    assert!(loss.kl.abs() < 1e-12);
}

#[test]
fn zero_budget_returns_the_initial_checkpoint() {
    let cfg = ScenarioConfig::desk();
    let tcfg = TrainConfig { episodes: 0, ..tiny() };
    let out = train(&cfg, &tcfg, 4).unwrap();
    let fresh = Checkpoint::fresh(&cfg, &tcfg, 4).unwrap();
    assert_eq!(out.params, fresh.params);
    assert!(out.curve.is_empty());
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let cfg = ScenarioConfig::desk();
    let full = train(&cfg, &tiny(), 1).unwrap();
    assert_eq!(full.checkpoint.episodes, 8);
    assert_eq!(full.curve.len(), 4);

    let half = train(&cfg, &TrainConfig { episodes: 4, ..tiny() }, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.json");
    half.checkpoint.save(&path).unwrap();
    let resumed = train_from(&cfg, &tiny(), Checkpoint::load(&path).unwrap(), Some(dir.path())).unwrap();
    assert_eq!(resumed.params, full.params);
    assert_eq!(resumed.curve, full.curve);
    assert!(dir.path().join("policy.json").exists());
    assert_eq!(PolicyParameters::load(dir.path().join("policy.json")).unwrap(), full.params);
}

#[test]
fn worker_count_does_not_change_the_result() {
    let cfg = ScenarioConfig::desk();
    let one = train(&cfg, &TrainConfig { episodes: 4, ..tiny() }, 2).unwrap();
    let two = train(&cfg, &TrainConfig { episodes: 4, workers: 2, ..tiny() }, 2).unwrap();
    assert_eq!(one.params, two.params);
}

#[test]
fn checkpoint_from_another_scenario_is_rejected() {
    let desk = ScenarioConfig::desk();
    let ck = Checkpoint::fresh(&desk, &tiny(), 0).unwrap();
    let mut other = ScenarioConfig::desk();
    other.demand.ramp_inflow = 900.0;
    assert!(train_from(&other, &tiny(), ck, None).is_err());
}

#[test]
fn invalid_hyperparameters_are_rejected() {
    let cfg = ScenarioConfig::desk();
    for bad in [
        TrainConfig { gamma: 1.0, ..tiny() },
        TrainConfig { gae_lambda: 1.5, ..tiny() },
        TrainConfig { clip: 0.0, ..tiny() },
        TrainConfig { workers: 0, ..tiny() },
    ] {
        assert!(train(&cfg, &bad, 0).is_err());
    }
}
