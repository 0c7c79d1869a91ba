//! Trains a headway policy on the desk-scale scenario and compares it with
//! the human baseline and the best fixed headway.
//!
//! `cargo run --release --example train [episodes] [out_dir]`

use std::time::Instant;

use headway::control::FixedController;
use headway::engine::run_episode;
use headway::learn::{evaluate_policy, train_from, Checkpoint, TrainConfig};
use headway::metrics::MeanCi;
use headway::ScenarioConfig;

fn returns(cfg: &ScenarioConfig, headway: f64, seeds: &[u64]) -> headway::Result<Vec<f64>> {
    seeds.iter().map(|&s| Ok(run_episode(cfg, &mut FixedController { headway }, s)?.total_reward())).collect()
}

fn main() -> headway::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes = args.next().and_then(|a| a.parse().ok()).unwrap_or(340);
    let out = args.next().unwrap_or_else(|| "train_out".into());
    let cfg = ScenarioConfig::desk();
    let tcfg = TrainConfig { episodes, ..TrainConfig::default() };

    let started = Instant::now();
    let outcome = train_from(&cfg, &tcfg, Checkpoint::fresh(&cfg, &tcfg, 0)?, Some(out.as_ref()))?;
    for p in &outcome.curve {
        println!(
            "update {:>4} episodes {:>6} return {:+.5} kl {:.5} clip {:.3}",
            p.update, p.episodes, p.mean_return, p.kl, p.clip_fraction
        );
    }
    println!("trained in {:.0?}", started.elapsed());

    let seeds: Vec<u64> = (1_000_000..1_000_030).collect();
    let policy = MeanCi::from_samples(&evaluate_policy(&cfg, &outcome.params, &seeds)?);
    let human = MeanCi::from_samples(&returns(&cfg, 1.5, &seeds)?);
    println!("policy {:+.5} [{:+.5}, {:+.5}]", policy.mean, policy.low, policy.high);
    println!("human  {:+.5} [{:+.5}, {:+.5}]", human.mean, human.low, human.high);
    for t in [2.0, 2.5, 3.0, 3.5] {
        let fixed = MeanCi::from_samples(&returns(&cfg, t, &seeds)?);
        println!("fixed {t:.1} {:+.5} [{:+.5}, {:+.5}]", fixed.mean, fixed.low, fixed.high);
    }
    Ok(())
}
