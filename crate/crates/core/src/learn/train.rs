use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gae::{compute_gae, normalize_advantages};
use super::network::{NetShape, PolicyParameters};
use super::ppo::{ppo_update, Adam, Sample, Transition};
use crate::config::ScenarioConfig;
use crate::control::{ActionMode, PolicyController};
use crate::engine::{generate_demand, run_episode_with, EpisodeOptions, EpisodeRecord};
use crate::error::{Error, Result};
use crate::network::build_merge_network;
use crate::rng::{derive_seed, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub vf_coeff: f64,
    pub kl_coeff: f64,
    pub entropy_coeff: f64,
    pub lr: f64,
    /// Transitions (controller decisions) per update.
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub sgd_iters: usize,
    /// Episode budget of the whole run.
    pub episodes: usize,
    pub workers: usize,
    pub hidden: usize,
    /// Updates between checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 1.0,
            clip: 0.3,
            vf_coeff: 1.0,
            kl_coeff: 0.2,
            entropy_coeff: 0.0,
            lr: 5e-5,
            batch_size: 2000,
            minibatch_size: 128,
            sgd_iters: 30,
            episodes: 25_000,
            workers: 1,
            hidden: 256,
            checkpoint_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must be in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if !(self.clip > 0.0 && self.lr > 0.0) {
            return bad("clip and lr must be positive");
        }
        if self.vf_coeff < 0.0 || self.kl_coeff < 0.0 || self.entropy_coeff < 0.0 {
            return bad("loss coefficients must be non-negative");
        }
        if self.batch_size == 0 || self.minibatch_size == 0 || self.workers == 0 || self.hidden == 0 {
            return bad("batch sizes, workers and hidden width must be positive");
        }
        Ok(())
    }
}

/// One row of the learning curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub update: usize,
    pub episodes: usize,
    pub transitions: usize,
    pub mean_return: f64,
    pub min_return: f64,
    pub max_return: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub kl: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub seed: u64,
    pub scenario_digest: String,
    pub train: TrainConfig,
    pub updates: usize,
    pub episodes: usize,
    pub params: PolicyParameters,
    pub adam: Adam,
    pub curve: Vec<CurvePoint>,
}

impl Checkpoint {
    pub const FORMAT: u32 = 1;

    pub fn fresh(cfg: &ScenarioConfig, tcfg: &TrainConfig, seed: u64) -> Result<Self> {
        let network = build_merge_network(cfg)?;
        let shape = NetShape::new(2 * network.num_segments(), tcfg.hidden, network.controlled_segments().len());
        let params = PolicyParameters::init(shape, seed);
        Ok(Self {
            format: Self::FORMAT,
            seed,
            scenario_digest: cfg.digest(),
            train: tcfg.clone(),
            updates: 0,
            episodes: 0,
            adam: Adam::new(tcfg.lr, params.num_params()),
            params,
            curve: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let c: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if c.format != Self::FORMAT {
            return Err(Error::Config(format!("unsupported checkpoint format {}", c.format)));
        }
        Ok(c)
    }

    pub fn write_curve_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.curve {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: PolicyParameters,
    pub curve: Vec<CurvePoint>,
    pub checkpoint: Checkpoint,
}

/// Runs one episode with `policy` and turns its decisions into transitions
/// whose rewards cover the steps until the next decision.
pub fn collect_episode(
    cfg: &ScenarioConfig,
    policy: Arc<PolicyParameters>,
    seed: u64,
    mode: ActionMode,
) -> Result<(Vec<Transition>, EpisodeRecord)> {
    let network = build_merge_network(cfg)?;
    let schedule = generate_demand(cfg, seed)?;
    let mut controller = PolicyController::new(policy, mode, seed);
    let record = run_episode_with(cfg, &network, schedule, &mut controller, seed, &EpisodeOptions::default())?;
    let decisions = controller.take_decisions();
    let n = decisions.len();
    let mut transitions = Vec::with_capacity(n);
    for (i, d) in decisions.into_iter().enumerate() {
        let end = if i + 1 < n { record.steps.len().min(d.step + cfg.action_steps()) } else { record.steps.len() };
        let reward = record.steps[d.step..end].iter().map(|s| s.reward).sum();
        transitions.push(Transition {
            obs: d.features,
            action: d.raw_action,
            log_prob: d.log_prob,
            reward,
            value: d.value,
            done: i + 1 == n,
        });
    }
    Ok((transitions, record))
}

/// Total episode reward of the deterministic policy on each seed.
pub fn evaluate_policy(cfg: &ScenarioConfig, policy: &PolicyParameters, seeds: &[u64]) -> Result<Vec<f64>> {
    let policy = Arc::new(policy.clone());
    seeds
        .iter()
        .map(|&s| Ok(collect_episode(cfg, policy.clone(), s, ActionMode::Deterministic)?.1.total_reward()))
        .collect()
}

/// Trains a fresh policy for `tcfg.episodes` episodes.
pub fn train(cfg: &ScenarioConfig, tcfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    train_from(cfg, tcfg, Checkpoint::fresh(cfg, tcfg, seed)?, None)
}

/// Continues from `start` until `tcfg.episodes` episodes have been collected
/// in total. With `out_dir`, writes `checkpoint.json`, `policy.json` and
/// `curve.csv` every `checkpoint_every` updates and at the end.
///
/// Episode seeds and minibatch order depend only on the root seed and the
/// episode/update index, so runs are reproducible for any worker count and
/// a resumed run matches an uninterrupted one.
pub fn train_from(
    cfg: &ScenarioConfig,
    tcfg: &TrainConfig,
    start: Checkpoint,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    tcfg.validate()?;
    cfg.validate()?;
    if start.scenario_digest != cfg.digest() {
        return Err(Error::Config("checkpoint was trained on a different scenario".into()));
    }
    let mut ck = start;
    ck.adam.lr = tcfg.lr;
    ck.train = tcfg.clone();
    let decisions_per_episode = cfg.num_steps().div_ceil(cfg.action_steps()).max(1);
    let per_update = tcfg.batch_size.div_ceil(decisions_per_episode);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(tcfg.workers)
        .build()
        .map_err(|e| Error::Training(e.to_string()))?;

    while ck.episodes < tcfg.episodes {
        let count = per_update.min(tcfg.episodes - ck.episodes);
        let policy = Arc::new(ck.params.clone());
        let first = ck.episodes as u64;
        let episodes: Vec<(Vec<Transition>, EpisodeRecord)> = pool.install(|| {
            (0..count as u64)
                .into_par_iter()
                .map(|i| {
                    let seed = derive_seed(ck.seed, Stream::Episodes, first + i);
                    collect_episode(cfg, policy.clone(), seed, ActionMode::Stochastic)
                })
                .collect::<Result<Vec<_>>>()
        })?;

        let mut samples = Vec::new();
        let mut returns = Vec::with_capacity(count);
        for (transitions, record) in &episodes {
            returns.push(record.total_reward());
            let rewards: Vec<f64> = transitions.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = transitions.iter().map(|t| t.value).collect();
            let (adv, targets) = compute_gae(&rewards, &values, 0.0, tcfg.gamma, tcfg.gae_lambda)?;
            for ((t, a), r) in transitions.iter().zip(adv).zip(targets) {
                samples.push(Sample {
                    obs: t.obs.clone(),
                    action: t.action.clone(),
                    log_prob_old: t.log_prob,
                    advantage: a,
                    value_target: r,
                });
            }
        }
        let mut adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
        normalize_advantages(&mut adv);
        for (s, a) in samples.iter_mut().zip(adv) {
            s.advantage = a;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(ck.seed, Stream::Shuffle, ck.updates as u64));
        let stats = ppo_update(&mut ck.params, &mut ck.adam, &samples, tcfg, &mut rng)?;
        let last = stats.last().copied().unwrap_or_default();
        ck.updates += 1;
        ck.episodes += count;
        ck.curve.push(CurvePoint {
            update: ck.updates,
            episodes: ck.episodes,
            transitions: samples.len(),
            mean_return: returns.iter().sum::<f64>() / returns.len() as f64,
            min_return: returns.iter().cloned().fold(f64::INFINITY, f64::min),
            max_return: returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            surrogate: last.surrogate,
            value_loss: last.value_loss,
            kl: last.kl,
            entropy: last.entropy,
            clip_fraction: last.clip_fraction,
        });
        if let Some(dir) = out_dir {
            if tcfg.checkpoint_every > 0 && ck.updates.is_multiple_of(tcfg.checkpoint_every) {
                write_outputs(&ck, dir)?;
            }
        }
    }
    if let Some(dir) = out_dir {
        write_outputs(&ck, dir)?;
    }
    Ok(TrainOutcome { params: ck.params.clone(), curve: ck.curve.clone(), checkpoint: ck })
}

fn write_outputs(ck: &Checkpoint, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    ck.save(dir.join("checkpoint.json"))?;
    ck.params.save(dir.join("policy.json"))?;
    ck.write_curve_csv(std::fs::File::create(dir.join("curve.csv"))?)
}
