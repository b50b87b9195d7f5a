//! Multi-preference PPO training.
//!
//! One environment per preference collects whole episodes with a frozen
//! copy of the policy, all environments in parallel. Their trajectories are
//! pooled, then the actor and critic take `epochs` passes of minibatch
//! updates. Results depend only on the seed.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{ActionMode, Thermos};
use super::ddt::Ddt;
use super::ppo::{advantage, clip_grad_norm, policy_loss, value_loss, Adam, PolicySample, Transition};
use super::reward::{JobRewards, Recorder, RewardNormalizer};
use super::state::{Preference, StateScales, OBJECTIVES, POLICY_INPUTS};
use super::value::ValueNet;
use crate::arch::PimType;
use crate::error::{Error, Result};
use crate::sim::{run, SimConfig, SimContext};
use crate::workload::{synth_workload_stream, Dcg};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub lr: f64,
    pub clip: f64,
    pub gamma: f64,
    /// Decisions collected per environment before each update.
    pub steps_per_update: usize,
    pub total_steps: usize,
    pub episode_jobs: usize,
    pub preferences: Vec<Preference>,
    pub epochs: usize,
    pub minibatch: usize,
    pub max_grad_norm: f64,
    pub depth: usize,
    pub hidden: usize,
    /// Half-width of the uniform initial tree weights.
    pub init_scale: f64,
    /// Admit rate drawn uniformly from this range at each episode reset (jobs/s).
    pub admit_rate_range: (f64, f64),
    pub reward_decay: f64,
    pub reward_clamp: f64,
    pub normalize_advantage: bool,
    /// Decays the learning rate linearly to zero over `total_steps`.
    pub anneal_lr: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            lr: 5e-4,
            clip: 0.1,
            gamma: 0.95,
            steps_per_update: 10_000,
            total_steps: 300_000,
            episode_jobs: 100,
            preferences: vec![Preference::LATENCY, Preference::ENERGY, Preference::BALANCED],
            epochs: 4,
            minibatch: 1024,
            max_grad_norm: 0.5,
            depth: 5,
            hidden: 64,
            init_scale: 0.1,
            admit_rate_range: (0.5, 5.0),
            reward_decay: 0.99,
            reward_clamp: 10.0,
            normalize_advantage: true,
            anneal_lr: false,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("ppo: {m}")));
        if !(self.lr > 0.0) || !(self.clip > 0.0) {
            return bad("lr and clip must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.steps_per_update == 0 || self.episode_jobs == 0 || self.epochs == 0 || self.minibatch == 0 {
            return bad("steps_per_update, episode_jobs, epochs and minibatch must be positive");
        }
        if self.preferences.is_empty() {
            return bad("at least one training preference is required");
        }
        for p in &self.preferences {
            p.validate()?;
        }
        let (lo, hi) = self.admit_rate_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("admit_rate_range must be positive and ordered");
        }
        if !(self.reward_decay > 0.0 && self.reward_decay < 1.0) || !(self.reward_clamp > 0.0) {
            return bad("reward_decay must lie in (0, 1) and reward_clamp be positive");
        }
        if !(self.max_grad_norm > 0.0) || self.depth == 0 || self.hidden == 0 {
            return bad("max_grad_norm, depth and hidden must be positive");
        }
        Ok(())
    }
}

/// What every training episode runs on.
#[derive(Debug, Clone)]
pub struct TrainEnv {
    pub ctx: Arc<SimContext>,
    pub sim: SimConfig,
    pub pool: Vec<Arc<Dcg>>,
    pub frame_range: (u64, u64),
}

impl TrainEnv {
    pub fn scales(&self) -> StateScales {
        let pool: Vec<&Dcg> = self.pool.iter().map(|d| d.as_ref()).collect();
        StateScales::from_pool(&pool, self.frame_range.1)
    }
}

/// One training-curve row per (update, preference).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub update: usize,
    pub steps: usize,
    /// Critic loss on the freshly collected batch, before any update.
    pub value_loss: f64,
    pub policy_loss: f64,
    pub preference: Preference,
    pub jobs: usize,
    pub mean_primary: [f64; OBJECTIVES],
    pub mean_secondary: [f64; OBJECTIVES],
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub policy: Ddt,
    pub value: ValueNet,
    pub scales: StateScales,
    pub curve: Vec<CurveRow>,
}

struct Worker {
    pref: Preference,
    rng: ChaCha8Rng,
    normalizer: RewardNormalizer,
}

impl Worker {
    fn collect(&mut self, env: &TrainEnv, cfg: &PpoConfig, policy: &Ddt, scales: &StateScales) -> Result<(Vec<Transition>, Vec<JobRewards>)> {
        let mut trans = Vec::new();
        let mut rewards = Vec::new();
        while trans.len() < cfg.steps_per_update {
            let (lo, hi) = cfg.admit_rate_range;
            let rate = if hi > lo { self.rng.gen_range(lo..=hi) } else { lo };
            let jobs = synth_workload_stream(self.rng.gen(), cfg.episode_jobs, env.frame_range, &env.pool, rate)?;
            let mut agent = Thermos {
                policy: policy.clone(),
                scales: *scales,
                pref: self.pref,
                ambient: env.ctx.thermal.ambient(),
                mode: ActionMode::Sample(ChaCha8Rng::seed_from_u64(self.rng.gen())),
                recorder: Some(Recorder::new(self.normalizer.clone())),
            };
            run(&env.ctx, &env.sim, &jobs, &mut agent)?;
            let mut rec = agent.recorder.take().expect("recorder present");
            let (t, r) = rec.finish_episode();
            self.normalizer = rec.normalizer;
            if t.is_empty() {
                return Err(Error::Config("training episode produced no decisions".into()));
            }
            trans.extend(t);
            rewards.extend(r);
        }
        Ok((trans, rewards))
    }
}

fn env_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x632b_e59b_d9b4_e019u64.wrapping_mul(k as u64 + 1))
}

/// Trains a policy; `on_update` sees the curve rows of each update as they
/// are produced.
pub fn train(cfg: &PpoConfig, env: &TrainEnv, seed: u64, mut on_update: impl FnMut(&[CurveRow])) -> Result<Trained> {
    cfg.validate()?;
    env.sim.validate()?;
    let scales = env.scales();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = Ddt::new(cfg.depth, POLICY_INPUTS, PimType::COUNT, cfg.init_scale, &mut rng)?;
    let mut value = ValueNet::new(POLICY_INPUTS, cfg.hidden, OBJECTIVES, &mut rng)?;
    let mut opt_pi = Adam::new(policy.params.len(), cfg.lr);
    let mut opt_v = Adam::new(value.params.len(), cfg.lr);
    let mut workers: Vec<Worker> = cfg
        .preferences
        .iter()
        .enumerate()
        .map(|(k, &pref)| Worker {
            pref,
            rng: ChaCha8Rng::seed_from_u64(env_seed(seed, k)),
            normalizer: RewardNormalizer::new(cfg.reward_decay, cfg.reward_clamp),
        })
        .collect();

    let mut curve = Vec::new();
    let mut steps = 0usize;
    let mut update = 0usize;
    while steps < cfg.total_steps {
        let frozen = &policy;
        let results: Vec<Result<(Vec<Transition>, Vec<JobRewards>)>> = std::thread::scope(|s| {
            let handles: Vec<_> = workers
                .iter_mut()
                .map(|w| s.spawn(move || w.collect(env, cfg, frozen, &scales)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("collector thread panicked")).collect()
        });
        let mut batch: Vec<Transition> = Vec::new();
        let mut per_pref = Vec::new();
        for r in results {
            let (t, jr) = r?;
            batch.extend(t);
            per_pref.push(jr);
        }
        steps += batch.len();

        if cfg.anneal_lr {
            let lr = cfg.lr * (1.0 - (steps - batch.len()) as f64 / cfg.total_steps as f64).max(0.0);
            opt_pi.lr = lr;
            opt_v.lr = lr;
        }
        let (targets, mut adv) = targets_and_advantages(&batch, &value, cfg.gamma);
        if cfg.normalize_advantage {
            normalize_per_preference(&batch, &mut adv);
        }
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut first_v = (0.0, 0usize);
        let mut first_pi = (0.0, 0usize);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.minibatch) {
                let ps: Vec<PolicySample> = chunk.iter().map(|&i| PolicySample { t: &batch[i], adv: adv[i] }).collect();
                let (lp, mut gp) = policy_loss(&ps, &policy, cfg.clip);
                let vb: Vec<(&[f64; POLICY_INPUTS], [f64; OBJECTIVES])> =
                    chunk.iter().map(|&i| (&batch[i].input, targets[i])).collect();
                let (lv, mut gv) = value_loss(&vb, &value);
                if !lp.is_finite() || !lv.is_finite() {
                    return Err(Error::Diverged(format!("update {update}: policy loss {lp}, value loss {lv}")));
                }
                if epoch == 0 {
                    first_v.0 += lv * chunk.len() as f64;
                    first_v.1 += chunk.len();
                    first_pi.0 += lp * chunk.len() as f64;
                    first_pi.1 += chunk.len();
                }
                clip_grad_norm(&mut gp, cfg.max_grad_norm);
                clip_grad_norm(&mut gv, cfg.max_grad_norm);
                opt_pi.step(&mut policy.params, &gp);
                opt_v.step(&mut value.params, &gv);
            }
        }
        policy.validate()?;
        value.validate()?;

        let vl = first_v.0 / first_v.1.max(1) as f64;
        let pl = first_pi.0 / first_pi.1.max(1) as f64;
        let start = curve.len();
        for (w, jr) in workers.iter().zip(&per_pref) {
            let n = jr.len().max(1) as f64;
            let mean = |f: &dyn Fn(&JobRewards) -> [f64; 2]| -> [f64; 2] {
                let mut m = [0.0; 2];
                for r in jr {
                    let v = f(r);
                    m[0] += v[0] / n;
                    m[1] += v[1] / n;
                }
                m
            };
            curve.push(CurveRow {
                update,
                steps,
                value_loss: vl,
                policy_loss: pl,
                preference: w.pref,
                jobs: jr.len(),
                mean_primary: mean(&|r| r.primary),
                mean_secondary: mean(&|r| r.secondary),
            });
        }
        on_update(&curve[start..]);
        log::info!("update {update}: steps {steps}, value loss {vl:.5}, policy loss {pl:.5}");
        update += 1;
    }
    Ok(Trained { policy, value, scales, curve })
}

/// TD targets `r + γ·V(s')` and advantage vectors scalarized by each
/// transition's own preference. The batch is a concatenation of episodes,
/// each ending in a terminal transition.
pub fn targets_and_advantages(batch: &[Transition], value: &ValueNet, gamma: f64) -> (Vec<[f64; OBJECTIVES]>, Vec<f64>) {
    let v: Vec<Vec<f64>> = batch.iter().map(|t| value.value(&t.input)).collect();
    let zero = vec![0.0; OBJECTIVES];
    let mut targets = Vec::with_capacity(batch.len());
    let mut adv = Vec::with_capacity(batch.len());
    for (i, t) in batch.iter().enumerate() {
        let next = if t.terminal { &zero } else { &v[i + 1] };
        let a = advantage(&t.reward, &v[i], next, gamma, t.terminal);
        let boot = if t.terminal { 0.0 } else { gamma };
        targets.push(std::array::from_fn(|k| t.reward[k] + boot * next[k]));
        adv.push(t.preference().dot(&a));
    }
    (targets, adv)
}

/// Standardizes advantages within each preference's share of the batch, so
/// every preference pulls on the shared policy with equal weight.
fn normalize_per_preference(batch: &[Transition], adv: &mut [f64]) {
    let mut groups: Vec<(Preference, Vec<usize>)> = Vec::new();
    for (i, t) in batch.iter().enumerate() {
        let p = t.preference();
        match groups.iter_mut().find(|g| g.0 == p) {
            Some(g) => g.1.push(i),
            None => groups.push((p, vec![i])),
        }
    }
    for (_, idx) in groups {
        let mut xs: Vec<f64> = idx.iter().map(|&i| adv[i]).collect();
        normalize(&mut xs);
        for (&i, x) in idx.iter().zip(xs) {
            adv[i] = x;
        }
    }
}

fn normalize(xs: &mut [f64]) {
    if xs.len() < 2 {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt().max(1e-8);
    xs.iter_mut().for_each(|x| *x = (*x - mean) / sd);
}

/// Exponential smoothing `s_t = α·s_{t−1} + (1 − α)·x_t`, seeded with `x_0`.
pub fn smooth(xs: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        out.push(if i == 0 { x } else { alpha * out[i - 1] + (1.0 - alpha) * x });
    }
    out
}

/// Value loss per update, one entry per update.
pub fn value_loss_series(curve: &[CurveRow]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut last = usize::MAX;
    for r in curve {
        if r.update != last {
            out.push(r.value_loss);
            last = r.update;
        }
    }
    out
}

pub fn write_curve_csv(curve: &[CurveRow], path: &std::path::Path) -> Result<()> {
    crate::error::write_atomic(path, curve_csv_string(curve).as_bytes())
}

pub fn curve_csv_string(curve: &[CurveRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "update",
        "steps",
        "value_loss",
        "policy_loss",
        "omega_latency",
        "omega_energy",
        "jobs",
        "primary_time",
        "primary_energy",
        "secondary_time",
        "secondary_energy",
    ])
    .expect("in-memory write");
    for r in curve {
        w.write_record([
            r.update.to_string(),
            r.steps.to_string(),
            r.value_loss.to_string(),
            r.policy_loss.to_string(),
            r.preference.0[0].to_string(),
            r.preference.0[1].to_string(),
            r.jobs.to_string(),
            r.mean_primary[0].to_string(),
            r.mean_primary[1].to_string(),
            r.mean_secondary[0].to_string(),
            r.mean_secondary[1].to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
