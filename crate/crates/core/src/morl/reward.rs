//! Reward normalization and per-job reward bookkeeping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ppo::Transition;
use super::state::OBJECTIVES;

/// Divides costs by the root of an exponential moving average of their
/// square (which tracks both mean and spread), then negates and clamps
/// to `[−clamp, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardNormalizer {
    pub decay: f64,
    pub clamp: f64,
    second_moment: Option<[f64; OBJECTIVES]>,
}

impl RewardNormalizer {
    pub fn new(decay: f64, clamp: f64) -> Self {
        RewardNormalizer { decay, clamp, second_moment: None }
    }

    pub fn observe(&mut self, cost: [f64; OBJECTIVES]) {
        let sq = cost.map(|c| c * c);
        self.second_moment = Some(match self.second_moment {
            None => sq,
            Some(m) => std::array::from_fn(|k| self.decay * m[k] + (1.0 - self.decay) * sq[k]),
        });
    }

    /// Current per-objective scales; 1 before any observation or for an
    /// objective that has only seen zeros.
    pub fn scales(&self) -> [f64; OBJECTIVES] {
        match self.second_moment {
            None => [1.0; OBJECTIVES],
            Some(m) => m.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }),
        }
    }

    pub fn reward(&self, cost: [f64; OBJECTIVES], scales: [f64; OBJECTIVES]) -> [f64; OBJECTIVES] {
        std::array::from_fn(|k| (-cost[k] / scales[k]).clamp(-self.clamp, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JobRewards {
    pub job: u64,
    pub primary: [f64; OBJECTIVES],
    pub secondary: [f64; OBJECTIVES],
}

/// Collects one episode's decisions and attaches rewards: zero for every
/// decision except a job's last, which receives the primary reward when
/// the job is fully placed and the secondary reward when it finishes.
#[derive(Debug, Clone)]
pub struct Recorder {
    pub normalizer: RewardNormalizer,
    pub transitions: Vec<Transition>,
    pub rewards: Vec<JobRewards>,
    pending: Vec<Transition>,
    /// Job id → (slot of its last decision, scales used for its primary reward, index into `rewards`).
    open: BTreeMap<u64, (usize, [f64; OBJECTIVES], usize)>,
}

impl Recorder {
    pub fn new(normalizer: RewardNormalizer) -> Self {
        Recorder { normalizer, transitions: Vec::new(), rewards: Vec::new(), pending: Vec::new(), open: BTreeMap::new() }
    }

    pub fn begin_job(&mut self) {
        self.pending.clear();
    }

    pub fn record(&mut self, t: Transition) {
        self.pending.push(t);
    }

    pub fn abort(&mut self) {
        self.pending.clear();
    }

    pub fn scheduled(&mut self, job: u64, ideal_exec: f64, ideal_energy: f64) {
        if self.pending.is_empty() {
            return;
        }
        let cost = [ideal_exec, ideal_energy];
        self.normalizer.observe(cost);
        let scales = self.normalizer.scales();
        let primary = self.normalizer.reward(cost, scales);
        let n = self.pending.len();
        self.pending[n - 1].reward = primary;
        self.transitions.append(&mut self.pending);
        self.open.insert(job, (self.transitions.len() - 1, scales, self.rewards.len()));
        self.rewards.push(JobRewards { job, primary, secondary: [0.0; OBJECTIVES] });
    }

    pub fn finished(&mut self, job: u64, stall_time: f64, stall_energy: f64) {
        if let Some((slot, scales, k)) = self.open.remove(&job) {
            let secondary = self.normalizer.reward([stall_time, stall_energy], scales);
            for (r, s) in self.transitions[slot].reward.iter_mut().zip(secondary) {
                *r += s;
            }
            self.rewards[k].secondary = secondary;
        }
    }

    /// Marks the episode's last decision terminal and returns the
    /// transitions and per-job rewards.
    pub fn finish_episode(&mut self) -> (Vec<Transition>, Vec<JobRewards>) {
        if let Some(last) = self.transitions.last_mut() {
            last.terminal = true;
        }
        self.pending.clear();
        self.open.clear();
        (std::mem::take(&mut self.transitions), std::mem::take(&mut self.rewards))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional_before_clamping() {
        let mut n = RewardNormalizer::new(0.99, 10.0);
        n.observe([2.0, 4.0]);
        let s = n.scales();
        assert_eq!(s, [2.0, 4.0]);
        let a = n.reward([1.0, 1.0], s);
        let b = n.reward([2.0, 2.0], s);
        assert_eq!(b[0], 2.0 * a[0]);
        assert_eq!(n.reward([1e6, 0.0], s), [-10.0, 0.0]);
    }

    #[test]
    fn no_stall_no_secondary() {
        let n = RewardNormalizer::new(0.99, 10.0);
        assert_eq!(n.reward([0.0, 0.0], [3.0, 5.0]), [0.0, 0.0]);
        let r = n.reward([1.0, 2.0], [1.0, 1.0]);
        assert_eq!(r, [-1.0, -2.0]);
    }
}
