//! The learned level-1 policy as a [`Scheduler`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ddt::Ddt;
use super::ppo::Transition;
use super::reward::Recorder;
use super::state::{build_state, policy_input, Preference, StateScales};
use crate::arch::PimType;
use crate::sched::{argmax_first, LayerRequest, Scheduler};
use crate::sim::JobRecord;
use crate::workload::Workload;

#[allow(clippy::large_enum_variant)]
pub enum ActionMode {
    /// Categorical sampling, used while training.
    Sample(ChaCha8Rng),
    /// Most probable cluster, lowest index on ties.
    Argmax,
}

/// Picks an action index from a distribution. Zero-probability entries are
/// never returned.
pub fn select_action(probs: &[f64], mode: &mut ActionMode) -> usize {
    match mode {
        ActionMode::Argmax => argmax_first(probs).expect("non-empty distribution"),
        ActionMode::Sample(rng) => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut last = 0;
            for (i, &p) in probs.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                acc += p;
                last = i;
                if u < acc {
                    return i;
                }
            }
            last
        }
    }
}

pub struct Thermos {
    pub policy: Ddt,
    pub scales: StateScales,
    pub pref: Preference,
    pub ambient: f64,
    pub mode: ActionMode,
    pub recorder: Option<Recorder>,
}

impl Thermos {
    pub fn deployed(policy: Ddt, scales: StateScales, pref: Preference, ambient: f64) -> Self {
        Thermos { policy, scales, pref, ambient, mode: ActionMode::Argmax, recorder: None }
    }

    /// Cluster probabilities for a request, or `None` if no cluster is valid.
    pub fn distribution(&self, req: &LayerRequest) -> Option<(Vec<f64>, [f64; super::POLICY_INPUTS], [bool; 4])> {
        let valid = req.valid_clusters();
        if !valid.iter().any(|&v| v) {
            return None;
        }
        let x = policy_input(&build_state(req, &self.scales, self.ambient), &self.pref);
        Some((self.policy.forward(&x, &valid).probs, x, valid))
    }
}

impl Scheduler for Thermos {
    fn name(&self) -> &str {
        "thermos"
    }

    fn select_cluster(&mut self, req: &LayerRequest) -> Option<PimType> {
        let (probs, input, valid) = self.distribution(req)?;
        let a = select_action(&probs, &mut self.mode);
        if let Some(rec) = &mut self.recorder {
            rec.record(Transition {
                input,
                valid,
                action: a,
                old_log_prob: probs[a].ln(),
                reward: [0.0; 2],
                terminal: false,
            });
        }
        PimType::from_index(a)
    }

    fn begin_job(&mut self, _job: &Workload) {
        if let Some(r) = &mut self.recorder {
            r.begin_job();
        }
    }

    fn job_scheduled(&mut self, job: u64, ideal_exec: f64, ideal_energy: f64) {
        if let Some(r) = &mut self.recorder {
            r.scheduled(job, ideal_exec, ideal_energy);
        }
    }

    fn job_aborted(&mut self, _job: u64) {
        if let Some(r) = &mut self.recorder {
            r.abort();
        }
    }

    fn job_finished(&mut self, rec: &JobRecord) {
        if let Some(r) = &mut self.recorder {
            r.finished(rec.id, rec.stall_time, rec.stall_energy);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn argmax_and_degenerate_sampling() {
        assert_eq!(select_action(&[0.2, 0.5, 0.3, 0.0], &mut ActionMode::Argmax), 1);
        let mut m = ActionMode::Sample(ChaCha8Rng::seed_from_u64(1));
        for _ in 0..1000 {
            assert_eq!(select_action(&[1.0, 0.0, 0.0, 0.0], &mut m), 0);
        }
    }

    #[test]
    fn sampled_frequencies_within_three_sigma() {
        let p = [0.1, 0.4, 0.2, 0.3];
        let n = 100_000;
        let mut m = ActionMode::Sample(ChaCha8Rng::seed_from_u64(7));
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[select_action(&p, &mut m)] += 1;
        }
        for k in 0..4 {
            let sigma = (n as f64 * p[k] * (1.0 - p[k])).sqrt();
            assert!((counts[k] as f64 - n as f64 * p[k]).abs() <= 3.0 * sigma, "{k}: {}", counts[k]);
        }
    }
}
