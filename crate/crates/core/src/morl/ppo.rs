//! Preference-scalarized clipped policy loss, vector TD value loss and the
//! optimizer.

use serde::{Deserialize, Serialize};

use super::ddt::Ddt;
use super::state::{Preference, OBJECTIVES, POLICY_INPUTS};
use super::value::ValueNet;

/// One level-1 decision with its rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// State features followed by the preference.
    pub input: [f64; POLICY_INPUTS],
    pub valid: [bool; 4],
    pub action: usize,
    pub old_log_prob: f64,
    pub reward: [f64; OBJECTIVES],
    /// Last decision of its episode.
    pub terminal: bool,
}

impl Transition {
    pub fn preference(&self) -> Preference {
        Preference([self.input[POLICY_INPUTS - 2], self.input[POLICY_INPUTS - 1]])
    }
}

/// `r + γ·V(s')·(1 − terminal) − V(s)`, componentwise.
pub fn advantage(
    r: &[f64; OBJECTIVES],
    v: &[f64],
    v_next: &[f64],
    gamma: f64,
    terminal: bool,
) -> [f64; OBJECTIVES] {
    let boot = if terminal { 0.0 } else { gamma };
    std::array::from_fn(|k| r[k] + boot * v_next[k] - v[k])
}

/// A policy-loss sample: the transition plus its fixed advantage vector.
#[derive(Debug, Clone, Copy)]
pub struct PolicySample<'a> {
    pub t: &'a Transition,
    /// Scalarized advantage `ωᵀA`.
    pub adv: f64,
}

/// Clipped surrogate `L = mean(min(ρ·Â, clip(ρ, 1−ε, 1+ε)·Â))`. Returns
/// `(−L, ∂(−L)/∂θ)` so that descent maximizes the surrogate.
pub fn policy_loss(batch: &[PolicySample], policy: &Ddt, clip: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; policy.params.len()];
    if batch.is_empty() {
        return (0.0, grad);
    }
    let n = batch.len() as f64;
    let mut total = 0.0;
    for s in batch {
        let tr = policy.forward(&s.t.input, &s.t.valid);
        let ratio = (tr.probs[s.t.action].ln() - s.t.old_log_prob).exp();
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
        let (a, b) = (ratio * s.adv, clipped * s.adv);
        total += a.min(b);
        // the unclipped branch carries the gradient when it is the minimum
        if a <= b {
            policy.backward_log_prob(&s.t.input, &s.t.valid, &tr, s.t.action, -s.adv * ratio / n, &mut grad);
        }
    }
    (-total / n, grad)
}

/// `mean ‖V(s) − y‖²` with the targets `y` held constant.
pub fn value_loss(batch: &[(&[f64; POLICY_INPUTS], [f64; OBJECTIVES])], net: &ValueNet) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; net.params.len()];
    if batch.is_empty() {
        return (0.0, grad);
    }
    let n = batch.len() as f64;
    let mut total = 0.0;
    for (x, y) in batch {
        let tr = net.forward(&x[..]);
        let d: Vec<f64> = tr.out.iter().zip(y).map(|(v, t)| v - t).collect();
        total += d.iter().map(|e| e * e).sum::<f64>();
        let d_out: Vec<f64> = d.iter().map(|e| 2.0 * e / n).collect();
        net.backward(&x[..], &tr, &d_out, &mut grad);
    }
    (total / n, grad)
}

/// Rescales `grad` so its L2 norm is at most `max_norm`; returns the
/// original norm.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn advantage_examples() {
        assert_eq!(advantage(&[-1.0, -2.0], &[0.0, 0.0], &[5.0, 5.0], 0.0, false), [-1.0, -2.0]);
        assert_eq!(advantage(&[-1.0, -2.0], &[-3.0, -3.0], &[9.0, 9.0], 0.95, true), [2.0, 1.0]);
        let a = advantage(&[-1.0, -2.0], &[-3.0, -3.0], &[-2.0, -1.0], 0.95, false);
        assert!((a[0] - 0.1).abs() < 1e-12 && (a[1] - 0.05).abs() < 1e-12);
    }

    fn transition(policy: &Ddt, rng: &mut ChaCha8Rng, ratio_shift: f64) -> Transition {
        use rand::Rng;
        let input: [f64; POLICY_INPUTS] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
        let valid = [true, true, rng.gen_bool(0.5), true];
        let p = policy.forward(&input, &valid).probs;
        Transition { input, valid, action: 1, old_log_prob: p[1].ln() - ratio_shift, reward: [0.0; 2], terminal: false }
    }

    #[test]
    fn on_policy_loss_is_mean_advantage() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = Ddt::new(3, POLICY_INPUTS, 4, 0.5, &mut rng).unwrap();
        let ts: Vec<Transition> = (0..5).map(|_| transition(&d, &mut rng, 0.0)).collect();
        let batch: Vec<PolicySample> = ts.iter().enumerate().map(|(i, t)| PolicySample { t, adv: i as f64 - 2.0 }).collect();
        let (loss, _) = policy_loss(&batch, &d, 0.1);
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn clip_branch_has_no_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Ddt::new(2, POLICY_INPUTS, 4, 0.5, &mut rng).unwrap();
        // ρ = 1 + 2ε with a positive advantage
        let t = transition(&d, &mut rng, (1.2f64).ln());
        let (loss, g) = policy_loss(&[PolicySample { t: &t, adv: 2.0 }], &d, 0.1);
        assert!((loss + 1.1 * 2.0).abs() < 1e-12);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn value_loss_hand_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = ValueNet::new(POLICY_INPUTS, 8, 2, &mut rng).unwrap();
        net.params.iter_mut().for_each(|p| *p = 0.0);
        let x = [0.3; POLICY_INPUTS];
        let (loss, _) = value_loss(&[(&x, [1.0, 2.0])], &net);
        assert_eq!(loss, 5.0);
        let (zero, _) = value_loss(&[(&x, [0.0, 0.0])], &net);
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn grad_norm_clip() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        assert!((g[0] - 0.3).abs() < 1e-15 && (g[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = vec![5.0, -3.0];
        let mut opt = Adam::new(2, 0.1);
        for _ in 0..2000 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut p, &g);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-3));
    }
}
