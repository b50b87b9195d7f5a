//! Soft differentiable decision tree actor.
//!
//! Internal node `n` (heap order, children `2n+1` left and `2n+2` right)
//! routes left with probability `g_n = σ(α_n (β_n·x + b_n))`. A leaf's path
//! probability is the product of the gate choices along its path, the
//! output logits are the path-weighted mix of leaf logit vectors, and the
//! action distribution is the softmax of those logits after masking.
//!
//! Parameters are one flat vector: per internal node `[β (n_in), b, α]`,
//! then `n_actions` logits per leaf.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logit assigned to invalid actions.
pub const MASK_LOGIT: f64 = -1e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ddt {
    pub depth: usize,
    pub n_in: usize,
    pub n_actions: usize,
    pub params: Vec<f64>,
}

/// Intermediate values of one forward pass, reused by the backward pass.
#[derive(Debug, Clone)]
pub struct DdtTrace {
    gates: Vec<f64>,
    pre: Vec<f64>,
    reach: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Ddt {
    pub fn n_internal(&self) -> usize {
        (1 << self.depth) - 1
    }

    pub fn n_leaves(&self) -> usize {
        1 << self.depth
    }

    fn node_stride(&self) -> usize {
        self.n_in + 2
    }

    fn leaf_offset(&self) -> usize {
        self.n_internal() * self.node_stride()
    }

    pub fn param_count(depth: usize, n_in: usize, n_actions: usize) -> usize {
        ((1 << depth) - 1) * (n_in + 2) + (1 << depth) * n_actions
    }

    /// Steepness 1, node weights uniform in `±init_scale`, zero biases and
    /// leaf logits: the initial policy is uniform.
    pub fn new<R: Rng>(depth: usize, n_in: usize, n_actions: usize, init_scale: f64, rng: &mut R) -> Result<Self> {
        if depth == 0 || depth > 12 || n_in == 0 || n_actions == 0 {
            return Err(Error::Config(format!("invalid tree shape depth={depth} n_in={n_in} n_actions={n_actions}")));
        }
        let mut t = Ddt { depth, n_in, n_actions, params: vec![0.0; Self::param_count(depth, n_in, n_actions)] };
        let stride = t.node_stride();
        for n in 0..t.n_internal() {
            let base = n * stride;
            for k in 0..n_in {
                t.params[base + k] = rng.gen_range(-init_scale..=init_scale);
            }
            t.params[base + n_in + 1] = 1.0;
        }
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.len() != Self::param_count(self.depth, self.n_in, self.n_actions) {
            return Err(Error::Config("tree parameter count does not match its shape".into()));
        }
        if !self.params.iter().all(|p| p.is_finite()) {
            return Err(Error::Diverged("non-finite tree parameter".into()));
        }
        Ok(())
    }

    /// Leaf logit vector of `leaf` (0-based, left to right).
    pub fn leaf_logits_mut(&mut self, leaf: usize) -> &mut [f64] {
        let o = self.leaf_offset() + leaf * self.n_actions;
        &mut self.params[o..o + self.n_actions]
    }

    /// Mixed leaf logits before masking.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.trace_inner(x).0
    }

    fn trace_inner(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        debug_assert_eq!(x.len(), self.n_in);
        let ni = self.n_internal();
        let stride = self.node_stride();
        let mut gates = vec![0.0; ni];
        let mut pre = vec![0.0; ni];
        for n in 0..ni {
            let w = &self.params[n * stride..(n + 1) * stride];
            let h: f64 = w[..self.n_in].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[self.n_in];
            pre[n] = h;
            gates[n] = sigmoid(w[self.n_in + 1] * h);
        }
        // reach probability of every node, internal then leaves, heap order
        let total = ni + self.n_leaves();
        let mut reach = vec![0.0; total];
        reach[0] = 1.0;
        for n in 0..ni {
            reach[2 * n + 1] = reach[n] * gates[n];
            reach[2 * n + 2] = reach[n] * (1.0 - gates[n]);
        }
        let mut z = vec![0.0; self.n_actions];
        let lo = self.leaf_offset();
        for l in 0..self.n_leaves() {
            let mu = reach[ni + l];
            let phi = &self.params[lo + l * self.n_actions..lo + (l + 1) * self.n_actions];
            for (zi, p) in z.iter_mut().zip(phi) {
                *zi += mu * p;
            }
        }
        (z, gates, pre, reach)
    }

    /// Masked action distribution. At least one action must be valid.
    pub fn forward(&self, x: &[f64], valid: &[bool]) -> DdtTrace {
        let (z, gates, pre, reach) = self.trace_inner(x);
        let probs = softmax(&mask_invalid(&z, valid));
        DdtTrace { gates, pre, reach, probs }
    }

    /// Adds `scale · ∂ log π(a | x) / ∂θ` to `grad`.
    pub fn backward_log_prob(&self, x: &[f64], valid: &[bool], trace: &DdtTrace, a: usize, scale: f64, grad: &mut [f64]) {
        let ni = self.n_internal();
        let stride = self.node_stride();
        // d log p_a / d z_j = 1[j = a] − p_j for valid j, 0 for masked j
        let dz: Vec<f64> = (0..self.n_actions)
            .map(|j| if valid[j] { scale * ((j == a) as u8 as f64 - trace.probs[j]) } else { 0.0 })
            .collect();
        let lo = self.leaf_offset();
        // s[node] = expected dz·φ over leaves below `node`, given the node is reached
        let mut s = vec![0.0; ni + self.n_leaves()];
        for l in 0..self.n_leaves() {
            let mu = trace.reach[ni + l];
            let o = lo + l * self.n_actions;
            let mut v = 0.0;
            for j in 0..self.n_actions {
                grad[o + j] += mu * dz[j];
                v += dz[j] * self.params[o + j];
            }
            s[ni + l] = v;
        }
        for n in (0..ni).rev() {
            let g = trace.gates[n];
            let (sl, sr) = (s[2 * n + 1], s[2 * n + 2]);
            s[n] = g * sl + (1.0 - g) * sr;
            let dg = trace.reach[n] * (sl - sr);
            let du = dg * g * (1.0 - g);
            let base = n * stride;
            let alpha = self.params[base + self.n_in + 1];
            let dh = du * alpha;
            for k in 0..self.n_in {
                grad[base + k] += dh * x[k];
            }
            grad[base + self.n_in] += dh;
            grad[base + self.n_in + 1] += du * trace.pre[n];
        }
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Replaces invalid entries by [`MASK_LOGIT`].
pub fn mask_invalid(logits: &[f64], valid: &[bool]) -> Vec<f64> {
    logits.iter().zip(valid).map(|(&z, &ok)| if ok { z } else { MASK_LOGIT }).collect()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_tree_is_uniform_average_of_leaves() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut t = Ddt::new(2, 3, 4, 0.0, &mut rng).unwrap();
        for l in 0..4 {
            t.leaf_logits_mut(l).copy_from_slice(&[l as f64, 0.0, 0.0, 0.0]);
        }
        let tr = t.forward(&[0.3, -1.0, 2.0], &[true; 4]);
        let expect = softmax(&[1.5, 0.0, 0.0, 0.0]);
        for (a, b) in tr.probs.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_gate_selects_left_leaf() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut t = Ddt::new(1, 1, 2, 0.0, &mut rng).unwrap();
        t.params[1] = 1.0; // bias
        t.params[2] = 100.0; // steepness
        t.leaf_logits_mut(0).copy_from_slice(&[2.0, 0.0]);
        t.leaf_logits_mut(1).copy_from_slice(&[-5.0, 5.0]);
        let p = t.forward(&[0.0], &[true, true]).probs;
        let expect = softmax(&[2.0, 0.0]);
        assert!((p[0] - expect[0]).abs() < 1e-12);
    }

    #[test]
    fn masked_entry_underflows() {
        let p = softmax(&mask_invalid(&[0.5, 1.0, -2.0, 0.0], &[true, false, true, true]));
        assert_eq!(p[1], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let one = softmax(&mask_invalid(&[3.0, 1.0], &[false, true]));
        assert_eq!(one, vec![0.0, 1.0]);
    }
}
