//! Vector-valued critic: three fully connected layers (two tanh hidden
//! layers and a linear head), one output per objective.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNet {
    pub n_in: usize,
    pub hidden: usize,
    pub n_out: usize,
    /// `W1, b1, W2, b2, W3, b3`, weights row-major (output-major).
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ValueTrace {
    h1: Vec<f64>,
    h2: Vec<f64>,
    pub out: Vec<f64>,
}

impl ValueNet {
    pub fn param_count(n_in: usize, hidden: usize, n_out: usize) -> usize {
        hidden * n_in + hidden + hidden * hidden + hidden + n_out * hidden + n_out
    }

    /// Uniform `±1/√fan_in` weights, zero biases.
    pub fn new<R: Rng>(n_in: usize, hidden: usize, n_out: usize, rng: &mut R) -> Result<Self> {
        if n_in == 0 || hidden == 0 || n_out == 0 {
            return Err(Error::Config("value network dimensions must be positive".into()));
        }
        let mut net = ValueNet { n_in, hidden, n_out, params: vec![0.0; Self::param_count(n_in, hidden, n_out)] };
        let o = net.offsets();
        let fill = |p: &mut [f64], fan_in: usize, rng: &mut R| {
            let s = 1.0 / (fan_in as f64).sqrt();
            p.iter_mut().for_each(|w| *w = rng.gen_range(-s..=s));
        };
        fill(&mut net.params[o[0]..o[1]], n_in, rng);
        fill(&mut net.params[o[2]..o[3]], hidden, rng);
        fill(&mut net.params[o[4]..o[5]], hidden, rng);
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.len() != Self::param_count(self.n_in, self.hidden, self.n_out) {
            return Err(Error::Config("value network parameter count does not match its shape".into()));
        }
        if !self.params.iter().all(|p| p.is_finite()) {
            return Err(Error::Diverged("non-finite value network parameter".into()));
        }
        Ok(())
    }

    /// Start offsets of W1, b1, W2, b2, W3, b3 and the end.
    fn offsets(&self) -> [usize; 7] {
        let (i, h, o) = (self.n_in, self.hidden, self.n_out);
        let mut a = [0; 7];
        let sizes = [h * i, h, h * h, h, o * h, o];
        for k in 0..6 {
            a[k + 1] = a[k] + sizes[k];
        }
        a
    }

    pub fn forward(&self, x: &[f64]) -> ValueTrace {
        let o = self.offsets();
        let p = &self.params;
        let h1 = dense(&p[o[0]..o[1]], &p[o[1]..o[2]], x, true);
        let h2 = dense(&p[o[2]..o[3]], &p[o[3]..o[4]], &h1, true);
        let out = dense(&p[o[4]..o[5]], &p[o[5]..o[6]], &h2, false);
        ValueTrace { h1, h2, out }
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).out
    }

    /// Adds `Σ_k d_out[k] · ∂V_k/∂θ` to `grad`.
    pub fn backward(&self, x: &[f64], tr: &ValueTrace, d_out: &[f64], grad: &mut [f64]) {
        let o = self.offsets();
        let p = &self.params;
        let d_h2 = dense_back(&p[o[4]..o[5]], &tr.h2, d_out, grad, o[4], o[5]);
        let d_u2: Vec<f64> = d_h2.iter().zip(&tr.h2).map(|(d, h)| d * (1.0 - h * h)).collect();
        let d_h1 = dense_back(&p[o[2]..o[3]], &tr.h1, &d_u2, grad, o[2], o[3]);
        let d_u1: Vec<f64> = d_h1.iter().zip(&tr.h1).map(|(d, h)| d * (1.0 - h * h)).collect();
        dense_back(&p[o[0]..o[1]], x, &d_u1, grad, o[0], o[1]);
    }
}

fn dense(w: &[f64], b: &[f64], x: &[f64], tanh: bool) -> Vec<f64> {
    let n = x.len();
    b.iter()
        .enumerate()
        .map(|(r, bias)| {
            let u = bias + w[r * n..(r + 1) * n].iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
            if tanh {
                u.tanh()
            } else {
                u
            }
        })
        .collect()
}

/// Accumulates weight and bias gradients of one dense layer; returns the
/// gradient with respect to its input.
fn dense_back(w: &[f64], x: &[f64], d_u: &[f64], grad: &mut [f64], w_off: usize, b_off: usize) -> Vec<f64> {
    let n = x.len();
    let mut d_x = vec![0.0; n];
    for (r, &d) in d_u.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &w[r * n..(r + 1) * n];
        let g = &mut grad[w_off + r * n..w_off + (r + 1) * n];
        for k in 0..n {
            g[k] += d * x[k];
            d_x[k] += d * row[k];
        }
        grad[b_off + r] += d;
    }
    d_x
}
