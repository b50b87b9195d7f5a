//! Policy input: 20 normalized features plus the preference vector.
//!
//! Size-like quantities span orders of magnitude across models, so they are
//! log-scaled: `ln(1 + x) / ln(1 + scale)`, clamped to `[0, 1]`.
//!
//! | index | feature |
//! |-------|---------|
//! | 0..3  | remaining bits of this layer, its MACs, its incoming activation bits |
//! | 3..8  | layers after this one, weight bits / MACs / activation bits from this layer on, frames |
//! | 8..12 | free fraction of each cluster's memory |
//! | 12..16| hottest chiplet of each cluster, `(T − ambient) / (t_max − ambient)` |
//! | 16..20| share of the previous layer's bits on each cluster |

use serde::{Deserialize, Serialize};

use crate::arch::{cluster_view_with, PimType};
use crate::error::{Error, Result};
use crate::sched::LayerRequest;
use crate::workload::Dcg;

pub const STATE_FEATURES: usize = 20;
pub const OBJECTIVES: usize = 2;
pub const POLICY_INPUTS: usize = STATE_FEATURES + OBJECTIVES;

/// Preference over (latency, energy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preference(pub [f64; OBJECTIVES]);

impl Preference {
    pub const LATENCY: Preference = Preference([1.0, 0.0]);
    pub const ENERGY: Preference = Preference([0.0, 1.0]);
    pub const BALANCED: Preference = Preference([0.5, 0.5]);

    pub fn new(latency: f64, energy: f64) -> Result<Self> {
        let p = Preference([latency, energy]);
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let [l, e] = self.0;
        if !(l >= 0.0 && e >= 0.0) || (l + e - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("preference ({l}, {e}) must be non-negative and sum to 1")));
        }
        Ok(())
    }

    pub fn dot(&self, v: &[f64; OBJECTIVES]) -> f64 {
        self.0[0] * v[0] + self.0[1] * v[1]
    }
}

/// Normalization anchors; fixed for a training run and stored with the policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateScales {
    pub layer_weight_bits: f64,
    pub layer_macs: f64,
    pub layer_in_bits: f64,
    /// Largest layer count in the pool.
    pub layers: f64,
    pub model_weight_bits: f64,
    pub model_macs: f64,
    pub model_act_bits: f64,
    pub frames: f64,
}

impl StateScales {
    /// Maxima over a model pool and a frame range.
    pub fn from_pool(pool: &[&Dcg], max_frames: u64) -> Self {
        let mut s = StateScales {
            layer_weight_bits: 1.0,
            layer_macs: 1.0,
            layer_in_bits: 1.0,
            layers: 1.0,
            model_weight_bits: 1.0,
            model_macs: 1.0,
            model_act_bits: 1.0,
            frames: max_frames.max(1) as f64,
        };
        for d in pool {
            for (i, l) in d.layers().iter().enumerate() {
                s.layer_weight_bits = s.layer_weight_bits.max(l.weight_bits as f64);
                s.layer_macs = s.layer_macs.max(l.mac_ops as f64);
                s.layer_in_bits = s.layer_in_bits.max(d.incoming_bits(i) as f64);
            }
            s.layers = s.layers.max(d.len() as f64);
            s.model_weight_bits = s.model_weight_bits.max(d.total_weight_bits() as f64);
            s.model_macs = s.model_macs.max(d.total_mac_ops() as f64);
            s.model_act_bits = s.model_act_bits.max(d.remaining_activation_bits(0) as f64);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let v = [
            self.layer_weight_bits,
            self.layer_macs,
            self.layer_in_bits,
            self.layers,
            self.model_weight_bits,
            self.model_macs,
            self.model_act_bits,
            self.frames,
        ];
        if v.iter().all(|x| x.is_finite() && *x >= 1.0) {
            Ok(())
        } else {
            Err(Error::Config("state scales must be finite and >= 1".into()))
        }
    }
}

fn log_norm(x: f64, scale: f64) -> f64 {
    ((1.0 + x).ln() / (1.0 + scale).ln()).clamp(0.0, 1.0)
}

/// Builds the 20 state features for a placement request. `ambient` anchors
/// the temperature features.
pub fn build_state(req: &LayerRequest, scales: &StateScales, ambient: f64) -> [f64; STATE_FEATURES] {
    let dcg = req.dcg;
    let i = req.layer;
    let mut s = [0.0; STATE_FEATURES];
    s[0] = log_norm(req.remaining_bits as f64, scales.layer_weight_bits);
    s[1] = log_norm(dcg.layer(i).mac_ops as f64, scales.layer_macs);
    s[2] = log_norm(dcg.incoming_bits(i) as f64, scales.layer_in_bits);
    s[3] = if scales.layers > 1.0 { ((dcg.len() - 1 - i) as f64 / (scales.layers - 1.0)).clamp(0.0, 1.0) } else { 0.0 };
    s[4] = log_norm(dcg.remaining_weight_bits(i) as f64, scales.model_weight_bits);
    s[5] = log_norm(dcg.remaining_mac_ops(i) as f64, scales.model_macs);
    s[6] = log_norm(dcg.remaining_activation_bits(i) as f64, scales.model_act_bits);
    s[7] = log_norm(req.frames as f64, scales.frames);

    let view = cluster_view_with(req.acg, req.avail);
    for t in PimType::ALL {
        let c = &view.clusters[t];
        let k = t.index();
        s[8 + k] = if c.total_mem_cap > 0 { c.total_mem_avail as f64 / c.total_mem_cap as f64 } else { 0.0 };
        s[12 + k] = match c.max_temp {
            Some(temp) => {
                let t_max = c.members.iter().map(|&m| req.acg.chiplet(m).t_max).fold(f64::INFINITY, f64::min);
                ((temp - ambient) / (t_max - ambient)).clamp(0.0, 1.0)
            }
            None => 0.0,
        };
    }

    let total: u64 = req.prev.iter().map(|p| p.bits).sum();
    if total > 0 {
        for p in req.prev {
            if let Some(t) = req.acg.chiplet(p.chiplet).pim_type() {
                s[16 + t.index()] += p.bits as f64 / total as f64;
            }
        }
    }
    s
}

pub fn policy_input(state: &[f64; STATE_FEATURES], pref: &Preference) -> [f64; POLICY_INPUTS] {
    let mut x = [0.0; POLICY_INPUTS];
    x[..STATE_FEATURES].copy_from_slice(state);
    x[STATE_FEATURES..].copy_from_slice(&pref.0);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{Acg, Chiplet, Link};
    use crate::sim::Placement;
    use crate::workload::{build_dcg, LayerShape};

    fn system() -> Acg {
        let c = |i, t| Chiplet::compute(i, t, 1000, 330.0, (i as f64 * 3.5, 0.0), 4.0);
        Acg::new(
            vec![Chiplet::io(0, (0.0, 0.0), 4.0), c(1, PimType::Standard), c(2, PimType::AdcLess)],
            vec![Link::plain(0, 1), Link::plain(1, 2)],
        )
        .unwrap()
    }

    fn model() -> Dcg {
        let shapes = vec![LayerShape::fc(16, 16, 8), LayerShape::fc(16, 4, 8)];
        build_dcg("m", &shapes, &[(0, 1)], 128).unwrap()
    }

    #[test]
    fn boundary_features() {
        let acg = system();
        let dcg = model();
        let scales = StateScales::from_pool(&[&dcg], 100);
        let avail = acg.mem_avail();
        let prev = [Placement { chiplet: 1, bits: 5 }];
        let req = LayerRequest { acg: &acg, dcg: &dcg, layer: 1, remaining_bits: 512, prev: &prev, frames: 100, avail: &avail };
        let s = build_state(&req, &scales, 298.0);
        assert_eq!(s[3], 0.0, "last layer");
        assert_eq!(s[7], 1.0);
        assert_eq!(&s[8..12], &[1.0, 0.0, 0.0, 1.0], "empty system is fully free; absent clusters read 0");
        assert_eq!(&s[16..20], &[1.0, 0.0, 0.0, 0.0]);
        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn preference_must_sum_to_one() {
        assert!(Preference::new(0.3, 0.7).is_ok());
        assert!(Preference::new(0.3, 0.6).is_err());
        assert!(Preference::new(-0.5, 1.5).is_err());
    }
}
