use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{argmax_first, proximity_allocate, LayerRequest, Scheduler};
use crate::arch::PimType;
use crate::sim::Placement;

/// Nearest-neighbor placement across the whole system, blind to PIM type.
#[derive(Debug, Default, Clone)]
pub struct Simba;

impl Scheduler for Simba {
    fn name(&self) -> &str {
        "simba"
    }

    fn select_cluster(&mut self, req: &LayerRequest) -> Option<PimType> {
        let ps = proximity_allocate(req.acg, None, 1, req.prev, req.avail);
        ps.first().and_then(|p| req.acg.chiplet(p.chiplet).pim_type())
    }

    fn place_layer(&mut self, req: &LayerRequest) -> Option<Vec<Placement>> {
        let ps = proximity_allocate(req.acg, None, req.remaining_bits, req.prev, req.avail);
        let placed: u64 = ps.iter().map(|p| p.bits).sum();
        (placed == req.remaining_bits).then_some(ps)
    }
}

/// Utilization-driven cluster choice: prefer the cluster whose best free
/// chiplet most closely matches the layer's size.
#[derive(Debug, Default, Clone)]
pub struct BigLittle;

impl BigLittle {
    /// `min(w, a) / max(w, a)` for the largest eligible free block `a`;
    /// `None` if the cluster has no eligible chiplet.
    pub fn fit(req: &LayerRequest, t: PimType) -> Option<f64> {
        let a = req
            .acg
            .cluster_members(t)
            .iter()
            .filter(|&&c| req.eligible(c))
            .map(|&c| req.avail[c])
            .max()?;
        let w = req.remaining_bits;
        Some(w.min(a) as f64 / w.max(a) as f64)
    }
}

impl Scheduler for BigLittle {
    fn name(&self) -> &str {
        "biglittle"
    }

    fn select_cluster(&mut self, req: &LayerRequest) -> Option<PimType> {
        let scores = PimType::ALL.map(|t| Self::fit(req, t).unwrap_or(f64::NAN));
        argmax_first(&scores).map(|i| PimType::ALL[i])
    }
}

/// Uniform choice among clusters that can take weights.
#[derive(Debug, Clone)]
pub struct RandomCluster {
    rng: ChaCha8Rng,
}

impl RandomCluster {
    pub fn new(seed: u64) -> Self {
        RandomCluster { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Scheduler for RandomCluster {
    fn name(&self) -> &str {
        "random"
    }

    fn select_cluster(&mut self, req: &LayerRequest) -> Option<PimType> {
        let valid: Vec<PimType> =
            PimType::ALL.into_iter().zip(req.valid_clusters()).filter(|&(_, ok)| ok).map(|(t, _)| t).collect();
        if valid.is_empty() {
            return None;
        }
        Some(valid[self.rng.gen_range(0..valid.len())])
    }
}

/// Fault injection: puts every layer on the first compute chiplet,
/// ignoring free memory.
#[derive(Debug, Default, Clone)]
pub struct OverAllocate;

impl Scheduler for OverAllocate {
    fn name(&self) -> &str {
        "over-allocate"
    }

    fn select_cluster(&mut self, req: &LayerRequest) -> Option<PimType> {
        req.acg.compute_ids().next().and_then(|c| req.acg.chiplet(c).pim_type())
    }

    fn place_layer(&mut self, req: &LayerRequest) -> Option<Vec<Placement>> {
        let c = req.acg.compute_ids().next()?;
        Some(vec![Placement { chiplet: c, bits: req.remaining_bits }])
    }
}
