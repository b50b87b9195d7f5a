//! Two-level scheduling: a level-1 policy picks a PIM cluster per layer,
//! level 2 places the layer's weights on chiplets of that cluster by
//! proximity to the previous layer.

mod baselines;

use std::cmp::Ordering;

pub use baselines::{BigLittle, OverAllocate, RandomCluster, Simba};

use crate::arch::{Acg, PimType};
use crate::sim::{JobRecord, Placement};
use crate::workload::{Dcg, Workload};

/// What a scheduler sees when asked to place (the rest of) one layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerRequest<'a> {
    pub acg: &'a Acg,
    pub dcg: &'a Dcg,
    pub layer: usize,
    /// Bits of this layer not yet placed.
    pub remaining_bits: u64,
    /// Placements of the previous layer (empty for the first layer).
    pub prev: &'a [Placement],
    pub frames: u64,
    /// Tentative per-chiplet free memory, including this job's earlier layers.
    pub avail: &'a [u64],
}

impl LayerRequest<'_> {
    pub fn eligible(&self, id: usize) -> bool {
        let c = self.acg.chiplet(id);
        !c.is_io() && !c.throttled && self.avail[id] > 0
    }

    /// Clusters with at least one eligible chiplet, in enum order.
    pub fn valid_clusters(&self) -> [bool; PimType::COUNT] {
        PimType::ALL.map(|t| self.acg.cluster_members(t).iter().any(|&c| self.eligible(c)))
    }
}

pub trait Scheduler: Send {
    fn name(&self) -> &str;

    /// Level-1 choice; `None` means no valid cluster (the job must wait).
    fn select_cluster(&mut self, req: &LayerRequest) -> Option<PimType>;

    /// Level-2 placement within `cluster`.
    fn allocate(&mut self, req: &LayerRequest, cluster: PimType) -> Vec<Placement> {
        proximity_allocate(req.acg, Some(cluster), req.remaining_bits, req.prev, req.avail)
    }

    /// Places a whole layer, re-invoking level 1 while weights remain.
    /// Returns `None` if the layer cannot be placed right now.
    fn place_layer(&mut self, req: &LayerRequest) -> Option<Vec<Placement>> {
        let mut avail = req.avail.to_vec();
        let mut remaining = req.remaining_bits;
        let mut out: Vec<Placement> = Vec::new();
        while remaining > 0 {
            let r = LayerRequest { remaining_bits: remaining, avail: &avail, ..*req };
            let cluster = self.select_cluster(&r)?;
            let ps = self.allocate(&r, cluster);
            if ps.is_empty() {
                return None;
            }
            for p in ps {
                avail[p.chiplet] = avail[p.chiplet].saturating_sub(p.bits);
                remaining = remaining.saturating_sub(p.bits);
                match out.iter_mut().find(|q| q.chiplet == p.chiplet) {
                    Some(q) => q.bits += p.bits,
                    None => out.push(p),
                }
            }
        }
        Some(out)
    }

    fn begin_job(&mut self, _job: &Workload) {}
    /// All layers placed; `ideal_exec` and `ideal_energy` describe the
    /// contention-free run.
    fn job_scheduled(&mut self, _job: u64, _ideal_exec: f64, _ideal_energy: f64) {}
    /// A scheduling attempt was rolled back.
    fn job_aborted(&mut self, _job: u64) {}
    fn job_finished(&mut self, _record: &JobRecord) {}
}

/// Σ b·hops(p, c) over the previous placements, or the hop count to the
/// nearest I/O chiplet for a first layer. All candidates share the
/// denominator Σ b, so numerators compare exactly.
pub fn weighted_distance_numerator(acg: &Acg, prev: &[Placement], c: usize) -> u128 {
    if prev.is_empty() {
        acg.hops_to_io(c) as u128
    } else {
        prev.iter().map(|p| p.bits as u128 * acg.hops(p.chiplet, c) as u128).sum()
    }
}

/// Weighted distance of `c` from the previous layer, as a real number.
pub fn weighted_distance(acg: &Acg, prev: &[Placement], c: usize) -> f64 {
    let total: u64 = prev.iter().map(|p| p.bits).sum();
    let num = weighted_distance_numerator(acg, prev, c) as f64;
    if total == 0 {
        num
    } else {
        num / total as f64
    }
}

/// Greedy fill of the eligible chiplets (of `cluster`, or of every
/// cluster when `None`) in order of weighted distance, then id.
pub fn proximity_allocate(
    acg: &Acg,
    cluster: Option<PimType>,
    remaining_bits: u64,
    prev: &[Placement],
    avail: &[u64],
) -> Vec<Placement> {
    let mut cands: Vec<(u128, usize)> = acg
        .chiplets()
        .iter()
        .filter(|c| !c.is_io() && !c.throttled && avail[c.id] > 0)
        .filter(|c| cluster.is_none() || c.pim_type() == cluster)
        .map(|c| (weighted_distance_numerator(acg, prev, c.id), c.id))
        .collect();
    cands.sort_unstable();
    let mut left = remaining_bits;
    let mut out = Vec::new();
    for (_, id) in cands {
        if left == 0 {
            break;
        }
        let take = left.min(avail[id]);
        out.push(Placement { chiplet: id, bits: take });
        left -= take;
    }
    out
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) if s.partial_cmp(&scores[b]) == Some(Ordering::Greater) => best = Some(i),
            _ => {}
        }
    }
    best
}

pub fn scheduler_names() -> &'static [&'static str] {
    &["thermos", "simba", "biglittle", "random"]
}
