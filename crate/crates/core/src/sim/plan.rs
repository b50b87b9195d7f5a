//! Ideal (contention-free, unthrottled) execution of one job under an
//! assignment: pipelined frame streaming with per-layer stages.

use std::collections::BTreeMap;

use crate::arch::Acg;
use crate::cost::{compute_cost, CommTable, CostModel};
use crate::error::{Error, Result};
use crate::workload::Dcg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub chiplet: usize,
    pub bits: u64,
}

/// Per-layer ordered placements (ψ_i for every layer i).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub layers: Vec<Vec<Placement>>,
}

impl Assignment {
    /// Bits held per chiplet, summed over layers.
    pub fn bits_per_chiplet(&self) -> BTreeMap<usize, u64> {
        let mut m = BTreeMap::new();
        for p in self.layers.iter().flatten() {
            *m.entry(p.chiplet).or_insert(0) += p.bits;
        }
        m
    }

    /// Checks coverage and memory bounds against `acg`'s current availability.
    pub fn validate(&self, acg: &Acg, dcg: &Dcg) -> Result<()> {
        if self.layers.len() != dcg.len() {
            return Err(Error::Invariant(format!(
                "assignment covers {} layers, model has {}",
                self.layers.len(),
                dcg.len()
            )));
        }
        for (i, ps) in self.layers.iter().enumerate() {
            let placed: u64 = ps.iter().map(|p| p.bits).sum();
            if placed != dcg.layer(i).weight_bits {
                return Err(Error::Invariant(format!(
                    "layer {i}: placed {placed} bits, layer needs {}",
                    dcg.layer(i).weight_bits
                )));
            }
            if ps.iter().any(|p| p.bits == 0) {
                return Err(Error::Invariant(format!("layer {i} has an empty placement")));
            }
        }
        for (c, bits) in self.bits_per_chiplet() {
            let ch = acg
                .chiplets()
                .get(c)
                .ok_or_else(|| Error::Invariant(format!("placement on unknown chiplet {c}")))?;
            if ch.is_io() {
                return Err(Error::Invariant(format!("placement on I/O chiplet {c}")));
            }
            if bits > ch.mem_avail {
                return Err(Error::Invariant(format!(
                    "chiplet {c} over-allocated: {bits} bits assigned, {} available",
                    ch.mem_avail
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChipletLoad {
    pub chiplet: usize,
    /// Seconds of compute per frame.
    pub busy_s: f64,
    pub compute_j: f64,
    pub comm_j: f64,
    pub bits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecPlan {
    pub stages: Vec<f64>,
    /// Steady-state frame interval: slowest stage or busiest chiplet.
    pub period: f64,
    pub ideal_exec: f64,
    pub frames: u64,
    /// Sorted by chiplet id; per-frame values.
    pub loads: Vec<ChipletLoad>,
    pub compute_j_per_frame: f64,
    pub comm_j_per_frame: f64,
    /// Leakage power attributed to the job (W): each chiplet's leakage
    /// weighted by the fraction of its capacity the job occupies.
    pub leak_w: f64,
}

impl ExecPlan {
    pub fn dynamic_energy(&self) -> f64 {
        self.frames as f64 * (self.compute_j_per_frame + self.comm_j_per_frame)
    }

    pub fn ideal_energy(&self) -> f64 {
        self.dynamic_energy() + self.leak_w * self.ideal_exec
    }

    /// Fraction of a chiplet's time the job needs at full speed.
    pub fn utilization(&self, load: &ChipletLoad) -> f64 {
        if self.period > 0.0 {
            load.busy_s / self.period
        } else {
            0.0
        }
    }
}

/// Traffic `f·(b_p/w_k)·(b_q/w_i)` rounded up to whole bits.
fn split_traffic(flow: u64, bp: u64, wk: u64, bq: u64, wi: u64) -> u64 {
    let num = flow as u128 * bp as u128 * bq as u128;
    let den = wk as u128 * wi as u128;
    num.div_ceil(den) as u64
}

pub fn execute(acg: &Acg, comm: &CommTable, cost: &CostModel, dcg: &Dcg, frames: u64, a: &Assignment) -> ExecPlan {
    let mut loads: BTreeMap<usize, ChipletLoad> = BTreeMap::new();
    fn load(loads: &mut BTreeMap<usize, ChipletLoad>, c: usize) -> &mut ChipletLoad {
        loads.entry(c).or_insert(ChipletLoad { chiplet: c, busy_s: 0.0, compute_j: 0.0, comm_j: 0.0, bits: 0 })
    }
    let mut stages = Vec::with_capacity(dcg.len());
    let n = dcg.len();
    let mut compute_total = 0.0;
    let mut comm_total = 0.0;
    for i in 0..n {
        let li = dcg.layer(i);
        let mut compute_max: f64 = 0.0;
        for p in &a.layers[i] {
            let t = acg.chiplet(p.chiplet).pim_type().expect("validated compute chiplet");
            let macs = li.mac_ops as f64 * p.bits as f64 / li.weight_bits as f64;
            let (lat, e) = compute_cost(macs, t, cost);
            let d = lat.max(e / cost.profile(t).peak_dynamic_w);
            compute_max = compute_max.max(d);
            let l = load(&mut loads, p.chiplet);
            l.busy_s += d;
            l.compute_j += e;
            l.bits += p.bits;
            compute_total += e;
        }

        let mut xfers: Vec<(u64, usize, usize)> = Vec::new();
        if i == 0 {
            for q in &a.layers[0] {
                if let Some(io) = acg.nearest_io(q.chiplet) {
                    xfers.push((split_traffic(dcg.input_bits(), 1, 1, q.bits, li.weight_bits), io, q.chiplet));
                }
            }
        }
        for f in dcg.incoming(i) {
            let wk = dcg.layer(f.src).weight_bits;
            for p in &a.layers[f.src] {
                for q in &a.layers[i] {
                    xfers.push((split_traffic(f.bits, p.bits, wk, q.bits, li.weight_bits), p.chiplet, q.chiplet));
                }
            }
        }
        if i + 1 == n {
            for p in &a.layers[i] {
                if let Some(io) = acg.nearest_io(p.chiplet) {
                    xfers.push((split_traffic(dcg.output_bits(), 1, 1, p.bits, li.weight_bits), p.chiplet, io));
                }
            }
        }
        let mut xfer_max: f64 = 0.0;
        for (bits, src, dst) in xfers {
            let (lat, e) = comm.cost(bits, src, dst);
            xfer_max = xfer_max.max(lat);
            if e > 0.0 {
                // split evenly between the two endpoints
                load(&mut loads, src).comm_j += e / 2.0;
                load(&mut loads, dst).comm_j += e / 2.0;
                comm_total += e;
            }
        }
        stages.push(compute_max + xfer_max);
    }

    let loads: Vec<ChipletLoad> = loads.into_values().collect();
    let max_stage = stages.iter().copied().fold(0.0, f64::max);
    let max_busy = loads.iter().map(|l| l.busy_s).fold(0.0, f64::max);
    let period = max_stage.max(max_busy);
    let fill: f64 = stages.iter().sum();
    let ideal_exec = fill + (frames.saturating_sub(1)) as f64 * period;
    let leak_w = loads
        .iter()
        .filter(|l| l.bits > 0)
        .map(|l| {
            let c = acg.chiplet(l.chiplet);
            let t = c.pim_type().expect("weights live on compute chiplets");
            cost.profile(t).leakage_w * l.bits as f64 / c.mem_cap as f64
        })
        .sum();
    ExecPlan {
        stages,
        period,
        ideal_exec,
        frames,
        loads,
        compute_j_per_frame: compute_total,
        comm_j_per_frame: comm_total,
        leak_w,
    }
}
