//! Event loop: arrivals into a bounded FIFO queue, head-of-line scheduling,
//! job progress under chiplet sharing and throttling, and thermal sampling
//! on a fixed grid.
//!
//! Jobs progress through their ideal timeline at a rate in `[0, 1]`. A job
//! stalls completely while any chiplet holding its weights is throttled.
//! Otherwise chiplet time is shared: a job needing fraction `u_jc` of
//! chiplet `c` at full speed runs at `min(1, min_c 1/Σ_k u_kc)`, the fluid
//! limit of per-chiplet FIFO frame interleaving.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::plan::{execute, Assignment, ExecPlan};
use crate::arch::Acg;
use crate::cost::{CommTable, CostModel};
use crate::error::{Error, Result};
use crate::sched::{LayerRequest, Scheduler};
use crate::thermal::{build_thermal_model, thermal_step, throttle_update, ThermalConfig, ThermalModel, ThermalState};
use crate::workload::Workload;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_queue")]
    pub queue_capacity: usize,
    #[serde(default = "default_warmup")]
    pub warmup_s: f64,
    #[serde(default = "yes")]
    pub throttling: bool,
    /// Hard stop guarding against runaway scenarios.
    #[serde(default = "default_max_time")]
    pub max_time_s: f64,
}

fn default_queue() -> usize {
    20
}
fn default_warmup() -> f64 {
    60.0
}
fn yes() -> bool {
    true
}
fn default_max_time() -> f64 {
    1e7
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            queue_capacity: default_queue(),
            warmup_s: default_warmup(),
            throttling: true,
            max_time_s: default_max_time(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.queue_capacity == 0 {
            return Err(Error::Config("queue_capacity must be at least 1".into()));
        }
        if !(self.warmup_s >= 0.0) || !(self.max_time_s > 0.0) {
            return Err(Error::Config("warmup_s must be >= 0 and max_time_s > 0".into()));
        }
        Ok(())
    }
}

/// Immutable system description shared by simulation instances.
#[derive(Debug, Clone)]
pub struct SimContext {
    pub acg: Acg,
    pub comm: CommTable,
    pub cost: CostModel,
    pub thermal: ThermalModel,
}

impl SimContext {
    pub fn new(acg: Acg, cost: CostModel, thermal: &ThermalConfig) -> Result<Self> {
        cost.validate()?;
        let comm = CommTable::new(&acg, &cost.link);
        let thermal = build_thermal_model(&acg, thermal)?;
        Ok(SimContext { acg, comm, cost, thermal })
    }

    /// Compute power of every chiplet at its cap plus its leakage (W).
    pub fn peak_power(&self) -> Vec<f64> {
        self.acg
            .chiplets()
            .iter()
            .map(|c| c.pim_type().map_or(0.0, |t| self.cost.profile(t).peak_dynamic_w + self.cost.profile(t).leakage_w))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobRecord {
    pub id: u64,
    pub model: String,
    pub frames: u64,
    pub arrival: f64,
    pub admit: f64,
    pub start: f64,
    pub finish: f64,
    pub ideal_exec: f64,
    pub ideal_energy: f64,
    pub compute_j: f64,
    pub comm_j: f64,
    pub leakage_j: f64,
    pub stall_time: f64,
    pub stall_energy: f64,
    /// Finished after the warm-up period.
    pub measured: bool,
    /// Weight bits per cluster, in cluster enum order.
    pub cluster_bits: [u64; 4],
}

impl JobRecord {
    pub fn exec_time(&self) -> f64 {
        self.finish - self.start
    }

    pub fn e2e_latency(&self) -> f64 {
        self.finish - self.admit
    }

    pub fn energy(&self) -> f64 {
        self.compute_j + self.comm_j + self.leakage_j
    }

    pub fn edp(&self) -> f64 {
        self.energy() * self.exec_time()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    pub compute_j: f64,
    pub comm_j: f64,
    pub leakage_j: f64,
    /// `[compute, comm, leakage]` per chiplet.
    pub per_chiplet: Vec<[f64; 3]>,
    /// Leakage of occupied chiplets not covered by any job's share.
    pub unattributed_leakage_j: f64,
}

impl EnergyLedger {
    pub fn total(&self) -> f64 {
        self.compute_j + self.comm_j + self.leakage_j
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThermalStats {
    pub samples: u64,
    /// Samples at which some compute chiplet sat at or above its threshold.
    pub violation_samples: u64,
    pub max_temp: Vec<f64>,
    /// Largest `T − t_max` seen per chiplet (negative if never reached).
    pub max_excess: Vec<f64>,
    pub throttle_events: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimMetrics {
    pub completed: usize,
    pub measured: usize,
    pub rejected: usize,
    pub throughput: f64,
    pub mean_e2e_latency: f64,
    pub mean_exec_time: f64,
    pub mean_energy: f64,
    pub mean_edp: f64,
    pub makespan: f64,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub records: Vec<JobRecord>,
    pub rejected: Vec<(u64, String)>,
    pub metrics: SimMetrics,
    pub ledger: EnergyLedger,
    pub thermal: ThermalStats,
    pub admit_order: Vec<u64>,
    pub start_order: Vec<u64>,
    pub host_stall_s: f64,
    pub initial_avail: Vec<u64>,
    pub final_avail: Vec<u64>,
}

struct Queued {
    idx: usize,
    admit: f64,
}

struct Running {
    idx: usize,
    admit: f64,
    start: f64,
    plan: ExecPlan,
    held: Vec<(usize, u64)>,
    /// Ideal-time progress still needed.
    remaining: f64,
    rate: f64,
    compute_j: f64,
    comm_j: f64,
    leakage_j: f64,
    cluster_bits: [u64; 4],
}

/// Runs `jobs` (any order; processed by arrival time, then id) to completion.
pub fn run(ctx: &SimContext, cfg: &SimConfig, jobs: &[Workload], sched: &mut dyn Scheduler) -> Result<SimReport> {
    cfg.validate()?;
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&a, &b| jobs[a].arrival_time.total_cmp(&jobs[b].arrival_time).then(jobs[a].id.cmp(&jobs[b].id)));

    let n = ctx.acg.len();
    let mut acg = ctx.acg.clone();
    let dt = ctx.thermal.dt();
    let mut temps = ThermalState::ambient(n, ctx.thermal.ambient());
    apply_temps(&mut acg, &temps, cfg.throttling);
    let initial_avail = acg.mem_avail();

    let mut ledger = EnergyLedger { per_chiplet: vec![[0.0; 3]; n], ..EnergyLedger::default() };
    let mut stats = ThermalStats {
        max_temp: temps.temps.clone(),
        max_excess: acg.chiplets().iter().map(|c| temps.temps[c.id] - c.t_max).collect(),
        ..ThermalStats::default()
    };
    let mut interval_j = vec![0.0; n];
    let leak_w: Vec<f64> =
        acg.chiplets().iter().map(|c| c.pim_type().map_or(0.0, |t| ctx.cost.profile(t).leakage_w)).collect();

    let mut queue: VecDeque<Queued> = VecDeque::new();
    let mut running: Vec<Running> = Vec::new();
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut admit_order = Vec::new();
    let mut start_order = Vec::new();
    let mut host_stall = 0.0;
    let mut next_arrival = 0usize;
    let mut t = 0.0f64;
    let mut tick = 1u64;

    loop {
        if next_arrival == order.len() && queue.is_empty() && running.is_empty() {
            break;
        }
        try_schedule(ctx, &mut acg, jobs, &mut queue, &mut running, &mut rejected, &mut start_order, sched, t)?;
        set_rates(&mut running, &acg, cfg.throttling);
        if next_arrival == order.len() && queue.is_empty() && running.is_empty() {
            break;
        }

        let t_arr = if queue.len() < cfg.queue_capacity && next_arrival < order.len() {
            jobs[order[next_arrival]].arrival_time.max(t)
        } else {
            f64::INFINITY
        };
        let done = running
            .iter()
            .enumerate()
            .filter(|(_, r)| r.rate > 0.0)
            .map(|(k, r)| (t + r.remaining / r.rate, k))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let t_done = done.map_or(f64::INFINITY, |d| d.0);
        let t_tick = tick as f64 * dt;
        let t_next = t_arr.min(t_done).min(t_tick);
        if t_next > cfg.max_time_s {
            return Err(Error::Invariant(format!("simulation exceeded max_time_s = {} s", cfg.max_time_s)));
        }

        // advance
        let span = t_next - t;
        if span > 0.0 {
            let mut held = vec![0u64; n];
            for r in running.iter_mut() {
                let progress = r.rate * span;
                r.remaining -= progress;
                let frac = progress / r.plan.ideal_exec;
                let frames = r.plan.frames as f64;
                for l in &r.plan.loads {
                    let (ec, em) = (l.compute_j * frames * frac, l.comm_j * frames * frac);
                    ledger.per_chiplet[l.chiplet][0] += ec;
                    ledger.per_chiplet[l.chiplet][1] += em;
                    interval_j[l.chiplet] += ec + em;
                    r.compute_j += ec;
                    r.comm_j += em;
                }
                r.leakage_j += r.plan.leak_w * span;
                for &(c, b) in &r.held {
                    held[c] += b;
                }
            }
            for c in 0..n {
                if held[c] > 0 {
                    let e = leak_w[c] * span;
                    ledger.per_chiplet[c][2] += e;
                    interval_j[c] += e;
                    let cap = acg.chiplet(c).mem_cap as f64;
                    ledger.unattributed_leakage_j += e * (1.0 - held[c] as f64 / cap);
                }
            }
            t = t_next;
        }

        // completions
        if t_done == t_next {
            let (_, first) = done.expect("completion time implies a job");
            let finished: Vec<bool> = running
                .iter()
                .enumerate()
                .map(|(k, r)| k == first || (r.rate > 0.0 && r.remaining <= r.plan.ideal_exec * 1e-12))
                .collect();
            let mut still = Vec::new();
            for (r, fin) in std::mem::take(&mut running).into_iter().zip(finished) {
                if !fin {
                    still.push(r);
                    continue;
                }
                for &(c, b) in &r.held {
                    acg.release(c, b)?;
                }
                let job = &jobs[r.idx];
                let exec = t - r.start;
                let stall_time = (exec - r.plan.ideal_exec).max(0.0);
                let rec = JobRecord {
                    id: job.id,
                    model: job.model().to_string(),
                    frames: job.frames,
                    arrival: job.arrival_time,
                    admit: r.admit,
                    start: r.start,
                    finish: t,
                    ideal_exec: r.plan.ideal_exec,
                    ideal_energy: r.plan.ideal_energy(),
                    compute_j: r.compute_j,
                    comm_j: r.comm_j,
                    leakage_j: r.leakage_j,
                    stall_time,
                    stall_energy: r.plan.leak_w * stall_time,
                    measured: t >= cfg.warmup_s,
                    cluster_bits: r.cluster_bits,
                };
                sched.job_finished(&rec);
                records.push(rec);
            }
            running = still;
        }

        // arrivals
        while queue.len() < cfg.queue_capacity
            && next_arrival < order.len()
            && jobs[order[next_arrival]].arrival_time <= t
        {
            let idx = order[next_arrival];
            host_stall += t - jobs[idx].arrival_time;
            admit_order.push(jobs[idx].id);
            queue.push_back(Queued { idx, admit: t });
            next_arrival += 1;
        }

        // thermal sample
        if t_tick == t_next {
            let power: Vec<f64> = interval_j.iter().map(|e| e / dt).collect();
            interval_j.iter_mut().for_each(|e| *e = 0.0);
            temps = thermal_step(&ctx.thermal, &temps, &power)?;
            let before: Vec<bool> = acg.chiplets().iter().map(|c| c.throttled).collect();
            apply_temps(&mut acg, &temps, cfg.throttling);
            stats.samples += 1;
            let mut violated = false;
            for c in acg.chiplets() {
                let temp = temps.temps[c.id];
                stats.max_temp[c.id] = stats.max_temp[c.id].max(temp);
                stats.max_excess[c.id] = stats.max_excess[c.id].max(temp - c.t_max);
                violated |= !c.is_io() && temp >= c.t_max;
                if c.throttled && !before[c.id] {
                    stats.throttle_events += 1;
                }
            }
            stats.violation_samples += violated as u64;
            tick += 1;
        }
    }

    for c in &ledger.per_chiplet {
        ledger.compute_j += c[0];
        ledger.comm_j += c[1];
        ledger.leakage_j += c[2];
    }
    records.sort_by_key(|r| r.id);
    let metrics = summarize(&records, rejected.len(), cfg.warmup_s);
    Ok(SimReport {
        records,
        rejected,
        metrics,
        ledger,
        thermal: stats,
        admit_order,
        start_order,
        host_stall_s: host_stall,
        initial_avail,
        final_avail: acg.mem_avail(),
    })
}

fn apply_temps(acg: &mut Acg, temps: &ThermalState, throttling: bool) {
    if throttling {
        throttle_update(acg, temps);
    } else {
        for (id, &t) in temps.temps.iter().enumerate() {
            acg.set_temperature(id, t);
        }
    }
}

fn set_rates(running: &mut [Running], acg: &Acg, throttling: bool) {
    let mut demand = vec![0.0; acg.len()];
    let stalled: Vec<bool> = running
        .iter()
        .map(|r| throttling && r.held.iter().any(|&(c, _)| acg.chiplet(c).throttled))
        .collect();
    for (r, &s) in running.iter().zip(&stalled) {
        if !s {
            for l in &r.plan.loads {
                demand[l.chiplet] += r.plan.utilization(l);
            }
        }
    }
    for (r, &s) in running.iter_mut().zip(&stalled) {
        r.rate = if s {
            0.0
        } else {
            r.plan
                .loads
                .iter()
                .filter(|l| l.busy_s > 0.0)
                .map(|l| 1.0 / demand[l.chiplet])
                .fold(1.0, f64::min)
        };
    }
}

#[allow(clippy::too_many_arguments)]
fn try_schedule(
    ctx: &SimContext,
    acg: &mut Acg,
    jobs: &[Workload],
    queue: &mut VecDeque<Queued>,
    running: &mut Vec<Running>,
    rejected: &mut Vec<(u64, String)>,
    start_order: &mut Vec<u64>,
    sched: &mut dyn Scheduler,
    t: f64,
) -> Result<()> {
    while let Some(head) = queue.front() {
        let job = &jobs[head.idx];
        let dcg = &job.dcg;
        let need = dcg.total_weight_bits();
        if need > acg.total_mem_cap() {
            let msg = format!(
                "model `{}` needs {need} bits but the system holds only {} bits",
                dcg.name(),
                acg.total_mem_cap()
            );
            log::warn!("rejecting job {}: {msg}", job.id);
            rejected.push((job.id, msg));
            queue.pop_front();
            continue;
        }
        if need > acg.total_mem_avail() {
            return Ok(());
        }
        sched.begin_job(job);
        let mut avail = acg.mem_avail();
        let mut assignment = Assignment { layers: Vec::with_capacity(dcg.len()) };
        for i in 0..dcg.len() {
            let prev: &[_] = if i == 0 { &[] } else { &assignment.layers[i - 1] };
            let req = LayerRequest {
                acg,
                dcg,
                layer: i,
                remaining_bits: dcg.layer(i).weight_bits,
                prev,
                frames: job.frames,
                avail: &avail,
            };
            let Some(ps) = sched.place_layer(&req) else {
                sched.job_aborted(job.id);
                return Ok(());
            };
            for p in &ps {
                let c = acg.chiplets().get(p.chiplet).ok_or_else(|| {
                    Error::Invariant(format!("{} placed layer {i} on unknown chiplet {}", sched.name(), p.chiplet))
                })?;
                if c.is_io() || c.throttled || p.bits > avail[p.chiplet] {
                    return Err(Error::Invariant(format!(
                        "{} placed {} bits of job {} layer {i} on chiplet {} (free {}, throttled {}, io {})",
                        sched.name(),
                        p.bits,
                        job.id,
                        p.chiplet,
                        avail[p.chiplet],
                        c.throttled,
                        c.is_io()
                    )));
                }
                avail[p.chiplet] -= p.bits;
            }
            assignment.layers.push(ps);
        }
        assignment.validate(acg, dcg)?;
        let held: Vec<(usize, u64)> = assignment.bits_per_chiplet().into_iter().collect();
        let mut cluster_bits = [0u64; 4];
        for &(c, b) in &held {
            acg.reserve(c, b)?;
            if let Some(ty) = acg.chiplet(c).pim_type() {
                cluster_bits[ty.index()] += b;
            }
        }
        let plan = execute(acg, &ctx.comm, &ctx.cost, dcg, job.frames, &assignment);
        sched.job_scheduled(job.id, plan.ideal_exec, plan.ideal_energy());
        start_order.push(job.id);
        running.push(Running {
            idx: head.idx,
            admit: head.admit,
            start: t,
            remaining: plan.ideal_exec,
            plan,
            held,
            rate: 0.0,
            compute_j: 0.0,
            comm_j: 0.0,
            leakage_j: 0.0,
            cluster_bits,
        });
        queue.pop_front();
    }
    Ok(())
}

fn summarize(records: &[JobRecord], rejected: usize, warmup: f64) -> SimMetrics {
    let measured: Vec<&JobRecord> = records.iter().filter(|r| r.measured).collect();
    let makespan = records.iter().map(|r| r.finish).fold(0.0, f64::max);
    let m = measured.len();
    let mean = |f: &dyn Fn(&JobRecord) -> f64| {
        if m == 0 {
            0.0
        } else {
            measured.iter().map(|r| f(r)).sum::<f64>() / m as f64
        }
    };
    let throughput = if m > 0 && makespan > warmup { m as f64 / (makespan - warmup) } else { 0.0 };
    SimMetrics {
        completed: records.len(),
        measured: m,
        rejected,
        throughput,
        mean_e2e_latency: mean(&|r| r.e2e_latency()),
        mean_exec_time: mean(&|r| r.exec_time()),
        mean_energy: mean(&|r| r.energy()),
        mean_edp: mean(&|r| r.edp()),
        makespan,
    }
}
