//! Evaluation sweeps over (scheduler, preference, admit rate, seed).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::Experiment;
use crate::error::Result;
use crate::morl::{PolicyFile, Preference};
use crate::sim::{run, SimMetrics, SimReport};

#[derive(Debug, Clone, PartialEq)]
pub struct PointKey {
    pub scheduler: String,
    /// `None` for baselines, which ignore preferences.
    pub preference: Option<Preference>,
    pub admit_rate: f64,
    pub seed: u64,
}

impl PointKey {
    /// File-name friendly identifier.
    pub fn slug(&self) -> String {
        let pref = match self.preference {
            Some(p) => format!("w{}-{}", p.0[0], p.0[1]),
            None => "base".into(),
        };
        format!("{}_{pref}_r{}_s{}", self.scheduler, self.admit_rate, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub key: PointKey,
    pub report: SimReport,
}

/// Seed of the random baseline for a given stream seed.
fn scheduler_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_5eed_5eed_5eed
}

pub fn run_point(exp: &Experiment, key: &PointKey, policy: Option<&PolicyFile>) -> Result<SimReport> {
    let jobs = exp.stream(key.seed, key.admit_rate)?;
    let pref = key.preference.unwrap_or(Preference::BALANCED);
    let mut sched = exp.scheduler(&key.scheduler, scheduler_seed(key.seed), pref, policy)?;
    run(&exp.ctx, &exp.config.sim, &jobs, sched.as_mut())
}

/// All sweep points of the experiment's `[eval]` section, in a fixed order.
pub fn sweep_points(exp: &Experiment) -> Vec<PointKey> {
    let e = &exp.config.eval;
    let mut keys = Vec::new();
    for s in &e.schedulers {
        let prefs: Vec<Option<Preference>> =
            if s == "thermos" { e.preferences.iter().copied().map(Some).collect() } else { vec![None] };
        for p in prefs {
            for &r in &e.admit_rates {
                for &seed in &e.seeds {
                    keys.push(PointKey { scheduler: s.clone(), preference: p, admit_rate: r, seed });
                }
            }
        }
    }
    keys
}

/// Runs every sweep point, concurrently, and returns results in sweep order.
/// `on_point` is called as points finish (in completion order).
pub fn sweep(
    exp: &Experiment,
    policy: Option<&PolicyFile>,
    on_point: &(dyn Fn(&PointResult) -> Result<()> + Sync),
) -> Result<Vec<PointResult>> {
    let keys = sweep_points(exp);
    let threads = match exp.config.eval.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(keys.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<PointResult>>>> = Mutex::new((0..keys.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= keys.len() {
                    break;
                }
                let key = keys[i].clone();
                let res = run_point(exp, &key, policy).map(|report| PointResult { key, report });
                let res = match res {
                    Ok(p) => on_point(&p).map(|_| p),
                    Err(e) => Err(e),
                };
                slots.lock().expect("sweep slots")[i] = Some(res);
            });
        }
    });
    slots.into_inner().expect("sweep slots").into_iter().map(|r| r.expect("every point ran")).collect()
}

/// Seed-averaged metrics of one (scheduler, preference, admit rate) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheduler: String,
    pub preference: Option<Preference>,
    pub admit_rate: f64,
    pub runs: usize,
    pub throughput: f64,
    pub mean_exec_time: f64,
    pub mean_e2e_latency: f64,
    pub mean_energy: f64,
    pub mean_edp: f64,
    pub completed: f64,
    pub rejected: f64,
}

pub fn summarize_points(points: &[PointResult]) -> Vec<SummaryRow> {
    let mut rows: Vec<(SummaryRow, Vec<&SimMetrics>)> = Vec::new();
    for p in points {
        let k = &p.key;
        let pos = rows.iter().position(|(r, _)| {
            r.scheduler == k.scheduler && r.preference == k.preference && r.admit_rate == k.admit_rate
        });
        let idx = match pos {
            Some(i) => i,
            None => {
                rows.push((
                    SummaryRow {
                        scheduler: k.scheduler.clone(),
                        preference: k.preference,
                        admit_rate: k.admit_rate,
                        runs: 0,
                        throughput: 0.0,
                        mean_exec_time: 0.0,
                        mean_e2e_latency: 0.0,
                        mean_energy: 0.0,
                        mean_edp: 0.0,
                        completed: 0.0,
                        rejected: 0.0,
                    },
                    Vec::new(),
                ));
                rows.len() - 1
            }
        };
        rows[idx].1.push(&p.report.metrics);
    }
    rows.into_iter()
        .map(|(mut r, ms)| {
            let n = ms.len() as f64;
            let mean = |f: &dyn Fn(&SimMetrics) -> f64| ms.iter().map(|m| f(m)).sum::<f64>() / n;
            r.runs = ms.len();
            r.throughput = mean(&|m| m.throughput);
            r.mean_exec_time = mean(&|m| m.mean_exec_time);
            r.mean_e2e_latency = mean(&|m| m.mean_e2e_latency);
            r.mean_energy = mean(&|m| m.mean_energy);
            r.mean_edp = mean(&|m| m.mean_edp);
            r.completed = mean(&|m| m.completed as f64);
            r.rejected = mean(&|m| m.rejected as f64);
            r
        })
        .collect()
}

fn pref_cols(p: Option<Preference>) -> [String; 2] {
    match p {
        Some(p) => [p.0[0].to_string(), p.0[1].to_string()],
        None => [String::new(), String::new()],
    }
}

/// Columns: `scheduler,omega_latency,omega_energy,admit_rate,runs,throughput_per_s,
/// exec_s,e2e_latency_s,energy_j,edp_js,completed,rejected`.
pub fn summary_csv_string(rows: &[SummaryRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scheduler",
        "omega_latency",
        "omega_energy",
        "admit_rate",
        "runs",
        "throughput_per_s",
        "exec_s",
        "e2e_latency_s",
        "energy_j",
        "edp_js",
        "completed",
        "rejected",
    ])
    .expect("in-memory write");
    for r in rows {
        let [wl, we] = pref_cols(r.preference);
        w.write_record([
            r.scheduler.clone(),
            wl,
            we,
            r.admit_rate.to_string(),
            r.runs.to_string(),
            r.throughput.to_string(),
            r.mean_exec_time.to_string(),
            r.mean_e2e_latency.to_string(),
            r.mean_energy.to_string(),
            r.mean_edp.to_string(),
            r.completed.to_string(),
            r.rejected.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Execution time against energy per (scheduler, preference), averaged over
/// admit rates and seeds. Columns: `scheduler,omega_latency,omega_energy,exec_s,energy_j,edp_js`.
pub fn pareto_csv_string(rows: &[SummaryRow]) -> String {
    let mut groups: Vec<(String, Option<Preference>, Vec<&SummaryRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| g.0 == r.scheduler && g.1 == r.preference) {
            Some(g) => g.2.push(r),
            None => groups.push((r.scheduler.clone(), r.preference, vec![r])),
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scheduler", "omega_latency", "omega_energy", "exec_s", "energy_j", "edp_js"])
        .expect("in-memory write");
    for (s, p, rs) in groups {
        let n = rs.len() as f64;
        let [wl, we] = pref_cols(p);
        w.write_record([
            s,
            wl,
            we,
            (rs.iter().map(|r| r.mean_exec_time).sum::<f64>() / n).to_string(),
            (rs.iter().map(|r| r.mean_energy).sum::<f64>() / n).to_string(),
            (rs.iter().map(|r| r.mean_edp).sum::<f64>() / n).to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
