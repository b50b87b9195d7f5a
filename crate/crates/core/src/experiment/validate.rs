//! End-to-end invariant checks of an experiment: thermal discretization,
//! energy ledger closure, memory conservation, FIFO order and the
//! throttled temperature bound, on one workload stream per scheduler.

use std::path::Path;

use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::morl::{PolicyFile, Preference};
use crate::sim::{run, SimContext, SimReport};
use crate::thermal::build_thermal_model;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Jobs in the validation stream; the experiment's `workload.jobs` when `None`.
    pub jobs: Option<usize>,
    /// Admission rate of the stream; the highest configured rate when `None`.
    pub admit_rate: Option<f64>,
    /// Adds the over-allocating fault injector to the schedulers under test.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One `PASS`/`FAIL` line per check.
    pub fn render(&self) -> String {
        self.checks
            .iter()
            .map(|c| format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
            .collect()
    }
}

/// Validates an experiment. Configuration problems are returned as errors;
/// invariant problems (including an unstable thermal discretization) become
/// failed checks.
pub fn validate_experiment(cfg: &ExperimentConfig, base: &Path, opts: &ValidateOptions) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    let acg = cfg.arch.build_acg(base)?;
    let thermal_cfg = cfg.thermal_config(base)?;
    match build_thermal_model(&acg, &thermal_cfg) {
        Ok(m) => report.checks.push(Check::new(
            "thermal-stability",
            true,
            format!("spectral radius {:.6} at dt = {} s", m.spectral_radius(), m.dt()),
        )),
        Err(Error::Thermal(msg)) => {
            report.checks.push(Check::new("thermal-stability", false, msg));
            return Ok(report);
        }
        Err(e) => return Err(e),
    }

    let mut cfg = cfg.clone();
    if let Some(j) = opts.jobs {
        cfg.workload.jobs = j;
    }
    let rate = match opts.admit_rate {
        Some(r) => r,
        None => cfg.eval.admit_rates.iter().copied().fold(f64::NAN, f64::max),
    };
    if !(rate > 0.0) {
        return Err(Error::Config("validation needs a positive admit rate".into()));
    }
    let exp = super::Experiment::from_config(cfg, base)?;
    let mut names: Vec<String> = exp.config.eval.schedulers.clone();
    let policy = match exp.policy_path() {
        Some(p) if p.exists() => Some(PolicyFile::load(&p)?),
        _ => None,
    };
    if policy.is_none() && names.iter().any(|s| s == "thermos") {
        log::warn!("no trained policy found; skipping thermos");
        names.retain(|s| s != "thermos");
    }
    let jobs = exp.stream(opts.seed, rate)?;

    if opts.inject_fault {
        names.push("over-allocate".into());
    }
    for name in &names {
        let pref = exp.config.eval.preferences.first().copied().unwrap_or(Preference::BALANCED);
        let mut sched = exp.scheduler(name, opts.seed, pref, policy.as_ref())?;
        match run(&exp.ctx, &exp.config.sim, &jobs, sched.as_mut()) {
            Ok(rep) => report.checks.extend(check_report(name, &exp.ctx, exp.config.sim.throttling, &rep)?),
            Err(e) if e.is_invariant() => report.checks.push(Check::new(format!("{name}/run"), false, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// Invariant checks on a finished run.
pub fn check_report(name: &str, ctx: &SimContext, throttling: bool, rep: &SimReport) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let jobs_j: f64 = rep.records.iter().map(|r| r.energy()).sum();
    let total = rep.ledger.total();
    let per: f64 = rep.ledger.per_chiplet.iter().flatten().sum();
    let gap = (jobs_j + rep.ledger.unattributed_leakage_j - total).abs().max((per - total).abs());
    out.push(Check::new(
        format!("{name}/energy-ledger"),
        gap <= 1e-9 * total.max(1e-300),
        format!("total {total:.6e} J, closure gap {gap:.3e} J"),
    ));

    let leaked: u64 = rep.initial_avail.iter().zip(&rep.final_avail).map(|(a, b)| a.abs_diff(*b)).sum();
    out.push(Check::new(
        format!("{name}/memory-conservation"),
        leaked == 0,
        format!("{leaked} bits not returned"),
    ));

    let rejected: Vec<u64> = rep.rejected.iter().map(|r| r.0).collect();
    let expected: Vec<u64> = rep.admit_order.iter().copied().filter(|id| !rejected.contains(id)).collect();
    out.push(Check::new(
        format!("{name}/fifo-order"),
        expected == rep.start_order,
        format!("{} jobs started, {} rejected", rep.start_order.len(), rejected.len()),
    ));

    let ordered = rep.records.iter().all(|r| r.admit <= r.start && r.start <= r.finish && r.stall_time >= 0.0);
    out.push(Check::new(format!("{name}/job-timeline"), ordered, format!("{} jobs completed", rep.records.len())));

    if throttling {
        let t_max: Vec<f64> = ctx.acg.chiplets().iter().map(|c| c.t_max).collect();
        let bound = ctx.thermal.overshoot_bound(&t_max, &ctx.peak_power())?;
        let worst = rep
            .thermal
            .max_excess
            .iter()
            .zip(&bound)
            .enumerate()
            .filter(|(i, _)| t_max[*i].is_finite())
            .map(|(i, (e, b))| (e - b, i, *e, *b))
            .max_by(|a, b| a.0.total_cmp(&b.0));
        let (ok, detail) = match worst {
            Some((d, i, e, b)) => (d <= 1e-9, format!("worst chiplet {i}: excess {e:.4} K, bound {b:.4} K")),
            None => (true, "no compute chiplets".to_string()),
        };
        out.push(Check::new(format!("{name}/thermal-bound"), ok, detail));
    }
    Ok(out)
}
