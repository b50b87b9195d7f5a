//! Experiment files: one TOML document naming the architecture, cost and
//! thermal calibration, workload pool, training and evaluation settings.
//! Everything the command-line tool does goes through this module.
//!
//! ```toml
//! version = 1
//! cost_file = "cost.toml"        # optional; default calibration otherwise
//! thermal_file = "thermal.toml"  # optional; or an inline [thermal] table
//!
//! [arch]
//! topology = { kind = "mesh", rows = 4, cols = 4 }
//! [arch.types.standard]
//! count = 3
//! mem_kb = 512
//! area_mm2 = 4.0
//! t_max_k = 330.0
//! # ... shared_adc, accumulator, adc_less
//!
//! [workload]
//! models = ["../models/lenet5.shapes.toml", "resnet8.dcg.toml"]
//! frame_range = [1, 20000]
//! jobs = 100
//!
//! [sim]    # queue_capacity, warmup_s, throttling, max_time_s
//! [train]  # PPO settings
//! [eval]   # schedulers, policy, preferences, admit_rates, seeds
//! ```

mod eval;
mod validate;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use eval::{
    pareto_csv_string, run_point, summarize_points, summary_csv_string, sweep, sweep_points, PointKey, PointResult,
    SummaryRow,
};
pub use validate::{check_report, validate_experiment, Check, ValidateOptions, ValidationReport};

use crate::arch::ArchConfig;
use crate::cost::CostModel;
use crate::error::{read_to_string, Error, Result};
use crate::morl::{PolicyFile, PpoConfig, Preference, Thermos, TrainEnv};
use crate::sched::{BigLittle, OverAllocate, RandomCluster, Scheduler, Simba};
use crate::sim::{SimConfig, SimContext};
use crate::thermal::ThermalConfig;
use crate::workload::{parse_dcg_file, parse_shape_file, synth_workload_stream, Dcg, Workload, MAX_FRAMES};

pub const EXPERIMENT_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    /// Shape files (`*.shapes.toml`) or DCG files, relative to the experiment file.
    pub models: Vec<PathBuf>,
    #[serde(default = "default_frames")]
    pub frame_range: (u64, u64),
    /// Jobs per evaluation run.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_frames() -> (u64, u64) {
    (1, MAX_FRAMES)
}
fn default_jobs() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub schedulers: Vec<String>,
    /// Trained policy; required when `thermos` is evaluated.
    pub policy: Option<PathBuf>,
    /// Preferences evaluated for `thermos`; baselines ignore them.
    pub preferences: Vec<Preference>,
    pub admit_rates: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Upper bound on concurrently simulated sweep points; 0 uses all cores.
    pub threads: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            schedulers: crate::sched::scheduler_names().iter().map(|s| s.to_string()).collect(),
            policy: None,
            preferences: vec![Preference::LATENCY, Preference::ENERGY, Preference::BALANCED],
            admit_rates: vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
            seeds: (0..10).collect(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "version")]
    pub version: u32,
    #[serde(default)]
    pub arch: ArchConfig,
    #[serde(default)]
    pub cost_file: Option<PathBuf>,
    #[serde(default)]
    pub cost: Option<CostModel>,
    #[serde(default)]
    pub thermal_file: Option<PathBuf>,
    #[serde(default)]
    pub thermal: Option<ThermalConfig>,
    #[serde(default)]
    pub sim: SimConfig,
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub train: PpoConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn version() -> u32 {
    EXPERIMENT_FILE_VERSION
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        if cfg.version != EXPERIMENT_FILE_VERSION {
            return Err(Error::Config(format!("{}: unsupported experiment version {}", origin.display(), cfg.version)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?, path)
    }

    pub fn cost_model(&self, base: &Path) -> Result<CostModel> {
        match (&self.cost_file, &self.cost) {
            (Some(_), Some(_)) => Err(Error::Config("give either cost_file or [cost], not both".into())),
            (Some(p), None) => CostModel::load(&base.join(p)),
            (None, Some(c)) => c.validate().map(|_| c.clone()),
            (None, None) => Ok(CostModel::default()),
        }
    }

    pub fn thermal_config(&self, base: &Path) -> Result<ThermalConfig> {
        match (&self.thermal_file, &self.thermal) {
            (Some(_), Some(_)) => Err(Error::Config("give either thermal_file or [thermal], not both".into())),
            (Some(p), None) => ThermalConfig::load(&base.join(p)),
            (None, Some(t)) => t.validate().map(|_| t.clone()),
            (None, None) => Ok(ThermalConfig::default()),
        }
    }

    pub fn load_models(&self, base: &Path) -> Result<Vec<Arc<Dcg>>> {
        if self.workload.models.is_empty() {
            return Err(Error::Config("workload.models is empty".into()));
        }
        self.workload
            .models
            .iter()
            .map(|p| {
                let path = base.join(p);
                let is_shape = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".shapes.toml"));
                let dcg = if is_shape { parse_shape_file(&path)?.to_dcg()? } else { parse_dcg_file(&path)? };
                Ok(Arc::new(dcg))
            })
            .collect()
    }
}

/// A loaded experiment: the resolved system plus its configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub ctx: Arc<SimContext>,
    pub pool: Vec<Arc<Dcg>>,
}

impl Experiment {
    pub fn from_config(config: ExperimentConfig, base_dir: &Path) -> Result<Self> {
        config.sim.validate()?;
        config.train.validate()?;
        for p in &config.eval.preferences {
            p.validate()?;
        }
        for s in &config.eval.schedulers {
            if !crate::sched::scheduler_names().contains(&s.as_str()) {
                return Err(Error::Config(format!("unknown scheduler `{s}`")));
            }
        }
        if config.eval.admit_rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("eval.admit_rates must be positive".into()));
        }
        let acg = config.arch.build_acg(base_dir)?;
        let ctx = SimContext::new(acg, config.cost_model(base_dir)?, &config.thermal_config(base_dir)?)?;
        let pool = config.load_models(base_dir)?;
        Ok(Experiment { config, base_dir: base_dir.to_path_buf(), ctx: Arc::new(ctx), pool })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg = ExperimentConfig::load(path)?;
        Self::from_config(cfg, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn train_env(&self) -> TrainEnv {
        TrainEnv {
            ctx: Arc::clone(&self.ctx),
            sim: self.config.sim.clone(),
            pool: self.pool.clone(),
            frame_range: self.config.workload.frame_range,
        }
    }

    pub fn stream(&self, seed: u64, admit_rate: f64) -> Result<Vec<Workload>> {
        synth_workload_stream(seed, self.config.workload.jobs, self.config.workload.frame_range, &self.pool, admit_rate)
    }

    /// The configured policy file, resolved against the experiment directory.
    pub fn policy_path(&self) -> Option<PathBuf> {
        self.config.eval.policy.as_ref().map(|p| self.base_dir.join(p))
    }

    /// Builds a scheduler by name. `thermos` needs a policy; `seed` drives
    /// the random baseline.
    pub fn scheduler(
        &self,
        name: &str,
        seed: u64,
        pref: Preference,
        policy: Option<&PolicyFile>,
    ) -> Result<Box<dyn Scheduler>> {
        Ok(match name {
            "simba" => Box::new(Simba),
            "biglittle" => Box::new(BigLittle),
            "random" => Box::new(RandomCluster::new(seed)),
            "over-allocate" => Box::new(OverAllocate),
            "thermos" => {
                let p = policy.ok_or_else(|| Error::Config("thermos needs a policy file".into()))?;
                pref.validate()?;
                Box::new(Thermos::deployed(p.policy.clone(), p.scales, pref, self.ctx.thermal.ambient()))
            }
            other => return Err(Error::Config(format!("unknown scheduler `{other}`"))),
        })
    }
}
