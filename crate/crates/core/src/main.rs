use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chiplet_sched::arch::write_topology_file;
use chiplet_sched::experiment::{
    pareto_csv_string, summarize_points, summary_csv_string, sweep, validate_experiment, Experiment,
    ExperimentConfig, ValidateOptions,
};
use chiplet_sched::morl::{train, write_curve_csv, PolicyFile};
use chiplet_sched::sim::metrics_csv_string;
use chiplet_sched::workload::write_dcg_file;
use chiplet_sched::error::write_atomic;
use chiplet_sched::Error;

#[derive(Parser)]
#[command(name = "chiplet-sched", version, about = "Thermal-aware scheduling on heterogeneous PIM chiplet systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy; writes policy.json and training.csv.
    Train {
        #[command(flatten)]
        common: Common,
        /// Overrides train.total_steps.
        #[arg(long)]
        total_steps: Option<usize>,
    },
    /// Run the evaluation sweep; writes per-run CSVs, summary.csv and pareto.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Overrides eval.policy.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Check simulation invariants; exits with 2 on any violation.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Also run the over-allocating fault injector.
        #[arg(long)]
        inject_fault: bool,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        admit_rate: Option<f64>,
    },
    /// Write the workload pool as DCG files plus one job stream as jobs.csv.
    GenWorkloads {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        admit_rate: f64,
    },
    /// Write the configured architecture as a topology file.
    GenTopology {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "topology.toml")]
        name: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let invariant = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(|e| e.is_invariant()));
            ExitCode::from(if invariant { 2 } else { 1 })
        }
    }
}

fn load(common: &Common) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let cfg = ExperimentConfig::load(&common.config)?;
    let base = common.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok((cfg, base))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    Ok(write_atomic(path, text.as_bytes())?)
}

fn dispatch(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Train { common, total_steps } => {
            let (mut cfg, base) = load(&common)?;
            if let Some(n) = total_steps {
                cfg.train.total_steps = n;
            }
            let exp = Experiment::from_config(cfg, &base)?;
            let trained = train(&exp.config.train, &exp.train_env(), common.seed, |_| {})?;
            let file = PolicyFile::from_trained(&trained, &exp.config.train, common.seed);
            file.save(&common.out.join("policy.json"))?;
            write_curve_csv(&trained.curve, &common.out.join("training.csv"))?;
            log::info!("wrote {}", common.out.display());
        }
        Command::Eval { common, policy } => {
            let (mut cfg, base) = load(&common)?;
            if let Some(p) = policy {
                // resolve against the working directory, not the experiment file
                cfg.eval.policy = Some(std::path::absolute(p)?);
            }
            let exp = Experiment::from_config(cfg, &base)?;
            let policy = match exp.policy_path() {
                Some(p) if exp.config.eval.schedulers.iter().any(|s| s == "thermos") => Some(PolicyFile::load(&p)?),
                _ => None,
            };
            let runs = common.out.join("runs");
            let points = sweep(&exp, policy.as_ref(), &|p| {
                write_atomic(&runs.join(format!("{}.csv", p.key.slug())), metrics_csv_string(&p.report).as_bytes())
            })?;
            let rows = summarize_points(&points);
            write(&common.out.join("summary.csv"), &summary_csv_string(&rows))?;
            write(&common.out.join("pareto.csv"), &pareto_csv_string(&rows))?;
            log::info!("{} runs written to {}", points.len(), common.out.display());
        }
        Command::Validate { common, inject_fault, jobs, admit_rate } => {
            let (cfg, base) = load(&common)?;
            let opts = ValidateOptions { seed: common.seed, jobs, admit_rate, inject_fault };
            let report = validate_experiment(&cfg, &base, &opts)?;
            print!("{}", report.render());
            if !report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::GenWorkloads { common, admit_rate } => {
            let (cfg, base) = load(&common)?;
            let exp = Experiment::from_config(cfg, &base)?;
            for dcg in &exp.pool {
                write_dcg_file(dcg, &common.out.join(format!("{}.dcg.toml", dcg.name())))?;
            }
            let jobs = exp.stream(common.seed, admit_rate)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["id", "model", "frames", "arrival_s"])?;
            for j in &jobs {
                w.write_record([j.id.to_string(), j.model().to_string(), j.frames.to_string(), j.arrival_time.to_string()])?;
            }
            write(&common.out.join("jobs.csv"), &String::from_utf8(w.into_inner()?)?)?;
        }
        Command::GenTopology { common, name } => {
            let (cfg, base) = load(&common)?;
            let acg = cfg.arch.build_acg(&base)?;
            write_topology_file(&acg, &common.out.join(name))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
