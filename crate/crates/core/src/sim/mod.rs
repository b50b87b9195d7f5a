//! Discrete-event simulation of streaming inference jobs on the ACG.

mod engine;
mod metrics;
mod plan;

pub use engine::{
    run, EnergyLedger, JobRecord, SimConfig, SimContext, SimMetrics, SimReport, ThermalStats,
};
pub use metrics::{metrics_csv_string, summary_throughput, write_metrics_csv, METRICS_SCHEMA_VERSION};
pub use plan::{execute, Assignment, ChipletLoad, ExecPlan, Placement};
