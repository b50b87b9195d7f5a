//! Metrics CSV: one row per completed job, then one summary row.
//!
//! Columns (schema version 1):
//! `schema_version,row,job_id,model,frames,arrival_s,admit_s,start_s,finish_s,
//! ideal_exec_s,exec_s,e2e_latency_s,compute_j,comm_j,leakage_j,energy_j,
//! ideal_energy_j,stall_s,stall_j,edp_js,measured,throughput_per_s`
//!
//! In the summary row `frames` holds the number of measured jobs, the time
//! and energy columns hold means over measured jobs, and only that row
//! fills `throughput_per_s`.

use std::path::Path;

use super::engine::SimReport;
use crate::error::{write_atomic, Error, Result};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

const HEADER: [&str; 22] = [
    "schema_version",
    "row",
    "job_id",
    "model",
    "frames",
    "arrival_s",
    "admit_s",
    "start_s",
    "finish_s",
    "ideal_exec_s",
    "exec_s",
    "e2e_latency_s",
    "compute_j",
    "comm_j",
    "leakage_j",
    "energy_j",
    "ideal_energy_j",
    "stall_s",
    "stall_j",
    "edp_js",
    "measured",
    "throughput_per_s",
];

pub fn metrics_csv_string(report: &SimReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    let v = METRICS_SCHEMA_VERSION.to_string();
    for r in &report.records {
        let row = [
            v.clone(),
            "job".into(),
            r.id.to_string(),
            r.model.clone(),
            r.frames.to_string(),
            r.arrival.to_string(),
            r.admit.to_string(),
            r.start.to_string(),
            r.finish.to_string(),
            r.ideal_exec.to_string(),
            r.exec_time().to_string(),
            r.e2e_latency().to_string(),
            r.compute_j.to_string(),
            r.comm_j.to_string(),
            r.leakage_j.to_string(),
            r.energy().to_string(),
            r.ideal_energy.to_string(),
            r.stall_time.to_string(),
            r.stall_energy.to_string(),
            r.edp().to_string(),
            r.measured.to_string(),
            String::new(),
        ];
        w.write_record(&row).expect("in-memory write");
    }
    let m = &report.metrics;
    let mut summary = vec![String::new(); HEADER.len()];
    summary[0] = v;
    summary[1] = "summary".into();
    summary[4] = m.measured.to_string();
    summary[8] = m.makespan.to_string();
    summary[10] = m.mean_exec_time.to_string();
    summary[11] = m.mean_e2e_latency.to_string();
    summary[15] = m.mean_energy.to_string();
    summary[19] = m.mean_edp.to_string();
    summary[21] = m.throughput.to_string();
    w.write_record(&summary).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn write_metrics_csv(report: &SimReport, path: &Path) -> Result<()> {
    write_atomic(path, metrics_csv_string(report).as_bytes())
}

/// Reads back the summary row's throughput, mostly for tests and tooling.
pub fn summary_throughput(csv_text: &str) -> Result<f64> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Validation(format!("metrics csv: {e}")))?;
        if rec.get(1) == Some("summary") {
            return rec
                .get(21)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Validation("summary row lacks throughput".into()));
        }
    }
    Err(Error::Validation("metrics csv has no summary row".into()))
}
