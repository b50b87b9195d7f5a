use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use chiplet_sched_ffi::*;

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn c(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe {
        let n = cs_last_error_message(ptr::null_mut(), 0);
        let mut buf = vec![0 as c_char; n + 1];
        cs_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn baseline_run_through_the_c_abi_matches_the_library() {
    let path = data("experiments/toy.toml");
    let mut exp = ptr::null_mut();
    assert_eq!(unsafe { cs_experiment_load(c(&path).as_ptr(), &mut exp) }, CsStatus::Ok);
    let mut rep = ptr::null_mut();
    let name = CString::new("biglittle").unwrap();
    let st = unsafe { cs_run(exp, name.as_ptr(), ptr::null(), 0.5, 0.5, 1.0, 7, &mut rep) };
    assert_eq!(st, CsStatus::Ok, "{}", last_error());
    let mut m = CsMetrics::default();
    assert_eq!(unsafe { cs_report_metrics(rep, &mut m) }, CsStatus::Ok);

    let lib = chiplet_sched::experiment::Experiment::load(&path).unwrap();
    let key = chiplet_sched::experiment::PointKey {
        scheduler: "biglittle".into(),
        preference: None,
        admit_rate: 1.0,
        seed: 7,
    };
    let want = chiplet_sched::experiment::run_point(&lib, &key, None).unwrap();
    assert_eq!(m.completed, want.metrics.completed as u64);
    assert_eq!(m.mean_energy_j, want.metrics.mean_energy);
    assert_eq!(m.throughput, want.metrics.throughput);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    assert_eq!(unsafe { cs_report_write_csv(rep, c(&csv).as_ptr()) }, CsStatus::Ok);
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), chiplet_sched::sim::metrics_csv_string(&want));

    unsafe {
        cs_report_free(rep);
        cs_experiment_free(exp);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let mut exp = ptr::null_mut();
    let missing = CString::new("/nonexistent/experiment.toml").unwrap();
    assert_eq!(unsafe { cs_experiment_load(missing.as_ptr(), &mut exp) }, CsStatus::Io);
    assert!(exp.is_null());
    assert!(last_error().contains("/nonexistent/experiment.toml"));

    assert_eq!(unsafe { cs_experiment_load(ptr::null(), &mut exp) }, CsStatus::NullPointer);
    let path = c(&data("experiments/toy.toml"));
    assert_eq!(unsafe { cs_experiment_load(path.as_ptr(), ptr::null_mut()) }, CsStatus::NullPointer);

    assert_eq!(unsafe { cs_experiment_load(path.as_ptr(), &mut exp) }, CsStatus::Ok);
    let mut rep = ptr::null_mut();
    let thermos = CString::new("thermos").unwrap();
    let st = unsafe { cs_run(exp, thermos.as_ptr(), ptr::null(), 1.0, 0.0, 1.0, 0, &mut rep) };
    assert_eq!(st, CsStatus::Config);
    assert!(last_error().contains("policy"));
    let bad_pref = unsafe { cs_run(exp, thermos.as_ptr(), ptr::null(), 0.7, 0.7, 1.0, 0, &mut rep) };
    assert_ne!(bad_pref, CsStatus::Ok);
    assert!(rep.is_null());
    unsafe { cs_experiment_free(exp) };
}

#[test]
fn train_save_load_and_run_a_policy() {
    let mut exp = ptr::null_mut();
    assert_eq!(unsafe { cs_experiment_load(c(&data("experiments/toy.toml")).as_ptr(), &mut exp) }, CsStatus::Ok);
    let mut pol = ptr::null_mut();
    assert_eq!(unsafe { cs_policy_train(exp, 1, 4000, &mut pol) }, CsStatus::Ok, "{}", last_error());
    let dir = tempfile::tempdir().unwrap();
    let file = c(&dir.path().join("policy.json"));
    assert_eq!(unsafe { cs_policy_save(pol, file.as_ptr()) }, CsStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { cs_policy_load(file.as_ptr(), &mut loaded) }, CsStatus::Ok);

    let thermos = CString::new("thermos").unwrap();
    let mut metrics = Vec::new();
    for p in [pol, loaded] {
        let mut rep = ptr::null_mut();
        assert_eq!(unsafe { cs_run(exp, thermos.as_ptr(), p, 1.0, 0.0, 1.0, 2, &mut rep) }, CsStatus::Ok);
        let mut m = CsMetrics::default();
        unsafe {
            cs_report_metrics(rep, &mut m);
            cs_report_free(rep);
        }
        metrics.push(m);
    }
    assert!(metrics[0].completed > 0);
    assert_eq!(metrics[0].mean_edp_js, metrics[1].mean_edp_js);
    unsafe {
        cs_policy_free(pol);
        cs_policy_free(loaded);
        cs_experiment_free(exp);
    }
}

#[test]
fn validate_reports_pass() {
    let mut passed = -1;
    let path = c(&data("experiments/toy.toml"));
    assert_eq!(unsafe { cs_validate(path.as_ptr(), 0, 20, &mut passed) }, CsStatus::Ok, "{}", last_error());
    assert_eq!(passed, 1);
}

#[test]
fn header_compiles_as_c() {
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"chiplet_sched.h\"\n\
         int main(void) {\n\
           CsExperiment *e = 0; CsMetrics m; (void)m;\n\
           CsStatus s = cs_experiment_load(\"x\", &e);\n\
           char buf[64]; size_t n = cs_last_error_message(buf, sizeof buf);\n\
           cs_experiment_free(e);\n\
           return (int)s + (int)n + (cs_version() == 0);\n\
         }\n",
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = match Command::new(&cc).args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"]).arg(&include).arg(&src).output() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("skipping: no C compiler ({cc}: {e})");
            return;
        }
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
