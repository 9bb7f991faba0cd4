use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mecplan");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove(mecplan_cli::OUT_DIR_ENV).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn generate(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("gen");
    let mut args = vec!["generate", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    assert_eq!(code(&args), 0);
    out.join("scenario.json")
}

#[test]
fn csv_headers_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let scen = generate(dir.path(), &["--devices", "6"]);
    let sw = dir.path().join("sw");
    assert_eq!(
        code(&["sweep", "--scenario", scen.to_str().unwrap(), "--vary", "nt", "--values", "8,16", "--out", sw.to_str().unwrap()]),
        0
    );
    assert_eq!(
        header(&sw.join("sweep.csv")),
        "vary_param,value,epsilon_a,subcarriers_used,iterations,assoc_dist_comm,assoc_dist_comp,status"
    );
    let vq = dir.path().join("vq");
    run(&["validate-queueing", "--preset", "fig5", "--packets", "20000", "--out", vq.to_str().unwrap()]);
    for name in ["ccdf_fcfs_individual.csv", "ccdf_fcfs_mux.csv", "ccdf_ps.csv"] {
        assert_eq!(header(&vq.join(name)), "class,t_slots,prob_empirical,stderr,prob_model", "{name}");
    }
    assert_eq!(
        header(&vq.join("ps_validation.csv")),
        "q,t_slots,prob_model,prob_empirical,stderr,reliable,checked,within_tolerance"
    );
}

#[test]
fn exit_codes_follow_convention() {
    let dir = tempfile::tempdir().unwrap();
    let scen = generate(dir.path(), &[]);
    let s = scen.to_str().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(code(&["optimize", "--scenario", s, "--out", o]), 0);
    assert_eq!(code(&["optimize", "--scenario", s, "--mode", "nonsense", "--out", o]), 2);
    assert_eq!(code(&["optimize", "--scenario", s, "--eps-init", "2", "--out", o]), 2);
    assert_eq!(code(&["optimize", "--scenario", s, "--mode", "brute", "--out", o]), 2);
    assert_eq!(code(&["optimize", "--scenario", s, "--mode", "plb", "--out", o]), 2);
    assert_eq!(code(&["optimize", "--scenario", "/no/such/file.json", "--out", o]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["--help"]), 0);
    // Infeasibility is an answer, not an error.
    assert_eq!(code(&["optimize", "--scenario", s, "--eps-init", "1e-30", "--out", o]), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "infeasible_at_init");
    // Too few packets to check anything is a validation failure.
    let vq = dir.path().join("vq");
    assert_eq!(code(&["validate-queueing", "--preset", "fig5", "--packets", "1000", "--out", vq.to_str().unwrap()]), 1);
}

#[test]
fn small_runs_flag_unreliable_rows() {
    let dir = tempfile::tempdir().unwrap();
    let vq = dir.path().join("vq");
    run(&["validate-queueing", "--preset", "fig5", "--packets", "1000", "--out", vq.to_str().unwrap()]);
    let text = std::fs::read_to_string(vq.join("ps_validation.csv")).unwrap();
    assert!(text.lines().skip(1).any(|l| l.split(',').nth(5) == Some("false")));
}

#[test]
fn comm_mode_writes_argmax_association() {
    let dir = tempfile::tempdir().unwrap();
    let scen = generate(dir.path(), &["--devices", "8"]);
    let out = dir.path().join("c");
    assert_eq!(code(&["optimize", "--scenario", scen.to_str().unwrap(), "--mode", "comm", "--out", out.to_str().unwrap()]), 0);
    let assoc: Vec<Option<usize>> =
        serde_json::from_str(&std::fs::read_to_string(out.join("association.json")).unwrap()).unwrap();
    let file = mecplan::scenario::ScenarioFile::load(&scen).unwrap();
    for (row, a) in file.gains().iter().zip(&assoc) {
        if let Some(m) = a {
            assert!(row.iter().all(|g| g <= &row[*m]));
        }
    }
}

#[test]
fn sweep_keeps_failed_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let o = out.to_str().unwrap();
    assert_eq!(code(&["sweep", "--vary", "w0ts", "--values", "30000,120000", "--out", o]), 0);
    let rows: Vec<String> = std::fs::read_to_string(out.join("sweep.csv")).unwrap().lines().map(String::from).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].contains("error"));
    assert!(rows[2].ends_with("converged"));
    assert_eq!(code(&["sweep", "--vary", "nt", "--values", "8:x:2", "--out", o]), 2);
}

#[test]
fn same_flags_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        run(&["validate-queueing", "--preset", "fig5", "--packets", "50000", "--seed", "4", "--out", d.to_str().unwrap()]);
    }
    for name in ["ccdf_fcfs_individual.csv", "ccdf_fcfs_mux.csv", "ccdf_ps.csv", "ps_validation.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn values_parser() {
    assert_eq!(mecplan_cli::parse_values("8:12:2").unwrap(), vec![8.0, 10.0, 12.0]);
    assert_eq!(mecplan_cli::parse_values("1, 3,2").unwrap(), vec![1.0, 3.0, 2.0]);
    assert!(mecplan_cli::parse_values("5:1:1").is_err());
    assert!(mecplan_cli::parse_values("").is_err());
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(BIN)
        .args(["generate", "--devices", "3"])
        .env(mecplan_cli::OUT_DIR_ENV, dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("scenario.json").exists());
    assert!(dir.path().join("manifest.json").exists());
}
