use std::path::Path;
use std::process::{Command, Output};

fn cmsdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmsdr")).args(args).env("RUST_LOG", "off").output().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_prints_a_report() {
    let out = cmsdr(&["simulate", "--method", "MMSE_GENIE", "--taps", "1,0.3-0.2i", "--order", "4", "--seed", "3"]);
    let r = stdout_json(&out);
    assert_eq!(r["method"], "MMSE_GENIE");
    assert_eq!(r["seed"], 3);
    assert!(r["ber"].as_f64().unwrap() <= 0.05);

    let again = cmsdr(&["simulate", "--method", "MMSE_GENIE", "--taps", "1,0.3-0.2i", "--order", "4", "--seed", "3"]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("trial.json");
    std::fs::write(&cfg, r#"{"method": "CMA_SGD", "order": 2, "frame_len": 40, "seed": 9}"#).unwrap();
    let r = stdout_json(&cmsdr(&["simulate", "-c", path(&cfg), "--noiseless"]));
    assert_eq!(r["method"], "CMA_SGD");
    assert_eq!(r["snr_db"], serde_json::Value::Null);
    let r = stdout_json(&cmsdr(&["simulate", "-c", path(&cfg), "--method", "CM_SDP", "--seed", "2"]));
    assert_eq!(r["method"], "CM_SDP");
    assert_eq!(r["seed"], 2);
    assert_eq!(r["solver"]["status"], "Optimal");
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let args = [
        "sweep", "--snr", "0,10", "--trials", "2", "--methods", "CMA_SGD,MMSE_GENIE", "--order", "2", "--frame-len", "32",
        "-o", path(&csv),
    ];
    let out = cmsdr(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);
    let first = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(first.lines().count(), 1 + 2 * 2 * 2);
    assert!(first.starts_with("method,snr_db,trial,seed,ber,ser,sign_flipped,best_delay,cm_value,"));
    assert!(cmsdr(&args).status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), first);
}

#[test]
fn generated_code_passes_check() {
    let dir = tempfile::tempdir().unwrap();
    let alist = dir.path().join("h.alist");
    let out = cmsdr(&["gen-code", "--n", "24", "--m", "12", "--seed", "5", "-o", path(&alist)]);
    assert!(out.status.success());
    let r = stdout_json(&cmsdr(&["check-code", path(&alist)]));
    assert_eq!(r["rows"], 12);
    assert_eq!(r["cols"], 24);
    assert_eq!(r["rank"], 12);
    assert_eq!(r["asymmetric"], true);
    assert_eq!(r["parity_inequalities"], 12 * 4);

    let r = stdout_json(&cmsdr(&[
        "simulate", "--method", "CM_SDP_CODE", "--code-alist", path(&alist), "--noiseless", "--taps", "1", "--order", "0",
        "--frame-len", "48",
    ]));
    assert_eq!(r["method"], "CM_SDP_CODE");
    assert!(r["bits_from_f_ber"].is_number());
}

#[test]
fn dump_problem_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (prob, layout) = (dir.path().join("p.json"), dir.path().join("l.json"));
    let out = cmsdr(&["dump-problem", "--order", "1", "--frame-len", "16", "-o", path(&prob), "--layout", path(&layout)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = cmsdr::conic::ConicProblem::from_json(&std::fs::read_to_string(&prob).unwrap()).unwrap();
    let l: cmsdr::formulation::VariableLayout = serde_json::from_str(&std::fs::read_to_string(&layout).unwrap()).unwrap();
    assert_eq!(l.total, p.num_vars());
    assert_eq!(p.cones.psd, vec![4]);
}

#[test]
fn exit_codes() {
    assert_eq!(cmsdr(&["simulate", "--order", "0", "--frame-len", "0"]).status.code(), Some(2));
    assert_eq!(cmsdr(&["simulate", "--method", "CMA_SGD", "--taps", "0"]).status.code(), Some(2));
    assert_eq!(cmsdr(&["check-code", "/nonexistent/h.alist"]).status.code(), Some(4));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.alist");
    std::fs::write(&bad, "not an alist").unwrap();
    assert_eq!(cmsdr(&["check-code", path(&bad)]).status.code(), Some(2));
    assert_eq!(cmsdr(&["simulate", "--max-iterations", "5", "--seed", "1"]).status.code(), Some(0));
}
