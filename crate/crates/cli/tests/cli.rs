use std::path::Path;
use std::process::{Command, Output};

fn stagenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stagenet"))
        .args(args)
        .output()
        .expect("run stagenet")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = dir.join("data.csv");
    let truth = dir.join("truth.json");
    let out = stagenet(&[
        "simulate", "--seed", "2", "--genes", "2", "--regions", "3", "--per_stage", "8",
        "--truth", p(&truth), "--out", p(&data),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (data, truth)
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&stagenet(&[])), 1);
    assert_eq!(code(&stagenet(&["nonsense"])), 1);
    assert_eq!(code(&stagenet(&["benchmark", "--outer", "many"])), 1);
    assert_eq!(code(&stagenet(&["benchmark", "--threads", "0"])), 1);
    assert_eq!(code(&stagenet(&["--help"])), 0);
}

#[test]
fn bad_config_files_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "outer = 3\nno_such_key = 1\n").unwrap();
    let out = stagenet(&["--config", p(&config), "benchmark"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":2"), "{err}");
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    assert_eq!(code(&stagenet(&["infer", "--data", p(&missing)])), 2);
    let broken = dir.path().join("broken.csv");
    std::fs::write(
        &broken,
        "person_id,death_stage,gene,region,stage,value,observed\n1,2,1,1,3,0.5,1\n",
    )
    .unwrap();
    let out = stagenet(&["infer", "--data", p(&broken)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"));
}

#[test]
fn baseline_then_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (data, truth) = simulate(dir.path());
    let est = dir.path().join("p2.json");
    let out = stagenet(&[
        "baseline", "--data", p(&data), "--method", "pearson2", "--out", p(&est),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = stagenet(&["metrics", "--truth", p(&truth), "--estimate", p(&est)]);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["counts"].as_array().unwrap().len() == 3);

    let out = stagenet(&[
        "metrics", "--truth", p(&truth), "--estimate", p(&est), "--format", "tsv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().contains('\t'));
}

#[test]
fn infer_writes_json_and_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = simulate(dir.path());
    let args = ["infer", "--data", p(&data), "--outer", "4", "--inner", "20", "--seed", "3"];
    let out = stagenet(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["transitions"].as_array().unwrap().len(), 3);
    assert_eq!(json["meta"]["mcmc"]["outer"], 4);

    let mut tsv = args.to_vec();
    tsv.extend(["--format", "tsv"]);
    let out = stagenet(&tsv);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Stage 1 -> 2"), "{text}");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = simulate(dir.path());
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "# short chain\nouter = 3\ninner = 10\nseed = 4\n").unwrap();
    let out = stagenet(&["--config", p(&config), "infer", "--data", p(&data), "--inner", "12"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["meta"]["mcmc"]["outer"], 3);
    assert_eq!(json["meta"]["mcmc"]["inner"], 12);
    assert_eq!(json["meta"]["mcmc"]["seed"], 4);
}
