use std::path::Path;
use std::process::{Command, Output};

fn stbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stbc"))
        .args(args)
        .env_remove("STBC_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_of(args: &[&str]) -> Vec<u8> {
    let out = stbc(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

#[test]
fn sim_sweep_is_byte_reproducible() {
    let args = [
        "sim", "sweep", "--a", "1", "--layers", "2", "--snr-db", "0:10:5", "--trials", "300",
        "--seed", "7",
    ];
    let first = stdout_of(&args);
    assert_eq!(first, stdout_of(&args));
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("snr_db,trials,cer,ser,mean_evals,wall_time_s"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn seed_comes_from_environment_when_flag_is_absent() {
    let base = ["sim", "sweep", "--snr-db", "5", "--trials", "200"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_stbc"))
        .args(base)
        .env("STBC_SEED", "11")
        .output()
        .unwrap();
    let mut flagged = base.to_vec();
    flagged.extend(["--seed", "11"]);
    assert_eq!(with_env.stdout, stdout_of(&flagged));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out.csv");
    std::fs::write(
        &cfg,
        "# two-antenna run\na = 1\nlayers = 2\nsnr_db = 0, 20\ntrials = 100\nseed = 3\n",
    )
    .unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let out_s = out.to_str().unwrap();
    stdout_of(&[
        "sim", "sweep", "--config", cfg_s, "--trials", "150", "--out", out_s,
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("150")));
}

#[test]
fn capacity_sweep_is_byte_reproducible() {
    let args = [
        "capacity", "sweep", "--a", "2", "--nr", "1", "--snr-db", "0:20:10", "--trials", "200",
        "--seed", "5",
    ];
    let first = stdout_of(&args);
    assert_eq!(first, stdout_of(&args));
    assert!(first.starts_with(b"snr_db,mean_bits,std_err,trials\n"));
}

#[test]
fn built_design_verifies_and_corruption_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.txt");
    let p = path.to_str().unwrap();
    stdout_of(&[
        "design",
        "build",
        "--a",
        "2",
        "--layers",
        "2",
        "--layer-scalar",
        "pi/4",
        "--out",
        p,
    ]);
    let report = String::from_utf8(stdout_of(&["design", "verify", "--design", p])).unwrap();
    assert!(report.contains("overall: PASS"));

    let text = std::fs::read_to_string(&path).unwrap();
    corrupt(&path, &text);
    let out = stbc(&["design", "verify", "--design", p]);
    assert_eq!(out.status.code(), Some(1));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(
        report.contains("FAIL") && report.contains("witness"),
        "{report}"
    );
}

/// Negates the second row of the second weight matrix (the `F1` weight).
fn corrupt(path: &Path, text: &str) {
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let at = lines
        .iter()
        .position(|l| l.starts_with("weight 1 "))
        .unwrap()
        + 2;
    lines[at] = lines[at]
        .split_whitespace()
        .map(|t| {
            if t == "0+0i" {
                t.to_string()
            } else {
                negate(t)
            }
        })
        .collect::<Vec<_>>()
        .join(" ");
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn negate(tok: &str) -> String {
    let body = tok.strip_suffix('i').unwrap();
    let split = body.rfind(['+', '-']).filter(|&p| p > 0).unwrap();
    let re: f64 = body[..split].parse().unwrap();
    let im: f64 = body[split..].parse().unwrap();
    format!("{}{:+}i", -re, -im)
}

#[test]
fn verify_all_reports_pass() {
    let text = String::from_utf8(stdout_of(&["verify-all", "--a", "1", "--layers", "2"])).unwrap();
    assert!(text.trim_end().ends_with("overall: PASS"), "{text}");
}

#[test]
fn intractable_sweep_is_refused() {
    let out = stbc(&["sim", "sweep", "--a", "3", "--layers", "3", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("evaluations"));
}
