//! End-to-end tests of the `pc` binary: CSV schema, determinism, config
//! handling, and the demo subcommands.

use std::path::Path;
use std::process::{Command, Output};

fn pc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pc"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = pc().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).expect("output file exists")
}

#[test]
fn csv_schema_is_pinned() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs.csv");
    run_ok(&[
        "run",
        "--preset",
        "quadratic-fixed",
        "--runs",
        "1",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = read(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run_id,iteration,oracle_calls,beta,model_components,e_qg,kl_pq,best_g"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6, "one row per iteration");
    let sig9 = regex_lite("^-?[0-9]\\.[0-9]{8}e-?[0-9]+$");
    for (i, row) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 8, "row {row}");
        assert_eq!(fields[0], "0");
        assert_eq!(fields[1], (i + 1).to_string());
        assert_eq!(fields[2], (30 * (i + 1)).to_string());
        assert_eq!(fields[4], "1");
        for idx in [3, 5, 6, 7] {
            assert!(
                sig9(fields[idx]),
                "field {idx} of row {row} is not 9-significant-digit scientific"
            );
        }
    }
}

/// Tiny matcher for the one pattern these tests need (avoids a regex
/// dependency): `-?D.DDDDDDDDe-?digits`.
fn regex_lite(_pattern: &str) -> impl Fn(&str) -> bool {
    |s: &str| {
        let s = s.strip_prefix('-').unwrap_or(s);
        let mut parts = s.split('e');
        let (Some(mantissa), Some(exp), None) = (parts.next(), parts.next(), parts.next()) else {
            return false;
        };
        let mantissa_ok = mantissa.len() == 10
            && mantissa.as_bytes()[1] == b'.'
            && mantissa.chars().next().unwrap().is_ascii_digit()
            && mantissa[2..].chars().all(|c| c.is_ascii_digit());
        let exp = exp.strip_prefix('-').unwrap_or(exp);
        mantissa_ok && !exp.is_empty() && exp.chars().all(|c| c.is_ascii_digit())
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        run_ok(&[
            "run",
            "--preset",
            "quadratic-anneal",
            "--runs",
            "2",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(read(&a), read(&b));
}

#[test]
fn sidecar_echoes_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bag.csv");
    // Trim the preset to one cheap run; the echoed knobs must still carry
    // the preset's reference parameters.
    let cfg = dir.path().join("override.cfg");
    std::fs::write(&cfg, "iterations = 2\ndiagnostic_samples = 50\n").unwrap();
    run_ok(&[
        "run",
        "--preset",
        "rosenbrock-bagging",
        "--config",
        cfg.to_str().unwrap(),
        "--runs",
        "1",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    let sidecar = read(&dir.path().join("bag.csv.config"));
    for expected in [
        "benchmark = rosenbrock2d",
        "batch_size = 20",
        "bagging = 5",
        "noise_half_width = 0.25",
        "iterations = 2",
        "seed = 3",
        "cv_k1 = 0.5",
        "cv_k2 = 2",
        "cv_n_beta = 5",
        "cv_folds = 10",
        "cv_max_ext_iter = 4",
    ] {
        assert!(sidecar.contains(expected), "sidecar missing `{expected}`:\n{sidecar}");
    }
}

#[test]
fn unknown_config_key_names_the_offender() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "batch_sz = 10\n").unwrap();
    let out = pc()
        .args(["run", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("batch_sz"), "stderr: {stderr}");
}

#[test]
fn unknown_preset_is_rejected() {
    let out = pc().args(["run", "--preset", "sphere"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn risk_demo_prints_half_probability_for_equal_means() {
    let out = run_ok(&[
        "risk-demo",
        "--mu1", "1.0",
        "--mu2", "1.0",
        "--sigma-a", "0.4",
        "--sigma-b", "0.5",
        "--l1", "0.2",
        "--l2", "0.9",
        "--n", "50000",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("analytic prob_choose_phi1 = 5.00000000e-1"),
        "stdout: {stdout}"
    );
    // The MC estimate lands within a loose band of one half.
    let mc_line = stdout
        .lines()
        .find(|l| l.starts_with("mc       prob_choose_phi1"))
        .unwrap();
    let value: f64 = mc_line
        .split('=')
        .nth(1)
        .unwrap()
        .trim()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - 0.5).abs() < 0.02, "mc value {value}");
}

#[test]
fn fbmc_demo_reports_three_estimates_and_reproduces() {
    let args = [
        "fbmc-demo",
        "--benchmark", "quadratic2d",
        "--n-factual", "30",
        "--n-fictitious", "2000",
        "--seed", "5",
    ];
    let a = run_ok(&args);
    let b = run_ok(&args);
    assert_eq!(a.stdout, b.stdout, "fixed seed must reproduce");
    let stdout = String::from_utf8_lossy(&a.stdout);
    assert!(stdout.contains("quadrature truth"));
    assert!(stdout.contains("factual importance"));
    assert!(stdout.contains("fit-based fictitious"));
    assert!(stdout.contains("oracle calls         = 30"));
}

#[test]
fn fbmc_demo_usage_errors() {
    let too_few = pc()
        .args(["fbmc-demo", "--n-factual", "4"])
        .output()
        .unwrap();
    assert!(!too_few.status.success());
    assert!(String::from_utf8_lossy(&too_few.stderr).contains("insufficient factual samples"));

    let wrong_dim = pc()
        .args(["fbmc-demo", "--benchmark", "woods4d"])
        .output()
        .unwrap();
    assert!(!wrong_dim.status.success());
}

#[test]
fn elite_demo_selects_surrogate_minimum_at_k1() {
    for seed in ["2", "9"] {
        let out = run_ok(&["elite-demo", "-k", "1", "--n-tuples", "2000", "--seed", seed]);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(
            stdout.contains("selected candidate index = 0"),
            "seed {seed}: {stdout}"
        );
    }
    // Same seed, same table.
    let a = run_ok(&["elite-demo", "-k", "3", "--seed", "4"]);
    let b = run_ok(&["elite-demo", "-k", "3", "--seed", "4"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn elite_demo_rejects_k_zero() {
    let out = pc().args(["elite-demo", "-k", "0"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn woods_bestfit_requires_and_consumes_prior_csv() {
    let dir = tempfile::tempdir().unwrap();
    let missing = pc()
        .args(["run", "--preset", "woods-bestfit", "--runs", "1"])
        .output()
        .unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--prior-csv"));

    // Phase one: a short cross-validated sweep.
    let prior = dir.path().join("prior.csv");
    let trim = dir.path().join("trim.cfg");
    std::fs::write(&trim, "iterations = 6\ndiagnostics = false\n").unwrap();
    run_ok(&[
        "run",
        "--preset", "woods-cv",
        "--config", trim.to_str().unwrap(),
        "--runs", "2",
        "--seed", "11",
        "--out", prior.to_str().unwrap(),
    ]);

    // Phase two: the fitted multiplicative rule drives a fresh sweep.
    let out = dir.path().join("bestfit.csv");
    let run_out = run_ok(&[
        "run",
        "--preset", "woods-bestfit",
        "--config", trim.to_str().unwrap(),
        "--prior-csv", prior.to_str().unwrap(),
        "--runs", "1",
        "--seed", "12",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&run_out.stderr).contains("best-fit rule"));
    let text = read(&out);
    assert_eq!(text.lines().count(), 7); // header + 6 iterations
    // Multiplicative schedule: consecutive beta ratios are constant.
    let betas: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    let k = betas[1] / betas[0];
    for w in betas.windows(2) {
        assert!((w[1] / w[0] - k).abs() < 1e-6);
    }
}
