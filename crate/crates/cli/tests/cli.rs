use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn syncltv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_syncltv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn harmonic_simulation_reports_exponential_sync() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let traj = dir.path().join("traj.csv");
    let out = syncltv(&[
        "simulate",
        "--scenario",
        "harmonic",
        "--p",
        "3",
        "--report",
        s(&report),
        "--out",
        s(&traj),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let r = json(&report);
    assert_eq!(r["observed"], "exponential");
    assert_eq!(r["matched"], true);
    assert!(r["sync"]["rate_estimate"].as_f64().unwrap() > 0.0);
    assert!(fs::read_to_string(&traj)
        .unwrap()
        .starts_with("# scenario=harmonic"));
}

#[test]
fn neg2_simulation_does_not_synchronize() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = syncltv(&["simulate", "--scenario", "neg2", "--report", s(&report)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let r = json(&report);
    assert_eq!(r["sync"]["synchronized"], false);
    assert_eq!(r["expected"], "bounded-no-sync");
    assert_eq!(r["observed"], "bounded-no-sync");
}

#[test]
fn counterexamples_match_their_expectations() {
    for name in ["neg1", "neg1-dt", "neg2-dt"] {
        let out = syncltv(&["simulate", "--scenario", name]);
        assert_eq!(code(&out), 0, "{name}: {}", stdout(&out));
    }
    let out = syncltv(&["simulate", "--scenario", "neg1-dt"]);
    assert!(stdout(&out).contains("artifact construction"));
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(code(&syncltv(&["simulate"])), 2);
    assert_eq!(code(&syncltv(&["simulate", "--scenario", "nope"])), 2);
    assert_eq!(
        code(&syncltv(&[
            "simulate",
            "--scenario",
            "harmonic",
            "--step",
            "-1"
        ])),
        2
    );
    assert_eq!(code(&syncltv(&["simulate", "--bogus"])), 2);
    assert_eq!(code(&syncltv(&["check", "--scenario", "harmonic"])), 2);
    assert_eq!(
        code(&syncltv(&["check", "--scenario", "harmonic", "--pe"])),
        2
    );
    assert_eq!(
        code(&syncltv(&["simulate", "--config", "/nonexistent/run.toml"])),
        2
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "scenario = \"harmonic\"\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&syncltv(&["simulate", "--config", s(&cfg)])), 2);
}

#[test]
fn pe_check_finds_pi_for_harmonic_grammian() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("check.json");
    let out = syncltv(&[
        "check",
        "--scenario",
        "harmonic",
        "--pe",
        "--window",
        "6.2832",
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("pe: uniform"));
    let r = json(&report);
    assert_eq!(r["pe"]["classification"], "uniform");
    let eps = r["pe"]["eps"].as_f64().unwrap();
    assert!((eps - std::f64::consts::PI).abs() < 1e-3, "{eps}");
}

#[test]
fn inline_gamma_lyapunov() {
    let dir = tempfile::tempdir().unwrap();
    let gamma = dir.path().join("gamma.txt");
    fs::write(&gamma, "# two nodes\n-1 1\n1 -1\n").unwrap();
    let report = dir.path().join("check.json");
    let out = syncltv(&[
        "check",
        "--inline-gamma",
        s(&gamma),
        "--lyapunov",
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&out), 0);
    let omega = &json(&report)["lyapunov"]["omega"];
    let expect = [[0.375, 0.125], [0.125, 0.375]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((omega[i][j].as_f64().unwrap() - expect[i][j]).abs() < 1e-12);
        }
    }
    fs::write(&gamma, "-1 2\n1 -1\n").unwrap();
    assert_eq!(
        code(&syncltv(&[
            "check",
            "--inline-gamma",
            s(&gamma),
            "--lyapunov"
        ])),
        2
    );
}

#[test]
fn neg1_monodromy_is_about_two() {
    let out = syncltv(&["check", "--scenario", "neg1", "--monodromy"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let value: f64 = text.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((value - 2.0).abs() < 0.2, "{text}");
}

#[test]
fn sufficiency_verdicts() {
    let out = syncltv(&["check", "--scenario", "neg2", "--se"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("se: stalled"));
}

#[test]
fn contraction_and_stability_checks_pass() {
    let out = syncltv(&[
        "check",
        "--scenario",
        "random-consensus",
        "--seed",
        "5",
        "--contraction",
        "--stability",
        "--window",
        "4",
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("pass = true"));
}

#[test]
fn plotdata_energy_is_monotone_for_harmonic() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let plot = dir.path().join("plot.csv");
    assert_eq!(
        code(&syncltv(&[
            "simulate",
            "--scenario",
            "harmonic",
            "--horizon",
            "100",
            "--out",
            s(&traj)
        ])),
        0
    );
    assert_eq!(
        code(&syncltv(&["plotdata", s(&traj), "--out", s(&plot)])),
        0
    );
    let text = fs::read_to_string(&plot).unwrap();
    let v: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(v.len() > 10);
    assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn plotdata_rejects_empty_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("empty.csv");
    fs::write(
        &traj,
        "# scenario=harmonic step=0.001 seed=none p=2 n=2\nt,x_1_1,x_1_2,x_2_1,x_2_2\n",
    )
    .unwrap();
    assert_eq!(code(&syncltv(&["plotdata", s(&traj)])), 2);
    fs::write(&traj, "garbage").unwrap();
    assert_eq!(code(&syncltv(&["plotdata", s(&traj)])), 2);
}

#[test]
fn identical_initial_states_have_zero_disagreement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("same.toml");
    fs::write(
        &cfg,
        "scenario = \"harmonic\"\np = 2\nx0 = [0.3, -0.2, 0.3, -0.2]\n[solver]\nhorizon = 5.0\n[outputs]\ntrajectory = \"same.csv\"\n",
    )
    .unwrap();
    let traj = dir.path().join("same.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_syncltv"))
        .current_dir(dir.path())
        .args(["simulate", "--config", s(&cfg)])
        .output()
        .unwrap();
    // a run that starts synchronized has no decay to fit
    assert!(matches!(code(&out), 0 | 1), "{}", stdout(&out));
    let out = syncltv(&["plotdata", s(&traj)]);
    assert_eq!(code(&out), 0);
    for line in stdout(&out).lines().skip(1) {
        let d: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(d < 1e-14, "{line}");
    }
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = syncltv(&[
            "simulate",
            "--scenario",
            "random-consensus",
            "--seed",
            "9",
            "--horizon",
            "20",
            "--out",
            s(path),
        ]);
        assert_eq!(code(&out), 0, "{}", stdout(&out));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn batch_mode_writes_one_file_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("run.csv");
    let out = syncltv(&[
        "simulate",
        "--scenario",
        "rotation-dt",
        "--seeds",
        "0..3",
        "--horizon",
        "500",
        "--out",
        s(&traj),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    for seed in 0..3 {
        assert!(dir.path().join(format!("run.seed{seed}.csv")).exists());
        assert!(stdout(&out).contains(&format!("[seed {seed}]")));
    }
}

#[test]
fn custom_config_mismatch_and_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("custom.toml");
    let base = "scenario = \"custom\"\ninterconnection = [[-1.0, 1.0], [1.0, -1.0]]\nx0 = [1.0, 0.0, 0.0, 1.0]\n[solver]\nhorizon = 10.0\nstep = 0.01\n[custom]\nkind = \"continuous\"\n";
    fs::write(&cfg, format!("{base}expected = \"exponential\"\nq = {{ name = \"constant\", value = [[1.0, 0.0], [0.0, 1.0]] }}\n")).unwrap();
    assert_eq!(code(&syncltv(&["simulate", "--config", s(&cfg)])), 0);
    fs::write(&cfg, format!("{base}expected = \"unbounded\"\nq = {{ name = \"constant\", value = [[1.0, 0.0], [0.0, 1.0]] }}\n")).unwrap();
    assert_eq!(code(&syncltv(&["simulate", "--config", s(&cfg)])), 1);
    fs::write(&cfg, format!("{base}expected = \"exponential\"\nq = {{ name = \"constant\", value = [[-1.0, 0.0], [0.0, 0.0]] }}\n")).unwrap();
    assert_eq!(code(&syncltv(&["simulate", "--config", s(&cfg)])), 3);
}

#[test]
fn sampled_coupling_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("q.csv"),
        "t,q11,q12,q21,q22\n0,1,0,0,0\n1,0,0,0,1\n",
    )
    .unwrap();
    let cfg = dir.path().join("sampled.toml");
    fs::write(
        &cfg,
        "scenario = \"custom\"\ninterconnection = [[-1.0, 1.0], [1.0, -1.0]]\nx0 = [1.0, 0.0, 0.0, 1.0]\n[solver]\nhorizon = 40.0\nstep = 0.01\n[custom]\nkind = \"continuous\"\nexpected = \"synchronize\"\nq = { name = \"sampled\", path = \"q.csv\", rows = 2, cols = 2, periodic = true }\n",
    )
    .unwrap();
    let out = syncltv(&["simulate", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}
