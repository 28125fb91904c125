use std::path::Path;
use std::process::{Command, Output};

fn gapwatch(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapwatch"))
        .args(args)
        .env("GAPWATCH_OUT", out)
        .output()
        .expect("binary runs")
}

fn stderr_first_line(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr)
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

#[test]
fn run_writes_three_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("short.conf");
    std::fs::write(&conf, "sim.duration = 40\n").unwrap();
    let o = gapwatch(&["run", "--config", conf.to_str().unwrap()], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for name in ["records.csv", "events.jsonl", "summary.json"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
}

#[test]
fn out_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    let explicit = dir.path().join("explicit");
    let o = gapwatch(
        &[
            "run",
            "--set",
            "sim.duration=5",
            "--out",
            explicit.to_str().unwrap(),
        ],
        &dir.path().join("env"),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(explicit.join("records.csv").is_file());
    assert!(!dir.path().join("env").exists());
}

#[test]
fn seed_flag_changes_records() {
    let dir = tempfile::tempdir().unwrap();
    let read = |seed: &str| {
        let o = gapwatch(
            &["run", "--set", "sim.duration=10", "--seed", seed],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(dir.path().join("records.csv")).unwrap()
    };
    assert_eq!(read("4"), read("4"));
    assert_ne!(read("4"), read("5"));
}

#[test]
fn unstable_gains_fail_check_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = gapwatch(&["check-config", "--set", "controller.k=0,0,0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let line = stderr_first_line(&o);
    assert!(line.starts_with("ERROR InvariantViolation:"), "{line}");
    assert!(line.contains("not stable"), "{line}");
}

#[test]
fn check_config_prints_canonical_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = gapwatch(
        &["check-config", "--set", "controller.tau_star=1.0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("controller.tau_star = 1\n"));
    assert!(stdout.contains("# limits: lcl 0.75 cl 1 ucl 1.25"));
}

#[test]
fn bad_keys_and_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = gapwatch(&["run", "--set", "sim.nope=1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_first_line(&o).starts_with("ERROR UnknownKey:"));

    let o = gapwatch(&["run", "--set", "sim.dt=0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_first_line(&o).starts_with("ERROR InvariantViolation:"));

    let o = gapwatch(
        &[
            "run",
            "--config",
            dir.path().join("missing.conf").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr_first_line(&o).starts_with("ERROR Io:"));
}

#[test]
fn overlapping_initial_states_abort_with_collision() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("crash.conf");
    std::fs::write(
        &conf,
        "sim.n_followers = 2\ninit.mode = explicit\n# follower 1 starts ahead of the lead\ninit.states = 10,8.94,0; -40,8.94,0\n",
    )
    .unwrap();
    let o = gapwatch(&["run", "--config", conf.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr_first_line(&o).starts_with("ERROR CollisionDetected:"),
        "{}",
        stderr_first_line(&o)
    );
}

#[test]
fn synth_profile_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = gapwatch(&["synth-profile", "--set", "lead.n_cycles=1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,a"));
    // 26.82 m/s at 2.75 m/s² is 9.75 s per phase, 98 samples each way
    assert_eq!(lines.count(), 2 * 98);
}

#[test]
fn oracle_reports_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let o = gapwatch(&["oracle", "--cases", "50"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("50 cases"));
}
