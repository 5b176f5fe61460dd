//! End-to-end checks of the binary: exit codes, CSV output, verdict
//! reports and the interactive debugger.

use std::io::Write;
use std::process::{Command, Output, Stdio};

fn asset(name: &str) -> String {
    format!("{}/assets/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn fsmsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsmsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_reference_telemetry() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let out = fsmsim(&[
        "run",
        "--model", &asset("reference.fsm"),
        "--plan", &asset("launch.plan"),
        "--config", &asset("mission.cfg"),
        "--duration", "2000",
        "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("time_s,battery_wh,killswitch"));
    assert_eq!(lines.count(), 2000);
    // OBSW first shows BOOT at exactly t=1800.
    let first_boot = text
        .lines()
        .skip(1)
        .find(|l| l.contains(".obsw.BOOT"))
        .expect("BOOT appears");
    assert!(first_boot.starts_with("1800,"), "{first_boot}");
}

#[test]
fn run_duration_zero_is_header_only() {
    let out = fsmsim(&[
        "run",
        "--model", &asset("reference.fsm"),
        "--duration", "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1, "{text}");
    assert!(text.starts_with("time_s,"));
}

#[test]
fn extra_monitor_flag_adds_a_column() {
    let out = fsmsim(&[
        "run",
        "--model", &asset("reference.fsm"),
        "--duration", "1",
        "--monitor", "environment=env",
        "--monitor", "obsw_on=obsw_flag",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let header = text.lines().next().unwrap();
    assert!(header.ends_with(",env,obsw_flag"), "{header}");
    assert!(text.lines().nth(1).unwrap().ends_with(".environment.SUN,false"));
}

#[test]
fn parse_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fsm");
    std::fs::write(&bad, "machine m {\n  initial A\n  state A { on -> B }\n}\n").unwrap();
    let out = fsmsim(&["run", "--model", bad.to_str().unwrap(), "--duration", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn missing_model_file_exits_2() {
    let out = fsmsim(&["run", "--model", "/nonexistent.fsm", "--duration", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    let out = fsmsim(&["run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn livelock_exits_3_and_says_so() {
    let dir = tempfile::tempdir().unwrap();
    let spin = dir.path().join("spin.fsm");
    std::fs::write(
        &spin,
        "var t = true\nmachine m { initial A state A { on auto [t] -> B } state B { on auto [t] -> A } }\n",
    )
    .unwrap();
    let out = fsmsim(&["run", "--model", spin.to_str().unwrap(), "--duration", "5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).to_lowercase().contains("livelock"), "{}", stderr(&out));
}

#[test]
fn script_errors_exit_3_naming_machine_state_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fsm");
    std::fs::write(
        &bad,
        "machine m {\n  initial A\n  state A {\n    entry { x = ghost + 1.0 }\n  }\n}\n",
    )
    .unwrap();
    let out = fsmsim(&["run", "--model", bad.to_str().unwrap(), "--duration", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    for needle in ["m", "A", "line 4", "ghost"] {
        assert!(err.contains(needle), "missing `{needle}` in: {err}");
    }
}

#[test]
fn validate_reports_are_reproducible() {
    let args = [
        "validate",
        "--model", &asset("reference.fsm"),
        "--plan", &asset("launch.plan"),
        "--config", &asset("mission.cfg"),
        "--seed", "5",
    ];
    let a = fsmsim(&args);
    let b = fsmsim(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    // Machine-readable record sits on stderr.
    assert!(stderr(&a).starts_with("verdict=ACCEPTED"), "{}", stderr(&a));
}

#[test]
fn empty_plan_is_vacuously_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("empty.plan");
    std::fs::write(&plan, "plan nothing { }\n").unwrap();
    let out = fsmsim(&[
        "validate",
        "--model", &asset("reference.fsm"),
        "--plan", plan.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("ACCEPTED"));
}

#[test]
fn models_can_be_split_across_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.fsm");
    let b = dir.path().join("b.fsm");
    std::fs::write(&a, "var flip = false\nmachine one { initial X state X { on go / { flip = true } -> X } }\n").unwrap();
    std::fs::write(&b, "machine two { initial Y state Y { } }\nmonitor flip as \"flip\"\n").unwrap();
    let out = fsmsim(&[
        "run",
        "--model", a.to_str().unwrap(),
        "--model", b.to_str().unwrap(),
        "--duration", "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("time_s,flip\n1,false\n"), "{}", stdout(&out));
}

#[test]
fn debug_session_over_pipes() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_fsmsim"))
        .args([
            "debug",
            "--model", &asset("reference.fsm"),
            "--config", &asset("mission.cfg"),
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(b"get killswitch\nemit launched\nbreak obsw BOOT\ncontinue\nstates\nquit\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("killswitch = true"), "{text}");
    assert!(text.contains("model.system.space.service.obsw: BOOT"), "{text}");
    assert!(text.contains("clock=1800"), "{text}");
}
