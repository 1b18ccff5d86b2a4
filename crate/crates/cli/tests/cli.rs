//! End-to-end tests against the built binary.

use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

fn concert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario_file(text: &str) -> NamedTempFile {
    let mut file = NamedTempFile::new().unwrap();
    file.write_all(text.as_bytes()).unwrap();
    file
}

const CORRECT: &str = "\
[sim]
seed = 11
nodes = 5

[proposals]
decision = text:X
";

#[test]
fn correct_scenario_exits_zero_with_clean_passes() {
    let file = scenario_file(CORRECT);
    let out = concert(&["run-scenario", file.path().to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("agreement  clean-pass"));
    assert!(stdout.contains("\"record\":\"verdict\""));
    assert!(stdout.contains("verdict ok"));
}

#[test]
fn true_alarms_still_exit_zero() {
    let file = scenario_file(
        "\
[sim]
seed = 11
nodes = 5

[bug]
kind = invalid-decision
value = text:NEVER

[proposals]
decision = text:X
",
    );
    let out = concert(&["run-scenario", file.path().to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("validity   true-alarm"));
    assert!(stdout.contains("kind=validity"));
}

#[test]
fn parse_errors_exit_one_and_name_the_line() {
    let file = scenario_file("[sim]\nnodes = 5\nwhat = 3\n");
    let out = concert(&["run-scenario", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn seed_override_reruns_identically() {
    let file = scenario_file(CORRECT);
    let path = file.path().to_str().unwrap().to_owned();
    let a = concert(&["run-scenario", &path, "--seed", "99"]);
    let b = concert(&["run-scenario", &path, "--seed", "99"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn trace_out_writes_the_event_log() {
    let file = scenario_file(CORRECT);
    let trace = NamedTempFile::new().unwrap();
    let out = concert(&[
        "run-scenario",
        file.path().to_str().unwrap(),
        "--trace-out",
        trace.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(trace.path()).unwrap();
    assert!(text.contains("tree-assign node=1"));
    assert!(text.contains("slot=consensus:0 tag=combined"));
}

#[test]
fn records_out_redirects_the_structured_records() {
    let file = scenario_file(CORRECT);
    let records = NamedTempFile::new().unwrap();
    let out = concert(&[
        "run-scenario",
        file.path().to_str().unwrap(),
        "--records-out",
        records.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(!stdout.contains("\"record\""));
    let text = std::fs::read_to_string(records.path()).unwrap();
    for line in text.lines() {
        serde_json::from_str::<serde_json::Value>(line).expect("each line is JSON");
    }
    assert!(text.contains("\"record\":\"classification\""));
}

#[test]
fn root_random_mode_flag_is_accepted() {
    let file = scenario_file(
        "\
[sim]
seed = 11
nodes = 6

[bug]
kind = duplicate-id
node = 4
id = 2

[proposals]
decision = text:X
",
    );
    let out = concert(&[
        "run-scenario",
        file.path().to_str().unwrap(),
        "--mode",
        "root-random",
        "--digest-width",
        "8",
    ]);
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("uniqueness true-alarm"));
}

#[test]
fn suite_subcommand_runs_a_small_batch() {
    let out = concert(&[
        "run-suite",
        "completeness",
        "--n",
        "4",
        "--iters",
        "5",
        "--seed",
        "2",
    ]);
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("runs=5 ok=5"));
}
