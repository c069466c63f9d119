//! Black-box tests of the `comm` binary: exit codes, offline guarantees,
//! credential hygiene, and cache accounting.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn presets_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").canonicalize().expect("presets dir")
}

/// A command with a scrubbed environment so ambient COMM_* variables (or a
/// developer's real credentials) cannot leak into test behavior.
fn comm() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_comm"));
    for (key, _) in std::env::vars_os() {
        if key.to_string_lossy().starts_with("COMM_") {
            cmd.env_remove(key);
        }
    }
    cmd.arg("--presets-dir").arg(presets_root());
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn write_script(dir: &Path, name: &str, lines: usize, answer: char) -> PathBuf {
    let path = dir.join(name);
    let body: String = (0..lines)
        .map(|i| {
            format!("{{\"response\": \"Thought {i} considered. The answer is ({answer}).\"}}\n")
        })
        .collect();
    fs::write(&path, body).expect("script written");
    path
}

fn mini_csv() -> PathBuf {
    presets_root().join("fixtures/college_physics_mini.csv")
}

#[test]
fn unknown_preset_exits_2_without_touching_the_network() {
    // The backend URL points at a closed port; if anything dialed it the
    // error (and exit code) would differ.
    let output = run(comm()
        .arg("--backend-url")
        .arg("http://127.0.0.1:9")
        .args(["run", "--preset", "no_such_preset", "--dataset"])
        .arg(mini_csv()));
    assert_eq!(output.status.code(), Some(2), "stderr: {}", stderr_of(&output));
    let stderr = stderr_of(&output);
    assert!(stderr.contains("no_such_preset"), "error names the preset: {stderr}");
    assert!(stderr.contains("college_physics_zero"), "error lists available presets: {stderr}");
}

#[test]
fn invalid_flag_values_exit_2() {
    let cases: Vec<Vec<String>> = vec![
        vec!["eval".into(), "--dataset".into(), mini_csv().display().to_string(), "--method".into(), "bogus".into()],
        vec!["eval".into(), "--dataset".into(), mini_csv().display().to_string(), "--format".into(), "yaml".into()],
        vec!["eval".into(), "--dataset".into(), mini_csv().display().to_string(), "--preset".into(), "college_physics_zero".into(), "--limit".into(), "0".into()],
        vec!["run".into(), "--preset".into(), "college_physics_zero".into(), "--dataset".into(), mini_csv().display().to_string(), "--mode".into(), "duet".into()],
        vec!["ablate".into(), "--suite".into(), "coffee".into(), "--dataset".into(), mini_csv().display().to_string()],
    ];
    for args in cases {
        let output = run(comm().args(&args));
        assert_eq!(
            output.status.code(),
            Some(2),
            "args {args:?} should exit 2; stderr: {}",
            stderr_of(&output)
        );
    }
}

#[test]
fn missing_dataset_exits_4() {
    let output = run(comm().args([
        "run",
        "--preset",
        "college_physics_zero",
        "--dataset",
        "/definitely/not/here.csv",
    ]));
    assert_eq!(output.status.code(), Some(4), "stderr: {}", stderr_of(&output));
}

#[test]
fn exhausted_script_exits_3() {
    let dir = tempfile::tempdir().expect("tempdir");
    // college_physics_zero needs 3 completions; give it 1.
    let script = write_script(dir.path(), "starved.jsonl", 1, 'B');
    let output = run(comm()
        .arg("--script")
        .arg(&script)
        .args(["run", "--preset", "college_physics_zero", "--dataset"])
        .arg(mini_csv()));
    assert_eq!(output.status.code(), Some(3), "stderr: {}", stderr_of(&output));
    assert!(stderr_of(&output).contains("exhausted"), "stderr: {}", stderr_of(&output));
}

#[test]
fn dry_run_prints_prompts_and_consumes_nothing() {
    let dir = tempfile::tempdir().expect("tempdir");
    // An empty script would fail on first use; dry-run must never reach it.
    let empty = write_script(dir.path(), "empty.jsonl", 0, 'B');

    let output = run(comm()
        .arg("--script")
        .arg(&empty)
        .arg("--dry-run")
        .args(["run", "--preset", "college_physics_zero", "--dataset"])
        .arg(mini_csv()));
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("--- prompt 1/3"), "prompts are rendered: {stdout}");
    assert!(stdout.contains("[system]"), "roles are labeled: {stdout}");
    assert!(!stdout.contains("verdict:"), "no verdict without a backend: {stdout}");

    let output = run(comm()
        .arg("--script")
        .arg(&empty)
        .arg("--dry-run")
        .args(["eval", "--preset", "college_physics_zero", "--dataset"])
        .arg(mini_csv()));
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("### college_physics_mini:0"), "per-problem header: {stdout}");
    assert!(!stdout.contains("accuracy"), "no report in dry-run: {stdout}");
}

#[test]
fn turns_override_extends_the_discussion() {
    let dir = tempfile::tempdir().expect("tempdir");
    // 2 experts x 2 turns + summarizer = 5 completions.
    let script = write_script(dir.path(), "five.jsonl", 5, 'B');
    let output = run(comm()
        .arg("--script")
        .arg(&script)
        .args(["run", "--preset", "college_physics_zero", "--turns", "2", "--dataset"])
        .arg(mini_csv()));
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("turns: 2"), "header reflects the override: {stdout}");
    assert!(stdout.contains("--- turn 5/5 · summarizer"), "five turns ran: {stdout}");
}

#[test]
fn cache_accounting_matches_run_volume() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cache_dir = dir.path().join("cache");
    // 3 problems x (2 experts x 1 turn + summarizer) = 9 completions.
    let script = write_script(dir.path(), "nine.jsonl", 9, 'B');

    let output = run(comm()
        .arg("--script")
        .arg(&script)
        .arg("--cache-dir")
        .arg(&cache_dir)
        .args(["eval", "--preset", "college_physics_zero", "--dataset"])
        .arg(mini_csv()));
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));

    let output =
        run(comm().arg("--cache-dir").arg(&cache_dir).args(["cache", "stats"]));
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    assert!(stdout_of(&output).contains("entries: 9"), "stdout: {}", stdout_of(&output));

    // A warm second pass needs no script lines at all.
    let empty = write_script(dir.path(), "empty.jsonl", 0, 'B');
    let output = run(comm()
        .arg("--script")
        .arg(&empty)
        .arg("--cache-dir")
        .arg(&cache_dir)
        .args(["eval", "--preset", "college_physics_zero", "--dataset"])
        .arg(mini_csv()));
    assert_eq!(
        output.status.code(),
        Some(0),
        "warm pass must not consult the script; stderr: {}",
        stderr_of(&output)
    );

    let output =
        run(comm().arg("--cache-dir").arg(&cache_dir).args(["cache", "verify"]));
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    assert!(stdout_of(&output).contains("0 corrupt"), "stdout: {}", stdout_of(&output));

    let output =
        run(comm().arg("--cache-dir").arg(&cache_dir).args(["cache", "clear"]));
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout_of(&output).contains("cleared 9 entries"), "stdout: {}", stdout_of(&output));

    let output =
        run(comm().arg("--cache-dir").arg(&cache_dir).args(["cache", "stats"]));
    assert!(stdout_of(&output).contains("entries: 0"), "stdout: {}", stdout_of(&output));
}

#[test]
fn api_key_never_appears_in_output_and_has_no_flag() {
    let secret = "super-secret-credential-598671";
    let dir = tempfile::tempdir().expect("tempdir");
    let script = write_script(dir.path(), "three.jsonl", 3, 'B');
    let output = run(comm()
        .env("COMM_API_KEY", secret)
        .arg("--script")
        .arg(&script)
        .args(["run", "--preset", "college_physics_zero", "--dataset"])
        .arg(mini_csv()));
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    let stderr = stderr_of(&output);
    let stdout = stdout_of(&output);
    assert!(stderr.contains("api_key:     [redacted]"), "config echo redacts: {stderr}");
    assert!(!stdout.contains(secret) && !stderr.contains(secret), "secret never printed");

    // There is deliberately no --api-key flag.
    let output = run(comm().args(["--api-key", "x", "cache", "stats"]));
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("--api-key"), "stderr: {}", stderr_of(&output));
}

#[test]
fn effective_config_is_echoed_before_any_run() {
    let dir = tempfile::tempdir().expect("tempdir");
    let script = write_script(dir.path(), "three.jsonl", 3, 'B');
    let output = run(comm()
        .arg("--script")
        .arg(&script)
        .args(["run", "--preset", "college_physics_zero", "--dataset"])
        .arg(mini_csv()));
    let stderr = stderr_of(&output);
    assert!(
        stderr.starts_with("effective configuration:"),
        "config echo leads the output: {stderr}"
    );
    for field in ["backend:", "model:", "cache_dir:", "presets_dir:", "retries:"] {
        assert!(stderr.contains(field), "config echo includes {field}: {stderr}");
    }
}

#[test]
fn config_file_rejects_unknown_keys_by_name() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = dir.path().join("comm.toml");
    fs::write(&config, "api_kei = \"oops\"\n").expect("config written");
    let output = run(comm().arg("--config").arg(&config).args(["cache", "stats"]));
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("api_kei"), "stderr: {}", stderr_of(&output));
}

#[test]
fn eval_writes_reports_and_transcripts_to_files() {
    let dir = tempfile::tempdir().expect("tempdir");
    let script = write_script(dir.path(), "nine.jsonl", 9, 'B');
    let report_path = dir.path().join("report.json");
    let transcripts_path = dir.path().join("transcripts.jsonl");
    let output = run(comm()
        .arg("--script")
        .arg(&script)
        .args(["eval", "--preset", "college_physics_zero", "--format", "json"])
        .arg("--out")
        .arg(&report_path)
        .arg("--transcripts")
        .arg(&transcripts_path)
        .arg("--dataset")
        .arg(mini_csv()));
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));

    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(&report_path).expect("report file")).expect("valid JSON");
    // Every scripted turn answers (B); only problem 0's gold is B.
    assert_eq!(report["n_total"], 3);
    assert_eq!(report["n_correct"], 1);
    assert_eq!(report["accuracy_percent"], "33.33");
    assert_eq!(report["verdicts"][0]["correct"], true);
    assert_eq!(report["transcripts_path"], transcripts_path.display().to_string());

    let lines: Vec<String> = fs::read_to_string(&transcripts_path)
        .expect("transcripts file")
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(lines.len(), 3, "one transcript per problem");
    for line in lines {
        let t: serde_json::Value = serde_json::from_str(&line).expect("valid transcript JSON");
        assert_eq!(t["turns"].as_array().map(Vec::len), Some(3));
    }
}

#[test]
fn eval_limit_restricts_the_problem_count() {
    let dir = tempfile::tempdir().expect("tempdir");
    let script = write_script(dir.path(), "three.jsonl", 3, 'B');
    let output = run(comm()
        .arg("--script")
        .arg(&script)
        .args(["eval", "--preset", "college_physics_zero", "--limit", "1", "--format", "delimited", "--dataset"])
        .arg(mini_csv()));
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("n_total\t1"), "limit respected: {stdout}");
    assert!(stdout.contains("accuracy_percent\t100.00"), "stdout: {stdout}");
}

#[test]
fn ablation_rejects_dry_run_but_emits_tables() {
    let output = run(comm().arg("--dry-run").args([
        "ablate",
        "--suite",
        "turn_count",
        "--dataset",
    ]).arg(mini_csv()));
    assert_eq!(output.status.code(), Some(2), "stderr: {}", stderr_of(&output));

    // A real ablation over the fixture problems, served entirely by script:
    // turn_count = zero/few x turns 1,2 over 3 problems with 2 experts
    // = (3+5+3+5) * 3 = 48 completions.
    let dir = tempfile::tempdir().expect("tempdir");
    let script = write_script(dir.path(), "fortyeight.jsonl", 48, 'B');
    let output = run(comm()
        .arg("--script")
        .arg(&script)
        .args(["ablate", "--suite", "turn_count", "--benchmark", "college_physics", "--dataset"])
        .arg(mini_csv()));
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("One Turn (Acc%)"), "stdout: {stdout}");
    assert!(stdout.contains("Zero-shot") && stdout.contains("Few-shot"), "stdout: {stdout}");
}

#[test]
fn validate_accepts_the_shipped_presets() {
    let output = run(comm().arg("validate"));
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr_of(&output));
    assert!(stdout_of(&output).contains("presets ok"), "stdout: {}", stdout_of(&output));
}
