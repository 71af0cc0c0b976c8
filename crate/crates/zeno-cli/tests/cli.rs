//! Driver-level tests: the golden configuration corpus, end-to-end runs of
//! every subcommand, output formats, environment overrides, and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

use zeno_cli::config::{parse_config, Experiment, OutputFormat};
use zeno_cli::error::CliError;

fn golden_dir(kind: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(kind)
}

fn corpus(kind: &str) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = std::fs::read_dir(golden_dir(kind))
        .unwrap()
        .map(|entry| {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_str().unwrap().to_string();
            (name, std::fs::read_to_string(&path).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("zeno-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Command for the built binary with override variables cleared, so the
/// surrounding environment cannot leak into a test.
fn zeno() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_zeno"));
    cmd.env_remove("ZENO_THREADS").env_remove("ZENO_OUT");
    cmd
}

const FAST_TABLE_CONFIG: &str = "[run]\ntrajectories = 10\nstep = 0.002\n";

#[test]
fn golden_valid_corpus_parses() {
    let files = corpus("valid");
    assert!(files.len() >= 5, "corpus should not shrink silently");
    for (name, text) in &files {
        let cfg = parse_config(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        match name.as_str() {
            "minimal.cfg" => {
                assert_eq!(cfg.params.omega2, 1.0);
                assert_eq!(cfg.experiment, Experiment::ItanoTable);
            }
            "defaults.cfg" => {
                assert!((cfg.params.omega2 - std::f64::consts::PI / 256.0).abs() < 1e-15);
                assert_eq!(cfg.schedule.pi_pulse_total, Some(256.0));
            }
            "full.cfg" => {
                assert_eq!(cfg.experiment, Experiment::SingleAtomPeriods);
                assert_eq!(cfg.schedule.n_pulses, 500);
                assert_eq!(cfg.output_path.as_deref(), Some(Path::new("periods.csv")));
                assert_eq!(cfg.master_seed, 99);
            }
            "tiled.cfg" => {
                assert_eq!(cfg.output_format, OutputFormat::Json);
                assert!((cfg.schedule.dt - (16.0 - 2.4)).abs() < 1e-12);
            }
            "start_aligned.cfg" => {
                assert!(!cfg.schedule.weak_on_during_pulse);
                assert_eq!(cfg.experiment, Experiment::TrajectoryPaths);
            }
            other => panic!("unrecognized corpus file {other}; add expectations for it"),
        }
    }
}

#[test]
fn golden_invalid_corpus_is_rejected() {
    let expectations: &[(&str, bool, &str)] = &[
        // (file, expect_parse_error, message fragment)
        ("bad_experiment.cfg", true, "unrecognized experiment"),
        ("bad_number.cfg", true, "expects a number"),
        ("conflicting_gap.cfg", true, "mutually exclusive"),
        ("duplicate_key.cfg", true, "duplicate key"),
        ("key_before_section.cfg", true, "before any [section]"),
        ("missing_value.cfg", true, "no value"),
        ("negative_rate.cfg", false, "non-negative"),
        ("unknown_key.cfg", true, "unknown key"),
        ("unknown_section.cfg", true, "unknown section"),
        ("zero_pulses.cfg", false, "n_pulses"),
    ];
    let files = corpus("invalid");
    assert_eq!(
        files.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        expectations.iter().map(|(n, _, _)| *n).collect::<Vec<_>>(),
        "corpus files and expectations must stay in sync"
    );
    for ((name, text), (_, expect_parse, fragment)) in files.iter().zip(expectations) {
        let err = parse_config(text).expect_err(name);
        let message = err.to_string();
        assert!(message.contains(fragment), "{name}: `{message}` lacks `{fragment}`");
        match (&err, expect_parse) {
            (CliError::Parse { line, col, .. }, true) => {
                assert!(*line >= 1 && *col >= 1, "{name}: positions must be 1-based");
            }
            (CliError::Validation(_), false) => {}
            other => panic!("{name}: wrong error class {other:?}"),
        }
    }
}

#[test]
fn parse_positions_point_at_the_offending_line() {
    let err = parse_config("[params]\nomega2 = 1\nomega3 = 50\nomega3 = 51\n").unwrap_err();
    match err {
        CliError::Parse { line, .. } => assert_eq!(line, 4),
        other => panic!("expected parse error, got {other}"),
    }
}

#[test]
fn survival_table_prints_documented_values() {
    let dir = temp_dir("table");
    let cfg = dir.join("table.cfg");
    std::fs::write(&cfg, FAST_TABLE_CONFIG).unwrap();
    let out = dir.join("table.csv");
    let status = zeno().args(["itano", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let body = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines[0], "config_hash,n,proj_dt,proj_dt_minus_taup,quantum_jump_mc,mc_stderr,bloch");
    assert_eq!(lines.len(), 8);
    let hash = lines[1].split(',').next().unwrap().to_string();
    assert_eq!(hash.len(), 16);
    for line in &lines[1..] {
        assert!(line.starts_with(&hash), "every row echoes the config hash");
    }
    let row = |n: &str| -> Vec<String> {
        lines[1..]
            .iter()
            .map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>())
            .find(|cells| cells[1] == n)
            .unwrap()
    };
    assert_eq!(row("2")[2], "0.50000");
    assert_eq!(row("16")[3], "0.10029");
    assert_eq!(row("1")[2], "1.00000");
    // The n = 64 cell carries the formula value, not the tabulated 0.00371.
    assert_eq!(row("64")[2], "0.03712");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn json_output_carries_full_precision_rows() {
    let dir = temp_dir("json");
    let cfg = dir.join("table.cfg");
    std::fs::write(&cfg, FAST_TABLE_CONFIG).unwrap();
    let out = dir.join("table.json");
    let status = zeno()
        .args(["itano", "--format", "json", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(parsed["config_hash"].as_str().unwrap().len(), 16);
    let rows = parsed["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0]["n"], 1);
    let proj = rows[1]["proj_dt"].as_f64().unwrap();
    assert!((proj - 0.5).abs() < 1e-12, "json keeps unrounded values, got {proj}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn environment_overrides_for_output_and_threads() {
    let dir = temp_dir("env");
    let cfg = dir.join("table.cfg");
    std::fs::write(&cfg, "[params]\nomega2 = 1\nomega3 = 50\na3 = 20\n").unwrap();

    // ZENO_OUT steers the output when --out is absent.
    let env_out = dir.join("from-env.csv");
    let status = zeno()
        .args(["eigen", "--config"])
        .arg(&cfg)
        .env("ZENO_OUT", &env_out)
        .env("ZENO_THREADS", "2")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_out.exists());

    // An explicit --out wins over the environment.
    let flag_out = dir.join("from-flag.csv");
    let status = zeno()
        .args(["eigen", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&flag_out)
        .env("ZENO_OUT", dir.join("ignored.csv"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(flag_out.exists());
    assert!(!dir.join("ignored.csv").exists());

    // A malformed ZENO_THREADS is invalid input.
    let status = zeno()
        .args(["eigen", "--config"])
        .arg(&cfg)
        .env("ZENO_THREADS", "many")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn invalid_config_file_exits_with_code_one() {
    let dir = temp_dir("badcfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "[params]\nomega2 = 1\nomega2 = 2\n").unwrap();
    let output = zeno().args(["itano", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("line 3"), "stderr should locate the error: {stderr}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn thread_count_does_not_change_output_bytes() {
    let dir = temp_dir("threads");
    let cfg = dir.join("table.cfg");
    std::fs::write(&cfg, "[run]\ntrajectories = 40\nstep = 0.002\n").unwrap();
    let mut bodies = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.join(format!("t{threads}.csv"));
        let status = zeno()
            .args(["itano", "--seed", "7", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        bodies.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn periods_run_emits_census_and_summary() {
    let dir = temp_dir("periods");
    let out = dir.join("periods.csv");
    let status = zeno()
        .args(["periods", "--config"])
        .arg(golden_dir("valid").join("full.cfg"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let body = std::fs::read_to_string(&out).unwrap();
    let summaries: Vec<&str> = body.lines().filter(|l| l.contains(",summary,")).collect();
    assert_eq!(summaries.len(), 2, "one summary row per period kind");
    assert!(body.lines().any(|l| l.contains(",period,")), "per-period census rows present");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn paths_run_emits_both_series() {
    let dir = temp_dir("paths");
    let out = dir.join("paths.csv");
    let status = zeno()
        .args(["paths", "--config"])
        .arg(golden_dir("valid").join("start_aligned.cfg"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let body = std::fs::read_to_string(&out).unwrap();
    assert!(body.lines().any(|l| l.contains(",fluorescence,")));
    assert!(body.lines().any(|l| l.contains(",ideal,")));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bloch_run_reports_step_refinement() {
    let dir = temp_dir("bloch");
    let cfg = dir.join("bloch.cfg");
    std::fs::write(&cfg, "[schedule]\nt_pi = 8\nn_pulses = 2\ntau_p = 2\n[run]\nstep = 0.002\n")
        .unwrap();
    let out = dir.join("bloch.csv");
    let status =
        zeno().args(["bloch", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let body = std::fs::read_to_string(&out).unwrap();
    assert_eq!(body.lines().count(), 4, "header plus three refinement rows");
    std::fs::remove_dir_all(&dir).unwrap();
}
