//! End-to-end runs of the command-line binary: config parsing, output
//! documents, side files, exit codes, and byte-level reproducibility.

use std::path::Path;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lrperc"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const THETA: &str = r#"
command = "theta"
seed = 9
n = 6
replicas = 400

[kernel]
family = "table"
d = 2
entries = [ { displacement = [1, 0], value = 0.5 },
            { displacement = [0, 1], value = 0.5 } ]
"#;

#[test]
fn theta_run_produces_a_document() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("theta.toml");
    let out = dir.path().join("out.json");
    write(&config, THETA);
    let status = binary()
        .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["command"], "theta");
    assert!(doc["generator"].as_str().unwrap().contains("philox"));
    let estimate = doc["results"]["estimate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&estimate));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("theta.toml");
    write(&config, THETA);
    let out1 = dir.path().join("a.json");
    let out2 = dir.path().join("b.json");
    for out in [&out1, &out2] {
        let status = binary()
            .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        std::fs::read(&out1).unwrap(),
        std::fs::read(&out2).unwrap()
    );
}

#[test]
fn seed_override_accepts_hex_and_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("theta.toml");
    write(&config, THETA);
    let out1 = dir.path().join("a.json");
    let out2 = dir.path().join("b.json");
    let status = binary()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "0x2A",
            "--out",
            out1.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let status = binary()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "42",
            "--out",
            out2.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    // 0x2A and 42 are the same seed.
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out1).unwrap()).unwrap();
    assert_eq!(doc["seed"], 42);
}

#[test]
fn malformed_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    write(&config, &format!("{THETA}\nunknown_key = 1\n"));
    let output = binary()
        .args(["--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    // No partial document on stdout.
    assert!(output.stdout.is_empty());
}

#[test]
fn oversized_enumeration_exits_with_size_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("enum.toml");
    write(
        &config,
        r#"
command = "enumerate"
n = 6
functional = "cluster-size"

[kernel]
family = "table"
d = 2
entries = [ { displacement = [1, 0], value = 0.5 },
            { displacement = [0, 1], value = 0.5 } ]
"#,
    );
    let output = binary()
        .args(["--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn failed_bracketing_exits_with_bracketing_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bisect.toml");
    write(
        &config,
        r#"
command = "bisect"
n = 4
replicas = 200
beta_max = 0.0001

[phi]
d = 2
entries = [ { displacement = [1, 0], value = 1.0 },
            { displacement = [0, 1], value = 1.0 } ]
"#,
    );
    let output = binary()
        .args(["--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn explore_writes_line_delimited_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("explore.toml");
    let trace = dir.path().join("run.trace.jsonl");
    write(
        &config,
        &format!(
            r#"
command = "explore"
seed = 3
n = 3
q = 0.3
delta = [[1, 0]]
assert_level = "full-trace"
trace_out = "{}"

[kernel]
family = "table"
d = 2
entries = [ {{ displacement = [1, 0], value = 0.6 }},
            {{ displacement = [0, 1], value = 0.6 }} ]
"#,
            trace.display()
        ),
    );
    let out = dir.path().join("out.json");
    let status = binary()
        .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(!text.trim().is_empty());
    for line in text.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(rec.get("stage").is_some());
        assert!(rec.get("step").is_some());
        assert!(rec.get("outcome").is_some());
    }
}

#[test]
fn decay_writes_csv_side_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("decay.toml");
    let csv = dir.path().join("decay.csv");
    write(
        &config,
        &format!(
            r#"
command = "decay"
seed = 4
n_list = [2, 4, 6]
replicas = 3000
csv_out = "{}"

[kernel]
family = "table"
d = 1
entries = [ {{ displacement = [1], value = 0.5 }} ]
"#,
            csv.display()
        ),
    );
    let status = binary()
        .args(["--config", config.to_str().unwrap(), "--out", "-"])
        .output()
        .unwrap();
    assert!(status.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,theta,stderr,log_theta");
    assert_eq!(lines.count(), 3);
}

#[test]
fn documents_are_self_describing() {
    // The embedded effective config reruns to the identical document.
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("theta.toml");
    write(&config, THETA);
    let output = binary()
        .args(["--config", config.to_str().unwrap(), "--out", "-"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let embedded: lrperc::cli::ExperimentConfig =
        serde_json::from_value(doc["config"].clone()).unwrap();
    let rerun = lrperc::cli::run_command(&embedded).unwrap();
    assert_eq!(rerun.to_json_string().as_bytes(), &output.stdout[..]);
}

#[test]
fn oriented_theta_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("oriented.toml");
    write(
        &config,
        r#"
command = "theta"
seed = 12
n = 8
replicas = 2000

[kernel]
family = "table"
d = 2
orientation = "oriented"
entries = [ { displacement = [0, 1], value = 0.7 },
            { displacement = [1, 1], value = 0.7 } ]
"#,
    );
    let output = binary()
        .args(["--config", config.to_str().unwrap(), "--out", "-"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let estimate = doc["results"]["estimate"].as_f64().unwrap();
    // Above the oriented threshold: survival is strictly between 0 and 1.
    assert!(estimate > 0.3 && estimate < 1.0, "estimate {estimate}");
}

#[test]
fn couple_reports_containment_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("couple.toml");
    write(
        &config,
        r#"
command = "couple"
seed = 5
n = 4
replicas = 200

[kernel]
family = "table"
d = 2
entries = [ { displacement = [1, 0], value = 0.45 },
            { displacement = [0, 1], value = 0.45 } ]

[kernel_prime]
family = "table"
d = 2
entries = [ { displacement = [1, 0], value = 0.3 },
            { displacement = [0, 1], value = 0.45 } ]
"#,
    );
    let output = binary()
        .args(["--config", config.to_str().unwrap(), "--out", "-"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let counts = &doc["results"]["containment_counts"];
    assert_eq!(counts["violated"], 0);
    let total = counts["holds"].as_u64().unwrap() + counts["not_applicable"].as_u64().unwrap();
    assert_eq!(total, 200);
    assert!(doc["results"]["domination"]["dominated_within_band"]
        .as_bool()
        .unwrap());
}
