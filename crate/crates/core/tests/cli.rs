use std::path::Path;
use std::process::Command;

fn qkernel() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qkernel"))
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn run_writes_reports_and_is_reproducible() {
    let out = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let status = qkernel()
            .arg("run")
            .arg(configs().join("two_qpus.toml"))
            .arg("--out-dir")
            .arg(out.path().join(sub))
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
    }
    for file in ["tasks.csv", "summary.csv", "events.jsonl", "fidelity.csv"] {
        let a = std::fs::read(out.path().join("a/two-qpus").join(file)).unwrap();
        let b = std::fs::read(out.path().join("b/two-qpus").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let summary = std::fs::read_to_string(out.path().join("a/two-qpus/summary.csv")).unwrap();
    assert!(summary.contains("makespan,30"));
    let fidelity = std::fs::read_to_string(out.path().join("a/two-qpus/fidelity.csv")).unwrap();
    assert_eq!(fidelity.lines().next(), Some("timestamp,qpu,element,value"));
}

#[test]
fn simulate_prints_a_distribution() {
    let out = qkernel()
        .arg("simulate")
        .arg(configs().join("qft4.qc"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("bitstring,probability"));
    assert_eq!(text.lines().count(), 17);
    let noisy = qkernel()
        .args(["simulate", "--format", "jsonl", "--noise"])
        .arg(configs().join("split_qpu.toml"))
        .arg(configs().join("qft4.qc"))
        .output()
        .unwrap();
    assert!(
        noisy.status.success(),
        "{}",
        String::from_utf8_lossy(&noisy.stderr)
    );
    let total: f64 = String::from_utf8(noisy.stdout)
        .unwrap()
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["probability"]
                .as_f64()
                .unwrap()
        })
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn map_emits_a_parseable_circuit() {
    let out = qkernel()
        .arg("map")
        .arg(configs().join("qft4.qc"))
        .arg(configs().join("split_qpu.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let c = qkernel::circuit::parse_circuit(&text).unwrap();
    assert_eq!(c.n_qubits, 8);
    assert!(qkernel::circuit::is_native(&c));
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let out = qkernel().args(["experiment", "nope"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown experiment"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "duration = 10\n[[qpu]]\ntopology = { kind = \"line\", n = 2 }\ncolour = 1\n",
    )
    .unwrap();
    let out = qkernel().arg("run").arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}
