use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use qkernel::circuit::{decompose_to_native, parse_circuit, write_circuit, Circuit};
use qkernel::harness::{
    emit_bundle, emit_report, load_scenario, run_experiment, run_scenario, simulate_mapped, to_csv,
    to_jsonl, Format, HarnessError, Record, SummaryRow,
};
use qkernel::mapper::{map_circuit, map_naive, DEFAULT_BEAM};
use qkernel::noisy_sim::{simulate_ideal, Distribution};
use qkernel::qpu::{build_qpu, QpuId, QpuModel, QpuSpec};

#[derive(Parser)]
#[command(
    name = "qkernel",
    version,
    about = "Fidelity-aware quantum task scheduling, mapping and simulation"
)]
struct Cli {
    /// Master seed (overrides the scenario's own seed for `run`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Output format for tables: csv or jsonl.
    #[arg(long, global = true, default_value = "csv")]
    format: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its report.
    Run { config: PathBuf },
    /// Run one of the built-in experiments: runtime, calibration or mapping.
    Experiment { name: String },
    /// Map a circuit onto a processor and print the native, routed circuit.
    Map {
        circuit: PathBuf,
        qpu: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BEAM)]
        beam: usize,
        /// Use the fidelity-blind identity baseline instead.
        #[arg(long)]
        naive: bool,
    },
    /// Simulate a circuit and print its output distribution.
    Simulate {
        circuit: PathBuf,
        /// Processor config: the circuit is mapped onto it and simulated with its error rates.
        #[arg(long)]
        noise: Option<PathBuf>,
    },
}

const DEFAULT_SEED: u64 = 42;

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let io = |p: &Path, e: std::io::Error| HarnessError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| io(path, e))
}

fn load_circuit(path: &Path) -> Result<Circuit, HarnessError> {
    Ok(parse_circuit(&read(path)?)?)
}

fn load_qpu(path: &Path) -> Result<QpuModel, HarnessError> {
    let spec = QpuSpec::from_toml_str(&read(path)?)?;
    Ok(build_qpu(QpuId(0), &spec)?)
}

#[derive(Serialize)]
struct Outcome {
    bitstring: String,
    probability: f64,
}

fn render_distribution(d: &Distribution, format: Format) -> Result<String, HarnessError> {
    Ok(match format {
        Format::Csv => d.to_csv(),
        Format::Jsonl => {
            let rows: Vec<Outcome> = (0..d.probs.len())
                .map(|i| Outcome {
                    bitstring: d.bitstring(i),
                    probability: d.probs[i],
                })
                .collect();
            to_jsonl(&rows)?
        }
    })
}

/// Reorders (and marginalises) a distribution onto `wanted`, which must be
/// a subset of its qubits.
fn select_bits(d: &Distribution, wanted: &[usize]) -> Distribution {
    let k = d.qubits.len();
    let pos: Vec<usize> = wanted
        .iter()
        .map(|w| d.qubits.iter().position(|q| q == w).expect("readout qubit"))
        .collect();
    let mut probs = vec![0.0; 1 << wanted.len()];
    for (i, p) in d.probs.iter().enumerate() {
        let key = pos.iter().enumerate().fold(0, |acc, (j, &b)| {
            acc | (((i >> (k - 1 - b)) & 1) << (wanted.len() - 1 - j))
        });
        probs[key] += p;
    }
    Distribution {
        qubits: wanted.to_vec(),
        probs,
    }
}

fn table<T: Record>(rows: &[T], format: Format) -> Result<String, HarnessError> {
    match format {
        Format::Csv => to_csv(rows),
        Format::Jsonl => to_jsonl(rows),
    }
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    let format: Format = cli.format.parse()?;
    match cli.command {
        Command::Run { config } => {
            let mut scenario = load_scenario(&config)?;
            if let Some(seed) = cli.seed {
                scenario.seed = seed;
            }
            let report = run_scenario(&scenario)?;
            let dir = cli
                .out_dir
                .unwrap_or_else(|| PathBuf::from("out"))
                .join(&report.name);
            print_paths(&emit_report(&report, &dir, format)?);
            print!("{}", table(&report.summary(), format)?);
        }
        Command::Experiment { name } => {
            let bundle = run_experiment(&name, cli.seed.unwrap_or(DEFAULT_SEED), format)?;
            let dir = cli
                .out_dir
                .unwrap_or_else(|| PathBuf::from("out"))
                .join(&bundle.name);
            print_paths(&emit_bundle(&bundle, &dir, format)?);
            if let Some(summary) = bundle.tables.last() {
                print!("{}", summary.contents);
            }
        }
        Command::Map {
            circuit,
            qpu,
            beam,
            naive,
        } => {
            let c = load_circuit(&circuit)?;
            let q = load_qpu(&qpu)?;
            let m = if naive {
                let all: BTreeSet<usize> = (0..q.n_qubits()).collect();
                map_naive(&c, &q, &all)?
            } else {
                map_circuit(&c, &q, beam)?
            };
            let layout = m
                .final_layout
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let text = format!(
                "# fidelity_score {}\n# swaps {}\n# final_layout {}\n{}",
                m.fidelity_score,
                m.swap_count,
                layout,
                write_circuit(&m.circuit)
            );
            if let Some(dir) = cli.out_dir {
                let path = dir.join("mapped.qc");
                write(&path, &text)?;
                let summary = vec![
                    SummaryRow {
                        metric: "fidelity_score".into(),
                        value: m.fidelity_score,
                    },
                    SummaryRow {
                        metric: "swaps".into(),
                        value: m.swap_count as f64,
                    },
                ];
                let ext = if format == Format::Csv {
                    "csv"
                } else {
                    "jsonl"
                };
                let summary_path = dir.join(format!("mapping.{ext}"));
                write(&summary_path, &table(&summary, format)?)?;
                print_paths(&[path, summary_path]);
            }
            print!("{text}");
        }
        Command::Simulate { circuit, noise } => {
            let c = decompose_to_native(&load_circuit(&circuit)?)?;
            let dist = match noise {
                // Route onto the processor first so every CZ lands on a coupler.
                Some(path) => {
                    let q = load_qpu(&path)?;
                    let m = map_circuit(&c, &q, DEFAULT_BEAM)?;
                    let (physical, _) = simulate_mapped(&m, &q)?;
                    let wanted: Vec<usize> = c
                        .readout_qubits()
                        .iter()
                        .map(|&l| m.final_layout[l])
                        .collect();
                    let mut d = select_bits(&physical, &wanted);
                    d.qubits = c.readout_qubits();
                    d
                }
                None => simulate_ideal(&c)?.distribution,
            };
            let text = render_distribution(&dist, format)?;
            if let Some(dir) = cli.out_dir {
                let ext = if format == Format::Csv {
                    "csv"
                } else {
                    "jsonl"
                };
                let path = dir.join(format!("distribution.{ext}"));
                write(&path, &text)?;
                print_paths(&[path]);
            }
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
