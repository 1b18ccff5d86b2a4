//! `concert` — run consensus-certification scenarios and suites on the
//! deterministic simulator and classify the signals against ground truth.
//!
//! Exit status: 0 when every property classifies clean-pass or true-alarm,
//! 2 when any classifies false-alarm or missed-violation (the outcomes
//! that falsify the certifier), 1 for operational problems (unreadable or
//! malformed scenario, non-quiescent run).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use concert_cli::{parse_scenario, report_records};
use concert_core::suites::{
    run_completeness, run_efficiency, run_failures, run_soundness, run_structure_defects,
    run_structure_valid, witness_agreement_gap, witness_validity_gap, BugClass,
};
use concert_core::workload::{execute, RunOptions};
use concert_core::{DigestWidth, UniquenessMode};

#[derive(Parser)]
#[command(
    name = "concert",
    about = "Runtime certification harness for consensus: spanning-tree, unique-ID, \
             agreement and validity certificates over a deterministic simulated network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Deterministic,
    RootRandom,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "lower")]
enum WidthArg {
    #[value(name = "8")]
    W8,
    #[value(name = "32")]
    W32,
}

#[derive(Args, Clone, Copy, Debug)]
struct RunFlags {
    /// Evaluation-point selection for the unique-ID certificate.
    #[arg(long, value_enum, default_value = "deterministic")]
    mode: ModeArg,
    /// Digest width in bytes for values beyond the raw wire cap.
    #[arg(long, value_enum, default_value = "32")]
    digest_width: WidthArg,
}

impl RunFlags {
    fn options(self) -> RunOptions {
        RunOptions {
            mode: match self.mode {
                ModeArg::Deterministic => UniquenessMode::Deterministic,
                ModeArg::RootRandom => UniquenessMode::RootRandom,
            },
            digest_width: match self.digest_width {
                WidthArg::W8 => DigestWidth::W8,
                WidthArg::W32 => DigestWidth::W32,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute one scenario file and report signals versus ground truth.
    RunScenario {
        path: PathBuf,
        /// Override the seed declared in the file.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        flags: RunFlags,
        /// Write the full event trace to a file.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Write the line-delimited records to a file instead of stdout.
        #[arg(long)]
        records_out: Option<PathBuf>,
    },
    /// Run a randomized batch and aggregate the outcomes.
    RunSuite {
        #[arg(value_enum)]
        name: SuiteName,
        /// Node count per scenario (suites with a fixed sweep ignore it).
        #[arg(long, default_value_t = 16)]
        n: u64,
        /// Scenarios per batch.
        #[arg(long, default_value_t = 200)]
        iters: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        flags: RunFlags,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteName {
    /// Injected defects of every class must raise exactly one true alarm.
    Soundness,
    /// Correct runs must stay completely silent.
    Completeness,
    /// Wire-size and message-count measurements across node counts.
    Efficiency,
    /// Fail-stop sweep plus the two failure-visibility witnesses.
    Failures,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::RunScenario {
            path,
            seed,
            flags,
            trace_out,
            records_out,
        } => {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".to_string());
            let mut scenario = parse_scenario(&text, &name)
                .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            if let Some(seed) = seed {
                scenario.sim.seed = seed;
            }
            let outcome = execute(&scenario, flags.options())?;

            print!("{}", outcome.report.render());
            if let Some(trace_path) = trace_out {
                fs::write(&trace_path, outcome.trace.render())
                    .with_context(|| format!("writing {}", trace_path.display()))?;
            }
            let records = report_records(&outcome.report).join("\n") + "\n";
            match records_out {
                Some(records_path) => fs::write(&records_path, records)
                    .with_context(|| format!("writing {}", records_path.display()))?,
                None => print!("{records}"),
            }

            Ok(if outcome.report.falsified {
                ExitCode::from(2)
            } else if !outcome.report.quiescent {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::RunSuite {
            name,
            n,
            iters,
            seed,
            flags,
        } => {
            let opts = flags.options();
            let ok = match name {
                SuiteName::Soundness => {
                    let classes: Vec<BugClass> = BugClass::ALL
                        .into_iter()
                        .filter(|c| c.min_nodes() <= n)
                        .collect();
                    let injected = run_soundness(n, iters, seed, &classes, opts);
                    print!("{}", injected.render());
                    let valid = run_structure_valid(iters.min(200), n.max(4), seed, opts);
                    print!("{}", valid.render());
                    let mut all_ok = injected.ok() && valid.ok();
                    for class in [BugClass::TreeCycle, BugClass::TreeForest, BugClass::TreeOmitNode]
                    {
                        let defects =
                            run_structure_defects(class, iters.min(200), n.max(4), seed, opts);
                        print!("{}", defects.render());
                        all_ok &= defects.ok();
                    }
                    all_ok
                }
                SuiteName::Completeness => {
                    let outcome = run_completeness(n, iters, seed, opts);
                    print!("{}", outcome.render());
                    outcome.ok()
                }
                SuiteName::Efficiency => {
                    let rows = run_efficiency(&[4, 16, 64, 256.max(n)], seed)?;
                    let mut ok = true;
                    println!(
                        "{:>6} {:>14} {:>17} {:>17} {:>15}",
                        "n", "combined-raw", "combined-digest", "uniqueness-node", "round-msgs"
                    );
                    for row in &rows {
                        println!(
                            "{:>6} {:>14} {:>17} {:>17} {:>15}",
                            row.n,
                            row.combined_raw_bytes,
                            row.combined_digest_bytes,
                            row.uniqueness_node_bytes,
                            row.round_messages
                        );
                        ok &= row.round_messages == row.n - 1;
                        ok &= row.combined_digest_bytes <= 43;
                        ok &= row.uniqueness_node_bytes == row.uniqueness_expected_bytes;
                    }
                    ok &= rows
                        .windows(2)
                        .all(|w| w[0].combined_raw_bytes == w[1].combined_raw_bytes);
                    println!("verdict {}", if ok { "ok" } else { "FALSIFIED" });
                    ok
                }
                SuiteName::Failures => {
                    let sweep = run_failures(n, seed, opts);
                    print!("{}", sweep.render());
                    let validity = witness_validity_gap(seed, opts)?;
                    println!(
                        "witness {}: {} ({})",
                        validity.name,
                        if validity.ok { "ok" } else { "FAILED" },
                        validity.detail
                    );
                    let agreement = witness_agreement_gap(seed, opts)?;
                    println!(
                        "witness {}: {} ({})",
                        agreement.name,
                        if agreement.ok { "ok" } else { "FAILED" },
                        agreement.detail
                    );
                    sweep.ok() && validity.ok && agreement.ok
                }
            };
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}
