//! Command-line front end of the experiment harness.
//!
//! Every verb reads a scenario file, runs one experiment and writes its
//! artifacts into the output directory. The process exits with status 0
//! when no invariant monitor fired, 1 when one did (unless `--warn-only`),
//! and 2 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use harness::bench::timing_table;
use harness::emit::{self, REPORT_SCHEMA};
use harness::run::{section_engines, section_reports};
use harness::studies::nees_study;
use harness::{prepare, run_experiment, Scenario};
use serde::Serialize;

/// Environment variable holding the default output directory.
const OUT_DIR_ENV: &str = "DLKCF_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "dlkcf-harness", version, about = "Distributed traffic density estimation experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Simulate the ground truth and write the density plot data.
    Simulate(Common),
    /// Run every filter of the scenario on one seed.
    Estimate(Common),
    /// Evaluate the bound constants of every section.
    Bounds(Common),
    /// Time the filters of the scenario.
    Bench(Common),
    /// Run the Monte Carlo NEES consistency study.
    Nees(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Run seed; defaults to the scenario's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    out: PathBuf,
    /// Report monitor violations as warnings and exit with status 0.
    #[arg(long)]
    warn_only: bool,
}

impl Common {
    fn load(&self) -> Result<(Scenario, u64)> {
        let mut scenario = Scenario::load(&self.scenario).with_context(|| format!("loading {}", self.scenario.display()))?;
        let seed = self.seed.unwrap_or(scenario.seed);
        scenario.seed = seed;
        Ok((scenario, seed))
    }
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    schema: &'static str,
    scenario_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: T,
}

fn write_tagged<T: Serialize>(path: &Path, scenario: &Scenario, seed: u64, body: T) -> Result<()> {
    let hash = scenario.hash();
    emit::write_json(path, &Tagged { schema: REPORT_SCHEMA, scenario_hash: &hash, seed, body })?;
    Ok(())
}

/// Runs a verb and returns the number of monitor violations.
fn execute(verb: &Verb) -> Result<usize> {
    match verb {
        Verb::Simulate(c) => {
            let (scenario, seed) = c.load()?;
            emit::emit_scenario(&scenario, &c.out)?;
            let inputs = prepare(&scenario, seed)?;
            let path = c.out.join(format!("truth-seed{seed}-density.csv"));
            emit::write_density_csv(&path, &inputs.truth)?;
            println!("wrote {}", path.display());
            Ok(0)
        }
        Verb::Estimate(c) => {
            let (scenario, seed) = c.load()?;
            emit::emit_scenario(&scenario, &c.out)?;
            let inputs = prepare(&scenario, seed)?;
            emit::write_density_csv(&c.out.join(format!("truth-seed{seed}-density.csv")), &inputs.truth)?;
            let records = run_experiment(&scenario, seed)?;
            let mut violations = 0;
            for rec in &records {
                let files = emit::emit(rec, &c.out)?;
                let u = rec.totals.disagreement.map_or_else(|| "-".to_string(), |u| format!("{u:.6e}"));
                println!(
                    "{:8} disagreement {u:>13} error {:.6e} violations {} -> {}",
                    rec.filter.name(),
                    rec.totals.error,
                    rec.violations.len(),
                    files.metrics.display()
                );
                for v in &rec.violations {
                    eprintln!(
                        "{}: {} monitor fired at step {} in section {}: {:e} vs bound {:e}",
                        if c.warn_only { "warning" } else { "violation" },
                        rec.filter.name(),
                        v.k,
                        v.section,
                        v.value,
                        v.bound
                    );
                }
                violations += rec.violations.len();
            }
            Ok(violations)
        }
        Verb::Bounds(c) => {
            let (scenario, seed) = c.load()?;
            emit::emit_scenario(&scenario, &c.out)?;
            let engines = section_engines(&scenario)?;
            let reports = section_reports(&scenario, &engines)?;
            let path = c.out.join("bounds.json");
            #[derive(Serialize)]
            struct Body<'a> {
                reports: &'a [bounds::BoundReport],
            }
            write_tagged(&path, &scenario, seed, Body { reports: &reports })?;
            for (i, r) in reports.iter().enumerate() {
                println!("section {i}: frak_k {:.3e} frak_h {:.3e} frak_t {:.3e}", r.frak_k, r.frak_h, r.frak_t);
            }
            println!("wrote {}", path.display());
            Ok(0)
        }
        Verb::Bench(c) => {
            let (scenario, seed) = c.load()?;
            emit::emit_scenario(&scenario, &c.out)?;
            let table = timing_table(&scenario)?;
            let path = c.out.join(format!("bench-seed{seed}-timings.json"));
            write_tagged(&path, &scenario, seed, &table)?;
            for r in &table.rows {
                println!("{:8} agents {:3} per-agent {:.4} s  max {:.4} s  wall {:.4} s", r.filter.name(), r.agents, r.per_agent_seconds, r.max_agent_seconds, r.wall_seconds);
            }
            println!("wrote {}", path.display());
            Ok(0)
        }
        Verb::Nees(c) => {
            let (scenario, seed) = c.load()?;
            emit::emit_scenario(&scenario, &c.out)?;
            let study = nees_study(&scenario)?;
            let csv = c.out.join(format!("nees-seed{seed}.csv"));
            emit::write_nees_csv(&csv, &study)?;
            #[derive(Serialize)]
            struct Body<'a> {
                runs: usize,
                dof: usize,
                region: (f64, f64),
                sections: &'a [harness::studies::SectionNees],
            }
            let json = c.out.join(format!("nees-seed{seed}-summary.json"));
            write_tagged(&json, &scenario, seed, Body { runs: study.runs, dof: study.dof, region: study.region, sections: &study.sections })?;
            println!("region [{:.4}, {:.4}] over {} runs", study.region.0, study.region.1, study.runs);
            for s in &study.sections {
                println!("section {}: {:.1} % of steps outside (mean {:.3})", s.section, 100.0 * s.violation_fraction, s.mean);
            }
            println!("wrote {}", csv.display());
            Ok(0)
        }
    }
}

/// Process status for the outcome of a verb: 0 when no monitor fired or
/// violations are demoted to warnings, 1 on violations, 2 on errors.
fn exit_status(outcome: &Result<usize>, warn_only: bool) -> u8 {
    match outcome {
        Ok(0) => 0,
        Ok(_) if warn_only => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let warn_only = match &cli.verb {
        Verb::Simulate(c) | Verb::Estimate(c) | Verb::Bounds(c) | Verb::Bench(c) | Verb::Nees(c) => c.warn_only,
    };
    let outcome = execute(&cli.verb);
    match &outcome {
        Ok(0) => {}
        Ok(n) if warn_only => eprintln!("{n} monitor violation(s) reported as warnings"),
        Ok(n) => eprintln!("{n} monitor violation(s)"),
        Err(e) => eprintln!("error: {e:#}"),
    }
    ExitCode::from(exit_status(&outcome, warn_only))
}
