//! Command-line entry points. Exit status: 0 success, 1 usage error,
//! 2 runtime error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use log::info;

use crate::config::{emit_config, ConfigDocument};
use crate::error::{Error, Result};
use crate::output::{sweep_csv, write_replicate_bundle, write_run_bundle};
use crate::scenarios::{preset, replicate, PresetName, PresetVariant, Scenario};
use crate::simulation::{build_network, run_with_seed};

#[derive(Debug, Parser)]
#[command(name = "potts-diffusion", version, about = "Multi-option innovation diffusion on small-world lattices")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single run; writes timeseries.csv, landscape.txt, summary.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides run.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// `key=value` override, repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Also write the contact network as network.txt.
        #[arg(long)]
        dump_network: bool,
    },
    /// Replicated runs with seeds seed, seed+1, ...; writes aggregate.csv.
    Replicate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// One replicated result per value of a configuration key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Replications per value (default: run.replications).
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Runs one of the published experiment designs (fig1..fig5).
    Preset {
        #[arg(long)]
        name: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Replications (default: run.replications); more than one writes
        /// aggregated output instead of a single-run bundle.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path, overrides: &[String]) -> Result<ConfigDocument> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut doc = ConfigDocument::parse(&text)?;
    for o in overrides {
        doc.apply_override(o)?;
    }
    Ok(doc)
}

fn run_single(scn: &Scenario, seed: u64, out: &Path, dump_network: bool) -> Result<()> {
    let outcome = run_with_seed(scn, seed)?;
    write_run_bundle(&outcome, scn, out)?;
    if dump_network {
        let net = build_network(scn, seed);
        let mut buf = Vec::new();
        net.write_edges(&mut buf, seed, scn.rewiring)?;
        fs::write(out.join("network.txt"), buf)?;
    }
    info!(
        "seed {seed}: {} after {} ticks",
        if outcome.is_saturated() { "saturated" } else { "unsaturated" },
        outcome.series.len() - 1
    );
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            seed,
            out,
            overrides,
            dump_network,
        } => {
            let scn = load(&config, &overrides)?.to_scenario()?;
            run_single(&scn, seed.unwrap_or(scn.seed), &out, dump_network)
        }
        Command::Replicate {
            config,
            runs,
            out,
            overrides,
        } => {
            let scn = load(&config, &overrides)?.to_scenario()?;
            let summary = replicate(&scn, runs)?;
            write_replicate_bundle(&summary, &scn, &out)
        }
        Command::Sweep {
            config,
            param,
            values,
            runs,
            out,
            overrides,
        } => {
            let base = load(&config, &overrides)?;
            // validate every point before running any
            let mut scenarios = Vec::with_capacity(values.len());
            for v in &values {
                let mut doc = base.clone();
                doc.set(&param, v);
                scenarios.push(doc.to_scenario()?);
            }
            fs::create_dir_all(&out)?;
            let mut rows = Vec::with_capacity(values.len());
            for (i, (v, scn)) in values.iter().zip(&scenarios).enumerate() {
                let n = runs.unwrap_or(scn.replications as usize);
                let summary = replicate(scn, n)?;
                write_replicate_bundle(&summary, scn, &out.join(format!("value_{i}")))?;
                info!("{param} = {v}: mean saturation tick {:.1}", summary.mean_saturation_tick);
                rows.push((v.clone(), summary));
            }
            let opts = scenarios[0].option_model();
            fs::write(out.join("sweep.csv"), sweep_csv(&param, &rows, &opts))?;
            Ok(())
        }
        Command::Preset {
            name,
            overrides,
            runs,
            out,
        } => {
            let name: PresetName = name.parse()?;
            let scn = preset(name, &PresetVariant::default())?;
            let mut doc = ConfigDocument::parse(&emit_config(&scn))?;
            for o in &overrides {
                doc.apply_override(o)?;
            }
            let scn = doc.to_scenario()?;
            let n = runs.unwrap_or(scn.replications as usize);
            if n <= 1 {
                run_single(&scn, scn.seed, &out, false)
            } else {
                let summary = replicate(&scn, n)?;
                write_replicate_bundle(&summary, &scn, &out)
            }
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli.command)),
            Err(e) => Err(Error::Usage(format!("cannot build thread pool: {e}"))),
        },
        None => execute(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config { .. } | Error::Parse { .. } => 1,
                Error::Numerical(_) | Error::Io(_) => 2,
            }
        }
    }
}
