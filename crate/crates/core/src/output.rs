//! Result files: time-series CSV, landscape grid, key-value summaries and
//! the aggregated tables produced by replication and sweeps.
//!
//! Every writer renders to a `String` first so output is a pure function
//! of its inputs; the `write_*` helpers only add the file I/O.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::emit_config;
use crate::decision::OptionModel;
use crate::error::{Error, Result};
use crate::network::GridSpec;
use crate::scenarios::{ReplicateSummary, Scenario};
use crate::simulation::{RunOutcome, TimeSeries};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn fraction_columns(opts: &OptionModel) -> impl Iterator<Item = String> + '_ {
    opts.labels().iter().map(|l| format!("n_{l}"))
}

/// `tick,n_A,n_B[,n_AB],n_0` followed by one row per tick, fractions to
/// six decimals.
pub fn timeseries_csv(series: &TimeSeries, opts: &OptionModel) -> String {
    let mut out = String::from("tick");
    for c in fraction_columns(opts) {
        out.push(',');
        out.push_str(&c);
    }
    out.push('\n');
    for t in 0..series.len() {
        let _ = write!(out, "{t}");
        for f in series.fractions(t) {
            let _ = write!(out, ",{f:.6}");
        }
        out.push('\n');
    }
    out
}

pub fn write_timeseries(series: &TimeSeries, opts: &OptionModel, path: &Path) -> Result<()> {
    fs::write(path, timeseries_csv(series, opts))?;
    Ok(())
}

/// `# width height tick`, then one line per lattice row of
/// space-separated state digits.
pub fn landscape_text(states: &[u8], grid: GridSpec, tick: u32) -> Result<String> {
    if states.len() != grid.agents() {
        return Err(Error::Usage(format!(
            "{} states for a {}x{} grid",
            states.len(),
            grid.width(),
            grid.height()
        )));
    }
    let mut out = format!("# {} {} {}\n", grid.width(), grid.height(), tick);
    for row in states.chunks(grid.width()) {
        let cells: Vec<String> = row.iter().map(|s| s.to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_landscape(states: &[u8], grid: GridSpec, tick: u32, path: &Path) -> Result<()> {
    fs::write(path, landscape_text(states, grid, tick)?)?;
    Ok(())
}

/// A landscape read back from text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Landscape {
    pub grid: GridSpec,
    pub tick: u32,
    pub states: Vec<u8>,
}

pub fn read_landscape(text: &str) -> Result<Landscape> {
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, message: String| Error::Parse { line: line + 1, message };
    let (_, header) = lines.next().ok_or_else(|| bad(0, "empty landscape".into()))?;
    let fields: Vec<&str> = header
        .strip_prefix('#')
        .ok_or_else(|| bad(0, "missing `# width height tick` header".into()))?
        .split_whitespace()
        .collect();
    let nums: Vec<usize> = fields
        .iter()
        .map(|f| f.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad(0, format!("malformed header {header:?}")))?;
    let [width, height, tick] = nums[..] else {
        return Err(bad(0, format!("malformed header {header:?}")));
    };
    let grid = GridSpec::new(width, height)?;
    let mut states = Vec::with_capacity(grid.agents());
    let mut rows = 0;
    for (i, line) in lines {
        let row: Vec<u8> = line
            .split(' ')
            .map(|c| c.parse::<u8>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(i, "non-digit cell".into()))?;
        if row.len() != width {
            return Err(bad(i, format!("{} cells, expected {width}", row.len())));
        }
        states.extend(row);
        rows += 1;
    }
    if rows != height {
        return Err(bad(rows, format!("{rows} rows, expected {height}")));
    }
    Ok(Landscape {
        grid,
        tick: tick as u32,
        states,
    })
}

/// Key-value record for a single run. Shares are rendered exactly like the
/// last CSV row; `config.*` lines echo the scenario with the run's seed.
pub fn run_summary(outcome: &RunOutcome, scn: &Scenario) -> String {
    let opts = scn.option_model();
    let mut out = String::new();
    let _ = writeln!(out, "version = {VERSION}");
    let _ = writeln!(out, "seed = {}", outcome.seed);
    let _ = writeln!(out, "saturated = {}", outcome.is_saturated());
    match outcome.saturation_tick {
        Some(t) => {
            let _ = writeln!(out, "saturation_tick = {t}");
        }
        None => {
            let _ = writeln!(out, "saturation_tick = none");
        }
    }
    let _ = writeln!(
        out,
        "non_adoption_tick = {}",
        outcome.plateau_tick(opts.non_adoption(), scn.saturation_window as usize)
    );
    let _ = writeln!(out, "last_tick = {}", outcome.series.len() - 1);
    for (label, f) in opts.labels().iter().zip(outcome.series.last_fractions()) {
        let _ = writeln!(out, "share.n_{label} = {f:.6}");
    }
    let echo = Scenario {
        seed: outcome.seed,
        ..scn.clone()
    };
    for line in emit_config(&echo).lines() {
        let _ = writeln!(out, "config.{line}");
    }
    out
}

/// Everything `run` writes for one outcome.
pub fn write_run_bundle(outcome: &RunOutcome, scn: &Scenario, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let opts = scn.option_model();
    write_timeseries(&outcome.series, &opts, &dir.join("timeseries.csv"))?;
    write_landscape(
        &outcome.final_state.states,
        scn.grid,
        outcome.final_state.tick,
        &dir.join("landscape.txt"),
    )?;
    fs::write(dir.join("summary.txt"), run_summary(outcome, scn))?;
    let echo = Scenario {
        seed: outcome.seed,
        ..scn.clone()
    };
    fs::write(dir.join("config.txt"), emit_config(&echo))?;
    Ok(())
}

/// Per-tick mean and sample sd: `tick,n_A_mean,n_A_sd,...`.
pub fn aggregate_csv(summary: &ReplicateSummary, opts: &OptionModel) -> String {
    let mut out = String::from("tick");
    for c in fraction_columns(opts) {
        let _ = write!(out, ",{c}_mean,{c}_sd");
    }
    out.push('\n');
    for (t, (mean, sd)) in summary.mean.iter().zip(&summary.sd).enumerate() {
        let _ = write!(out, "{t}");
        for (m, s) in mean.iter().zip(sd) {
            let _ = write!(out, ",{m:.6},{s:.6}");
        }
        out.push('\n');
    }
    out
}

/// One row per replication: `seed,saturation_tick,n_A,...`.
pub fn runs_csv(summary: &ReplicateSummary, opts: &OptionModel, first_seed: u64) -> String {
    let mut out = String::from("seed,saturation_tick");
    for c in fraction_columns(opts) {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for (i, (tick, shares)) in summary.saturation_ticks.iter().zip(&summary.final_shares).enumerate() {
        let tick = tick.map_or_else(|| "none".to_string(), |t| t.to_string());
        let _ = write!(out, "{},{tick}", first_seed.wrapping_add(i as u64));
        for f in shares {
            let _ = write!(out, ",{f:.6}");
        }
        out.push('\n');
    }
    out
}

pub fn replicate_summary_text(summary: &ReplicateSummary, scn: &Scenario) -> String {
    let opts = scn.option_model();
    let mut out = String::new();
    let _ = writeln!(out, "version = {VERSION}");
    let _ = writeln!(out, "runs = {}", summary.runs);
    let _ = writeln!(out, "saturated_runs = {}", summary.saturated_runs());
    let _ = writeln!(out, "mean_saturation_tick = {:.6}", summary.mean_saturation_tick);
    let _ = writeln!(out, "mean_non_adoption_tick = {:.6}", summary.mean_non_adoption_tick);
    for ((label, m), s) in opts.labels().iter().zip(&summary.final_mean).zip(&summary.final_sd) {
        let _ = writeln!(out, "share.n_{label}.mean = {m:.6}");
        let _ = writeln!(out, "share.n_{label}.sd = {s:.6}");
    }
    for line in emit_config(scn).lines() {
        let _ = writeln!(out, "config.{line}");
    }
    out
}

pub fn write_replicate_bundle(summary: &ReplicateSummary, scn: &Scenario, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let opts = scn.option_model();
    fs::write(dir.join("aggregate.csv"), aggregate_csv(summary, &opts))?;
    fs::write(dir.join("runs.csv"), runs_csv(summary, &opts, scn.seed))?;
    fs::write(dir.join("summary.txt"), replicate_summary_text(summary, scn))?;
    Ok(())
}

/// One row per swept value, in the order given:
/// `param,value,runs,saturated_runs,mean_saturation_tick,n_A_mean,n_A_sd,...`.
pub fn sweep_csv(param: &str, rows: &[(String, ReplicateSummary)], opts: &OptionModel) -> String {
    let mut out = String::from("param,value,runs,saturated_runs,mean_saturation_tick");
    for c in fraction_columns(opts) {
        let _ = write!(out, ",{c}_mean,{c}_sd");
    }
    out.push('\n');
    for (value, s) in rows {
        let _ = write!(
            out,
            "{param},{value},{},{},{:.6}",
            s.runs,
            s.saturated_runs(),
            s.mean_saturation_tick
        );
        for (m, sd) in s.final_mean.iter().zip(&s.final_sd) {
            let _ = write!(out, ",{m:.6},{sd:.6}");
        }
        out.push('\n');
    }
    out
}
