//! `kmwell` command line: `analyze`, `simulate` and `classify`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::io::bundle::{sha256_hex, InputInfo, ResultBundle};
use crate::io::{config, plot, record};
use crate::pipeline::{self, CellOutcome};
use crate::potential::{barrier_report, find_extrema};
use crate::{sim, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "kmwell",
    version,
    about = "Kramers-Moyal drift/diffusion and potential-well analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate drift, volatility and potential over a windows x lags plan.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write one SVG figure per window.
        #[arg(long)]
        plots: bool,
        /// Preprocess the whole series once instead of per window.
        #[arg(long)]
        global_trim: bool,
    },
    /// Simulate an SDE spec into a record file.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Step in seconds.
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-classify the potentials of a saved result bundle.
    Classify {
        #[arg(long)]
        result: PathBuf,
        #[arg(long, default_value_t = crate::potential::DEFAULT_PROMINENCE)]
        prominence: f64,
    },
}

pub const RESULT_FILE: &str = "result.json";

/// Parses `args` (including the program name) and runs; returns the process
/// exit code. Diagnostics go to stderr, reports to stdout.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(cli.command, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("kmwell: error: {e}");
            1
        }
    }
}

pub fn run(command: Command, out: &mut dyn std::io::Write) -> Result<()> {
    match command {
        Command::Analyze {
            input,
            plan,
            out: out_dir,
            plots,
            global_trim,
        } => {
            let files = analyze(&input, &plan, &out_dir, plots, global_trim)?;
            for f in files {
                writeln!(out, "{}", f.display())?;
            }
            Ok(())
        }
        Command::Simulate {
            spec,
            dt,
            steps,
            seed,
            out: path,
        } => {
            let mut spec = config::load_spec(&spec)?;
            spec.seed = seed;
            let p = sim::simulate(&spec, dt, steps)?;
            record::write_records(&path, &p.timestamps, &p.values)?;
            writeln!(
                out,
                "{} ({} records, {})",
                path.display(),
                p.values.len(),
                p.generator
            )?;
            Ok(())
        }
        Command::Classify { result, prominence } => {
            if !(0.0..1.0).contains(&prominence) {
                return Err(Error::Config(format!(
                    "prominence must lie in [0, 1), got {prominence}"
                )));
            }
            let bundle = ResultBundle::load(&result)?;
            write!(out, "{}", classify_report(&bundle, prominence))?;
            Ok(())
        }
    }
}

/// Runs the plan and writes `result.json` (plus figures) into `out_dir`.
pub fn analyze(
    input: &Path,
    plan_path: &Path,
    out_dir: &Path,
    plots: bool,
    global_trim: bool,
) -> Result<Vec<PathBuf>> {
    let mut plan = config::load_plan(plan_path)?;
    plan.global_preprocess |= global_trim;
    let bytes = std::fs::read(input)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", input.display())))?;
    let name = input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ts = record::parse_records(&bytes, record::IngestOptions::default(), &name)?;
    log::info!("{} records from {name}", ts.len());
    let result = pipeline::run_plan(&ts, &plan)?;
    log::info!(
        "{} of {} cells computed",
        result.computed().count(),
        result.cells.len()
    );
    let bundle = ResultBundle::new(
        InputInfo {
            name,
            sha256: sha256_hex(&bytes),
            records: ts.len(),
        },
        plan,
        result,
    );
    std::fs::create_dir_all(out_dir)?;
    let mut files = vec![out_dir.join(RESULT_FILE)];
    bundle.save(&files[0])?;
    if plots {
        files.extend(plot::emit_plots(&bundle, out_dir)?);
    }
    Ok(files)
}

/// One line per cell plus one line per barrier.
pub fn classify_report(bundle: &ResultBundle, prominence: f64) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    for cell in &bundle.cells {
        write!(
            s,
            "window {} lag {}s: ",
            cell.window_index, cell.target_lag_seconds
        )
        .unwrap();
        match &cell.outcome {
            CellOutcome::Skipped { reason } => writeln!(s, "skipped ({reason})").unwrap(),
            CellOutcome::Computed(a) => {
                let ws = find_extrema(&a.potential, prominence);
                let minima: Vec<String> = ws
                    .minima
                    .iter()
                    .map(|m| format!("{:.6}", m.position))
                    .collect();
                writeln!(
                    s,
                    "{} minima=[{}] lag_steps={} mean_dt={}",
                    ws.classification,
                    minima.join(", "),
                    a.lag_steps,
                    a.mean_dt
                )
                .unwrap();
                let year = bundle.plan.year_seconds;
                for b in barrier_report(&ws) {
                    writeln!(
                        s,
                        "  barrier at {:.6}: from left {:.6e}, from right {:.6e} (per year)",
                        b.top.position,
                        b.from_left * year,
                        b.from_right * year
                    )
                    .unwrap();
                }
            }
        }
    }
    s
}
