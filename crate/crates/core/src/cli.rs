//! Command-line front end: load a config, run budget / phase-sweep /
//! stability / squeeze-fit analyses, and emit CSV/JSON spectra plus
//! plot-ready long-form data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::budget::{
    self, displacement_budget, FrequencyGrid, NoiseBudget, PhaseSweepMap,
};
use crate::config::{validate_config, SystemConfig, ValidatedSystem};
use crate::loopcal::LoopModel;

#[derive(Debug, Parser)]
#[command(
    name = "omsim",
    about = "Displacement noise budgets for a detuned optomechanical cavity with squeezed-light injection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the per-source displacement noise budget over a log grid.
    Budget(BudgetArgs),
    /// Sweep the squeeze phase and emit the dB ratio map vs the r=0 reference.
    Sweep(SweepArgs),
    /// Nyquist stability verdict and margin for the configured loop.
    Stability(StabilityArgs),
    /// Fit the generated squeeze factor to an observed antisqueezing level.
    FitR(FitRArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Path to the JSON system configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Lower grid frequency, Hz.
    #[arg(long, default_value_t = 100.0)]
    pub fmin: f64,
    /// Upper grid frequency, Hz.
    #[arg(long, default_value_t = 1e6)]
    pub fmax: f64,
    /// Log-spaced points per decade.
    #[arg(long, default_value_t = 100)]
    pub ppd: u32,
}

impl GridArgs {
    fn validate(&self) -> Result<()> {
        if !(self.fmin < self.fmax) {
            bail!("fmin ({}) must be below fmax ({})", self.fmin, self.fmax);
        }
        if self.ppd < 8 {
            bail!("points per decade must be >= 8, got {}", self.ppd);
        }
        Ok(())
    }

    fn grid(&self) -> Result<FrequencyGrid> {
        Ok(FrequencyGrid::log_spaced(self.fmin, self.fmax, self.ppd)?)
    }
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Also write long-form plot records to this path.
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of squeeze phases over [0, pi).
    #[arg(long, default_value_t = 36)]
    pub phases: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Lower grid frequency, Hz. Must reach a factor 100 below the spring resonance.
    #[arg(long, default_value_t = 100.0)]
    pub fmin: f64,
    /// Upper grid frequency, Hz. Must reach a factor 100 above the spring resonance.
    #[arg(long, default_value_t = 1e8)]
    pub fmax: f64,
    #[arg(long, default_value_t = 64)]
    pub ppd: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitRArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Observed total-noise increase in dB at the fit frequency.
    #[arg(long, default_value_t = 12.6)]
    pub target_db: f64,
    /// Frequency the increase was observed at, Hz.
    #[arg(long, default_value_t = 20e3)]
    pub at_hz: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_system(path: &Path) -> Result<(ValidatedSystem, String)> {
    let raw = std::fs::read(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let hash = hex_digest(&raw);
    let cfg: SystemConfig = serde_json::from_slice(&raw)
        .with_context(|| format!("cannot parse config {}", path.display()))?;
    Ok((validate_config(cfg)?, hash))
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Fixed-precision float formatting: 13 significant digits, enough for
/// 1e-12 relative round trips and byte-identical reruns.
fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

/// Write atomically: temp file next to the target, then rename.
fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)
        .with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("cannot rename into {}", path.display()))?;
    Ok(())
}

fn write_or_print(out: Option<&PathBuf>, contents: &str) -> Result<()> {
    match out {
        Some(path) => atomic_write(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Budget with the configured calibration line and excess spectral lines
/// applied to the total series.
fn decorated_budget(sys: &ValidatedSystem, grid: &FrequencyGrid) -> Result<NoiseBudget> {
    let mut b = displacement_budget(sys, grid);
    let readout = &sys.config().readout;
    if let (Some(f), Some(amp)) = (readout.cal_line_hz, readout.cal_line_m) {
        if f >= grid.min() && f <= grid.max() {
            b = budget::inject_calibration_line(b, f, amp)?;
        }
    }
    if let Some(excess) = &sys.config().excess {
        b = budget::add_spectral_lines(b, &excess.lines);
    }
    Ok(b)
}

fn budget_csv(b: &NoiseBudget) -> String {
    let mut out = String::from("f_hz,asd_total,asd_thermal,asd_qrpn,asd_shot,asd_dark,asd_sql\n");
    for (i, &f) in b.grid.points().iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt(f),
            fmt(b.total[i].sqrt()),
            fmt(b.thermal[i].sqrt()),
            fmt(b.qrpn[i].sqrt()),
            fmt(b.shot[i].sqrt()),
            fmt(b.dark[i].sqrt()),
            fmt(b.sql[i].sqrt()),
        );
    }
    out
}

fn budget_json(b: &NoiseBudget) -> String {
    let asd = |s: &[f64]| -> Vec<f64> { s.iter().map(|v| v.sqrt()).collect() };
    let value = serde_json::json!({
        "f_hz": b.grid.points(),
        "asd_total": asd(&b.total),
        "asd_thermal": asd(&b.thermal),
        "asd_qrpn": asd(&b.qrpn),
        "asd_shot": asd(&b.shot),
        "asd_dark": asd(&b.dark),
        "asd_sql": asd(&b.sql),
        "units": "m/rtHz",
    });
    let mut s = serde_json::to_string_pretty(&value).expect("static structure");
    s.push('\n');
    s
}

fn sweep_csv(map: &PhaseSweepMap) -> String {
    let mut out = String::from("phase_rad");
    for &f in map.grid.points() {
        let _ = write!(out, ",{}", fmt(f));
    }
    out.push('\n');
    for (row, &phase) in map.ratio_db.iter().zip(&map.phases) {
        let _ = write!(out, "{}", fmt(phase));
        for &v in row {
            let _ = write!(out, ",{}", fmt(v));
        }
        out.push('\n');
    }
    out
}

fn sweep_json(map: &PhaseSweepMap) -> String {
    let value = serde_json::json!({
        "phases_rad": map.phases,
        "f_hz": map.grid.points(),
        "ratio_db": map.ratio_db,
        "units": "dB",
    });
    let mut s = serde_json::to_string_pretty(&value).expect("static structure");
    s.push('\n');
    s
}

/// Long-form plot records: `frequency,series,value` with `#` metadata
/// header lines carrying the config hash and units.
fn budget_plot_data(b: &NoiseBudget, config_hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash: {config_hash}");
    let _ = writeln!(out, "# units: m/rtHz");
    let _ = writeln!(out, "# columns: frequency_hz,series,value");
    for name in NoiseBudget::SERIES_NAMES {
        let series = b.series(name).expect("known series name");
        for (&f, &v) in b.grid.points().iter().zip(series) {
            let _ = writeln!(out, "{},{},{}", fmt(f), name, fmt(v.sqrt()));
        }
    }
    out
}

fn sweep_plot_data(map: &PhaseSweepMap, config_hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash: {config_hash}");
    let _ = writeln!(out, "# units: dB");
    let _ = writeln!(out, "# columns: frequency_hz,series,value");
    for (row, &phase) in map.ratio_db.iter().zip(&map.phases) {
        let name = format!("phase_{}", fmt(phase));
        for (&f, &v) in map.grid.points().iter().zip(row) {
            let _ = writeln!(out, "{},{},{}", fmt(f), name, fmt(v));
        }
    }
    out
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Budget(args) => {
            args.grid.validate()?;
            let (sys, hash) = load_system(&args.grid.config)?;
            let grid = args.grid.grid()?;
            let b = decorated_budget(&sys, &grid)?;
            let contents = match args.format {
                OutputFormat::Csv => budget_csv(&b),
                OutputFormat::Json => budget_json(&b),
            };
            write_or_print(args.out.as_ref(), &contents)?;
            if let Some(plot) = &args.plot_out {
                atomic_write(plot, &budget_plot_data(&b, &hash))?;
            }
            Ok(())
        }
        Command::Sweep(args) => {
            args.grid.validate()?;
            if args.phases < 4 {
                bail!("sweep needs at least 4 phases, got {}", args.phases);
            }
            let (sys, hash) = load_system(&args.grid.config)?;
            let grid = args.grid.grid()?;
            let phases: Vec<f64> = (0..args.phases)
                .map(|i| i as f64 * std::f64::consts::PI / args.phases as f64)
                .collect();
            let map = budget::phase_sweep_map(&sys, &grid, &phases);
            let contents = match args.format {
                OutputFormat::Csv => sweep_csv(&map),
                OutputFormat::Json => sweep_json(&map),
            };
            write_or_print(args.out.as_ref(), &contents)?;
            if let Some(plot) = &args.plot_out {
                atomic_write(plot, &sweep_plot_data(&map, &hash))?;
            }
            Ok(())
        }
        Command::Stability(args) => {
            if !(args.fmin < args.fmax) {
                bail!("fmin ({}) must be below fmax ({})", args.fmin, args.fmax);
            }
            if args.ppd < 8 {
                bail!("points per decade must be >= 8, got {}", args.ppd);
            }
            let (sys, _) = load_system(&args.config)?;
            let controller = sys
                .config()
                .controller
                .clone()
                .context("config has no controller section")?;
            let grid = FrequencyGrid::log_spaced(args.fmin, args.fmax, args.ppd)?;
            let report = LoopModel::new(controller, &sys).is_stable(&grid)?;
            let contents = format!(
                "stable: {}\nmargin: {}\n",
                report.stable,
                fmt(report.margin)
            );
            write_or_print(args.out.as_ref(), &contents)?;
            Ok(())
        }
        Command::FitR(args) => {
            if !(args.at_hz > 0.0) {
                bail!("fit frequency must be > 0, got {}", args.at_hz);
            }
            let (sys, _) = load_system(&args.config)?;
            let r = budget::fit_r(&sys, args.target_db, args.at_hz)?;
            // generated quadrature variances in dB
            let antisqueeze_db = 10.0 * (2.0 * r).exp().log10();
            let contents = format!(
                "r: {}\nsqueeze_db: {}\nantisqueeze_db: {}\n",
                fmt(r),
                fmt(-antisqueeze_db),
                fmt(antisqueeze_db)
            );
            write_or_print(args.out.as_ref(), &contents)?;
            Ok(())
        }
    }
}
