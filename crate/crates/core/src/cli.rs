//! Command-line front end: `simulate`, `analyze`, `optimize`, `table2`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use crate::analysis::{aoa_cdf, delay_cdf, select_bit_period, select_fov, ChannelSelection};
use crate::config::LinkConfig;
use crate::error::{Error, Result};
use crate::gate::{
    default_gate_grid, format_table2, sweep_gate, table2_csv_line, table2_row_from_set, write_sweep_csv, LinkBudget,
    Table2Row, PS, TABLE2_CSV_HEADER,
};
use crate::store::{load, persist, run_campaign, ArrivalSet};

#[derive(Debug, Parser)]
#[command(name = "uwqkd", version, about = "Underwater QKD link simulation and SPAD gate optimization")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a photon campaign and persist the arrival set.
    Simulate(SimulateArgs),
    /// Select bit period and FoV from an arrival set and write CDF tables.
    Analyze(AnalyzeArgs),
    /// Sweep the SPAD gate time over an arrival set.
    Optimize(OptimizeArgs),
    /// Produce the bit period / FoV / optimal gate table for a matrix of
    /// (r0, divergence, distance) combinations.
    Table2(Table2Args),
}

#[derive(Debug, Args, Default, Clone)]
pub struct CampaignOverrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub photons: Option<u64>,
    /// Worker threads (0 = all cores). Never changes results.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Quantile level for bit period and FoV selection.
    #[arg(long)]
    pub level: Option<f64>,
}

impl CampaignOverrides {
    fn apply(&self, cfg: &mut LinkConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.simulation.seed = s;
        }
        if let Some(n) = self.photons {
            cfg.simulation.photons = n;
        }
        if let Some(w) = self.workers {
            cfg.simulation.workers = w;
        }
        if let Some(l) = self.level {
            cfg.analysis.quantile_level = l;
        }
        cfg.validate()
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Configuration file; Table 1 defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output arrival-set file.
    #[arg(long, required_unless_present = "dry_run")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: CampaignOverrides,
    /// Also export the arrival records as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Arrival-set file written by `simulate`.
    pub arrivals: PathBuf,
    #[arg(long)]
    pub level: Option<f64>,
    /// Directory for delay_cdf.csv and aoa_cdf.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub arrivals: PathBuf,
    #[arg(long)]
    pub level: Option<f64>,
    /// Gate grid in picoseconds: `start:step:stop` or a comma list.
    #[arg(long)]
    pub gate_grid: Option<String>,
    /// Override the selected bit period (s).
    #[arg(long)]
    pub bit_period: Option<f64>,
    /// Override the selected FoV half-angle (degrees).
    #[arg(long)]
    pub fov_deg: Option<f64>,
    /// Use presentation-rounded bit period and FoV.
    #[arg(long)]
    pub pin_rounded: bool,
    /// Zero dark counts and background light.
    #[arg(long)]
    pub noiseless: bool,
    /// Sweep CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Table2Args {
    /// Matrix file: one `r0_m divergence_deg distance_m` triple per line.
    pub matrix: PathBuf,
    /// Base configuration for everything the matrix does not set.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the report and the arrival-set cache.
    #[arg(long, default_value = "table2_out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: CampaignOverrides,
    #[arg(long)]
    pub gate_grid: Option<String>,
    /// Print the resolved rows and exit.
    #[arg(long)]
    pub dry_run: bool,
}

/// Parse `start:step:stop` or `a,b,c` (picoseconds) into seconds.
pub fn parse_gate_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |m: String| Error::config("--gate-grid", m);
    let num = |s: &str| -> Result<f64> { s.trim().parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number"))) };
    let ps: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:step:stop".into()));
        }
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(bad("step must be positive and stop ≥ start".into()));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| start + k as f64 * step).collect()
    } else {
        text.split(',').map(num).collect::<Result<_>>()?
    };
    Ok(ps.into_iter().map(|p| p * PS).collect())
}

/// One `(r0, divergence, distance)` combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixRow {
    pub r0_m: f64,
    pub divergence_deg: f64,
    pub distance_m: f64,
}

/// Whitespace- or comma-separated triples; `#` starts a comment.
pub fn parse_matrix(text: &str) -> Result<Vec<MatrixRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::config(format!("matrix line {}", i + 1), "non-numeric entry"))?;
        if vals.len() != 3 {
            return Err(Error::config(
                format!("matrix line {}", i + 1),
                "expected r0_m divergence_deg distance_m",
            ));
        }
        rows.push(MatrixRow {
            r0_m: vals[0],
            divergence_deg: vals[1],
            distance_m: vals[2],
        });
    }
    if rows.is_empty() {
        return Err(Error::config("matrix", "no rows"));
    }
    Ok(rows)
}

fn base_config(path: Option<&Path>) -> Result<LinkConfig> {
    match path {
        Some(p) => LinkConfig::from_file(p),
        None => Ok(LinkConfig::default()),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Table2(a) => cmd_table2(a),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = base_config(args.config.as_deref())?;
    args.overrides.apply(&mut cfg)?;
    if args.dry_run {
        print!("{}", cfg.to_canonical_text());
        return Ok(());
    }
    let out = args.out.expect("clap enforces --out without --dry-run");
    let start = Instant::now();
    let set = run_campaign(&cfg)?;
    let secs = start.elapsed().as_secs_f64();
    persist(&set, &out)?;
    if let Some(csv) = &args.csv {
        crate::store::export_csv(&set, csv)?;
    }
    let n = set.n_photons;
    println!("photons   {n}");
    println!("arrived   {} (weight {:.6e})", set.totals.arrived, set.totals.arrived_weight);
    println!("absorbed  {}", set.totals.absorbed);
    println!("escaped   {}", set.totals.escaped);
    println!("wall time {secs:.2} s ({:.3e} photons/s)", n as f64 / secs.max(1e-9));
    println!("wrote     {}", out.display());
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let set = load(&args.arrivals)?;
    let level = args.level.unwrap_or(set.config.analysis.quantile_level);
    let weighting = set.config.analysis.weighting;
    let bp = select_bit_period(&set, level, weighting)?;
    let fov = select_fov(&set, level, weighting)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    delay_cdf(&set, weighting)?.write_csv(&args.out.join("delay_cdf.csv"))?;
    aoa_cdf(&set, weighting)?.write_csv(&args.out.join("aoa_cdf.csv"))?;
    println!("quantile level {level} ({weighting} weighting), {} arrivals", set.len());
    println!("bit period  {:.4} ns (raw)  {} ns (rounded)", bp.raw * 1e9, bp.rounded * 1e9);
    println!("FoV         {:.3} deg (raw)  {} deg (rounded)", fov.raw.to_degrees(), fov.rounded.to_degrees().round());
    Ok(())
}

fn cmd_optimize(args: OptimizeArgs) -> Result<()> {
    let set = load(&args.arrivals)?;
    let cfg = &set.config;
    let level = args.level.unwrap_or(cfg.analysis.quantile_level);
    let pick = |raw: f64, rounded: f64| if args.pin_rounded { rounded } else { raw };
    let bit_period = match args.bit_period {
        Some(b) => b,
        None => {
            let s = select_bit_period(&set, level, cfg.analysis.weighting)?;
            pick(s.raw, s.rounded)
        }
    };
    let fov = match args.fov_deg {
        Some(d) => d.to_radians(),
        None => {
            let s = select_fov(&set, level, cfg.analysis.weighting)?;
            pick(s.raw, s.rounded)
        }
    };
    let selection = ChannelSelection::new(bit_period, fov, level, cfg.receiver.distance_m)?;
    let mut budget = LinkBudget::from_config(cfg);
    if args.noiseless {
        budget.dark_count_rate = 0.0;
        budget.environment.surface_irradiance = 0.0;
    }
    let grid = match &args.gate_grid {
        Some(g) => parse_gate_grid(g)?,
        None => default_gate_grid(selection.bit_period),
    };
    let sweep = sweep_gate(&set, &selection, &budget, &grid, cfg.analysis.gamma_weighting)?;
    if let Some(out) = &args.out {
        write_sweep_csv(&sweep, out)?;
    }
    let best = sweep.optimum();
    println!(
        "bit period {:.4} ns, FoV {:.3} deg, {} gates",
        selection.bit_period * 1e9,
        selection.fov.to_degrees(),
        grid.len()
    );
    println!("optimal gate {:.0} ps", best.gate / PS);
    println!("QBER         {:.4e}", best.qber);
    println!("gamma        {:.4e}", best.gamma);
    Ok(())
}

fn cached_campaign(cfg: &LinkConfig, cache_dir: &Path) -> Result<ArrivalSet> {
    let path = cache_dir.join(format!("{}.uqkd", cfg.campaign_hash()));
    if path.exists() {
        match load(&path) {
            Ok(set) if set.config.campaign_text() == cfg.campaign_text() => {
                info!("cache hit {}", path.display());
                return Ok(set);
            }
            Ok(_) => info!("cache entry {} has a different config; rerunning", path.display()),
            Err(e) => info!("cache entry {} unreadable ({e}); rerunning", path.display()),
        }
    }
    info!("simulating {} photons -> {}", cfg.simulation.photons, path.display());
    let set = run_campaign(cfg)?;
    persist(&set, &path)?;
    Ok(set)
}

fn cmd_table2(args: Table2Args) -> Result<()> {
    let text = fs::read_to_string(&args.matrix).map_err(|e| Error::io(&args.matrix, e))?;
    let matrix = parse_matrix(&text)?;
    let mut base = base_config(args.config.as_deref())?;
    args.overrides.apply(&mut base)?;
    base.analysis.pin_rounded = true;
    let grid = args.gate_grid.as_deref().map(parse_gate_grid).transpose()?;

    let configs: Vec<LinkConfig> = matrix
        .iter()
        .map(|m| {
            let mut c = base.clone();
            c.transmitter.r0_m = m.r0_m;
            c.transmitter.divergence_deg = m.divergence_deg;
            c.receiver.distance_m = m.distance_m;
            c
        })
        .collect();
    if args.dry_run {
        for c in &configs {
            println!(
                "r0 {} m, divergence {} deg, L {} m, {} photons, key {}",
                c.transmitter.r0_m,
                c.transmitter.divergence_deg,
                c.receiver.distance_m,
                c.simulation.photons,
                c.campaign_hash()
            );
        }
        return Ok(());
    }

    let cache = args.out.join("cache");
    fs::create_dir_all(&cache).map_err(|e| Error::io(&cache, e))?;
    let mut rows: Vec<Table2Row> = Vec::new();
    let mut first_err: Option<Error> = None;
    for c in &configs {
        let res = c
            .validate()
            .and_then(|_| cached_campaign(c, &cache))
            .and_then(|set| table2_row_from_set(&set, grid.as_deref()));
        match res {
            Ok(r) => rows.push(r),
            Err(e) => {
                error!(
                    "row r0={} div={} L={} failed: {e}",
                    c.transmitter.r0_m, c.transmitter.divergence_deg, c.receiver.distance_m
                );
                eprintln!(
                    "row r0={} m, divergence {} deg, L={} m failed: {e}",
                    c.transmitter.r0_m, c.transmitter.divergence_deg, c.receiver.distance_m
                );
                first_err.get_or_insert(e);
            }
        }
    }

    let table = format_table2(&rows);
    print!("{table}");
    let txt = args.out.join("table2.txt");
    fs::write(&txt, &table).map_err(|e| Error::io(&txt, e))?;
    let mut csv = String::from(TABLE2_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&table2_csv_line(r));
        csv.push('\n');
    }
    let csv_path = args.out.join("table2.csv");
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Entry point used by the binary: parse arguments, set up logging, map
/// errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
