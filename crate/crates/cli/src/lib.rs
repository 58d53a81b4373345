//! Command-line front end: parse flags, load the config, run one subcommand.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Args, Parser, Subcommand};
use commands::CliError;
use config::{parse_seed_grid, RunConfig};
use output::Output;
use plugflow::quotient::flow::Direction;
use plugflow::CylPoint;
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "plugflow", version, about = "Wilson, Kuperberg and derived plug flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; the shipped defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `out` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Per-direction time budget.
    #[arg(long, global = true)]
    pub budget_time: Option<f64>,
    /// Per-direction event budget.
    #[arg(long, global = true)]
    pub budget_events: Option<usize>,
    /// Periodic-search seed grid `NRxNTHETAxNZ`.
    #[arg(long, global = true)]
    pub seed_grid: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every plug condition at the configured grid.
    Validate,
    /// Flow one orbit, or sample the special orbits with `--special`.
    Orbit {
        /// `r,theta,z`.
        #[arg(long)]
        start: Option<String>,
        #[arg(long, value_parser = parse_direction)]
        direction: Option<Direction>,
        #[arg(long)]
        special: bool,
    },
    /// Search the seed grid for periodic orbits.
    Periodic,
    /// Build the surface swept by the notched Reeb cylinder and its growth curve.
    M0,
    /// Separated counts and entropy estimates on the configured seeds.
    Entropy,
    /// Periodic orbits, trapping and separation across offsets.
    Sweep {
        /// Comma-separated offsets, overriding the config; empty for none.
        #[arg(long)]
        eps: Option<String>,
    },
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    match s {
        "forward" => Ok(Direction::Forward),
        "backward" => Ok(Direction::Backward),
        "both" => Ok(Direction::Both),
        _ => Err(format!("direction `{s}` is not forward, backward or both")),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number"))).collect()
}

/// Loads the config and applies the global overrides.
pub fn effective_config(g: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(t) = g.budget_time {
        cfg.budgets.t_max = t;
    }
    if let Some(n) = g.budget_events {
        cfg.budgets.max_events = n;
    }
    if let Some(s) = &g.seed_grid {
        let (a, b, c) = parse_seed_grid(s).map_err(CliError::Config)?;
        cfg.periodic.nr = a;
        cfg.periodic.ntheta = b;
        cfg.periodic.nz = c;
    }
    Ok(cfg)
}

/// Runs a parsed command; the exit status is 0 on success, 1 on a failed run or
/// failed validation, 2 on a config error.
pub fn execute(cli: Cli) -> Result<i32, CliError> {
    let mut cfg = effective_config(&cli.global)?;
    if let Some(n) = cli.global.workers {
        // The global pool can only be set once per process; later calls keep the first size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut orbit_args = None;
    match &cli.command {
        Command::Orbit { start, direction, special } => {
            if let Some(s) = start {
                let v = parse_list(s).map_err(CliError::Config)?;
                let [r, th, z] = v[..] else {
                    return Err(CliError::Config(format!("start `{s}` is not r,theta,z")));
                };
                cfg.orbit.start = [r, th, z];
            }
            if let Some(d) = direction {
                cfg.orbit.direction = *d;
            }
            orbit_args = Some(*special);
        }
        Command::Sweep { eps: Some(list) } => {
            cfg.sweep.epsilons = parse_list(list).map_err(CliError::Config)?;
        }
        _ => {}
    }
    let mut out = Output::create(&cfg.out, &cfg)?;
    let code = match cli.command {
        Command::Validate => {
            let s = commands::cmd_validate(&cfg, &mut out)?;
            for f in &s.failures {
                eprintln!("failed check {f}");
            }
            for t in &s.tags {
                eprintln!("tag {t}");
            }
            i32::from(!s.pass)
        }
        Command::Orbit { .. } => {
            if orbit_args == Some(true) {
                commands::cmd_minimal(&cfg, &mut out)?;
            } else {
                let [r, th, z] = cfg.orbit.start;
                commands::cmd_orbit(&cfg, &mut out, CylPoint::new(r, th, z), cfg.orbit.direction)?;
            }
            0
        }
        Command::Periodic => {
            commands::cmd_periodic(&cfg, &mut out)?;
            0
        }
        Command::M0 => {
            commands::cmd_m0(&cfg, &mut out)?;
            0
        }
        Command::Entropy => {
            commands::cmd_entropy(&cfg, &mut out)?;
            0
        }
        Command::Sweep { .. } => {
            let eps = cfg.sweep.epsilons.clone();
            let s = commands::cmd_sweep(&cfg, &mut out, &eps)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            0
        }
    };
    for p in &out.written {
        eprintln!("wrote {}", p.display());
    }
    Ok(code)
}

/// Entry point shared by the binary and the tests.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
