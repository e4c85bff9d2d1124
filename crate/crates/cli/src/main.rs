//! `weylband`: command-line driver for the counting experiments.
//!
//! Exit status is 0 on success, 1 when a computation fails for a
//! mathematical reason (violated assumption, non-convergence) and 2 for
//! usage, configuration and I/O problems.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, LevelFilter};

use weylband::config::{ScenarioConfig, Strength};
use weylband::harness::{emit_outputs, run_scenario, ScenarioRun, Stages};
use weylband::par::Execution;
use weylband::Error;

#[derive(Parser, Debug)]
#[command(name = "weylband", version, about = "Eigenvalue counting in spectral bands on surfaces of revolution")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate rotation number, action, torus averages and limit intervals.
    Classical(Common),
    /// Admissible torus set, band volume and predicted count.
    Volume(Common),
    /// Eigenvalues of the damped operator near the band.
    Spectrum(Common),
    /// Quantum, lattice and predicted counts in the band.
    Count(Common),
    /// Every check: classical table, counts, strip, Monte Carlo, damped wave.
    Verify(Common),
    /// Eigenfrequencies of the damped wave equation (needs a [damped] section).
    Dampedwave(Common),
    /// Counts over the h list with a log-log trend of the errors.
    Sweep(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Run at a single semiclassical parameter.
    #[arg(long, conflicts_with = "h_list")]
    h: Option<f64>,

    /// Comma-separated, strictly decreasing list of h values.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    h_list: Option<Vec<f64>>,

    /// Use eps = h^p.
    #[arg(long, value_name = "P")]
    eps_exponent: Option<f64>,

    /// Grid size of the per-mode discretization.
    #[arg(long)]
    grid_n: Option<usize>,

    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn effective_config(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(h) = self.h {
            cfg.numerics.h_list = vec![h];
        }
        if let Some(list) = &self.h_list {
            cfg.numerics.h_list = list.clone();
        }
        if let Some(p) = self.eps_exponent {
            cfg.band.eps = format!("h^{p}").parse::<Strength>()?;
        }
        if let Some(n) = self.grid_n {
            cfg.numerics.grid_n = n;
            if let Some(d) = cfg.damped.as_mut() {
                d.grid_n = n;
            }
        }
        if let Some(dir) = &self.out_dir {
            cfg.output.dir = dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn stages_for(cmd: &Command) -> Stages {
    let none = Stages::none();
    match cmd {
        Command::Classical(_) => Stages { classical: true, ..none },
        Command::Volume(_) => Stages {
            prediction: true,
            montecarlo: true,
            ..none
        },
        Command::Spectrum(_) => Stages { quantum: true, ..none },
        Command::Count(_) => Stages {
            prediction: true,
            quantum: true,
            lattice: true,
            ..none
        },
        Command::Verify(_) => Stages::all(),
        Command::Dampedwave(_) => Stages { damped: true, ..none },
        Command::Sweep(_) => Stages {
            prediction: true,
            quantum: true,
            lattice: true,
            strip: true,
            ..none
        },
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Classical(c)
        | Command::Volume(c)
        | Command::Spectrum(c)
        | Command::Count(c)
        | Command::Verify(c)
        | Command::Dampedwave(c)
        | Command::Sweep(c) => c,
    }
}

fn exit_for(e: &Error) -> ExitCode {
    if e.is_domain() {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("WEYLBAND_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("WEYLBAND_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))
}

fn summarize(cmd: &Command, run: &ScenarioRun) {
    let r = &run.report;
    match cmd {
        Command::Classical(_) => {
            println!("{:>10} {:>12} {:>12} {:>12} {:>12}  dioph", "a", "omega", "iota", "J1", "q_avg");
            for c in &run.artifacts.classical {
                println!(
                    "{:>10.5} {:>12.8} {:>12.8} {:>12.8} {:>12.8}  {:?}",
                    c.a, c.omega, c.iota, c.j1, c.q_avg, c.dioph.kind
                );
            }
        }
        Command::Dampedwave(_) => {
            if let Some(d) = &r.damped {
                println!(
                    "damped wave: {} eigenfrequencies in the box, predicted {:.2} (rel err {:.4}); {} solved",
                    d.count, d.n_pred, d.rel_err, d.frequencies
                );
            }
        }
        _ => {
            if let Some(v) = r.volume {
                println!("band volume {v:.8}");
            }
            for row in &r.rows {
                let strip = row
                    .n_strip_quantum
                    .map(|n| format!("  strip {n} / {:.2}", row.n_strip_pred))
                    .unwrap_or_default();
                println!(
                    "h {:<8} eps {:<10.6} quantum {:>5}  lattice {:>5}  predicted {:>9.3}  rel err {:.4}{strip}",
                    row.h, row.eps, row.n_quantum, row.n_lattice, row.n_pred, row.rel_err_quantum_vs_pred
                );
            }
            if let Some(mc) = &r.montecarlo {
                println!(
                    "Monte Carlo volume {:.5} +- {:.5} vs {:.5} ({})",
                    mc.estimate,
                    mc.stderr,
                    mc.band_volume,
                    if mc.consistent { "consistent" } else { "outside 3 sigma" }
                );
            }
            if let Some(t) = &r.trend {
                println!(
                    "trend: slope quantum {:?}, strip {:?}; quantum error non-increasing: {}",
                    t.slope_quantum, t.slope_strip, t.quantum_monotone
                );
            }
            if let Some(d) = &r.damped {
                println!("damped wave: {} in box, predicted {:.2}", d.count, d.n_pred);
            }
        }
    }
}

fn write(run: &ScenarioRun, dir: &Path) -> Result<(), Error> {
    let files = emit_outputs(run, dir)?;
    for f in files {
        info!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => LevelFilter::Warn,
            1 => LevelFilter::Info,
            _ => LevelFilter::Debug,
        })
        .init();

    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit_for(&e);
    }
    let cfg = match common(&cli.command).effective_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };
    if matches!(cli.command, Command::Dampedwave(_)) && cfg.damped.is_none() {
        eprintln!("error: the scenario has no [damped] section");
        return ExitCode::from(2);
    }
    if matches!(cli.command, Command::Sweep(_)) && cfg.numerics.h_list.len() < 3 {
        eprintln!("error: a sweep needs at least 3 values of h");
        return ExitCode::from(2);
    }

    let dir = cfg.output.dir.clone();
    match run_scenario(&cfg, stages_for(&cli.command), Execution::Parallel) {
        Ok(run) => {
            summarize(&cli.command, &run);
            match write(&run, &dir) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for(&e)
                }
            }
        }
        Err(failure) => {
            eprintln!("error: {}", failure.error);
            if let Err(e) = write(&failure.partial, &dir) {
                eprintln!("error: could not write the partial report: {e}");
            } else {
                eprintln!("partial report written to {}", dir.display());
            }
            exit_for(&failure.error)
        }
    }
}
