//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hystflow::diagnostics::MonitorOptions;
use hystflow::flux::ConvexFlux;
use hystflow::hysteresis::PlayState;
use hystflow::riemann::RiemannProblem;
use hystflow::scenario::{convergence_study, diagnose_run_dir, riemann_report, run_scenario, Scenario};

#[derive(Parser)]
#[command(name = "hystflow", version, about = "Conservation laws with Play hysteresis: scheme, Riemann solver, diagnostics")]
struct Cli {
    /// Root directory for run outputs.
    #[arg(long, env = "HYSTFLOW_OUT", default_value = "runs", global = true)]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or preset and write snapshots, ledger and metadata.
    Run {
        /// Path to a scenario JSON file, or a preset name.
        scenario: String,
        /// Override the cell width.
        #[arg(long)]
        dx: Option<f64>,
        /// Skip the entropy-pair and per-cell checks.
        #[arg(long)]
        fast: bool,
    },
    /// Solve a Riemann problem exactly and sample it at time t.
    Riemann {
        #[arg(long, allow_hyphen_values = true)]
        ul: f64,
        #[arg(long, allow_hyphen_values = true)]
        wl: f64,
        #[arg(long, allow_hyphen_values = true)]
        ur: f64,
        #[arg(long, allow_hyphen_values = true)]
        wr: f64,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value = "burgers")]
        flux: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Number of sample points.
        #[arg(long, default_value_t = 401)]
        samples: usize,
        /// Write the samples here instead of `<out>/riemann.csv`.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Convergence study over dyadic refinements of the scenario's dx.
    Converge {
        scenario: String,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Re-run the scenario stored in a run directory and check every diagnostic.
    Diag { run_dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> hystflow::Result<bool> {
    match cli.command {
        Command::Run { scenario, dx, fast } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(dx) = dx {
                s = s.with_dx(dx);
            }
            let opts = if fast {
                MonitorOptions { entropy: false, per_cell: false, ..Default::default() }
            } else {
                MonitorOptions::default()
            };
            let dir = cli.out.join(&s.name);
            let art = run_scenario(&s, &dir, opts)?;
            let sim = &art.simulation;
            println!(
                "{}: {} cells, dt = {:.6e}, {} steps, {:.2} s",
                s.name,
                sim.grid.n,
                sim.dt,
                sim.steps(),
                sim.elapsed.as_secs_f64()
            );
            for c in &sim.checks {
                println!("  {c}");
            }
            if s.is_riemann() {
                for (snap, (eu, ew)) in sim.snapshots.iter().zip(sim.exact_errors()?) {
                    println!("  L1 error vs exact at t = {}: u {eu:.4e}, w {ew:.4e}", snap.t);
                }
            }
            println!("artifacts in {}", art.dir.display());
            Ok(sim.passed())
        }
        Command::Riemann { ul, wl, ur, wr, a, flux, t, samples, csv } => {
            let p = RiemannProblem::new(PlayState::new(ul, wl), PlayState::new(ur, wr), a, ConvexFlux::by_id(&flux)?)?;
            let (text, data) = riemann_report(&p, t, samples)?;
            print!("{text}");
            let path = match csv {
                Some(p) => p,
                None => {
                    std::fs::create_dir_all(&cli.out)?;
                    cli.out.join("riemann.csv")
                }
            };
            std::fs::write(&path, data)?;
            println!("samples at t = {t} in {}", path.display());
            Ok(true)
        }
        Command::Converge { scenario, levels } => {
            let s = Scenario::load(&scenario)?;
            let table = convergence_study(&s, levels)?;
            print!("{table}");
            Ok(table.strictly_decreasing)
        }
        Command::Diag { run_dir } => {
            let out = diagnose_run_dir(&run_dir, MonitorOptions::default())?;
            for c in &out.simulation.checks {
                println!("{c}");
            }
            println!("ledger reproduced: {}", if out.ledger_matches { "yes" } else { "NO" });
            Ok(out.passed())
        }
    }
}
