use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use knudsen::halfspace_solver::LayerConfig;
use knudsen::harness::{self, ErrorReport, RunConfig, Scenario};
use knudsen::linearization::ReferenceState;

#[derive(Parser)]
#[command(name = "knudsen", version, about = "BGK / Euler solvers with Knudsen-layer coupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a test scenario against fine kinetic references.
    Run {
        /// Test id 1-6 or "custom".
        #[arg(long)]
        test: Option<String>,
        /// Comma-separated Knudsen numbers; defaults to the preset ladder.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        paper_scale: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON run configuration; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Test 5 left-wall ramp: small or large.
        #[arg(long)]
        perturbation: Option<String>,
        /// Write per-step coupling diagnostics.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Solve one half-space layer problem.
    LayerSolve {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        u: f64,
        #[arg(long = "T")]
        temp: f64,
        #[arg(long, default_value_t = 30)]
        order: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// CSV of `w,phi` rows on an even grid of w > 0.
        #[arg(long)]
        inflow: PathBuf,
        /// Write the wall trace here instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Refit and print the slopes of a saved error report.
    Convergence {
        #[arg(long)]
        report: PathBuf,
    },
}

fn parse_scenario(s: &str) -> anyhow::Result<Scenario> {
    Ok(serde_json::from_value(match s.parse::<u8>() {
        Ok(n) => serde_json::json!(n),
        Err(_) => serde_json::json!(s),
    })?)
}

fn print_report(r: &ErrorReport) {
    println!("{}: window [{}, {}]", r.test, r.window[0], r.window[1]);
    println!("{:>12} {:>12} {:>12} {:>12}", "eps", "D_rho", "D_u", "D_T");
    for e in &r.entries {
        println!("{:>12.6e} {:>12.4e} {:>12.4e} {:>12.4e}", e.eps, e.d_rho, e.d_u, e.d_temp);
    }
    match &r.slopes {
        Some(s) => println!("slopes: rho {:.3}, u {:.3}, T {:.3}", s[0].slope, s[1].slope, s[2].slope),
        None => println!("slopes: n/a"),
    }
    for f in &r.failures {
        println!("FAILED eps={:e}: {}", f.eps, f.message);
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run {
            test,
            eps,
            out,
            paper_scale,
            seed,
            config,
            perturbation,
            diagnostics,
        } => {
            let mut cfg = match (&config, &test) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    RunConfig::from_json(&text)?
                }
                (None, Some(t)) => RunConfig::preset(parse_scenario(t)?, paper_scale),
                (None, None) => bail!("give --test or --config"),
            };
            if let (Some(_), Some(t)) = (&config, &test) {
                cfg.test = parse_scenario(t)?;
            }
            if let Some(e) = eps {
                cfg.eps = e;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = perturbation {
                cfg.perturbation = serde_json::from_value(serde_json::json!(p))?;
            }
            if let Some(o) = out {
                cfg.output_dir = Some(o);
            }
            cfg.diagnostics |= diagnostics;
            let outcome = harness::run_test(&cfg)?;
            if let Some(dir) = &cfg.output_dir {
                harness::write_outputs(&outcome, dir)?;
                log::info!("wrote {}", dir.display());
            }
            print_report(&outcome.report);
            Ok(!outcome.report.partial)
        }
        Command::LayerSolve {
            rho,
            u,
            temp,
            order,
            alpha,
            inflow,
            trace,
        } => {
            let r = ReferenceState::new(rho, u, temp)?;
            let text = std::fs::read_to_string(&inflow).with_context(|| format!("reading {}", inflow.display()))?;
            let (nodes, values) = harness::parse_inflow_csv(&text)?;
            let rep = harness::layer_solve(&r, LayerConfig { order, alpha }, nodes, values)?;
            println!("xi0 = {:.12e}", rep.xi[0]);
            println!("xi+ = {:.12e}", rep.xi[1]);
            println!("xi- = {:.12e}", rep.xi[2]);
            match trace {
                Some(p) => std::fs::write(&p, rep.trace_csv())?,
                None => print!("{}", rep.trace_csv()),
            }
            Ok(true)
        }
        Command::Convergence { report } => {
            let text = std::fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            let mut r = ErrorReport::from_json(&text)?;
            r.refit();
            print_report(&r);
            Ok(r.slopes.is_some() && !r.partial)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
