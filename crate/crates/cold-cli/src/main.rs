//! `cold`: counterdiabatic optimised local driving from the command line.
//!
//! Subcommands: coeffs, evolve, optimize, sweep, experiment, landscape.
//! All results are CSV; identical (config, seed) pairs produce byte-identical
//! output regardless of --threads.

mod config;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use cold_core::experiments::{
    evolve_report, ising_graph_solution, landscape_scan, lcd_solution_for, log_grid, rows_to_csv,
    run_experiment, run_single, ExperimentName, Method,
};
use config::{parse_config, Config};

#[derive(Parser)]
#[command(
    name = "cold",
    version,
    about = "Counterdiabatic optimised local driving"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; every task seed derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to COLD_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Optimizer restarts.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the LCD coefficients on a lambda grid: lambda, alpha_1..alpha_k.
    Coeffs {
        /// Grid points over the protocol.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Evolve the configured protocol with the configured pulse:
    /// tau, fidelity, t3, max_cd_amplitude, n_steps_used.
    Evolve,
    /// Optimize one tau point and report every restart plus a summary row.
    Optimize {
        /// Override the optimizer: powell | nelder-mead | dual-annealing.
        #[arg(long)]
        optimizer: Option<String>,
        /// Override the cost: fidelity | energy | three-tangle |
        /// coeff-integral | coeff-max-amplitude | constrained-fidelity.
        #[arg(long)]
        cost: Option<String>,
        /// Symmetric parameter bounds [-B, B].
        #[arg(long)]
        bounds: Option<f64>,
    },
    /// Sweep tau logarithmically and emit the experiment table.
    Sweep {
        #[arg(long)]
        tau_lo: Option<f64>,
        #[arg(long)]
        tau_hi: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Run one experiment point: one CSV row per tau.
    Experiment {
        /// two-spin | ising-chain | lattice-arp | ghz
        name: String,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        n_k: Option<usize>,
    },
    /// Scan a 2-parameter cost landscape: c1, c2, cost.
    Landscape {
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 10.0)]
        hi: f64,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            match parse_config(&text) {
                Ok(c) => c,
                Err(errors) => {
                    bail!("invalid config:\n  {}", errors.join("\n  "));
                }
            }
        }
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(restarts) = cli.restarts {
        cfg.experiment.restarts = restarts;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = Some(threads);
    } else if cfg.threads.is_none() {
        if let Ok(v) = std::env::var("COLD_THREADS") {
            cfg.threads = Some(v.parse().context("COLD_THREADS must be an integer")?);
        }
    }
    Ok(cfg)
}

fn emit(cli: &Cli, cfg: &Config, text: &str) -> anyhow::Result<()> {
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from));
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            f.write_all(text.as_bytes())?;
        }
        None => {
            print!("{text}");
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn run(cli: &Cli, cfg: &Config) -> anyhow::Result<String> {
    match &cli.command {
        Command::Coeffs { grid } => {
            let method = Method::parse(&cfg.experiment.method)?;
            let n = cfg.experiment.n.unwrap_or(2);
            let solution = if cfg.experiment.name == "ising-graph" {
                ising_graph_solution(&cfg.graph_definition())?
            } else {
                lcd_solution_for(&cfg.experiment.name, method, n)?
            };
            let pulses = match cfg.explicit_pulse()? {
                Some(p) => solution
                    .system()
                    .control_ops
                    .iter()
                    .map(|_| p.clone())
                    .collect(),
                None => Vec::new(),
            };
            let span = solution.system().lambda_span;
            let k = solution.ansatz().len();
            let mut out = String::from("lambda");
            for i in 1..=k {
                out.push_str(&format!(",alpha_{i}"));
            }
            out.push('\n');
            let points = (*grid).max(2);
            for p in 0..points {
                let s = p as f64 / (points - 1) as f64;
                let lambda = span.0 + s * (span.1 - span.0);
                let alphas = solution.coefficients_at(lambda, &pulses)?;
                out.push_str(&lambda.to_string());
                for a in alphas {
                    out.push_str(&format!(",{a}"));
                }
                out.push('\n');
            }
            Ok(out)
        }
        Command::Evolve => {
            let spec = cfg.experiment_spec()?;
            let pulse = cfg.explicit_pulse()?;
            let reports = evolve_report(&spec, pulse.as_ref())?;
            let mut out = String::from("tau,fidelity,t3,max_cd_amplitude,n_steps_used\n");
            for r in reports {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.tau,
                    r.fidelity,
                    fmt_opt(r.t3),
                    r.max_cd_amplitude,
                    r.n_steps_used
                ));
            }
            Ok(out)
        }
        Command::Optimize {
            optimizer,
            cost,
            bounds,
        } => {
            let mut cfg = cfg.clone();
            if let Some(o) = optimizer {
                cfg.optimizer.method = o.clone();
            }
            if let Some(c) = cost {
                cfg.experiment.cost = c.clone();
            }
            if let Some(b) = bounds {
                cfg.optimizer.bounds = Some([-b.abs(), b.abs()]);
            }
            let mut spec = cfg.experiment_spec()?;
            spec.optimizer_override = Some(cfg.optimizer_spec());
            let tau = spec.taus[0];
            let (detail, row) = run_single(&spec, tau)?;
            let mut out = String::from("restart,seed,cost,evaluations\n");
            if let Some(run) = detail {
                for r in &run.restarts {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        r.index, r.seed, r.cost, r.evaluations
                    ));
                }
                out.push_str(&format!(
                    "best,{},{},{}\n",
                    run.best_index,
                    run.best_cost,
                    run.restarts.iter().map(|r| r.evaluations).sum::<usize>()
                ));
            } else {
                out.push_str(&format!("best,0,{},0\n", row.cost));
            }
            Ok(out)
        }
        Command::Sweep {
            tau_lo,
            tau_hi,
            points,
        } => {
            let mut spec = cfg.experiment_spec()?;
            if let (Some(lo), Some(hi)) = (tau_lo, tau_hi) {
                spec.taus = log_grid(*lo, *hi, points.unwrap_or(7));
            }
            let rows = run_experiment(&spec)?;
            Ok(rows_to_csv(&rows))
        }
        Command::Experiment {
            name,
            method,
            tau,
            n,
            n_k,
        } => {
            let mut cfg = cfg.clone();
            cfg.experiment.name = name.clone();
            if let Some(m) = method {
                cfg.experiment.method = m.clone();
            }
            if let Some(t) = tau {
                cfg.experiment.tau = vec![*t];
            }
            if let Some(n) = n {
                cfg.experiment.n = Some(*n);
            }
            if let Some(k) = n_k {
                cfg.experiment.n_k = *k;
            }
            // pick up per-experiment defaults when the config kept its own
            if cfg.experiment.n.is_none() {
                let parsed = ExperimentName::parse(name)?;
                cfg.experiment.n = Some(match parsed {
                    ExperimentName::TwoSpin => 2,
                    ExperimentName::IsingChain => 5,
                    ExperimentName::LatticeArp => 7,
                    ExperimentName::Ghz => 3,
                });
            }
            let spec = cfg.experiment_spec()?;
            let rows = run_experiment(&spec)?;
            Ok(rows_to_csv(&rows))
        }
        Command::Landscape { grid, lo, hi } => {
            let spec = cfg.experiment_spec()?;
            let rows = landscape_scan(&spec, *grid, *lo, *hi)?;
            let mut out = String::from("c1,c2,cost\n");
            for (c1, c2, c) in rows {
                out.push_str(&format!("{c1},{c2},{c}\n"));
            }
            Ok(out)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: building thread pool: {e}");
            std::process::exit(1);
        }
    };
    let outcome = pool.install(|| run(&cli, &cfg));
    match outcome {
        Ok(text) => {
            if let Err(e) = emit(&cli, &cfg, &text) {
                eprintln!("error: {e:#}");
                std::process::exit(1);
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
