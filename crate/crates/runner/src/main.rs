use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use crn_smc_runner::bench::{available_workers, bench_scaling, doubling_up_to, plan_workers, write_scaling};
use crn_smc_runner::config::{ConfigLayer, ModelKind, ProposalChoice};
use crn_smc_runner::data::{write_observations, DataSidecar};
use crn_smc_runner::experiment::{generate, run_experiment, true_theta, write_outputs};

#[derive(Parser)]
#[command(name = "crn-smc", version, about = "Gradient-informed SMC² experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate observations at the true parameters.
    GenerateData {
        #[arg(long, value_enum, default_value = "lgssm")]
        model: ModelKind,
        /// Number of observations (defaults to 500 for lgssm, 35 for sir).
        #[arg(long)]
        observations: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        obs_std: f64,
        /// Output CSV; the sidecar is written next to it as `.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run Monte Carlo repetitions of the sampler.
    Run {
        #[command(flatten)]
        opts: RunOpts,
        /// Run the repetitions concurrently instead of one after another.
        #[arg(long)]
        parallel_runs: bool,
    },
    /// Time one run for P = 1, 2, 4, … and write `scaling.csv`.
    Bench {
        #[command(flatten)]
        opts: RunOpts,
        /// Worker counts to time (default: 1, 2, 4, … up to the core count).
        #[arg(long, value_delimiter = ',')]
        workers_list: Option<Vec<usize>>,
    },
}

#[derive(Args)]
struct RunOpts {
    /// TOML configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long, value_enum)]
    proposal: Option<ProposalChoice>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    n_particles: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Length of generated data.
    #[arg(long)]
    observations: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    mc_runs: Option<usize>,
    #[arg(long)]
    obs_std: Option<f64>,
    /// Observation CSV; generated from `--data-seed` when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunOpts {
    fn layer(self) -> Result<ConfigLayer> {
        let base = match &self.config {
            Some(p) => ConfigLayer::load(p)?,
            None => ConfigLayer::default(),
        };
        Ok(base.overlay(ConfigLayer {
            model: self.model,
            proposal: self.proposal,
            n_samples: self.n_samples,
            n_particles: self.n_particles,
            iterations: self.iterations,
            observations: self.observations,
            step_size: self.step_size,
            seed: self.seed,
            data_seed: self.data_seed,
            workers: self.workers,
            mc_runs: self.mc_runs,
            obs_std: self.obs_std,
            data: self.data,
            out: self.out,
        }))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData { model, observations, seed, obs_std, out } => {
            let t = observations.unwrap_or(match model {
                ModelKind::Lgssm => 500,
                ModelKind::Sir => 35,
            });
            anyhow::ensure!(t >= 1, "observations must be ≥ 1");
            anyhow::ensure!(obs_std > 0.0 && obs_std.is_finite(), "obs-std must be positive and finite");
            let y = generate(model, t, seed, obs_std);
            let side = DataSidecar { model, true_theta: true_theta(model), data_seed: seed, observations: t };
            write_observations(&out, &y, &side)?;
            println!("wrote {} observations to {}", t, out.display());
        }
        Command::Run { opts, parallel_runs } => {
            let cfg = opts.layer()?.resolve()?;
            let report = run_experiment(&cfg, parallel_runs)?;
            write_outputs(&report, &cfg.out)?;
            for r in &report.runs {
                println!("{}", serde_json::to_string(r)?);
            }
            println!(
                "{} runs completed of {}: mse {:?}, ess {:?} (reference mse {}, ess {}); output in {}",
                report.completed_runs,
                report.mc_runs,
                report.mse,
                report.ess,
                report.reference.mse,
                report.reference.ess,
                cfg.out.display()
            );
        }
        Command::Bench { opts, workers_list } => {
            let cfg = opts.layer()?.resolve()?;
            let limit = available_workers();
            let requested = workers_list.unwrap_or_else(|| doubling_up_to(limit));
            let (plan, dropped) = plan_workers(&requested, cfg.n_samples, limit);
            if !dropped.is_empty() {
                eprintln!(
                    "warning: skipping worker counts {dropped:?} (need powers of two ≤ {} samples and ≤ {limit} available cores)",
                    cfg.n_samples
                );
            }
            let rows = bench_scaling(&cfg, &plan)?;
            std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
            let path = cfg.out.join("scaling.csv");
            write_scaling(&rows, &path)?;
            for r in &rows {
                println!("P={:<3} {:>9.3}s  speedup {:.2}", r.p, r.runtime_s, r.speedup);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
