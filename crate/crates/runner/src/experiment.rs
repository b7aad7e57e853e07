//! Monte Carlo experiments: data, repeated sampler runs, summaries, traces.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use crn_smc::models::{lgssm, sir, Lgssm, Sir};
use crn_smc::rng::{keyed, stream, Purpose};
use crn_smc::sampler::{run_worker, SamplerError};
use crn_smc::{run_sampler, ParamVector, RunConfig, RunReport, StateSpaceModel};
use serde::Serialize;

use crate::config::{ExperimentConfig, ModelKind, ProposalChoice};
use crate::data::{read_observations, read_sidecar};
use crate::threads::run_parallel;

pub fn true_theta(model: ModelKind) -> Vec<f64> {
    match model {
        ModelKind::Lgssm => lgssm::TRUE_THETA.to_vec(),
        ModelKind::Sir => sir::TRUE_THETA.to_vec(),
    }
}

pub fn parameter_names(model: ModelKind) -> &'static [&'static str] {
    match model {
        ModelKind::Lgssm => &["mu", "phi", "sigma"],
        ModelKind::Sir => &["beta", "gamma"],
    }
}

/// Synthetic observations at the true θ.
pub fn generate(model: ModelKind, t: usize, data_seed: u64, obs_std: f64) -> Vec<f64> {
    let mut rng = stream(data_seed, Purpose::Simulation, 0, 0);
    match model {
        ModelKind::Lgssm => Lgssm::default().simulate(&ParamVector(lgssm::TRUE_THETA), t, &mut rng),
        ModelKind::Sir => Sir::new(obs_std).simulate(&ParamVector(sir::TRUE_THETA), t, &mut rng),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    #[serde(skip)]
    pub y: Vec<f64>,
    pub observations: usize,
    /// Ground truth, when the data are synthetic and their origin is known.
    pub true_theta: Option<Vec<f64>>,
    pub data_seed: Option<u64>,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.data {
        Some(path) => {
            let y = read_observations(path)?;
            let side = read_sidecar(path)?;
            if let Some(s) = &side {
                if s.model != cfg.model {
                    bail!("{} was generated for {:?}, not {:?}", path.display(), s.model, cfg.model);
                }
            }
            Ok(Dataset {
                observations: y.len(),
                y,
                true_theta: side.as_ref().map(|s| s.true_theta.clone()),
                data_seed: side.map(|s| s.data_seed),
            })
        }
        None => {
            let y = generate(cfg.model, cfg.observations, cfg.data_seed, cfg.obs_std);
            Ok(Dataset { observations: y.len(), y, true_theta: Some(true_theta(cfg.model)), data_seed: Some(cfg.data_seed) })
        }
    }
}

/// Published results of the reference experiments, for comparison only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub estimate: Vec<f64>,
    pub mse: f64,
    pub ess: f64,
}

pub fn reference(model: ModelKind, proposal: ProposalChoice) -> Reference {
    let (estimate, mse, ess) = match (model, proposal) {
        (ModelKind::Lgssm, ProposalChoice::Rw) => (vec![0.793, 0.841, 1.093], 0.088, 0.052),
        (ModelKind::Lgssm, ProposalChoice::FirstOrder) => (vec![0.736, 1.010, 0.980], 2.3e-4, 0.106),
        (ModelKind::Sir, ProposalChoice::Rw) => (vec![0.581, 0.295], 2.01e-4, 0.104),
        (ModelKind::Sir, ProposalChoice::FirstOrder) => (vec![0.604, 0.304], 1.69e-5, 0.241),
    };
    Reference { estimate, mse, ess }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub estimate: Vec<f64>,
    pub ess_norm: f64,
    pub resampled: bool,
    pub mse_running: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunOutcome {
    Ok {
        run: usize,
        seed: u64,
        estimate: Vec<f64>,
        mse: Option<f64>,
        mean_ess: f64,
        recycling_constants: Vec<f64>,
        filter_evaluations: u64,
        out_of_support: u64,
        gradient_fallbacks: u64,
        #[serde(skip)]
        trace: Vec<TraceRow>,
    },
    /// Every sample had zero weight at iteration `k`.
    Degenerate { run: usize, seed: u64, k: usize },
}

impl RunOutcome {
    pub fn run(&self) -> usize {
        match self {
            RunOutcome::Ok { run, .. } | RunOutcome::Degenerate { run, .. } => *run,
        }
    }
    pub fn mse(&self) -> Option<f64> {
        match self {
            RunOutcome::Ok { mse, .. } => *mse,
            RunOutcome::Degenerate { .. } => None,
        }
    }
    pub fn mean_ess(&self) -> Option<f64> {
        match self {
            RunOutcome::Ok { mean_ess, .. } => Some(*mean_ess),
            RunOutcome::Degenerate { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Execution {
    pub workers: usize,
    pub parallel_runs: bool,
    pub total_s: f64,
    pub run_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub model: ModelKind,
    pub proposal: ProposalChoice,
    pub parameters: Vec<String>,
    pub n_samples: usize,
    pub n_particles: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub seed: u64,
    pub mc_runs: usize,
    pub data: Dataset,
    pub runs: Vec<RunOutcome>,
    pub completed_runs: usize,
    /// Averages over completed runs.
    pub mean_estimate: Option<Vec<f64>>,
    pub mse: Option<f64>,
    pub ess: Option<f64>,
    pub reference: Reference,
    /// Worker count and wall-clock times; the only part of the report that
    /// may differ between repetitions of the same configuration.
    pub execution: Execution,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The summary JSON with the `execution` section removed.
pub fn deterministic_part(summary_json: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(summary_json)?;
    v.as_object_mut().context("summary is not a JSON object")?.remove("execution");
    Ok(serde_json::to_string(&v)?)
}

pub fn replicate_seed(master: u64, run: usize) -> u64 {
    keyed(master, Purpose::Replicate, run as u64, 0)
}

/// One sampler run on `workers` threads. Every worker computes the same
/// report; the copies are checked against each other.
pub fn run_replicate<M: StateSpaceModel<D>, const D: usize>(
    model: &M,
    y: &[f64],
    cfg: &RunConfig<D>,
    workers: usize,
) -> Result<RunReport<D>, SamplerError> {
    if workers == 1 {
        return run_sampler(model, y, cfg);
    }
    let mut reports = run_parallel(workers, |c| run_worker(model, y, cfg, c)).into_iter();
    let first = reports.next().expect("at least one worker")?;
    for r in reports {
        assert_eq!(r?, first, "workers disagree on the run report");
    }
    Ok(first)
}

fn outcome<const D: usize>(run: usize, seed: u64, res: Result<RunReport<D>, SamplerError>) -> Result<RunOutcome> {
    match res {
        Ok(r) => Ok(RunOutcome::Ok {
            run,
            seed,
            estimate: r.recycled_estimate.to_vec(),
            mse: r.mse,
            mean_ess: r.mean_ess_normalized,
            recycling_constants: r.recycling_constants.clone(),
            filter_evaluations: r.filter_evaluations,
            out_of_support: r.out_of_support,
            gradient_fallbacks: r.gradient_fallbacks,
            trace: r
                .iterations
                .iter()
                .map(|it| TraceRow {
                    k: it.k,
                    estimate: it.estimate.to_vec(),
                    ess_norm: it.ess_normalized,
                    resampled: it.resampled,
                    mse_running: it.mse_running,
                })
                .collect(),
        }),
        Err(SamplerError::Degenerate(k)) => Ok(RunOutcome::Degenerate { run, seed, k }),
        Err(e) => Err(e).with_context(|| format!("run {run}")),
    }
}

fn run_all<M: StateSpaceModel<D>, const D: usize>(
    model: &M,
    cfg: &ExperimentConfig,
    parallel_runs: bool,
    data: &Dataset,
) -> Result<Vec<(RunOutcome, f64)>> {
    let truth: Option<[f64; D]> = match &data.true_theta {
        Some(t) if t.len() == D => Some(t.as_slice().try_into().unwrap()),
        Some(t) => bail!("true θ has {} components, the model has {D}", t.len()),
        None => None,
    };
    let one = |run: usize| -> Result<(RunOutcome, f64)> {
        let seed = replicate_seed(cfg.seed, run);
        let start = Instant::now();
        let res = run_replicate(model, &data.y, &cfg.sampler_config(seed, truth), cfg.workers);
        let secs = start.elapsed().as_secs_f64();
        Ok((outcome(run, seed, res)?, secs))
    };
    if parallel_runs {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..cfg.mc_runs).map(|r| s.spawn(move || one(r))).collect();
            handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
        })
    } else {
        (0..cfg.mc_runs).map(one).collect()
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, parallel_runs: bool) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let data = load_dataset(cfg)?;
    let results = match cfg.model {
        ModelKind::Lgssm => run_all(&Lgssm::default(), cfg, parallel_runs, &data)?,
        ModelKind::Sir => run_all(&Sir::new(cfg.obs_std), cfg, parallel_runs, &data)?,
    };
    let (runs, run_s): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let done: Vec<&RunOutcome> = runs.iter().filter(|r| matches!(r, RunOutcome::Ok { .. })).collect();
    let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let mean_estimate = (!done.is_empty()).then(|| {
        let d = parameter_names(cfg.model).len();
        (0..d)
            .map(|i| {
                done.iter()
                    .map(|r| match r {
                        RunOutcome::Ok { estimate, .. } => estimate[i],
                        RunOutcome::Degenerate { .. } => unreachable!(),
                    })
                    .sum::<f64>()
                    / done.len() as f64
            })
            .collect()
    });
    Ok(ExperimentReport {
        model: cfg.model,
        proposal: cfg.proposal,
        parameters: parameter_names(cfg.model).iter().map(|s| s.to_string()).collect(),
        n_samples: cfg.n_samples,
        n_particles: cfg.n_particles,
        iterations: cfg.iterations,
        step_size: cfg.step_size,
        seed: cfg.seed,
        mc_runs: cfg.mc_runs,
        completed_runs: done.len(),
        mean_estimate,
        mse: if data.true_theta.is_some() { mean(done.iter().filter_map(|r| r.mse()).collect()) } else { None },
        ess: mean(done.iter().filter_map(|r| r.mean_ess()).collect()),
        data,
        runs,
        reference: reference(cfg.model, cfg.proposal),
        execution: Execution { workers: cfg.workers, parallel_runs, total_s: start.elapsed().as_secs_f64(), run_s },
    })
}

/// Writes `summary.json` and one `trace_run<r>.csv` per completed run.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("summary.json"), report.to_json() + "\n")?;
    let d = report.parameters.len();
    for r in &report.runs {
        let RunOutcome::Ok { run, trace, .. } = r else { continue };
        let path = dir.join(format!("trace_run{run}.csv"));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        let mut header = vec!["k".to_string()];
        header.extend((1..=d).map(|i| format!("theta_hat_{i}")));
        header.extend(["ess_norm", "resampled", "mse_running"].map(String::from));
        w.write_record(&header)?;
        for row in trace {
            let mut rec = vec![row.k.to_string()];
            rec.extend(row.estimate.iter().map(|v| v.to_string()));
            rec.push(row.ess_norm.to_string());
            rec.push(u8::from(row.resampled).to_string());
            rec.push(row.mse_running.map_or(String::new(), |v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(())
}
