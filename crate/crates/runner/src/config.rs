//! Experiment configuration: a TOML file whose every key can be overridden
//! from the command line, resolved against per-model defaults.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use crn_smc::ProposalKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Lgssm,
    Sir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalChoice {
    Rw,
    FirstOrder,
}

impl From<ProposalChoice> for ProposalKind {
    fn from(p: ProposalChoice) -> Self {
        match p {
            ProposalChoice::Rw => ProposalKind::RandomWalk,
            ProposalChoice::FirstOrder => ProposalKind::FirstOrder,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

/// Partially specified configuration, as read from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigLayer {
    pub model: Option<ModelKind>,
    pub proposal: Option<ProposalChoice>,
    pub n_samples: Option<usize>,
    pub n_particles: Option<usize>,
    pub iterations: Option<usize>,
    /// Length `T` of generated data sets.
    pub observations: Option<usize>,
    pub step_size: Option<f64>,
    pub seed: Option<u64>,
    pub data_seed: Option<u64>,
    pub workers: Option<usize>,
    pub mc_runs: Option<usize>,
    /// SIR observation noise standard deviation.
    pub obs_std: Option<f64>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl ConfigLayer {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.to_owned(), source })
    }

    /// `self` with every key set in `top` replaced.
    pub fn overlay(self, top: ConfigLayer) -> Self {
        Self {
            model: top.model.or(self.model),
            proposal: top.proposal.or(self.proposal),
            n_samples: top.n_samples.or(self.n_samples),
            n_particles: top.n_particles.or(self.n_particles),
            iterations: top.iterations.or(self.iterations),
            observations: top.observations.or(self.observations),
            step_size: top.step_size.or(self.step_size),
            seed: top.seed.or(self.seed),
            data_seed: top.data_seed.or(self.data_seed),
            workers: top.workers.or(self.workers),
            mc_runs: top.mc_runs.or(self.mc_runs),
            obs_std: top.obs_std.or(self.obs_std),
            data: top.data.or(self.data),
            out: top.out.or(self.out),
        }
    }

    pub fn resolve(self) -> Result<ExperimentConfig, ConfigError> {
        let model = self.model.unwrap_or(ModelKind::Lgssm);
        let proposal = self.proposal.unwrap_or(ProposalChoice::Rw);
        let cfg = ExperimentConfig {
            model,
            proposal,
            n_samples: self.n_samples.unwrap_or(64),
            n_particles: self.n_particles.unwrap_or(250),
            iterations: self.iterations.unwrap_or(15),
            observations: self.observations.unwrap_or(match model {
                ModelKind::Lgssm => 500,
                ModelKind::Sir => 35,
            }),
            step_size: self.step_size.unwrap_or(default_step_size(model, proposal)),
            seed: self.seed.unwrap_or(1),
            data_seed: self.data_seed.unwrap_or(1),
            workers: self.workers.unwrap_or(1),
            mc_runs: self.mc_runs.unwrap_or(5),
            obs_std: self.obs_std.unwrap_or(1.0),
            data: self.data,
            out: self.out.unwrap_or_else(|| PathBuf::from("results")),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Hand-tuned step sizes of the reference experiments.
pub fn default_step_size(model: ModelKind, proposal: ProposalChoice) -> f64 {
    match (model, proposal) {
        (ModelKind::Lgssm, ProposalChoice::Rw) => 0.175,
        (ModelKind::Lgssm, ProposalChoice::FirstOrder) => 0.085,
        (ModelKind::Sir, ProposalChoice::Rw) => 0.01,
        (ModelKind::Sir, ProposalChoice::FirstOrder) => 0.006,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub proposal: ProposalChoice,
    pub n_samples: usize,
    pub n_particles: usize,
    pub iterations: usize,
    pub observations: usize,
    pub step_size: f64,
    pub seed: u64,
    pub data_seed: u64,
    pub workers: usize,
    pub mc_runs: usize,
    pub obs_std: f64,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field, message: String| Err(ConfigError::Invalid { field, message });
        if self.n_samples < 2 || !self.n_samples.is_power_of_two() {
            return bad("n-samples", format!("must be a power of two ≥ 2, got {}", self.n_samples));
        }
        if self.workers == 0 || !self.workers.is_power_of_two() {
            return bad("workers", format!("must be a power of two ≥ 1, got {}", self.workers));
        }
        if self.workers > self.n_samples {
            return bad("workers", format!("{} workers exceed the {} samples", self.workers, self.n_samples));
        }
        if self.n_particles < 2 {
            return bad("n-particles", format!("must be ≥ 2, got {}", self.n_particles));
        }
        if self.iterations < 1 {
            return bad("iterations", "must be ≥ 1, got 0".into());
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step-size", format!("must be positive and finite, got {}", self.step_size));
        }
        if self.mc_runs < 1 {
            return bad("mc-runs", "must be ≥ 1, got 0".into());
        }
        if self.observations < 1 {
            return bad("observations", "must be ≥ 1, got 0".into());
        }
        if !(self.obs_std > 0.0 && self.obs_std.is_finite()) {
            return bad("obs-std", format!("must be positive and finite, got {}", self.obs_std));
        }
        Ok(())
    }

    pub fn sampler_config<const D: usize>(&self, seed: u64, truth: Option<[f64; D]>) -> crn_smc::RunConfig<D> {
        crn_smc::RunConfig {
            n_samples: self.n_samples,
            n_particles: self.n_particles,
            iterations: self.iterations,
            step_size: self.step_size,
            proposal: self.proposal.into(),
            seed,
            truth,
        }
    }
}
