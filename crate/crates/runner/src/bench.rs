//! Strong-scaling benchmark: one sampler run per worker count.

use std::path::Path;
use std::thread;
use std::time::Instant;

use anyhow::{bail, Result};
use crn_smc::models::{Lgssm, Sir};
use crn_smc::StateSpaceModel;
use serde::Serialize;

use crate::config::{ExperimentConfig, ModelKind};
use crate::experiment::{load_dataset, replicate_seed, run_replicate, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    #[serde(rename = "P")]
    pub p: usize,
    pub runtime_s: f64,
    pub speedup: f64,
}

pub fn available_workers() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

/// Keeps the worker counts that are powers of two, fit the sample count and
/// do not exceed `limit`. Returns the kept list and the dropped ones.
pub fn plan_workers(requested: &[usize], n_samples: usize, limit: usize) -> (Vec<usize>, Vec<usize>) {
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for &p in requested {
        if p >= 1 && p.is_power_of_two() && p <= n_samples && p <= limit {
            if !kept.contains(&p) {
                kept.push(p);
            }
        } else {
            dropped.push(p);
        }
    }
    kept.sort_unstable();
    (kept, dropped)
}

/// `1, 2, 4, …` up to `limit`.
pub fn doubling_up_to(limit: usize) -> Vec<usize> {
    (0..usize::BITS).map(|b| 1usize << b).take_while(|&p| p <= limit).collect()
}

fn time_runs<M: StateSpaceModel<D>, const D: usize>(
    model: &M,
    cfg: &ExperimentConfig,
    data: &Dataset,
    workers: &[usize],
) -> Result<Vec<ScalingRow>> {
    let run_cfg = cfg.sampler_config::<D>(replicate_seed(cfg.seed, 0), None);
    let mut rows: Vec<ScalingRow> = Vec::new();
    for &p in workers {
        let start = Instant::now();
        run_replicate(model, &data.y, &run_cfg, p)?;
        let runtime_s = start.elapsed().as_secs_f64();
        let base = rows.first().map_or(runtime_s, |r| r.runtime_s);
        rows.push(ScalingRow { p, runtime_s, speedup: base / runtime_s });
    }
    Ok(rows)
}

/// Times one run for each worker count. The list must start at 1 so that
/// speedups are relative to the serial run.
pub fn bench_scaling(cfg: &ExperimentConfig, workers: &[usize]) -> Result<Vec<ScalingRow>> {
    if workers.first() != Some(&1) {
        bail!("the worker list must start with 1");
    }
    let data = load_dataset(cfg)?;
    match cfg.model {
        ModelKind::Lgssm => time_runs(&Lgssm::default(), cfg, &data, workers),
        ModelKind::Sir => time_runs(&Sir::new(cfg.obs_std), cfg, &data, workers),
    }
}

pub fn write_scaling(rows: &[ScalingRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
