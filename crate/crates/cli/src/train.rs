//! Seeded multi-run training.

use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use rl_lab_core::ppo::Trainer;

use crate::config::RunConfig;
use crate::curves::{aggregate, write_curve, CurveRow, CurveWriter};
use crate::error::{runtime, CliError, CliResult};

pub fn seed_file(cfg: &RunConfig, seed: u64) -> String {
    format!("{}_{}_seed{seed}.csv", cfg.algo(), cfg.env)
}

pub fn merged_file(cfg: &RunConfig) -> String {
    format!("{}_{}.csv", cfg.algo(), cfg.env)
}

/// Paths written by a successful [`run_training`].
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub per_seed: Vec<PathBuf>,
    pub merged: PathBuf,
}

fn run_seed(cfg: &RunConfig, seed: u64, path: &Path, record_wall_time: bool) -> CliResult<Vec<CurveRow>> {
    let mut writer = CurveWriter::create(path)?;
    let mut trainer =
        Trainer::for_env(cfg.penalty.clone(), cfg.env, seed).map_err(|e| runtime(format!("seed {seed}: {e}")))?;
    let mut rows = Vec::with_capacity(cfg.iterations);
    let mut io_err: Option<CliError> = None;
    let res = trainer.run(cfg.iterations, |rec| {
        let row = CurveRow::from_record(rec, record_wall_time);
        if let Err(e) = writer.push(&row) {
            io_err = Some(e);
            return Err(rl_lab_core::Error::InvalidArgument("csv write failed".into()));
        }
        rows.push(row);
        Ok(())
    });
    if let Some(e) = io_err {
        return Err(e);
    }
    res.map_err(|e| runtime(format!("seed {seed}: {e}")))?;
    writer.finish()?;
    info!("seed {seed}: wrote {}", path.display());
    Ok(rows)
}

/// Trains every seed on a pool of `jobs` threads, writing per-seed CSVs as
/// rows arrive and the merged CSV once all seeds have finished. On failure
/// the per-seed files written so far are left in place.
pub fn run_training(cfg: &RunConfig, out_dir: &Path, jobs: usize, record_wall_time: bool) -> CliResult<TrainOutputs> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| runtime(e.to_string()))?;
    let per_seed: Vec<PathBuf> = cfg.seeds.iter().map(|&s| out_dir.join(seed_file(cfg, s))).collect();
    let results: Vec<CliResult<Vec<CurveRow>>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .zip(per_seed.par_iter())
            .map(|(&seed, path)| run_seed(cfg, seed, path, record_wall_time))
            .collect()
    });
    let curves = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    let merged = out_dir.join(merged_file(cfg));
    write_curve(&merged, &aggregate(&curves)?)?;
    Ok(TrainOutputs { per_seed, merged })
}
