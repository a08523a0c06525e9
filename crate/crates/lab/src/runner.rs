//! Executes single runs and sweeps, writing one directory per run:
//! `<out>/<method>/rho_<rho>/seed_<seed>/`.

use std::path::{Path, PathBuf};

use nmps_core::envs::Env;
use nmps_core::pipeline::{finetune, pretrain, skill_accuracy, Method, PretrainOutput, SnapshotAgent};
use nmps_core::policy::PolicyConfig;
use nmps_core::rng::{stream, Stream};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{io_err, LabError, Result};
use crate::records::{
    write_evals, write_steps, EvalRow, Manifest, CONFIG_FILE, EVALS_FILE, EVALS_SCHEMA_VERSION, MANIFEST_FILE,
    MANIFEST_VERSION, SNAPSHOT_FILE, STATUS_COMPLETE, STEPS_FILE, STEPS_SCHEMA_VERSION,
};
use crate::snapshot_io;

/// Episodes per skill when measuring skill accuracy.
pub const SKILL_EPISODES: usize = 10;

/// Directory-safe method name: `^` becomes `-`, `*` becomes `star`.
pub fn method_slug(name: &str) -> String {
    name.replace('^', "-").replace('*', "star")
}

pub fn run_dir(out: &Path, method: &str, rho: f64, seed: u64) -> PathBuf {
    out.join(method_slug(method))
        .join(format!("rho_{rho}"))
        .join(format!("seed_{seed}"))
}

/// One unit of work.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub method: String,
    pub rho: f64,
    pub seed: u64,
}

/// Skill recovery of whichever discriminator the run trained.
fn measure_skills(out: &PretrainOutput, env: &Env, temperature: f64, seed: u64) -> Result<Option<f64>> {
    let pair = match (&out.final_agent, &out.explorer) {
        (SnapshotAgent::Skill { discriminator, q, .. }, _) => Some((discriminator, q)),
        (_, Some(ex)) => ex.discriminator().map(|d| (d, &ex.q)),
        _ => None,
    };
    let Some((disc, q)) = pair else { return Ok(None) };
    let mut rng = stream(seed, Stream::Eval);
    Ok(Some(skill_accuracy(
        disc,
        q,
        env,
        PolicyConfig::boltzmann(temperature),
        SKILL_EPISODES,
        &mut rng,
    )?))
}

/// Runs one job to completion and returns its manifest. A stale manifest is
/// removed first so an interrupted rerun never looks complete.
pub fn run_job(cfg: &RunConfig, job: &Job, out: &Path) -> Result<Manifest> {
    let method = cfg.parse_method("method", &job.method)?;
    let spec = cfg.env_spec()?;
    let env = Env::new(spec)?;
    let pre = cfg.pretrain.to_core(job.rho)?;
    let ft = if cfg.finetune.enabled {
        Some(cfg.finetune.to_core()?)
    } else {
        None
    };

    let dir = run_dir(out, &job.method, job.rho, job.seed);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        std::fs::remove_file(&manifest_path).map_err(io_err(&manifest_path))?;
    }
    let mut echo = cfg.clone();
    echo.method = job.method.clone();
    echo.rho = job.rho;
    echo.seed = job.seed;
    let config_path = dir.join(CONFIG_FILE);
    std::fs::write(&config_path, echo.to_toml()).map_err(io_err(&config_path))?;

    let run = pretrain(&method, &env, &pre, job.seed)?;
    write_steps(&dir.join(STEPS_FILE), &run.log)?;
    snapshot_io::write(&dir.join(SNAPSHOT_FILE), &run.snapshot)?;

    let (rows, final_return, fit_r2) = match &ft {
        Some(ft) => {
            let f = finetune(&run.snapshot, &env, ft, job.seed)?;
            let rows: Vec<EvalRow> = f.curve.iter().map(EvalRow::from).collect();
            (rows, Some(f.final_return()), f.fit_r_squared)
        }
        None => (Vec::new(), None, None),
    };
    write_evals(&dir.join(EVALS_FILE), &rows)?;

    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        steps_schema: STEPS_SCHEMA_VERSION,
        evals_schema: EVALS_SCHEMA_VERSION,
        snapshot_format: run.snapshot.format_version,
        method: method.name(),
        env: spec.name().to_string(),
        task: spec.task.name().to_string(),
        rho: job.rho,
        seed: job.seed,
        status: STATUS_COMPLETE.into(),
        pretrain_steps: pre.total_steps,
        snapshot_step: run.snapshot.meta.step,
        coverage: run.stats.coverage,
        explore_fraction: run.stats.explore_fraction,
        window_starts: run.stats.window_starts,
        updates: run.stats.updates,
        exploit_entropy: run.stats.exploit_entropy,
        explor_entropy: run.stats.explor_entropy,
        skill_accuracy: measure_skills(&run, &env, pre.diayn_temperature, job.seed)?,
        final_return,
        fit_r2,
    };
    manifest.write(&manifest_path)?;
    Ok(manifest)
}

/// Runs the configuration's own method, ρ and seed.
pub fn run_single(cfg: &RunConfig) -> Result<(PathBuf, Manifest)> {
    cfg.validate()?;
    let out = cfg.out_dir();
    let job = Job {
        method: cfg.method.clone(),
        rho: cfg.rho,
        seed: cfg.seed,
    };
    let manifest = run_job(cfg, &job, &out)?;
    Ok((run_dir(&out, &job.method, job.rho, job.seed), manifest))
}

/// Sweep jobs in a fixed order. Baselines have no controller, so they run
/// once per seed at the first listed ρ.
pub fn sweep_jobs(cfg: &RunConfig) -> Result<Vec<Job>> {
    let mut jobs = Vec::new();
    for name in &cfg.sweep.methods {
        let method = cfg.parse_method("sweep.methods", name)?;
        let rhos: &[f64] = match method {
            Method::Nmps(_) => &cfg.sweep.rhos,
            Method::Baseline(_) => &cfg.sweep.rhos[..1],
        };
        for &rho in rhos {
            for &seed in &cfg.sweep.seeds {
                jobs.push(Job {
                    method: name.clone(),
                    rho,
                    seed,
                });
            }
        }
    }
    Ok(jobs)
}

/// Runs every sweep job on a pool of `sweep.workers` threads. Each job's
/// outcome is returned in job order; one failure does not stop the others.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<(Job, Result<Manifest>)>> {
    cfg.validate()?;
    let jobs = sweep_jobs(cfg)?;
    let out = cfg.out_dir();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.sweep.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| LabError::Other(e.to_string()))?;
    let results = pool.install(|| jobs.par_iter().map(|j| run_job(cfg, j, &out)).collect::<Vec<_>>());
    Ok(jobs.into_iter().zip(results).collect())
}
