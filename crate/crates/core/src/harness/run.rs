//! A single training run and its directory:
//!
//! ```text
//! <dir>/config.txt      resolved configuration
//! <dir>/metrics.jsonl   one record per train step and per evaluation
//! <dir>/checkpoint/     final network parameters and manifest.json
//! <dir>/COMPLETE        written last
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::metrics::{final_score, read_metrics, MetricsRecord, MetricsWriter};
use crate::agent::{evaluate, stream_rng, EvalStats, Learner, PolicyHead, Stream};
use crate::data::OfflineDataset;
use crate::error::{Error, Result};
use crate::numcore::{checkpoint, Trainable};

pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMPLETE_MARKER: &str = "COMPLETE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub step: u64,
    pub networks: Vec<String>,
    /// Word position of each random stream, as decimal strings.
    pub rng: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub final_score: Option<f64>,
}

pub fn is_complete(dir: &Path) -> bool {
    dir.join(COMPLETE_MARKER).is_file()
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Option<OfflineDataset>> {
    if !cfg.learner.mode.uses_dataset() {
        return Ok(None);
    }
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("run.dataset is required for this mode".into()))?;
    if !path.is_file() {
        return Err(Error::InvalidParams(format!(
            "dataset {} does not exist",
            path.display()
        )));
    }
    OfflineDataset::load_expecting(path, cfg.task.state_dim(), cfg.task.action_dim()).map(Some)
}

/// Trains to completion in `dir`, replacing any partial contents.
pub fn run_training(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let ckpt = dir.join(CHECKPOINT_DIR);
    std::fs::create_dir_all(&ckpt).map_err(|e| Error::io(&ckpt, e))?;
    write(&dir.join(CONFIG_FILE), cfg.serialize())?;

    let mut learner = Learner::new(cfg.learner.clone(), cfg.task, cfg.perturbation, dataset, cfg.seed)?;
    let mut eval_rng = stream_rng(cfg.seed, Stream::Eval);
    let metrics_path = dir.join(METRICS_FILE);
    let mut out = MetricsWriter::create(&metrics_path)?;
    let io = |e| Error::io(&metrics_path, e);
    let mut last_eval = None;
    for _ in 0..cfg.total_steps {
        let m = learner.train_step()?;
        out.write(&MetricsRecord::train(&m)).map_err(io)?;
        if m.step % cfg.eval_every == 0 || m.step == cfg.total_steps {
            let e = evaluate(&learner.policy, &cfg.task, cfg.eval_episodes, &mut eval_rng)?;
            out.write(&MetricsRecord::eval(m.step, &e)).map_err(io)?;
            last_eval = Some(m.step);
        }
    }
    if last_eval.is_none() {
        let e = evaluate(&learner.policy, &cfg.task, cfg.eval_episodes, &mut eval_rng)?;
        out.write(&MetricsRecord::eval(learner.steps_done(), &e))
            .map_err(io)?;
    }
    out.finish().map_err(io)?;

    let mut names = Vec::new();
    for (name, params) in learner.networks() {
        checkpoint::save(params, &ckpt.join(format!("{name}.params")))?;
        names.push(name.to_string());
    }
    let manifest = Manifest {
        config_hash: cfg.hash(),
        step: learner.steps_done(),
        networks: names,
        rng: learner
            .rng_positions()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    };
    write(
        &ckpt.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    let score = final_score(&read_metrics(&metrics_path)?);
    write(&dir.join(COMPLETE_MARKER), format!("{}\n", cfg.hash()))?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        final_score: score,
    })
}

/// Like [`run_training`], but a directory that already holds a completion
/// marker is left untouched and its recorded score returned.
pub fn run_or_resume(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    if is_complete(dir) {
        return Ok(RunOutcome {
            dir: dir.to_path_buf(),
            final_score: completed_score(dir)?,
        });
    }
    run_training(cfg, dir)
}

/// Final score of a completed run directory.
pub fn completed_score(dir: &Path) -> Result<Option<f64>> {
    Ok(final_score(&read_metrics(&dir.join(METRICS_FILE))?))
}

/// Configuration and trained policy of a run directory.
pub fn load_policy(dir: &Path) -> Result<(RunConfig, PolicyHead)> {
    let cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let params = checkpoint::load(&dir.join(CHECKPOINT_DIR).join("policy.params"))?;
    let policy = PolicyHead::new(
        Trainable::new(params, cfg.learner.actor_lr),
        cfg.task.action_dim(),
        cfg.task.torque_limit,
    )?;
    Ok((cfg, policy))
}

pub fn evaluate_run(dir: &Path, episodes: usize, seed: u64) -> Result<EvalStats> {
    let (cfg, policy) = load_policy(dir)?;
    evaluate(&policy, &cfg.task, episodes, &mut stream_rng(seed, Stream::Eval))
}
