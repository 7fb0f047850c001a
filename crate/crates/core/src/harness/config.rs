//! Run configuration and its flat `dotted.key = value` text form.
//!
//! ```text
//! # comments start with '#'
//! run.mode = hybrid
//! agent.lambda = 0.1
//! env.gravity_scale = 2
//! ```
//!
//! Keys not present keep their defaults. Floats are written in shortest
//! round-trip form, so `parse(serialize(c)) == c` holds exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::agent::{LearnerConfig, Mode};
use crate::backbones::BackboneSpec;
use crate::envs::{DynamicsPerturbation, Task, TaskSpec};
use crate::error::{ConfigError, Error, Result};

pub const DEFAULT_TOTAL_STEPS: u64 = 100_000;
pub const DEFAULT_EVAL_EVERY: u64 = 2_000;
pub const DEFAULT_EVAL_EPISODES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: TaskSpec,
    pub perturbation: DynamicsPerturbation,
    pub learner: LearnerConfig,
    pub dataset: Option<PathBuf>,
    pub total_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: TaskSpec::new(Task::StandingStill),
            perturbation: DynamicsPerturbation::REFERENCE,
            learner: LearnerConfig::default(),
            dataset: None,
            total_steps: DEFAULT_TOTAL_STEPS,
            eval_every: DEFAULT_EVAL_EVERY,
            eval_episodes: DEFAULT_EVAL_EPISODES,
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
        key: key.to_string(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, ConfigError> {
    match value {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            reason: format!("expected true/false, got `{value}`"),
        }),
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// Backbone parameters are kept separately while parsing so that
/// `backbone.kind` may appear before or after its hyperparameter.
#[derive(Debug, Clone, Copy)]
struct BackboneDraft {
    kind: &'static str,
    tau: f64,
    alpha: f64,
}

impl BackboneDraft {
    fn of(spec: BackboneSpec) -> Self {
        let mut d = Self {
            kind: spec.kind(),
            tau: 0.7,
            alpha: 1.0,
        };
        match spec {
            BackboneSpec::Expectile { tau } => d.tau = tau,
            BackboneSpec::Sql { alpha } | BackboneSpec::Eql { alpha } => d.alpha = alpha,
        }
        d
    }

    fn build(self) -> BackboneSpec {
        match self.kind {
            "sql" => BackboneSpec::Sql { alpha: self.alpha },
            "eql" => BackboneSpec::Eql { alpha: self.alpha },
            _ => BackboneSpec::Expectile { tau: self.tau },
        }
    }
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), ConfigError> {
        let mut draft = BackboneDraft::of(self.learner.backbone);
        self.set_with(key, value, &mut draft)?;
        self.learner.backbone = draft.build();
        Ok(())
    }

    fn set_with(
        &mut self,
        key: &str,
        value: &str,
        draft: &mut BackboneDraft,
    ) -> std::result::Result<(), ConfigError> {
        let l = &mut self.learner;
        let p = &mut self.perturbation;
        match key {
            "run.mode" => {
                l.mode =
                    Mode::from_tag(value).ok_or_else(|| invalid(key, format!("unknown mode `{value}`")))?
            }
            "run.seed" => self.seed = parse_num(key, value)?,
            "run.total_steps" => self.total_steps = parse_num(key, value)?,
            "run.eval_every" => self.eval_every = parse_num(key, value)?,
            "run.eval_episodes" => self.eval_episodes = parse_num(key, value)?,
            "run.output_dir" => self.output_dir = PathBuf::from(value),
            "run.dataset" => {
                self.dataset = (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
            }
            "env.task" => {
                let task =
                    Task::from_tag(value).ok_or_else(|| invalid(key, format!("unknown task `{value}`")))?;
                let old = self.task;
                self.task = TaskSpec::new(task);
                self.task.max_steps = old.max_steps;
            }
            "env.target_velocity" => self.task.target_velocity = parse_num(key, value)?,
            "env.max_steps" => self.task.max_steps = parse_num(key, value)?,
            "env.gravity_scale" => p.gravity_scale = parse_num(key, value)?,
            "env.friction_scale" => p.friction_scale = parse_num(key, value)?,
            "env.mass_scale" => p.mass_scale = parse_num(key, value)?,
            "env.actuation_noise_std" => p.actuation_noise_std = parse_num(key, value)?,
            "agent.lambda" => l.target.lambda = parse_num(key, value)?,
            "agent.gamma" => l.target.gamma = parse_num(key, value)?,
            "agent.target_entropy" => {
                l.target.target_entropy = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "agent.polyak" => l.target.polyak = parse_num(key, value)?,
            "agent.use_ratio" => l.target.use_ratio = parse_bool(key, value)?,
            "agent.offline_fraction" => l.target.offline_fraction = parse_num(key, value)?,
            "agent.hidden" => {
                l.hidden = value
                    .split(',')
                    .map(|w| parse_num::<usize>(key, w.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "agent.batch_size" => l.batch_size = parse_num(key, value)?,
            "agent.actor_lr" => l.actor_lr = parse_num(key, value)?,
            "agent.critic_lr" => l.critic_lr = parse_num(key, value)?,
            "agent.value_lr" => l.value_lr = parse_num(key, value)?,
            "agent.temperature_lr" => l.temperature_lr = parse_num(key, value)?,
            "agent.initial_beta" => l.initial_beta = parse_num(key, value)?,
            "agent.reward_scale" => l.reward_scale = parse_num(key, value)?,
            "agent.random_steps" => l.random_steps = parse_num(key, value)?,
            "agent.awr_temperature" => l.awr_temperature = parse_num(key, value)?,
            "agent.awr_max_weight" => l.awr_max_weight = parse_num(key, value)?,
            "backbone.kind" => {
                draft.kind = match value {
                    "expectile" => "expectile",
                    "sql" => "sql",
                    "eql" => "eql",
                    _ => return Err(invalid(key, format!("unknown backbone `{value}`"))),
                }
            }
            "backbone.tau" => draft.tau = parse_num(key, value)?,
            "backbone.alpha" => draft.alpha = parse_num(key, value)?,
            "ratio.clip_low" => l.ratio.clip_low = parse_num(key, value)?,
            "ratio.clip_high" => l.ratio.clip_high = parse_num(key, value)?,
            "ratio.input_noise_std" => l.ratio.input_noise_std = parse_num(key, value)?,
            "ratio.learning_rate" => l.ratio.learning_rate = parse_num(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> std::result::Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut draft = BackboneDraft::of(cfg.learner.backbone);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            }
            cfg.set_with(key, value.trim(), &mut draft)?;
        }
        cfg.learner.backbone = draft.build();
        Ok(cfg)
    }

    pub fn serialize(&self) -> String {
        let l = &self.learner;
        let t = &l.target;
        let p = &self.perturbation;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("run.mode", l.mode.tag().into());
        kv("run.seed", self.seed.to_string());
        kv("run.total_steps", self.total_steps.to_string());
        kv("run.eval_every", self.eval_every.to_string());
        kv("run.eval_episodes", self.eval_episodes.to_string());
        kv("run.output_dir", self.output_dir.display().to_string());
        kv(
            "run.dataset",
            self.dataset
                .as_ref()
                .map_or("none".into(), |d| d.display().to_string()),
        );
        kv("env.task", self.task.task.tag().into());
        kv("env.target_velocity", self.task.target_velocity.to_string());
        kv("env.max_steps", self.task.max_steps.to_string());
        kv("env.gravity_scale", p.gravity_scale.to_string());
        kv("env.friction_scale", p.friction_scale.to_string());
        kv("env.mass_scale", p.mass_scale.to_string());
        kv("env.actuation_noise_std", p.actuation_noise_std.to_string());
        kv("agent.lambda", t.lambda.to_string());
        kv("agent.gamma", t.gamma.to_string());
        kv(
            "agent.target_entropy",
            t.target_entropy.map_or("auto".into(), |v| v.to_string()),
        );
        kv("agent.polyak", t.polyak.to_string());
        kv("agent.use_ratio", t.use_ratio.to_string());
        kv("agent.offline_fraction", t.offline_fraction.to_string());
        kv(
            "agent.hidden",
            l.hidden
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("agent.batch_size", l.batch_size.to_string());
        kv("agent.actor_lr", l.actor_lr.to_string());
        kv("agent.critic_lr", l.critic_lr.to_string());
        kv("agent.value_lr", l.value_lr.to_string());
        kv("agent.temperature_lr", l.temperature_lr.to_string());
        kv("agent.initial_beta", l.initial_beta.to_string());
        kv("agent.reward_scale", l.reward_scale.to_string());
        kv("agent.random_steps", l.random_steps.to_string());
        kv("agent.awr_temperature", l.awr_temperature.to_string());
        kv("agent.awr_max_weight", l.awr_max_weight.to_string());
        kv("backbone.kind", l.backbone.kind().into());
        match l.backbone {
            BackboneSpec::Expectile { tau } => kv("backbone.tau", tau.to_string()),
            BackboneSpec::Sql { alpha } | BackboneSpec::Eql { alpha } => {
                kv("backbone.alpha", alpha.to_string())
            }
        }
        kv("ratio.clip_low", l.ratio.clip_low.to_string());
        kv("ratio.clip_high", l.ratio.clip_high.to_string());
        kv("ratio.input_noise_std", l.ratio.input_noise_std.to_string());
        kv("ratio.learning_rate", l.ratio.learning_rate.to_string());
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text)?)
    }

    /// Hex SHA-256 of the serialized form, leaving out the output directory
    /// so that the same experiment hashes the same wherever it is written.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for line in self
            .serialize()
            .lines()
            .filter(|l| !l.starts_with("run.output_dir"))
        {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Semantic checks beyond syntax. File existence is checked at launch.
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        self.learner.validate().map_err(|r| invalid("agent", r))?;
        self.perturbation.validate().map_err(|r| invalid("env", r))?;
        if self.eval_every == 0 {
            return Err(invalid("run.eval_every", "must be positive"));
        }
        if self.eval_episodes == 0 {
            return Err(invalid("run.eval_episodes", "must be positive"));
        }
        if self.task.max_steps == 0 {
            return Err(invalid("env.max_steps", "must be positive"));
        }
        if self.learner.mode.uses_dataset() && self.dataset.is_none() {
            return Err(ConfigError::MissingKey("run.dataset".into()));
        }
        Ok(())
    }
}

/// Output root override: relative output directories resolve against this variable when set.
pub const OUTPUT_ROOT_ENV: &str = "HYBRIDRL_OUTPUT_ROOT";

pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}
