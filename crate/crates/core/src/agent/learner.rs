//! The training loop: one simulator step and one round of updates per call.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::critics::CriticSet;
use super::policy::PolicyHead;
use super::target::MixedTargetConfig;
use super::updates::{advantage_weighted_update, policy_update, q_update, Temperature};
use crate::backbones::{value_update, BackboneSpec};
use crate::data::{Batch, Domain, OfflineDataset, ReplayBuffer, Transition, DEFAULT_CAPACITY};
use crate::envs::{DynamicsPerturbation, RobotEnv, TaskSpec};
use crate::error::{Error, Result};
use crate::numcore::{stack_rows, ApproximatorParams, DEFAULT_HIDDEN};
use crate::ratio::{DiscriminatorPair, RatioConfig};
use crate::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Offline data, perturbed simulator, mixed target and ratio reweighting.
    Hybrid,
    /// Soft actor-critic in the perturbed simulator only.
    Sac,
    /// In-sample learning on the offline dataset, no interaction.
    IqlOffline,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::Hybrid => "hybrid",
            Mode::Sac => "sac",
            Mode::IqlOffline => "iql-offline",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "hybrid" => Some(Mode::Hybrid),
            "sac" => Some(Mode::Sac),
            "iql-offline" => Some(Mode::IqlOffline),
            _ => None,
        }
    }

    pub fn uses_dataset(self) -> bool {
        self != Mode::Sac
    }

    pub fn uses_simulator(self) -> bool {
        self != Mode::IqlOffline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub mode: Mode,
    pub target: MixedTargetConfig,
    pub backbone: BackboneSpec,
    pub ratio: RatioConfig,
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub value_lr: f64,
    pub temperature_lr: f64,
    pub initial_beta: f64,
    /// Multiplies every reward before it enters a target.
    pub reward_scale: f64,
    /// Uniform-random exploration steps before the first update.
    pub random_steps: usize,
    pub awr_temperature: f64,
    pub awr_max_weight: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Hybrid,
            target: MixedTargetConfig::default(),
            backbone: BackboneSpec::default(),
            ratio: RatioConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            batch_size: 256,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            value_lr: 3e-4,
            temperature_lr: 3e-4,
            initial_beta: 1.0,
            reward_scale: 1.0,
            random_steps: 1_000,
            awr_temperature: 3.0,
            awr_max_weight: 100.0,
        }
    }
}

impl LearnerConfig {
    /// The target configuration after the mode's overrides.
    pub fn effective_target(&self) -> MixedTargetConfig {
        let mut t = self.target;
        match self.mode {
            Mode::Hybrid => {}
            Mode::Sac => {
                t.lambda = 0.0;
                t.use_ratio = false;
                t.offline_fraction = 0.0;
            }
            Mode::IqlOffline => {
                t.lambda = 1.0;
                t.use_ratio = false;
                t.offline_fraction = 1.0;
            }
        }
        t
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        self.target.validate()?;
        self.backbone.validate()?;
        self.ratio.validate()?;
        if self.batch_size == 0 {
            return Err("batch_size must be positive".into());
        }
        if self.hidden.contains(&0) {
            return Err("hidden widths must be positive".into());
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("value_lr", self.value_lr),
            ("temperature_lr", self.temperature_lr),
            ("initial_beta", self.initial_beta),
            ("reward_scale", self.reward_scale),
            ("awr_temperature", self.awr_temperature),
            ("awr_max_weight", self.awr_max_weight),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Offline and simulated rows per update batch.
    pub fn split(&self) -> (usize, usize) {
        let t = self.effective_target();
        let n_d = (t.offline_fraction * self.batch_size as f64).round() as usize;
        (n_d, self.batch_size - n_d)
    }
}

/// Independent sub-streams of the run seed, one per consumer, so that
/// switching a component off never shifts the draws of the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    PolicyInit = 1,
    CriticInit,
    ValueInit,
    DiscriminatorInit,
    Env,
    Explore,
    Batch,
    Target,
    PolicyNoise,
    DiscriminatorNoise,
    Eval,
}

pub fn stream_rng(seed: u64, stream: Stream) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// One row of training metrics. Quantities that a mode does not compute are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMetrics {
    pub step: u64,
    pub q_loss: Option<f64>,
    pub v_loss: Option<f64>,
    pub pi_loss: Option<f64>,
    pub beta: f64,
    pub ratio_mean: Option<f64>,
    pub ratio_max: Option<f64>,
    pub ratio_min: Option<f64>,
}

#[derive(Debug, Clone)]
struct Streams {
    env: SimRng,
    explore: SimRng,
    batch: SimRng,
    target: SimRng,
    policy: SimRng,
    discriminator: SimRng,
}

#[derive(Debug, Clone)]
pub struct Learner {
    pub config: LearnerConfig,
    pub spec: TaskSpec,
    pub policy: PolicyHead,
    pub critics: CriticSet,
    pub temperature: Temperature,
    pub discriminators: Option<DiscriminatorPair>,
    pub buffer: ReplayBuffer,
    dataset: Option<OfflineDataset>,
    env: RobotEnv,
    streams: Streams,
    step: u64,
}

impl Learner {
    pub fn new(
        config: LearnerConfig,
        spec: TaskSpec,
        perturbation: DynamicsPerturbation,
        dataset: Option<OfflineDataset>,
        seed: u64,
    ) -> Result<Self> {
        config.validate().map_err(Error::InvalidParams)?;
        perturbation.validate().map_err(Error::InvalidParams)?;
        let (sd, ad) = (spec.state_dim(), spec.action_dim());
        let dataset = if config.mode.uses_dataset() {
            let ds = dataset.ok_or_else(|| {
                Error::InvalidParams(format!("mode {} needs an offline dataset", config.mode.tag()))
            })?;
            if ds.state_dim() != sd || ds.action_dim() != ad {
                return Err(Error::DimensionMismatch {
                    context: "offline dataset state dimension",
                    expected: sd,
                    actual: ds.state_dim(),
                });
            }
            if ds.is_empty() {
                return Err(Error::EmptyBuffer);
            }
            Some(ds)
        } else {
            None
        };

        let hidden = &config.hidden;
        let policy = PolicyHead::init(
            sd,
            ad,
            hidden,
            spec.torque_limit,
            config.actor_lr,
            &mut stream_rng(seed, Stream::PolicyInit),
        )?;
        let mut critics = CriticSet::init(
            sd,
            ad,
            hidden,
            config.critic_lr,
            &mut stream_rng(seed, Stream::CriticInit),
            &mut stream_rng(seed, Stream::ValueInit),
        )?;
        critics.v.opt.learning_rate = config.value_lr;
        let discriminators = match (&dataset, config.effective_target().use_ratio) {
            (Some(ds), true) => Some(DiscriminatorPair::from_dataset(
                ds,
                hidden,
                config.ratio,
                &mut stream_rng(seed, Stream::DiscriminatorInit),
            )?),
            _ => None,
        };
        let mut streams = Streams {
            env: stream_rng(seed, Stream::Env),
            explore: stream_rng(seed, Stream::Explore),
            batch: stream_rng(seed, Stream::Batch),
            target: stream_rng(seed, Stream::Target),
            policy: stream_rng(seed, Stream::PolicyNoise),
            discriminator: stream_rng(seed, Stream::DiscriminatorNoise),
        };
        let mut env = RobotEnv::new(spec, perturbation);
        if config.mode.uses_simulator() {
            env.reset(&mut streams.env);
        }
        Ok(Self {
            temperature: Temperature::new(config.initial_beta, config.temperature_lr),
            config,
            spec,
            policy,
            critics,
            discriminators,
            buffer: ReplayBuffer::new(DEFAULT_CAPACITY),
            dataset,
            env,
            streams,
            step: 0,
        })
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn dataset(&self) -> Option<&OfflineDataset> {
        self.dataset.as_ref()
    }

    /// Every parameter set, keyed by a file-friendly name.
    pub fn networks(&self) -> Vec<(&'static str, &ApproximatorParams)> {
        let mut out = vec![
            ("policy", &self.policy.net.params),
            ("q1", &self.critics.q1.params),
            ("q2", &self.critics.q2.params),
            ("q1_target", &self.critics.q1_target),
            ("q2_target", &self.critics.q2_target),
            ("v", &self.critics.v.params),
        ];
        if let Some(d) = &self.discriminators {
            out.push(("disc_sa", &d.sa_net.params));
            out.push(("disc_sas", &d.sas_net.params));
        }
        out
    }

    /// `(stream name, word position)` for each live random stream.
    pub fn rng_positions(&self) -> Vec<(&'static str, u128)> {
        let s = &self.streams;
        vec![
            ("env", s.env.get_word_pos()),
            ("explore", s.explore.get_word_pos()),
            ("batch", s.batch.get_word_pos()),
            ("target", s.target.get_word_pos()),
            ("policy", s.policy.get_word_pos()),
            ("discriminator", s.discriminator.get_word_pos()),
        ]
    }

    fn act_and_store(&mut self) -> Result<()> {
        let obs = self.env.observation();
        let torque = if (self.step as usize) < self.config.random_steps {
            let lim = self.spec.torque_limit;
            self.streams.explore.random_range(-lim..=lim)
        } else {
            self.policy
                .sample_action(&obs, &mut self.streams.explore, false)?
                .0[0]
        };
        let step = self.env.step(torque, &mut self.streams.env);
        let done = step.done();
        self.buffer.insert(Transition {
            s: step.obs,
            a: vec![step.action],
            r: step.reward,
            s_next: step.next_obs,
            terminal: step.terminal,
            domain: Domain::Sim,
        })?;
        if done {
            self.env.reset(&mut self.streams.env);
        }
        Ok(())
    }

    /// One environment step followed by, in order: discriminator, value,
    /// critic, policy and temperature updates and the target-network average.
    pub fn train_step(&mut self) -> Result<StepMetrics> {
        let target_cfg = self.config.effective_target();
        let mode = self.config.mode;
        if mode.uses_simulator() {
            self.act_and_store()?;
        }
        let step_index = self.step;
        self.step += 1;
        let mut m = StepMetrics {
            step: self.step,
            q_loss: None,
            v_loss: None,
            pi_loss: None,
            beta: self.temperature.beta(),
            ratio_mean: None,
            ratio_max: None,
            ratio_min: None,
        };
        if mode.uses_simulator() && (step_index as usize) < self.config.random_steps {
            return Ok(m);
        }

        let (n_d, n_b) = self.config.split();
        let rng = &mut self.streams.batch;
        let offline: Vec<&Transition> = match &self.dataset {
            Some(ds) if n_d > 0 => ds.sample(n_d, rng)?,
            _ => Vec::new(),
        };
        let sim: Vec<&Transition> = if n_b > 0 {
            self.buffer.sample(n_b, rng)?
        } else {
            Vec::new()
        };

        if let Some(d) = self.discriminators.as_mut() {
            let real = &offline;
            if !real.is_empty() && !sim.is_empty() {
                let _ = d.update(real, &sim, &mut self.streams.discriminator)?;
            }
        }

        if target_cfg.lambda > 0.0 && !offline.is_empty() {
            let loss = value_update(
                &mut self.critics.v,
                &self.critics.q1.params,
                &self.critics.q2.params,
                &offline,
                &self.config.backbone,
            )?;
            m.v_loss = Some(loss);
        }

        let beta = if mode == Mode::IqlOffline {
            0.0
        } else {
            self.temperature.beta()
        };
        let losses = q_update(
            &target_cfg,
            &mut self.critics,
            &self.policy,
            beta,
            self.discriminators.as_ref(),
            &offline,
            &sim,
            self.config.reward_scale,
            &mut self.streams.target,
        )?;
        m.q_loss = Some(losses.mean());
        match (losses.ratio, mode) {
            (Some(r), _) => {
                m.ratio_mean = Some(r.mean);
                m.ratio_max = Some(r.max);
                m.ratio_min = Some(r.min);
            }
            (None, Mode::Hybrid | Mode::Sac) if !sim.is_empty() => {
                m.ratio_mean = Some(1.0);
                m.ratio_max = Some(1.0);
                m.ratio_min = Some(1.0);
            }
            _ => {}
        }

        let mixed: Vec<&Transition> = offline.iter().chain(&sim).copied().collect();
        let states = stack_rows(mixed.iter().map(|t| t.s.as_slice()), self.spec.state_dim());
        if mode == Mode::IqlOffline {
            let batch = Batch::from_transitions(&offline);
            let q = self.critics.min_target(&batch.state_action())?;
            let v = self.critics.v.params.forward_batch(&batch.s.view())?;
            let adv: Vec<f64> = q.iter().zip(v.iter()).map(|(q, v)| q - v).collect();
            m.pi_loss = Some(advantage_weighted_update(
                &mut self.policy,
                &batch.s,
                &batch.a,
                &adv,
                self.config.awr_temperature,
                self.config.awr_max_weight,
            )?);
        } else {
            let out = policy_update(
                &self.critics,
                &mut self.policy,
                beta,
                &states,
                &mut self.streams.policy,
            )?;
            m.pi_loss = Some(out.loss);
            let target_entropy = target_cfg.target_entropy(self.spec.action_dim());
            m.beta = self.temperature.update(&out.log_probs, target_entropy)?;
        }

        self.critics.polyak_update(target_cfg.polyak);
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalStats {
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

impl EvalStats {
    pub fn of(returns: Vec<f64>) -> Self {
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            returns,
        }
    }
}

/// Undiscounted returns of the deterministic policy in the reference environment.
pub fn evaluate<R: Rng + ?Sized>(
    policy: &PolicyHead,
    spec: &TaskSpec,
    n_episodes: usize,
    rng: &mut R,
) -> Result<EvalStats> {
    if n_episodes == 0 {
        return Err(Error::InvalidParams("n_episodes must be at least 1".into()));
    }
    let mut env = RobotEnv::new(*spec, DynamicsPerturbation::REFERENCE);
    let mut returns = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let mut obs = env.reset(rng);
        let mut total = 0.0;
        loop {
            let a = policy
                .mean_actions(&Array2::from_shape_vec((1, obs.len()), obs.clone()).expect("one row"))?;
            let step = env.step(a[[0, 0]], rng);
            total += step.reward;
            if step.done() {
                break;
            }
            obs = step.next_obs;
        }
        returns.push(total);
    }
    Ok(EvalStats::of(returns))
}
