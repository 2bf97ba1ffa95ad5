//! TD3 learner in three flavours.
//!
//! * `Classical`: plain TD3, actions clipped to the global box only.
//! * `Efficient`: actions saturated onto rule bounds, and the actor ascends
//!   `Q(s, pi(s)) - lambda/2 * (pi(s) - clip(pi(s), a_min(s), a_max(s)))^2`
//!   where the clipped action is held constant while differentiating.
//! * `RewardShaping`: the same saturation, but the quadratic penalty is
//!   subtracted from the reward stored in the replay buffer and the actor
//!   uses the classical gradient.

mod buffer;
mod checkpoint;

pub use buffer::{ReplayBuffer, Transition};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{polyak_update, Activation, Adam, AdamConfig, Gradients, Matrix, Network};
use crate::rules::{clip_scalar, constrain_action, ActionBounds, ActionSpace, RuleProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "classical")]
    Classical,
    #[serde(rename = "ea")]
    Efficient,
    #[serde(rename = "rs")]
    RewardShaping,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Classical => "classical",
            Variant::Efficient => "ea",
            Variant::RewardShaping => "rs",
        }
    }

    /// Whether actions are saturated onto the rule bounds.
    pub fn uses_rules(self) -> bool {
        !matches!(self, Variant::Classical)
    }

    pub fn default_lambda(self) -> f64 {
        match self {
            Variant::Classical => 0.0,
            Variant::Efficient => 100.0,
            Variant::RewardShaping => 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub variant: Variant,
    pub gamma: f64,
    /// Exploration noise std in action units.
    pub sigma: f64,
    /// Penalty weight; `None` picks the variant default.
    pub lambda: Option<f64>,
    pub tau: f64,
    pub policy_delay: u32,
    pub target_noise_std: f64,
    pub target_noise_clip: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub actor_learning_rate: f64,
    pub critic_learning_rate: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Classical,
            gamma: 0.99,
            sigma: 0.1,
            lambda: None,
            tau: 0.005,
            policy_delay: 2,
            target_noise_std: 0.2,
            target_noise_clip: 0.5,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            hidden: vec![64, 64],
            actor_learning_rate: 1e-4,
            critic_learning_rate: 1e-3,
        }
    }
}

impl AgentConfig {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or_else(|| self.variant.default_lambda())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("agent.gamma", "must lie in (0, 1)"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("agent.sigma", "must be finite and >= 0"));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::config("agent.lambda", "must be finite and >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::config("agent.tau", "must lie in [0, 1]"));
        }
        if self.policy_delay == 0 {
            return Err(Error::config("agent.policy_delay", "must be >= 1"));
        }
        if !(self.target_noise_std >= 0.0 && self.target_noise_clip >= 0.0) {
            return Err(Error::config(
                "agent.target_noise_std",
                "target smoothing must be >= 0",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::config("agent.batch_size", "must be >= 1"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::config(
                "agent.buffer_capacity",
                "must be >= batch_size",
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("agent.hidden", "layer widths must be >= 1"));
        }
        for (key, lr) in [
            ("agent.actor_learning_rate", self.actor_learning_rate),
            ("agent.critic_learning_rate", self.critic_learning_rate),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::config(key, "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

/// `r - lambda/2 * ||raw - applied||^2`.
pub fn shaped_reward(reward: f64, raw: &[f64], applied: &[f64], lambda: f64) -> f64 {
    let sq: f64 = raw
        .iter()
        .zip(applied)
        .map(|(r, a)| (r - a) * (r - a))
        .sum();
    reward - 0.5 * lambda * sq
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionChoice {
    pub applied: Vec<f64>,
    pub raw: Vec<f64>,
    pub bounds: ActionBounds,
    pub saturated: Vec<bool>,
}

/// What one critic step did, kept for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct CriticReport {
    pub losses: [f64; 2],
    /// TD targets `y`, one per batch row.
    pub targets: Vec<f64>,
    /// Rewards that entered `y`.
    pub rewards: Vec<f64>,
    /// `min(Q1', Q2')(s', a')` per row.
    pub bootstrap: Vec<f64>,
    /// Smoothed target actions `a'`.
    pub target_actions: Matrix,
}

#[derive(Debug, Clone)]
pub struct ActorReport {
    /// Minimized loss: `-mean Q + mean penalty`.
    pub loss: f64,
    /// Mean of `lambda/2 * e^2` over the batch.
    pub penalty: f64,
    /// Fraction of action components outside their bounds.
    pub saturation_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct ActorGradient {
    pub grads: Gradients,
    pub report: ActorReport,
}

#[derive(Debug, Clone)]
pub struct UpdateReport {
    pub critic: CriticReport,
    pub actor: Option<ActorReport>,
}

/// Online and target networks plus their optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    config: AgentConfig,
    space: ActionSpace,
    obs_dim: usize,
    actor: Network,
    actor_target: Network,
    critics: [Network; 2],
    critic_targets: [Network; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    critic_updates: u64,
    actor_updates: u64,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        space: ActionSpace,
        config: AgentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let act = space.dim();
        let actor = Network::mlp(obs_dim, &config.hidden, act, Activation::Tanh, rng);
        let c1 = Network::mlp(obs_dim + act, &config.hidden, 1, Activation::Identity, rng);
        let c2 = Network::mlp(obs_dim + act, &config.hidden, 1, Activation::Identity, rng);
        let actor_opt = Adam::new(
            &actor,
            AdamConfig::with_learning_rate(config.actor_learning_rate),
        );
        let critic_cfg = AdamConfig::with_learning_rate(config.critic_learning_rate);
        let critic_opts = [Adam::new(&c1, critic_cfg), Adam::new(&c2, critic_cfg)];
        Ok(Self {
            actor_target: actor.clone(),
            critic_targets: [c1.clone(), c2.clone()],
            actor,
            critics: [c1, c2],
            actor_opt,
            critic_opts,
            config,
            space,
            obs_dim,
            critic_updates: 0,
            actor_updates: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn actor(&self) -> &Network {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Network {
        &mut self.actor
    }

    pub fn critics(&self) -> &[Network; 2] {
        &self.critics
    }

    pub fn critics_mut(&mut self) -> &mut [Network; 2] {
        &mut self.critics
    }

    pub fn actor_target(&self) -> &Network {
        &self.actor_target
    }

    pub fn critic_targets(&self) -> &[Network; 2] {
        &self.critic_targets
    }

    pub fn critic_targets_mut(&mut self) -> &mut [Network; 2] {
        &mut self.critic_targets
    }

    pub fn actor_target_mut(&mut self) -> &mut Network {
        &mut self.actor_target
    }

    pub fn critic_updates(&self) -> u64 {
        self.critic_updates
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    /// Deterministic policy output `pi(s)` for a batch of observations.
    pub fn policy(&self, obs: &Matrix) -> Result<Matrix> {
        self.actor.forward_batch(obs)
    }

    /// Bounds that apply to this agent in `state`.
    pub fn bounds_for<S, R>(&self, state: &S, rule: &R) -> ActionBounds
    where
        S: ?Sized,
        R: RuleProvider<S> + ?Sized,
    {
        if self.config.variant.uses_rules() {
            rule.bounds(state)
        } else {
            self.space.full_bounds()
        }
    }

    /// `clip(pi(s) + eps, bounds)` with `eps ~ N(0, sigma)`. With `sigma = 0`
    /// no randomness is drawn and this is the test-time policy.
    pub fn select_action<S, P, R>(
        &self,
        obs: &[f64],
        state: &S,
        sigma: f64,
        rule: &P,
        rng: &mut R,
    ) -> Result<ActionChoice>
    where
        S: ?Sized,
        P: RuleProvider<S> + ?Sized,
        R: Rng + ?Sized,
    {
        let mut raw = self.actor.forward(obs)?;
        if sigma > 0.0 {
            for v in &mut raw {
                *v += sigma * gaussian(rng);
            }
        }
        let bounds = self.bounds_for(state, rule);
        debug_assert!(bounds.nested_in(&self.space));
        let c = constrain_action(&raw, &bounds);
        Ok(ActionChoice {
            applied: c.applied,
            raw,
            bounds,
            saturated: c.saturated,
        })
    }

    /// Fills a transition's stored reward according to the variant.
    pub fn learning_reward(&self, env_reward: f64, raw: &[f64], applied: &[f64]) -> f64 {
        match self.config.variant {
            Variant::RewardShaping => shaped_reward(env_reward, raw, applied, self.config.lambda()),
            Variant::Classical | Variant::Efficient => env_reward,
        }
    }

    fn stack<'a, F>(batch: &[&'a Transition], f: F) -> Result<Matrix>
    where
        F: Fn(&'a Transition) -> &'a [f64],
    {
        let rows: Vec<&[f64]> = batch.iter().map(|t| f(t)).collect();
        Matrix::from_rows(&rows)
    }

    /// TD3 critic step on both critics against the shared target
    /// `y = r + gamma (1 - done) min(Q1', Q2')(s', clip(pi'(s') + noise))`.
    pub fn critic_update<R: Rng + ?Sized>(
        &mut self,
        batch: &[&Transition],
        rng: &mut R,
    ) -> Result<CriticReport> {
        if batch.is_empty() {
            return Err(Error::Usage("critic update on an empty batch".into()));
        }
        let n = batch.len();
        let next_obs = Self::stack(batch, |t| &t.next_obs)?;
        let mut target_actions = self.actor_target.forward_batch(&next_obs)?;
        let c = self.config.target_noise_clip;
        let (low, high) = (self.space.low(), self.space.high());
        for r in 0..n {
            for (j, a) in target_actions.row_mut(r).iter_mut().enumerate() {
                let noise = if self.config.target_noise_std > 0.0 {
                    clip_scalar(self.config.target_noise_std * gaussian(rng), -c, c)
                } else {
                    0.0
                };
                *a = clip_scalar(*a + noise, low[j], high[j]);
            }
        }
        let next_in = next_obs.hconcat(&target_actions)?;
        let q1 = self.critic_targets[0].forward_batch(&next_in)?;
        let q2 = self.critic_targets[1].forward_batch(&next_in)?;

        let mut targets = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut bootstrap = Vec::with_capacity(n);
        for (i, t) in batch.iter().enumerate() {
            let b = q1.data()[i].min(q2.data()[i]);
            let cont = if t.done { 0.0 } else { 1.0 };
            let y = td_target(t.reward, self.config.gamma, cont, b);
            if !y.is_finite() {
                return Err(Error::NonFinite(format!("TD target at batch row {i}")));
            }
            targets.push(y);
            rewards.push(t.reward);
            bootstrap.push(b);
        }

        let mut losses = [0.0; 2];
        for k in 0..2 {
            let (loss, grads) = self.critic_gradient(k, batch, &targets)?;
            losses[k] = loss;
            self.critic_opts[k].apply(&mut self.critics[k], &grads)?;
        }
        self.critic_updates += 1;
        Ok(CriticReport {
            losses,
            targets,
            rewards,
            bootstrap,
            target_actions,
        })
    }

    /// Mean squared TD error of critic `k` against fixed `targets`, and its
    /// gradient with respect to that critic's parameters.
    pub fn critic_gradient(
        &self,
        k: usize,
        batch: &[&Transition],
        targets: &[f64],
    ) -> Result<(f64, Gradients)> {
        let n = batch.len();
        crate::error::check_len("critic targets", n, targets.len())?;
        let obs = Self::stack(batch, |t| &t.obs)?;
        let actions = Self::stack(batch, |t| &t.action)?;
        let input = obs.hconcat(&actions)?;
        let pass = self.critics[k].forward_pass(&input)?;
        let q = pass.output();
        let mut cot = Matrix::zeros(n, 1);
        let mut loss = 0.0;
        for i in 0..n {
            let err = q.data()[i] - targets[i];
            loss += err * err;
            cot.row_mut(i)[0] = 2.0 * err / n as f64;
        }
        let mut grads = Gradients::zeros_like(&self.critics[k]);
        self.critics[k].backward_pass(&pass, &cot, Some(&mut grads), false)?;
        Ok((loss / n as f64, grads))
    }

    /// Gradient of the actor loss on `batch` without touching any state.
    ///
    /// With `lambda = None` this is the classical deterministic policy
    /// gradient of `-mean Q1(s, pi(s))`. With `Some(lambda)` every component
    /// of `pi(s)` that lies strictly outside its recorded bounds adds
    /// `lambda * (pi(s) - clip(pi(s)))` to the output cotangent, i.e. the
    /// gradient of the quadratic pull toward the saturated action, which is
    /// treated as a constant. Components inside their bounds are untouched.
    pub fn actor_gradient(
        &self,
        batch: &[&Transition],
        lambda: Option<f64>,
    ) -> Result<ActorGradient> {
        if batch.is_empty() {
            return Err(Error::Usage("actor update on an empty batch".into()));
        }
        let n = batch.len();
        let nf = n as f64;
        let act = self.space.dim();
        let obs = Self::stack(batch, |t| &t.obs)?;
        let actor_pass = self.actor.forward_pass(&obs)?;
        let pi = actor_pass.output();

        let critic_in = obs.hconcat(pi)?;
        let critic_pass = self.critics[0].forward_pass(&critic_in)?;
        let ones = Matrix::from_vec(n, 1, vec![1.0; n])?;
        let dq_dinput = self.critics[0]
            .backward_pass(&critic_pass, &ones, None, true)?
            .expect("input cotangent requested");
        let dq_da = dq_dinput.columns(self.obs_dim, act);

        let mut cot = Matrix::zeros(n, act);
        let mut penalty = 0.0;
        let mut saturated = 0usize;
        for i in 0..n {
            let bounds = &batch[i].bounds;
            let pi_row = pi.row(i);
            let dq_row = dq_da.row(i);
            let c_row = cot.row_mut(i);
            for j in 0..act {
                c_row[j] = -dq_row[j] / nf;
                if let Some(lambda) = lambda {
                    let p = pi_row[j];
                    let target = clip_scalar(p, bounds.min[j], bounds.max[j]);
                    if target != p {
                        let e = p - target;
                        c_row[j] += lambda * e / nf;
                        penalty += 0.5 * lambda * e * e;
                        saturated += 1;
                    }
                }
            }
        }

        let mut grads = Gradients::zeros_like(&self.actor);
        self.actor
            .backward_pass(&actor_pass, &cot, Some(&mut grads), false)?;
        let mean_q = critic_pass.output().data().iter().sum::<f64>() / nf;
        let penalty = penalty / nf;
        Ok(ActorGradient {
            grads,
            report: ActorReport {
                loss: -mean_q + penalty,
                penalty,
                saturation_fraction: saturated as f64 / (n * act) as f64,
            },
        })
    }

    fn apply_actor(&mut self, g: ActorGradient) -> Result<ActorReport> {
        self.actor_opt.apply(&mut self.actor, &g.grads)?;
        self.actor_updates += 1;
        Ok(g.report)
    }

    /// Ascends `mean Q1(s, pi(s))`.
    pub fn actor_update_classical(&mut self, batch: &[&Transition]) -> Result<ActorReport> {
        let g = self.actor_gradient(batch, None)?;
        self.apply_actor(g)
    }

    /// Ascends the penalized objective with the configured `lambda`.
    pub fn actor_update_ea(&mut self, batch: &[&Transition]) -> Result<ActorReport> {
        let lambda = self.config.lambda();
        let g = self.actor_gradient(batch, if lambda > 0.0 { Some(lambda) } else { None })?;
        self.apply_actor(g)
    }

    pub fn actor_update(&mut self, batch: &[&Transition]) -> Result<ActorReport> {
        match self.config.variant {
            Variant::Efficient => self.actor_update_ea(batch),
            Variant::Classical | Variant::RewardShaping => self.actor_update_classical(batch),
        }
    }

    pub fn update_targets(&mut self) -> Result<()> {
        let tau = self.config.tau;
        polyak_update(&mut self.actor_target, &self.actor, tau)?;
        for k in 0..2 {
            polyak_update(&mut self.critic_targets[k], &self.critics[k], tau)?;
        }
        Ok(())
    }

    /// One TD3 iteration: critic step, and every `policy_delay` critic steps
    /// an actor step followed by soft target updates.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut R,
    ) -> Result<UpdateReport> {
        self.train_step_observed(buffer, rng, |_, _, _| {})
    }

    /// [`Agent::train_step`] that shows `observe` the batch and the critic
    /// report right after the critic step, while the target networks that
    /// produced the TD targets are still in place.
    pub fn train_step_observed<R, F>(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut R,
        mut observe: F,
    ) -> Result<UpdateReport>
    where
        R: Rng + ?Sized,
        F: FnMut(&Agent, &[&Transition], &CriticReport),
    {
        let batch = buffer.sample(rng, self.config.batch_size)?;
        let critic = self.critic_update(&batch, rng)?;
        observe(self, &batch, &critic);
        let actor = if self.critic_updates % self.config.policy_delay as u64 == 0 {
            let report = self.actor_update(&batch)?;
            self.update_targets()?;
            Some(report)
        } else {
            None
        };
        Ok(UpdateReport { critic, actor })
    }
}

/// `r + gamma * cont * bootstrap`.
#[inline]
pub fn td_target(reward: f64, gamma: f64, cont: f64, bootstrap: f64) -> f64 {
    reward + gamma * cont * bootstrap
}
