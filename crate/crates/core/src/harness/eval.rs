use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::env::{BangBang, EnvState, Environment};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rules::{constrain_action, ActionBounds, ComfortRule};

/// Placement of held-out evaluation episodes and the training starts that
/// avoid them.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSplit {
    pub total_days: usize,
    /// First step of each evaluation episode.
    pub eval_starts: Vec<usize>,
    /// Every training episode start whose window avoids all evaluation
    /// windows.
    pub train_starts: Vec<usize>,
}

/// Interleaves `eval_episodes` blocks of `episode_days` with training gaps
/// totalling at least `train_days`, so both sets span the whole season.
pub fn split_horizon(
    train_days: usize,
    eval_episodes: usize,
    episode_days: usize,
    steps_per_day: usize,
) -> HorizonSplit {
    let gap = train_days.div_ceil(eval_episodes);
    let stride = gap + episode_days;
    // One extra day so the final evaluation step has a successor sample.
    let total_days = eval_episodes * stride + 1;
    let episode = episode_days * steps_per_day;
    let eval_starts: Vec<usize> = (0..eval_episodes)
        .map(|i| (i * stride + gap) * steps_per_day)
        .collect();
    let last_start = total_days * steps_per_day - episode - 1;
    // Episode windows include the successor sample of their last step.
    let train_starts = (0..=last_start)
        .filter(|&s| {
            eval_starts
                .iter()
                .all(|&b| s + episode < b || b + episode < s)
        })
        .collect();
    HorizonSplit {
        total_days,
        eval_starts,
        train_starts,
    }
}

/// Held-out episodes with frozen initial states.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub initial: Vec<EnvState>,
}

impl EvalSet {
    pub fn new(env: &Environment, starts: &[usize], seed: u64) -> Result<Self> {
        if starts.is_empty() {
            return Err(Error::Usage("evaluation set is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(7);
        let initial = starts
            .iter()
            .map(|&s| env.reset(s, &mut rng))
            .collect::<Result<_>>()?;
        Ok(Self { initial })
    }

    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }
}

/// An applied action together with the box it had to respect.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub applied: Vec<f64>,
    pub bounds: ActionBounds,
}

/// Anything that can drive a batch of environments in lockstep.
pub trait Controller {
    fn reset(&mut self, _episodes: usize) {}
    fn act(&mut self, states: &[EnvState]) -> Result<Vec<Decision>>;
}

/// Noise-free agent policy; rule bounds stay active for rule-based variants.
pub struct GreedyPolicy<'a> {
    pub agent: &'a Agent,
    pub rule: ComfortRule,
}

impl Controller for GreedyPolicy<'_> {
    fn act(&mut self, states: &[EnvState]) -> Result<Vec<Decision>> {
        let obs: Vec<Vec<f64>> = states.iter().map(EnvState::observation).collect();
        let pi = self.agent.policy(&Matrix::from_rows(&obs)?)?;
        Ok(states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let bounds = self.agent.bounds_for(s, &self.rule);
                let c = constrain_action(pi.row(i), &bounds);
                Decision {
                    applied: c.applied,
                    bounds,
                }
            })
            .collect())
    }
}

/// One on/off thermostat per episode.
pub struct BaselinePolicy {
    hysteresis: f64,
    season: crate::env::Season,
    units: Vec<BangBang>,
}

impl BaselinePolicy {
    pub fn new(hysteresis: f64, season: crate::env::Season) -> Self {
        Self {
            hysteresis,
            season,
            units: Vec::new(),
        }
    }
}

impl Controller for BaselinePolicy {
    fn reset(&mut self, episodes: usize) {
        self.units = (0..episodes)
            .map(|_| BangBang::new(self.hysteresis, self.season))
            .collect();
    }

    fn act(&mut self, states: &[EnvState]) -> Result<Vec<Decision>> {
        if self.units.len() != states.len() {
            self.reset(states.len());
        }
        Ok(self
            .units
            .iter_mut()
            .zip(states)
            .map(|(u, s)| Decision {
                applied: vec![u.act(s)],
                bounds: ActionBounds {
                    min: vec![-1.0],
                    max: vec![1.0],
                },
            })
            .collect())
    }
}

/// Constant action, mostly useful as a sanity reference.
pub struct ConstantPolicy(pub f64);

impl Controller for ConstantPolicy {
    fn act(&mut self, states: &[EnvState]) -> Result<Vec<Decision>> {
        Ok(states
            .iter()
            .map(|_| Decision {
                applied: vec![self.0],
                bounds: ActionBounds {
                    min: vec![-1.0],
                    max: vec![1.0],
                },
            })
            .collect())
    }
}

/// Test-set performance in the units of the comparison tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    /// Mean per-step reward over all evaluation steps.
    pub mean_reward: f64,
    /// Comfort violation per episode, Kh.
    pub violation_kh: f64,
    /// Energy per episode, kWh.
    pub energy_kwh: f64,
}

/// Rolls every evaluation episode to its horizon. `observe` sees each state
/// together with the decision taken in it.
pub fn evaluate_with<C, F>(
    controller: &mut C,
    env: &Environment,
    set: &EvalSet,
    mut observe: F,
) -> Result<EvalSummary>
where
    C: Controller + ?Sized,
    F: FnMut(&EnvState, &Decision),
{
    if set.is_empty() {
        return Err(Error::Usage("evaluation set is empty".into()));
    }
    controller.reset(set.len());
    let mut states = set.initial.clone();
    let steps = env.config().episode_steps();
    let mut reward = 0.0;
    let mut violation = 0.0;
    let mut energy = 0.0;
    for _ in 0..steps {
        let decisions = controller.act(&states)?;
        for (s, d) in states.iter_mut().zip(&decisions) {
            observe(s, d);
            let r = env.step(s, &d.applied)?;
            reward += r.reward;
            violation += r.violation_kh;
            energy += r.energy;
            *s = r.state;
        }
    }
    let episodes = set.len() as f64;
    Ok(EvalSummary {
        mean_reward: reward / (episodes * steps as f64),
        violation_kh: violation / episodes,
        energy_kwh: energy / episodes,
    })
}

pub fn evaluate<C: Controller + ?Sized>(
    controller: &mut C,
    env: &Environment,
    set: &EvalSet,
) -> Result<EvalSummary> {
    evaluate_with(controller, env, set, |_, _| {})
}

/// Uniform random index into the training starts.
pub(crate) fn pick_start<R: Rng + ?Sized>(starts: &[usize], rng: &mut R) -> usize {
    starts[rng.random_range(0..starts.len())]
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::env::{generate_weather, EnvConfig, WeatherParams};

    #[test]
    fn split_is_disjoint_and_sized() {
        let split = split_horizon(180, 20, 3, 96);
        assert_eq!(split.eval_starts.len(), 20);
        let episode = 3 * 96;
        for &s in &split.train_starts {
            for &b in &split.eval_starts {
                let (a0, a1) = (s, s + episode);
                let (b0, b1) = (b, b + episode);
                assert!(a1 < b0 || b1 < a0);
            }
        }
        // training days cover at least the requested amount
        let mut covered = vec![false; split.total_days * 96];
        for &s in &split.train_starts {
            for c in covered.iter_mut().skip(s).take(episode) {
                *c = true;
            }
        }
        assert!(covered.iter().filter(|&&c| c).count() >= 180 * 96 - 20 * 2);
    }

    fn env() -> (Environment, HorizonSplit) {
        let split = split_horizon(12, 2, 3, 96);
        let cfg = EnvConfig::default();
        let w = generate_weather(
            split.total_days,
            15,
            &WeatherParams::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        (Environment::new(cfg, Arc::new(w)).unwrap(), split)
    }

    #[test]
    fn baseline_eval_is_finite_and_repeatable() {
        let (env, split) = env();
        let set = EvalSet::new(&env, &split.eval_starts, 1).unwrap();
        let mut b = BaselinePolicy::new(0.5, env.config().season);
        let a = evaluate(&mut b, &env, &set).unwrap();
        let c = evaluate(&mut b, &env, &set).unwrap();
        assert!(a.mean_reward.is_finite());
        assert_eq!(a, c);
    }

    #[test]
    fn heater_off_in_winter_is_dominated_by_violations() {
        let (env, split) = env();
        let set = EvalSet::new(&env, &split.eval_starts, 1).unwrap();
        let off = evaluate(&mut ConstantPolicy(-1.0), &env, &set).unwrap();
        let base = evaluate(
            &mut BaselinePolicy::new(0.5, env.config().season),
            &env,
            &set,
        )
        .unwrap();
        assert_eq!(off.energy_kwh, 0.0);
        assert!(off.mean_reward < base.mean_reward);
        assert!(off.violation_kh > 10.0 * base.violation_kh.max(0.1));
    }
}
