use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::eval::{
    evaluate, evaluate_with, pick_start, split_horizon, BaselinePolicy, Decision, EvalSet,
    EvalSummary, GreedyPolicy, HorizonSplit,
};
use super::metrics::{EpochRow, MetricsWriter, RunMetrics};
use crate::agents::{Agent, CriticReport, ReplayBuffer, Transition};
use crate::env::{generate_weather, EnvState, Environment, WeatherSeries, ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::rules::{constrain_action, ActionSpace, ComfortRule};

/// Weather, episode split, evaluation set and threshold shared by every seed
/// of a configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub env: Environment,
    pub split: HorizonSplit,
    pub eval_set: EvalSet,
    /// Baseline thermostat on the evaluation set.
    pub baseline: EvalSummary,
}

impl Experiment {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let h = &cfg.harness;
        let steps_per_day = cfg.env.steps_per_day();
        let split = split_horizon(
            h.train_days,
            h.eval_episodes,
            cfg.env.episode_days,
            steps_per_day,
        );
        let weather = match &h.weather_file {
            Some(path) => {
                let w = WeatherSeries::read_csv(File::open(path)?)?;
                let needed = split.total_days * steps_per_day;
                if w.len() < needed {
                    return Err(Error::config(
                        "harness.weather_file",
                        format!("{} samples, the horizon needs {needed}", w.len()),
                    ));
                }
                w
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(h.weather_seed);
                generate_weather(
                    split.total_days,
                    cfg.env.step_minutes,
                    &cfg.env.weather,
                    &mut rng,
                )?
            }
        };
        let env = Environment::new(cfg.env.clone(), Arc::new(weather))?;
        let eval_set = EvalSet::new(&env, &split.eval_starts, h.weather_seed)?;
        let mut base = BaselinePolicy::new(h.baseline_hysteresis, cfg.env.season);
        let baseline = evaluate(&mut base, &env, &eval_set)?;
        Ok(Self {
            env,
            split,
            eval_set,
            baseline,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.baseline.mean_reward
    }
}

/// Paths written by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub metrics: PathBuf,
    pub summary: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub actions: Option<PathBuf>,
    pub diagnostic: Option<PathBuf>,
}

impl RunArtifacts {
    pub fn paths(&self) -> Vec<&Path> {
        let mut out = vec![self.metrics.as_path(), self.summary.as_path()];
        out.extend(self.checkpoint.as_deref());
        out.extend(self.actions.as_deref());
        out.extend(self.diagnostic.as_deref());
        out
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub agent: Agent,
    pub artifacts: Option<RunArtifacts>,
}

type UpdateObserver<'a> = Box<dyn FnMut(&Agent, &[&Transition], &CriticReport) + 'a>;

/// One training run of one configuration and seed.
pub struct Trainer<'a> {
    cfg: &'a RunConfig,
    experiment: &'a Experiment,
    seed: u64,
    out_dir: Option<PathBuf>,
    observer: Option<UpdateObserver<'a>>,
}

struct ActionLog {
    out: BufWriter<File>,
}

impl ActionLog {
    fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(
            out,
            "phase,epoch,episode,step,component,temperature,lower,upper,a_min,a_max,applied"
        )?;
        Ok(Self { out })
    }

    fn log(
        &mut self,
        phase: &str,
        epoch: usize,
        episode: usize,
        step: usize,
        s: &EnvState,
        d: &Decision,
    ) -> Result<()> {
        for j in 0..d.applied.len() {
            writeln!(
                self.out,
                "{phase},{epoch},{episode},{step},{j},{},{},{},{},{},{}",
                s.temperature, s.lower, s.upper, d.bounds.min[j], d.bounds.max[j], d.applied[j]
            )?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct EpochAccumulator {
    steps: usize,
    saturated: usize,
    critic_loss: f64,
    critic_updates: usize,
    actor_loss: f64,
    actor_updates: usize,
}

impl EpochAccumulator {
    fn mean(sum: f64, n: usize) -> Option<f64> {
        (n > 0).then(|| sum / n as f64)
    }
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a RunConfig, experiment: &'a Experiment, seed: u64) -> Self {
        Self {
            cfg,
            experiment,
            seed,
            out_dir: None,
            observer: None,
        }
    }

    /// Writes metrics, summary and checkpoint into `dir`.
    pub fn output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = Some(dir.into());
        self
    }

    /// Called after every critic step with the sampled batch, before the
    /// actor and target networks move.
    pub fn on_update<F>(mut self, f: F) -> Self
    where
        F: FnMut(&Agent, &[&Transition], &CriticReport) + 'a,
    {
        self.observer = Some(Box::new(f));
        self
    }

    pub fn run(mut self) -> Result<RunOutput> {
        let cfg = self.cfg;
        let exp = self.experiment;
        let h = &cfg.harness;
        let env = &exp.env;
        let steps_per_epoch = cfg.env.steps_per_day();
        let rule = ComfortRule(cfg.rule);

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut agent = Agent::new(
            OBS_DIM,
            ActionSpace::symmetric(ACTION_DIM),
            cfg.agent.clone(),
            &mut rng,
        )?;
        let mut buffer = ReplayBuffer::new(cfg.agent.buffer_capacity);

        let paths = match &self.out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Some(dir.clone())
            }
            None => None,
        };
        let mut writer = match &paths {
            Some(dir) => Some(MetricsWriter::create(&dir.join("metrics.csv"))?),
            None => None,
        };
        let mut actions = match (&paths, h.log_actions) {
            (Some(dir), true) => Some(ActionLog::create(&dir.join("actions.csv"))?),
            _ => None,
        };

        let mut metrics = RunMetrics {
            label: cfg.label(),
            variant: cfg.agent.variant.as_str().into(),
            seed: self.seed,
            threshold: exp.threshold(),
            eval_every: h.eval_every,
            rows: Vec::new(),
            aborted: None,
        };

        let clock = Instant::now();
        let mut state = env.reset(pick_start(&exp.split.train_starts, &mut rng), &mut rng)?;
        let mut episode = 0usize;
        let mut acc = EpochAccumulator::default();
        let total_steps = h.epochs * steps_per_epoch;

        'outer: for step in 0..total_steps {
            let epoch = step / steps_per_epoch + 1;
            let obs = state.observation();
            let (raw, decision) = if step < h.warmup_steps {
                let raw: Vec<f64> = (0..ACTION_DIM)
                    .map(|_| rng.random_range(-1.0..=1.0))
                    .collect();
                let bounds = agent.bounds_for(&state, &rule);
                let applied = constrain_action(&raw, &bounds).applied;
                (raw, Decision { applied, bounds })
            } else {
                let c = agent.select_action(&obs, &state, cfg.agent.sigma, &rule, &mut rng)?;
                (
                    c.raw,
                    Decision {
                        applied: c.applied,
                        bounds: c.bounds,
                    },
                )
            };
            if let Some(log) = actions.as_mut() {
                log.log(
                    "train",
                    epoch,
                    episode,
                    state.elapsed_steps,
                    &state,
                    &decision,
                )?;
            }
            acc.steps += 1;
            if decision.applied != raw {
                acc.saturated += 1;
            }
            let result = env.step(&state, &decision.applied)?;
            buffer.push(Transition {
                obs,
                reward: agent.learning_reward(result.reward, &raw, &decision.applied),
                env_reward: result.reward,
                action: decision.applied,
                raw_action: raw,
                next_obs: result.state.observation(),
                // The horizon is a time limit, not a terminal state.
                done: false,
                bounds: decision.bounds,
            });
            state = if result.done {
                episode += 1;
                env.reset(pick_start(&exp.split.train_starts, &mut rng), &mut rng)?
            } else {
                result.state
            };

            if step >= h.warmup_steps && buffer.len() >= cfg.agent.batch_size {
                let report = match self.observer.as_mut() {
                    Some(f) => agent.train_step_observed(&buffer, &mut rng, |a, b, c| f(a, b, c)),
                    None => agent.train_step(&buffer, &mut rng),
                };
                let report = match report.and_then(|r| check_finite(&agent, r)) {
                    Ok(r) => r,
                    Err(Error::NonFinite(what)) => {
                        metrics.aborted = Some(format!("non-finite {what} at step {step}"));
                        break 'outer;
                    }
                    Err(e) => return Err(e),
                };
                acc.critic_loss += 0.5 * (report.critic.losses[0] + report.critic.losses[1]);
                acc.critic_updates += 1;
                if let Some(a) = report.actor {
                    acc.actor_loss += a.loss;
                    acc.actor_updates += 1;
                }
            }

            if (step + 1) % steps_per_epoch == 0 {
                let done_epoch = epoch;
                let acc_done = std::mem::take(&mut acc);
                if done_epoch % h.eval_every != 0 {
                    continue;
                }
                let mut policy = GreedyPolicy {
                    agent: &agent,
                    rule,
                };
                let summary = match actions.as_mut() {
                    Some(log) => {
                        let mut failed = None;
                        let mut counters = vec![0usize; exp.eval_set.len()];
                        let mut k = 0usize;
                        let n = exp.eval_set.len();
                        let s = evaluate_with(&mut policy, env, &exp.eval_set, |st, d| {
                            let i = k % n;
                            k += 1;
                            if failed.is_none() {
                                if let Err(e) = log.log("eval", done_epoch, i, counters[i], st, d) {
                                    failed = Some(e);
                                }
                            }
                            counters[i] += 1;
                        })?;
                        if let Some(e) = failed {
                            return Err(e);
                        }
                        s
                    }
                    None => evaluate(&mut policy, env, &exp.eval_set)?,
                };
                let row = EpochRow {
                    epoch: done_epoch,
                    mean_test_reward: summary.mean_reward,
                    violation_kh: summary.violation_kh,
                    energy_kwh: summary.energy_kwh,
                    saturation_frac: acc_done.saturated as f64 / acc_done.steps.max(1) as f64,
                    actor_loss: EpochAccumulator::mean(acc_done.actor_loss, acc_done.actor_updates),
                    critic_loss: EpochAccumulator::mean(
                        acc_done.critic_loss,
                        acc_done.critic_updates,
                    ),
                    wall_ms: if h.record_wall_time {
                        clock.elapsed().as_millis() as u64
                    } else {
                        0
                    },
                };
                if let Some(w) = writer.as_mut() {
                    w.push(&row)?;
                }
                let reached = row.mean_test_reward >= metrics.threshold;
                metrics.rows.push(row);
                if h.stop_at_threshold && reached {
                    break;
                }
            }
        }
        if let Some(mut log) = actions {
            log.out.flush()?;
        }

        let artifacts = match &paths {
            Some(dir) => Some(write_run_artifacts(
                dir,
                &metrics,
                &agent,
                h.save_checkpoint,
                h.log_actions,
            )?),
            None => None,
        };
        Ok(RunOutput {
            metrics,
            agent,
            artifacts,
        })
    }
}

fn check_finite(
    agent: &Agent,
    r: crate::agents::UpdateReport,
) -> Result<crate::agents::UpdateReport> {
    if !r.critic.losses.iter().all(|l| l.is_finite()) {
        return Err(Error::NonFinite("critic loss".into()));
    }
    if let Some(a) = &r.actor {
        if !a.loss.is_finite() {
            return Err(Error::NonFinite("actor loss".into()));
        }
    }
    if !agent.actor().is_finite() || !agent.critics().iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite("network parameters".into()));
    }
    Ok(r)
}

fn write_run_artifacts(
    dir: &Path,
    metrics: &RunMetrics,
    agent: &Agent,
    save_checkpoint: bool,
    log_actions: bool,
) -> Result<RunArtifacts> {
    let summary = dir.join("summary.json");
    metrics.summary().write(&summary)?;
    let mut checkpoint = None;
    let mut diagnostic = None;
    if let Some(reason) = &metrics.aborted {
        let ckpt = dir.join("aborted.ckpt");
        agent.save(&ckpt)?;
        checkpoint = Some(ckpt);
        let diag = dir.join("diagnostic.txt");
        std::fs::write(
            &diag,
            format!(
                "{reason}\ncritic updates: {}\nactor updates: {}\nlast evaluated epoch: {}\n",
                agent.critic_updates(),
                agent.actor_updates(),
                metrics.rows.last().map_or(0, |r| r.epoch)
            ),
        )?;
        diagnostic = Some(diag);
    } else if save_checkpoint {
        let ckpt = dir.join("agent.ckpt");
        agent.save(&ckpt)?;
        checkpoint = Some(ckpt);
    }
    Ok(RunArtifacts {
        metrics: dir.join("metrics.csv"),
        summary,
        checkpoint,
        actions: log_actions.then(|| dir.join("actions.csv")),
        diagnostic,
    })
}

/// Directory of one seed inside a configuration's output directory.
pub fn seed_dir(root: &Path, label: &str, seed: u64) -> PathBuf {
    root.join(label).join(format!("seed_{seed}"))
}

/// Trains every seed of `cfg` in sequence.
pub fn train(cfg: &RunConfig) -> Result<Vec<RunOutput>> {
    let exp = Experiment::new(cfg)?;
    cfg.harness
        .seeds
        .iter()
        .map(|&seed| {
            let mut t = Trainer::new(cfg, &exp, seed);
            if let Some(root) = &cfg.harness.output_dir {
                t = t.output_dir(seed_dir(root, &cfg.label(), seed));
            }
            t.run()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Variant;

    pub(crate) fn tiny(variant: Variant) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.agent = crate::agents::AgentConfig {
            hidden: vec![8, 8],
            batch_size: 16,
            ..crate::agents::AgentConfig::for_variant(variant)
        };
        cfg.harness.epochs = 2;
        cfg.harness.eval_episodes = 2;
        cfg.harness.train_days = 8;
        cfg.harness.warmup_steps = 50;
        cfg
    }

    #[test]
    fn zero_epochs_write_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(Variant::Classical);
        cfg.harness.epochs = 0;
        let exp = Experiment::new(&cfg).unwrap();
        let out = Trainer::new(&cfg, &exp, 0)
            .output_dir(dir.path())
            .run()
            .unwrap();
        assert!(out.metrics.rows.is_empty());
        let text = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(dir.path().join("summary.json").exists());
    }

    #[test]
    fn one_row_per_epoch_and_deterministic() {
        let cfg = tiny(Variant::Efficient);
        let exp = Experiment::new(&cfg).unwrap();
        let a = Trainer::new(&cfg, &exp, 3).run().unwrap();
        let b = Trainer::new(&cfg, &exp, 3).run().unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.agent, b.agent);
        let epochs: Vec<usize> = a.metrics.rows.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![1, 2]);
        let c = Trainer::new(&cfg, &exp, 4).run().unwrap();
        assert_ne!(a.agent, c.agent);
    }

    #[test]
    fn cadence_skips_epochs() {
        let mut cfg = tiny(Variant::Classical);
        cfg.harness.epochs = 4;
        cfg.harness.eval_every = 2;
        let exp = Experiment::new(&cfg).unwrap();
        let out = Trainer::new(&cfg, &exp, 0).run().unwrap();
        let epochs: Vec<usize> = out.metrics.rows.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![2, 4]);
    }

    #[test]
    fn evaluation_leaves_agent_untouched() {
        let cfg = tiny(Variant::Efficient);
        let exp = Experiment::new(&cfg).unwrap();
        let out = Trainer::new(&cfg, &exp, 1).run().unwrap();
        let before = out.agent.clone();
        let mut p = GreedyPolicy {
            agent: &out.agent,
            rule: ComfortRule(cfg.rule),
        };
        let x = evaluate(&mut p, &exp.env, &exp.eval_set).unwrap();
        let y = evaluate(&mut p, &exp.env, &exp.eval_set).unwrap();
        assert_eq!(x, y);
        assert_eq!(before, out.agent);
    }
}
