//! Command-line front end. Every subcommand prints the paths it wrote, one
//! per line, and failures end with a single JSON error line on stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agents::Agent;
use crate::env::{generate_weather, OBS_DIM};
use crate::error::{Error, Result};
use crate::gradcheck::{run_gradcheck, GradcheckConfig};
use crate::harness::{
    compare, evaluate, seed_dir, split_horizon, Experiment, GreedyPolicy, RunConfig, Trainer,
};
use crate::rules::ComfortRule;

#[derive(Debug, Parser)]
#[command(
    name = "rulebound",
    version,
    about = "Rule-bounded actor-critic agents on a thermal control benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML with sections agent, rule, env, harness).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (file for export-weather).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train every seed of a configuration; writes metrics, summary and checkpoint.
    Train(Common),
    /// Evaluate a saved agent on the held-out episodes of a configuration.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Agent checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train several configurations and compare convergence speed.
    Compare {
        /// Run configurations; repeat the flag for each one.
        #[arg(long = "config", short, required = true)]
        configs: Vec<PathBuf>,
        /// Overrides every configuration's seeds with 0..N.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Runs trained at the same time.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Check every analytic gradient against finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Random networks per check.
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
    /// Write the weather series of a configuration as CSV.
    ExportWeather(Common),
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_cli`] with explicit output streams.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(out, "{}", e.render());
            } else {
                let _ = write!(err, "{}", e.render());
                let _ = report(err, "usage", e.kind().to_string());
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = report(err, e.kind(), e.to_string());
            1
        }
    }
}

fn report(err: &mut dyn Write, kind: &str, message: String) -> std::io::Result<()> {
    let line = serde_json::to_string(&ErrorLine {
        error: kind,
        message,
    })
    .expect("plain strings");
    writeln!(err, "{line}")
}

fn load(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Err(Error::Usage("--config is required".into())),
    }
}

fn with_seed(mut cfg: RunConfig, seed: Option<u64>) -> Result<RunConfig> {
    if let Some(s) = seed {
        cfg.harness.seeds = vec![s];
        cfg.validate()?;
    }
    Ok(cfg)
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Train(c) => {
            let cfg = with_seed(load(c.config.as_deref())?, c.seed)?;
            let root = c
                .out
                .or_else(|| cfg.harness.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("runs"));
            let exp = Experiment::new(&cfg)?;
            writeln!(out, "threshold {}", exp.threshold())?;
            for &seed in &cfg.harness.seeds {
                let dir = seed_dir(&root, &cfg.label(), seed);
                let run = Trainer::new(&cfg, &exp, seed).output_dir(&dir).run()?;
                let artifacts = run.artifacts.expect("output directory set");
                for p in artifacts.paths() {
                    writeln!(out, "{}", p.display())?;
                }
                if let Some(reason) = &run.metrics.aborted {
                    return Err(Error::NonFinite(format!("seed {seed}: {reason}")));
                }
                let s = run.metrics.summary();
                match s.epochs_to_threshold {
                    Some(e) => writeln!(out, "seed {seed}: threshold reached at epoch {e}")?,
                    None => writeln!(out, "seed {seed}: threshold not reached")?,
                }
            }
            Ok(0)
        }
        Command::Evaluate { common, checkpoint } => {
            let cfg = load(common.config.as_deref())?;
            let agent = Agent::load(&checkpoint)?;
            if agent.obs_dim() != OBS_DIM {
                return Err(Error::Checkpoint(format!(
                    "agent expects {} observations, the environment has {OBS_DIM}",
                    agent.obs_dim()
                )));
            }
            let mut cfg = cfg;
            if let Some(s) = common.seed {
                cfg.harness.weather_seed = s;
            }
            let exp = Experiment::new(&cfg)?;
            let mut policy = GreedyPolicy {
                agent: &agent,
                rule: ComfortRule(cfg.rule),
            };
            let r = evaluate(&mut policy, &exp.env, &exp.eval_set)?;
            writeln!(
                out,
                "reward {}  violation_kh {}  energy_kwh {}  (baseline reward {})",
                r.mean_reward,
                r.violation_kh,
                r.energy_kwh,
                exp.threshold()
            )?;
            if let Some(dir) = common.out {
                std::fs::create_dir_all(&dir)?;
                let path = dir.join("evaluation.json");
                let body = serde_json::json!({
                    "checkpoint": checkpoint.display().to_string(),
                    "result": r,
                    "baseline": exp.baseline,
                });
                std::fs::write(&path, serde_json::to_string_pretty(&body)? + "\n")?;
                writeln!(out, "{}", path.display())?;
            }
            Ok(0)
        }
        Command::Compare {
            configs,
            seeds,
            out: dir,
            workers,
        } => {
            let cfgs = configs
                .iter()
                .map(|p| {
                    let mut c = RunConfig::load(p)?;
                    if let Some(n) = seeds {
                        c.harness.seeds = (0..n).collect();
                        c.validate()?;
                    }
                    Ok(c)
                })
                .collect::<Result<Vec<_>>>()?;
            let root = dir.unwrap_or_else(|| PathBuf::from("runs"));
            let cmp = compare(&cfgs, workers, Some(&root))?;
            write!(out, "{}", cmp.report.render())?;
            for p in &cmp.files {
                writeln!(out, "{}", p.display())?;
            }
            Ok(0)
        }
        Command::Gradcheck { common, cases } => {
            let mut cfg = GradcheckConfig {
                cases,
                ..GradcheckConfig::default()
            };
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            let report = run_gradcheck(&cfg)?;
            write!(out, "{}", report.render())?;
            if let Some(dir) = common.out {
                std::fs::create_dir_all(&dir)?;
                let path = dir.join("gradcheck.json");
                std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
                writeln!(out, "{}", path.display())?;
            }
            if report.passed() {
                Ok(0)
            } else {
                Err(Error::Usage("gradient check failed".into()))
            }
        }
        Command::ExportWeather(c) => {
            let mut cfg = load(c.config.as_deref())?;
            if let Some(s) = c.seed {
                cfg.harness.weather_seed = s;
            }
            let path = c.out.unwrap_or_else(|| PathBuf::from("weather.csv"));
            let split = split_horizon(
                cfg.harness.train_days,
                cfg.harness.eval_episodes,
                cfg.env.episode_days,
                cfg.env.steps_per_day(),
            );
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.harness.weather_seed);
            let w = generate_weather(
                split.total_days,
                cfg.env.step_minutes,
                &cfg.env.weather,
                &mut rng,
            )?;
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            w.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            writeln!(out, "{}", path.display())?;
            Ok(0)
        }
    }
}
