//! Generates the synthetic heating-season weather of the default benchmark,
//! prints daily summaries and writes the series as CSV.
//!
//!     cargo run --release --example weather_export [-- out.csv]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rulebound::env::generate_weather;
use rulebound::harness::{split_horizon, RunConfig};

fn main() -> rulebound::Result<()> {
    let cfg = RunConfig::default();
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

    let spd = w.steps_per_day();
    println!(
        "{} days, {} samples of {} min",
        split.total_days,
        w.len(),
        w.step_minutes()
    );
    println!(
        "{:>4} {:>8} {:>8} {:>8} {:>10}",
        "day", "min °C", "mean °C", "max °C", "sun (sum)"
    );
    for day in (0..split.total_days).step_by(20) {
        let t = &w.t_out()[day * spd..(day + 1) * spd];
        let sun: f64 = w.irradiance()[day * spd..(day + 1) * spd].iter().sum();
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let (lo, hi) = t
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        println!("{day:>4} {lo:>8.2} {mean:>8.2} {hi:>8.2} {sun:>10.2}");
    }

    if let Some(path) = std::env::args().nth(1) {
        w.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        println!("wrote {path}");
    }
    Ok(())
}
