//! Trains one agent on the default benchmark and prints its learning curve.
//!
//!     cargo run --release --example train_single [-- variant m n epochs]
//!
//! `variant` is one of classical, ea, rs.

use rulebound::agents::{AgentConfig, Variant};
use rulebound::harness::{Experiment, RunConfig, Trainer};
use rulebound::rules::ComfortRuleConfig;

fn main() -> rulebound::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let variant = match args.first().map(String::as_str) {
        Some("classical") => Variant::Classical,
        Some("rs") => Variant::RewardShaping,
        _ => Variant::Efficient,
    };
    let num = |i: usize, default: f64| args.get(i).and_then(|a| a.parse().ok()).unwrap_or(default);

    let mut cfg = RunConfig::default();
    cfg.agent = AgentConfig::for_variant(variant);
    cfg.rule = ComfortRuleConfig::new(num(1, 0.0), num(2, 0.25))?;
    cfg.harness.epochs = num(3, 40.0) as usize;
    cfg.harness.stop_at_threshold = true;

    let exp = Experiment::new(&cfg)?;
    println!("{}: threshold {:.4}", cfg.label(), exp.threshold());
    let run = Trainer::new(&cfg, &exp, 0).run()?;
    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>6}",
        "epoch", "reward", "vio Kh", "kWh", "sat"
    );
    for r in &run.metrics.rows {
        println!(
            "{:>5} {:>10.4} {:>10.3} {:>10.2} {:>6.2}",
            r.epoch, r.mean_test_reward, r.violation_kh, r.energy_kwh, r.saturation_frac
        );
    }
    match run.metrics.epochs_to_threshold() {
        Some(e) => println!("threshold reached after {e} epochs"),
        None => println!("threshold not reached"),
    }
    Ok(())
}
