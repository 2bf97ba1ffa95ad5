//! Evaluates the on/off thermostat and a few fixed policies on the held-out
//! episodes of the default benchmark, showing what the threshold means.
//!
//!     cargo run --release --example baseline_thermostat [-- hysteresis...]

use rulebound::harness::{evaluate, BaselinePolicy, ConstantPolicy, Experiment, RunConfig};

fn main() -> rulebound::Result<()> {
    let cfg = RunConfig::default();
    let exp = Experiment::new(&cfg)?;
    let season = cfg.env.season;
    println!(
        "{:<24} {:>10} {:>14} {:>12}",
        "controller", "reward", "violation Kh", "energy kWh"
    );
    let row = |name: &str, r: rulebound::harness::EvalSummary| {
        println!(
            "{name:<24} {:>10.4} {:>14.3} {:>12.2}",
            r.mean_reward, r.violation_kh, r.energy_kwh
        )
    };
    let mut hysteresis: Vec<f64> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    if hysteresis.is_empty() {
        hysteresis = vec![0.0, 0.25, cfg.harness.baseline_hysteresis, 1.0];
    }
    for h in hysteresis {
        let r = evaluate(&mut BaselinePolicy::new(h, season), &exp.env, &exp.eval_set)?;
        row(&format!("bang-bang h={h}"), r);
    }
    for a in [-1.0, 0.0, 1.0] {
        let r = evaluate(&mut ConstantPolicy(a), &exp.env, &exp.eval_set)?;
        row(&format!("constant a={a}"), r);
    }
    println!(
        "threshold (bang-bang h={}): {:.4}",
        cfg.harness.baseline_hysteresis,
        exp.threshold()
    );
    Ok(())
}
