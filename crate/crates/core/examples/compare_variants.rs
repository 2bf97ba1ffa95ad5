//! Races classical, rule-bounded and reward-shaped agents to the baseline
//! threshold and prints the convergence report.
//!
//!     cargo run --release --example compare_variants [-- seeds workers]

use rulebound::agents::{AgentConfig, Variant};
use rulebound::harness::{compare, RunConfig};
use rulebound::rules::ComfortRuleConfig;

fn main() -> rulebound::Result<()> {
    let arg = |i: usize, default: u64| {
        std::env::args()
            .nth(i)
            .and_then(|a| a.parse().ok())
            .unwrap_or(default)
    };
    let seeds = arg(1, 3);
    let workers = arg(2, 1) as usize;

    let make = |variant, m, n| -> rulebound::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.agent = AgentConfig::for_variant(variant);
        cfg.rule = ComfortRuleConfig::new(m, n)?;
        cfg.harness.seeds = (0..seeds).collect();
        cfg.harness.stop_at_threshold = true;
        cfg.harness.epochs = 60;
        cfg.harness.save_checkpoint = false;
        Ok(cfg)
    };
    let cfgs = vec![
        make(Variant::Classical, 0.0, 0.25)?,
        make(Variant::Efficient, 0.0, 1.0)?,
        make(Variant::Efficient, 0.0, 0.25)?,
        make(Variant::RewardShaping, 0.0, 0.25)?,
    ];
    let cmp = compare(&cfgs, workers, None)?;
    print!("{}", cmp.report.render());
    Ok(())
}
