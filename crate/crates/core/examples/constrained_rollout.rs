//! Rolls out an untrained rule-bounded agent for one day and prints how often
//! the comfort rule overrides it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rulebound::agents::{Agent, AgentConfig, Variant};
use rulebound::env::{ACTION_DIM, OBS_DIM};
use rulebound::harness::{Experiment, RunConfig};
use rulebound::rules::{ActionSpace, ComfortRule};

fn main() -> rulebound::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.agent = AgentConfig::for_variant(Variant::Efficient);
    let exp = Experiment::new(&cfg)?;
    let rule = ComfortRule(cfg.rule);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let agent = Agent::new(
        OBS_DIM,
        ActionSpace::symmetric(ACTION_DIM),
        cfg.agent.clone(),
        &mut rng,
    )?;

    let mut state = exp.env.reset(exp.split.train_starts[0], &mut rng)?;
    let mut overridden = 0;
    println!(
        "{:>5} {:>7} {:>13} {:>7} {:>7}",
        "time", "T °C", "band", "raw", "applied"
    );
    for step in 0..cfg.env.steps_per_day() {
        let c = agent.select_action(
            &state.observation(),
            &state,
            cfg.agent.sigma,
            &rule,
            &mut rng,
        )?;
        overridden += c.saturated[0] as usize;
        if step % 8 == 0 {
            println!(
                "{:02}:{:02} {:>7.2} [{:>5.1},{:>5.1}] {:>7.3} {:>7.3}",
                state.minute_of_day / 60,
                state.minute_of_day % 60,
                state.temperature,
                state.lower,
                state.upper,
                c.raw[0],
                c.applied[0]
            );
        }
        state = exp.env.step(&state, &c.applied)?.state;
    }
    println!(
        "rule overrode {overridden} of {} actions",
        cfg.env.steps_per_day()
    );
    Ok(())
}
