//! Shows how the rule-aware actor gradient differs from the classical one:
//! identical while the policy stays inside its bounds, pulled toward the
//! bound once it leaves them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rulebound::agents::{Agent, AgentConfig, Transition, Variant};
use rulebound::rules::{ActionBounds, ActionSpace};

fn main() -> rulebound::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let agent = Agent::new(
        3,
        ActionSpace::symmetric(1),
        AgentConfig::for_variant(Variant::Efficient),
        &mut rng,
    )?;
    let obs = vec![0.2, -0.4, 0.7];
    let pi = agent.actor().forward(&obs)?[0];
    let lambda = agent.config().lambda();
    println!("policy output {pi:.4}, lambda {lambda}");

    for (name, lo, hi) in [
        ("interior", pi - 0.2, pi + 0.2),
        ("below a_min", pi + 0.1, pi + 0.5),
        ("above a_max", pi - 0.5, pi - 0.1),
    ] {
        let bounds = ActionBounds::new(vec![lo.max(-1.0)], vec![hi.min(1.0)])?;
        let t = Transition {
            obs: obs.clone(),
            action: vec![pi.clamp(bounds.min[0], bounds.max[0])],
            raw_action: vec![pi],
            reward: 0.0,
            env_reward: 0.0,
            next_obs: obs.clone(),
            done: false,
            bounds,
        };
        let ea = agent.actor_gradient(&[&t], Some(lambda))?;
        let classical = agent.actor_gradient(&[&t], None)?;
        let shift: f64 = ea
            .grads
            .flatten()
            .iter()
            .zip(classical.grads.flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        println!(
            "{name:<12} bounds [{:.3}, {:.3}]  penalty {:.5}  |g_ea - g_classical| {shift:.5}",
            t.bounds.min[0], t.bounds.max[0], ea.report.penalty
        );
    }
    Ok(())
}
