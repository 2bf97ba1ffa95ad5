//! Tabulates the admissible action interval of the comfort rule as the
//! indoor temperature sweeps across a 21-25 °C band.

use rulebound::rules::{comfort_bounds, ComfortRuleConfig};

fn main() -> rulebound::Result<()> {
    let (lower, upper) = (21.0, 25.0);
    let rules = [(0.0, 1.0), (0.0, 0.5), (0.0, 0.25), (0.5, 1.0)];
    let cfgs = rules
        .iter()
        .map(|&(m, n)| ComfortRuleConfig::new(m, n))
        .collect::<rulebound::Result<Vec<_>>>()?;

    print!("{:>6}", "T");
    for (m, n) in rules {
        print!("  {:>15}", format!("m={m} n={n}"));
    }
    println!();
    for i in 0..=28 {
        let t = 19.5 + 0.25 * i as f64;
        print!("{t:>6.2}");
        for cfg in &cfgs {
            let b = comfort_bounds(t, lower, upper, cfg);
            print!("  [{:>6.3},{:>6.3}]", b.min[0], b.max[0]);
        }
        println!();
    }
    Ok(())
}
