//! Runs the finite-difference audit of every analytic gradient in the crate.
//!
//!     cargo run --release --example gradient_check [-- cases]

use rulebound::gradcheck::{run_gradcheck, GradcheckConfig};

fn main() -> rulebound::Result<()> {
    let mut cfg = GradcheckConfig::default();
    if let Some(n) = std::env::args().nth(1).and_then(|a| a.parse().ok()) {
        cfg.cases = n;
    }
    let report = run_gradcheck(&cfg)?;
    print!("{}", report.render());
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
