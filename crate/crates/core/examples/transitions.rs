//! The five transition models behind every decision value, fitted on
//! simulated plays and compared with the world's true expectations.
//!
//! ```text
//! cargo run --release --example transitions
//! ```

use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::synthetic::{simulate_history, OracleComponents, World, WorldConfig};
use fourthdown::transition::TransitionModel;

fn main() -> anyhow::Result<()> {
    let world = World::new(WorldConfig::default())?;
    let oracle = OracleComponents::new(&world);
    let (_, fit) = fit_decision_model(simulate_history(&world, 500, 5), &FitConfig::small())?;
    let tm = &fit.model.transitions;

    println!("field goal make probability (fitted vs true); imputed misses pull long kicks to zero");
    for y in [5.0, 15.0, 25.0, 35.0, 45.0, 55.0, 70.0, 85.0] {
        println!("  {y:>4} yards out: {:.3} vs {:.3}", tm.fg_make_prob(y, 0.0), oracle.fg_make_prob(y, 0.0));
    }

    println!("\nexpected opponent yardline after a punt");
    for y in [35.0, 50.0, 65.0, 80.0, 95.0] {
        println!("  from {y:>4}: {:5.1} vs {:5.1}", tm.punt_next_yardline(y, 0.0), oracle.punt_next_yardline(y, 0.0));
    }

    println!("\nfourth-down conversion probability and mean gains");
    for z in [1.0, 2.0, 4.0, 7.0, 10.0] {
        println!(
            "  4th & {z:<3} p = {:.3} vs {:.3}   gain if converted {:5.2}, if not {:5.2}",
            tm.conversion_prob(z, 4, 0.0),
            oracle.conversion_prob(z, 4, 0.0),
            tm.success_gain(60.0, z, 4, 0.0),
            tm.failure_gain(z, 4, 0.0),
        );
    }
    Ok(())
}
