//! The synthetic world is a small football game with exactly known win
//! probabilities. This example prints a few of them, then checks whether
//! bootstrap intervals fitted on simulated histories cover the true effect
//! of the recommended decision.
//!
//! ```text
//! cargo run --release --example synthetic_world
//! ```

use fourthdown::bootstrap::{fit_ensemble, ResamplePlan};
use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::synthetic::{sample_fourth_down_states, simulate_history, OracleComponents, World, WorldConfig};

fn main() -> anyhow::Result<()> {
    let world = World::new(WorldConfig::default())?;
    println!("{} states solved by backward induction", world.n_states());
    let ticks = world.config().ticks;
    for (s, y) in [(0, 75), (0, 25), (-7, 75), (7, 75)] {
        println!(
            "  first down, score {s:+}, {y} yards out: WP {:.3} at kickoff, {:.3} with 10 plays left",
            world.true_wp(ticks, s, y),
            world.true_wp(10, s, y)
        );
    }

    let oracle = OracleComponents::new(&world);
    let probes = sample_fourth_down_states(&world, 40, 77);
    let config = FitConfig::small();
    let (mut covered, mut total) = (0, 0);
    for h in 0..4 {
        let (data, fit) = fit_decision_model(simulate_history(&world, 300, 100 + h), &config)?;
        let ensemble = fit_ensemble(&data, fit.model, &fit.params, ResamplePlan::new(h, 31, 1.0)?, &config)?;
        for state in &probes {
            let r = ensemble.report(state, 0.9)?;
            let truth = oracle.values(state)?.gain_of(r.decision).unwrap_or(0.0);
            covered += usize::from(r.ci_lo <= truth && truth <= r.ci_hi);
            total += 1;
        }
        println!("history {h}: running coverage {:.1}%", 100.0 * covered as f64 / total as f64);
    }
    Ok(())
}
