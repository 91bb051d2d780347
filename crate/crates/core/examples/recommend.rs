//! Fit a bootstrap ensemble and ask how sure it is about one recommendation:
//! the share of replicates that agree (boot%), the confidence bin, and an
//! interval for the gain in win probability.
//!
//! ```text
//! cargo run --release --example recommend
//! ```

use fourthdown::bootstrap::{fit_ensemble, ResamplePlan};
use fourthdown::engine::FourthDownState;
use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::synthetic::{simulate_history, World, WorldConfig};

fn main() -> anyhow::Result<()> {
    let world = World::new(WorldConfig::default())?;
    let config = FitConfig::small();
    let (data, fit) = fit_decision_model(simulate_history(&world, 400, 9), &config)?;
    let ensemble = fit_ensemble(&data, fit.model, &fit.params, ResamplePlan::new(1, 51, 1.0)?, &config)?;

    for (yardline, ydstogo) in [(36, 2), (60, 1), (3, 3), (75, 8)] {
        let state = FourthDownState {
            yardline,
            ydstogo,
            game_seconds_remaining: 1500,
            score_differential: -3,
            ..FourthDownState::template()
        };
        let r = ensemble.report(&state, 0.9)?;
        println!(
            "4th & {ydstogo:<2} at {yardline:>2}: {:<4} by {:+.2}%  boot% {:5.1}  {:<9} 90% interval [{:+.2}%, {:+.2}%]",
            r.decision.to_string(),
            100.0 * r.values.effect_size.unwrap_or(0.0),
            r.boot_pct,
            r.bin.to_string(),
            100.0 * r.ci_lo,
            100.0 * r.ci_hi,
        );
    }

    // Bootstrapped gains for one play, as a text histogram.
    let state = FourthDownState { yardline: 36, ydstogo: 2, ..FourthDownState::template() };
    let gains = ensemble.report(&state, 0.9)?.gains;
    println!("\ngains of the recommendation across {} replicates (percentage points):", gains.len());
    for lo in (-6..6).map(f64::from) {
        let n = gains.iter().filter(|g| (lo..lo + 1.0).contains(&(100.0 * **g))).count();
        println!("  [{lo:+3}, {:+3}) {}", lo + 1.0, "#".repeat(n));
    }
    Ok(())
}
