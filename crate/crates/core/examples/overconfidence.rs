//! How often are recommendations confident? Bins every fourth-down decision
//! in a simulated history by its effect size and shows the share of
//! confident, lean and uncertain calls in each bin.
//!
//! ```text
//! cargo run --release --example overconfidence
//! ```

use fourthdown::bootstrap::{fit_ensemble, fourth_down_states, overconfidence_summary, ResamplePlan};
use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::synthetic::{simulate_history, World, WorldConfig};

fn main() -> anyhow::Result<()> {
    let world = World::new(WorldConfig::default())?;
    let config = FitConfig::small();
    let (data, fit) = fit_decision_model(simulate_history(&world, 400, 8), &config)?;
    let ensemble = fit_ensemble(&data, fit.model, &fit.params, ResamplePlan::new(3, 51, 1.0)?, &config)?;

    let states = fourth_down_states(&data.plays, &data.quality.inputs);
    let summary = overconfidence_summary(&states, &ensemble, 0.9)?;
    let mut csv = Vec::new();
    summary.write_csv(&mut csv)?;
    print!("{}", String::from_utf8(csv)?);
    println!(
        "\n{} decisions: {:.0}% confident, {:.0}% lean, {:.0}% uncertain",
        summary.n,
        100.0 * summary.confident,
        100.0 * summary.lean,
        100.0 * summary.uncertain
    );
    Ok(())
}
