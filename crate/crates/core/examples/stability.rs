//! Is B large enough? Refit the bootstrap several times with independent
//! seeds and check how often each play lands in the same confidence bin.
//!
//! ```text
//! cargo run --release --example stability
//! ```

use fourthdown::bootstrap::{stability_analysis, StabilityConfig};
use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::synthetic::{sample_fourth_down_states, simulate_history, World, WorldConfig};

fn main() -> anyhow::Result<()> {
    let world = World::new(WorldConfig::default())?;
    let config = FitConfig::small();
    let (data, fit) = fit_decision_model(simulate_history(&world, 300, 21), &config)?;
    let states = sample_fourth_down_states(&world, 100, 22);

    let study = StabilityConfig { bs: vec![5, 11, 31], m: 6, seed: 23, fraction: 1.0 };
    let table = stability_analysis(&data, &fit.model, &fit.params, &config, &states, &study)?;
    println!("{}", table.setup);
    println!("{:>4} {:>4} {:>8} {:>14}", "B", "M", "mean p", "always same");
    for row in &table.rows {
        println!("{:>4} {:>4} {:>8.3} {:>13.0}%", row.b, row.m, row.mean_p, 100.0 * row.share_at_one);
    }
    Ok(())
}
