//! Fit the first-down win probability model and compare it with the
//! alternatives on held-out games, then check it against the synthetic
//! world's exact win probabilities.
//!
//! ```text
//! cargo run --release --example win_probability
//! ```

use fourthdown::data::{make_split, SplitFractions};
use fourthdown::gbt::{run_contest, WpFeatureRow};
use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::synthetic::{simulate_history, World, WorldConfig};

fn main() -> anyhow::Result<()> {
    let world = World::new(WorldConfig::default())?;
    let plays = simulate_history(&world, 600, 11);
    let config = FitConfig::small();

    let split = make_split(&plays, SplitFractions::new(0.5, 0.25, 0.25), 1)?;
    println!("{:<52} {:>8} {:>10}", "model", "logloss", "vs coin");
    for row in run_contest(&plays, &split, &config.grid, &config.gbt)? {
        println!("{:<52} {:>8.4} {:>9.1}%", row.model, row.logloss, row.reduction_pct);
    }

    let (_, fit) = fit_decision_model(plays, &config)?;
    let wp = &fit.model.wp;
    println!("\nfeature importance (share of split gain):");
    for (name, share) in wp.importance_shares() {
        println!("  {name:<24} {share:.3}");
    }

    let spt = world.config().seconds_per_tick();
    println!("\nfirst and 10, tied, own 25 (75 yards to go):");
    for seconds in [3600, 1800, 600, 120] {
        let row = WpFeatureRow {
            score_differential: 0.0,
            game_seconds_remaining: f64::from(seconds),
            posteam_spread: 0.0,
            yardline: 75.0,
            receive_2h_ko: false,
            posteam_timeouts: 3.0,
            defteam_timeouts: 3.0,
            total_score: 0.0,
        };
        let truth = world.true_wp(seconds / spt, 0, 75);
        println!("  {seconds:>5} s left: model {:.3}, truth {truth:.3}", wp.predict(&row.to_array()));
    }
    Ok(())
}
