//! One fourth-down decision, broken down into the branch probabilities and
//! win probabilities that make up each option, next to the values the
//! synthetic world says are correct.
//!
//! ```text
//! cargo run --release --example decision
//! ```

use fourthdown::engine::{format_breakdown, FourthDownState};
use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::synthetic::{simulate_history, OracleComponents, World, WorldConfig};

fn main() -> anyhow::Result<()> {
    let world = World::new(WorldConfig::default())?;
    let config = FitConfig::small();
    let (_, fit) = fit_decision_model(simulate_history(&world, 500, 3), &config)?;

    let state = FourthDownState {
        yardline: 36,
        ydstogo: 2,
        game_seconds_remaining: 1200,
        score_differential: -3,
        ..FourthDownState::template()
    };
    println!("fitted model:");
    print!("{}", format_breakdown(&fit.model.breakdown(&state, &config.availability)?));

    let oracle = OracleComponents::new(&world);
    let truth = oracle.values(&state)?;
    println!(
        "\ntrue values: go {:.3}, fg {:?}, punt {:?}; best {}",
        truth.wp_go, truth.wp_fg, truth.wp_punt, truth.best
    );
    Ok(())
}
