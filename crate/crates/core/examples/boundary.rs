//! The decision boundary over field position and distance, as a text map:
//! uppercase where at least 83% of the bootstrap replicates agree, lowercase
//! otherwise.
//!
//! ```text
//! cargo run --release --example boundary
//! ```

use fourthdown::bootstrap::{fit_ensemble, GridMode, ResamplePlan};
use fourthdown::engine::{Decision, FourthDownState};
use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::synthetic::{simulate_history, World, WorldConfig};

fn main() -> anyhow::Result<()> {
    let world = World::new(WorldConfig::default())?;
    let config = FitConfig::small();
    let (data, fit) = fit_decision_model(simulate_history(&world, 400, 4), &config)?;
    let ensemble = fit_ensemble(&data, fit.model, &fit.params, ResamplePlan::new(2, 21, 1.0)?, &config)?;

    let template = FourthDownState { game_seconds_remaining: 2400, ..FourthDownState::template() };
    let cells = ensemble.boundary(&template, 1..=99, 1..=10, GridMode::Boot)?;

    println!("rows: ydstogo 10..1; columns: yards to the end zone 99..1 (every other yard)");
    println!("G go, F field goal, P punt; lowercase = boot% below 83");
    for z in (1..=10u8).rev() {
        let mut row = format!("{z:>2} ");
        for y in (1..=99u8).rev().step_by(2) {
            let cell = cells.iter().find(|c| c.yardline == y && c.ydstogo == z).expect("full grid");
            row.push(match cell.value {
                None => ' ',
                Some(v) => {
                    let c = match v.best {
                        Decision::Go => 'G',
                        Decision::FieldGoal => 'F',
                        Decision::Punt => 'P',
                    };
                    if v.boot_pct.unwrap_or(0.0) >= 83.0 { c } else { c.to_ascii_lowercase() }
                }
            });
        }
        println!("{row}");
    }
    Ok(())
}
