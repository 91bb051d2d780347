//! Model what coaches actually do on fourth down, then measure how often
//! they follow confident recommendations.
//!
//! ```text
//! cargo run --release --example coach
//! ```

use fourthdown::bootstrap::{fit_ensemble, ResamplePlan};
use fourthdown::coach::{coach_agreement, fit_coach};
use fourthdown::engine::FourthDownState;
use fourthdown::gbt::GbtParams;
use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::synthetic::{simulate_history, World, WorldConfig};

fn main() -> anyhow::Result<()> {
    let world = World::new(WorldConfig::default())?;
    let plays = simulate_history(&world, 400, 12);

    let params = GbtParams { n_rounds: 100, min_child_weight: 20.0, early_stopping: None, ..GbtParams::default() };
    let coach = fit_coach(&plays, &params)?;
    println!("coach model: {} plays, log-loss {:.3}", coach.n_plays, coach.log_loss);
    for (feature, share) in coach.model.importance() {
        println!("  {feature:<24} {share:.3}");
    }
    for (y, z) in [(36, 2), (60, 1), (20, 6), (75, 4)] {
        let state = FourthDownState { yardline: y, ydstogo: z, ..FourthDownState::template() };
        let p = coach.model.probs(&state, 2022);
        println!("  4th & {z} at {y}: go {:.2} fg {:.2} punt {:.2}", p.p_go, p.p_fg, p.p_punt);
    }

    let config = FitConfig::small();
    let (data, fit) = fit_decision_model(plays, &config)?;
    let ensemble = fit_ensemble(&data, fit.model, &fit.params, ResamplePlan::new(4, 51, 1.0)?, &config)?;
    let table = coach_agreement(&data.plays, &data.quality.inputs, &ensemble, 0.9)?;
    let pct = |r: Option<f64>| r.map_or("-".to_string(), |r| format!("{:.0}%", 100.0 * r));
    println!("\non confident recommendations coaches agreed {}", pct(table.overall.rate()));
    println!("  when the model says kick: {}", pct(table.model_says_kick.rate()));
    println!("  when the model says go:   {}", pct(table.model_says_go.rate()));
    Ok(())
}
