//! Specialist quality: decayed, shrunken running means of kicking and
//! punting residuals, plus the market-derived team quality edge.
//!
//! ```text
//! cargo run --release --example quality
//! ```

use fourthdown::pipeline::FitConfig;
use fourthdown::quality::{fit_quality, rolling_quality, team_quality_raw, write_quality_table, QualityParams};
use fourthdown::synthetic::{simulate_history, World, WorldConfig};

fn main() -> anyhow::Result<()> {
    // A kicker who makes ten kicks worth +0.2 each over baseline, then
    // misses three worth -0.8: shrinkage keeps early estimates near zero.
    let residuals: Vec<f64> = std::iter::repeat_n(0.2, 10).chain(std::iter::repeat_n(-0.8, 3)).collect();
    let QualityParams { gamma, alpha } = QualityParams::KICKER;
    let q = rolling_quality(&residuals, gamma, alpha);
    println!("kicker quality before each attempt: {:?}", q.iter().map(|v| format!("{v:+.4}")).collect::<Vec<_>>());
    println!("weight of a kick 45 attempts ago: {:.3}", alpha.powi(45));

    let (off, def) = team_quality_raw(-6.5, 47.5);
    println!("favored by 6.5 with a 47.5 total: implied points for {off}, against {def}");

    let world = World::new(WorldConfig::default())?;
    let plays = simulate_history(&world, 200, 31);
    let fit = fit_quality(&plays, &FitConfig::default().quality)?;
    let mut table = Vec::new();
    write_quality_table(&mut table, &fit.kicker_table)?;
    let text = String::from_utf8(table)?;
    println!("\nkicker table, standardized across the league (first rows):");
    for line in text.lines().take(6) {
        println!("  {line}");
    }
    Ok(())
}
