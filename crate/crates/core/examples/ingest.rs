//! Parse a play-by-play CSV whose headers differ from the canonical names,
//! keep the valid rows, and see why the others were rejected.
//!
//! ```text
//! cargo run --release --example ingest
//! ```

use std::io::Cursor;

use fourthdown::data::{filter_training_pools, parse_plays, write_plays_csv, write_reject_log, ColumnMap};
use fourthdown::synthetic::{simulate_history, World, WorldConfig};

fn main() -> anyhow::Result<()> {
    // A small simulated export stands in for a real one.
    let world = World::new(WorldConfig::default())?;
    let plays = simulate_history(&world, 20, 1);
    let mut csv = Vec::new();
    write_plays_csv(&mut csv, &plays)?;
    let mut text = String::from_utf8(csv)?;

    // Rename two columns the way a different data provider might, and break
    // one row: fourth and 15 from the 10 is not a possible state.
    text = text.replacen("yardline,ydstogo", "yardline_100,distance", 1);
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let bad = lines.iter().position(|l| l.contains(",4,") && l.contains(",punt,")).unwrap_or(1);
    let mut fields: Vec<String> = lines[bad].split(',').map(str::to_owned).collect();
    fields[10] = "10".into();
    fields[11] = "15".into();
    lines[bad] = fields.join(",");

    let map = ColumnMap::from_toml_str("yardline = \"yardline_100\"\nydstogo = \"distance\"\n")?;
    let out = parse_plays(Cursor::new(lines.join("\n")), &map)?;
    println!("{} rows read, {} accepted, {} rejected", out.rows_read, out.plays.len(), out.rejects.len());

    let mut log = Vec::new();
    write_reject_log(&mut log, &out.rejects)?;
    print!("{}", String::from_utf8(log)?);

    let pools = filter_training_pools(&out.plays).summary();
    println!("\ntraining pools: {}", serde_json::to_string_pretty(&pools)?);
    Ok(())
}
