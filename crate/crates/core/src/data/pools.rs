use serde::Serialize;

use super::{PlayRecord, PlayType};

/// Indices into a play slice, one list per model that trains on the plays.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrainingPools {
    /// Punts from beyond the 30 with a recorded next yardline.
    pub punt: Vec<usize>,
    /// Field goal attempts with a recorded outcome.
    pub fg: Vec<usize>,
    /// Third- and fourth-down attempts to gain yards.
    pub conversion: Vec<usize>,
    pub first_down: Vec<usize>,
    /// Fourth-down plays where one of the three decisions was taken.
    pub fourth_down: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PoolSummary {
    pub punt: usize,
    pub fg: usize,
    pub conversion: usize,
    pub first_down: usize,
    pub fourth_down: usize,
    pub empty: Vec<&'static str>,
}

/// Minimum yardline (exclusive) for a punt to enter the punt pool.
pub const PUNT_POOL_MIN_YARDLINE: u8 = 30;

pub fn filter_training_pools(plays: &[PlayRecord]) -> TrainingPools {
    let mut pools = TrainingPools::default();
    for (i, p) in plays.iter().enumerate() {
        if p.is_terminal_marker() {
            continue;
        }
        match p.play_type {
            PlayType::Punt
                if p.yardline > PUNT_POOL_MIN_YARDLINE && p.next_yardline_after_punt.is_some() =>
            {
                pools.punt.push(i)
            }
            PlayType::FieldGoal if p.fg_made.is_some() => pools.fg.push(i),
            PlayType::Go if matches!(p.down, 3 | 4) && p.yards_gained.is_some() => {
                pools.conversion.push(i)
            }
            _ => {}
        }
        if p.down == 1 {
            pools.first_down.push(i);
        }
        if p.down == 4 && matches!(p.play_type, PlayType::Go | PlayType::FieldGoal | PlayType::Punt) {
            pools.fourth_down.push(i);
        }
    }
    pools
}

impl TrainingPools {
    pub fn summary(&self) -> PoolSummary {
        let counts = [
            ("punt", self.punt.len()),
            ("fg", self.fg.len()),
            ("conversion", self.conversion.len()),
            ("first_down", self.first_down.len()),
            ("fourth_down", self.fourth_down.len()),
        ];
        PoolSummary {
            punt: counts[0].1,
            fg: counts[1].1,
            conversion: counts[2].1,
            first_down: counts[3].1,
            fourth_down: counts[4].1,
            empty: counts.iter().filter(|(_, n)| *n == 0).map(|(k, _)| *k).collect(),
        }
    }
}
