use std::collections::{BTreeSet, HashSet};
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PlayRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub tune: f64,
    pub test: f64,
}

impl SplitFractions {
    pub const fn new(train: f64, tune: f64, test: f64) -> Self {
        SplitFractions { train, tune, test }
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        // Half of the games are held out; the rest is halved again for tuning.
        SplitFractions::new(0.25, 0.25, 0.5)
    }
}

/// A partition of games (never of plays) into train, tune and test sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_game_ids: BTreeSet<String>,
    pub tune_game_ids: BTreeSet<String>,
    pub test_game_ids: BTreeSet<String>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SplitSummary {
    pub train_games: usize,
    pub tune_games: usize,
    pub test_games: usize,
    pub train_plays: usize,
    pub tune_plays: usize,
    pub test_first_down_plays: usize,
}

/// Randomly partitions games. Partitions with a zero fraction stay empty;
/// every partition with a positive fraction receives at least one game.
pub fn make_split(plays: &[PlayRecord], fractions: SplitFractions, seed: u64) -> Result<DatasetSplit> {
    let parts = [fractions.train, fractions.tune, fractions.test];
    if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::Split("fractions must lie in [0, 1]".into()));
    }
    if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Split("fractions must sum to 1".into()));
    }
    let mut games: Vec<&str> = plays
        .iter()
        .map(|p| p.game_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let requested = parts.iter().filter(|&&f| f > 0.0).count();
    if games.len() < requested {
        return Err(Error::Split(format!(
            "{} game(s) cannot fill {requested} non-empty partitions",
            games.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    games.shuffle(&mut rng);

    let n = games.len();
    let mut counts = [0usize; 3];
    for (c, &f) in counts.iter_mut().zip(&parts) {
        *c = (f * n as f64).round() as usize;
    }
    // Guarantee each requested partition a game, then absorb rounding into
    // the largest partition.
    for (c, &f) in counts.iter_mut().zip(&parts) {
        if f > 0.0 && *c == 0 {
            *c = 1;
        }
        if f == 0.0 {
            *c = 0;
        }
    }
    let largest = (0..3)
        .max_by(|&a, &b| parts[a].partial_cmp(&parts[b]).unwrap().then(b.cmp(&a)))
        .unwrap();
    let others: usize = (0..3).filter(|&i| i != largest).map(|i| counts[i]).sum();
    counts[largest] = n - others;

    let take = |from: usize, len: usize| -> BTreeSet<String> {
        games[from..from + len].iter().map(|g| g.to_string()).collect()
    };
    Ok(DatasetSplit {
        train_game_ids: take(0, counts[0]),
        tune_game_ids: take(counts[0], counts[1]),
        test_game_ids: take(counts[0] + counts[1], counts[2]),
        seed,
    })
}

impl DatasetSplit {
    /// All plays of the training games.
    pub fn train_plays<'a>(&self, plays: &'a [PlayRecord]) -> Vec<&'a PlayRecord> {
        plays
            .iter()
            .filter(|p| self.train_game_ids.contains(&p.game_id))
            .collect()
    }

    pub fn tune_plays<'a>(&self, plays: &'a [PlayRecord]) -> Vec<&'a PlayRecord> {
        plays
            .iter()
            .filter(|p| self.tune_game_ids.contains(&p.game_id))
            .collect()
    }

    /// The test set only exposes first-down plays.
    pub fn test_first_downs<'a>(&self, plays: &'a [PlayRecord]) -> Vec<&'a PlayRecord> {
        plays
            .iter()
            .filter(|p| p.down == 1 && !p.is_terminal_marker() && self.test_game_ids.contains(&p.game_id))
            .collect()
    }

    pub fn summary(&self, plays: &[PlayRecord]) -> SplitSummary {
        SplitSummary {
            train_games: self.train_game_ids.len(),
            tune_games: self.tune_game_ids.len(),
            test_games: self.test_game_ids.len(),
            train_plays: self.train_plays(plays).len(),
            tune_plays: self.tune_plays(plays).len(),
            test_first_down_plays: self.test_first_downs(plays).len(),
        }
    }

    pub fn is_disjoint(&self) -> bool {
        let a: HashSet<_> = self.train_game_ids.iter().collect();
        self.tune_game_ids.iter().all(|g| !a.contains(g))
            && self.test_game_ids.iter().all(|g| !a.contains(g))
            && self.tune_game_ids.is_disjoint(&self.test_game_ids)
    }
}

/// Keeps plays whose season lies in `seasons`.
pub fn filter_seasons(plays: &[PlayRecord], seasons: RangeInclusive<u16>) -> Vec<PlayRecord> {
    plays
        .iter()
        .filter(|p| seasons.contains(&p.season))
        .cloned()
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::data::{Era, PlayType, Roof};
    use proptest::prelude::*;

    pub(crate) fn toy_play(game: &str, index: u32) -> PlayRecord {
        PlayRecord {
            game_id: game.into(),
            drive_id: format!("{game}-1"),
            play_index: index,
            season: 2010,
            era: Era::Y2006To2013,
            win_loss: true,
            game_seconds_remaining: 1800,
            score_differential: 0,
            total_score: 0,
            posteam_spread: 0.0,
            total_points_line: 44.0,
            yardline: 75,
            ydstogo: 10,
            down: (index % 4 + 1) as u8,
            posteam_timeouts: 3,
            defteam_timeouts: 3,
            receive_2h_ko: false,
            home: true,
            roof: Roof::Outdoors,
            posteam_coach: "A".into(),
            kicker_id: None,
            punter_id: None,
            play_type: PlayType::Go,
            yards_gained: Some(0),
            fg_made: None,
            next_yardline_after_punt: None,
        }
    }

    fn games(n: usize) -> Vec<PlayRecord> {
        (0..n)
            .flat_map(|g| (0..3).map(move |i| toy_play(&format!("g{g:05}"), i)))
            .collect()
    }

    #[test]
    fn full_league_scale_split_covers_every_game() {
        let plays = games(4101);
        let split = make_split(&plays, SplitFractions::new(0.5, 0.25, 0.25), 11).unwrap();
        assert!(split.is_disjoint());
        let total = split.train_game_ids.len() + split.tune_game_ids.len() + split.test_game_ids.len();
        assert_eq!(total, 4101);
        assert_eq!(split.train_game_ids.len(), 2051);
    }

    #[test]
    fn same_seed_same_split() {
        let plays = games(50);
        let f = SplitFractions::default();
        assert_eq!(make_split(&plays, f, 3).unwrap(), make_split(&plays, f, 3).unwrap());
        assert_ne!(make_split(&plays, f, 3).unwrap(), make_split(&plays, f, 4).unwrap());
    }

    #[test]
    fn too_few_games_is_an_error() {
        let plays = games(1);
        assert!(make_split(&plays, SplitFractions::new(0.5, 0.5, 0.0), 1).is_err());
        assert!(make_split(&plays, SplitFractions::new(1.0, 0.0, 0.0), 1).is_ok());
    }

    #[test]
    fn test_partition_exposes_first_downs_only() {
        let plays = games(20);
        let split = make_split(&plays, SplitFractions::default(), 5).unwrap();
        assert!(split.test_first_downs(&plays).iter().all(|p| p.down == 1));
        assert!(split.train_plays(&plays).iter().any(|p| p.down != 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn partition_property(n in 3usize..200, seed in any::<u64>()) {
            let plays = games(n);
            let split = make_split(&plays, SplitFractions::default(), seed).unwrap();
            prop_assert!(split.is_disjoint());
            let total = split.train_game_ids.len() + split.tune_game_ids.len() + split.test_game_ids.len();
            prop_assert_eq!(total, n);
            prop_assert!(!split.train_game_ids.is_empty());
            prop_assert!(!split.tune_game_ids.is_empty());
            prop_assert!(!split.test_game_ids.is_empty());
        }
    }
}
