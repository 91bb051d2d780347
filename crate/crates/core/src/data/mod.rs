//! Play-by-play records, CSV ingestion, dataset splits and training pools.

mod ingest;
mod pools;
mod split;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ingest::{
    parse_plays, read_jsonl, write_jsonl, write_plays_csv, write_reject_log, ColumnMap, ParseOutcome,
    Reject, CANONICAL_COLUMNS,
};
pub use pools::{filter_training_pools, PoolSummary, TrainingPools, PUNT_POOL_MIN_YARDLINE};
pub use split::{filter_seasons, make_split, DatasetSplit, SplitFractions, SplitSummary};

/// Season grouping used as a game-state variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Era {
    #[serde(rename = "1999-2005")]
    Y1999To2005,
    #[serde(rename = "2006-2013")]
    Y2006To2013,
    #[serde(rename = "2014-2017")]
    Y2014To2017,
    #[serde(rename = "2018-2022")]
    Y2018On,
}

impl Era {
    /// Seasons from 2018 on share the last era. Seasons before 1999 have none.
    pub fn from_season(season: u16) -> Option<Era> {
        match season {
            1999..=2005 => Some(Era::Y1999To2005),
            2006..=2013 => Some(Era::Y2006To2013),
            2014..=2017 => Some(Era::Y2014To2017),
            s if s >= 2018 => Some(Era::Y2018On),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Roof {
    Closed,
    Dome,
    Open,
    Outdoors,
}

impl FromStr for Roof {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "closed" => Ok(Roof::Closed),
            "dome" => Ok(Roof::Dome),
            "open" => Ok(Roof::Open),
            "outdoors" => Ok(Roof::Outdoors),
            other => Err(format!("unknown roof '{other}'")),
        }
    }
}

impl fmt::Display for Roof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Roof::Closed => "closed",
            Roof::Dome => "dome",
            Roof::Open => "open",
            Roof::Outdoors => "outdoors",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayType {
    Go,
    FieldGoal,
    Punt,
    Kickoff,
    Other,
}

impl FromStr for PlayType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "go" => Ok(PlayType::Go),
            "field_goal" => Ok(PlayType::FieldGoal),
            "punt" => Ok(PlayType::Punt),
            "kickoff" => Ok(PlayType::Kickoff),
            "other" => Ok(PlayType::Other),
            other => Err(format!("unknown play_type '{other}'")),
        }
    }
}

impl fmt::Display for PlayType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlayType::Go => "go",
            PlayType::FieldGoal => "field_goal",
            PlayType::Punt => "punt",
            PlayType::Kickoff => "kickoff",
            PlayType::Other => "other",
        })
    }
}

/// One historical play, described by the game state at its start.
///
/// `yardline` counts yards to the opponent's endzone: 0 marks a touchdown and
/// 100 a safety. Both are terminal markers and never enter a training pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayRecord {
    pub game_id: String,
    pub drive_id: String,
    pub play_index: u32,
    pub season: u16,
    pub era: Era,
    pub win_loss: bool,
    pub game_seconds_remaining: u32,
    pub score_differential: i32,
    pub total_score: u32,
    pub posteam_spread: f64,
    pub total_points_line: f64,
    pub yardline: u8,
    pub ydstogo: u8,
    pub down: u8,
    pub posteam_timeouts: u8,
    pub defteam_timeouts: u8,
    pub receive_2h_ko: bool,
    pub home: bool,
    pub roof: Roof,
    pub posteam_coach: String,
    pub kicker_id: Option<String>,
    pub punter_id: Option<String>,
    pub play_type: PlayType,
    pub yards_gained: Option<i32>,
    pub fg_made: Option<bool>,
    pub next_yardline_after_punt: Option<u8>,
}

impl PlayRecord {
    /// Checks every per-row invariant, returning the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.yardline > 100 {
            return Err(format!("yardline {} outside [0, 100]", self.yardline));
        }
        if self.ydstogo == 0 {
            return Err("ydstogo must be positive".into());
        }
        if self.yardline >= 1 && self.ydstogo > self.yardline {
            return Err("ydstogo exceeds yardline".into());
        }
        if !(1..=3600).contains(&self.game_seconds_remaining) {
            return Err(format!(
                "game_seconds_remaining {} outside [1, 3600]",
                self.game_seconds_remaining
            ));
        }
        if !(1..=4).contains(&self.down) {
            return Err(format!("down {} outside {{1,2,3,4}}", self.down));
        }
        if self.posteam_timeouts > 3 || self.defteam_timeouts > 3 {
            return Err("timeouts outside {0..3}".into());
        }
        if Era::from_season(self.season) != Some(self.era) {
            return Err(format!("era does not match season {}", self.season));
        }
        if !self.posteam_spread.is_finite() || !self.total_points_line.is_finite() {
            return Err("non-finite betting line".into());
        }
        if let Some(next) = self.next_yardline_after_punt {
            if next > 100 {
                return Err(format!("next_yardline_after_punt {next} outside [0, 100]"));
            }
        }
        Ok(())
    }

    /// Terminal touchdown / safety markers are not decision states.
    pub fn is_terminal_marker(&self) -> bool {
        self.yardline == 0 || self.yardline == 100
    }

    /// Chronological sort key: season, then game, then play order.
    pub fn chrono_key(&self) -> (u16, &str, u32) {
        (self.season, self.game_id.as_str(), self.play_index)
    }
}
