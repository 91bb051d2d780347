use serde::{Deserialize, Serialize};

use crate::data::PlayRecord;

/// The first-down win probability inputs. `score_time_ratio` is derived on
/// demand and never stored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WpFeatureRow {
    pub score_differential: f64,
    pub game_seconds_remaining: f64,
    pub posteam_spread: f64,
    pub yardline: f64,
    pub receive_2h_ko: bool,
    pub posteam_timeouts: f64,
    pub defteam_timeouts: f64,
    pub total_score: f64,
}

pub const WP_FEATURE_NAMES: [&str; 9] = [
    "score_differential",
    "game_seconds_remaining",
    "posteam_spread",
    "yardline",
    "receive_2h_ko",
    "posteam_timeouts",
    "defteam_timeouts",
    "total_score",
    "score_time_ratio",
];

/// Increasing in score, timeouts held and the score/time ratio; decreasing
/// in spread, distance to the endzone and opponent timeouts.
pub const WP_MONOTONE: [i8; 9] = [1, 0, -1, -1, 0, 1, -1, 0, 1];

impl WpFeatureRow {
    pub fn score_time_ratio(&self) -> f64 {
        self.score_differential / (0.01 + self.game_seconds_remaining)
    }

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.score_differential,
            self.game_seconds_remaining,
            self.posteam_spread,
            self.yardline,
            f64::from(u8::from(self.receive_2h_ko)),
            self.posteam_timeouts,
            self.defteam_timeouts,
            self.total_score,
            self.score_time_ratio(),
        ]
    }

    pub fn from_play(p: &PlayRecord) -> Self {
        WpFeatureRow {
            score_differential: f64::from(p.score_differential),
            game_seconds_remaining: f64::from(p.game_seconds_remaining),
            posteam_spread: p.posteam_spread,
            yardline: f64::from(p.yardline),
            receive_2h_ko: p.receive_2h_ko,
            posteam_timeouts: f64::from(p.posteam_timeouts),
            defteam_timeouts: f64::from(p.defteam_timeouts),
            total_score: f64::from(p.total_score),
        }
    }
}

pub fn wp_feature_names() -> Vec<String> {
    WP_FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// `score / sqrt(1 + seconds)`.
pub fn adjusted_score(score_differential: f64, seconds: f64) -> f64 {
    score_differential / (1.0 + seconds).sqrt()
}

/// The time-decay factor `exp(-4 (1 - 3600 / t))`, evaluated as written.
///
/// It grows without bound as `t` shrinks (already `e^36` at `t = 360`), so it
/// saturates at the largest finite float instead of overflowing.
pub fn baldwin_time_factor(seconds: f64) -> f64 {
    let f = (-4.0 * (1.0 - 3600.0 / seconds)).exp();
    if f.is_finite() {
        f
    } else {
        f64::MAX
    }
}

fn saturating_product(a: f64, factor: f64) -> f64 {
    (a * factor).clamp(-f64::MAX, f64::MAX)
}

pub fn spread_time(spread: f64, seconds: f64) -> f64 {
    saturating_product(spread, baldwin_time_factor(seconds))
}

pub fn diff_time_ratio(score_differential: f64, seconds: f64) -> f64 {
    saturating_product(score_differential, baldwin_time_factor(seconds))
}

/// Feature sets entered in the prediction contest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// The first-down model.
    Proposed,
    /// Score, clock, field position, down and distance, timeouts, spread,
    /// total points and the adjusted score; all downs, no constraints.
    LockNettleton,
    /// Score, clock, half clock, field position, down and distance, home,
    /// second-half kickoff, timeouts and the spread-time and
    /// diff-time-ratio interactions; all downs.
    Baldwin,
}

impl FeatureSet {
    pub fn names(self) -> Vec<String> {
        let names: &[&str] = match self {
            FeatureSet::Proposed => &WP_FEATURE_NAMES,
            FeatureSet::LockNettleton => &[
                "score_differential",
                "game_seconds_remaining",
                "yardline",
                "down",
                "ydstogo",
                "posteam_timeouts",
                "defteam_timeouts",
                "posteam_spread",
                "total_score",
                "adjusted_score",
            ],
            FeatureSet::Baldwin => &[
                "score_differential",
                "game_seconds_remaining",
                "half_seconds_remaining",
                "yardline",
                "down",
                "ydstogo",
                "home",
                "receive_2h_ko",
                "posteam_timeouts",
                "defteam_timeouts",
                "spread_time",
                "diff_time_ratio",
            ],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn monotone(self) -> Vec<i8> {
        match self {
            FeatureSet::Proposed => WP_MONOTONE.to_vec(),
            FeatureSet::LockNettleton => vec![0; 10],
            FeatureSet::Baldwin => vec![1, 0, 0, -1, -1, -1, 0, 0, 1, -1, -1, 1],
        }
    }

    /// Whether the set trains on every down or on first downs only.
    pub fn all_downs(self) -> bool {
        !matches!(self, FeatureSet::Proposed)
    }

    pub fn extract(self, p: &PlayRecord) -> Vec<f64> {
        let s = f64::from(p.score_differential);
        let t = f64::from(p.game_seconds_remaining);
        match self {
            FeatureSet::Proposed => WpFeatureRow::from_play(p).to_array().to_vec(),
            FeatureSet::LockNettleton => vec![
                s,
                t,
                f64::from(p.yardline),
                f64::from(p.down),
                f64::from(p.ydstogo),
                f64::from(p.posteam_timeouts),
                f64::from(p.defteam_timeouts),
                p.posteam_spread,
                f64::from(p.total_score),
                adjusted_score(s, t),
            ],
            FeatureSet::Baldwin => vec![
                s,
                t,
                if t > 1800.0 { t - 1800.0 } else { t },
                f64::from(p.yardline),
                f64::from(p.down),
                f64::from(p.ydstogo),
                f64::from(u8::from(p.home)),
                f64::from(u8::from(p.receive_2h_ko)),
                f64::from(p.posteam_timeouts),
                f64::from(p.defteam_timeouts),
                spread_time(p.posteam_spread, t),
                diff_time_ratio(s, t),
            ],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureSet::Proposed => "first-down model (boosted trees, first downs)",
            FeatureSet::LockNettleton => "Lock-Nettleton features (boosted trees, all downs)",
            FeatureSet::Baldwin => "Baldwin features (boosted trees, all downs)",
        }
    }
}
