use serde::{Deserialize, Serialize};

use crate::data::PlayRecord;
use crate::gbt::WpFeatureRow;
use crate::quality::QualityInputs;

/// The game state at a fourth down, from the perspective of the team with
/// the ball.
///
/// `kq`/`pq` describe the offense's specialists and `opp_kq`/`opp_pq` the
/// opponent's; both default to league average (0). The quality fields are
/// on the standardized scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourthDownState {
    pub yardline: u8,
    pub ydstogo: u8,
    pub game_seconds_remaining: u32,
    pub score_differential: i32,
    #[serde(default)]
    pub posteam_spread: f64,
    #[serde(default = "default_total_line")]
    pub total_points_line: f64,
    #[serde(default = "three")]
    pub posteam_timeouts: u8,
    #[serde(default = "three")]
    pub defteam_timeouts: u8,
    #[serde(default)]
    pub receive_2h_ko: bool,
    #[serde(default)]
    pub home: bool,
    #[serde(default)]
    pub total_score: u32,
    #[serde(default)]
    pub kq: f64,
    #[serde(default)]
    pub pq: f64,
    #[serde(default)]
    pub opp_kq: f64,
    #[serde(default)]
    pub opp_pq: f64,
    #[serde(default)]
    pub delta_tq_off: f64,
    #[serde(default)]
    pub delta_tq_def: f64,
}

fn three() -> u8 {
    3
}

fn default_total_line() -> f64 {
    44.0
}

/// A rejected state field and the reason.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl FieldError {
    fn new(field: &'static str, message: impl Into<String>) -> Self {
        FieldError { field, message: message.into() }
    }
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl FourthDownState {
    /// A neutral midfield-ish template: tied, kickoff-time clock, even teams.
    pub fn template() -> Self {
        FourthDownState {
            yardline: 50,
            ydstogo: 5,
            game_seconds_remaining: 1800,
            score_differential: 0,
            posteam_spread: 0.0,
            total_points_line: default_total_line(),
            posteam_timeouts: 3,
            defteam_timeouts: 3,
            receive_2h_ko: false,
            home: false,
            total_score: 0,
            kq: 0.0,
            pq: 0.0,
            opp_kq: 0.0,
            opp_pq: 0.0,
            delta_tq_off: 0.0,
            delta_tq_def: 0.0,
        }
    }

    /// The state of a recorded play, with the offense's specialist and team
    /// quality taken from `quality` at `index`; the opponent's specialists
    /// stay at league average.
    pub fn from_play(play: &PlayRecord, quality: &QualityInputs, index: usize) -> Self {
        let q = |v: &[f64]| v.get(index).copied().unwrap_or(0.0);
        FourthDownState {
            yardline: play.yardline,
            ydstogo: play.ydstogo,
            game_seconds_remaining: play.game_seconds_remaining,
            score_differential: play.score_differential,
            posteam_spread: play.posteam_spread,
            total_points_line: play.total_points_line,
            posteam_timeouts: play.posteam_timeouts,
            defteam_timeouts: play.defteam_timeouts,
            receive_2h_ko: play.receive_2h_ko,
            home: play.home,
            total_score: play.total_score,
            kq: q(&quality.kq),
            pq: q(&quality.pq),
            opp_kq: 0.0,
            opp_pq: 0.0,
            delta_tq_off: q(&quality.delta_tq_off),
            delta_tq_def: q(&quality.delta_tq_def),
        }
    }

    /// Every violated invariant, one entry per offending field.
    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errs = Vec::new();
        if !(1..=99).contains(&self.yardline) {
            errs.push(FieldError::new("yardline", format!("{} outside [1, 99]", self.yardline)));
        }
        if self.ydstogo == 0 {
            errs.push(FieldError::new("ydstogo", "must be at least 1"));
        } else if self.ydstogo > self.yardline {
            errs.push(FieldError::new("ydstogo", "ydstogo exceeds yardline"));
        }
        if !(1..=3600).contains(&self.game_seconds_remaining) {
            errs.push(FieldError::new(
                "game_seconds_remaining",
                format!("{} outside [1, 3600]", self.game_seconds_remaining),
            ));
        }
        if self.posteam_timeouts > 3 {
            errs.push(FieldError::new("posteam_timeouts", "must be in 0..=3"));
        }
        if self.defteam_timeouts > 3 {
            errs.push(FieldError::new("defteam_timeouts", "must be in 0..=3"));
        }
        let reals = [
            ("posteam_spread", self.posteam_spread),
            ("total_points_line", self.total_points_line),
            ("kq", self.kq),
            ("pq", self.pq),
            ("opp_kq", self.opp_kq),
            ("opp_pq", self.opp_pq),
            ("delta_tq_off", self.delta_tq_off),
            ("delta_tq_def", self.delta_tq_def),
        ];
        for (name, v) in reals {
            if !v.is_finite() {
                errs.push(FieldError::new(name, "must be finite"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// First-down inputs for the offense with the ball at `yardline`.
    pub fn first_down_row(&self, yardline: f64) -> WpFeatureRow {
        WpFeatureRow {
            score_differential: f64::from(self.score_differential),
            game_seconds_remaining: f64::from(self.game_seconds_remaining),
            posteam_spread: self.posteam_spread,
            yardline,
            receive_2h_ko: self.receive_2h_ko,
            posteam_timeouts: f64::from(self.posteam_timeouts),
            defteam_timeouts: f64::from(self.defteam_timeouts),
            total_score: f64::from(self.total_score),
        }
    }
}

/// Hands the ball to the opponent after the offense scores `score_delta`
/// points, with the opponent facing first down at `next_yardline`.
///
/// Everything relative to the team with the ball is mirrored: the score and
/// spread are negated, timeouts, team-quality sides and specialists swap,
/// and the second-half kickoff and home flags flip. The clock is untouched.
pub fn flip_state(state: &FourthDownState, score_delta: i32, next_yardline: u8) -> FourthDownState {
    FourthDownState {
        yardline: next_yardline,
        ydstogo: next_yardline.min(10),
        game_seconds_remaining: state.game_seconds_remaining,
        score_differential: -(state.score_differential + score_delta),
        posteam_spread: -state.posteam_spread,
        total_points_line: state.total_points_line,
        posteam_timeouts: state.defteam_timeouts,
        defteam_timeouts: state.posteam_timeouts,
        receive_2h_ko: !state.receive_2h_ko,
        home: !state.home,
        total_score: state.total_score.saturating_add_signed(score_delta),
        kq: state.opp_kq,
        pq: state.opp_pq,
        opp_kq: state.kq,
        opp_pq: state.pq,
        delta_tq_off: state.delta_tq_def,
        delta_tq_def: state.delta_tq_off,
    }
}

/// The opponent's first-down inputs after a change of possession, at a
/// possibly fractional (expected) yardline.
pub fn flipped_first_down(state: &FourthDownState, score_delta: i32, next_yardline: f64) -> WpFeatureRow {
    let flipped = flip_state(state, score_delta, 50);
    flipped.first_down_row(next_yardline)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_negates_and_swaps() {
        let mut s = FourthDownState::template();
        s.score_differential = 3;
        s.posteam_timeouts = 1;
        s.posteam_spread = -4.5;
        s.kq = 1.2;
        s.delta_tq_off = 0.7;
        let f = flip_state(&s, 0, 75);
        assert_eq!(f.score_differential, -3);
        assert_eq!(f.posteam_spread, 4.5);
        assert_eq!((f.posteam_timeouts, f.defteam_timeouts), (3, 1));
        assert!(f.receive_2h_ko);
        assert_eq!(f.opp_kq, 1.2);
        assert_eq!(f.kq, 0.0);
        assert_eq!(f.delta_tq_def, 0.7);
        assert_eq!(f.game_seconds_remaining, s.game_seconds_remaining);
        assert_eq!(flip_state(&s, 3, 75).score_differential, -6);
        assert_eq!(flip_state(&s, 3, 75).total_score, 3);
    }

    #[test]
    fn flip_is_an_involution() {
        let mut s = FourthDownState::template();
        s.yardline = 37;
        s.ydstogo = 10;
        s.score_differential = -11;
        s.pq = -0.4;
        s.opp_pq = 0.9;
        s.home = true;
        assert_eq!(flip_state(&flip_state(&s, 0, 63), 0, 37), s);
    }

    #[test]
    fn fractional_flip_agrees_with_integer_flip() {
        let s = FourthDownState::template();
        let a = flipped_first_down(&s, 7, 75.0);
        let b = flip_state(&s, 7, 75).first_down_row(75.0);
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_fields_are_reported_individually() {
        let mut s = FourthDownState::template();
        s.yardline = 10;
        s.ydstogo = 15;
        s.game_seconds_remaining = 0;
        let errs = s.validate().unwrap_err();
        assert_eq!(errs[0].message, "ydstogo exceeds yardline");
        assert_eq!(errs[1].field, "game_seconds_remaining");
    }
}
