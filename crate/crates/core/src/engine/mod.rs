//! Composition of first-down win probability and transition models into
//! fourth-down decision values.
//!
//! For a state `x` with the ball `y` yards from the endzone and `z` to go:
//!
//! - **Punt**: `1 - WP1(opponent at E[next yardline])`.
//! - **FG**: `P(make) (1 - WP1(opponent at 75, down 3 more)) +
//!   (1 - P(make)) (1 - WP1(opponent at min(80, 100 - (y + 7))))`.
//! - **Go**: `P(convert) WP1(own ball at y - E[gain | success]) +
//!   (1 - P(convert)) (1 - WP1(opponent at 100 - (y - E[gain | failure])))`.
//!   A success whose expected spot is past the goal line is scored as a
//!   touchdown (opponent at 75, down 7 more).
//!
//! Every yardline is clamped to `[1, 99]` before it reaches WP1, and the
//! clock is not advanced across the transition.

mod grid;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use grid::{boundary_grid, write_grid_csv, GridCell, GridValue};
pub use state::{flip_state, flipped_first_down, FieldError, FourthDownState};

use crate::data::PlayType;
use crate::error::{Error, Result};
use crate::gbt::{GbtModel, WpFeatureRow};
use crate::transition::{TransitionBundle, TransitionModel};

/// First-down win probability for the team with the ball.
pub trait FirstDownWp {
    fn wp1(&self, row: &WpFeatureRow) -> f64;
}

impl FirstDownWp for GbtModel {
    fn wp1(&self, row: &WpFeatureRow) -> f64 {
        self.predict(&row.to_array())
    }
}

impl<F: Fn(&WpFeatureRow) -> f64> FirstDownWp for F {
    fn wp1(&self, row: &WpFeatureRow) -> f64 {
        self(row)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Go,
    #[serde(rename = "fg")]
    FieldGoal,
    Punt,
}

impl Decision {
    pub const ALL: [Decision; 3] = [Decision::Go, Decision::FieldGoal, Decision::Punt];

    pub fn from_play_type(t: PlayType) -> Option<Decision> {
        match t {
            PlayType::Go => Some(Decision::Go),
            PlayType::FieldGoal => Some(Decision::FieldGoal),
            PlayType::Punt => Some(Decision::Punt),
            _ => None,
        }
    }

    pub fn is_kick(self) -> bool {
        !matches!(self, Decision::Go)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Go => "go",
            Decision::FieldGoal => "fg",
            Decision::Punt => "punt",
        })
    }
}

impl FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "go" => Ok(Decision::Go),
            "fg" | "field_goal" => Ok(Decision::FieldGoal),
            "punt" => Ok(Decision::Punt),
            other => Err(format!("unknown decision '{other}'")),
        }
    }
}

/// Which decisions are considered at a given yardline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Availability {
    /// Punting is available strictly beyond this yardline.
    pub punt_beyond: u8,
    /// Field goals are available at or inside this yardline.
    pub fg_within: u8,
}

impl Default for Availability {
    fn default() -> Self {
        Availability { punt_beyond: 30, fg_within: 50 }
    }
}

impl Availability {
    pub fn available(&self, d: Decision, yardline: u8) -> bool {
        match d {
            Decision::Go => true,
            Decision::FieldGoal => yardline <= self.fg_within,
            Decision::Punt => yardline > self.punt_beyond,
        }
    }
}

/// Win probabilities of the available decisions and the recommendation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionValues {
    pub wp_go: f64,
    pub wp_fg: Option<f64>,
    pub wp_punt: Option<f64>,
    pub best: Decision,
    /// Best minus runner-up; `None` when only one decision is available.
    pub effect_size: Option<f64>,
}

impl DecisionValues {
    pub fn wp(&self, d: Decision) -> Option<f64> {
        match d {
            Decision::Go => Some(self.wp_go),
            Decision::FieldGoal => self.wp_fg,
            Decision::Punt => self.wp_punt,
        }
    }

    /// `wp(d)` minus the best other available value, or `None` when `d` is
    /// unavailable or has no alternative.
    pub fn gain_of(&self, d: Decision) -> Option<f64> {
        let own = self.wp(d)?;
        let other = Decision::ALL
            .iter()
            .filter(|&&o| o != d)
            .filter_map(|&o| self.wp(o))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))?;
        Some(own - other)
    }
}

/// The ingredients of each decision value: a row of a decision table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionBranch {
    pub decision: Decision,
    pub available: bool,
    pub wp: f64,
    /// Conversion or make probability (none for punts).
    pub success_prob: Option<f64>,
    pub wp_if_success: f64,
    pub wp_if_failure: Option<f64>,
    /// Yardline after a success (own perspective for Go, opponent's for
    /// kicks); `None` when a Go success is scored as a touchdown.
    pub next_yardline_success: Option<f64>,
    pub next_yardline_failure: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionBreakdown {
    pub values: DecisionValues,
    pub branches: Vec<DecisionBranch>,
    /// Set when the Go success branch was evaluated as a touchdown.
    pub go_success_is_touchdown: bool,
}

fn clamp_yardline(y: f64) -> f64 {
    y.clamp(1.0, 99.0)
}

/// FG miss: the opponent takes over at the spot of the kick, but never
/// closer to its own goal than the 20.
pub fn fg_miss_yardline(yardline: u8) -> f64 {
    let spot = 100.0 - (f64::from(yardline) + 7.0);
    clamp_yardline(spot.min(80.0))
}

pub const KICKOFF_YARDLINE: f64 = 75.0;

pub fn punt_branch<W: FirstDownWp + ?Sized, T: TransitionModel + ?Sized>(
    state: &FourthDownState,
    wp: &W,
    tm: &T,
) -> DecisionBranch {
    let next = clamp_yardline(tm.punt_next_yardline(f64::from(state.yardline), state.pq));
    let v = 1.0 - wp.wp1(&flipped_first_down(state, 0, next));
    DecisionBranch {
        decision: Decision::Punt,
        available: true,
        wp: v,
        success_prob: None,
        wp_if_success: v,
        wp_if_failure: None,
        next_yardline_success: Some(next),
        next_yardline_failure: None,
    }
}

pub fn fg_branch<W: FirstDownWp + ?Sized, T: TransitionModel + ?Sized>(
    state: &FourthDownState,
    wp: &W,
    tm: &T,
) -> DecisionBranch {
    let p = tm.fg_make_prob(f64::from(state.yardline), state.kq);
    let make = 1.0 - wp.wp1(&flipped_first_down(state, 3, KICKOFF_YARDLINE));
    let miss_spot = fg_miss_yardline(state.yardline);
    let miss = 1.0 - wp.wp1(&flipped_first_down(state, 0, miss_spot));
    DecisionBranch {
        decision: Decision::FieldGoal,
        available: true,
        wp: p * make + (1.0 - p) * miss,
        success_prob: Some(p),
        wp_if_success: make,
        wp_if_failure: Some(miss),
        next_yardline_success: Some(KICKOFF_YARDLINE),
        next_yardline_failure: Some(miss_spot),
    }
}

/// Returns the branch and whether the success side was scored as a
/// touchdown.
pub fn go_branch<W: FirstDownWp + ?Sized, T: TransitionModel + ?Sized>(
    state: &FourthDownState,
    wp: &W,
    tm: &T,
) -> (DecisionBranch, bool) {
    let y = f64::from(state.yardline);
    let z = f64::from(state.ydstogo);
    let p = tm.conversion_prob(z, 4, state.delta_tq_off);
    // A conversion gains at least z; a failure at most z - 1.
    let gain_s = tm.success_gain(y, z, 4, state.delta_tq_off).max(z);
    let gain_f = tm.failure_gain(z, 4, state.delta_tq_off).min(z - 1.0);
    let spot = y - gain_s;
    let touchdown = spot < 1.0;
    let (success, success_spot) = if touchdown {
        (1.0 - wp.wp1(&flipped_first_down(state, 7, KICKOFF_YARDLINE)), None)
    } else {
        let s = clamp_yardline(spot);
        (wp.wp1(&state.first_down_row(s)), Some(s))
    };
    let fail_spot = clamp_yardline(100.0 - (y - gain_f));
    let failure = 1.0 - wp.wp1(&flipped_first_down(state, 0, fail_spot));
    (
        DecisionBranch {
            decision: Decision::Go,
            available: true,
            wp: p * success + (1.0 - p) * failure,
            success_prob: Some(p),
            wp_if_success: success,
            wp_if_failure: Some(failure),
            next_yardline_success: success_spot,
            next_yardline_failure: Some(fail_spot),
        },
        touchdown,
    )
}

/// Picks the best available decision. Exact ties go to Go, then FG.
pub fn decide(wp_go: f64, wp_fg: Option<f64>, wp_punt: Option<f64>) -> DecisionValues {
    let mut ranked: Vec<(Decision, f64)> = [(Decision::Go, Some(wp_go)), (Decision::FieldGoal, wp_fg), (Decision::Punt, wp_punt)]
        .into_iter()
        .filter_map(|(d, v)| v.map(|v| (d, v)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    DecisionValues {
        wp_go,
        wp_fg,
        wp_punt,
        best: ranked[0].0,
        effect_size: ranked.get(1).map(|r| ranked[0].1 - r.1),
    }
}

pub fn breakdown<W: FirstDownWp + ?Sized, T: TransitionModel + ?Sized>(
    state: &FourthDownState,
    wp: &W,
    tm: &T,
    availability: &Availability,
) -> Result<DecisionBreakdown> {
    state.validate().map_err(|errs| {
        Error::InvalidInput(errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
    })?;
    let (go, touchdown) = go_branch(state, wp, tm);
    let mut fg = fg_branch(state, wp, tm);
    fg.available = availability.available(Decision::FieldGoal, state.yardline);
    let mut punt = punt_branch(state, wp, tm);
    punt.available = availability.available(Decision::Punt, state.yardline);
    let values = decide(
        go.wp,
        fg.available.then_some(fg.wp),
        punt.available.then_some(punt.wp),
    );
    Ok(DecisionBreakdown {
        values,
        branches: vec![go, fg, punt],
        go_success_is_touchdown: touchdown,
    })
}

pub fn evaluate<W: FirstDownWp + ?Sized, T: TransitionModel + ?Sized>(
    state: &FourthDownState,
    wp: &W,
    tm: &T,
    availability: &Availability,
) -> Result<DecisionValues> {
    Ok(breakdown(state, wp, tm, availability)?.values)
}

pub const DECISION_MODEL_FORMAT_VERSION: u32 = 1;

/// A fitted first-down win probability model plus the transition bundle.
/// Immutable once fitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionModel {
    pub format_version: u32,
    pub wp: GbtModel,
    pub transitions: TransitionBundle,
}

impl DecisionModel {
    pub fn new(wp: GbtModel, transitions: TransitionBundle) -> Self {
        DecisionModel { format_version: DECISION_MODEL_FORMAT_VERSION, wp, transitions }
    }

    pub fn breakdown(&self, state: &FourthDownState, availability: &Availability) -> Result<DecisionBreakdown> {
        breakdown(state, &self.wp, &self.transitions, availability)
    }

    pub fn evaluate(&self, state: &FourthDownState, availability: &Availability) -> Result<DecisionValues> {
        evaluate(state, &self.wp, &self.transitions, availability)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<DecisionModel> {
        let m: DecisionModel = serde_json::from_str(s)?;
        if m.format_version != DECISION_MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: m.format_version,
                expected: DECISION_MODEL_FORMAT_VERSION,
            });
        }
        m.wp.check_version()?;
        m.transitions.check_version()?;
        Ok(m)
    }
}

/// Renders a breakdown as a plain-text decision table.
pub fn format_breakdown(b: &DecisionBreakdown) -> String {
    let pct = |v: f64| format!("{:.1}%", 100.0 * v);
    let opt = |v: Option<f64>| v.map_or("-".to_string(), pct);
    let mut out = String::new();
    out.push_str(&format!(
        "{:<6} {:>9} {:>12} {:>12} {:>12}\n",
        "choice", "win prob", "success prob", "WP success", "WP failure"
    ));
    for br in &b.branches {
        if !br.available {
            continue;
        }
        out.push_str(&format!(
            "{:<6} {:>9} {:>12} {:>12} {:>12}\n",
            br.decision.to_string(),
            pct(br.wp),
            opt(br.success_prob),
            pct(br.wp_if_success),
            opt(br.wp_if_failure)
        ));
    }
    out.push_str(&format!("best: {}", b.values.best));
    if let Some(g) = b.values.effect_size {
        out.push_str(&format!(" (+{:.2}% win probability)", 100.0 * g));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Stub {
        punt: f64,
        make: f64,
        conv: f64,
        succ: f64,
        fail: f64,
    }

    impl TransitionModel for Stub {
        fn punt_next_yardline(&self, _: f64, pq: f64) -> f64 {
            self.punt + 5.0 * pq
        }
        fn fg_make_prob(&self, _: f64, _: f64) -> f64 {
            self.make
        }
        fn conversion_prob(&self, _: f64, _: u8, _: f64) -> f64 {
            self.conv
        }
        fn success_gain(&self, _: f64, _: f64, _: u8, _: f64) -> f64 {
            self.succ
        }
        fn failure_gain(&self, _: f64, _: u8, _: f64) -> f64 {
            self.fail
        }
    }

    fn stub() -> Stub {
        Stub { punt: 70.0, make: 0.6, conv: 0.5, succ: 3.0, fail: 0.0 }
    }

    #[test]
    fn constant_wp_collapses_every_value() {
        let half = |_: &WpFeatureRow| 0.5;
        let s = FourthDownState { yardline: 45, ydstogo: 4, ..FourthDownState::template() };
        let v = evaluate(&s, &half, &stub(), &Availability::default()).unwrap();
        assert_eq!(v.wp_go, 0.5);
        assert_eq!(v.wp_fg, Some(0.5));
        assert_eq!(v.wp_punt, Some(0.5));
    }

    #[test]
    fn availability_by_yardline() {
        let wp = |r: &WpFeatureRow| 1.0 - r.yardline / 100.0;
        let far = FourthDownState { yardline: 60, ydstogo: 4, ..FourthDownState::template() };
        let v = evaluate(&far, &wp, &stub(), &Availability::default()).unwrap();
        assert!(v.wp_fg.is_none() && v.wp_punt.is_some());
        let near = FourthDownState { yardline: 20, ydstogo: 4, ..FourthDownState::template() };
        let v = evaluate(&near, &wp, &stub(), &Availability::default()).unwrap();
        assert!(v.wp_fg.is_some() && v.wp_punt.is_none());
    }

    #[test]
    fn argmax_arithmetic() {
        let v = decide(0.6, Some(0.55), None);
        assert_eq!(v.best, Decision::Go);
        assert!((v.effect_size.unwrap() - 0.05).abs() < 1e-15);
        let only = decide(0.6, None, None);
        assert_eq!(only.effect_size, None);
        assert_eq!(v.gain_of(Decision::FieldGoal).map(|g| (g * 100.0).round()), Some(-5.0));
    }

    #[test]
    fn miss_spot_rule() {
        assert_eq!(fg_miss_yardline(10), 80.0);
        assert_eq!(fg_miss_yardline(40), 53.0);
    }

    #[test]
    fn short_goal_to_go_success_is_a_touchdown() {
        let wp = |r: &WpFeatureRow| 0.5 + r.score_differential / 100.0;
        let s = FourthDownState { yardline: 2, ydstogo: 1, ..FourthDownState::template() };
        let b = breakdown(&s, &wp, &stub(), &Availability::default()).unwrap();
        assert!(b.go_success_is_touchdown);
        assert!((b.branches[0].wp_if_success - 0.57).abs() < 1e-12);
    }

    #[test]
    fn decision_round_trips_through_strings() {
        for d in Decision::ALL {
            assert_eq!(d.to_string().parse::<Decision>().unwrap(), d);
        }
        assert_eq!(serde_json::to_string(&Decision::FieldGoal).unwrap(), "\"fg\"");
    }
}
