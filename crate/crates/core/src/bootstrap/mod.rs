//! Randomized cluster bootstrap over games and drives.
//!
//! A replicate re-draws games with replacement, then drives with
//! replacement inside every drawn game, and turns the resulting multiset
//! into per-play observation weights. Every model of the pipeline is then
//! refitted with those weights, holding the point fit's hyperparameters.
//!
//! With a fraction `f < 1` the multiplicities are shrunk towards one:
//! a play's weight is `(f·m + 1 − f) · (f·c + 1 − f)`, where `m` is how many
//! times its game was drawn and `c` the average number of copies of its
//! drive per drawn game copy. At `f = 1` this is the plain multiset count
//! and as `f → 0` every weight tends to one.
//!
//! Agreement with the point decision across replicates is summarized as
//! boot% and binned as confident (≥ 83%), lean (≥ 67%) or uncertain.

mod analysis;
mod ensemble;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::PlayRecord;
use crate::engine::{Decision, DecisionValues};
use crate::error::{Error, Result};
use crate::util::rng_for;

pub use analysis::{
    fourth_down_states, overconfidence_summary, stability_analysis, write_stability_histogram, EffectBin, OverconfidenceSummary,
    StabilityConfig, StabilityRow, StabilityTable,
};
pub use ensemble::{
    data_fingerprint, fit_ensemble, BootstrapEnsemble, EnsembleManifest, GridMode, ENSEMBLE_FORMAT_VERSION,
};

const STREAM_RESAMPLE: u64 = 0xb007;

/// Seed, size and fractional temperature of a bootstrap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResamplePlan {
    pub seed: u64,
    /// Number of replicates; must be odd.
    pub b: usize,
    /// Fractional-weight temperature in `(0, 1]`; 1 is the plain bootstrap.
    pub fraction: f64,
}

impl Default for ResamplePlan {
    fn default() -> Self {
        ResamplePlan { seed: 0, b: 101, fraction: 1.0 }
    }
}

impl ResamplePlan {
    pub fn new(seed: u64, b: usize, fraction: f64) -> Result<Self> {
        let plan = ResamplePlan { seed, b, fraction };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 || self.b.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("B must be a positive odd number, got {}", self.b)));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::InvalidInput(format!("fraction must be in (0, 1], got {}", self.fraction)));
        }
        Ok(())
    }
}

/// Play indices grouped by game and, inside each game, by drive. Drives
/// keep their plays in the original order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameClusters {
    pub games: Vec<Vec<Vec<usize>>>,
    n_plays: usize,
}

impl GameClusters {
    pub fn new(plays: &[PlayRecord]) -> GameClusters {
        let mut game_of: HashMap<&str, usize> = HashMap::new();
        let mut drive_of: Vec<HashMap<&str, usize>> = Vec::new();
        let mut games: Vec<Vec<Vec<usize>>> = Vec::new();
        for (i, p) in plays.iter().enumerate() {
            let g = *game_of.entry(&p.game_id).or_insert_with(|| {
                games.push(Vec::new());
                drive_of.push(HashMap::new());
                games.len() - 1
            });
            let drives = &mut games[g];
            let d = *drive_of[g].entry(&p.drive_id).or_insert_with(|| {
                drives.push(Vec::new());
                drives.len() - 1
            });
            drives[d].push(i);
        }
        GameClusters { games, n_plays: plays.len() }
    }

    pub fn n_games(&self) -> usize {
        self.games.len()
    }

    pub fn n_plays(&self) -> usize {
        self.n_plays
    }

    /// Per-play weights of replicate `index`. The `attempt` counter gives a
    /// fresh stream when a replicate has to be redrawn.
    pub fn resample(&self, plan: &ResamplePlan, index: usize, attempt: u32) -> Vec<f64> {
        let mut rng = rng_for(plan.seed, STREAM_RESAMPLE, (index as u64) | (u64::from(attempt) << 40));
        let f = plan.fraction;
        let n_games = self.games.len();
        let mut game_draws = vec![0u32; n_games];
        for _ in 0..n_games {
            game_draws[rng.gen_range(0..n_games)] += 1;
        }
        let mut weights = vec![0.0; self.n_plays];
        let mut drive_draws = Vec::new();
        for (drives, &m) in self.games.iter().zip(&game_draws) {
            // An undrawn game still gets one hypothetical copy so that its
            // drive weights are defined when f < 1.
            let copies = m.max(1);
            drive_draws.clear();
            drive_draws.resize(drives.len(), 0u32);
            for _ in 0..copies {
                for _ in 0..drives.len() {
                    drive_draws[rng.gen_range(0..drives.len())] += 1;
                }
            }
            let game_w = f * f64::from(m) + (1.0 - f);
            for (plays, &c) in drives.iter().zip(&drive_draws) {
                let mean_copies = f64::from(c) / f64::from(copies);
                let w = game_w * (f * mean_copies + (1.0 - f));
                for &i in plays {
                    weights[i] = w;
                }
            }
        }
        weights
    }
}

/// The three confidence classes of a recommendation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceBin {
    Confident,
    Lean,
    Uncertain,
}

impl ConfidenceBin {
    pub const ALL: [ConfidenceBin; 3] = [ConfidenceBin::Confident, ConfidenceBin::Lean, ConfidenceBin::Uncertain];

    /// Bin of a boot% in `[0, 100]`.
    pub fn from_boot_pct(pct: f64) -> ConfidenceBin {
        if pct >= 83.0 {
            ConfidenceBin::Confident
        } else if pct >= 67.0 {
            ConfidenceBin::Lean
        } else {
            ConfidenceBin::Uncertain
        }
    }

    /// Bin of `agree` out of `b` replicates, in exact integer arithmetic.
    pub fn from_counts(agree: usize, b: usize) -> ConfidenceBin {
        if 100 * agree >= 83 * b {
            ConfidenceBin::Confident
        } else if 100 * agree >= 67 * b {
            ConfidenceBin::Lean
        } else {
            ConfidenceBin::Uncertain
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConfidenceBin::Confident => "confident",
            ConfidenceBin::Lean => "lean",
            ConfidenceBin::Uncertain => "uncertain",
        }
    }
}

impl fmt::Display for ConfidenceBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConfidenceBin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConfidenceBin::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown confidence bin {s:?}")))
    }
}

/// `100 · agree / b`.
pub fn boot_pct(agree: usize, b: usize) -> f64 {
    100.0 * agree as f64 / b as f64
}

/// 1-based order statistics `(lo, hi)` bounding a central interval of the
/// given level among `b` sorted values: ranks `⌈αb⌉` and `⌈(1 − α)b⌉` with
/// `α = (1 − level)/2`, which are 6 and 96 for a 90% interval at `b = 101`.
pub fn ci_ranks(b: usize, level: f64) -> (usize, usize) {
    let alpha = (1.0 - level) / 2.0;
    let rank = |p: f64| ((p * b as f64 - 1e-9).ceil() as usize).clamp(1, b);
    (rank(alpha), rank(1.0 - alpha))
}

/// Central interval of `values` at `level` by [`ci_ranks`].
pub fn quantile_ci(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidInput("no values for an interval".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("interval level must be in (0, 1), got {level}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = ci_ranks(sorted.len(), level);
    Ok((sorted[lo - 1], sorted[hi - 1]))
}

/// How much the bootstrap replicates back the point recommendation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    /// Point-model values and decision.
    pub values: DecisionValues,
    pub decision: Decision,
    /// Replicates whose own best decision equals the point decision.
    pub agree: usize,
    pub b: usize,
    pub boot_pct: f64,
    pub bin: ConfidenceBin,
    pub level: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Gain of the point decision under each replicate, in replicate order.
    pub gains: Vec<f64>,
    /// Each replicate's own best decision, in replicate order.
    pub replicate_decisions: Vec<Decision>,
}

/// Summarizes replicate values against the point values.
pub fn uncertainty_report(point: DecisionValues, replicates: &[DecisionValues], level: f64) -> Result<UncertaintyReport> {
    if replicates.is_empty() {
        return Err(Error::InvalidInput("no replicates".into()));
    }
    let d = point.best;
    let agree = replicates.iter().filter(|r| r.best == d).count();
    let gains: Vec<f64> = replicates.iter().map(|r| r.gain_of(d).unwrap_or(0.0)).collect();
    let (ci_lo, ci_hi) = quantile_ci(&gains, level)?;
    let b = replicates.len();
    Ok(UncertaintyReport {
        values: point,
        decision: d,
        agree,
        b,
        boot_pct: boot_pct(agree, b),
        bin: ConfidenceBin::from_counts(agree, b),
        level,
        ci_lo,
        ci_hi,
        gains,
        replicate_decisions: replicates.iter().map(|r| r.best).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Era, PlayType, Roof};

    fn play(game: &str, drive: &str, i: u32) -> PlayRecord {
        PlayRecord {
            game_id: game.into(),
            drive_id: drive.into(),
            play_index: i,
            season: 2020,
            era: Era::Y2018On,
            win_loss: true,
            game_seconds_remaining: 1000,
            score_differential: 0,
            total_score: 0,
            posteam_spread: 0.0,
            total_points_line: 44.0,
            yardline: 50,
            ydstogo: 10,
            down: 1,
            posteam_timeouts: 3,
            defteam_timeouts: 3,
            receive_2h_ko: false,
            home: true,
            roof: Roof::Outdoors,
            posteam_coach: "C".into(),
            kicker_id: None,
            punter_id: None,
            play_type: PlayType::Other,
            yards_gained: None,
            fg_made: None,
            next_yardline_after_punt: None,
        }
    }

    fn values(best: Decision, go: f64, fg: f64, punt: f64) -> DecisionValues {
        DecisionValues {
            wp_go: go,
            wp_fg: Some(fg),
            wp_punt: Some(punt),
            best,
            effect_size: None,
        }
    }

    #[test]
    fn plan_validation() {
        assert!(ResamplePlan::new(1, 101, 1.0).is_ok());
        assert!(ResamplePlan::new(1, 100, 1.0).is_err());
        assert!(ResamplePlan::new(1, 0, 1.0).is_err());
        assert!(ResamplePlan::new(1, 11, 0.0).is_err());
        assert!(ResamplePlan::new(1, 11, 1.5).is_err());
    }

    #[test]
    fn clusters_keep_play_order() {
        let plays = vec![play("a", "a1", 0), play("a", "a2", 1), play("b", "b1", 0), play("a", "a2", 2)];
        let c = GameClusters::new(&plays);
        assert_eq!(c.games, vec![vec![vec![0], vec![1, 3]], vec![vec![2]]]);
    }

    #[test]
    fn single_game_single_drive_is_the_original() {
        let plays = vec![play("a", "a1", 0), play("a", "a1", 1)];
        let c = GameClusters::new(&plays);
        let plan = ResamplePlan::new(3, 5, 1.0).unwrap();
        for r in 0..5 {
            assert_eq!(c.resample(&plan, r, 0), vec![1.0, 1.0]);
        }
    }

    #[test]
    fn full_fraction_weights_are_integer_counts() {
        let plays: Vec<PlayRecord> = (0..40)
            .map(|i| play(&format!("g{}", i / 8), &format!("d{}", i / 3), i))
            .collect();
        let c = GameClusters::new(&plays);
        let w = c.resample(&ResamplePlan::new(9, 3, 1.0).unwrap(), 1, 0);
        assert!(w.iter().all(|&x| x >= 0.0 && x.fract() == 0.0));
        assert_ne!(w, c.resample(&ResamplePlan::new(9, 3, 1.0).unwrap(), 1, 1));
        assert_eq!(w, c.resample(&ResamplePlan::new(9, 3, 1.0).unwrap(), 1, 0));
    }

    #[test]
    fn tiny_fraction_approaches_unit_weights() {
        let plays: Vec<PlayRecord> = (0..40)
            .map(|i| play(&format!("g{}", i / 8), &format!("d{}", i / 3), i))
            .collect();
        let c = GameClusters::new(&plays);
        let w = c.resample(&ResamplePlan::new(9, 3, 1e-9).unwrap(), 0, 0);
        assert!(w.iter().all(|&x| (x - 1.0).abs() < 1e-6));
    }

    #[test]
    fn bins_match_thresholds() {
        assert_eq!(ConfidenceBin::from_counts(57, 101), ConfidenceBin::Uncertain);
        assert_eq!(ConfidenceBin::from_counts(101, 101), ConfidenceBin::Confident);
        for k in 0..=101 {
            let pct = boot_pct(k, 101);
            assert_eq!(ConfidenceBin::from_counts(k, 101), ConfidenceBin::from_boot_pct(pct), "{k}");
        }
        assert_eq!(ConfidenceBin::from_boot_pct(83.0), ConfidenceBin::Confident);
        assert_eq!(ConfidenceBin::from_boot_pct(82.99), ConfidenceBin::Lean);
        assert_eq!(ConfidenceBin::from_boot_pct(67.0), ConfidenceBin::Lean);
        assert_eq!(ConfidenceBin::from_boot_pct(66.99), ConfidenceBin::Uncertain);
        assert_eq!("lean".parse::<ConfidenceBin>().unwrap(), ConfidenceBin::Lean);
    }

    #[test]
    fn ci_ranks_at_common_sizes() {
        assert_eq!(ci_ranks(101, 0.90), (6, 96));
        assert_eq!(ci_ranks(51, 0.90), (3, 49));
        assert_eq!(ci_ranks(1, 0.90), (1, 1));
        let (lo95, hi95) = ci_ranks(101, 0.95);
        assert!(lo95 <= 6 && hi95 >= 96);
    }

    #[test]
    fn report_counts_agreement_and_signed_gains() {
        let point = values(Decision::Go, 0.52, 0.50, 0.40);
        let reps = vec![
            values(Decision::Go, 0.55, 0.50, 0.40),
            values(Decision::FieldGoal, 0.49, 0.51, 0.40),
            values(Decision::Go, 0.60, 0.50, 0.58),
        ];
        let r = uncertainty_report(point, &reps, 0.9).unwrap();
        assert_eq!(r.agree, 2);
        assert!((r.boot_pct - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.bin, ConfidenceBin::Uncertain);
        let expect = [0.05, -0.02, 0.02];
        for (g, e) in r.gains.iter().zip(expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }
}
