use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the synthetic game. Every random quantity is an explicit
/// categorical distribution over integers; see [`World`] for the dynamics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Plays per game; every play uses one tick of the clock.
    pub ticks: u32,
    /// Score differentials are clamped to `[-score_cap, score_cap]`.
    pub score_cap: i32,
    /// Yardline after a kickoff or a made field goal.
    pub kickoff_yardline: u8,
    /// Combined first- and second-down gain: discretized normal.
    pub early_gain_mean: f64,
    pub early_gain_sd: f64,
    pub early_gain_min: i32,
    pub early_gain_max: i32,
    /// Conversion: `logit P = intercept[down] - slope * ln(ydstogo)`.
    pub conv_intercept_3rd: f64,
    pub conv_intercept_4th: f64,
    pub conv_slope: f64,
    /// Yards beyond the line to gain on a conversion: geometric with this
    /// decay, truncated at `success_extra_max`.
    pub success_extra_decay: f64,
    pub success_extra_max: i32,
    /// Failed attempts gain `-2`, `0`, `(z-1)/2` or `z-1` yards with these
    /// weights.
    pub failure_weights: [f64; 4],
    /// FG: `logit P = fg_intercept + fg_slope * (yardline + 17)`.
    pub fg_intercept: f64,
    pub fg_slope: f64,
    /// Net punt yards: discretized normal on `[punt_net_min, punt_net_max]`.
    pub punt_net_mean: f64,
    pub punt_net_sd: f64,
    pub punt_net_min: i32,
    pub punt_net_max: i32,
    /// Coach policy: softmax over true decision values with this
    /// temperature, mixed with a uniform choice with probability `epsilon`.
    pub coach_temperature: f64,
    pub coach_epsilon: f64,
    /// Field goals are attempted only at or inside this yardline and punts
    /// only beyond `punt_beyond`.
    pub fg_within: u8,
    pub punt_beyond: u8,
    pub first_season: u16,
    pub seasons: u16,
    pub coaches: usize,
    pub kickers: usize,
    pub punters: usize,
    pub total_points_line: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            ticks: 60,
            score_cap: 28,
            kickoff_yardline: 75,
            early_gain_mean: 5.5,
            early_gain_sd: 4.5,
            early_gain_min: -2,
            early_gain_max: 15,
            conv_intercept_3rd: 0.9,
            conv_intercept_4th: 1.0,
            conv_slope: 0.9,
            success_extra_decay: 0.85,
            success_extra_max: 20,
            failure_weights: [0.2, 0.4, 0.25, 0.15],
            fg_intercept: 5.8,
            fg_slope: -0.09,
            punt_net_mean: 40.0,
            punt_net_sd: 6.0,
            punt_net_min: 25,
            punt_net_max: 55,
            coach_temperature: 0.02,
            coach_epsilon: 0.1,
            fg_within: 50,
            punt_beyond: 30,
            first_season: 2018,
            seasons: 5,
            coaches: 8,
            kickers: 12,
            punters: 12,
            total_points_line: 44.0,
        }
    }
}

impl WorldConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: WorldConfig = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("world config: {m}")));
        if self.ticks == 0 || 3600 % self.ticks != 0 {
            return bad("ticks must be a positive divisor of 3600");
        }
        if self.score_cap < 7 {
            return bad("score_cap must be at least 7");
        }
        if !(1..=99).contains(&self.kickoff_yardline) {
            return bad("kickoff_yardline must be in [1, 99]");
        }
        if self.early_gain_min > self.early_gain_max || self.early_gain_min < -5 {
            return bad("early gain support must be non-empty with minimum >= -5");
        }
        if !(self.early_gain_sd > 0.0 && self.punt_net_sd > 0.0) {
            return bad("standard deviations must be positive");
        }
        if !(0.0..1.0).contains(&self.success_extra_decay) || self.success_extra_max < 0 {
            return bad("success extra yards need decay in [0, 1) and a non-negative maximum");
        }
        if self.failure_weights.iter().any(|w| !(*w >= 0.0)) || self.failure_weights.iter().sum::<f64>() <= 0.0 {
            return bad("failure weights must be non-negative with a positive sum");
        }
        if self.punt_net_min > self.punt_net_max || self.punt_net_min < 0 {
            return bad("punt net support must be non-empty and non-negative");
        }
        if !(self.coach_temperature > 0.0) || !(0.0..=1.0).contains(&self.coach_epsilon) {
            return bad("coach temperature must be positive and epsilon in [0, 1]");
        }
        if self.coaches == 0 || self.kickers == 0 || self.punters == 0 || self.seasons == 0 {
            return bad("coach, kicker, punter and season counts must be positive");
        }
        Ok(())
    }

    pub fn seconds_per_tick(&self) -> u32 {
        3600 / self.ticks
    }
}

/// Normalized weights of a normal density on the integers `lo..=hi`.
fn discretized_normal(mean: f64, sd: f64, lo: i32, hi: i32) -> Vec<(i32, f64)> {
    let raw: Vec<(i32, f64)> = (lo..=hi)
        .map(|k| {
            let u = (f64::from(k) - mean) / sd;
            (k, (-0.5 * u * u).exp())
        })
        .collect();
    normalize(raw)
}

fn normalize(raw: Vec<(i32, f64)>) -> Vec<(i32, f64)> {
    let total: f64 = raw.iter().map(|r| r.1).sum();
    raw.into_iter().map(|(k, w)| (k, w / total)).collect()
}

/// The precomputed categorical kernels of a world.
#[derive(Clone, Debug)]
pub struct Kernels {
    pub early_gain: Vec<(i32, f64)>,
    pub success_extra: Vec<(i32, f64)>,
    pub punt_net: Vec<(i32, f64)>,
}

impl Kernels {
    pub fn new(c: &WorldConfig) -> Kernels {
        let success_extra = normalize(
            (0..=c.success_extra_max)
                .map(|k| (k, c.success_extra_decay.powi(k)))
                .collect(),
        );
        Kernels {
            early_gain: discretized_normal(c.early_gain_mean, c.early_gain_sd, c.early_gain_min, c.early_gain_max),
            success_extra,
            punt_net: discretized_normal(c.punt_net_mean, c.punt_net_sd, c.punt_net_min, c.punt_net_max),
        }
    }

    /// Largest total probability error over all kernels.
    pub fn max_sum_error(&self) -> f64 {
        [&self.early_gain, &self.success_extra, &self.punt_net]
            .iter()
            .map(|k| (k.iter().map(|r| r.1).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
