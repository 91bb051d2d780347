//! End-to-end fitting: plays in, [`DecisionModel`] out.
//!
//! [`PreparedData`] does everything that depends only on the data (quality
//! inputs, first-down feature rows, feature bins, transition pools and
//! spline knots) exactly once. The point fit tunes the boosted trees on a
//! game-level split and then refits on every game; bootstrap replicates
//! reuse the selected hyperparameters, bins and knots and only change the
//! observation weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{filter_training_pools, make_split, PlayRecord, SplitFractions};
use crate::engine::{Availability, DecisionModel};
use crate::error::{Error, Result};
use crate::gbt::{
    fit_gbt, train, wp_feature_names, BinMapper, FeatureMatrix, GbtParams, GridPoint, HyperGrid, TrainData,
    WpFeatureRow, WP_MONOTONE,
};
use crate::quality::{fit_quality, QualityConfig, QualityFit};
use crate::transition::{fit_transitions, TransitionConfig, TransitionData, TransitionDesigns};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Game-level split used to tune the win probability model. The test
    /// fraction is left out of the final refit only when `refit_all` is
    /// false.
    pub split: SplitFractions,
    pub split_seed: u64,
    /// Search `grid` with early stopping; otherwise train `gbt` as given.
    pub tune: bool,
    /// Refit the selected configuration on every game.
    pub refit_all: bool,
    pub grid: HyperGrid,
    pub gbt: GbtParams,
    pub quality: QualityConfig,
    pub transitions: TransitionConfig,
    pub availability: Availability,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            split: SplitFractions::new(0.75, 0.25, 0.0),
            split_seed: 1,
            tune: true,
            refit_all: true,
            grid: HyperGrid::default(),
            gbt: GbtParams::default(),
            quality: QualityConfig::default(),
            transitions: TransitionConfig::default(),
            availability: Availability::default(),
        }
    }
}

impl FitConfig {
    /// A fixed, untuned configuration sized for quick repeated fits.
    pub fn small() -> Self {
        FitConfig {
            tune: false,
            gbt: GbtParams {
                max_depth: 4,
                learning_rate: 0.1,
                min_child_weight: 20.0,
                n_rounds: 150,
                early_stopping: None,
                ..GbtParams::default()
            },
            ..FitConfig::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: FitConfig = toml::from_str(text)?;
        c.gbt.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

/// Data-dependent preprocessing shared by the point fit and every
/// bootstrap replicate.
pub struct PreparedData {
    pub plays: Vec<PlayRecord>,
    pub quality: QualityFit,
    /// Play index of each first-down feature row.
    pub first_down: Vec<usize>,
    pub wp_x: FeatureMatrix,
    pub wp_y: Vec<f64>,
    pub mapper: BinMapper,
    pub transitions: TransitionData,
    pub designs: TransitionDesigns,
}

impl PreparedData {
    pub fn new(plays: Vec<PlayRecord>, config: &FitConfig) -> Result<PreparedData> {
        if plays.is_empty() {
            return Err(Error::EmptyPool { pool: "plays" });
        }
        let quality = fit_quality(&plays, &config.quality)?;
        let pools = filter_training_pools(&plays);
        if pools.first_down.is_empty() {
            return Err(Error::EmptyPool { pool: "first-down" });
        }
        let mut wp_x = FeatureMatrix::new(WP_MONOTONE.len());
        let mut wp_y = Vec::with_capacity(pools.first_down.len());
        for &i in &pools.first_down {
            wp_x.push(&WpFeatureRow::from_play(&plays[i]).to_array())?;
            wp_y.push(f64::from(u8::from(plays[i].win_loss)));
        }
        let mapper = BinMapper::fit(&wp_x, config.gbt.max_bins)?;
        let transitions = TransitionData::build(&plays, &quality.inputs, &config.transitions)?;
        let designs = TransitionDesigns::resolve(&transitions)?;
        Ok(PreparedData {
            first_down: pools.first_down,
            plays,
            quality,
            wp_x,
            wp_y,
            mapper,
            transitions,
            designs,
        })
    }

    fn rows_where(&self, keep: impl Fn(&PlayRecord) -> bool) -> Result<(FeatureMatrix, Vec<f64>)> {
        let mut x = FeatureMatrix::new(self.wp_x.n_features());
        let mut y = Vec::new();
        for (r, &i) in self.first_down.iter().enumerate() {
            if keep(&self.plays[i]) {
                x.push(self.wp_x.row(r))?;
                y.push(self.wp_y[r]);
            }
        }
        Ok((x, y))
    }
}

/// The point model plus what replicates need to reproduce its recipe.
pub struct PointFit {
    pub model: DecisionModel,
    /// Final boosted-tree parameters (fixed number of rounds).
    pub params: GbtParams,
    /// Tuning results, empty when tuning was skipped.
    pub grid: Vec<GridPoint>,
}

pub fn fit_point(data: &PreparedData, config: &FitConfig) -> Result<PointFit> {
    let names = wp_feature_names();
    let (params, grid, split) = if config.tune {
        let split = make_split(&data.plays, config.split, config.split_seed)?;
        let (xt, yt) = data.rows_where(|p| split.train_game_ids.contains(&p.game_id))?;
        let (xv, yv) = data.rows_where(|p| split.tune_game_ids.contains(&p.game_id))?;
        let tuned = fit_gbt(
            TrainData::new(&xt, &yt),
            TrainData::new(&xv, &yv),
            &config.grid,
            &config.gbt,
            &names,
            &WP_MONOTONE,
            Some(&data.mapper),
        )?;
        log::info!(
            "selected depth {} lr {} mcw {} with {} rounds",
            tuned.selected.max_depth,
            tuned.selected.learning_rate,
            tuned.selected.min_child_weight,
            tuned.selected.n_rounds
        );
        (tuned.selected, tuned.grid, Some(split))
    } else {
        (GbtParams { early_stopping: None, ..config.gbt.clone() }, Vec::new(), None)
    };
    let wp = match (&split, config.refit_all) {
        (Some(split), false) => {
            let (x, y) = data.rows_where(|p| !split.test_game_ids.contains(&p.game_id))?;
            train(TrainData::new(&x, &y), None, &names, &WP_MONOTONE, &params, Some(&data.mapper))?.model
        }
        _ => train(TrainData::new(&data.wp_x, &data.wp_y), None, &names, &WP_MONOTONE, &params, Some(&data.mapper))?.model,
    };
    let transitions = fit_transitions(&data.transitions, &data.designs, None, &config.transitions)?;
    Ok(PointFit { model: DecisionModel::new(wp, transitions), params, grid })
}

/// Refits every component with per-play observation weights, holding the
/// hyperparameters, bins and knots of the point fit.
pub fn fit_weighted(
    data: &PreparedData,
    params: &GbtParams,
    play_weights: &[f64],
    config: &FitConfig,
) -> Result<DecisionModel> {
    if play_weights.len() != data.plays.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} plays",
            play_weights.len(),
            data.plays.len()
        )));
    }
    let w: Vec<f64> = data.first_down.iter().map(|&i| play_weights[i]).collect();
    let wp = train(
        TrainData::weighted(&data.wp_x, &data.wp_y, &w),
        None,
        &wp_feature_names(),
        &WP_MONOTONE,
        params,
        Some(&data.mapper),
    )?
    .model;
    let transitions = fit_transitions(&data.transitions, &data.designs, Some(play_weights), &config.transitions)?;
    Ok(DecisionModel::new(wp, transitions))
}

/// Prepares the data and fits the point model in one call.
pub fn fit_decision_model(plays: Vec<PlayRecord>, config: &FitConfig) -> Result<(PreparedData, PointFit)> {
    let data = PreparedData::new(plays, config)?;
    let fit = fit_point(&data, config)?;
    Ok((data, fit))
}
