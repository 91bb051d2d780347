use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use serde::Serialize;

use super::binning::FeatureMatrix;
use super::booster::{fit_gbt, GbtParams, HyperGrid, TrainData};
use super::features::FeatureSet;
use crate::data::{DatasetSplit, PlayRecord};
use crate::error::{Error, Result};
use crate::spline_glm::{irls, IrlsOptions, RankPolicy};
use crate::util::{log_loss, sigmoid};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContestRow {
    pub model: String,
    pub learner: String,
    pub training_plays: String,
    pub logloss: f64,
    /// Percent reduction in log-loss relative to a fair coin.
    pub reduction_pct: f64,
}

pub fn reduction_vs_fair_coin(logloss: f64) -> f64 {
    (1.0 - logloss / LN_2) * 100.0
}

/// Scores named prediction vectors on shared labels, sorted by log-loss.
pub fn prediction_contest(entries: Vec<(String, String, String, Vec<f64>)>, labels: &[f64]) -> Result<Vec<ContestRow>> {
    let mut rows = Vec::with_capacity(entries.len());
    for (model, learner, training_plays, preds) in entries {
        if preds.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{model}: {} predictions for {} labels",
                preds.len(),
                labels.len()
            )));
        }
        let logloss = log_loss(&preds, labels);
        rows.push(ContestRow {
            model,
            learner,
            training_plays,
            logloss,
            reduction_pct: reduction_vs_fair_coin(logloss),
        });
    }
    rows.sort_by(|a, b| a.logloss.total_cmp(&b.logloss));
    Ok(rows)
}

/// Game-level logistic regression on the pre-game spread.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpreadOnlyModel {
    pub intercept: f64,
    pub slope: f64,
}

impl SpreadOnlyModel {
    /// One row per game, from the perspective of the team with the ball on
    /// the game's first recorded play.
    pub fn fit(plays: &[&PlayRecord]) -> Result<SpreadOnlyModel> {
        let mut first: BTreeMap<&str, &PlayRecord> = BTreeMap::new();
        for p in plays {
            let e = first.entry(p.game_id.as_str()).or_insert(p);
            if p.play_index < e.play_index {
                *e = p;
            }
        }
        if first.is_empty() {
            return Err(Error::EmptyPool { pool: "games" });
        }
        let games: Vec<&PlayRecord> = first.into_values().collect();
        let x = DMatrix::from_fn(games.len(), 2, |i, j| if j == 0 { 1.0 } else { games[i].posteam_spread });
        let y: Vec<f64> = games.iter().map(|p| f64::from(u8::from(p.win_loss))).collect();
        let names = vec!["(intercept)".to_string(), "spread".to_string()];
        let fit = irls(&x, &y, None, &names, RankPolicy::DropAndWarn, IrlsOptions::default())?;
        Ok(SpreadOnlyModel {
            intercept: fit.coefficients[0],
            slope: fit.coefficients[1],
        })
    }

    pub fn predict(&self, spread: f64) -> f64 {
        sigmoid(self.intercept + self.slope * spread)
    }
}

fn matrix_for(set: FeatureSet, plays: &[&PlayRecord]) -> Result<(FeatureMatrix, Vec<f64>)> {
    let names = set.names();
    let mut x = FeatureMatrix::new(names.len());
    let mut y = Vec::with_capacity(plays.len());
    for p in plays {
        if p.is_terminal_marker() || (!set.all_downs() && p.down != 1) {
            continue;
        }
        x.push(&set.extract(p))?;
        y.push(f64::from(u8::from(p.win_loss)));
    }
    Ok((x, y))
}

/// Fits every contest entry on the train/tune games of `split` and scores it
/// on the first-down plays of the test games.
pub fn run_contest(
    plays: &[PlayRecord],
    split: &DatasetSplit,
    grid: &HyperGrid,
    base: &GbtParams,
) -> Result<Vec<ContestRow>> {
    let train = split.train_plays(plays);
    let tune = split.tune_plays(plays);
    let test = split.test_first_downs(plays);
    if test.is_empty() {
        return Err(Error::EmptyPool { pool: "test first-down" });
    }
    let labels: Vec<f64> = test.iter().map(|p| f64::from(u8::from(p.win_loss))).collect();
    let mut entries = Vec::new();
    for set in [FeatureSet::Proposed, FeatureSet::LockNettleton, FeatureSet::Baldwin] {
        let (xt, yt) = matrix_for(set, &train)?;
        let (xv, yv) = matrix_for(set, &tune)?;
        if xt.n_rows() == 0 || xv.n_rows() == 0 {
            return Err(Error::EmptyPool { pool: "contest training" });
        }
        let fit = fit_gbt(
            TrainData::new(&xt, &yt),
            TrainData::new(&xv, &yv),
            grid,
            base,
            &set.names(),
            &set.monotone(),
            None,
        )?;
        let preds: Vec<f64> = test.iter().map(|p| fit.model.predict(&set.extract(p))).collect();
        log::info!("contest: {} selected {:?}", set.label(), fit.selected);
        let downs = if set.all_downs() { "all downs" } else { "first downs" };
        entries.push((set.label().to_string(), "boosted trees".to_string(), downs.to_string(), preds));
    }
    let mut games: Vec<&PlayRecord> = train.clone();
    games.extend(tune.iter().copied());
    let spread = SpreadOnlyModel::fit(&games)?;
    entries.push((
        "pre-game spread only".into(),
        "logistic regression".into(),
        "one row per game".into(),
        test.iter().map(|p| spread.predict(p.posteam_spread)).collect(),
    ));
    entries.push(("fair coin".into(), "constant".into(), String::new(), vec![0.5; test.len()]));
    prediction_contest(entries, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fair_coin_and_perfect_oracle() {
        let labels = [0.0, 1.0, 1.0, 0.0];
        let rows = prediction_contest(
            vec![
                ("coin".into(), "c".into(), "".into(), vec![0.5; 4]),
                ("oracle".into(), "o".into(), "".into(), labels.to_vec()),
            ],
            &labels,
        )
        .unwrap();
        assert_eq!(rows[0].model, "oracle");
        assert!(rows[0].logloss < 1e-12);
        assert!((rows[0].reduction_pct - 100.0).abs() < 1e-9);
        assert!((rows[1].logloss - LN_2).abs() < 1e-15);
        assert_eq!(rows[1].reduction_pct, 0.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(prediction_contest(vec![("a".into(), "".into(), "".into(), vec![0.5])], &[1.0, 0.0]).is_err());
    }
}
