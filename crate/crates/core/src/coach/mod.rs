//! What coaches actually do on fourth down, and how often they agree with
//! the engine when the engine is confident.
//!
//! The decision model is three one-vs-rest boosted classifiers whose
//! margins are combined with a softmax. It uses its own season buckets,
//! which are finer in the early seasons than the eras of the play schema.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{BootstrapEnsemble, ConfidenceBin};
use crate::data::{filter_training_pools, PlayRecord};
use crate::engine::{Decision, FourthDownState};
use crate::error::{Error, Result};
use crate::gbt::{train, BinMapper, FeatureMatrix, GbtModel, GbtParams, TrainData};
use crate::quality::QualityInputs;

pub const COACH_FEATURE_NAMES: [&str; 6] = [
    "yardline",
    "ydstogo",
    "game_seconds_remaining",
    "score_differential",
    "posteam_spread",
    "era",
];

pub const COACH_FORMAT_VERSION: u32 = 1;

/// Season bucket: 1999–2001, 2002–2005, 2006–2013, 2014–2017, 2018 on.
/// Earlier seasons fall in the first bucket.
pub fn coach_era(season: u16) -> u8 {
    match season {
        ..=2001 => 0,
        2002..=2005 => 1,
        2006..=2013 => 2,
        2014..=2017 => 3,
        _ => 4,
    }
}

/// Model inputs in [`COACH_FEATURE_NAMES`] order.
pub fn coach_features(state: &FourthDownState, season: u16) -> [f64; 6] {
    [
        f64::from(state.yardline),
        f64::from(state.ydstogo),
        f64::from(state.game_seconds_remaining),
        f64::from(state.score_differential),
        state.posteam_spread,
        f64::from(coach_era(season)),
    ]
}

/// Probability of each decision, indexed like [`Decision::ALL`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoachProbs {
    pub p_go: f64,
    pub p_fg: f64,
    pub p_punt: f64,
}

impl CoachProbs {
    pub fn get(&self, d: Decision) -> f64 {
        match d {
            Decision::Go => self.p_go,
            Decision::FieldGoal => self.p_fg,
            Decision::Punt => self.p_punt,
        }
    }

    pub fn modal(&self) -> Decision {
        let mut best = Decision::Go;
        for d in Decision::ALL {
            if self.get(d) > self.get(best) {
                best = d;
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoachModel {
    pub format_version: u32,
    /// One-vs-rest classifiers for Go, FG and Punt.
    pub models: Vec<GbtModel>,
}

impl CoachModel {
    pub fn probs_for(&self, x: &[f64]) -> CoachProbs {
        let m: Vec<f64> = self.models.iter().map(|g| g.predict_margin(x)).collect();
        let top = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = m.iter().map(|v| (v - top).exp()).collect();
        let z: f64 = e.iter().sum();
        CoachProbs { p_go: e[0] / z, p_fg: e[1] / z, p_punt: e[2] / z }
    }

    pub fn probs(&self, state: &FourthDownState, season: u16) -> CoachProbs {
        self.probs_for(&coach_features(state, season))
    }

    /// Gain importance summed over the three classifiers, as shares.
    pub fn importance(&self) -> Vec<(String, f64)> {
        let mut gains = vec![0.0; COACH_FEATURE_NAMES.len()];
        for m in &self.models {
            for (g, v) in gains.iter_mut().zip(&m.gain_importance) {
                *g += v;
            }
        }
        let total: f64 = gains.iter().sum();
        COACH_FEATURE_NAMES
            .iter()
            .zip(gains)
            .map(|(n, g)| (n.to_string(), if total > 0.0 { g / total } else { 0.0 }))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<CoachModel> {
        let m: CoachModel = serde_json::from_str(s)?;
        if m.format_version != COACH_FORMAT_VERSION {
            return Err(Error::FormatVersion { found: m.format_version, expected: COACH_FORMAT_VERSION });
        }
        if m.models.len() != 3 {
            return Err(Error::InvalidInput(format!("coach model has {} classifiers, expected 3", m.models.len())));
        }
        for g in &m.models {
            g.check_version()?;
        }
        Ok(m)
    }
}

/// The fitted model and its in-sample fit summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoachFit {
    pub model: CoachModel,
    pub n_plays: usize,
    /// Class counts in [`Decision::ALL`] order.
    pub class_counts: [usize; 3],
    /// Mean `-ln p(actual)` within each true class.
    pub class_log_loss: [f64; 3],
    pub log_loss: f64,
}

/// Fits the coach model on the fourth-down plays where a decision was taken.
pub fn fit_coach(plays: &[PlayRecord], params: &GbtParams) -> Result<CoachFit> {
    let pool = filter_training_pools(plays).fourth_down;
    let mut x = FeatureMatrix::new(COACH_FEATURE_NAMES.len());
    let mut labels = Vec::with_capacity(pool.len());
    let neutral = QualityInputs::default();
    for &i in &pool {
        let Some(d) = Decision::from_play_type(plays[i].play_type) else { continue };
        let state = FourthDownState::from_play(&plays[i], &neutral, i);
        x.push(&coach_features(&state, plays[i].season))?;
        labels.push(d);
    }
    let mut class_counts = [0usize; 3];
    for d in &labels {
        class_counts[d.index()] += 1;
    }
    for d in Decision::ALL {
        if class_counts[d.index()] == 0 {
            return Err(Error::InvalidInput(format!("no fourth-down plays with decision {d}")));
        }
    }
    let names: Vec<String> = COACH_FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let free = [0i8; 6];
    let params = GbtParams { early_stopping: None, ..params.clone() };
    let mapper = BinMapper::fit(&x, params.max_bins)?;
    let models = Decision::ALL
        .par_iter()
        .map(|&d| {
            let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l == d))).collect();
            Ok(train(TrainData::new(&x, &y), None, &names, &free, &params, Some(&mapper))?.model)
        })
        .collect::<Result<Vec<_>>>()?;
    let model = CoachModel { format_version: COACH_FORMAT_VERSION, models };
    let mut class_loss = [0.0; 3];
    for (r, d) in labels.iter().enumerate() {
        let p = model.probs_for(x.row(r)).get(*d).max(1e-15);
        class_loss[d.index()] -= p.ln();
    }
    let total: f64 = class_loss.iter().sum();
    let class_log_loss = [0, 1, 2].map(|k| class_loss[k] / class_counts[k] as f64);
    Ok(CoachFit { model, n_plays: labels.len(), class_counts, class_log_loss, log_loss: total / labels.len() as f64 })
}

pub fn write_importance_csv<W: Write>(sink: W, importance: &[(String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["feature", "gain_share"])?;
    for (name, share) in importance {
        w.write_record([name.clone(), format!("{share:.6}")])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoachRow {
    pub coach: String,
    pub confident_plays: usize,
    pub agreed: usize,
    pub agreement: f64,
}

/// Agreement counts over a subset of confident plays.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementSplit {
    pub plays: usize,
    pub agreed: usize,
}

impl AgreementSplit {
    pub fn rate(&self) -> Option<f64> {
        (self.plays > 0).then(|| self.agreed as f64 / self.plays as f64)
    }

    fn add(&mut self, agreed: bool) {
        self.plays += 1;
        self.agreed += usize::from(agreed);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoachAgreement {
    /// Coaches with at least one confident play, by name.
    pub rows: Vec<CoachRow>,
    /// Coaches whose plays were all lean or uncertain.
    pub excluded: Vec<String>,
    pub overall: AgreementSplit,
    /// Confident plays where the engine says kick (FG or punt).
    pub model_says_kick: AgreementSplit,
    pub model_says_go: AgreementSplit,
}

impl CoachAgreement {
    /// Agreement of a coach's decision with the point decision, counted on
    /// plays whose confidence bin is `confident`.
    pub fn from_outcomes(outcomes: &[(String, Decision, Decision, ConfidenceBin)]) -> CoachAgreement {
        let mut per: BTreeMap<&str, AgreementSplit> = BTreeMap::new();
        let mut overall = AgreementSplit::default();
        let mut kick = AgreementSplit::default();
        let mut go = AgreementSplit::default();
        for (coach, actual, model, bin) in outcomes {
            let entry = per.entry(coach).or_default();
            if *bin != ConfidenceBin::Confident {
                continue;
            }
            let agreed = actual == model;
            entry.add(agreed);
            overall.add(agreed);
            if model.is_kick() {
                kick.add(agreed);
            } else {
                go.add(agreed);
            }
        }
        let mut rows = Vec::new();
        let mut excluded = Vec::new();
        for (coach, s) in per {
            match s.rate() {
                Some(agreement) => rows.push(CoachRow {
                    coach: coach.to_string(),
                    confident_plays: s.plays,
                    agreed: s.agreed,
                    agreement,
                }),
                None => excluded.push(coach.to_string()),
            }
        }
        CoachAgreement { rows, excluded, overall, model_says_kick: kick, model_says_go: go }
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["coach", "confident_plays", "agreement"])?;
        for r in &self.rows {
            w.write_record([r.coach.clone(), r.confident_plays.to_string(), format!("{:.4}", r.agreement)])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Evaluates every fourth-down decision in `plays` with the ensemble and
/// tabulates agreement on the confident ones.
pub fn coach_agreement(
    plays: &[PlayRecord],
    quality: &QualityInputs,
    ensemble: &BootstrapEnsemble,
    level: f64,
) -> Result<CoachAgreement> {
    let pool = filter_training_pools(plays).fourth_down;
    let outcomes = pool
        .par_iter()
        .filter_map(|&i| {
            let actual = Decision::from_play_type(plays[i].play_type)?;
            let state = FourthDownState::from_play(&plays[i], quality, i);
            Some(ensemble.report(&state, level).map(|r| (plays[i].posteam_coach.clone(), actual, r.decision, r.bin)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoachAgreement::from_outcomes(&outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn era_buckets() {
        assert_eq!(coach_era(1999), 0);
        assert_eq!(coach_era(2001), 0);
        assert_eq!(coach_era(2002), 1);
        assert_eq!(coach_era(2013), 2);
        assert_eq!(coach_era(2017), 3);
        assert_eq!(coach_era(2030), 4);
    }

    #[test]
    fn agreement_filters_and_weights() {
        use ConfidenceBin::*;
        use Decision::*;
        let o = |c: &str, a, m, b| (c.to_string(), a, m, b);
        let outcomes = vec![
            o("A", Go, Go, Confident),
            o("A", Punt, Go, Confident),
            o("A", Punt, Punt, Confident),
            o("B", FieldGoal, FieldGoal, Confident),
            o("B", Go, FieldGoal, Uncertain),
            o("C", Go, Punt, Lean),
        ];
        let a = CoachAgreement::from_outcomes(&outcomes);
        assert_eq!(a.excluded, vec!["C".to_string()]);
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.rows[0].confident_plays, 3);
        assert!((a.rows[0].agreement - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.rows[1].agreement, 1.0);
        assert_eq!(a.overall, AgreementSplit { plays: 4, agreed: 3 });
        assert_eq!(a.model_says_kick, AgreementSplit { plays: 2, agreed: 2 });
        assert_eq!(a.model_says_go, AgreementSplit { plays: 2, agreed: 1 });
        let weighted: f64 = a.rows.iter().map(|r| r.agreement * r.confident_plays as f64).sum::<f64>()
            / a.rows.iter().map(|r| r.confident_plays as f64).sum::<f64>();
        assert_eq!(weighted, a.overall.rate().unwrap());
    }

    #[test]
    fn modal_decision_is_the_largest() {
        let probs = CoachProbs { p_go: 0.2, p_fg: 0.3, p_punt: 0.5 };
        assert_eq!(probs.modal(), Decision::Punt);
    }
}
