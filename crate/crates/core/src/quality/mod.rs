//! Specialist and team quality metrics.
//!
//! Kicker quality `kq` is an exponentially decayed, shrunken running mean of
//! field goal probability added (made minus a kicker-agnostic make
//! probability); punter quality `pq` is the same construction over punt yards
//! over expected. Team quality comes from the betting market: with total line
//! `TP` and spread `PS`, the offense-versus-defense edge is `(TP - PS) / 2`
//! and its mirror `(TP + PS) / 2`.
//!
//! All three are standardized with statistics frozen on a fitting population.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{filter_training_pools, PlayRecord};
use crate::error::{Error, Result};
use crate::spline_glm::{irls, ols, IrlsOptions, RankPolicy};
use crate::util::sigmoid;

pub const QUALITY_FORMAT_VERSION: u32 = 1;

/// Shrinkage pseudo-count `gamma` and per-attempt decay `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityParams {
    pub gamma: f64,
    pub alpha: f64,
}

impl QualityParams {
    pub const KICKER: QualityParams = QualityParams { gamma: 96.0, alpha: 0.985 };
    pub const PUNTER: QualityParams = QualityParams { gamma: 150.0, alpha: 0.99 };

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) || !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "quality parameters need gamma >= 0 and alpha in (0, 1], got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Quality before each attempt: `out[n] = sum_j a^(n-1-j) r_j / (gamma + sum_j a^(n-1-j))`
/// over `j < n`, and `out[0] = 0`.
pub fn rolling_quality(residuals: &[f64], gamma: f64, alpha: f64) -> Vec<f64> {
    let mut path = rolling_quality_path(residuals, gamma, alpha);
    path.pop();
    path
}

/// Like [`rolling_quality`] with one extra trailing value: the quality after
/// every residual has been seen.
pub fn rolling_quality_path(residuals: &[f64], gamma: f64, alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(residuals.len() + 1);
    let (mut num, mut den) = (0.0, 0.0);
    out.push(0.0);
    for &r in residuals {
        num = alpha * num + r;
        den = alpha * den + 1.0;
        let q = if gamma + den > 0.0 { num / (gamma + den) } else { 0.0 };
        out.push(q);
    }
    out
}

/// Field goal probability added.
pub fn fgpa(made: bool, baseline_prob: f64) -> f64 {
    f64::from(u8::from(made)) - baseline_prob
}

/// Punt yards over expected.
pub fn pyoe(next_yardline: f64, baseline_prediction: f64) -> f64 {
    next_yardline - baseline_prediction
}

fn cubic_row(yardline: f64) -> [f64; 4] {
    let u = yardline / 100.0;
    [1.0, u, u * u, u * u * u]
}

fn cubic_names() -> Vec<String> {
    ["1", "y", "y^2", "y^3"].iter().map(|s| s.to_string()).collect()
}

/// Kicker-agnostic make probability: logistic regression on a cubic in
/// yardline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineFg {
    pub coefficients: [f64; 4],
}

impl BaselineFg {
    pub fn fit(attempts: &[(f64, bool)]) -> Result<BaselineFg> {
        if attempts.is_empty() {
            return Err(Error::EmptyPool { pool: "fg" });
        }
        let x = DMatrix::from_fn(attempts.len(), 4, |i, j| cubic_row(attempts[i].0)[j]);
        let y: Vec<f64> = attempts.iter().map(|a| f64::from(u8::from(a.1))).collect();
        let fit = irls(&x, &y, None, &cubic_names(), RankPolicy::DropAndWarn, IrlsOptions::default())?;
        let c = &fit.coefficients;
        Ok(BaselineFg { coefficients: [c[0], c[1], c[2], c[3]] })
    }

    pub fn predict(&self, yardline: f64) -> f64 {
        let row = cubic_row(yardline);
        sigmoid(row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum())
    }
}

/// Kicker-agnostic expected next yardline after a punt: OLS cubic in yardline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselinePunt {
    pub coefficients: [f64; 4],
}

impl BaselinePunt {
    pub fn fit(punts: &[(f64, f64)]) -> Result<BaselinePunt> {
        if punts.is_empty() {
            return Err(Error::EmptyPool { pool: "punt" });
        }
        let x = DMatrix::from_fn(punts.len(), 4, |i, j| cubic_row(punts[i].0)[j]);
        let y: Vec<f64> = punts.iter().map(|p| p.1).collect();
        let fit = ols(&x, &y, None, &cubic_names(), RankPolicy::DropAndWarn)?;
        let c = &fit.coefficients;
        Ok(BaselinePunt { coefficients: [c[0], c[1], c[2], c[3]] })
    }

    pub fn predict(&self, yardline: f64) -> f64 {
        cubic_row(yardline).iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }
}

/// Mean / population standard deviation, frozen at fit time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub sd: f64,
}

impl Standardizer {
    pub const IDENTITY: Standardizer = Standardizer { mean: 0.0, sd: 1.0 };

    /// A constant (or empty) population gets unit scale so that standardized
    /// values stay finite.
    pub fn fit(values: &[f64]) -> Standardizer {
        if values.is_empty() {
            return Self::IDENTITY;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        Standardizer {
            mean,
            sd: if sd > 1e-12 { sd } else { 1.0 },
        }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeamQuality {
    pub delta_tq_off: f64,
    pub delta_tq_def: f64,
}

/// Unstandardized `((TP - PS) / 2, (TP + PS) / 2)`.
pub fn team_quality_raw(spread: f64, total_line: f64) -> (f64, f64) {
    ((total_line - spread) / 2.0, (total_line + spread) / 2.0)
}

/// Both sides share one standardizer, so negating the spread swaps the two
/// standardized values exactly.
pub fn team_quality(spread: f64, total_line: f64, standardizer: &Standardizer) -> TeamQuality {
    let (off, def) = team_quality_raw(spread, total_line);
    TeamQuality {
        delta_tq_off: standardizer.apply(off),
        delta_tq_def: standardizer.apply(def),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualityConfig {
    pub kicker: QualityParams,
    pub punter: QualityParams,
    /// Seasons whose plays define the baselines and the standardization
    /// statistics. `None` uses every season.
    pub population_seasons: Option<RangeInclusive<u16>>,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            kicker: QualityParams::KICKER,
            punter: QualityParams::PUNTER,
            population_seasons: None,
        }
    }
}

/// Per-play standardized quality values, aligned with the play slice they
/// were computed from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityInputs {
    pub kq: Vec<f64>,
    pub pq: Vec<f64>,
    pub delta_tq_off: Vec<f64>,
    pub delta_tq_def: Vec<f64>,
}

impl QualityInputs {
    /// League-average quality for every play.
    pub fn neutral(n: usize) -> Self {
        QualityInputs {
            kq: vec![0.0; n],
            pq: vec![0.0; n],
            delta_tq_off: vec![0.0; n],
            delta_tq_def: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.kq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kq.is_empty()
    }
}

/// One row of a quality table: the standardized quality a player carried
/// into each attempt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub player_id: String,
    pub attempt_index: usize,
    pub quality: f64,
}

/// The fitted, frozen part of the quality layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityModel {
    pub format_version: u32,
    pub config: QualityConfig,
    pub fg_baseline: BaselineFg,
    pub punt_baseline: BaselinePunt,
    pub kq_standardizer: Standardizer,
    pub pq_standardizer: Standardizer,
    pub tq_standardizer: Standardizer,
}

#[derive(Clone, Debug)]
pub struct QualityFit {
    pub model: QualityModel,
    pub inputs: QualityInputs,
    pub kicker_table: Vec<QualityRow>,
    pub punter_table: Vec<QualityRow>,
}

struct Career {
    /// Play indices of the attempts, chronological.
    plays: Vec<usize>,
    residuals: Vec<f64>,
}

/// Raw quality per play: the player's quality before the play, from every
/// attempt strictly earlier in time. Plays without a player id get 0.
fn raw_quality_per_play(
    plays: &[PlayRecord],
    order: &[usize],
    id_of: impl Fn(&PlayRecord) -> Option<&str>,
    careers: &BTreeMap<String, Career>,
    params: QualityParams,
) -> (Vec<f64>, BTreeMap<String, Vec<f64>>) {
    let paths: BTreeMap<String, Vec<f64>> = careers
        .iter()
        .map(|(id, c)| (id.clone(), rolling_quality_path(&c.residuals, params.gamma, params.alpha)))
        .collect();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut out = vec![0.0; plays.len()];
    for &i in order {
        let Some(id) = id_of(&plays[i]) else { continue };
        let Some(career) = careers.get(id) else { continue };
        let k = seen.entry(id).or_insert(0);
        out[i] = paths[id][*k];
        if career.plays.get(*k) == Some(&i) {
            *k += 1;
        }
    }
    (out, paths)
}

/// Fits baselines and standardizers and computes per-play quality inputs.
pub fn fit_quality(plays: &[PlayRecord], config: &QualityConfig) -> Result<QualityFit> {
    config.kicker.validate()?;
    config.punter.validate()?;
    let in_population = |p: &PlayRecord| {
        config
            .population_seasons
            .as_ref()
            .is_none_or(|r| r.contains(&p.season))
    };
    let pools = filter_training_pools(plays);

    let fg_attempts: Vec<(f64, bool)> = pools
        .fg
        .iter()
        .map(|&i| &plays[i])
        .filter(|p| in_population(p))
        .map(|p| (f64::from(p.yardline), p.fg_made.unwrap_or(false)))
        .collect();
    let fg_baseline = BaselineFg::fit(&fg_attempts)?;
    let punts: Vec<(f64, f64)> = pools
        .punt
        .iter()
        .map(|&i| &plays[i])
        .filter(|p| in_population(p))
        .map(|p| (f64::from(p.yardline), f64::from(p.next_yardline_after_punt.unwrap_or(0))))
        .collect();
    let punt_baseline = BaselinePunt::fit(&punts)?;

    let mut order: Vec<usize> = (0..plays.len()).collect();
    order.sort_by(|&a, &b| plays[a].chrono_key().cmp(&plays[b].chrono_key()));

    let mut fg_pool_mark = vec![false; plays.len()];
    pools.fg.iter().for_each(|&i| fg_pool_mark[i] = true);
    let mut punt_pool_mark = vec![false; plays.len()];
    pools.punt.iter().for_each(|&i| punt_pool_mark[i] = true);

    let mut kickers: BTreeMap<String, Career> = BTreeMap::new();
    let mut punters: BTreeMap<String, Career> = BTreeMap::new();
    for &i in &order {
        let p = &plays[i];
        if fg_pool_mark[i] {
            if let Some(id) = &p.kicker_id {
                let c = kickers.entry(id.clone()).or_insert(Career { plays: vec![], residuals: vec![] });
                c.plays.push(i);
                c.residuals.push(fgpa(
                    p.fg_made.unwrap_or(false),
                    fg_baseline.predict(f64::from(p.yardline)),
                ));
            }
        }
        if punt_pool_mark[i] {
            if let Some(id) = &p.punter_id {
                let c = punters.entry(id.clone()).or_insert(Career { plays: vec![], residuals: vec![] });
                c.plays.push(i);
                c.residuals.push(pyoe(
                    f64::from(p.next_yardline_after_punt.unwrap_or(0)),
                    punt_baseline.predict(f64::from(p.yardline)),
                ));
            }
        }
    }

    let (kq_raw, kq_paths) =
        raw_quality_per_play(plays, &order, |p| p.kicker_id.as_deref(), &kickers, config.kicker);
    let (pq_raw, pq_paths) =
        raw_quality_per_play(plays, &order, |p| p.punter_id.as_deref(), &punters, config.punter);

    let population = |mark: &[bool], raw: &[f64]| -> Vec<f64> {
        (0..plays.len())
            .filter(|&i| mark[i] && in_population(&plays[i]))
            .map(|i| raw[i])
            .collect()
    };
    let kq_standardizer = Standardizer::fit(&population(&fg_pool_mark, &kq_raw));
    let pq_standardizer = Standardizer::fit(&population(&punt_pool_mark, &pq_raw));
    let tq_values: Vec<f64> = plays
        .iter()
        .filter(|p| !p.is_terminal_marker() && in_population(p))
        .map(|p| team_quality_raw(p.posteam_spread, p.total_points_line).0)
        .collect();
    let tq_standardizer = Standardizer::fit(&tq_values);

    let standardize_known = |raw: &[f64], id_of: &dyn Fn(&PlayRecord) -> Option<&String>, st: &Standardizer| {
        raw.iter()
            .zip(plays)
            .map(|(&r, p)| if id_of(p).is_some() { st.apply(r) } else { 0.0 })
            .collect::<Vec<f64>>()
    };
    let kq = standardize_known(&kq_raw, &|p| p.kicker_id.as_ref(), &kq_standardizer);
    let pq = standardize_known(&pq_raw, &|p| p.punter_id.as_ref(), &pq_standardizer);
    let (delta_tq_off, delta_tq_def) = plays
        .iter()
        .map(|p| {
            let tq = team_quality(p.posteam_spread, p.total_points_line, &tq_standardizer);
            (tq.delta_tq_off, tq.delta_tq_def)
        })
        .unzip();

    let table = |paths: &BTreeMap<String, Vec<f64>>, st: &Standardizer| -> Vec<QualityRow> {
        paths
            .iter()
            .flat_map(|(id, path)| {
                path[..path.len() - 1].iter().enumerate().map(move |(k, &q)| QualityRow {
                    player_id: id.clone(),
                    attempt_index: k,
                    quality: st.apply(q),
                })
            })
            .collect()
    };
    log::info!(
        "quality: {} kickers, {} punters, {} fg attempts, {} punts",
        kickers.len(),
        punters.len(),
        fg_attempts.len(),
        punts.len()
    );
    Ok(QualityFit {
        kicker_table: table(&kq_paths, &kq_standardizer),
        punter_table: table(&pq_paths, &pq_standardizer),
        model: QualityModel {
            format_version: QUALITY_FORMAT_VERSION,
            config: config.clone(),
            fg_baseline,
            punt_baseline,
            kq_standardizer,
            pq_standardizer,
            tq_standardizer,
        },
        inputs: QualityInputs { kq, pq, delta_tq_off, delta_tq_def },
    })
}

/// Writes `player_id,attempt_index,quality`.
pub fn write_quality_table<W: Write>(sink: W, rows: &[QualityRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["player_id", "attempt_index", "quality"])?;
    for r in rows {
        w.write_record([r.player_id.clone(), r.attempt_index.to_string(), r.quality.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<quality table>", e))?;
    Ok(())
}
