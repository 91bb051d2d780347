//! The five fourth-down transition models.
//!
//! | model            | link     | design                                                              |
//! |------------------|----------|---------------------------------------------------------------------|
//! | punt next spot   | identity | spline(yardline, df 4) + pq + pq x yardline                         |
//! | FG make          | logit    | spline(yardline, df 5) + kq                                         |
//! | conversion       | logit    | 4th x spline(ln(z+1), 4) + 3rd x spline(ln(z+1), 4) + dTQ            |
//! | yards if success | identity | 4th x spline(ln z, 4) + 3rd x spline(ln z, 4)                       |
//! |                  |          | + [z = 1] x spline(yardline, 3) + [z != 1] x spline(yardline, 4) + dTQ |
//! | yards if failure | identity | 4th x ln(z+1) + 3rd x ln(z+1) + dTQ                                  |
//!
//! Every design also carries an intercept. All models are fitted on raw
//! input rows laid out as `[yardline, ydstogo, down, kq, pq, delta_tq]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{filter_training_pools, PlayRecord, PUNT_POOL_MIN_YARDLINE};
use crate::error::{Error, Result};
use crate::quality::QualityInputs;
use crate::spline_glm::{Design, Gate, GlmModel, InputTransform, IrlsOptions, RankPolicy, TermSpec};
use crate::util::rng_for;

pub const IN_YARDLINE: usize = 0;
pub const IN_YDSTOGO: usize = 1;
pub const IN_DOWN: usize = 2;
pub const IN_KQ: usize = 3;
pub const IN_PQ: usize = 4;
pub const IN_DELTA_TQ: usize = 5;
pub const N_INPUTS: usize = 6;

pub const TRANSITION_FORMAT_VERSION: u32 = 1;

pub fn inputs(yardline: f64, ydstogo: f64, down: f64, kq: f64, pq: f64, delta_tq: f64) -> Vec<f64> {
    vec![yardline, ydstogo, down, kq, pq, delta_tq]
}

/// The transition quantities the decision engine needs.
pub trait TransitionModel {
    /// Expected next yardline from the receiving team's perspective.
    fn punt_next_yardline(&self, yardline: f64, pq: f64) -> f64;
    fn fg_make_prob(&self, yardline: f64, kq: f64) -> f64;
    fn conversion_prob(&self, ydstogo: f64, down: u8, delta_tq: f64) -> f64;
    /// Expected yards gained given the attempt converts.
    fn success_gain(&self, yardline: f64, ydstogo: f64, down: u8, delta_tq: f64) -> f64;
    /// Expected yards gained given the attempt fails.
    fn failure_gain(&self, ydstogo: f64, down: u8, delta_tq: f64) -> f64;
}

/// Imputed long misses that pull make probabilities to zero beyond the
/// range of real attempts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMisses {
    pub count: usize,
    pub yardline_min: u8,
    pub yardline_max: u8,
    pub seed: u64,
}

impl Default for SyntheticMisses {
    fn default() -> Self {
        SyntheticMisses {
            count: 500,
            yardline_min: 51,
            yardline_max: 99,
            seed: 0x5e_edf6,
        }
    }
}

impl SyntheticMisses {
    /// Uniform integer yardlines, determined by the seed alone.
    pub fn yardlines(&self) -> Vec<u8> {
        let mut rng = rng_for(self.seed, 0xf6, 0);
        (0..self.count)
            .map(|_| rng.gen_range(self.yardline_min..=self.yardline_max))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitionConfig {
    pub synthetic_misses: SyntheticMisses,
    pub rank_policy: RankPolicy,
    /// IRLS settings for the conversion model.
    pub irls: IrlsOptions,
    /// IRLS settings for the FG model. The imputed misses are meant to push
    /// long-range make probabilities to zero, so separation is allowed.
    pub fg_irls: IrlsOptions,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            synthetic_misses: SyntheticMisses::default(),
            rank_policy: RankPolicy::DropAndWarn,
            irls: IrlsOptions::default(),
            fg_irls: IrlsOptions { allow_separation: true, ..IrlsOptions::default() },
        }
    }
}

fn spline(name: &str, input: usize, transform: InputTransform, df: usize, gate: Option<Gate>) -> TermSpec {
    TermSpec::Spline { name: name.into(), input, transform, df, gate }
}

fn linear(name: &str, input: usize, transform: InputTransform, gate: Option<Gate>) -> TermSpec {
    TermSpec::Linear { name: name.into(), input, transform, gate }
}

pub fn punt_terms() -> Vec<TermSpec> {
    vec![
        TermSpec::Intercept,
        spline("bs(yardline)", IN_YARDLINE, InputTransform::Identity, 4, None),
        linear("pq", IN_PQ, InputTransform::Identity, None),
        TermSpec::Product { name: "pq:yardline".into(), inputs: (IN_PQ, IN_YARDLINE) },
    ]
}

pub fn fg_terms() -> Vec<TermSpec> {
    vec![
        TermSpec::Intercept,
        spline("bs(yardline)", IN_YARDLINE, InputTransform::Identity, 5, None),
        linear("kq", IN_KQ, InputTransform::Identity, None),
    ]
}

pub fn conversion_terms() -> Vec<TermSpec> {
    vec![
        TermSpec::Intercept,
        spline("4th:bs(log(ydstogo+1))", IN_YDSTOGO, InputTransform::Log1p, 4, Some(Gate::is(IN_DOWN, 4.0))),
        spline("3rd:bs(log(ydstogo+1))", IN_YDSTOGO, InputTransform::Log1p, 4, Some(Gate::is(IN_DOWN, 3.0))),
        linear("delta_tq", IN_DELTA_TQ, InputTransform::Identity, None),
    ]
}

pub fn success_terms() -> Vec<TermSpec> {
    vec![
        TermSpec::Intercept,
        spline("4th:bs(log(ydstogo))", IN_YDSTOGO, InputTransform::Log, 4, Some(Gate::is(IN_DOWN, 4.0))),
        spline("3rd:bs(log(ydstogo))", IN_YDSTOGO, InputTransform::Log, 4, Some(Gate::is(IN_DOWN, 3.0))),
        spline("[ydstogo=1]:bs(yardline)", IN_YARDLINE, InputTransform::Identity, 3, Some(Gate::is(IN_YDSTOGO, 1.0))),
        spline("[ydstogo!=1]:bs(yardline)", IN_YARDLINE, InputTransform::Identity, 4, Some(Gate::is_not(IN_YDSTOGO, 1.0))),
        linear("delta_tq", IN_DELTA_TQ, InputTransform::Identity, None),
    ]
}

pub fn failure_terms() -> Vec<TermSpec> {
    vec![
        TermSpec::Intercept,
        linear("4th:log(ydstogo+1)", IN_YDSTOGO, InputTransform::Log1p, Some(Gate::is(IN_DOWN, 4.0))),
        linear("3rd:log(ydstogo+1)", IN_YDSTOGO, InputTransform::Log1p, Some(Gate::is(IN_DOWN, 3.0))),
        linear("delta_tq", IN_DELTA_TQ, InputTransform::Identity, None),
    ]
}

/// One pool's design rows and responses, with the play each row came from
/// (`None` for imputed rows).
#[derive(Clone, Debug, Default)]
pub struct PoolData {
    pub rows: Vec<Vec<f64>>,
    pub response: Vec<f64>,
    pub source: Vec<Option<usize>>,
}

impl PoolData {
    fn push(&mut self, row: Vec<f64>, response: f64, source: Option<usize>) {
        self.rows.push(row);
        self.response.push(response);
        self.source.push(source);
    }

    /// Row weights from per-play weights; imputed rows keep weight 1.
    pub fn weights(&self, play_weights: &[f64]) -> Vec<f64> {
        self.source
            .iter()
            .map(|s| s.map_or(1.0, |i| play_weights[i]))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Model-ready pools extracted once from a play set.
#[derive(Clone, Debug)]
pub struct TransitionData {
    pub punt: PoolData,
    pub fg: PoolData,
    pub conversion: PoolData,
    pub success: PoolData,
    pub failure: PoolData,
}

impl TransitionData {
    pub fn build(plays: &[PlayRecord], quality: &QualityInputs, config: &TransitionConfig) -> Result<Self> {
        if quality.len() != plays.len() {
            return Err(Error::InvalidInput(format!(
                "{} quality rows for {} plays",
                quality.len(),
                plays.len()
            )));
        }
        let pools = filter_training_pools(plays);
        let row = |i: usize| {
            let p = &plays[i];
            inputs(
                f64::from(p.yardline),
                f64::from(p.ydstogo),
                f64::from(p.down),
                quality.kq[i],
                quality.pq[i],
                quality.delta_tq_off[i],
            )
        };
        let mut d = TransitionData {
            punt: PoolData::default(),
            fg: PoolData::default(),
            conversion: PoolData::default(),
            success: PoolData::default(),
            failure: PoolData::default(),
        };
        for &i in &pools.punt {
            let next = plays[i].next_yardline_after_punt.expect("punt pool requires a next yardline");
            d.punt.push(row(i), f64::from(next), Some(i));
        }
        for &i in &pools.fg {
            let made = plays[i].fg_made.expect("fg pool requires an outcome");
            d.fg.push(row(i), f64::from(u8::from(made)), Some(i));
        }
        for y in config.synthetic_misses.yardlines() {
            d.fg.push(inputs(f64::from(y), 1.0, 4.0, 0.0, 0.0, 0.0), 0.0, None);
        }
        for &i in &pools.conversion {
            let p = &plays[i];
            let gained = p.yards_gained.expect("conversion pool requires yards gained");
            let converted = gained >= i32::from(p.ydstogo);
            d.conversion.push(row(i), f64::from(u8::from(converted)), Some(i));
            if converted {
                d.success.push(row(i), f64::from(gained), Some(i));
            } else {
                d.failure.push(row(i), f64::from(gained), Some(i));
            }
        }
        for (pool, name) in [
            (&d.punt, "punt"),
            (&d.fg, "fg"),
            (&d.conversion, "conversion"),
            (&d.success, "conversion success"),
            (&d.failure, "conversion failure"),
        ] {
            if pool.source.iter().all(Option::is_none) {
                return Err(Error::EmptyPool { pool: name });
            }
        }
        Ok(d)
    }
}

/// Resolved designs (knots placed) for the five models. Computed once from
/// the full data and shared by every bootstrap replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionDesigns {
    pub punt: Design,
    pub fg: Design,
    pub conversion: Design,
    pub success: Design,
    pub failure: Design,
}

impl TransitionDesigns {
    pub fn resolve(data: &TransitionData) -> Result<Self> {
        Ok(TransitionDesigns {
            punt: Design::resolve(N_INPUTS, &punt_terms(), &data.punt.rows)?,
            fg: Design::resolve(N_INPUTS, &fg_terms(), &data.fg.rows)?,
            conversion: Design::resolve(N_INPUTS, &conversion_terms(), &data.conversion.rows)?,
            success: Design::resolve(N_INPUTS, &success_terms(), &data.success.rows)?,
            failure: Design::resolve(N_INPUTS, &failure_terms(), &data.failure.rows)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionBundle {
    pub format_version: u32,
    pub punt: GlmModel,
    pub fg: GlmModel,
    pub conversion: GlmModel,
    pub success_yards: GlmModel,
    pub failure_yards: GlmModel,
}

fn pool_weights(pool: &PoolData, play_weights: Option<&[f64]>) -> Option<Vec<f64>> {
    play_weights.map(|w| pool.weights(w))
}

fn with_pool<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Separation { direction } => Error::Separation { direction: format!("{name} model: {direction}") },
        Error::Degenerate(m) => Error::Degenerate(format!("{name} model: {m}")),
        other => other,
    })
}

/// Fits all five models. `play_weights`, when given, is indexed like the
/// play slice the data was built from.
pub fn fit_transitions(
    data: &TransitionData,
    designs: &TransitionDesigns,
    play_weights: Option<&[f64]>,
    config: &TransitionConfig,
) -> Result<TransitionBundle> {
    let rp = config.rank_policy;
    let ols = |pool: &PoolData, design: &Design, name: &'static str| {
        let w = pool_weights(pool, play_weights);
        with_pool(name, GlmModel::fit_ols(design.clone(), &pool.rows, &pool.response, w.as_deref(), rp))
    };
    let logistic = |pool: &PoolData, design: &Design, name: &'static str, opts: IrlsOptions| {
        let w = pool_weights(pool, play_weights);
        with_pool(
            name,
            GlmModel::fit_logistic_with(design.clone(), &pool.rows, &pool.response, w.as_deref(), rp, opts),
        )
    };
    Ok(TransitionBundle {
        format_version: TRANSITION_FORMAT_VERSION,
        punt: ols(&data.punt, &designs.punt, "punt")?,
        fg: logistic(&data.fg, &designs.fg, "fg", config.fg_irls)?,
        conversion: logistic(&data.conversion, &designs.conversion, "conversion", config.irls)?,
        success_yards: ols(&data.success, &designs.success, "conversion success")?,
        failure_yards: ols(&data.failure, &designs.failure, "conversion failure")?,
    })
}

impl TransitionBundle {
    pub fn check_version(&self) -> Result<()> {
        if self.format_version != TRANSITION_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: TRANSITION_FORMAT_VERSION,
            });
        }
        for m in [&self.punt, &self.fg, &self.conversion, &self.success_yards, &self.failure_yards] {
            m.check_version()?;
        }
        Ok(())
    }
}

impl TransitionModel for TransitionBundle {
    fn punt_next_yardline(&self, yardline: f64, pq: f64) -> f64 {
        // the punt model only knows punts from beyond the 30
        let y = yardline.clamp(f64::from(PUNT_POOL_MIN_YARDLINE) + 1.0, 99.0);
        self.punt.predict(&inputs(y, 10.0, 4.0, 0.0, pq, 0.0))
    }

    fn fg_make_prob(&self, yardline: f64, kq: f64) -> f64 {
        self.fg.predict(&inputs(yardline, 1.0, 4.0, kq, 0.0, 0.0))
    }

    fn conversion_prob(&self, ydstogo: f64, down: u8, delta_tq: f64) -> f64 {
        self.conversion.predict(&inputs(ydstogo, ydstogo, f64::from(down), 0.0, 0.0, delta_tq))
    }

    fn success_gain(&self, yardline: f64, ydstogo: f64, down: u8, delta_tq: f64) -> f64 {
        self.success_yards.predict(&inputs(yardline, ydstogo, f64::from(down), 0.0, 0.0, delta_tq))
    }

    fn failure_gain(&self, ydstogo: f64, down: u8, delta_tq: f64) -> f64 {
        self.failure_yards.predict(&inputs(ydstogo, ydstogo, f64::from(down), 0.0, 0.0, delta_tq))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_misses_are_seeded_and_in_range() {
        let m = SyntheticMisses::default();
        let a = m.yardlines();
        assert_eq!(a.len(), 500);
        assert!(a.iter().all(|&y| (51..=99).contains(&y)));
        assert_eq!(a, m.yardlines());
        let other = SyntheticMisses { seed: 1, ..m }.yardlines();
        assert_ne!(a, other);
    }

    #[test]
    fn designs_have_the_documented_widths() {
        let rows: Vec<Vec<f64>> = (1..=60)
            .map(|i| inputs(f64::from(i) + 10.0, f64::from(i % 9 + 1), f64::from(3 + i % 2), 0.0, 0.0, 0.1 * f64::from(i)))
            .collect();
        let w = |t: Vec<TermSpec>| Design::resolve(N_INPUTS, &t, &rows).unwrap().n_columns();
        assert_eq!(w(punt_terms()), 1 + 4 + 1 + 1);
        assert_eq!(w(fg_terms()), 1 + 5 + 1);
        assert_eq!(w(conversion_terms()), 1 + 4 + 4 + 1);
        assert_eq!(w(success_terms()), 1 + 4 + 4 + 3 + 4 + 1);
        assert_eq!(w(failure_terms()), 1 + 1 + 1 + 1);
    }
}
