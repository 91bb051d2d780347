use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_ensemble, BootstrapEnsemble, ConfidenceBin, ResamplePlan, UncertaintyReport};
use crate::data::{filter_training_pools, PlayRecord};
use crate::engine::{DecisionModel, FourthDownState};
use crate::error::{Error, Result};
use crate::gbt::GbtParams;
use crate::pipeline::{FitConfig, PreparedData};
use crate::quality::QualityInputs;
use crate::util::sub_seed;

/// Effect-size bin edges in win-probability percentage points.
const EFFECT_EDGES: [f64; 5] = [0.0, 1.0, 2.0, 3.0, 4.0];

/// One effect-size bin of the overconfidence table, labelled `lo-hi` in
/// percentage points (`4+` for the top bin). Shares are fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectBin {
    pub label: String,
    pub lo_pct: f64,
    /// `None` for the open top bin.
    pub hi_pct: Option<f64>,
    pub count: usize,
    pub share: f64,
    pub confident: f64,
    pub lean: f64,
    pub uncertain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverconfidenceSummary {
    pub n: usize,
    pub bins: Vec<EffectBin>,
    pub confident: f64,
    pub lean: f64,
    pub uncertain: f64,
}

fn shares(counts: [usize; 3], n: usize) -> [f64; 3] {
    if n == 0 {
        return [0.0; 3];
    }
    counts.map(|c| c as f64 / n as f64)
}

impl OverconfidenceSummary {
    /// Bins reports by the point effect size (a missing effect size counts
    /// as zero) and tabulates the confidence classes inside each bin.
    pub fn from_reports(reports: &[UncertaintyReport]) -> OverconfidenceSummary {
        let mut counts = [[0usize; 3]; EFFECT_EDGES.len()];
        let mut total = [0usize; 3];
        for r in reports {
            let pct = 100.0 * r.values.effect_size.unwrap_or(0.0);
            let k = EFFECT_EDGES.iter().rposition(|&e| pct >= e).unwrap_or(0);
            counts[k][r.bin.index()] += 1;
            total[r.bin.index()] += 1;
        }
        let n = reports.len();
        let bins = counts
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let count: usize = c.iter().sum();
                let lo = EFFECT_EDGES[k];
                let hi = EFFECT_EDGES.get(k + 1).copied();
                let [confident, lean, uncertain] = shares(*c, count);
                EffectBin {
                    label: match hi {
                        Some(h) => format!("{lo}-{h}"),
                        None => format!("{lo}+"),
                    },
                    lo_pct: lo,
                    hi_pct: hi,
                    count,
                    share: if n == 0 { 0.0 } else { count as f64 / n as f64 },
                    confident,
                    lean,
                    uncertain,
                }
            })
            .collect();
        let [confident, lean, uncertain] = shares(total, n);
        OverconfidenceSummary { n, bins, confident, lean, uncertain }
    }

    /// CSV with one row per effect-size bin and a final `all` row.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["effect_bin", "count", "share", "confident", "lean", "uncertain"])?;
        for b in &self.bins {
            w.write_record([
                b.label.clone(),
                b.count.to_string(),
                format!("{:.4}", b.share),
                format!("{:.4}", b.confident),
                format!("{:.4}", b.lean),
                format!("{:.4}", b.uncertain),
            ])?;
        }
        w.write_record([
            "all".to_string(),
            self.n.to_string(),
            "1.0000".to_string(),
            format!("{:.4}", self.confident),
            format!("{:.4}", self.lean),
            format!("{:.4}", self.uncertain),
        ])?;
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Engine states of the fourth-down decision plays (go, field goal or
/// punt) in `plays`, skipping any that fail state validation.
pub fn fourth_down_states(plays: &[PlayRecord], quality: &QualityInputs) -> Vec<FourthDownState> {
    filter_training_pools(plays)
        .fourth_down
        .into_iter()
        .map(|i| FourthDownState::from_play(&plays[i], quality, i))
        .filter(|s| s.validate().is_ok())
        .collect()
}

/// The overconfidence table over a set of fourth-down states.
pub fn overconfidence_summary(
    states: &[FourthDownState],
    ensemble: &BootstrapEnsemble,
    level: f64,
) -> Result<OverconfidenceSummary> {
    let reports = states
        .par_iter()
        .map(|s| ensemble.report(s, level))
        .collect::<Result<Vec<_>>>()?;
    Ok(OverconfidenceSummary::from_reports(&reports))
}

/// Settings of a stability study. Ensembles of the smaller sizes are the
/// leading replicates of the largest one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub bs: Vec<usize>,
    /// Independent ensembles per size.
    pub m: usize,
    pub seed: u64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub b: usize,
    pub m: usize,
    pub n_plays: usize,
    /// Mean over plays of the modal confidence-class frequency.
    pub mean_p: f64,
    /// Share of plays whose class never changed across ensembles.
    pub share_at_one: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub config: StabilityConfig,
    /// Free-text description of the data and model configuration used.
    pub setup: String,
    pub rows: Vec<StabilityRow>,
    /// Per-play modal frequencies, aligned with `rows`.
    pub per_play: Vec<Vec<f64>>,
}

impl StabilityTable {
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["b", "m", "n_plays", "mean_p", "share_at_one"])?;
        for r in &self.rows {
            w.write_record([
                r.b.to_string(),
                r.m.to_string(),
                r.n_plays.to_string(),
                format!("{:.6}", r.mean_p),
                format!("{:.6}", r.share_at_one),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Histogram data: one `b,play,p` row per play and ensemble size.
pub fn write_stability_histogram<W: Write>(table: &StabilityTable, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["b", "play", "p"])?;
    for (row, ps) in table.rows.iter().zip(&table.per_play) {
        for (i, p) in ps.iter().enumerate() {
            w.write_record([row.b.to_string(), i.to_string(), format!("{p:.6}")])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// How stable the confidence class of each state is across `m` independent
/// ensembles, for every ensemble size in `study.bs`.
pub fn stability_analysis(
    data: &PreparedData,
    point: &DecisionModel,
    params: &GbtParams,
    config: &FitConfig,
    states: &[FourthDownState],
    study: &StabilityConfig,
) -> Result<StabilityTable> {
    if study.m < 2 {
        return Err(Error::InvalidInput("stability needs at least two ensembles".into()));
    }
    if states.is_empty() || study.bs.is_empty() {
        return Err(Error::InvalidInput("stability needs states and ensemble sizes".into()));
    }
    let b_max = *study.bs.iter().max().expect("non-empty");
    for &b in &study.bs {
        ResamplePlan::new(0, b, study.fraction)?;
    }
    // counts[size][state][class]
    let mut counts = vec![vec![[0usize; 3]; states.len()]; study.bs.len()];
    for m in 0..study.m {
        let plan = ResamplePlan::new(sub_seed(study.seed, 0x57ab, m as u64), b_max, study.fraction)?;
        let full = fit_ensemble(data, point.clone(), params, plan, config)?;
        // Evaluate every replicate once and reuse the values for each prefix.
        let values = states
            .par_iter()
            .map(|s| Ok((full.point_values(s)?, full.replicate_values(s)?)))
            .collect::<Result<Vec<_>>>()?;
        for (k, &b) in study.bs.iter().enumerate() {
            for (i, (point, reps)) in values.iter().enumerate() {
                let agree = reps[..b].iter().filter(|r| r.best == point.best).count();
                counts[k][i][ConfidenceBin::from_counts(agree, b).index()] += 1;
            }
        }
        log::info!("stability ensemble {}/{} done", m + 1, study.m);
    }
    let mut rows = Vec::new();
    let mut per_play = Vec::new();
    for (k, &b) in study.bs.iter().enumerate() {
        let ps: Vec<f64> = counts[k]
            .iter()
            .map(|c| *c.iter().max().expect("three classes") as f64 / study.m as f64)
            .collect();
        rows.push(StabilityRow {
            b,
            m: study.m,
            n_plays: ps.len(),
            mean_p: ps.iter().sum::<f64>() / ps.len() as f64,
            share_at_one: ps.iter().filter(|&&p| p == 1.0).count() as f64 / ps.len() as f64,
        });
        per_play.push(ps);
    }
    let setup = format!(
        "{} plays, {} probe states, boosted trees depth {} lr {} mcw {} rounds {}",
        data.plays.len(),
        states.len(),
        params.max_depth,
        params.learning_rate,
        params.min_child_weight,
        params.n_rounds
    );
    Ok(StabilityTable { config: study.clone(), setup, rows, per_play })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::uncertainty_report;
    use crate::engine::{Decision, DecisionValues};

    fn report(effect: f64, agree: usize, b: usize) -> UncertaintyReport {
        let point = DecisionValues {
            wp_go: 0.5 + effect,
            wp_fg: Some(0.5),
            wp_punt: None,
            best: Decision::Go,
            effect_size: Some(effect),
        };
        let reps: Vec<DecisionValues> = (0..b)
            .map(|i| DecisionValues {
                best: if i < agree { Decision::Go } else { Decision::FieldGoal },
                ..point.clone()
            })
            .collect();
        uncertainty_report(point, &reps, 0.9).unwrap()
    }

    #[test]
    fn single_play_fills_one_bin() {
        let s = OverconfidenceSummary::from_reports(&[report(0.015, 5, 5)]);
        assert_eq!(s.n, 1);
        let full: Vec<_> = s.bins.iter().filter(|b| b.count > 0).collect();
        assert_eq!(full.len(), 1);
        assert_eq!(full[0].label, "1-2");
        assert_eq!(full[0].confident, 1.0);
        assert_eq!(s.confident, 1.0);
    }

    #[test]
    fn bins_cover_every_effect() {
        let reports: Vec<_> = [0.0, 0.0099, 0.01, 0.025, 0.039, 0.04, 0.3]
            .iter()
            .map(|&e| report(e, 2, 5))
            .collect();
        let s = OverconfidenceSummary::from_reports(&reports);
        let counts: Vec<usize> = s.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![2, 1, 1, 1, 2]);
        assert_eq!(s.uncertain, 1.0);
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("effect_bin,count,share,confident,lean,uncertain\n0-1,2,"));
        assert!(text.ends_with("all,7,1.0000,0.0000,0.0000,1.0000\n"));
    }
}
