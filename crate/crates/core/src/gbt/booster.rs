use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::{BinMapper, FeatureMatrix, MAX_BINS};
use super::tree::{GrowParams, Grower, Tree};
use crate::error::{Error, Result};
use crate::util::{logit, sigmoid};

pub const GBT_FORMAT_VERSION: u32 = 1;

const PROB_FLOOR: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_child_weight: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Maximum number of boosting rounds.
    pub n_rounds: usize,
    /// Stop after this many rounds without validation improvement.
    pub early_stopping: Option<usize>,
    pub max_bins: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            max_depth: 4,
            learning_rate: 0.1,
            min_child_weight: 100.0,
            lambda: 1.0,
            n_rounds: 1000,
            early_stopping: Some(50),
            max_bins: MAX_BINS,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("gbt parameter: {m}")));
        if self.max_depth == 0 || self.max_depth > 16 {
            return bad("max_depth must be in [1, 16]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if !(self.min_child_weight >= 0.0) || !(self.lambda >= 0.0) {
            return bad("min_child_weight and lambda must be non-negative");
        }
        if self.n_rounds == 0 {
            return bad("n_rounds must be positive");
        }
        if !(2..=MAX_BINS).contains(&self.max_bins) {
            return bad("max_bins must be in [2, 256]");
        }
        Ok(())
    }
}

/// Hyperparameter grid searched on the tuning split. The number of rounds
/// is chosen by early stopping at every grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperGrid {
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub min_child_weight: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            max_depth: vec![3, 4, 5],
            learning_rate: vec![0.05, 0.1],
            min_child_weight: vec![100.0, 500.0],
        }
    }
}

impl HyperGrid {
    pub fn points(&self, base: &GbtParams) -> Vec<GbtParams> {
        let mut out = Vec::new();
        for &max_depth in &self.max_depth {
            for &learning_rate in &self.learning_rate {
                for &min_child_weight in &self.min_child_weight {
                    out.push(GbtParams {
                        max_depth,
                        learning_rate,
                        min_child_weight,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

/// A boosted ensemble for binary outcomes under logistic loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    /// Per-feature constraint: +1 increasing, -1 decreasing, 0 free.
    pub monotone: Vec<i8>,
    pub base_score: f64,
    pub learning_rate: f64,
    pub params: GbtParams,
    pub trees: Vec<Tree>,
    /// Total split gain per feature.
    pub gain_importance: Vec<f64>,
}

impl GbtModel {
    pub fn predict_margin(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        self.base_score + self.learning_rate * sum
    }

    /// Probability in `(0, 1)`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.predict_margin(x)).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
    }

    pub fn predict_matrix(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict(x.row(i))).collect()
    }

    /// Runs the structural monotonicity audit over every tree.
    pub fn audit(&self) -> Result<(), String> {
        for (k, t) in self.trees.iter().enumerate() {
            t.audit_monotone(&self.monotone).map_err(|e| format!("tree {k}: {e}"))?;
        }
        Ok(())
    }

    /// Gain importance normalized to sum to one, in feature order.
    pub fn importance_shares(&self) -> Vec<(String, f64)> {
        let total: f64 = self.gain_importance.iter().sum();
        self.feature_names
            .iter()
            .zip(&self.gain_importance)
            .map(|(n, g)| (n.clone(), if total > 0.0 { g / total } else { 0.0 }))
            .collect()
    }

    pub fn check_version(&self) -> Result<()> {
        if self.format_version != GBT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: GBT_FORMAT_VERSION,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<GbtModel> {
        let m: GbtModel = serde_json::from_str(s)?;
        m.check_version()?;
        Ok(m)
    }
}

/// Features, binary labels and optional instance weights.
#[derive(Clone, Copy)]
pub struct TrainData<'a> {
    pub x: &'a FeatureMatrix,
    pub y: &'a [f64],
    pub weights: Option<&'a [f64]>,
}

impl<'a> TrainData<'a> {
    pub fn new(x: &'a FeatureMatrix, y: &'a [f64]) -> Self {
        TrainData { x, y, weights: None }
    }

    pub fn weighted(x: &'a FeatureMatrix, y: &'a [f64], weights: &'a [f64]) -> Self {
        TrainData { x, y, weights: Some(weights) }
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    fn check(&self) -> Result<()> {
        let n = self.x.n_rows();
        if self.y.len() != n || self.weights.is_some_and(|w| w.len() != n) {
            return Err(Error::InvalidInput("features, labels and weights differ in length".into()));
        }
        if self.y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidInput("labels must lie in [0, 1]".into()));
        }
        if let Some(w) = self.weights {
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn log_loss(&self, probs: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &p) in probs.iter().enumerate() {
            let w = self.weight(i);
            if w == 0.0 {
                continue;
            }
            let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            let y = self.y[i];
            num -= w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            den += w;
        }
        if den > 0.0 {
            num / den
        } else {
            f64::NAN
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: GbtModel,
    /// Rounds kept (the best validation round when early stopping).
    pub rounds: usize,
    /// Validation log-loss per round, when a validation set was given.
    pub history: Vec<f64>,
    pub valid_loss: Option<f64>,
}

/// Trains a boosted ensemble. With a validation set and early stopping the
/// ensemble is truncated to its best validation round, which is exactly the
/// model a refit with that many rounds would produce.
pub fn train(
    data: TrainData<'_>,
    valid: Option<TrainData<'_>>,
    feature_names: &[String],
    monotone: &[i8],
    params: &GbtParams,
    mapper: Option<&BinMapper>,
) -> Result<TrainOutcome> {
    params.validate()?;
    data.check()?;
    let p = data.x.n_features();
    if feature_names.len() != p || monotone.len() != p {
        return Err(Error::InvalidInput(format!(
            "{p} features but {} names and {} constraints",
            feature_names.len(),
            monotone.len()
        )));
    }
    if let Some(v) = &valid {
        v.check()?;
        if v.x.n_features() != p {
            return Err(Error::InvalidInput("validation width differs from training width".into()));
        }
    }
    let n = data.x.n_rows();
    let total_w: f64 = (0..n).map(|i| data.weight(i)).sum();
    if n == 0 || total_w <= 0.0 {
        return Err(Error::Degenerate("no weighted training rows".into()));
    }
    let mean = (0..n).map(|i| data.weight(i) * data.y[i]).sum::<f64>() / total_w;
    let base_score = logit(mean.clamp(1e-6, 1.0 - 1e-6));

    let owned_mapper;
    let mapper = match mapper {
        Some(m) => m,
        None => {
            owned_mapper = BinMapper::fit(data.x, params.max_bins)?;
            &owned_mapper
        }
    };
    let binned = mapper.transform(data.x)?;

    let mut margin = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut leaf_of = vec![0u32; n];
    let mut importance = vec![0.0; p];
    let mut importance_at_round: Vec<Vec<f64>> = Vec::new();
    let mut trees = Vec::new();
    let rows: Vec<u32> = (0..n as u32).filter(|&i| data.weight(i as usize) > 0.0).collect();

    let mut valid_margin: Vec<f64> = valid.as_ref().map_or(Vec::new(), |v| vec![base_score; v.x.n_rows()]);
    let mut history = Vec::new();
    let (mut best_loss, mut best_rounds) = (f64::INFINITY, 0usize);

    for round in 0..params.n_rounds {
        for i in 0..n {
            let w = data.weight(i);
            let pr = sigmoid(margin[i]);
            grad[i] = w * (pr - data.y[i]);
            hess[i] = w * pr * (1.0 - pr);
        }
        let mut grower = Grower {
            binned: &binned,
            mapper,
            grad: &grad,
            hess: &hess,
            monotone,
            params: GrowParams {
                max_depth: params.max_depth,
                min_child_weight: params.min_child_weight,
                lambda: params.lambda,
            },
            importance: &mut importance,
        };
        let tree = grower.grow(rows.clone(), &mut leaf_of);
        for &r in &rows {
            margin[r as usize] += params.learning_rate * tree.value[leaf_of[r as usize] as usize];
        }
        let stump_only = tree.n_nodes() == 1;

        if let Some(v) = &valid {
            for (i, m) in valid_margin.iter_mut().enumerate() {
                *m += params.learning_rate * tree.predict(v.x.row(i));
            }
            let probs: Vec<f64> = valid_margin.iter().map(|&m| sigmoid(m)).collect();
            let loss = v.log_loss(&probs);
            history.push(loss);
            trees.push(tree);
            importance_at_round.push(importance.clone());
            if loss < best_loss {
                best_loss = loss;
                best_rounds = round + 1;
            }
            if let Some(patience) = params.early_stopping {
                if round + 1 - best_rounds >= patience {
                    break;
                }
            }
        } else {
            trees.push(tree);
            best_rounds = round + 1;
        }
        // A tree without splits changes nothing further: every later round
        // would produce the same constant leaf.
        if stump_only && trees.len() > 1 {
            break;
        }
    }

    if valid.is_some() {
        trees.truncate(best_rounds);
        importance = importance_at_round
            .get(best_rounds.saturating_sub(1))
            .cloned()
            .unwrap_or(importance);
    }
    log::debug!(
        "gbt: depth {} lr {} mcw {}: {} rounds{}",
        params.max_depth,
        params.learning_rate,
        params.min_child_weight,
        trees.len(),
        if valid.is_some() { format!(", valid loss {best_loss:.5}") } else { String::new() }
    );
    Ok(TrainOutcome {
        rounds: trees.len(),
        model: GbtModel {
            format_version: GBT_FORMAT_VERSION,
            feature_names: feature_names.to_vec(),
            monotone: monotone.to_vec(),
            base_score,
            learning_rate: params.learning_rate,
            params: params.clone(),
            trees,
            gain_importance: importance,
        },
        history,
        valid_loss: valid.map(|_| best_loss),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GridPoint {
    pub params: GbtParams,
    pub rounds: usize,
    pub tune_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TuneOutcome {
    pub model: GbtModel,
    /// The selected point with `n_rounds` fixed at the early-stopped count
    /// and early stopping disabled, ready for refits.
    pub selected: GbtParams,
    pub grid: Vec<GridPoint>,
}

/// Fits every grid point on `train`, early-stopping on `tune`, and keeps the
/// point with the lowest tuning log-loss (earliest grid point on ties).
pub fn fit_gbt(
    train_data: TrainData<'_>,
    tune_data: TrainData<'_>,
    grid: &HyperGrid,
    base: &GbtParams,
    feature_names: &[String],
    monotone: &[i8],
    mapper: Option<&BinMapper>,
) -> Result<TuneOutcome> {
    let points = grid.points(base);
    if points.is_empty() {
        return Err(Error::InvalidInput("empty hyperparameter grid".into()));
    }
    let owned;
    let mapper = match mapper {
        Some(m) => m,
        None => {
            owned = BinMapper::fit(train_data.x, base.max_bins)?;
            &owned
        }
    };
    let outcomes: Vec<Result<TrainOutcome>> = points
        .par_iter()
        .map(|p| {
            let mut p = p.clone();
            if p.early_stopping.is_none() {
                p.early_stopping = Some(50);
            }
            train(train_data, Some(tune_data), feature_names, monotone, &p, Some(mapper))
        })
        .collect();
    let mut results = Vec::with_capacity(points.len());
    for o in outcomes {
        results.push(o?);
    }
    let best = results
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let la = a.1.valid_loss.unwrap_or(f64::INFINITY);
            let lb = b.1.valid_loss.unwrap_or(f64::INFINITY);
            la.total_cmp(&lb).then(a.0.cmp(&b.0))
        })
        .map(|(i, _)| i)
        .unwrap();
    let best_loss = results[best].valid_loss.unwrap_or(f64::INFINITY);
    if best_loss >= std::f64::consts::LN_2 {
        log::warn!("no grid point beats a fair coin on the tuning split (best log-loss {best_loss:.4})");
    }
    let grid_points = results
        .iter()
        .zip(&points)
        .map(|(r, p)| GridPoint {
            params: p.clone(),
            rounds: r.rounds,
            tune_loss: r.valid_loss.unwrap_or(f64::NAN),
        })
        .collect();
    let winner = results.swap_remove(best);
    let selected = GbtParams {
        n_rounds: winner.rounds.max(1),
        early_stopping: None,
        ..points[best].clone()
    };
    Ok(TuneOutcome { model: winner.model, selected, grid: grid_points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn all_positive_labels_predict_near_one() {
        let rows: Vec<[f64; 1]> = (0..50).map(|i| [f64::from(i)]).collect();
        let x = FeatureMatrix::from_rows(1, &rows).unwrap();
        let y = vec![1.0; 50];
        let params = GbtParams { n_rounds: 20, min_child_weight: 1.0, ..Default::default() };
        let out = train(TrainData::new(&x, &y), None, &names(1), &[0], &params, None).unwrap();
        assert!((0..50).all(|i| out.model.predict(x.row(i)) >= 0.99));
    }

    #[test]
    fn one_split_matches_closed_form() {
        // Binary feature; one depth-1 tree with unit learning rate.
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..400 {
            let f = f64::from(i % 2);
            rows.push([f]);
            y.push(if (i % 2 == 1 && i % 10 != 1) || (i % 2 == 0 && i % 10 == 0) { 1.0 } else { 0.0 });
        }
        let x = FeatureMatrix::from_rows(1, &rows).unwrap();
        let params = GbtParams {
            max_depth: 1,
            learning_rate: 1.0,
            min_child_weight: 0.0,
            lambda: 1.0,
            n_rounds: 1,
            early_stopping: None,
            max_bins: 256,
        };
        let out = train(TrainData::new(&x, &y), None, &names(1), &[0], &params, None).unwrap();
        let mean = y.iter().sum::<f64>() / 400.0;
        let p0 = mean;
        let leaf = |side: f64| {
            let (mut g, mut h) = (0.0, 0.0);
            for (r, &yy) in rows.iter().zip(&y) {
                if r[0] == side {
                    g += p0 - yy;
                    h += p0 * (1.0 - p0);
                }
            }
            -g / (h + 1.0)
        };
        let base = (mean / (1.0 - mean)).ln();
        assert!((out.model.predict_margin(&[0.0]) - (base + leaf(0.0))).abs() < 1e-12);
        assert!((out.model.predict_margin(&[1.0]) - (base + leaf(1.0))).abs() < 1e-12);
    }

    #[test]
    fn constrained_fit_passes_audit_and_round_trips() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut x = FeatureMatrix::new(2);
        let mut y = Vec::new();
        for _ in 0..3000 {
            let a: f64 = rng.gen_range(-3.0..3.0);
            let b: f64 = rng.gen_range(-3.0..3.0);
            x.push(&[a, b]).unwrap();
            // non-monotone truth in `a`, which the constraint must override
            let p = sigmoid((2.0 * a).sin() + 0.5 * b);
            y.push(if rng.gen::<f64>() < p { 1.0 } else { 0.0 });
        }
        let params = GbtParams { n_rounds: 60, min_child_weight: 5.0, ..Default::default() };
        let out = train(TrainData::new(&x, &y), None, &names(2), &[1, -1], &params, None).unwrap();
        out.model.audit().unwrap();
        let back = GbtModel::from_json(&out.model.to_json().unwrap()).unwrap();
        assert_eq!(back, out.model);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let x = FeatureMatrix::from_rows(1, &[[0.0], [1.0]]).unwrap();
        let y = [0.0, 1.0];
        let grid = HyperGrid { max_depth: vec![], learning_rate: vec![0.1], min_child_weight: vec![1.0] };
        let d = TrainData::new(&x, &y);
        assert!(fit_gbt(d, d, &grid, &GbtParams::default(), &names(1), &[0], None).is_err());
    }
}
