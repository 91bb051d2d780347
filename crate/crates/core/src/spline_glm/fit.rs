//! Matrix-level least squares and logistic fitting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::sigmoid;

/// What to do when design columns are linearly dependent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolicy {
    /// Drop the dependent columns (their coefficients are fixed at 0) and
    /// log a warning naming them.
    #[default]
    DropAndWarn,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlsOptions {
    pub max_iterations: usize,
    pub score_tolerance: f64,
    pub deviance_tolerance: f64,
    /// Keep iterating when some fitted probabilities become numerically 0
    /// or 1 instead of failing. The estimate then approaches its limit
    /// along the separating direction, and the fit may end unconverged.
    #[serde(default)]
    pub allow_separation: bool,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            max_iterations: 100,
            score_tolerance: 1e-8,
            deviance_tolerance: 1e-10,
            allow_separation: false,
        }
    }
}

/// Linear predictor magnitude beyond which a fitted probability is treated
/// as numerically 0 or 1.
const SEPARATION_ETA: f64 = 30.0;
const RANK_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    /// One coefficient per design column; dropped columns hold 0.
    pub coefficients: Vec<f64>,
    pub dropped: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub deviance: f64,
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::InvalidInput(format!("{} responses for {n} rows", y.len())));
    }
    let w = match weights {
        Some(w) if w.len() != n => {
            return Err(Error::InvalidInput(format!("{} weights for {n} rows", w.len())))
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite response".into()));
    }
    let effective = w.iter().filter(|&&v| v > 0.0).count();
    if effective < x.ncols() {
        return Err(Error::Degenerate(format!(
            "{effective} weighted rows cannot determine {} columns",
            x.ncols()
        )));
    }
    Ok(w)
}

/// Columns of `sqrt(w) X` that are (numerically) linear combinations of
/// earlier columns, found by modified Gram-Schmidt with re-orthogonalization.
pub fn dependent_columns(x: &DMatrix<f64>, w: &[f64]) -> Vec<usize> {
    let n = x.nrows();
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..x.ncols() {
        let mut v = DVector::from_fn(n, |i, _| sw[i] * x[(i, j)]);
        let norm0 = v.norm();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= RANK_TOLERANCE * norm0 {
            dropped.push(j);
        } else {
            basis.push(v / norm);
        }
    }
    dropped
}

fn handle_rank(dropped: &[usize], names: &[String], policy: RankPolicy) -> Result<()> {
    if dropped.is_empty() {
        return Ok(());
    }
    let cols: Vec<String> = dropped
        .iter()
        .map(|&j| names.get(j).cloned().unwrap_or_else(|| format!("column {j}")))
        .collect();
    match policy {
        RankPolicy::Error => Err(Error::RankDeficient { columns: cols }),
        RankPolicy::DropAndWarn => {
            log::debug!("dropping collinear design columns: {}", cols.join(", "));
            Ok(())
        }
    }
}

fn kept_submatrix(x: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), keep.len(), |i, k| x[(i, keep[k])])
}

fn expand(beta: &DVector<f64>, keep: &[usize], p: usize) -> Vec<f64> {
    let mut full = vec![0.0; p];
    for (k, &j) in keep.iter().enumerate() {
        full[j] = beta[k];
    }
    full
}

/// Weighted least squares on full-rank `x` via thin QR.
fn wls(x: &DMatrix<f64>, z: &[f64], w: &[f64]) -> Result<DVector<f64>> {
    let n = x.nrows();
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let xw = DMatrix::from_fn(n, x.ncols(), |i, j| sw[i] * x[(i, j)]);
    let zw = DVector::from_fn(n, |i, _| sw[i] * z[i]);
    let qr = xw.qr();
    let qtz = qr.q().transpose() * zw;
    qr.r()
        .solve_upper_triangular(&qtz)
        .ok_or_else(|| Error::Degenerate("singular least squares system".into()))
}

pub fn ols(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    names: &[String],
    policy: RankPolicy,
) -> Result<FitResult> {
    let w = check_inputs(x, y, weights)?;
    let dropped = dependent_columns(x, &w);
    handle_rank(&dropped, names, policy)?;
    let keep: Vec<usize> = (0..x.ncols()).filter(|j| !dropped.contains(j)).collect();
    let xk = kept_submatrix(x, &keep);
    let beta = wls(&xk, y, &w)?;
    let fitted = &xk * &beta;
    let rss: f64 = (0..x.nrows()).map(|i| w[i] * (y[i] - fitted[i]).powi(2)).sum();
    Ok(FitResult {
        coefficients: expand(&beta, &keep, x.ncols()),
        dropped,
        iterations: 1,
        converged: true,
        deviance: rss,
    })
}

fn binomial_deviance(y: &[f64], mu: &[f64], w: &[f64]) -> f64 {
    let mut d = 0.0;
    for i in 0..y.len() {
        if w[i] == 0.0 {
            continue;
        }
        let (yi, mi) = (y[i], mu[i]);
        let a = if yi > 0.0 { yi * (yi / mi).ln() } else { 0.0 };
        let b = if yi < 1.0 { (1.0 - yi) * ((1.0 - yi) / (1.0 - mi)).ln() } else { 0.0 };
        d += 2.0 * w[i] * (a + b);
    }
    d
}

/// Logistic regression by iteratively reweighted least squares with step
/// halving.
pub fn irls(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    names: &[String],
    policy: RankPolicy,
    opts: IrlsOptions,
) -> Result<FitResult> {
    let w = check_inputs(x, y, weights)?;
    if y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidInput("logistic responses must lie in [0, 1]".into()));
    }
    let (pos, neg) = y.iter().zip(&w).fold((0.0, 0.0), |(p, q), (&yi, &wi)| {
        (p + wi * yi, q + wi * (1.0 - yi))
    });
    if pos <= 0.0 || neg <= 0.0 {
        let direction = if pos <= 0.0 { "all outcomes 0" } else { "all outcomes 1" };
        return Err(Error::Separation { direction: format!("(intercept): {direction}") });
    }
    let dropped = dependent_columns(x, &w);
    handle_rank(&dropped, names, policy)?;
    let keep: Vec<usize> = (0..x.ncols()).filter(|j| !dropped.contains(j)).collect();
    let xk = kept_submatrix(x, &keep);
    let n = xk.nrows();
    let kept_names: Vec<String> = keep
        .iter()
        .map(|&j| names.get(j).cloned().unwrap_or_else(|| format!("column {j}")))
        .collect();

    // Start from slightly shrunken responses, as standard GLM software does.
    let mu0: Vec<f64> = (0..n).map(|i| (w[i] * y[i] + 0.5) / (w[i] + 1.0)).collect();
    let mut eta: Vec<f64> = mu0.iter().map(|&m| (m / (1.0 - m)).ln()).collect();
    let mut mu = mu0;
    let mut beta: Option<DVector<f64>> = None;
    let mut deviance = binomial_deviance(y, &mu, &w);
    let mut max_score = f64::INFINITY;
    let mut separated = false;
    let unconverged = |beta: &DVector<f64>, iterations: usize, deviance: f64| FitResult {
        coefficients: expand(beta, &keep, x.ncols()),
        dropped: dropped.clone(),
        iterations,
        converged: false,
        deviance,
    };

    for iter in 1..=opts.max_iterations {
        let wk: Vec<f64> = (0..n).map(|i| w[i] * mu[i] * (1.0 - mu[i])).collect();
        let z: Vec<f64> = (0..n)
            .map(|i| {
                let v = mu[i] * (1.0 - mu[i]);
                if v > 0.0 {
                    eta[i] + (y[i] - mu[i]) / v
                } else {
                    eta[i]
                }
            })
            .collect();
        let candidate = match (wls(&xk, &z, &wk), &beta) {
            (Ok(c), _) => c,
            (Err(_), Some(b)) if separated => return Ok(unconverged(b, iter - 1, deviance)),
            (Err(e), _) => return Err(e),
        };

        // Halve the step while the deviance rises.
        let mut step = candidate.clone();
        let mut new_eta;
        let mut new_mu;
        let mut new_dev;
        let mut halvings = 0;
        loop {
            new_eta = (&xk * &step).as_slice().to_vec();
            new_mu = new_eta.iter().map(|&e| sigmoid(e)).collect::<Vec<_>>();
            new_dev = binomial_deviance(y, &new_mu, &w);
            let worse = !new_dev.is_finite() || (beta.is_some() && new_dev > deviance * (1.0 + 1e-12) + 1e-12);
            if !worse || halvings >= 30 {
                break;
            }
            let prev = beta.as_ref().unwrap();
            step = (prev + &step) * 0.5;
            halvings += 1;
        }

        let worst = new_eta
            .iter()
            .zip(&w)
            .filter(|(_, &wi)| wi > 0.0)
            .map(|(e, _)| e.abs())
            .fold(0.0, f64::max);
        if worst > SEPARATION_ETA && opts.allow_separation {
            if !separated {
                log::debug!("fitted probabilities numerically 0 or 1 occurred; continuing toward the limit");
            }
            separated = true;
        } else if worst > SEPARATION_ETA {
            let (k, _) = step
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .unwrap();
            return Err(Error::Separation {
                direction: format!("{} = {:.3e}", kept_names[k], step[k]),
            });
        }

        let resid: Vec<f64> = (0..n).map(|i| w[i] * (y[i] - new_mu[i])).collect();
        let score = xk.transpose() * DVector::from_vec(resid);
        max_score = score.amax();
        let rel_change = (deviance - new_dev).abs() / (new_dev.abs() + 0.1);
        let first = beta.is_none();
        beta = Some(step);
        eta = new_eta;
        mu = new_mu;
        deviance = new_dev;
        if max_score < opts.score_tolerance || (!first && rel_change < opts.deviance_tolerance) {
            return Ok(FitResult {
                coefficients: expand(beta.as_ref().unwrap(), &keep, x.ncols()),
                dropped,
                iterations: iter,
                converged: true,
                deviance,
            });
        }
    }
    if let (true, Some(b)) = (separated, &beta) {
        log::warn!("logistic fit under separation stopped after {} iterations", opts.max_iterations);
        return Ok(unconverged(b, opts.max_iterations, deviance));
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        max_score,
        deviance,
    })
}
