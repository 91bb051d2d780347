//! B-spline bases and generalized linear models.
//!
//! A [`GlmModel`] couples a resolved [`Design`] (an ordered list of intercept,
//! linear, gated spline and product terms over a raw input row) with fitted
//! coefficients and a link. Gaussian models are fitted by QR least squares,
//! logistic models by IRLS; both accept observation weights, which is how the
//! bootstrap enters.

mod basis;
mod design;
mod fit;

use serde::{Deserialize, Serialize};

pub use basis::{InputTransform, SplineSpec, CUBIC};
pub use design::{Design, Gate, Term, TermSpec};
pub use fit::{dependent_columns, irls, ols, FitResult, IrlsOptions, RankPolicy};

use crate::error::{Error, Result};
use crate::util::sigmoid;

pub const GLM_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Logit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    pub format_version: u32,
    pub link: Link,
    pub design: Design,
    pub coefficients: Vec<f64>,
    /// Names of columns dropped for collinearity (coefficient fixed at 0).
    pub dropped: Vec<String>,
    pub iterations: usize,
    pub converged: bool,
}

impl GlmModel {
    pub fn fit_ols(
        design: Design,
        rows: &[Vec<f64>],
        y: &[f64],
        weights: Option<&[f64]>,
        policy: RankPolicy,
    ) -> Result<GlmModel> {
        let x = design.matrix(rows)?;
        let names = design.column_names();
        let fit = ols(&x, y, weights, &names, policy)?;
        Ok(Self::from_fit(design, Link::Identity, fit, &names))
    }

    pub fn fit_logistic(
        design: Design,
        rows: &[Vec<f64>],
        y: &[f64],
        weights: Option<&[f64]>,
        policy: RankPolicy,
    ) -> Result<GlmModel> {
        Self::fit_logistic_with(design, rows, y, weights, policy, IrlsOptions::default())
    }

    pub fn fit_logistic_with(
        design: Design,
        rows: &[Vec<f64>],
        y: &[f64],
        weights: Option<&[f64]>,
        policy: RankPolicy,
        opts: IrlsOptions,
    ) -> Result<GlmModel> {
        let x = design.matrix(rows)?;
        let names = design.column_names();
        let fit = irls(&x, y, weights, &names, policy, opts)?;
        Ok(Self::from_fit(design, Link::Logit, fit, &names))
    }

    fn from_fit(design: Design, link: Link, fit: FitResult, names: &[String]) -> GlmModel {
        GlmModel {
            format_version: GLM_FORMAT_VERSION,
            link,
            design,
            coefficients: fit.coefficients,
            dropped: fit.dropped.iter().map(|&j| names[j].clone()).collect(),
            iterations: fit.iterations,
            converged: fit.converged,
        }
    }

    /// Linear predictor for one raw input row.
    pub fn linear_predictor(&self, inputs: &[f64]) -> f64 {
        let mut row = [0.0f64; 64];
        let p = self.coefficients.len();
        assert!(p <= row.len(), "design too wide");
        self.design.row_into(inputs, &mut row[..p]);
        row[..p].iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }

    /// Prediction on the response scale.
    pub fn predict(&self, inputs: &[f64]) -> f64 {
        let eta = self.linear_predictor(inputs);
        match self.link {
            Link::Identity => eta,
            Link::Logit => sigmoid(eta),
        }
    }

    pub fn check_version(&self) -> Result<()> {
        if self.format_version != GLM_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: GLM_FORMAT_VERSION,
            });
        }
        if self.coefficients.len() != self.design.n_columns() {
            return Err(Error::InvalidState(format!(
                "{} coefficients for {} design columns",
                self.coefficients.len(),
                self.design.n_columns()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<GlmModel> {
        let m: GlmModel = serde_json::from_str(s)?;
        m.check_version()?;
        Ok(m)
    }
}
