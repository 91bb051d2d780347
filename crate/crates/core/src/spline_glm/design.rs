use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::{InputTransform, SplineSpec};
use crate::error::{Error, Result};

/// Restricts a term to rows where `inputs[input] == value` (or `!=` when
/// `equal` is false). Outside the gate the term's columns are zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub input: usize,
    pub value: f64,
    pub equal: bool,
}

impl Gate {
    pub fn is(input: usize, value: f64) -> Self {
        Gate { input, value, equal: true }
    }

    pub fn is_not(input: usize, value: f64) -> Self {
        Gate { input, value, equal: false }
    }

    #[inline]
    fn open(&self, inputs: &[f64]) -> bool {
        (inputs[self.input] == self.value) == self.equal
    }
}

/// An unresolved design term. Spline terms become [`Term::Spline`] once their
/// knots are placed from data.
#[derive(Clone, Debug, PartialEq)]
pub enum TermSpec {
    Intercept,
    Linear {
        name: String,
        input: usize,
        transform: InputTransform,
        gate: Option<Gate>,
    },
    Spline {
        name: String,
        input: usize,
        transform: InputTransform,
        df: usize,
        gate: Option<Gate>,
    },
    Product {
        name: String,
        inputs: (usize, usize),
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    Intercept,
    Linear {
        name: String,
        input: usize,
        transform: InputTransform,
        gate: Option<Gate>,
    },
    Spline {
        name: String,
        input: usize,
        gate: Option<Gate>,
        spec: SplineSpec,
    },
    Product {
        name: String,
        inputs: (usize, usize),
    },
}

impl Term {
    pub fn width(&self) -> usize {
        match self {
            Term::Spline { spec, .. } => spec.df,
            _ => 1,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Intercept => "(intercept)",
            Term::Linear { name, .. } | Term::Spline { name, .. } | Term::Product { name, .. } => name,
        }
    }
}

/// An ordered list of resolved terms mapping an input row to design columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub n_inputs: usize,
    pub terms: Vec<Term>,
}

impl Design {
    /// Resolves term specs against data. Spline knots are placed over every
    /// row, regardless of the term's gate.
    pub fn resolve(n_inputs: usize, specs: &[TermSpec], rows: &[Vec<f64>]) -> Result<Design> {
        let mut terms = Vec::with_capacity(specs.len());
        for spec in specs {
            let term = match spec {
                TermSpec::Intercept => Term::Intercept,
                TermSpec::Linear { name, input, transform, gate } => Term::Linear {
                    name: name.clone(),
                    input: *input,
                    transform: *transform,
                    gate: *gate,
                },
                TermSpec::Product { name, inputs } => Term::Product {
                    name: name.clone(),
                    inputs: *inputs,
                },
                TermSpec::Spline { name, input, transform, df, gate } => {
                    let xs: Vec<f64> = rows.iter().map(|r| r[*input]).collect();
                    let spec = SplineSpec::from_data(*transform, *df, &xs)
                        .map_err(|e| Error::Degenerate(format!("term {name}: {e}")))?;
                    Term::Spline {
                        name: name.clone(),
                        input: *input,
                        gate: *gate,
                        spec,
                    }
                }
            };
            terms.push(term);
        }
        let design = Design { n_inputs, terms };
        design.check_inputs()?;
        Ok(design)
    }

    fn check_inputs(&self) -> Result<()> {
        let bad = |i: usize| i >= self.n_inputs;
        for t in &self.terms {
            let oob = match t {
                Term::Intercept => false,
                Term::Linear { input, gate, .. } | Term::Spline { input, gate, .. } => {
                    bad(*input) || gate.is_some_and(|g| bad(g.input))
                }
                Term::Product { inputs, .. } => bad(inputs.0) || bad(inputs.1),
            };
            if oob {
                return Err(Error::InvalidInput(format!(
                    "term {} references an input beyond {}",
                    t.name(),
                    self.n_inputs
                )));
            }
        }
        Ok(())
    }

    pub fn n_columns(&self) -> usize {
        self.terms.iter().map(Term::width).sum()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_columns());
        for t in &self.terms {
            match t {
                Term::Spline { name, spec, .. } => {
                    names.extend((1..=spec.df).map(|k| format!("{name}[{k}]")));
                }
                other => names.push(other.name().to_string()),
            }
        }
        names
    }

    /// Writes the design row for `inputs` into `out`.
    pub fn row_into(&self, inputs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(inputs.len(), self.n_inputs);
        debug_assert_eq!(out.len(), self.n_columns());
        let mut at = 0;
        for t in &self.terms {
            let w = t.width();
            let slot = &mut out[at..at + w];
            match t {
                Term::Intercept => slot[0] = 1.0,
                Term::Linear { input, transform, gate, .. } => {
                    slot[0] = if gate.is_none_or(|g| g.open(inputs)) {
                        transform.apply(inputs[*input])
                    } else {
                        0.0
                    };
                }
                Term::Spline { input, gate, spec, .. } => {
                    if gate.is_none_or(|g| g.open(inputs)) {
                        spec.eval_into(inputs[*input], slot);
                    } else {
                        slot.iter_mut().for_each(|v| *v = 0.0);
                    }
                }
                Term::Product { inputs: (a, b), .. } => slot[0] = inputs[*a] * inputs[*b],
            }
            at += w;
        }
    }

    pub fn row(&self, inputs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_columns()];
        self.row_into(inputs, &mut out);
        out
    }

    pub fn matrix(&self, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let p = self.n_columns();
        let mut m = DMatrix::zeros(rows.len(), p);
        let mut buf = vec![0.0; p];
        for (i, r) in rows.iter().enumerate() {
            if r.len() != self.n_inputs {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} inputs, design expects {}",
                    r.len(),
                    self.n_inputs
                )));
            }
            self.row_into(r, &mut buf);
            if let Some(j) = buf.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "row {i}: non-finite value in column {}",
                    self.column_names()[j]
                )));
            }
            for (j, v) in buf.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }
}
