use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::quantile_sorted;

/// Transformation applied to a raw input before the spline sees it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputTransform {
    Identity,
    /// `ln(x + 1)`
    Log1p,
    /// `ln(x)`
    Log,
}

impl InputTransform {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            InputTransform::Identity => x,
            InputTransform::Log1p => x.ln_1p(),
            InputTransform::Log => x.ln(),
        }
    }
}

/// A cubic regression spline basis.
///
/// Uses the no-intercept convention of regression software: the full
/// B-spline basis over the knot sequence has `df + 1` functions that sum to
/// one everywhere, and the first of them is dropped so that the block can sit
/// next to an intercept without collinearity. Hence `df` columns and
/// `df - degree` interior knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineSpec {
    pub input_transform: InputTransform,
    pub degree: usize,
    pub df: usize,
    pub interior_knots: Vec<f64>,
    pub boundary_knots: (f64, f64),
}

pub const CUBIC: usize = 3;

impl SplineSpec {
    /// Places knots from data: boundary knots at the range of the transformed
    /// input, interior knots at equally spaced quantiles.
    pub fn from_data(input_transform: InputTransform, df: usize, raw: &[f64]) -> Result<Self> {
        let degree = CUBIC;
        if df < degree {
            return Err(Error::InvalidInput(format!(
                "spline df {df} is below the degree {degree}"
            )));
        }
        let mut xs: Vec<f64> = raw.iter().map(|&x| input_transform.apply(x)).collect();
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite spline input after transform".into()));
        }
        if xs.is_empty() {
            return Err(Error::Degenerate("no data for spline knots".into()));
        }
        xs.sort_by(f64::total_cmp);
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        if hi - lo <= 0.0 {
            return Err(Error::Degenerate(format!("spline input is constant ({lo})")));
        }
        let n_int = df - degree;
        let probs: Vec<f64> = (1..=n_int).map(|k| k as f64 / (n_int + 1) as f64).collect();
        let interior = place_knots(&xs, &probs, lo, hi);
        Self::new(input_transform, df, interior, (lo, hi))
    }

    pub fn new(
        input_transform: InputTransform,
        df: usize,
        interior_knots: Vec<f64>,
        boundary_knots: (f64, f64),
    ) -> Result<Self> {
        let degree = CUBIC;
        if df < degree || interior_knots.len() != df - degree {
            return Err(Error::InvalidInput(format!(
                "df {df} needs {} interior knots, got {}",
                df.saturating_sub(degree),
                interior_knots.len()
            )));
        }
        let (lo, hi) = boundary_knots;
        if !(lo < hi) {
            return Err(Error::InvalidInput("boundary knots must be increasing".into()));
        }
        let mut prev = lo;
        for &k in &interior_knots {
            if !(k > prev && k < hi) {
                return Err(Error::InvalidInput(
                    "interior knots must be strictly inside the boundary and increasing".into(),
                ));
            }
            prev = k;
        }
        Ok(SplineSpec {
            input_transform,
            degree,
            df,
            interior_knots,
            boundary_knots,
        })
    }

    pub fn n_full(&self) -> usize {
        self.df + 1
    }

    fn knot_vector(&self) -> Vec<f64> {
        let p = self.degree;
        let (lo, hi) = self.boundary_knots;
        let mut t = Vec::with_capacity(2 * (p + 1) + self.interior_knots.len());
        t.extend(std::iter::repeat_n(lo, p + 1));
        t.extend_from_slice(&self.interior_knots);
        t.extend(std::iter::repeat_n(hi, p + 1));
        t
    }

    /// The transformed input, clamped to the boundary knots.
    pub fn clamp_input(&self, raw: f64) -> f64 {
        let (lo, hi) = self.boundary_knots;
        self.input_transform.apply(raw).clamp(lo, hi)
    }

    /// All `df + 1` basis functions at `raw`. Non-negative, summing to one.
    pub fn full_basis(&self, raw: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_full()];
        self.full_basis_into(raw, &mut out);
        out
    }

    fn full_basis_into(&self, raw: f64, out: &mut [f64]) {
        let x = self.clamp_input(raw);
        let p = self.degree;
        let t = self.knot_vector();
        let n = self.n_full();
        // The end functions interpolate the boundary exactly.
        let (lo, hi) = self.boundary_knots;
        if x <= lo || x >= hi {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[if x <= lo { 0 } else { n - 1 }] = 1.0;
            return;
        }
        // Knot span containing x; the right boundary belongs to the last span.
        let span = if x >= t[n] {
            n - 1
        } else {
            let mut s = p;
            while s < n - 1 && x >= t[s + 1] {
                s += 1;
            }
            s
        };
        // Cox-de Boor triangle for the p + 1 non-zero functions.
        let mut values = [0.0f64; 8];
        let mut left = [0.0f64; 8];
        let mut right = [0.0f64; 8];
        values[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { values[r] / denom };
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, v) in values.iter().enumerate().take(p + 1) {
            out[span - p + j] = *v;
        }
    }

    /// The `df` design columns at `raw` (the full basis minus its first
    /// function).
    pub fn eval_into(&self, raw: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.df);
        let mut full = [0.0f64; 64];
        let n = self.n_full();
        assert!(n <= full.len(), "spline df too large");
        self.full_basis_into(raw, &mut full[..n]);
        out.copy_from_slice(&full[1..n]);
    }

    pub fn eval(&self, raw: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.df];
        self.eval_into(raw, &mut out);
        out
    }

    /// Design block for a vector of inputs, one row per input.
    pub fn build_basis(&self, xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Quantile knots, falling back to quantiles of the distinct values and then
/// to equal spacing when heavy ties push knots onto each other or onto the
/// boundary.
fn place_knots(sorted: &[f64], probs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let valid = |ks: &[f64]| {
        let mut prev = lo;
        ks.iter().all(|&k| {
            let ok = k > prev && k < hi;
            prev = k;
            ok
        })
    };
    let direct: Vec<f64> = probs.iter().map(|&p| quantile_sorted(sorted, p)).collect();
    if valid(&direct) {
        return direct;
    }
    let mut distinct = sorted.to_vec();
    distinct.dedup();
    let by_value: Vec<f64> = probs.iter().map(|&p| quantile_sorted(&distinct, p)).collect();
    if valid(&by_value) {
        return by_value;
    }
    probs.iter().map(|&p| lo + p * (hi - lo)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Recursive Cox-de Boor definition, independent of the triangular
    /// evaluation above.
    fn reference_basis(t: &[f64], i: usize, p: usize, x: f64, last_span: usize) -> f64 {
        if p == 0 {
            let in_span = t[i] <= x && x < t[i + 1];
            let at_end = i == last_span && x == t[i + 1];
            return if in_span || at_end { 1.0 } else { 0.0 };
        }
        let a = if t[i + p] > t[i] {
            (x - t[i]) / (t[i + p] - t[i]) * reference_basis(t, i, p - 1, x, last_span)
        } else {
            0.0
        };
        let b = if t[i + p + 1] > t[i + 1] {
            (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * reference_basis(t, i + 1, p - 1, x, last_span)
        } else {
            0.0
        };
        a + b
    }

    fn spec(df: usize) -> SplineSpec {
        let xs: Vec<f64> = (1..=99).map(f64::from).collect();
        SplineSpec::from_data(InputTransform::Identity, df, &xs).unwrap()
    }

    #[test]
    fn knot_counts_follow_df() {
        assert_eq!(spec(3).interior_knots.len(), 0);
        assert_eq!(spec(4).interior_knots.len(), 1);
        assert_eq!(spec(5).interior_knots.len(), 2);
        assert_eq!(spec(4).interior_knots, vec![50.0]);
        assert_eq!(spec(5).build_basis(&[10.0, 20.0])[0].len(), 5);
    }

    #[test]
    fn df_below_degree_is_an_error() {
        let xs = [1.0, 2.0, 3.0];
        assert!(SplineSpec::from_data(InputTransform::Identity, 2, &xs).is_err());
    }

    #[test]
    fn constant_input_is_degenerate() {
        assert!(SplineSpec::from_data(InputTransform::Identity, 4, &[5.0; 10]).is_err());
    }

    #[test]
    fn boundary_knots_activate_one_end_function() {
        for df in [3, 4, 5] {
            let s = spec(df);
            let left = s.full_basis(1.0);
            assert_eq!(left[0], 1.0);
            assert!(left[1..].iter().all(|&v| v == 0.0));
            let right = s.full_basis(99.0);
            assert_eq!(right[right.len() - 1], 1.0);
            assert!(right[..right.len() - 1].iter().all(|&v| v == 0.0));
            // the dropped first function leaves the design row all zero on the left
            assert!(s.eval(1.0).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn matches_recursive_reference_on_a_grid() {
        for df in [3, 4, 5, 6] {
            let s = spec(df);
            let t = s.knot_vector();
            let n = s.n_full();
            for k in 0..=400 {
                let x = 1.0 + 98.0 * k as f64 / 400.0;
                let got = s.full_basis(x);
                for (i, g) in got.iter().enumerate() {
                    let want = reference_basis(&t, i, 3, x, n - 1);
                    assert!((g - want).abs() < 1e-12, "df={df} x={x} i={i}: {g} vs {want}");
                }
            }
        }
    }

    #[test]
    fn out_of_range_inputs_are_clamped() {
        let s = spec(4);
        assert_eq!(s.eval(-20.0), s.eval(1.0));
        assert_eq!(s.eval(140.0), s.eval(99.0));
    }

    #[test]
    fn tied_data_still_yields_valid_knots() {
        let mut xs = vec![1.0; 80];
        xs.extend([2.0, 3.0, 5.0, 10.0, 15.0]);
        let s = SplineSpec::from_data(InputTransform::Log1p, 5, &xs).unwrap();
        assert_eq!(s.interior_knots.len(), 2);
    }

    #[test]
    fn partition_of_unity_on_random_points() {
        let s = SplineSpec::new(InputTransform::Identity, 6, vec![-0.5, 0.1, 2.0], (-3.0, 4.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = rng.gen_range(-3.0..=4.0);
            let b = s.full_basis(x);
            assert!(b.iter().all(|&v| v >= 0.0));
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn design_row_sum_is_one_minus_dropped_function(x in 0.0f64..120.0) {
            let s = spec(5);
            let full = s.full_basis(x);
            let row: f64 = s.eval(x).iter().sum();
            prop_assert!((row - (1.0 - full[0])).abs() < 1e-12);
        }
    }
}
