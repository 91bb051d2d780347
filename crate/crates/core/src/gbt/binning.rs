use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense row-major feature matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureMatrix {
    n_features: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_features: usize) -> Self {
        FeatureMatrix { n_features, data: Vec::new() }
    }

    pub fn from_rows<R: AsRef<[f64]>>(n_features: usize, rows: &[R]) -> Result<Self> {
        let mut m = FeatureMatrix::new(n_features);
        for r in rows {
            m.push(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "feature row of width {} in a matrix of width {}",
                row.len(),
                self.n_features
            )));
        }
        if row.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("NaN feature value".into()));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.data.len().checked_div(self.n_features).unwrap_or(0)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn get(&self, i: usize, f: usize) -> f64 {
        self.data[i * self.n_features + f]
    }
}

/// Per-feature cut points. A value lands in bin `b` when it is at most
/// `cuts[b]` and above `cuts[b - 1]`; values above the last cut land in the
/// final bin. A split after bin `b` therefore sends `x <= cuts[b]` left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub cuts: Vec<Vec<f64>>,
}

pub const MAX_BINS: usize = 256;

impl BinMapper {
    /// Cut points at distinct values, thinned to quantiles when a feature has
    /// more distinct values than bins.
    pub fn fit(x: &FeatureMatrix, max_bins: usize) -> Result<BinMapper> {
        if !(2..=MAX_BINS).contains(&max_bins) {
            return Err(Error::InvalidInput(format!("max_bins must be in [2, {MAX_BINS}]")));
        }
        let n = x.n_rows();
        let mut cuts = Vec::with_capacity(x.n_features());
        let mut column = Vec::with_capacity(n);
        for f in 0..x.n_features() {
            column.clear();
            column.extend((0..n).map(|i| x.get(i, f)));
            column.sort_by(f64::total_cmp);
            let mut distinct = column.clone();
            distinct.dedup();
            let feature_cuts: Vec<f64> = if distinct.len() <= max_bins {
                // every distinct value but the largest is a candidate threshold
                distinct[..distinct.len().saturating_sub(1)].to_vec()
            } else {
                let mut c: Vec<f64> = (1..max_bins)
                    .map(|k| column[(k * (n - 1)) / max_bins])
                    .collect();
                c.dedup();
                if c.last() == distinct.last() {
                    c.pop();
                }
                c
            };
            cuts.push(feature_cuts);
        }
        Ok(BinMapper { cuts })
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }

    #[inline]
    pub fn bin(&self, feature: usize, value: f64) -> u8 {
        let c = &self.cuts[feature];
        c.partition_point(|&cut| cut < value) as u8
    }

    /// Column-major bin indices.
    pub fn transform(&self, x: &FeatureMatrix) -> Result<BinnedMatrix> {
        if x.n_features() != self.cuts.len() {
            return Err(Error::InvalidInput(format!(
                "matrix has {} features, bin mapper {}",
                x.n_features(),
                self.cuts.len()
            )));
        }
        let n = x.n_rows();
        let mut bins = vec![0u8; n * self.cuts.len()];
        for f in 0..self.cuts.len() {
            for i in 0..n {
                bins[f * n + i] = self.bin(f, x.get(i, f));
            }
        }
        Ok(BinnedMatrix {
            n_rows: n,
            n_features: self.cuts.len(),
            bins,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BinnedMatrix {
    pub n_rows: usize,
    pub n_features: usize,
    bins: Vec<u8>,
}

impl BinnedMatrix {
    #[inline]
    pub fn column(&self, f: usize) -> &[u8] {
        &self.bins[f * self.n_rows..(f + 1) * self.n_rows]
    }
}
