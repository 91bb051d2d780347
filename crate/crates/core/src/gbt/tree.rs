use serde::{Deserialize, Serialize};

use super::binning::{BinMapper, BinnedMatrix};

/// Marks a leaf in [`Tree::feature`].
pub const LEAF: i32 = -1;

/// A binary regression tree stored as parallel arrays. Node 0 is the root.
/// Internal nodes send `x[feature] <= threshold` to `left`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    /// Leaf weights before learning-rate scaling; 0 on internal nodes.
    pub value: Vec<f64>,
}

impl Tree {
    fn empty() -> Tree {
        Tree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
        }
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|&&f| f == LEAF).count()
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            let f = self.feature[node];
            if f == LEAF {
                return self.value[node];
            }
            node = if x[f as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, n: usize) -> usize {
            if t.feature[n] == LEAF {
                0
            } else {
                1 + go(t, t.left[n] as usize).max(go(t, t.right[n] as usize))
            }
        }
        go(self, 0)
    }

    fn leaf_range(&self, node: usize) -> (f64, f64) {
        if self.feature[node] == LEAF {
            let v = self.value[node];
            return (v, v);
        }
        let (a, b) = self.leaf_range(self.left[node] as usize);
        let (c, d) = self.leaf_range(self.right[node] as usize);
        (a.min(c), b.max(d))
    }

    /// Checks that at every split on a constrained feature, every leaf on one
    /// side is ordered against every leaf on the other side as the constraint
    /// requires. Returns a description of the first violation.
    pub fn audit_monotone(&self, monotone: &[i8]) -> Result<(), String> {
        for node in 0..self.n_nodes() {
            let f = self.feature[node];
            if f == LEAF {
                continue;
            }
            let c = monotone.get(f as usize).copied().unwrap_or(0);
            if c == 0 {
                continue;
            }
            let (l_min, l_max) = self.leaf_range(self.left[node] as usize);
            let (r_min, r_max) = self.leaf_range(self.right[node] as usize);
            let ok = if c > 0 { l_max <= r_min } else { l_min >= r_max };
            if !ok {
                return Err(format!(
                    "node {node} splits feature {f} (constraint {c:+}) with left leaves [{l_min}, {l_max}] and right leaves [{r_min}, {r_max}]"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
}

#[derive(Clone, Copy, Default)]
struct Bucket {
    g: f64,
    h: f64,
}

struct Split {
    feature: usize,
    bin: usize,
    gain: f64,
    w_left: f64,
    w_right: f64,
}

pub(crate) struct Grower<'a> {
    pub binned: &'a BinnedMatrix,
    pub mapper: &'a BinMapper,
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub monotone: &'a [i8],
    pub params: GrowParams,
    /// Total split gain per feature, accumulated across trees.
    pub importance: &'a mut [f64],
}

#[inline]
fn weight(g: f64, h: f64, lambda: f64, lo: f64, hi: f64) -> f64 {
    (-g / (h + lambda)).clamp(lo, hi)
}

/// Twice the loss reduction of using weight `w` on a node with sums `g, h`.
#[inline]
fn score(g: f64, h: f64, lambda: f64, w: f64) -> f64 {
    -(2.0 * g * w + (h + lambda) * w * w)
}

impl Grower<'_> {
    fn histogram(&self, rows: &[u32]) -> Vec<Bucket> {
        let p = self.binned.n_features;
        let mut hist = vec![Bucket::default(); p * 256];
        for f in 0..p {
            let col = self.binned.column(f);
            let h = &mut hist[f * 256..(f + 1) * 256];
            for &r in rows {
                let r = r as usize;
                let b = &mut h[col[r] as usize];
                b.g += self.grad[r];
                b.h += self.hess[r];
            }
        }
        hist
    }

    fn best_split(&self, hist: &[Bucket], g: f64, h: f64, lo: f64, hi: f64) -> Option<Split> {
        let lambda = self.params.lambda;
        let mcw = self.params.min_child_weight;
        let parent = score(g, h, lambda, weight(g, h, lambda, lo, hi));
        let mut best: Option<Split> = None;
        for f in 0..self.binned.n_features {
            let nb = self.mapper.n_bins(f);
            let c = self.monotone.get(f).copied().unwrap_or(0);
            let (mut gl, mut hl) = (0.0, 0.0);
            for b in 0..nb.saturating_sub(1) {
                let bucket = hist[f * 256 + b];
                gl += bucket.g;
                hl += bucket.h;
                let (gr, hr) = (g - gl, h - hl);
                if hl < mcw || hr < mcw {
                    continue;
                }
                let wl = weight(gl, hl, lambda, lo, hi);
                let wr = weight(gr, hr, lambda, lo, hi);
                if (c > 0 && wl > wr) || (c < 0 && wl < wr) {
                    continue;
                }
                let gain = score(gl, hl, lambda, wl) + score(gr, hr, lambda, wr) - parent;
                if gain > 1e-12 && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(Split { feature: f, bin: b, gain, w_left: wl, w_right: wr });
                }
            }
        }
        best
    }

    /// Grows one tree over `rows`, returning it together with the leaf index
    /// reached by every row (indexed like the gradient arrays).
    pub fn grow(&mut self, rows: Vec<u32>, leaf_of: &mut [u32]) -> Tree {
        let mut tree = Tree::empty();
        let hist = self.histogram(&rows);
        self.grow_node(&mut tree, rows, hist, 0, f64::NEG_INFINITY, f64::INFINITY, leaf_of);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn grow_node(
        &mut self,
        tree: &mut Tree,
        rows: Vec<u32>,
        hist: Vec<Bucket>,
        depth: usize,
        lo: f64,
        hi: f64,
        leaf_of: &mut [u32],
    ) -> usize {
        // Totals from any feature's histogram.
        let (g, h) = hist[..256].iter().fold((0.0, 0.0), |(g, h), b| (g + b.g, h + b.h));
        let lambda = self.params.lambda;
        let split = if depth < self.params.max_depth {
            self.best_split(&hist, g, h, lo, hi)
        } else {
            None
        };
        let Some(split) = split else {
            let id = tree.push_leaf(weight(g, h, lambda, lo, hi));
            for &r in &rows {
                leaf_of[r as usize] = id as u32;
            }
            return id;
        };

        self.importance[split.feature] += split.gain;
        let col = self.binned.column(split.feature);
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            rows.iter().partition(|&&r| (col[r as usize] as usize) <= split.bin);
        drop(rows);

        // Histogram subtraction: scan the smaller child only.
        let (small_is_left, small_rows) = if left_rows.len() <= right_rows.len() {
            (true, &left_rows)
        } else {
            (false, &right_rows)
        };
        let small = self.histogram(small_rows);
        let mut large = hist;
        for (l, s) in large.iter_mut().zip(&small) {
            l.g -= s.g;
            l.h -= s.h;
        }
        let (hist_left, hist_right) = if small_is_left { (small, large) } else { (large, small) };

        let c = self.monotone.get(split.feature).copied().unwrap_or(0);
        let mid = 0.5 * (split.w_left + split.w_right);
        let (left_bounds, right_bounds) = match c.signum() {
            1 => ((lo, mid), (mid, hi)),
            -1 => ((mid, hi), (lo, mid)),
            _ => ((lo, hi), (lo, hi)),
        };

        let id = tree.push_leaf(0.0);
        tree.feature[id] = split.feature as i32;
        tree.threshold[id] = self.mapper.cuts[split.feature][split.bin];
        let l = self.grow_node(tree, left_rows, hist_left, depth + 1, left_bounds.0, left_bounds.1, leaf_of);
        let r = self.grow_node(tree, right_rows, hist_right, depth + 1, right_bounds.0, right_bounds.1, leaf_of);
        tree.left[id] = l as u32;
        tree.right[id] = r as u32;
        id
    }
}
