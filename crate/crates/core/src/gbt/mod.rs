//! Histogram gradient-boosted trees with monotone constraints.
//!
//! The learner minimizes logistic loss with second-order (Newton) leaf
//! weights and an L2 penalty. Features are bucketed once into at most 256
//! bins; split search scans cumulative gradient histograms, and each child's
//! histogram is the parent's minus its sibling's.
//!
//! Monotone constraints are enforced by bounds propagation: a split on a
//! constrained feature is admissible only if its two (clipped) child weights
//! are ordered as required, and the midpoint of those weights then becomes an
//! upper bound for one subtree and a lower bound for the other. Every leaf of
//! the left subtree is therefore ordered against every leaf of the right
//! subtree, which [`Tree::audit_monotone`] checks structurally.
//!
//! Ties in split gain go to the lowest feature index and then the lowest
//! threshold, so training is fully deterministic.

mod binning;
mod booster;
mod contest;
mod features;
mod tree;

pub use binning::{BinMapper, BinnedMatrix, FeatureMatrix, MAX_BINS};
pub use booster::{
    fit_gbt, train, GbtModel, GbtParams, GridPoint, HyperGrid, TrainData, TrainOutcome, TuneOutcome,
    GBT_FORMAT_VERSION,
};
pub use contest::{prediction_contest, reduction_vs_fair_coin, run_contest, ContestRow, SpreadOnlyModel};
pub use features::{
    adjusted_score, baldwin_time_factor, diff_time_ratio, spread_time, wp_feature_names, FeatureSet,
    WpFeatureRow, WP_FEATURE_NAMES, WP_MONOTONE,
};
pub use tree::{Tree, LEAF};
