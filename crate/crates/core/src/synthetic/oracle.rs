use super::World;
use crate::engine::{evaluate, Availability, DecisionValues, FirstDownWp, FourthDownState};
use crate::gbt::WpFeatureRow;
use crate::transition::TransitionModel;

/// The world's true first-down win probability and transition expectations,
/// in the shape the decision engine consumes.
///
/// Composing these with the engine gives the quantity a fitted model
/// estimates; it is the target for bias and coverage checks.
#[derive(Clone, Copy, Debug)]
pub struct OracleComponents<'w> {
    pub world: &'w World,
}

impl<'w> OracleComponents<'w> {
    pub fn new(world: &'w World) -> Self {
        OracleComponents { world }
    }

    pub fn availability(&self) -> Availability {
        let c = self.world.config();
        Availability { punt_beyond: c.punt_beyond, fg_within: c.fg_within }
    }

    pub fn values(&self, state: &FourthDownState) -> crate::Result<DecisionValues> {
        evaluate(state, self, self, &self.availability())
    }
}

impl FirstDownWp for OracleComponents<'_> {
    /// Linear interpolation between the exact values at the neighbouring
    /// integer yardlines.
    fn wp1(&self, row: &WpFeatureRow) -> f64 {
        let n = self.world.ticks_for_seconds(row.game_seconds_remaining);
        let s = row.score_differential.round() as i32;
        let y = row.yardline.clamp(1.0, 99.0);
        let lo = y.floor();
        let t = y - lo;
        let a = self.world.true_wp(n, s, lo as u8);
        if t == 0.0 {
            return a;
        }
        let b = self.world.true_wp(n, s, (lo as u8 + 1).min(99));
        a + t * (b - a)
    }
}

impl TransitionModel for OracleComponents<'_> {
    fn punt_next_yardline(&self, yardline: f64, _pq: f64) -> f64 {
        let mut e = 0.0;
        self.world.punt_outcomes(yardline.round().clamp(1.0, 99.0) as u8, |p, next| {
            if let super::Next::OppFirst { y, .. } = next {
                e += p * f64::from(y);
            }
        });
        e
    }

    fn fg_make_prob(&self, yardline: f64, _kq: f64) -> f64 {
        self.world.fg_make_prob(yardline)
    }

    fn conversion_prob(&self, ydstogo: f64, down: u8, _delta_tq: f64) -> f64 {
        self.world.conversion_prob(down, ydstogo)
    }

    /// Mean recorded gain of a conversion; gains stop at the goal line.
    fn success_gain(&self, yardline: f64, ydstogo: f64, _down: u8, _delta_tq: f64) -> f64 {
        let k = &self.world.kernels().success_extra;
        k.iter().map(|&(e, w)| w * (ydstogo + f64::from(e)).min(yardline)).sum()
    }

    fn failure_gain(&self, ydstogo: f64, _down: u8, _delta_tq: f64) -> f64 {
        let z = ydstogo.round().max(1.0) as u8;
        self.world.failure_gains(z).iter().map(|&(g, w)| w * f64::from(g)).sum()
    }
}
