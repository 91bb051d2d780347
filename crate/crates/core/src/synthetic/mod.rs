//! A small, exactly solvable football world used as ground truth.
//!
//! The world is a Markov game over plays. A possession starts with a first
//! down at some yardline; the first-down play stands in for first and
//! second down together and either scores, gains a new first down, or leaves
//! a third down. A failed third down leaves a fourth down, where the coach
//! goes for it, kicks a field goal or punts. Every play consumes one tick of
//! a fixed clock, and the game ends when the ticks run out.
//!
//! Because every outcome distribution is an explicit categorical table, the
//! win probability of any state is computed exactly by backward induction
//! over `(ticks left, score differential, yardline, ydstogo)`. The same
//! outcome tables drive both the induction and the simulator, so simulated
//! labels are draws from exactly the computed probabilities.

mod oracle;
mod simulate;
mod world;

pub use oracle::OracleComponents;
pub use simulate::{sample_first_down_states, sample_fourth_down_states, simulate_history};
pub use world::{Kernels, WorldConfig};

use crate::engine::Decision;

/// Where a play leaves the game, from the offense's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Next {
    /// The offense keeps the ball with a first down at this yardline.
    OwnFirst(u8),
    /// Touchdown (7 points); the opponent receives the kickoff.
    Touchdown,
    Third { y: u8, z: u8 },
    Fourth { y: u8, z: u8 },
    /// The opponent gets a first down at `y` (its perspective) after the
    /// offense scored `points`.
    OppFirst { y: u8, points: i32 },
}

fn clamp_yardline(y: i32) -> u8 {
    y.clamp(1, 99) as u8
}

/// The solved world: kernels plus exact value tables.
#[derive(Clone, Debug)]
pub struct World {
    config: WorldConfig,
    kernels: Kernels,
    z_max: u8,
    /// Exact first-down values by (ticks left, score, yardline). Third- and
    /// fourth-down values are tabulated only while solving.
    v1: Vec<f64>,
}

/// Scratch third- and fourth-down tables used during backward induction.
struct DownTables {
    v3: Vec<f64>,
    v4: Vec<f64>,
}

impl World {
    /// Builds the kernels and runs backward induction.
    pub fn new(config: WorldConfig) -> crate::Result<World> {
        config.validate()?;
        let kernels = Kernels::new(&config);
        let err = kernels.max_sum_error();
        assert!(err < 1e-12, "kernel rows must sum to 1 (error {err:e})");
        let z_max = (10 - config.early_gain_min.min(0) + 2) as u8;
        let mut w = World {
            z_max,
            v1: Vec::new(),
            kernels,
            config,
        };
        w.solve();
        Ok(w)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn kernels(&self) -> &Kernels {
        &self.kernels
    }

    /// Number of stored first-down states.
    pub fn n_states(&self) -> usize {
        self.v1.len()
    }

    fn n_scores(&self) -> usize {
        (2 * self.config.score_cap + 1) as usize
    }

    fn idx1(&self, n: u32, s: i32, y: u8) -> usize {
        let si = (s + self.config.score_cap) as usize;
        (n as usize * self.n_scores() + si) * 100 + y as usize
    }

    fn idx34(&self, n: u32, s: i32, y: u8, z: u8) -> usize {
        self.idx1(n, s, y) * (self.z_max as usize + 1) + z as usize
    }

    fn clamp_score(&self, s: i32) -> i32 {
        s.clamp(-self.config.score_cap, self.config.score_cap)
    }

    pub fn terminal(s: i32) -> f64 {
        match s.signum() {
            1 => 1.0,
            -1 => 0.0,
            _ => 0.5,
        }
    }

    /// Exact win probability of the offense at first down with `n` plays
    /// left.
    pub fn true_wp(&self, n: u32, s: i32, y: u8) -> f64 {
        let s = self.clamp_score(s);
        if n == 0 {
            return Self::terminal(s);
        }
        self.v1[self.idx1(n.min(self.config.ticks), s, y.clamp(1, 99))]
    }

    /// Exact value of a third down with `n` plays left.
    pub fn third_down_value(&self, n: u32, s: i32, y: u8, z: u8) -> f64 {
        self.lookup(n, self.clamp_score(s), Next::Third { y, z }, None)
    }

    /// Exact value of a fourth down under the coach policy.
    pub fn fourth_down_value(&self, n: u32, s: i32, y: u8, z: u8) -> f64 {
        self.lookup(n, self.clamp_score(s), Next::Fourth { y, z }, None)
    }

    fn v4_direct(&self, n: u32, s: i32, y: u8, z: u8) -> f64 {
        let q = self.fourth_down_q(n, s, y, z);
        let pi = self.policy(&q);
        q.iter().zip(pi).map(|(q, p)| q.map_or(0.0, |q| q * p)).sum()
    }

    fn lookup(&self, n: u32, s: i32, next: Next, tables: Option<&DownTables>) -> f64 {
        match next {
            Next::OwnFirst(y) => self.true_wp(n, s, y),
            Next::Touchdown => 1.0 - self.true_wp(n, -self.clamp_score(s + 7), self.config.kickoff_yardline),
            Next::OppFirst { y, points } => 1.0 - self.true_wp(n, -self.clamp_score(s + points), y),
            _ if n == 0 => Self::terminal(s),
            Next::Third { y, z } => match tables {
                Some(t) => t.v3[self.idx34(n, s, y, z.min(self.z_max))],
                None => {
                    let mut v = 0.0;
                    self.conversion_outcomes(3, y, z, |p, next, _| v += p * self.lookup(n - 1, s, next, None));
                    v
                }
            },
            Next::Fourth { y, z } => match tables {
                Some(t) => t.v4[self.idx34(n, s, y, z.min(self.z_max))],
                None => self.v4_direct(n, s, y, z),
            },
        }
    }

    /// Value to the offense of landing in `next` with `n` plays left.
    pub fn value(&self, n: u32, s: i32, next: Next) -> f64 {
        self.lookup(n, self.clamp_score(s), next, None)
    }

    pub fn conversion_prob(&self, down: u8, z: f64) -> f64 {
        let a = if down == 4 { self.config.conv_intercept_4th } else { self.config.conv_intercept_3rd };
        crate::util::sigmoid(a - self.config.conv_slope * z.max(1.0).ln())
    }

    pub fn fg_make_prob(&self, y: f64) -> f64 {
        crate::util::sigmoid(self.config.fg_intercept + self.config.fg_slope * (y + 17.0))
    }

    fn failure_gains(&self, z: u8) -> [(i32, f64); 4] {
        let w = self.config.failure_weights;
        let total: f64 = w.iter().sum();
        let z = i32::from(z);
        [(-2, w[0] / total), (0, w[1] / total), ((z - 1) / 2, w[2] / total), (z - 1, w[3] / total)]
    }

    /// Outcomes of a first-down play: `(probability, next, yards gained)`.
    pub fn first_down_outcomes(&self, y: u8, mut f: impl FnMut(f64, Next, i32)) {
        let yi = i32::from(y);
        let z1 = yi.min(10);
        for &(g, w) in &self.kernels.early_gain {
            if g >= yi {
                f(w, Next::Touchdown, yi);
            } else if g >= z1 {
                f(w, Next::OwnFirst(clamp_yardline(yi - g)), g);
            } else {
                let y3 = clamp_yardline(yi - g);
                let z3 = (z1 - g).min(i32::from(y3)) as u8;
                f(w, Next::Third { y: y3, z: z3 }, g);
            }
        }
    }

    /// Outcomes of a third- or fourth-down attempt to convert.
    pub fn conversion_outcomes(&self, down: u8, y: u8, z: u8, mut f: impl FnMut(f64, Next, i32)) {
        let p = self.conversion_prob(down, f64::from(z));
        let (yi, zi) = (i32::from(y), i32::from(z));
        for &(e, w) in &self.kernels.success_extra {
            let gain = zi + e;
            if gain >= yi {
                f(p * w, Next::Touchdown, yi);
            } else {
                f(p * w, Next::OwnFirst(clamp_yardline(yi - gain)), gain);
            }
        }
        for (g, w) in self.failure_gains(z) {
            let next = if down == 4 {
                Next::OppFirst { y: clamp_yardline(100 - (yi - g)), points: 0 }
            } else {
                let y4 = clamp_yardline(yi - g);
                Next::Fourth { y: y4, z: (zi - g).min(i32::from(y4)) as u8 }
            };
            f((1.0 - p) * w, next, g);
        }
    }

    pub fn fg_outcomes(&self, y: u8, mut f: impl FnMut(f64, Next, bool)) {
        let p = self.fg_make_prob(f64::from(y));
        f(p, Next::OppFirst { y: self.config.kickoff_yardline, points: 3 }, true);
        let miss = clamp_yardline((100 - (i32::from(y) + 7)).min(80));
        f(1.0 - p, Next::OppFirst { y: miss, points: 0 }, false);
    }

    /// Punt outcomes; the yardline is the receiving team's.
    pub fn punt_outcomes(&self, y: u8, mut f: impl FnMut(f64, Next)) {
        for &(net, w) in &self.kernels.punt_net {
            let spot = i32::from(y) - net;
            let next = if spot < 1 { 80 } else { clamp_yardline(100 - spot) };
            f(w, Next::OppFirst { y: next, points: 0 });
        }
    }

    pub fn available(&self, d: Decision, y: u8) -> bool {
        match d {
            Decision::Go => true,
            Decision::FieldGoal => y <= self.config.fg_within,
            Decision::Punt => y > self.config.punt_beyond,
        }
    }

    /// Exact value of each fourth-down decision with `n` plays left
    /// (before the play), indexed by [`Decision::index`].
    pub fn fourth_down_q(&self, n: u32, s: i32, y: u8, z: u8) -> [Option<f64>; 3] {
        let s = self.clamp_score(s);
        let after = n.saturating_sub(1);
        let mut q = [None; 3];
        let mut go = 0.0;
        self.conversion_outcomes(4, y, z, |p, next, _| go += p * self.value(after, s, next));
        q[Decision::Go.index()] = Some(go);
        if self.available(Decision::FieldGoal, y) {
            let mut v = 0.0;
            self.fg_outcomes(y, |p, next, _| v += p * self.value(after, s, next));
            q[Decision::FieldGoal.index()] = Some(v);
        }
        if self.available(Decision::Punt, y) {
            let mut v = 0.0;
            self.punt_outcomes(y, |p, next| v += p * self.value(after, s, next));
            q[Decision::Punt.index()] = Some(v);
        }
        q
    }

    /// The synthetic coach's decision probabilities given decision values.
    pub fn policy(&self, q: &[Option<f64>; 3]) -> [f64; 3] {
        let avail = q.iter().filter(|v| v.is_some()).count() as f64;
        let top = q.iter().flatten().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut soft = [0.0; 3];
        for (i, v) in q.iter().enumerate() {
            if let Some(v) = v {
                soft[i] = ((v - top) / self.config.coach_temperature).exp();
            }
        }
        let total: f64 = soft.iter().sum();
        let eps = self.config.coach_epsilon;
        let mut out = [0.0; 3];
        for i in 0..3 {
            if q[i].is_some() {
                out[i] = (1.0 - eps) * soft[i] / total + eps / avail;
            }
        }
        out
    }

    fn solve(&mut self) {
        let t = self.config.ticks;
        let ns = self.n_scores();
        let zs = self.z_max as usize + 1;
        self.v1 = vec![0.0; (t as usize + 1) * ns * 100];
        let mut tables = DownTables { v3: vec![0.0; self.v1.len() * zs], v4: vec![0.0; self.v1.len() * zs] };
        let cap = self.config.score_cap;
        for s in -cap..=cap {
            for y in 0..100u8 {
                let i = self.idx1(0, s, y);
                self.v1[i] = Self::terminal(s);
            }
        }
        for n in 1..=t {
            // Layer n only reads layer n - 1, so it can be written in place.
            for s in -cap..=cap {
                for y in 1..=99u8 {
                    for z in 1..=self.z_max.min(y) {
                        let v4 = self.v4_direct(n, s, y, z);
                        let mut v3 = 0.0;
                        self.conversion_outcomes(3, y, z, |p, next, _| {
                            v3 += p * self.lookup(n - 1, s, next, Some(&tables))
                        });
                        let j = self.idx34(n, s, y, z);
                        tables.v4[j] = v4;
                        tables.v3[j] = v3;
                    }
                    let mut v1 = 0.0;
                    self.first_down_outcomes(y, |p, next, _| v1 += p * self.lookup(n - 1, s, next, Some(&tables)));
                    let i = self.idx1(n, s, y);
                    self.v1[i] = v1;
                }
            }
        }
    }

    /// Plays left for a clock reading, rounded to the nearest tick.
    pub fn ticks_for_seconds(&self, seconds: f64) -> u32 {
        let spt = f64::from(self.config.seconds_per_tick());
        ((seconds / spt).round().max(0.0) as u32).min(self.config.ticks)
    }
}
