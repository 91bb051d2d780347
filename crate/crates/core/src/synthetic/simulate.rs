use rand::Rng;
use rayon::prelude::*;

use super::{Next, World};
use crate::data::{Era, PlayRecord, PlayType, Roof};
use crate::engine::{Decision, FourthDownState};
use crate::util::rng_for;

const STREAM_GAMES: u64 = 0x5111;

/// Draws one outcome from an enumerated distribution.
fn draw<T: Copy>(rng: &mut impl Rng, outcomes: &[(f64, T)]) -> T {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(p, o) in outcomes {
        acc += p;
        if u < acc {
            return o;
        }
    }
    outcomes.last().expect("non-empty outcome table").1
}

#[derive(Clone, Copy)]
enum Phase {
    First(u8),
    Third(u8, u8),
    Fourth(u8, u8),
}

struct Game<'w> {
    world: &'w World,
    index: usize,
    id: String,
    plays: Vec<(PlayRecord, usize)>,
    /// Home minus away, clamped like the world's state.
    diff: i32,
    total: u32,
    pos: usize,
    drive: u32,
}

impl Game<'_> {
    fn s(&self) -> i32 {
        if self.pos == 0 {
            self.diff
        } else {
            -self.diff
        }
    }

    fn score(&mut self, points: i32) {
        let cap = self.world.config().score_cap;
        let signed = if self.pos == 0 { points } else { -points };
        self.diff = (self.diff + signed).clamp(-cap, cap);
        self.total += points as u32;
    }

    fn turnover(&mut self) {
        self.pos = 1 - self.pos;
        self.drive += 1;
    }

    fn record(&mut self, n: u32, y: u8, z: u8, down: u8, play_type: PlayType) -> &mut PlayRecord {
        let c = self.world.config();
        let season = c.first_season + (self.index % usize::from(c.seasons)) as u16;
        let side = self.pos;
        let team = 2 * self.index + side;
        let record = PlayRecord {
            game_id: self.id.clone(),
            drive_id: format!("{}-D{:03}", self.id, self.drive),
            play_index: self.plays.len() as u32,
            season,
            era: Era::from_season(season).unwrap_or(Era::Y2018On),
            win_loss: false,
            game_seconds_remaining: n * c.seconds_per_tick(),
            score_differential: self.s(),
            total_score: self.total,
            posteam_spread: 0.0,
            total_points_line: c.total_points_line,
            yardline: y,
            ydstogo: z,
            down,
            posteam_timeouts: 3,
            defteam_timeouts: 3,
            receive_2h_ko: side == 1,
            home: side == 0,
            roof: Roof::Outdoors,
            posteam_coach: format!("Coach {:02}", team % c.coaches),
            kicker_id: Some(format!("K{:02}", team % c.kickers)),
            punter_id: Some(format!("P{:02}", (team * 7) % c.punters)),
            play_type,
            yards_gained: None,
            fg_made: None,
            next_yardline_after_punt: None,
        };
        self.plays.push((record, side));
        &mut self.plays.last_mut().unwrap().0
    }

    /// Applies a transition and returns the next phase.
    fn advance(&mut self, next: Next) -> Phase {
        let kickoff = self.world.config().kickoff_yardline;
        match next {
            Next::OwnFirst(y) => Phase::First(y),
            Next::Third { y, z } => Phase::Third(y, z),
            Next::Fourth { y, z } => Phase::Fourth(y, z),
            Next::Touchdown => {
                self.score(7);
                self.turnover();
                Phase::First(kickoff)
            }
            Next::OppFirst { y, points } => {
                self.score(points);
                self.turnover();
                Phase::First(y)
            }
        }
    }
}

fn simulate_game(world: &World, index: usize, seed: u64) -> Vec<PlayRecord> {
    let mut rng = rng_for(seed, STREAM_GAMES, index as u64);
    let mut g = Game {
        world,
        index,
        id: format!("G{index:06}"),
        plays: Vec::with_capacity(world.config().ticks as usize),
        diff: 0,
        total: 0,
        pos: 0,
        drive: 0,
    };
    let mut phase = Phase::First(world.config().kickoff_yardline);
    let mut table: Vec<(f64, (Next, i32))> = Vec::with_capacity(64);
    let mut n = world.config().ticks;
    while n > 0 {
        table.clear();
        let next = match phase {
            Phase::First(y) => {
                world.first_down_outcomes(y, |p, next, gain| table.push((p, (next, gain))));
                let (next, gain) = draw(&mut rng, &table);
                g.record(n, y, y.min(10), 1, PlayType::Other).yards_gained = Some(gain);
                next
            }
            Phase::Third(y, z) => {
                world.conversion_outcomes(3, y, z, |p, next, gain| table.push((p, (next, gain))));
                let (next, gain) = draw(&mut rng, &table);
                g.record(n, y, z, 3, PlayType::Go).yards_gained = Some(gain);
                next
            }
            Phase::Fourth(y, z) => {
                let q = world.fourth_down_q(n, g.s(), y, z);
                let pi = world.policy(&q);
                let choice = draw(&mut rng, &[
                    (pi[0], Decision::Go),
                    (pi[1], Decision::FieldGoal),
                    (pi[2], Decision::Punt),
                ]);
                match choice {
                    Decision::Go => {
                        world.conversion_outcomes(4, y, z, |p, next, gain| table.push((p, (next, gain))));
                        let (next, gain) = draw(&mut rng, &table);
                        g.record(n, y, z, 4, PlayType::Go).yards_gained = Some(gain);
                        next
                    }
                    Decision::FieldGoal => {
                        let mut kicks = Vec::with_capacity(2);
                        world.fg_outcomes(y, |p, next, made| kicks.push((p, (next, made))));
                        let (next, made) = draw(&mut rng, &kicks);
                        g.record(n, y, z, 4, PlayType::FieldGoal).fg_made = Some(made);
                        next
                    }
                    Decision::Punt => {
                        let mut punts = Vec::with_capacity(32);
                        world.punt_outcomes(y, |p, next| punts.push((p, next)));
                        let next = draw(&mut rng, &punts);
                        let Next::OppFirst { y: landing, .. } = next else { unreachable!() };
                        g.record(n, y, z, 4, PlayType::Punt).next_yardline_after_punt = Some(landing);
                        next
                    }
                }
            }
        };
        n -= 1;
        phase = g.advance(next);
    }
    let home_won = match g.diff.signum() {
        1 => true,
        -1 => false,
        _ => rng.gen_bool(0.5),
    };
    g.plays
        .into_iter()
        .map(|(mut p, side)| {
            p.win_loss = (side == 0) == home_won;
            p
        })
        .collect()
}

/// Simulates `n_games` independent games. Deterministic per seed; games are
/// simulated in parallel but returned in order.
pub fn simulate_history(world: &World, n_games: usize, seed: u64) -> Vec<PlayRecord> {
    (0..n_games)
        .into_par_iter()
        .map(|g| simulate_game(world, g, seed))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// First-down `(ticks left, score differential, yardline)` states visited
/// by fresh simulated games, subsampled to `count`.
pub fn sample_first_down_states(world: &World, count: usize, seed: u64) -> Vec<(u32, i32, u8)> {
    let spt = world.config().seconds_per_tick();
    let mut out = Vec::with_capacity(count);
    let mut rng = rng_for(seed, 0x5a17, 0);
    let mut batch = 0u64;
    while out.len() < count {
        let plays = simulate_history(world, 50, seed ^ (0xf1f1 + batch));
        batch += 1;
        for p in plays.iter().filter(|p| p.down == 1) {
            if out.len() < count && rng.gen_bool(0.2) {
                out.push((p.game_seconds_remaining / spt, p.score_differential, p.yardline));
            }
        }
    }
    out
}

/// Fourth-down states visited by fresh simulated games, subsampled to
/// `count`, as engine states with league-average quality inputs.
pub fn sample_fourth_down_states(world: &World, count: usize, seed: u64) -> Vec<FourthDownState> {
    let mut out = Vec::with_capacity(count);
    let mut rng = rng_for(seed, 0x5a14, 0);
    let mut batch = 0u64;
    while out.len() < count {
        let plays = simulate_history(world, 50, seed ^ (0xf4f4 + batch));
        batch += 1;
        for p in plays.iter().filter(|p| p.down == 4) {
            if out.len() < count && rng.gen_bool(0.3) {
                out.push(FourthDownState {
                    yardline: p.yardline,
                    ydstogo: p.ydstogo,
                    game_seconds_remaining: p.game_seconds_remaining,
                    score_differential: p.score_differential,
                    total_score: p.total_score,
                    receive_2h_ko: p.receive_2h_ko,
                    home: p.home,
                    total_points_line: p.total_points_line,
                    ..FourthDownState::template()
                });
            }
        }
    }
    out
}
