// Shared fixture: a small ensemble fitted once per test binary.
#![allow(dead_code)]

use std::sync::OnceLock;

use fourthdown::bootstrap::{fit_ensemble, BootstrapEnsemble, ResamplePlan};
use fourthdown::coach::{fit_coach, CoachModel};
use fourthdown::data::PlayRecord;
use fourthdown::engine::FourthDownState;
use fourthdown::gbt::GbtParams;
use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::synthetic::{simulate_history, World, WorldConfig};

pub struct Fixture {
    pub plays: Vec<PlayRecord>,
    pub ensemble: BootstrapEnsemble,
    pub coach: CoachModel,
}

pub fn quick_config() -> FitConfig {
    let mut c = FitConfig::small();
    c.gbt.n_rounds = 40;
    c
}

pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let world = World::new(WorldConfig::default()).unwrap();
        let plays = simulate_history(&world, 150, 11);
        let config = quick_config();
        let coach = fit_coach(&plays, &GbtParams { n_rounds: 30, early_stopping: None, ..GbtParams::default() })
            .unwrap()
            .model;
        let (data, fit) = fit_decision_model(plays.clone(), &config).unwrap();
        let ensemble = fit_ensemble(&data, fit.model, &fit.params, ResamplePlan::new(9, 7, 1.0).unwrap(), &config).unwrap();
        Fixture { plays, ensemble, coach }
    })
}

pub fn state(yardline: u8, ydstogo: u8) -> FourthDownState {
    FourthDownState {
        yardline,
        ydstogo,
        game_seconds_remaining: 1200,
        score_differential: -3,
        posteam_spread: 0.0,
        total_points_line: 44.0,
        posteam_timeouts: 3,
        defteam_timeouts: 3,
        receive_2h_ko: false,
        home: false,
        total_score: 0,
        kq: 0.0,
        pq: 0.0,
        opp_kq: 0.0,
        opp_pq: 0.0,
        delta_tq_off: 0.0,
        delta_tq_def: 0.0,
    }
}
