//! Acceptance checks, one `PASS`/`FAIL`/`SKIP` line per criterion.
//!
//! Every quantity with a closed form is checked against an oracle written
//! here, independently of the library code: normal equations and a plain
//! Newton solver for the regressions, direct summation for the quality
//! metrics, hand counts for the bootstrap arithmetic, and the synthetic
//! world's backward-induction values for calibration and coverage.
//!
//! Pass substrings after `--` to run a subset, e.g.
//! `cargo test -p fourthdown-acceptance -- coverage`. The process exits
//! non-zero when any check fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use fourthdown::bootstrap::{
    boot_pct, ci_ranks, fit_ensemble, fourth_down_states, overconfidence_summary, quantile_ci, stability_analysis,
    uncertainty_report, write_stability_histogram, ConfidenceBin, ResamplePlan, StabilityConfig,
};
use fourthdown::coach::coach_agreement;
use fourthdown::data::{filter_seasons, make_split, parse_plays, ColumnMap, SplitFractions};
use fourthdown::engine::{breakdown, decide, fg_miss_yardline, Availability, Decision, DecisionValues, FourthDownState};
use fourthdown::gbt::{
    run_contest, train, wp_feature_names, FeatureMatrix, GbtParams, HyperGrid, TrainData, WpFeatureRow, WP_MONOTONE,
};
use fourthdown::pipeline::{fit_decision_model, FitConfig};
use fourthdown::quality::{fit_quality, rolling_quality, rolling_quality_path, team_quality_raw, QualityParams};
use fourthdown::spline_glm::{Design, GlmModel, InputTransform, RankPolicy, TermSpec};
use fourthdown::synthetic::{sample_fourth_down_states, simulate_history, OracleComponents, World, WorldConfig};
use fourthdown::transition::TransitionModel;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CLI_ENV: &str = "FOURTHDOWN_ACCEPTANCE_CLI";
const PBP_ENV: &str = "FOURTHDOWN_PBP_CSV";
const COLMAP_ENV: &str = "FOURTHDOWN_PBP_COLMAP";

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Line {
    name: &'static str,
    status: Status,
    detail: String,
}

fn line(name: &'static str, ok: bool, detail: String) -> Line {
    Line { name, status: if ok { Status::Pass } else { Status::Fail }, detail }
}

fn within(limit: Duration, started: Instant) -> (bool, String) {
    let t = started.elapsed();
    (t <= limit, format!("{:.1} s of {} s allowed", t.as_secs_f64(), limit.as_secs()))
}

fn world() -> &'static World {
    static W: OnceLock<World> = OnceLock::new();
    W.get_or_init(|| World::new(WorldConfig::default()).expect("default world"))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; plenty for test noise.
    let u: f64 = r.gen_range(1e-12..1.0);
    let v: f64 = r.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

// ---------------------------------------------------------------- oracles

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// `X'WX` and `X'Wz` for row-major `x`.
fn normal_equations(x: &[Vec<f64>], w: &[f64], z: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for ((row, &wi), &zi) in x.iter().zip(w).zip(z) {
        for j in 0..p {
            b[j] += wi * row[j] * zi;
            for k in 0..p {
                a[j][k] += wi * row[j] * row[k];
            }
        }
    }
    (a, b)
}

fn newton_logistic(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    for _ in 0..200 {
        let mu: Vec<f64> = x
            .iter()
            .map(|r| 1.0 / (1.0 + (-r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).exp()))
            .collect();
        let hw: Vec<f64> = w.iter().zip(&mu).map(|(wi, m)| wi * m * (1.0 - m)).collect();
        // Gradient X'W(y - mu) written as X'H z with z = (y - mu) / (mu (1 - mu)).
        let resid: Vec<f64> = y.iter().zip(&mu).map(|(yi, m)| (yi - m) / (m * (1.0 - m))).collect();
        let (h, g) = normal_equations(x, &hw, &resid);
        let step = solve(h, g);
        let size = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if size < 1e-13 {
            break;
        }
    }
    beta
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- checks

fn glm_oracles() -> Vec<Line> {
    let started = Instant::now();
    let specs = vec![
        TermSpec::Intercept,
        TermSpec::Linear { name: "x2".into(), input: 1, transform: InputTransform::Identity, gate: None },
        TermSpec::Linear { name: "x3".into(), input: 2, transform: InputTransform::Identity, gate: None },
        TermSpec::Spline { name: "x1".into(), input: 0, transform: InputTransform::Identity, df: 4, gate: None },
    ];
    let (mut worst_ols, mut worst_logit) = (0.0f64, 0.0f64);
    for k in 0..20u64 {
        let mut r = rng(0x6c6d + k);
        let n = r.gen_range(100..=500);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![r.gen_range(0.0..10.0), r.gen_range(-1.0..1.0), f64::from(r.gen_bool(0.4) as u8)])
            .collect();
        let w: Vec<f64> = (0..n).map(|_| r.gen_range(0.5..2.0)).collect();
        let design = Design::resolve(3, &specs, &rows).expect("design");
        let x: Vec<Vec<f64>> = rows.iter().map(|row| design.row(row)).collect();

        let y: Vec<f64> = rows
            .iter()
            .map(|v| 1.0 + 2.0 * v[1] - v[2] + v[0].sin() + 0.3 * normal(&mut r))
            .collect();
        let fit = GlmModel::fit_ols(design.clone(), &rows, &y, Some(&w), RankPolicy::Error).expect("ols");
        let (a, b) = normal_equations(&x, &w, &y);
        worst_ols = worst_ols.max(rel_err(&fit.coefficients, &solve(a, b)));

        let yb: Vec<f64> = rows
            .iter()
            .map(|v| {
                let eta = -0.3 + 1.2 * v[1] - 0.7 * v[2] + 0.25 * (v[0] - 5.0);
                f64::from(r.gen_bool(1.0 / (1.0 + (-eta).exp())) as u8)
            })
            .collect();
        let fit = GlmModel::fit_logistic(design, &rows, &yb, Some(&w), RankPolicy::Error).expect("logistic");
        worst_logit = worst_logit.max(rel_err(&fit.coefficients, &newton_logistic(&x, &yb, &w)));
    }
    let (fast, time) = within(Duration::from_secs(10), started);
    vec![line(
        "GLM oracle equivalence",
        worst_ols < 1e-8 && worst_logit < 1e-6 && fast,
        format!("20 problems; max coefficient error OLS {worst_ols:.1e} (< 1e-8), logistic {worst_logit:.1e} (< 1e-6); {time}"),
    )]
}

fn monotonicity() -> Vec<Line> {
    let started = Instant::now();
    let plays = simulate_history(world(), 900, 0x3030);
    let firsts: Vec<_> = plays.iter().filter(|p| p.down == 1).take(20_000).collect();
    let rows: Vec<[f64; 9]> = firsts.iter().map(|p| WpFeatureRow::from_play(p).to_array()).collect();
    let y: Vec<f64> = firsts.iter().map(|p| f64::from(p.win_loss as u8)).collect();
    let x = FeatureMatrix::from_rows(9, &rows).expect("matrix");
    let params = GbtParams {
        max_depth: 5,
        learning_rate: 0.1,
        min_child_weight: 20.0,
        n_rounds: 200,
        early_stopping: None,
        ..GbtParams::default()
    };
    let model = train(TrainData::new(&x, &y), None, &wp_feature_names(), &WP_MONOTONE, &params, None)
        .expect("train")
        .model;
    let audit = model.audit();

    let mut r = rng(0x6d6f);
    let mut violations = 0usize;
    let mut constrained = 0usize;
    for (j, &sign) in WP_MONOTONE.iter().enumerate() {
        if sign == 0 {
            continue;
        }
        constrained += 1;
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), row| (a.min(row[j]), b.max(row[j])));
        let span = (hi - lo).max(1.0);
        for _ in 0..10_000 {
            let mut a = rows[r.gen_range(0..rows.len())];
            let mut b = a;
            let u = r.gen_range(lo - 0.1 * span..hi + 0.1 * span);
            let v = r.gen_range(lo - 0.1 * span..hi + 0.1 * span);
            a[j] = u.min(v);
            b[j] = u.max(v);
            let (ma, mb) = (model.predict_margin(&a), model.predict_margin(&b));
            let ok = if sign > 0 { mb >= ma } else { mb <= ma };
            violations += usize::from(!ok);
        }
    }
    let (fast, time) = within(Duration::from_secs(60), started);
    vec![line(
        "monotonicity",
        violations == 0 && audit.is_ok() && rows.len() == 20_000 && fast,
        format!(
            "{} rows, {} trees; {violations} violations over {constrained} x 10000 probe pairs; tree audit {}; {time}",
            rows.len(),
            model.trees.len(),
            audit.err().unwrap_or_else(|| "clean".into())
        ),
    )]
}

fn calibration() -> Vec<Line> {
    let started = Instant::now();
    let w = world();
    let spt = w.config().seconds_per_tick();
    let probe_plays = simulate_history(w, 300, 0xca1b);
    let mut probes: Vec<_> = probe_plays.iter().filter(|p| p.down == 1).collect();
    probes.shuffle(&mut rng(0xca1c));
    probes.truncate(2000);

    let mut parts = Vec::new();
    let mut ok = probes.len() == 2000;
    for (games, tol) in [(500usize, 0.06), (2000, 0.04)] {
        let plays = simulate_history(w, games, 0xca00 + games as u64);
        let (_, fit) = fit_decision_model(plays, &FitConfig::default()).expect("pipeline fit");
        let mae = probes
            .iter()
            .map(|p| {
                let est = fit.model.wp.predict(&WpFeatureRow::from_play(p).to_array());
                let truth = w.true_wp(p.game_seconds_remaining / spt, p.score_differential, p.yardline);
                (est - truth).abs()
            })
            .sum::<f64>()
            / probes.len() as f64;
        ok &= mae < tol;
        parts.push(format!("{games} games: mean |error| {mae:.4} (< {tol})"));
    }
    let (fast, time) = within(Duration::from_secs(300), started);
    vec![line("WP calibration vs oracle", ok && fast, format!("{} visited first-down states; {}; {time}", probes.len(), parts.join(", ")))]
}

fn random_state(r: &mut ChaCha8Rng) -> FourthDownState {
    let yardline = r.gen_range(1..=99u8);
    FourthDownState {
        yardline,
        ydstogo: r.gen_range(1..=yardline.min(20)),
        game_seconds_remaining: r.gen_range(1..=3600),
        score_differential: r.gen_range(-24..=24),
        posteam_spread: r.gen_range(-12.0..12.0),
        total_points_line: r.gen_range(36.0..55.0),
        posteam_timeouts: r.gen_range(0..=3),
        defteam_timeouts: r.gen_range(0..=3),
        receive_2h_ko: r.gen(),
        home: r.gen(),
        total_score: r.gen_range(0..=70),
        kq: r.gen_range(-2.0..2.0),
        pq: r.gen_range(-2.0..2.0),
        opp_kq: r.gen_range(-2.0..2.0),
        opp_pq: r.gen_range(-2.0..2.0),
        delta_tq_off: r.gen_range(-2.0..2.0),
        delta_tq_def: r.gen_range(-2.0..2.0),
    }
}

fn composition() -> Vec<Line> {
    let half = |_: &WpFeatureRow| 0.5;
    let oracle = OracleComponents::new(world());
    let mut r = rng(0xc0c0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = random_state(&mut r);
        let b = breakdown(&s, &half, &oracle, &Availability::default()).expect("valid state");
        let v = &b.values;
        for x in [Some(v.wp_go), v.wp_fg, v.wp_punt].into_iter().flatten() {
            worst = worst.max((x - 0.5).abs());
        }
        for br in &b.branches {
            for x in [Some(br.wp), Some(br.wp_if_success), br.wp_if_failure].into_iter().flatten() {
                worst = worst.max((x - 0.5).abs());
            }
        }
    }
    let mut spot_mismatch = Vec::new();
    let mut r = rng(0xc0c1);
    for y in 1..=50u8 {
        let expected = (100.0 - (f64::from(y) + 7.0)).min(80.0);
        let s = FourthDownState { yardline: y, ydstogo: r.gen_range(1..=y.min(10)), ..random_state(&mut r) };
        let b = breakdown(&s, &half, &oracle, &Availability::default()).expect("valid state");
        let branch = b.branches.iter().find(|br| br.decision == Decision::FieldGoal).expect("fg branch");
        if fg_miss_yardline(y) != expected || branch.next_yardline_failure != Some(expected) {
            spot_mismatch.push(y);
        }
    }
    vec![
        line(
            "composition: constant WP",
            worst <= 1e-12,
            format!("1000 random states; max |value - 0.5| over decisions and branches {worst:.1e} (<= 1e-12)"),
        ),
        line(
            "composition: FG miss spot",
            spot_mismatch.is_empty(),
            format!("min(80, 100 - (y + 7)) exactly for y in 1..=50; mismatches at {spot_mismatch:?}"),
        ),
    ]
}

fn values(best: Decision, gap: f64) -> DecisionValues {
    // The chosen decision leads the other two by `gap` and `2 * gap`.
    let mut wps = [0.5 - 2.0 * gap, 0.5 - 2.0 * gap, 0.5 - 2.0 * gap];
    wps[best.index()] = 0.5;
    wps[(best.index() + 1) % 3] = 0.5 - gap;
    decide(wps[0], Some(wps[1]), Some(wps[2]))
}

fn bootstrap_mechanics() -> Vec<Line> {
    use Decision::{FieldGoal as F, Go as G, Punt as P};
    let mut problems = Vec::new();

    // Lattice: boot% is always agree * 100 / B.
    let mut r = rng(0xb0b0);
    for _ in 0..2000 {
        let b = [1usize, 3, 5, 11, 51, 101][r.gen_range(0..6)];
        let point = values(Decision::ALL[r.gen_range(0..3)], 0.01);
        let reps: Vec<_> = (0..b).map(|_| values(Decision::ALL[r.gen_range(0..3)], r.gen_range(0.001..0.05))).collect();
        let rep = uncertainty_report(point, &reps, 0.9).expect("report");
        let k = (rep.boot_pct * b as f64 / 100.0).round();
        if (rep.boot_pct - k * 100.0 / b as f64).abs() > 1e-9 || rep.boot_pct != boot_pct(rep.agree, b) {
            problems.push(format!("boot% {} off the lattice at B = {b}", rep.boot_pct));
            break;
        }
    }

    // Hand-counted B = 5 fixtures: (point, replicate choices, boot%, bin).
    let fixtures: [(Decision, [Decision; 5], f64, ConfidenceBin); 5] = [
        (G, [G, G, F, G, P], 60.0, ConfidenceBin::Uncertain),
        (F, [F, F, F, F, G], 80.0, ConfidenceBin::Lean),
        (P, [P, P, P, P, P], 100.0, ConfidenceBin::Confident),
        (G, [F, F, F, P, P], 0.0, ConfidenceBin::Uncertain),
        (P, [G, P, F, P, G], 40.0, ConfidenceBin::Uncertain),
    ];
    for (point, choices, pct, bin) in fixtures {
        let reps: Vec<_> = choices.iter().map(|&d| values(d, 0.02)).collect();
        let rep = uncertainty_report(values(point, 0.02), &reps, 0.9).expect("report");
        if rep.boot_pct != pct || rep.bin != bin {
            problems.push(format!("{point} vs {choices:?}: got {} {}, hand count {pct} {bin}", rep.boot_pct, rep.bin));
        }
    }
    // Gains of the point decision under each replicate, by hand.
    let reps = [
        decide(0.50, Some(0.45), Some(0.40)),
        decide(0.40, Some(0.42), Some(0.30)),
        decide(0.60, Some(0.58), None),
        decide(0.30, None, Some(0.35)),
        decide(0.52, Some(0.52), Some(0.10)),
    ];
    let rep = uncertainty_report(decide(0.6, Some(0.5), Some(0.4)), &reps, 0.9).expect("report");
    let hand = [0.05, -0.02, 0.02, -0.05, 0.0];
    if rep.gains.iter().zip(hand).any(|(g, h)| (g - h).abs() > 1e-12) || rep.agree != 3 {
        problems.push(format!("gains {:?} (agree {}), hand count {hand:?} (agree 3)", rep.gains, rep.agree));
    }

    // 90% interval at B = 101 is the 6th and 96th order statistic.
    let mut gains: Vec<f64> = (1..=101).map(|k| f64::from(k) / 1000.0).collect();
    gains.shuffle(&mut rng(0xb0b1));
    let ci = quantile_ci(&gains, 0.9).expect("ci");
    if ci_ranks(101, 0.9) != (6, 96) || ci != (0.006, 0.096) {
        problems.push(format!("B = 101 interval ranks {:?}, values {ci:?}", ci_ranks(101, 0.9)));
    }
    let ok = problems.is_empty();
    vec![line(
        "bootstrap mechanics",
        ok,
        if ok {
            "boot% on the k*100/B lattice over 2000 fixtures; 5 hand-counted B = 5 ensembles and gains; B = 101 interval = [g(6), g(96)]".into()
        } else {
            problems.join("; ")
        },
    )]
}

fn coverage() -> Vec<Line> {
    const HISTORIES: u64 = 50;
    const GAMES: usize = 300;
    const B: usize = 51;
    let started = Instant::now();
    let w = world();
    let oracle = OracleComponents::new(w);
    let probes = sample_fourth_down_states(w, 100, 77);
    let config = FitConfig::small();
    let fractions = [1.0, 0.5];
    let mut covered = [0usize; 2];
    let mut width = [0.0f64; 2];
    let mut total = 0usize;
    for h in 0..HISTORIES {
        let plays = simulate_history(w, GAMES, 0xc0de_0000 + h);
        let (data, fit) = fit_decision_model(plays, &config).expect("point fit");
        for (k, &f) in fractions.iter().enumerate() {
            let plan = ResamplePlan::new(0xc0de_1000 + h, B, f).expect("plan");
            let ens = fit_ensemble(&data, fit.model.clone(), &fit.params, plan, &config).expect("ensemble");
            for s in &probes {
                let rep = ens.report(s, 0.9).expect("report");
                let target = oracle.values(s).expect("oracle").gain_of(rep.decision).expect("two decisions");
                covered[k] += usize::from(rep.ci_lo <= target && target <= rep.ci_hi);
                width[k] += rep.ci_hi - rep.ci_lo;
            }
        }
        total += probes.len();
    }
    let (fast, time) = within(Duration::from_secs(30 * 60), started);
    let names = ["bootstrap coverage (f = 1.0)", "bootstrap coverage (f = 0.5)"];
    (0..2)
        .map(|k| {
            let rate = covered[k] as f64 / total as f64;
            line(
                names[k],
                (0.80..=0.98).contains(&rate) && fast,
                format!(
                    "{HISTORIES} histories x {} probes, B = {B}: 90% interval covers the true effect {:.1}% (target 80-98%), mean width {:.4}; {time} for both fractions",
                    probes.len(),
                    100.0 * rate,
                    width[k] / total as f64
                ),
            )
        })
        .collect()
}

fn stability() -> Vec<Line> {
    let w = world();
    let plays = simulate_history(w, 300, 0x57ab);
    let config = FitConfig::small();
    let (data, fit) = fit_decision_model(plays, &config).expect("point fit");
    let states = sample_fourth_down_states(w, 200, 0x57ac);
    let study = StabilityConfig { bs: vec![11, 51], m: 20, seed: 0x57ad, fraction: 1.0 };
    let table = stability_analysis(&data, &fit.model, &fit.params, &config, &states, &study).expect("stability");
    let (p11, p51) = (table.rows[0].mean_p, table.rows[1].mean_p);

    let mut buf = Vec::new();
    write_stability_histogram(&table, &mut buf).expect("histogram");
    let text = String::from_utf8(buf).expect("utf-8");
    let mut lines = text.lines();
    let mut problems = Vec::new();
    if lines.next() != Some("b,play,p") {
        problems.push("bad header".to_string());
    }
    let mut seen = vec![vec![0usize; states.len()]; 2];
    let mut sums = [0.0f64; 2];
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        let parsed = (|| {
            let [b, play, p] = f.as_slice() else { return None };
            Some((b.parse::<usize>().ok()?, play.parse::<usize>().ok()?, p.parse::<f64>().ok()?))
        })();
        let Some((b, play, p)) = parsed else {
            problems.push(format!("unparseable row {l:?}"));
            continue;
        };
        let k = match b {
            11 => 0,
            51 => 1,
            _ => {
                problems.push(format!("unexpected B {b}"));
                continue;
            }
        };
        let on_grid = ((p * 20.0).round() - p * 20.0).abs() < 1e-4;
        if play >= states.len() || !(1.0 / 3.0 - 1e-9..=1.0).contains(&p) || !on_grid {
            problems.push(format!("bad row {l:?}"));
            continue;
        }
        seen[k][play] += 1;
        sums[k] += p;
    }
    if seen.iter().flatten().any(|&c| c != 1) {
        problems.push("every play must appear once per B".into());
    }
    for (k, row) in table.rows.iter().enumerate() {
        if (sums[k] / states.len() as f64 - row.mean_p).abs() > 1e-5 {
            problems.push(format!("histogram mean disagrees with the table at B = {}", row.b));
        }
    }
    vec![
        line(
            "stability: mean modal frequency",
            p51 >= p11 - 0.02,
            format!("M = 20, {} probe states: B = 11 {p11:.3}, B = 51 {p51:.3} (non-decreasing within 0.02)", states.len()),
        ),
        line(
            "stability: histogram export",
            problems.is_empty(),
            if problems.is_empty() { format!("{} rows, header b,play,p, values on the 1/20 grid", 2 * states.len()) } else { problems.join("; ") },
        ),
    ]
}

fn fg_shrinkage() -> Vec<Line> {
    let plays = simulate_history(world(), 500, 0xf6f6);
    let longest = plays
        .iter()
        .filter(|p| p.play_type == fourthdown::data::PlayType::FieldGoal)
        .map(|p| p.yardline)
        .max()
        .unwrap_or(0);
    let config = FitConfig::small();
    let misses = config.transitions.synthetic_misses.count;
    let (_, fit) = fit_decision_model(plays, &config).expect("fit");
    let p85 = fit.model.transitions.fg_make_prob(85.0, 0.0);
    let p40 = fit.model.transitions.fg_make_prob(40.0, 0.0);
    vec![line(
        "FG shrinkage",
        misses == 500 && p85 < 0.01,
        format!("{misses} imputed misses, longest real attempt at {longest}; P(make | 85, kq = 0) = {p85:.2e} (< 0.01), at 40: {p40:.3}"),
    )]
}

fn quality() -> Vec<Line> {
    let mut r = rng(0x9a9a);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = r.gen_range(1..300);
        let res: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let (gamma, alpha) = (r.gen_range(0.0..200.0), r.gen_range(0.9..=1.0));
        let got = rolling_quality(&res, gamma, alpha);
        for (t, q) in got.iter().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for (j, rj) in res[..t].iter().enumerate() {
                let wj = alpha.powi((t - 1 - j) as i32);
                num += wj * rj;
                den += wj;
            }
            let expected = if t == 0 { 0.0 } else { num / (gamma + den) };
            worst = worst.max((q - expected).abs());
        }
    }
    let QualityParams { gamma, alpha } = QualityParams::KICKER;
    let mut first = vec![0.0; 46];
    first[0] = 1.0;
    let mut last = vec![0.0; 46];
    last[45] = 1.0;
    let ratio = rolling_quality_path(&first, gamma, alpha)[46] / rolling_quality_path(&last, gamma, alpha)[46];
    let half_ok = (ratio - 0.5).abs() < 0.01 && (ratio - alpha.powi(45)).abs() < 1e-12;

    let hand = [((-6.0, 44.0), (25.0, 19.0)), ((3.5, 47.0), (21.75, 25.25)), ((0.0, 41.0), (20.5, 20.5))];
    let mut tq_ok = hand.iter().all(|&((s, t), want)| team_quality_raw(s, t) == want);
    for _ in 0..1000 {
        let (s, t) = (r.gen_range(-20.0..20.0), r.gen_range(30.0..60.0));
        tq_ok &= team_quality_raw(s, t) == ((t - s) / 2.0, (t + s) / 2.0);
    }
    vec![line(
        "quality metrics",
        worst <= 1e-12 && half_ok && tq_ok,
        format!(
            "direct-sum max error {worst:.1e} (<= 1e-12); weight at lag 45 = {ratio:.4} of the newest; raw team quality {}",
            if tq_ok { "exact" } else { "MISMATCH" }
        ),
    )]
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let out = Command::new(exe)
        .env(CLI_ENV, "1")
        .arg("--quiet")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(out.stdout)
}

fn cli_pipeline(dir: &Path, config: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let cfg = config.to_string_lossy().into_owned();
    run_cli(&["simulate", "--games", "150", "--seed", "7", "--out", &p("hist.csv")])?;
    run_cli(&["--config", &cfg, "fit", "--data", &p("hist.csv"), "--out", &p("fit")])?;
    run_cli(&["--config", &cfg, "bootstrap", "--data", &p("hist.csv"), "--B", "11", "--seed", "3", "--out", &p("ens")])?;
    let rec = [
        "recommend", "--ensemble", &p("ens"), "--yardline", "36", "--ydstogo", "2", "--seconds", "1200", "--score-diff", "-3",
    ];
    let mut outputs = vec![
        ("recommend #1".to_string(), run_cli(&rec)?),
        ("recommend #2".to_string(), run_cli(&rec)?),
    ];
    let mut json = rec.to_vec();
    json.extend(["--format", "json"]);
    outputs.push(("recommend --format json".into(), run_cli(&json)?));
    let mut files = vec!["hist.csv".to_string(), "fit/decision.model".into(), "ens/manifest.json".into(), "ens/point.model".into()];
    files.extend((0..11).map(|i| format!("ens/rep_{i:03}.model")));
    for f in files {
        let bytes = std::fs::read(dir.join(&f)).map_err(|e| format!("{f}: {e}"))?;
        outputs.push((f, bytes));
    }
    Ok(outputs)
}

fn cli_determinism() -> Vec<Line> {
    let result = (|| -> Result<String, String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config = tmp.path().join("small.toml");
        std::fs::write(
            &config,
            "tune = false\n\n[gbt]\nmax_depth = 4\nlearning_rate = 0.1\nmin_child_weight = 20.0\nn_rounds = 150\n",
        )
        .map_err(|e| e.to_string())?;
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        let first = cli_pipeline(&a, &config)?;
        let second = cli_pipeline(&b, &config)?;
        if first[0].1 != first[1].1 {
            return Err("two recommend calls on one ensemble differ".into());
        }
        let differing: Vec<&str> =
            first.iter().zip(&second).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
        if !differing.is_empty() {
            return Err(format!("independent runs differ in {differing:?}"));
        }
        Ok(format!(
            "simulate -> fit -> bootstrap (B = 11) -> recommend, run twice from scratch: {} outputs byte-identical",
            first.len()
        ))
    })();
    match result {
        Ok(detail) => vec![line("CLI determinism", true, detail)],
        Err(detail) => vec![line("CLI determinism", false, detail)],
    }
}

fn integration_tier() -> Vec<Line> {
    let names = ["integration: WP contest", "integration: confidence shares", "integration: coach agreement"];
    let Some(path) = std::env::var_os(PBP_ENV).filter(|v| !v.is_empty()) else {
        return names
            .iter()
            .map(|&name| Line { name, status: Status::Skip, detail: format!("needs a real play-by-play CSV in ${PBP_ENV}") })
            .collect();
    };
    let map = match std::env::var_os(COLMAP_ENV) {
        Some(p) => ColumnMap::load(Path::new(&p)).expect("column map"),
        None => ColumnMap::identity(),
    };
    let file = std::fs::File::open(&path).expect("play-by-play CSV");
    let plays = parse_plays(std::io::BufReader::new(file), &map).expect("parse").plays;
    let config = FitConfig::default();

    let split = make_split(&plays, SplitFractions::new(0.5, 0.25, 0.25), 1).expect("split");
    let rows = run_contest(&plays, &split, &HyperGrid::default(), &config.gbt).expect("contest");
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.logloss.total_cmp(&b.logloss));
    let order: Vec<&str> = sorted.iter().map(|r| r.model.as_str()).collect();
    let expected: Vec<&str> = rows.iter().map(|r| r.model.as_str()).collect();
    let proposed = rows.iter().find(|r| r.model.starts_with("first-down")).map_or(f64::NAN, |r| r.logloss);
    let contest = line(
        names[0],
        order == expected && (proposed - 0.440).abs() <= 0.02,
        format!("log-loss ranking {order:?}; first-down model {proposed:.3} (0.440 +- 0.02)"),
    );

    let recent = filter_seasons(&plays, 2018..=2022);
    let (data, fit) = fit_decision_model(recent.clone(), &config).expect("fit");
    let plan = ResamplePlan::new(1, 101, 1.0).expect("plan");
    let ens = fit_ensemble(&data, fit.model, &fit.params, plan, &config).expect("ensemble");
    let quality = fit_quality(&recent, &config.quality).expect("quality");
    let states = fourth_down_states(&recent, &quality.inputs);
    let summary = overconfidence_summary(&states, &ens, 0.9).expect("summary");
    let shares = line(
        names[1],
        (summary.confident - 0.48).abs() <= 0.05 && (summary.uncertain - 0.27).abs() <= 0.05,
        format!(
            "confident {:.1}% (48 +- 5), uncertain {:.1}% (27 +- 5) over {} plays",
            100.0 * summary.confident,
            100.0 * summary.uncertain,
            summary.n
        ),
    );
    let table = coach_agreement(&recent, &quality.inputs, &ens, 0.9).expect("agreement");
    let (kick, go) = (table.model_says_kick.rate().unwrap_or(f64::NAN), table.model_says_go.rate().unwrap_or(f64::NAN));
    let agreement = line(
        names[2],
        (kick - 0.91).abs() <= 0.05 && (go - 0.49).abs() <= 0.05,
        format!("kick {:.1}% (91 +- 5), go {:.1}% (49 +- 5)", 100.0 * kick, 100.0 * go),
    );
    vec![contest, shares, agreement]
}

type Check = fn() -> Vec<Line>;

const CHECKS: &[(&str, Check)] = &[
    ("glm", glm_oracles),
    ("monotonicity", monotonicity),
    ("calibration", calibration),
    ("composition", composition),
    ("mechanics", bootstrap_mechanics),
    ("coverage", coverage),
    ("stability", stability),
    ("shrinkage", fg_shrinkage),
    ("quality", quality),
    ("cli", cli_determinism),
    ("integration", integration_tier),
];

fn main() -> ExitCode {
    if std::env::var_os(CLI_ENV).is_some() {
        return fourthdown::cli::run(std::env::args_os());
    }
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let (mut pass, mut fail, mut skip) = (0, 0, 0);
    for &(key, check) in CHECKS {
        if !filters.is_empty() && !filters.iter().any(|f| key.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let lines = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            vec![line(key, false, format!("panicked: {msg}"))]
        });
        for l in lines {
            let tag = match l.status {
                Status::Pass => {
                    pass += 1;
                    "PASS"
                }
                Status::Fail => {
                    fail += 1;
                    "FAIL"
                }
                Status::Skip => {
                    skip += 1;
                    "SKIP"
                }
            };
            println!("{tag} {}: {}", l.name, l.detail);
        }
        eprintln!("  ({key} took {:.1} s)", started.elapsed().as_secs_f64());
    }
    println!("acceptance: {pass} passed, {fail} failed, {skip} skipped");
    if fail == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
