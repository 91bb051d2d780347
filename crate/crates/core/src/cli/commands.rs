use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use rand::seq::index::sample;
use serde::Serialize;

use super::manifest::{sidecar, RunManifest};
use super::*;
use crate::bootstrap::{
    fit_ensemble, fourth_down_states, overconfidence_summary, stability_analysis, write_stability_histogram, BootstrapEnsemble,
    ResamplePlan, StabilityConfig, UncertaintyReport,
};
use crate::coach::{coach_agreement, fit_coach, write_importance_csv, CoachModel, CoachProbs};
use crate::data::{
    filter_seasons, filter_training_pools, make_split, parse_plays, read_jsonl, write_jsonl, write_plays_csv,
    write_reject_log, ColumnMap, PlayRecord, SplitFractions,
};
use crate::engine::{format_breakdown, write_grid_csv, DecisionBreakdown, FourthDownState};
use crate::gbt::{run_contest, GbtParams};
use crate::pipeline::{fit_point, FitConfig, PreparedData};
use crate::quality::{fit_quality, write_quality_table};
use crate::service::{serve, CorsConfig, ServeOptions};
use crate::synthetic::{simulate_history, World, WorldConfig};
use crate::util::rng_for;

/// A flag value that failed validation; reported with exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub(super) struct UsageError(String);

macro_rules! usage_ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(UsageError(format!($($fmt)+)).into());
        }
    };
}

struct Ctx {
    config_path: Option<PathBuf>,
    config: FitConfig,
    jobs: Option<u16>,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Ctx> {
        let config_path = cli
            .config
            .clone()
            .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        let config = match &config_path {
            Some(p) => FitConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
            None => FitConfig::default(),
        };
        Ok(Ctx { config_path, config, jobs: cli.jobs })
    }

    fn manifest(&self, command: &str) -> Result<RunManifest> {
        let mut m = RunManifest::start(command);
        m.config(self.config_path.as_deref(), &self.config)?;
        if let Some(p) = &self.config_path {
            m.input(p)?;
        }
        Ok(m)
    }
}

pub(super) fn dispatch(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli)?;
    if let Some(n) = ctx.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(usize::from(n))
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Fit(a) => fit(&ctx, a),
        Command::FitCoach(a) => fit_coach_cmd(&ctx, a),
        Command::Bootstrap(a) => bootstrap(&ctx, a),
        Command::Recommend(a) => recommend(a),
        Command::Boundary(a) => boundary(&ctx, a),
        Command::Overconfidence(a) => overconfidence(&ctx, a),
        Command::CoachEval(a) => coach_eval(&ctx, a),
        Command::Stability(a) => stability(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Contest(a) => contest(&ctx, a),
        Command::Serve(a) => serve_cmd(&ctx, a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn season_filter(plays: Vec<PlayRecord>, seasons: Option<(u16, u16)>) -> Vec<PlayRecord> {
    match seasons {
        Some((lo, hi)) => filter_seasons(&plays, lo..=hi),
        None => plays,
    }
}

fn load_plays(args: &DataArgs, m: &mut RunManifest) -> Result<Vec<PlayRecord>> {
    let path = &args.data;
    m.input(path)?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let plays = if path.extension().is_some_and(|e| e == "jsonl") {
        read_jsonl(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?
    } else {
        let map = match &args.colmap {
            Some(p) => {
                m.input(p)?;
                ColumnMap::load(p)?
            }
            None => ColumnMap::identity(),
        };
        let out = parse_plays(BufReader::new(file), &map).with_context(|| format!("parsing {}", path.display()))?;
        if !out.rejects.is_empty() {
            log::warn!("{} of {} rows rejected; run `ingest` for the reject log", out.rejects.len(), out.rows_read);
        }
        out.plays
    };
    let plays = season_filter(plays, args.seasons);
    ensure!(!plays.is_empty(), "no plays in {}", path.display());
    log::info!("loaded {} plays from {}", plays.len(), path.display());
    Ok(plays)
}

fn load_ensemble(dir: &Path, m: &mut RunManifest) -> Result<BootstrapEnsemble> {
    m.input(dir)?;
    BootstrapEnsemble::load(dir).with_context(|| format!("loading ensemble {}", dir.display()))
}

fn load_coach(path: &Path) -> Result<CoachModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(CoachModel::from_json(&text)?)
}

fn check_state(state: &FourthDownState) -> Result<()> {
    if let Err(errs) = state.validate() {
        let joined: Vec<String> = errs.iter().map(ToString::to_string).collect();
        return Err(UsageError(format!("invalid state: {}", joined.join("; "))).into());
    }
    Ok(())
}

fn check_level(level: f64) -> Result<()> {
    usage_ensure!(level > 0.0 && level < 1.0, "--level must be in (0, 1), got {level}");
    Ok(())
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> Result<()> {
    let mut m = ctx.manifest("ingest")?;
    m.input(&a.csv)?;
    let map = match &a.colmap {
        Some(p) => {
            m.input(p)?;
            ColumnMap::load(p)?
        }
        None => ColumnMap::identity(),
    };
    let file = File::open(&a.csv).with_context(|| format!("opening {}", a.csv.display()))?;
    let out = parse_plays(BufReader::new(file), &map)?;
    let plays = season_filter(out.plays, a.seasons);
    create_dir(&a.out)?;
    let plays_path = a.out.join("plays.jsonl");
    let mut w = create(&plays_path)?;
    write_jsonl(&mut w, &plays)?;
    w.flush()?;
    let rejects_path = a.out.join("rejects.tsv");
    let mut w = create(&rejects_path)?;
    write_reject_log(&mut w, &out.rejects)?;
    w.flush()?;
    let summary_path = a.out.join("summary.json");
    write_json(
        &summary_path,
        &serde_json::json!({
            "rows_read": out.rows_read,
            "accepted": plays.len(),
            "rejected": out.rejects.len(),
            "pools": filter_training_pools(&plays).summary(),
        }),
    )?;
    log::info!("{} rows read, {} accepted, {} rejected", out.rows_read, plays.len(), out.rejects.len());
    for p in [&plays_path, &rejects_path, &summary_path] {
        m.output(p);
    }
    m.write(&a.out.join("run.json"))
}

fn fit(ctx: &Ctx, a: FitArgs) -> Result<()> {
    let mut m = ctx.manifest("fit")?;
    m.seed("split_seed", ctx.config.split_seed);
    let plays = load_plays(&a.data, &mut m)?;
    let data = PreparedData::new(plays, &ctx.config)?;
    let point = fit_point(&data, &ctx.config)?;
    create_dir(&a.out)?;
    let model_path = a.out.join("decision.model");
    fs::write(&model_path, point.model.to_json()?).with_context(|| format!("writing {}", model_path.display()))?;
    let summary_path = a.out.join("fit.json");
    write_json(
        &summary_path,
        &serde_json::json!({
            "plays": data.plays.len(),
            "first_down_rows": data.wp_y.len(),
            "params": point.params,
            "grid": point.grid,
            "pools": filter_training_pools(&data.plays).summary(),
        }),
    )?;
    let kickers = a.out.join("kicker_quality.csv");
    write_quality_table(create(&kickers)?, &data.quality.kicker_table)?;
    let punters = a.out.join("punter_quality.csv");
    write_quality_table(create(&punters)?, &data.quality.punter_table)?;
    for p in [&model_path, &summary_path, &kickers, &punters] {
        m.output(p);
    }
    m.write(&a.out.join("run.json"))
}

fn fit_coach_cmd(ctx: &Ctx, a: FitCoachArgs) -> Result<()> {
    let mut m = ctx.manifest("fit-coach")?;
    let plays = load_plays(&a.data, &mut m)?;
    let params = GbtParams {
        max_depth: a.depth,
        learning_rate: a.learning_rate,
        n_rounds: a.rounds,
        early_stopping: None,
        ..ctx.config.gbt.clone()
    };
    let fit = fit_coach(&plays, &params)?;
    create_dir(&a.out)?;
    let model_path = a.out.join("coach.model");
    fs::write(&model_path, fit.model.to_json()?).with_context(|| format!("writing {}", model_path.display()))?;
    let importance_path = a.out.join("importance.csv");
    write_importance_csv(create(&importance_path)?, &fit.model.importance())?;
    let summary_path = a.out.join("coach_fit.json");
    write_json(
        &summary_path,
        &serde_json::json!({
            "plays": fit.n_plays,
            "class_counts": { "go": fit.class_counts[0], "fg": fit.class_counts[1], "punt": fit.class_counts[2] },
            "class_log_loss": { "go": fit.class_log_loss[0], "fg": fit.class_log_loss[1], "punt": fit.class_log_loss[2] },
            "log_loss": fit.log_loss,
            "params": params,
        }),
    )?;
    for p in [&model_path, &importance_path, &summary_path] {
        m.output(p);
    }
    m.write(&a.out.join("run.json"))
}

fn bootstrap(ctx: &Ctx, a: BootstrapArgs) -> Result<()> {
    let plan = ResamplePlan::new(a.seed, a.b, a.fraction).map_err(|e| UsageError(e.to_string()))?;
    let mut m = ctx.manifest("bootstrap")?;
    m.seed("bootstrap_seed", a.seed);
    m.seed("split_seed", ctx.config.split_seed);
    let plays = load_plays(&a.data, &mut m)?;
    let data = PreparedData::new(plays, &ctx.config)?;
    let point = fit_point(&data, &ctx.config)?;
    let ensemble = fit_ensemble(&data, point.model, &point.params, plan, &ctx.config)?;
    let manifest = ensemble.save(&a.out)?;
    log::info!("ensemble of {} replicates written, fingerprint {}", manifest.b, manifest.ensemble_fingerprint);
    m.output(&a.out);
    m.write(&a.out.join("run.json"))
}

#[derive(Serialize)]
struct Recommendation<'a> {
    state: &'a FourthDownState,
    breakdown: &'a DecisionBreakdown,
    report: &'a UncertaintyReport,
    coach: Option<CoachProbs>,
}

fn format_recommendation(state: &FourthDownState, b: &DecisionBreakdown, r: &UncertaintyReport, coach: Option<CoachProbs>) -> String {
    let mut out = format!(
        "4th & {} at {} yards from the end zone, {} s left, score {:+}\n\n",
        state.ydstogo, state.yardline, state.game_seconds_remaining, state.score_differential
    );
    out.push_str(&format_breakdown(b));
    out.push_str(&format!(
        "boot%: {:.1} ({} of {} replicates also choose {})  bin: {}\n",
        r.boot_pct, r.agree, r.b, r.decision, r.bin
    ));
    out.push_str(&format!(
        "{:.0}% interval on the effect size: [{:+.2}%, {:+.2}%]\n",
        100.0 * r.level,
        100.0 * r.ci_lo,
        100.0 * r.ci_hi
    ));
    if let Some(c) = coach {
        out.push_str(&format!(
            "coaches: go {:.1}%  fg {:.1}%  punt {:.1}%\n",
            100.0 * c.p_go,
            100.0 * c.p_fg,
            100.0 * c.p_punt
        ));
    }
    out
}

fn recommend(a: RecommendArgs) -> Result<()> {
    check_level(a.level)?;
    let state = a.context.state(a.yardline, a.ydstogo);
    check_state(&state)?;
    let mut m = RunManifest::start("recommend");
    let ensemble = load_ensemble(&a.ensemble, &mut m)?;
    let coach = a.coach_model.as_deref().map(load_coach).transpose()?;
    let report = ensemble.report(&state, a.level)?;
    let breakdown = ensemble.point.breakdown(&state, &ensemble.availability)?;
    let probs = coach.as_ref().map(|c| c.probs(&state, a.season));
    let text = match a.format {
        OutputFormat::Text => format_recommendation(&state, &breakdown, &report, probs),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&Recommendation {
                state: &state,
                breakdown: &breakdown,
                report: &report,
                coach: probs,
            })?;
            s.push('\n');
            s
        }
    };
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(text.as_bytes())?;
    stdout.flush()?;
    if let Some(path) = &a.gains_out {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["replicate", "decision", "gain"])?;
        for (i, g) in report.gains.iter().enumerate() {
            w.write_record([i.to_string(), report.decision.to_string(), g.to_string()])?;
        }
        w.flush()?;
        m.output(path);
        m.write(&sidecar(path))?;
    }
    Ok(())
}

fn boundary(ctx: &Ctx, a: BoundaryArgs) -> Result<()> {
    let (y0, y1) = a.yardlines;
    let (z0, z1) = a.ydstogo;
    usage_ensure!(y0 >= 1 && y1 <= 99, "--yardlines must lie in 1-99");
    usage_ensure!(z0 >= 1 && z1 <= 99, "--ydstogo must lie in 1-99");
    let template = a.context.state(50, 1);
    check_state(&template)?;
    let mut m = ctx.manifest("boundary")?;
    let ensemble = load_ensemble(&a.ensemble, &mut m)?;
    let cells = ensemble.boundary(&template, y0..=y1, z0..=z1, a.mode)?;
    let mut w = create(&a.out)?;
    write_grid_csv(&cells, &mut w)?;
    w.flush()?;
    m.output(&a.out);
    m.write(&sidecar(&a.out))
}

/// Fourth-down plays where a decision was taken, as engine states.
fn decision_states(plays: &[PlayRecord], config: &FitConfig) -> Result<Vec<FourthDownState>> {
    let quality = fit_quality(plays, &config.quality)?;
    let states = fourth_down_states(plays, &quality.inputs);
    ensure!(!states.is_empty(), "no fourth-down decisions in the data");
    Ok(states)
}

fn overconfidence(ctx: &Ctx, a: OverconfidenceArgs) -> Result<()> {
    check_level(a.level)?;
    let mut m = ctx.manifest("overconfidence")?;
    let ensemble = load_ensemble(&a.ensemble, &mut m)?;
    let plays = load_plays(&a.data, &mut m)?;
    let states = decision_states(&plays, &ctx.config)?;
    let summary = overconfidence_summary(&states, &ensemble, a.level)?;
    let mut w = create(&a.out)?;
    summary.write_csv(&mut w)?;
    w.flush()?;
    log::info!(
        "{} plays: {:.1}% confident, {:.1}% lean, {:.1}% uncertain",
        summary.n,
        100.0 * summary.confident,
        100.0 * summary.lean,
        100.0 * summary.uncertain
    );
    m.output(&a.out);
    m.write(&sidecar(&a.out))
}

fn coach_eval(ctx: &Ctx, a: CoachEvalArgs) -> Result<()> {
    check_level(a.level)?;
    let mut m = ctx.manifest("coach-eval")?;
    let ensemble = load_ensemble(&a.ensemble, &mut m)?;
    let plays = load_plays(&a.data, &mut m)?;
    let quality = fit_quality(&plays, &ctx.config.quality)?;
    let table = coach_agreement(&plays, &quality.inputs, &ensemble, a.level)?;
    let mut w = create(&a.out)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    m.output(&a.out);
    let summary_path = a.out.with_extension("summary.json");
    write_json(
        &summary_path,
        &serde_json::json!({
            "overall": table.overall,
            "overall_agreement": table.overall.rate(),
            "model_says_kick": table.model_says_kick,
            "kick_agreement": table.model_says_kick.rate(),
            "model_says_go": table.model_says_go,
            "go_agreement": table.model_says_go.rate(),
            "excluded_coaches": table.excluded,
        }),
    )?;
    m.output(&summary_path);
    if let Some(path) = &a.coach_model {
        m.input(path)?;
        let coach = load_coach(path)?;
        let importance_path = a.out.with_extension("importance.csv");
        write_importance_csv(create(&importance_path)?, &coach.importance())?;
        m.output(&importance_path);
    }
    m.write(&sidecar(&a.out))
}

fn stability(ctx: &Ctx, a: StabilityArgs) -> Result<()> {
    usage_ensure!(a.m >= 2, "--m must be at least 2");
    usage_ensure!(a.max_states >= 1, "--max-states must be positive");
    for &b in &a.bs {
        ResamplePlan::new(a.seed, b, a.fraction).map_err(|e| UsageError(e.to_string()))?;
    }
    let mut m = ctx.manifest("stability")?;
    m.seed("stability_seed", a.seed);
    let plays = load_plays(&a.data, &mut m)?;
    let data = PreparedData::new(plays, &ctx.config)?;
    let point = fit_point(&data, &ctx.config)?;
    let all = decision_states(&data.plays, &ctx.config)?;
    let states: Vec<FourthDownState> = if all.len() > a.max_states {
        let mut rng = rng_for(a.seed, 0x57a7, 0);
        let mut idx = sample(&mut rng, all.len(), a.max_states).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| all[i].clone()).collect()
    } else {
        all
    };
    let study = StabilityConfig { bs: a.bs.clone(), m: a.m, seed: a.seed, fraction: a.fraction };
    let table = stability_analysis(&data, &point.model, &point.params, &ctx.config, &states, &study)?;
    create_dir(&a.out)?;
    let table_path = a.out.join("stability.csv");
    let mut w = create(&table_path)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    let hist_path = a.out.join("histogram.csv");
    let mut w = create(&hist_path)?;
    write_stability_histogram(&table, &mut w)?;
    w.flush()?;
    let setup_path = a.out.join("setup.json");
    write_json(&setup_path, &serde_json::json!({ "setup": table.setup, "study": table.config }))?;
    for p in [&table_path, &hist_path, &setup_path] {
        m.output(p);
    }
    m.write(&a.out.join("run.json"))
}

fn simulate(ctx: &Ctx, a: SimulateArgs) -> Result<()> {
    usage_ensure!(a.games >= 1, "--games must be at least 1");
    let mut m = ctx.manifest("simulate")?;
    m.seed("simulation_seed", a.seed);
    let config = match &a.world {
        Some(p) => {
            m.input(p)?;
            WorldConfig::load(p)?
        }
        None => WorldConfig::default(),
    };
    m.config(a.world.as_deref(), &config)?;
    let world = World::new(config)?;
    let plays = simulate_history(&world, a.games, a.seed);
    let mut w = create(&a.out)?;
    write_plays_csv(&mut w, &plays)?;
    w.flush()?;
    log::info!("simulated {} games, {} plays", a.games, plays.len());
    m.output(&a.out);
    m.write(&sidecar(&a.out))
}

fn contest(ctx: &Ctx, a: ContestArgs) -> Result<()> {
    let fractions = SplitFractions::new(a.split[0], a.split[1], a.split[2]);
    let mut m = ctx.manifest("contest")?;
    m.seed("split_seed", a.seed);
    let plays = load_plays(&a.data, &mut m)?;
    let split = make_split(&plays, fractions, a.seed)?;
    let rows = run_contest(&plays, &split, &ctx.config.grid, &ctx.config.gbt)?;
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    m.output(&a.out);
    m.write(&sidecar(&a.out))
}

fn serve_cmd(ctx: &Ctx, a: ServeArgs) -> Result<()> {
    check_level(a.level)?;
    let mut rt = tokio::runtime::Builder::new_multi_thread();
    if let Some(n) = ctx.jobs {
        rt.worker_threads(usize::from(n)).max_blocking_threads(usize::from(n));
    }
    let rt = rt.enable_all().build().context("starting the runtime")?;
    rt.block_on(serve(ServeOptions {
        listen: a.listen,
        ensemble_dir: a.ensemble,
        coach_model: a.coach_model,
        level: a.level,
        cors: CorsConfig { origins: a.cors_origins },
    }))?;
    Ok(())
}
