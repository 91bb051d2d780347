//! The `fourthdown` command line.
//!
//! Every command validates its flags before doing any work, seeds all
//! randomness from flags, logs to standard error and writes data to files
//! or standard output. Commands that produce artifacts also write a run
//! manifest (`run.json` in output directories, `<file>.run.json` next to
//! single files). Usage errors exit with 2 and runtime errors with 1.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::bootstrap::GridMode;
use crate::engine::FourthDownState;

pub use manifest::{sha256_dir, sha256_file, RunManifest};

/// Environment variable naming a default configuration file.
pub const CONFIG_ENV: &str = "FOURTHDOWN_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "fourthdown", version, about = "Fourth-down decisions with bootstrap uncertainty")]
pub struct Cli {
    /// Fit configuration (TOML). Defaults to $FOURTHDOWN_CONFIG when set.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Maximum number of worker threads.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a play-by-play CSV into a validated dataset and a reject log.
    Ingest(IngestArgs),
    /// Fit the point decision model.
    Fit(FitArgs),
    /// Fit the model of actual coach decisions.
    FitCoach(FitCoachArgs),
    /// Fit a point model plus B bootstrap replicates.
    Bootstrap(BootstrapArgs),
    /// Recommend a decision for one fourth-down state.
    Recommend(RecommendArgs),
    /// Decision grid over yardlines and distances.
    Boundary(BoundaryArgs),
    /// Effect-size distribution and confidence shares over fourth downs.
    Overconfidence(OverconfidenceArgs),
    /// Agreement of coaches with confident recommendations.
    CoachEval(CoachEvalArgs),
    /// Stability of confidence classes across independent ensembles.
    Stability(StabilityArgs),
    /// Simulate games from the synthetic world.
    Simulate(SimulateArgs),
    /// Compare first-down win probability models on held-out games.
    Contest(ContestArgs),
    /// Serve recommendations over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, value_name = "PATH")]
    pub csv: PathBuf,
    /// TOML map from canonical field names to CSV headers.
    #[arg(long, value_name = "PATH")]
    pub colmap: Option<PathBuf>,
    /// Keep only these seasons, e.g. `2006-2021`.
    #[arg(long, value_parser = parse_u16_range)]
    pub seasons: Option<(u16, u16)>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Plays as `.jsonl` (from `ingest`) or as a CSV in the canonical schema.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Column map for CSV input.
    #[arg(long, value_name = "PATH")]
    pub colmap: Option<PathBuf>,
    #[arg(long, value_parser = parse_u16_range)]
    pub seasons: Option<(u16, u16)>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitCoachArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 200)]
    pub rounds: usize,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of replicates (odd).
    #[arg(long = "B", visible_alias = "b", default_value_t = 101)]
    pub b: usize,
    /// Fractional-weight temperature in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub fraction: f64,
    #[arg(long)]
    pub seed: u64,
    /// Ensemble directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Game context of a fourth down, everything except yardline and distance.
#[derive(Debug, Clone, Args)]
pub struct ContextArgs {
    /// Seconds left in the game.
    #[arg(long)]
    pub seconds: u32,
    /// Offense minus defense.
    #[arg(long, allow_hyphen_values = true)]
    pub score_diff: i32,
    /// Pre-game spread relative to the offense (negative = favored).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub spread: f64,
    #[arg(long, default_value_t = 44.0)]
    pub total_line: f64,
    #[arg(long, default_value_t = 3)]
    pub timeouts: u8,
    #[arg(long, default_value_t = 3)]
    pub def_timeouts: u8,
    #[arg(long)]
    pub receive_2h_ko: bool,
    #[arg(long)]
    pub home: bool,
    #[arg(long, default_value_t = 0)]
    pub total_score: u32,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub kq: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub pq: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub opp_kq: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub opp_pq: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub delta_tq_off: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub delta_tq_def: f64,
}

impl ContextArgs {
    pub fn state(&self, yardline: u8, ydstogo: u8) -> FourthDownState {
        FourthDownState {
            yardline,
            ydstogo,
            game_seconds_remaining: self.seconds,
            score_differential: self.score_diff,
            posteam_spread: self.spread,
            total_points_line: self.total_line,
            posteam_timeouts: self.timeouts,
            defteam_timeouts: self.def_timeouts,
            receive_2h_ko: self.receive_2h_ko,
            home: self.home,
            total_score: self.total_score,
            kq: self.kq,
            pq: self.pq,
            opp_kq: self.opp_kq,
            opp_pq: self.opp_pq,
            delta_tq_off: self.delta_tq_off,
            delta_tq_def: self.delta_tq_def,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long, value_name = "DIR")]
    pub ensemble: PathBuf,
    #[arg(long)]
    pub yardline: u8,
    #[arg(long)]
    pub ydstogo: u8,
    #[command(flatten)]
    pub context: ContextArgs,
    /// Confidence level of the effect-size interval.
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
    /// Coach model file; adds what coaches usually do.
    #[arg(long, value_name = "PATH")]
    pub coach_model: Option<PathBuf>,
    #[arg(long, default_value_t = crate::service::DEFAULT_SEASON)]
    pub season: u16,
    /// Also write the bootstrapped gains as CSV `replicate,decision,gain`.
    #[arg(long, value_name = "PATH")]
    pub gains_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    #[arg(long, value_name = "DIR")]
    pub ensemble: PathBuf,
    #[command(flatten)]
    pub context: ContextArgs,
    #[arg(long, default_value = "1-99", value_parser = parse_u8_range)]
    pub yardlines: (u8, u8),
    #[arg(long, default_value = "1-10", value_parser = parse_u8_range)]
    pub ydstogo: (u8, u8),
    #[arg(long, default_value = "point", value_parser = parse_mode)]
    pub mode: GridMode,
    /// Grid CSV `y,z,best,effect_size,boot_pct`.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OverconfidenceArgs {
    #[arg(long, value_name = "DIR")]
    pub ensemble: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CoachEvalArgs {
    #[arg(long, value_name = "DIR")]
    pub ensemble: PathBuf,
    /// Coach model whose importance table is exported alongside.
    #[arg(long, value_name = "PATH")]
    pub coach_model: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
    /// Per-coach CSV `coach,confident_plays,agreement`.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Ensemble sizes, comma separated (odd).
    #[arg(long, value_delimiter = ',', default_value = "11,51,101")]
    pub bs: Vec<usize>,
    /// Independent ensembles per size.
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub fraction: f64,
    /// Fourth-down plays to evaluate (a seeded subsample).
    #[arg(long, default_value_t = 200)]
    pub max_states: usize,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// World configuration (TOML); defaults to the built-in world.
    #[arg(long, value_name = "PATH")]
    pub world: Option<PathBuf>,
    #[arg(long)]
    pub games: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output CSV in the canonical play schema.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ContestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Train, tune and test game fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_value = "0.5,0.25,0.25")]
    pub split: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "DIR")]
    pub ensemble: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub coach_model: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Allowed browser origin; repeat for several. Any origin when absent.
    #[arg(long = "cors-origin", value_name = "ORIGIN")]
    pub cors_origins: Vec<String>,
    #[arg(long, default_value_t = crate::service::DEFAULT_LEVEL)]
    pub level: f64,
}

fn parse_range<T: std::str::FromStr + PartialOrd + Copy>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s.split_once('-').unwrap_or((s, s));
    let lo: T = a.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
    let hi: T = b.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
    if lo > hi {
        return Err(format!("range {s:?} is empty"));
    }
    Ok((lo, hi))
}

fn parse_u16_range(s: &str) -> Result<(u16, u16), String> {
    parse_range(s)
}

fn parse_u8_range(s: &str) -> Result<(u8, u8), String> {
    parse_range(s)
}

fn parse_mode(s: &str) -> Result<GridMode, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

/// Parses `args` (including the program name), runs the command and maps
/// the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code.clamp(0, 255) as u8);
        }
    };
    let level = if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<commands::UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
