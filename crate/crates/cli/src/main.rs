//! `evolvid`: synthesize flight data, train coefficient models, evaluate
//! TIC, extract derivatives and rank models.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evolvid_core::data::SplitSetting;
use evolvid_core::{CoeffKind, ModelType};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "evolvid", version, about = "Evolving quantum fuzzy identification of aerodynamic coefficient models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic flight-data CSV from linear coefficient models.
    Synth(SynthArgs),
    /// Train one model per requested coefficient.
    Train(TrainArgs),
    /// Compute test-partition TIC for a set of snapshots and rank the models.
    Eval(EvalArgs),
    /// Delta-method stability and control derivatives of trained snapshots.
    Derivatives(DerivativesArgs),
    /// Mean-rank the model columns of a TIC table CSV.
    Rank(RankArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON file with a list of coefficient parameter sets, or `table-v-defaults`.
    #[arg(long, default_value = "table-v-defaults")]
    pub params: String,
    /// Number of samples.
    #[arg(long, default_value_t = 2128, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Noise standard deviation relative to each coefficient's RMS.
    #[arg(long, default_value_t = 0.01, value_parser = non_negative)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path; the manifest goes next to it as `<out>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug)]
pub enum CoeffSelection {
    All,
    One(CoeffKind),
}

impl CoeffSelection {
    pub fn kinds(self) -> Vec<CoeffKind> {
        match self {
            CoeffSelection::All => CoeffKind::ALL.to_vec(),
            CoeffSelection::One(k) => vec![k],
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// CL, CD, CM, CY, CR, CN or `all`.
    #[arg(long, default_value = "all", value_parser = parse_coeff_selection)]
    pub coeff: CoeffSelection,
    #[arg(long, default_value = "et2qfnn", value_parser = parse_model_type)]
    pub model: ModelType,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub setting: u8,
    /// Rule-growth vigilance, in (0, 1].
    #[arg(long, default_value_t = 0.65, value_parser = unit_interval_closed)]
    pub rho: f64,
    /// Lower/upper footprint width ratio, in (0, 1).
    #[arg(long, default_value_t = 0.8, value_parser = unit_interval_open)]
    pub delta1: f64,
    /// Kalman measurement-noise scale.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub eta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base output directory; results land in `<out>/<run-id>/`.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Snapshot files, `models` directories or run directories. Repeatable.
    #[arg(long, required = true, num_args = 1..)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub setting: u8,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DerivativesArgs {
    /// Snapshot files, `models` directories or run directories of one model type. Repeatable.
    #[arg(long, required = true, num_args = 1..)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Perturbation as a fraction of each input's training standard deviation.
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    pub perturb: f64,
    /// Split whose training partition supplies the input standard deviations.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub setting: u8,
    #[arg(long, alias = "out", default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// TIC table CSV with a `coeff` column followed by one column per model.
    #[arg(long)]
    pub table: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn split_setting(s: u8) -> SplitSetting {
    if s == 2 {
        SplitSetting::Setting2
    } else {
        SplitSetting::Setting1
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err("must be >= 0".into())
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be > 0".into())
    }
}

fn unit_interval_closed(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err("must lie in (0, 1]".into())
    }
}

fn unit_interval_open(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must lie in (0, 1)".into())
    }
}

fn parse_coeff_selection(s: &str) -> Result<CoeffSelection, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(CoeffSelection::All);
    }
    CoeffKind::ALL
        .into_iter()
        .find(|k| k.label().eq_ignore_ascii_case(s))
        .map(CoeffSelection::One)
        .ok_or_else(|| "expected one of CL, CD, CM, CY, CR, CN, all".into())
}

fn parse_model_type(s: &str) -> Result<ModelType, String> {
    s.parse().map_err(|_| "expected one of et2qfnn, et1qfnn, ols".into())
}

/// Worker count from `EVOLVID_THREADS`; `None` leaves rayon's default.
fn thread_cap() -> Result<Option<usize>, String> {
    match std::env::var("EVOLVID_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("EVOLVID_THREADS must be a positive integer, got '{v}'")),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => match thread_cap() {
            Ok(cap) => commands::train(&a, cap),
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(EXIT_USAGE);
            }
        },
        Command::Eval(a) => commands::eval(&a),
        Command::Derivatives(a) => commands::derivatives(&a),
        Command::Rank(a) => commands::rank(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
