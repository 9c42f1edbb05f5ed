//! `bdepi` command-line front end.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 numerical warning
//! (non-convergence; outputs are still written).

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimate::{self, CellOutcome, FitOptions};
use crate::io::{self, ResultDocument};
use crate::likelihood::PrevalenceSeries;
use crate::model::ModelSpec;
use crate::reproduction::{self, RtSeries};
use crate::survival::{Constraint, Family};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bdepi", version, about = "Birth-death model fitting for epidemic prevalence data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and report estimates, standard errors, AIC and R(t).
    Fit(FitArgs),
    /// Fit a grid of families and constraints and rank them by AIC.
    Compare(CompareArgs),
    /// R(t) with percentile bands from simulated sample paths.
    Rt(RtArgs),
    /// Simulate a prevalence series from a parameter file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Prevalence,
    Events,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "prevalence")]
    pub format: DataFormat,
    /// Last day of the prevalence series built from event records.
    #[arg(long)]
    pub horizon: Option<i64>,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// Root random seed (falls back to BDEPI_SEED, then 0).
    #[arg(long, env = "BDEPI_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "lomax")]
    pub family: String,
    #[arg(long, default_value = "full")]
    pub constraint: String,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Number of simplex starting points.
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    /// Result JSON path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated families.
    #[arg(long, default_value = "burr,loglogistic,lomax,paralogistic")]
    pub families: String,
    /// Comma-separated constraints.
    #[arg(long, default_value = "full,aft,pr,both")]
    pub constraints: String,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    /// AIC table as TSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full per-cell results as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RtArgs {
    /// Result JSON from `fit` (model and estimates).
    #[arg(long)]
    pub fit: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 500)]
    pub paths: usize,
    /// Percentile band level in percent.
    #[arg(long, default_value_t = 95.0)]
    pub level: f64,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// TSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON with `model` and `estimates` (a `fit` result works).
    #[arg(long)]
    pub params: PathBuf,
    /// Last simulated day; days run 0..=horizon.
    #[arg(long)]
    pub horizon: u32,
    #[arg(long, default_value_t = 1)]
    pub y_init: u64,
    #[command(flatten)]
    pub seed: SeedArgs,
    /// Prevalence CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Rt(args) => cmd_rt(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    }
}

fn load_series(args: &DataArgs) -> Result<PrevalenceSeries> {
    match args.format {
        DataFormat::Prevalence => io::read_prevalence_csv(&args.data),
        DataFormat::Events => io::events_to_prevalence(&io::read_events_csv(&args.data)?, args.horizon),
    }
}

fn emit(path: Option<&PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content)?,
        None => std::io::stdout().write_all(content.as_bytes())?,
    }
    Ok(())
}

fn fit_options(seed: u64, starts: usize) -> FitOptions {
    FitOptions {
        seed,
        starts: starts.max(1),
        ..FitOptions::default()
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let family: Family = args.family.parse()?;
    let constraint: Constraint = args.constraint.parse()?;
    let model = ModelSpec::new(family, constraint)?;
    let data = load_series(&args.data)?;
    let fit = estimate::fit(&model, &data, &fit_options(args.seed.seed, args.starts))?;
    let rt = reproduction::rt_series(&model, &fit.estimate, &data.steps())?;
    let summary = format!(
        "{model}: loglik={:.4} aic={:.4} crossing_day={}{}",
        fit.loglik,
        fit.aic,
        rt.threshold_crossing
            .map(|d| d.to_string())
            .unwrap_or_else(|| "none".to_string()),
        if fit.converged { "" } else { " (not converged)" }
    );
    let doc = ResultDocument::from_fit(&fit, Some(rt));
    emit(args.out.as_ref(), &doc.to_json()?)?;
    if args.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(if fit.converged { EXIT_OK } else { EXIT_NUMERICAL })
}

fn parse_list<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect()
}

/// Table with one row per family and one column per constraint.
pub fn format_aic_table(rows: &[estimate::ModelTableRow], families: &[Family], constraints: &[Constraint]) -> String {
    let mut out = String::from("family");
    for c in constraints {
        let _ = write!(out, "\t{}", c.cli_name());
    }
    out.push('\n');
    for &family in families {
        out.push_str(family.display_name());
        for &constraint in constraints {
            let cell = rows
                .iter()
                .find(|r| r.family == family && r.constraint == constraint)
                .map(|r| match &r.outcome {
                    CellOutcome::Fitted { fit } | CellOutcome::SameAsFull { fit } => format!("{:.4}", fit.aic),
                    CellOutcome::Inapplicable => "--".to_string(),
                    CellOutcome::Failed { .. } => "FAIL".to_string(),
                })
                .unwrap_or_default();
            let _ = write!(out, "\t{cell}");
        }
        out.push('\n');
    }
    out
}

pub fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    let families: Vec<Family> = parse_list(&args.families)?;
    let constraints: Vec<Constraint> = parse_list(&args.constraints)?;
    if families.is_empty() || constraints.is_empty() {
        return Err(Error::InvalidArgument("empty model grid".to_string()));
    }
    let data = load_series(&args.data)?;
    let rows = estimate::model_table(&families, &constraints, &data, &fit_options(args.seed.seed, args.starts));
    emit(args.out.as_ref(), &format_aic_table(&rows, &families, &constraints))?;
    if let Some(path) = &args.json {
        let mut json = serde_json::to_string_pretty(&rows)?;
        json.push('\n');
        std::fs::write(path, json)?;
    }
    let all_converged = rows.iter().filter_map(|r| r.fit()).all(|f| f.converged);
    Ok(if all_converged { EXIT_OK } else { EXIT_NUMERICAL })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".to_string())
}

/// TSV with columns `day, r, lower, upper`.
pub fn format_rt_tsv(rt: &RtSeries) -> String {
    let mut out = String::from("day\tr\tlower\tupper\n");
    for (j, p) in rt.points.iter().enumerate() {
        let band = rt.bands.as_ref().and_then(|b| b.get(j).copied().flatten());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            p.day,
            p.r,
            fmt_opt(band.map(|b| b.lower)),
            fmt_opt(band.map(|b| b.upper))
        );
    }
    out
}

pub fn cmd_rt(args: &RtArgs) -> Result<i32> {
    reproduction::validate_band_request(args.paths, args.level)?;
    let doc = ResultDocument::read(&args.fit)?;
    let model = doc.model_spec()?;
    let data = load_series(&args.data)?;
    let y_init = data.observations()[0].count;
    let rt = reproduction::rt_bands(
        &model,
        &doc.estimates,
        y_init,
        &data.days(),
        args.paths,
        args.level,
        args.seed.seed,
    )?;
    emit(args.out.as_ref(), &format_rt_tsv(&rt))?;
    Ok(EXIT_OK)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let doc = ResultDocument::read(&args.params)?;
    let model = doc.model_spec()?;
    if args.horizon < 1 {
        return Err(Error::InvalidArgument("horizon must be >= 1".to_string()));
    }
    let days: Vec<f64> = (0..=args.horizon).map(f64::from).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed.seed);
    let path = reproduction::simulate_path(&model, &doc.estimates, &days, args.y_init, &mut rng)?;
    let series = PrevalenceSeries::daily(&path)?;
    let mut buf = Vec::new();
    io::write_prevalence(&series, &mut buf)?;
    emit(args.out.as_ref(), &String::from_utf8(buf).expect("ascii output"))?;
    Ok(EXIT_OK)
}
