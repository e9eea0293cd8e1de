use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use etn_forecast::config::Config;
use etn_forecast::domain::MonthIndex;
use etn_forecast::ewa::SeriesChoice;
use etn_forecast::pipeline::{self, CycleArtifacts, IngestArtifact};
use etn_forecast::store::CycleStore;
use etn_forecast::synth::{self, ScenarioSpec};
use etn_forecast::{ingest, report, Error, Result};

#[derive(Parser)]
#[command(
    name = "etn-forecast",
    version,
    about = "Gross-returns forecasting and early-warning cycles"
)]
struct Cli {
    /// Log stage details to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct WorkDir {
    /// Directory holding stage artifacts.
    #[arg(long, default_value = "etn-work")]
    work: PathBuf,
}

#[derive(Args, Clone)]
struct Inputs {
    #[arg(long)]
    history: PathBuf,
    #[arg(long)]
    ga: PathBuf,
    /// Generation to forecast.
    #[arg(long)]
    generation: String,
    /// Cycle month, YYYY-MM. Data from this month on is ignored.
    #[arg(long)]
    cycle: MonthIndex,
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy)]
enum Select {
    BestFit,
    Lci,
    Uci,
}

impl From<Select> for SeriesChoice {
    fn from(s: Select) -> SeriesChoice {
        match s {
            Select::BestFit => SeriesChoice::BestFit,
            Select::Lci => SeriesChoice::Lci,
            Select::Uci => SeriesChoice::Uci,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load history and GA calendar and fix the cycle.
    Ingest {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        work: WorkDir,
    },
    /// Screen and repair outliers.
    Prepare(WorkDir),
    /// Genealogy match, features, correlation and predictor selection.
    Analyze(WorkDir),
    /// Fit and rank the model zoo on the analog generation.
    Train(WorkDir),
    /// Forecast the window with the best model.
    Forecast(WorkDir),
    /// Apply trend rescaling and causal adjustments.
    Adjust(WorkDir),
    /// Compare the previous stored cycle with actuals.
    Ewa {
        #[command(flatten)]
        work: WorkDir,
        /// Cycle store directory (default: <work>/cycles).
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Write the report CSV from the stage artifacts.
    Report {
        #[command(flatten)]
        work: WorkDir,
        /// Report path (default: <work>/report.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic scenario with known truth.
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Scenario TOML; its seed is replaced by --seed.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage for one cycle and record the planner's selection.
    RunCycle {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        work: WorkDir,
        #[arg(long, default_value = "best_fit", value_parser = parse_select)]
        select: Select,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default configuration as TOML.
    Config,
}

fn parse_select(s: &str) -> std::result::Result<Select, String> {
    match s {
        "best_fit" | "best-fit" => Ok(Select::BestFit),
        "lci" => Ok(Select::Lci),
        "uci" => Ok(Select::Uci),
        _ => Err(format!("`{s}` is not one of best_fit, lci, uci")),
    }
}

const INGEST: &str = "ingest.json";
const PREPARED: &str = "prepared.json";
const ANALYSIS: &str = "analysis.json";
const TRAIN: &str = "train.json";
const FORECAST: &str = "forecast.json";
const ADJUSTED: &str = "adjusted.json";
const EWA: &str = "ewa.json";

fn read_json<T: DeserializeOwned>(work: &Path, name: &str) -> Result<T> {
    let path = work.join(name);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(work: &Path, name: &str, value: &T) -> Result<()> {
    std::fs::create_dir_all(work).map_err(|e| Error::io(work, e))?;
    let path = work.join(name);
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_ingest(inputs: &Inputs) -> Result<IngestArtifact> {
    let config = match &inputs.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let history = ingest::load_history(&inputs.history)?;
    let calendar = ingest::load_ga_calendar(&inputs.ga)?;
    pipeline::ingest(history, calendar, &inputs.generation, inputs.cycle, config)
}

fn store_at(work: &Path, store: Option<PathBuf>) -> CycleStore {
    CycleStore::new(store.unwrap_or_else(|| work.join("cycles")))
}

fn load_all(work: &Path) -> Result<CycleArtifacts> {
    Ok(CycleArtifacts {
        ingest: read_json(work, INGEST)?,
        prepared: read_json(work, PREPARED)?,
        analysis: read_json(work, ANALYSIS)?,
        train: read_json(work, TRAIN)?,
        forecast: read_json(work, FORECAST)?,
        adjusted: read_json(work, ADJUSTED)?,
        ewa: read_json(work, EWA)?,
    })
}

fn best_line(a: &CycleArtifacts) -> String {
    match a.train.leaderboard.best() {
        Some(b) => format!("best {} (test MAPE {:.2}%)", b.algorithm, b.mape_best_fit),
        None => "no model".to_string(),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { inputs, work } => {
            let a = load_ingest(&inputs).map_err(|e| e.in_stage("ingest"))?;
            write_json(&work.work, INGEST, &a)?;
            println!(
                "ingest: {} generations, forecasting {} at {}, latest data {}",
                a.series.len(),
                a.generation,
                a.cycle,
                a.latest_month
            );
        }
        Command::Prepare(w) => {
            let i: IngestArtifact = read_json(&w.work, INGEST)?;
            let p = pipeline::prepare(&i).map_err(|e| e.in_stage("prepare"))?;
            write_json(&w.work, PREPARED, &p)?;
            let flagged: usize = p
                .generations
                .iter()
                .flat_map(|g| &g.outliers)
                .map(|o| o.flagged.len())
                .sum();
            println!(
                "prepare: {} generations screened, {flagged} outlier months repaired",
                p.generations.len()
            );
        }
        Command::Analyze(w) => {
            let i: IngestArtifact = read_json(&w.work, INGEST)?;
            let p = read_json(&w.work, PREPARED)?;
            let a = pipeline::analyze(&i, &p).map_err(|e| e.in_stage("analyze"))?;
            write_json(&w.work, ANALYSIS, &a)?;
            println!(
                "analyze: analog {} (score {:.3}, shift {:+}), predictors {}",
                a.genealogy.generation,
                a.genealogy.score,
                a.shift,
                a.selected.join(", ")
            );
        }
        Command::Train(w) => {
            let i: IngestArtifact = read_json(&w.work, INGEST)?;
            let a = read_json(&w.work, ANALYSIS)?;
            let t = pipeline::train(&i, &a).map_err(|e| e.in_stage("train"))?;
            write_json(&w.work, TRAIN, &t)?;
            let best = t
                .leaderboard
                .best()
                .map(|b| format!("{} at {:.2}%", b.algorithm, b.mape_best_fit));
            println!(
                "train: {} models ranked, {} failed, best {}",
                t.leaderboard.rows.len(),
                t.failures.len(),
                best.unwrap_or_else(|| "none".into())
            );
        }
        Command::Forecast(w) => {
            let i: IngestArtifact = read_json(&w.work, INGEST)?;
            let a = read_json(&w.work, ANALYSIS)?;
            let t = read_json(&w.work, TRAIN)?;
            let f = pipeline::forecast(&i, &a, &t).map_err(|e| e.in_stage("forecast"))?;
            write_json(&w.work, FORECAST, &f)?;
            let total: f64 = f.forecast.best_fit.iter().sum();
            println!(
                "forecast: {} months from {}, total best fit {total:.1}",
                f.forecast.months.len(),
                f.forecast.months.start
            );
        }
        Command::Adjust(w) => {
            let i: IngestArtifact = read_json(&w.work, INGEST)?;
            let a = read_json(&w.work, ANALYSIS)?;
            let f = read_json(&w.work, FORECAST)?;
            let adj = pipeline::adjust(&i, &a, &f).map_err(|e| e.in_stage("adjust"))?;
            write_json(&w.work, ADJUSTED, &adj)?;
            println!("adjust: {} adjustments applied", adj.applied.len());
        }
        Command::Ewa { work, store } => {
            let i: IngestArtifact = read_json(&work.work, INGEST)?;
            let adj = read_json(&work.work, ADJUSTED)?;
            let store = store_at(&work.work, store);
            let e = (|| {
                let prev = store.load_previous_cycle(&i.generation, i.cycle)?;
                let hist = store.history_before(&i.generation, i.cycle)?;
                pipeline::ewa_stage(&i, &adj, prev.as_ref(), &hist)
            })()
            .map_err(|e| e.in_stage("ewa"))?;
            write_json(&work.work, EWA, &e)?;
            println!(
                "ewa: {}, alert {}, recommendation {}",
                e.report.status.name(),
                e.report.alert.name(),
                e.report.recommendation.name()
            );
        }
        Command::Report { work, out } => {
            let a = load_all(&work.work)?;
            let text = report::emit_report(&a).map_err(|e| e.in_stage("report"))?;
            let out = out.unwrap_or_else(|| work.work.join("report.csv"));
            write_file(&out, &text)?;
            println!("report: {} written, {}", out.display(), best_line(&a));
        }
        Command::Synth { seed, spec, out } => {
            let mut s = match &spec {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    toml::from_str::<ScenarioSpec>(&text)
                        .map_err(|e| Error::validation(format!("{}: {e}", p.display())))?
                }
                None => ScenarioSpec::default(),
            };
            s.seed = seed;
            let sc = synth::generate(&s)?;
            ingest::write_history(&out.join("history.csv"), &sc.series)?;
            ingest::write_ga_calendar(&out.join("ga.csv"), &sc.calendar)?;
            write_json(&out.join("truth"), "scenario.json", &sc)?;
            let last = s.name_of(s.generations - 1);
            println!(
                "synth: {} generations in {}; try --generation {last} --cycle {}",
                s.generations,
                out.display(),
                s.data_end()
            );
        }
        Command::RunCycle {
            inputs,
            work,
            select,
            store,
            out,
        } => {
            let i = load_ingest(&inputs).map_err(|e| e.in_stage("ingest"))?;
            let store = store_at(&work.work, store);
            let a = pipeline::run_stages(i, Some(&store))?;
            write_json(&work.work, INGEST, &a.ingest)?;
            write_json(&work.work, PREPARED, &a.prepared)?;
            write_json(&work.work, ANALYSIS, &a.analysis)?;
            write_json(&work.work, TRAIN, &a.train)?;
            write_json(&work.work, FORECAST, &a.forecast)?;
            write_json(&work.work, ADJUSTED, &a.adjusted)?;
            write_json(&work.work, EWA, &a.ewa)?;
            let text = report::emit_report(&a).map_err(|e| e.in_stage("report"))?;
            let out = out.unwrap_or_else(|| work.work.join("report.csv"));
            write_file(&out, &text)?;
            let rec = pipeline::record_cycle(&store, &a, select.into())
                .map_err(|e| e.in_stage("record"))?;
            println!(
                "run-cycle: {} {} {}, ewa {}, report {}, recorded {}",
                rec.generation.name,
                rec.cycle_month,
                best_line(&a),
                a.ewa.report.status.name(),
                out.display(),
                rec.planner_selected.name()
            );
        }
        Command::Config => print!("{}", Config::default().to_toml()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
