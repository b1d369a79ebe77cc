//! `lffc` command line: episodes, learning campaigns, index reports and plots.
//!
//! Exit status is 0 on success, 1 when the work itself fails (bad values,
//! malformed files) and 2 for usage errors or input files that do not exist.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use lffc_core::harness::{EPISODE_FILE, MANIFEST_FILE, SUMMARY_FILE};
use lffc_core::metrics::{build_report, IndexReport};
use lffc_core::plot::emit_plots;
use lffc_core::{
    resume_learning, run_learning_in, simulate_feedback_only, EpisodeResult, ScenarioConfig,
};

pub const CONFIG_DIR_VAR: &str = "LFFC_CONFIG_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "lffc",
    version,
    about = "Learning feedforward control on a refrigeration-cycle surrogate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one feedback-only episode and write episode.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a learning campaign; continues one already present in --out.
    Learn {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        iterations: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a candidate episode against a reference episode.
    Compare {
        /// Episode CSV, simulate output directory, or campaign directory (last iteration).
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Where to write the report CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score an episode against the config's feedback-only episode.
    Indices {
        #[arg(long)]
        episode: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Draw J, tracking and effort charts for a campaign.
    Plot {
        campaign_dir: PathBuf,
        /// An .svg file for the J chart (siblings get the others) or a directory.
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<lffc_core::Error> for Failure {
    fn from(e: lffc_core::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn must_exist(path: &Path, what: &str) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{what} not found: {}",
            path.display()
        )))
    }
}

fn config_path(raw: &Path) -> PathBuf {
    match std::env::var_os(CONFIG_DIR_VAR) {
        Some(dir) if raw.is_relative() && !dir.is_empty() => PathBuf::from(dir).join(raw),
        _ => raw.to_path_buf(),
    }
}

fn load_config(raw: &Path) -> Result<ScenarioConfig, Failure> {
    let path = config_path(raw);
    must_exist(&path, "config file")?;
    Ok(ScenarioConfig::load(&path)?)
}

fn output_dir(out: Option<PathBuf>, scenario: &ScenarioConfig) -> Result<PathBuf, Failure> {
    out.or_else(|| scenario.output_dir.clone())
        .ok_or_else(|| Failure::Usage("no --out given and the config sets no output_dir".into()))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Domain(format!("{}: {e}", dir.display())))
}

/// Resolves an episode argument: a CSV file, a directory holding
/// episode.csv, or a campaign directory (its last iteration).
fn load_episode(path: &Path) -> Result<EpisodeResult, Failure> {
    must_exist(path, "episode")?;
    if path.is_file() {
        return Ok(EpisodeResult::load_csv(path)?);
    }
    if path.join(SUMMARY_FILE).is_file() {
        let rows = lffc_core::harness::read_summary(path)?;
        let last = rows[rows.len() - 1].0;
        let file = path.join(format!("iter_{last:03}")).join(EPISODE_FILE);
        must_exist(&file, "episode")?;
        return Ok(EpisodeResult::load_csv(&file)?);
    }
    let file = path.join(EPISODE_FILE);
    must_exist(&file, "episode")?;
    Ok(EpisodeResult::load_csv(&file)?)
}

fn simulate(config: &Path, out: Option<PathBuf>) -> Outcome {
    let scenario = load_config(config)?;
    let dir = output_dir(out, &scenario)?;
    let episode = simulate_feedback_only(&scenario)?;
    create_dir(&dir)?;
    let path = dir.join(EPISODE_FILE);
    episode.save_csv(&path)?;
    let [n, av] = episode.feedback_effort();
    println!("wrote {}", path.display());
    println!("feedback effort: N {n:.6}, A_v {av:.6}");
    Ok(())
}

fn learn(config: &Path, iterations: usize, out: Option<PathBuf>) -> Outcome {
    let scenario = load_config(config)?;
    let dir = output_dir(out, &scenario)?;
    let record = if dir.join(MANIFEST_FILE).is_file() {
        resume_learning(&scenario, &dir, iterations)?
    } else {
        create_dir(&dir)?;
        run_learning_in(&scenario, iterations, Some(&dir))?
    };
    println!("iteration  J          effort_N      effort_Av");
    for e in &record.entries {
        println!(
            "{:>9}  {:<9.6}  {:<12.3}  {:.3}",
            e.iteration, e.j, e.feedback_effort[0], e.feedback_effort[1]
        );
    }
    println!("summary: {}", dir.join(SUMMARY_FILE).display());
    Ok(())
}

fn report_out(report: &IndexReport, out: Option<&Path>) -> Outcome {
    println!("{report}");
    if let Some(path) = out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        let text = format!("{}\n{}\n", IndexReport::csv_header(), report.csv_row());
        fs::write(path, text).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
    } else {
        println!("{}", IndexReport::csv_header());
        println!("{}", report.csv_row());
    }
    Ok(())
}

fn compare(candidate: &Path, reference: &Path, config: &Path, out: Option<PathBuf>) -> Outcome {
    let scenario = load_config(config)?;
    let cand = load_episode(candidate)?;
    let refr = load_episode(reference)?;
    let report = lffc_core::compare(&cand, &refr, &scenario.events, &scenario.weights)?;
    report_out(&report, out.as_deref())
}

fn indices(episode: &Path, config: &Path) -> Outcome {
    let scenario = load_config(config)?;
    let ep = load_episode(episode)?;
    let reference = simulate_feedback_only(&scenario)?;
    let report = build_report(
        (&ep.e, &ep.u),
        (&reference.e, &reference.u),
        &scenario.events,
        &scenario.weights,
    )?;
    report_out(&report, None)
}

fn plot(campaign_dir: &Path, out: &Path) -> Outcome {
    must_exist(campaign_dir, "campaign directory")?;
    must_exist(&campaign_dir.join(SUMMARY_FILE), "campaign summary")?;
    let is_file = out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("svg"));
    let dir = if is_file {
        out.parent().unwrap_or(Path::new(""))
    } else {
        out
    };
    if !dir.as_os_str().is_empty() {
        create_dir(dir)?;
    }
    for p in emit_plots(campaign_dir, out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::Learn {
            config,
            iterations,
            out,
        } => learn(&config, iterations as usize, out),
        Command::Compare {
            candidate,
            reference,
            config,
            out,
        } => compare(&candidate, &reference, &config, out),
        Command::Indices { episode, config } => indices(&episode, &config),
        Command::Plot { campaign_dir, out } => plot(&campaign_dir, &out),
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("lffc: {msg}");
            2
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("lffc: {msg}");
            1
        }
    }
}
