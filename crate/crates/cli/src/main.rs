use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pbvote_core::agents::{BackendKind, MockScales, DEFAULT_MODEL, ENV_MODEL};
use pbvote_core::aggregation::tally;
use pbvote_core::catalog::{load_catalog, ListTreatment};
use pbvote_core::harness::{
    compare_runs, load_human_baseline, load_run, load_run_catalog, report, run_and_persist, synthetic_survey,
    ExperimentConfig, HarnessError, MatrixSpec, VoteGroup, BASELINE_SURVEY, BASELINE_VOTES,
};
use pbvote_core::persona::{build_persona, load_survey, write_survey};
use pbvote_core::prompting::VotingMethod;

#[derive(Parser)]
#[command(
    name = "pbvote",
    version,
    about = "Participatory-budgeting voting experiments with LLM and mock agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a project catalog CSV.
    ValidateCatalog { csv: PathBuf },
    /// Print one persona per survey row as JSON lines.
    BuildPersonas { survey: PathBuf },
    /// Run one treatment cell into a new run directory.
    Run(RunArgs),
    /// Run a treatment grid, one run directory per cell.
    Matrix(MatrixArgs),
    /// Print the collective tally of a run as CSV.
    Aggregate { dir: PathBuf },
    /// Compare two runs and print the report as JSON.
    Compare { dir_a: PathBuf, dir_b: PathBuf },
    /// Write the report tables for one or more runs.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Directory holding votes.csv and survey.csv.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Write a synthetic survey for mock persona runs.
    SynthSurvey {
        #[arg(long, default_value_t = 180)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct CommonArgs {
    #[arg(long, default_value = "mock")]
    backend: BackendKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "n", default_value_t = 180)]
    n_agents: usize,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    survey: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Directory with prompt template overrides.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Recorded cache for the replay backend.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Model name; defaults to $PBVOTE_MODEL for the remote backend.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 8)]
    parallelism: usize,
    /// Mock: category weight at a score of 100.
    #[arg(long, default_value_t = MockScales::default().category)]
    mock_category: f64,
    /// Mock: home-district bonus at full importance.
    #[arg(long, default_value_t = MockScales::default().district)]
    mock_district: f64,
    /// Mock: cost aversion at full importance.
    #[arg(long, default_value_t = MockScales::default().cost)]
    mock_cost: f64,
    /// Mock: ignore stated importance levels.
    #[arg(long)]
    mock_flat: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "kapp")]
    method: VotingMethod,
    #[arg(long = "temp", default_value_t = 1.0)]
    temperature: f64,
    #[arg(long)]
    persona: bool,
    #[arg(long)]
    cot: bool,
    #[arg(long, default_value = "orig")]
    treatment: ListTreatment,
    /// Replay a recorded run directory: reuse its config and cache.
    #[arg(long, conflicts_with_all = ["method", "temperature", "persona", "cot", "treatment"])]
    from: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct MatrixArgs {
    /// Comma-separated method codes.
    #[arg(long, value_delimiter = ',', default_value = "appr,kapp,cumu,rank")]
    methods: Vec<VotingMethod>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2")]
    temps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "orig,revorder,revid")]
    treatments: Vec<ListTreatment>,
    /// Persona settings to include.
    #[arg(long, value_delimiter = ',', default_value = "false,true")]
    personas: Vec<bool>,
    /// CoT settings to include for k-approval.
    #[arg(long, value_delimiter = ',', default_value = "false,true")]
    cot: Vec<bool>,
    #[command(flatten)]
    common: CommonArgs,
}

/// Inputs are stored absolute so a run directory stays usable from anywhere.
fn absolute(path: &Option<PathBuf>) -> Option<PathBuf> {
    path.as_ref()
        .map(|p| std::fs::canonicalize(p).unwrap_or_else(|_| p.clone()))
}

fn base_config(c: &CommonArgs) -> ExperimentConfig {
    let model = c.model.clone().unwrap_or_else(|| match c.backend {
        BackendKind::Remote => std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string()),
        _ => "mock".to_string(),
    });
    ExperimentConfig {
        n_agents: c.n_agents,
        backend: c.backend,
        seed: c.seed,
        survey_path: absolute(&c.survey),
        catalog_path: absolute(&c.catalog),
        templates_dir: absolute(&c.templates),
        cache_path: absolute(&c.cache),
        model,
        parallelism: c.parallelism,
        mock_scales: MockScales {
            category: c.mock_category,
            district: c.mock_district,
            cost: c.mock_cost,
            importance_weighted: !c.mock_flat,
        },
        ..ExperimentConfig::default()
    }
}

fn execute(config: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    match run_and_persist(config, out) {
        Ok((run, dir)) => {
            eprintln!(
                "{}: {} ballots, {} discarded",
                run.label(),
                run.ballots.len(),
                run.discarded
            );
            Ok(dir)
        }
        Err(HarnessError::BackendFailure {
            agent_index,
            run_dir: Some(dir),
            source,
        }) => bail!(
            "backend failed at agent {agent_index}: {source}; partial run kept in {}",
            dir.display()
        ),
        Err(e) => Err(e.into()),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let config = match &args.from {
        Some(dir) => {
            let recorded = load_run(dir).with_context(|| format!("loading {}", dir.display()))?;
            ExperimentConfig {
                backend: BackendKind::Replay,
                cache_path: Some(dir.join("cache.jsonl")),
                parallelism: args.common.parallelism,
                ..recorded.config
            }
        }
        None => ExperimentConfig {
            method: args.method,
            temperature: args.temperature,
            persona: args.persona,
            cot: args.cot,
            treatment: args.treatment,
            ..base_config(&args.common)
        },
    };
    let dir = execute(&config, &args.common.out)?;
    println!("{}", dir.display());
    Ok(())
}

fn cmd_matrix(args: MatrixArgs) -> Result<()> {
    let spec = MatrixSpec {
        methods: args.methods,
        personas: args.personas,
        cot: args.cot,
        temperatures: args.temps,
        treatments: args.treatments,
    };
    let cells = spec.expand(&base_config(&args.common));
    eprintln!("{} cells", cells.len());
    for config in &cells {
        let dir = execute(config, &args.common.out)?;
        println!("{}", dir.display());
    }
    Ok(())
}

fn cmd_aggregate(dir: &Path) -> Result<()> {
    let run = load_run(dir)?;
    let catalog = load_run_catalog(&run)?;
    let result = tally::<f64>(&run.ballots, &catalog)?;
    let stdout = io::stdout();
    result.write_csv(BufWriter::new(stdout.lock()))?;
    Ok(())
}

fn cmd_compare(a: &Path, b: &Path) -> Result<()> {
    let ra = load_run(a)?;
    let rb = load_run(b)?;
    let catalog = load_run_catalog(&ra)?;
    let report = compare_runs(&VoteGroup::from_run(&ra), &VoteGroup::from_run(&rb), &catalog)?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_report(dirs: &[PathBuf], baseline: Option<&Path>, out: &Path) -> Result<()> {
    let runs = dirs
        .iter()
        .map(|d| load_run(d).with_context(|| format!("loading {}", d.display())))
        .collect::<Result<Vec<_>>>()?;
    let baseline = match baseline {
        Some(dir) => {
            let catalog = load_run_catalog(&runs[0])?;
            Some(load_human_baseline(
                &dir.join(BASELINE_VOTES),
                &dir.join(BASELINE_SURVEY),
                &catalog,
            )?)
        }
        None => None,
    };
    for path in report(&runs, baseline.as_ref(), out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::ValidateCatalog { csv } => {
            let file = File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
            let catalog = load_catalog(file)?;
            println!("ok: {} projects", catalog.len());
        }
        Command::BuildPersonas { survey } => {
            let file = File::open(&survey).with_context(|| format!("opening {}", survey.display()))?;
            let mut out = io::stdout().lock();
            for record in load_survey(file)? {
                serde_json::to_writer(&mut out, &build_persona(&record)?)?;
                writeln!(out)?;
            }
        }
        Command::Run(args) => cmd_run(args)?,
        Command::Matrix(args) => cmd_matrix(args)?,
        Command::Aggregate { dir } => cmd_aggregate(&dir)?,
        Command::Compare { dir_a, dir_b } => cmd_compare(&dir_a, &dir_b)?,
        Command::Report { dirs, baseline, out } => cmd_report(&dirs, baseline.as_deref(), &out)?,
        Command::SynthSurvey { n, seed, out } => {
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_survey(&synthetic_survey(n, seed), file)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
