use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use doccqa::adapter::{AdapterEndpoint, ADAPTER_ENV};
use doccqa::dataset::{
    load_collection, load_gt, load_keyword_overrides, load_questions, load_submissions, read_json,
    to_canonical_json, write_json, Collection, GT_FILE, QUESTIONS_FILE, RECORDS_FILE,
};
use doccqa::fixture::{generate_fixture, inject_answer_noise, FixtureSpec};
use doccqa::records::MissingFieldPolicy;
use doccqa::textspot::{KeywordExtractor, KeywordOverrides, LexiconExtractor};
use doccqa::{evaluate, Error, MetricReport, Pipeline, PipelineConfig, PipelineKind, Result, Submission};

#[derive(Parser, Debug)]
#[command(name = "doccqa", version, about = "Collection-level question answering over scanned forms")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// ANLS threshold applied to matched answer pairs
    #[arg(long, global = true, default_value_t = doccqa::DEFAULT_TAU)]
    tau: f64,
    /// Text-spotting relevance threshold (documents need confidence > theta)
    #[arg(long, global = true, default_value_t = doccqa::DEFAULT_THETA)]
    theta: f64,
    /// Compare answers without case folding
    #[arg(long, global = true)]
    case_sensitive: bool,
    /// Yes/No questions answer "Yes" whenever evidence exists, never "No"
    #[arg(long, global = true)]
    paper_literal: bool,
    /// Treat missing or invalid fields as failing every constraint
    #[arg(long, global = true)]
    strict_missing: bool,
    /// QA model endpoint: stub, stub:first, http(s)://..., or a command
    #[arg(long, global = true, env = ADAPTER_ENV)]
    adapter: Option<String>,
    /// Seconds to wait for each adapter reply
    #[arg(long, global = true, default_value_t = 60)]
    adapter_timeout: u64,
    /// Line grouping tolerance as a fraction of median token height
    #[arg(long, global = true, default_value_t = doccqa::context::DEFAULT_LINE_TOLERANCE)]
    line_tolerance: f64,
    /// JSON object mapping question ids to keyword lists
    #[arg(long, global = true)]
    keywords: Option<PathBuf>,
    /// Seed for fixture generation and noise injection
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of CPUs)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and cross-check a collection and its question/answer files
    Validate {
        dir: PathBuf,
        #[arg(long)]
        submissions: Option<PathBuf>,
    },
    /// Rank documents for every question
    Rank(RunArgs),
    /// Answer questions from existing rankings
    Answer {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        rankings: PathBuf,
    },
    /// Rank and answer in one go, optionally scoring the result
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Write a metric report here (needs ground truth)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score submissions against ground truth
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        submissions: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the JSON report instead of the table
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic collection with questions and ground truth
    Fixture {
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        docs: usize,
        /// JSON fixture spec; overrides --docs
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Fraction of answer-bearing records whose answers get corrupted
        #[arg(long)]
        noise: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Collection directory
    dir: PathBuf,
    /// textspot-adapter, records-adapter or records-records
    #[arg(long, default_value = "records-records")]
    pipeline: String,
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Use ground-truth evidence as the ranking
    #[arg(long)]
    gt_ranking: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

const DEFAULT_SEED: u64 = 7;

fn emit(out: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    match out {
        Some(path) => write_json(path, value),
        None => {
            let text = to_canonical_json(value)?;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn pipeline_config(g: &Global) -> Result<PipelineConfig> {
    Ok(PipelineConfig {
        theta: g.theta,
        case_fold: !g.case_sensitive,
        paper_literal: g.paper_literal,
        missing: if g.strict_missing {
            MissingFieldPolicy::Strict
        } else {
            MissingFieldPolicy::Lenient
        },
        line_tolerance: g.line_tolerance,
        adapter: g.adapter.as_deref().map(AdapterEndpoint::parse).transpose()?,
        adapter_timeout: Duration::from_secs(g.adapter_timeout),
    })
}

fn extractor(g: &Global) -> Result<Box<dyn KeywordExtractor>> {
    Ok(match &g.keywords {
        Some(path) => Box::new(KeywordOverrides {
            overrides: load_keyword_overrides(path)?,
            fallback: LexiconExtractor::default(),
        }),
        None => Box::new(LexiconExtractor::default()),
    })
}

fn log_warnings(collection: &Collection) {
    for w in &collection.warnings {
        log::warn!("{w}");
    }
}

enum Mode {
    Rank,
    Answer(PathBuf),
    Run(Option<PathBuf>),
}

fn run_pipeline(g: &Global, args: &RunArgs, mode: Mode) -> Result<()> {
    let kind: PipelineKind = args.pipeline.parse()?;
    let collection = load_collection(&args.dir)?;
    log_warnings(&collection);
    let questions_path = args.questions.clone().unwrap_or_else(|| args.dir.join(QUESTIONS_FILE));
    let questions = load_questions(&questions_path, &collection.schema)?;
    let gt_path = args.gt.clone().unwrap_or_else(|| args.dir.join(GT_FILE));
    let needs_gt = args.gt_ranking || matches!(mode, Mode::Run(Some(_)));
    let gt = if needs_gt { Some(load_gt(&gt_path, Some(&collection))?) } else { None };

    let keywords = extractor(g)?;
    let mut pipeline = Pipeline::new(kind, keywords.as_ref());
    pipeline.config = pipeline_config(g)?;
    if args.gt_ranking {
        pipeline.ground_truth = gt.as_deref();
    }
    let submissions = match &mode {
        Mode::Rank => pipeline.rank(&collection, &questions)?,
        Mode::Answer(rankings) => {
            let rankings: Vec<Submission> = load_submissions(rankings)?;
            pipeline.answer(&collection, &questions, &rankings)?
        }
        Mode::Run(_) => pipeline.run(&collection, &questions)?,
    };
    emit(args.out.as_deref(), &submissions)?;
    if let (Mode::Run(Some(report_path)), Some(gt)) = (&mode, &gt) {
        let report = evaluate(&submissions, gt, g.tau, !g.case_sensitive)?;
        write_json(report_path, &report)?;
        eprint!("{}", report.render_table());
    }
    Ok(())
}

fn validate(dir: &Path, submissions: Option<&Path>) -> Result<()> {
    let collection = load_collection(dir)?;
    log_warnings(&collection);
    let mut summary = format!(
        "{} documents, {} records, {} warnings",
        collection.documents.len(),
        collection.records.len(),
        collection.warnings.len()
    );
    let questions_path = dir.join(QUESTIONS_FILE);
    if questions_path.exists() {
        let questions = load_questions(&questions_path, &collection.schema)?;
        summary.push_str(&format!(", {} questions", questions.len()));
    }
    let gt_path = dir.join(GT_FILE);
    let gt = if gt_path.exists() { Some(load_gt(&gt_path, Some(&collection))?) } else { None };
    if let Some(gt) = &gt {
        summary.push_str(&format!(", {} ground-truth entries", gt.len()));
    }
    if let Some(path) = submissions {
        let subs = load_submissions(path)?;
        if let Some(gt) = &gt {
            evaluate(&subs, gt, doccqa::DEFAULT_TAU, true)?;
        }
        summary.push_str(&format!(", {} submissions", subs.len()));
    }
    println!("ok: {summary}");
    Ok(())
}

fn fixture(g: &Global, out: &Path, docs: usize, spec: Option<&Path>, noise: Option<f64>) -> Result<()> {
    let mut spec = match spec {
        Some(path) => read_json::<FixtureSpec>(path)?,
        None => FixtureSpec::new(docs, DEFAULT_SEED),
    };
    if let Some(seed) = g.seed {
        spec.seed = seed;
    }
    let fixture = generate_fixture(&spec)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    fixture.write(out)?;
    if let Some(fraction) = noise {
        let (noisy, changed) =
            inject_answer_noise(&fixture.raw_records, &fixture.questions, &fixture.schema, fraction, spec.seed)?;
        write_json(&out.join(RECORDS_FILE), &noisy)?;
        log::info!("corrupted answers in {changed} records");
    }
    println!(
        "wrote {} documents and {} questions to {}",
        fixture.documents.len(),
        fixture.questions.len(),
        out.display()
    );
    Ok(())
}

fn real_main(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Validate { dir, submissions } => validate(dir, submissions.as_deref()),
        Command::Rank(args) => run_pipeline(g, args, Mode::Rank),
        Command::Answer { run, rankings } => run_pipeline(g, run, Mode::Answer(rankings.clone())),
        Command::Run { run, report } => run_pipeline(g, run, Mode::Run(report.clone())),
        Command::Evaluate { gt, submissions, out, json } => {
            let gt = load_gt(gt, None)?;
            let subs = load_submissions(submissions)?;
            let report: MetricReport = evaluate(&subs, &gt, g.tau, !g.case_sensitive)?;
            if let Some(path) = out {
                write_json(path, &report)?;
            }
            if *json {
                emit(None, &report)
            } else {
                print!("{}", report.render_table());
                Ok(())
            }
        }
        Command::Fixture { out, docs, spec, noise } => fixture(g, out, *docs, spec.as_deref(), *noise),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
