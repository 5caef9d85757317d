//! The `affectline` command line: one subcommand per pipeline stage, all
//! reading and writing artifacts under a single run directory.

use std::collections::BTreeMap;
use std::path::PathBuf;

use affectline_core::rundir::RunDir;
use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod tables;

use config::RunConfig;
use error::{CliResult, EXIT_CONFIG};
use manifest::{Manifest, RunLock};

#[derive(Debug, Parser)]
#[command(name = "affectline", version, about = "Emotion analytics over dated social-media posts")]
pub struct Cli {
    /// Directory holding every artifact of one run.
    #[arg(long, global = true, default_value = "run")]
    pub run_dir: PathBuf,
    /// Global seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Emit logs as JSON lines.
    #[arg(long, global = true)]
    pub json_logs: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with known truth under synth/.
    Synth {
        #[arg(long, default_value_t = 30)]
        days: usize,
        #[arg(long, default_value_t = 1000)]
        posts_per_day: usize,
    },
    /// Validate a post file into corpus.jsonl and partition it by day.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Rank tf-idf candidates, or record the curated seed list.
    SeedKeywords {
        /// Target documents, one per line.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Background documents, one per line; defaults to the corpus.
        #[arg(long)]
        background: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
        /// Comma-separated curated terms.
        #[arg(long, value_delimiter = ',')]
        select: Vec<String>,
        /// Curated terms, one per line.
        #[arg(long)]
        from_file: Option<PathBuf>,
    },
    /// List the posts matched by the current keyword list.
    Harvest {
        #[arg(long)]
        keywords: Option<PathBuf>,
    },
    /// Advance the bootstrap loop until it needs labels or finishes.
    Bootstrap {
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long)]
        sample: Option<usize>,
        /// Replace the keyword list each round instead of merging.
        #[arg(long)]
        replace_keywords: bool,
    },
    /// Train the six emotion heads on the emotion labels.
    TrainEmotion,
    /// Predict relevance and emotion probabilities for every post.
    Classify,
    /// Daily topic and emotion intensity series.
    Trends {
        #[arg(long)]
        smooth: Option<usize>,
    },
    /// Train the trigger tagger on the trigger labels.
    TrainTrigger {
        /// Dense per-token feature sidecar.
        #[arg(long)]
        dense: Option<PathBuf>,
    },
    /// Tag triggers in related posts and normalize them into mentions.
    TagTriggers {
        #[arg(long)]
        dense: Option<PathBuf>,
    },
    /// Fit one date-aware topic model per emotion; resumes checkpoints.
    FitTopics {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        /// Restrict to one emotion.
        #[arg(long)]
        emotion: Option<String>,
    },
    /// Top words and dates per topic.
    TopicReport {
        #[arg(long)]
        top_m: Option<usize>,
    },
    /// Mark topics kept or discarded.
    CurateTopics {
        #[arg(long)]
        emotion: String,
        #[arg(long, value_delimiter = ',')]
        discard: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        keep: Vec<usize>,
    },
    /// Daily subcategory series over the kept topics.
    SubcatTrends {
        #[arg(long)]
        smooth: Option<usize>,
    },
    /// Collect metrics into eval/summary.json.
    Eval,
    /// Run the annotation service.
    Serve {
        #[arg(long)]
        addr: Option<String>,
        /// `TOKEN=ANNOTATOR`, repeatable.
        #[arg(long)]
        token: Vec<String>,
        #[arg(long)]
        lease_secs: Option<i64>,
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long)]
        sample: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Ingest { .. } => "ingest",
            Command::SeedKeywords { .. } => "seed-keywords",
            Command::Harvest { .. } => "harvest",
            Command::Bootstrap { .. } => "bootstrap",
            Command::TrainEmotion => "train-emotion",
            Command::Classify => "classify",
            Command::Trends { .. } => "trends",
            Command::TrainTrigger { .. } => "train-trigger",
            Command::TagTriggers { .. } => "tag-triggers",
            Command::FitTopics { .. } => "fit-topics",
            Command::TopicReport { .. } => "topic-report",
            Command::CurateTopics { .. } => "curate-topics",
            Command::SubcatTrends { .. } => "subcat-trends",
            Command::Eval => "eval",
            Command::Serve { .. } => "serve",
        }
    }
}

/// What a stage read and wrote, for the manifest.
#[derive(Debug, Default)]
pub struct StageIo {
    pub args: BTreeMap<String, String>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl StageIo {
    pub fn new(inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Self {
        Self { args: BTreeMap::new(), inputs, outputs }
    }

    pub fn arg(&mut self, k: &str, v: impl ToString) {
        self.args.insert(k.to_string(), v.to_string());
    }
}

pub struct Ctx {
    pub dir: RunDir,
    pub cfg: RunConfig,
}

fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Bootstrap { rounds, sample, replace_keywords } => {
            if let Some(r) = rounds {
                cfg.bootstrap.rounds = *r;
            }
            if let Some(s) = sample {
                cfg.bootstrap.sample = *s;
            }
            cfg.bootstrap.replace_keywords |= replace_keywords;
        }
        Command::Serve { rounds, sample, lease_secs, addr, .. } => {
            if let Some(r) = rounds {
                cfg.bootstrap.rounds = *r;
            }
            if let Some(s) = sample {
                cfg.bootstrap.sample = *s;
            }
            if let Some(l) = lease_secs {
                cfg.serve.lease_secs = *l;
            }
            if let Some(a) = addr {
                cfg.serve.addr = a.clone();
            }
        }
        Command::SeedKeywords { top_k: Some(k), .. } => cfg.bootstrap.top_k = *k,
        Command::FitTopics { k, iters, .. } => {
            if let Some(k) = k {
                cfg.topics.k = *k;
            }
            if let Some(i) = iters {
                cfg.topics.iters = *i;
            }
        }
        Command::TopicReport { top_m: Some(m) } => cfg.topics.top_m = *m,
        Command::Trends { smooth: Some(w) } | Command::SubcatTrends { smooth: Some(w) } => cfg.trends.smooth = Some(*w),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_logging(json: bool) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let builder = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr);
    let _ = if json {
        builder.json().try_init()
    } else {
        builder.try_init()
    };
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let cfg = resolve_config(&cli)?;
    let ctx = Ctx {
        dir: RunDir::new(&cli.run_dir),
        cfg,
    };
    let _lock = RunLock::acquire(&ctx.dir)?;
    let stage = cli.command.name();
    let io = commands::dispatch(&ctx, cli.command)?;
    let mut manifest = Manifest::load_or_new(&ctx.dir, &ctx.cfg)?;
    manifest.record(&ctx.dir, stage, io.args, &io.inputs, &io.outputs)?;
    manifest.save(&ctx.dir)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.json_logs);
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
