use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wice_cli::stages::{EmbedArgs, EvaluateArgs, ExtractArgs, Part, PreprocessArgs, SynthArgs, TrainArgs};
use wice_cli::{run_stage, CliError, ProviderKind, RunConfig, Stage, EXIT_OK, EXIT_USAGE};
use wice_core::gnn::Architecture;
use wice_core::training::SplitMode;

/// Web image context extraction: find the text on a page that describes its main image.
///
/// Exit codes: 0 success, 1 usage or configuration error, 2 data error
/// (missing prerequisite, lineage mismatch, error rate above the limit),
/// 3 numeric failure.
#[derive(Parser, Debug)]
#[command(name = "wice", version)]
struct Cli {
    /// TOML run configuration; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Largest tolerated fraction of failed or excluded items in a stage.
    #[arg(long, global = true, value_name = "RATE")]
    max_error_rate: Option<f64>,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus with a planted context paragraph per page.
    Synth(SynthCmd),
    /// Parse HTML pages into DOM graphs.
    Preprocess(PreprocessCmd),
    /// Embed every text of a graph file into an embedding cache.
    Embed(EmbedCmd),
    /// Train a graph network and write a checkpoint, metrics and the split.
    Train(TrainCmd),
    /// Score extraction methods on one part of a split.
    Evaluate(EvaluateCmd),
    /// Print the context chosen for one HTML page as JSON lines.
    Extract(ExtractCmd),
}

#[derive(Args, Debug)]
struct SynthCmd {
    /// Number of pages.
    #[arg(long)]
    pages: Option<usize>,
    /// Number of sites; pages are assigned round-robin.
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PreprocessCmd {
    /// Directory holding `{page_id}.html` files.
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Tab-separated page_id, site_id, url; defaults to DIR/manifest.tsv.
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Output graph file, one JSON record per line.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Tags to prune, one per line; replaces the built-in list.
    #[arg(long, value_name = "FILE")]
    denylist: Option<PathBuf>,
    /// Drop text leaves shorter than this many characters.
    #[arg(long)]
    min_text_chars: Option<usize>,
}

#[derive(Args, Debug)]
struct EmbedCmd {
    #[arg(long, value_name = "FILE")]
    graphs: PathBuf,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    /// Precomputed embedding cache, required with `--provider cache`.
    #[arg(long, value_name = "FILE")]
    cache: Option<PathBuf>,
    /// Embedding width of the hashed provider.
    #[arg(long)]
    dim: Option<usize>,
    /// Seed of the hashed provider.
    #[arg(long)]
    seed: Option<u64>,
    /// Output embedding cache.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainCmd {
    #[arg(long, value_name = "FILE")]
    graphs: PathBuf,
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,
    #[arg(long, value_parser = parse_split)]
    split: Option<SplitMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_arch)]
    arch: Option<Architecture>,
    /// Output checkpoint (the best epoch).
    #[arg(long, value_name = "CKPT")]
    out: PathBuf,
    /// Per-epoch losses, one JSON record per line.
    #[arg(long, value_name = "FILE")]
    metrics: PathBuf,
    /// Where to write the split; defaults to CKPT.split.json.
    #[arg(long, value_name = "FILE")]
    split_file: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[arg(long)]
    patience: Option<usize>,
    /// Continue from this checkpoint's weights, optimizer state and epoch.
    #[arg(long, value_name = "CKPT")]
    resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateCmd {
    #[arg(long, value_name = "FILE")]
    graphs: PathBuf,
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,
    /// Trained checkpoints, at most one per architecture.
    #[arg(long, value_name = "CKPT", num_args = 1..)]
    ckpt: Vec<PathBuf>,
    /// Comma-separated methods, or `all`.
    #[arg(long, value_name = "LIST")]
    methods: Option<String>,
    /// Split written by `train`.
    #[arg(long, value_name = "FILE")]
    split_file: PathBuf,
    /// Part of the split to score.
    #[arg(long, value_enum, default_value = "test")]
    part: Part,
    /// Largest wice loss counted as a good extraction in the summary.
    #[arg(long)]
    loss_threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-page results, one JSON record per line.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExtractCmd {
    #[arg(long, value_name = "CKPT")]
    ckpt: PathBuf,
    #[arg(long, value_name = "FILE")]
    html: PathBuf,
    /// Embedding cache for checkpoints not trained on the hashed provider.
    #[arg(long, value_name = "FILE")]
    cache: Option<PathBuf>,
    /// Print the K heaviest nodes instead of one.
    #[arg(long, value_name = "K")]
    top_k: Option<usize>,
    /// Print every node with at least this weight.
    #[arg(long, value_name = "W", conflicts_with = "top_k")]
    min_weight: Option<f64>,
}

fn parse_split(s: &str) -> Result<SplitMode, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_arch(s: &str) -> Result<Architecture, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn resolve(cli: Cli) -> Result<(Stage, RunConfig), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    set(&mut cfg.max_error_rate, cli.max_error_rate);
    let stage = match cli.command {
        Command::Synth(c) => {
            set(&mut cfg.pages, c.pages);
            set(&mut cfg.sites, c.sites);
            set(&mut cfg.seed, c.seed);
            Stage::Synth(SynthArgs { out: c.out })
        }
        Command::Preprocess(c) => {
            if let Some(path) = c.denylist {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Config { path: path.display().to_string(), message: e.to_string() })?;
                cfg.denylist = Some(wice_core::dom_graph::Denylist::parse(&text).tags().map(String::from).collect());
            }
            set(&mut cfg.min_text_chars, c.min_text_chars);
            Stage::Preprocess(PreprocessArgs { corpus: c.corpus, manifest: c.manifest, out: c.out })
        }
        Command::Embed(c) => {
            set(&mut cfg.provider, c.provider);
            set(&mut cfg.dim, c.dim);
            set(&mut cfg.seed, c.seed);
            Stage::Embed(EmbedArgs { graphs: c.graphs, cache: c.cache, expect_dim: c.dim, out: c.out })
        }
        Command::Train(c) => {
            set(&mut cfg.split, c.split);
            set(&mut cfg.seed, c.seed);
            set(&mut cfg.arch, c.arch);
            set(&mut cfg.epochs, c.epochs);
            set(&mut cfg.learning_rate, c.learning_rate);
            set(&mut cfg.patience, c.patience);
            Stage::Train(TrainArgs {
                graphs: c.graphs,
                embeddings: c.embeddings,
                out: c.out,
                metrics: c.metrics,
                split_file: c.split_file,
                resume: c.resume,
            })
        }
        Command::Evaluate(c) => {
            set(&mut cfg.methods, c.methods);
            set(&mut cfg.loss_threshold, c.loss_threshold);
            set(&mut cfg.seed, c.seed);
            Stage::Evaluate(EvaluateArgs {
                graphs: c.graphs,
                embeddings: c.embeddings,
                ckpts: c.ckpt,
                split_file: c.split_file,
                part: c.part,
                out: c.out,
            })
        }
        Command::Extract(c) => Stage::Extract(ExtractArgs {
            ckpt: c.ckpt,
            html: c.html,
            cache: c.cache,
            top_k: c.top_k,
            min_weight: c.min_weight,
        }),
    };
    cfg.validate()?;
    Ok((stage, cfg))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { EXIT_OK as u8 });
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    let result = resolve(cli).and_then(|(stage, cfg)| {
        log::info!("stage={} config_hash={}", stage.name(), cfg.hash());
        run_stage(&stage, &cfg)
    });
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
