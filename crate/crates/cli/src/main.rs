use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedvec::corpus::{count_words, TokenStream};
use fedvec::eval::{nearest_neighbors, Embeddings, Which};
use fedvec::run::{RunManifest, TrainMode, INPUT_EMBEDDINGS_FILE, OUTPUT_EMBEDDINGS_FILE};
use fedvec::vocab::{build_proposal, merge_proposals, MergeMode, VocabProposal};
use fedvec::write_atomic;

#[derive(Parser)]
#[command(name = "fedvec", version, about = "Federated skip-gram word embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count a local corpus and write its top-N word proposal.
    Propose {
        corpus: PathBuf,
        #[arg(long = "vocab-cap", default_value_t = 200_000)]
        cap: usize,
        #[arg(long = "vocab-threshold", default_value_t = 10)]
        threshold: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge proposal files into the shared vocabulary.
    Merge {
        #[arg(required = true)]
        proposals: Vec<PathBuf>,
        #[arg(long, default_value_t = MergeMode::Union)]
        mode: MergeMode,
        #[arg(long = "vocab-cap", default_value_t = 200_000)]
        cap: usize,
        #[arg(long = "vocab-threshold", default_value_t = 10)]
        threshold: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train embeddings, federated across one dataset per node or centralized.
    Train(Box<TrainArgs>),
    /// Print the nearest neighbours of query words as TSV.
    Neighbors {
        /// Checkpoint directory or `.vec` file.
        checkpoint: PathBuf,
        #[arg(required = true)]
        words: Vec<String>,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = Which::Input)]
        which: Which,
    },
    /// Write word counts or embeddings in plain text.
    #[command(subcommand)]
    Export(Export),
}

#[derive(Subcommand)]
enum Export {
    /// Word counts of a corpus, most frequent first.
    Counts {
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One embedding matrix of a checkpoint.
    Embeddings {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = Which::Input)]
        which: Which,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset files, one per node in federated mode.
    datasets: Vec<PathBuf>,
    /// `key=value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<TrainMode>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    neg: Option<usize>,
    #[arg(long = "vocab-cap")]
    vocab_cap: Option<usize>,
    #[arg(long = "vocab-threshold")]
    vocab_threshold: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long = "val-interval")]
    val_interval: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<fedvec::Error> for Failure {
    fn from(e: fedvec::Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn require_file(path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("not a readable file: {}", path.display())))
    }
}

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => Ok(write_atomic(path, text.as_bytes())?),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Runtime(e.to_string())),
    }
}

fn propose(corpus: &Path, cap: usize, threshold: u64, out: &Path) -> CmdResult {
    if cap == 0 || threshold == 0 {
        return Err(usage("--vocab-cap and --vocab-threshold must be positive"));
    }
    require_file(corpus)?;
    let counts = count_words(&TokenStream::read(corpus, corpus.display().to_string())?);
    let proposal = build_proposal(corpus.display().to_string(), &counts, cap, threshold)?;
    write_atomic(out, proposal.to_text().as_bytes())?;
    let qualifying = counts.iter().filter(|&(_, c)| c >= threshold).count();
    println!("qualifying\t{qualifying}");
    println!("proposed\t{}", proposal.len());
    Ok(())
}

fn merge(paths: &[PathBuf], mode: MergeMode, cap: usize, threshold: u64, out: &Path) -> CmdResult {
    if cap == 0 || threshold == 0 {
        return Err(usage("--vocab-cap and --vocab-threshold must be positive"));
    }
    for p in paths {
        require_file(p)?;
    }
    let proposals = paths.iter().map(|p| VocabProposal::load(p, cap, threshold)).collect::<fedvec::Result<Vec<_>>>()?;
    let vocab = merge_proposals(&proposals, mode)?;
    vocab.save(out)?;
    println!("vocabulary\t{}", vocab.len());
    println!("ratio\t{:.4}", vocab.len() as f64 / cap as f64);
    Ok(())
}

fn absolute(path: &Path) -> Result<PathBuf, Failure> {
    std::path::absolute(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn build_manifest(args: &TrainArgs) -> Result<RunManifest, Failure> {
    let mut m = match &args.config {
        Some(path) => {
            require_file(path)?;
            RunManifest::load(path).map_err(|e| usage(e.to_string()))?
        }
        None => RunManifest::default(),
    };
    if !args.datasets.is_empty() {
        m.datasets = args.datasets.clone();
    }
    if let Some(mode) = args.mode {
        m.mode = mode;
    }
    if let Some(v) = &args.vocab {
        m.vocab = v.clone();
    }
    if let Some(o) = &args.out {
        m.out_dir = o.clone();
    }
    let flags = [
        ("nodes", args.nodes.map(|v| v.to_string())),
        ("batch", args.batch.map(|v| v.to_string())),
        ("dim", args.dim.map(|v| v.to_string())),
        ("neg", args.neg.map(|v| v.to_string())),
        ("vocab-cap", args.vocab_cap.map(|v| v.to_string())),
        ("vocab-threshold", args.vocab_threshold.map(|v| v.to_string())),
        ("lr", args.lr.map(|v| v.to_string())),
        ("window", args.window.map(|v| v.to_string())),
        ("iters", args.iters.map(|v| v.to_string())),
        ("val-interval", args.val_interval.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            m.set(key, &v).map_err(|e| usage(e.to_string()))?;
        }
    }
    if !m.vocab.as_os_str().is_empty() {
        m.vocab = absolute(&m.vocab)?;
    }
    if !m.out_dir.as_os_str().is_empty() {
        m.out_dir = absolute(&m.out_dir)?;
    }
    m.datasets = m.datasets.iter().map(|d| absolute(d)).collect::<Result<_, _>>()?;
    Ok(m)
}

fn train(args: &TrainArgs) -> CmdResult {
    let manifest = build_manifest(args)?;
    let prepared = manifest.prepare().map_err(|e| usage(e.to_string()))?;
    let config = &prepared.manifest.config;
    eprintln!(
        "training {} on {} dataset(s), V={}, {} iterations",
        prepared.manifest.mode,
        prepared.datasets.len(),
        prepared.vocab.len(),
        config.total_iterations
    );
    let run = prepared.execute(|r| {
        eprintln!("iteration {} epoch {} validation loss {:.4}", r.iteration, r.epoch, r.validation_loss);
    })?;
    println!("out\t{}", prepared.manifest.out_dir.display());
    if let Some(last) = run.losses.last() {
        println!("validation_loss\t{:.6}", last.validation_loss);
    }
    Ok(())
}

fn load_checkpoint(path: &Path, which: Which) -> Result<Embeddings, Failure> {
    let file = if path.is_dir() {
        path.join(match which {
            Which::Input => INPUT_EMBEDDINGS_FILE,
            Which::Output => OUTPUT_EMBEDDINGS_FILE,
        })
    } else {
        path.to_path_buf()
    };
    require_file(&file)?;
    Ok(Embeddings::load(&file)?)
}

fn neighbors(checkpoint: &Path, words: &[String], k: usize, which: Which) -> CmdResult {
    if k == 0 {
        return Err(usage("-k must be positive"));
    }
    let emb = load_checkpoint(checkpoint, which)?;
    let mut out = String::new();
    let mut hits = 0;
    for w in words {
        match nearest_neighbors(&emb, w, k) {
            Ok(result) => {
                hits += 1;
                out.push_str(&format!("# {w}\n"));
                out.push_str(&result.to_tsv());
            }
            Err(e) => eprintln!("error: {w}: {e}"),
        }
    }
    emit(None, &out)?;
    if hits == 0 {
        return Err(Failure::Runtime("no query word could be answered".into()));
    }
    Ok(())
}

fn export(cmd: &Export) -> CmdResult {
    match cmd {
        Export::Counts { corpus, out } => {
            require_file(corpus)?;
            let counts = count_words(&TokenStream::read(corpus, corpus.display().to_string())?);
            emit(out.as_deref(), &counts.to_tsv())
        }
        Export::Embeddings { checkpoint, which, out } => {
            let emb = load_checkpoint(checkpoint, *which)?;
            emit(out.as_deref(), &emb.to_text())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Propose { corpus, cap, threshold, out } => propose(corpus, *cap, *threshold, out),
        Command::Merge { proposals, mode, cap, threshold, out } => merge(proposals, *mode, *cap, *threshold, out),
        Command::Train(args) => train(args),
        Command::Neighbors { checkpoint, words, k, which } => neighbors(checkpoint, words, *k, *which),
        Command::Export(cmd) => export(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
