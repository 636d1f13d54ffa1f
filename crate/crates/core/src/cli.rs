//! The `longsynth` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. Usage errors are
//! detected before any output is written.

use crate::chunking::chunk_corpus;
use crate::corpus::{compute_corpus_stats, open_corpus, CorpusStats, Document, JsonlRejects, Reject, RejectSink};
use crate::embedding::{Embedder, EmbedderConfig, Provider, ENDPOINT_ENV};
use crate::error::{Error, Result};
use crate::report::report_similarity;
use crate::synthesis::{
    read_dataset, synthesize_corpus, JsonlDatasetSink, PositionStrategy, SelectionStrategy, SynthesisConfig,
    SynthesizedDocument,
};
use crate::tokenize::TokenizerKind;
use crate::vindex::Index;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Once;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Name of the marker file present in an output directory while it is incomplete.
pub const PARTIAL_MARKER: &str = "PARTIAL";

static STOP: AtomicBool = AtomicBool::new(false);
static SIGNALS: Once = Once::new();

#[derive(Parser, Debug)]
#[command(
    name = "longsynth",
    version,
    about = "Synthesize long-context training documents by negative document extension"
)]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Chunk a corpus and build the chunk-level vector index.
    BuildIndex(BuildIndexArgs),
    /// Extend every document of a corpus into a long document.
    Synthesize(SynthesizeArgs),
    /// Length distribution and encoding rate of a corpus.
    Stats(StatsArgs),
    /// Cosine between meta-chunks and their negatives, per strategy.
    ReportSimilarity(ReportArgs),
    /// Dump the extended-chunk structure of one synthesized record.
    Inspect(InspectArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum EmbedderArg {
    Local,
    Remote,
}

#[derive(Args, Debug)]
struct BuildIndexArgs {
    /// Corpus file(s), one JSON record per line.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    granularity: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum)]
    embedder: Option<EmbedderArg>,
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// JSON config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SynthesizeArgs {
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    target_tokens: Option<usize>,
    /// Characters per token, or `auto` to measure it on the input corpus.
    #[arg(long)]
    encoding_rate: Option<String>,
    /// Adjustment factor applied to the character budget.
    #[arg(long = "w")]
    adjustment: Option<f64>,
    #[arg(long)]
    strategy: Option<SelectionStrategy>,
    #[arg(long)]
    position: Option<PositionStrategy>,
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cut accepted documents at the target token count.
    #[arg(long)]
    truncate: bool,
    #[arg(long)]
    tokenizer: Option<TokenizerKind>,
    #[arg(long)]
    similarity_ceiling: Option<f32>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long, default_value = "whitespace")]
    tokenizer: TokenizerKind,
    /// Also write the JSON record to this file.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
    #[arg(long)]
    index: PathBuf,
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    /// Also write the JSON lines to this file.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    id: String,
    /// Index used to resolve negative chunk ids to their parent documents.
    #[arg(long)]
    index: Option<PathBuf>,
}

/// Fully resolved settings of one run, written next to its outputs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub subcommand: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub index: Option<PathBuf>,
    pub synthesis: SynthesisConfig,
    pub embedder: EmbedderConfig,
    /// `auto` or `fixed`.
    pub encoding_rate_mode: String,
    pub measured_encoding_rate: Option<f64>,
    pub verbosity: u8,
}

/// Config file contents; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    synthesis: Option<serde_json::Value>,
    embedder: Option<serde_json::Value>,
    encoding_rate_mode: Option<String>,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    SIGNALS.call_once(|| {
        if let Err(e) = ctrlc::set_handler(|| STOP.store(true, Ordering::SeqCst)) {
            log::debug!("signal handler not installed: {e}");
        }
    });

    let verbosity = cli.verbose;
    let result = match cli.command {
        Command::BuildIndex(a) => build_index(a, verbosity),
        Command::Synthesize(a) => synthesize(a, verbosity),
        Command::Stats(a) => stats(a),
        Command::ReportSimilarity(a) => report(a),
        Command::Inspect(a) => inspect(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error[usage]: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error[{}]: {e}", e.class());
            EXIT_FAILURE
        }
    }
}

fn load_file_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
}

fn merge<T: Serialize + for<'de> Deserialize<'de>>(base: T, overlay: Option<serde_json::Value>) -> CliResult<T> {
    let Some(overlay) = overlay else {
        return Ok(base);
    };
    let mut v = serde_json::to_value(base).map_err(|e| usage(e.to_string()))?;
    if let (Some(dst), Some(src)) = (v.as_object_mut(), overlay.as_object()) {
        for (k, val) in src {
            if !dst.contains_key(k) {
                return Err(usage(format!("unknown config key '{k}'")));
            }
            dst.insert(k.clone(), val.clone());
        }
    } else {
        return Err(usage("config sections must be JSON objects"));
    }
    serde_json::from_value(v).map_err(|e| usage(format!("bad config value: {e}")))
}

fn require_inputs(inputs: &[PathBuf]) -> CliResult<()> {
    for p in inputs {
        if !p.is_file() {
            return Err(usage(format!("input {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn namespace_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Streams all inputs in order; doc ids are namespaced by file stem when
/// more than one input is given.
fn stream_inputs<'a, S: RejectSink + 'a>(
    inputs: &'a [PathBuf],
    sink: &'a RefCell<S>,
) -> Result<impl Iterator<Item = Result<Document>> + 'a> {
    for p in inputs {
        // Surface unreadable inputs before any work starts.
        File::open(p).map_err(|e| Error::io(p, e))?;
    }
    let multi = inputs.len() > 1;
    Ok(inputs
        .iter()
        .flat_map(move |p| -> Box<dyn Iterator<Item = Result<Document>> + 'a> {
            match open_corpus(p, sink) {
                Ok(r) if multi => Box::new(r.with_namespace(namespace_for(p))),
                Ok(r) => Box::new(r),
                Err(e) => Box::new(std::iter::once(Err(e))),
            }
        }))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn build_index(a: BuildIndexArgs, verbosity: u8) -> CliResult<()> {
    let file = load_file_config(a.config.as_deref())?;
    let mut embedder: EmbedderConfig = merge(EmbedderConfig::default(), file.embedder)?;
    let mut synthesis: SynthesisConfig = merge(SynthesisConfig::default(), file.synthesis)?;
    if let Some(s) = a.granularity {
        synthesis.granularity = s;
    }
    if let Some(d) = a.dim {
        embedder.dimension = d;
    }
    if let Some(b) = a.batch_size {
        embedder.batch_size = b;
    }
    match a.embedder {
        Some(EmbedderArg::Local) => {
            embedder.provider = Provider::LocalHashed;
            embedder.endpoint = None;
        }
        Some(EmbedderArg::Remote) => embedder.provider = Provider::RemoteService,
        None => {}
    }
    if embedder.provider == Provider::RemoteService {
        if a.endpoint.is_some() {
            embedder.endpoint = a.endpoint.clone();
        }
    } else if a.endpoint.is_some() && a.embedder == Some(EmbedderArg::Local) {
        log::warn!("--endpoint ignored for the local embedder");
    }
    embedder.validate().map_err(|e| usage(e.to_string()))?;
    if synthesis.granularity == 0 {
        return Err(usage("--granularity must be at least 1"));
    }
    require_inputs(&a.input)?;

    let rejects = RefCell::new(Vec::<Reject>::new());
    let docs: Vec<Document> = stream_inputs(&a.input, &rejects)?.collect::<Result<_>>()?;
    let rejects = rejects.into_inner();
    let mut chunks = chunk_corpus(&docs, synthesis.granularity)?;
    let collected: Vec<_> = chunks.by_ref().collect();
    let diag = chunks.diagnostics();
    let index = Index::build(collected, &embedder, synthesis.granularity)?;
    index.save(&a.out)?;

    let cfg = RunConfig {
        subcommand: "build-index".into(),
        inputs: a.input.clone(),
        outputs: vec![a.out.clone()],
        synthesis,
        embedder,
        verbosity,
        ..Default::default()
    };
    write_json(&sidecar(&a.out, "config.json"), &cfg)?;
    if !rejects.is_empty() {
        let path = sidecar(&a.out, "rejects.jsonl");
        let mut sink = JsonlRejects::new(BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?));
        for r in rejects.iter().cloned() {
            sink.reject(r)?;
        }
        sink.into_inner().flush().map_err(Error::from)?;
    }
    println!(
        "indexed {} chunks from {} documents (dim {}, granularity {}, {} oversized paragraphs, {} rejected records) -> {}",
        index.len(),
        diag.documents,
        index.dimension(),
        index.granularity(),
        diag.oversized,
        rejects.len(),
        a.out.display()
    );
    Ok(())
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

fn embedder_for_index(index: &Index, endpoint: Option<String>, base: EmbedderConfig) -> CliResult<EmbedderConfig> {
    let mut cfg = EmbedderConfig {
        provider: index.provider(),
        dimension: index.dimension(),
        endpoint: None,
        ..base
    };
    if cfg.provider == Provider::RemoteService {
        cfg.endpoint = endpoint.or(cfg.endpoint);
        if cfg.endpoint.is_none() {
            return Err(usage(format!(
                "index was built with the remote embedder; pass --endpoint or set {ENDPOINT_ENV}"
            )));
        }
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn synthesize(a: SynthesizeArgs, verbosity: u8) -> CliResult<()> {
    let file = load_file_config(a.config.as_deref())?;
    let pinned_granularity = file.synthesis.as_ref().is_some_and(|v| v.get("granularity").is_some());
    let mut cfg: SynthesisConfig = merge(SynthesisConfig::default(), file.synthesis)?;
    let base_embedder: EmbedderConfig = merge(EmbedderConfig::default(), file.embedder)?;
    if let Some(v) = a.target_tokens {
        cfg.target_tokens = v;
    }
    if let Some(v) = a.adjustment {
        cfg.adjustment = v;
    }
    if let Some(v) = a.strategy {
        cfg.selection = v;
    }
    if let Some(v) = a.position {
        cfg.position = v;
    }
    if let Some(v) = a.pool {
        cfg.candidate_pool = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.truncate {
        cfg.truncate_to_target = true;
    }
    if let Some(v) = a.tokenizer {
        cfg.tokenizer = v;
    }
    if let Some(v) = a.similarity_ceiling {
        cfg.similarity_ceiling = Some(v);
    }
    if let Some(v) = a.workers {
        cfg.workers = v;
    }
    let mut mode = file.encoding_rate_mode.unwrap_or_else(|| "fixed".into());
    match a.encoding_rate.as_deref() {
        Some("auto") => mode = "auto".into(),
        Some(v) => {
            cfg.encoding_rate = v
                .parse()
                .map_err(|_| usage(format!("--encoding-rate expects 'auto' or a number, got '{v}'")))?;
            mode = "fixed".into();
        }
        None => {}
    }
    if mode != "auto" && mode != "fixed" {
        return Err(usage(format!("encoding_rate_mode must be auto or fixed, got '{mode}'")));
    }
    require_inputs(&a.input)?;
    if !a.index.is_file() {
        return Err(usage(format!("index {} does not exist", a.index.display())));
    }
    let index = Index::load(&a.index)?;
    if !pinned_granularity {
        cfg.granularity = index.granularity();
    }
    if cfg.granularity != index.granularity() {
        return Err(usage(format!(
            "granularity {} differs from the index's {}",
            cfg.granularity,
            index.granularity()
        )));
    }
    let embedder_cfg = embedder_for_index(&index, a.endpoint, base_embedder)?;

    let mut measured = None;
    if mode == "auto" {
        let discard = RefCell::new(Vec::<Reject>::new());
        let docs = stream_inputs(&a.input, &discard)?;
        let mut err = None;
        let stats = compute_corpus_stats(
            docs.map_while(|d| d.map_err(|e| err = Some(e)).ok()),
            cfg.tokenizer.counter(),
        );
        if let Some(e) = err {
            return Err(e.into());
        }
        let rate = stats
            .measured_encoding_rate
            .ok_or_else(|| usage("cannot measure the encoding rate of an empty corpus"))?;
        cfg.encoding_rate = rate;
        measured = Some(rate);
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let embedder = Embedder::new(&embedder_cfg)?;

    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let marker = a.out.join(PARTIAL_MARKER);
    fs::write(&marker, b"synthesis in progress\n").map_err(|e| Error::io(&marker, e))?;
    let run_cfg = RunConfig {
        subcommand: "synthesize".into(),
        inputs: a.input.clone(),
        outputs: vec![a.out.clone()],
        index: Some(a.index.clone()),
        synthesis: cfg.clone(),
        embedder: embedder_cfg,
        encoding_rate_mode: mode,
        measured_encoding_rate: measured,
        verbosity,
    };
    write_json(&a.out.join("config.json"), &run_cfg)?;

    let create = |name: &str| -> Result<BufWriter<File>> {
        let p = a.out.join(name);
        Ok(BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?))
    };
    let mut sink = JsonlDatasetSink::new(create("dataset.jsonl")?, create("rejects.jsonl")?);
    let corpus_sink = RefCell::new(JsonlRejects::new(create("corpus_rejects.jsonl")?));
    STOP.store(false, Ordering::SeqCst);
    let report = {
        let docs = stream_inputs(&a.input, &corpus_sink)?;
        synthesize_corpus(docs, &index, &embedder, &cfg, &mut sink, Some(&STOP))?
    };
    sink.flush()?;
    corpus_sink.into_inner().into_inner().flush().map_err(Error::from)?;
    write_json(&a.out.join("report.json"), &report)?;
    let text = report.to_text();
    fs::write(a.out.join("report.txt"), &text).map_err(|e| Error::io(a.out.join("report.txt"), e))?;
    print!("{text}");
    if report.interrupted {
        return Err(Failure::Runtime(Error::Interrupted));
    }
    fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    Ok(())
}

pub fn stats_table(name: &str, s: &CorpusStats) -> String {
    let mut out = format!(
        "{:<24} {:>22} {:>16}\n",
        "Dataset", "0 <= Length <= 8192", "Length > 8192"
    );
    out.push_str(&format!("{:<24} {:>21.2}% {:>15.2}%\n", name, s.pct_le(), s.pct_gt()));
    out.push_str(&format!(
        "documents {}  mean chars {:.1}  encoding rate {}\n",
        s.total_docs,
        s.mean_char_len,
        s.measured_encoding_rate
            .map(|r| format!("{r:.4} chars/token"))
            .unwrap_or_else(|| "undefined".into())
    ));
    out
}

fn stats(a: StatsArgs) -> CliResult<()> {
    require_inputs(&a.input)?;
    let rejects = RefCell::new(Vec::<Reject>::new());
    let docs: Vec<Document> = stream_inputs(&a.input, &rejects)?.collect::<Result<_>>()?;
    let rejects = rejects.into_inner();
    let s = compute_corpus_stats(&docs, a.tokenizer.counter());
    if s.total_docs == 0 {
        log::warn!("corpus is empty; encoding rate undefined");
    }
    let name = a.input.iter().map(|p| namespace_for(p)).collect::<Vec<_>>().join("+");
    print!("{}", stats_table(&name, &s));
    let mut record = serde_json::to_value(&s).map_err(Error::from)?;
    record["dataset"] = name.into();
    record["tokenizer"] = a.tokenizer.as_str().into();
    record["pct_le_8192_tokens"] = s.pct_le().into();
    record["pct_gt_8192_tokens"] = s.pct_gt().into();
    record["rejected_records"] = rejects.len().into();
    let line = serde_json::to_string(&record).map_err(Error::from)?;
    println!("{line}");
    if let Some(path) = a.json {
        fs::write(&path, format!("{line}\n")).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn report(a: ReportArgs) -> CliResult<()> {
    for d in &a.dataset {
        if !d.is_file() {
            return Err(usage(format!("dataset {} does not exist", d.display())));
        }
    }
    if !a.index.is_file() {
        return Err(usage(format!("index {} does not exist", a.index.display())));
    }
    let index = Index::load(&a.index)?;
    let cfg = embedder_for_index(&index, a.endpoint, EmbedderConfig::default())?;
    let embedder = Embedder::new(&cfg)?;
    let report = report_similarity(&a.dataset, &index, &embedder)?;
    if report.is_empty() {
        log::warn!("no records in the given datasets");
    }
    print!("{}", report.to_text());
    let lines = report.to_json_lines()?;
    print!("{lines}");
    if let Some(path) = a.json {
        fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Human-readable layout of one record.
pub fn render_record(rec: &SynthesizedDocument, index: Option<&Index>) -> String {
    let m = &rec.meta;
    let mut out = format!(
        "record {}  source {}  tokens {}  chars {}\nstrategy {}  position {}  granularity {}  seed {}  k {}{}\n",
        rec.synth_id,
        m.source_doc,
        rec.token_len,
        rec.text.chars().count(),
        m.strategy,
        m.position,
        m.granularity,
        m.seed,
        m.budget.k,
        if m.truncated { "  (truncated)" } else { "" }
    );
    for c in &m.chunks {
        out.push_str(&format!(
            "\n== extended chunk {}: meta span [{}, {}) at slot {}\n",
            c.ordinal, c.meta_span[0], c.meta_span[1], c.meta_slot
        ));
        out.push_str(">>> meta\n");
        out.push_str(rec.char_slice(c.meta_span));
        out.push_str("\n<<< meta\n");
        for id in &c.negatives {
            match index.and_then(|i| i.record(*id)) {
                Some(r) => out.push_str(&format!(
                    "  negative {id}  from {} #{}  ({} chars)\n",
                    r.parent_doc_id, r.ordinal, r.char_len
                )),
                None => out.push_str(&format!("  negative {id}\n")),
            }
        }
        if c.self_copies > 0 {
            out.push_str(&format!("  {} verbatim copies of the meta-chunk\n", c.self_copies));
        }
    }
    out
}

fn inspect(a: InspectArgs) -> CliResult<()> {
    if !a.dataset.is_file() {
        return Err(usage(format!("dataset {} does not exist", a.dataset.display())));
    }
    let index = a.index.as_deref().map(Index::load).transpose()?;
    for rec in read_dataset(&a.dataset)? {
        let rec = rec?;
        if rec.synth_id == a.id {
            print!("{}", render_record(&rec, index.as_ref()));
            return Ok(());
        }
    }
    Err(Error::NotFound(format!("record {} in {}", a.id, a.dataset.display())).into())
}
