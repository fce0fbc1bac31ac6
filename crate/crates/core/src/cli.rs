//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code: 0 success, 1 partial
//! success (e.g. some downloads failed), 2 fatal error.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::autoannotate::{annotate_corpus, predict_labels, GateConfig, ProbSource};
use crate::dataset::{read_annotations, split_train_test, write_annotations, AmbPolicy, AnnotatedParagraph, Paragraph};
use crate::error::{Error, Result};
use crate::eval::{bootstrap_compare, diff_report, label_counts, score, DiffStyle, MetricSet, DEFAULT_DRAWS, DEFAULT_DRAW_SIZE};
use crate::fsutil::{open_read, write_atomic, write_string_atomic};
use crate::ingest::{
    parse_bibtex, read_catalog_csv, read_token_dir, write_catalog_csv, write_token_file, DownloadManifest, Downloader,
    ExtractedDocument, HttpFetcher,
};
use crate::selftrain::{fingerprint, run_dir_name, run_loop, LoopConfig};
use crate::synthetic::{generate, SyntheticConfig};
use crate::tagger::{load_external_probs, TaggerModel};

pub const RUN_DIR_ENV: &str = "SELFTRAIN_RUN_DIR";

#[derive(Debug, Parser)]
#[command(name = "sciner", version, about = "Self-training toolkit for scientific named-entity recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a BibTeX file into the catalog CSV; optionally fetch PDFs and tokenize extracted text.
    Ingest(IngestArgs),
    /// Split catalog papers into manual, auto and unannotated sets.
    Partition(PartitionArgs),
    /// Pseudo-label token files with a model or external probabilities.
    Annotate(AnnotateArgs),
    /// Run the self-training loop and compare the first and final models.
    Loop(LoopArgs),
    /// Score predictions against gold annotations.
    Eval(EvalArgs),
    /// Histogram of non-O labels.
    Counts(CountsArgs),
    /// Word-by-word comparison of predictions with gold.
    Diff(DiffArgs),
    /// Write a synthetic benchmark corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// BibTeX input.
    #[arg(long)]
    bib: PathBuf,
    /// Catalog CSV output.
    #[arg(long)]
    catalog: PathBuf,
    /// Download PDFs into this directory.
    #[arg(long)]
    pdf_dir: Option<PathBuf>,
    /// Download manifest (TSV); read for resumption and rewritten.
    #[arg(long, requires = "pdf_dir")]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    max_attempts: u32,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    /// Directory of extracted `<paper_id>.json` documents to tokenize.
    #[arg(long, requires = "tokens")]
    extracted: Option<PathBuf>,
    /// Output directory for `<paper_id>.txt` token files.
    #[arg(long)]
    tokens: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    #[arg(long)]
    catalog: PathBuf,
    /// File with one manual paper id per line.
    #[arg(long)]
    manual_ids: PathBuf,
    /// Output TSV: paper_id, category.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnnotateArgs {
    /// Directory of token files.
    #[arg(long)]
    tokens: PathBuf,
    /// Model file written by `loop`.
    #[arg(long, conflicts_with = "probs", required_unless_present = "probs")]
    model: Option<PathBuf>,
    /// JSON-lines subword probabilities from an external tagger.
    #[arg(long)]
    probs: Option<PathBuf>,
    /// Partition file; only papers in the auto category are annotated.
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long, default_value_t = crate::autoannotate::DEFAULT_GAMMA)]
    gamma: f64,
    /// Annotation output.
    #[arg(long)]
    out: PathBuf,
    /// Gate statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
}

/// Every loop setting is optional here; unset ones come from `--config`,
/// then from the defaults.
#[derive(Debug, Args, Default, Clone)]
struct LoopArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manual annotations.
    #[arg(long)]
    manual: Option<PathBuf>,
    /// Directory of token files forming the auto corpus.
    #[arg(long)]
    auto_tokens: Option<PathBuf>,
    /// Restrict the auto corpus to papers in the auto category.
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Held-out gold annotations. Without it, papers are held out of the manual set.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Papers held out per annotator when no test file is given.
    #[arg(long)]
    held_out: Option<usize>,
    /// Parent of the run directory [env: SELFTRAIN_RUN_DIR; default: runs].
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs_step1: Option<usize>,
    #[arg(long)]
    epochs_step3: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    amb_policy: Option<String>,
    #[arg(long)]
    carry_weights: Option<bool>,
    #[arg(long)]
    feature_bits: Option<u32>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    draw_size: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    /// Predictions to score (model A).
    #[arg(long)]
    pred: PathBuf,
    /// Second prediction set for the bootstrap comparison (defaults to A).
    #[arg(long)]
    pred_b: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    draws: usize,
    #[arg(long, default_value_t = DEFAULT_DRAW_SIZE)]
    draw_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CountsArgs {
    /// Annotation files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StyleArg {
    /// ANSI colours on a terminal, bracket markup otherwise.
    Auto,
    Ansi,
    Brackets,
}

#[derive(Debug, Args)]
struct DiffArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_enum, default_value_t = StyleArg::Auto)]
    style: StyleArg,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    manual: usize,
    #[arg(long, default_value_t = 1700)]
    auto: usize,
    #[arg(long, default_value_t = 200)]
    test: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

/// Run the CLI on `args` (including the program name).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Partition(a) => partition(a),
        Command::Annotate(a) => annotate(a),
        Command::Loop(a) => run_loop_command(a),
        Command::Eval(a) => eval(a),
        Command::Counts(a) => counts(a),
        Command::Diff(a) => diff(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(Status::Done) => 0,
        Ok(Status::Partial) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

enum Status {
    Done,
    Partial,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io_at(path, e))
}

fn read_annotation_file(path: &Path) -> Result<Vec<AnnotatedParagraph>> {
    read_annotations(&path.display().to_string(), open_read(path)?)
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::argument("parallelism must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::argument(e.to_string()))?;
    Ok(pool.install(f))
}

fn ingest(a: IngestArgs) -> Result<Status> {
    let parsed = parse_bibtex(&read_text(&a.bib)?);
    if parsed.skipped() > 0 {
        eprintln!("skipped {} malformed entries", parsed.skipped());
        for e in &parsed.errors {
            eprintln!("  {}:{}: {}", a.bib.display(), e.line, e.message);
        }
    }
    write_atomic(&a.catalog, |w| write_catalog_csv(&parsed.records, w).map(|_| ()))?;
    println!("catalog: {} records -> {}", parsed.records.len(), a.catalog.display());

    let mut status = Status::Done;
    if let Some(pdf_dir) = &a.pdf_dir {
        let prior = match &a.manifest {
            Some(p) if p.exists() => Some(DownloadManifest::read(open_read(p)?)?),
            _ => None,
        };
        let manifest = Downloader::new(Arc::new(HttpFetcher::default()))
            .max_attempts(a.max_attempts)
            .parallelism(a.parallelism)
            .run(&parsed.records, pdf_dir, prior.as_ref())?;
        if let Some(p) = &a.manifest {
            write_atomic(p, |w| manifest.write(w))?;
        }
        println!("downloaded {}", manifest.summary());
        if manifest.failed_count() > 0 {
            status = Status::Partial;
        }
    }

    if let (Some(src), Some(out)) = (&a.extracted, &a.tokens) {
        let mut paths: Vec<PathBuf> = fs::read_dir(src)
            .map_err(|e| Error::io_at(src, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        for path in &paths {
            let doc = ExtractedDocument::from_json(&read_text(path)?).map_err(|e| match e {
                Error::Format { location, message } => Error::format(format!("{}: {location}", path.display()), message),
                other => other,
            })?;
            let tokens = doc.tokenize();
            write_atomic(&out.join(format!("{}.txt", doc.paper_id)), |w| write_token_file(&tokens, w))?;
        }
        println!("tokenized {} documents -> {}", paths.len(), out.display());
    }
    Ok(status)
}

fn read_id_list(path: &Path) -> Result<BTreeSet<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn partition(a: PartitionArgs) -> Result<Status> {
    let catalog = read_catalog_csv(open_read(&a.catalog)?)?;
    let manual = read_id_list(&a.manual_ids)?;
    let part = crate::dataset::partition_corpus(&catalog, &manual)?;
    let mut out = String::new();
    for (ids, name) in [(&part.manual, "manual"), (&part.auto, "auto"), (&part.unannotated, "unannotated")] {
        for id in ids {
            writeln!(out, "{id}\t{name}").unwrap();
        }
    }
    write_string_atomic(&a.out, &out)?;
    println!("manual={} auto={} unannotated={}", part.manual.len(), part.auto.len(), part.unannotated.len());
    Ok(Status::Done)
}

/// Paper ids of one category from a partition file.
fn read_partition(path: &Path, category: &str) -> Result<BTreeSet<String>> {
    let mut ids = BTreeSet::new();
    for (i, line) in read_text(path)?.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, cat) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(format!("{}:{}", path.display(), i + 1), "expected `paper_id<TAB>category`"))?;
        if cat == category {
            ids.insert(id.to_string());
        }
    }
    Ok(ids)
}

fn load_paragraphs(tokens: &Path, partition: Option<&Path>) -> Result<Vec<Paragraph>> {
    let mut docs = read_token_dir(tokens)?;
    if let Some(p) = partition {
        let auto = read_partition(p, "auto")?;
        docs.retain(|d| auto.contains(&d.paper_id));
    }
    Ok(Paragraph::from_documents(&docs))
}

fn annotate(a: AnnotateArgs) -> Result<Status> {
    let gate = GateConfig::new(a.gamma)?;
    let paragraphs = load_paragraphs(&a.tokens, a.partition.as_deref())?;
    let (annotated, stats) = match (&a.model, &a.probs) {
        (Some(m), _) => {
            let model = TaggerModel::read(open_read(m)?)?;
            with_pool(a.parallelism, || annotate_corpus(ProbSource::Model(&model), &paragraphs, &gate))??
        }
        (None, Some(p)) => {
            let records = load_external_probs(open_read(p)?)?;
            with_pool(a.parallelism, || annotate_corpus(ProbSource::External(&records), &paragraphs, &gate))??
        }
        (None, None) => return Err(Error::argument("one of --model or --probs is required")),
    };
    write_atomic(&a.out, |w| write_annotations(&annotated, w))?;
    if let Some(path) = &a.stats {
        let json = serde_json::to_string_pretty(&stats.to_json()).expect("stats serialize");
        write_string_atomic(path, &(json + "\n"))?;
    }
    print!("{}", stats.render_text());
    Ok(Status::Done)
}

const CONFIG_KEYS: &[&str] = &[
    "manual",
    "auto_tokens",
    "partition",
    "test",
    "held_out",
    "run_dir",
    "iterations",
    "gamma",
    "seed",
    "epochs_step1",
    "epochs_step3",
    "learning_rate",
    "batch_size",
    "amb_policy",
    "carry_weights",
    "feature_bits",
    "parallelism",
    "draws",
    "draw_size",
];

/// Parse a flat `key = value` file. `#` starts a comment line; keys may use
/// `-` or `_`.
pub fn parse_config_text(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = || format!("{origin}:{}", i + 1);
        let (k, v) = line.split_once('=').ok_or_else(|| Error::format(at(), "expected `key = value`"))?;
        let key = k.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::format(at(), format!("unknown key `{}`", k.trim())));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::format(at(), format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::argument(format!("config key `{key}`: cannot parse `{value}`")))
}

impl LoopArgs {
    /// Fill unset fields from a config file. Relative paths resolve against
    /// the file's directory.
    fn merge_file(&mut self, path: &Path) -> Result<()> {
        let values = parse_config_text(&read_text(path)?, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |v: &str| base.join(v);
        for (k, v) in &values {
            let v = v.as_str();
            match k.as_str() {
                "manual" => self.manual = self.manual.take().or_else(|| Some(resolve(v))),
                "auto_tokens" => self.auto_tokens = self.auto_tokens.take().or_else(|| Some(resolve(v))),
                "partition" => self.partition = self.partition.take().or_else(|| Some(resolve(v))),
                "test" => self.test = self.test.take().or_else(|| Some(resolve(v))),
                "run_dir" => self.run_dir = self.run_dir.take().or_else(|| Some(resolve(v))),
                "held_out" => self.held_out = self.held_out.or(Some(parse_value(k, v)?)),
                "iterations" => self.iterations = self.iterations.or(Some(parse_value(k, v)?)),
                "gamma" => self.gamma = self.gamma.or(Some(parse_value(k, v)?)),
                "seed" => self.seed = self.seed.or(Some(parse_value(k, v)?)),
                "epochs_step1" => self.epochs_step1 = self.epochs_step1.or(Some(parse_value(k, v)?)),
                "epochs_step3" => self.epochs_step3 = self.epochs_step3.or(Some(parse_value(k, v)?)),
                "learning_rate" => self.learning_rate = self.learning_rate.or(Some(parse_value(k, v)?)),
                "batch_size" => self.batch_size = self.batch_size.or(Some(parse_value(k, v)?)),
                "amb_policy" => self.amb_policy = self.amb_policy.take().or_else(|| Some(v.to_string())),
                "carry_weights" => self.carry_weights = self.carry_weights.or(Some(parse_value(k, v)?)),
                "feature_bits" => self.feature_bits = self.feature_bits.or(Some(parse_value(k, v)?)),
                "parallelism" => self.parallelism = self.parallelism.or(Some(parse_value(k, v)?)),
                "draws" => self.draws = self.draws.or(Some(parse_value(k, v)?)),
                "draw_size" => self.draw_size = self.draw_size.or(Some(parse_value(k, v)?)),
                _ => unreachable!("keys are checked while parsing"),
            }
        }
        Ok(())
    }

    fn loop_config(&self) -> Result<LoopConfig> {
        let mut c = LoopConfig::default();
        if let Some(n) = self.iterations {
            c.iterations = n;
        }
        c.gate = GateConfig::new(self.gamma.unwrap_or(c.gate.gamma))?;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(e) = self.epochs_step1 {
            c.step1.epochs = e;
        }
        if let Some(e) = self.epochs_step3 {
            c.step3.epochs = e;
        }
        if let Some(lr) = self.learning_rate {
            c.step1.learning_rate = lr;
            c.step3.learning_rate = lr;
        }
        if let Some(b) = self.batch_size {
            c.step1.batch_size = b;
            c.step3.batch_size = b;
        }
        if let Some(p) = &self.amb_policy {
            c.amb_policy = p.parse::<AmbPolicy>()?;
        }
        if let Some(cw) = self.carry_weights {
            c.carry_weights = cw;
        }
        if let Some(b) = self.feature_bits {
            c.feature_bits = b;
        }
        c.validate()?;
        Ok(c)
    }
}

fn require_existing(name: &str, path: Option<&PathBuf>) -> Result<PathBuf> {
    let path = path.ok_or_else(|| Error::argument(format!("`{name}` is required")))?;
    if !path.exists() {
        return Err(Error::argument(format!("{name} path {} does not exist", path.display())));
    }
    Ok(path.clone())
}

fn run_loop_command(mut a: LoopArgs) -> Result<Status> {
    if let Some(cfg) = a.config.clone() {
        a.merge_file(&cfg)?;
    }
    let config = a.loop_config()?;
    let manual_path = require_existing("manual", a.manual.as_ref())?;
    let auto_path = require_existing("auto_tokens", a.auto_tokens.as_ref())?;
    if a.partition.is_some() {
        require_existing("partition", a.partition.as_ref())?;
    }
    if a.test.is_some() {
        require_existing("test", a.test.as_ref())?;
    }
    let draws = a.draws.unwrap_or(DEFAULT_DRAWS);
    let draw_size = a.draw_size.unwrap_or(DEFAULT_DRAW_SIZE);

    let manual_all = read_annotation_file(&manual_path)?;
    let (manual, test) = match &a.test {
        Some(t) => (manual_all, read_annotation_file(t)?),
        None => split_train_test(&manual_all, a.held_out.unwrap_or(1), config.seed)?,
    };
    if test.len() < draw_size {
        return Err(Error::argument(format!(
            "test set has {} paragraphs, fewer than the bootstrap draw size {draw_size}",
            test.len()
        )));
    }
    let auto = load_paragraphs(&auto_path, a.partition.as_deref())?;

    let base = a
        .run_dir
        .clone()
        .or_else(|| std::env::var_os(RUN_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    let dir = base.join(run_dir_name(&fingerprint(&config, &manual, &auto, &test)));
    fs::create_dir_all(&dir).map_err(|e| Error::io_at(&dir, e))?;
    write_string_atomic(&dir.join("config.json"), &(serde_json::to_string_pretty(&config).expect("config serializes") + "\n"))?;

    let outcome = with_pool(a.parallelism, || run_loop(&manual, &auto, &test, &config, Some(&dir)))??;
    if outcome.resumed > 0 {
        eprintln!("resumed {} completed iteration(s) from {}", outcome.resumed, dir.display());
    }

    let test_paragraphs: Vec<Paragraph> = test.iter().map(AnnotatedParagraph::as_paragraph).collect();
    let baseline = predict_labels(&outcome.baseline_model, &test_paragraphs);
    let final_pred = predict_labels(&outcome.final_model, &test_paragraphs);
    let comparison = bootstrap_compare(&test, &baseline, &final_pred, draws, draw_size, config.seed)?;

    let mut report = String::new();
    writeln!(report, "run {}", dir.file_name().unwrap_or_default().to_string_lossy()).unwrap();
    writeln!(report, "manual {} paragraphs, auto {} paragraphs, test {} paragraphs", manual.len(), auto.len(), test.len()).unwrap();
    let mut degraded = false;
    for r in &outcome.records {
        let f1 = |m: &Option<MetricSet>| m.as_ref().map_or(f64::NAN, |m| m.span_f1);
        writeln!(
            report,
            "iteration {}: amb {:.2}%, auto paragraphs used {}, span-F1 step1 {:.4}, final {:.4}",
            r.iteration,
            100.0 * r.gate_stats.amb_fraction(),
            r.auto_paragraphs_used,
            f1(&r.step1_metrics),
            f1(&r.metrics)
        )
        .unwrap();
        for w in &r.warnings {
            writeln!(report, "  warning: {w}").unwrap();
            degraded = true;
        }
    }
    report.push_str(&comparison.render_table("iteration-1 step1", "final"));
    write_string_atomic(&dir.join("report.txt"), &report)?;
    let json = serde_json::to_string_pretty(&serde_json::json!({ "records": outcome.records, "comparison": comparison }))
        .expect("report serializes");
    write_string_atomic(&dir.join("metrics.json"), &(json + "\n"))?;
    write_atomic(&dir.join("final.model"), |w| outcome.final_model.write(w))?;
    print!("{report}");
    Ok(if degraded { Status::Partial } else { Status::Done })
}

fn render_metrics(name: &str, m: &MetricSet) -> String {
    let mut s = String::new();
    writeln!(s, "{name}: {} tokens", m.tokens).unwrap();
    for (metric, value) in crate::eval::METRIC_NAMES.iter().zip(m.headline()) {
        writeln!(s, "  {metric:<16}{value:.4}").unwrap();
    }
    s
}

fn eval(a: EvalArgs) -> Result<Status> {
    let gold = read_annotation_file(&a.gold)?;
    let pred_a = read_annotation_file(&a.pred)?;
    let pred_b = match &a.pred_b {
        Some(p) => read_annotation_file(p)?,
        None => pred_a.clone(),
    };
    let full_a = score(&gold, &pred_a)?;
    let full_b = score(&gold, &pred_b)?;
    let boot = bootstrap_compare(&gold, &pred_a, &pred_b, a.draws, a.draw_size, a.seed)?;
    let mut out = render_metrics("A", &full_a);
    if a.pred_b.is_some() {
        out.push_str(&render_metrics("B", &full_b));
    }
    out.push_str(&boot.render_table("A", "B"));
    print!("{out}");
    if let Some(path) = &a.json {
        let json = serde_json::to_string_pretty(&serde_json::json!({ "a": full_a, "b": full_b, "bootstrap": boot }))
            .expect("report serializes");
        write_string_atomic(path, &(json + "\n"))?;
    }
    Ok(Status::Done)
}

fn counts(a: CountsArgs) -> Result<Status> {
    let mut all = Vec::new();
    for f in &a.files {
        all.extend(read_annotation_file(f)?);
    }
    let c = label_counts(&all);
    print!("{}", c.render_table());
    println!("{:<24}{:>8}", "total", c.total());
    Ok(Status::Done)
}

fn diff(a: DiffArgs) -> Result<Status> {
    let gold = read_annotation_file(&a.gold)?;
    let pred = read_annotation_file(&a.pred)?;
    let style = match a.style {
        StyleArg::Ansi => DiffStyle::Ansi,
        StyleArg::Brackets => DiffStyle::Brackets,
        StyleArg::Auto if io::stdout().is_terminal() => DiffStyle::Ansi,
        StyleArg::Auto => DiffStyle::Brackets,
    };
    let text = diff_report(&gold, &pred, style)?;
    let mut stdout = io::stdout().lock();
    stdout.write_all(text.as_bytes())?;
    Ok(Status::Done)
}

fn synth(a: SynthArgs) -> Result<Status> {
    let corpus = generate(&SyntheticConfig { manual: a.manual, auto: a.auto, test: a.test, seed: a.seed, ..Default::default() });
    write_atomic(&a.out.join("manual.conll"), |w| write_annotations(&corpus.manual, w))?;
    write_atomic(&a.out.join("test.conll"), |w| write_annotations(&corpus.test, w))?;
    write_atomic(&a.out.join("auto.gold.conll"), |w| write_annotations(&corpus.auto, w))?;
    let mut docs: BTreeMap<&str, Vec<Vec<String>>> = BTreeMap::new();
    for p in &corpus.auto {
        docs.entry(&p.paper_id).or_default().push(p.words.clone());
    }
    for (id, paragraphs) in docs {
        let doc = crate::ingest::TokenizedDocument { paper_id: id.to_string(), paragraphs };
        write_atomic(&a.out.join("auto-tokens").join(format!("{id}.txt")), |w| write_token_file(&doc, w))?;
    }
    println!(
        "manual={} auto={} test={} -> {}",
        corpus.manual.len(),
        corpus.auto.len(),
        corpus.test.len(),
        a.out.display()
    );
    Ok(Status::Done)
}
