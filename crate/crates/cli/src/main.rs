use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgGroup, Args, Parser, Subcommand};
use log::{info, warn};

use txclass::corpus::{generate_synthetic, load_dataset, write_dataset, RecordReader};
use txclass::eval::{run_experiment, ExperimentConfig};
use txclass::features::FeatureGroups;
use txclass::lexicon::Lexicon;
use txclass::pipeline::{classify_batch, induce_lexicon, load_bundle, save_bundle};
use txclass::{CategorySet, Config, GazetteerConfig, SynthConfig};

#[derive(Parser)]
#[command(name = "txclass", version, about = "Banking transaction classifier")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus.
    Synth(SynthArgs),
    /// Train a model bundle from a labeled dataset.
    Train(TrainArgs),
    /// Classify a dataset file with a trained bundle.
    Classify(ClassifyArgs),
    /// Run the split/sampling/stage experiment protocol.
    Eval(EvalArgs),
    /// Dump per-category lexica.
    Lexicon(LexiconArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.6)]
    duplicate_rate: f64,
    #[arg(long, default_value_t = 200)]
    records_per_category: usize,
    /// Use category-disjoint vocabularies.
    #[arg(long)]
    disjoint: bool,
    /// Output CSV (standard output when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Config file plus per-key overrides; flags win over the file.
#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// similarity.threshold
    #[arg(long)]
    threshold: Option<f64>,
    /// lexicon.unigram_min
    #[arg(long)]
    unigram_min: Option<usize>,
    /// lexicon.bigram_min
    #[arg(long)]
    bigram_min: Option<usize>,
    /// features.groups, e.g. `all` or `word+lex+amount`
    #[arg(long)]
    features: Option<FeatureGroups>,
    /// features.word_ngram_orders as `min-max`
    #[arg(long, value_parser = parse_orders)]
    word_orders: Option<(usize, usize)>,
    /// features.char_ngram_orders as `min-max`
    #[arg(long, value_parser = parse_orders)]
    char_orders: Option<(usize, usize)>,
    /// svm.c
    #[arg(long)]
    svm_c: Option<f64>,
    /// svm.tolerance
    #[arg(long)]
    svm_tolerance: Option<f64>,
    /// svm.max_epochs
    #[arg(long)]
    svm_max_epochs: Option<usize>,
    /// svm.seed
    #[arg(long)]
    svm_seed: Option<u64>,
    /// gazetteer.stopwords
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// gazetteer.names
    #[arg(long)]
    names: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    dataset: PathBuf,
    /// Bundle path (`.txm`).
    #[arg(long)]
    out: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ClassifyArgs {
    input: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    /// Output CSV (standard output when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Records classified per batch.
    #[arg(long, default_value_t = 4096)]
    chunk_size: usize,
    /// Override the stopword list recorded in the bundle.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Override the name list recorded in the bundle.
    #[arg(long)]
    names: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    dataset: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.4, 0.6, 0.7])]
    splits: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    samplings: usize,
    /// Comma-separated stages, e.g. `word,word+lex,all`.
    #[arg(long, value_delimiter = ',')]
    stages: Vec<FeatureGroups>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TSV table path (standard output when omitted).
    #[arg(long)]
    tsv: Option<PathBuf>,
    /// Full JSON report path.
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["bundle", "dataset"])))]
struct LexiconArgs {
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Induce lexica from a labeled dataset without training.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

/// Bad invocation that clap cannot catch.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn parse_orders(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once('-').unwrap_or((s, s));
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{s}`: {e}"));
    Ok((parse(lo)?, parse(hi)?))
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    txclass::Error::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                Config::from_toml(&text)?
            }
            None => Config::default(),
        };
        if let Some(v) = self.threshold {
            cfg.similarity.threshold = v;
        }
        if let Some(v) = self.unigram_min {
            cfg.lexicon.unigram_min = v;
        }
        if let Some(v) = self.bigram_min {
            cfg.lexicon.bigram_min = v;
        }
        if let Some(v) = &self.features {
            cfg.features.groups = v.clone();
        }
        if let Some(v) = self.word_orders {
            cfg.features.word_ngram_orders = v;
        }
        if let Some(v) = self.char_orders {
            cfg.features.char_ngram_orders = v;
        }
        if let Some(v) = self.svm_c {
            cfg.svm.c = v;
        }
        if let Some(v) = self.svm_tolerance {
            cfg.svm.tolerance = v;
        }
        if let Some(v) = self.svm_max_epochs {
            cfg.svm.max_epochs = v;
        }
        if let Some(v) = self.svm_seed {
            cfg.svm.seed = v;
        }
        if self.stopwords.is_some() {
            cfg.gazetteer.stopwords = self.stopwords.clone();
        }
        if self.names.is_some() {
            cfg.gazetteer.names = self.names.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let cfg = if args.disjoint {
        SynthConfig::disjoint(args.records_per_category, args.duplicate_rate, args.seed)
    } else {
        SynthConfig::reference(args.records_per_category, args.duplicate_rate, args.seed)
    };
    let dataset = generate_synthetic(&cfg)?;
    let mut out = output(args.out.as_deref())?;
    write_dataset(&dataset, &mut out)?;
    out.flush()?;
    info!("wrote {} records", dataset.len());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> anyhow::Result<()> {
    let cfg = args.config.resolve()?;
    let gazetteer = cfg.gazetteer()?;
    let dataset = load_dataset(&args.dataset, &CategorySet::default())
        .with_context(|| format!("reading {}", args.dataset.display()))?;
    let (bundle, report) = txclass::train_pipeline(&dataset, &gazetteer, &cfg)?;
    save_bundle(&bundle, &args.out).with_context(|| format!("writing {}", args.out.display()))?;

    let mut out = io::stdout().lock();
    writeln!(out, "records\t{}", report.total)?;
    writeln!(out, "admitted\t{}", report.admitted)?;
    writeln!(out, "skipped\t{}", report.skipped)?;
    writeln!(out, "reduction\t{:.6}", report.reduction())?;
    writeln!(out, "dimension\t{}", report.dimension)?;
    writeln!(out, "\ncategory\tunigrams\tbigrams")?;
    for s in &report.lexicon_sizes {
        writeln!(out, "{}\t{}\t{}", s.category, s.unigrams, s.bigrams)?;
    }
    writeln!(out, "\n# effective config\n{}", cfg.to_toml())?;

    if let Some(path) = &args.report {
        let json = serde_json::json!({ "report": report, "reduction": report.reduction(), "config": cfg });
        std::fs::write(path, serde_json::to_string_pretty(&json)?)?;
    }
    Ok(())
}

fn cmd_classify(args: &ClassifyArgs) -> anyhow::Result<()> {
    if args.chunk_size == 0 {
        bail!(UsageError("--chunk-size must be positive".into()));
    }
    let bundle = load_bundle(&args.bundle).with_context(|| format!("loading {}", args.bundle.display()))?;
    let mut paths = bundle.config.gazetteer.clone();
    if args.stopwords.is_some() {
        paths.stopwords = args.stopwords.clone();
    }
    if args.names.is_some() {
        paths.names = args.names.clone();
    }
    let gazetteer = Config {
        gazetteer: paths,
        ..Config::default()
    }
    .gazetteer()
    .unwrap_or_else(|e| {
        warn!("cannot load the bundle's word lists ({e}); using the built-in ones");
        GazetteerConfig::default()
    });
    for list in bundle.gazetteer_mismatches(&gazetteer) {
        warn!("{list} list differs from the one used at training time");
    }

    let mut writer = csv::WriterBuilder::new().delimiter(b';').from_writer(output(args.out.as_deref())?);
    writer.write_record(["id", "category", "stage", "confidence"])?;
    let input = File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    if input.metadata()?.len() == 0 {
        writer.flush()?;
        return Ok(());
    }
    let categories = bundle.categories().clone();
    let reader = RecordReader::new(BufReader::new(input), &categories)?;
    let mut chunk = Vec::with_capacity(args.chunk_size);
    let mut total = 0usize;
    let mut flush = |chunk: &mut Vec<txclass::TransactionRecord>| -> anyhow::Result<()> {
        for (record, c) in chunk.iter().zip(classify_batch(&bundle, &gazetteer, chunk)?) {
            writer.write_record([
                record.id.as_str(),
                categories.label(c.category),
                c.stage.as_str(),
                &format!("{:.6}", c.confidence),
            ])?;
        }
        total += chunk.len();
        chunk.clear();
        Ok(())
    };
    for record in reader {
        chunk.push(record?);
        if chunk.len() == args.chunk_size {
            flush(&mut chunk)?;
        }
    }
    flush(&mut chunk)?;
    writer.flush()?;
    info!("classified {total} records");
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let cfg = args.config.resolve()?;
    let gazetteer = cfg.gazetteer()?;
    let dataset = load_dataset(&args.dataset, &CategorySet::default())
        .with_context(|| format!("reading {}", args.dataset.display()))?;
    let experiment = ExperimentConfig {
        splits: args.splits.clone(),
        samplings: args.samplings,
        stages: if args.stages.is_empty() {
            FeatureGroups::default_stages()
        } else {
            args.stages.clone()
        },
        seed: args.seed,
    };
    let table = run_experiment(&dataset, &gazetteer, &cfg, &experiment)?;
    let mut out = output(args.tsv.as_deref())?;
    out.write_all(table.to_tsv().as_bytes())?;
    out.flush()?;
    if let Some(path) = &args.json {
        std::fs::write(path, table.to_json())?;
    }
    Ok(())
}

fn print_lexicon(lexicon: &Lexicon, categories: &CategorySet, out: &mut impl Write) -> io::Result<()> {
    for id in categories.ids() {
        let lex = lexicon.category(id);
        writeln!(
            out,
            "# {} ({} unigrams, {} bigrams)",
            categories.label(id),
            lex.unigrams.len(),
            lex.bigrams.len()
        )?;
        for u in &lex.unigrams {
            writeln!(out, "unigram\t{u}")?;
        }
        for (a, b) in &lex.bigrams {
            writeln!(out, "bigram\t{a} {b}")?;
        }
    }
    Ok(())
}

fn cmd_lexicon(args: &LexiconArgs) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    if let Some(path) = &args.bundle {
        let bundle = load_bundle(path).with_context(|| format!("loading {}", path.display()))?;
        print_lexicon(bundle.lexicon(), bundle.categories(), &mut out)?;
    } else if let Some(path) = &args.dataset {
        let cfg = args.config.resolve()?;
        let gazetteer = cfg.gazetteer()?;
        let dataset = load_dataset(path, &CategorySet::default())
            .with_context(|| format!("reading {}", path.display()))?;
        let (lexicon, admitted) = induce_lexicon(&dataset, &gazetteer, &cfg)?;
        info!("{admitted} of {} records admitted", dataset.len());
        print_lexicon(&lexicon, &dataset.categories, &mut out)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Lexicon(a) => cmd_lexicon(a),
    }
}

/// 1 usage/config, 2 data, 3 internal.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<txclass::Error>() {
            return match e {
                txclass::Error::Config(_) => 1,
                txclass::Error::Io(_) => 2,
                e if e.is_data_error() => 2,
                _ => 3,
            };
        }
        if cause.is::<io::Error>() || cause.is::<csv::Error>() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
