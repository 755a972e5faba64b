//! `stancekit` — one binary, ten subcommands, wiring the pipeline end to
//! end: lexicon induction, sequence tagging, shallow baselines, dispute
//! detection, sentiment-flow export, and cross-validated evaluation.
//!
//! Exit codes: 0 success, 1 usage error (bad flags / bad configuration),
//! 2 data error (unreadable or malformed inputs).

mod pipeline;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use stancekit::corpus::Discussion;
use stancekit::dispute::{self, DisputeFamilies};
use stancekit::eval::{self, ClassScores};
use stancekit::features::{FamilySet, FeatureExtractor, StandardizeStats};
use stancekit::icrf::{self, IsotonicCrfModel, TrainConfig};
use stancekit::lexicon::{self, GraphConfig, SentimentInventory};
use stancekit::shallow::{self, LogisticConfig};
use stancekit::{Error, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "stancekit",
    version,
    about = "Sentiment lexicon induction, (dis)agreement tagging, and dispute detection for discussion threads"
)]
struct Cli {
    /// Worker threads; defaults to the available cores. The environment
    /// variable STANCEKIT_THREADS is honoured when the flag is absent.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Induce a sentiment lexicon from a corpus by graph propagation.
    BuildLexicon(BuildLexiconArgs),
    /// Train the ordinal-constrained sequence tagger.
    TrainTagger(TrainTaggerArgs),
    /// Tag a corpus with a trained tagger model.
    Tag(TagArgs),
    /// Score prediction records against gold labels.
    EvalTagger(EvalTaggerArgs),
    /// Run a shallow stance baseline (lexicon polarity or pronoun distance).
    Baseline(BaselineArgs),
    /// Train the dispute classifier on discussion-level features.
    TrainDispute(TrainDisputeArgs),
    /// Classify discussions as dispute / non-dispute.
    DetectDispute(DetectDisputeArgs),
    /// Rank dispute features by chi-square association.
    RankFeatures(RankFeaturesArgs),
    /// Export smoothed per-speaker sentiment-flow curves as CSV.
    Flow(FlowArgs),
    /// K-fold cross-validation with ablations, baselines, and t-tests.
    Crossval(CrossvalArgs),
}

#[derive(Args, Serialize)]
struct BuildLexiconArgs {
    /// Discussion corpus, one JSON object per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Seed polarity list (`word TAB +|-` per line). Repeatable.
    #[arg(long, required = true)]
    seeds: Vec<PathBuf>,
    /// Output lexicon TSV.
    #[arg(long)]
    output: PathBuf,
    /// Keep text units that occur in at least this many discussions.
    #[arg(long, default_value_t = 10)]
    min_discussions: usize,
    /// Keep at most this many strongest co-occurrence neighbours per unit.
    #[arg(long, default_value_t = 50)]
    top_k: usize,
    /// Maximum propagation sweeps.
    #[arg(long, default_value_t = 200)]
    max_sweeps: usize,
    /// Stop when the largest per-sweep score change drops below this.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Scores at or above this become positive lexicon entries.
    #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
    pos_threshold: f64,
    /// Scores at or below this become negative lexicon entries.
    #[arg(long, default_value_t = -0.7, allow_hyphen_values = true)]
    neg_threshold: f64,
    /// Also dump the propagation graph edges as TSV.
    #[arg(long)]
    graph_output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TrainTaggerArgs {
    /// Gold-annotated discussion corpus (JSONL).
    #[arg(long)]
    corpus: PathBuf,
    /// Induced lexicon TSV.
    #[arg(long)]
    lexicon: PathBuf,
    /// Output model file (JSON; embeds the fitted feature extractor).
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated feature families: lex,syn,disc,con,sent.
    #[arg(long, default_value = "lex,syn,disc,con,sent")]
    families: String,
    /// Train without ordinal weight constraints.
    #[arg(long)]
    no_isotonic: bool,
    /// Drop all-neutral turns from the training set.
    #[arg(long)]
    downsample: bool,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Initial step size of the decaying schedule.
    #[arg(long, default_value_t = 0.1)]
    eta0: f64,
    /// Step decay horizon; 0 resolves to the number of training sequences.
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    /// L2 regularization strength.
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Lexicon score magnitude above which a feature weight is constrained.
    #[arg(long, default_value_t = 0.3)]
    theta: f64,
    /// Positive lexicon threshold used when reading the TSV.
    #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
    pos_threshold: f64,
    /// Negative lexicon threshold used when reading the TSV.
    #[arg(long, default_value_t = -0.7, allow_hyphen_values = true)]
    neg_threshold: f64,
}

#[derive(Args, Serialize)]
struct TagArgs {
    /// Corpus to tag (JSONL).
    #[arg(long)]
    corpus: PathBuf,
    /// Trained tagger model.
    #[arg(long)]
    model: PathBuf,
    /// Output prediction records (JSONL).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalTaggerArgs {
    /// Gold-annotated corpus the predictions refer to.
    #[arg(long)]
    corpus: PathBuf,
    /// Prediction records produced by `tag` or `baseline`.
    #[arg(long)]
    predictions: PathBuf,
    /// Output evaluation report (JSON).
    #[arg(long)]
    output: PathBuf,
    /// Print the soft per-class table instead of the strict one.
    #[arg(long)]
    soft: bool,
}

#[derive(Args, Serialize)]
#[command(group(
    clap::ArgGroup::new("inventory")
        .required(true)
        .multiple(false)
        .args(["seeds", "lexicon"])
))]
struct BaselineArgs {
    /// Corpus to predict on (JSONL).
    #[arg(long)]
    corpus: PathBuf,
    /// Baseline kind.
    #[arg(long, value_parser = ["polarity", "distance"])]
    kind: String,
    /// Seed polarity list(s) used as the sentiment inventory. Repeatable.
    #[arg(long)]
    seeds: Vec<PathBuf>,
    /// Lexicon TSV used as the sentiment inventory.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Output prediction records (JSONL).
    #[arg(long)]
    output: PathBuf,
    /// Labeled corpus to fit the distance baseline on (default: --corpus).
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
    pos_threshold: f64,
    #[arg(long, default_value_t = -0.7, allow_hyphen_values = true)]
    neg_threshold: f64,
    /// Logistic-regression epochs (distance baseline only).
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Logistic-regression L2 strength (distance baseline only).
    #[arg(long, default_value_t = 0.1)]
    l2: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct TrainDisputeArgs {
    /// Discussion corpus with dispute labels (JSONL).
    #[arg(long)]
    corpus: PathBuf,
    /// Trained tagger model providing sentiment sequences.
    #[arg(long)]
    tagger: PathBuf,
    /// Output classifier file (JSON).
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated feature families: lex,top,dis,senti-g,senti-l.
    #[arg(long, default_value = "lex,top,dis,senti-g,senti-l")]
    families: String,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    l2: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct DetectDisputeArgs {
    /// Discussions to classify (JSONL).
    #[arg(long)]
    corpus: PathBuf,
    /// Trained dispute classifier.
    #[arg(long)]
    model: PathBuf,
    /// Tagger model used to produce sentiment sequences.
    #[arg(long)]
    tagger: PathBuf,
    /// Output records (JSONL: discussion, is_dispute, score).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct RankFeaturesArgs {
    /// Discussion corpus with dispute labels (JSONL).
    #[arg(long)]
    corpus: PathBuf,
    /// Tagger model used to produce sentiment sequences.
    #[arg(long)]
    tagger: PathBuf,
    /// Output ranking TSV: feature TAB chi2 TAB class-direction.
    #[arg(long)]
    output: PathBuf,
    /// Ranking method.
    #[arg(long, default_value = "chi2", value_parser = ["chi2"])]
    method: String,
    /// Comma-separated feature families: lex,top,dis,senti-g,senti-l.
    #[arg(long, default_value = "lex,top,dis,senti-g,senti-l")]
    families: String,
}

#[derive(Args, Serialize)]
struct FlowArgs {
    /// Discussion corpus (JSONL).
    #[arg(long)]
    corpus: PathBuf,
    /// Discussion id to export; optional when the corpus holds exactly one.
    #[arg(long)]
    discussion: Option<String>,
    /// Output CSV.
    #[arg(long)]
    output: PathBuf,
    /// Tagger model; when absent, gold labels drive the flow.
    #[arg(long)]
    tagger: Option<PathBuf>,
    /// Gaussian smoothing bandwidth in units.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Spline samples per unit of the x axis.
    #[arg(long, default_value_t = 10)]
    samples_per_unit: usize,
}

#[derive(Args, Serialize)]
struct CrossvalArgs {
    /// Which pipeline to cross-validate.
    #[arg(long, value_parser = ["tagger", "dispute"])]
    task: String,
    /// Gold-annotated corpus (JSONL).
    #[arg(long)]
    corpus: PathBuf,
    /// Induced lexicon TSV (tagger task).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Trained tagger model (dispute task).
    #[arg(long)]
    tagger: Option<PathBuf>,
    /// Output report (JSON). The rendered tables go to stdout.
    #[arg(long)]
    output: PathBuf,
    /// Number of folds.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Fold-assignment seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Families of the headline configuration (task-specific syntax).
    #[arg(long)]
    families: Option<String>,
    /// Drop all-neutral turns from tagger training folds.
    #[arg(long)]
    downsample: bool,
    /// Train the tagger without ordinal constraints.
    #[arg(long)]
    no_isotonic: bool,
    /// Training epochs (tagger: CRF epochs; dispute: logistic epochs).
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    eta0: f64,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    /// L2 strength (tagger CRF or dispute logistic, by task).
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    theta: f64,
    #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
    pos_threshold: f64,
    #[arg(long, default_value_t = -0.7, allow_hyphen_values = true)]
    neg_threshold: f64,
}

fn main() {
    // Die quietly on a closed pipe (`stancekit ... | head`), like any
    // other command-line tool.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

/// Usage errors (bad configuration) exit 1; data errors exit 2.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::ThresholdOrder { .. } => 1,
        _ => 2,
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("STANCEKIT_THREADS") {
            Ok(raw) => raw.trim().parse::<usize>().map_err(|_| {
                Error::Config(format!(
                    "STANCEKIT_THREADS must be a positive integer, got {raw:?}"
                ))
            })?,
            Err(_) => return Ok(None),
        },
    };
    if n == 0 {
        return Err(Error::Config("thread count must be >= 1".into()));
    }
    Ok(Some(n))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))?;
    }
    match cli.command {
        Command::BuildLexicon(args) => cmd_build_lexicon(args),
        Command::TrainTagger(args) => cmd_train_tagger(args),
        Command::Tag(args) => cmd_tag(args),
        Command::EvalTagger(args) => cmd_eval_tagger(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::TrainDispute(args) => cmd_train_dispute(args),
        Command::DetectDispute(args) => cmd_detect_dispute(args),
        Command::RankFeatures(args) => cmd_rank_features(args),
        Command::Flow(args) => cmd_flow(args),
        Command::Crossval(args) => cmd_crossval(args),
    }
}

/// Load a tagger model and insist on its embedded feature extractor.
fn load_tagger(path: &Path) -> Result<(IsotonicCrfModel, FeatureExtractor)> {
    let (model, extractor) = icrf::load_model(path)?;
    let extractor = extractor.ok_or_else(|| {
        Error::ModelFormat("tagger model carries no feature extractor".into())
    })?;
    Ok((model, extractor))
}

fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    pipeline::write_file(path, &body)
}

fn cmd_build_lexicon(args: BuildLexiconArgs) -> Result<()> {
    let discussions = pipeline::load_corpus(&args.corpus)?;
    let seeds = lexicon::load_seed_files(&args.seeds)?;
    let build = pipeline::build_lexicon(
        &discussions,
        &seeds,
        &GraphConfig {
            min_discussions: args.min_discussions,
            top_k: args.top_k,
        },
        args.max_sweeps,
        args.tol,
        args.pos_threshold,
        args.neg_threshold,
    )?;
    pipeline::write_file(&args.output, &build.lexicon.to_tsv())?;
    if let Some(graph_path) = &args.graph_output {
        pipeline::write_file(graph_path, &pipeline::graph_tsv(&build.graph))?;
    }
    pipeline::write_config_echo(&args.output, "build-lexicon", &args)?;
    let edges: usize = build.graph.adjacency.iter().map(Vec::len).sum::<usize>() / 2;
    let inventory = build.lexicon.inventory();
    println!(
        "graph: {} nodes, {} edges, {} seed(+), {} seed(-)",
        build.graph.nodes.len(),
        edges,
        build.graph.seeds_pos.len(),
        build.graph.seeds_neg.len()
    );
    println!(
        "propagation: {} sweeps, final max |delta| = {:.3e}",
        build.run.sweeps,
        build.run.deltas.last().copied().unwrap_or(0.0)
    );
    println!(
        "lexicon: {} entries ({} over the positive threshold, {} under the negative) -> {}",
        build.lexicon.entries.len(),
        inventory.pos.len(),
        inventory.neg.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_train_tagger(args: TrainTaggerArgs) -> Result<()> {
    let discussions = pipeline::load_corpus(&args.corpus)?;
    let lex = pipeline::load_lexicon(&args.lexicon, args.pos_threshold, args.neg_threshold)?;
    let families = FamilySet::parse(&args.families)?;
    let config = TrainConfig {
        epochs: args.epochs,
        eta0: args.eta0,
        t0: args.t0,
        l2: args.l2,
        seed: args.seed,
        isotonic: !args.no_isotonic,
        theta_constraint: args.theta,
    };
    let trained = pipeline::train_tagger(&discussions, &lex, families, config, args.downsample)?;
    icrf::save_model(&trained.model, Some(&trained.extractor), &args.output)?;
    pipeline::write_config_echo(&args.output, "train-tagger", &args)?;
    println!(
        "trained on {} sequences / {} utterances, {} features ({} constrained) -> {}",
        trained.n_sequences,
        trained.n_utterances,
        trained.n_features,
        trained.model.constraints.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_tag(args: TagArgs) -> Result<()> {
    let discussions = pipeline::load_corpus(&args.corpus)?;
    let (model, extractor) = load_tagger(&args.model)?;
    let records = pipeline::tag_corpus(&discussions, &model, &extractor);
    pipeline::write_file(&args.output, &pipeline::to_jsonl(&records)?)?;
    pipeline::write_config_echo(&args.output, "tag", &args)?;
    println!("tagged {} utterances -> {}", records.len(), args.output.display());
    Ok(())
}

fn print_class_table(title: &str, table: &BTreeMap<String, ClassScores>) {
    println!("{title}");
    println!(
        "  {:<10} {:>9} {:>9} {:>9}",
        "class", "precision", "recall", "f1"
    );
    for (class, s) in table {
        println!(
            "  {:<10} {:>9.4} {:>9.4} {:>9.4}",
            class, s.precision, s.recall, s.f1
        );
    }
}

fn cmd_eval_tagger(args: EvalTaggerArgs) -> Result<()> {
    let discussions = pipeline::load_corpus(&args.corpus)?;
    let records = pipeline::parse_tag_records(&pipeline::read_file(&args.predictions)?)?;
    let pred = pipeline::align_predictions(&discussions, &records)?;
    let gold = pipeline::gold_pairs(&discussions);
    let report = eval::evaluate(&gold, &pred)?;
    write_json_pretty(&args.output, &report)?;
    pipeline::write_config_echo(&args.output, "eval-tagger", &args)?;
    println!("n = {}  accuracy = {:.4}", report.n, report.accuracy);
    if args.soft {
        print_class_table("per-class scores (soft):", &report.soft);
    } else {
        print_class_table("per-class scores (strict):", &report.strict);
    }
    println!("report -> {}", args.output.display());
    Ok(())
}

fn load_inventory(
    seeds: &[PathBuf],
    lexicon_path: &Option<PathBuf>,
    pos_threshold: f64,
    neg_threshold: f64,
) -> Result<SentimentInventory> {
    if let Some(path) = lexicon_path {
        let lex = pipeline::load_lexicon(path, pos_threshold, neg_threshold)?;
        Ok(lex.inventory())
    } else {
        Ok(lexicon::load_seed_files(seeds)?.inventory())
    }
}

fn cmd_baseline(args: BaselineArgs) -> Result<()> {
    let discussions = pipeline::load_corpus(&args.corpus)?;
    let inventory = load_inventory(
        &args.seeds,
        &args.lexicon,
        args.pos_threshold,
        args.neg_threshold,
    )?;
    let records = match args.kind.as_str() {
        "polarity" => {
            pipeline::baseline_records(&discussions, &pipeline::BaselinePredictor::Polarity(&inventory))
        }
        _ => {
            let train = match &args.train {
                Some(path) => pipeline::load_corpus(path)?,
                None => discussions.clone(),
            };
            let config = LogisticConfig {
                epochs: args.epochs,
                l2: args.l2,
                seed: args.seed,
            };
            let model = pipeline::train_distance_baseline(&train, &inventory, config)?;
            pipeline::baseline_records(
                &discussions,
                &pipeline::BaselinePredictor::Distance(&model, &inventory),
            )
        }
    };
    pipeline::write_file(&args.output, &pipeline::to_jsonl(&records)?)?;
    pipeline::write_config_echo(&args.output, "baseline", &args)?;
    println!(
        "{} baseline predicted {} utterances -> {}",
        args.kind,
        records.len(),
        args.output.display()
    );
    Ok(())
}

fn dispute_gold(discussions: &[Discussion]) -> Result<Vec<bool>> {
    discussions
        .iter()
        .map(|d| {
            d.dispute_gold
                .map(|g| g.is_dispute)
                .ok_or_else(|| Error::InvalidValue {
                    field: "dispute_gold".into(),
                    message: format!("discussion {:?} has no dispute label", d.id),
                })
        })
        .collect()
}

fn cmd_train_dispute(args: TrainDisputeArgs) -> Result<()> {
    let discussions = pipeline::load_corpus(&args.corpus)?;
    let gold = dispute_gold(&discussions)?;
    let (tagger, extractor) = load_tagger(&args.tagger)?;
    let families = DisputeFamilies::parse(&args.families)?;
    let stats = dispute::fit_discussion_stats(&discussions);
    let vectors = dispute::assemble_all(&discussions, &tagger, &extractor, families, Some(&stats));
    let config = LogisticConfig {
        epochs: args.epochs,
        l2: args.l2,
        seed: args.seed,
    };
    let model = dispute::train_dispute(&vectors, &gold, config)?;
    let attachments = serde_json::json!({
        "families": families.to_string(),
        "stats": stats,
    });
    shallow::save_model(&model, attachments, &args.output)?;
    pipeline::write_config_echo(&args.output, "train-dispute", &args)?;
    let positives = gold.iter().filter(|&&g| g).count();
    println!(
        "trained on {} discussions ({} dispute, {} non-dispute), {} features -> {}",
        discussions.len(),
        positives,
        discussions.len() - positives,
        model.weights.len(),
        args.output.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct DisputeRecord {
    discussion: String,
    is_dispute: bool,
    score: f64,
}

fn cmd_detect_dispute(args: DetectDisputeArgs) -> Result<()> {
    let discussions = pipeline::load_corpus(&args.corpus)?;
    let (model, attachments) = shallow::load_model(&args.model)?;
    let families = attachments
        .get("families")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::ModelFormat("dispute model lacks a families attachment".into()))?;
    let families = DisputeFamilies::parse(families)?;
    let stats: StandardizeStats = serde_json::from_value(
        attachments
            .get("stats")
            .cloned()
            .ok_or_else(|| Error::ModelFormat("dispute model lacks a stats attachment".into()))?,
    )?;
    let (tagger, extractor) = load_tagger(&args.tagger)?;
    let vectors = dispute::assemble_all(&discussions, &tagger, &extractor, families, Some(&stats));
    let records: Vec<DisputeRecord> = discussions
        .iter()
        .zip(&vectors)
        .map(|(disc, fv)| {
            let (is_dispute, score) = dispute::predict_dispute(&model, fv);
            DisputeRecord {
                discussion: disc.id.clone(),
                is_dispute,
                score,
            }
        })
        .collect();
    pipeline::write_file(&args.output, &pipeline::to_jsonl(&records)?)?;
    pipeline::write_config_echo(&args.output, "detect-dispute", &args)?;
    let positives = records.iter().filter(|r| r.is_dispute).count();
    println!(
        "classified {} discussions ({} predicted disputes) -> {}",
        records.len(),
        positives,
        args.output.display()
    );
    Ok(())
}

fn cmd_rank_features(args: RankFeaturesArgs) -> Result<()> {
    let discussions = pipeline::load_corpus(&args.corpus)?;
    let gold = dispute_gold(&discussions)?;
    let (tagger, extractor) = load_tagger(&args.tagger)?;
    let families = DisputeFamilies::parse(&args.families)?;
    let stats = dispute::fit_discussion_stats(&discussions);
    let vectors = dispute::assemble_all(&discussions, &tagger, &extractor, families, Some(&stats));
    let ranked = eval::chi2_rank(vectors.iter().zip(gold.iter().copied()));
    let tsv = eval::chi2_tsv(&ranked, dispute::DISPUTE_CLASS, dispute::NON_DISPUTE_CLASS);
    pipeline::write_file(&args.output, &tsv)?;
    pipeline::write_config_echo(&args.output, "rank-features", &args)?;
    println!(
        "ranked {} features by {} -> {}",
        ranked.len(),
        args.method,
        args.output.display()
    );
    if let Some(top) = ranked.first() {
        println!("top feature: {} (chi2 = {:.6})", top.name, top.chi2);
    }
    Ok(())
}

fn cmd_flow(args: FlowArgs) -> Result<()> {
    let discussions = pipeline::load_corpus(&args.corpus)?;
    let disc = match &args.discussion {
        Some(id) => discussions
            .iter()
            .find(|d| &d.id == id)
            .ok_or_else(|| Error::InvalidValue {
                field: "discussion".into(),
                message: format!("no discussion with id {id:?} in the corpus"),
            })?,
        None if discussions.len() == 1 => &discussions[0],
        None => {
            return Err(Error::Config(format!(
                "corpus holds {} discussions; pick one with --discussion",
                discussions.len()
            )))
        }
    };
    let units = match &args.tagger {
        Some(path) => {
            let (model, extractor) = load_tagger(path)?;
            dispute::tag_units(disc, &model, &extractor)
        }
        None => dispute::gold_units(disc),
    };
    let flows = dispute::sentiment_flow(&units, args.sigma, args.samples_per_unit)?;
    let boundaries = dispute::turn_boundaries(&units);
    pipeline::write_file(&args.output, &dispute::flow_to_csv(&flows, &boundaries))?;
    pipeline::write_config_echo(&args.output, "flow", &args)?;
    let samples: usize = flows.iter().map(|f| f.points.len()).sum();
    println!(
        "discussion {}: {} speakers, {} units, {} samples -> {}",
        disc.id,
        flows.len(),
        units.len(),
        samples,
        args.output.display()
    );
    Ok(())
}

fn cmd_crossval(args: CrossvalArgs) -> Result<()> {
    let discussions = pipeline::load_corpus(&args.corpus)?;
    match args.task.as_str() {
        "tagger" => {
            let lexicon_path = args.lexicon.as_ref().ok_or_else(|| {
                Error::Config("--task tagger requires --lexicon".into())
            })?;
            let lex =
                pipeline::load_lexicon(lexicon_path, args.pos_threshold, args.neg_threshold)?;
            let families = match &args.families {
                Some(list) => FamilySet::parse(list)?,
                None => FamilySet::default(),
            };
            let cv = pipeline::TaggerCvConfig {
                k: args.k,
                seed: args.seed,
                families,
                train: TrainConfig {
                    epochs: args.epochs.unwrap_or(30),
                    eta0: args.eta0,
                    t0: args.t0,
                    l2: args.l2.unwrap_or(1.0),
                    seed: args.seed,
                    isotonic: !args.no_isotonic,
                    theta_constraint: args.theta,
                },
                downsample: args.downsample,
                logistic: LogisticConfig {
                    seed: args.seed,
                    ..LogisticConfig::default()
                },
            };
            let report = pipeline::crossval_tagger(discussions, &lex, &cv)?;
            write_json_pretty(&args.output, &report)?;
            pipeline::write_config_echo(&args.output, "crossval", &args)?;
            print!("{}", pipeline::render_tagger_report(&report));
            println!("report -> {}", args.output.display());
        }
        _ => {
            let tagger_path = args.tagger.as_ref().ok_or_else(|| {
                Error::Config("--task dispute requires --tagger".into())
            })?;
            let (tagger, extractor) = load_tagger(tagger_path)?;
            let families = match &args.families {
                Some(list) => DisputeFamilies::parse(list)?,
                None => DisputeFamilies::default(),
            };
            let cv = pipeline::DisputeCvConfig {
                k: args.k,
                seed: args.seed,
                families,
                logistic: LogisticConfig {
                    epochs: args.epochs.unwrap_or(200),
                    l2: args.l2.unwrap_or(0.1),
                    seed: args.seed,
                },
            };
            let report = pipeline::crossval_dispute(discussions, &tagger, &extractor, &cv)?;
            write_json_pretty(&args.output, &report)?;
            pipeline::write_config_echo(&args.output, "crossval", &args)?;
            print!("{}", pipeline::render_dispute_report(&report));
            println!("report -> {}", args.output.display());
        }
    }
    Ok(())
}
