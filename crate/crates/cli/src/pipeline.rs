//! Shared pipeline plumbing behind the subcommands: corpus/lexicon loading,
//! tagger training, prediction records, and the cross-validation harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stancekit::corpus::{self, Discussion, Stance};
use stancekit::dispute::{self, DisputeFamilies};
use stancekit::eval::{self, EvalReport};
use stancekit::features::{fit_extractor, FamilySet, FeatureConfig, FeatureExtractor};
use stancekit::icrf::{self, IsotonicCrfModel, TaggedSequence, TrainConfig};
use stancekit::lexicon::{
    self, build_graph, propagate, GraphConfig, Lexicon, PropagationGraph, PropagationRun,
    SentimentInventory,
};
use stancekit::shallow::{self, LinearModel, LogisticConfig};
use stancekit::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

// --- File plumbing ---------------------------------------------------------

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::FileRead {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| Error::FileWrite {
        path: path.display().to_string(),
        source,
    })
}

/// Parse a JSONL corpus and induce gold labels from its annotations.
pub fn load_corpus(path: &Path) -> Result<Vec<Discussion>> {
    let text = read_file(path)?;
    let mut discussions = corpus::parse_discussions(&text)?;
    corpus::induce_all_labels(&mut discussions)?;
    Ok(discussions)
}

pub fn load_lexicon(path: &Path, pos_threshold: f64, neg_threshold: f64) -> Result<Lexicon> {
    Lexicon::from_tsv(&read_file(path)?, pos_threshold, neg_threshold)
}

/// Every run writes a config echo next to its primary output. The echo is
/// the subcommand name plus its parsed arguments — no timestamps, no
/// environment, so reruns are byte-identical.
pub fn write_config_echo<T: Serialize>(output: &Path, command: &str, args: &T) -> Result<()> {
    let echo = serde_json::json!({ "command": command, "args": args });
    let path = output.with_file_name(format!(
        "{}.config.json",
        output
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "output".to_string())
    ));
    let mut body = serde_json::to_string_pretty(&echo)?;
    body.push('\n');
    write_file(&path, &body)
}

// --- Lexicon construction --------------------------------------------------

pub struct LexiconBuild {
    pub lexicon: Lexicon,
    pub graph: PropagationGraph,
    pub run: PropagationRun,
}

#[allow(clippy::too_many_arguments)]
pub fn build_lexicon(
    discussions: &[Discussion],
    seeds: &lexicon::SeedSets,
    graph_config: &GraphConfig,
    max_sweeps: usize,
    tol: f64,
    pos_threshold: f64,
    neg_threshold: f64,
) -> Result<LexiconBuild> {
    let graph = build_graph(discussions, seeds, graph_config)?;
    let run = propagate(&graph, max_sweeps, tol);
    let lexicon = lexicon::emit_lexicon(&graph, &run.scores, pos_threshold, neg_threshold)?;
    Ok(LexiconBuild { lexicon, graph, run })
}

/// Graph dump TSV: `payload_a TAB payload_b TAB weight`, edges in canonical
/// node order.
pub fn graph_tsv(graph: &PropagationGraph) -> String {
    let mut out = String::new();
    for (i, list) in graph.adjacency.iter().enumerate() {
        for &(j, w) in list {
            if i < j {
                writeln!(
                    out,
                    "{}\t{}\t{:.12}",
                    graph.nodes[i].payload, graph.nodes[j].payload, w
                )
                .expect("writing to String cannot fail");
            }
        }
    }
    out
}

// --- Tagger training -------------------------------------------------------

/// One `TaggedSequence` per non-empty turn, labels read from induced gold
/// (missing gold counts as neutral).
pub fn training_sequences(
    discussions: &[Discussion],
    extractor: &FeatureExtractor,
) -> Result<Vec<TaggedSequence>> {
    let mut sequences = Vec::new();
    for disc in discussions {
        for (ti, turn) in disc.turns.iter().enumerate() {
            if turn.utterances.is_empty() {
                continue;
            }
            let features = (0..turn.utterances.len())
                .map(|ui| extractor.extract(disc, ti, ui))
                .collect();
            let labels = turn
                .utterances
                .iter()
                .map(|u| {
                    u.gold
                        .as_ref()
                        .map(|g| g.label)
                        .unwrap_or(corpus::SentimentLabel::Neutral)
                })
                .collect();
            sequences.push(TaggedSequence::new(features, labels)?);
        }
    }
    Ok(sequences)
}

pub struct TrainedTagger {
    pub model: IsotonicCrfModel,
    pub extractor: FeatureExtractor,
    pub n_sequences: usize,
    pub n_utterances: usize,
    pub n_features: usize,
}

/// Fit the extractor on `train`, build per-turn sequences, register
/// monotone constraints from the lexicon, and run projected SGD.
pub fn train_tagger(
    train: &[Discussion],
    lexicon: &Lexicon,
    families: FamilySet,
    config: TrainConfig,
    downsample: bool,
) -> Result<TrainedTagger> {
    let train_set: Vec<Discussion> = if downsample {
        corpus::downsample(train.to_vec())
    } else {
        train.to_vec()
    };
    let feature_config = FeatureConfig {
        families,
        sentiment: lexicon.inventory(),
        ..FeatureConfig::default()
    };
    let extractor = fit_extractor(&train_set, feature_config);
    let sequences = training_sequences(&train_set, &extractor)?;
    let names: BTreeSet<String> = sequences
        .iter()
        .flat_map(|s| s.features.iter())
        .flat_map(|fv| fv.iter().map(|(n, _)| n.to_string()))
        .collect();
    let registry = icrf::constraint_registry(
        names.iter().map(|s| s.as_str()),
        lexicon,
        config.theta_constraint,
    );
    let n_utterances = sequences.iter().map(|s| s.labels.len()).sum();
    let model = icrf::train(&sequences, registry, config)?;
    Ok(TrainedTagger {
        n_sequences: sequences.len(),
        n_utterances,
        n_features: names.len(),
        model,
        extractor,
    })
}

// --- Prediction records ----------------------------------------------------

/// One prediction line. `label` is the five-point tag when the predictor
/// produces one; stance-only baselines omit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagRecord {
    pub discussion: String,
    pub utterance_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub stance: String,
}

pub fn tag_corpus(
    discussions: &[Discussion],
    model: &IsotonicCrfModel,
    extractor: &FeatureExtractor,
) -> Vec<TagRecord> {
    let mut records = Vec::new();
    for disc in discussions {
        for (ti, turn) in disc.turns.iter().enumerate() {
            if turn.utterances.is_empty() {
                continue;
            }
            let features: Vec<_> = (0..turn.utterances.len())
                .map(|ui| extractor.extract(disc, ti, ui))
                .collect();
            let (labels, stances) = icrf::predict_and_collapse(model, &features);
            for ((utt, label), stance) in turn.utterances.iter().zip(labels).zip(stances) {
                records.push(TagRecord {
                    discussion: disc.id.clone(),
                    utterance_id: utt.id.clone(),
                    label: Some(label.as_str().to_string()),
                    stance: stance.as_str().to_string(),
                });
            }
        }
    }
    records
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_tag_records(jsonl: &str) -> Result<Vec<TagRecord>> {
    let mut records = Vec::new();
    for (i, line) in jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TagRecord =
            serde_json::from_str(line).map_err(|e| Error::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// Gold (stance, turn-derived) pairs in corpus order.
pub fn gold_pairs(discussions: &[Discussion]) -> Vec<(Stance, bool)> {
    let mut pairs = Vec::new();
    for disc in discussions {
        for turn in &disc.turns {
            for utt in &turn.utterances {
                let (stance, from_turn) = match &utt.gold {
                    Some(g) => (g.label.collapse(), g.provenance == corpus::Provenance::Turn),
                    None => (Stance::Neutral, false),
                };
                pairs.push((stance, from_turn));
            }
        }
    }
    pairs
}

/// Align prediction records with the corpus: every utterance needs exactly
/// one prediction, and stray ids are rejected.
pub fn align_predictions(
    discussions: &[Discussion],
    records: &[TagRecord],
) -> Result<Vec<Stance>> {
    let mut by_id: BTreeMap<&str, &TagRecord> = BTreeMap::new();
    for record in records {
        if by_id.insert(record.utterance_id.as_str(), record).is_some() {
            return Err(Error::InvalidValue {
                field: "predictions".into(),
                message: format!("duplicate prediction for utterance {:?}", record.utterance_id),
            });
        }
    }
    let mut aligned = Vec::new();
    let mut seen = 0usize;
    for disc in discussions {
        for turn in &disc.turns {
            for utt in &turn.utterances {
                let record = by_id.get(utt.id.as_str()).ok_or_else(|| Error::InvalidValue {
                    field: "predictions".into(),
                    message: format!("no prediction for utterance {:?}", utt.id),
                })?;
                let stance = Stance::parse(&record.stance).ok_or_else(|| Error::InvalidValue {
                    field: "stance".into(),
                    message: format!("unknown stance {:?}", record.stance),
                })?;
                aligned.push(stance);
                seen += 1;
            }
        }
    }
    if seen != by_id.len() {
        let corpus_ids: BTreeSet<&str> = discussions
            .iter()
            .flat_map(|d| d.turns.iter())
            .flat_map(|t| t.utterances.iter())
            .map(|u| u.id.as_str())
            .collect();
        let stray = by_id
            .keys()
            .find(|id| !corpus_ids.contains(**id))
            .copied()
            .unwrap_or("?");
        return Err(Error::InvalidValue {
            field: "predictions".into(),
            message: format!("prediction for unknown utterance {stray:?}"),
        });
    }
    Ok(aligned)
}

// --- Shallow baselines ------------------------------------------------------

/// Train the logistic distance-feature baseline on gold stances.
pub fn train_distance_baseline(
    train: &[Discussion],
    inventory: &SentimentInventory,
    config: LogisticConfig,
) -> Result<LinearModel> {
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for disc in train {
        for turn in &disc.turns {
            for utt in &turn.utterances {
                vectors.push(shallow::distance_feature_vector(utt, inventory));
                let stance = utt
                    .gold
                    .as_ref()
                    .map(|g| g.label.collapse())
                    .unwrap_or(Stance::Neutral);
                labels.push(stance.as_str().to_string());
            }
        }
    }
    shallow::logistic_train(&vectors, &labels, config)
}

pub enum BaselinePredictor<'a> {
    Polarity(&'a SentimentInventory),
    Distance(&'a LinearModel, &'a SentimentInventory),
}

pub fn baseline_records(discussions: &[Discussion], predictor: &BaselinePredictor) -> Vec<TagRecord> {
    let mut records = Vec::new();
    for disc in discussions {
        for turn in &disc.turns {
            for utt in &turn.utterances {
                let stance = match predictor {
                    BaselinePredictor::Polarity(inv) => shallow::polarity_baseline(utt, inv),
                    BaselinePredictor::Distance(model, inv) => {
                        let fv = shallow::distance_feature_vector(utt, inv);
                        let (class, _) = shallow::logistic_predict(model, &fv);
                        Stance::parse(class).unwrap_or(Stance::Neutral)
                    }
                };
                records.push(TagRecord {
                    discussion: disc.id.clone(),
                    utterance_id: utt.id.clone(),
                    label: None,
                    stance: stance.as_str().to_string(),
                });
            }
        }
    }
    records
}

// --- Cross-validation ------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

/// One fold's flattened metric values, keyed by metric name.
pub type FoldMetrics = BTreeMap<String, f64>;

/// A labeled pair of per-fold metric series fed to the paired t-tests.
type MetricComparison<'a> = (&'a str, &'a [FoldMetrics], &'a [FoldMetrics]);

pub fn mean_sd_map(folds: &[BTreeMap<String, f64>]) -> BTreeMap<String, MeanSd> {
    eval::summarize_folds(folds)
        .into_iter()
        .map(|(k, (mean, sd))| (k, MeanSd { mean, sd }))
        .collect()
}

/// Flatten an eval report into named fold metrics.
pub fn flatten_report(report: &EvalReport) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    out.insert("accuracy".to_string(), report.accuracy);
    for (mode, table) in [("strict", &report.strict), ("soft", &report.soft)] {
        for (class, scores) in table {
            out.insert(format!("{mode}:{class}:precision"), scores.precision);
            out.insert(format!("{mode}:{class}:recall"), scores.recall);
            out.insert(format!("{mode}:{class}:f1"), scores.f1);
        }
    }
    out
}

pub struct TaggerFoldOutput {
    pub model: IsotonicCrfModel,
    /// Read by the fold-isolation tests; the binary only needs the report.
    #[allow(dead_code)]
    pub extractor: FeatureExtractor,
    pub report: EvalReport,
}

/// Train on `train`, evaluate on `test`. Extraction statistics (IDF,
/// numeric-feature moments) are fitted on the training fold only; the test
/// fold never touches fitting.
pub fn run_tagger_fold(
    train: &[Discussion],
    test: &[Discussion],
    lexicon: &Lexicon,
    families: FamilySet,
    config: TrainConfig,
    downsample: bool,
) -> Result<TaggerFoldOutput> {
    let trained = train_tagger(train, lexicon, families, config, downsample)?;
    let records = tag_corpus(test, &trained.model, &trained.extractor);
    let pred = align_predictions(test, &records)?;
    let gold = gold_pairs(test);
    let report = eval::evaluate(&gold, &pred)?;
    Ok(TaggerFoldOutput {
        model: trained.model,
        extractor: trained.extractor,
        report,
    })
}

fn stance_eval(gold: &[(Stance, bool)], pred: &[Stance]) -> Result<BTreeMap<String, f64>> {
    Ok(flatten_report(&eval::evaluate(gold, pred)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassRow {
    pub precision: MeanSd,
    pub recall: MeanSd,
    pub f1: MeanSd,
}

#[derive(Debug, Clone, Serialize)]
pub struct SettingRow {
    pub setting: String,
    pub families: String,
    pub metrics: BTreeMap<String, MeanSd>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TTestRow {
    pub comparison: String,
    pub metric: String,
    pub t: f64,
    pub p: f64,
    pub degenerate: bool,
}

fn class_table(
    summary: &BTreeMap<String, MeanSd>,
    mode: &str,
) -> BTreeMap<String, ClassRow> {
    let mut out = BTreeMap::new();
    for stance in Stance::ALL {
        let class = stance.as_str();
        let get = |metric: &str| {
            summary
                .get(&format!("{mode}:{class}:{metric}"))
                .copied()
                .unwrap_or(MeanSd { mean: 0.0, sd: 0.0 })
        };
        out.insert(
            class.to_string(),
            ClassRow {
                precision: get("precision"),
                recall: get("recall"),
                f1: get("f1"),
            },
        );
    }
    out
}

fn paired_tests(comparisons: &[MetricComparison<'_>], metrics: &[&str]) -> Result<Vec<TTestRow>> {
    let mut rows = Vec::new();
    for (name, a, b) in comparisons {
        for &metric in metrics {
            let xs: Vec<f64> = a.iter().map(|m| m.get(metric).copied().unwrap_or(0.0)).collect();
            let ys: Vec<f64> = b.iter().map(|m| m.get(metric).copied().unwrap_or(0.0)).collect();
            let t = eval::paired_t_test(&xs, &ys)?;
            rows.push(TTestRow {
                comparison: name.to_string(),
                metric: metric.to_string(),
                t: t.t,
                p: t.p,
                degenerate: t.degenerate,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct TaggerCvConfig {
    pub k: usize,
    pub seed: u64,
    pub families: FamilySet,
    pub train: TrainConfig,
    pub downsample: bool,
    pub logistic: LogisticConfig,
}

#[derive(Serialize)]
pub struct TaggerCvReport {
    pub task: String,
    pub k: usize,
    pub seed: u64,
    pub n_discussions: usize,
    pub n_utterances: usize,
    pub families: String,
    pub lexicon_entries: usize,
    pub constrained_features: usize,
    pub accuracy: MeanSd,
    /// Per-class precision/recall/F1 over the 3-way collapse, strict rules.
    pub strict: BTreeMap<String, ClassRow>,
    /// Same classes under the soft (turn-provenance-forgiving) rules.
    pub soft: BTreeMap<String, ClassRow>,
    /// Cumulative family ladder: Lex, + Syn, + Disc, + Con, + Sent.
    pub ablation: Vec<SettingRow>,
    pub baselines: Vec<SettingRow>,
    /// The same family set trained without ordinal constraints.
    pub plain: SettingRow,
    pub t_tests: Vec<TTestRow>,
    /// Raw per-fold metrics of the headline configuration.
    pub fold_metrics: Vec<BTreeMap<String, f64>>,
}

pub fn crossval_tagger(
    discussions: Vec<Discussion>,
    lexicon: &Lexicon,
    cv: &TaggerCvConfig,
) -> Result<TaggerCvReport> {
    let n_discussions = discussions.len();
    let n_utterances = discussions.iter().map(|d| d.utterance_count()).sum();
    let folds = corpus::split_folds(discussions, cv.k, cv.seed)?;

    let fold_pair = |i: usize| -> (Vec<Discussion>, &[Discussion]) {
        let train: Vec<Discussion> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect();
        (train, &folds[i])
    };

    // Cumulative ablation ladder.
    let ladder = FamilySet::cumulative();
    let mut ladder_folds: Vec<Vec<BTreeMap<String, f64>>> = Vec::new();
    for (_, fams) in &ladder {
        let mut per_fold = Vec::new();
        for i in 0..cv.k {
            let (train, test) = fold_pair(i);
            let out = run_tagger_fold(&train, test, lexicon, *fams, cv.train.clone(), cv.downsample)?;
            per_fold.push(flatten_report(&out.report));
        }
        ladder_folds.push(per_fold);
    }

    // Headline configuration (reuses the ladder end when identical).
    let full_matches_ladder = ladder.last().is_some_and(|(_, f)| *f == cv.families);
    let mut constrained_features = 0;
    let headline_folds: Vec<BTreeMap<String, f64>> = if full_matches_ladder {
        // Re-run fold 0 only to report the constrained-feature count.
        let (train, test) = fold_pair(0);
        let out = run_tagger_fold(&train, test, lexicon, cv.families, cv.train.clone(), cv.downsample)?;
        constrained_features = out.model.constraints.len();
        ladder_folds.last().expect("ladder is non-empty").clone()
    } else {
        let mut per_fold = Vec::new();
        for i in 0..cv.k {
            let (train, test) = fold_pair(i);
            let out =
                run_tagger_fold(&train, test, lexicon, cv.families, cv.train.clone(), cv.downsample)?;
            if i == 0 {
                constrained_features = out.model.constraints.len();
            }
            per_fold.push(flatten_report(&out.report));
        }
        per_fold
    };

    // The same families without ordinal constraints.
    let mut plain_config = cv.train.clone();
    plain_config.isotonic = false;
    let mut plain_folds = Vec::new();
    for i in 0..cv.k {
        let (train, test) = fold_pair(i);
        let out = run_tagger_fold(&train, test, lexicon, cv.families, plain_config.clone(), cv.downsample)?;
        plain_folds.push(flatten_report(&out.report));
    }

    // Shallow baselines.
    let inventory = lexicon.inventory();
    let mut polarity_folds = Vec::new();
    let mut distance_folds = Vec::new();
    for i in 0..cv.k {
        let (train, test) = fold_pair(i);
        let gold = gold_pairs(test);

        let records = baseline_records(test, &BaselinePredictor::Polarity(&inventory));
        let pred = align_predictions(test, &records)?;
        polarity_folds.push(stance_eval(&gold, &pred)?);

        let model = train_distance_baseline(&train, &inventory, cv.logistic.clone())?;
        let records = baseline_records(test, &BaselinePredictor::Distance(&model, &inventory));
        let pred = align_predictions(test, &records)?;
        distance_folds.push(stance_eval(&gold, &pred)?);
    }

    let summary = mean_sd_map(&headline_folds);
    let setting_row = |setting: &str, families: String, folds: &[BTreeMap<String, f64>]| SettingRow {
        setting: setting.to_string(),
        families,
        metrics: mean_sd_map(folds),
    };

    let ablation: Vec<SettingRow> = ladder
        .iter()
        .zip(&ladder_folds)
        .map(|((label, fams), folds)| setting_row(label, fams.to_string(), folds))
        .collect();
    let baselines = vec![
        setting_row("polarity", "sentiment inventory".into(), &polarity_folds),
        setting_row("distance", "pronoun distances".into(), &distance_folds),
    ];
    let plain = setting_row("no-isotonic", cv.families.to_string(), &plain_folds);

    let mut comparisons: Vec<MetricComparison<'_>> = Vec::new();
    let labels: Vec<String> = ladder
        .iter()
        .map(|(label, _)| format!("full vs {label}"))
        .collect();
    for (idx, (_, fams)) in ladder.iter().enumerate() {
        if *fams == cv.families {
            continue; // identical configurations, nothing to compare
        }
        comparisons.push((labels[idx].as_str(), &headline_folds, &ladder_folds[idx]));
    }
    comparisons.push(("isotonic vs plain", &headline_folds, &plain_folds));
    comparisons.push(("full vs polarity", &headline_folds, &polarity_folds));
    comparisons.push(("full vs distance", &headline_folds, &distance_folds));
    let t_tests = paired_tests(&comparisons, &["accuracy", "strict:agree:f1"])?;

    Ok(TaggerCvReport {
        task: "tagger".to_string(),
        k: cv.k,
        seed: cv.seed,
        n_discussions,
        n_utterances,
        families: cv.families.to_string(),
        lexicon_entries: lexicon.entries.len(),
        constrained_features,
        accuracy: summary
            .get("accuracy")
            .copied()
            .unwrap_or(MeanSd { mean: 0.0, sd: 0.0 }),
        strict: class_table(&summary, "strict"),
        soft: class_table(&summary, "soft"),
        ablation,
        baselines,
        plain,
        t_tests,
        fold_metrics: headline_folds,
    })
}

// --- Dispute cross-validation ----------------------------------------------

pub fn binary_metrics(gold: &[bool], pred: &[bool]) -> BTreeMap<String, f64> {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut r#fn = 0.0;
    let mut tn = 0.0;
    for (&g, &p) in gold.iter().zip(pred) {
        match (g, p) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => r#fn += 1.0,
            (false, false) => tn += 1.0,
        }
    }
    let n = tp + fp + r#fn + tn;
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let precision = div(tp, tp + fp);
    let recall = div(tp, tp + r#fn);
    BTreeMap::from([
        ("accuracy".to_string(), div(tp + tn, n)),
        ("precision".to_string(), precision),
        ("recall".to_string(), recall),
        ("f1".to_string(), div(2.0 * precision * recall, precision + recall)),
    ])
}

fn dispute_gold_flags(discussions: &[Discussion]) -> Result<Vec<bool>> {
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

fn subcategory_name(disc: &Discussion) -> String {
    use stancekit::corpus::DisputeSubcategory::*;
    match disc.dispute_gold.and_then(|g| g.subcategory) {
        Some(Controversy) => "controversy".to_string(),
        Some(Rfc) => "rfc".to_string(),
        Some(Resolved) => "resolved".to_string(),
        None => "unspecified".to_string(),
    }
}

/// Accessor for one family flag inside a [`DisputeFamilies`] set.
type FamilyToggle = fn(&mut DisputeFamilies) -> &mut bool;

fn family_variants(all: DisputeFamilies) -> Vec<(String, DisputeFamilies)> {
    let toggles: [(&str, FamilyToggle); 5] = [
        ("lex", |f| &mut f.lex),
        ("top", |f| &mut f.top),
        ("dis", |f| &mut f.dis),
        ("senti-g", |f| &mut f.senti_g),
        ("senti-l", |f| &mut f.senti_l),
    ];
    let mut out = vec![("all".to_string(), all)];
    for (name, field) in toggles {
        let mut leave_out = all;
        *field(&mut leave_out) = false;
        out.push((format!("- {name}"), leave_out));
        let mut only = DisputeFamilies::NONE;
        *field(&mut only) = true;
        out.push((format!("{name} only"), only));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RecallRow {
    pub n: usize,
    pub recalled: usize,
    pub recall: f64,
}

#[derive(Debug, Clone)]
pub struct DisputeCvConfig {
    pub k: usize,
    pub seed: u64,
    pub families: DisputeFamilies,
    pub logistic: LogisticConfig,
}

#[derive(Serialize)]
pub struct DisputeCvReport {
    pub task: String,
    pub k: usize,
    pub seed: u64,
    pub n_discussions: usize,
    pub families: String,
    /// "all", each leave-one-out, and each single-family setting.
    pub ablation: Vec<SettingRow>,
    /// Random coin and always-dispute reference rows.
    pub baselines: Vec<SettingRow>,
    /// Pooled over test folds, full family set; gold disputes grouped by
    /// subcategory plus a non-dispute specificity row.
    pub subcategory_recall: BTreeMap<String, RecallRow>,
    pub t_tests: Vec<TTestRow>,
    pub fold_metrics: Vec<BTreeMap<String, f64>>,
}

pub fn crossval_dispute(
    discussions: Vec<Discussion>,
    tagger: &IsotonicCrfModel,
    extractor: &FeatureExtractor,
    cv: &DisputeCvConfig,
) -> Result<DisputeCvReport> {
    dispute_gold_flags(&discussions)?; // fail early if any label is missing
    let n_discussions = discussions.len();

    // The tagger is fixed across folds and family variants, so tag each
    // discussion exactly once and look the unit sequences up by id.
    use rayon::prelude::*;
    let units_by_id: BTreeMap<String, Vec<dispute::TaggedUnit>> = discussions
        .par_iter()
        .map(|d| (d.id.clone(), dispute::tag_units(d, tagger, extractor)))
        .collect();
    let folds = corpus::split_folds(discussions, cv.k, cv.seed)?;

    let fold_pair = |i: usize| -> (Vec<Discussion>, &[Discussion]) {
        let train: Vec<Discussion> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect();
        (train, &folds[i])
    };
    let assemble = |set: &[Discussion],
                    fams: DisputeFamilies,
                    stats: &stancekit::features::StandardizeStats| {
        set.par_iter()
            .map(|d| dispute::assemble_dispute(d, &units_by_id[&d.id], fams, Some(stats)))
            .collect::<Vec<_>>()
    };

    let variants = family_variants(cv.families);
    let mut variant_folds: Vec<Vec<BTreeMap<String, f64>>> = vec![Vec::new(); variants.len()];
    let mut subcategory: BTreeMap<String, (usize, usize)> = BTreeMap::new();

    for i in 0..cv.k {
        let (train, test) = fold_pair(i);
        let train_gold = dispute_gold_flags(&train)?;
        let test_gold = dispute_gold_flags(test)?;
        let stats = dispute::fit_discussion_stats(&train);

        for (v, (name, fams)) in variants.iter().enumerate() {
            let train_vecs = assemble(&train, *fams, &stats);
            let test_vecs = assemble(test, *fams, &stats);
            let model = dispute::train_dispute(&train_vecs, &train_gold, cv.logistic.clone())?;
            let pred: Vec<bool> = test_vecs
                .iter()
                .map(|fv| dispute::predict_dispute(&model, fv).0)
                .collect();
            variant_folds[v].push(binary_metrics(&test_gold, &pred));

            if name == "all" {
                for (disc, (&gold, &p)) in test.iter().zip(test_gold.iter().zip(&pred)) {
                    let key = if gold {
                        subcategory_name(disc)
                    } else {
                        "non-dispute".to_string()
                    };
                    let entry = subcategory.entry(key).or_insert((0, 0));
                    entry.0 += 1;
                    if p == gold {
                        entry.1 += 1;
                    }
                }
            }
        }
    }

    // Reference baselines, evaluated on the same folds.
    let mut random_folds = Vec::new();
    let mut always_folds = Vec::new();
    for i in 0..cv.k {
        let (_, test) = fold_pair(i);
        let test_gold = dispute_gold_flags(test)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cv.seed.wrapping_add(i as u64));
        let coin: Vec<bool> = test_gold.iter().map(|_| rng.gen_bool(0.5)).collect();
        random_folds.push(binary_metrics(&test_gold, &coin));
        let always: Vec<bool> = vec![true; test_gold.len()];
        always_folds.push(binary_metrics(&test_gold, &always));
    }

    let setting_row = |setting: &str, families: String, folds: &[BTreeMap<String, f64>]| SettingRow {
        setting: setting.to_string(),
        families,
        metrics: mean_sd_map(folds),
    };
    let ablation: Vec<SettingRow> = variants
        .iter()
        .zip(&variant_folds)
        .map(|((name, fams), folds)| setting_row(name, fams.to_string(), folds))
        .collect();
    let baselines = vec![
        setting_row("random", "coin flip (p = 0.5)".into(), &random_folds),
        setting_row("all-dispute", "constant prediction".into(), &always_folds),
    ];

    let all_folds = &variant_folds[0];
    let mut comparisons: Vec<MetricComparison<'_>> = Vec::new();
    let labels: Vec<String> = variants
        .iter()
        .map(|(name, _)| format!("all vs {name}"))
        .collect();
    for (idx, (name, _)) in variants.iter().enumerate() {
        if name == "all" {
            continue;
        }
        comparisons.push((labels[idx].as_str(), all_folds, &variant_folds[idx]));
    }
    comparisons.push(("all vs random", all_folds, &random_folds));
    comparisons.push(("all vs all-dispute", all_folds, &always_folds));
    let t_tests = paired_tests(&comparisons, &["accuracy"])?;

    let subcategory_recall = subcategory
        .into_iter()
        .map(|(key, (n, recalled))| {
            let recall = if n == 0 { 0.0 } else { recalled as f64 / n as f64 };
            (key, RecallRow { n, recalled, recall })
        })
        .collect();

    Ok(DisputeCvReport {
        task: "dispute".to_string(),
        k: cv.k,
        seed: cv.seed,
        n_discussions,
        families: cv.families.to_string(),
        ablation,
        baselines,
        subcategory_recall,
        t_tests,
        fold_metrics: all_folds.clone(),
    })
}

// --- Plain-text rendering ----------------------------------------------------

fn fmt_ms(m: MeanSd) -> String {
    format!("{:.4} ± {:.4}", m.mean, m.sd)
}

fn class_table_text(out: &mut String, title: &str, table: &BTreeMap<String, ClassRow>) {
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "  {:<10} {:>17} {:>17} {:>17}",
        "class", "precision", "recall", "f1"
    );
    for stance in Stance::ALL {
        let class = stance.as_str();
        if let Some(row) = table.get(class) {
            let _ = writeln!(
                out,
                "  {:<10} {:>17} {:>17} {:>17}",
                class,
                fmt_ms(row.precision),
                fmt_ms(row.recall),
                fmt_ms(row.f1)
            );
        }
    }
}

fn setting_rows_text(out: &mut String, rows: &[SettingRow], metrics: &[(&str, &str)]) {
    let _ = write!(out, "  {:<14} {:<28}", "setting", "families");
    for (_, header) in metrics {
        let _ = write!(out, " {header:>17}");
    }
    let _ = writeln!(out);
    for row in rows {
        let _ = write!(out, "  {:<14} {:<28}", row.setting, row.families);
        for (key, _) in metrics {
            let cell = row
                .metrics
                .get(*key)
                .copied()
                .map(fmt_ms)
                .unwrap_or_else(|| "-".to_string());
            let _ = write!(out, " {cell:>17}");
        }
        let _ = writeln!(out);
    }
}

fn t_tests_text(out: &mut String, rows: &[TTestRow]) {
    let _ = writeln!(out, "paired t-tests (per-fold):");
    for row in rows {
        let flag = if row.degenerate { "  (degenerate)" } else { "" };
        let _ = writeln!(
            out,
            "  {:<24} [{}]  t = {:+.4}  p = {:.4}{}",
            row.comparison, row.metric, row.t, row.p, flag
        );
    }
}

pub fn render_tagger_report(r: &TaggerCvReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "== {}-fold cross-validation: sentiment tagger ==", r.k);
    let _ = writeln!(
        out,
        "discussions = {}  utterances = {}  seed = {}  families = {}",
        r.n_discussions, r.n_utterances, r.seed, r.families
    );
    let _ = writeln!(
        out,
        "lexicon entries = {}  constrained features = {}",
        r.lexicon_entries, r.constrained_features
    );
    let _ = writeln!(out, "accuracy: {}", fmt_ms(r.accuracy));
    class_table_text(&mut out, "per-class scores (strict):", &r.strict);
    class_table_text(&mut out, "per-class scores (soft):", &r.soft);
    let metrics: [(&str, &str); 5] = [
        ("accuracy", "accuracy"),
        ("strict:agree:f1", "strict agr F1"),
        ("strict:disagree:f1", "strict dis F1"),
        ("soft:agree:f1", "soft agr F1"),
        ("soft:disagree:f1", "soft dis F1"),
    ];
    let _ = writeln!(out, "cumulative feature ablation:");
    setting_rows_text(&mut out, &r.ablation, &metrics);
    let _ = writeln!(out, "baselines:");
    setting_rows_text(&mut out, &r.baselines, &metrics);
    let _ = writeln!(out, "without ordinal constraints:");
    setting_rows_text(&mut out, std::slice::from_ref(&r.plain), &metrics);
    t_tests_text(&mut out, &r.t_tests);
    out
}

pub fn render_dispute_report(r: &DisputeCvReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "== {}-fold cross-validation: dispute detection ==", r.k);
    let _ = writeln!(
        out,
        "discussions = {}  seed = {}  families = {}",
        r.n_discussions, r.seed, r.families
    );
    let metrics: [(&str, &str); 4] = [
        ("accuracy", "accuracy"),
        ("precision", "precision"),
        ("recall", "recall"),
        ("f1", "f1"),
    ];
    let _ = writeln!(out, "feature ablation (dispute class):");
    setting_rows_text(&mut out, &r.ablation, &metrics);
    let _ = writeln!(out, "baselines:");
    setting_rows_text(&mut out, &r.baselines, &metrics);
    let _ = writeln!(out, "recall by gold subcategory (full family set):");
    for (key, row) in &r.subcategory_recall {
        let _ = writeln!(
            out,
            "  {:<14} {}/{} = {:.4}",
            key, row.recalled, row.n, row.recall
        );
    }
    t_tests_text(&mut out, &r.t_tests);
    out
}
