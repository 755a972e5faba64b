//! Non-sequence classifiers: the polarity-count and pronoun-distance
//! baselines, plus the multinomial logistic regression backing both the
//! distance baseline and the dispute classifier.

use crate::corpus::{Stance, Utterance};
use crate::features::FeatureVector;
use crate::lexicon::{Polarity, SentimentInventory};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Second-person pronouns anchoring the distance baseline.
pub const SECOND_PERSON: [&str; 5] = ["you", "your", "yours", "yourself", "yourselves"];

/// Agreement iff strictly more strong-positive than strong-negative unigram
/// hits; disagreement for the reverse; neutral on ties (including 0–0).
pub fn polarity_baseline(utt: &Utterance, inventory: &SentimentInventory) -> Stance {
    let mut pos = 0usize;
    let mut neg = 0usize;
    for token in utt.tokens() {
        match inventory.word_polarity(&token.lowercase) {
            Some(Polarity::Pos) => pos += 1,
            Some(Polarity::Neg) => neg += 1,
            None => {}
        }
    }
    match pos.cmp(&neg) {
        std::cmp::Ordering::Greater => Stance::Agree,
        std::cmp::Ordering::Less => Stance::Disagree,
        std::cmp::Ordering::Equal => Stance::Neutral,
    }
}

/// (min, max, mean) token distance from each sentiment word to its nearest
/// second-person pronoun. Without any sentiment word or any pronoun, all
/// three collapse to the sentinel: the utterance length in tokens.
pub fn distance_features(utt: &Utterance, inventory: &SentimentInventory) -> (f64, f64, f64) {
    let sentinel = utt.token_count() as f64;
    let mut pronouns = Vec::new();
    let mut sentiment = Vec::new();
    for (idx, token) in utt.tokens().enumerate() {
        if SECOND_PERSON.contains(&token.lowercase.as_str()) {
            pronouns.push(idx as i64);
        }
        if inventory.word_polarity(&token.lowercase).is_some() {
            sentiment.push(idx as i64);
        }
    }
    if pronouns.is_empty() || sentiment.is_empty() {
        return (sentinel, sentinel, sentinel);
    }
    let distances: Vec<f64> = sentiment
        .iter()
        .map(|&s| {
            pronouns
                .iter()
                .map(|&p| (s - p).abs())
                .min()
                .expect("pronoun list is non-empty") as f64
        })
        .collect();
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let max = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    (min, max, mean)
}

/// Feature vector form of [`distance_features`], ready for standardization.
pub fn distance_feature_vector(utt: &Utterance, inventory: &SentimentInventory) -> FeatureVector {
    let (min, max, mean) = distance_features(utt, inventory);
    let mut fv = FeatureVector::default();
    fv.set("dist:min", min);
    fv.set("dist:max", max);
    fv.set("dist:mean", mean);
    fv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 0.1,
            epochs: 200,
            seed: 42,
        }
    }
}

/// Multinomial logistic regression: one weight vector and bias per class,
/// classes in sorted order; prediction ties break toward the earlier class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: Vec<String>,
    /// `weights[f][c]` pairs feature `f` with class index `c`.
    pub weights: BTreeMap<String, Vec<f64>>,
    pub bias: Vec<f64>,
    pub config: LogisticConfig,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

impl LinearModel {
    pub fn logits(&self, fv: &FeatureVector) -> Vec<f64> {
        let mut logits = self.bias.clone();
        for (name, value) in fv.iter() {
            if let Some(ws) = self.weights.get(name) {
                for (l, w) in logits.iter_mut().zip(ws) {
                    *l += w * value;
                }
            }
        }
        logits
    }
}

/// Softmax probabilities (summing to 1) and the argmax class, first class
/// winning ties.
pub fn logistic_predict<'m>(model: &'m LinearModel, fv: &FeatureVector) -> (&'m str, Vec<f64>) {
    let probs = softmax(&model.logits(fv));
    let best = probs
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |acc, (i, &p)| {
            if p > acc.1 {
                (i, p)
            } else {
                acc
            }
        })
        .0;
    (&model.classes[best], probs)
}

/// Training problem with features interned to dense indices, so the epoch
/// loop never touches string keys. Index order is sorted-name order, which
/// keeps every accumulation in the same order as the model's `BTreeMap`
/// shape and therefore bit-identical to a map-based evaluation.
struct DenseProblem {
    /// Sorted feature names; position = dense index.
    names: Vec<String>,
    /// Per example: `(feature index, value)` ascending by index. Vector
    /// entries without a model feature are dropped (they would contribute
    /// nothing to the logits either).
    examples: Vec<Vec<(usize, f64)>>,
    targets: Vec<usize>,
    k: usize,
}

impl DenseProblem {
    /// `names` must be sorted ascending.
    fn build(names: Vec<String>, vectors: &[FeatureVector], targets: Vec<usize>, k: usize) -> DenseProblem {
        let index: BTreeMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let examples = vectors
            .iter()
            .map(|fv| {
                fv.iter()
                    .filter_map(|(name, value)| index.get(name).map(|&i| (i, value)))
                    .collect()
            })
            .collect();
        DenseProblem {
            names,
            examples,
            targets,
            k,
        }
    }
}

/// Flat parameter block: `w[f * k + c]` plus one bias slot per class.
#[derive(Clone)]
struct DenseParams {
    w: Vec<f64>,
    b: Vec<f64>,
}

fn dense_loss_and_gradient(params: &DenseParams, problem: &DenseProblem, l2: f64) -> (f64, DenseParams) {
    let k = problem.k;
    // Per-example parts in parallel, reduced sequentially in example order
    // so the result is independent of thread count.
    let parts: Vec<(f64, Vec<f64>)> = problem
        .examples
        .par_iter()
        .zip(&problem.targets)
        .map(|(entries, &target)| {
            let mut logits = params.b.clone();
            for &(idx, value) in entries {
                for (l, w) in logits.iter_mut().zip(&params.w[idx * k..(idx + 1) * k]) {
                    *l += w * value;
                }
            }
            let probs = softmax(&logits);
            let nll = -probs[target].max(f64::MIN_POSITIVE).ln();
            let mut residual = probs;
            residual[target] -= 1.0;
            (nll, residual)
        })
        .collect();

    let mut loss = 0.0;
    let mut grad = DenseParams {
        w: vec![0.0; params.w.len()],
        b: vec![0.0; k],
    };
    for (entries, (nll, residual)) in problem.examples.iter().zip(parts) {
        loss += nll;
        for &(idx, value) in entries {
            for (g, r) in grad.w[idx * k..(idx + 1) * k].iter_mut().zip(&residual) {
                *g += r * value;
            }
        }
        for (g, r) in grad.b.iter_mut().zip(&residual) {
            *g += r;
        }
    }

    let mut sq = 0.0;
    for (g, w) in grad.w.iter_mut().zip(&params.w) {
        sq += w * w;
        *g += l2 * w;
    }
    for (g, b) in grad.b.iter_mut().zip(&params.b) {
        sq += b * b;
        *g += l2 * b;
    }
    loss += 0.5 * l2 * sq;

    (loss, grad)
}

fn apply_step(params: &mut DenseParams, grad: &DenseParams, step: f64) {
    for (w, g) in params.w.iter_mut().zip(&grad.w) {
        *w -= step * g;
    }
    for (b, g) in params.b.iter_mut().zip(&grad.b) {
        *b -= step * g;
    }
}

fn params_to_model(
    params: &DenseParams,
    problem: &DenseProblem,
    classes: Vec<String>,
    config: LogisticConfig,
) -> LinearModel {
    LinearModel {
        classes,
        weights: problem
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), params.w[i * problem.k..(i + 1) * problem.k].to_vec()))
            .collect(),
        bias: params.b.clone(),
        config,
    }
}

/// Regularized negative log-likelihood and its analytic gradient at
/// `model`, the gradient in model shape. Labels must be drawn from
/// `model.classes`; vector entries without a model weight contribute
/// nothing, matching [`LinearModel::logits`]. Exposed for gradient
/// checking and diagnostics.
pub fn logistic_loss_and_gradient(
    model: &LinearModel,
    vectors: &[FeatureVector],
    labels: &[String],
    l2: f64,
) -> Result<(f64, LinearModel)> {
    if vectors.len() != labels.len() {
        return Err(Error::InvalidValue {
            field: "labels".into(),
            message: format!("{} vectors vs {} labels", vectors.len(), labels.len()),
        });
    }
    let targets: Result<Vec<usize>> = labels
        .iter()
        .map(|l| {
            model.classes.iter().position(|c| c == l).ok_or_else(|| Error::InvalidValue {
                field: "labels".into(),
                message: format!("label {l:?} is not a model class"),
            })
        })
        .collect();
    let problem = DenseProblem::build(
        model.weights.keys().cloned().collect(),
        vectors,
        targets?,
        model.classes.len(),
    );
    let params = DenseParams {
        w: model.weights.values().flat_map(|ws| ws.iter().copied()).collect(),
        b: model.bias.clone(),
    };
    let (loss, grad) = dense_loss_and_gradient(&params, &problem, l2);
    Ok((
        loss,
        params_to_model(&grad, &problem, model.classes.clone(), model.config.clone()),
    ))
}

/// Full-batch gradient descent with backtracking halving, so the training
/// loss never increases epoch over epoch. Deterministic: zero
/// initialization and a fixed reduction order make the seed advisory.
pub fn logistic_train(
    vectors: &[FeatureVector],
    labels: &[String],
    config: LogisticConfig,
) -> Result<LinearModel> {
    if vectors.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if vectors.len() != labels.len() {
        return Err(Error::InvalidValue {
            field: "labels".into(),
            message: format!("{} vectors vs {} labels", vectors.len(), labels.len()),
        });
    }
    let classes: Vec<String> = {
        let set: std::collections::BTreeSet<&String> = labels.iter().collect();
        set.into_iter().cloned().collect()
    };
    if classes.len() < 2 {
        return Err(Error::SingleClass(
            classes.first().cloned().unwrap_or_default(),
        ));
    }
    let targets: Vec<usize> = labels
        .iter()
        .map(|l| classes.iter().position(|c| c == l).expect("class present"))
        .collect();
    let feature_names: std::collections::BTreeSet<String> = vectors
        .iter()
        .flat_map(|fv| fv.iter().map(|(name, _)| name.to_string()))
        .collect();
    let k = classes.len();
    let problem = DenseProblem::build(feature_names.into_iter().collect(), vectors, targets, k);
    let mut params = DenseParams {
        w: vec![0.0; problem.names.len() * k],
        b: vec![0.0; k],
    };

    let mut step = 1.0;
    let (mut loss, mut grad) = dense_loss_and_gradient(&params, &problem, config.l2);
    for _epoch in 0..config.epochs {
        let mut candidate = params.clone();
        apply_step(&mut candidate, &grad, step);
        let (mut cand_loss, mut cand_grad) = dense_loss_and_gradient(&candidate, &problem, config.l2);
        while cand_loss > loss && step > 1e-12 {
            step *= 0.5;
            candidate = params.clone();
            apply_step(&mut candidate, &grad, step);
            (cand_loss, cand_grad) = dense_loss_and_gradient(&candidate, &problem, config.l2);
        }
        if cand_loss > loss {
            break; // no descent direction left at the smallest step
        }
        params = candidate;
        loss = cand_loss;
        grad = cand_grad;
        step *= 1.2; // cautiously re-grow after a successful step
    }
    Ok(params_to_model(&params, &problem, classes, config))
}

// --- Serialization ------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LogisticFile {
    format_version: u32,
    model_kind: String,
    classes: Vec<String>,
    features: BTreeMap<String, Vec<f64>>,
    bias: Vec<f64>,
    config: LogisticConfig,
    /// Free-form caller payload (e.g. the dispute pipeline's extraction
    /// setup) so one file fully determines prediction.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    attachments: serde_json::Value,
}

pub fn model_to_json(model: &LinearModel, attachments: serde_json::Value) -> String {
    let file = LogisticFile {
        format_version: crate::icrf::FORMAT_VERSION,
        model_kind: "logistic".into(),
        classes: model.classes.clone(),
        features: model.weights.clone(),
        bias: model.bias.clone(),
        config: model.config.clone(),
        attachments,
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn model_from_json(json: &str) -> Result<(LinearModel, serde_json::Value)> {
    #[derive(Deserialize)]
    struct Probe {
        format_version: u32,
        model_kind: String,
    }
    let probe: Probe =
        serde_json::from_str(json).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if probe.format_version != crate::icrf::FORMAT_VERSION {
        return Err(Error::ModelVersion {
            found: probe.format_version,
            supported: crate::icrf::FORMAT_VERSION,
        });
    }
    if probe.model_kind != "logistic" {
        return Err(Error::ModelFormat(format!(
            "expected model_kind \"logistic\", found {:?}",
            probe.model_kind
        )));
    }
    let file: LogisticFile =
        serde_json::from_str(json).map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok((
        LinearModel {
            classes: file.classes,
            weights: file.features,
            bias: file.bias,
            config: file.config,
        },
        file.attachments,
    ))
}

pub fn save_model(
    model: &LinearModel,
    attachments: serde_json::Value,
    path: &std::path::Path,
) -> Result<()> {
    std::fs::write(path, model_to_json(model, attachments)).map_err(|source| Error::FileWrite {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &std::path::Path) -> Result<(LinearModel, serde_json::Value)> {
    let json = std::fs::read_to_string(path).map_err(|source| Error::FileRead {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&json)
}
