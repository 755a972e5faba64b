//! Linear-chain CRF over the utterances of one turn, with isotonic
//! (ordinal-monotonicity) constraints on lexicon-linked node weights.
//!
//! For a feature `w` registered as increasing (strong positive lexicon
//! member), training keeps `μ⟨NN,w⟩ ≤ μ⟨N,w⟩ ≤ μ⟨O,w⟩ ≤ μ⟨P,w⟩ ≤ μ⟨PP,w⟩`
//! exactly — and reversed for decreasing — by projecting each touched
//! 5-vector onto the monotone cone (pool-adjacent-violators) after every
//! stochastic-gradient step. Transitions and biases stay unconstrained.

use crate::corpus::{SentimentLabel, Stance};
use crate::features::{lexicon_payload, FeatureVector};
use crate::lexicon::{Lexicon, Polarity};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const NUM_LABELS: usize = 5;

/// One training instance: the feature vectors and gold labels of a turn's
/// utterances, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedSequence {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<SentimentLabel>,
}

impl TaggedSequence {
    pub fn new(features: Vec<FeatureVector>, labels: Vec<SentimentLabel>) -> Result<TaggedSequence> {
        if features.len() != labels.len() {
            return Err(Error::InvalidValue {
                field: "sequence".into(),
                message: format!(
                    "{} feature vectors vs {} labels",
                    features.len(),
                    labels.len()
                ),
            });
        }
        if features.is_empty() {
            return Err(Error::InvalidValue {
                field: "sequence".into(),
                message: "empty sequence".into(),
            });
        }
        Ok(TaggedSequence { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Training hyperparameters, echoed into saved models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Step size schedule η_t = eta0 / (1 + t/t0); t0 = 0 resolves to the
    /// number of training sequences.
    pub eta0: f64,
    pub t0: f64,
    pub l2: f64,
    pub seed: u64,
    /// When false, the constraint registry is ignored (plain CRF).
    pub isotonic: bool,
    /// Minimum |lexicon score| for a feature to be constrained.
    pub theta_constraint: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            eta0: 0.1,
            t0: 0.0,
            l2: 1.0,
            seed: 42,
            isotonic: true,
            theta_constraint: 0.3,
        }
    }
}

/// Direction of a registered monotone constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "inc")]
    Increasing,
    #[serde(rename = "dec")]
    Decreasing,
}

impl From<Polarity> for Direction {
    fn from(p: Polarity) -> Direction {
        match p {
            Polarity::Pos => Direction::Increasing,
            Polarity::Neg => Direction::Decreasing,
        }
    }
}

/// Map feature names to constraint directions: a feature is constrained iff
/// its underlying text unit scores at least `theta` in absolute value in the
/// lexicon; the sign gives the direction.
pub fn constraint_registry<'a, I>(
    feature_names: I,
    lexicon: &Lexicon,
    theta: f64,
) -> BTreeMap<String, Direction>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut registry = BTreeMap::new();
    for name in feature_names {
        let Some(payload) = lexicon_payload(name) else {
            continue;
        };
        let Some(score) = lexicon.score(&payload) else {
            continue;
        };
        if score.abs() >= theta && score != 0.0 {
            let dir = if score > 0.0 {
                Direction::Increasing
            } else {
                Direction::Decreasing
            };
            registry.insert(name.to_string(), dir);
        }
    }
    registry
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicCrfModel {
    /// μ⟨σ,f⟩ indexed `weights[f][label.index()]`.
    pub weights: BTreeMap<String, [f64; NUM_LABELS]>,
    /// λ⟨σ,σ′⟩ indexed `transitions[from][to]`.
    pub transitions: [[f64; NUM_LABELS]; NUM_LABELS],
    pub bias: [f64; NUM_LABELS],
    pub constraints: BTreeMap<String, Direction>,
    pub config: TrainConfig,
}

impl IsotonicCrfModel {
    pub fn zeroed(
        feature_names: impl IntoIterator<Item = String>,
        constraints: BTreeMap<String, Direction>,
        config: TrainConfig,
    ) -> IsotonicCrfModel {
        IsotonicCrfModel {
            weights: feature_names
                .into_iter()
                .map(|f| (f, [0.0; NUM_LABELS]))
                .collect(),
            transitions: [[0.0; NUM_LABELS]; NUM_LABELS],
            bias: [0.0; NUM_LABELS],
            constraints,
            config,
        }
    }

    /// True iff every registered constraint holds exactly.
    pub fn constraints_satisfied(&self) -> bool {
        self.constraints.iter().all(|(name, dir)| {
            let Some(mu) = self.weights.get(name) else {
                return true;
            };
            mu.windows(2).all(|w| match dir {
                Direction::Increasing => w[0] <= w[1],
                Direction::Decreasing => w[0] >= w[1],
            })
        })
    }
}

/// Node and transition log-potentials for one sequence.
#[derive(Debug, Clone)]
pub struct Potentials {
    /// `node[i][σ] = bias[σ] + Σ_f μ⟨σ,f⟩ · x_i[f]`
    pub node: Vec<[f64; NUM_LABELS]>,
    pub trans: [[f64; NUM_LABELS]; NUM_LABELS],
}

/// Features absent from the model contribute nothing (open vocabulary at
/// inference time).
pub fn log_potentials(model: &IsotonicCrfModel, features: &[FeatureVector]) -> Potentials {
    let node = features
        .iter()
        .map(|fv| {
            let mut scores = model.bias;
            for (name, value) in fv.iter() {
                if let Some(mu) = model.weights.get(name) {
                    for (s, m) in scores.iter_mut().zip(mu) {
                        *s += m * value;
                    }
                }
            }
            scores
        })
        .collect();
    Potentials {
        node,
        trans: model.transitions,
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Forward-backward results: log-partition, per-position label marginals,
/// and adjacent-pair marginals, all in probability space.
#[derive(Debug, Clone)]
pub struct Marginals {
    pub log_z: f64,
    pub unary: Vec<[f64; NUM_LABELS]>,
    /// `pairwise[i][a][b] = p(y_i = a, y_{i+1} = b)`, length n−1.
    pub pairwise: Vec<[[f64; NUM_LABELS]; NUM_LABELS]>,
}

pub fn forward_backward(pot: &Potentials) -> Marginals {
    let n = pot.node.len();
    assert!(n >= 1, "sequences are non-empty by construction");

    let mut alpha = vec![[0.0f64; NUM_LABELS]; n];
    alpha[0] = pot.node[0];
    for i in 1..n {
        for to in 0..NUM_LABELS {
            let terms: Vec<f64> = (0..NUM_LABELS)
                .map(|from| alpha[i - 1][from] + pot.trans[from][to])
                .collect();
            alpha[i][to] = pot.node[i][to] + log_sum_exp(&terms);
        }
    }
    let log_z = log_sum_exp(&alpha[n - 1]);

    let mut beta = vec![[0.0f64; NUM_LABELS]; n];
    for i in (0..n.saturating_sub(1)).rev() {
        for from in 0..NUM_LABELS {
            let terms: Vec<f64> = (0..NUM_LABELS)
                .map(|to| pot.trans[from][to] + pot.node[i + 1][to] + beta[i + 1][to])
                .collect();
            beta[i][from] = log_sum_exp(&terms);
        }
    }

    let mut unary = vec![[0.0f64; NUM_LABELS]; n];
    for i in 0..n {
        for s in 0..NUM_LABELS {
            unary[i][s] = (alpha[i][s] + beta[i][s] - log_z).exp();
        }
    }

    let mut pairwise = vec![[[0.0f64; NUM_LABELS]; NUM_LABELS]; n.saturating_sub(1)];
    for i in 0..n.saturating_sub(1) {
        for a in 0..NUM_LABELS {
            for b in 0..NUM_LABELS {
                pairwise[i][a][b] = (alpha[i][a]
                    + pot.trans[a][b]
                    + pot.node[i + 1][b]
                    + beta[i + 1][b]
                    - log_z)
                    .exp();
            }
        }
    }

    Marginals {
        log_z,
        unary,
        pairwise,
    }
}

/// Highest-scoring labeling; among ties, the lexicographically smallest in
/// ordinal order (so all-zero potentials yield all-NN). Computed by a
/// backward pass over suffix scores and a forward reconstruction that takes
/// the lowest ordinal achieving the optimum at each step.
pub fn viterbi(model: &IsotonicCrfModel, features: &[FeatureVector]) -> Vec<SentimentLabel> {
    let pot = log_potentials(model, features);
    viterbi_potentials(&pot)
}

pub fn viterbi_potentials(pot: &Potentials) -> Vec<SentimentLabel> {
    let n = pot.node.len();
    assert!(n >= 1, "sequences are non-empty by construction");

    // best[i][σ]: best score of positions i.. given y_i = σ.
    let mut best = vec![[0.0f64; NUM_LABELS]; n];
    best[n - 1] = pot.node[n - 1];
    for i in (0..n - 1).rev() {
        for from in 0..NUM_LABELS {
            let tail = (0..NUM_LABELS)
                .map(|to| pot.trans[from][to] + best[i + 1][to])
                .fold(f64::NEG_INFINITY, f64::max);
            best[i][from] = pot.node[i][from] + tail;
        }
    }

    let mut labels = Vec::with_capacity(n);
    let argmax_lowest = |scores: &[f64; NUM_LABELS]| {
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        scores
            .iter()
            .position(|&s| s == top)
            .expect("max comes from the same array")
    };
    let first = argmax_lowest(&best[0]);
    labels.push(SentimentLabel::from_index(first));
    for i in 1..n {
        let prev = labels[i - 1].index();
        let scores: [f64; NUM_LABELS] =
            std::array::from_fn(|to| pot.trans[prev][to] + best[i][to]);
        labels.push(SentimentLabel::from_index(argmax_lowest(&scores)));
    }
    labels
}

/// Viterbi labels plus their 3-way collapse.
pub fn predict_and_collapse(
    model: &IsotonicCrfModel,
    features: &[FeatureVector],
) -> (Vec<SentimentLabel>, Vec<Stance>) {
    let labels = viterbi(model, features);
    let collapsed = labels.iter().map(|l| l.collapse()).collect();
    (labels, collapsed)
}

/// Gradient with the same shape as the parameters.
#[derive(Debug, Clone, Default)]
pub struct Gradient {
    pub weights: BTreeMap<String, [f64; NUM_LABELS]>,
    pub transitions: [[f64; NUM_LABELS]; NUM_LABELS],
    pub bias: [f64; NUM_LABELS],
}

impl Gradient {
    fn add(&mut self, other: Gradient) {
        for (name, g) in other.weights {
            let slot = self.weights.entry(name).or_insert([0.0; NUM_LABELS]);
            for (a, b) in slot.iter_mut().zip(g) {
                *a += b;
            }
        }
        for (row_a, row_b) in self.transitions.iter_mut().zip(other.transitions) {
            for (a, b) in row_a.iter_mut().zip(row_b) {
                *a += b;
            }
        }
        for (a, b) in self.bias.iter_mut().zip(other.bias) {
            *a += b;
        }
    }
}

fn sequence_nll_and_gradient(model: &IsotonicCrfModel, seq: &TaggedSequence) -> (f64, Gradient) {
    let pot = log_potentials(model, &seq.features);
    let marg = forward_backward(&pot);
    let n = seq.len();

    // Score of the gold labeling.
    let mut gold_score = 0.0;
    for (i, label) in seq.labels.iter().enumerate() {
        gold_score += pot.node[i][label.index()];
        if i + 1 < n {
            gold_score += pot.trans[label.index()][seq.labels[i + 1].index()];
        }
    }
    let nll = marg.log_z - gold_score;

    // Expected minus empirical counts.
    let mut grad = Gradient::default();
    for i in 0..n {
        let mut residual = marg.unary[i];
        residual[seq.labels[i].index()] -= 1.0;
        for (slot, r) in grad.bias.iter_mut().zip(&residual) {
            *slot += r;
        }
        for (name, value) in seq.features[i].iter() {
            let slot = grad
                .weights
                .entry(name.to_string())
                .or_insert([0.0; NUM_LABELS]);
            for s in 0..NUM_LABELS {
                slot[s] += residual[s] * value;
            }
        }
    }
    for i in 0..n.saturating_sub(1) {
        let mut residual = marg.pairwise[i];
        residual[seq.labels[i].index()][seq.labels[i + 1].index()] -= 1.0;
        for (row, res) in grad.transitions.iter_mut().zip(&residual) {
            for (slot, r) in row.iter_mut().zip(res) {
                *slot += r;
            }
        }
    }
    (nll, grad)
}

/// Batch negative log-likelihood and gradient:
/// `loss = Σ −log p(y|x) + (l2/2)·‖θ‖²`, gradient = (expected − empirical
/// feature counts) + l2·θ. Sequences are reduced in a fixed order, so the
/// result is independent of worker count.
pub fn nll_and_gradient(
    model: &IsotonicCrfModel,
    batch: &[TaggedSequence],
    l2: f64,
) -> (f64, Gradient) {
    let parts: Vec<(f64, Gradient)> = batch
        .par_iter()
        .map(|seq| sequence_nll_and_gradient(model, seq))
        .collect();
    let mut loss = 0.0;
    let mut grad = Gradient::default();
    for (nll, g) in parts {
        loss += nll;
        grad.add(g);
    }

    let mut sq = 0.0;
    for (name, mu) in &model.weights {
        let slot = grad.weights.entry(name.clone()).or_insert([0.0; NUM_LABELS]);
        for s in 0..NUM_LABELS {
            sq += mu[s] * mu[s];
            slot[s] += l2 * mu[s];
        }
    }
    for a in 0..NUM_LABELS {
        for b in 0..NUM_LABELS {
            sq += model.transitions[a][b] * model.transitions[a][b];
            grad.transitions[a][b] += l2 * model.transitions[a][b];
        }
    }
    for s in 0..NUM_LABELS {
        sq += model.bias[s] * model.bias[s];
        grad.bias[s] += l2 * model.bias[s];
    }
    loss += 0.5 * l2 * sq;
    (loss, grad)
}

/// Euclidean projection of a 5-vector onto the monotone cone via
/// pool-adjacent-violators. Equal-weight pooling; idempotent.
pub fn pava_project(values: [f64; NUM_LABELS], direction: Direction) -> [f64; NUM_LABELS] {
    match direction {
        Direction::Increasing => pava_nondecreasing(values),
        Direction::Decreasing => {
            let mut flipped = values;
            for v in &mut flipped {
                *v = -*v;
            }
            let mut out = pava_nondecreasing(flipped);
            for v in &mut out {
                *v = -*v;
            }
            out
        }
    }
}

fn pava_nondecreasing(values: [f64; NUM_LABELS]) -> [f64; NUM_LABELS] {
    // Blocks of (sum, count); merge while the tail violates monotonicity.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(NUM_LABELS);
    for &v in &values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            if prev.0 / prev.1 as f64 > last.0 / last.1 as f64 {
                blocks.pop();
                let top = blocks.last_mut().expect("two blocks were present");
                top.0 += last.0;
                top.1 += last.1;
            } else {
                break;
            }
        }
    }
    let mut out = [0.0; NUM_LABELS];
    let mut idx = 0;
    for (sum, count) in blocks {
        let mean = sum / count as f64;
        for _ in 0..count {
            out[idx] = mean;
            idx += 1;
        }
    }
    out
}

/// Projected stochastic gradient training. After every update the 5-vector
/// of each touched constrained feature is projected back onto its monotone
/// cone, and a final full projection pass guarantees every registry
/// constraint holds exactly in the returned model. Deterministic given the
/// seed.
pub fn train(
    data: &[TaggedSequence],
    registry: BTreeMap<String, Direction>,
    config: TrainConfig,
) -> Result<IsotonicCrfModel> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let n = data.len() as f64;
    if config.eta0 * config.l2 / n >= 1.0 {
        return Err(Error::Config(format!(
            "eta0 · l2 / n = {} ≥ 1 makes the decay step invalid",
            config.eta0 * config.l2 / n
        )));
    }
    let t0 = if config.t0 > 0.0 { config.t0 } else { n };

    let registry = if config.isotonic { registry } else { BTreeMap::new() };
    let feature_names: std::collections::BTreeSet<String> = data
        .iter()
        .flat_map(|seq| seq.features.iter())
        .flat_map(|fv| fv.iter().map(|(name, _)| name.to_string()))
        .collect();
    let mut model = IsotonicCrfModel::zeroed(
        feature_names,
        registry,
        TrainConfig { t0, ..config.clone() },
    );

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut t = 0usize;
    for _epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let seq = &data[idx];
            let eta = config.eta0 / (1.0 + t as f64 / t0);
            t += 1;

            // L2 as exact decay toward 0; positive scaling keeps every
            // already-feasible monotone vector feasible.
            let decay = 1.0 - eta * config.l2 / n;
            for mu in model.weights.values_mut() {
                for v in mu.iter_mut() {
                    *v *= decay;
                }
            }
            for row in &mut model.transitions {
                for v in row.iter_mut() {
                    *v *= decay;
                }
            }
            for v in &mut model.bias {
                *v *= decay;
            }

            let (_, grad) = sequence_nll_and_gradient(&model, seq);
            for (name, g) in &grad.weights {
                if let Some(mu) = model.weights.get_mut(name) {
                    for (v, d) in mu.iter_mut().zip(g) {
                        *v -= eta * d;
                    }
                    if let Some(&dir) = model.constraints.get(name) {
                        *mu = pava_project(*mu, dir);
                    }
                }
            }
            for a in 0..NUM_LABELS {
                for b in 0..NUM_LABELS {
                    model.transitions[a][b] -= eta * grad.transitions[a][b];
                }
            }
            for s in 0..NUM_LABELS {
                model.bias[s] -= eta * grad.bias[s];
            }
        }
    }

    // Final full projection pass.
    let constraints = model.constraints.clone();
    for (name, dir) in &constraints {
        if let Some(mu) = model.weights.get_mut(name) {
            *mu = pava_project(*mu, *dir);
        }
    }
    debug_assert!(model.constraints_satisfied());
    Ok(model)
}

// --- Serialization ------------------------------------------------------

pub const FORMAT_VERSION: u32 = 1;
const LABEL_STRINGS: [&str; NUM_LABELS] = ["NN", "N", "O", "P", "PP"];

#[derive(Serialize, Deserialize)]
struct FeatureEntry {
    mu: [f64; NUM_LABELS],
    constraint: Option<Direction>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    labels: Vec<String>,
    features: BTreeMap<String, FeatureEntry>,
    transitions: [[f64; NUM_LABELS]; NUM_LABELS],
    bias: [f64; NUM_LABELS],
    config: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extractor: Option<crate::features::FeatureExtractor>,
}

/// Serialize to the versioned JSON model format. `extractor` rides along so
/// tagging needs no side files.
pub fn model_to_json(
    model: &IsotonicCrfModel,
    extractor: Option<&crate::features::FeatureExtractor>,
) -> String {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        labels: LABEL_STRINGS.iter().map(|s| s.to_string()).collect(),
        features: model
            .weights
            .iter()
            .map(|(name, mu)| {
                (
                    name.clone(),
                    FeatureEntry {
                        mu: *mu,
                        constraint: model.constraints.get(name).copied(),
                    },
                )
            })
            .collect(),
        transitions: model.transitions,
        bias: model.bias,
        config: model.config.clone(),
        extractor: extractor.cloned(),
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn model_from_json(
    json: &str,
) -> Result<(IsotonicCrfModel, Option<crate::features::FeatureExtractor>)> {
    // Check the version before full deserialization so version errors beat
    // shape errors.
    #[derive(Deserialize)]
    struct VersionProbe {
        format_version: u32,
    }
    let probe: VersionProbe =
        serde_json::from_str(json).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::ModelVersion {
            found: probe.format_version,
            supported: FORMAT_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_str(json).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if file.labels != LABEL_STRINGS {
        return Err(Error::ModelFormat(format!(
            "unexpected label set {:?}",
            file.labels
        )));
    }
    let mut weights = BTreeMap::new();
    let mut constraints = BTreeMap::new();
    for (name, entry) in file.features {
        if let Some(dir) = entry.constraint {
            constraints.insert(name.clone(), dir);
        }
        weights.insert(name, entry.mu);
    }
    Ok((
        IsotonicCrfModel {
            weights,
            transitions: file.transitions,
            bias: file.bias,
            constraints,
            config: file.config,
        },
        file.extractor,
    ))
}

pub fn save_model(
    model: &IsotonicCrfModel,
    extractor: Option<&crate::features::FeatureExtractor>,
    path: &std::path::Path,
) -> Result<()> {
    std::fs::write(path, model_to_json(model, extractor)).map_err(|source| Error::FileWrite {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(
    path: &std::path::Path,
) -> Result<(IsotonicCrfModel, Option<crate::features::FeatureExtractor>)> {
    let json = std::fs::read_to_string(path).map_err(|source| Error::FileRead {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&json)
}
