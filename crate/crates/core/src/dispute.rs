//! Discussion-level dispute detection: sentiment distribution/transition
//! features (global and 3-stage local), lexical/topic/discussion features,
//! a binary classifier, and the sentiment-flow export behind the plots.

use crate::corpus::{Discussion, SentimentLabel};
use crate::features::{FeatureExtractor, FeatureVector, StandardizeStats};
use crate::icrf::IsotonicCrfModel;
use crate::shallow::{self, LinearModel, LogisticConfig};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::Range;

/// One taggable unit (utterance) in discussion order.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedUnit {
    pub turn: usize,
    pub speaker: String,
    pub label: SentimentLabel,
}

/// Tag every utterance of a discussion with the CRF, turn by turn, and
/// flatten to discussion order.
pub fn tag_units(
    disc: &Discussion,
    model: &IsotonicCrfModel,
    extractor: &FeatureExtractor,
) -> Vec<TaggedUnit> {
    let mut units = Vec::new();
    for (ti, turn) in disc.turns.iter().enumerate() {
        if turn.utterances.is_empty() {
            continue;
        }
        let features: Vec<FeatureVector> = (0..turn.utterances.len())
            .map(|ui| extractor.extract(disc, ti, ui))
            .collect();
        for label in crate::icrf::viterbi(model, &features) {
            units.push(TaggedUnit {
                turn: ti,
                speaker: turn.speaker.clone(),
                label,
            });
        }
    }
    units
}

/// Units carrying the gold labels instead of tagger output (missing gold →
/// neutral); used to study flows independently of tagger quality.
pub fn gold_units(disc: &Discussion) -> Vec<TaggedUnit> {
    let mut units = Vec::new();
    for (ti, turn) in disc.turns.iter().enumerate() {
        for utt in &turn.utterances {
            units.push(TaggedUnit {
                turn: ti,
                speaker: turn.speaker.clone(),
                label: utt.gold.as_ref().map_or(SentimentLabel::Neutral, |g| g.label),
            });
        }
    }
    units
}

/// Per-label count and proportion features under `prefix` (e.g.
/// `dsent:g:`). Empty scope → all zeros (i.e. nothing stored).
pub fn sentiment_distribution(labels: &[SentimentLabel], prefix: &str) -> FeatureVector {
    let mut fv = FeatureVector::default();
    if labels.is_empty() {
        return fv;
    }
    let mut counts = [0usize; 5];
    for l in labels {
        counts[l.index()] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        let name = SentimentLabel::from_index(i).as_str();
        fv.set(format!("{prefix}count:{name}"), c as f64);
        fv.set(
            format!("{prefix}prob:{name}"),
            c as f64 / labels.len() as f64,
        );
    }
    fv
}

/// Counts of the 25 ordered label pairs over adjacent units, plus the
/// conditionals `P(b|a) = count(a→b) / count(a→·)` (0 for sources with no
/// outgoing transitions). Fewer than 2 units → all zeros.
pub fn sentiment_transitions(labels: &[SentimentLabel], prefix: &str) -> FeatureVector {
    let mut fv = FeatureVector::default();
    if labels.len() < 2 {
        return fv;
    }
    let mut counts = [[0usize; 5]; 5];
    for w in labels.windows(2) {
        counts[w[0].index()][w[1].index()] += 1;
    }
    for (a, row) in counts.iter().enumerate() {
        let out: usize = row.iter().sum();
        for (b, &count) in row.iter().enumerate() {
            let from = SentimentLabel::from_index(a).as_str();
            let to = SentimentLabel::from_index(b).as_str();
            fv.set(format!("{prefix}trans:{from}->{to}"), count as f64);
            if out > 0 {
                fv.set(
                    format!("{prefix}ptrans:{from}->{to}"),
                    count as f64 / out as f64,
                );
            }
        }
    }
    fv
}

/// Three contiguous spans with sizes differing by at most one, earlier
/// stages taking the remainder: 10 → (4,3,3), 2 → (1,1,0).
pub fn stage_split(n: usize) -> [Range<usize>; 3] {
    let base = n / 3;
    let rem = n % 3;
    let mut start = 0;
    std::array::from_fn(|i| {
        let size = base + usize::from(i < rem);
        let range = start..start + size;
        start += size;
        range
    })
}

fn is_word(form: &str) -> bool {
    form.chars().any(|c| c.is_alphanumeric())
}

/// Raw discussion-scale numerics (turns, participants, average words per
/// turn, revisions); standardized + binned downstream.
pub fn discussion_features(disc: &Discussion) -> FeatureVector {
    let mut fv = FeatureVector::default();
    let turns = disc.turns.len();
    fv.set("ddis:turns", turns as f64);
    fv.set("ddis:participants", disc.speakers().len() as f64);
    if turns > 0 {
        let words: usize = disc
            .turns
            .iter()
            .map(|t| {
                t.utterances
                    .iter()
                    .map(|u| u.token_count())
                    .sum::<usize>()
            })
            .sum();
        fv.set("ddis:avg_words", words as f64 / turns as f64);
    }
    fv.set("ddis:revisions", disc.revision_count as f64);
    fv
}

/// The raw numeric names produced by [`discussion_features`].
pub const DISCUSSION_NUMERICS: &[&str] = &[
    "ddis:turns",
    "ddis:participants",
    "ddis:avg_words",
    "ddis:revisions",
];

/// Binary unigram/bigram presence over the discussion's category strings.
pub fn topic_features(disc: &Discussion) -> FeatureVector {
    let mut fv = FeatureVector::default();
    for category in &disc.categories {
        let words: Vec<String> = category
            .split_whitespace()
            .map(|w| w.to_lowercase())
            .collect();
        for w in &words {
            fv.set(format!("dtop:uni:{w}"), 1.0);
        }
        for pair in words.windows(2) {
            fv.set(format!("dtop:bi:{}_{}", pair[0], pair[1]), 1.0);
        }
    }
    fv
}

/// Binary unigram/bigram presence over all word tokens of the discussion.
pub fn lexical_features(disc: &Discussion) -> FeatureVector {
    let mut fv = FeatureVector::default();
    for turn in &disc.turns {
        for utt in &turn.utterances {
            for sent in &utt.sentences {
                let words: Vec<&str> = sent
                    .tokens
                    .iter()
                    .filter(|t| is_word(&t.form))
                    .map(|t| t.lowercase.as_str())
                    .collect();
                for w in &words {
                    fv.set(format!("dlex:uni:{w}"), 1.0);
                }
                for pair in words.windows(2) {
                    fv.set(format!("dlex:bi:{}_{}", pair[0], pair[1]), 1.0);
                }
            }
        }
    }
    fv
}

/// Which dispute feature families to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeFamilies {
    pub lex: bool,
    pub top: bool,
    pub dis: bool,
    pub senti_g: bool,
    pub senti_l: bool,
}

impl Default for DisputeFamilies {
    fn default() -> Self {
        DisputeFamilies {
            lex: true,
            top: true,
            dis: true,
            senti_g: true,
            senti_l: true,
        }
    }
}

impl DisputeFamilies {
    pub const NONE: DisputeFamilies = DisputeFamilies {
        lex: false,
        top: false,
        dis: false,
        senti_g: false,
        senti_l: false,
    };

    /// Parse a comma-separated list: `lex,top,dis,senti-g,senti-l`.
    pub fn parse(list: &str) -> Result<DisputeFamilies> {
        let mut fam = DisputeFamilies::NONE;
        for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "lex" => fam.lex = true,
                "top" => fam.top = true,
                "dis" => fam.dis = true,
                "senti-g" => fam.senti_g = true,
                "senti-l" => fam.senti_l = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown dispute feature family {other:?} \
                         (expected lex, top, dis, senti-g, senti-l)"
                    )))
                }
            }
        }
        Ok(fam)
    }
}

impl std::fmt::Display for DisputeFamilies {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        if self.lex {
            parts.push("lex");
        }
        if self.top {
            parts.push("top");
        }
        if self.dis {
            parts.push("dis");
        }
        if self.senti_g {
            parts.push("senti-g");
        }
        if self.senti_l {
            parts.push("senti-l");
        }
        write!(f, "{}", parts.join(","))
    }
}

/// Union of the enabled families for one discussion. `stats`, when given,
/// standardizes and bins the `ddis:` numerics; train with stats fitted on
/// the training discussions only.
pub fn assemble_dispute(
    disc: &Discussion,
    units: &[TaggedUnit],
    families: DisputeFamilies,
    stats: Option<&StandardizeStats>,
) -> FeatureVector {
    let mut fv = FeatureVector::default();
    if families.lex {
        fv.merge(lexical_features(disc));
    }
    if families.top {
        fv.merge(topic_features(disc));
    }
    if families.dis {
        let raw = discussion_features(disc);
        fv.merge(match stats {
            Some(s) => s.apply(raw),
            None => raw,
        });
    }
    let labels: Vec<SentimentLabel> = units.iter().map(|u| u.label).collect();
    if families.senti_g {
        fv.merge(sentiment_distribution(&labels, "dsent:g:"));
        fv.merge(sentiment_transitions(&labels, "dsent:g:"));
    }
    if families.senti_l {
        for (i, range) in stage_split(labels.len()).into_iter().enumerate() {
            let prefix = format!("dsent:l{}:", i + 1);
            fv.merge(sentiment_distribution(&labels[range.clone()], &prefix));
            fv.merge(sentiment_transitions(&labels[range], &prefix));
        }
    }
    fv
}

/// Fit standardization moments for the `ddis:` numerics on training
/// discussions.
pub fn fit_discussion_stats(train: &[Discussion]) -> StandardizeStats {
    let raws: Vec<FeatureVector> = train.iter().map(discussion_features).collect();
    StandardizeStats::fit(DISCUSSION_NUMERICS, raws.iter())
}

pub const DISPUTE_CLASS: &str = "dispute";
pub const NON_DISPUTE_CLASS: &str = "non-dispute";

pub fn dispute_class_label(is_dispute: bool) -> &'static str {
    if is_dispute {
        DISPUTE_CLASS
    } else {
        NON_DISPUTE_CLASS
    }
}

pub fn train_dispute(
    vectors: &[FeatureVector],
    is_dispute: &[bool],
    config: LogisticConfig,
) -> Result<LinearModel> {
    let labels: Vec<String> = is_dispute
        .iter()
        .map(|&d| dispute_class_label(d).to_string())
        .collect();
    shallow::logistic_train(vectors, &labels, config)
}

/// (is_dispute, probability of the dispute class).
pub fn predict_dispute(model: &LinearModel, fv: &FeatureVector) -> (bool, f64) {
    let (class, probs) = shallow::logistic_predict(model, fv);
    let dispute_idx = model
        .classes
        .iter()
        .position(|c| c == DISPUTE_CLASS)
        .unwrap_or(0);
    (class == DISPUTE_CLASS, probs[dispute_idx])
}

// --- Sentiment flow ------------------------------------------------------

/// One speaker's smoothed, spline-resampled sentiment curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerFlow {
    pub speaker: String,
    /// (global unit index as a real x, smoothed value in [−2, 2]).
    pub points: Vec<(f64, f64)>,
}

/// Gaussian-kernel smoothing of irregular samples: weights exp(−Δ²/2σ²)
/// truncated at |Δ| > 3σ, normalized per output point. A single sample is
/// reproduced exactly.
fn gaussian_smooth(xs: &[f64], ys: &[f64], sigma: f64) -> Vec<f64> {
    xs.iter()
        .map(|&x0| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (&x, &y) in xs.iter().zip(ys) {
                let d = (x - x0).abs();
                if d <= 3.0 * sigma {
                    let w = (-d * d / (2.0 * sigma * sigma)).exp();
                    num += w * y;
                    den += w;
                }
            }
            num / den // own point always contributes, so den ≥ 1·w(0) > 0
        })
        .collect()
}

/// Natural cubic spline through (xs, ys), strictly increasing xs. Returns
/// an evaluator clamped to the knot range at the ends.
fn natural_cubic_spline<'a>(xs: &'a [f64], ys: &'a [f64]) -> impl Fn(f64) -> f64 + 'a {
    let n = xs.len();
    // Second derivatives by the standard tridiagonal solve, natural
    // boundary conditions m[0] = m[n-1] = 0.
    let mut m = vec![0.0f64; n];
    if n > 2 {
        let mut diag = vec![0.0f64; n];
        let mut rhs = vec![0.0f64; n];
        let mut upper = vec![0.0f64; n];
        diag[0] = 1.0;
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        }
        diag[n - 1] = 1.0;
        // Forward elimination (lower entry at row i is h0 = xs[i]-xs[i-1]).
        for i in 2..n - 1 {
            let lower = xs[i] - xs[i - 1];
            let factor = lower / diag[i - 1];
            diag[i] -= factor * upper[i - 1];
            rhs[i] -= factor * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
        }
    }
    move |x: f64| {
        if n == 1 {
            return ys[0];
        }
        let x = x.clamp(xs[0], xs[n - 1]);
        let i = match xs.binary_search_by(|probe| probe.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = xs[i + 1] - xs[i];
        let a = (xs[i + 1] - x) / h;
        let b = (x - xs[i]) / h;
        a * ys[i]
            + b * ys[i + 1]
            + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
    }
}

/// Per-speaker flows: raw ordinal values at the speaker's global unit
/// indices, Gaussian-smoothed, then resampled by a natural cubic spline at
/// `samples_per_unit` points per unit of x. Speakers appear in first-spoke
/// order; spline output is clamped into [−2, 2].
pub fn sentiment_flow(
    units: &[TaggedUnit],
    sigma: f64,
    samples_per_unit: usize,
) -> Result<Vec<SpeakerFlow>> {
    if sigma <= 0.0 || sigma.is_nan() {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    if samples_per_unit == 0 {
        return Err(Error::Config("samples_per_unit must be ≥ 1".into()));
    }
    let mut order = Vec::new();
    let mut series: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (idx, unit) in units.iter().enumerate() {
        let entry = series.entry(unit.speaker.as_str()).or_insert_with(|| {
            order.push(unit.speaker.as_str());
            (Vec::new(), Vec::new())
        });
        entry.0.push(idx as f64);
        entry.1.push(unit.label.value() as f64);
    }
    let flows = order
        .into_iter()
        .map(|speaker| {
            let (xs, raw) = &series[speaker];
            let smoothed = gaussian_smooth(xs, raw, sigma);
            let spline = natural_cubic_spline(xs, &smoothed);
            let mut points = Vec::new();
            if xs.len() == 1 {
                points.push((xs[0], smoothed[0]));
            } else {
                let span = xs[xs.len() - 1] - xs[0];
                let steps = (span * samples_per_unit as f64).round() as usize;
                for s in 0..=steps {
                    let x = xs[0] + s as f64 / samples_per_unit as f64;
                    points.push((x, spline(x).clamp(-2.0, 2.0)));
                }
            }
            SpeakerFlow {
                speaker: speaker.to_string(),
                points,
            }
        })
        .collect();
    Ok(flows)
}

/// Global unit indices at which a new turn starts (skipping index 0).
pub fn turn_boundaries(units: &[TaggedUnit]) -> Vec<usize> {
    units
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].turn != w[1].turn)
        .map(|(i, _)| i + 1)
        .collect()
}

/// CSV export: `speaker,sample_x,smoothed_y,is_turn_boundary`. Speaker
/// curves carry is_turn_boundary=0; turn starts append marker rows with an
/// empty speaker and empty y.
pub fn flow_to_csv(flows: &[SpeakerFlow], boundaries: &[usize]) -> String {
    let mut out = String::from("speaker,sample_x,smoothed_y,is_turn_boundary\n");
    for flow in flows {
        for &(x, y) in &flow.points {
            out.push_str(&format!("{},{:.6},{:.6},0\n", flow.speaker, x, y));
        }
    }
    for &b in boundaries {
        out.push_str(&format!(",{:.6},,1\n", b as f64));
    }
    out
}

/// Assemble feature vectors for many discussions in parallel, preserving
/// input order.
pub fn assemble_all(
    discussions: &[Discussion],
    tagger: &IsotonicCrfModel,
    extractor: &FeatureExtractor,
    families: DisputeFamilies,
    stats: Option<&StandardizeStats>,
) -> Vec<FeatureVector> {
    discussions
        .par_iter()
        .map(|disc| {
            let units = tag_units(disc, tagger, extractor);
            assemble_dispute(disc, &units, families, stats)
        })
        .collect()
}
