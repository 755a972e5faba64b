//! Data model for threaded discussions and gold-label induction.
//!
//! Discussions arrive as pre-tokenized (optionally pre-parsed) JSONL; the
//! toolkit never runs a tokenizer or parser itself. Everything here is
//! immutable after parsing and safe to share across workers.

mod ingest;

pub use ingest::parse_discussions;

use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Five-point ordinal sentiment scale, `NN < N < O < P < PP`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SentimentLabel {
    #[serde(rename = "NN")]
    VeryNegative,
    #[serde(rename = "N")]
    Negative,
    #[serde(rename = "O")]
    Neutral,
    #[serde(rename = "P")]
    Positive,
    #[serde(rename = "PP")]
    VeryPositive,
}

/// Three-way collapse of the five-point scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stance {
    #[serde(rename = "disagree")]
    Disagree,
    #[serde(rename = "neutral")]
    Neutral,
    #[serde(rename = "agree")]
    Agree,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 5] = [
        SentimentLabel::VeryNegative,
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
        SentimentLabel::Positive,
        SentimentLabel::VeryPositive,
    ];

    /// Integer value in {-2, -1, 0, 1, 2}.
    pub fn value(self) -> i32 {
        match self {
            SentimentLabel::VeryNegative => -2,
            SentimentLabel::Negative => -1,
            SentimentLabel::Neutral => 0,
            SentimentLabel::Positive => 1,
            SentimentLabel::VeryPositive => 2,
        }
    }

    /// Dense index 0..5 in ordinal order.
    pub fn index(self) -> usize {
        (self.value() + 2) as usize
    }

    pub fn from_index(i: usize) -> SentimentLabel {
        Self::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::VeryNegative => "NN",
            SentimentLabel::Negative => "N",
            SentimentLabel::Neutral => "O",
            SentimentLabel::Positive => "P",
            SentimentLabel::VeryPositive => "PP",
        }
    }

    pub fn parse(s: &str) -> Option<SentimentLabel> {
        match s {
            "NN" => Some(SentimentLabel::VeryNegative),
            "N" => Some(SentimentLabel::Negative),
            "O" => Some(SentimentLabel::Neutral),
            "P" => Some(SentimentLabel::Positive),
            "PP" => Some(SentimentLabel::VeryPositive),
            _ => None,
        }
    }

    /// {NN, N} -> disagree, {P, PP} -> agree, {O} -> neutral.
    pub fn collapse(self) -> Stance {
        match self.value() {
            v if v < 0 => Stance::Disagree,
            0 => Stance::Neutral,
            _ => Stance::Agree,
        }
    }
}

impl std::fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Stance {
    pub const ALL: [Stance; 3] = [Stance::Agree, Stance::Disagree, Stance::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Agree => "agree",
            Stance::Disagree => "disagree",
            Stance::Neutral => "neutral",
        }
    }

    pub fn parse(s: &str) -> Option<Stance> {
        match s {
            "agree" => Some(Stance::Agree),
            "disagree" => Some(Stance::Disagree),
            "neutral" => Some(Stance::Neutral),
            _ => None,
        }
    }
}

impl std::fmt::Display for Stance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a gold label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Explicit span-level annotation.
    Span,
    /// Inherited from a turn-level annotation.
    Turn,
    /// Mapped from a numeric annotator score.
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub label: SentimentLabel,
    pub provenance: Provenance,
}

/// Raw annotator judgement carried through ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorMark {
    pub annotator: String,
    /// "agreement" / "disagreement" / "neutral", or a numeric score string
    /// when `origin` is `Score`.
    pub mark: String,
    pub origin: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    pub lowercase: String,
    pub pos: Option<String>,
    /// 1-based index of the head token within the sentence; 0 means root.
    pub head: Option<usize>,
    pub deprel: Option<String>,
}

impl Token {
    pub fn new(form: &str) -> Token {
        Token {
            form: form.to_string(),
            lowercase: form.to_lowercase(),
            pos: None,
            head: None,
            deprel: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub raw: String,
}

/// Token span quoted from another turn. Indices are 0-based over the
/// utterance's flattened token sequence, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub start: usize,
    pub end: usize,
    pub source_turn: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub text: String,
    pub sentences: Vec<Sentence>,
    pub quotes: Vec<Quote>,
    pub gold: Option<GoldLabel>,
    pub annotator_labels: Vec<AnnotatorMark>,
}

impl Utterance {
    /// All tokens flattened across sentences.
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    /// True when the flattened token index falls inside any quote span.
    pub fn in_quote(&self, idx: usize) -> bool {
        self.quotes.iter().any(|q| idx >= q.start && idx < q.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: String,
    pub ordinal: usize,
    pub reply_to: Option<usize>,
    pub turn_label: Option<String>,
    pub utterances: Vec<Utterance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Aawd,
    Iac,
    Wikitalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisputeSubcategory {
    Controversy,
    Rfc,
    Resolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeGold {
    pub is_dispute: bool,
    pub subcategory: Option<DisputeSubcategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discussion {
    pub id: String,
    pub source: Source,
    pub categories: Vec<String>,
    pub revision_count: u64,
    pub dispute_gold: Option<DisputeGold>,
    pub turns: Vec<Turn>,
}

impl Discussion {
    pub fn utterance_count(&self) -> usize {
        self.turns.iter().map(|t| t.utterances.len()).sum()
    }

    pub fn speakers(&self) -> std::collections::BTreeSet<&str> {
        self.turns.iter().map(|t| t.speaker.as_str()).collect()
    }
}

/// Induce a five-point label from AAWD-style agreement/disagreement marks.
///
/// Span marks by two or more distinct annotators give the intense label
/// (PP / NN); a single span annotator or a turn-level-only mark gives the
/// plain label (P / N, provenance `Turn` in the turn-only case). An
/// utterance carrying both positive and negative marks is neutral.
pub fn induce_labels_aawd(marks: &[AnnotatorMark], turn_label: Option<&str>) -> GoldLabel {
    use std::collections::BTreeSet;

    let is_pos = |m: &str| m.eq_ignore_ascii_case("agreement") || m.eq_ignore_ascii_case("agree");
    let is_neg =
        |m: &str| m.eq_ignore_ascii_case("disagreement") || m.eq_ignore_ascii_case("disagree");

    let mut pos_span: BTreeSet<&str> = BTreeSet::new();
    let mut neg_span: BTreeSet<&str> = BTreeSet::new();
    let mut pos_any = false;
    let mut neg_any = false;
    let mut turn_mark_seen = false;

    for m in marks {
        let (p, n) = (is_pos(&m.mark), is_neg(&m.mark));
        pos_any |= p;
        neg_any |= n;
        match m.origin {
            Provenance::Span => {
                if p {
                    pos_span.insert(m.annotator.as_str());
                }
                if n {
                    neg_span.insert(m.annotator.as_str());
                }
            }
            Provenance::Turn => turn_mark_seen |= p || n,
            Provenance::Score => {}
        }
    }
    if let Some(t) = turn_label {
        let (p, n) = (is_pos(t), is_neg(t));
        pos_any |= p;
        neg_any |= n;
        turn_mark_seen |= p || n;
    }

    let span = GoldLabel {
        label: SentimentLabel::Neutral,
        provenance: Provenance::Span,
    };
    if pos_any && neg_any {
        // Contradictory sentiments collapse to neutral.
        return span;
    }
    if pos_span.len() >= 2 {
        return GoldLabel {
            label: SentimentLabel::VeryPositive,
            provenance: Provenance::Span,
        };
    }
    if neg_span.len() >= 2 {
        return GoldLabel {
            label: SentimentLabel::VeryNegative,
            provenance: Provenance::Span,
        };
    }
    if pos_span.len() == 1 {
        return GoldLabel {
            label: SentimentLabel::Positive,
            provenance: Provenance::Span,
        };
    }
    if neg_span.len() == 1 {
        return GoldLabel {
            label: SentimentLabel::Negative,
            provenance: Provenance::Span,
        };
    }
    if pos_any {
        return GoldLabel {
            label: SentimentLabel::Positive,
            provenance: Provenance::Turn,
        };
    }
    if neg_any {
        return GoldLabel {
            label: SentimentLabel::Negative,
            provenance: Provenance::Turn,
        };
    }
    if turn_mark_seen || (marks.is_empty() && turn_label.is_some()) {
        return GoldLabel {
            label: SentimentLabel::Neutral,
            provenance: Provenance::Turn,
        };
    }
    span
}

/// Map a mean IAC annotator score in [-5, 5] to the five-point scale:
/// [-5,-3] -> NN, (-3,-1] -> N, [1,3) -> P, [3,5] -> PP, all others -> O.
pub fn induce_labels_iac(mean_score: f64) -> Result<SentimentLabel> {
    if !(-5.0..=5.0).contains(&mean_score) || mean_score.is_nan() {
        return Err(Error::ScoreOutOfRange(mean_score));
    }
    Ok(if mean_score <= -3.0 {
        SentimentLabel::VeryNegative
    } else if mean_score <= -1.0 {
        SentimentLabel::Negative
    } else if mean_score >= 3.0 {
        SentimentLabel::VeryPositive
    } else if mean_score >= 1.0 {
        SentimentLabel::Positive
    } else {
        SentimentLabel::Neutral
    })
}

/// Fill in missing gold labels from raw annotations, in place.
///
/// Utterances that already carry a gold label keep it. Marks with a
/// numeric `Score` origin are averaged and mapped through the IAC rule;
/// otherwise the AAWD rules apply, merging the turn-level label.
pub fn induce_all_labels(discussions: &mut [Discussion]) -> Result<()> {
    for disc in discussions.iter_mut() {
        for turn in disc.turns.iter_mut() {
            let turn_label = turn.turn_label.clone();
            for utt in turn.utterances.iter_mut() {
                if utt.gold.is_some() {
                    continue;
                }
                let scores: Vec<f64> = utt
                    .annotator_labels
                    .iter()
                    .filter(|m| m.origin == Provenance::Score)
                    .map(|m| {
                        m.mark.parse::<f64>().map_err(|_| Error::InvalidValue {
                            field: format!("annotator_labels.mark ({})", utt.id),
                            message: format!("not a numeric score: {:?}", m.mark),
                        })
                    })
                    .collect::<Result<_>>()?;
                utt.gold = Some(if scores.is_empty() {
                    induce_labels_aawd(&utt.annotator_labels, turn_label.as_deref())
                } else {
                    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
                    GoldLabel {
                        label: induce_labels_iac(mean)?,
                        provenance: Provenance::Score,
                    }
                });
            }
        }
    }
    Ok(())
}

/// Drop turns whose utterances are all neutral (or unlabeled). Utterance
/// content and order are untouched.
pub fn downsample(discussions: Vec<Discussion>) -> Vec<Discussion> {
    discussions
        .into_iter()
        .map(|mut disc| {
            disc.turns.retain(|turn| {
                turn.utterances
                    .iter()
                    .any(|u| matches!(&u.gold, Some(g) if g.label != SentimentLabel::Neutral))
            });
            disc
        })
        .collect()
}

/// Split discussions into `k` folds of near-equal size (earlier folds take
/// the remainder), deterministically for a given seed.
pub fn split_folds(
    discussions: Vec<Discussion>,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<Discussion>>> {
    let n = discussions.len();
    if k < 2 || k > n {
        return Err(Error::FoldCount { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut slots: Vec<Option<Discussion>> = discussions.into_iter().map(Some).collect();
    let mut folds = Vec::with_capacity(k);
    let base = n / k;
    let rem = n % k;
    let mut cursor = 0;
    for i in 0..k {
        let size = base + usize::from(i < rem);
        let fold = order[cursor..cursor + size]
            .iter()
            .map(|&idx| slots[idx].take().expect("fold indices are disjoint"))
            .collect();
        cursor += size;
        folds.push(fold);
    }
    Ok(folds)
}

/// Keep only discussions with at least 3 distinct speakers and 10 turns.
pub fn filter_nondispute_candidates(discussions: Vec<Discussion>) -> Vec<Discussion> {
    discussions
        .into_iter()
        .filter(|d| d.turns.len() >= 10 && d.speakers().len() >= 3)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mark(annotator: &str, mark: &str, origin: Provenance) -> AnnotatorMark {
        AnnotatorMark {
            annotator: annotator.into(),
            mark: mark.into(),
            origin,
        }
    }

    #[test]
    fn aawd_two_span_annotators_give_pp() {
        let marks = [
            mark("a1", "agreement", Provenance::Span),
            mark("a2", "agreement", Provenance::Span),
        ];
        let g = induce_labels_aawd(&marks, None);
        assert_eq!(g.label, SentimentLabel::VeryPositive);
        assert_eq!(g.provenance, Provenance::Span);
    }

    #[test]
    fn aawd_turn_only_agreement_gives_p_with_turn_provenance() {
        let g = induce_labels_aawd(&[], Some("agreement"));
        assert_eq!(g.label, SentimentLabel::Positive);
        assert_eq!(g.provenance, Provenance::Turn);
    }

    #[test]
    fn aawd_single_span_gives_p_with_span_provenance() {
        let marks = [mark("a1", "agreement", Provenance::Span)];
        let g = induce_labels_aawd(&marks, None);
        assert_eq!(g.label, SentimentLabel::Positive);
        assert_eq!(g.provenance, Provenance::Span);
    }

    #[test]
    fn aawd_conflicting_marks_are_neutral() {
        let marks = [
            mark("a1", "agreement", Provenance::Span),
            mark("a2", "disagreement", Provenance::Span),
        ];
        assert_eq!(
            induce_labels_aawd(&marks, None).label,
            SentimentLabel::Neutral
        );
    }

    #[test]
    fn aawd_negative_side_mirrors_positive() {
        let marks = [
            mark("a1", "disagreement", Provenance::Span),
            mark("a2", "disagreement", Provenance::Span),
            mark("a3", "disagreement", Provenance::Span),
        ];
        assert_eq!(
            induce_labels_aawd(&marks, None).label,
            SentimentLabel::VeryNegative
        );
        let one = [mark("a1", "disagreement", Provenance::Span)];
        assert_eq!(
            induce_labels_aawd(&one, None).label,
            SentimentLabel::Negative
        );
        let g = induce_labels_aawd(&[], Some("disagreement"));
        assert_eq!(g.label, SentimentLabel::Negative);
        assert_eq!(g.provenance, Provenance::Turn);
    }

    #[test]
    fn aawd_duplicate_annotator_counts_once() {
        let marks = [
            mark("a1", "agreement", Provenance::Span),
            mark("a1", "agreement", Provenance::Span),
        ];
        assert_eq!(
            induce_labels_aawd(&marks, None).label,
            SentimentLabel::Positive
        );
    }

    #[test]
    fn aawd_no_marks_is_neutral() {
        assert_eq!(
            induce_labels_aawd(&[], None).label,
            SentimentLabel::Neutral
        );
    }

    #[test]
    fn iac_boundaries() {
        assert_eq!(
            induce_labels_iac(-4.0).unwrap(),
            SentimentLabel::VeryNegative
        );
        assert_eq!(
            induce_labels_iac(-3.0).unwrap(),
            SentimentLabel::VeryNegative
        );
        assert_eq!(induce_labels_iac(-2.9).unwrap(), SentimentLabel::Negative);
        assert_eq!(induce_labels_iac(-1.0).unwrap(), SentimentLabel::Negative);
        assert_eq!(induce_labels_iac(-0.9).unwrap(), SentimentLabel::Neutral);
        assert_eq!(induce_labels_iac(0.0).unwrap(), SentimentLabel::Neutral);
        assert_eq!(induce_labels_iac(0.9).unwrap(), SentimentLabel::Neutral);
        assert_eq!(induce_labels_iac(1.0).unwrap(), SentimentLabel::Positive);
        assert_eq!(induce_labels_iac(2.9).unwrap(), SentimentLabel::Positive);
        assert_eq!(
            induce_labels_iac(3.0).unwrap(),
            SentimentLabel::VeryPositive
        );
        assert_eq!(
            induce_labels_iac(5.0).unwrap(),
            SentimentLabel::VeryPositive
        );
        assert!(induce_labels_iac(5.1).is_err());
        assert!(induce_labels_iac(-5.1).is_err());
    }

    #[test]
    fn iac_mapping_is_monotone() {
        let mut prev = SentimentLabel::VeryNegative;
        let mut x = -5.0;
        while x <= 5.0 {
            let label = induce_labels_iac(x).unwrap();
            assert!(label >= prev, "label dropped at score {x}");
            prev = label;
            x += 0.01;
        }
    }

    fn labeled_discussion(turn_labels: &[&[SentimentLabel]]) -> Discussion {
        let turns = turn_labels
            .iter()
            .enumerate()
            .map(|(i, labels)| Turn {
                speaker: format!("s{i}"),
                ordinal: i + 1,
                reply_to: None,
                turn_label: None,
                utterances: labels
                    .iter()
                    .enumerate()
                    .map(|(j, &label)| Utterance {
                        id: format!("u{i}-{j}"),
                        text: String::new(),
                        sentences: vec![],
                        quotes: vec![],
                        gold: Some(GoldLabel {
                            label,
                            provenance: Provenance::Span,
                        }),
                        annotator_labels: vec![],
                    })
                    .collect(),
            })
            .collect();
        Discussion {
            id: "d".into(),
            source: Source::Aawd,
            categories: vec![],
            revision_count: 0,
            dispute_gold: None,
            turns,
        }
    }

    #[test]
    fn downsample_drops_all_neutral_turns() {
        use SentimentLabel::*;
        let disc = labeled_discussion(&[&[Neutral, Neutral], &[Neutral, Positive]]);
        let out = downsample(vec![disc]);
        assert_eq!(out[0].turns.len(), 1);
        assert_eq!(out[0].turns[0].utterances.len(), 2);
    }

    #[test]
    fn downsample_degenerate_and_identity() {
        use SentimentLabel::*;
        let all_neutral = labeled_discussion(&[&[Neutral], &[Neutral]]);
        let out = downsample(vec![all_neutral]);
        assert_eq!(out.len(), 1);
        assert!(out[0].turns.is_empty());

        let mixed = labeled_discussion(&[&[Positive], &[VeryNegative, Neutral]]);
        let before = mixed.clone();
        assert_eq!(downsample(vec![mixed])[0], before);
    }

    fn dummy_discussions(n: usize) -> Vec<Discussion> {
        (0..n)
            .map(|i| Discussion {
                id: format!("d{i}"),
                source: Source::Wikitalk,
                categories: vec![],
                revision_count: 0,
                dispute_gold: None,
                turns: vec![],
            })
            .collect()
    }

    #[test]
    fn folds_partition_evenly() {
        let folds = split_folds(dummy_discussions(10), 5, 7).unwrap();
        assert!(folds.iter().all(|f| f.len() == 2));
    }

    #[test]
    fn folds_remainder_goes_to_earlier_folds() {
        let folds = split_folds(dummy_discussions(11), 5, 7).unwrap();
        let sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn folds_are_deterministic_and_disjoint() {
        let a = split_folds(dummy_discussions(13), 4, 42).unwrap();
        let b = split_folds(dummy_discussions(13), 4, 42).unwrap();
        assert_eq!(a, b);

        let mut seen: Vec<String> = a
            .iter()
            .flat_map(|f| f.iter().map(|d| d.id.clone()))
            .collect();
        seen.sort();
        let expected: Vec<String> = (0..13).map(|i| format!("d{i}")).collect();
        let mut expected = expected;
        expected.sort();
        assert_eq!(seen, expected);
    }

    #[test]
    fn folds_reject_bad_k() {
        assert!(split_folds(dummy_discussions(3), 1, 0).is_err());
        assert!(split_folds(dummy_discussions(3), 4, 0).is_err());
    }

    #[test]
    fn nondispute_candidate_thresholds() {
        let make = |speakers: usize, turns: usize| {
            let mut d = dummy_discussions(1).remove(0);
            d.turns = (0..turns)
                .map(|i| Turn {
                    speaker: format!("s{}", i % speakers),
                    ordinal: i + 1,
                    reply_to: None,
                    turn_label: None,
                    utterances: vec![],
                })
                .collect();
            d
        };
        assert_eq!(filter_nondispute_candidates(vec![make(3, 10)]).len(), 1);
        assert_eq!(filter_nondispute_candidates(vec![make(2, 50)]).len(), 0);
        assert_eq!(filter_nondispute_candidates(vec![make(5, 9)]).len(), 0);
    }

    #[test]
    fn collapse_mapping() {
        use SentimentLabel::*;
        assert_eq!(VeryNegative.collapse(), Stance::Disagree);
        assert_eq!(Negative.collapse(), Stance::Disagree);
        assert_eq!(Neutral.collapse(), Stance::Neutral);
        assert_eq!(Positive.collapse(), Stance::Agree);
        assert_eq!(VeryPositive.collapse(), Stance::Agree);
    }

    #[test]
    fn label_values_and_order() {
        use SentimentLabel::*;
        assert!(VeryNegative < Negative && Negative < Neutral);
        assert!(Neutral < Positive && Positive < VeryPositive);
        let values: Vec<i32> = SentimentLabel::ALL.iter().map(|l| l.value()).collect();
        assert_eq!(values, vec![-2, -1, 0, 1, 2]);
    }
}
