//! Sentiment lexicon induction: text units, seed handling, the propagation
//! graph, and the scored lexicon artifact.
//!
//! The pipeline is: extract text units from a corpus, connect them by
//! PMI-vector cosine similarity over sentence co-occurrence ([`graph`]),
//! spread seed polarity through the graph by label propagation, and freeze
//! the scores into a [`Lexicon`] whose strong members drive both sentiment
//! features and the tagger's ordinal weight constraints.

mod graph;

pub use graph::{
    build_graph, cosine, count_cooccurrence, extract_text_units, pmi_vector, propagate,
    sentence_units, CooccurrenceCounts, GraphConfig, PropagationGraph, PropagationRun,
};
pub(crate) use graph::punct_runs;

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Unigram,
    Bigram,
    Deprel,
    Sentideprel,
    Punct,
}

impl UnitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitKind::Unigram => "unigram",
            UnitKind::Bigram => "bigram",
            UnitKind::Deprel => "deprel",
            UnitKind::Sentideprel => "sentideprel",
            UnitKind::Punct => "punct",
        }
    }

    pub fn parse(s: &str) -> Option<UnitKind> {
        match s {
            "unigram" => Some(UnitKind::Unigram),
            "bigram" => Some(UnitKind::Bigram),
            "deprel" => Some(UnitKind::Deprel),
            "sentideprel" => Some(UnitKind::Sentideprel),
            "punct" => Some(UnitKind::Punct),
            _ => None,
        }
    }
}

/// A graph node: unigram, bigram, dependency relation, sentiment dependency
/// relation, or punctuation run. The payload is the canonical string form
/// (`uni:good`, `bi:good_idea`, `dep:Rel(agree,on)`, `sdep:nsubj(SENTneg,you)`,
/// `punct:?!!`) — lowercase except for the `Rel`/`SENT*` tags, whitespace-free,
/// and unique across kinds because the prefix encodes the kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextUnit {
    pub kind: UnitKind,
    pub payload: String,
}

impl TextUnit {
    fn scrub(s: &str) -> String {
        s.to_lowercase().split_whitespace().collect::<Vec<_>>().join("_")
    }

    pub fn unigram(word: &str) -> TextUnit {
        TextUnit {
            kind: UnitKind::Unigram,
            payload: format!("uni:{}", Self::scrub(word)),
        }
    }

    pub fn bigram(first: &str, second: &str) -> TextUnit {
        TextUnit {
            kind: UnitKind::Bigram,
            payload: format!("bi:{}_{}", Self::scrub(first), Self::scrub(second)),
        }
    }

    /// Dependency relation with the relation name replaced by the general
    /// `Rel` tag.
    pub fn deprel(head: &str, dependent: &str) -> TextUnit {
        TextUnit {
            kind: UnitKind::Deprel,
            payload: format!("dep:Rel({},{})", Self::scrub(head), Self::scrub(dependent)),
        }
    }

    /// Dependency relation with its sentiment-bearing word replaced by a
    /// polarity placeholder; the relation name is kept.
    pub fn sentideprel(relation: &str, head: &str, dependent: &str) -> TextUnit {
        TextUnit {
            kind: UnitKind::Sentideprel,
            payload: format!(
                "sdep:{}({},{})",
                Self::scrub(relation),
                if head.starts_with("SENT") { head.to_string() } else { Self::scrub(head) },
                if dependent.starts_with("SENT") {
                    dependent.to_string()
                } else {
                    Self::scrub(dependent)
                }
            ),
        }
    }

    pub fn punct(run: &str) -> TextUnit {
        TextUnit {
            kind: UnitKind::Punct,
            payload: format!("punct:{run}"),
        }
    }
}

/// Canonical order is payload order; payloads are unique across kinds.
impl Ord for TextUnit {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.payload.cmp(&other.payload)
    }
}

impl PartialOrd for TextUnit {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for TextUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.payload)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Pos,
    Neg,
}

/// Positive/negative seed word sets, conflict-free by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedSets {
    pub pos: BTreeSet<String>,
    pub neg: BTreeSet<String>,
}

impl SeedSets {
    /// Inventory view used by text-unit extraction (seeds are unigrams).
    pub fn inventory(&self) -> SentimentInventory {
        SentimentInventory {
            pos: self.pos.iter().map(|w| format!("uni:{w}")).collect(),
            neg: self.neg.iter().map(|w| format!("uni:{w}")).collect(),
        }
    }
}

/// Payload sets of strongly positive / strongly negative units. Built from
/// seed sets during graph construction and from lexicon thresholds (M_p /
/// M_n) afterwards; serialized into tagger models so inference needs no
/// side files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentInventory {
    pub pos: BTreeSet<String>,
    pub neg: BTreeSet<String>,
}

impl SentimentInventory {
    pub fn payload_polarity(&self, payload: &str) -> Option<Polarity> {
        if self.pos.contains(payload) {
            Some(Polarity::Pos)
        } else if self.neg.contains(payload) {
            Some(Polarity::Neg)
        } else {
            None
        }
    }

    /// Polarity of a plain (lowercased) word, via its unigram payload.
    pub fn word_polarity(&self, word: &str) -> Option<Polarity> {
        self.payload_polarity(&format!("uni:{word}"))
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty() && self.neg.is_empty()
    }
}

/// Minimum SentiWordNet-style polarity score for a seed word to be kept
/// (strictly greater than).
pub const SEED_SCORE_THRESHOLD: f64 = 0.7;

/// Parse seed TSV content: `word TAB pos_score TAB neg_score` or
/// `word TAB +|-`. Scored entries are kept only when max(pos, neg) exceeds
/// [`SEED_SCORE_THRESHOLD`]; ties between pos and neg are conflicting and
/// yield no entry.
pub fn parse_seeds(content: &str, origin: &str) -> Result<Vec<(String, Polarity)>> {
    let mut out = Vec::new();
    for (i, raw_line) in content.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw_line.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        let bad = |message: String| Error::MalformedLine {
            line,
            message: format!("{origin}: {message}"),
        };
        match fields.as_slice() {
            [word, sign] => {
                let polarity = match *sign {
                    "+" => Polarity::Pos,
                    "-" | "\u{2212}" => Polarity::Neg,
                    other => return Err(bad(format!("expected +/-, got {other:?}"))),
                };
                out.push((word.to_lowercase(), polarity));
            }
            [word, pos, neg] => {
                let pos: f64 = pos
                    .parse()
                    .map_err(|_| bad(format!("bad positive score {pos:?}")))?;
                let neg: f64 = neg
                    .parse()
                    .map_err(|_| bad(format!("bad negative score {neg:?}")))?;
                if pos.max(neg) > SEED_SCORE_THRESHOLD && pos != neg {
                    let polarity = if pos > neg { Polarity::Pos } else { Polarity::Neg };
                    out.push((word.to_lowercase(), polarity));
                }
            }
            _ => return Err(bad(format!("expected 2 or 3 tab-separated fields, got {}", fields.len()))),
        }
    }
    Ok(out)
}

/// Merge seed entries from all sources, dropping words claimed by both
/// polarities.
pub fn merge_seeds(entries: impl IntoIterator<Item = (String, Polarity)>) -> SeedSets {
    let mut pos = BTreeSet::new();
    let mut neg = BTreeSet::new();
    for (word, polarity) in entries {
        match polarity {
            Polarity::Pos => pos.insert(word),
            Polarity::Neg => neg.insert(word),
        };
    }
    let conflicted: Vec<String> = pos.intersection(&neg).cloned().collect();
    for w in &conflicted {
        pos.remove(w);
        neg.remove(w);
    }
    SeedSets { pos, neg }
}

/// Read and merge one or more seed TSV files.
pub fn load_seed_files<P: AsRef<Path>>(paths: &[P]) -> Result<SeedSets> {
    let mut entries = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|source| Error::FileRead {
            path: path.display().to_string(),
            source,
        })?;
        entries.extend(parse_seeds(&content, &path.display().to_string())?);
    }
    Ok(merge_seeds(entries))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryProvenance {
    Seed,
    Propagated,
}

impl EntryProvenance {
    fn as_str(self) -> &'static str {
        match self {
            EntryProvenance::Seed => "seed",
            EntryProvenance::Propagated => "propagated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub unit: TextUnit,
    pub score: f64,
    pub provenance: EntryProvenance,
}

/// Polarity-scored text units plus the thresholds carving out the strong
/// positive (M_p) and strong negative (M_n) memberships.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Keyed by canonical payload.
    pub entries: BTreeMap<String, LexiconEntry>,
    pub pos_threshold: f64,
    pub neg_threshold: f64,
}

impl Lexicon {
    pub fn new(
        entries: impl IntoIterator<Item = LexiconEntry>,
        pos_threshold: f64,
        neg_threshold: f64,
    ) -> Result<Lexicon> {
        if !(neg_threshold < 0.0 && 0.0 < pos_threshold) {
            return Err(Error::ThresholdOrder {
                pos: pos_threshold,
                neg: neg_threshold,
            });
        }
        Ok(Lexicon {
            entries: entries
                .into_iter()
                .map(|e| (e.unit.payload.clone(), e))
                .collect(),
            pos_threshold,
            neg_threshold,
        })
    }

    pub fn score(&self, payload: &str) -> Option<f64> {
        self.entries.get(payload).map(|e| e.score)
    }

    /// M_p membership: score at or above the positive threshold.
    pub fn is_pos(&self, payload: &str) -> bool {
        matches!(self.score(payload), Some(s) if s >= self.pos_threshold)
    }

    /// M_n membership: score at or below the negative threshold.
    pub fn is_neg(&self, payload: &str) -> bool {
        matches!(self.score(payload), Some(s) if s <= self.neg_threshold)
    }

    pub fn polarity(&self, payload: &str) -> Option<Polarity> {
        if self.is_pos(payload) {
            Some(Polarity::Pos)
        } else if self.is_neg(payload) {
            Some(Polarity::Neg)
        } else {
            None
        }
    }

    pub fn inventory(&self) -> SentimentInventory {
        let mut inv = SentimentInventory::default();
        for (payload, entry) in &self.entries {
            if entry.score >= self.pos_threshold {
                inv.pos.insert(payload.clone());
            } else if entry.score <= self.neg_threshold {
                inv.neg.insert(payload.clone());
            }
        }
        inv
    }

    /// Entries sorted for serialization: |score| descending, payload ascending.
    fn sorted_entries(&self) -> Vec<&LexiconEntry> {
        let mut entries: Vec<&LexiconEntry> = self.entries.values().collect();
        entries.sort_by(|a, b| {
            b.score
                .abs()
                .partial_cmp(&a.score.abs())
                .expect("lexicon scores are finite")
                .then_with(|| a.unit.payload.cmp(&b.unit.payload))
        });
        entries
    }

    /// TSV serialization: kind, payload, score (6 decimals), provenance.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in self.sorted_entries() {
            // Avoid "-0.000000" so output is canonical.
            let score = if e.score == 0.0 { 0.0 } else { e.score };
            writeln!(
                out,
                "{}\t{}\t{:.6}\t{}",
                e.unit.kind.as_str(),
                e.unit.payload,
                score,
                e.provenance.as_str()
            )
            .expect("writing to String cannot fail");
        }
        out
    }

    pub fn from_tsv(content: &str, pos_threshold: f64, neg_threshold: f64) -> Result<Lexicon> {
        let mut entries = Vec::new();
        for (i, raw_line) in content.lines().enumerate() {
            let line = i + 1;
            if raw_line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw_line.split('\t').collect();
            let bad = |message: String| Error::MalformedLine { line, message };
            let [kind, payload, score, provenance] = fields.as_slice() else {
                return Err(bad(format!(
                    "expected 4 tab-separated fields, got {}",
                    fields.len()
                )));
            };
            let kind = UnitKind::parse(kind)
                .ok_or_else(|| bad(format!("unknown unit kind {kind:?}")))?;
            let score: f64 = score
                .parse()
                .map_err(|_| bad(format!("bad score {score:?}")))?;
            let provenance = match *provenance {
                "seed" => EntryProvenance::Seed,
                "propagated" => EntryProvenance::Propagated,
                other => return Err(bad(format!("unknown provenance {other:?}"))),
            };
            entries.push(LexiconEntry {
                unit: TextUnit {
                    kind,
                    payload: payload.to_string(),
                },
                score,
                provenance,
            });
        }
        Lexicon::new(entries, pos_threshold, neg_threshold)
    }
}

/// Freeze propagation scores into a lexicon. Seed nodes get provenance
/// `seed` (their scores are exactly ±1 by clamping).
pub fn emit_lexicon(
    graph: &PropagationGraph,
    scores: &[f64],
    pos_threshold: f64,
    neg_threshold: f64,
) -> Result<Lexicon> {
    debug_assert_eq!(graph.nodes.len(), scores.len());
    let entries = graph.nodes.iter().enumerate().map(|(i, unit)| LexiconEntry {
        unit: unit.clone(),
        score: scores[i],
        provenance: if graph.seeds_pos.contains(&i) || graph.seeds_neg.contains(&i) {
            EntryProvenance::Seed
        } else {
            EntryProvenance::Propagated
        },
    });
    Lexicon::new(entries, pos_threshold, neg_threshold)
}
