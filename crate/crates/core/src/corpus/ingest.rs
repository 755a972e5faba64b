//! JSONL ingestion with per-line diagnostics.
//!
//! One discussion per line. Parse errors report the 1-based line number;
//! field-level validation errors additionally name the offending field.

use super::*;
use crate::{Error, Result};

#[derive(Deserialize)]
struct RawDiscussion {
    id: String,
    source: Source,
    #[serde(default)]
    categories: Vec<String>,
    #[serde(default)]
    revision_count: u64,
    #[serde(default)]
    dispute_gold: Option<RawDispute>,
    turns: Vec<RawTurn>,
}

#[derive(Deserialize)]
struct RawDispute {
    is_dispute: bool,
    #[serde(default)]
    subcategory: Option<String>,
}

#[derive(Deserialize)]
struct RawTurn {
    speaker: String,
    ordinal: usize,
    #[serde(default)]
    reply_to: Option<usize>,
    #[serde(default)]
    turn_label: Option<String>,
    utterances: Vec<RawUtterance>,
}

#[derive(Deserialize)]
struct RawUtterance {
    id: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    sentences: Vec<RawSentence>,
    #[serde(default)]
    quotes: Vec<RawQuote>,
    #[serde(default)]
    gold: Option<RawGold>,
    #[serde(default)]
    annotator_labels: Vec<RawMark>,
}

#[derive(Deserialize)]
struct RawSentence {
    tokens: Vec<RawToken>,
    #[serde(default)]
    raw: Option<String>,
}

#[derive(Deserialize)]
struct RawToken {
    form: String,
    #[serde(default)]
    lowercase: Option<String>,
    #[serde(default)]
    pos: Option<String>,
    #[serde(default)]
    head: Option<usize>,
    #[serde(default)]
    deprel: Option<String>,
}

#[derive(Deserialize)]
struct RawQuote {
    start: usize,
    end: usize,
    #[serde(default)]
    source_turn: Option<usize>,
}

#[derive(Deserialize)]
struct RawGold {
    label: String,
    provenance: Provenance,
}

#[derive(Deserialize)]
struct RawMark {
    annotator: String,
    mark: String,
    origin: Provenance,
}

/// Parse newline-delimited discussions. Blank lines are skipped.
pub fn parse_discussions(input: &str) -> Result<Vec<Discussion>> {
    let mut out = Vec::new();
    for (i, raw_line) in input.lines().enumerate() {
        let line = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let raw: RawDiscussion =
            serde_json::from_str(raw_line).map_err(|e| Error::MalformedLine {
                line,
                message: e.to_string(),
            })?;
        out.push(validate(raw, line)?);
    }
    Ok(out)
}

fn field_err(line: usize, field: &str, message: String) -> Error {
    Error::InvalidField {
        line,
        field: field.to_string(),
        message,
    }
}

fn validate(raw: RawDiscussion, line: usize) -> Result<Discussion> {
    if raw.id.is_empty() {
        return Err(field_err(line, "id", "must be non-empty".into()));
    }

    let dispute_gold = match raw.dispute_gold {
        None => None,
        Some(d) => {
            let subcategory = match d.subcategory.as_deref() {
                None => None,
                Some(s) => {
                    if !d.is_dispute {
                        return Err(field_err(
                            line,
                            "dispute_gold.subcategory",
                            "only allowed when is_dispute is true".into(),
                        ));
                    }
                    Some(match s {
                        "controversy" => DisputeSubcategory::Controversy,
                        "rfc" => DisputeSubcategory::Rfc,
                        "resolved" => DisputeSubcategory::Resolved,
                        other => {
                            return Err(field_err(
                                line,
                                "dispute_gold.subcategory",
                                format!("unknown subcategory {other:?}"),
                            ))
                        }
                    })
                }
            };
            Some(DisputeGold {
                is_dispute: d.is_dispute,
                subcategory,
            })
        }
    };

    let mut turns = Vec::with_capacity(raw.turns.len());
    let mut prev_ordinal = 0usize;
    for raw_turn in raw.turns {
        if raw_turn.ordinal <= prev_ordinal {
            return Err(field_err(
                line,
                "turns.ordinal",
                format!(
                    "ordinals must be strictly increasing, got {} after {}",
                    raw_turn.ordinal, prev_ordinal
                ),
            ));
        }
        if let Some(r) = raw_turn.reply_to {
            if r >= raw_turn.ordinal {
                return Err(field_err(
                    line,
                    "turns.reply_to",
                    format!(
                        "reply_to ({r}) must reference an earlier ordinal than {}",
                        raw_turn.ordinal
                    ),
                ));
            }
        }
        prev_ordinal = raw_turn.ordinal;

        let mut utterances = Vec::with_capacity(raw_turn.utterances.len());
        for raw_utt in raw_turn.utterances {
            utterances.push(validate_utterance(raw_utt, line)?);
        }
        turns.push(Turn {
            speaker: raw_turn.speaker,
            ordinal: raw_turn.ordinal,
            reply_to: raw_turn.reply_to,
            turn_label: raw_turn.turn_label,
            utterances,
        });
    }

    Ok(Discussion {
        id: raw.id,
        source: raw.source,
        categories: raw.categories,
        revision_count: raw.revision_count,
        dispute_gold,
        turns,
    })
}

fn validate_utterance(raw: RawUtterance, line: usize) -> Result<Utterance> {
    let mut sentences = Vec::with_capacity(raw.sentences.len());
    for raw_sent in raw.sentences {
        let n = raw_sent.tokens.len();
        let mut tokens = Vec::with_capacity(n);
        for t in raw_sent.tokens {
            if let Some(h) = t.head {
                if h > n {
                    return Err(field_err(
                        line,
                        "sentences.tokens.head",
                        format!("head {h} out of range for sentence of {n} tokens"),
                    ));
                }
            }
            tokens.push(Token {
                lowercase: t.lowercase.unwrap_or_else(|| t.form.to_lowercase()),
                form: t.form,
                pos: t.pos,
                head: t.head,
                deprel: t.deprel,
            });
        }
        let raw_text = raw_sent
            .raw
            .unwrap_or_else(|| tokens.iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" "));
        sentences.push(Sentence {
            tokens,
            raw: raw_text,
        });
    }

    let total: usize = sentences.iter().map(|s| s.tokens.len()).sum();
    let mut quotes = Vec::with_capacity(raw.quotes.len());
    for q in raw.quotes {
        if q.start >= q.end || q.end > total {
            return Err(field_err(
                line,
                "quotes",
                format!(
                    "span [{}, {}) invalid for utterance {:?} of {total} tokens",
                    q.start, q.end, raw.id
                ),
            ));
        }
        quotes.push(Quote {
            start: q.start,
            end: q.end,
            source_turn: q.source_turn,
        });
    }

    let gold = match raw.gold {
        None => None,
        Some(g) => {
            let label = SentimentLabel::parse(&g.label).ok_or_else(|| {
                field_err(line, "gold.label", format!("unknown label {:?}", g.label))
            })?;
            Some(GoldLabel {
                label,
                provenance: g.provenance,
            })
        }
    };

    let annotator_labels = raw
        .annotator_labels
        .into_iter()
        .map(|m| AnnotatorMark {
            annotator: m.annotator,
            mark: m.mark,
            origin: m.origin,
        })
        .collect();

    Ok(Utterance {
        id: raw.id,
        text: raw.text,
        sentences,
        quotes,
        gold,
        annotator_labels,
    })
}
