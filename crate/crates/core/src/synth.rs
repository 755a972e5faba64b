//! Synthetic corpora: schema-conformant JSONL generators whose gold labels
//! are a deterministic function of planted sentiment words. They back the
//! end-to-end tests (a tagger corpus, a dispute corpus with all-negative vs
//! neutral sentiment flows) and the bundled toy data.

use crate::corpus::{self, Discussion, SentimentLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Planted word per non-neutral label, strongest first: an utterance's
/// label is decided by the most intense planted word it contains (intense
/// utterances may also carry the plain same-polarity word), and utterances
/// without any planted word are neutral.
pub const PLANTED: [(&str, SentimentLabel); 4] = [
    ("vbad", SentimentLabel::VeryNegative),
    ("vgood", SentimentLabel::VeryPositive),
    ("bad", SentimentLabel::Negative),
    ("good", SentimentLabel::Positive),
];

const FILLERS: [&str; 14] = [
    "the", "this", "point", "section", "page", "edit", "note", "topic", "item", "text", "source",
    "claim", "part", "detail",
];

/// Context words that lean negative / positive. They carry no gold label of
/// their own (only plants decide labels) but polarize the co-occurrence
/// statistics so that graph propagation can recover plant polarity.
const NEG_CONTEXT: [&str; 6] = ["revert", "mess", "spam", "delete", "flaw", "error"];
const POS_CONTEXT: [&str; 6] = ["merge", "tidy", "polish", "improve", "thanks", "cheers"];

const SPEAKERS: [&str; 4] = ["alice", "bob", "carol", "dave"];

/// Two-column seed file matching the planted vocabulary.
pub const SEED_TSV: &str = "good\t+\nbad\t-\n";

/// The label a gold-annotated utterance must carry, read off its planted
/// words; `None` when the utterance text is neutral.
pub fn planted_label(words: &[&str]) -> SentimentLabel {
    for &(plant, label) in &PLANTED {
        if words.contains(&plant) {
            return label;
        }
    }
    SentimentLabel::Neutral
}

fn token_json(form: &str, idx: usize) -> serde_json::Value {
    // A fixed trivial parse: first token is the root, everything else
    // attaches to it. Planted words are adjectives, fillers alternate.
    let pos = if PLANTED.iter().any(|&(p, _)| p == form) {
        "ADJ"
    } else if idx.is_multiple_of(2) {
        "NOUN"
    } else {
        "VERB"
    };
    let (head, deprel) = if idx == 0 { (0, "root") } else { (1, "dep") };
    json!({"form": form, "pos": pos, "head": head, "deprel": deprel})
}

struct UtteranceDraft {
    words: Vec<String>,
    marks: Vec<serde_json::Value>,
    quote: Option<(usize, usize, usize)>, // start, end, source turn ordinal
}

fn draft_utterance(
    rng: &mut ChaCha8Rng,
    label: SentimentLabel,
    span_marked: bool,
    pair_plants: bool,
) -> UtteranceDraft {
    let n_fillers = rng.gen_range(3..=7);
    let pool: &[&str] = match label.value() {
        v if v < 0 => &NEG_CONTEXT,
        v if v > 0 => &POS_CONTEXT,
        _ => &[],
    };
    let mut words: Vec<String> = (0..n_fillers)
        .map(|_| {
            // Non-neutral utterances mix neutral fillers with same-polarity
            // context words; neutral utterances use fillers only.
            if !pool.is_empty() && rng.gen_bool(0.5) {
                pool[rng.gen_range(0..pool.len())].to_string()
            } else {
                FILLERS[rng.gen_range(0..FILLERS.len())].to_string()
            }
        })
        .collect();
    if label != SentimentLabel::Neutral {
        let plant = PLANTED
            .iter()
            .find(|&&(_, l)| l == label)
            .expect("planted word exists for every non-neutral label")
            .0;
        let at = rng.gen_range(0..=words.len());
        words.insert(at, plant.to_string());
        // Intense utterances occasionally also carry the plain
        // same-polarity word, giving the propagation graph good–vgood and
        // bad–vbad edges without blurring the word → label mapping.
        if pair_plants {
            let partner = match label {
                SentimentLabel::VeryPositive => Some("good"),
                SentimentLabel::VeryNegative => Some("bad"),
                _ => None,
            };
            if let Some(p) = partner {
                let at = rng.gen_range(0..=words.len());
                words.insert(at, p.to_string());
            }
        }
    }

    let mut marks = Vec::new();
    if span_marked {
        let (mark, annotators) = match label {
            SentimentLabel::VeryPositive => ("agreement", 2),
            SentimentLabel::Positive => ("agreement", 1),
            SentimentLabel::Negative => ("disagreement", 1),
            SentimentLabel::VeryNegative => ("disagreement", 2),
            SentimentLabel::Neutral => ("", 0),
        };
        for a in 0..annotators {
            marks.push(json!({
                "annotator": format!("ann{}", a + 1),
                "mark": mark,
                "origin": "span",
            }));
        }
    }

    UtteranceDraft {
        words,
        marks,
        quote: None,
    }
}

fn utterance_json(disc_id: &str, ti: usize, ui: usize, draft: &UtteranceDraft) -> serde_json::Value {
    let tokens: Vec<serde_json::Value> = draft
        .words
        .iter()
        .enumerate()
        .map(|(i, w)| token_json(w, i))
        .collect();
    let mut utt = json!({
        "id": format!("{disc_id}-t{ti}-u{ui}"),
        "text": draft.words.join(" "),
        "sentences": [{"tokens": tokens}],
        "annotator_labels": draft.marks,
    });
    if let Some((start, end, source_turn)) = draft.quote {
        utt["quotes"] = json!([{"start": start, "end": end, "source_turn": source_turn}]);
    }
    utt
}

/// Mixed-label tagger corpus: gold labels deterministically follow the
/// planted words; some P/N labels arrive through turn-level annotation
/// (single-utterance turns) to exercise the soft-F1 provenance path.
pub fn tagger_corpus_jsonl(discussions: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::with_capacity(discussions);
    for d in 0..discussions {
        let id = format!("synth-tag-{d:03}");
        let n_turns = rng.gen_range(2..=4);
        let mut turns = Vec::new();
        let mut prev_words: Option<Vec<String>> = None;
        for ti in 0..n_turns {
            let speaker = SPEAKERS[rng.gen_range(0..SPEAKERS.len())];
            let turn_labeled = rng.gen_bool(0.15);
            let mut turn = json!({
                "speaker": speaker,
                "ordinal": ti + 1,
                "utterances": [],
            });
            if ti > 0 && rng.gen_bool(0.5) {
                turn["reply_to"] = json!(ti);
            }
            let mut utts = Vec::new();
            if turn_labeled {
                // One utterance, annotated only at turn level.
                let label = if rng.gen_bool(0.5) {
                    SentimentLabel::Positive
                } else {
                    SentimentLabel::Negative
                };
                let pair = rng.gen_bool(0.3);
                let draft = draft_utterance(&mut rng, label, false, pair);
                turn["turn_label"] = json!(if label == SentimentLabel::Positive {
                    "agreement"
                } else {
                    "disagreement"
                });
                utts.push(utterance_json(&id, ti, 0, &draft));
                prev_words = Some(draft.words);
            } else {
                let n_utts = rng.gen_range(1..=3);
                for ui in 0..n_utts {
                    let label = match rng.gen_range(0..10) {
                        0 => SentimentLabel::VeryNegative,
                        1 | 2 => SentimentLabel::Negative,
                        3 | 4 => SentimentLabel::Positive,
                        5 => SentimentLabel::VeryPositive,
                        _ => SentimentLabel::Neutral,
                    };
                    let pair = rng.gen_bool(0.3);
                    let mut draft = draft_utterance(&mut rng, label, true, pair);
                    // Occasionally quote the previous turn verbatim —
                    // filler words only, so quoting never smuggles a
                    // sentiment plant into a neutral utterance.
                    if ui == 0 && ti > 0 && rng.gen_bool(0.3) {
                        if let Some(prev) = &prev_words {
                            let quoted: Vec<String> = prev
                                .iter()
                                .filter(|w| {
                                    !PLANTED.iter().any(|&(p, _)| p == w.as_str())
                                })
                                .take(2)
                                .cloned()
                                .collect();
                            if quoted.len() == 2 {
                                for (i, q) in quoted.iter().enumerate() {
                                    draft.words.insert(i, q.clone());
                                }
                                draft.quote = Some((0, 2, ti));
                            }
                        }
                    }
                    utts.push(utterance_json(&id, ti, ui, &draft));
                    if ui == n_utts - 1 {
                        prev_words = Some(draft.words);
                    }
                }
            }
            turn["utterances"] = json!(utts);
            turns.push(turn);
        }
        let disc = json!({
            "id": id,
            "source": "aawd",
            "categories": ["synthetic discussion"],
            "revision_count": rng.gen_range(0..20),
            "turns": turns,
        });
        lines.push(serde_json::to_string(&disc).expect("synthetic JSON serializes"));
    }
    lines.join("\n") + "\n"
}

/// Dispute corpus: alternating dispute / non-dispute discussions. Disputes
/// are saturated with negative planted words (all-negative sentiment flow);
/// non-disputes stay neutral-to-positive.
pub fn dispute_corpus_jsonl(discussions: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::with_capacity(discussions);
    for d in 0..discussions {
        let dispute = d % 2 == 0;
        let id = format!("synth-disp-{d:03}");
        let n_turns = rng.gen_range(3..=6);
        let mut turns = Vec::new();
        for ti in 0..n_turns {
            let speaker = SPEAKERS[ti % 2 + (d % 2) * 2 % SPEAKERS.len()];
            let n_utts = rng.gen_range(1..=3);
            let mut utts = Vec::new();
            for ui in 0..n_utts {
                let label = if dispute {
                    match rng.gen_range(0..10) {
                        0..=4 => SentimentLabel::Negative,
                        5..=7 => SentimentLabel::VeryNegative,
                        _ => SentimentLabel::Neutral,
                    }
                } else {
                    match rng.gen_range(0..10) {
                        0..=2 => SentimentLabel::Positive,
                        3 => SentimentLabel::VeryPositive,
                        _ => SentimentLabel::Neutral,
                    }
                };
                let pair = rng.gen_bool(0.3);
                let draft = draft_utterance(&mut rng, label, true, pair);
                utts.push(utterance_json(&id, ti, ui, &draft));
            }
            turns.push(json!({
                "speaker": speaker,
                "ordinal": ti + 1,
                "utterances": utts,
            }));
        }
        let mut disc = json!({
            "id": id,
            "source": "wikitalk",
            "categories": [if dispute { "contested topic" } else { "calm topic" }],
            "revision_count": if dispute { rng.gen_range(20..60) } else { rng.gen_range(0..15) },
            "dispute_gold": {"is_dispute": dispute},
            "turns": turns,
        });
        if dispute {
            let sub = ["controversy", "rfc", "resolved"][rng.gen_range(0..3)];
            disc["dispute_gold"]["subcategory"] = json!(sub);
        }
        lines.push(serde_json::to_string(&disc).expect("synthetic JSON serializes"));
    }
    lines.join("\n") + "\n"
}

/// Three single-sentence discussions with hand-checkable PMI: each of
/// good/idea/plan appears in 2 of 3 sentences, each pair co-occurs once, so
/// every unigram pair has PMI = ln(3·1/(2·2)) = ln 0.75.
pub fn toy3_jsonl() -> String {
    let texts = ["good idea", "good plan", "idea plan"];
    let mut lines = Vec::new();
    for (i, text) in texts.iter().enumerate() {
        let tokens: Vec<serde_json::Value> = text
            .split_whitespace()
            .map(|w| json!({"form": w}))
            .collect();
        let disc = json!({
            "id": format!("toy3-{}", i + 1),
            "source": "wikitalk",
            "turns": [{
                "speaker": SPEAKERS[i % SPEAKERS.len()],
                "ordinal": 1,
                "utterances": [{
                    "id": format!("toy3-{}-u0", i + 1),
                    "text": text,
                    "sentences": [{"tokens": tokens}],
                }],
            }],
        });
        lines.push(serde_json::to_string(&disc).expect("toy JSON serializes"));
    }
    lines.join("\n") + "\n"
}

/// Parse synthetic JSONL and induce gold labels from the annotator marks.
pub fn load(jsonl: &str) -> crate::Result<Vec<Discussion>> {
    let mut discussions = corpus::parse_discussions(jsonl)?;
    corpus::induce_all_labels(&mut discussions)?;
    Ok(discussions)
}
