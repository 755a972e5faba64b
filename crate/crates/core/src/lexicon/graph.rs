//! Text-unit extraction, PMI/cosine graph construction, and label
//! propagation.

use super::{SentimentInventory, TextUnit};
use crate::corpus::{Discussion, Sentence};
use crate::{Error, Result};
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

/// Knobs for graph construction.
#[derive(Debug, Clone)]
pub struct GraphConfig {
    /// A unit must appear in at least this many distinct discussions.
    pub min_discussions: usize,
    /// PMI vectors cover the top-k co-occurring units.
    pub top_k: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            min_discussions: 10,
            top_k: 50,
        }
    }
}

fn is_word(form: &str) -> bool {
    form.chars().any(|c| c.is_alphanumeric())
}

fn is_punct_token(form: &str) -> bool {
    !form.is_empty() && form.chars().all(|c| c.is_ascii_punctuation())
}

/// Maximal punctuation runs in a sentence: consecutive all-punctuation
/// tokens are concatenated, runs shorter than 2 characters are dropped, and
/// runs longer than 3 keep their first 3 characters plus a `+` marker.
pub(crate) fn punct_runs(sentence: &Sentence) -> Vec<String> {
    let mut runs = Vec::new();
    let mut current = String::new();
    for tok in &sentence.tokens {
        if is_punct_token(&tok.form) {
            current.push_str(&tok.form);
        } else if !current.is_empty() {
            runs.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs.retain(|r| r.chars().count() >= 2);
    runs.iter()
        .map(|r| {
            if r.chars().count() > 3 {
                let head: String = r.chars().take(3).collect();
                format!("{head}+")
            } else {
                r.clone()
            }
        })
        .collect()
}

/// Distinct text units of one sentence. Unigrams/bigrams run over word
/// tokens (at least one alphanumeric character); punctuation tokens form
/// punctuation-run units instead. Dependency units need head/deprel
/// annotations; sentiment dependency units additionally need one endpoint
/// in the sentiment inventory.
pub fn sentence_units(sentence: &Sentence, sentiment: &SentimentInventory) -> BTreeSet<TextUnit> {
    let mut units = BTreeSet::new();

    let words: Vec<&str> = sentence
        .tokens
        .iter()
        .filter(|t| is_word(&t.form))
        .map(|t| t.lowercase.as_str())
        .collect();
    for w in &words {
        units.insert(TextUnit::unigram(w));
    }
    for pair in words.windows(2) {
        units.insert(TextUnit::bigram(pair[0], pair[1]));
    }

    for run in punct_runs(sentence) {
        units.insert(TextUnit::punct(&run));
    }

    for (i, tok) in sentence.tokens.iter().enumerate() {
        let (Some(head), Some(rel)) = (tok.head, tok.deprel.as_deref()) else {
            continue;
        };
        if head == 0 || head > sentence.tokens.len() {
            continue; // root edge or (already rejected) bad index
        }
        let head_tok = &sentence.tokens[head - 1];
        if head - 1 == i || !is_word(&head_tok.form) || !is_word(&tok.form) {
            continue;
        }
        let h = head_tok.lowercase.as_str();
        let d = tok.lowercase.as_str();
        units.insert(TextUnit::deprel(h, d));
        match sentiment.word_polarity(h) {
            Some(super::Polarity::Pos) => {
                units.insert(TextUnit::sentideprel(rel, "SENTpos", d));
            }
            Some(super::Polarity::Neg) => {
                units.insert(TextUnit::sentideprel(rel, "SENTneg", d));
            }
            None => {}
        }
        match sentiment.word_polarity(d) {
            Some(super::Polarity::Pos) => {
                units.insert(TextUnit::sentideprel(rel, h, "SENTpos"));
            }
            Some(super::Polarity::Neg) => {
                units.insert(TextUnit::sentideprel(rel, h, "SENTneg"));
            }
            None => {}
        }
    }

    units
}

fn discussion_sentences(disc: &Discussion) -> impl Iterator<Item = &Sentence> {
    disc.turns
        .iter()
        .flat_map(|t| t.utterances.iter())
        .flat_map(|u| u.sentences.iter())
}

/// Count, for every text unit, the number of distinct discussions containing
/// it, and drop units under `min_discussions`.
pub fn extract_text_units(
    discussions: &[Discussion],
    sentiment: &SentimentInventory,
    min_discussions: usize,
) -> BTreeMap<TextUnit, usize> {
    let per_discussion: Vec<BTreeSet<TextUnit>> = discussions
        .par_iter()
        .map(|disc| {
            let mut units = BTreeSet::new();
            for sent in discussion_sentences(disc) {
                units.extend(sentence_units(sent, sentiment));
            }
            units
        })
        .collect();

    let mut counts: BTreeMap<TextUnit, usize> = BTreeMap::new();
    for units in per_discussion {
        for unit in units {
            *counts.entry(unit).or_insert(0) += 1;
        }
    }
    counts.retain(|_, c| *c >= min_discussions);
    counts
}

/// Sentence-level occurrence and co-occurrence counts over a retained unit
/// set.
#[derive(Debug, Clone, Default)]
pub struct CooccurrenceCounts {
    pub total_sentences: usize,
    pub unit_sentences: BTreeMap<TextUnit, usize>,
    /// Keyed by (smaller, larger) in canonical payload order.
    pub pair_sentences: BTreeMap<(TextUnit, TextUnit), usize>,
}

pub fn count_cooccurrence(
    discussions: &[Discussion],
    retained: &BTreeSet<TextUnit>,
    sentiment: &SentimentInventory,
) -> CooccurrenceCounts {
    let per_sentence: Vec<Vec<TextUnit>> = discussions
        .par_iter()
        .flat_map_iter(|disc| {
            discussion_sentences(disc).map(|sent| {
                sentence_units(sent, sentiment)
                    .into_iter()
                    .filter(|u| retained.contains(u))
                    .collect::<Vec<_>>()
            })
        })
        .collect();

    let mut counts = CooccurrenceCounts {
        total_sentences: per_sentence.len(),
        ..Default::default()
    };
    for units in per_sentence {
        for u in &units {
            *counts.unit_sentences.entry(u.clone()).or_insert(0) += 1;
        }
        for i in 0..units.len() {
            for j in i + 1..units.len() {
                // BTreeSet iteration already sorted, so (i, j) is canonical.
                *counts
                    .pair_sentences
                    .entry((units[i].clone(), units[j].clone()))
                    .or_insert(0) += 1;
            }
        }
    }
    counts
}

/// PMI representation vector of `unit` over its top-k co-occurring units:
/// entries PMI(t, u) = ln(c(t,u) · S / (c(t) · c(u))), neighbors chosen by
/// co-occurrence count (ties by canonical payload order).
pub fn pmi_vector(
    unit: &TextUnit,
    counts: &CooccurrenceCounts,
    k: usize,
) -> Result<BTreeMap<TextUnit, f64>> {
    let c_t = *counts
        .unit_sentences
        .get(unit)
        .filter(|&&c| c > 0)
        .ok_or_else(|| Error::ZeroSentenceCount(unit.payload.clone()))?;

    // Ordering is payload-only, so an empty payload is minimal.
    let floor = TextUnit {
        kind: super::UnitKind::Unigram,
        payload: String::new(),
    };
    let mut neighbors: Vec<(&TextUnit, usize)> = counts
        .pair_sentences
        .range((unit.clone(), floor)..)
        .take_while(|((a, _), _)| a == unit)
        .map(|((_, b), &c)| (b, c))
        .collect();
    // Pairs with `unit` as the second element.
    neighbors.extend(
        counts
            .pair_sentences
            .iter()
            .filter(|((_, b), _)| b == unit)
            .map(|((a, _), &c)| (a, c)),
    );

    neighbors.sort_by(|(ua, ca), (ub, cb)| cb.cmp(ca).then_with(|| ua.payload.cmp(&ub.payload)));
    neighbors.truncate(k);

    let s = counts.total_sentences as f64;
    let mut vector = BTreeMap::new();
    for (neighbor, c_tu) in neighbors {
        let c_u = counts.unit_sentences[neighbor] as f64;
        let pmi = (c_tu as f64 * s / (c_t as f64 * c_u)).ln();
        vector.insert(neighbor.clone(), pmi);
    }
    Ok(vector)
}

/// Cosine similarity of two sparse vectors; 0 when either has zero norm.
pub fn cosine(a: &BTreeMap<TextUnit, f64>, b: &BTreeMap<TextUnit, f64>) -> f64 {
    let mut dot = 0.0;
    for (key, &va) in a {
        if let Some(&vb) = b.get(key) {
            dot += va * vb;
        }
    }
    let norm = |v: &BTreeMap<TextUnit, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

/// Sparse symmetric graph over text units with clamped seed nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationGraph {
    /// Sorted by canonical payload.
    pub nodes: Vec<TextUnit>,
    /// `adjacency[i]` lists `(j, w_ij)` sorted by `j`; symmetric; no
    /// self-edges; weights in (0, 1].
    pub adjacency: Vec<Vec<(usize, f64)>>,
    pub seeds_pos: BTreeSet<usize>,
    pub seeds_neg: BTreeSet<usize>,
}

impl PropagationGraph {
    /// Canonicalize arbitrary parts into a valid graph: nodes are sorted by
    /// payload and deduplicated, edges remapped and mirrored. Violations of
    /// the graph invariants are errors.
    pub fn from_parts(
        nodes: Vec<TextUnit>,
        edges: Vec<(usize, usize, f64)>,
        seeds_pos: impl IntoIterator<Item = usize>,
        seeds_neg: impl IntoIterator<Item = usize>,
    ) -> Result<PropagationGraph> {
        let bad = |message: String| Error::InvalidValue {
            field: "graph".into(),
            message,
        };
        let n = nodes.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| nodes[a].payload.cmp(&nodes[b].payload));
        let mut remap = vec![0usize; n];
        for (new_idx, &old_idx) in order.iter().enumerate() {
            remap[old_idx] = new_idx;
        }
        let sorted_nodes: Vec<TextUnit> = order.iter().map(|&i| nodes[i].clone()).collect();
        for pair in sorted_nodes.windows(2) {
            if pair[0].payload == pair[1].payload {
                return Err(bad(format!("duplicate node {:?}", pair[0].payload)));
            }
        }

        let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(bad(format!("edge ({a},{b}) out of range for {n} nodes")));
            }
            if a == b {
                return Err(bad(format!("self-edge at node {a}")));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(bad(format!("weight {w} outside [0,1]")));
            }
            let (i, j) = {
                let (i, j) = (remap[a], remap[b]);
                if i < j { (i, j) } else { (j, i) }
            };
            if let Some(&prev) = weights.get(&(i, j)) {
                if prev != w {
                    return Err(bad(format!(
                        "conflicting weights {prev} and {w} for one edge"
                    )));
                }
            }
            weights.insert((i, j), w);
        }

        let mut adjacency = vec![Vec::new(); n];
        for (&(i, j), &w) in &weights {
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(j, _)| j);
        }

        let seeds_pos: BTreeSet<usize> = seeds_pos.into_iter().map(|i| remap[i]).collect();
        let seeds_neg: BTreeSet<usize> = seeds_neg.into_iter().map(|i| remap[i]).collect();
        if let Some(i) = seeds_pos.intersection(&seeds_neg).next() {
            return Err(bad(format!("node {i} is both a positive and negative seed")));
        }

        Ok(PropagationGraph {
            nodes: sorted_nodes,
            adjacency,
            seeds_pos,
            seeds_neg,
        })
    }

    pub fn node_index(&self, payload: &str) -> Option<usize> {
        self.nodes
            .binary_search_by(|u| u.payload.as_str().cmp(payload))
            .ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Build the propagation graph: retained units become nodes; two units that
/// co-occur in at least one sentence are linked iff the cosine similarity of
/// their PMI vectors is positive, with that cosine as the edge weight.
pub fn build_graph(
    discussions: &[Discussion],
    seeds: &super::SeedSets,
    config: &GraphConfig,
) -> Result<PropagationGraph> {
    let sentiment = seeds.inventory();
    let unit_counts = extract_text_units(discussions, &sentiment, config.min_discussions);
    let retained: BTreeSet<TextUnit> = unit_counts.into_keys().collect();
    let counts = count_cooccurrence(discussions, &retained, &sentiment);

    let nodes: Vec<TextUnit> = retained.into_iter().collect();
    let index: BTreeMap<&TextUnit, usize> =
        nodes.iter().enumerate().map(|(i, u)| (u, i)).collect();

    let vectors: Vec<BTreeMap<TextUnit, f64>> = nodes
        .par_iter()
        .map(|unit| {
            if counts.unit_sentences.contains_key(unit) {
                pmi_vector(unit, &counts, config.top_k)
            } else {
                // Retained but absent from every sentence cannot happen by
                // construction; keep the error path anyway.
                Err(Error::ZeroSentenceCount(unit.payload.clone()))
            }
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(&TextUnit, &TextUnit)> = counts.pair_sentences.keys().map(|(a, b)| (a, b)).collect();
    let weighted: Vec<Option<(usize, usize, f64)>> = pairs
        .par_iter()
        .map(|(a, b)| {
            let (i, j) = (index[a], index[b]);
            let w = cosine(&vectors[i], &vectors[j]).min(1.0);
            (w > 0.0).then_some((i, j, w))
        })
        .collect();

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for (i, j, w) in weighted.into_iter().flatten() {
        adjacency[i].push((j, w));
        adjacency[j].push((i, w));
    }
    for list in &mut adjacency {
        list.sort_by_key(|&(j, _)| j);
    }

    // Seed words not retained as nodes are silently absent from the graph.
    let seed_idx = |word: &String| index.get(&TextUnit::unigram(word)).copied();
    let seeds_pos: BTreeSet<usize> = seeds.pos.iter().filter_map(seed_idx).collect();
    let seeds_neg: BTreeSet<usize> = seeds.neg.iter().filter_map(seed_idx).collect();

    Ok(PropagationGraph {
        nodes,
        adjacency,
        seeds_pos,
        seeds_neg,
    })
}

/// Outcome of a propagation run.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationRun {
    /// Final score per node, in [-1, 1]; seeds exactly ±1.
    pub scores: Vec<f64>,
    /// Number of sweeps performed.
    pub sweeps: usize,
    /// max |Δy| after each sweep.
    pub deltas: Vec<f64>,
}

/// Label propagation: seeds start (and stay clamped) at ±1, all other nodes
/// at 0; each sweep replaces every non-seed score with the weighted mean of
/// its neighbors' previous-sweep scores. Stops after `max_sweeps` or when
/// the largest per-node change falls below `tol`. Isolated nodes keep 0.
pub fn propagate(graph: &PropagationGraph, max_sweeps: usize, tol: f64) -> PropagationRun {
    let n = graph.nodes.len();
    let mut scores = vec![0.0f64; n];
    for &i in &graph.seeds_pos {
        scores[i] = 1.0;
    }
    for &i in &graph.seeds_neg {
        scores[i] = -1.0;
    }

    let is_seed: Vec<bool> = (0..n)
        .map(|i| graph.seeds_pos.contains(&i) || graph.seeds_neg.contains(&i))
        .collect();

    let mut deltas = Vec::new();
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        let prev = scores.clone();
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                if is_seed[i] {
                    return prev[i]; // clamped
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for &(j, w) in &graph.adjacency[i] {
                    num += w * prev[j];
                    den += w;
                }
                if den == 0.0 {
                    prev[i] // isolated node keeps its score (0)
                } else {
                    num / den
                }
            })
            .collect();
        let delta = next
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        scores = next;
        sweeps += 1;
        deltas.push(delta);
        if delta < tol {
            break;
        }
    }

    PropagationRun {
        scores,
        sweeps,
        deltas,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_discussions, Token};
    use approx::assert_relative_eq;

    fn sentence(words: &str) -> Sentence {
        let tokens: Vec<Token> = words.split_whitespace().map(Token::new).collect();
        Sentence {
            raw: words.to_string(),
            tokens,
        }
    }

    fn one_sentence_discussion(id: &str, text: &str) -> Discussion {
        let line = format!(
            r#"{{"id":"{id}","source":"wikitalk","turns":[{{"speaker":"s","ordinal":1,"utterances":[{{"id":"{id}-u1","sentences":[{{"tokens":[{tokens}]}}]}}]}}]}}"#,
            tokens = text
                .split_whitespace()
                .map(|w| format!(r#"{{"form":"{w}"}}"#))
                .collect::<Vec<_>>()
                .join(",")
        );
        parse_discussions(&line).unwrap().remove(0)
    }

    fn pmi_toy() -> Vec<Discussion> {
        vec![
            one_sentence_discussion("d1", "good idea"),
            one_sentence_discussion("d2", "bad idea"),
            one_sentence_discussion("d3", "good plan"),
        ]
    }

    #[test]
    fn unigram_bigram_extraction() {
        let s = sentence("Good idea indeed");
        let units = sentence_units(&s, &SentimentInventory::default());
        assert!(units.contains(&TextUnit::unigram("good")));
        assert!(units.contains(&TextUnit::bigram("good", "idea")));
        assert!(units.contains(&TextUnit::bigram("idea", "indeed")));
        assert!(!units.contains(&TextUnit::bigram("good", "indeed")));
    }

    #[test]
    fn punct_runs_concatenate_and_truncate() {
        let runs = punct_runs(&sentence("what ? ! ! ok"));
        assert_eq!(runs, vec!["?!!".to_string()]);
        let runs = punct_runs(&sentence("say . . . . . what"));
        assert_eq!(runs, vec!["...+".to_string()]);
        // Single punctuation token of one character is not a run.
        assert!(punct_runs(&sentence("fine .")).is_empty());
        // A 2-char token is.
        assert_eq!(punct_runs(&sentence("fine ?!")), vec!["?!".to_string()]);
    }

    #[test]
    fn dependency_units_use_general_relation_tag() {
        let mut s = sentence("you agree");
        s.tokens[0].head = Some(2);
        s.tokens[0].deprel = Some("nsubj".into());
        s.tokens[1].head = Some(0);
        s.tokens[1].deprel = Some("root".into());
        let units = sentence_units(&s, &SentimentInventory::default());
        assert!(units.contains(&TextUnit::deprel("agree", "you")));
        assert!(units.iter().all(|u| u.kind != UnitKind::Sentideprel));
    }

    use super::super::UnitKind;

    #[test]
    fn sentiment_dependency_substitutes_polarity() {
        let mut s = sentence("you are wrong");
        s.tokens[0].head = Some(3);
        s.tokens[0].deprel = Some("nsubj".into());
        s.tokens[2].head = Some(0);
        s.tokens[2].deprel = Some("root".into());
        let inv = SentimentInventory {
            pos: Default::default(),
            neg: ["uni:wrong".to_string()].into(),
        };
        let units = sentence_units(&s, &inv);
        assert!(units.contains(&TextUnit::sentideprel("nsubj", "SENTneg", "you")));
    }

    #[test]
    fn discussion_frequency_counts_distinct_discussions() {
        let d1 = one_sentence_discussion("d1", "good idea");
        let mut d1b = one_sentence_discussion("d1b", "good idea");
        // Same bigram twice within one discussion: append the sentence again.
        let extra = d1b.turns[0].utterances[0].sentences[0].clone();
        d1b.turns[0].utterances[0].sentences.push(extra);
        let counts = extract_text_units(&[d1, d1b], &SentimentInventory::default(), 1);
        assert_eq!(counts[&TextUnit::bigram("good", "idea")], 2);
    }

    #[test]
    fn min_discussion_threshold_boundaries() {
        let discs: Vec<Discussion> = (0..9)
            .map(|i| one_sentence_discussion(&format!("d{i}"), "good"))
            .collect();
        let inv = SentimentInventory::default();
        assert!(extract_text_units(&discs, &inv, 10).is_empty());
        let ten: Vec<Discussion> = (0..10)
            .map(|i| one_sentence_discussion(&format!("d{i}"), "good"))
            .collect();
        let counts = extract_text_units(&ten, &inv, 10);
        assert_eq!(counts[&TextUnit::unigram("good")], 10);
    }

    #[test]
    fn pmi_hand_value_on_three_sentence_corpus() {
        let discs = pmi_toy();
        let inv = SentimentInventory::default();
        let retained: BTreeSet<TextUnit> = extract_text_units(&discs, &inv, 1)
            .into_keys()
            .collect();
        let counts = count_cooccurrence(&discs, &retained, &inv);
        assert_eq!(counts.total_sentences, 3);
        let vec_good = pmi_vector(&TextUnit::unigram("good"), &counts, 50).unwrap();
        let pmi = vec_good[&TextUnit::unigram("idea")];
        // c(good,idea)=1, S=3, c(good)=2, c(idea)=2.
        assert!((pmi - (0.75f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn pmi_vector_respects_k_and_handles_few_neighbors() {
        let discs = pmi_toy();
        let inv = SentimentInventory::default();
        let retained: BTreeSet<TextUnit> = extract_text_units(&discs, &inv, 1)
            .into_keys()
            .collect();
        let counts = count_cooccurrence(&discs, &retained, &inv);
        // "plan" co-occurs with good, bi:good_plan only.
        let v = pmi_vector(&TextUnit::unigram("plan"), &counts, 50).unwrap();
        assert_eq!(v.len(), 2);
        let v1 = pmi_vector(&TextUnit::unigram("good"), &counts, 1).unwrap();
        assert_eq!(v1.len(), 1);
    }

    #[test]
    fn pmi_perfect_cooccurrence_single_sentence_is_zero() {
        let discs = vec![one_sentence_discussion("d", "good idea")];
        let inv = SentimentInventory::default();
        let retained: BTreeSet<TextUnit> = extract_text_units(&discs, &inv, 1)
            .into_keys()
            .collect();
        let counts = count_cooccurrence(&discs, &retained, &inv);
        let v = pmi_vector(&TextUnit::unigram("good"), &counts, 50).unwrap();
        assert_eq!(v[&TextUnit::unigram("idea")], 0.0);
    }

    #[test]
    fn pmi_unknown_unit_errors() {
        let counts = CooccurrenceCounts {
            total_sentences: 1,
            ..Default::default()
        };
        assert!(matches!(
            pmi_vector(&TextUnit::unigram("ghost"), &counts, 5),
            Err(Error::ZeroSentenceCount(p)) if p == "uni:ghost"
        ));
    }

    #[test]
    fn cosine_hand_values() {
        let key = |w: &str| TextUnit::unigram(w);
        let a: BTreeMap<_, _> = [(key("x"), 1.0)].into();
        let b: BTreeMap<_, _> = [(key("x"), 1.0), (key("y"), 1.0)].into();
        assert_relative_eq!(cosine(&a, &b), 0.7071067811865475, epsilon = 1e-12);
        assert_relative_eq!(cosine(&b, &b), 1.0, epsilon = 1e-12);
        let c: BTreeMap<_, _> = [(key("z"), 2.0)].into();
        assert_eq!(cosine(&a, &c), 0.0);
    }

    #[test]
    fn graph_edges_need_cooccurrence_and_positive_cosine() {
        let discs = pmi_toy();
        let graph = build_graph(&discs, &Default::default(), &GraphConfig {
            min_discussions: 1,
            top_k: 50,
        })
        .unwrap();
        // Symmetry and range checks.
        for (i, list) in graph.adjacency.iter().enumerate() {
            for &(j, w) in list {
                assert!(w > 0.0 && w <= 1.0);
                assert!(graph.adjacency[j].iter().any(|&(k, wk)| k == i && wk == w));
                assert_ne!(i, j);
            }
        }
        // good and bad never co-occur: no edge even though vectors overlap.
        let gi = graph.node_index("uni:good").unwrap();
        let bi = graph.node_index("uni:bad").unwrap();
        assert!(!graph.adjacency[gi].iter().any(|&(j, _)| j == bi));
    }

    #[test]
    fn graph_nodes_are_sorted_and_stable_under_input_order() {
        let mut discs = pmi_toy();
        let graph1 = build_graph(&discs, &Default::default(), &GraphConfig {
            min_discussions: 1,
            top_k: 50,
        })
        .unwrap();
        discs.reverse();
        let graph2 = build_graph(&discs, &Default::default(), &GraphConfig {
            min_discussions: 1,
            top_k: 50,
        })
        .unwrap();
        assert_eq!(graph1, graph2);
        let payloads: Vec<&str> = graph1.nodes.iter().map(|u| u.payload.as_str()).collect();
        let mut sorted = payloads.clone();
        sorted.sort();
        assert_eq!(payloads, sorted);
    }

    #[test]
    fn from_parts_canonicalizes_and_validates() {
        let nodes = vec![TextUnit::unigram("b"), TextUnit::unigram("a")];
        let g = PropagationGraph::from_parts(nodes.clone(), vec![(0, 1, 0.5)], [0], []).unwrap();
        assert_eq!(g.nodes[0].payload, "uni:a");
        // Seed followed node "b" through the reordering.
        assert!(g.seeds_pos.contains(&1));

        assert!(PropagationGraph::from_parts(nodes.clone(), vec![(0, 0, 0.5)], [], []).is_err());
        assert!(PropagationGraph::from_parts(nodes.clone(), vec![(0, 1, 1.5)], [], []).is_err());
        assert!(PropagationGraph::from_parts(nodes.clone(), vec![(0, 5, 0.5)], [], []).is_err());
        assert!(PropagationGraph::from_parts(nodes, vec![(0, 1, 0.5)], [0], [0]).is_err());
    }

    fn path_graph(w_ab: f64, w_bc: f64) -> PropagationGraph {
        PropagationGraph::from_parts(
            vec![
                TextUnit::unigram("a"),
                TextUnit::unigram("b"),
                TextUnit::unigram("c"),
            ],
            vec![(0, 1, w_ab), (1, 2, w_bc)],
            [0],
            [2],
        )
        .unwrap()
    }

    #[test]
    fn propagation_symmetric_path_gives_zero() {
        let g = path_graph(1.0, 1.0);
        let run = propagate(&g, 100, 1e-9);
        let b = g.node_index("uni:b").unwrap();
        assert_eq!(run.scores[b], 0.0);
        assert_eq!(run.scores[g.node_index("uni:a").unwrap()], 1.0);
        assert_eq!(run.scores[g.node_index("uni:c").unwrap()], -1.0);
    }

    #[test]
    fn propagation_weighted_path_fixed_point() {
        let g = path_graph(0.8, 0.2);
        let run = propagate(&g, 100, 0.0);
        let b = g.node_index("uni:b").unwrap();
        // (0.8·1 + 0.2·(−1)) / (0.8 + 0.2) = 0.6, reached after one sweep
        // and stable: bitwise equal to the hand-computed weighted average.
        let (pos_seed, neg_seed) = (1.0, -1.0);
        let expected = (0.8 * pos_seed + 0.2 * neg_seed) / (0.8 + 0.2);
        assert_eq!(run.scores[b], expected);
        assert!((run.scores[b] - 0.6).abs() < 1e-15);
        let one = propagate(&g, 1, 0.0);
        assert_eq!(one.scores[b], expected);
    }

    #[test]
    fn isolated_node_stays_zero() {
        let g = PropagationGraph::from_parts(
            vec![
                TextUnit::unigram("a"),
                TextUnit::unigram("b"),
                TextUnit::unigram("lonely"),
            ],
            vec![(0, 1, 1.0)],
            [0],
            [],
        )
        .unwrap();
        let run = propagate(&g, 50, 0.0);
        assert_eq!(run.scores[g.node_index("uni:lonely").unwrap()], 0.0);
        assert_eq!(run.scores[g.node_index("uni:b").unwrap()], 1.0);
    }

    #[test]
    fn propagation_stops_on_tolerance() {
        let g = path_graph(1.0, 1.0);
        let run = propagate(&g, 1000, 1e-6);
        assert!(run.sweeps < 1000);
        assert!(*run.deltas.last().unwrap() < 1e-6);
    }
}
