//! Per-utterance feature extraction: five namespaced families (`lex:`,
//! `syn:`, `disc:`, `conv:`, `sent:`) plus the standardize-and-bin
//! post-processing for numeric features.
//!
//! Extraction is a pure function of the utterance, its conversational
//! context, the configuration, and training statistics (IDF and
//! standardization moments) fitted once on the training split.

use crate::corpus::{Discussion, Turn, Utterance};
use crate::lexicon::{Polarity, SentimentInventory};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Sparse feature vector; zero values are never stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub BTreeMap<String, f64>);

impl FeatureVector {
    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        if value != 0.0 {
            self.0.insert(name.into(), value);
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or(0.0)
    }

    pub fn merge(&mut self, other: FeatureVector) {
        self.0.extend(other.0);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(String, f64)> for FeatureVector {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        let mut fv = FeatureVector::default();
        for (k, v) in iter {
            fv.set(k, v);
        }
        fv
    }
}

/// Which of the five families to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySet {
    pub lex: bool,
    pub syn: bool,
    pub disc: bool,
    pub con: bool,
    pub sent: bool,
}

impl Default for FamilySet {
    fn default() -> Self {
        FamilySet {
            lex: true,
            syn: true,
            disc: true,
            con: true,
            sent: true,
        }
    }
}

impl FamilySet {
    pub const NONE: FamilySet = FamilySet {
        lex: false,
        syn: false,
        disc: false,
        con: false,
        sent: false,
    };

    pub fn only(name: &str) -> Option<FamilySet> {
        let mut set = FamilySet::NONE;
        set.enable(name).ok()?;
        Some(set)
    }

    pub fn enable(&mut self, name: &str) -> crate::Result<()> {
        match name {
            "lex" => self.lex = true,
            "syn" => self.syn = true,
            "disc" => self.disc = true,
            "con" => self.con = true,
            "sent" => self.sent = true,
            other => {
                return Err(crate::Error::Config(format!(
                    "unknown feature family {other:?} (expected lex, syn, disc, con, sent)"
                )))
            }
        }
        Ok(())
    }

    /// Parse a comma-separated family list like "lex,syn,disc".
    pub fn parse(list: &str) -> crate::Result<FamilySet> {
        let mut set = FamilySet::NONE;
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            set.enable(name)?;
        }
        Ok(set)
    }

    /// The cumulative ablation ladder: Lex, +Syn, +Disc, +Con, +Sent.
    pub fn cumulative() -> Vec<(String, FamilySet)> {
        let names = ["lex", "syn", "disc", "con", "sent"];
        let labels = ["Lex", "+ Syn", "+ Disc", "+ Con", "+ Sent"];
        let mut out = Vec::new();
        let mut set = FamilySet::NONE;
        for (name, label) in names.iter().zip(labels) {
            set.enable(name).expect("static family names are valid");
            out.push((label.to_string(), set));
        }
        out
    }
}

impl std::fmt::Display for FamilySet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut names = Vec::new();
        if self.lex {
            names.push("lex");
        }
        if self.syn {
            names.push("syn");
        }
        if self.disc {
            names.push("disc");
        }
        if self.con {
            names.push("con");
        }
        if self.sent {
            names.push("sent");
        }
        f.write_str(&names.join(","))
    }
}

/// Hedging phrases (uncertainty cues), lowercase; multiword entries match
/// consecutive tokens.
pub const DEFAULT_HEDGES: &[&str] = &[
    "may",
    "might",
    "could",
    "should",
    "would",
    "suggest",
    "suggests",
    "suggested",
    "suggestion",
    "seem",
    "seems",
    "seemed",
    "appear",
    "appears",
    "appeared",
    "possible",
    "possibly",
    "probable",
    "probably",
    "perhaps",
    "maybe",
    "likely",
    "unlikely",
    "unclear",
    "indicate",
    "indicates",
    "indicated",
    "assume",
    "assumes",
    "assumed",
    "believe",
    "believes",
    "believed",
    "think",
    "thinks",
    "guess",
    "speculate",
    "presumably",
    "apparently",
    "somewhat",
    "sort of",
    "kind of",
];

pub const DEFAULT_NEGATORS: &[&str] = &[
    "not", "n't", "no", "never", "none", "nobody", "nothing", "neither", "nor", "cannot",
];

/// Explicit discourse connectives (single tokens).
pub const DEFAULT_CONNECTIVES: &[&str] = &[
    "but",
    "however",
    "although",
    "though",
    "because",
    "so",
    "and",
    "or",
    "nor",
    "yet",
    "while",
    "since",
    "nevertheless",
    "nonetheless",
    "instead",
    "otherwise",
    "moreover",
    "furthermore",
    "meanwhile",
    "thus",
    "therefore",
    "still",
    "also",
    "then",
    "additionally",
    "alternatively",
    "consequently",
    "finally",
    "further",
    "hence",
    "indeed",
    "likewise",
    "rather",
    "similarly",
    "specifically",
    "ultimately",
    "unless",
    "until",
    "when",
    "whereas",
];

/// Lists and inventories driving extraction. Fixed once training starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub families: FamilySet,
    pub hedges: Vec<String>,
    pub negators: BTreeSet<String>,
    pub connectives: BTreeSet<String>,
    pub sentiment: SentimentInventory,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            families: FamilySet::default(),
            hedges: DEFAULT_HEDGES.iter().map(|s| s.to_string()).collect(),
            negators: DEFAULT_NEGATORS.iter().map(|s| s.to_string()).collect(),
            connectives: DEFAULT_CONNECTIVES.iter().map(|s| s.to_string()).collect(),
            sentiment: SentimentInventory::default(),
        }
    }
}

/// Names of the raw numeric (to-be-binned) features this module produces.
pub const NUMERIC_FEATURES: &[&str] = &[
    "lex:num_upper",
    "lex:num_words",
    "disc:num_negators",
    "conv:quote_overlap",
    "conv:tfidf_sim",
];

fn is_word(form: &str) -> bool {
    form.chars().any(|c| c.is_alphanumeric())
}

/// Unigram/bigram presence plus the all-uppercase-word and token counts.
/// Single-character tokens ("I", "A") never count as all-uppercase.
pub fn lexical_features(utt: &Utterance) -> FeatureVector {
    let mut fv = FeatureVector::default();
    let mut num_upper = 0usize;
    let mut num_words = 0usize;
    for sent in &utt.sentences {
        let words: Vec<&str> = sent
            .tokens
            .iter()
            .filter(|t| is_word(&t.form))
            .map(|t| t.lowercase.as_str())
            .collect();
        for w in &words {
            fv.set(format!("lex:uni:{w}"), 1.0);
        }
        for pair in words.windows(2) {
            fv.set(format!("lex:bi:{}_{}", pair[0], pair[1]), 1.0);
        }
        for tok in &sent.tokens {
            num_words += 1;
            if tok.form.chars().count() >= 2 && tok.form.chars().all(char::is_uppercase) {
                num_upper += 1;
            }
        }
    }
    fv.set("lex:num_upper", num_upper as f64);
    fv.set("lex:num_words", num_words as f64);
    fv
}

/// Dependency features in original and POS-generalized forms, plus
/// word/POS unigrams. Utterances without annotations yield nothing.
pub fn syntactic_features(utt: &Utterance) -> FeatureVector {
    let mut fv = FeatureVector::default();
    for sent in &utt.sentences {
        for tok in &sent.tokens {
            if let Some(pos) = &tok.pos {
                fv.set(format!("syn:{}/{}", tok.lowercase, pos), 1.0);
            }
            let (Some(head), Some(rel)) = (tok.head, tok.deprel.as_deref()) else {
                continue;
            };
            if head == 0 || head > sent.tokens.len() {
                continue;
            }
            let head_tok = &sent.tokens[head - 1];
            let (h, d) = (head_tok.lowercase.as_str(), tok.lowercase.as_str());
            fv.set(format!("syn:{rel}({h},{d})"), 1.0);
            if let Some(hp) = &head_tok.pos {
                fv.set(format!("syn:{rel}({hp},{d})"), 1.0);
            }
            if let Some(dp) = &tok.pos {
                fv.set(format!("syn:{rel}({h},{dp})"), 1.0);
            }
        }
    }
    fv
}

pub(crate) fn match_phrase(tokens: &[&str], phrase: &str) -> bool {
    let parts: Vec<&str> = phrase.split_whitespace().collect();
    if parts.is_empty() || parts.len() > tokens.len() {
        return false;
    }
    tokens.windows(parts.len()).any(|w| w == parts.as_slice())
}

/// Sentence-initial n-grams, repeated-punctuation runs, hedge phrases, and
/// the negator count.
pub fn discourse_features(utt: &Utterance, config: &FeatureConfig) -> FeatureVector {
    let mut fv = FeatureVector::default();
    let mut num_negators = 0usize;
    for sent in &utt.sentences {
        let toks: Vec<&str> = sent.tokens.iter().map(|t| t.lowercase.as_str()).collect();
        for n in 1..=3usize {
            if toks.len() >= n {
                fv.set(format!("disc:init{n}:{}", toks[..n].join("_")), 1.0);
            }
        }
        for run in crate::lexicon::punct_runs(sent) {
            fv.set(format!("disc:punct:{run}"), 1.0);
        }
        for hedge in &config.hedges {
            if match_phrase(&toks, hedge) {
                fv.set(
                    format!("disc:hedge:{}", hedge.replace(' ', "_")),
                    1.0,
                );
            }
        }
        num_negators += toks
            .iter()
            .filter(|t| config.negators.contains(**t))
            .count();
    }
    fv.set("disc:num_negators", num_negators as f64);
    fv
}

/// Smooth-IDF statistics fitted on training documents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdfStats {
    pub doc_count: usize,
    pub df: BTreeMap<String, usize>,
}

impl IdfStats {
    pub fn fit<I>(docs: I) -> IdfStats
    where
        I: IntoIterator<Item = BTreeSet<String>>,
    {
        let mut stats = IdfStats::default();
        for doc in docs {
            stats.doc_count += 1;
            for term in doc {
                *stats.df.entry(term).or_insert(0) += 1;
            }
        }
        stats
    }

    /// Smooth IDF: ln((1 + N) / (1 + df)) + 1; unseen terms use df = 0.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0);
        ((1.0 + self.doc_count as f64) / (1.0 + df as f64)).ln() + 1.0
    }

    fn weigh(&self, counts: &BTreeMap<String, usize>) -> BTreeMap<String, f64> {
        counts
            .iter()
            .map(|(t, &c)| (t.clone(), c as f64 * self.idf(t)))
            .collect()
    }

    /// Cosine similarity of two TF-IDF-weighted token multisets, in [0, 1].
    pub fn similarity(
        &self,
        a: &BTreeMap<String, usize>,
        b: &BTreeMap<String, usize>,
    ) -> f64 {
        let (wa, wb) = (self.weigh(a), self.weigh(b));
        let mut dot = 0.0;
        for (t, va) in &wa {
            if let Some(vb) = wb.get(t) {
                dot += va * vb;
            }
        }
        let norm = |w: &BTreeMap<String, f64>| w.values().map(|x| x * x).sum::<f64>().sqrt();
        let denom = norm(&wa) * norm(&wb);
        if denom == 0.0 {
            0.0
        } else {
            (dot / denom).min(1.0)
        }
    }
}

fn word_counts<'a>(words: impl Iterator<Item = &'a str>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for w in words {
        *counts.entry(w.to_string()).or_insert(0) += 1;
    }
    counts
}

fn turn_word_counts(turn: &Turn) -> BTreeMap<String, usize> {
    word_counts(
        turn.utterances
            .iter()
            .flat_map(|u| u.tokens())
            .filter(|t| is_word(&t.form))
            .map(|t| t.lowercase.as_str()),
    )
}

/// Quote overlap with the target turn and TF-IDF similarity of the
/// unquoted remainder; both 0 without a target.
pub fn conversation_features(
    utt: &Utterance,
    target: Option<&Turn>,
    idf: &IdfStats,
) -> FeatureVector {
    let mut fv = FeatureVector::default();
    let Some(target) = target else {
        fv.set("conv:quote_overlap", 0.0);
        fv.set("conv:tfidf_sim", 0.0);
        return fv;
    };

    let target_words: BTreeSet<&str> = target
        .utterances
        .iter()
        .flat_map(|u| u.tokens())
        .filter(|t| is_word(&t.form))
        .map(|t| t.lowercase.as_str())
        .collect();

    let mut quoted_total = 0usize;
    let mut quoted_matched = 0usize;
    let mut unquoted = Vec::new();
    for (idx, tok) in utt.tokens().enumerate() {
        if utt.in_quote(idx) {
            if is_word(&tok.form) {
                quoted_total += 1;
                if target_words.contains(tok.lowercase.as_str()) {
                    quoted_matched += 1;
                }
            }
        } else if is_word(&tok.form) {
            unquoted.push(tok.lowercase.as_str());
        }
    }
    let overlap = if quoted_total == 0 {
        0.0
    } else {
        quoted_matched as f64 / quoted_total as f64
    };
    fv.set("conv:quote_overlap", overlap);

    let sim = idf.similarity(&word_counts(unquoted.into_iter()), &turn_word_counts(target));
    fv.set("conv:tfidf_sim", sim);
    fv
}

/// Sentiment-word presence, connective+sentiment conjunctions, and
/// polarity-substituted dependency relations, all against the lexicon's
/// strong members.
pub fn sentiment_features(utt: &Utterance, config: &FeatureConfig) -> FeatureVector {
    let inv = &config.sentiment;
    let mut fv = FeatureVector::default();
    for sent in &utt.sentences {
        let toks: Vec<&str> = sent.tokens.iter().map(|t| t.lowercase.as_str()).collect();
        for (i, w) in toks.iter().enumerate() {
            let Some(polarity) = inv.word_polarity(w) else {
                continue;
            };
            let pol = match polarity {
                Polarity::Pos => "pos",
                Polarity::Neg => "neg",
            };
            fv.set(format!("sent:word:{w}:{pol}"), 1.0);
            // Connective immediately before or after the sentiment word.
            for j in [i.checked_sub(1), i.checked_add(1)] {
                let Some(j) = j.filter(|&j| j < toks.len()) else {
                    continue;
                };
                if config.connectives.contains(toks[j]) {
                    fv.set(format!("sent:conn:{}+{pol}", toks[j]), 1.0);
                }
            }
        }

        for tok in &sent.tokens {
            let (Some(head), Some(rel)) = (tok.head, tok.deprel.as_deref()) else {
                continue;
            };
            if head == 0 || head > sent.tokens.len() {
                continue;
            }
            let head_tok = &sent.tokens[head - 1];
            let (h, d) = (head_tok.lowercase.as_str(), tok.lowercase.as_str());
            let tag = |p: Polarity| match p {
                Polarity::Pos => "SENTpos",
                Polarity::Neg => "SENTneg",
            };
            if let Some(p) = inv.word_polarity(h) {
                fv.set(format!("sent:{rel}({},{d})", tag(p)), 1.0);
            }
            if let Some(p) = inv.word_polarity(d) {
                fv.set(format!("sent:{rel}({h},{})", tag(p)), 1.0);
            }
        }
    }
    fv
}

/// Per-feature mean and population standard deviation, fitted on training
/// vectors with absent values counted as 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StandardizeStats {
    pub moments: BTreeMap<String, (f64, f64)>,
}

impl StandardizeStats {
    pub fn fit<'a, I>(names: &[&str], vectors: I) -> StandardizeStats
    where
        I: IntoIterator<Item = &'a FeatureVector> + Clone,
    {
        let mut moments = BTreeMap::new();
        for &name in names {
            let mut n = 0usize;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for fv in vectors.clone() {
                let x = fv.get(name);
                n += 1;
                sum += x;
                sumsq += x * x;
            }
            if n == 0 {
                moments.insert(name.to_string(), (0.0, 0.0));
                continue;
            }
            let mean = sum / n as f64;
            let var = (sumsq / n as f64 - mean * mean).max(0.0);
            moments.insert(name.to_string(), (mean, var.sqrt()));
        }
        StandardizeStats { moments }
    }

    /// Bin index 0–4 from the z-score: boundaries at −1.5, −0.5, 0.5, 1.5;
    /// zero deviation pins everything to the middle bin.
    pub fn bin(&self, name: &str, x: f64) -> Option<usize> {
        let &(mean, sd) = self.moments.get(name)?;
        if sd == 0.0 {
            return Some(2);
        }
        let z = (x - mean) / sd;
        Some([-1.5, -0.5, 0.5, 1.5].iter().filter(|&&cut| cut <= z).count())
    }

    /// Replace every registered numeric feature with its `name#bin_k`
    /// indicator; exactly one bin feature per registered name, with absent
    /// numerics standardized from 0.
    pub fn apply(&self, fv: FeatureVector) -> FeatureVector {
        let mut out = FeatureVector::default();
        let mut raw: BTreeMap<&str, f64> = BTreeMap::new();
        for (name, value) in &fv.0 {
            if self.moments.contains_key(name) {
                raw.insert(name, *value);
            } else {
                out.set(name.clone(), *value);
            }
        }
        for name in self.moments.keys() {
            let x = raw.get(name.as_str()).copied().unwrap_or(0.0);
            let bin = self
                .bin(name, x)
                .expect("moments key lookup cannot fail here");
            out.set(format!("{name}#bin_{bin}"), 1.0);
        }
        out
    }
}

/// The turn an utterance responds to: the turn named by `reply_to`, else
/// the immediately preceding turn; discussion-initial turns (and dangling
/// `reply_to` references) have no target.
pub fn target_turn(disc: &Discussion, turn_idx: usize) -> Option<&Turn> {
    let turn = &disc.turns[turn_idx];
    if let Some(ord) = turn.reply_to {
        if let Some(t) = disc.turns.iter().find(|t| t.ordinal == ord) {
            return Some(t);
        }
    }
    turn_idx.checked_sub(1).map(|i| &disc.turns[i])
}

/// Fitted extractor: configuration plus training statistics. When
/// `stats` is present the numeric features come out binned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    pub config: FeatureConfig,
    pub idf: IdfStats,
    pub stats: Option<StandardizeStats>,
}

impl FeatureExtractor {
    /// Raw (unbinned) vector for one utterance in context.
    pub fn extract_raw(&self, disc: &Discussion, turn_idx: usize, utt_idx: usize) -> FeatureVector {
        let turn = &disc.turns[turn_idx];
        let utt = &turn.utterances[utt_idx];
        let fam = &self.config.families;
        let mut fv = FeatureVector::default();
        if fam.lex {
            fv.merge(lexical_features(utt));
        }
        if fam.syn {
            fv.merge(syntactic_features(utt));
        }
        if fam.disc {
            fv.merge(discourse_features(utt, &self.config));
        }
        if fam.con {
            fv.merge(conversation_features(
                utt,
                target_turn(disc, turn_idx),
                &self.idf,
            ));
        }
        if fam.sent {
            fv.merge(sentiment_features(utt, &self.config));
        }
        fv
    }

    pub fn extract(&self, disc: &Discussion, turn_idx: usize, utt_idx: usize) -> FeatureVector {
        let raw = self.extract_raw(disc, turn_idx, utt_idx);
        match &self.stats {
            Some(stats) => stats.apply(raw),
            None => raw,
        }
    }

    /// Numeric feature names active under the current family set.
    fn active_numeric_names(&self) -> Vec<&'static str> {
        NUMERIC_FEATURES
            .iter()
            .copied()
            .filter(|name| {
                let fam = &self.config.families;
                match name.split(':').next().unwrap_or("") {
                    "lex" => fam.lex,
                    "syn" => fam.syn,
                    "disc" => fam.disc,
                    "conv" => fam.con,
                    "sent" => fam.sent,
                    _ => false,
                }
            })
            .collect()
    }
}

/// Fit IDF and standardization statistics on training discussions and
/// return a ready extractor. IDF documents are the word-token sets of
/// individual utterances.
pub fn fit_extractor(train: &[Discussion], config: FeatureConfig) -> FeatureExtractor {
    let idf = IdfStats::fit(train.iter().flat_map(|disc| {
        disc.turns.iter().flat_map(|turn| {
            turn.utterances.iter().map(|utt| {
                utt.tokens()
                    .filter(|t| is_word(&t.form))
                    .map(|t| t.lowercase.clone())
                    .collect::<BTreeSet<String>>()
            })
        })
    }));

    let mut extractor = FeatureExtractor {
        config,
        idf,
        stats: None,
    };

    let mut raw_vectors = Vec::new();
    for disc in train {
        for (ti, turn) in disc.turns.iter().enumerate() {
            for ui in 0..turn.utterances.len() {
                raw_vectors.push(extractor.extract_raw(disc, ti, ui));
            }
        }
    }
    let names = extractor.active_numeric_names();
    let refs: Vec<&FeatureVector> = raw_vectors.iter().collect();
    extractor.stats = Some(StandardizeStats::fit(&names, refs.iter().copied()));
    extractor
}

/// The lexicon payload a feature name is tied to, if any. This drives the
/// ordinal-constraint registry: features whose underlying text unit scores
/// strongly in the lexicon get monotone weight constraints.
pub fn lexicon_payload(feature_name: &str) -> Option<String> {
    if let Some(rest) = feature_name.strip_prefix("lex:uni:") {
        return Some(format!("uni:{rest}"));
    }
    if let Some(rest) = feature_name.strip_prefix("lex:bi:") {
        return Some(format!("bi:{rest}"));
    }
    if let Some(rest) = feature_name.strip_prefix("disc:punct:") {
        return Some(format!("punct:{rest}"));
    }
    if let Some(rest) = feature_name.strip_prefix("sent:word:") {
        let word = rest.strip_suffix(":pos").or_else(|| rest.strip_suffix(":neg"))?;
        return Some(format!("uni:{word}"));
    }
    if let Some(rest) = feature_name.strip_prefix("sent:") {
        // Polarity-substituted dependency relations keep their shape.
        if rest.contains('(') && rest.ends_with(')') && rest.contains("SENT") {
            return Some(format!("sdep:{rest}"));
        }
        return None;
    }
    if let Some(rest) = feature_name.strip_prefix("syn:") {
        // Original-form dependency features map to the generalized-relation
        // unit; POS-generalized variants lowercase into payloads that simply
        // never occur in a lexicon.
        if let Some(open) = rest.find('(') {
            if rest.ends_with(')') {
                let args = &rest[open + 1..rest.len() - 1];
                let mut parts = args.splitn(2, ',');
                let h = parts.next()?.to_lowercase();
                let d = parts.next()?.to_lowercase();
                return Some(format!("dep:Rel({h},{d})"));
            }
        }
        return None;
    }
    None
}

/// One line of the feature dump JSONL used for debugging and χ² ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDumpRecord {
    pub utterance_id: String,
    pub features: BTreeMap<String, f64>,
    pub gold: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_discussions;

    fn utterance(text: &str) -> Utterance {
        discussion_of(&[&[text]]).turns[0].utterances[0].clone()
    }

    /// Build a discussion: one speaker per turn, each turn a list of
    /// utterance texts (whitespace-tokenized).
    fn discussion_of(turns: &[&[&str]]) -> Discussion {
        let turns_json: Vec<String> = turns
            .iter()
            .enumerate()
            .map(|(ti, utts)| {
                let utts_json: Vec<String> = utts
                    .iter()
                    .enumerate()
                    .map(|(ui, text)| {
                        let tokens: Vec<String> = text
                            .split_whitespace()
                            .map(|w| format!(r#"{{"form":"{w}"}}"#))
                            .collect();
                        format!(
                            r#"{{"id":"t{ti}-u{ui}","sentences":[{{"tokens":[{}]}}]}}"#,
                            tokens.join(",")
                        )
                    })
                    .collect();
                format!(
                    r#"{{"speaker":"s{ti}","ordinal":{},"utterances":[{}]}}"#,
                    ti + 1,
                    utts_json.join(",")
                )
            })
            .collect();
        let line = format!(
            r#"{{"id":"d","source":"wikitalk","turns":[{}]}}"#,
            turns_json.join(",")
        );
        parse_discussions(&line).unwrap().remove(0)
    }

    #[test]
    fn uppercase_count_excludes_single_characters() {
        let fv = lexical_features(&utterance("I AGREE fully"));
        assert_eq!(fv.get("lex:num_upper"), 1.0);
        assert_eq!(fv.get("lex:num_words"), 3.0);
    }

    #[test]
    fn unigrams_are_binary_presence() {
        let fv = lexical_features(&utterance("good good"));
        assert_eq!(fv.get("lex:uni:good"), 1.0);
        assert_eq!(fv.get("lex:bi:good_good"), 1.0);
    }

    #[test]
    fn empty_utterance_has_no_lexical_content() {
        let mut utt = utterance("x");
        utt.sentences.clear();
        let fv = lexical_features(&utt);
        // Numeric raw features of 0 are not stored (sparse invariant).
        assert!(fv.is_empty());
    }

    fn parsed_utterance() -> Utterance {
        let line = r#"{"id":"d","source":"wikitalk","turns":[{"speaker":"a","ordinal":1,"utterances":[{"id":"u","sentences":[{"tokens":[
            {"form":"you","pos":"PRP","head":3,"deprel":"nsubj"},
            {"form":"are","pos":"VBP","head":3,"deprel":"cop"},
            {"form":"wrong","pos":"ADJ","head":0,"deprel":"root"}
        ]}]}]}]}"#
            .replace('\n', "");
        parse_discussions(&line).unwrap().remove(0).turns[0].utterances[0].clone()
    }

    #[test]
    fn syntactic_generalization_trio() {
        let fv = syntactic_features(&parsed_utterance());
        assert_eq!(fv.get("syn:nsubj(wrong,you)"), 1.0);
        assert_eq!(fv.get("syn:nsubj(ADJ,you)"), 1.0);
        assert_eq!(fv.get("syn:nsubj(wrong,PRP)"), 1.0);
        assert_eq!(fv.get("syn:wrong/ADJ"), 1.0);
    }

    #[test]
    fn no_parse_means_no_syntactic_features() {
        assert!(syntactic_features(&utterance("you are wrong")).is_empty());
    }

    #[test]
    fn sentence_initial_ngrams() {
        let fv = discourse_features(&utterance("really , grow up"), &FeatureConfig::default());
        assert_eq!(fv.get("disc:init1:really"), 1.0);
        assert_eq!(fv.get("disc:init2:really_,"), 1.0);
        assert_eq!(fv.get("disc:init3:really_,_grow"), 1.0);
    }

    #[test]
    fn repeated_punctuation_feature() {
        let fv = discourse_features(&utterance("what ? ! !"), &FeatureConfig::default());
        assert_eq!(fv.get("disc:punct:?!!"), 1.0);
    }

    #[test]
    fn negator_count() {
        let fv = discourse_features(
            &utterance("not never acceptable"),
            &FeatureConfig::default(),
        );
        assert_eq!(fv.get("disc:num_negators"), 2.0);
    }

    #[test]
    fn hedges_match_including_multiword() {
        let config = FeatureConfig::default();
        let fv = discourse_features(&utterance("it would sort of work"), &config);
        assert_eq!(fv.get("disc:hedge:would"), 1.0);
        assert_eq!(fv.get("disc:hedge:sort_of"), 1.0);
        assert_eq!(fv.get("disc:hedge:may"), 0.0);
    }

    fn quoting_discussion() -> Discussion {
        // Turn 2's utterance quotes turn 1 verbatim in its first two tokens.
        let line = r#"{"id":"d","source":"wikitalk","turns":[
            {"speaker":"a","ordinal":1,"utterances":[{"id":"u1","sentences":[{"tokens":[{"form":"good"},{"form":"idea"}]}]}]},
            {"speaker":"b","ordinal":2,"reply_to":1,"utterances":[{"id":"u2","quotes":[{"start":0,"end":2}],"sentences":[{"tokens":[{"form":"good"},{"form":"idea"},{"form":"indeed"}]}]}]}
        ]}"#
        .replace('\n', "");
        parse_discussions(&line).unwrap().remove(0)
    }

    #[test]
    fn verbatim_quote_overlaps_fully() {
        let disc = quoting_discussion();
        let target = target_turn(&disc, 1);
        let idf = IdfStats::default();
        let fv = conversation_features(&disc.turns[1].utterances[0], target, &idf);
        assert_eq!(fv.get("conv:quote_overlap"), 1.0);
    }

    #[test]
    fn no_target_zeroes_conversation_features() {
        let disc = quoting_discussion();
        let fv = conversation_features(
            &disc.turns[0].utterances[0],
            target_turn(&disc, 0),
            &IdfStats::default(),
        );
        assert_eq!(fv.get("conv:quote_overlap"), 0.0);
        assert_eq!(fv.get("conv:tfidf_sim"), 0.0);
    }

    #[test]
    fn identical_text_has_unit_tfidf_similarity() {
        let disc = discussion_of(&[&["good idea"], &["good idea"]]);
        let idf = IdfStats::fit([["good".to_string(), "idea".to_string()]
            .into_iter()
            .collect::<BTreeSet<_>>()]);
        let fv = conversation_features(&disc.turns[1].utterances[0], target_turn(&disc, 1), &idf);
        assert!((fv.get("conv:tfidf_sim") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_bounds_hold() {
        let idf = IdfStats::fit([
            ["a".to_string()].into_iter().collect::<BTreeSet<_>>(),
            ["b".to_string()].into_iter().collect(),
        ]);
        let a: BTreeMap<String, usize> = [("a".to_string(), 3)].into();
        let b: BTreeMap<String, usize> = [("a".to_string(), 1), ("b".to_string(), 2)].into();
        let s = idf.similarity(&a, &b);
        assert!((0.0..=1.0).contains(&s));
        assert_eq!(idf.similarity(&a, &BTreeMap::new()), 0.0);
    }

    fn sentiment_config() -> FeatureConfig {
        FeatureConfig {
            sentiment: SentimentInventory {
                pos: ["uni:great".to_string()].into(),
                neg: ["uni:wrong".to_string()].into(),
            },
            ..Default::default()
        }
    }

    #[test]
    fn sentiment_word_and_connective_conjunction() {
        let fv = sentiment_features(&utterance("fine but great"), &sentiment_config());
        assert_eq!(fv.get("sent:word:great:pos"), 1.0);
        assert_eq!(fv.get("sent:conn:but+pos"), 1.0);
    }

    #[test]
    fn sentiment_dependency_substitution() {
        let fv = sentiment_features(&parsed_utterance(), &sentiment_config());
        assert_eq!(fv.get("sent:nsubj(SENTneg,you)"), 1.0);
    }

    #[test]
    fn no_lexicon_hits_no_sentiment_features() {
        let fv = sentiment_features(&utterance("totally bland text"), &sentiment_config());
        assert!(fv.is_empty());
    }

    #[test]
    fn binning_boundaries() {
        let stats = StandardizeStats {
            moments: [("x".to_string(), (10.0, 2.0))].into(),
        };
        assert_eq!(stats.bin("x", 10.0), Some(2)); // z = 0
        assert_eq!(stats.bin("x", 14.0), Some(4)); // z = 2.0
        assert_eq!(stats.bin("x", 6.0), Some(0)); // z = -2.0
        assert_eq!(stats.bin("x", 8.5), Some(1)); // z = -0.75
        assert_eq!(stats.bin("x", 9.0), Some(2)); // z = -0.5, boundary cut counts
        assert_eq!(stats.bin("y", 1.0), None);
    }

    #[test]
    fn degenerate_sigma_pins_middle_bin() {
        let stats = StandardizeStats {
            moments: [("x".to_string(), (3.0, 0.0))].into(),
        };
        assert_eq!(stats.bin("x", -100.0), Some(2));
        assert_eq!(stats.bin("x", 100.0), Some(2));
    }

    #[test]
    fn apply_emits_exactly_one_bin_per_numeric() {
        let mut fv = FeatureVector::default();
        fv.set("lex:uni:good", 1.0);
        fv.set("lex:num_words", 7.0);
        let stats = StandardizeStats::fit(&["lex:num_words", "disc:num_negators"], [&fv]);
        let out = stats.apply(fv);
        assert_eq!(out.get("lex:uni:good"), 1.0);
        let bins: Vec<&str> = out
            .0
            .keys()
            .filter(|k| k.contains("#bin_"))
            .map(|s| s.as_str())
            .collect();
        assert_eq!(bins.len(), 2);
        // Both z-scores are 0 relative to the single training vector for
        // num_words, and the absent negator count standardizes from 0.
        assert!(out.get("lex:num_words#bin_2") == 1.0);
        assert!(out.get("disc:num_negators#bin_2") == 1.0);
        assert_eq!(out.get("lex:num_words"), 0.0);
    }

    #[test]
    fn family_set_parsing_and_ablation_ladder() {
        let set = FamilySet::parse("lex, syn").unwrap();
        assert!(set.lex && set.syn && !set.disc && !set.con && !set.sent);
        assert!(FamilySet::parse("lex,bogus").is_err());
        let ladder = FamilySet::cumulative();
        assert_eq!(ladder.len(), 5);
        assert_eq!(ladder[0].0, "Lex");
        assert_eq!(ladder[4].1, FamilySet::default());
    }

    #[test]
    fn assemble_respects_family_filter() {
        let disc = discussion_of(&[&["great stuff"], &["not great stuff ? ! !"]]);
        let config = FeatureConfig {
            families: FamilySet::only("lex").unwrap(),
            ..sentiment_config()
        };
        let extractor = fit_extractor(std::slice::from_ref(&disc), config);
        let fv = extractor.extract(&disc, 1, 0);
        assert!(fv.iter().all(|(name, _)| name.starts_with("lex:")));

        let mut both = FamilySet::only("lex").unwrap();
        both.enable("sent").unwrap();
        let extractor2 = fit_extractor(
            std::slice::from_ref(&disc),
            FeatureConfig {
                families: both,
                ..sentiment_config()
            },
        );
        let fv2 = extractor2.extract(&disc, 1, 0);
        // lex features agree between the two configs (family independence).
        for (name, value) in fv.iter() {
            assert_eq!(fv2.get(name), value, "family independence broke {name}");
        }
        assert_eq!(fv2.get("sent:word:great:pos"), 1.0);
    }

    #[test]
    fn assemble_superset_over_single_families() {
        let disc = discussion_of(&[&["great stuff"], &["not great ? ! !"]]);
        let all = fit_extractor(
            std::slice::from_ref(&disc),
            FeatureConfig {
                families: FamilySet::default(),
                ..sentiment_config()
            },
        );
        let full = all.extract(&disc, 1, 0);
        for fam in ["lex", "syn", "disc", "con", "sent"] {
            let single = fit_extractor(
                std::slice::from_ref(&disc),
                FeatureConfig {
                    families: FamilySet::only(fam).unwrap(),
                    ..sentiment_config()
                },
            );
            for (name, value) in single.extract(&disc, 1, 0).iter() {
                assert_eq!(full.get(name), value, "{name} differs in full config");
            }
        }
    }

    #[test]
    fn payload_mapping_for_constraints() {
        assert_eq!(lexicon_payload("lex:uni:good"), Some("uni:good".into()));
        assert_eq!(
            lexicon_payload("lex:bi:good_idea"),
            Some("bi:good_idea".into())
        );
        assert_eq!(lexicon_payload("disc:punct:?!!"), Some("punct:?!!".into()));
        assert_eq!(
            lexicon_payload("sent:word:great:pos"),
            Some("uni:great".into())
        );
        assert_eq!(
            lexicon_payload("sent:nsubj(SENTneg,you)"),
            Some("sdep:nsubj(SENTneg,you)".into())
        );
        assert_eq!(
            lexicon_payload("syn:nsubj(wrong,you)"),
            Some("dep:Rel(wrong,you)".into())
        );
        assert_eq!(lexicon_payload("sent:conn:but+pos"), None);
        assert_eq!(lexicon_payload("conv:tfidf_sim"), None);
        assert_eq!(lexicon_payload("disc:init1:really"), None);
        assert_eq!(lexicon_payload("lex:num_words#bin_2"), None);
    }
}
