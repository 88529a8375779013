//! Sparse feature extraction for tweets.
//!
//! Five feature families are supported: unigrams and bigrams (presence bits,
//! pruned by training-corpus count), punctuation counts (`!`, `?`, `:`),
//! part-of-speech tag counts, and Twitter-specific counts (hashtags,
//! mentions, retweet marker, hyperlinks). The vocabulary is frozen on the
//! training split; unseen descriptors at prediction time are ignored.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Tweet};
use crate::error::{Error, Result};
use crate::seeds::fnv1a64;

/// Minimum training-corpus count for a unigram to enter the vocabulary.
pub const UNIGRAM_MIN_COUNT: u32 = 2;
/// Minimum training-corpus count for a bigram to enter the vocabulary.
pub const BIGRAM_MIN_COUNT: u32 = 4;

const PUNCTUATION_MARKS: [&str; 3] = ["!", "?", ":"];
const TWITTER_SIGNALS: [&str; 4] = [
    "hashtag_count",
    "mention_count",
    "retweet_present",
    "hyperlink_count",
];

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Word,
    Number,
    Punct,
    Hashtag,
    Mention,
    Url,
    Email,
}

#[derive(Clone, Debug)]
pub(crate) struct RawToken {
    pub raw: String,
    pub kind: TokenKind,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn looks_like_url(chunk: &str) -> bool {
    let lower = chunk.to_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// `local@domain` with exactly one `@`, a non-empty local part, and a dotted
/// domain with non-empty components.
fn looks_like_email(chunk: &str) -> bool {
    let mut parts = chunk.splitn(2, '@');
    let local = parts.next().unwrap_or("");
    let domain = match parts.next() {
        Some(d) => d,
        None => return false,
    };
    if local.is_empty() || domain.contains('@') || !domain.contains('.') {
        return false;
    }
    local.chars().all(|c| is_word_char(c) || c == '.' || c == '-' || c == '+')
        && domain.split('.').all(|p| !p.is_empty() && p.chars().all(|c| is_word_char(c) || c == '-'))
}

/// Scan one whitespace-delimited chunk into tokens. Hashtags, mentions, URLs
/// and e-mail addresses are protected as single tokens; everything else is
/// split into word runs and single-character punctuation tokens. Apostrophes
/// between letters stay inside the word.
fn scan_chunk(chunk: &str, out: &mut Vec<RawToken>) {
    if looks_like_url(chunk) {
        out.push(RawToken {
            raw: chunk.to_string(),
            kind: TokenKind::Url,
        });
        return;
    }
    if looks_like_email(chunk) {
        out.push(RawToken {
            raw: chunk.to_string(),
            kind: TokenKind::Email,
        });
        return;
    }
    if let Some(rest) = chunk.strip_prefix('#').or_else(|| chunk.strip_prefix('@')) {
        let kind = if chunk.starts_with('#') {
            TokenKind::Hashtag
        } else {
            TokenKind::Mention
        };
        let body: String = rest.chars().take_while(|&c| is_word_char(c)).collect();
        if !body.is_empty() {
            let tag_len = 1 + body.len();
            out.push(RawToken {
                raw: chunk[..tag_len].to_string(),
                kind,
            });
            if chunk.len() > tag_len {
                scan_plain(&chunk[tag_len..], out);
            }
            return;
        }
    }
    scan_plain(chunk, out);
}

/// Word runs and punctuation characters, no protected forms.
fn scan_plain(chunk: &str, out: &mut Vec<RawToken>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_word_char(c) {
            let mut j = i + 1;
            while j < chars.len() {
                if is_word_char(chars[j]) {
                    j += 1;
                } else if chars[j] == '\''
                    && j + 1 < chars.len()
                    && is_word_char(chars[j + 1])
                {
                    j += 2;
                } else {
                    break;
                }
            }
            let raw: String = chars[i..j].iter().collect();
            let kind = if raw.chars().all(|c| c.is_ascii_digit()) {
                TokenKind::Number
            } else {
                TokenKind::Word
            };
            out.push(RawToken { raw, kind });
            i = j;
        } else {
            out.push(RawToken {
                raw: c.to_string(),
                kind: TokenKind::Punct,
            });
            i += 1;
        }
    }
}

/// Tokenize raw text, preserving case and token classification.
pub(crate) fn scan_tokens(text: &str) -> Vec<RawToken> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        scan_chunk(chunk, &mut out);
    }
    out
}

/// Lowercased word tokens with URLs, mentions, hashtags and punctuation marks
/// isolated as their own tokens. Deterministic; empty text yields an empty
/// list.
pub fn tokenize(text: &str) -> Vec<String> {
    scan_tokens(text)
        .into_iter()
        .map(|t| t.raw.to_lowercase())
        .collect()
}

/// Rule-based coarse tagger used when a tweet carries no precomputed POS
/// tags. Tags are approximate: hashtag, mention, url, email, punct, number,
/// word.
pub fn fallback_pos_tag(tokens: &[String]) -> Vec<(String, String)> {
    tokens
        .iter()
        .map(|tok| {
            let tag = if tok.starts_with('#') && tok.len() > 1 {
                "hashtag"
            } else if tok.starts_with('@') && tok.len() > 1 {
                "mention"
            } else if looks_like_url(tok) {
                "url"
            } else if looks_like_email(tok) {
                "email"
            } else if tok.chars().all(|c| c.is_ascii_digit()) {
                "number"
            } else if tok.chars().all(|c| !is_word_char(c)) {
                "punct"
            } else {
                "word"
            };
            (tok.clone(), tag.to_string())
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Descriptors and configuration
// ---------------------------------------------------------------------------

/// Feature family of a descriptor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Unigram,
    Bigram,
    Punctuation,
    PosTag,
    Twitter,
}

/// A named feature within a family: the token, token pair, mark, tag or
/// twitter-signal name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub kind: FeatureKind,
    pub key: String,
}

impl FeatureDescriptor {
    pub fn new(kind: FeatureKind, key: impl Into<String>) -> Self {
        FeatureDescriptor {
            kind,
            key: key.into(),
        }
    }
}

/// Which feature families are enabled. The named presets f1..f5 compose
/// monotonically: f1 ⊂ f3, f2 ⊂ f3, f3 ⊂ f4 ⊂ f5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub unigrams: bool,
    pub bigrams: bool,
    pub pos: bool,
    /// Punctuation and Twitter-specific families combined.
    pub stat: bool,
}

/// The five feature presets: f1 = unigram, f2 = bigram, f3 = uni+bigram,
/// f4 = f3 + POS, f5 = f4 + STAT.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    F1,
    F2,
    F3,
    F4,
    F5,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::F1, Preset::F2, Preset::F3, Preset::F4, Preset::F5];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::F1 => "f1",
            Preset::F2 => "f2",
            Preset::F3 => "f3",
            Preset::F4 => "f4",
            Preset::F5 => "f5",
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(Preset::F1),
            "f2" => Ok(Preset::F2),
            "f3" => Ok(Preset::F3),
            "f4" => Ok(Preset::F4),
            "f5" => Ok(Preset::F5),
            other => Err(Error::InvalidConfig(format!(
                "unknown feature preset {other:?} (expected f1..f5)"
            ))),
        }
    }
}

impl FeatureConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::F1 => FeatureConfig {
                unigrams: true,
                bigrams: false,
                pos: false,
                stat: false,
            },
            Preset::F2 => FeatureConfig {
                unigrams: false,
                bigrams: true,
                pos: false,
                stat: false,
            },
            Preset::F3 => FeatureConfig {
                unigrams: true,
                bigrams: true,
                pos: false,
                stat: false,
            },
            Preset::F4 => FeatureConfig {
                unigrams: true,
                bigrams: true,
                pos: true,
                stat: false,
            },
            Preset::F5 => FeatureConfig {
                unigrams: true,
                bigrams: true,
                pos: true,
                stat: true,
            },
        }
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig::preset(Preset::F5)
    }
}

// ---------------------------------------------------------------------------
// Sparse vectors
// ---------------------------------------------------------------------------

/// Sparse feature vector: sorted `(index, value)` entries over a fixed
/// dimension. N-gram entries are presence bits; count families hold
/// non-negative integers. Zero values are never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: Vec<(usize, f64)>,
    dimension: usize,
}

impl FeatureVector {
    /// Build from an index → value map, dropping zero entries.
    pub fn from_map(map: BTreeMap<usize, f64>, dimension: usize) -> Self {
        let entries: Vec<(usize, f64)> = map.into_iter().filter(|&(_, v)| v != 0.0).collect();
        debug_assert!(entries.iter().all(|&(i, _)| i < dimension));
        FeatureVector { entries, dimension }
    }

    pub fn empty(dimension: usize) -> Self {
        FeatureVector {
            entries: Vec::new(),
            dimension,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, (usize, f64)> {
        self.entries.iter()
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    /// Sparse dot product by merging the two sorted entry lists.
    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.entries.len() && j < other.entries.len() {
            let (ia, va) = self.entries[i];
            let (ib, vb) = other.entries[j];
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += va * vb;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

/// Frozen mapping from feature descriptors to dense indices, built on
/// training data with the pruning thresholds. Occurrence counts are retained
/// for audit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Descriptors in index order.
    descriptors: Vec<FeatureDescriptor>,
    #[serde(skip)]
    index_of: HashMap<FeatureDescriptor, usize>,
    /// Training-corpus occurrence counts for n-gram descriptors.
    counts: BTreeMap<String, u32>,
    config: FeatureConfig,
}

impl Vocabulary {
    /// Build from the training split only. N-grams below the pruning
    /// thresholds are excluded; punctuation and twitter descriptors are
    /// fixed; POS descriptors are the tags observed in training.
    pub fn build(train: &Dataset, config: &FeatureConfig) -> Result<Self> {
        Self::build_counting(train.iter(), train.len(), config)
    }

    /// Fidelity variant that counts n-grams over the training split plus an
    /// extra corpus (e.g. the test split). Prediction-time behavior is
    /// unchanged; only the pruning counts differ.
    pub fn build_with_extra(
        train: &Dataset,
        extra: &Dataset,
        config: &FeatureConfig,
    ) -> Result<Self> {
        Self::build_counting(
            train.iter().chain(extra.iter()),
            train.len() + extra.len(),
            config,
        )
    }

    fn build_counting<'a>(
        tweets: impl Iterator<Item = &'a Tweet>,
        total: usize,
        config: &FeatureConfig,
    ) -> Result<Self> {
        if total == 0 {
            return Err(Error::InvalidData("empty training set".into()));
        }

        let mut unigram_counts: BTreeMap<String, u32> = BTreeMap::new();
        let mut bigram_counts: BTreeMap<String, u32> = BTreeMap::new();
        let mut pos_tags: BTreeMap<String, u32> = BTreeMap::new();

        for tweet in tweets {
            let tokens = tokenize(&tweet.text);
            if config.unigrams {
                for tok in &tokens {
                    *unigram_counts.entry(tok.clone()).or_insert(0) += 1;
                }
            }
            if config.bigrams {
                for pair in tokens.windows(2) {
                    let key = format!("{} {}", pair[0], pair[1]);
                    *bigram_counts.entry(key).or_insert(0) += 1;
                }
            }
            if config.pos {
                for (_, tag) in tags_for(tweet, &tokens) {
                    *pos_tags.entry(tag).or_insert(0) += 1;
                }
            }
        }

        let mut descriptors = Vec::new();
        let mut counts = BTreeMap::new();
        if config.unigrams {
            for (tok, &count) in &unigram_counts {
                if count >= UNIGRAM_MIN_COUNT {
                    descriptors.push(FeatureDescriptor::new(FeatureKind::Unigram, tok.clone()));
                    counts.insert(format!("1:{tok}"), count);
                }
            }
        }
        if config.bigrams {
            for (pair, &count) in &bigram_counts {
                if count >= BIGRAM_MIN_COUNT {
                    descriptors.push(FeatureDescriptor::new(FeatureKind::Bigram, pair.clone()));
                    counts.insert(format!("2:{pair}"), count);
                }
            }
        }
        if config.stat {
            for mark in PUNCTUATION_MARKS {
                descriptors.push(FeatureDescriptor::new(FeatureKind::Punctuation, mark));
            }
        }
        if config.pos {
            for tag in pos_tags.keys() {
                descriptors.push(FeatureDescriptor::new(FeatureKind::PosTag, tag.clone()));
            }
        }
        if config.stat {
            for signal in TWITTER_SIGNALS {
                descriptors.push(FeatureDescriptor::new(FeatureKind::Twitter, signal));
            }
        }

        descriptors.sort();
        let index_of = descriptors
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, d)| (d, i))
            .collect();
        Ok(Vocabulary {
            descriptors,
            index_of,
            counts,
            config: *config,
        })
    }

    pub fn dimension(&self) -> usize {
        self.descriptors.len()
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Dense index of a descriptor. Unseen descriptors return `None`; the
    /// vocabulary never grows at prediction time.
    pub fn index_of(&self, descriptor: &FeatureDescriptor) -> Option<usize> {
        self.index_of.get(descriptor).copied()
    }

    /// Descriptors in index order.
    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    /// Training-corpus count of an admitted n-gram (`1:` / `2:` prefixed key).
    pub fn ngram_count(&self, kind: FeatureKind, key: &str) -> Option<u32> {
        let prefix = match kind {
            FeatureKind::Unigram => "1",
            FeatureKind::Bigram => "2",
            _ => return None,
        };
        self.counts.get(&format!("{prefix}:{key}")).copied()
    }

    /// Number of descriptors per family, for reporting.
    pub fn family_sizes(&self) -> BTreeMap<FeatureKind, usize> {
        let mut sizes = BTreeMap::new();
        for d in &self.descriptors {
            *sizes.entry(d.kind).or_insert(0) += 1;
        }
        sizes
    }

    /// Stable fingerprint of the descriptor list; models refuse to load
    /// against a vocabulary with a different hash.
    pub fn hash(&self) -> u64 {
        let mut bytes = Vec::new();
        for d in &self.descriptors {
            bytes.push(match d.kind {
                FeatureKind::Unigram => 1u8,
                FeatureKind::Bigram => 2,
                FeatureKind::Punctuation => 3,
                FeatureKind::PosTag => 4,
                FeatureKind::Twitter => 5,
            });
            bytes.extend_from_slice(d.key.as_bytes());
            bytes.push(0);
        }
        fnv1a64(&bytes)
    }

    /// Turn a tweet into a sparse vector under this (frozen) vocabulary.
    /// Pure: never mutates the vocabulary.
    pub fn featurize(&self, tweet: &Tweet) -> FeatureVector {
        let raw = scan_tokens(&tweet.text);
        let tokens: Vec<String> = raw.iter().map(|t| t.raw.to_lowercase()).collect();
        let mut values: BTreeMap<usize, f64> = BTreeMap::new();

        if self.config.unigrams {
            for tok in &tokens {
                if let Some(idx) =
                    self.index_of(&FeatureDescriptor::new(FeatureKind::Unigram, tok.clone()))
                {
                    values.insert(idx, 1.0); // presence, not count
                }
            }
        }
        if self.config.bigrams {
            for pair in tokens.windows(2) {
                let key = format!("{} {}", pair[0], pair[1]);
                if let Some(idx) = self.index_of(&FeatureDescriptor::new(FeatureKind::Bigram, key))
                {
                    values.insert(idx, 1.0);
                }
            }
        }
        if self.config.pos {
            for (_, tag) in tags_for(tweet, &tokens) {
                if let Some(idx) = self.index_of(&FeatureDescriptor::new(FeatureKind::PosTag, tag))
                {
                    *values.entry(idx).or_insert(0.0) += 1.0;
                }
            }
        }
        if self.config.stat {
            for mark in PUNCTUATION_MARKS {
                let count = raw
                    .iter()
                    .filter(|t| t.kind == TokenKind::Punct && t.raw == mark)
                    .count();
                if count > 0 {
                    if let Some(idx) =
                        self.index_of(&FeatureDescriptor::new(FeatureKind::Punctuation, mark))
                    {
                        values.insert(idx, count as f64);
                    }
                }
            }
            let hashtags = raw.iter().filter(|t| t.kind == TokenKind::Hashtag).count();
            let mentions = raw.iter().filter(|t| t.kind == TokenKind::Mention).count();
            let links = raw
                .iter()
                .filter(|t| matches!(t.kind, TokenKind::Url | TokenKind::Email))
                .count();
            // "RT" is matched case-sensitively as a standalone token.
            let retweet = raw.iter().any(|t| t.raw == "RT");
            let signals = [
                ("hashtag_count", hashtags as f64),
                ("mention_count", mentions as f64),
                ("hyperlink_count", links as f64),
                ("retweet_present", if retweet { 1.0 } else { 0.0 }),
            ];
            for (key, value) in signals {
                if value > 0.0 {
                    if let Some(idx) =
                        self.index_of(&FeatureDescriptor::new(FeatureKind::Twitter, key))
                    {
                        values.insert(idx, value);
                    }
                }
            }
        }

        FeatureVector::from_map(values, self.dimension())
    }

    /// Featurize every tweet in a dataset, in order.
    pub fn featurize_all(&self, data: &Dataset) -> Vec<FeatureVector> {
        data.iter().map(|t| self.featurize(t)).collect()
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.descriptors == other.descriptors && self.config == other.config
    }
}

/// Tag source precedence: provided `pos_tags` win over the fallback tagger.
fn tags_for(tweet: &Tweet, tokens: &[String]) -> Vec<(String, String)> {
    match &tweet.pos_tags {
        Some(tags) => tags.clone(),
        None => fallback_pos_tag(tokens),
    }
}

/// Rebuild the descriptor index after deserialization (the map is skipped on
/// the wire; descriptors carry all the information).
pub(crate) fn rebuild_index(vocab: &mut Vocabulary) {
    vocab.index_of = vocab
        .descriptors
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, d)| (d, i))
        .collect();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dataset, LabelSpace, LabelVector};
    use proptest::prelude::*;

    fn tweet(id: &str, text: &str) -> Tweet {
        Tweet {
            id: id.into(),
            text: text.into(),
            pos_tags: None,
            labels: Some(LabelVector::from_pair(0, 0)),
        }
    }

    fn dataset(texts: &[&str]) -> Dataset {
        let tweets = texts
            .iter()
            .enumerate()
            .map(|(i, t)| tweet(&format!("t{i}"), t))
            .collect();
        Dataset::new(LabelSpace::standard(), tweets).unwrap()
    }

    #[test]
    fn tokenize_table_example() {
        assert_eq!(
            tokenize("Should bring the death penalty back! #executed"),
            vec!["should", "bring", "the", "death", "penalty", "back", "!", "#executed"]
        );
    }

    #[test]
    fn tokenize_empty_and_case() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("A a A"), vec!["a", "a", "a"]);
    }

    #[test]
    fn tokenize_protects_urls_mentions_emails() {
        assert_eq!(
            tokenize("RT @x check http://a.b and e@f.g"),
            vec!["rt", "@x", "check", "http://a.b", "and", "e@f.g"]
        );
    }

    #[test]
    fn tokenize_keeps_apostrophes_inside_words() {
        assert_eq!(tokenize("don't panic!"), vec!["don't", "panic", "!"]);
    }

    #[test]
    fn fallback_tagger_rules() {
        let tokens: Vec<String> = vec!["#executed".into(), "!".into(), "penalty".into(), "42".into()];
        let tags = fallback_pos_tag(&tokens);
        assert_eq!(tags[0], ("#executed".to_string(), "hashtag".to_string()));
        assert_eq!(tags[1].1, "punct");
        assert_eq!(tags[2].1, "word");
        assert_eq!(tags[3].1, "number");
    }

    #[test]
    fn pruning_thresholds() {
        // "obamacare" x5 admitted; "rare" x1 dropped; bigram "death penalty" x3 dropped.
        let data = dataset(&[
            "obamacare obamacare death penalty",
            "obamacare death penalty rare",
            "obamacare obamacare death penalty",
        ]);
        let vocab = Vocabulary::build(&data, &FeatureConfig::preset(Preset::F3)).unwrap();
        assert!(vocab
            .index_of(&FeatureDescriptor::new(FeatureKind::Unigram, "obamacare"))
            .is_some());
        assert!(vocab
            .index_of(&FeatureDescriptor::new(FeatureKind::Unigram, "rare"))
            .is_none());
        assert!(vocab
            .index_of(&FeatureDescriptor::new(FeatureKind::Bigram, "death penalty"))
            .is_none());
        assert_eq!(vocab.ngram_count(FeatureKind::Unigram, "obamacare"), Some(5));
    }

    #[test]
    fn punctuation_family_is_exactly_three() {
        let data = dataset(&["plain words only", "more plain words"]);
        let vocab = Vocabulary::build(&data, &FeatureConfig::preset(Preset::F5)).unwrap();
        let sizes = vocab.family_sizes();
        assert_eq!(sizes.get(&FeatureKind::Punctuation), Some(&3));
        assert_eq!(sizes.get(&FeatureKind::Twitter), Some(&4));
    }

    #[test]
    fn empty_training_set_rejected() {
        let data = Dataset::new(LabelSpace::standard(), vec![]).unwrap();
        assert!(Vocabulary::build(&data, &FeatureConfig::default()).is_err());
    }

    #[test]
    fn featurize_table_tweet() {
        let data = dataset(&[
            "Should bring the death penalty back! #executed",
            "death penalty back again",
        ]);
        let vocab = Vocabulary::build(&data, &FeatureConfig::preset(Preset::F5)).unwrap();
        let v = vocab.featurize(&tweet("q", "Should bring the death penalty back! #executed"));
        let excl = vocab
            .index_of(&FeatureDescriptor::new(FeatureKind::Punctuation, "!"))
            .unwrap();
        let quest = vocab
            .index_of(&FeatureDescriptor::new(FeatureKind::Punctuation, "?"))
            .unwrap();
        let hashtags = vocab
            .index_of(&FeatureDescriptor::new(FeatureKind::Twitter, "hashtag_count"))
            .unwrap();
        assert_eq!(v.get(excl), 1.0);
        assert_eq!(v.get(quest), 0.0);
        assert_eq!(v.get(hashtags), 1.0);
    }

    #[test]
    fn featurize_twitter_signals() {
        let data = dataset(&["filler text one", "filler text two"]);
        let vocab = Vocabulary::build(&data, &FeatureConfig::preset(Preset::F5)).unwrap();
        let v = vocab.featurize(&tweet("q", "RT @x check http://a.b and e@f.g"));
        let idx = |key: &str| {
            vocab
                .index_of(&FeatureDescriptor::new(FeatureKind::Twitter, key))
                .unwrap()
        };
        assert_eq!(v.get(idx("retweet_present")), 1.0);
        assert_eq!(v.get(idx("mention_count")), 1.0);
        assert_eq!(v.get(idx("hyperlink_count")), 2.0);
        // lowercase "rt" is not a retweet marker
        let v2 = vocab.featurize(&tweet("q2", "rt nothing here"));
        assert_eq!(v2.get(idx("retweet_present")), 0.0);
    }

    #[test]
    fn unseen_ngrams_yield_no_ngram_entries() {
        let data = dataset(&["alpha beta alpha beta", "alpha beta gamma gamma"]);
        let vocab = Vocabulary::build(&data, &FeatureConfig::preset(Preset::F1)).unwrap();
        let v = vocab.featurize(&tweet("q", "entirely novel wording"));
        assert_eq!(v.nnz(), 0);
        assert_eq!(v.dimension(), vocab.dimension());
    }

    #[test]
    fn provided_pos_tags_take_precedence() {
        let mut t = tweet("a", "some text here");
        t.pos_tags = Some(vec![
            ("some".into(), "D".into()),
            ("text".into(), "N".into()),
            ("here".into(), "R".into()),
        ]);
        let data = Dataset::new(LabelSpace::standard(), vec![t.clone()]).unwrap();
        let vocab = Vocabulary::build(&data, &FeatureConfig::preset(Preset::F4)).unwrap();
        assert!(vocab
            .index_of(&FeatureDescriptor::new(FeatureKind::PosTag, "N"))
            .is_some());
        assert!(vocab
            .index_of(&FeatureDescriptor::new(FeatureKind::PosTag, "word"))
            .is_none());
        let v = vocab.featurize(&t);
        let n = vocab
            .index_of(&FeatureDescriptor::new(FeatureKind::PosTag, "N"))
            .unwrap();
        assert_eq!(v.get(n), 1.0);
    }

    #[test]
    fn presets_compose_monotonically() {
        use std::collections::BTreeSet;
        let data = dataset(&[
            "alpha beta gamma! alpha beta",
            "alpha beta gamma? #tag alpha beta",
            "alpha beta gamma alpha beta @user",
            "alpha beta gamma alpha beta http://x.y",
        ]);
        let descriptor_set = |p: Preset| -> BTreeSet<FeatureDescriptor> {
            Vocabulary::build(&data, &FeatureConfig::preset(p))
                .unwrap()
                .descriptors()
                .iter()
                .cloned()
                .collect()
        };
        let f1 = descriptor_set(Preset::F1);
        let f2 = descriptor_set(Preset::F2);
        let f3 = descriptor_set(Preset::F3);
        let f4 = descriptor_set(Preset::F4);
        let f5 = descriptor_set(Preset::F5);
        assert!(f1.is_subset(&f3) && f2.is_subset(&f3));
        assert!(f3.is_subset(&f4) && f4.is_subset(&f5));
        assert!(f1.len() < f3.len());
    }

    #[test]
    fn joint_counting_admits_borderline_ngrams() {
        let train = dataset(&["borderline token here"]);
        let extra = dataset(&["borderline token again"]);
        let cfg = FeatureConfig::preset(Preset::F1);
        let solo = Vocabulary::build(&train, &cfg).unwrap();
        let joint = Vocabulary::build_with_extra(&train, &extra, &cfg).unwrap();
        let d = FeatureDescriptor::new(FeatureKind::Unigram, "borderline");
        assert!(solo.index_of(&d).is_none());
        assert!(joint.index_of(&d).is_some());
    }

    proptest! {
        /// Featurize is pure: the vocabulary never changes, n-gram values stay
        /// in {0,1}, and dimension is constant regardless of input.
        #[test]
        fn featurize_freeze_and_presence(texts in proptest::collection::vec("[a-c! ]{1,30}", 2..6), query in "[a-z!#@ ]{1,40}") {
            prop_assume!(texts.iter().all(|t| !t.trim().is_empty()));
            let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
            let data = dataset(&refs);
            let vocab = Vocabulary::build(&data, &FeatureConfig::preset(Preset::F5)).unwrap();
            let before = vocab.descriptors().to_vec();
            prop_assume!(!query.trim().is_empty());
            let v = vocab.featurize(&tweet("q", &query));
            prop_assert_eq!(before, vocab.descriptors().to_vec());
            prop_assert_eq!(v.dimension(), vocab.dimension());
            for &(idx, value) in v.iter() {
                let d = &vocab.descriptors()[idx];
                match d.kind {
                    FeatureKind::Unigram | FeatureKind::Bigram => prop_assert_eq!(value, 1.0),
                    _ => {
                        prop_assert!(value > 0.0);
                        prop_assert_eq!(value.fract(), 0.0);
                    }
                }
            }
        }
    }
}
