//! Labeled tweet corpus: label space, label vectors, dataset I/O and
//! seeded train/test splitting.
//!
//! The label space is fixed at six labels: three purpose labels (indices
//! 0..3) followed by three position labels (indices 3..6). A gold annotation
//! always sets exactly one purpose bit and one position bit; predictions may
//! temporarily violate that constraint and are repaired downstream.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of labels: three purpose + three position.
pub const NUM_LABELS: usize = 6;
/// Label indices `0..3` are purpose labels.
pub const PURPOSE_RANGE: std::ops::Range<usize> = 0..3;
/// Label indices `3..6` are position labels.
pub const POSITION_RANGE: std::ops::Range<usize> = 3..6;

/// The six-label space: purpose labels at indices 0..3, position labels at
/// indices 3..6. Name ↔ index mapping is a bijection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    purpose: [String; 3],
    position: [String; 3],
}

impl LabelSpace {
    /// The canonical label names used by the bundled datasets.
    pub fn standard() -> Self {
        LabelSpace {
            purpose: [
                "express_emotion".into(),
                "information_sharing".into(),
                "social_interaction".into(),
            ],
            position: ["pro".into(), "con".into(), "neutral".into()],
        }
    }

    /// Build a space with custom names. The two groups must be disjoint and
    /// all six names unique.
    pub fn new(purpose: [String; 3], position: [String; 3]) -> Result<Self> {
        let mut seen = HashSet::new();
        for name in purpose.iter().chain(position.iter()) {
            if name.is_empty() {
                return Err(Error::InvalidConfig("empty label name".into()));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate label name {name:?}"
                )));
            }
        }
        Ok(LabelSpace { purpose, position })
    }

    pub fn purpose_labels(&self) -> &[String; 3] {
        &self.purpose
    }

    pub fn position_labels(&self) -> &[String; 3] {
        &self.position
    }

    /// Name of the label at `index`.
    pub fn name(&self, index: usize) -> &str {
        assert!(index < NUM_LABELS, "label index {index} out of range");
        if index < 3 {
            &self.purpose[index]
        } else {
            &self.position[index - 3]
        }
    }

    /// Global index of a label name, if known.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.purpose
            .iter()
            .position(|n| n == name)
            .or_else(|| self.position.iter().position(|n| n == name).map(|i| i + 3))
    }

    /// Resolve a purpose name (canonical or prose alias) to its group-local
    /// index 0..3.
    pub fn purpose_index(&self, name: &str) -> Result<usize> {
        let canon = canonical_alias(name).unwrap_or(name);
        self.purpose
            .iter()
            .position(|n| n == canon)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    /// Resolve a position name (canonical or prose alias) to its group-local
    /// index 0..3.
    pub fn position_index(&self, name: &str) -> Result<usize> {
        let canon = canonical_alias(name).unwrap_or(name);
        self.position
            .iter()
            .position(|n| n == canon)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }
}

impl Default for LabelSpace {
    fn default() -> Self {
        LabelSpace::standard()
    }
}

/// Alias table mapping prose label names to the canonical snake_case names.
/// Matching is case-insensitive on the prose side.
fn canonical_alias(name: &str) -> Option<&'static str> {
    let lower = name.to_lowercase();
    match lower.as_str() {
        "express emotion" | "express emotion/personal interests" | "express_emotion" => {
            Some("express_emotion")
        }
        "information sharing" | "information_sharing" => Some("information_sharing"),
        "social interaction" | "social_interaction" => Some("social_interaction"),
        "pro" => Some("pro"),
        "con" => Some("con"),
        "neutral" => Some("neutral"),
        _ => None,
    }
}

/// Fixed-width bit vector over the six-label space. The unit of multi-label
/// truth and prediction.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct LabelVector(u8);

impl LabelVector {
    /// All bits clear.
    pub fn empty() -> Self {
        LabelVector(0)
    }

    /// A valid vector with purpose bit `purpose` (0..3) and position bit
    /// `position` (0..3, group-local) set.
    pub fn from_pair(purpose: usize, position: usize) -> Self {
        assert!(purpose < 3 && position < 3, "group-local index out of range");
        LabelVector(1 << purpose | 1 << (3 + position))
    }

    /// Build from six booleans indexed by the label space.
    pub fn from_bits(bits: [bool; NUM_LABELS]) -> Self {
        let mut mask = 0u8;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                mask |= 1 << i;
            }
        }
        LabelVector(mask)
    }

    pub fn get(&self, index: usize) -> bool {
        assert!(index < NUM_LABELS, "label index {index} out of range");
        self.0 >> index & 1 == 1
    }

    pub fn set(&mut self, index: usize, value: bool) {
        assert!(index < NUM_LABELS, "label index {index} out of range");
        if value {
            self.0 |= 1 << index;
        } else {
            self.0 &= !(1 << index);
        }
    }

    /// Count of set bits among the purpose indices.
    pub fn purpose_count(&self) -> usize {
        (self.0 & 0b000111).count_ones() as usize
    }

    /// Count of set bits among the position indices.
    pub fn position_count(&self) -> usize {
        (self.0 & 0b111000).count_ones() as usize
    }

    /// Exactly one purpose bit and exactly one position bit set.
    pub fn is_valid(&self) -> bool {
        self.purpose_count() == 1 && self.position_count() == 1
    }

    /// Group-local index of the single purpose bit, if valid in that group.
    pub fn purpose_class(&self) -> Option<usize> {
        if self.purpose_count() == 1 {
            (0..3).find(|&i| self.get(i))
        } else {
            None
        }
    }

    /// Group-local index of the single position bit, if valid in that group.
    pub fn position_class(&self) -> Option<usize> {
        if self.position_count() == 1 {
            (3..6).find(|&i| self.get(i)).map(|i| i - 3)
        } else {
            None
        }
    }

    /// Number of bits on which `self` and `other` disagree.
    pub fn xor_count(&self, other: &LabelVector) -> usize {
        (self.0 ^ other.0).count_ones() as usize
    }

    /// Bitwise complement within the six-label width.
    pub fn complement(&self) -> LabelVector {
        LabelVector(!self.0 & 0b111111)
    }

    /// Indices of set bits, ascending.
    pub fn set_indices(&self) -> Vec<usize> {
        (0..NUM_LABELS).filter(|&i| self.get(i)).collect()
    }
}

impl fmt::Display for LabelVector {
    /// Renders as `ppp|ttt`, e.g. `010|100`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..NUM_LABELS {
            if i == 3 {
                write!(f, "|")?;
            }
            write!(f, "{}", if self.get(i) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LabelVector({self})")
    }
}

impl From<LabelVector> for String {
    fn from(v: LabelVector) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for LabelVector {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|&c| c != '|').collect();
        if chars.len() != NUM_LABELS || chars.iter().any(|&c| c != '0' && c != '1') {
            return Err(Error::InvalidData(format!("bad label vector {s:?}")));
        }
        let mut bits = [false; NUM_LABELS];
        for (i, &c) in chars.iter().enumerate() {
            bits[i] = c == '1';
        }
        Ok(LabelVector::from_bits(bits))
    }
}

/// A single tweet, optionally gold-labeled and optionally carrying
/// precomputed part-of-speech tags.
#[derive(Clone, Debug, PartialEq)]
pub struct Tweet {
    pub id: String,
    pub text: String,
    /// Precomputed `(token, tag)` pairs from an external tagger, if any.
    pub pos_tags: Option<Vec<(String, String)>>,
    /// Gold annotation; `None` for unlabeled tweets awaiting prediction.
    pub labels: Option<LabelVector>,
}

/// An ordered collection of tweets over one label space. Immutable after
/// construction; ids are unique.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    space: LabelSpace,
    tweets: Vec<Tweet>,
}

impl Dataset {
    pub fn new(space: LabelSpace, tweets: Vec<Tweet>) -> Result<Self> {
        let mut ids = HashSet::new();
        for tweet in &tweets {
            if tweet.text.is_empty() {
                return Err(Error::InvalidData(format!(
                    "tweet {:?} has empty text",
                    tweet.id
                )));
            }
            if let Some(labels) = &tweet.labels {
                if !labels.is_valid() {
                    return Err(Error::InvalidData(format!(
                        "tweet {:?} has invalid gold labels {labels}",
                        tweet.id
                    )));
                }
            }
            if !ids.insert(tweet.id.clone()) {
                return Err(Error::InvalidData(format!(
                    "duplicate tweet id {:?}",
                    tweet.id
                )));
            }
        }
        Ok(Dataset { space, tweets })
    }

    pub fn space(&self) -> &LabelSpace {
        &self.space
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Tweet> {
        self.tweets.iter()
    }

    /// True when every tweet carries a gold annotation.
    pub fn is_fully_labeled(&self) -> bool {
        self.tweets.iter().all(|t| t.labels.is_some())
    }

    /// Gold label vectors in dataset order. Errors if any tweet is unlabeled.
    pub fn gold_labels(&self) -> Result<Vec<LabelVector>> {
        self.tweets
            .iter()
            .map(|t| {
                t.labels
                    .ok_or_else(|| Error::InvalidData(format!("tweet {:?} is unlabeled", t.id)))
            })
            .collect()
    }

    /// Deterministic seeded split into `(train, test)`. The partition is
    /// disjoint and exhaustive, with exactly `train_size` tweets in train.
    pub fn split(&self, train_size: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        if train_size > self.len() {
            return Err(Error::InvalidConfig(format!(
                "train_size {train_size} exceeds dataset size {}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        let train = order[..train_size]
            .iter()
            .map(|&i| self.tweets[i].clone())
            .collect();
        let test = order[train_size..]
            .iter()
            .map(|&i| self.tweets[i].clone())
            .collect();
        Ok((
            Dataset {
                space: self.space.clone(),
                tweets: train,
            },
            Dataset {
                space: self.space.clone(),
                tweets: test,
            },
        ))
    }
}

/// On-disk record: one JSON object per line with fields
/// `{id, text, purpose, position, pos_tags}`.
#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    purpose: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    position: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pos_tags: Option<Vec<(String, String)>>,
}

/// Loader options. `min_words` drops tweets with fewer whitespace-separated
/// words than the limit (off by default).
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    pub min_words: Option<usize>,
}

/// Load a line-delimited dataset with default options.
pub fn load_dataset(path: &Path, space: &LabelSpace) -> Result<Dataset> {
    load_dataset_with(path, space, &LoadOptions::default())
}

/// Load a line-delimited dataset. Records carrying both label names become
/// gold-labeled tweets; records with neither become unlabeled tweets; records
/// with exactly one of the two are rejected.
pub fn load_dataset_with(path: &Path, space: &LabelSpace, opts: &LoadOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut tweets = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: lineno + 1,
                message: e.to_string(),
            })?;
        let labels = match (&record.purpose, &record.position) {
            (Some(p), Some(q)) => Some(LabelVector::from_pair(
                space.purpose_index(p)?,
                space.position_index(q)?,
            )),
            (None, None) => None,
            (Some(_), None) => {
                return Err(Error::MalformedRecord {
                    line: lineno + 1,
                    message: "record has a purpose label but no position label".into(),
                })
            }
            (None, Some(_)) => {
                return Err(Error::MalformedRecord {
                    line: lineno + 1,
                    message: "record has a position label but no purpose label".into(),
                })
            }
        };
        if record.text.is_empty() {
            return Err(Error::MalformedRecord {
                line: lineno + 1,
                message: "empty text".into(),
            });
        }
        if let Some(min) = opts.min_words {
            if record.text.split_whitespace().count() < min {
                continue;
            }
        }
        tweets.push(Tweet {
            id: record.id,
            text: record.text,
            pos_tags: record.pos_tags,
            labels,
        });
    }
    Dataset::new(space.clone(), tweets)
}

/// Write a dataset in the line-delimited record format. `load_dataset` on the
/// result reproduces an equal dataset.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for tweet in dataset.iter() {
        let (purpose, position) = match tweet.labels {
            Some(v) => {
                let p = v.purpose_class().expect("gold labels are valid");
                let q = v.position_class().expect("gold labels are valid");
                (
                    Some(dataset.space.purpose_labels()[p].clone()),
                    Some(dataset.space.position_labels()[q].clone()),
                )
            }
            None => (None, None),
        };
        let record = Record {
            id: tweet.id.clone(),
            text: tweet.text.clone(),
            purpose,
            position,
            pos_tags: tweet.pos_tags.clone(),
        };
        let json = serde_json::to_string(&record)
            .map_err(|e| Error::InvalidData(format!("serialize record: {e}")))?;
        writeln!(writer, "{json}").map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labeled(id: &str, text: &str, purpose: usize, position: usize) -> Tweet {
        Tweet {
            id: id.into(),
            text: text.into(),
            pos_tags: None,
            labels: Some(LabelVector::from_pair(purpose, position)),
        }
    }

    #[test]
    fn label_vector_from_names() {
        let space = LabelSpace::standard();
        let p = space.purpose_index("information_sharing").unwrap();
        let q = space.position_index("pro").unwrap();
        let v = LabelVector::from_pair(p, q);
        assert_eq!(v.to_string(), "010|100");
        assert!(v.is_valid());
    }

    #[test]
    fn prose_aliases_resolve() {
        let space = LabelSpace::standard();
        assert_eq!(space.purpose_index("Express emotion").unwrap(), 0);
        assert_eq!(
            space
                .purpose_index("Express emotion/personal interests")
                .unwrap(),
            0
        );
        assert_eq!(space.position_index("Pro").unwrap(), 0);
    }

    #[test]
    fn unknown_label_is_rejected() {
        let space = LabelSpace::standard();
        let err = space.purpose_index("favor").unwrap_err();
        assert!(err.to_string().contains("favor"), "got: {err}");
    }

    #[test]
    fn name_index_bijection() {
        let space = LabelSpace::standard();
        for i in 0..NUM_LABELS {
            assert_eq!(space.index_of(space.name(i)), Some(i));
        }
    }

    #[test]
    fn validity_predicate() {
        assert!(LabelVector::from_pair(0, 1).is_valid());
        assert!(!LabelVector::empty().is_valid());
        let mut v = LabelVector::from_pair(0, 1);
        v.set(1, true); // two purpose bits
        assert!(!v.is_valid());
    }

    #[test]
    fn load_basic_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"id":"a","text":"obamacare passed","purpose":"information_sharing","position":"pro"}"#,
                "\n",
                r#"{"id":"b","text":"no labels here"}"#,
                "\n",
            ),
        )
        .unwrap();
        let data = load_dataset(&path, &LabelSpace::standard()).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.tweets()[0].labels.unwrap().to_string(), "010|100");
        assert!(data.tweets()[1].labels.is_none());
    }

    #[test]
    fn load_rejects_unknown_label() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"a","text":"x y","purpose":"favor","position":"pro"}"#,
        )
        .unwrap();
        let err = load_dataset(&path, &LabelSpace::standard()).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel(ref n) if n == "favor"));
    }

    #[test]
    fn load_rejects_malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"text\":\"ok\"}\nnot json\n").unwrap();
        let err = load_dataset(&path, &LabelSpace::standard()).unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 2, .. }), "got: {err}");
    }

    #[test]
    fn load_rejects_half_labeled_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        std::fs::write(&path, r#"{"id":"a","text":"x","purpose":"pro?","position":null}"#).unwrap();
        // purpose without position is malformed regardless of the name
        let err = load_dataset(&path, &LabelSpace::standard()).unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 1, .. }));
    }

    #[test]
    fn min_words_filter_drops_short_tweets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"id":"a","text":"one two three four five"}"#,
                "\n",
                r#"{"id":"b","text":"too short"}"#,
                "\n",
            ),
        )
        .unwrap();
        let opts = LoadOptions { min_words: Some(5) };
        let data = load_dataset_with(&path, &LabelSpace::standard(), &opts).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data.tweets()[0].id, "a");
    }

    #[test]
    fn save_load_round_trip() {
        let space = LabelSpace::standard();
        let tweets = vec![
            labeled("a", "first tweet text", 0, 1),
            Tweet {
                id: "b".into(),
                text: "unlabeled with tags".into(),
                pos_tags: Some(vec![("unlabeled".into(), "word".into())]),
                labels: None,
            },
        ];
        let data = Dataset::new(space.clone(), tweets).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.jsonl");
        save_dataset(&data, &path).unwrap();
        let reloaded = load_dataset(&path, &space).unwrap();
        assert_eq!(data, reloaded);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let space = LabelSpace::standard();
        let tweets = vec![labeled("a", "x", 0, 0), labeled("a", "y", 1, 1)];
        assert!(Dataset::new(space, tweets).is_err());
    }

    #[test]
    fn split_sizes_match_paper_setup() {
        let space = LabelSpace::standard();
        let tweets: Vec<Tweet> = (0..1000)
            .map(|i| labeled(&format!("t{i}"), &format!("tweet number {i}"), i % 3, i % 3))
            .collect();
        let data = Dataset::new(space, tweets).unwrap();
        let (train, test) = data.split(600, 7).unwrap();
        assert_eq!(train.len(), 600);
        assert_eq!(test.len(), 400);
    }

    #[test]
    fn split_boundary_and_error() {
        let space = LabelSpace::standard();
        let tweets: Vec<Tweet> = (0..5)
            .map(|i| labeled(&format!("t{i}"), "some text", 0, 0))
            .collect();
        let data = Dataset::new(space, tweets).unwrap();
        let (train, test) = data.split(5, 1).unwrap();
        assert_eq!(train.len(), 5);
        assert!(test.is_empty());
        assert!(data.split(6, 1).is_err());
    }

    proptest! {
        #[test]
        fn split_is_deterministic_and_exhaustive(n in 1usize..60, train in 0usize..60, seed: u64) {
            let train = train.min(n);
            let space = LabelSpace::standard();
            let tweets: Vec<Tweet> = (0..n)
                .map(|i| labeled(&format!("t{i}"), "body text", i % 3, (i / 3) % 3))
                .collect();
            let data = Dataset::new(space, tweets).unwrap();
            let (tr1, te1) = data.split(train, seed).unwrap();
            let (tr2, te2) = data.split(train, seed).unwrap();
            prop_assert_eq!(&tr1, &tr2);
            prop_assert_eq!(&te1, &te2);

            let mut ids: Vec<&str> = tr1.iter().chain(te1.iter()).map(|t| t.id.as_str()).collect();
            ids.sort_unstable();
            let mut expected: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
            expected.sort_unstable();
            prop_assert_eq!(ids, expected.iter().map(|s| s.as_str()).collect::<Vec<_>>());
        }

        #[test]
        fn label_vector_string_round_trip(mask in 0u8..64) {
            let mut bits = [false; NUM_LABELS];
            for (i, bit) in bits.iter_mut().enumerate() {
                *bit = mask >> i & 1 == 1;
            }
            let v = LabelVector::from_bits(bits);
            let back = LabelVector::try_from(v.to_string()).unwrap();
            prop_assert_eq!(v, back);
        }
    }
}
