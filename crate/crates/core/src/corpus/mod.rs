//! Document ingestion, tokenization and the keyword universe.
//!
//! Documents are reduced to binary keyword-membership vectors over an ordered
//! [`KeywordUniverse`]; every co-occurrence matrix in the crate is indexed by
//! that order.

mod ingest;
pub mod porter;

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ingest::{read_csv, read_dir};

/// Bundled English stop-word list, one token per line.
pub const ENGLISH_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Tokens shorter than this are dropped by the default tokenizer.
pub const DEFAULT_MIN_TOKEN_LEN: usize = 3;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("collection has only {found} distinct keywords, {requested} requested")]
    TooFewKeywords { requested: usize, found: usize },
    #[error("keyword universe must be non-empty and duplicate-free")]
    InvalidUniverse,
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {id:?} refers to keyword index {index} outside a universe of {m}")]
    KeywordOutOfRange { id: String, index: usize, m: usize },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A raw document before tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: Option<i64>,
    pub text: String,
}

/// Lowercasing, stop-word removal and Porter stemming.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    stopwords: HashSet<String>,
    min_len: usize,
    strip: Option<Regex>,
}

impl Tokenizer {
    pub fn new(stopwords: HashSet<String>) -> Self {
        Self {
            stopwords,
            min_len: DEFAULT_MIN_TOKEN_LEN,
            strip: None,
        }
    }

    /// Tokenizer using the bundled English stop-word list.
    pub fn english() -> Self {
        Self::new(parse_stopwords(ENGLISH_STOPWORDS))
    }

    pub fn with_min_len(mut self, min_len: usize) -> Self {
        self.min_len = min_len;
        self
    }

    /// Removes every match of `pattern` from the raw text before tokenizing
    /// (e.g. a mailing-list signature).
    pub fn with_strip_pattern(mut self, pattern: Regex) -> Self {
        self.strip = Some(pattern);
        self
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let stripped;
        let text = match &self.strip {
            Some(re) => {
                stripped = re.replace_all(text, "");
                stripped.as_ref()
            }
            None => text,
        };
        text.split(|c: char| !c.is_alphabetic())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .filter(|t| t.chars().count() >= self.min_len)
            .filter(|t| !self.stopwords.contains(t))
            .map(|t| porter::stem(&t))
            .collect()
    }
}

/// Tokenizes with the given stop words and the default minimum token length.
pub fn tokenize(text: &str, stopwords: &HashSet<String>) -> Vec<String> {
    Tokenizer::new(stopwords.clone()).tokenize(text)
}

/// Parses a stop-word list: one token per line, blank lines and `#` comments ignored.
pub fn parse_stopwords(list: &str) -> HashSet<String> {
    list.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// The ordered set of queryable keywords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordUniverse {
    keywords: Vec<String>,
    index: HashMap<String, usize>,
}

impl KeywordUniverse {
    pub fn new(keywords: Vec<String>) -> Result<Self, CorpusError> {
        if keywords.is_empty() {
            return Err(CorpusError::InvalidUniverse);
        }
        let mut index = HashMap::with_capacity(keywords.len());
        for (i, k) in keywords.iter().enumerate() {
            if index.insert(k.clone(), i).is_some() {
                return Err(CorpusError::InvalidUniverse);
            }
        }
        Ok(Self { keywords, index })
    }

    /// Universe of `m` placeholder keywords `w0000, w0001, ...` for synthetic corpora.
    pub fn synthetic(m: usize) -> Self {
        let width = m.saturating_sub(1).to_string().len().max(4);
        Self::new((0..m).map(|i| format!("w{i:0width$}")).collect())
            .expect("synthetic names are distinct")
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn position(&self, keyword: &str) -> Option<usize> {
        self.index.get(keyword).copied()
    }
}

/// Fixed-length bitset of keyword membership.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeywordSet {
    words: Vec<u64>,
    len: usize,
}

impl KeywordSet {
    pub fn empty(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(len);
        for i in indices {
            set.insert(i);
        }
        set
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + bit)
            })
        })
    }
}

/// A document reduced to its keyword membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentVector {
    pub id: String,
    pub timestamp: Option<i64>,
    pub membership: KeywordSet,
}

/// Documents sharing one keyword universe.
#[derive(Debug, Clone)]
pub struct Corpus {
    universe: Arc<KeywordUniverse>,
    documents: Vec<DocumentVector>,
}

impl Corpus {
    /// Panics if a document's bitset length differs from the universe size.
    pub fn new(universe: Arc<KeywordUniverse>, documents: Vec<DocumentVector>) -> Self {
        let m = universe.len();
        assert!(
            documents.iter().all(|d| d.membership.len() == m),
            "document bitsets must match the universe size {m}"
        );
        Self {
            universe,
            documents,
        }
    }

    pub fn universe(&self) -> &Arc<KeywordUniverse> {
        &self.universe
    }

    pub fn documents(&self) -> &[DocumentVector] {
        &self.documents
    }

    pub fn m(&self) -> usize {
        self.universe.len()
    }

    pub fn n(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn into_documents(self) -> Vec<DocumentVector> {
        self.documents
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), CorpusError> {
        let file = CorpusFile {
            universe: self.universe.keywords().to_vec(),
            documents: self
                .documents
                .iter()
                .map(|d| DocumentRecord {
                    id: d.id.clone(),
                    timestamp: d.timestamp,
                    keywords: d.membership.ones().collect(),
                })
                .collect(),
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self, CorpusError> {
        let file: CorpusFile = serde_json::from_reader(reader)?;
        let universe = Arc::new(KeywordUniverse::new(file.universe)?);
        let m = universe.len();
        let mut seen = HashSet::with_capacity(file.documents.len());
        let mut documents = Vec::with_capacity(file.documents.len());
        for rec in file.documents {
            if !seen.insert(rec.id.clone()) {
                return Err(CorpusError::DuplicateId(rec.id));
            }
            if let Some(&index) = rec.keywords.iter().find(|&&k| k >= m) {
                return Err(CorpusError::KeywordOutOfRange { id: rec.id, index, m });
            }
            documents.push(DocumentVector {
                membership: KeywordSet::from_indices(m, rec.keywords),
                id: rec.id,
                timestamp: rec.timestamp,
            });
        }
        Ok(Self::new(universe, documents))
    }
}

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    universe: Vec<String>,
    documents: Vec<DocumentRecord>,
}

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    id: String,
    timestamp: Option<i64>,
    keywords: Vec<usize>,
}

/// Picks the `m` stems with the highest document frequency, ties broken
/// lexicographically ascending.
pub fn build_universe(
    raws: &[RawDocument],
    m: usize,
    tokenizer: &Tokenizer,
) -> Result<KeywordUniverse, CorpusError> {
    let doc_freq = raws
        .par_iter()
        .fold(HashMap::<String, usize>::new, |mut acc, raw| {
            let unique: HashSet<String> = tokenizer.tokenize(&raw.text).into_iter().collect();
            for token in unique {
                *acc.entry(token).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    if m == 0 || doc_freq.len() < m {
        return Err(CorpusError::TooFewKeywords {
            requested: m,
            found: doc_freq.len(),
        });
    }
    let mut ranked: Vec<(String, usize)> = doc_freq.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(m);
    KeywordUniverse::new(ranked.into_iter().map(|(k, _)| k).collect())
}

/// Bit `i` is set iff keyword `i` occurs among the document's tokens.
pub fn vectorize(raw: &RawDocument, universe: &KeywordUniverse, tokenizer: &Tokenizer) -> DocumentVector {
    let membership = KeywordSet::from_indices(
        universe.len(),
        tokenizer
            .tokenize(&raw.text)
            .iter()
            .filter_map(|t| universe.position(t)),
    );
    DocumentVector {
        id: raw.id.clone(),
        timestamp: raw.timestamp,
        membership,
    }
}

/// Vectorizes a whole collection against a universe, preserving input order.
pub fn build_corpus(
    raws: &[RawDocument],
    universe: Arc<KeywordUniverse>,
    tokenizer: &Tokenizer,
) -> Result<Corpus, CorpusError> {
    let mut seen = HashSet::with_capacity(raws.len());
    for raw in raws {
        if !seen.insert(raw.id.as_str()) {
            return Err(CorpusError::DuplicateId(raw.id.clone()));
        }
    }
    let documents = raws
        .par_iter()
        .map(|raw| vectorize(raw, &universe, tokenizer))
        .collect();
    Ok(Corpus::new(universe, documents))
}
