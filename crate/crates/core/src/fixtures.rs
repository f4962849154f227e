//! Small reference corpora used by tests and examples.

use std::sync::Arc;

use crate::corpus::{Corpus, DocumentVector, KeywordSet, KeywordUniverse};

/// Builds a corpus over a synthetic universe of `m` keywords, one document
/// per entry of `docs` listing the keyword indices it contains.
pub fn corpus_from_bits(m: usize, docs: &[&[usize]]) -> Corpus {
    let universe = Arc::new(KeywordUniverse::synthetic(m));
    let documents = docs
        .iter()
        .enumerate()
        .map(|(i, bits)| DocumentVector {
            id: format!("d{i}"),
            timestamp: Some(i as i64),
            membership: KeywordSet::from_indices(m, bits.iter().copied()),
        })
        .collect();
    Corpus::new(universe, documents)
}

/// Four keywords, eight documents. Every column of the co-occurrence matrix
/// has four distinct entries, so a single known query separates all keywords:
///
/// ```text
/// 6 3 2 4
/// 3 4 1 2
/// 2 1 4 3
/// 4 2 3 5
/// ```
pub fn four_keyword_corpus() -> Corpus {
    corpus_from_bits(
        4,
        &[&[0, 2, 3], &[1, 2, 3], &[0, 2, 3], &[0, 3], &[0, 1], &[0, 1, 3], &[2], &[0, 1]],
    )
}

/// Four keywords, nine documents, with distinct volumes and distinct
/// co-occurrence columns:
///
/// ```text
/// 6 4 2 3
/// 4 5 1 2
/// 2 1 3 0
/// 3 2 0 4
/// ```
///
/// Volumes alone already pick the true assignment, and every improving swap
/// sequence ends there, so likelihood-based attacks recover it exactly.
pub fn four_keyword_volume_corpus() -> Corpus {
    corpus_from_bits(
        4,
        &[&[0, 1], &[0, 1, 2], &[0, 1, 3], &[0, 1, 3], &[0, 2], &[0, 3], &[1], &[2], &[3]],
    )
}
