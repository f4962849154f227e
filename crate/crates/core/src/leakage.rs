//! Simulated SSE index and the access/search-pattern leakage a passive
//! server observes.
//!
//! Query tokens are opaque `u32`s drawn as a seeded permutation of keyword
//! positions; document identifiers are positions in the indexed corpus, with
//! padding dummies numbered from `n_ind` upward.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::rng::rng_from_seed;

#[derive(Debug, Error)]
pub enum LeakageError {
    #[error("padding parameter must be at least 1")]
    InvalidPadding,
    #[error("cannot observe {requested} distinct queries over {m} keywords")]
    TooManyQueries { requested: usize, m: usize },
    #[error("cannot reveal {requested} known queries out of {observed} observed")]
    KTooLarge { requested: usize, observed: usize },
    #[error("malformed leakage view: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Inverted index over the indexed corpus, keyed by keyword position.
#[derive(Debug, Clone)]
pub struct SimulatedIndex {
    token_of: Vec<u32>,
    postings: Vec<Vec<u32>>,
    n_ind: usize,
    padding_g: usize,
}

impl SimulatedIndex {
    pub fn m(&self) -> usize {
        self.token_of.len()
    }

    pub fn n_ind(&self) -> usize {
        self.n_ind
    }

    pub fn padding_g(&self) -> usize {
        self.padding_g
    }

    pub fn token_of(&self, keyword: usize) -> u32 {
        self.token_of[keyword]
    }

    /// Sorted document ids returned for `keyword`, padding included.
    pub fn postings(&self, keyword: usize) -> &[u32] {
        &self.postings[keyword]
    }
}

/// Builds the index. With `padding_g > 1` every non-empty posting list is
/// topped up to a multiple of `padding_g` with distinct documents that do not
/// contain the keyword, falling back to fresh dummy ids when those run out.
pub fn build_index(ind: &Corpus, seed: u64, padding_g: usize) -> Result<SimulatedIndex, LeakageError> {
    if padding_g == 0 {
        return Err(LeakageError::InvalidPadding);
    }
    let m = ind.m();
    let n = ind.n();
    let mut rng = rng_from_seed(seed);
    let mut token_of: Vec<u32> = (0..m as u32).collect();
    token_of.shuffle(&mut rng);

    let mut postings = vec![Vec::new(); m];
    for (doc_id, doc) in ind.documents().iter().enumerate() {
        for kw in doc.membership.ones() {
            postings[kw].push(doc_id as u32);
        }
    }

    if padding_g > 1 {
        let mut next_dummy = n as u32;
        for list in postings.iter_mut() {
            let rem = list.len() % padding_g;
            if list.is_empty() || rem == 0 {
                continue;
            }
            let needed = padding_g - rem;
            let present: HashSet<u32> = list.iter().copied().collect();
            let candidates: Vec<u32> = (0..n as u32).filter(|d| !present.contains(d)).collect();
            let take = needed.min(candidates.len());
            for i in index::sample(&mut rng, candidates.len(), take) {
                list.push(candidates[i]);
            }
            for _ in take..needed {
                list.push(next_dummy);
                next_dummy += 1;
            }
            list.sort_unstable();
        }
    }

    Ok(SimulatedIndex {
        token_of,
        postings,
        n_ind: n,
        padding_g,
    })
}

/// What the attacker observes: tokens, their result sets, the query
/// co-occurrence matrix, the index size and any known (token, keyword) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageView {
    queries: Vec<u32>,
    results: Vec<Vec<u32>>,
    qcooc: Array2<u64>,
    n_ind: usize,
    known: Vec<(u32, usize)>,
}

impl LeakageView {
    /// Assembles a view from raw observations; `qcooc` is computed here.
    pub fn new(
        queries: Vec<u32>,
        results: Vec<Vec<u32>>,
        n_ind: usize,
        known: Vec<(u32, usize)>,
    ) -> Result<Self, LeakageError> {
        if queries.len() != results.len() {
            return Err(LeakageError::Malformed(format!(
                "{} queries but {} result sets",
                queries.len(),
                results.len()
            )));
        }
        let distinct: HashSet<u32> = queries.iter().copied().collect();
        if distinct.len() != queries.len() {
            return Err(LeakageError::Malformed("duplicate query token".into()));
        }
        if let Some((t, _)) = known.iter().find(|(t, _)| !distinct.contains(t)) {
            return Err(LeakageError::Malformed(format!("known token {t} was not observed")));
        }
        let mut results = results;
        for r in results.iter_mut() {
            r.sort_unstable();
            r.dedup();
        }
        let qcooc = query_cooccurrence(&results);
        Ok(Self {
            queries,
            results,
            qcooc,
            n_ind,
            known,
        })
    }

    pub fn queries(&self) -> &[u32] {
        &self.queries
    }

    pub fn l(&self) -> usize {
        self.queries.len()
    }

    pub fn results(&self, position: usize) -> &[u32] {
        &self.results[position]
    }

    /// `qcooc[a][b] = |R(q_a) ∩ R(q_b)|`, indexed by query position.
    pub fn qcooc(&self) -> &Array2<u64> {
        &self.qcooc
    }

    pub fn n_ind(&self) -> usize {
        self.n_ind
    }

    pub fn known(&self) -> &[(u32, usize)] {
        &self.known
    }

    pub fn position(&self, token: u32) -> Option<usize> {
        self.queries.iter().position(|&q| q == token)
    }

    pub fn with_known(&self, known: Vec<(u32, usize)>) -> Result<Self, LeakageError> {
        let tokens: HashSet<u32> = self.queries.iter().copied().collect();
        if let Some((t, _)) = known.iter().find(|(t, _)| !tokens.contains(t)) {
            return Err(LeakageError::Malformed(format!("known token {t} was not observed")));
        }
        Ok(Self {
            known,
            ..self.clone()
        })
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), LeakageError> {
        let wire = ViewWire {
            queries: self.queries.clone(),
            results: self.results.clone(),
            n_ind: self.n_ind,
            known: self.known.clone(),
        };
        serde_json::to_writer(writer, &wire)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self, LeakageError> {
        let wire: ViewWire = serde_json::from_reader(reader)?;
        Self::new(wire.queries, wire.results, wire.n_ind, wire.known)
    }
}

#[derive(Serialize, Deserialize)]
struct ViewWire {
    queries: Vec<u32>,
    results: Vec<Vec<u32>>,
    n_ind: usize,
    known: Vec<(u32, usize)>,
}

fn query_cooccurrence(results: &[Vec<u32>]) -> Array2<u64> {
    let l = results.len();
    let max_id = results.iter().flat_map(|r| r.iter()).max().map_or(0, |&m| m as usize + 1);
    let mut by_doc: Vec<Vec<usize>> = vec![Vec::new(); max_id];
    for (q, r) in results.iter().enumerate() {
        for &d in r {
            by_doc[d as usize].push(q);
        }
    }
    let mut qcooc = Array2::<u64>::zeros((l, l));
    for qs in &by_doc {
        for (a, &qa) in qs.iter().enumerate() {
            for &qb in &qs[a..] {
                qcooc[[qa, qb]] += 1;
            }
        }
    }
    for a in 0..l {
        for b in 0..a {
            qcooc[[a, b]] = qcooc[[b, a]];
        }
    }
    qcooc
}

/// Hidden token-to-keyword mapping for every observed query.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    pub mapping: BTreeMap<u32, usize>,
}

impl GroundTruth {
    pub fn keyword(&self, token: u32) -> Option<usize> {
        self.mapping.get(&token).copied()
    }
}

/// Observes `l` distinct keywords drawn uniformly without replacement.
/// Queries are listed in token order, which reveals nothing about keyword order.
pub fn observe_queries(
    index: &SimulatedIndex,
    l: usize,
    seed: u64,
) -> Result<(LeakageView, GroundTruth), LeakageError> {
    let m = index.m();
    if l == 0 || l > m {
        return Err(LeakageError::TooManyQueries { requested: l, m });
    }
    let mut rng = rng_from_seed(seed);
    let mut keywords = index::sample(&mut rng, m, l).into_vec();
    keywords.sort_unstable_by_key(|&kw| index.token_of(kw));
    let queries = keywords.iter().map(|&kw| index.token_of(kw)).collect();
    let results = keywords.iter().map(|&kw| index.postings(kw).to_vec()).collect();
    let truth = GroundTruth {
        mapping: keywords.iter().map(|&kw| (index.token_of(kw), kw)).collect(),
    };
    Ok((LeakageView::new(queries, results, index.n_ind(), Vec::new())?, truth))
}

/// Reveals `k` uniformly chosen observed queries to the attacker.
pub fn select_known_queries(
    view: &LeakageView,
    truth: &GroundTruth,
    k: usize,
    seed: u64,
) -> Result<LeakageView, LeakageError> {
    if k > view.l() {
        return Err(LeakageError::KTooLarge {
            requested: k,
            observed: view.l(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut picked = index::sample(&mut rng, view.l(), k).into_vec();
    picked.sort_unstable();
    let known = picked
        .into_iter()
        .map(|pos| {
            let token = view.queries[pos];
            let kw = truth
                .keyword(token)
                .ok_or_else(|| LeakageError::Malformed(format!("token {token} missing from ground truth")))?;
            Ok((token, kw))
        })
        .collect::<Result<Vec<_>, LeakageError>>()?;
    view.with_known(known)
}
