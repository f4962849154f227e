//! Attacker/indexed dataset generation by splitting one corpus.

use rand::seq::index;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::rng::rng_from_seed;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("requested {requested} documents from a corpus of {available}")]
    SizesExceedCorpus { requested: usize, available: usize },
    #[error("document {0:?} has no timestamp")]
    MissingTimestamp(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMethod {
    Uniform { seed: u64 },
    /// Attacker gets `timestamp < cutoff`, the index gets the rest.
    Temporal { cutoff: i64 },
}

/// Disjoint attacker (`atk`) and indexed (`ind`) datasets over one universe.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub atk: Corpus,
    pub ind: Corpus,
    pub method: SplitMethod,
}

/// Draws `n_atk + n_ind` documents without replacement; the first `n_atk`
/// drawn go to the attacker. Undrawn documents are discarded.
pub fn split_uniform(corpus: &Corpus, n_atk: usize, n_ind: usize, seed: u64) -> Result<SplitPair, SplitError> {
    let requested = n_atk + n_ind;
    if requested > corpus.n() {
        return Err(SplitError::SizesExceedCorpus {
            requested,
            available: corpus.n(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let drawn = index::sample(&mut rng, corpus.n(), requested).into_vec();
    let docs = corpus.documents();
    let pick = |ix: &[usize]| Corpus::new(corpus.universe().clone(), ix.iter().map(|&i| docs[i].clone()).collect());
    Ok(SplitPair {
        atk: pick(&drawn[..n_atk]),
        ind: pick(&drawn[n_atk..]),
        method: SplitMethod::Uniform { seed },
    })
}

/// Simulates a breach at `cutoff`: earlier documents are known to the attacker.
pub fn split_temporal(corpus: &Corpus, cutoff: i64) -> Result<SplitPair, SplitError> {
    let mut atk = Vec::new();
    let mut ind = Vec::new();
    for doc in corpus.documents() {
        let ts = doc
            .timestamp
            .ok_or_else(|| SplitError::MissingTimestamp(doc.id.clone()))?;
        if ts < cutoff {
            atk.push(doc.clone());
        } else {
            ind.push(doc.clone());
        }
    }
    Ok(SplitPair {
        atk: Corpus::new(corpus.universe().clone(), atk),
        ind: Corpus::new(corpus.universe().clone(), ind),
        method: SplitMethod::Temporal { cutoff },
    })
}
