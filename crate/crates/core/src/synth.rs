//! Synthetic corpora drawn from explicit document distributions.

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cooc::CoocMatrix;
use crate::corpus::{Corpus, DocumentVector, KeywordSet, KeywordUniverse};
use crate::rng::{substream, SimRng};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("keyword probability {value} at index {index} is outside (0, 1)")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("model has no keywords")]
    Empty,
    #[error("mixture weight {0} is outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("mixture topics have {0} and {1} keywords")]
    TopicSizeMismatch(usize, usize),
}

/// Independent per-keyword Bernoulli appearance probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BernoulliWire", into = "BernoulliWire")]
pub struct BernoulliModel {
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BernoulliWire {
    p: Vec<f64>,
}

impl TryFrom<BernoulliWire> for BernoulliModel {
    type Error = SynthError;
    fn try_from(w: BernoulliWire) -> Result<Self, SynthError> {
        BernoulliModel::new(w.p)
    }
}

impl From<BernoulliModel> for BernoulliWire {
    fn from(m: BernoulliModel) -> Self {
        BernoulliWire { p: m.p }
    }
}

impl BernoulliModel {
    pub fn new(p: Vec<f64>) -> Result<Self, SynthError> {
        if p.is_empty() {
            return Err(SynthError::Empty);
        }
        for (index, &value) in p.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(SynthError::ProbabilityOutOfRange { index, value });
            }
        }
        Ok(Self { p })
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    fn draw(&self, rng: &mut SimRng) -> KeywordSet {
        let mut set = KeywordSet::empty(self.p.len());
        for (i, &p) in self.p.iter().enumerate() {
            if rng.gen_bool(p) {
                set.insert(i);
            }
        }
        set
    }
}

/// Two-topic mixture whose topic-0 weight moves linearly from `weight_start`
/// (first document) to `weight_end` (last document).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMixtureModel {
    pub topics: [BernoulliModel; 2],
    pub weight_start: f64,
    pub weight_end: f64,
}

impl TopicMixtureModel {
    pub fn new(topics: [BernoulliModel; 2], weight_start: f64, weight_end: f64) -> Result<Self, SynthError> {
        for w in [weight_start, weight_end] {
            if !(0.0..=1.0).contains(&w) {
                return Err(SynthError::WeightOutOfRange(w));
            }
        }
        if topics[0].m() != topics[1].m() {
            return Err(SynthError::TopicSizeMismatch(topics[0].m(), topics[1].m()));
        }
        Ok(Self {
            topics,
            weight_start,
            weight_end,
        })
    }

    pub fn m(&self) -> usize {
        self.topics[0].m()
    }

    /// Weight of topic 0 at time index `t` of a corpus of `n` documents.
    pub fn weight(&self, t: usize, n: usize) -> f64 {
        if n <= 1 {
            return self.weight_start;
        }
        let frac = t as f64 / (n - 1) as f64;
        self.weight_start + (self.weight_end - self.weight_start) * frac
    }

    fn draw(&self, t: usize, n: usize, rng: &mut SimRng) -> KeywordSet {
        let topic = if rng.gen_bool(self.weight(t, n)) { 0 } else { 1 };
        self.topics[topic].draw(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentModel {
    Bernoulli(BernoulliModel),
    TopicMixture(TopicMixtureModel),
}

impl DocumentModel {
    pub fn m(&self) -> usize {
        match self {
            DocumentModel::Bernoulli(b) => b.m(),
            DocumentModel::TopicMixture(t) => t.m(),
        }
    }

    /// Document `t` of `n`, from its own substream of `seed`.
    fn document(&self, t: usize, n: usize, seed: u64) -> KeywordSet {
        let mut rng = substream(seed, t as u64);
        match self {
            DocumentModel::Bernoulli(b) => b.draw(&mut rng),
            DocumentModel::TopicMixture(mix) => mix.draw(t, n, &mut rng),
        }
    }
}

impl From<BernoulliModel> for DocumentModel {
    fn from(m: BernoulliModel) -> Self {
        DocumentModel::Bernoulli(m)
    }
}

impl From<TopicMixtureModel> for DocumentModel {
    fn from(m: TopicMixtureModel) -> Self {
        DocumentModel::TopicMixture(m)
    }
}

/// Draws `n` documents; document `t` gets id `doc{t}` and timestamp `t`.
/// Deterministic given `seed` regardless of thread count.
pub fn sample_corpus(model: &DocumentModel, n: usize, seed: u64) -> Corpus {
    let universe = Arc::new(KeywordUniverse::synthetic(model.m()));
    let documents = (0..n)
        .into_par_iter()
        .map(|t| DocumentVector {
            id: format!("doc{t}"),
            timestamp: Some(t as i64),
            membership: model.document(t, n, seed),
        })
        .collect();
    Corpus::new(universe, documents)
}

/// Co-occurrence counts of a sampled corpus without materializing documents.
/// Equal to `cooccurrence_matrix(&sample_corpus(model, n, seed))`.
pub fn sample_cooccurrence(model: &DocumentModel, n: usize, seed: u64) -> CoocMatrix {
    let m = model.m();
    let counts = (0..n)
        .into_par_iter()
        .fold(
            || Array2::<u64>::zeros((m, m)),
            |mut acc, t| {
                let doc = model.document(t, n, seed);
                let ones: Vec<usize> = doc.ones().collect();
                for (a, &i) in ones.iter().enumerate() {
                    for &j in &ones[a..] {
                        acc[[i, j]] += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| Array2::zeros((m, m)), |a, b| a + b);
    CoocMatrix::from_upper(counts, n)
}

/// `p_ij = p_i p_j` off the diagonal and `p_ii = p_i`.
pub fn theoretical_coprob(model: &BernoulliModel) -> Array2<f64> {
    let p = model.probabilities();
    Array2::from_shape_fn((p.len(), p.len()), |(i, j)| if i == j { p[i] } else { p[i] * p[j] })
}
