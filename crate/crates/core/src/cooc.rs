//! Keyword co-occurrence counts, co-frequency estimators and the similarity
//! matrix between two datasets.

use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Corpus, KeywordUniverse};

/// Default ceiling on the universe size for dense matrices.
pub const DEFAULT_MAX_KEYWORDS: usize = 3000;

#[derive(Debug, Error, PartialEq)]
pub enum CoocError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("matrix dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("co-occurrence counts violate symmetry or marginal bounds")]
    InvalidCounts,
}

/// Symmetric `m x m` document co-occurrence counts over a dataset of `n` documents.
/// The diagonal holds per-keyword document counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoocMatrix {
    counts: Array2<u64>,
    n: usize,
}

impl CoocMatrix {
    /// Validates symmetry, `c_ij <= min(c_ii, c_jj)` and `c_ii <= n`.
    pub fn new(counts: Array2<u64>, n: usize) -> Result<Self, CoocError> {
        let m = counts.nrows();
        if counts.ncols() != m {
            return Err(CoocError::DimensionMismatch(m, counts.ncols()));
        }
        for i in 0..m {
            if counts[[i, i]] > n as u64 {
                return Err(CoocError::InvalidCounts);
            }
            for j in 0..m {
                let c = counts[[i, j]];
                if c != counts[[j, i]] || c > counts[[i, i]].min(counts[[j, j]]) {
                    return Err(CoocError::InvalidCounts);
                }
            }
        }
        Ok(Self { counts, n })
    }

    /// Mirrors the upper triangle (diagonal included) into the lower one.
    pub(crate) fn from_upper(mut counts: Array2<u64>, n: usize) -> Self {
        let m = counts.nrows();
        for i in 0..m {
            for j in 0..i {
                counts[[i, j]] = counts[[j, i]];
            }
        }
        Self { counts, n }
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn m(&self) -> usize {
        self.counts.nrows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[[i, j]]
    }

    /// Writes the counts row-major with the keyword list as header.
    pub fn write_csv<W: Write>(&self, universe: &KeywordUniverse, writer: W) -> csv::Result<()> {
        write_matrix_csv(universe, self.counts.view().mapv(|c| c.to_string()), writer)
    }
}

fn write_matrix_csv<W: Write>(
    universe: &KeywordUniverse,
    cells: Array2<String>,
    writer: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(universe.keywords())?;
    for row in cells.rows() {
        w.write_record(row.iter())?;
    }
    w.flush()?;
    Ok(())
}

/// `C_ij` = number of documents containing both keyword `i` and keyword `j`.
pub fn cooccurrence_matrix(corpus: &Corpus) -> CoocMatrix {
    let m = corpus.m();
    let counts = corpus
        .documents()
        .par_iter()
        .fold(
            || Array2::<u64>::zeros((m, m)),
            |mut acc, doc| {
                let ones: Vec<usize> = doc.membership.ones().collect();
                for (a, &i) in ones.iter().enumerate() {
                    for &j in &ones[a..] {
                        acc[[i, j]] += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| Array2::zeros((m, m)), |a, b| a + b);
    CoocMatrix::from_upper(counts, corpus.n())
}

/// Co-frequencies `C / n`, the maximum-likelihood estimates of the co-probabilities.
pub fn cofrequency(c: &CoocMatrix) -> Result<Array2<f64>, CoocError> {
    if c.n == 0 {
        return Err(CoocError::EmptyDataset);
    }
    let n = c.n as f64;
    Ok(c.counts.mapv(|x| x as f64 / n))
}

/// Difference of co-frequency matrices with its Frobenius norm (`epsilon`)
/// and its largest absolute entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub sim_matrix: Array2<f64>,
    pub epsilon: f64,
    pub abs_distance: f64,
}

impl SimilarityReport {
    pub fn write_csv<W: Write>(&self, universe: &KeywordUniverse, writer: W) -> csv::Result<()> {
        write_matrix_csv(
            universe,
            self.sim_matrix.mapv(|v| format!("{v:.16e}")),
            writer,
        )
    }
}

/// `SimMat = C_ind / n_ind - C_atk / n_atk`; epsilon sums over the full matrix.
pub fn similarity_report(c_ind: &CoocMatrix, c_atk: &CoocMatrix) -> Result<SimilarityReport, CoocError> {
    if c_ind.m() != c_atk.m() {
        return Err(CoocError::DimensionMismatch(c_ind.m(), c_atk.m()));
    }
    let sim_matrix = cofrequency(c_ind)? - cofrequency(c_atk)?;
    let epsilon = sim_matrix.iter().map(|v| v * v).sum::<f64>().sqrt();
    let abs_distance = sim_matrix.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    Ok(SimilarityReport {
        sim_matrix,
        epsilon,
        abs_distance,
    })
}
