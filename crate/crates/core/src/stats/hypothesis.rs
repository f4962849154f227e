//! Two-proportion tests on co-occurrence counts and the dominance
//! Monte-Carlo experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{two_sided_pvalue, StatsError};
use crate::cooc::{similarity_report, CoocMatrix};
use crate::rng::derive_seed;
use crate::synth::{sample_cooccurrence, BernoulliModel, DocumentModel};

/// Thresholds reported in [`ShiftTestReport::reject_at`].
pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.05, 0.01, 0.001];

/// Pooled two-sided z-test for `x1/n1 = x2/n2`.
pub fn two_proportion_ztest(x1: u64, n1: u64, x2: u64, n2: u64) -> Result<f64, StatsError> {
    if n1 == 0 || n2 == 0 || x1 > n1 || x2 > n2 {
        return Err(StatsError::InvalidCounts { x1, n1, x2, n2 });
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    if pooled == 0.0 || pooled == 1.0 {
        return Ok(1.0);
    }
    let diff = x1 as f64 / n1f - x2 as f64 / n2f;
    if diff == 0.0 {
        return Ok(1.0);
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    Ok(two_sided_pvalue(diff / se))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub threshold: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftTestReport {
    pub m: usize,
    /// `pv_ij` for `i ≤ j`, row-major over the upper triangle.
    pub pvalues: Vec<f64>,
    pub min_pvalue: f64,
    /// `m(m+1)/2 · min pv_ij`, not capped at 1.
    pub corrected_pvalue: f64,
    pub reject_at: Vec<Rejection>,
}

impl ShiftTestReport {
    pub fn pvalue(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // rows before i hold m + (m-1) + ... + (m-i+1) entries
        let offset = i * self.m - i * (i.saturating_sub(1)) / 2;
        self.pvalues[offset + (j - i)]
    }
}

/// Bonferroni-corrected test that every co-probability is equal in the two
/// datasets.
pub fn bonferroni_coprob_test(c_ind: &CoocMatrix, c_atk: &CoocMatrix) -> Result<ShiftTestReport, StatsError> {
    let m = c_ind.m();
    if m != c_atk.m() {
        return Err(StatsError::DimensionMismatch(m, c_atk.m()));
    }
    let (n1, n2) = (c_ind.n() as u64, c_atk.n() as u64);
    let pvalues: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            (i..m)
                .map(|j| two_proportion_ztest(c_ind.get(i, j), n1, c_atk.get(i, j), n2))
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let min_pvalue = pvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let corrected_pvalue = (m * (m + 1) / 2) as f64 * min_pvalue;
    Ok(ShiftTestReport {
        m,
        pvalues,
        min_pvalue,
        corrected_pvalue,
        reject_at: DEFAULT_THRESHOLDS
            .iter()
            .map(|&threshold| Rejection {
                threshold,
                rejected: corrected_pvalue < threshold,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceResult {
    /// ε between two samples of the index model.
    pub eps_equal: Vec<f64>,
    /// ε between a sample of the index model and one of the attacker model.
    pub eps_unequal: Vec<f64>,
    /// `sup_x [CDF_unequal(x) - CDF_equal(x)]` over the pooled samples.
    pub violation: f64,
}

fn ecdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

/// Largest amount by which the empirical CDF of `upper` exceeds that of
/// `lower` at any pooled sample point.
pub fn cdf_violation(lower: &[f64], upper: &[f64]) -> f64 {
    let mut l = lower.to_vec();
    let mut u = upper.to_vec();
    l.sort_by(f64::total_cmp);
    u.sort_by(f64::total_cmp);
    l.iter()
        .chain(&u)
        .map(|&x| ecdf(&u, x) - ecdf(&l, x))
        .fold(0.0, f64::max)
}

/// Monte-Carlo comparison of ε when both datasets share a model against ε
/// when the attacker's model differs.
pub fn dominance_experiment(
    model_ind: &BernoulliModel,
    model_atk: &BernoulliModel,
    n_ind: usize,
    n_atk: usize,
    reps: usize,
    seed: u64,
) -> Result<DominanceResult, StatsError> {
    if reps < 100 {
        return Err(StatsError::TooFewReps(reps, 100));
    }
    if model_ind.m() != model_atk.m() {
        return Err(StatsError::DimensionMismatch(model_ind.m(), model_atk.m()));
    }
    let ind = DocumentModel::Bernoulli(model_ind.clone());
    let atk = DocumentModel::Bernoulli(model_atk.clone());
    let pairs: Vec<(f64, f64)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let base = sample_cooccurrence(&ind, n_ind, derive_seed(seed, 3 * r));
            let same = sample_cooccurrence(&ind, n_atk, derive_seed(seed, 3 * r + 1));
            let other = sample_cooccurrence(&atk, n_atk, derive_seed(seed, 3 * r + 2));
            let eps = |c: &CoocMatrix| similarity_report(&base, c).map(|s| s.epsilon).unwrap_or(f64::NAN);
            (eps(&same), eps(&other))
        })
        .collect();
    let (eps_equal, eps_unequal): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let violation = cdf_violation(&eps_equal, &eps_unequal);
    Ok(DominanceResult {
        eps_equal,
        eps_unequal,
        violation,
    })
}
