//! Regression and hypothesis-testing toolkit for attack-accuracy data.
//!
//! Accuracies live in logit space and similarities in log space; see
//! [`fit_accuracy_function`] and [`fit_quantile_bound`].

mod hypothesis;
mod quantile;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

pub use hypothesis::{
    bonferroni_coprob_test, dominance_experiment, two_proportion_ztest, DominanceResult, ShiftTestReport,
};
pub use quantile::{fit_quantile_bound, max_index_size, pinball, quantile_regression, size_regressor, QuantileFit};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("logit argument {0} is outside (0, 1)")]
    Domain(f64),
    #[error("regressor has no spread")]
    DegenerateDesign,
    #[error("need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("quantile level {0} is outside (0, 1)")]
    InvalidAlpha(f64),
    #[error("accuracy target {0} is outside (0, 1)")]
    InvalidBeta(f64),
    #[error("the accuracy bound never reaches the target; no finite index size")]
    NoFiniteBound,
    #[error("fitted slope {0} is not negative")]
    SlopeSignError(f64),
    #[error("invalid counts {x1}/{n1} vs {x2}/{n2}")]
    InvalidCounts { x1: u64, n1: u64, x2: u64, n2: u64 },
    #[error("matrices have {0} and {1} keywords")]
    DimensionMismatch(usize, usize),
    #[error("{0} must be at least {1}")]
    TooFewReps(usize, usize),
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

pub fn logit(p: f64) -> Result<f64, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::Domain(p));
    }
    Ok((p / (1.0 - p)).ln())
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Standard normal upper tail `1 - Φ(z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Two-sided normal p-value `2 (1 - Φ(|z|))`.
pub fn two_sided_pvalue(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// One attack run reduced to what the regressions need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub epsilon: f64,
    pub n_ind: usize,
    pub n_atk: usize,
    pub accuracy: f64,
    /// Number of queries the accuracy was measured on.
    pub scored: usize,
    pub attack: String,
    pub seed: u64,
}

impl AccuracyPoint {
    /// Accuracy clamped to `[1/(2l), 1 - 1/(2l)]`, `l` the scored count.
    pub fn clamped_accuracy(&self) -> f64 {
        clamp_accuracy(self.accuracy, self.scored)
    }
}

pub fn clamp_accuracy(accuracy: f64, scored: usize) -> f64 {
    let half = 0.5 / scored.max(1) as f64;
    accuracy.clamp(half, 1.0 - half)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Intercept.
    pub a: f64,
    /// Slope.
    pub b: f64,
    pub se_a: f64,
    pub se_b: f64,
    pub r2: f64,
    pub n_points: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a + self.b * x
    }

    /// Average accuracy at similarity `epsilon`: `expit(b ln ε + a)`.
    pub fn accuracy_at(&self, epsilon: f64) -> f64 {
        expit(self.predict(epsilon.ln()))
    }
}

/// Ordinary least squares of `y` on `x` with classical standard errors.
/// `r2` is 1 for an exact fit of a constant response.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::InsufficientData { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(StatsError::DegenerateDesign);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sigma2 = sse / (nf - 2.0);
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok(LinearFit {
        a,
        b,
        se_a: (sigma2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        se_b: (sigma2 / sxx).sqrt(),
        r2,
        n_points: n,
    })
}

/// Points usable in log-similarity space: `ε > 0` and finite.
pub fn usable_points(points: &[AccuracyPoint]) -> impl Iterator<Item = &AccuracyPoint> {
    points.iter().filter(|p| p.epsilon > 0.0 && p.epsilon.is_finite())
}

/// OLS of `logit(acc)` on `ln ε`; points with `ε = 0` are skipped.
pub fn fit_accuracy_function(points: &[AccuracyPoint]) -> Result<LinearFit, StatsError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for p in usable_points(points) {
        x.push(p.epsilon.ln());
        y.push(logit(p.clamped_accuracy())?);
    }
    ols(&x, &y)
}

/// Two-sided z-tests for equal slopes and equal intercepts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitComparison {
    pub z_a: f64,
    pub pvalue_a: f64,
    pub z_b: f64,
    pub pvalue_b: f64,
}

pub fn compare_fits(f1: &LinearFit, f2: &LinearFit) -> FitComparison {
    let z = |d: f64, s1: f64, s2: f64| {
        let se = (s1 * s1 + s2 * s2).sqrt();
        if d == 0.0 {
            0.0
        } else if se > 0.0 {
            d / se
        } else {
            d.signum() * f64::INFINITY
        }
    };
    let z_a = z(f1.a - f2.a, f1.se_a, f2.se_a);
    let z_b = z(f1.b - f2.b, f1.se_b, f2.se_b);
    FitComparison {
        z_a,
        pvalue_a: two_sided_pvalue(z_a),
        z_b,
        pvalue_b: two_sided_pvalue(z_b),
    }
}

/// Average ranks, ties sharing the mean of their positions (1-based).
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation; NaN when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: x.len() });
    }
    Ok(pearson(&ranks(x), &ranks(y)))
}
