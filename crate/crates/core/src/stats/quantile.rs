//! Linear quantile regression and the maximum-index-size bound built on it.

use serde::{Deserialize, Serialize};

use super::{expit, logit, AccuracyPoint, StatsError};

const IRLS_MAX_ITERS: usize = 10_000;
const IRLS_TOL: f64 = 1e-8;

/// `ρ_α(u) = u (α - 1{u < 0})`.
pub fn pinball(u: f64, alpha: f64) -> f64 {
    if u < 0.0 {
        u * (alpha - 1.0)
    } else {
        u * alpha
    }
}

fn total_loss(x: &[f64], y: &[f64], a: f64, b: f64, alpha: f64) -> f64 {
    x.iter().zip(y).map(|(xi, yi)| pinball(yi - a - b * xi, alpha)).sum()
}

/// Size regressor `ln √(1/n_ind + 1/n_atk)`; `None` is an unbounded attacker.
pub fn size_regressor(n_ind: f64, n_atk: Option<f64>) -> f64 {
    0.5 * (1.0 / n_ind + n_atk.map_or(0.0, |n| 1.0 / n)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileFit {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    /// Summed pinball loss at the optimum.
    pub pinball_loss: f64,
    pub n_points: usize,
}

impl QuantileFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a + self.b * x
    }

    /// Accuracy bound `expit(b x + a)` for the given dataset sizes.
    pub fn max_accuracy(&self, n_ind: f64, n_atk: Option<f64>) -> f64 {
        expit(self.predict(size_regressor(n_ind, n_atk)))
    }
}

fn weighted_ls(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        sw += wi;
        sx += wi * xi;
        sy += wi * yi;
        sxx += wi * xi * xi;
        sxy += wi * xi * yi;
    }
    let det = sw * sxx - sx * sx;
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return None;
    }
    let b = (sw * sxy - sx * sy) / det;
    let a = (sy - b * sx) / sw;
    Some((a, b))
}

/// Best line through point `anchor`: the slope minimizing the pinball loss
/// is a weighted quantile of the slopes towards every other point.
fn best_through(x: &[f64], y: &[f64], anchor: usize, alpha: f64) -> Option<(usize, f64, f64)> {
    let (xa, ya) = (x[anchor], y[anchor]);
    // (slope, |dx|, weight once slope < b, weight while slope > b, index)
    let mut slopes: Vec<(f64, f64, f64, usize)> = Vec::with_capacity(x.len());
    let mut below = 0.0;
    for k in 0..x.len() {
        let d = x[k] - xa;
        if d == 0.0 {
            continue;
        }
        let s = (y[k] - ya) / d;
        let (w_pos, w_neg) = if d > 0.0 { (d * (1.0 - alpha), d * alpha) } else { (-d * alpha, -d * (1.0 - alpha)) };
        below -= w_neg;
        slopes.push((s, w_pos, w_neg, k));
    }
    if slopes.is_empty() {
        return None;
    }
    slopes.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.3.cmp(&q.3)));
    // The subgradient at b is Σ_{s<b} w_pos - Σ_{s>b} w_neg; stop where it
    // first turns non-negative.
    let mut g = below;
    for &(s, w_pos, w_neg, k) in &slopes {
        g += w_pos + w_neg;
        if g >= 0.0 {
            return Some((k, ya - s * xa, s));
        }
    }
    let &(s, _, _, k) = slopes.last().expect("non-empty");
    Some((k, ya - s * xa, s))
}

/// Minimizes `Σ ρ_α(y - a - b x)`.
///
/// A smoothed iteratively reweighted least squares run gives a starting
/// line; pivoting between lines through pairs of data points then reaches an
/// exact optimum of the underlying linear program.
pub fn quantile_regression(x: &[f64], y: &[f64], alpha: f64) -> Result<QuantileFit, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: n });
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(StatsError::DegenerateDesign);
    }

    let ones = vec![1.0; n];
    let (mut a, mut b) = weighted_ls(x, y, &ones).ok_or(StatsError::DegenerateDesign)?;
    let spread = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let mut delta = spread;
    let mut w = vec![0.0; n];
    for _ in 0..IRLS_MAX_ITERS {
        for i in 0..n {
            let r = y[i] - a - b * x[i];
            let side = if r >= 0.0 { alpha } else { 1.0 - alpha };
            w[i] = side / r.abs().max(delta);
        }
        let Some((na, nb)) = weighted_ls(x, y, &w) else { break };
        let change = (na - a).abs().max((nb - b).abs());
        a = na;
        b = nb;
        delta = (delta * 0.5).max(1e-12 * spread);
        if change < IRLS_TOL && delta <= 1e-12 * spread {
            break;
        }
    }
    let mut loss = total_loss(x, y, a, b, alpha);

    // Vertex pivoting from the point closest to the smoothed line.
    let anchor = (0..n)
        .min_by(|&i, &j| (y[i] - a - b * x[i]).abs().total_cmp(&(y[j] - a - b * x[j]).abs()))
        .expect("non-empty");
    if let Some((mut pivot, mut va, mut vb)) = best_through(x, y, anchor, alpha) {
        let mut vloss = total_loss(x, y, va, vb, alpha);
        for _ in 0..4 * n {
            let Some((next, na, nb)) = best_through(x, y, pivot, alpha) else { break };
            let nloss = total_loss(x, y, na, nb, alpha);
            if nloss < vloss - 1e-13 * vloss.abs().max(1.0) {
                (pivot, va, vb, vloss) = (next, na, nb, nloss);
            } else {
                break;
            }
        }
        if vloss <= loss {
            (a, b, loss) = (va, vb, vloss);
        }
    }
    Ok(QuantileFit {
        a,
        b,
        alpha,
        pinball_loss: loss,
        n_points: n,
    })
}

/// Quantile regression of `logit(acc)` on `ln √(1/n_ind + 1/n_atk)`.
pub fn fit_quantile_bound(points: &[AccuracyPoint], alpha: f64) -> Result<QuantileFit, StatsError> {
    let mut x = Vec::with_capacity(points.len());
    let mut y = Vec::with_capacity(points.len());
    for p in points.iter().filter(|p| p.n_ind > 0 && p.n_atk > 0) {
        x.push(size_regressor(p.n_ind as f64, Some(p.n_atk as f64)));
        y.push(logit(p.clamped_accuracy())?);
    }
    if x.len() < 10 {
        return Err(StatsError::InsufficientData { needed: 10, got: x.len() });
    }
    quantile_regression(&x, &y, alpha)
}

/// Largest index size `n` with `f̂_MaxAcc(n, n_atk_bound) ≤ beta_max`.
///
/// `None` for `n_atk_bound` means an attacker with unlimited data. The
/// closed-form solution is corrected by direct evaluation so that
/// `f̂(n) ≤ beta_max < f̂(n + 1)` holds for the returned `n`.
pub fn max_index_size(fit: &QuantileFit, beta_max: f64, n_atk_bound: Option<u64>) -> Result<u64, StatsError> {
    if !(fit.b < 0.0) {
        return Err(StatsError::SlopeSignError(fit.b));
    }
    if !(beta_max > 0.0 && beta_max < 1.0) {
        return Err(StatsError::InvalidBeta(beta_max));
    }
    let atk = n_atk_bound.map(|n| n as f64);
    let x_star = (logit(beta_max)? - fit.a) / fit.b;
    let inv_atk = atk.map_or(0.0, |n| 1.0 / n);
    let inv_n = (2.0 * x_star).exp() - inv_atk;
    if !(inv_n > 0.0) {
        return Err(StatsError::NoFiniteBound);
    }
    let approx = 1.0 / inv_n;
    if !(approx < 9.0e15) {
        return Err(StatsError::NoFiniteBound);
    }
    let f = |n: u64| if n == 0 { 0.0 } else { fit.max_accuracy(n as f64, atk) };
    let mut n = approx.floor() as u64;
    while f(n + 1) <= beta_max {
        n += 1;
    }
    while n > 0 && f(n) > beta_max {
        n -= 1;
    }
    Ok(n)
}
