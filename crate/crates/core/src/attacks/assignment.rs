//! Rectangular linear assignment by shortest augmenting paths with dual
//! potentials (Hungarian / Jonker-Volgenant family), `O(rows^2 * cols)`.

use ndarray::Array2;

use super::AttackError;

/// Costs of assigning each row (query) to each column (keyword).
/// `+inf` forbids a pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    costs: Array2<f64>,
}

impl CostMatrix {
    pub fn new(costs: Array2<f64>) -> Result<Self, AttackError> {
        if costs.nrows() > costs.ncols() {
            return Err(AttackError::DimensionMismatch(format!(
                "{} rows exceed {} columns",
                costs.nrows(),
                costs.ncols()
            )));
        }
        if costs.iter().any(|c| c.is_nan() || *c == f64::NEG_INFINITY) {
            return Err(AttackError::InvalidCost);
        }
        Ok(Self { costs })
    }

    pub fn rows(&self) -> usize {
        self.costs.nrows()
    }

    pub fn cols(&self) -> usize {
        self.costs.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.costs[[row, col]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub cols: Vec<usize>,
    /// Sum of the assigned costs, accumulated in row order.
    pub cost: f64,
}

/// Minimum-cost injective assignment of rows to columns.
///
/// Ties between equally reduced columns go to the lowest column index during
/// each path search, so the result is deterministic.
pub fn solve_linear_assignment(costs: &CostMatrix) -> Result<Assignment, AttackError> {
    let n = costs.rows();
    let m = costs.cols();
    if n == 0 {
        return Ok(Assignment {
            cols: Vec::new(),
            cost: 0.0,
        });
    }
    let inf = f64::INFINITY;
    // 1-based; index 0 is the virtual source row/column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![inf; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|x| *x = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = costs.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 {
                return Err(AttackError::Infeasible);
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut cols = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            cols[p[j] - 1] = j - 1;
        }
    }
    let cost = cols.iter().enumerate().map(|(r, &c)| costs.get(r, c)).sum();
    Ok(Assignment { cols, cost })
}
