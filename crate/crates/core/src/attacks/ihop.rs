//! IHOP adapted to access-pattern leakage: maximizes the binomial
//! log-likelihood of the observed query volumes and co-occurrences under the
//! attacker's smoothed co-frequencies, by iterated partial re-assignment.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::assignment::{solve_linear_assignment, CostMatrix};
use super::{AttackError, Prediction};
use crate::cooc::CoocMatrix;
use crate::leakage::LeakageView;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IhopParams {
    pub n_iters: usize,
    /// Fraction of tokens re-assigned per iteration.
    pub p_free: f64,
    /// Laplace smoothing constant added to attacker counts.
    pub smoothing: f64,
}

impl Default for IhopParams {
    fn default() -> Self {
        Self {
            n_iters: 500,
            p_free: 0.25,
            smoothing: 1.0,
        }
    }
}

impl IhopParams {
    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.p_free > 0.0 && self.p_free <= 1.0) {
            return Err(AttackError::InvalidParams(format!("p_free {} outside (0, 1]", self.p_free)));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(AttackError::InvalidParams(format!("smoothing {} must be positive", self.smoothing)));
        }
        Ok(())
    }
}

/// Negative log-likelihood tables.
struct Model {
    /// `-ln p̂_{w,w'}`.
    neg_ln_p: Array2<f64>,
    /// `-ln(1 - p̂_{w,w'})`.
    neg_ln_q: Array2<f64>,
    n_ind: f64,
}

impl Model {
    fn new(c_atk: &CoocMatrix, n_ind: usize, s: f64) -> Self {
        let denom = c_atk.n() as f64 + 2.0 * s;
        let p = c_atk.counts().mapv(|c| (c as f64 + s) / denom);
        Self {
            neg_ln_p: p.mapv(|x| -x.ln()),
            neg_ln_q: p.mapv(|x| -(1.0 - x).ln()),
            n_ind: n_ind as f64,
        }
    }

    /// Cost of observing `count` matches out of `n_ind` for keyword pair (w, w').
    fn cost(&self, count: u64, w: usize, w2: usize) -> f64 {
        let c = count as f64;
        c * self.neg_ln_p[[w, w2]] + (self.n_ind - c) * self.neg_ln_q[[w, w2]]
    }
}

/// Runs IHOP. Known pairs in the view are fixed for the whole run.
pub fn ihop_attack(
    view: &LeakageView,
    c_atk: &CoocMatrix,
    params: &IhopParams,
    seed: u64,
) -> Result<Prediction, AttackError> {
    params.validate()?;
    let l = view.l();
    let m = c_atk.m();
    if l > m {
        return Err(AttackError::Infeasible);
    }
    let qcooc = view.qcooc();
    let model = Model::new(c_atk, view.n_ind(), params.smoothing);

    let mut assigned: Vec<Option<usize>> = vec![None; l];
    let mut fixed_forever = BTreeSet::new();
    for &(token, kw) in view.known() {
        let q = view.position(token).ok_or(AttackError::TokenSetMismatch)?;
        if kw >= m {
            return Err(AttackError::DimensionMismatch(format!("known keyword {kw} outside {m}")));
        }
        assigned[q] = Some(kw);
        fixed_forever.insert(q);
    }
    let movable: Vec<usize> = (0..l).filter(|q| !fixed_forever.contains(q)).collect();

    let marginal = |q: usize, w: usize| model.cost(qcooc[[q, q]], w, w);

    // Initial assignment from volumes only.
    let used: BTreeSet<usize> = assigned.iter().flatten().copied().collect();
    let free_kw: Vec<usize> = (0..m).filter(|w| !used.contains(w)).collect();
    assign(&movable, &free_kw, &mut assigned, marginal)?;

    let mut rng = rng_from_seed(seed);
    // A single free token can only take back its own keyword once every
    // keyword is used, so at least two are freed per round.
    let n_free = ((params.p_free * l as f64).ceil() as usize).max(2).min(movable.len());
    for _ in 0..params.n_iters {
        if movable.is_empty() {
            break;
        }
        let mut free: Vec<usize> = index::sample(&mut rng, movable.len(), n_free)
            .into_iter()
            .map(|i| movable[i])
            .collect();
        free.sort_unstable();
        let free_set: BTreeSet<usize> = free.iter().copied().collect();
        let fixed: Vec<(usize, usize)> = (0..l)
            .filter(|q| !free_set.contains(q))
            .map(|q| (q, assigned[q].expect("every token is assigned")))
            .collect();
        let taken: BTreeSet<usize> = fixed.iter().map(|&(_, w)| w).collect();
        let candidates: Vec<usize> = (0..m).filter(|w| !taken.contains(w)).collect();
        assign(&free, &candidates, &mut assigned, |q, w| {
            marginal(q, w)
                + fixed
                    .iter()
                    .map(|&(q2, w2)| model.cost(qcooc[[q, q2]], w, w2))
                    .sum::<f64>()
        })?;
    }

    let keywords: Vec<usize> = assigned.into_iter().map(|a| a.expect("assigned")).collect();
    // Certainty: log-likelihood of each token's pairing given all others.
    let certainty = (0..l)
        .map(|q| {
            let own = marginal(q, keywords[q]);
            let pairs: f64 = (0..l)
                .filter(|&q2| q2 != q)
                .map(|q2| model.cost(qcooc[[q, q2]], keywords[q], keywords[q2]))
                .sum();
            -(own + pairs)
        })
        .collect();
    Ok(Prediction {
        tokens: view.queries().to_vec(),
        keywords,
        certainty,
        initially_known: view.known().iter().map(|&(t, _)| t).collect(),
    })
}

fn assign(
    rows: &[usize],
    cols: &[usize],
    assigned: &mut [Option<usize>],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<(), AttackError> {
    if rows.is_empty() {
        return Ok(());
    }
    if rows.len() > cols.len() {
        return Err(AttackError::Infeasible);
    }
    let matrix = Array2::from_shape_fn((rows.len(), cols.len()), |(r, c)| cost(rows[r], cols[c]));
    let solution = solve_linear_assignment(&CostMatrix::new(matrix)?)?;
    for (r, &c) in solution.cols.iter().enumerate() {
        assigned[rows[r]] = Some(cols[c]);
    }
    Ok(())
}
