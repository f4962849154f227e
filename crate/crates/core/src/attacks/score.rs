//! Score and Refined Score attacks.
//!
//! Each query is described by its co-frequencies with the known queries and
//! each keyword by its co-frequencies with the known keywords; a query is
//! matched to the keyword maximizing `-ln(‖v_q - u_w‖ + η)`.

use std::collections::BTreeSet;

use super::{AttackError, Prediction};
use crate::cooc::CoocMatrix;
use crate::leakage::LeakageView;

/// Offset inside the logarithm so exact matches score finitely.
pub const SCORE_ETA: f64 = 1e-12;

/// Number of queries promoted to the known set per refinement round.
pub const DEFAULT_REF_SPEED: usize = 10;

fn ratio(count: u64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        count as f64 / n as f64
    }
}

/// Squared distances between unknown query vectors and every keyword vector,
/// grown one known pair at a time.
struct ScoreState<'a> {
    view: &'a LeakageView,
    c_atk: &'a CoocMatrix,
    /// Query positions still unknown, in view order.
    unknown: Vec<usize>,
    /// `dist2[i][w]` for `unknown[i]`.
    dist2: Vec<Vec<f64>>,
}

struct Best {
    keyword: usize,
    certainty: f64,
}

impl<'a> ScoreState<'a> {
    fn new(view: &'a LeakageView, c_atk: &'a CoocMatrix, known: &[(usize, usize)]) -> Self {
        let known_pos: BTreeSet<usize> = known.iter().map(|&(q, _)| q).collect();
        let unknown: Vec<usize> = (0..view.l()).filter(|q| !known_pos.contains(q)).collect();
        let dist2 = vec![vec![0.0; c_atk.m()]; unknown.len()];
        let mut state = Self {
            view,
            c_atk,
            unknown,
            dist2,
        };
        for &(q, kw) in known {
            state.add_known(q, kw);
        }
        state
    }

    fn add_known(&mut self, qpos: usize, kw: usize) {
        let n_ind = self.view.n_ind();
        let n_atk = self.c_atk.n();
        let keyword_side: Vec<f64> = (0..self.c_atk.m()).map(|w| ratio(self.c_atk.get(w, kw), n_atk)).collect();
        for (row, &q) in self.dist2.iter_mut().zip(&self.unknown) {
            let query_side = ratio(self.view.qcooc()[[q, qpos]], n_ind);
            for (d, &u) in row.iter_mut().zip(&keyword_side) {
                let diff = query_side - u;
                *d += diff * diff;
            }
        }
    }

    fn best(&self, i: usize) -> Best {
        let mut best = (0usize, f64::NEG_INFINITY);
        let mut second = f64::NEG_INFINITY;
        for (w, &d2) in self.dist2[i].iter().enumerate() {
            let score = -(d2.sqrt() + SCORE_ETA).ln();
            if score > best.1 {
                second = best.1;
                best = (w, score);
            } else if score > second {
                second = score;
            }
        }
        Best {
            keyword: best.0,
            certainty: best.1 - second,
        }
    }

    fn remove(&mut self, positions: &BTreeSet<usize>) {
        let mut kept_unknown = Vec::with_capacity(self.unknown.len());
        let mut kept_dist = Vec::with_capacity(self.unknown.len());
        for (q, row) in self.unknown.drain(..).zip(self.dist2.drain(..)) {
            if !positions.contains(&q) {
                kept_unknown.push(q);
                kept_dist.push(row);
            }
        }
        self.unknown = kept_unknown;
        self.dist2 = kept_dist;
    }
}

fn known_positions(view: &LeakageView, c_atk: &CoocMatrix) -> Result<Vec<(usize, usize)>, AttackError> {
    if view.known().is_empty() {
        return Err(AttackError::NoKnownQueries);
    }
    view.known()
        .iter()
        .map(|&(token, kw)| {
            if kw >= c_atk.m() {
                return Err(AttackError::DimensionMismatch(format!(
                    "known keyword {kw} outside a universe of {}",
                    c_atk.m()
                )));
            }
            let q = view.position(token).ok_or(AttackError::TokenSetMismatch)?;
            Ok((q, kw))
        })
        .collect()
}

fn empty_prediction(view: &LeakageView) -> (Vec<usize>, Vec<f64>, Prediction) {
    let l = view.l();
    let pred = Prediction {
        tokens: view.queries().to_vec(),
        keywords: vec![0; l],
        certainty: vec![f64::INFINITY; l],
        initially_known: view.known().iter().map(|&(t, _)| t).collect(),
    };
    (vec![0; l], vec![f64::INFINITY; l], pred)
}

/// Score attack; known tokens keep their known keyword.
pub fn score_attack(view: &LeakageView, c_atk: &CoocMatrix) -> Result<Prediction, AttackError> {
    refined_score_attack(view, c_atk, usize::MAX)
}

/// Refined Score attack: repeatedly runs the score attack and promotes the
/// `ref_speed` most certain predictions to known queries until none remain.
pub fn refined_score_attack(
    view: &LeakageView,
    c_atk: &CoocMatrix,
    ref_speed: usize,
) -> Result<Prediction, AttackError> {
    if ref_speed == 0 {
        return Err(AttackError::InvalidParams("ref_speed must be at least 1".into()));
    }
    let known = known_positions(view, c_atk)?;
    let (mut keywords, mut certainty, mut pred) = empty_prediction(view);
    for &(q, kw) in &known {
        keywords[q] = kw;
    }

    let mut state = ScoreState::new(view, c_atk, &known);
    while !state.unknown.is_empty() {
        let round: Vec<(usize, Best)> = (0..state.unknown.len())
            .map(|i| (state.unknown[i], state.best(i)))
            .collect();
        if round.len() <= ref_speed {
            for (q, best) in round {
                keywords[q] = best.keyword;
                certainty[q] = best.certainty;
            }
            break;
        }
        let mut order: Vec<usize> = (0..round.len()).collect();
        order.sort_by(|&a, &b| round[b].1.certainty.total_cmp(&round[a].1.certainty).then(a.cmp(&b)));
        let promoted: Vec<(usize, usize)> = order[..ref_speed]
            .iter()
            .map(|&i| (round[i].0, round[i].1.keyword))
            .collect();
        for &i in &order[..ref_speed] {
            let (q, ref best) = round[i];
            keywords[q] = best.keyword;
            certainty[q] = best.certainty;
        }
        state.remove(&promoted.iter().map(|&(q, _)| q).collect());
        for (q, kw) in promoted {
            state.add_known(q, kw);
        }
    }

    pred.keywords = keywords;
    pred.certainty = certainty;
    Ok(pred)
}
