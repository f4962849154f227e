//! Passive query-recovery attacks and their evaluation.
//!
//! All attacks read the same inputs: a [`LeakageView`] and the attacker's
//! [`CoocMatrix`] over the shared keyword universe.

mod assignment;
mod ihop;
mod score;

use std::collections::BTreeSet;

use thiserror::Error;

pub use assignment::{solve_linear_assignment, Assignment, CostMatrix};
pub use ihop::{ihop_attack, IhopParams};
pub use score::{refined_score_attack, score_attack, DEFAULT_REF_SPEED, SCORE_ETA};

use crate::leakage::GroundTruth;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("no feasible assignment exists")]
    Infeasible,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cost matrix contains NaN or -inf")]
    InvalidCost,
    #[error("the attack needs at least one known query")]
    NoKnownQueries,
    #[error("prediction and ground truth cover different tokens")]
    TokenSetMismatch,
    #[error("no token left to score once known queries are excluded")]
    NoScoredTokens,
    #[error("invalid attack parameter: {0}")]
    InvalidParams(String),
}

/// One predicted keyword per observed token, in the view's query order.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub tokens: Vec<u32>,
    pub keywords: Vec<usize>,
    /// Attack-specific confidence; larger is more confident.
    pub certainty: Vec<f64>,
    /// Tokens whose keyword was given to the attacker up front.
    pub initially_known: BTreeSet<u32>,
}

impl Prediction {
    pub fn keyword(&self, token: u32) -> Option<usize> {
        self.tokens.iter().position(|&t| t == token).map(|i| self.keywords[i])
    }

    pub fn is_injective(&self) -> bool {
        let distinct: BTreeSet<usize> = self.keywords.iter().copied().collect();
        distinct.len() == self.keywords.len()
    }
}

/// Fraction of correctly recovered tokens, skipping initially known tokens
/// when `exclude_known` is set.
pub fn accuracy(pred: &Prediction, truth: &GroundTruth, exclude_known: bool) -> Result<f64, AttackError> {
    let predicted: BTreeSet<u32> = pred.tokens.iter().copied().collect();
    let expected: BTreeSet<u32> = truth.mapping.keys().copied().collect();
    if predicted != expected || predicted.len() != pred.tokens.len() {
        return Err(AttackError::TokenSetMismatch);
    }
    let mut scored = 0usize;
    let mut correct = 0usize;
    for (&token, &kw) in pred.tokens.iter().zip(&pred.keywords) {
        if exclude_known && pred.initially_known.contains(&token) {
            continue;
        }
        scored += 1;
        if truth.keyword(token) == Some(kw) {
            correct += 1;
        }
    }
    if scored == 0 {
        return Err(AttackError::NoScoredTokens);
    }
    Ok(correct as f64 / scored as f64)
}
