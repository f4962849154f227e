//! Simulation toolkit for leakage-abuse attacks against searchable symmetric
//! encryption, measuring how attack accuracy depends on the statistical
//! similarity between the attacker's data and the indexed data.

// `!(x > 0.0)` is used on purpose so that NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod cooc;
pub mod corpus;
pub mod fixtures;
pub mod leakage;
pub mod rng;
pub mod split;
pub mod synth;
pub mod stats;
pub mod runner;
