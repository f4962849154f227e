//! Distribution-shift report: temporal splits against uniform splits of the
//! same sizes.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::write_json_file;
use super::sweep::format_float;
use super::{run_trial, AttackSpec, RunnerError};
use crate::cooc::cooccurrence_matrix;
use crate::corpus::Corpus;
use crate::rng::derive_seed;
use crate::split::{split_temporal, split_uniform, SplitPair};
use crate::stats::bonferroni_coprob_test;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    pub cutoffs: Vec<i64>,
    /// Uniform splits per cutoff, each with the temporal split's sizes.
    pub uniform_reps: usize,
    pub attack: AttackSpec,
    pub k: usize,
    pub l: usize,
    pub padding_g: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    /// `temporal` or `uniform`.
    pub mode: String,
    pub cutoff: i64,
    pub rep: usize,
    pub n_atk: usize,
    pub n_ind: usize,
    pub epsilon: f64,
    pub accuracy: f64,
    pub corrected_pvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub avg: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut sum, mut n, mut min, mut max) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            sum += v;
            n += 1;
            min = min.min(v);
            max = max.max(v);
        }
        Self {
            avg: sum / n as f64,
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSummary {
    pub cutoff: i64,
    pub reps: usize,
    pub epsilon: Summary,
    pub accuracy: Summary,
    pub corrected_pvalue: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub attack: String,
    pub temporal: Vec<ShiftRow>,
    pub uniform: Vec<ShiftRow>,
    pub uniform_summary: Vec<ShiftSummary>,
}

fn evaluate(
    pair: &SplitPair,
    cfg: &ShiftConfig,
    mode: &str,
    cutoff: i64,
    rep: usize,
    seed: u64,
) -> Result<ShiftRow, RunnerError> {
    let outcome = run_trial(
        &pair.atk,
        &pair.ind,
        std::slice::from_ref(&cfg.attack),
        cfg.k,
        cfg.l,
        cfg.padding_g,
        seed,
    )?;
    let test = bonferroni_coprob_test(&cooccurrence_matrix(&pair.ind), &cooccurrence_matrix(&pair.atk))?;
    Ok(ShiftRow {
        mode: mode.to_string(),
        cutoff,
        rep,
        n_atk: pair.atk.n(),
        n_ind: pair.ind.n(),
        epsilon: outcome.epsilon,
        accuracy: outcome.accuracies[0].2,
        corrected_pvalue: test.corrected_pvalue,
    })
}

/// For each cutoff: one temporal split, then `uniform_reps` uniform splits
/// with the same attacker and index sizes.
pub fn shift_report(corpus: &Corpus, cfg: &ShiftConfig) -> Result<ShiftReport, RunnerError> {
    if cfg.cutoffs.is_empty() {
        return Err(RunnerError::Config("no cutoffs given".into()));
    }
    let mut temporal = Vec::new();
    let mut uniform = Vec::new();
    let mut uniform_summary = Vec::new();
    for (ci, &cutoff) in cfg.cutoffs.iter().enumerate() {
        let base = derive_seed(cfg.seed, ci as u64);
        let pair = split_temporal(corpus, cutoff)?;
        temporal.push(evaluate(&pair, cfg, "temporal", cutoff, 0, derive_seed(base, 0))?);
        let (n_atk, n_ind) = (pair.atk.n(), pair.ind.n());
        let rows: Vec<ShiftRow> = (0..cfg.uniform_reps)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(base, rep as u64 + 1);
                let pair = split_uniform(corpus, n_atk, n_ind, derive_seed(seed, 0))?;
                evaluate(&pair, cfg, "uniform", cutoff, rep, seed)
            })
            .collect::<Result<_, RunnerError>>()?;
        if !rows.is_empty() {
            uniform_summary.push(ShiftSummary {
                cutoff,
                reps: rows.len(),
                epsilon: Summary::of(rows.iter().map(|r| r.epsilon)),
                accuracy: Summary::of(rows.iter().map(|r| r.accuracy)),
                corrected_pvalue: Summary::of(rows.iter().map(|r| r.corrected_pvalue)),
            });
        }
        uniform.extend(rows);
    }
    Ok(ShiftReport {
        attack: cfg.attack.name().to_string(),
        temporal,
        uniform,
        uniform_summary,
    })
}

/// Writes `shift.json` and `shift.csv` into `dir`.
pub fn write_shift_outputs(report: &ShiftReport, dir: &Path) -> Result<(), RunnerError> {
    fs::create_dir_all(dir)?;
    write_json_file(report, &dir.join("shift.json"))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("shift.csv"))?));
    w.write_record([
        "mode",
        "cutoff",
        "rep",
        "n_atk",
        "n_ind",
        "epsilon",
        "accuracy",
        "corrected_pvalue",
    ])?;
    for r in report.temporal.iter().chain(&report.uniform) {
        w.write_record([
            r.mode.clone(),
            r.cutoff.to_string(),
            r.rep.to_string(),
            r.n_atk.to_string(),
            r.n_ind.to_string(),
            format_float(r.epsilon),
            format_float(r.accuracy),
            format_float(r.corrected_pvalue),
        ])?;
    }
    w.flush()?;
    Ok(())
}
