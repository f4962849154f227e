//! Seeded sweeps over the dataset-size grid.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AttackSpec, ExperimentConfig, RunnerError, SplitSpec};
use crate::attacks::{accuracy, ihop_attack, refined_score_attack, score_attack};
use crate::cooc::{cooccurrence_matrix, similarity_report};
use crate::corpus::Corpus;
use crate::leakage::{build_index, observe_queries, select_known_queries};
use crate::rng::{derive_seed, rng_from_seed};
use crate::split::{split_temporal, split_uniform};

/// Column order of the results file.
pub const RESULT_HEADER: [&str; 13] = [
    "run_id",
    "dataset_label",
    "m",
    "n_ind",
    "n_atk",
    "seed",
    "epsilon",
    "abs_distance",
    "attack",
    "k",
    "l",
    "padding_g",
    "accuracy",
];

/// One attack evaluated in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: usize,
    pub dataset_label: String,
    pub m: usize,
    pub n_ind: usize,
    pub n_atk: usize,
    /// Seed of the run; every random choice in it derives from this value.
    pub seed: u64,
    pub epsilon: f64,
    pub abs_distance: f64,
    pub attack: String,
    pub k: usize,
    pub l: usize,
    pub padding_g: usize,
    pub accuracy: f64,
}

impl ResultRow {
    pub fn to_point(&self) -> crate::stats::AccuracyPoint {
        crate::stats::AccuracyPoint {
            epsilon: self.epsilon,
            n_ind: self.n_ind,
            n_atk: self.n_atk,
            accuracy: self.accuracy,
            scored: self.l - self.k,
            attack: self.attack.clone(),
            seed: self.seed,
        }
    }
}

/// Seed-stream slots inside one run.
const SLOT_SPLIT: u64 = 0;
const SLOT_INDEX: u64 = 1;
const SLOT_QUERIES: u64 = 2;
const SLOT_KNOWN: u64 = 3;
const SLOT_ATTACK: u64 = 16;

/// Everything measured on one attacker/index pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub epsilon: f64,
    pub abs_distance: f64,
    /// `(attack name, k, accuracy)` in configured attack order.
    pub accuracies: Vec<(&'static str, usize, f64)>,
}

/// Builds the index over `ind`, observes `l` queries and runs every attack
/// with the attacker's view of `atk`. All attacks share the same leakage.
pub fn run_trial(
    atk: &Corpus,
    ind: &Corpus,
    attacks: &[AttackSpec],
    default_k: usize,
    l: usize,
    padding_g: usize,
    seed: u64,
) -> Result<TrialOutcome, RunnerError> {
    let c_atk = cooccurrence_matrix(atk);
    let c_ind = cooccurrence_matrix(ind);
    let sim = similarity_report(&c_ind, &c_atk)?;
    let index = build_index(ind, derive_seed(seed, SLOT_INDEX), padding_g)?;
    let (view, truth) = observe_queries(&index, l, derive_seed(seed, SLOT_QUERIES))?;
    let mut accuracies = Vec::with_capacity(attacks.len());
    for (i, attack) in attacks.iter().enumerate() {
        let k = attack.known(default_k);
        let view = select_known_queries(&view, &truth, k, derive_seed(seed, SLOT_KNOWN))?;
        let pred = match attack {
            AttackSpec::Score { .. } => score_attack(&view, &c_atk)?,
            AttackSpec::RefinedScore { ref_speed, .. } => refined_score_attack(&view, &c_atk, *ref_speed)?,
            AttackSpec::Ihop { .. } => ihop_attack(
                &view,
                &c_atk,
                &attack.ihop_params().expect("ihop"),
                derive_seed(seed, SLOT_ATTACK + i as u64),
            )?,
        };
        accuracies.push((attack.name(), k, accuracy(&pred, &truth, true)?));
    }
    Ok(TrialOutcome {
        epsilon: sim.epsilon,
        abs_distance: sim.abs_distance,
        accuracies,
    })
}

fn subsample(corpus: &Corpus, n: usize, seed: u64) -> Result<Corpus, RunnerError> {
    if n > corpus.n() {
        return Err(RunnerError::Split(crate::split::SplitError::SizesExceedCorpus {
            requested: n,
            available: corpus.n(),
        }));
    }
    let mut picked = index::sample(&mut rng_from_seed(seed), corpus.n(), n).into_vec();
    picked.sort_unstable();
    let docs = corpus.documents();
    Ok(Corpus::new(
        corpus.universe().clone(),
        picked.into_iter().map(|i| docs[i].clone()).collect(),
    ))
}

/// Computes every row of the sweep, ordered by `run_id` then attack order.
///
/// Run `r` covers grid point `r / reps` and repetition `r % reps` and is
/// seeded with `derive_seed(master_seed, r)`.
pub fn sweep_rows(config: &ExperimentConfig, corpus: &Corpus) -> Result<Vec<ResultRow>, RunnerError> {
    config.validate()?;
    let grid = config.grid.points();
    let temporal = match config.split {
        SplitSpec::Temporal { cutoff } => Some(split_temporal(corpus, cutoff)?),
        SplitSpec::Uniform => None,
    };
    let runs = grid.len() * config.reps;
    let per_run: Vec<Vec<ResultRow>> = (0..runs)
        .into_par_iter()
        .map(|run_id| {
            let (n_atk, n_ind) = grid[run_id / config.reps];
            let seed = derive_seed(config.master_seed, run_id as u64);
            let split_seed = derive_seed(seed, SLOT_SPLIT);
            let context = |e: RunnerError| RunnerError::Run {
                run_id,
                source: Box::new(e),
            };
            let (atk, ind) = match &temporal {
                None => {
                    let pair = split_uniform(corpus, n_atk, n_ind, split_seed).map_err(|e| context(e.into()))?;
                    (pair.atk, pair.ind)
                }
                Some(pair) => (
                    subsample(&pair.atk, n_atk, derive_seed(split_seed, 0)).map_err(context)?,
                    subsample(&pair.ind, n_ind, derive_seed(split_seed, 1)).map_err(context)?,
                ),
            };
            let outcome = run_trial(&atk, &ind, &config.attacks, config.k, config.l, config.padding_g, seed)
                .map_err(context)?;
            Ok(outcome
                .accuracies
                .into_iter()
                .map(|(attack, k, acc)| ResultRow {
                    run_id,
                    dataset_label: config.label.clone(),
                    m: config.m,
                    n_ind,
                    n_atk,
                    seed,
                    epsilon: outcome.epsilon,
                    abs_distance: outcome.abs_distance,
                    attack: attack.to_string(),
                    k,
                    l: config.l,
                    padding_g: config.padding_g,
                    accuracy: acc,
                })
                .collect())
        })
        .collect::<Result<_, RunnerError>>()?;
    Ok(per_run.into_iter().flatten().collect())
}

/// Floats are written with 17 significant digits so they read back exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_results<W: Write>(rows: &[ResultRow], writer: W) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.write_record([
            r.run_id.to_string(),
            r.dataset_label.clone(),
            r.m.to_string(),
            r.n_ind.to_string(),
            r.n_atk.to_string(),
            r.seed.to_string(),
            format_float(r.epsilon),
            format_float(r.abs_distance),
            r.attack.clone(),
            r.k.to_string(),
            r.l.to_string(),
            r.padding_g.to_string(),
            format_float(r.accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<ResultRow>, RunnerError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_HEADER {
        return Err(RunnerError::Config(format!("unexpected results header {header:?}")));
    }
    Ok(rdr.deserialize().collect::<Result<Vec<ResultRow>, _>>()?)
}

/// Runs the sweep and writes `results.csv` and `config.json` into the
/// configured output directory; returns the results path.
pub fn run_sweep(config: &ExperimentConfig) -> Result<PathBuf, RunnerError> {
    let corpus = config.load_corpus()?;
    let rows = sweep_rows(config, &corpus)?;
    fs::create_dir_all(&config.output_dir)?;
    let results = config.output_dir.join("results.csv");
    write_results(&rows, BufWriter::new(File::create(&results)?))?;
    let mut cfg = BufWriter::new(File::create(config.output_dir.join("config.json"))?);
    serde_json::to_writer_pretty(&mut cfg, config)?;
    cfg.write_all(b"\n")?;
    cfg.flush()?;
    Ok(results)
}

pub fn read_results_file(path: &Path) -> Result<Vec<ResultRow>, RunnerError> {
    read_results(BufReader::new(File::open(path)?))
}
