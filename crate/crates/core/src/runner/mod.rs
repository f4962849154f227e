//! Experiment orchestration: configuration, seeded sweeps over dataset
//! sizes, result files, fitted reports and plots.

mod report;
mod shift;
pub mod svg;
mod sweep;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::{AttackError, IhopParams};
use crate::cooc::CoocError;
use crate::corpus::{build_corpus, build_universe, read_csv, read_dir, Corpus, CorpusError, Tokenizer};
use crate::leakage::LeakageError;
use crate::split::SplitError;
use crate::stats::StatsError;
use crate::synth::{sample_corpus, DocumentModel};

pub use report::{
    fit_and_report, results_plots, write_fit_outputs, write_results_plots, AttackReport, FitMode, FitReport, MaxSizeEntry,
};
pub use shift::{shift_report, write_shift_outputs, ShiftConfig, ShiftReport, ShiftRow, ShiftSummary, Summary};
pub use sweep::{
    format_float, read_results, read_results_file, run_sweep, run_trial, sweep_rows, write_results, ResultRow,
    TrialOutcome, RESULT_HEADER,
};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("attack {attack:?} has {rows} usable rows; at least {needed} are needed")]
    InsufficientData { attack: String, rows: usize, needed: usize },
    #[error("run {run_id}: {source}")]
    Run {
        run_id: usize,
        #[source]
        source: Box<RunnerError>,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Cooc(#[from] CoocError),
    #[error(transparent)]
    Leakage(#[from] LeakageError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl RunnerError {
    /// Short stable identifier of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            RunnerError::Config(_) => "config",
            RunnerError::InsufficientData { .. } => "insufficient_data",
            RunnerError::Run { source, .. } => source.kind(),
            RunnerError::Corpus(_) => "corpus",
            RunnerError::Split(SplitError::MissingTimestamp(_)) => "missing_timestamp",
            RunnerError::Split(_) => "split",
            RunnerError::Cooc(_) => "cooccurrence",
            RunnerError::Leakage(_) => "leakage",
            RunnerError::Attack(_) => "attack",
            RunnerError::Stats(_) => "stats",
            RunnerError::Io(_) => "io",
            RunnerError::Json(_) => "json",
            RunnerError::Csv(_) => "csv",
        }
    }

    /// Run index the error occurred in, if any.
    pub fn run_id(&self) -> Option<usize> {
        match self {
            RunnerError::Run { run_id, .. } => Some(*run_id),
            _ => None,
        }
    }
}

/// Where the documents of an experiment come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSource {
    /// CSV with header `id,timestamp,text`.
    Csv { path: PathBuf, min_len: usize },
    /// One document per file.
    Dir { path: PathBuf, min_len: usize },
    /// A corpus previously written by `Corpus::write_json`.
    Corpus { path: PathBuf },
    Synth { model: DocumentModel, n: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    Score {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
    },
    RefinedScore {
        ref_speed: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
    },
    Ihop {
        n_iters: usize,
        p_free: f64,
        smoothing: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
    },
}

impl AttackSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AttackSpec::Score { .. } => "score",
            AttackSpec::RefinedScore { .. } => "refined_score",
            AttackSpec::Ihop { .. } => "ihop",
        }
    }

    /// Known queries for this attack; falls back to the experiment-wide `k`.
    pub fn known(&self, default_k: usize) -> usize {
        match self {
            AttackSpec::Score { k } | AttackSpec::RefinedScore { k, .. } | AttackSpec::Ihop { k, .. } => {
                k.unwrap_or(default_k)
            }
        }
    }

    pub fn ihop_params(&self) -> Option<IhopParams> {
        match *self {
            AttackSpec::Ihop {
                n_iters,
                p_free,
                smoothing,
                ..
            } => Some(IhopParams {
                n_iters,
                p_free,
                smoothing,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitSpec {
    Uniform,
    /// Each grid point subsamples the attacker side from documents before
    /// `cutoff` and the indexed side from the rest.
    Temporal { cutoff: i64 },
}

/// Every `(n_atk, n_ind)` pair of the two lists is a grid point, `n_atk`
/// varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeGrid {
    pub n_atk: Vec<usize>,
    pub n_ind: Vec<usize>,
}

impl SizeGrid {
    pub fn points(&self) -> Vec<(usize, usize)> {
        self.n_atk
            .iter()
            .flat_map(|&a| self.n_ind.iter().map(move |&i| (a, i)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Written to the `dataset_label` column.
    pub label: String,
    pub source: CorpusSource,
    /// Keyword universe size.
    pub m: usize,
    pub attacks: Vec<AttackSpec>,
    pub split: SplitSpec,
    pub grid: SizeGrid,
    pub reps: usize,
    /// Known queries given to each attack unless the attack overrides it.
    pub k: usize,
    /// Observed queries per run.
    pub l: usize,
    pub padding_g: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, RunnerError> {
        let cfg: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |msg: String| Err(RunnerError::Config(msg));
        if self.m == 0 {
            return bad("m must be positive".into());
        }
        if self.attacks.is_empty() {
            return bad("no attacks configured".into());
        }
        if self.reps == 0 {
            return bad("reps must be positive".into());
        }
        if self.padding_g == 0 {
            return bad("padding_g must be positive".into());
        }
        if self.l == 0 || self.l > self.m {
            return bad(format!("l = {} must be in 1..={}", self.l, self.m));
        }
        if self.grid.n_atk.is_empty() || self.grid.n_ind.is_empty() {
            return bad("size grid is empty".into());
        }
        if self.grid.points().iter().any(|&(a, i)| a == 0 || i == 0) {
            return bad("grid sizes must be positive".into());
        }
        for attack in &self.attacks {
            let k = attack.known(self.k);
            if k >= self.l {
                return bad(format!("{}: k = {k} leaves no query to score out of l = {}", attack.name(), self.l));
            }
            match attack {
                AttackSpec::Score { .. } | AttackSpec::RefinedScore { .. } if k == 0 => {
                    return bad(format!("{} needs k >= 1", attack.name()));
                }
                AttackSpec::RefinedScore { ref_speed: 0, .. } => return bad("ref_speed must be positive".into()),
                AttackSpec::Ihop { .. } => {
                    attack.ihop_params().expect("ihop").validate()?;
                }
                _ => {}
            }
        }
        if let CorpusSource::Synth { model, .. } = &self.source {
            if model.m() != self.m {
                return bad(format!("synthetic model has {} keywords but m = {}", model.m(), self.m));
            }
        }
        Ok(())
    }

    /// Loads or generates the corpus and checks the grid fits inside it.
    pub fn load_corpus(&self) -> Result<Corpus, RunnerError> {
        let corpus = load_corpus(&self.source, self.m)?;
        if corpus.m() != self.m {
            return Err(RunnerError::Config(format!("corpus has {} keywords but m = {}", corpus.m(), self.m)));
        }
        if matches!(self.split, SplitSpec::Uniform) {
            for (a, i) in self.grid.points() {
                if a + i > corpus.n() {
                    return Err(RunnerError::Split(SplitError::SizesExceedCorpus {
                        requested: a + i,
                        available: corpus.n(),
                    }));
                }
            }
        }
        Ok(corpus)
    }
}

/// Materializes a corpus source with a universe of `m` keywords.
pub fn load_corpus(source: &CorpusSource, m: usize) -> Result<Corpus, RunnerError> {
    let from_raw = |raws: Vec<_>, min_len: usize| -> Result<Corpus, RunnerError> {
        let tokenizer = Tokenizer::english().with_min_len(min_len);
        let universe = Arc::new(build_universe(&raws, m, &tokenizer)?);
        Ok(build_corpus(&raws, universe, &tokenizer)?)
    };
    match source {
        CorpusSource::Csv { path, min_len } => from_raw(read_csv(File::open(path)?)?, *min_len),
        CorpusSource::Dir { path, min_len } => from_raw(read_dir(path)?, *min_len),
        CorpusSource::Corpus { path } => Ok(Corpus::read_json(BufReader::new(File::open(path)?))?),
        CorpusSource::Synth { model, n, seed } => Ok(sample_corpus(model, *n, *seed)),
    }
}
