//! Command-line front end for the simsse toolkit.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use simsse::corpus::Corpus;
use simsse::runner::{
    fit_and_report, load_corpus, read_results_file, run_sweep, shift_report, write_fit_outputs, write_results_plots,
    write_shift_outputs, CorpusSource, ExperimentConfig, FitMode, RunnerError, ShiftConfig,
};
use simsse::stats::{max_index_size, QuantileFit};
use simsse::synth::{sample_corpus, DocumentModel};

#[derive(Parser)]
#[command(name = "simsse", version, about = "Leakage-abuse attack simulations on SSE indexes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// CSV with header `id,timestamp,text`.
    Csv,
    /// A directory with one document per file.
    Dir,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Average,
    Quantile,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize raw documents into a keyword corpus.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: InputFormat,
        /// Number of keywords to keep (most frequent stems).
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = simsse::corpus::DEFAULT_MIN_TOKEN_LEN)]
        min_len: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Sample a synthetic corpus from a JSON document model.
    Synth {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run an experiment sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        master_seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        padding_g: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        l: Option<usize>,
    },
    /// Fit accuracy models to a results file.
    Fit {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.95)]
        alpha: f64,
        /// Accuracy targets for the maximum index size (quantile mode).
        #[arg(long = "beta")]
        beta: Vec<f64>,
        /// Attacker dataset bounds: a count or `inf` (quantile mode).
        #[arg(long = "n-atk-bound", value_parser = parse_bound)]
        n_atk_bound: Vec<Bound>,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Largest index size keeping the accuracy bound at or below beta.
    Maxsize {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long = "n-atk-bound", value_parser = parse_bound, default_value = "inf")]
        n_atk_bound: Bound,
    },
    /// Compare temporal and uniform splits of one corpus.
    ShiftTest {
        #[arg(long)]
        corpus: PathBuf,
        /// JSON shift configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "cutoff", allow_hyphen_values = true)]
        cutoff: Vec<i64>,
        #[arg(long)]
        uniform_reps: Option<usize>,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Overview plots of a results file.
    Plot {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
    },
}

/// Attacker dataset bound; `None` is an attacker with unlimited data.
#[derive(Clone, Copy)]
struct Bound(Option<u64>);

fn parse_bound(s: &str) -> Result<Bound, String> {
    if s.eq_ignore_ascii_case("inf") {
        Ok(Bound(None))
    } else {
        s.parse::<u64>()
            .map(|n| Bound(Some(n)))
            .map_err(|e| format!("expected a count or `inf`: {e}"))
    }
}

fn write_corpus(corpus: &Corpus, path: &Path) -> Result<(), RunnerError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    corpus.write_json(&mut w)?;
    w.flush()?;
    Ok(())
}

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

fn run(command: Command) -> Result<(), RunnerError> {
    match command {
        Command::Ingest {
            input,
            format,
            m,
            min_len,
            output,
        } => {
            let source = match format {
                InputFormat::Csv => CorpusSource::Csv { path: input, min_len },
                InputFormat::Dir => CorpusSource::Dir { path: input, min_len },
            };
            let corpus = load_corpus(&source, m)?;
            write_corpus(&corpus, &output)?;
            print_json(&serde_json::json!({"documents": corpus.n(), "m": corpus.m(), "output": output}));
        }
        Command::Synth { model, n, seed, output } => {
            let model: DocumentModel = serde_json::from_reader(BufReader::new(File::open(model)?))?;
            let corpus = sample_corpus(&model, n, seed);
            write_corpus(&corpus, &output)?;
            print_json(&serde_json::json!({"documents": corpus.n(), "m": corpus.m(), "output": output}));
        }
        Command::Sweep {
            config,
            output_dir,
            master_seed,
            reps,
            padding_g,
            k,
            l,
        } => {
            let mut cfg = ExperimentConfig::from_json_file(&config)?;
            if let Some(v) = output_dir {
                cfg.output_dir = v;
            }
            if let Some(v) = master_seed {
                cfg.master_seed = v;
            }
            if let Some(v) = reps {
                cfg.reps = v;
            }
            if let Some(v) = padding_g {
                cfg.padding_g = v;
            }
            if let Some(v) = k {
                cfg.k = v;
            }
            if let Some(v) = l {
                cfg.l = v;
            }
            cfg.validate()?;
            let results = run_sweep(&cfg)?;
            print_json(&serde_json::json!({"results": results}));
        }
        Command::Fit {
            results,
            mode,
            alpha,
            beta,
            n_atk_bound,
            output_dir,
        } => {
            let rows = read_results_file(&results)?;
            let mode = match mode {
                ModeArg::Average => FitMode::Average,
                ModeArg::Quantile => FitMode::Quantile { alpha },
            };
            let bounds: Vec<Option<u64>> = if n_atk_bound.is_empty() {
                vec![None]
            } else {
                n_atk_bound.into_iter().map(|b| b.0).collect()
            };
            let report = fit_and_report(&rows, mode, &beta, &bounds)?;
            write_fit_outputs(&report, &rows, &output_dir)?;
            print_json(&serde_json::json!({"report": output_dir.join("report.json")}));
        }
        Command::Maxsize {
            a,
            b,
            beta,
            n_atk_bound: Bound(n_atk_bound),
        } => {
            let fit = QuantileFit {
                a,
                b,
                alpha: f64::NAN,
                pinball_loss: f64::NAN,
                n_points: 0,
            };
            let n = max_index_size(&fit, beta, n_atk_bound)?;
            print_json(&serde_json::json!({
                "n_max": n,
                "beta_max": beta,
                "n_atk_bound": n_atk_bound,
                "bound_at_n_max": fit.max_accuracy(n as f64, n_atk_bound.map(|v| v as f64)),
                "bound_at_next": fit.max_accuracy((n + 1) as f64, n_atk_bound.map(|v| v as f64)),
            }));
        }
        Command::ShiftTest {
            corpus,
            config,
            cutoff,
            uniform_reps,
            output_dir,
        } => {
            let corpus = Corpus::read_json(BufReader::new(File::open(corpus)?))?;
            let mut cfg: ShiftConfig = serde_json::from_reader(BufReader::new(File::open(config)?))?;
            if !cutoff.is_empty() {
                cfg.cutoffs = cutoff;
            }
            if let Some(r) = uniform_reps {
                cfg.uniform_reps = r;
            }
            let report = shift_report(&corpus, &cfg)?;
            write_shift_outputs(&report, &output_dir)?;
            print_json(&serde_json::json!({"report": output_dir.join("shift.json")}));
        }
        Command::Plot { results, output_dir } => {
            let rows = read_results_file(&results)?;
            let files = write_results_plots(&rows, &output_dir)?;
            print_json(&serde_json::json!({"plots": files}));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", serde_json::json!({"error": "usage", "message": first}));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut line = serde_json::json!({"error": e.kind(), "message": e.to_string()});
            if let Some(id) = e.run_id() {
                line["run_id"] = id.into();
            }
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
