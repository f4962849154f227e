//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per criterion
//! and exits non-zero if any fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use simsse::attacks::{
    accuracy, ihop_attack, refined_score_attack, score_attack, solve_linear_assignment, CostMatrix, IhopParams,
};
use simsse::cooc::cooccurrence_matrix;
use simsse::corpus::Corpus;
use simsse::fixtures::{four_keyword_corpus, four_keyword_volume_corpus};
use simsse::leakage::{build_index, observe_queries, select_known_queries};
use simsse::rng::derive_seed;
use simsse::runner::{
    fit_and_report, run_sweep, sweep_rows, write_fit_outputs, write_results_plots, AttackSpec, CorpusSource,
    ExperimentConfig, FitMode, ResultRow, SizeGrid, SplitSpec,
};
use simsse::split::{split_temporal, split_uniform};
use simsse::stats::{
    bonferroni_coprob_test, dominance_experiment, expit, fit_accuracy_function, max_index_size, ols, pinball,
    quantile_regression, spearman, AccuracyPoint, QuantileFit,
};
use simsse::synth::{sample_corpus, BernoulliModel, DocumentModel, TopicMixtureModel};

type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn geometric(m: usize, start: f64, ratio: f64) -> BernoulliModel {
    BernoulliModel::new((0..m).map(|i| start * ratio.powi(i as i32)).collect()).unwrap()
}

/// Stationary m=100 model shared by criteria 1, 2 and 5.
fn size_law_model() -> DocumentModel {
    DocumentModel::Bernoulli(geometric(100, 0.5, 0.96))
}

/// m=50 model used for the known-data and padding criteria.
fn known_data_model() -> DocumentModel {
    DocumentModel::Bernoulli(BernoulliModel::new((0..50).map(|i| 0.02 + 0.96 * i as f64 / 49.0).collect()).unwrap())
}

fn config(label: &str, model: DocumentModel, n: usize, attacks: Vec<AttackSpec>, grid: SizeGrid) -> ExperimentConfig {
    let m = model.m();
    ExperimentConfig {
        label: label.into(),
        source: CorpusSource::Synth { model, n, seed: 2024 },
        m,
        attacks,
        split: SplitSpec::Uniform,
        grid,
        reps: 1,
        k: 5,
        l: m,
        padding_g: 1,
        master_seed: 7,
        output_dir: "unused".into(),
    }
}

fn refined() -> AttackSpec {
    AttackSpec::RefinedScore { ref_speed: 10, k: None }
}

fn ihop(k: usize) -> AttackSpec {
    AttackSpec::Ihop {
        n_iters: 500,
        p_free: 0.25,
        smoothing: 1.0,
        k: Some(k),
    }
}

fn size_law_rows() -> Vec<ResultRow> {
    let sizes = vec![300, 600, 1200, 2500, 5000];
    let mut cfg = config(
        "size-law",
        size_law_model(),
        20_000,
        vec![refined()],
        SizeGrid {
            n_atk: sizes.clone(),
            n_ind: sizes,
        },
    );
    cfg.reps = 4;
    let corpus = cfg.load_corpus().unwrap();
    sweep_rows(&cfg, &corpus).unwrap()
}

fn size_x(r: &ResultRow) -> f64 {
    (1.0 / r.n_ind as f64 + 1.0 / r.n_atk as f64).sqrt()
}

fn criterion_1(rows: &[ResultRow], elapsed: Duration) -> Outcome {
    let x: Vec<f64> = rows.iter().map(size_x).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let fit = ols(&x, &y).unwrap();
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let pass = rows.len() == 100 && fit.r2 >= 0.90 && fit.a.abs() <= 0.10 * range && elapsed.as_secs_f64() <= 120.0;
    outcome(
        pass,
        format!(
            "{} runs, r2 = {:.4}, intercept = {:.3e}, 10% of range = {:.3e}, {:.1}s",
            rows.len(),
            fit.r2,
            fit.a,
            0.1 * range,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut cfg = config(
        "threshold",
        size_law_model(),
        20_000,
        vec![AttackSpec::Score { k: None }],
        SizeGrid {
            n_atk: vec![100, 200, 400, 700, 1000, 2000, 4000, 7000, 10_000, 15_000],
            n_ind: vec![500],
        },
    );
    cfg.reps = 5;
    cfg.l = 10;
    cfg.k = 1;
    let corpus = cfg.load_corpus().unwrap();
    let rows = sweep_rows(&cfg, &corpus).unwrap();
    let x: Vec<f64> = rows.iter().map(|r| (1.0 / r.n_atk as f64).sqrt()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let fit = ols(&x, &y).unwrap();
    outcome(
        rows.len() == 50 && fit.a > 0.0 && fit.a >= 3.0 * fit.se_a,
        format!("intercept = {:.4e}, se = {:.3e}, ratio = {:.1}", fit.a, fit.se_a, fit.a / fit.se_a),
    )
}

fn brute_force(costs: &Array2<f64>) -> f64 {
    fn go(costs: &Array2<f64>, row: usize, used: &mut [bool]) -> f64 {
        if row == costs.nrows() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..costs.ncols() {
            if !used[c] {
                used[c] = true;
                best = best.min(costs[[row, c]] + go(costs, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    go(costs, 0, &mut vec![false; costs.ncols()])
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..200 {
        let rows = rng.gen_range(1..=7);
        let cols = rng.gen_range(rows..=9);
        // Integer costs keep every sum exact in floating point.
        let costs = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(0..1000) as f64);
        let solved = solve_linear_assignment(&CostMatrix::new(costs.clone()).unwrap()).unwrap();
        if solved.cost != brute_force(&costs) {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(mismatches == 0 && secs <= 10.0, format!("{mismatches} mismatches in 200, {secs:.2}s"))
}

fn known_data_accuracies(corpus: &Corpus, seed: u64) -> (f64, f64, f64) {
    let catk = cooccurrence_matrix(corpus);
    let index = build_index(corpus, derive_seed(seed, 1), 1).unwrap();
    let (view, truth) = observe_queries(&index, corpus.m(), derive_seed(seed, 2)).unwrap();
    let known = select_known_queries(&view, &truth, 5.min(corpus.m() - 1), derive_seed(seed, 3)).unwrap();
    let s = accuracy(&score_attack(&known, &catk).unwrap(), &truth, true).unwrap();
    let r = accuracy(&refined_score_attack(&known, &catk, 10).unwrap(), &truth, true).unwrap();
    let i = accuracy(
        &ihop_attack(&view, &catk, &IhopParams::default(), derive_seed(seed, 4)).unwrap(),
        &truth,
        true,
    )
    .unwrap();
    (s, r, i)
}

fn criterion_4() -> Outcome {
    let model = known_data_model();
    let mut totals = [0.0; 3];
    let mut refined_below = 0;
    for seed in 0..10u64 {
        let corpus = sample_corpus(&model, 2000, derive_seed(44, seed));
        let (s, r, i) = known_data_accuracies(&corpus, seed);
        totals[0] += s;
        totals[1] += r;
        totals[2] += i;
        if r < s {
            refined_below += 1;
        }
    }
    let [s, r, i] = totals.map(|t| t / 10.0);
    // Hand-built corpora: every attack recovers them exactly.
    let mut hand_ok = true;
    for seed in 0..10u64 {
        let (s1, r1, _) = known_data_accuracies(&four_keyword_corpus(), seed);
        let (_, _, i2) = known_data_accuracies(&four_keyword_volume_corpus(), seed);
        hand_ok &= s1 == 1.0 && r1 == 1.0 && i2 == 1.0;
    }
    outcome(
        s >= 0.95 && r >= 0.95 && i >= 0.95 && refined_below == 0 && hand_ok,
        format!(
            "score {s:.4}, refined {r:.4}, ihop {i:.4}, refined < score on {refined_below} seeds, hand-built exact: {hand_ok}"
        ),
    )
}

fn criterion_5(rows: &[ResultRow]) -> Outcome {
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
    let rho = spearman(&eps, &acc).unwrap();
    outcome(rho <= -0.7, format!("spearman = {rho:.4}"))
}

fn planted_points(a: f64, b: f64, sigma: f64, seed: u64) -> Vec<AccuracyPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    (0..200)
        .map(|i| {
            let epsilon = 10f64.powf(rng.gen_range(-3.0..-0.5));
            let y = a + b * epsilon.ln() + if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            AccuracyPoint {
                epsilon,
                n_ind: 1,
                n_atk: 1,
                accuracy: expit(y),
                scored: 1 << 40,
                attack: "planted".into(),
                seed: i,
            }
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let lines = [(-2.0, -1.0), (-4.0, -1.5), (-1.0, -0.5), (-6.0, -2.0), (0.5, -0.3)];
    let mut worst_noisy: f64 = 0.0;
    let mut worst_exact: f64 = 0.0;
    for (i, &(a, b)) in lines.iter().enumerate() {
        let noisy = fit_accuracy_function(&planted_points(a, b, 0.1, 60 + i as u64)).unwrap();
        worst_noisy = worst_noisy.max((noisy.a - a).abs()).max((noisy.b - b).abs());
        let exact = fit_accuracy_function(&planted_points(a, b, 0.0, 70 + i as u64)).unwrap();
        worst_exact = worst_exact.max((exact.a - a).abs()).max((exact.b - b).abs());
    }
    outcome(
        worst_noisy <= 0.1 && worst_exact <= 1e-9,
        format!("max noisy error {worst_noisy:.4}, max noiseless error {worst_exact:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let alpha = 0.95;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut grid_beaten = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut coverage_sum = 0.0;
    let mut worst_coverage_dev: f64 = 0.0;
    for _ in 0..50 {
        let a0 = rng.gen_range(-2.0..2.0);
        let b0 = rng.gen_range(-2.0..0.0);
        let x: Vec<f64> = (0..200).map(|_| rng.gen_range(-4.0..-1.0)).collect();
        let y: Vec<f64> = x.iter().map(|xi| a0 + b0 * xi + noise.sample(&mut rng)).collect();
        let fit = quantile_regression(&x, &y, alpha).unwrap();
        let loss = |a: f64, b: f64| -> f64 { x.iter().zip(&y).map(|(xi, yi)| pinball(yi - a - b * xi, alpha)).sum() };
        let mut best_grid = f64::INFINITY;
        for i in 0..100 {
            for j in 0..100 {
                let a = a0 - 3.0 + 6.0 * i as f64 / 99.0;
                let b = b0 - 2.0 + 4.0 * j as f64 / 99.0;
                best_grid = best_grid.min(loss(a, b));
            }
        }
        let gap = fit.pinball_loss - best_grid;
        worst_gap = worst_gap.max(gap);
        if gap > 1e-9 {
            grid_beaten += 1;
        }
        let covered = x.iter().zip(&y).filter(|(xi, yi)| **yi <= fit.predict(**xi) + 1e-12).count();
        let coverage = covered as f64 / 200.0;
        coverage_sum += coverage;
        worst_coverage_dev = worst_coverage_dev.max((coverage - alpha).abs());
    }
    outcome(
        grid_beaten == 0 && worst_coverage_dev <= 0.05,
        format!(
            "grid beat the fit {grid_beaten} times (worst gap {worst_gap:.2e}), mean coverage {:.4}, worst deviation {worst_coverage_dev:.4}",
            coverage_sum / 50.0
        ),
    )
}

fn criterion_8() -> Outcome {
    let fit = QuantileFit {
        a: -5.0,
        b: -2.0,
        alpha: 0.95,
        pinball_loss: 0.0,
        n_points: 0,
    };
    let n = max_index_size(&fit, 0.05, None).unwrap();
    let bracket = fit.max_accuracy(n as f64, None) <= 0.05 && fit.max_accuracy((n + 1) as f64, None) > 0.05;
    let betas = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9];
    // From the unbounded attacker down to a small dataset.
    let bounds = [None, Some(1_000_000), Some(10_000), Some(1_000), Some(100), Some(30), Some(10)];
    let mut beta_monotone = true;
    let mut bound_monotone = true;
    for &bound in &bounds {
        let sizes: Vec<u64> = betas.iter().map(|&b| max_index_size(&fit, b, bound).unwrap_or(u64::MAX)).collect();
        beta_monotone &= sizes.windows(2).all(|w| w[0] <= w[1]);
    }
    for &beta in &betas {
        let sizes: Vec<u64> = bounds.iter().map(|&c| max_index_size(&fit, beta, c).unwrap_or(u64::MAX)).collect();
        bound_monotone &= sizes.windows(2).all(|w| w[0] <= w[1]);
    }
    outcome(
        n == 7 && bracket && beta_monotone && bound_monotone,
        format!(
            "n_max = {n}, bracketing {bracket}, monotone in beta {beta_monotone}, monotone in attacker bound {bound_monotone}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let stationary = DocumentModel::Bernoulli(geometric(100, 0.5, 0.98));
    let corpus = sample_corpus(&stationary, 4000, 90);
    let uniform_hits = (0..100u64)
        .filter(|&r| {
            let pair = split_uniform(&corpus, 2000, 2000, derive_seed(91, r)).unwrap();
            let report =
                bonferroni_coprob_test(&cooccurrence_matrix(&pair.ind), &cooccurrence_matrix(&pair.atk)).unwrap();
            report.corrected_pvalue < 0.01
        })
        .count();
    let topics = [geometric(100, 0.5, 0.98), BernoulliModel::new((0..100).map(|i| 0.5 * 0.98f64.powi(99 - i)).collect()).unwrap()];
    let drifting = DocumentModel::TopicMixture(TopicMixtureModel::new(topics, 1.0, 0.0).unwrap());
    let temporal_hits = (0..100u64)
        .filter(|&r| {
            let corpus = sample_corpus(&drifting, 4000, derive_seed(92, r));
            let pair = split_temporal(&corpus, 2000).unwrap();
            let report =
                bonferroni_coprob_test(&cooccurrence_matrix(&pair.ind), &cooccurrence_matrix(&pair.atk)).unwrap();
            report.corrected_pvalue < 0.001
        })
        .count();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        uniform_hits <= 5 && temporal_hits == 100 && secs <= 180.0,
        format!("uniform below 0.01: {uniform_hits}/100, temporal below 0.001: {temporal_hits}/100, {secs:.1}s"),
    )
}

fn criterion_10() -> Outcome {
    let ind = geometric(20, 0.5, 0.9);
    let atk = BernoulliModel::new(ind.probabilities().iter().map(|p| p + 0.05).collect()).unwrap();
    let d = dominance_experiment(&ind, &atk, 10_000, 10_000, 1000, 100).unwrap();
    let one_ind = BernoulliModel::new(vec![0.5]).unwrap();
    let one_atk = BernoulliModel::new(vec![0.7]).unwrap();
    let limit = dominance_experiment(&one_ind, &one_atk, 100_000, 100_000, 100, 101).unwrap();
    let mean = limit.eps_unequal.iter().sum::<f64>() / limit.eps_unequal.len() as f64;
    outcome(
        d.violation <= 0.01 && (mean - 0.2).abs() <= 0.05 * 0.2,
        format!("violation {:.4}, m=1 mean epsilon {mean:.5} (limit 0.2)", d.violation),
    )
}

fn padding_sweep(padding_g: usize) -> (f64, Option<u64>) {
    let mut cfg = config(
        "padding",
        known_data_model(),
        2000,
        vec![ihop(0)],
        SizeGrid {
            n_atk: vec![250, 500, 1000, 1800],
            n_ind: vec![10, 20, 40, 80, 160],
        },
    );
    cfg.reps = 16;
    cfg.k = 0;
    cfg.padding_g = padding_g;
    let corpus = cfg.load_corpus().unwrap();
    let rows = sweep_rows(&cfg, &corpus).unwrap();
    let mean = rows.iter().map(|r| r.accuracy).sum::<f64>() / rows.len() as f64;
    let report = fit_and_report(&rows, FitMode::Quantile { alpha: 0.95 }, &[0.05], &[None]).unwrap();
    (mean, report.attacks[0].max_index_size[0].n_max)
}

fn criterion_11() -> Outcome {
    let (base_acc, base_n) = padding_sweep(1);
    let mut accuracy_drops = true;
    let mut n_max_grows = base_n.is_some();
    let mut detail = format!("g=1: accuracy {base_acc:.4}, n_max {base_n:?}");
    for g in [2, 4] {
        let (acc, n) = padding_sweep(g);
        accuracy_drops &= acc < base_acc;
        n_max_grows &= matches!((n, base_n), (Some(n), Some(b)) if n > b);
        detail.push_str(&format!("; g={g}: accuracy {acc:.4}, n_max {n:?}"));
    }
    detail.push_str(&format!(" (accuracy drops: {accuracy_drops}, n_max grows: {n_max_grows})"));
    outcome(accuracy_drops && n_max_grows, detail)
}

fn sweep_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut cfg = config(
        "determinism",
        known_data_model(),
        1500,
        vec![AttackSpec::Score { k: None }, refined(), ihop(2)],
        SizeGrid {
            n_atk: vec![100, 300, 600],
            n_ind: vec![100, 300],
        },
    );
    cfg.reps = 2;
    cfg.l = 20;
    cfg.padding_g = 2;
    cfg.output_dir = dir.to_path_buf();
    let results = run_sweep(&cfg).unwrap();
    let rows = simsse::runner::read_results_file(&results).unwrap();
    let fit = fit_and_report(&rows, FitMode::Quantile { alpha: 0.95 }, &[0.05, 0.1], &[None, Some(1000)]).unwrap();
    write_fit_outputs(&fit, &rows, &dir.join("fit")).unwrap();
    write_results_plots(&rows, &dir.join("plots")).unwrap();
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(dir).unwrap().display().to_string();
                files.push((name, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn criterion_12() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = sweep_outputs(a.path());
    let second = sweep_outputs(b.path());
    let names: Vec<String> = first.iter().map(|(n, _)| n.clone()).collect();
    let has_core = names.iter().any(|n| n == "results.csv") && names.iter().any(|n| n == "config.json");
    let config_a = String::from_utf8_lossy(&first.iter().find(|f| f.0 == "config.json").unwrap().1).into_owned();
    // config.json records the output directory, which differs between the two runs.
    let normalize = |files: Vec<(String, Vec<u8>)>, dir: &Path| -> Vec<(String, Vec<u8>)> {
        files
            .into_iter()
            .map(|(n, bytes)| {
                let text = String::from_utf8_lossy(&bytes).replace(&dir.display().to_string(), "OUT");
                (n, text.into_bytes())
            })
            .collect()
    };
    let identical = normalize(first, a.path()) == normalize(second, b.path());
    outcome(
        has_core && identical && config_a.contains("master_seed"),
        format!("{} files compared, byte-identical: {identical}", names.len()),
    )
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (
            false,
            format!(
                "panicked: {}",
                e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
            ),
        ),
    };
    println!("{} {name}: {detail} [{secs:.1}s]", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() -> ExitCode {
    // `ACCEPTANCE_ONLY=11` runs the criteria whose label contains "11".
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let selected = |name: &str| only.as_deref().is_none_or(|o| name.contains(&format!("criterion {o} ")));
    let needs_sweep = selected("criterion 1 ") || selected("criterion 5 ");
    let start = Instant::now();
    let rows = if needs_sweep { catch_unwind(size_law_rows).ok() } else { None };
    let elapsed = start.elapsed();
    let sweep = || rows.as_deref().expect("size-law sweep failed");
    let criteria: Vec<Criterion> = vec![
        ("criterion 1 (size law)", Box::new(|| criterion_1(sweep(), elapsed))),
        ("criterion 2 (similarity threshold)", Box::new(criterion_2)),
        ("criterion 3 (assignment oracle)", Box::new(criterion_3)),
        ("criterion 4 (known-data attacks)", Box::new(criterion_4)),
        ("criterion 5 (similarity vs accuracy)", Box::new(|| criterion_5(sweep()))),
        ("criterion 6 (regression recovery)", Box::new(criterion_6)),
        ("criterion 7 (quantile optimality)", Box::new(criterion_7)),
        ("criterion 8 (max index size)", Box::new(criterion_8)),
        ("criterion 9 (z-test calibration)", Box::new(criterion_9)),
        ("criterion 10 (stochastic dominance)", Box::new(criterion_10)),
        ("criterion 11 (padding)", Box::new(criterion_11)),
        ("criterion 12 (determinism)", Box::new(criterion_12)),
    ];
    let mut all = true;
    for (name, f) in criteria {
        if selected(name) {
            all &= run(name, f);
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
