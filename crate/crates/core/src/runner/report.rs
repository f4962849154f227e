//! Fitting accuracy models to sweep results.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::svg::{Plot, Series};
use super::{ResultRow, RunnerError};
use crate::stats::{
    fit_accuracy_function, fit_quantile_bound, logit, max_index_size, size_regressor, usable_points, AccuracyPoint,
    LinearFit, QuantileFit,
};

/// Minimum rows per attack for a fit.
pub const MIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FitMode {
    /// Mean accuracy as a function of similarity.
    Average,
    /// Quantile-`alpha` accuracy bound as a function of dataset sizes.
    Quantile { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxSizeEntry {
    pub beta_max: f64,
    /// `null` stands for an attacker with unlimited data.
    pub n_atk_bound: Option<u64>,
    pub n_max: Option<u64>,
    /// Why no `n_max` was produced.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: String,
    pub n_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantile: Option<QuantileFit>,
    /// Fraction of points on or below the fitted quantile line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub max_index_size: Vec<MaxSizeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub mode: FitMode,
    pub attacks: Vec<AttackReport>,
}

fn group(rows: &[ResultRow]) -> BTreeMap<String, Vec<AccuracyPoint>> {
    let mut by_attack: BTreeMap<String, Vec<AccuracyPoint>> = BTreeMap::new();
    for r in rows {
        by_attack.entry(r.attack.clone()).or_default().push(r.to_point());
    }
    by_attack
}

/// Fits every attack in `rows`. In quantile mode the report also lists
/// `n_max` for each `(beta_max, n_atk_bound)` pair.
pub fn fit_and_report(
    rows: &[ResultRow],
    mode: FitMode,
    beta_max: &[f64],
    n_atk_bounds: &[Option<u64>],
) -> Result<FitReport, RunnerError> {
    if rows.is_empty() {
        return Err(RunnerError::InsufficientData {
            attack: String::new(),
            rows: 0,
            needed: MIN_ROWS,
        });
    }
    let mut attacks = Vec::new();
    for (attack, points) in group(rows) {
        let usable = match mode {
            FitMode::Average => usable_points(&points).count(),
            FitMode::Quantile { .. } => points.len(),
        };
        if usable < MIN_ROWS {
            return Err(RunnerError::InsufficientData {
                attack,
                rows: usable,
                needed: MIN_ROWS,
            });
        }
        let report = match mode {
            FitMode::Average => AttackReport {
                attack,
                n_points: usable,
                linear: Some(fit_accuracy_function(&points)?),
                quantile: None,
                coverage: None,
                max_index_size: Vec::new(),
            },
            FitMode::Quantile { alpha } => {
                let fit = fit_quantile_bound(&points, alpha)?;
                let mut covered = 0usize;
                for p in &points {
                    let x = size_regressor(p.n_ind as f64, Some(p.n_atk as f64));
                    if logit(p.clamped_accuracy())? <= fit.predict(x) + 1e-12 {
                        covered += 1;
                    }
                }
                let mut entries = Vec::new();
                for &beta in beta_max {
                    for &bound in n_atk_bounds {
                        let (n_max, error) = match max_index_size(&fit, beta, bound) {
                            Ok(n) => (Some(n), None),
                            Err(e) => (None, Some(e.to_string())),
                        };
                        entries.push(MaxSizeEntry {
                            beta_max: beta,
                            n_atk_bound: bound,
                            n_max,
                            error,
                        });
                    }
                }
                AttackReport {
                    attack,
                    n_points: fit.n_points,
                    linear: None,
                    quantile: Some(fit),
                    coverage: Some(covered as f64 / points.len() as f64),
                    max_index_size: entries,
                }
            }
        };
        attacks.push(report);
    }
    Ok(FitReport { mode, attacks })
}

fn curve(x0: f64, x1: f64, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    (0..=100)
        .map(|i| {
            let x = x0 + (x1 - x0) * i as f64 / 100.0;
            (x, f(x))
        })
        .collect()
}

fn span(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    xs.filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Scatter of the data in the fitted space with the fitted curve.
pub fn fit_plot(report: &AttackReport, rows: &[ResultRow]) -> Plot {
    let points: Vec<AccuracyPoint> = rows
        .iter()
        .filter(|r| r.attack == report.attack)
        .map(ResultRow::to_point)
        .collect();
    let y = |p: &AccuracyPoint| logit(p.clamped_accuracy()).unwrap_or(f64::NAN);
    if let Some(fit) = &report.linear {
        let data: Vec<(f64, f64)> = usable_points(&points).map(|p| (p.epsilon.ln(), y(p))).collect();
        let (x0, x1) = span(data.iter().map(|p| p.0));
        Plot::new(format!("{}: average accuracy", report.attack), "ln(epsilon)", "logit(accuracy)")
            .with(Series::scatter("runs", data))
            .with(Series::line(
                format!("a={:.3} b={:.3}", fit.a, fit.b),
                curve(x0, x1, |x| fit.predict(x)),
            ))
    } else {
        let fit = report.quantile.expect("quantile or linear fit");
        let data: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (size_regressor(p.n_ind as f64, Some(p.n_atk as f64)), y(p)))
            .collect();
        let (x0, x1) = span(data.iter().map(|p| p.0));
        Plot::new(
            format!("{}: quantile {} bound", report.attack, fit.alpha),
            "ln sqrt(1/n_ind + 1/n_atk)",
            "logit(accuracy)",
        )
        .with(Series::scatter("runs", data))
        .with(Series::line(
            format!("a={:.3} b={:.3}", fit.a, fit.b),
            curve(x0, x1, |x| fit.predict(x)),
        ))
    }
}

/// `n_max` against `beta_max`, one curve per attacker bound.
pub fn max_size_plot(report: &AttackReport) -> Option<Plot> {
    if report.max_index_size.is_empty() {
        return None;
    }
    let mut bounds: Vec<Option<u64>> = report.max_index_size.iter().map(|e| e.n_atk_bound).collect();
    bounds.dedup();
    bounds.sort_by_key(|b| b.map_or(u64::MAX, |v| v));
    bounds.dedup();
    let mut plot = Plot::new(format!("{}: maximum index size", report.attack), "beta_max", "n_max");
    for bound in bounds {
        let pts: Vec<(f64, f64)> = report
            .max_index_size
            .iter()
            .filter(|e| e.n_atk_bound == bound)
            .filter_map(|e| e.n_max.map(|n| (e.beta_max, n as f64)))
            .collect();
        let label = bound.map_or("n_atk = inf".to_string(), |b| format!("n_atk = {b}"));
        plot = plot.with(Series::line(label, pts));
    }
    Some(plot)
}

/// Overview plots of raw sweep results: ε against the size regressor
/// `√(1/n_ind + 1/n_atk)` and accuracy against ε for each attack.
pub fn results_plots(rows: &[ResultRow]) -> Vec<(String, Plot)> {
    let mut seen = std::collections::BTreeSet::new();
    let runs: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| seen.insert(r.run_id))
        .map(|r| ((1.0 / r.n_ind as f64 + 1.0 / r.n_atk as f64).sqrt(), r.epsilon))
        .collect();
    let mut plots = vec![(
        "epsilon_size.svg".to_string(),
        Plot::new("similarity against dataset sizes", "sqrt(1/n_ind + 1/n_atk)", "epsilon").with(Series::scatter("runs", runs)),
    )];
    let mut by_attack: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        by_attack.entry(&r.attack).or_default().push((r.epsilon, r.accuracy));
    }
    for (attack, pts) in by_attack {
        plots.push((
            format!("accuracy_{attack}.svg"),
            Plot::new(format!("{attack}: accuracy against similarity"), "epsilon", "accuracy")
                .with(Series::scatter(attack, pts)),
        ));
    }
    plots
}

/// Writes [`results_plots`] into `dir`.
pub fn write_results_plots(rows: &[ResultRow], dir: &Path) -> Result<Vec<String>, RunnerError> {
    fs::create_dir_all(dir)?;
    let plots = results_plots(rows);
    for (name, plot) in &plots {
        fs::write(dir.join(name), plot.to_svg())?;
    }
    Ok(plots.into_iter().map(|(n, _)| n).collect())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), RunnerError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes `report.json` plus `fit_<attack>.svg` (and `maxsize_<attack>.svg`
/// in quantile mode) into `dir`.
pub fn write_fit_outputs(report: &FitReport, rows: &[ResultRow], dir: &Path) -> Result<(), RunnerError> {
    fs::create_dir_all(dir)?;
    write_json(report, &dir.join("report.json"))?;
    for a in &report.attacks {
        fs::write(dir.join(format!("fit_{}.svg", a.attack)), fit_plot(a, rows).to_svg())?;
        if let Some(p) = max_size_plot(a) {
            fs::write(dir.join(format!("maxsize_{}.svg", a.attack)), p.to_svg())?;
        }
    }
    Ok(())
}

pub(crate) fn write_json_file<T: Serialize>(value: &T, path: &Path) -> Result<(), RunnerError> {
    write_json(value, path)
}
