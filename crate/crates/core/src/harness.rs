//! Experiment orchestration: configuration, n-sweeps, exponent fits and
//! output files.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]. Trial `t`
//! at size `n` draws its network from `derive_seed(seed, [n, t])`, so adding
//! trials or points never changes earlier values, and results are merged in
//! index order regardless of thread count.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::Constants;
use crate::cutset::{evaluate_cutset, upper_bound_exponent, CutMode, CutsetOptions, CutsetReport};
use crate::error::{Error, Result};
use crate::network::{generate_network, PhysicalParams};
use crate::percolation::{crossing_probability, CrossingStudy};
use crate::regime::{hc_exponent, hybrid_exponent, multihop_exponent, phase_diagram, PhaseDiagram};
use crate::rng::{derive_seed, tag};
use crate::scheme::{hc_throughput, multihop_throughput, simulate_hybrid, SchemeRow};
use crate::stats::{fmt17, mean_stderr};

/// Points are dropped when more than this fraction of their trials fail.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Cutset,
    Scheme,
    Percolation,
    PhaseDiagram,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeChoice {
    Multihop,
    Hc,
    BurstyHc,
    #[default]
    Hybrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n_list: Vec<usize>,
    pub alpha: f64,
    /// `SNR_s = n^beta` at every point.
    pub beta: f64,
    pub constants: Constants,
    /// Independent network draws per point.
    pub trials: usize,
    /// Phase draws per network in cutset experiments.
    pub phase_trials: usize,
    pub seed: u64,
    /// Output directory.
    pub out: Option<PathBuf>,
    pub scheme: SchemeChoice,
    pub cut_mode: CutMode,
    /// Fixed hybrid cell size; chosen from `SNR_s` when absent.
    pub hybrid_m: Option<usize>,
    pub alpha_range: (f64, f64),
    pub beta_range: (f64, f64),
    /// Phase-diagram grid as `(alpha points, beta points)`.
    pub resolution: (usize, usize),
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Scheme,
            n_list: Vec::new(),
            alpha: 4.0,
            beta: 0.5,
            constants: Constants::default(),
            trials: 20,
            phase_trials: 20,
            seed: 0,
            out: None,
            scheme: SchemeChoice::default(),
            cut_mode: CutMode::default(),
            hybrid_m: None,
            alpha_range: (2.0, 6.0),
            beta_range: (-1.0, 3.0),
            resolution: (200, 200),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if !(self.alpha >= 2.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be >= 2, got {}", self.alpha)));
        }
        if !self.beta.is_finite() {
            return Err(Error::invalid("beta must be finite"));
        }
        if self.kind == ExperimentKind::PhaseDiagram {
            return Ok(());
        }
        if self.n_list.is_empty() {
            return Err(Error::invalid("n_list must not be empty"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n_list must be strictly increasing"));
        }
        if self.n_list[0] < 2 {
            return Err(Error::invalid("every n must be >= 2"));
        }
        if self.trials == 0 || self.phase_trials == 0 {
            return Err(Error::invalid("trials and phase_trials must be >= 1"));
        }
        Ok(())
    }

    /// Exponent predicted for the swept metric, where one is defined.
    pub fn theory_exponent(&self) -> Option<f64> {
        match self.kind {
            ExperimentKind::Cutset => upper_bound_exponent(self.alpha, self.beta).ok(),
            ExperimentKind::Scheme => match self.scheme {
                SchemeChoice::Multihop => Some(multihop_exponent(self.beta)),
                SchemeChoice::Hc | SchemeChoice::BurstyHc => Some(hc_exponent(self.alpha, self.beta)),
                SchemeChoice::Hybrid => match self.hybrid_m {
                    Some(_) => None,
                    None => hybrid_exponent(self.alpha, self.beta),
                },
            },
            ExperimentKind::Percolation | ExperimentKind::PhaseDiagram => None,
        }
    }
}

/// Aggregate of one `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointResult {
    pub n: usize,
    pub metric: f64,
    pub stderr: f64,
    pub trials_ok: usize,
    pub trials_failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub n: usize,
    pub failed: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ScalingTable {
    pub points: Vec<PointResult>,
    pub skipped: Vec<SkippedPoint>,
    /// Per-trial (or per-point) rows in the experiment's native CSV format.
    pub detail_header: String,
    pub detail_rows: Vec<String>,
}

impl ScalingTable {
    pub const SUMMARY_HEADER: &'static str = "n,metric,stderr,trials_ok,trials_failed";

    pub fn summary_csv(&self) -> String {
        let mut out = format!("{}\n", Self::SUMMARY_HEADER);
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.n,
                fmt17(p.metric),
                fmt17(p.stderr),
                p.trials_ok,
                p.trials_failed
            ));
        }
        out
    }

    pub fn detail_csv(&self) -> String {
        let mut out = format!("{}\n", self.detail_header);
        for r in &self.detail_rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.n as f64, p.metric)).collect()
    }
}

/// Network seed of trial `t` at size `n`.
pub fn point_seed(master: u64, n: usize, t: usize) -> u64 {
    derive_seed(master, &[n as u64, t as u64])
}

fn point_params(alpha: f64, beta: f64, n: usize) -> Result<(PhysicalParams, f64, f64)> {
    let params = PhysicalParams::unit(alpha)?;
    let snr_s = (n as f64).powf(beta);
    let area = params.area_for_snr(n, snr_s)?;
    Ok((params, snr_s, area))
}

enum Trial {
    Ok { metric: f64, row: String },
    Failed(Error),
}

fn run_trials<F>(cfg: &ExperimentConfig, n: usize, f: F) -> Result<Vec<Trial>>
where
    F: Fn(usize) -> Result<(f64, String)> + Sync,
{
    let mut outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|t| match f(t) {
            Ok((metric, row)) => Trial::Ok { metric, row },
            Err(e) => {
                log::debug!("n = {n}, trial {t} failed: {e}");
                Trial::Failed(e)
            }
        })
        .collect::<Vec<_>>();
    // Configuration errors are not degenerate draws.
    let is_config = |o: &Trial| matches!(o, Trial::Failed(Error::InvalidParameter(_) | Error::OutOfRegime(_)));
    if let Some(i) = outcomes.iter().position(is_config) {
        if let Trial::Failed(e) = outcomes.swap_remove(i) {
            return Err(e);
        }
    }
    Ok(outcomes)
}

fn cutset_trial(cfg: &ExperimentConfig, n: usize, t: usize) -> Result<(f64, String)> {
    let (params, _, area) = point_params(cfg.alpha, cfg.beta, n)?;
    let seed = point_seed(cfg.seed, n, t);
    let inst = generate_network(n, area, seed)?;
    let opts = CutsetOptions {
        constants: cfg.constants,
        trials: cfg.phase_trials,
        phase_seed: derive_seed(seed, &[tag::PHASE]),
        mode: cfg.cut_mode,
    };
    let report = evaluate_cutset(&inst, &params, &opts)?;
    Ok((report.mc_logdet, report.csv_row()))
}

fn hybrid_trial(cfg: &ExperimentConfig, n: usize, t: usize) -> Result<(f64, String)> {
    let (_, snr_s, area) = point_params(cfg.alpha, cfg.beta, n)?;
    let seed = point_seed(cfg.seed, n, t);
    let inst = generate_network(n, area, seed)?;
    let est = simulate_hybrid(
        &inst,
        snr_s,
        cfg.alpha,
        &cfg.constants,
        derive_seed(seed, &[tag::ROUTE]),
        cfg.hybrid_m,
    )?;
    Ok((est.estimate.aggregate_t, SchemeRow::hybrid(n, cfg.alpha, cfg.beta, &est, seed).csv_row()))
}

fn closed_form_point(cfg: &ExperimentConfig, n: usize) -> Result<(f64, String)> {
    let snr_s = (n as f64).powf(cfg.beta);
    let est = match cfg.scheme {
        SchemeChoice::Multihop => multihop_throughput(n, snr_s, &cfg.constants)?,
        SchemeChoice::Hc => hc_throughput(n, snr_s, cfg.alpha, &cfg.constants, false)?,
        SchemeChoice::BurstyHc => hc_throughput(n, snr_s, cfg.alpha, &cfg.constants, true)?,
        SchemeChoice::Hybrid => unreachable!("hybrid is simulated"),
    };
    Ok((
        est.aggregate_t,
        SchemeRow::closed_form(n, cfg.alpha, cfg.beta, &est, cfg.seed).csv_row(),
    ))
}

fn aggregate(n: usize, trials: Vec<Trial>, table: &mut ScalingTable) {
    let total = trials.len();
    let mut metrics = Vec::with_capacity(total);
    let mut first_error = None;
    for t in trials {
        match t {
            Trial::Ok { metric, row } => {
                metrics.push(metric);
                table.detail_rows.push(row);
            }
            Trial::Failed(e) => {
                first_error.get_or_insert(e.to_string());
            }
        }
    }
    let failed = total - metrics.len();
    if metrics.is_empty() || failed as f64 > MAX_FAILED_FRACTION * total as f64 {
        log::warn!("skipping n = {n}: {failed} of {total} trials failed");
        table.skipped.push(SkippedPoint {
            n,
            failed,
            reason: first_error.unwrap_or_default(),
        });
        return;
    }
    let (metric, stderr) = mean_stderr(&metrics);
    table.points.push(PointResult {
        n,
        metric,
        stderr,
        trials_ok: metrics.len(),
        trials_failed: failed,
    });
}

/// Sweep `n_list` and aggregate one metric per point:
/// the Monte-Carlo cutset log-determinant, a scheme's aggregate throughput,
/// or the open-crossing rate.
pub fn run_scaling_experiment(cfg: &ExperimentConfig) -> Result<ScalingTable> {
    cfg.validate()?;
    let detail_header = match cfg.kind {
        ExperimentKind::Cutset => CutsetReport::CSV_HEADER,
        ExperimentKind::Scheme => SchemeRow::CSV_HEADER,
        ExperimentKind::Percolation => CrossingStudy::CSV_HEADER,
        ExperimentKind::PhaseDiagram => {
            return Err(Error::invalid("phase-diagram is not a scaling experiment"));
        }
    };
    let mut table = ScalingTable {
        points: Vec::new(),
        skipped: Vec::new(),
        detail_header: detail_header.to_string(),
        detail_rows: Vec::new(),
    };
    for &n in &cfg.n_list {
        match (cfg.kind, cfg.scheme) {
            (ExperimentKind::Cutset, _) => {
                let trials = run_trials(cfg, n, |t| cutset_trial(cfg, n, t))?;
                aggregate(n, trials, &mut table);
            }
            (ExperimentKind::Scheme, SchemeChoice::Hybrid) => {
                let trials = run_trials(cfg, n, |t| hybrid_trial(cfg, n, t))?;
                aggregate(n, trials, &mut table);
            }
            (ExperimentKind::Scheme, _) => {
                let (metric, row) = closed_form_point(cfg, n)?;
                table.detail_rows.push(row);
                table.points.push(PointResult {
                    n,
                    metric,
                    stderr: 0.0,
                    trials_ok: 1,
                    trials_failed: 0,
                });
            }
            (ExperimentKind::Percolation, _) => {
                let study = crossing_probability(n, cfg.constants.c, cfg.trials, derive_seed(cfg.seed, &[n as u64]))?;
                table.detail_rows.push(study.csv_row());
                table.points.push(PointResult {
                    n,
                    metric: study.empirical_rate,
                    stderr: study.failure_stderr,
                    trials_ok: study.trials,
                    trials_failed: 0,
                });
            }
            (ExperimentKind::PhaseDiagram, _) => unreachable!(),
        }
    }
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub theory_exponent: Option<f64>,
    /// `ln(metric) - (intercept + slope ln n)` per point.
    pub residuals: Vec<f64>,
    pub points: usize,
}

/// Ordinary least squares of `ln(metric)` on `ln(n)`.
pub fn fit_exponent(points: &[(f64, f64)], theory_exponent: Option<f64>) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("need >= 3 points, got {}", points.len())));
    }
    if let Some(&(n, m)) = points.iter().find(|&&(n, m)| !(n > 0.0 && m > 0.0 && m.is_finite())) {
        return Err(Error::invalid(format!("non-positive point ({n}, {m}) cannot be fitted on log scale")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all n values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        theory_exponent,
        residuals,
        points: points.len(),
    })
}

/// Fit on the largest `max(4, len/2)` points; `None` below six points.
pub fn tail_fit(points: &[(f64, f64)], theory_exponent: Option<f64>) -> Result<Option<FitResult>> {
    if points.len() < 6 {
        return Ok(None);
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let keep = 4.max(sorted.len() / 2);
    fit_exponent(&sorted[sorted.len() - keep..], theory_exponent).map(Some)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub full: FitResult,
    pub tail: Option<FitResult>,
}

pub fn fit_report(points: &[(f64, f64)], theory_exponent: Option<f64>) -> Result<FitReport> {
    Ok(FitReport {
        full: fit_exponent(points, theory_exponent)?,
        tail: tail_fit(points, theory_exponent)?,
    })
}

/// Read `(n, metric)` pairs from a CSV with `n` and `metric` columns (or the
/// first two columns when those names are absent).
pub fn read_fit_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Experiment(format!("{other:?}")),
    })?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str, fallback: usize| headers.iter().position(|h| h == name).unwrap_or(fallback);
    let (ci, cm) = (col("n", 0), col("metric", 1));
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            let field = rec.get(i).unwrap_or("");
            field
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{}: cannot parse {field:?} as a number", path.display())))
        };
        points.push((parse(ci)?, parse(cm)?));
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub files: Vec<ManifestFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Write named files into `dir` followed by `manifest.json`; returns every path
/// written.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        entries.push(ManifestFile {
            name: name.to_string(),
            sha256: sha256_hex(body.as_bytes()),
        });
        written.push(path);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        files: entries,
    };
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Run a scaling experiment and write `summary.csv`, `detail.csv` and, when
/// at least three points survive, `fit.json`.
pub fn run_and_write(cfg: &ExperimentConfig, dir: &Path) -> Result<(ScalingTable, Option<FitReport>, Vec<PathBuf>)> {
    let table = run_scaling_experiment(cfg)?;
    let points = table.fit_points();
    let fit = if points.len() >= 3 && points.iter().all(|p| p.1 > 0.0) {
        Some(fit_report(&points, cfg.theory_exponent())?)
    } else {
        None
    };
    let mut files = vec![("summary.csv", table.summary_csv()), ("detail.csv", table.detail_csv())];
    if let Some(fit) = &fit {
        files.push(("fit.json", serde_json::to_string_pretty(fit)? + "\n"));
    }
    let written = write_outputs(dir, cfg, &files)?;
    Ok((table, fit, written))
}

pub fn build_phase_diagram(cfg: &ExperimentConfig) -> Result<PhaseDiagram> {
    phase_diagram(cfg.alpha_range, cfg.beta_range, cfg.resolution)
}

/// Write `phase_diagram.csv` and the plot grid `phase_diagram_grid.csv`.
pub fn emit_phase_diagram(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let diagram = build_phase_diagram(cfg)?;
    write_outputs(
        dir,
        cfg,
        &[
            ("phase_diagram.csv", diagram.to_csv()),
            ("phase_diagram_grid.csv", diagram.to_plot_grid()),
        ],
    )
}
