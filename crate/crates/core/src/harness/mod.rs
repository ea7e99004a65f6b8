//! Deterministic trial execution, summaries and file output.
//!
//! Every trial draws from its own substream, so results do not depend on
//! which thread ran it. Records are collected, sorted by trial index and
//! written in one pass; summaries are merged over fixed index blocks.

pub mod config;

use crate::analytic::{limit_constant, AnalyticError};
use crate::components::{
    analyze, annulus_inner_radius, area_outside_mc, default_boundary_points, inradius_holds, ComponentError,
};
use crate::critpoints::{solve, CriticalSet};
use crate::par::{map_indexed, with_threads, Execution};
use crate::polyeval::{PolyError, RootedPolynomial};
use crate::sampling::{derive_domain_substream, derive_substream, sample_roots};
use crate::stats::{merge_all, SummaryAccumulator};
use config::{ConfigError, ExperimentConfig};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

pub const CSV_HEADER: &str =
    "trial,n,components,components_annulus,n_crit_outside,area_outside_est,max_residual,inradius_ok,wall_micros";

/// Failure fraction above which a run counts as numerically broken.
pub const MAX_FAILURE_RATE: f64 = 0.001;

/// Trials per summary block; blocks are merged in index order.
pub const SUMMARY_BLOCK: usize = 1024;

/// Substream domain for the area estimate, kept apart from the solver draws.
const DOMAIN_AREA: u64 = 0x4152_4541;

/// Scaling bracket for `mean / sqrt(n)` at `n >= 100`.
pub const SCALING_BRACKET: (f64, f64) = (0.2, 1.0);

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Component(#[from] ComponentError),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    HeavyTail(#[from] crate::heavytail::HeavyTailError),
    #[error(transparent)]
    KacRice(#[from] crate::kacrice::KacRiceError),
    #[error("{failures} of {trials} trials failed, above the {MAX_FAILURE_RATE} threshold")]
    FailureThreshold { failures: u64, trials: u64 },
}

impl HarnessError {
    /// Process exit code: 2 for bad input, 3 for numeric breakdown.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::FailureThreshold { .. } | HarnessError::Analytic(AnalyticError::Quadrature(_)) => 3,
            HarnessError::Io { .. } => 1,
            _ => 2,
        }
    }
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let mut f = std::fs::File::create(path).map_err(io_error(path))?;
    f.write_all(bytes).map_err(io_error(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub n: usize,
    pub components: usize,
    pub components_annulus: usize,
    pub n_crit_outside: usize,
    pub area_outside_est: f64,
    pub max_residual: f64,
    pub inradius_ok: bool,
    pub wall_micros: u64,
}

impl TrialRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:e},{},{}",
            self.trial_index,
            self.n,
            self.components,
            self.components_annulus,
            self.n_crit_outside,
            self.area_outside_est,
            self.max_residual,
            self.inradius_ok,
            self.wall_micros
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub trial_index: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub enum TrialOutcome {
    Done {
        record: TrialRecord,
        /// Kept only when requested, for `--dump-crit`.
        crit: Option<CriticalSet>,
    },
    Failed(TrialFailure),
}

impl TrialOutcome {
    pub fn record(&self) -> Option<&TrialRecord> {
        match self {
            TrialOutcome::Done { record, .. } => Some(record),
            TrialOutcome::Failed(_) => None,
        }
    }
}

/// Per-trial knobs shared by `simulate`, `scaling` and the acceptance runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSettings {
    pub n: usize,
    pub kappa: f64,
    pub master_seed: u64,
    pub area_samples: usize,
    pub boundary_points: usize,
    pub timing: bool,
    pub keep_crit: bool,
}

impl TrialSettings {
    pub fn new(n: usize, kappa: f64, master_seed: u64) -> Self {
        Self {
            n,
            kappa,
            master_seed,
            area_samples: 1000,
            boundary_points: default_boundary_points(n),
            timing: false,
            keep_crit: false,
        }
    }

    pub fn from_config(cfg: &ExperimentConfig, n: usize) -> Self {
        Self {
            n,
            kappa: cfg.kappa,
            master_seed: cfg.master_seed,
            area_samples: cfg.area_samples,
            boundary_points: cfg.boundary_points.unwrap_or_else(|| default_boundary_points(n)),
            timing: !cfg.no_timing,
            keep_crit: cfg.dump_crit,
        }
    }
}

/// One trial's polynomial, as sampled from substream `t`.
pub fn trial_polynomial(master_seed: u64, n: usize, t: u64) -> Result<RootedPolynomial, PolyError> {
    let mut stream = derive_substream(master_seed, t);
    RootedPolynomial::new(sample_roots(n, &mut stream))
}

/// Area estimate for trial `t`, independent of the solver's draws.
pub fn trial_area(poly: &RootedPolynomial, master_seed: u64, samples: usize, t: u64) -> Result<f64, ComponentError> {
    area_outside_mc(poly, samples, &mut derive_domain_substream(master_seed, DOMAIN_AREA, t))
}

pub fn run_trial(s: &TrialSettings, t: u64) -> TrialOutcome {
    let started = Instant::now();
    let fail = |reason: String| {
        TrialOutcome::Failed(TrialFailure {
            trial_index: t,
            reason,
        })
    };
    let mut stream = derive_substream(s.master_seed, t);
    let poly = match RootedPolynomial::new(sample_roots(s.n, &mut stream)) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    let crit = match solve(&poly, &mut stream) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let outcome = (|| -> Result<TrialRecord, ComponentError> {
        let report = analyze(&poly, &crit, s.kappa)?;
        // With an empty inner circle the containment holds vacuously.
        let inradius_ok = if annulus_inner_radius(s.n, s.kappa) > 0.0 {
            inradius_holds(&poly, s.kappa, s.boundary_points)?
        } else {
            true
        };
        let area = trial_area(&poly, s.master_seed, s.area_samples, t)?;
        Ok(TrialRecord {
            trial_index: t,
            n: s.n,
            components: report.components,
            components_annulus: report.components_annulus,
            n_crit_outside: report.n_crit_outside,
            area_outside_est: area,
            max_residual: crit.max_residual(),
            inradius_ok,
            wall_micros: 0,
        })
    })();
    match outcome {
        Ok(mut record) => {
            if s.timing {
                record.wall_micros = started.elapsed().as_micros() as u64;
            }
            TrialOutcome::Done {
                record,
                crit: s.keep_crit.then_some(crit),
            }
        }
        Err(e) => fail(e.to_string()),
    }
}

/// All trials, in index order.
pub fn run_trials(s: &TrialSettings, trials: u64, exec: Execution, threads: usize) -> Vec<TrialOutcome> {
    with_threads(threads, || map_indexed(trials, exec, |t| run_trial(s, t)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub n: usize,
    pub trials: u64,
    pub failures: u64,
    pub components: SummaryAccumulator,
    pub components_annulus: SummaryAccumulator,
    pub area: SummaryAccumulator,
    pub inradius_hits: u64,
}

impl SimulationSummary {
    pub fn mean_over_sqrt_n(&self) -> f64 {
        self.components.mean / (self.n as f64).sqrt()
    }

    pub fn se_over_sqrt_n(&self) -> f64 {
        self.components.std_error() / (self.n as f64).sqrt()
    }

    pub fn limit_distance(&self) -> f64 {
        (self.mean_over_sqrt_n() - limit_constant()).abs()
    }

    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }

    pub fn breaches_threshold(&self) -> bool {
        self.failure_rate() > MAX_FAILURE_RATE
    }

    pub fn inradius_frequency(&self) -> f64 {
        self.inradius_hits as f64 / self.components.count.max(1) as f64
    }

    pub fn in_bracket(&self) -> bool {
        let v = self.mean_over_sqrt_n();
        SCALING_BRACKET.0 <= v && v <= SCALING_BRACKET.1
    }
}

/// Summaries over the successful trials, merged block by block.
pub fn summarize(n: usize, outcomes: &[TrialOutcome]) -> SimulationSummary {
    let parts: Vec<[SummaryAccumulator; 3]> = outcomes
        .chunks(SUMMARY_BLOCK)
        .map(|chunk| {
            let mut acc = [SummaryAccumulator::new(); 3];
            for r in chunk.iter().filter_map(TrialOutcome::record) {
                acc[0].push(r.components as f64);
                acc[1].push(r.components_annulus as f64);
                acc[2].push(r.area_outside_est);
            }
            acc
        })
        .collect();
    let merged = |k: usize| merge_all(parts.iter().map(|p| &p[k]));
    let records = outcomes.iter().filter_map(TrialOutcome::record);
    SimulationSummary {
        n,
        trials: outcomes.len() as u64,
        failures: outcomes.iter().filter(|o| o.record().is_none()).count() as u64,
        components: merged(0),
        components_annulus: merged(1),
        area: merged(2),
        inradius_hits: records.filter(|r| r.inradius_ok).count() as u64,
    }
}

pub fn csv_text(outcomes: &[TrialOutcome]) -> String {
    let mut out = String::with_capacity(64 * (outcomes.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in outcomes.iter().filter_map(TrialOutcome::record) {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn failures_text(outcomes: &[TrialOutcome]) -> String {
    let mut out = String::from("trial,reason\n");
    for o in outcomes {
        if let TrialOutcome::Failed(f) = o {
            let _ = writeln!(out, "{},\"{}\"", f.trial_index, f.reason.replace('"', "'"));
        }
    }
    out
}

pub fn crit_text(outcomes: &[TrialOutcome]) -> String {
    let mut out = String::from("trial,index,beta_re,beta_im,residual\n");
    for o in outcomes {
        if let TrialOutcome::Done {
            record,
            crit: Some(crit),
        } = o
        {
            for (j, (b, res)) in crit.points.iter().zip(&crit.residuals).enumerate() {
                let _ = writeln!(out, "{},{},{},{},{:e}", record.trial_index, j, b.re, b.im, res);
            }
        }
    }
    out
}

/// Sidecar path: the output path with `suffix` appended.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn format_summary(s: &SimulationSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n                    {}", s.n);
    let _ = writeln!(out, "trials               {}", s.trials);
    let _ = writeln!(out, "failures             {}", s.failures);
    let _ = writeln!(out, "mean_components      {:.6}", s.components.mean);
    let _ = writeln!(out, "se_components        {:.6}", s.components.std_error());
    let _ = writeln!(out, "mean_over_sqrt_n     {:.6}", s.mean_over_sqrt_n());
    let _ = writeln!(out, "se_over_sqrt_n       {:.6}", s.se_over_sqrt_n());
    let _ = writeln!(out, "limit_constant       {:.10}", limit_constant());
    let _ = writeln!(out, "distance_to_limit    {:.6}", s.limit_distance());
    let _ = writeln!(out, "mean_components_ann  {:.6}", s.components_annulus.mean);
    let _ = writeln!(out, "mean_area_outside    {:.6}", s.area.mean);
    let _ = writeln!(out, "sqrt_n_area          {:.6}", s.area.mean * (s.n as f64).sqrt());
    let _ = writeln!(out, "inradius_frequency   {:.6}", s.inradius_frequency());
    out
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub summary: SimulationSummary,
    pub csv_path: PathBuf,
    pub failures_path: PathBuf,
}

pub fn default_out(cfg: &ExperimentConfig, stem: &str) -> PathBuf {
    cfg.out_path.clone().unwrap_or_else(|| PathBuf::from(stem))
}

/// Runs all trials and writes the CSV, the `.failures` sidecar and, when
/// asked, the critical points. Files are written before the failure
/// threshold is checked.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<SimulateReport, HarnessError> {
    let settings = TrialSettings::from_config(cfg, cfg.n);
    let outcomes = run_trials(&settings, cfg.trials, cfg.execution(), cfg.threads);
    let csv_path = default_out(cfg, "simulate.csv");
    write_file(&csv_path, csv_text(&outcomes).as_bytes())?;
    let failures_path = sidecar(&csv_path, ".failures");
    write_file(&failures_path, failures_text(&outcomes).as_bytes())?;
    if cfg.dump_crit {
        let path = sidecar(&csv_path, ".crit.csv");
        write_file(&path, crit_text(&outcomes).as_bytes())?;
    }
    Ok(SimulateReport {
        summary: summarize(cfg.n, &outcomes),
        csv_path,
        failures_path,
    })
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub rows: Vec<SimulationSummary>,
}

impl ScalingReport {
    /// Every row with `n >= 100` lies inside the scaling bracket.
    pub fn bracket_holds(&self) -> bool {
        self.rows.iter().filter(|r| r.n >= 100).all(SimulationSummary::in_bracket)
    }

    /// Whether `|mean/sqrt(n) - limit|` never grows, up to `inversions` exceptions.
    pub fn trend_holds(&self, inversions: usize) -> bool {
        let d: Vec<f64> = self.rows.iter().map(SimulationSummary::limit_distance).collect();
        d.windows(2).filter(|w| w[1] > w[0]).count() <= inversions
    }

    pub fn any_breach(&self) -> bool {
        self.rows.iter().any(SimulationSummary::breaches_threshold)
    }

    pub fn table(&self) -> String {
        let mut out = String::from("n,trials,failures,mean_components,se,mean_over_sqrt_n,se_over_sqrt_n,distance_to_limit,in_bracket\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                r.n,
                r.trials,
                r.failures,
                r.components.mean,
                r.components.std_error(),
                r.mean_over_sqrt_n(),
                r.se_over_sqrt_n(),
                r.limit_distance(),
                r.n < 100 || r.in_bracket()
            );
        }
        out
    }
}

/// One simulation per degree, in the given order; seeds are shared across degrees.
pub fn run_scaling(cfg: &ExperimentConfig) -> Result<ScalingReport, HarnessError> {
    let rows = cfg
        .ns
        .iter()
        .map(|&n| {
            let settings = TrialSettings::from_config(cfg, n);
            summarize(n, &run_trials(&settings, cfg.trials, cfg.execution(), cfg.threads))
        })
        .collect();
    let report = ScalingReport { rows };
    if let Some(path) = &cfg.out_path {
        write_file(path, report.table().as_bytes())?;
    }
    Ok(report)
}

/// Mean Monte Carlo area outside the lemniscate, without solving for
/// critical points; matches the `area_outside_est` column.
pub fn run_area(n: usize, trials: u64, samples: usize, master_seed: u64, exec: Execution, threads: usize) -> Result<SummaryAccumulator, HarnessError> {
    let areas = with_threads(threads, || {
        map_indexed(trials, exec, |t| {
            let poly = trial_polynomial(master_seed, n, t)?;
            Ok::<f64, HarnessError>(trial_area(&poly, master_seed, samples, t)?)
        })
    });
    let areas = areas.into_iter().collect::<Result<Vec<f64>, _>>()?;
    let parts: Vec<SummaryAccumulator> = areas.chunks(SUMMARY_BLOCK).map(SummaryAccumulator::from_slice).collect();
    Ok(merge_all(parts.iter()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(n: usize) -> TrialSettings {
        TrialSettings {
            area_samples: 200,
            ..TrialSettings::new(n, 2.0, 42)
        }
    }

    #[test]
    fn records_satisfy_component_identity() {
        for o in run_trials(&settings(30), 20, Execution::Parallel, 0) {
            let r = o.record().expect("solver failure");
            assert_eq!(r.components, 1 + r.n_crit_outside);
            assert!(r.components_annulus <= r.components);
            assert!(r.max_residual < 1e-10);
            assert_eq!(r.wall_micros, 0);
        }
    }

    #[test]
    fn degree_two_has_one_component() {
        let s = summarize(2, &run_trials(&settings(2), 200, Execution::Parallel, 0));
        assert_eq!(s.components.mean, 1.0);
        assert_eq!(s.failures, 0);
    }

    #[test]
    fn csv_is_thread_independent() {
        let s = settings(25);
        let a = csv_text(&run_trials(&s, 40, Execution::Sequential, 1));
        let b = csv_text(&run_trials(&s, 40, Execution::Parallel, 4));
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
        assert_eq!(a.lines().count(), 41);
    }

    #[test]
    fn summary_ignores_failures() {
        let mut outcomes = run_trials(&settings(10), 5, Execution::Sequential, 0);
        outcomes.push(TrialOutcome::Failed(TrialFailure {
            trial_index: 5,
            reason: "x".into(),
        }));
        let s = summarize(10, &outcomes);
        assert_eq!((s.trials, s.failures, s.components.count), (6, 1, 5));
        assert!(s.breaches_threshold());
        assert!(failures_text(&outcomes).contains("5,\"x\""));
    }

    #[test]
    fn area_matches_simulate_column() {
        let s = settings(40);
        let rec = run_trials(&s, 8, Execution::Parallel, 0);
        let acc = run_area(40, 8, 200, 42, Execution::Parallel, 0).unwrap();
        let direct = summarize(40, &rec).area;
        assert_eq!(acc.mean, direct.mean);
    }

    #[test]
    fn sidecar_appends() {
        assert_eq!(sidecar(Path::new("a/b.csv"), ".failures"), PathBuf::from("a/b.csv.failures"));
    }
}
