//! Component counts of the lemniscate `{log|P| < 0}` from critical values.
//!
//! Every bounded component of the lemniscate holds a root, and two components
//! merge exactly when a critical value crosses the level: the count is one
//! plus the number of critical points where `log|P| > 0`.

use crate::critpoints::CriticalSet;
use crate::polyeval::RootedPolynomial;
use crate::sampling::{sample_unit_disc_c, RngStream};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Critical values closer than this to the level are flagged.
pub const AMBIGUITY_LOG: f64 = 1e-9;
/// Looser margin used when excluding trials from oracle comparisons.
pub const ORACLE_EXCLUSION_LOG: f64 = 1e-6;
pub const DEFAULT_KAPPA: f64 = 2.0;
pub const MIN_BOUNDARY_POINTS: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum ComponentError {
    #[error("critical set is not converged")]
    NotConverged,
    #[error("kappa must be positive and finite, got {0}")]
    BadKappa(f64),
    #[error("inradius circle has non-positive radius {0}")]
    EmptyCircle(f64),
    #[error("need at least {MIN_BOUNDARY_POINTS} boundary points, got {0}")]
    TooFewBoundaryPoints(usize),
    #[error("need at least one sample")]
    NoSamples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentReport {
    pub components: usize,
    pub components_annulus: usize,
    pub n_crit_outside: usize,
    /// `log|P(beta_j)|` in critical-set order.
    pub crit_log_values: Vec<f64>,
    pub annulus_inner_radius: f64,
    /// Critical values within [`AMBIGUITY_LOG`] of zero.
    pub ambiguous: usize,
}

impl ComponentReport {
    /// Smallest `|log|P(beta_j)||`, `inf` without critical points.
    pub fn closest_to_level(&self) -> f64 {
        self.crit_log_values
            .iter()
            .map(|v| v.abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_ambiguous(&self) -> bool {
        self.ambiguous > 0
    }
}

/// `1 - kappa * sqrt(log n / n)`, clamped at 0 when the annulus covers the disc.
pub fn annulus_inner_radius(n: usize, kappa: f64) -> f64 {
    let n = n as f64;
    (1.0 - kappa * (n.ln() / n).sqrt()).max(0.0)
}

fn check_kappa(kappa: f64) -> Result<(), ComponentError> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(ComponentError::BadKappa(kappa))
    }
}

fn crit_logs(poly: &RootedPolynomial, crit: &CriticalSet) -> Result<Vec<f64>, ComponentError> {
    if !crit.converged {
        return Err(ComponentError::NotConverged);
    }
    Ok(crit.points.iter().map(|&b| poly.log_abs_p(b)).collect())
}

pub fn count_components(poly: &RootedPolynomial, crit: &CriticalSet) -> Result<usize, ComponentError> {
    let logs = crit_logs(poly, crit)?;
    Ok(1 + logs.iter().filter(|&&v| v > 0.0).count())
}

pub fn count_components_annulus(
    poly: &RootedPolynomial,
    crit: &CriticalSet,
    kappa: f64,
) -> Result<usize, ComponentError> {
    check_kappa(kappa)?;
    let logs = crit_logs(poly, crit)?;
    let inner = annulus_inner_radius(poly.degree(), kappa);
    Ok(1 + count_in_annulus(&crit.points, &logs, inner))
}

fn count_in_annulus(points: &[num_complex::Complex64], logs: &[f64], inner: f64) -> usize {
    points
        .iter()
        .zip(logs)
        .filter(|(b, &v)| {
            let r = b.norm();
            v > 0.0 && r > inner && r < 1.0
        })
        .count()
}

/// Full report for one trial.
pub fn analyze(
    poly: &RootedPolynomial,
    crit: &CriticalSet,
    kappa: f64,
) -> Result<ComponentReport, ComponentError> {
    check_kappa(kappa)?;
    let logs = crit_logs(poly, crit)?;
    let inner = annulus_inner_radius(poly.degree(), kappa);
    let n_crit_outside = logs.iter().filter(|&&v| v > 0.0).count();
    let report = ComponentReport {
        components: 1 + n_crit_outside,
        components_annulus: 1 + count_in_annulus(&crit.points, &logs, inner),
        n_crit_outside,
        ambiguous: logs.iter().filter(|v| v.abs() < AMBIGUITY_LOG).count(),
        crit_log_values: logs,
        annulus_inner_radius: inner,
    };
    debug_assert!(report.components_annulus <= report.components);
    debug_assert!(report.components <= poly.degree().max(1));
    Ok(report)
}

/// Whether `log|P| < 0` at `points` equally spaced points of the circle of
/// the given radius.
pub fn inradius_holds_at(
    poly: &RootedPolynomial,
    radius: f64,
    boundary_points: usize,
) -> Result<bool, ComponentError> {
    if boundary_points < MIN_BOUNDARY_POINTS {
        return Err(ComponentError::TooFewBoundaryPoints(boundary_points));
    }
    if radius.is_nan() || radius <= 0.0 {
        return Err(ComponentError::EmptyCircle(radius));
    }
    let step = TAU / boundary_points as f64;
    Ok((0..boundary_points).all(|k| {
        let w = num_complex::Complex64::from_polar(radius, step * k as f64);
        poly.log_abs_p_fast(w) < 0.0
    }))
}

/// Inradius check on the inner circle of the annulus.
pub fn inradius_holds(
    poly: &RootedPolynomial,
    kappa: f64,
    boundary_points: usize,
) -> Result<bool, ComponentError> {
    check_kappa(kappa)?;
    inradius_holds_at(poly, annulus_inner_radius(poly.degree(), kappa), boundary_points)
}

/// Default boundary resolution: four points per root, at least 256.
pub fn default_boundary_points(n: usize) -> usize {
    (4 * n).max(MIN_BOUNDARY_POINTS)
}

/// `pi` times the fraction of uniform disc points with `log|P| > 0`.
pub fn area_outside_mc(
    poly: &RootedPolynomial,
    samples: usize,
    stream: &mut RngStream,
) -> Result<f64, ComponentError> {
    if samples == 0 {
        return Err(ComponentError::NoSamples);
    }
    let hits = (0..samples)
        .filter(|_| poly.log_abs_p_fast(sample_unit_disc_c(stream)) > 0.0)
        .count();
    Ok(PI * hits as f64 / samples as f64)
}
