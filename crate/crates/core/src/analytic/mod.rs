//! Closed forms and quadratures for `log|r - X|`, `X` uniform on the disc.

pub mod quadrature;

use quadrature::{integrate, integrate_vec, NonConvergence, DEFAULT_MAX_PANELS};
use libm::erfc;
use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error(transparent)]
    Quadrature(#[from] NonConvergence),
}

fn domain(what: &'static str, value: f64) -> AnalyticError {
    AnalyticError::Domain { what, value }
}

pub fn zeta2() -> f64 {
    PI * PI / 6.0
}

/// `(pi^2 - 6) / 12`, the variance of `log|1 - X|`.
pub fn var_log_one_minus_x_closed() -> f64 {
    (PI * PI - 6.0) / 12.0
}

/// `sqrt((zeta(2) - 1) / pi)`.
pub fn limit_constant() -> f64 {
    ((zeta2() - 1.0) / PI).sqrt()
}

/// `sqrt(pi (zeta(2) - 1))`, the limit of `sqrt(n)` times the expected
/// area of the disc outside the lemniscate.
pub fn area_limit_constant() -> f64 {
    (PI * (zeta2() - 1.0)).sqrt()
}

/// `Li2(x) = sum x^k / k^2` on `[0, 1]`.
pub fn dilog(x: f64) -> Result<f64, AnalyticError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain("dilog argument", x));
    }
    Ok(dilog_unchecked(x))
}

fn dilog_unchecked(x: f64) -> f64 {
    if x == 1.0 {
        return zeta2();
    }
    if x > 0.5 {
        return zeta2() - x.ln() * (-x).ln_1p() - dilog_series(1.0 - x);
    }
    dilog_series(x)
}

fn dilog_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = x;
    let mut k = 1.0f64;
    while pow > 1e-18 * k * k {
        sum += pow / (k * k);
        pow *= x;
        k += 1.0;
    }
    sum
}

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Variance of `log|1 - X|` as `int_0^1 rho Li2(rho^2) d rho`.
pub fn var_log_one_minus_x() -> f64 {
    match integrate(|rho| rho * dilog_unchecked(rho * rho), 0.0, 1.0, 1e-13) {
        Ok(q) => q.value[0],
        Err(e) => e.value,
    }
}

/// Mean and central moments of `log|r - X|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTable {
    pub r: f64,
    pub u: f64,
    pub sigma: f64,
    pub gamma3: f64,
}

/// `E log|r - X| = (r^2 - 1) / 2`.
pub fn mean_log_dist(r: f64) -> f64 {
    0.5 * (r * r - 1.0)
}

const MOMENT_TOL: f64 = 1e-10;

/// Moments by quadrature over the disc in polar coordinates, using the
/// reflection symmetry in the angle and splitting the radius at `r`.
pub fn moments_log_dist(r: f64) -> Result<MomentTable, AnalyticError> {
    if !(0.0..=1.0).contains(&r) {
        return Err(domain("radius", r));
    }
    let u = mean_log_dist(r);
    let failure: Cell<Option<NonConvergence>> = Cell::new(None);
    let ring = |rho: f64| -> [f64; 2] {
        let dr2 = (r - rho) * (r - rho);
        let inner = integrate_vec(
            |theta| {
                let s = (0.5 * theta).sin();
                let l = 0.5 * (dr2 + 4.0 * r * rho * s * s).ln() - u;
                let l2 = l * l;
                [l2, l2 * l]
            },
            &[0.0, PI],
            MOMENT_TOL,
            DEFAULT_MAX_PANELS,
        );
        let v = match inner {
            Ok(q) => q.value,
            Err(e) => {
                failure.set(Some(e));
                [e.value, f64::NAN]
            }
        };
        [v[0] * rho, v[1] * rho]
    };
    let outer = integrate_vec(ring, &[0.0, r, 1.0], MOMENT_TOL, DEFAULT_MAX_PANELS)?;
    if let Some(e) = failure.get() {
        return Err(e.into());
    }
    let scale = 2.0 / PI;
    Ok(MomentTable {
        r,
        u,
        sigma: (scale * outer.value[0]).sqrt(),
        gamma3: scale * outer.value[1],
    })
}

/// `E[log^2 |r - X|]` from the angular Fourier series of the logarithm.
pub fn second_moment_fourier(r: f64) -> Result<f64, AnalyticError> {
    if !(0.0..=1.0).contains(&r) {
        return Err(domain("radius", r));
    }
    let f = |rho: f64| {
        let (lo, hi) = if rho < r { (rho, r) } else { (r, rho) };
        if hi == 0.0 {
            return 0.0;
        }
        let lh = hi.ln();
        2.0 * rho * (lh * lh + 0.5 * dilog_unchecked((lo / hi) * (lo / hi)))
    };
    let q = integrate_vec(|x| [f(x)], &[0.0, r, 1.0], 1e-13, DEFAULT_MAX_PANELS)?;
    Ok(q.value[0])
}

/// Lazily filled moment tables keyed by the exact radius.
#[derive(Debug, Default)]
pub struct MomentCache {
    tables: RefCell<HashMap<u64, MomentTable>>,
}

impl MomentCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, r: f64) -> Result<MomentTable, AnalyticError> {
        if let Some(t) = self.tables.borrow().get(&r.to_bits()) {
            return Ok(*t);
        }
        let t = moments_log_dist(r)?;
        self.tables.borrow_mut().insert(r.to_bits(), t);
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.tables.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Correction term `-gamma3 / (6 sqrt(2 pi) sigma^3) (x^2 - 1) exp(-x^2/2)`.
pub fn edgeworth_q1(m: &MomentTable, x: f64) -> f64 {
    -m.gamma3 / (6.0 * (2.0 * PI).sqrt() * m.sigma.powi(3)) * (x * x - 1.0) * (-0.5 * x * x).exp()
}

/// Normal-approximation prediction of the expected area of the disc outside
/// `{log|P| < c_n}`:
/// `2 pi int_{r0}^1 [1 - Phi(C_r) (+ Q1(C_r)/sqrt n)] r dr` with
/// `C_r = sqrt(n) (c_n - u(r)) / sigma(r)` and `r0 = 1 - kappa sqrt(log n / n)`.
pub fn edgeworth_area(n: usize, kappa: f64, c_n: f64, include_q1: bool) -> Result<f64, AnalyticError> {
    if n < 2 {
        return Err(domain("degree", n as f64));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(domain("kappa", kappa));
    }
    if !(c_n >= 0.0 && c_n.is_finite()) {
        return Err(domain("level shift", c_n));
    }
    let nf = n as f64;
    let r0 = (1.0 - kappa * (nf.ln() / nf).sqrt()).max(0.0);
    let cache = MomentCache::new();
    let failure: Cell<Option<AnalyticError>> = Cell::new(None);
    let integrand = |r: f64| -> [f64; 1] {
        let m = match cache.get(r) {
            Ok(m) => m,
            Err(e) => {
                failure.set(Some(e));
                return [f64::NAN];
            }
        };
        let c = nf.sqrt() * (c_n - m.u) / m.sigma;
        let mut v = phi(-c);
        if include_q1 {
            v += edgeworth_q1(&m, c) / nf.sqrt();
        }
        [2.0 * PI * v * r]
    };
    // Rough scale for the relative target: the integrand lives within a
    // few multiples of 1/sqrt(n) of the unit circle.
    let scale = (2.0 * PI * (1.0 - r0).min(3.0 / nf.sqrt())).max(1e-300);
    let q = integrate_vec(integrand, &[r0, 1.0], 1e-7 * scale, DEFAULT_MAX_PANELS);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(q?.value[0])
}
