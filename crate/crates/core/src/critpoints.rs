//! Critical points of `P_n` as the zeros of `S(z) = sum 1/(z - x_k)`.
//!
//! Away from the roots `P' = P * S` and `P''/P' = (S^2 - R)/S` with
//! `R = sum 1/(z - x_k)^2`, so the Newton step for `P'` is `S / (S^2 - R)`.
//! The solver runs Aberth-Ehrlich sweeps (Gauss-Seidel order) on that step,
//! starting every iterate next to a root: each root of a random polynomial
//! tends to have a critical point very close by.

use crate::polyeval::{recip, RootedPolynomial};
use crate::sampling::RngStream;
use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

/// Points stop moving once their residual drops below this.
pub const SWEEP_TOL: f64 = 1e-12;
/// Residual a converged point must certify.
pub const ACCEPT_TOL: f64 = 1e-10;
/// Slack allowed outside the closed unit disc.
pub const DISC_SLACK: f64 = 1e-9;
/// Minimum separation between two reported critical points.
pub const MIN_CRIT_SEPARATION: f64 = 1e-12;
/// Default sweep budget.
pub const DEFAULT_MAX_ITERS: usize = 500;

const COLLISION_DIST: f64 = 1e-14;
const COLLISION_SWEEPS: u32 = 3;
const MAX_RESTARTS: u32 = 5;
const GUESS_SCALE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSet {
    pub points: Vec<Complex64>,
    /// `|S(beta)| * min_k |beta - x_k|` per point.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub restarts: u32,
    pub converged: bool,
}

impl CriticalSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// The empty set of a degree-1 polynomial.
    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            residuals: Vec::new(),
            iterations: 0,
            restarts: 0,
            converged: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("critical points need degree >= 2, got {0}")]
    DegreeTooSmall(usize),
    #[error("no convergence after {} sweeps (max residual {:e})", .0.iterations, .0.max_residual())]
    NonConvergence(Box<CriticalSet>),
    #[error("iterates kept landing on roots; gave up after {restarts} restarts")]
    RootCollision { restarts: u32 },
    #[error("critical set is not converged")]
    NotConverged,
}

/// Roots `x_1 .. x_{n-1}`, each pushed by `1e-3 * d_k` in a random direction,
/// `d_k` being the distance to the nearest other root.
pub fn initial_guesses(poly: &RootedPolynomial, stream: &mut RngStream) -> Vec<Complex64> {
    let roots = poly.roots();
    let n = roots.len();
    if n < 2 {
        return Vec::new();
    }
    (0..n - 1)
        .map(|k| {
            let nearest = nearest_other(roots, k);
            let angle = TAU * stream.next_open01();
            roots[k] + Complex64::from_polar(GUESS_SCALE * nearest, angle)
        })
        .collect()
}

fn nearest_other(roots: &[Complex64], k: usize) -> f64 {
    roots
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, r)| (r - roots[k]).norm_sqr())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

enum Attempt {
    Done(CriticalSet),
    Collision,
}

/// All `n - 1` critical points. `tol` is the residual every point must reach;
/// the sweeps themselves run down to [`SWEEP_TOL`].
pub fn find_critical_points(
    poly: &RootedPolynomial,
    max_iters: usize,
    tol: f64,
    stream: &mut RngStream,
) -> Result<CriticalSet, SolveError> {
    let n = poly.degree();
    if n < 2 {
        return Err(SolveError::DegreeTooSmall(n));
    }
    let mut restarts = 0;
    loop {
        let guesses = initial_guesses(poly, stream);
        match aberth(poly, guesses, max_iters, tol.min(SWEEP_TOL)) {
            Attempt::Done(mut set) => {
                set.restarts = restarts;
                set.converged = certify(&set, tol);
                if set.converged {
                    return Ok(set);
                }
                if restarts >= MAX_RESTARTS {
                    return Err(SolveError::NonConvergence(Box::new(set)));
                }
            }
            Attempt::Collision => {
                if restarts >= MAX_RESTARTS {
                    return Err(SolveError::RootCollision { restarts });
                }
            }
        }
        restarts += 1;
    }
}

/// Solver with the default budget and acceptance tolerance.
pub fn solve(poly: &RootedPolynomial, stream: &mut RngStream) -> Result<CriticalSet, SolveError> {
    if poly.degree() == 1 {
        return Ok(CriticalSet::empty());
    }
    find_critical_points(poly, DEFAULT_MAX_ITERS, ACCEPT_TOL, stream)
}

fn certify(set: &CriticalSet, tol: f64) -> bool {
    let residual_ok = set.residuals.iter().all(|&r| r < tol);
    let disc_ok = set.points.iter().all(|z| z.norm() <= 1.0 + DISC_SLACK);
    let sep2 = MIN_CRIT_SEPARATION * MIN_CRIT_SEPARATION;
    let separated = set.points.iter().enumerate().all(|(i, a)| {
        set.points[i + 1..]
            .iter()
            .all(|b| (a - b).norm_sqr() >= sep2)
    });
    residual_ok && disc_ok && separated
}

fn aberth(poly: &RootedPolynomial, mut z: Vec<Complex64>, max_iters: usize, sweep_tol: f64) -> Attempt {
    let m = z.len();
    let mut active = vec![true; m];
    let mut residuals = vec![f64::INFINITY; m];
    let mut near_root = vec![0u32; m];
    let mut iterations = 0;

    while iterations < max_iters && active.iter().any(|&a| a) {
        iterations += 1;
        for i in 0..m {
            if !active[i] {
                continue;
            }
            let zi = z[i];
            let Some((s, r, gap)) = poly.sums_and_gap(zi) else {
                return Attempt::Collision;
            };
            if gap < COLLISION_DIST {
                near_root[i] += 1;
                if near_root[i] >= COLLISION_SWEEPS {
                    return Attempt::Collision;
                }
            } else {
                near_root[i] = 0;
            }
            let residual = s.norm() * gap;
            residuals[i] = residual;
            // One more step past the threshold polishes the point to full precision.
            let polished = residual < sweep_tol;
            let Some(newton) = recip(s * s - r).map(|inv| s * inv) else {
                return Attempt::Collision;
            };
            let mut repulsion = Complex64::new(0.0, 0.0);
            for (j, &zj) in z.iter().enumerate() {
                if j != i {
                    if let Some(w) = recip(zi - zj) {
                        repulsion += w;
                    }
                }
            }
            let step = newton / (1.0 - newton * repulsion);
            if !(step.re.is_finite() && step.im.is_finite()) {
                return Attempt::Collision;
            }
            let next = zi - step;
            z[i] = next;
            // No representable progress left: freeze and let certification decide.
            if polished || step.norm() <= 4.0 * f64::EPSILON * next.norm().max(gap) {
                active[i] = false;
            }
        }
    }

    for (i, &zi) in z.iter().enumerate() {
        residuals[i] = match poly.sums_and_gap(zi) {
            Some((s, _, gap)) => s.norm() * gap,
            None => f64::INFINITY,
        };
    }
    Attempt::Done(CriticalSet {
        points: z,
        residuals,
        iterations,
        restarts: 0,
        converged: false,
    })
}

/// Distance from each critical point to its nearest root, ascending.
pub fn pairing_distances(poly: &RootedPolynomial, crit: &CriticalSet) -> Result<Vec<f64>, SolveError> {
    if !crit.converged {
        return Err(SolveError::NotConverged);
    }
    let mut out: Vec<f64> = crit
        .points
        .iter()
        .map(|b| {
            poly.roots()
                .iter()
                .map(|x| (b - x).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}
