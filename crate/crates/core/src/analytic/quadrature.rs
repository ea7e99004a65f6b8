//! Globally adaptive Gauss-Legendre quadrature.
//!
//! Each panel is integrated with the 10-point rule on the whole panel and on
//! its two halves; the halves' sum is the panel value and the difference is
//! its error estimate. The panel with the largest estimate is bisected until
//! the summed estimate meets the tolerance or the panel budget runs out.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;
use thiserror::Error;

pub const ORDER: usize = 10;
pub const DEFAULT_MAX_PANELS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("quadrature did not converge: value {value:e}, error estimate {error:e} after {panels} panels")]
pub struct NonConvergence {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad<const K: usize> {
    pub value: [f64; K],
    /// Summed per-panel error estimate, largest component.
    pub error: f64,
    pub panels: usize,
}

/// Nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let m = ORDER;
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[m - 1 - i] = x;
            weights[m - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn rule<const K: usize, F: Fn(f64) -> [f64; K]>(f: &F, a: f64, b: f64) -> [f64; K] {
    let (nodes, weights) = gauss_legendre();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = [0.0; K];
    for (x, w) in nodes.iter().zip(weights) {
        let v = f(mid + half * x);
        for k in 0..K {
            acc[k] += w * v[k];
        }
    }
    acc.map(|s| s * half)
}

struct Panel<const K: usize> {
    a: f64,
    b: f64,
    left: [f64; K],
    right: [f64; K],
    error: f64,
}

impl<const K: usize> Panel<K> {
    fn new<F: Fn(f64) -> [f64; K]>(f: &F, a: f64, b: f64, whole: [f64; K]) -> Self {
        let m = 0.5 * (a + b);
        let left = rule(f, a, m);
        let right = rule(f, m, b);
        let error = (0..K)
            .map(|k| (whole[k] - left[k] - right[k]).abs())
            .fold(0.0, f64::max);
        Self { a, b, left, right, error }
    }
}

impl<const K: usize> PartialEq for Panel<K> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const K: usize> Eq for Panel<K> {}
impl<const K: usize> PartialOrd for Panel<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Panel<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Vector-valued integral of `f` over `[a, b]` to absolute tolerance `tol`
/// (per component), starting from the given breakpoints.
pub fn integrate_vec<const K: usize, F>(
    f: F,
    breaks: &[f64],
    tol: f64,
    max_panels: usize,
) -> Result<Quad<K>, NonConvergence>
where
    F: Fn(f64) -> [f64; K],
{
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2).filter(|w| w[1] > w[0]) {
        let whole = rule(&f, w[0], w[1]);
        heap.push(Panel::new(&f, w[0], w[1], whole));
    }
    loop {
        let error: f64 = heap.iter().map(|p| p.error).sum();
        let panels = heap.len();
        let done = error <= tol;
        let worst_is_tiny = heap
            .peek()
            .is_none_or(|p| p.b - p.a <= 1e-13 * p.a.abs().max(p.b.abs()).max(1e-300));
        if done || panels >= max_panels || worst_is_tiny {
            let mut panels_sorted: Vec<&Panel<K>> = heap.iter().collect();
            panels_sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
            let mut value = [0.0; K];
            for p in panels_sorted {
                for k in 0..K {
                    value[k] += p.left[k] + p.right[k];
                }
            }
            return if done {
                Ok(Quad { value, error, panels })
            } else {
                Err(NonConvergence {
                    value: value[0],
                    error,
                    panels,
                })
            };
        }
        let p = heap.pop().expect("non-empty heap");
        let m = 0.5 * (p.a + p.b);
        heap.push(Panel::new(&f, p.a, m, p.left));
        heap.push(Panel::new(&f, m, p.b, p.right));
    }
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Quad<1>, NonConvergence> {
    integrate_vec(|x| [f(x)], &[a, b], tol, DEFAULT_MAX_PANELS)
}

/// Composite rule on `panels` equal panels; no adaptivity.
pub fn fixed_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let g = |x: f64| [f(x)];
    (0..panels)
        .map(|i| rule(&g, a + i as f64 * h, a + (i + 1) as f64 * h)[0])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_degree_19() {
        let q = rule(&|x: f64| [x.powi(19) + x.powi(18)], -1.0, 1.0)[0];
        assert!((q - 2.0 / 19.0).abs() < 1e-14);
        let (nodes, weights) = gauss_legendre();
        assert!((weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn smooth_and_singular() {
        let q = integrate(f64::exp, 0.0, 1.0, 1e-13).unwrap();
        assert!((q.value[0] - (1f64.exp() - 1.0)).abs() < 1e-13);
        let q = integrate(|x| x.ln(), 0.0, 1.0, 1e-11).unwrap();
        assert!((q.value[0] + 1.0).abs() < 1e-10);
        let q = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-9).unwrap();
        assert!((q.value[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn vector_and_breakpoints() {
        let q = integrate_vec(|x| [x, (x - 0.3).abs()], &[0.0, 0.3, 1.0], 1e-12, 100).unwrap();
        assert!((q.value[0] - 0.5).abs() < 1e-14);
        assert!((q.value[1] - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let err = integrate_vec(|x| [1.0 / x], &[0.0, 1.0], 1e-12, 8).unwrap_err();
        assert!(err.error > 1e-12);
        assert_eq!(err.panels, 8);
    }
}
