//! The walk `W_n(r) = sum_k Y_k(r)` with increments `Y = r - Re 1/(r - X)`.
//!
//! `Y` has mean zero and tails `P(Y <= t) = 1/(4 (r - t)^2)` below
//! `r - 1/(1 + r)` and `P(Y > t) = 1/(4 (t - r)^2)` above `r + 1/(1 - r)`:
//! the second moment diverges logarithmically.

use crate::par::{map_blocks, Execution};
use crate::sampling::{derive_substream, sample_unit_disc_c, RngStream};
use crate::stats::Estimate;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeavyTailError {
    #[error("r must lie in (0, 1), got {0}")]
    BadRadius(f64),
    #[error("t = {t} lies in the middle range ({left}, {right}) where no closed form is used")]
    MiddleRangeUnsupported { t: f64, left: f64, right: f64 },
    #[error("interval start {a} is below the right cut {right}")]
    BelowRightCut { a: f64, right: f64 },
    #[error("empty interval: a = {a} > b = {b}")]
    EmptyInterval { a: f64, b: f64 },
    #[error("need at least one step and one trial")]
    NoWork,
}

/// Cut points beyond which the law of `Y(r)` has closed-form tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailLaw {
    pub r: f64,
    pub left_cut: f64,
    pub right_cut: f64,
}

impl TailLaw {
    pub fn new(r: f64) -> Result<Self, HeavyTailError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(HeavyTailError::BadRadius(r));
        }
        Ok(Self {
            r,
            left_cut: r - 1.0 / (1.0 + r),
            right_cut: r + 1.0 / (1.0 - r),
        })
    }

    pub fn cdf(&self, t: f64) -> Result<f64, HeavyTailError> {
        let tail = 1.0 / (4.0 * (self.r - t) * (self.r - t));
        if t <= self.left_cut {
            Ok(tail)
        } else if t >= self.right_cut {
            Ok(1.0 - tail)
        } else {
            Err(HeavyTailError::MiddleRangeUnsupported {
                t,
                left: self.left_cut,
                right: self.right_cut,
            })
        }
    }

    /// `P(Y > t)` for `t` at or above the right cut.
    pub fn upper_tail(&self, t: f64) -> Result<f64, HeavyTailError> {
        if t < self.right_cut {
            return Err(HeavyTailError::BelowRightCut {
                a: t,
                right: self.right_cut,
            });
        }
        Ok(1.0 / (4.0 * (t - self.r) * (t - self.r)))
    }
}

pub fn cdf_y_tail(r: f64, t: f64) -> Result<f64, HeavyTailError> {
    TailLaw::new(r)?.cdf(t)
}

/// `Y` for a given disc point; `None` when it coincides with `r`.
pub fn y_of(r: f64, x: Complex64) -> Option<f64> {
    let d = Complex64::new(r, 0.0) - x;
    let q = d.norm_sqr();
    (q > 0.0).then(|| r - d.re / q)
}

pub fn sample_y(r: f64, stream: &mut RngStream) -> f64 {
    loop {
        if let Some(y) = y_of(r, sample_unit_disc_c(stream)) {
            return y;
        }
    }
}

/// One walk of `n` steps.
pub fn sample_walk(r: f64, n: usize, stream: &mut RngStream) -> f64 {
    (0..n).map(|_| sample_y(r, stream)).sum()
}

const WALK_BLOCK: u64 = 4096;

/// Fraction of walks with `W_n(r)` in `[a, b]`; walk `t` uses trial stream `t`.
pub fn walk_interval_prob_mc(
    r: f64,
    n: usize,
    a: f64,
    b: f64,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Estimate, HeavyTailError> {
    TailLaw::new(r)?;
    if a > b {
        return Err(HeavyTailError::EmptyInterval { a, b });
    }
    if n == 0 || trials == 0 {
        return Err(HeavyTailError::NoWork);
    }
    let hits: u64 = map_blocks(trials, WALK_BLOCK, exec, |_, range| {
        range
            .filter(|&t| {
                let w = sample_walk(r, n, &mut derive_substream(seed, t));
                a <= w && w <= b
            })
            .count() as u64
    })
    .iter()
    .sum();
    Ok(Estimate::proportion(hits, trials))
}

/// `n [1/(4 (a - r)^2) - 1/(4 (b - r)^2)]`: one increment alone lands the
/// walk in `[a, b]`.
pub fn single_jump_prediction(r: f64, n: usize, a: f64, b: f64) -> Result<f64, HeavyTailError> {
    let law = TailLaw::new(r)?;
    if b < a {
        return Err(HeavyTailError::EmptyInterval { a, b });
    }
    Ok(n as f64 * (law.upper_tail(a)? - law.upper_tail(b)?))
}

/// Truncated moments `E[Y 1{|Y| <= m}]` and `E[Y^2 1{|Y| <= m}]`.
pub fn truncated_moments(ys: &[f64], m: f64) -> (Estimate, Estimate) {
    use crate::stats::SummaryAccumulator;
    let mut first = SummaryAccumulator::new();
    let mut second = SummaryAccumulator::new();
    for &y in ys {
        let kept = if y.abs() <= m { y } else { 0.0 };
        first.push(kept);
        second.push(kept * kept);
    }
    (first.estimate(), second.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::median_of_means_estimate;

    #[test]
    fn plug_in() {
        assert_eq!(y_of(0.5, Complex64::new(0.0, 0.0)), Some(-1.5));
        assert_eq!(y_of(0.5, Complex64::new(0.5, 0.0)), None);
    }

    #[test]
    fn cut_points() {
        let law = TailLaw::new(0.5).unwrap();
        assert!((law.left_cut + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(law.right_cut, 2.5);
        assert!(law.left_cut < law.r && law.r < law.right_cut);
        assert!(TailLaw::new(1.0).is_err());
        assert!(TailLaw::new(0.0).is_err());
    }

    #[test]
    fn closed_form_tails() {
        assert!((cdf_y_tail(0.5, -1.0 / 6.0).unwrap() - 0.5625).abs() < 1e-15);
        assert!((cdf_y_tail(0.5, 2.5).unwrap() - 0.9375).abs() < 1e-15);
        assert!(matches!(
            cdf_y_tail(0.5, 0.0),
            Err(HeavyTailError::MiddleRangeUnsupported { .. })
        ));
    }

    #[test]
    fn prediction_values() {
        let p = single_jump_prediction(0.9, 200, 100.0, 110.0).unwrap();
        let want = 200.0 * (1.0 / (4.0 * 99.1f64.powi(2)) - 1.0 / (4.0 * 109.1f64.powi(2)));
        assert!((p - want).abs() < 1e-18);
        assert!((p - 8.9e-4).abs() < 1e-5);
        assert_eq!(single_jump_prediction(0.9, 200, 100.0, 100.0).unwrap(), 0.0);
        let twice = single_jump_prediction(0.9, 400, 100.0, 110.0).unwrap();
        assert!((twice - 2.0 * p).abs() < 1e-18);
        assert!(matches!(
            single_jump_prediction(0.9, 200, 5.0, 110.0),
            Err(HeavyTailError::BelowRightCut { .. })
        ));
    }

    #[test]
    fn point_interval_has_zero_probability() {
        let e = walk_interval_prob_mc(0.5, 5, 1.0, 1.0, 1000, 3, Execution::Parallel).unwrap();
        assert_eq!((e.value, e.std_error), (0.0, 0.0));
    }

    #[test]
    fn interval_probability_is_monotone() {
        let a = walk_interval_prob_mc(0.5, 10, 0.0, 1.0, 5000, 9, Execution::Parallel).unwrap();
        let b = walk_interval_prob_mc(0.5, 10, 0.0, 3.0, 5000, 9, Execution::Parallel).unwrap();
        assert!(b.value >= a.value);
        let c = walk_interval_prob_mc(0.5, 10, 0.0, 3.0, 5000, 9, Execution::Sequential).unwrap();
        assert_eq!(b, c);
    }

    fn draws(r: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut s = derive_substream(seed, 0);
        (0..n).map(|_| sample_y(r, &mut s)).collect()
    }

    #[test]
    fn mean_zero_and_left_cut_mass() {
        let ys = draws(0.5, 1_000_000, 41);
        let mom = median_of_means_estimate(&ys, 32);
        assert!(mom.value.abs() < 3.0 * mom.std_error, "{mom:?}");
        let hits = ys.iter().filter(|&&y| y <= -1.0 / 6.0).count() as u64;
        let e = Estimate::proportion(hits, ys.len() as u64);
        assert!((e.value - 0.5625).abs() < 3.0 * e.std_error);
    }

    #[test]
    fn truncated_mean_is_small() {
        let ys = draws(0.5, 2_000_000, 43);
        for m in [10.0, 100.0] {
            let (first, _) = truncated_moments(&ys, m);
            assert!(first.value.abs() <= 5.0 / m, "m={m}: {first:?}");
        }
    }
}
