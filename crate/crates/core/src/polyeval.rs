//! Root-based evaluation of `P(z) = prod (z - x_k)` and its root sums.
//!
//! Nothing here expands coefficients: `log|P|`, `sum 1/(z - x_k)` and
//! `sum 1/(z - x_k)^2` are accumulated term by term in root-index order, which
//! keeps degree-10^4 polynomials finite and makes every sum reproducible.

use num_complex::Complex64;
use std::fmt::Write as _;
use thiserror::Error;

/// Distance below which `z` is treated as sitting on a root.
pub const ROOT_HIT: f64 = 1e-300;
/// Minimum pairwise root separation accepted on construction.
pub const MIN_SEPARATION: f64 = 1e-15;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("a polynomial needs at least one root")]
    Empty,
    #[error("root {index} is not finite")]
    NonFinite { index: usize },
    #[error("root {index} = {re}+{im}i lies outside the closed unit disc")]
    OutsideDisc { index: usize, re: f64, im: f64 },
    #[error("roots {i} and {j} are closer than {MIN_SEPARATION:e}")]
    Repeated { i: usize, j: usize },
    #[error("evaluation point coincides with root {index}")]
    AtRoot { index: usize },
    #[error("skip index {index} out of range for degree {degree}")]
    SkipOutOfRange { index: usize, degree: usize },
    #[error("malformed root line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// `P_n` held by its roots, all in the closed unit disc and pairwise distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedPolynomial {
    roots: Vec<Complex64>,
}

impl RootedPolynomial {
    pub fn new(roots: Vec<Complex64>) -> Result<Self, PolyError> {
        if roots.is_empty() {
            return Err(PolyError::Empty);
        }
        for (index, r) in roots.iter().enumerate() {
            if !(r.re.is_finite() && r.im.is_finite()) {
                return Err(PolyError::NonFinite { index });
            }
            if r.norm_sqr() > 1.0 + 4.0 * f64::EPSILON {
                return Err(PolyError::OutsideDisc {
                    index,
                    re: r.re,
                    im: r.im,
                });
            }
        }
        let sep2 = MIN_SEPARATION * MIN_SEPARATION;
        for i in 0..roots.len() {
            for j in i + 1..roots.len() {
                if (roots[i] - roots[j]).norm_sqr() < sep2 {
                    return Err(PolyError::Repeated { i, j });
                }
            }
        }
        Ok(Self { roots })
    }

    pub fn degree(&self) -> usize {
        self.roots.len()
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    /// Every root multiplied by `exp(i theta)`.
    pub fn rotated(&self, theta: f64) -> Self {
        let w = Complex64::from_polar(1.0, theta);
        Self {
            roots: self.roots.iter().map(|r| r * w).collect(),
        }
    }

    pub fn conjugated(&self) -> Self {
        Self {
            roots: self.roots.iter().map(|r| r.conj()).collect(),
        }
    }

    /// `log|P(z)|`, or `-inf` when `z` is within [`ROOT_HIT`] of a root.
    pub fn log_abs_p(&self, z: Complex64) -> f64 {
        sum_log_abs(&self.roots, z, &[])
    }

    /// `log|P(z)|` from blocked products of `|z - x_k|^2`: one logarithm per
    /// 16 roots. Agrees with [`Self::log_abs_p`] to a few ulps per block;
    /// blocks that leave the normal range are redone term by term.
    pub fn log_abs_p_fast(&self, z: Complex64) -> f64 {
        let mut acc = 0.0;
        for chunk in self.roots.chunks(16) {
            let mut prod = 1.0;
            for &x in chunk {
                prod *= (z - x).norm_sqr();
            }
            if prod > 1e-290 && prod < 1e290 {
                acc += 0.5 * prod.ln();
            } else {
                acc += sum_log_abs(chunk, z, &[]);
            }
        }
        acc
    }

    /// `log|P(z) / (z - x_skip)|`.
    pub fn log_abs_q(&self, z: Complex64, skip_index: usize) -> Result<f64, PolyError> {
        self.check_skip(&[skip_index])?;
        Ok(sum_log_abs(&self.roots, z, &[skip_index]))
    }

    /// `sum_{k not in skip} 1/(z - x_k)`.
    pub fn s_sum(&self, z: Complex64, skip: &[usize]) -> Result<Complex64, PolyError> {
        self.check_skip(skip)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &x) in self.roots.iter().enumerate() {
            if skip.contains(&k) {
                continue;
            }
            acc += recip(z - x).ok_or(PolyError::AtRoot { index: k })?;
        }
        Ok(acc)
    }

    /// `sum_{k not in skip} 1/(z - x_k)^2`.
    pub fn r_sum(&self, z: Complex64, skip: &[usize]) -> Result<Complex64, PolyError> {
        self.check_skip(skip)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &x) in self.roots.iter().enumerate() {
            if skip.contains(&k) {
                continue;
            }
            let w = recip(z - x).ok_or(PolyError::AtRoot { index: k })?;
            acc += w * w;
        }
        Ok(acc)
    }

    /// Full sums `(S, R)` plus the distance to the nearest root, in one pass.
    /// `None` if `z` sits on a root.
    pub fn sums_and_gap(&self, z: Complex64) -> Option<(Complex64, Complex64, f64)> {
        let mut s = Complex64::new(0.0, 0.0);
        let mut r = Complex64::new(0.0, 0.0);
        let mut gap2 = f64::INFINITY;
        for &x in &self.roots {
            let d = z - x;
            let q = d.norm_sqr();
            gap2 = gap2.min(q);
            let w = recip(d)?;
            s += w;
            r += w * w;
        }
        Some((s, r, gap2.sqrt()))
    }

    fn check_skip(&self, skip: &[usize]) -> Result<(), PolyError> {
        match skip.iter().find(|&&i| i >= self.roots.len()) {
            Some(&index) => Err(PolyError::SkipOutOfRange {
                index,
                degree: self.roots.len(),
            }),
            None => Ok(()),
        }
    }

    /// One `re,im` line per root, round-trip exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in &self.roots {
            let _ = writeln!(out, "{:?},{:?}", r.re, r.im);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, PolyError> {
        let mut roots = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "re,im" {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = |name: &str| -> Result<f64, PolyError> {
                parts
                    .next()
                    .ok_or_else(|| PolyError::Parse {
                        line: line_no + 1,
                        reason: format!("missing {name}"),
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| PolyError::Parse {
                        line: line_no + 1,
                        reason: e.to_string(),
                    })
            };
            let re = field("re")?;
            let im = field("im")?;
            roots.push(Complex64::new(re, im));
        }
        Self::new(roots)
    }
}

/// `1/d` via the conjugate; `None` when `|d|` is below [`ROOT_HIT`].
#[inline]
pub(crate) fn recip(d: Complex64) -> Option<Complex64> {
    let q = d.norm_sqr();
    if q > 1e-280 {
        Some(Complex64::new(d.re / q, -d.im / q))
    } else {
        let m = d.norm();
        if m <= ROOT_HIT {
            None
        } else {
            let u = d / m;
            Some(u.conj() / m)
        }
    }
}

#[inline]
pub(crate) fn log_abs(d: Complex64) -> f64 {
    let q = d.norm_sqr();
    if q > 1e-280 {
        0.5 * q.ln()
    } else {
        let m = d.norm();
        if m <= ROOT_HIT {
            f64::NEG_INFINITY
        } else {
            m.ln()
        }
    }
}

/// `sum_{k not in skip} log|z - x_k|` in index order.
pub fn sum_log_abs(roots: &[Complex64], z: Complex64, skip: &[usize]) -> f64 {
    let mut acc = 0.0;
    for (k, &x) in roots.iter().enumerate() {
        if skip.contains(&k) {
            continue;
        }
        acc += log_abs(z - x);
    }
    acc
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Coefficient-expansion oracle, only trustworthy for small degrees.
    use num_complex::Complex64;

    /// Coefficients `c[0] + c[1] z + ...` of `prod (z - x_k)`.
    pub fn expand(roots: &[Complex64]) -> Vec<Complex64> {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &x in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i + 1] += ci;
                next[i] -= ci * x;
            }
            c = next;
        }
        c
    }

    pub fn derivative(c: &[Complex64]) -> Vec<Complex64> {
        c.iter()
            .enumerate()
            .skip(1)
            .map(|(i, &ci)| ci * i as f64)
            .collect()
    }

    pub fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
        c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * z + ci)
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use crate::sampling::{derive_substream, sample_roots, sample_unit_disc_c};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_poly(n: usize, seed: u64) -> RootedPolynomial {
        let mut s = derive_substream(seed, n as u64);
        RootedPolynomial::new(sample_roots(n, &mut s)).unwrap()
    }

    #[test]
    fn construction_rejects_bad_roots() {
        assert_eq!(RootedPolynomial::new(vec![]), Err(PolyError::Empty));
        assert!(matches!(
            RootedPolynomial::new(vec![c(1.5, 0.0)]),
            Err(PolyError::OutsideDisc { index: 0, .. })
        ));
        assert!(matches!(
            RootedPolynomial::new(vec![c(0.1, 0.0), c(0.1, 0.0)]),
            Err(PolyError::Repeated { i: 0, j: 1 })
        ));
        assert!(matches!(
            RootedPolynomial::new(vec![c(f64::NAN, 0.0)]),
            Err(PolyError::NonFinite { index: 0 })
        ));
        assert!(RootedPolynomial::new(vec![c(1.0, 0.0), c(0.0, 1.0)]).is_ok());
    }

    #[test]
    fn single_factor_log() {
        let p = RootedPolynomial::new(vec![c(0.5, 0.0)]).unwrap();
        assert!((p.log_abs_p(c(0.0, 0.0)) - 0.5f64.ln()).abs() < 1e-15);
        assert!((p.log_abs_p(c(0.0, 0.0)) + std::f64::consts::LN_2).abs() < 1e-7);
    }

    #[test]
    fn log_at_root_is_neg_infinity() {
        let p = RootedPolynomial::new(vec![c(0.5, 0.0), c(0.0, 0.2)]).unwrap();
        assert_eq!(p.log_abs_p(c(0.5, 0.0)), f64::NEG_INFINITY);
        assert!(matches!(
            p.s_sum(c(0.5, 0.0), &[]),
            Err(PolyError::AtRoot { index: 0 })
        ));
        assert!(p.s_sum(c(0.5, 0.0), &[0]).is_ok());
    }

    #[test]
    fn small_sums() {
        let p = RootedPolynomial::new(vec![c(0.0, 0.0)]).unwrap();
        let s = p.s_sum(c(0.5, 0.0), &[]).unwrap();
        let r = p.r_sum(c(0.5, 0.0), &[]).unwrap();
        assert!((s - c(2.0, 0.0)).norm() < 1e-15);
        assert!((r - c(4.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn log_abs_q_small_case() {
        let p = RootedPolynomial::new(vec![c(0.0, 0.0), c(0.5, 0.0)]).unwrap();
        let v = p.log_abs_q(c(0.25, 0.0), 0).unwrap();
        assert!((v - 0.25f64.ln()).abs() < 1e-15);
        assert!((v + 1.386_294_4).abs() < 1e-7);
        assert!(matches!(
            p.log_abs_q(c(0.25, 0.0), 2),
            Err(PolyError::SkipOutOfRange { index: 2, degree: 2 })
        ));
    }

    #[test]
    fn factorization_identity() {
        let p = random_poly(9, 1);
        let z = c(0.31, -0.77);
        for skip in 0..9 {
            let q = p.log_abs_q(z, skip).unwrap();
            let extra = (z - p.roots()[skip]).norm().ln();
            assert!((q + extra - p.log_abs_p(z)).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_coefficient_oracle() {
        for n in 1..=8 {
            let p = random_poly(n, 17);
            let coeffs = expand(p.roots());
            let d1 = derivative(&coeffs);
            let d2 = derivative(&d1);
            let mut zs = derive_substream(99, n as u64);
            for _ in 0..20 {
                let z = sample_unit_disc_c(&mut zs) * 1.3;
                let pv = horner(&coeffs, z);
                let p1 = horner(&d1, z);
                let p2 = horner(&d2, z);

                let lp = p.log_abs_p(z);
                assert!((lp - pv.norm().ln()).abs() <= 1e-10 * lp.abs().max(1.0));

                let s = p.s_sum(z, &[]).unwrap();
                assert!((s - p1 / pv).norm() < 1e-10 * s.norm().max(1.0));

                // P'^2 - P P'' = P^2 R
                let r = p.r_sum(z, &[]).unwrap();
                let lhs = p1 * p1 - pv * p2;
                let rhs = pv * pv * r;
                assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm().max(rhs.norm()));

                let q = expand(&p.roots()[1..]);
                let lq = p.log_abs_q(z, 0).unwrap();
                let oracle_q = horner(&q, z).norm().ln();
                assert!((lq - oracle_q).abs() <= 1e-10 * oracle_q.abs().max(1.0));
            }
        }
    }

    #[test]
    fn fast_log_matches_exact() {
        let p = random_poly(300, 8);
        for k in 0..200 {
            let z = Complex64::from_polar(0.01 * k as f64, 0.37 * k as f64);
            let (a, b) = (p.log_abs_p(z), p.log_abs_p_fast(z));
            assert!((a - b).abs() < 1e-11 * (1.0 + a.abs()), "{a} vs {b}");
        }
        let z = p.roots()[17];
        assert_eq!(p.log_abs_p_fast(z), f64::NEG_INFINITY);
        let tiny = RootedPolynomial::new(vec![c(0.0, 0.0); 1]).unwrap();
        let near = c(1e-200, 0.0);
        assert_eq!(tiny.log_abs_p_fast(near), tiny.log_abs_p(near));
    }

    #[test]
    fn r_sum_additivity() {
        let p = random_poly(12, 5);
        let z = c(-0.2, 0.9);
        let a = p.r_sum(z, &[0, 1]).unwrap();
        let b = p.r_sum(z, &[0]).unwrap();
        let w = (z - p.roots()[1]).inv();
        assert!((a + w * w - b).norm() < 1e-14 * b.norm().max(1.0));
    }

    #[test]
    fn circle_of_radius_two_bounds() {
        let n = 40;
        let p = random_poly(n, 8);
        let upper = n as f64 * 3f64.ln();
        for k in 0..100 {
            let z = Complex64::from_polar(2.0, k as f64 * std::f64::consts::TAU / 100.0);
            let v = p.log_abs_p(z);
            assert!((0.0..=upper).contains(&v), "{v}");
        }
    }

    #[test]
    fn sums_and_gap_agree_with_parts() {
        let p = random_poly(30, 3);
        let z = c(0.05, 0.4);
        let (s, r, gap) = p.sums_and_gap(z).unwrap();
        assert_eq!(s, p.s_sum(z, &[]).unwrap());
        assert_eq!(r, p.r_sum(z, &[]).unwrap());
        let direct = p
            .roots()
            .iter()
            .map(|x| (z - x).norm())
            .fold(f64::INFINITY, f64::min);
        assert!((gap - direct).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let p = random_poly(7, 21);
        let back = RootedPolynomial::from_csv(&p.to_csv()).unwrap();
        assert_eq!(p, back);
        let with_header = format!("re,im\n{}", p.to_csv());
        assert_eq!(RootedPolynomial::from_csv(&with_header).unwrap(), p);
        assert!(matches!(
            RootedPolynomial::from_csv("0.1;0.2\n"),
            Err(PolyError::Parse { line: 1, .. })
        ));
    }

    fn roots_strategy() -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((0.0f64..0.999, 0.0f64..std::f64::consts::TAU), 2..25)
            .prop_map(|v| v.into_iter().map(|(r, t)| Complex64::from_polar(r, t)).collect())
    }

    proptest! {
        #[test]
        fn skip_additivity(roots in roots_strategy(), zr in 1.05f64..1.5, zt in 0.0f64..std::f64::consts::TAU, j in 0usize..25) {
            let p = RootedPolynomial::new(roots).unwrap();
            let j = j % p.degree();
            let z = Complex64::from_polar(zr, zt);
            let with = p.s_sum(z, &[j]).unwrap();
            let without = p.s_sum(z, &[]).unwrap();
            let term = (z - p.roots()[j]).inv();
            prop_assert!((with + term - without).norm() <= 1e-12 * without.norm().max(term.norm()).max(1.0));
        }

        #[test]
        fn conjugation_equivariance(roots in roots_strategy(), zr in 1.05f64..1.5, zt in 0.0f64..std::f64::consts::TAU) {
            let p = RootedPolynomial::new(roots).unwrap();
            let z = Complex64::from_polar(zr, zt);
            let a = p.conjugated().s_sum(z.conj(), &[]).unwrap();
            let b = p.s_sum(z, &[]).unwrap().conj();
            prop_assert!((a - b).norm() <= 1e-14 * b.norm().max(1.0));
        }
    }
}
