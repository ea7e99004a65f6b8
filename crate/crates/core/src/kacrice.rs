//! Kac-Rice side: the epsilon-integral zero counter for `P'`, the event
//! `O_n`, and Monte Carlo estimators for `P(O_n)`, `M_n` and `T_n(0)`.
//!
//! Notation for one sample: `X0` is a uniform point, `X2..Xn` are the other
//! roots, `S = sum_{k>=2} 1/(X0 - Xk)`, `R = sum_{k>=2} 1/(X0 - Xk)^2` and
//! `log|Q| = sum_{k>=2} log|X0 - Xk|`. The event `O_n` asks for `X0` in the
//! annulus, `|S| < |Q|` and `|X0 + 1/S| < 1`.

use crate::components::annulus_inner_radius;
use crate::par::{map_blocks, Execution};
use crate::polyeval::{log_abs, recip, RootedPolynomial};
use crate::sampling::{derive_domain_substream, sample_unit_disc_c, RngStream};
use crate::stats::{median_of_means, Estimate, SummaryAccumulator};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

pub const MIN_GRID: usize = 256;
pub const MAX_REFINE_LEVELS: u32 = 3;
pub const MOM_BLOCKS: usize = 32;

const DOMAIN_PLAIN: u64 = 0x4f4e_5f50;
const DOMAIN_WEIGHTED: u64 = 0x4f4e_5f57;
const SAMPLE_BLOCK: u64 = 4096;
/// Probability of drawing `X2` from the heavy radial component.
const MIX_WEIGHT: f64 = 0.9;
/// Inner radius of the radial component, in units of `1/|S~|^2`.
const RADIAL_SCALE: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KacRiceError {
    #[error("eps must be positive and finite, got {0}")]
    BadEps(f64),
    #[error("grid must be at least {MIN_GRID}, got {0}")]
    GridTooSmall(usize),
    #[error("degenerate region [{x0}, {x1}] x [{y0}, {y1}]")]
    BadRegion { x0: f64, x1: f64, y0: f64, y1: f64 },
    #[error("epsilon integral overflowed")]
    Overflow,
    #[error("need degree at least 3, got {0}")]
    DegreeTooSmall(usize),
    #[error("kappa must be positive and finite, got {0}")]
    BadKappa(f64),
    #[error("need at least one sample")]
    NoSamples,
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Region {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self, KacRiceError> {
        let ok = [x0, x1, y0, y1].iter().all(|v| v.is_finite()) && x1 > x0 && y1 > y0;
        if !ok {
            return Err(KacRiceError::BadRegion { x0, x1, y0, y1 });
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    /// `[-1, 1]^2`, the square around the unit disc.
    pub fn unit_square() -> Self {
        Self {
            x0: -1.0,
            x1: 1.0,
            y0: -1.0,
            y1: 1.0,
        }
    }
}

/// `int s(t) dt` with `s(t) = sqrt(R^2 - t^2)`.
fn half_chord_primitive(t: f64, radius: f64) -> f64 {
    let t = t.clamp(-radius, radius);
    let s = (radius * radius - t * t).max(0.0).sqrt();
    0.5 * (t * s + radius * radius * (t / radius).clamp(-1.0, 1.0).asin())
}

/// Exact area of the disc of `radius` at the origin intersected with
/// `[x0, x1] x [y0, y1]`.
pub fn disc_rect_area(radius: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (a, b) = (x0.max(-radius), x1.min(radius));
    if b.is_nan() || a.is_nan() || b <= a || y0 >= radius || y1 <= -radius {
        return 0.0;
    }
    let mut cuts = vec![a, b];
    for y in [y0, y1] {
        if y.abs() < radius {
            let t = (radius * radius - y * y).sqrt();
            cuts.extend([-t, t]);
        }
    }
    cuts.retain(|&t| t >= a && t <= b);
    cuts.sort_by(f64::total_cmp);
    let chord = |p: f64, q: f64| half_chord_primitive(q, radius) - half_chord_primitive(p, radius);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q <= p {
            continue;
        }
        let m = 0.5 * (p + q);
        let s = (radius * radius - m * m).max(0.0).sqrt();
        let top_is_curve = s < y1;
        let bottom_is_curve = -s > y0;
        let top = if top_is_curve { s } else { y1 };
        let bottom = if bottom_is_curve { -s } else { y0 };
        if top <= bottom {
            continue;
        }
        let len = q - p;
        let top_int = if top_is_curve { chord(p, q) } else { y1 * len };
        let bottom_int = if bottom_is_curve { -chord(p, q) } else { y0 * len };
        area += top_int - bottom_int;
    }
    area.max(0.0)
}

/// `(1 / (pi eps^2)) int_region |P''|^2 1{|P'| < eps} dA`, which counts the
/// zeros of `P'` in the region as `eps -> 0`.
///
/// The region is cut into `grid x grid` cells. A cell is skipped when a
/// Taylor bound at its centre rules out `|P'| < eps` inside it, otherwise it
/// is split 4 x 4, at most [`MAX_REFINE_LEVELS`] times. On the final cells
/// `P'` is linearised about the centre, which turns the indicator into a
/// disc of radius `eps / |P''|` whose overlap with the cell is exact.
/// `P'` and `P''` are `P S` and `P (S^2 - R)`, handled through `log|P|`.
pub fn epsilon_count(
    poly: &RootedPolynomial,
    region: Region,
    eps: f64,
    grid: usize,
) -> Result<f64, KacRiceError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(KacRiceError::BadEps(eps));
    }
    if grid < MIN_GRID {
        return Err(KacRiceError::GridTooSmall(grid));
    }
    let hx = 0.5 * (region.x1 - region.x0) / grid as f64;
    let hy = 0.5 * (region.y1 - region.y0) / grid as f64;
    let log_eps = eps.ln();
    let mut total = 0.0;
    for i in 0..grid {
        let cy = region.y0 + (2 * i + 1) as f64 * hy;
        for j in 0..grid {
            let cx = region.x0 + (2 * j + 1) as f64 * hx;
            total += eps_cell(poly, log_eps, Complex64::new(cx, cy), hx, hy, 0);
        }
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(KacRiceError::Overflow)
    }
}

fn eps_cell(poly: &RootedPolynomial, log_eps: f64, c: Complex64, hx: f64, hy: f64, level: u32) -> f64 {
    let half_diag = hx.hypot(hy);
    let refine = |poly: &RootedPolynomial| -> f64 {
        let (sx, sy) = (0.25 * hx, 0.25 * hy);
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let sub = Complex64::new(
                    c.re + ((2 * b) as f64 - 3.0) * sx,
                    c.im + ((2 * a) as f64 - 3.0) * sy,
                );
                acc += eps_cell(poly, log_eps, sub, sx, sy, level + 1);
            }
        }
        acc
    };
    let Some((s, r, gap)) = poly.sums_and_gap(c) else {
        return if level < MAX_REFINE_LEVELS { refine(poly) } else { 0.0 };
    };
    let log_p = poly.log_abs_p(c);
    let second = s * s - r;
    let (abs_s, abs_second) = (s.norm(), second.norm());
    // |P'| >= |P'(c)| - max|P''| * half_diag, with 3|P''(c)| standing in for
    // the maximum; cells close to a root are always examined.
    let near_root = gap < 2.0 * half_diag;
    let slack = (log_eps - log_p).exp() + 3.0 * abs_second * half_diag;
    if !near_root && abs_s > slack {
        return 0.0;
    }
    if abs_second == 0.0 {
        return if level < MAX_REFINE_LEVELS { refine(poly) } else { 0.0 };
    }
    let log_radius = log_eps - log_p - abs_second.ln();
    let radius = log_radius.exp();
    let resolved = radius >= 4.0 * half_diag && !near_root;
    if level < MAX_REFINE_LEVELS && !resolved {
        return refine(poly);
    }
    let offset = -s / second;
    let area = disc_rect_area(
        radius,
        -hx - offset.re,
        hx - offset.re,
        -hy - offset.im,
        hy - offset.im,
    );
    if area == 0.0 {
        return 0.0;
    }
    (area.ln() - PI.ln() - 2.0 * log_radius).exp()
}

/// One draw of `X0` and the other roots with the event bookkeeping.
#[derive(Debug, Clone)]
pub struct OnSample {
    pub x0: Complex64,
    pub poly_rest: RootedPolynomial,
    pub s_n: Complex64,
    pub r_n: Complex64,
    pub log_q: f64,
    pub in_annulus: bool,
    pub in_event: bool,
    /// Redraws caused by `S = 0` or `X0` on a root.
    pub redraws: u32,
}

struct Sums {
    s: Complex64,
    r: Complex64,
    log_q: f64,
}

fn sums_over(x0: Complex64, others: &[Complex64]) -> Option<Sums> {
    let mut s = Complex64::new(0.0, 0.0);
    let mut r = Complex64::new(0.0, 0.0);
    let mut log_q = 0.0;
    for &x in others {
        let d = x0 - x;
        let w = recip(d)?;
        s += w;
        r += w * w;
        log_q += log_abs(d);
    }
    Some(Sums { s, r, log_q })
}

fn in_annulus(x0: Complex64, inner: f64) -> bool {
    let m = x0.norm();
    m > inner && m < 1.0
}

fn event(x0: Complex64, sums: &Sums, inner: f64) -> bool {
    in_annulus(x0, inner)
        && log_abs(sums.s) < sums.log_q
        && recip(sums.s).is_some_and(|w| (x0 + w).norm_sqr() < 1.0)
}

fn check_on_args(n: usize, kappa: f64) -> Result<(), KacRiceError> {
    if n < 3 {
        return Err(KacRiceError::DegreeTooSmall(n));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(KacRiceError::BadKappa(kappa));
    }
    Ok(())
}

/// Draws `X0` then `X2..Xn` from the stream and classifies the sample.
pub fn sample_on_event(n: usize, kappa: f64, stream: &mut RngStream) -> Result<OnSample, KacRiceError> {
    check_on_args(n, kappa)?;
    let inner = annulus_inner_radius(n, kappa);
    let mut redraws = 0;
    loop {
        let x0 = sample_unit_disc_c(stream);
        let rest: Vec<Complex64> = (1..n).map(|_| sample_unit_disc_c(stream)).collect();
        match sums_over(x0, &rest) {
            Some(sums) if sums.s != Complex64::new(0.0, 0.0) => {
                let in_event = event(x0, &sums, inner);
                let poly_rest = RootedPolynomial::new(rest).map_err(|_| KacRiceError::NoSamples);
                match poly_rest {
                    Ok(poly_rest) => {
                        return Ok(OnSample {
                            x0,
                            poly_rest,
                            s_n: sums.s,
                            r_n: sums.r,
                            log_q: sums.log_q,
                            in_annulus: in_annulus(x0, inner),
                            in_event,
                            redraws,
                        })
                    }
                    Err(_) => redraws += 1,
                }
            }
            _ => redraws += 1,
        }
    }
}

/// Per-sample values of one estimator run, in sample order.
#[derive(Debug, Clone, Default)]
struct Draws {
    annulus: Vec<f64>,
    event: Vec<f64>,
    m_plain: Vec<f64>,
    t_plain: Vec<f64>,
    m_weighted: Vec<f64>,
    t_weighted: Vec<f64>,
    redraws: u64,
}

impl Draws {
    fn append(&mut self, other: Draws) {
        self.annulus.extend(other.annulus);
        self.event.extend(other.event);
        self.m_plain.extend(other.m_plain);
        self.t_plain.extend(other.t_plain);
        self.m_weighted.extend(other.m_weighted);
        self.t_weighted.extend(other.t_weighted);
        self.redraws += other.redraws;
    }
}

fn m_integrand(x0: Complex64, x2: Complex64, s: Complex64) -> f64 {
    (-4.0 * (log_abs(x0 - x2) + log_abs(s))).exp()
}

fn t_integrand(s: Complex64, r: Complex64) -> f64 {
    let w = recip(s * s).map_or(Complex64::new(f64::INFINITY, 0.0), |inv| inv * r);
    (Complex64::new(1.0, 0.0) + w).norm_sqr()
}

/// Plain draws: `X0` and all other roots uniform.
fn plain_block(n: usize, inner: f64, seed: u64, block: u64, range: std::ops::Range<u64>) -> Draws {
    let mut stream = derive_domain_substream(seed, DOMAIN_PLAIN, block);
    let mut out = Draws::default();
    let mut rest = vec![Complex64::new(0.0, 0.0); n - 1];
    for _ in range {
        let (x0, sums) = loop {
            let x0 = sample_unit_disc_c(&mut stream);
            rest.iter_mut().for_each(|x| *x = sample_unit_disc_c(&mut stream));
            match sums_over(x0, &rest) {
                Some(s) if s.s != Complex64::new(0.0, 0.0) => break (x0, s),
                _ => out.redraws += 1,
            }
        };
        let hit = event(x0, &sums, inner);
        out.annulus.push(f64::from(u8::from(in_annulus(x0, inner))));
        out.event.push(f64::from(u8::from(hit)));
        out.m_plain.push(if hit { m_integrand(x0, rest[0], sums.s) } else { 0.0 });
        out.t_plain.push(if hit { t_integrand(sums.s, sums.r) } else { 0.0 });
    }
    out
}

/// Weighted draws: `X0, X3..Xn` uniform, `X2` from a mixture of the uniform
/// law and a `rho^-4` radial law around `w = X0 + 1/S~`, where both
/// integrands peak. `S~` omits `X2`. Each value carries the likelihood ratio
/// of the uniform law to the mixture.
fn weighted_block(n: usize, inner: f64, seed: u64, block: u64, range: std::ops::Range<u64>) -> Draws {
    let mut stream = derive_domain_substream(seed, DOMAIN_WEIGHTED, block);
    let mut out = Draws::default();
    let mut rest = vec![Complex64::new(0.0, 0.0); n - 2];
    for _ in range {
        let (x0, partial) = loop {
            let x0 = sample_unit_disc_c(&mut stream);
            rest.iter_mut().for_each(|x| *x = sample_unit_disc_c(&mut stream));
            match sums_over(x0, &rest) {
                Some(s) if s.s != Complex64::new(0.0, 0.0) => break (x0, s),
                _ => out.redraws += 1,
            }
        };
        let inv_s = recip(partial.s).expect("nonzero partial sum");
        let centre = x0 + inv_s;
        let delta = RADIAL_SCALE * inv_s.norm_sqr();
        let choose = stream.next_open01();
        let (u, v) = (stream.next_open01(), stream.next_open01());
        let x2 = if choose < MIX_WEIGHT {
            centre + Complex64::from_polar(delta / u.sqrt(), TAU * v)
        } else {
            let radius = u.sqrt();
            Complex64::from_polar(radius, TAU * v)
        };
        let mut m = 0.0;
        let mut t = 0.0;
        if x2.norm_sqr() < 1.0 {
            let rho = (x2 - centre).norm();
            let radial = if rho >= delta {
                delta * delta / (PI * rho.powi(4))
            } else {
                0.0
            };
            let weight = (1.0 / PI) / ((1.0 - MIX_WEIGHT) / PI + MIX_WEIGHT * radial);
            if let Some(w2) = recip(x0 - x2) {
                let sums = Sums {
                    s: partial.s + w2,
                    r: partial.r + w2 * w2,
                    log_q: partial.log_q + log_abs(x0 - x2),
                };
                if sums.s != Complex64::new(0.0, 0.0) && event(x0, &sums, inner) {
                    m = weight * m_integrand(x0, x2, sums.s);
                    t = weight * t_integrand(sums.s, sums.r);
                }
            }
        }
        out.m_weighted.push(m);
        out.t_weighted.push(t);
    }
    out
}

fn collect<F>(trials: u64, exec: Execution, f: F) -> Draws
where
    F: Fn(u64, std::ops::Range<u64>) -> Draws + Sync + Send,
{
    let mut all = Draws::default();
    for part in map_blocks(trials, SAMPLE_BLOCK, exec, f) {
        all.append(part);
    }
    all
}

fn mean_estimate(xs: &[f64]) -> Estimate {
    SummaryAccumulator::from_slice(xs).estimate()
}

/// Estimates for `P(O_n)` and `M_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnEstimates {
    pub n: usize,
    pub kappa: f64,
    pub p_on: Estimate,
    pub annulus_fraction: Estimate,
    /// Plain sample mean of `1{O_n} / |(X0 - X2) S|^4`.
    pub m_n_plain: Estimate,
    pub m_n_plain_mom: f64,
    /// Same expectation from the weighted draws, on independent streams.
    pub m_n: Estimate,
    pub m_n_mom: f64,
    pub redraws: u64,
}

impl OnEstimates {
    /// `|p_on - m_n|` in units of the combined standard error.
    pub fn identity_z(&self) -> f64 {
        self.p_on.z_distance(&self.m_n)
    }
}

pub fn estimate_p_on_and_mn(
    n: usize,
    kappa: f64,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<OnEstimates, KacRiceError> {
    check_on_args(n, kappa)?;
    if trials == 0 {
        return Err(KacRiceError::NoSamples);
    }
    let inner = annulus_inner_radius(n, kappa);
    let plain = collect(trials, exec, |b, r| plain_block(n, inner, seed, b, r));
    let weighted = collect(trials, exec, |b, r| weighted_block(n, inner, seed, b, r));
    let hits = plain.event.iter().filter(|&&e| e > 0.0).count() as u64;
    let ann = plain.annulus.iter().filter(|&&e| e > 0.0).count() as u64;
    Ok(OnEstimates {
        n,
        kappa,
        p_on: Estimate::proportion(hits, trials),
        annulus_fraction: Estimate::proportion(ann, trials),
        m_n_plain: mean_estimate(&plain.m_plain),
        m_n_plain_mom: median_of_means(&plain.m_plain, MOM_BLOCKS),
        m_n: mean_estimate(&weighted.m_weighted),
        m_n_mom: median_of_means(&weighted.m_weighted, MOM_BLOCKS),
        redraws: plain.redraws + weighted.redraws,
    })
}

/// Estimates of `T_n(0) = E[|1 + R/S^2|^2 1{O_n}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct T0Estimates {
    pub n: usize,
    pub kappa: f64,
    pub plain: Estimate,
    pub plain_mom: f64,
    /// From the weighted draws.
    pub weighted: Estimate,
    pub weighted_mom: f64,
    /// `weighted / (n - 1)` over the weighted `M_n`, a diagnostic only.
    pub ratio_to_mn: f64,
}

pub fn estimate_t0(
    n: usize,
    kappa: f64,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<T0Estimates, KacRiceError> {
    check_on_args(n, kappa)?;
    if trials == 0 {
        return Err(KacRiceError::NoSamples);
    }
    let inner = annulus_inner_radius(n, kappa);
    let plain = collect(trials, exec, |b, r| plain_block(n, inner, seed, b, r));
    let weighted = collect(trials, exec, |b, r| weighted_block(n, inner, seed, b, r));
    let t = mean_estimate(&weighted.t_weighted);
    let m = mean_estimate(&weighted.m_weighted);
    Ok(T0Estimates {
        n,
        kappa,
        plain: mean_estimate(&plain.t_plain),
        plain_mom: median_of_means(&plain.t_plain, MOM_BLOCKS),
        weighted: t,
        weighted_mom: median_of_means(&weighted.t_weighted, MOM_BLOCKS),
        ratio_to_mn: t.value / (n as f64 - 1.0) / m.value,
    })
}
