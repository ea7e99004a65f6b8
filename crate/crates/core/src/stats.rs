//! Streaming summaries and robust means.

/// Count, mean and sum of squared deviations, mergeable across blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryAccumulator {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for SummaryAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl SummaryAccumulator {
    pub fn new() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut acc = Self::new();
        xs.iter().for_each(|&x| acc.push(x));
        acc
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    /// Sample variance; `NaN` below two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean,
            std_error: self.std_error(),
            count: self.count,
        }
    }
}

/// Pooled statistics of two disjoint samples (Chan et al. update).
pub fn merge_summaries(a: &SummaryAccumulator, b: &SummaryAccumulator) -> SummaryAccumulator {
    if a.count == 0 {
        return *b;
    }
    if b.count == 0 {
        return *a;
    }
    let count = a.count + b.count;
    let (na, nb, n) = (a.count as f64, b.count as f64, count as f64);
    let delta = b.mean - a.mean;
    SummaryAccumulator {
        count,
        mean: a.mean + delta * nb / n,
        m2: a.m2 + b.m2 + delta * delta * na * nb / n,
        min: a.min.min(b.min),
        max: a.max.max(b.max),
    }
}

/// Merges in slice order; the fixed order keeps results bit-stable.
pub fn merge_all<'a, I>(parts: I) -> SummaryAccumulator
where
    I: IntoIterator<Item = &'a SummaryAccumulator>,
{
    parts
        .into_iter()
        .fold(SummaryAccumulator::new(), |acc, p| merge_summaries(&acc, p))
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub count: u64,
}

impl Estimate {
    /// Proportion estimate with the binomial standard error.
    pub fn proportion(hits: u64, trials: u64) -> Self {
        let p = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        let se = if trials == 0 {
            f64::NAN
        } else {
            (p * (1.0 - p) / trials as f64).sqrt()
        };
        Self {
            value: p,
            std_error: se,
            count: trials,
        }
    }

    /// `|a - b| / sqrt(se_a^2 + se_b^2)` for independent estimates.
    pub fn z_distance(&self, other: &Estimate) -> f64 {
        let se = (self.std_error.powi(2) + other.std_error.powi(2)).sqrt();
        (self.value - other.value).abs() / se
    }
}

/// Median of the means of `blocks` contiguous, equal-size blocks. Samples
/// beyond `blocks * floor(len / blocks)` are dropped.
pub fn median_of_means(xs: &[f64], blocks: usize) -> f64 {
    assert!(blocks > 0, "median_of_means needs at least one block");
    let size = xs.len() / blocks;
    if size == 0 {
        return f64::NAN;
    }
    let mut means: Vec<f64> = xs
        .chunks_exact(size)
        .take(blocks)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let k = means.len();
    if k % 2 == 1 {
        means[k / 2]
    } else {
        0.5 * (means[k / 2 - 1] + means[k / 2])
    }
}

/// Median of means with a normal-theory standard error,
/// `sqrt(pi/2) * sd(block means) / sqrt(blocks)`.
pub fn median_of_means_estimate(xs: &[f64], blocks: usize) -> Estimate {
    let value = median_of_means(xs, blocks);
    let size = xs.len() / blocks.max(1);
    let means: Vec<f64> = if size == 0 {
        Vec::new()
    } else {
        xs.chunks_exact(size)
            .take(blocks)
            .map(|c| c.iter().sum::<f64>() / size as f64)
            .collect()
    };
    let acc = SummaryAccumulator::from_slice(&means);
    Estimate {
        value,
        std_error: (std::f64::consts::PI / 2.0).sqrt() * acc.std_error(),
        count: xs.len() as u64,
    }
}

/// Sample quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
