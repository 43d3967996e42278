//! Monte Carlo bookkeeping: running means, Wilson intervals, goodness of fit,
//! quadrature, and a deterministic trial-parallel driver.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::rng::StreamRng;

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// Trials per work unit in [`trial_reduce`]. Fixed so that the merge tree does
/// not depend on the number of worker threads.
pub const CHUNK: u64 = 1024;

pub trait Merge {
    fn merge(&mut self, other: Self);
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn estimate(&self) -> MeanEstimate {
        let std_err = if self.count == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.count as f64).sqrt()
        };
        MeanEstimate {
            mean: self.mean,
            std_err,
            ci99: Z99 * std_err,
            count: self.count,
        }
    }
}

impl Merge for MeanAccumulator {
    fn merge(&mut self, other: Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / total as f64;
        self.count = total;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    /// Half-width of the 99% normal-approximation interval.
    pub ci99: f64,
    pub count: u64,
}

impl MeanEstimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.ci99
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci99
    }

    /// Whether `value` lies inside the 99% interval.
    pub fn covers(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.ci99
    }

    /// Same estimate with every quantity multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            std_err: self.std_err * factor.abs(),
            ci99: self.ci99 * factor.abs(),
            count: self.count,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn push(&mut self, hit: bool) {
        self.trials += 1;
        self.hits += hit as u64;
    }

    pub fn estimate(&self) -> ProportionEstimate {
        wilson(self.hits, self.trials, Z99)
    }
}

impl Merge for Proportion {
    fn merge(&mut self, other: Self) {
        self.hits += other.hits;
        self.trials += other.trials;
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
    }
}

impl<A: Merge, B: Merge, C: Merge> Merge for (A, B, C) {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
        self.2.merge(other.2);
    }
}

impl<A: Merge> Merge for Vec<A> {
    fn merge(&mut self, other: Self) {
        if self.is_empty() {
            *self = other;
            return;
        }
        assert_eq!(self.len(), other.len(), "merging accumulators of different shape");
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}

impl Merge for u64 {
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProportionEstimate {
    pub p: f64,
    pub lower: f64,
    pub upper: f64,
    pub trials: u64,
}

impl ProportionEstimate {
    /// Largest distance from the point estimate to an interval end.
    pub fn half_width(&self) -> f64 {
        (self.p - self.lower).max(self.upper - self.p)
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Wilson score interval at normal quantile `z`.
pub fn wilson(hits: u64, trials: u64, z: f64) -> ProportionEstimate {
    if trials == 0 {
        return ProportionEstimate {
            p: f64::NAN,
            lower: 0.0,
            upper: 1.0,
            trials,
        };
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ProportionEstimate {
        p,
        lower: (centre - spread).max(0.0),
        upper: (centre + spread).min(1.0),
        trials,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

impl GoodnessOfFit {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Pearson chi-square test of `counts` against `probs`.
///
/// Cells with expected count below 5 are pooled together; if the pooled cell is
/// still below 5 it is folded into the smallest remaining cell.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> GoodnessOfFit {
    assert_eq!(counts.len(), probs.len());
    let total: u64 = counts.iter().sum();
    let total = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let expected = p * total;
        if expected < 5.0 {
            pooled.0 += c as f64;
            pooled.1 += expected;
        } else {
            cells.push((c as f64, expected));
        }
    }
    if pooled.1 > 0.0 || pooled.0 > 0.0 {
        if pooled.1 >= 5.0 || cells.is_empty() {
            cells.push(pooled);
        } else {
            let smallest = cells.iter_mut().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty");
            smallest.0 += pooled.0;
            smallest.1 += pooled.1;
        }
    }
    let mut statistic = 0.0;
    for &(obs, exp) in &cells {
        if exp > 0.0 {
            statistic += (obs - exp) * (obs - exp) / exp;
        } else if obs > 0.0 {
            statistic = f64::INFINITY;
        }
    }
    let dof = cells.len().saturating_sub(1) as u64;
    let p_value = if dof == 0 {
        if statistic == 0.0 {
            1.0
        } else {
            0.0
        }
    } else if statistic.is_infinite() {
        0.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive dof");
        1.0 - dist.cdf(statistic)
    };
    GoodnessOfFit {
        statistic,
        dof,
        p_value,
    }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }

    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Runs `trials` independent trials across the rayon pool and merges the
/// per-trial accumulators.
///
/// Trial `t` gets its own generator `StreamRng::new(seed, t)`, and chunk
/// partials are merged in index order, so the result is identical for every
/// thread count.
pub fn trial_reduce<A, F>(seed: u64, trials: u64, step: F) -> A
where
    A: Default + Merge + Send,
    F: Fn(&mut A, &mut StreamRng, u64) + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = A::default();
            let end = ((c + 1) * CHUNK).min(trials);
            for t in c * CHUNK..end {
                let mut rng = StreamRng::new(seed, t);
                step(&mut acc, &mut rng, t);
            }
            acc
        })
        .collect();
    let mut total = A::default();
    for part in partials {
        total.merge(part);
    }
    total
}

/// Ordered parallel map over trials, each with its own stream.
pub fn trial_map<T, F>(seed: u64, trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, u64) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = StreamRng::new(seed, t);
            f(&mut rng, t)
        })
        .collect()
}
