//! Min-entropy bookkeeping, the heavy-to-light perturbation, the Good/Bad
//! classification of simulated devices, and the rejection-sampling
//! derandomizer with its shared-randomness coupling.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::boolfn::{p_set, random_function, wht, BooleanFunction, FourierSpectrum, HeavinessClass};
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::fouriersample::Sampler;
use crate::rng::StreamRng;
use crate::stats::{trial_reduce, Proportion, ProportionEstimate};

const NORMALISATION_TOL: f64 = 1e-9;

/// Probability law over `0..domain`, stored sparsely (zero entries omitted).
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    domain: usize,
    entries: BTreeMap<usize, f64>,
}

impl OutcomeDistribution {
    pub fn from_dense(probs: Vec<f64>) -> Result<Self> {
        let domain = probs.len();
        let entries = probs.into_iter().enumerate().filter(|(_, p)| *p != 0.0).collect();
        Self::from_entries(domain, entries)
    }

    pub fn from_entries(domain: usize, entries: BTreeMap<usize, f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let mut total = 0.0;
        for (&x, &p) in &entries {
            if x >= domain || p.is_nan() || p < 0.0 {
                return Err(Error::InvalidParameter(format!("bad entry ({x}, {p})")));
            }
            total += p;
        }
        if (total - 1.0).abs() > NORMALISATION_TOL {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
        }
        Ok(Self { domain, entries })
    }

    /// Empirical law of the observed `samples`.
    pub fn empirical(domain: usize, samples: &[usize]) -> Result<Self> {
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for &s in samples {
            *counts.entry(s).or_default() += 1;
        }
        Self::from_counts(domain, &counts)
    }

    pub fn from_counts(domain: usize, counts: &BTreeMap<usize, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(Error::EmptyDistribution);
        }
        let entries = counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&x, &c)| (x, c as f64 / total as f64))
            .collect();
        Self::from_entries(domain, entries)
    }

    pub fn point_mass(domain: usize, at: usize) -> Self {
        Self {
            domain,
            entries: BTreeMap::from([(at, 1.0)]),
        }
    }

    pub fn uniform(domain: usize) -> Self {
        Self {
            domain,
            entries: (0..domain).map(|x| (x, 1.0 / domain as f64)).collect(),
        }
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn prob(&self, x: usize) -> f64 {
        self.entries.get(&x).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&x, &p)| (x, p))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.domain];
        for (x, p) in self.support() {
            v[x] = p;
        }
        v
    }

    /// Lexicographically first most likely outcome.
    pub fn argmax(&self) -> usize {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (x, p) in self.support() {
            if p > best.1 {
                best = (x, p);
            }
        }
        best.0
    }

    pub fn max_prob(&self) -> f64 {
        self.prob(self.argmax())
    }

    /// Total variation distance `½ Σ |p - q|`.
    pub fn statistical_distance(&self, other: &Self) -> Result<f64> {
        if self.domain != other.domain {
            return Err(Error::DimensionMismatch {
                left: self.domain,
                right: other.domain,
            });
        }
        let keys: std::collections::BTreeSet<usize> =
            self.entries.keys().chain(other.entries.keys()).copied().collect();
        Ok(0.5 * keys.iter().map(|&x| (self.prob(x) - other.prob(x)).abs()).sum::<f64>())
    }

    /// Relabels outcomes by `perm` (a permutation of `0..domain`).
    pub fn relabel(&self, perm: &[usize]) -> Self {
        Self {
            domain: self.domain,
            entries: self.support().map(|(x, p)| (perm[x], p)).collect(),
        }
    }
}

/// `H_∞ = -log2 max_z p_z`.
pub fn min_entropy(d: &OutcomeDistribution) -> Result<f64> {
    if d.entries.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    Ok(-d.max_prob().log2())
}

/// Mass on outcomes whose individual probability is at least `2^{-h}`.
pub fn low_entropy_mass(d: &OutcomeDistribution, h: f64) -> f64 {
    let threshold = (-h).exp2();
    d.support().filter(|&(_, p)| p >= threshold).map(|(_, p)| p).sum()
}

/// Flips `√N/2` uniformly chosen positions of `P_f(z)`, which lowers `|f̂(z)|` by
/// exactly `1/√N`.
pub fn perturb_make_light(f: &BooleanFunction, z: usize, rng: &mut StreamRng) -> Result<BooleanFunction> {
    let n = f.n();
    if n % 2 == 1 {
        return Err(Error::OddRoot { n });
    }
    let flips = (1usize << (n / 2)) / 2;
    let mut support = p_set(f, z, None)?;
    if support.len() < flips {
        return Err(Error::SetTooSmall {
            available: support.len(),
            needed: flips,
        });
    }
    let mut g = f.clone();
    for &x in rng.choose_distinct(&mut support, flips) {
        g.flip(x);
    }
    Ok(g)
}

/// `C(N/2 + √N/2, √N/2) / C(N/2, √N/2)`, evaluated in log space as
/// `Σ_{i=1}^{k} ln(1 + k/(N/2 - k + i))` with `k = √N/2`.
pub fn degree_ratio(domain: u64) -> Result<f64> {
    if !domain.is_power_of_two() || domain.trailing_zeros() % 2 == 1 || domain < 4 {
        return Err(Error::OddRoot {
            n: domain.trailing_zeros(),
        });
    }
    let half = domain / 2;
    let k = (1u64 << (domain.trailing_zeros() / 2)) / 2;
    let ln_ratio: f64 = (1..=k).map(|i| (k as f64 / (half - k + i) as f64).ln_1p()).sum();
    Ok(ln_ratio.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GoodBad {
    Good,
    Bad,
    Neither,
}

/// A device whose exact output law on any function is available.
pub trait KnownDistribution {
    fn law(&self, f: &BooleanFunction, spec: &FourierSpectrum) -> OutcomeDistribution;
}

impl KnownDistribution for DeviceModel {
    fn law(&self, _f: &BooleanFunction, spec: &FourierSpectrum) -> OutcomeDistribution {
        self.distribution(spec)
    }
}

impl<F> KnownDistribution for F
where
    F: Fn(&BooleanFunction, &FourierSpectrum) -> OutcomeDistribution,
{
    fn law(&self, f: &BooleanFunction, spec: &FourierSpectrum) -> OutcomeDistribution {
        self(f, spec)
    }
}

pub const BAD_ENTROPY_SLACK: f64 = 0.01;

/// Good: the majority output is slightly heavy and `H_∞ ≤ h`.
/// Bad: the majority output is light and `H_∞ ≤ h + 0.01`.
pub fn classify_good_bad<M: KnownDistribution + ?Sized>(model: &M, f: &BooleanFunction, h: f64) -> GoodBad {
    let spec = wht(f);
    let law = model.law(f, &spec);
    let z_f = law.argmax();
    let entropy = -law.max_prob().log2();
    match spec.class_of(z_f) {
        HeavinessClass::SlightlyHeavy if entropy <= h => GoodBad::Good,
        HeavinessClass::Light if entropy <= h + BAD_ENTROPY_SLACK => GoodBad::Bad,
        _ => GoodBad::Neither,
    }
}

/// Shared randomness for rejection sampling: an unbounded stream of uniform
/// points `(x_i, y_i) ∈ [domain] × [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RejSampSeed(pub u64);

impl RejSampSeed {
    pub fn points(&self, domain: usize) -> impl Iterator<Item = (usize, f64)> {
        let mut rng = StreamRng::new(self.0, 0);
        std::iter::repeat_with(move || (rng.index(domain), rng.uniform_f64()))
    }
}

/// First `x_i` whose `y_i` falls below `d(x_i)`.
pub fn rejsamp(d: &OutcomeDistribution, r: RejSampSeed) -> usize {
    r.points(d.domain())
        .find(|&(x, y)| y < d.prob(x))
        .map(|(x, _)| x)
        .expect("stream is unbounded and the law has mass")
}

/// Exact `Pr_r[rejsamp(d, r) ≠ rejsamp(d2, r)]`.
///
/// The first point under `max(d, d2)` lands in the shared region with
/// probability `(1-δ)/(1+δ)`. If it instead lands in the excess of `d` at `x`,
/// `d` outputs `x` while `d2` restarts and still outputs `x` with probability
/// `d2(x)`; symmetrically for the excess of `d2`. This gives
/// `(2δ - Σ_x [(d-d2)_+ d2 + (d2-d)_+ d]) / (1+δ)`, which equals `2δ/(1+δ)`
/// when every excess sits where the other law vanishes.
pub fn coupling_disagreement_exact(d: &OutcomeDistribution, d2: &OutcomeDistribution) -> Result<f64> {
    let delta = d.statistical_distance(d2)?;
    let mut overlap = 0.0;
    for x in 0..d.domain() {
        let (a, b) = (d.prob(x), d2.prob(x));
        overlap += (a - b).max(0.0) * b + (b - a).max(0.0) * a;
    }
    Ok((2.0 * delta - overlap) / (1.0 + delta))
}

/// Monte Carlo rate of disagreement between the two rejection samplers under
/// shared seeds.
pub fn coupling_disagreement(
    d: &OutcomeDistribution,
    d2: &OutcomeDistribution,
    trials: u64,
    seed: u64,
) -> Result<ProportionEstimate> {
    if d.domain() != d2.domain() {
        return Err(Error::DimensionMismatch {
            left: d.domain(),
            right: d2.domain(),
        });
    }
    let counts: Proportion = trial_reduce(seed, trials, |acc: &mut Proportion, rng, _| {
        let r = RejSampSeed(rng.next_u64());
        acc.push(rejsamp(d, r) != rejsamp(d2, r));
    });
    Ok(counts.estimate())
}

/// Estimates the device's law on `f` from `budget` draws, then rejection
/// samples from the estimate with the shared seed `r`.
pub fn derandomize<S: Sampler + ?Sized>(
    device: &S,
    f: &BooleanFunction,
    r: RejSampSeed,
    budget: u64,
    rng: &mut StreamRng,
) -> Result<usize> {
    if budget == 0 {
        return Err(Error::BudgetZero);
    }
    let spec = wht(f);
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for _ in 0..budget {
        *counts.entry(device.sample(f, &spec, rng)).or_default() += 1;
    }
    let empirical = OutcomeDistribution::from_counts(f.len(), &counts)?;
    Ok(rejsamp(&empirical, r))
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub seeds: u64,
    pub reruns: u64,
    pub budget: u64,
    /// Fraction of seeds whose output never changed across re-runs.
    pub constant_fraction: f64,
    /// Fraction of seeds whose most frequent output reached `level`.
    pub majority_fraction: f64,
    pub level: f64,
    /// Mean over seeds of `-log2` of the most frequent output's frequency.
    pub mean_min_entropy: f64,
}

/// For each of `seeds` fixed `(f, r)` pairs, re-runs the derandomized device
/// `reruns` times with fresh device randomness and records how stable its
/// output is.
pub fn stability_experiment<S: Sampler + ?Sized>(
    device: &S,
    n: u32,
    seeds: u64,
    reruns: u64,
    budget: u64,
    level: f64,
    seed: u64,
) -> Result<StabilityReport> {
    if budget == 0 {
        return Err(Error::BudgetZero);
    }
    random_function(n, &mut StreamRng::new(seed, 0))?;
    let per_seed: Vec<(bool, bool, f64)> = crate::stats::trial_map(seed, seeds, |rng, _| {
        let f = random_function(n, rng).expect("validated n");
        let r = RejSampSeed(rng.next_u64());
        let mut outputs: BTreeMap<usize, u64> = BTreeMap::new();
        for k in 0..reruns {
            let mut device_rng = rng.substream(k);
            let z = derandomize(device, &f, r, budget, &mut device_rng).expect("budget checked");
            *outputs.entry(z).or_default() += 1;
        }
        let top = *outputs.values().max().expect("reruns > 0") as f64 / reruns as f64;
        (outputs.len() == 1, top >= level, -top.log2())
    });
    let count = per_seed.len().max(1) as f64;
    Ok(StabilityReport {
        seeds,
        reruns,
        budget,
        constant_fraction: per_seed.iter().filter(|s| s.0).count() as f64 / count,
        majority_fraction: per_seed.iter().filter(|s| s.1).count() as f64 / count,
        level,
        mean_min_entropy: per_seed.iter().map(|s| s.2).sum::<f64>() / count,
    })
}
