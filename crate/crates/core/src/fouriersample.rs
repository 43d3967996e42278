//! Exact classical simulation of one-query Fourier sampling, and the HOG and
//! `p_G`/`p_B` statistics used to score it.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::boolfn::{random_function, BooleanFunction, FourierSpectrum, HeavinessClass};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::stats::{adaptive_simpson, trial_reduce, Merge, Proportion, ProportionEstimate};

/// Anything that, given oracle access to `f`, outputs one index.
///
/// The spectrum is passed alongside `f` so simulated devices need not
/// recompute it; samplers that ignore it model classical algorithms.
pub trait Sampler: Sync {
    fn sample(&self, f: &BooleanFunction, spec: &FourierSpectrum, rng: &mut StreamRng) -> usize;
}

impl<F> Sampler for F
where
    F: Fn(&BooleanFunction, &FourierSpectrum, &mut StreamRng) -> usize + Sync,
{
    fn sample(&self, f: &BooleanFunction, spec: &FourierSpectrum, rng: &mut StreamRng) -> usize {
        self(f, spec, rng)
    }
}

/// Draws `z` with probability exactly `f̂(z)^2`.
///
/// Works in integers: `Σ_z (N f̂(z))^2 = N^2`, so a uniform draw below `N^2`
/// selects `z` by inverse CDF over the squared scaled coefficients.
pub fn fourier_sample(spec: &FourierSpectrum, rng: &mut StreamRng) -> usize {
    let len = spec.len() as u64;
    let u = rng.below(len * len);
    let mut acc = 0u64;
    for (z, &k) in spec.scaled_coeffs().iter().enumerate() {
        acc += (k as i64 * k as i64) as u64;
        if u < acc {
            return z;
        }
    }
    unreachable!("squared spectrum sums to N^2")
}

/// Precomputed inverse CDF for repeated draws from one spectrum.
#[derive(Debug, Clone)]
pub struct FourierSampler {
    cumulative: Vec<u64>,
}

impl FourierSampler {
    pub fn new(spec: &FourierSpectrum) -> Self {
        let mut acc = 0u64;
        let cumulative = spec
            .scaled_coeffs()
            .iter()
            .map(|&k| {
                acc += (k as i64 * k as i64) as u64;
                acc
            })
            .collect();
        Self { cumulative }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> usize {
        let total = *self.cumulative.last().expect("nonempty");
        let u = rng.below(total);
        self.cumulative.partition_point(|&c| c <= u)
    }
}

/// Mean of `f̂(s)^2` over the samples.
pub fn hog_score(spec: &FourierSpectrum, samples: &[usize]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(samples.iter().map(|&s| spec.prob(s)).sum::<f64>() / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PgPbEstimate {
    pub p_b: f64,
    pub p_light4: f64,
    pub p_g: f64,
    pub trials: u64,
    pub ci_p_b: ProportionEstimate,
    pub ci_p_light4: ProportionEstimate,
    pub ci_p_g: ProportionEstimate,
}

impl PgPbEstimate {
    pub fn half_widths(&self) -> (f64, f64, f64) {
        (
            self.ci_p_b.half_width(),
            self.ci_p_light4.half_width(),
            self.ci_p_g.half_width(),
        )
    }
}

#[derive(Default)]
struct ClassCounts {
    light: Proportion,
    light4: Proportion,
    slightly: Proportion,
}

impl Merge for ClassCounts {
    fn merge(&mut self, other: Self) {
        self.light.merge(other.light);
        self.light4.merge(other.light4);
        self.slightly.merge(other.slightly);
    }
}

/// Monte Carlo estimate of `p_B`, `Pr[f̂(z)^2 ≤ 4/N]` and `p_G`: a fresh random
/// `f` per trial, one sample from `sampler`, classified by heaviness.
/// Intervals are 99% Wilson.
pub fn estimate_pg_pb<S: Sampler + ?Sized>(n: u32, sampler: &S, functions: u64, seed: u64) -> Result<PgPbEstimate> {
    random_function(n, &mut StreamRng::new(seed, 0))?;
    let counts: ClassCounts = trial_reduce(seed, functions, |acc: &mut ClassCounts, rng, _| {
        let f = random_function(n, rng).expect("validated n");
        let spec = f.spectrum();
        let z = sampler.sample(&f, &spec, rng);
        let class = spec.class_of(z);
        acc.light.push(class == HeavinessClass::Light);
        acc.light4.push(class != HeavinessClass::VeryHeavy);
        acc.slightly.push(class == HeavinessClass::SlightlyHeavy);
    });
    let ci_p_b = counts.light.estimate();
    let ci_p_light4 = counts.light4.estimate();
    let ci_p_g = counts.slightly.estimate();
    Ok(PgPbEstimate {
        p_b: ci_p_b.p,
        p_light4: ci_p_light4.p,
        p_g: ci_p_light4.p - ci_p_b.p,
        trials: functions,
        ci_p_b,
        ci_p_light4,
        ci_p_g,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceValues {
    pub p_b: f64,
    pub p_light4: f64,
    pub p_g: f64,
}

/// `∫_{-a}^{a} u^2 φ(u) du`, the Fourier mass on coefficients with
/// `|√N f̂| ≤ a` when `√N f̂` is standard normal.
fn gaussian_band_mass(a: f64) -> f64 {
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let integrand = |u: f64| norm * u * u * (-0.5 * u * u).exp();
    adaptive_simpson(&integrand, -a, a, 1e-13)
}

/// Large-N values of `p_B`, `Pr[f̂^2 ≤ 4/N]` and `p_G` for the honest sampler,
/// treating each `√N f̂(z)` as standard normal.
pub fn gaussian_reference() -> ReferenceValues {
    let p_b = gaussian_band_mass(1.0);
    let p_light4 = gaussian_band_mass(2.0);
    ReferenceValues {
        p_b,
        p_light4,
        p_g: p_light4 - p_b,
    }
}

/// Exact finite-N values of the same three quantities.
///
/// `N f̂(z)` is distributed as `2B - N` with `B ~ Binomial(N, 1/2)`, so the honest
/// sampler's mass on the band `|N f̂| ≤ a√N` is `E[S^2/N · 1{|S| ≤ a√N}]`.
pub fn lattice_reference(n: u32) -> ReferenceValues {
    let len = 1u64 << n;
    let nf = len as f64;
    let root = nf.sqrt();
    let ln_norm = ln_gamma(nf + 1.0) - nf * std::f64::consts::LN_2;
    let mut p_b = 0.0;
    let mut p_light4 = 0.0;
    for k in 0..=len {
        let s = 2.0 * k as f64 - nf;
        if s.abs() > 2.0 * root {
            continue;
        }
        let ln_p = ln_norm - ln_gamma(k as f64 + 1.0) - ln_gamma((len - k) as f64 + 1.0);
        let mass = ln_p.exp() * s * s / nf;
        if s.abs() <= root {
            p_b += mass;
        }
        p_light4 += mass;
    }
    ReferenceValues {
        p_b,
        p_light4,
        p_g: p_light4 - p_b,
    }
}

/// Exact total variation distance between the Fourier-sampling laws of two spectra.
pub fn tv_distance(a: &FourierSpectrum, b: &FourierSpectrum) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let diff: u64 = a
        .scaled_coeffs()
        .iter()
        .zip(b.scaled_coeffs())
        .map(|(&x, &y)| ((x as i64 * x as i64) - (y as i64 * y as i64)).unsigned_abs())
        .sum();
    let len = a.len() as f64;
    Ok(0.5 * diff as f64 / (len * len))
}
