//! The rejection sampler `ℛ_f` over the points where `g = +1`, its closed-form
//! law, and the RHOG score.
//!
//! `g(x) = 1` is read as sign `+1` in the ±1 representation.

use serde::Serialize;

use crate::boolfn::{wht, BooleanFunction};
use crate::error::{Error, Result};
use crate::fouriersample::fourier_sample;
use crate::rng::StreamRng;
use crate::sqforrelation::{sample_d, BooleanPair, DistParams};
use crate::stats::{trial_reduce, MeanAccumulator, MeanEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RejectionOutcome {
    pub output: usize,
    pub accepted: bool,
    pub attempts_used: u32,
}

/// `4n²` uniform attempts before falling back to a uniform element.
pub fn attempt_budget(n: u32) -> u32 {
    4 * n * n
}

pub fn rejection_sample(g: &BooleanFunction, rng: &mut StreamRng) -> RejectionOutcome {
    let budget = attempt_budget(g.n());
    for attempt in 1..=budget {
        let x = rng.index(g.len());
        if g.value(x) == 1 {
            return RejectionOutcome {
                output: x,
                accepted: true,
                attempts_used: attempt,
            };
        }
    }
    RejectionOutcome {
        output: rng.index(g.len()),
        accepted: false,
        attempts_used: budget,
    }
}

/// `(Pr[x] for g(x) = +1, Pr[x] for g(x) = -1)`.
fn point_masses(g: &BooleanFunction) -> (f64, f64) {
    let len = g.len() as f64;
    let a = g.count_plus() as f64 / len;
    if a == 0.0 {
        return (1.0 / len, 1.0 / len);
    }
    let miss = (1.0 - a).powi(attempt_budget(g.n()) as i32);
    ((1.0 - miss) / (a * len) + miss / len, miss / len)
}

pub fn exact_distribution(g: &BooleanFunction) -> Vec<f64> {
    let (plus, minus) = point_masses(g);
    g.signs().map(|s| if s == 1 { plus } else { minus }).collect()
}

pub fn exact_probability(g: &BooleanFunction, x: usize) -> f64 {
    let (plus, minus) = point_masses(g);
    if g.value(x) == 1 {
        plus
    } else {
        minus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RhogMode {
    /// `(f, g) ~ 𝒟`, `x` Fourier-sampled from `f`.
    Honest,
    /// Independent uniform `(f, g)`, `x` Fourier-sampled from `f`.
    UniformPairs,
    /// `(f, g) ~ 𝒟`, `x` uniform.
    Cheater,
}

impl std::str::FromStr for RhogMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "honest" => Ok(Self::Honest),
            "uniform-pairs" => Ok(Self::UniformPairs),
            "cheater" => Ok(Self::Cheater),
            other => Err(Error::InvalidParameter(format!("unknown rhog mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RhogReport {
    /// `N · E[Pr[ℛ_f outputs x]]`.
    pub score: MeanEstimate,
    pub epsilon: f64,
    /// `1 + ε²/8`.
    pub target: f64,
}

impl RhogReport {
    pub fn meets_target(&self) -> bool {
        self.score.mean >= self.target && self.score.lower() > 1.0
    }
}

pub fn rhog_score(params: &DistParams, trials: u64, mode: RhogMode, seed: u64) -> Result<RhogReport> {
    if trials == 0 {
        return Err(Error::EmptySamples);
    }
    let acc: MeanAccumulator = trial_reduce(seed, trials, |acc: &mut MeanAccumulator, rng, _| {
        let pair = match mode {
            RhogMode::UniformPairs => BooleanPair::uniform(params.n, rng).expect("validated n"),
            _ => sample_d(params, rng),
        };
        let x = match mode {
            RhogMode::Cheater => rng.index(pair.f.len()),
            _ => fourier_sample(&wht(&pair.f), rng),
        };
        acc.push(exact_probability(&pair.g, x));
    });
    let eps = params.epsilon();
    Ok(RhogReport {
        score: acc.estimate().scaled(params.domain() as f64),
        epsilon: eps,
        target: 1.0 + eps * eps / 8.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{chi_square_gof, Proportion};

    fn single_point(n: u32, at: usize) -> BooleanFunction {
        let mut g = BooleanFunction::constant(n, -1).unwrap();
        g.flip(at);
        g
    }

    #[test]
    fn constant_plus_accepts_immediately() {
        let g = BooleanFunction::constant(3, 1).unwrap();
        let mut rng = StreamRng::new(1, 0);
        for _ in 0..20 {
            let out = rejection_sample(&g, &mut rng);
            assert!(out.accepted);
            assert_eq!(out.attempts_used, 1);
        }
        assert!(exact_distribution(&g).iter().all(|&p| p == 0.125));
    }

    #[test]
    fn constant_minus_falls_back() {
        let g = BooleanFunction::constant(3, -1).unwrap();
        let mut rng = StreamRng::new(2, 0);
        let out = rejection_sample(&g, &mut rng);
        assert!(!out.accepted);
        assert_eq!(out.attempts_used, 36);
        assert!(exact_distribution(&g).iter().all(|&p| p == 0.125));
    }

    #[test]
    fn single_accepting_point_geometric_series() {
        let g = single_point(2, 1);
        let law = exact_distribution(&g);
        let series: f64 = (0..16).map(|k| 0.75f64.powi(k) * 0.25).sum::<f64>() + 0.75f64.powi(16) / 4.0;
        assert!((law[1] - series).abs() < 1e-15);
        assert!((law[1] - 0.992_483).abs() < 1e-6);
        for x in [0, 2, 3] {
            assert!((law[x] - 0.75f64.powi(16) / 4.0).abs() < 1e-15);
        }
        let mut rng = StreamRng::new(3, 0);
        let mut counts = vec![0u64; 4];
        for _ in 0..1_000_000 {
            counts[rejection_sample(&g, &mut rng).output] += 1;
        }
        assert!(chi_square_gof(&counts, &law).passes(0.01));
    }

    #[test]
    fn sampler_matches_law_on_random_g() {
        let mut rng = StreamRng::new(4, 0);
        for n in [1, 3, 5] {
            let g = crate::boolfn::random_function(n, &mut rng).unwrap();
            let law = exact_distribution(&g);
            let mut counts = vec![0u64; g.len()];
            for _ in 0..200_000 {
                counts[rejection_sample(&g, &mut rng).output] += 1;
            }
            assert!(chi_square_gof(&counts, &law).passes(0.01), "n = {n}");
        }
    }

    #[test]
    fn exact_distribution_normalised() {
        let mut rng = StreamRng::new(5, 0);
        for n in 1..=10 {
            let g = crate::boolfn::random_function(n, &mut rng).unwrap();
            let total: f64 = exact_distribution(&g).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn failures_are_absent_for_d() {
        // At n = 6 a fallback needs at most a handful of accepting points among 64.
        let params = DistParams::with_default_c(6).unwrap();
        let failed: Proportion = trial_reduce(6, 100_000, |acc: &mut Proportion, rng, _| {
            let pair = sample_d(&params, rng);
            acc.push(!rejection_sample(&pair.g, rng).accepted);
        });
        assert_eq!(failed.estimate().p, 0.0);
    }

    #[test]
    fn small_n_failure_rate_matches_binomial() {
        // Uniform g at n = 3: Pr[fallback] = Σ_k C(8,k) 2^-8 (1 - k/8)^36.
        let binom = [1.0, 8.0, 28.0, 56.0, 70.0, 56.0, 28.0, 8.0, 1.0];
        let exact: f64 = (0..=8)
            .map(|k| binom[k] / 256.0 * (1.0 - k as f64 / 8.0).powi(36))
            .sum();
        let failed: Proportion = trial_reduce(10, 200_000, |acc: &mut Proportion, rng, _| {
            let g = crate::boolfn::random_function(3, rng).unwrap();
            acc.push(!rejection_sample(&g, rng).accepted);
        });
        assert!(exact > 0.0039);
        assert!(failed.estimate().covers(exact), "{:?} vs {exact}", failed.estimate());
    }

    #[test]
    fn uniform_pairs_score_one() {
        let params = DistParams::new(6, 1.0).unwrap();
        let report = rhog_score(&params, 50_000, RhogMode::UniformPairs, 7).unwrap();
        assert!(report.score.covers(1.0), "{report:?}");
    }

    #[test]
    fn cheater_scores_one() {
        let params = DistParams::new(6, 1.0).unwrap();
        let report = rhog_score(&params, 50_000, RhogMode::Cheater, 8).unwrap();
        assert!(report.score.covers(1.0), "{report:?}");
    }

    #[test]
    fn honest_beats_target() {
        let params = DistParams::new(6, 1.0).unwrap();
        let report = rhog_score(&params, 50_000, RhogMode::Honest, 9).unwrap();
        assert!(report.meets_target(), "{report:?}");
    }
}
