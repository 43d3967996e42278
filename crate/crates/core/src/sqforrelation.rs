//! Squared Forrelation: the correlated Gaussian pair `𝒢′`, its Boolean image
//! `𝒟`, and the statistic `φ(f, g) = Σ_z f̂(z)² g(z)`.

use serde::Serialize;

use crate::boolfn::{orthonormal_hadamard, random_function, wht, BooleanFunction, MAX_N};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::stats::{trial_map, trial_reduce, MeanAccumulator, MeanEstimate, Proportion, ProportionEstimate};

pub const DEFAULT_C: f64 = 20.0;
/// Largest list `long_list_d` materialises.
pub const LIST_BUDGET: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistParams {
    pub n: u32,
    pub c: f64,
}

impl DistParams {
    pub fn new(n: u32, c: f64) -> Result<Self> {
        if n == 0 || n > MAX_N {
            return Err(Error::SizeLimit { n, max: MAX_N });
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidParameter(format!("C = {c} must be positive")));
        }
        let params = Self { n, c };
        if params.epsilon() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} not below 1",
                params.epsilon()
            )));
        }
        Ok(params)
    }

    pub fn with_default_c(n: u32) -> Result<Self> {
        Self::new(n, DEFAULT_C)
    }

    pub fn domain(&self) -> usize {
        1 << self.n
    }

    /// `ε = 1 / (C ln N)`.
    pub fn epsilon(&self) -> f64 {
        1.0 / (self.c * (self.domain() as f64).ln())
    }

    /// `ε² (2 - 2/N)`, the mean of `φ` predicted under `𝒢′`.
    pub fn gprime_prediction(&self) -> f64 {
        let eps = self.epsilon();
        eps * eps * (2.0 - 2.0 / self.domain() as f64)
    }
}

/// `(X, Y² - ε)` with `X ~ N(0, ε I)` and `Y = H X`, `H` orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPair {
    pub x: Vec<f64>,
    pub yp: Vec<f64>,
}

impl RealPair {
    /// True when some coordinate lies outside `[-1, 1]`.
    pub fn truncates(&self) -> bool {
        self.x.iter().chain(&self.yp).any(|v| v.abs() > 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanPair {
    pub f: BooleanFunction,
    pub g: BooleanFunction,
}

impl BooleanPair {
    pub fn new(f: BooleanFunction, g: BooleanFunction) -> Result<Self> {
        if f.n() != g.n() {
            return Err(Error::DimensionMismatch {
                left: f.len(),
                right: g.len(),
            });
        }
        Ok(Self { f, g })
    }

    pub fn uniform(n: u32, rng: &mut StreamRng) -> Result<Self> {
        let f = random_function(n, rng)?;
        let g = random_function(n, rng)?;
        Ok(Self { f, g })
    }
}

pub fn sample_gprime(params: &DistParams, rng: &mut StreamRng) -> RealPair {
    let len = params.domain();
    let eps = params.epsilon();
    let sd = eps.sqrt();
    let mut x = vec![0.0; len];
    rng.fill_standard_normal(&mut x);
    x.iter_mut().for_each(|v| *v *= sd);
    let mut yp = x.clone();
    orthonormal_hadamard(&mut yp);
    yp.iter_mut().for_each(|y| *y = *y * *y - eps);
    RealPair { x, yp }
}

pub fn trnc(v: &[f64]) -> Vec<f64> {
    v.iter().map(|a| a.clamp(-1.0, 1.0)).collect()
}

fn round_half(n: u32, z: &[f64], rng: &mut StreamRng) -> BooleanFunction {
    let signs: Vec<i8> = z
        .iter()
        .map(|&a| {
            let p = (1.0 + a.clamp(-1.0, 1.0)) / 2.0;
            if rng.bernoulli(p) {
                1
            } else {
                -1
            }
        })
        .collect();
    BooleanFunction::from_signs(n, &signs).expect("length is a power of two")
}

/// Each coordinate independently becomes `+1` with probability `(1 + trnc(z))/2`.
pub fn round_to_boolean(z: &RealPair, rng: &mut StreamRng) -> Result<BooleanPair> {
    if z.x.len() != z.yp.len() || !z.x.len().is_power_of_two() {
        return Err(Error::DimensionMismatch {
            left: z.x.len(),
            right: z.yp.len(),
        });
    }
    let n = z.x.len().trailing_zeros();
    let f = round_half(n, &z.x, rng);
    let g = round_half(n, &z.yp, rng);
    Ok(BooleanPair { f, g })
}

pub fn sample_d(params: &DistParams, rng: &mut StreamRng) -> BooleanPair {
    let z = sample_gprime(params, rng);
    round_to_boolean(&z, rng).expect("sampled pair is well formed")
}

/// `Σ_z f̂(z)² g(z)`, exact up to the final division by `N²`.
pub fn phi(pair: &BooleanPair) -> Result<f64> {
    if pair.f.n() != pair.g.n() {
        return Err(Error::DimensionMismatch {
            left: pair.f.len(),
            right: pair.g.len(),
        });
    }
    let spec = wht(&pair.f);
    let total: i64 = spec
        .scaled_coeffs()
        .iter()
        .enumerate()
        .map(|(z, &k)| (k as i64 * k as i64) * pair.g.value(z) as i64)
        .sum();
    let len = pair.f.len() as f64;
    Ok(total as f64 / (len * len))
}

/// Probability `(1 + φ)/2` that the one-query distinguisher accepts.
pub fn acceptance(pair: &BooleanPair) -> Result<f64> {
    Ok((1.0 + phi(pair)?) / 2.0)
}

/// `E[φ(round(Z)) | Z]`, using multilinearity in the rounded coordinates:
/// `(1/N) Σ_i [(H t)_i² + (1/N) Σ_j (1 - t_j²)] u_i` with `t = trnc(X)`,
/// `u = trnc(Y² - ε)`.
pub fn phi_conditional(z: &RealPair) -> f64 {
    let len = z.x.len() as f64;
    let t = trnc(&z.x);
    let diag: f64 = t.iter().map(|v| 1.0 - v * v).sum::<f64>() / len;
    let mut ht = t;
    orthonormal_hadamard(&mut ht);
    ht.iter()
        .zip(&z.yp)
        .map(|(h, y)| (h * h + diag) * y.clamp(-1.0, 1.0))
        .sum::<f64>()
        / len
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiEstimator {
    /// Round a `𝒢′` draw and evaluate `φ` exactly.
    Plain,
    /// Average out the rounding analytically.
    Conditional,
    /// Independent uniform `f`, `g` (control).
    Uniform,
}

impl std::str::FromStr for PhiEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "conditional" => Ok(Self::Conditional),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidParameter(format!("unknown estimator '{other}'"))),
        }
    }
}

pub fn mean_phi_experiment(
    params: &DistParams,
    trials: u64,
    estimator: PhiEstimator,
    seed: u64,
) -> Result<MeanEstimate> {
    if trials == 0 {
        return Err(Error::EmptySamples);
    }
    let acc: MeanAccumulator = trial_reduce(seed, trials, |acc: &mut MeanAccumulator, rng, _| {
        let value = match estimator {
            PhiEstimator::Plain => phi(&sample_d(params, rng)),
            PhiEstimator::Conditional => Ok(phi_conditional(&sample_gprime(params, rng))),
            PhiEstimator::Uniform => BooleanPair::uniform(params.n, rng).and_then(|p| phi(&p)),
        };
        acc.push(value.expect("pairs share n"));
    });
    Ok(acc.estimate())
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub rate: ProportionEstimate,
    pub threshold: f64,
    pub bound: f64,
}

impl TailReport {
    pub fn within_bound(&self) -> bool {
        self.rate.p <= self.bound + self.rate.half_width()
    }
}

/// Rate at which `|Σ_i (Y_i² - ε)|` reaches `3√N`, against the bound `2 e^{-1/ε}`.
pub fn row_sum_tail_check(params: &DistParams, trials: u64, seed: u64) -> Result<TailReport> {
    if trials == 0 {
        return Err(Error::EmptySamples);
    }
    let threshold = 3.0 * (params.domain() as f64).sqrt();
    let counts: Proportion = trial_reduce(seed, trials, |acc: &mut Proportion, rng, _| {
        let z = sample_gprime(params, rng);
        acc.push(z.yp.iter().sum::<f64>().abs() >= threshold);
    });
    Ok(TailReport {
        rate: counts.estimate(),
        threshold,
        bound: 2.0 * (-1.0 / params.epsilon()).exp(),
    })
}

/// `|{i : g_i = +1}|` lies within `(1 ± N^{-1/3}) N/2`.
pub fn is_balanced(g: &BooleanFunction) -> bool {
    let len = g.len() as f64;
    let delta = len.powf(-1.0 / 3.0);
    let plus = g.count_plus() as f64;
    (1.0 - delta) * len / 2.0 <= plus && plus <= (1.0 + delta) * len / 2.0
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub truncation: ProportionEstimate,
    pub truncation_bound: f64,
    pub balanced: ProportionEstimate,
    pub balance_bound: f64,
}

impl ConcentrationReport {
    pub fn truncation_ok(&self) -> bool {
        self.truncation.p <= self.truncation_bound + self.truncation.half_width()
    }

    pub fn balance_ok(&self) -> bool {
        self.balanced.p >= self.balance_bound - self.balanced.half_width()
    }
}

/// Truncation rate (bound `2N^{-2}`) and the fraction of `g` that are
/// hamming-balanced (bound `1 - 5N^{-2}`) over draws from `𝒟`.
pub fn concentration_check(params: &DistParams, trials: u64, seed: u64) -> Result<ConcentrationReport> {
    if trials == 0 {
        return Err(Error::EmptySamples);
    }
    let (truncated, balanced): (Proportion, Proportion) =
        trial_reduce(seed, trials, |acc: &mut (Proportion, Proportion), rng, _| {
            let z = sample_gprime(params, rng);
            acc.0.push(z.truncates());
            let pair = round_to_boolean(&z, rng).expect("sampled pair is well formed");
            acc.1.push(is_balanced(&pair.g));
        });
    let inv_sq = (params.domain() as f64).powi(-2);
    Ok(ConcentrationReport {
        truncation: truncated.estimate(),
        truncation_bound: 2.0 * inv_sq,
        balanced: balanced.estimate(),
        balance_bound: 1.0 - 5.0 * inv_sq,
    })
}

/// `t` independent pairs, entry `i` drawn from stream `i` of `seed`.
pub fn long_list_d(params: &DistParams, t: u64, uniform: bool, seed: u64) -> Result<Vec<BooleanPair>> {
    if t > LIST_BUDGET {
        return Err(Error::BudgetExceeded {
            requested: t,
            limit: LIST_BUDGET,
        });
    }
    Ok(trial_map(seed, t, |rng, _| {
        if uniform {
            BooleanPair::uniform(params.n, rng).expect("validated n")
        } else {
            sample_d(params, rng)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::fwht_f64;

    fn signs(n: u32, v: &[i8]) -> BooleanFunction {
        BooleanFunction::from_signs(n, v).unwrap()
    }

    #[test]
    fn params_validation() {
        let p = DistParams::with_default_c(8).unwrap();
        assert!((p.epsilon() - 1.0 / (20.0 * 256f64.ln())).abs() < 1e-15);
        assert!(DistParams::new(8, 0.0).is_err());
        assert!(DistParams::new(8, -1.0).is_err());
        assert!(DistParams::new(25, 20.0).is_err());
        // ε = 1/(0.5 ln 2) > 1
        assert!(DistParams::new(1, 0.5).is_err());
    }

    #[test]
    fn trnc_examples() {
        assert_eq!(trnc(&[0.3, -2.5, 1.0, 7.0]), vec![0.3, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn rounding_extremes() {
        let mut rng = StreamRng::new(1, 0);
        let z = RealPair {
            x: vec![1.0, -1.0, 3.0, -3.0],
            yp: vec![-1.0, 1.0, 1.0, -1.0],
        };
        for _ in 0..100 {
            let p = round_to_boolean(&z, &mut rng).unwrap();
            assert_eq!(p.f.signs().collect::<Vec<_>>(), vec![1, -1, 1, -1]);
            assert_eq!(p.g.signs().collect::<Vec<_>>(), vec![-1, 1, 1, -1]);
        }
        let half = RealPair {
            x: vec![0.0; 4],
            yp: vec![0.0; 4],
        };
        let mut hits = Proportion::default();
        for _ in 0..25_000 {
            let p = round_to_boolean(&half, &mut rng).unwrap();
            p.f.signs().for_each(|s| hits.push(s == 1));
        }
        assert!(hits.estimate().covers(0.5));
    }

    #[test]
    fn phi_examples() {
        let f = signs(2, &[1, 1, 1, -1]);
        let pair = |g: BooleanFunction| BooleanPair::new(f.clone(), g).unwrap();
        assert_eq!(phi(&pair(BooleanFunction::constant(2, 1).unwrap())).unwrap(), 1.0);
        assert_eq!(phi(&pair(BooleanFunction::constant(2, -1).unwrap())).unwrap(), -1.0);
        assert_eq!(phi(&pair(signs(2, &[1, 1, -1, -1]))).unwrap(), 0.0);
        assert_eq!(acceptance(&pair(signs(2, &[1, 1, -1, -1]))).unwrap(), 0.5);
        assert_eq!(
            acceptance(&pair(BooleanFunction::constant(2, -1).unwrap())).unwrap(),
            0.0
        );
        assert!(BooleanPair::new(f, BooleanFunction::constant(3, 1).unwrap()).is_err());
    }

    /// Direct `(1/N) Σ_i (Σ_j H_ij f_j)² g_i` with an explicit orthonormal matrix.
    fn phi_by_matrix(pair: &BooleanPair) -> f64 {
        let len = pair.f.len();
        let scale = 1.0 / (len as f64).sqrt();
        (0..len)
            .map(|i| {
                let hf: f64 = (0..len)
                    .map(|j| crate::boolfn::character_sign(i, j) as f64 * scale * pair.f.value(j) as f64)
                    .sum();
                hf * hf * pair.g.value(i) as f64
            })
            .sum::<f64>()
            / len as f64
    }

    #[test]
    fn phi_matches_matrix_form() {
        let mut rng = StreamRng::new(2, 0);
        for _ in 0..20 {
            let pair = BooleanPair::uniform(5, &mut rng).unwrap();
            assert!((phi(&pair).unwrap() - phi_by_matrix(&pair)).abs() < 1e-12);
        }
    }

    #[test]
    fn hadamard_is_an_involution() {
        let len = 64;
        for i in 0..len {
            let mut e = vec![0.0; len];
            e[i] = 1.0;
            orthonormal_hadamard(&mut e);
            let row_sq: f64 = e.iter().map(|v| v * v).sum();
            assert!((row_sq - 1.0).abs() < 1e-12);
            orthonormal_hadamard(&mut e);
            for (j, v) in e.iter().enumerate() {
                assert!((v - (i == j) as u8 as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gprime_moments() {
        let params = DistParams::new(4, 1.0).unwrap();
        let eps = params.epsilon();
        let trials = 100_000;
        let draws = trial_map(3, trials, |rng, _| sample_gprime(&params, rng));
        let mut var_x1 = MeanAccumulator::default();
        let mut yp0 = MeanAccumulator::default();
        let mut cov = vec![MeanAccumulator::default(); 16];
        for z in &draws {
            var_x1.push(z.x[1] * z.x[1]);
            yp0.push(z.yp[0]);
            let mut y = z.x.clone();
            orthonormal_hadamard(&mut y);
            for j in 0..16 {
                cov[j].push(z.x[5] * y[j]);
            }
        }
        let within = |e: MeanEstimate, target: f64| (e.mean - target).abs() <= 5.0 * e.std_err;
        assert!(within(var_x1.estimate(), eps));
        assert!(within(yp0.estimate(), 0.0));
        for (j, c) in cov.iter().enumerate() {
            let h = crate::boolfn::character_sign(j, 5) as f64 / 4.0;
            assert!(within(c.estimate(), eps * h), "cov(X_5, Y_{j})");
        }
    }

    #[test]
    fn y_recoverable_from_x() {
        let params = DistParams::new(6, 2.0).unwrap();
        let z = sample_gprime(&params, &mut StreamRng::new(4, 0));
        let mut y = z.x.clone();
        fwht_f64(&mut y);
        let scale = 1.0 / 8.0;
        for (yi, ypi) in y.iter().zip(&z.yp) {
            let y2 = (yi * scale).powi(2);
            assert!((y2 - params.epsilon() - ypi).abs() < 1e-10);
        }
    }

    #[test]
    fn conditional_equals_phi_on_boolean_points() {
        let mut rng = StreamRng::new(5, 0);
        for _ in 0..20 {
            let pair = BooleanPair::uniform(4, &mut rng).unwrap();
            let z = RealPair {
                x: pair.f.signs().map(f64::from).collect(),
                yp: pair.g.signs().map(f64::from).collect(),
            };
            assert!((phi_conditional(&z) - phi(&pair).unwrap()).abs() < 1e-12);
        }
        let zero = RealPair {
            x: vec![0.0; 8],
            yp: vec![0.0; 8],
        };
        assert_eq!(phi_conditional(&zero), 0.0);
    }

    #[test]
    fn conditional_matches_rounding_average() {
        let params = DistParams::new(6, 1.0).unwrap();
        let mut rng = StreamRng::new(6, 0);
        let mut failures = 0;
        for case in 0..100u64 {
            let z = sample_gprime(&params, &mut rng);
            let target = phi_conditional(&z);
            let acc: MeanAccumulator = trial_reduce(1000 + case, 2_000, |acc: &mut MeanAccumulator, rng, _| {
                acc.push(phi(&round_to_boolean(&z, rng).unwrap()).unwrap());
            });
            let est = acc.estimate();
            if (est.mean - target).abs() > 4.0 * est.std_err {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures} of 100 outside 4σ");
    }

    #[test]
    fn f_marginal_uniform() {
        let params = DistParams::new(6, 1.0).unwrap();
        let ones: Proportion = trial_reduce(7, 20_000, |acc: &mut Proportion, rng, _| {
            let pair = sample_d(&params, rng);
            acc.push(pair.f.value(rng.index(64)) == 1);
        });
        assert!(ones.estimate().covers(0.5));
    }

    #[test]
    fn uniform_pairs_average_zero() {
        let params = DistParams::new(6, 1.0).unwrap();
        let est = mean_phi_experiment(&params, 20_000, PhiEstimator::Uniform, 8).unwrap();
        assert!(est.covers(0.0), "{est:?}");
    }

    #[test]
    fn plain_and_conditional_agree() {
        let params = DistParams::new(6, 1.0).unwrap();
        let plain = mean_phi_experiment(&params, 50_000, PhiEstimator::Plain, 9).unwrap();
        let cond = mean_phi_experiment(&params, 50_000, PhiEstimator::Conditional, 10).unwrap();
        let gap = (plain.mean - cond.mean).abs();
        let se = (plain.std_err.powi(2) + cond.std_err.powi(2)).sqrt();
        assert!(gap < 4.0 * se, "{plain:?} {cond:?}");
        assert!(cond.std_err < plain.std_err);
        assert!(cond.mean > 0.0);
    }

    #[test]
    fn row_sum_tail_below_bound() {
        for (n, c) in [(6, 1.0), (8, 20.0)] {
            let params = DistParams::new(n, c).unwrap();
            let report = row_sum_tail_check(&params, 20_000, 11).unwrap();
            assert!(report.within_bound(), "{report:?}");
        }
        let tiny = DistParams::new(8, 1e6).unwrap();
        assert_eq!(row_sum_tail_check(&tiny, 1_000, 12).unwrap().rate.p, 0.0);
    }

    #[test]
    fn truncation_rare_at_default_c() {
        for n in [8, 10] {
            let params = DistParams::with_default_c(n).unwrap();
            let report = concentration_check(&params, 5_000, 13).unwrap();
            assert!(report.truncation_ok(), "{report:?}");
        }
    }

    #[test]
    fn long_list_behaviour() {
        let params = DistParams::new(4, 1.0).unwrap();
        assert!(long_list_d(&params, 0, false, 1).unwrap().is_empty());
        assert_eq!(
            long_list_d(&params, 50, false, 1).unwrap(),
            long_list_d(&params, 50, false, 1).unwrap()
        );
        assert!(matches!(
            long_list_d(&params, LIST_BUDGET + 1, false, 1),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn list_average_matches_experiment() {
        let params = DistParams::new(4, 1.0).unwrap();
        let list = long_list_d(&params, 40_000, false, 14).unwrap();
        let mut acc = MeanAccumulator::default();
        list.iter().for_each(|p| acc.push(phi(p).unwrap()));
        let from_list = acc.estimate();
        let direct = mean_phi_experiment(&params, 40_000, PhiEstimator::Plain, 15).unwrap();
        let se = (from_list.std_err.powi(2) + direct.std_err.powi(2)).sqrt();
        assert!((from_list.mean - direct.mean).abs() < 4.0 * se);
    }
}
