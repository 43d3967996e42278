//! Simulated devices answering a challenge function with one outcome.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::boolfn::{BooleanFunction, FourierSpectrum};
use crate::entropy::OutcomeDistribution;
use crate::error::Error;
use crate::fouriersample::{fourier_sample, Sampler};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "p", rename_all = "snake_case")]
pub enum DeviceModel {
    /// Exact Fourier sampler.
    Honest,
    /// Ignores the function and outputs a uniform index.
    UniformCheat,
    /// Always outputs the lexicographically first heaviest frequency.
    ArgmaxDeterministic,
    /// Argmax with probability `p`, otherwise an honest sample.
    Biased(f64),
}

impl DeviceModel {
    pub fn sample_spectrum(&self, spec: &FourierSpectrum, rng: &mut StreamRng) -> usize {
        match *self {
            DeviceModel::Honest => fourier_sample(spec, rng),
            DeviceModel::UniformCheat => rng.index(spec.len()),
            DeviceModel::ArgmaxDeterministic => spec.argmax(),
            DeviceModel::Biased(p) => {
                if rng.bernoulli(p) {
                    spec.argmax()
                } else {
                    fourier_sample(spec, rng)
                }
            }
        }
    }

    /// Exact output law on the function with this spectrum.
    pub fn distribution(&self, spec: &FourierSpectrum) -> OutcomeDistribution {
        let len = spec.len();
        let probs = match *self {
            DeviceModel::Honest => spec.probs(),
            DeviceModel::UniformCheat => vec![1.0 / len as f64; len],
            DeviceModel::ArgmaxDeterministic => {
                let mut v = vec![0.0; len];
                v[spec.argmax()] = 1.0;
                v
            }
            DeviceModel::Biased(p) => {
                let mut v: Vec<f64> = spec.probs().into_iter().map(|q| (1.0 - p) * q).collect();
                v[spec.argmax()] += p;
                v
            }
        };
        OutcomeDistribution::from_dense(probs).expect("device laws are normalised")
    }

    /// Largest outcome probability, without building the full law.
    pub fn max_prob(&self, spec: &FourierSpectrum) -> f64 {
        match *self {
            DeviceModel::Honest => spec.max_prob(),
            DeviceModel::UniformCheat => 1.0 / spec.len() as f64,
            DeviceModel::ArgmaxDeterministic => 1.0,
            DeviceModel::Biased(p) => p + (1.0 - p) * spec.max_prob(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match *self {
            DeviceModel::ArgmaxDeterministic => true,
            DeviceModel::Biased(p) => p >= 1.0,
            _ => false,
        }
    }
}

impl Sampler for DeviceModel {
    fn sample(&self, _f: &BooleanFunction, spec: &FourierSpectrum, rng: &mut StreamRng) -> usize {
        self.sample_spectrum(spec, rng)
    }
}

impl fmt::Display for DeviceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeviceModel::Honest => f.write_str("honest"),
            DeviceModel::UniformCheat => f.write_str("uniform"),
            DeviceModel::ArgmaxDeterministic => f.write_str("argmax"),
            DeviceModel::Biased(p) => write!(f, "biased:{p}"),
        }
    }
}

impl FromStr for DeviceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "honest" => Ok(DeviceModel::Honest),
            "uniform" => Ok(DeviceModel::UniformCheat),
            "argmax" => Ok(DeviceModel::ArgmaxDeterministic),
            other => {
                let p = other
                    .strip_prefix("biased:")
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown device '{other}'")))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameter(format!("bias {p} outside [0, 1]")));
                }
                Ok(DeviceModel::Biased(p))
            }
        }
    }
}
