//! End-to-end certified-randomness protocol at desk scale: seeded challenges,
//! one device answer per challenge, exact score verification, the collision
//! test for claimed-deterministic devices, and Toeplitz extraction.

use serde::Serialize;

use crate::boolfn::{random_function, wht, FourierSpectrum, MAX_N};
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::stats::trial_map;

/// Stream id reserved for the extractor seed.
const EXTRACTOR_STREAM: u64 = u64::MAX;
/// Sub-stream of a challenge stream that drives the device.
const DEVICE_SUBSTREAM: u64 = 1;
/// Leftover-hash security loss, `2 log2(2^32)`.
pub const EXTRACTOR_LOSS_BITS: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub n: u32,
    pub t: u64,
    /// Score threshold `b = 1 + eps_hog` by default.
    pub b: f64,
    pub eps_hog: f64,
    /// Requested extractor output length.
    pub extractor_output_bits: usize,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(n: u32, t: u64, b: f64, eps_hog: f64, extractor_output_bits: usize, seed: u64) -> Result<Self> {
        if n == 0 || n > MAX_N {
            return Err(Error::SizeLimit { n, max: MAX_N });
        }
        if t == 0 {
            return Err(Error::InvalidParameter("T must be at least 1".into()));
        }
        if b.is_nan() || b <= 1.0 {
            return Err(Error::InvalidParameter(format!("b = {b} must exceed 1")));
        }
        if !(eps_hog > 0.0 && eps_hog < 1.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps_hog} outside (0, 1)")));
        }
        Ok(Self {
            n,
            t,
            b,
            eps_hog,
            extractor_output_bits,
            seed,
        })
    }

    pub fn domain(&self) -> usize {
        1 << self.n
    }

    /// Chernoff slack `δ = eps_hog²`.
    pub fn delta(&self) -> f64 {
        self.eps_hog * self.eps_hog
    }

    /// `(b - eps_hog/2) T / N`.
    pub fn score_threshold(&self) -> f64 {
        (self.b - self.eps_hog / 2.0) * self.t as f64 / self.domain() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyVerdict {
    UniformLike,
    QuantumLike,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChallengeRecord {
    /// Challenge `i` is `random_function(n, StreamRng::new(seed, i))`.
    pub stream: u64,
    pub sample: usize,
    /// `f̂_i(s_i)²`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolTranscript {
    pub device: String,
    pub records: Vec<ChallengeRecord>,
    /// `S = Σ_i f̂_i(s_i)²`.
    pub s_total: f64,
    pub score_pass: bool,
    /// Collisions with the claimed map, when one was supplied.
    pub v: Option<u64>,
    pub entropy_verdict: Option<EntropyVerdict>,
    /// `Σ_i H_∞` of the device's law on each challenge.
    pub min_entropy_estimate: f64,
    pub extracted_len: usize,
    /// Extracted bits, hex encoded, least significant bit first within each byte.
    pub extracted_bits: String,
}

impl ProtocolTranscript {
    pub fn recomputed_s(&self) -> f64 {
        self.records.iter().map(|r| r.score).sum()
    }
}

/// A deterministic map the device claims to follow.
pub type ClaimedMap<'a> = &'a (dyn Fn(&FourierSpectrum) -> usize + Sync);

pub fn argmax_claim(spec: &FourierSpectrum) -> usize {
    spec.argmax()
}

struct ChallengeOutcome {
    record: ChallengeRecord,
    collided: bool,
    min_entropy: f64,
}

pub fn run_protocol(
    config: &ProtocolConfig,
    device: &DeviceModel,
    claimed: Option<ClaimedMap<'_>>,
) -> Result<ProtocolTranscript> {
    let outcomes: Vec<Result<ChallengeOutcome>> = trial_map(config.seed, config.t, |rng, i| {
        let f = random_function(config.n, rng)?;
        let spec = wht(&f);
        let mut device_rng = rng.substream(DEVICE_SUBSTREAM);
        let sample = device.sample_spectrum(&spec, &mut device_rng);
        if sample >= spec.len() {
            return Err(Error::DeviceFailure(format!(
                "challenge {i}: output {sample} out of range"
            )));
        }
        let collided = claimed.is_some_and(|q| q(&spec) == sample);
        Ok(ChallengeOutcome {
            record: ChallengeRecord {
                stream: i,
                sample,
                score: spec.prob(sample),
            },
            collided,
            min_entropy: -device.max_prob(&spec).log2(),
        })
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let s_total: f64 = outcomes.iter().map(|o| o.record.score).sum();
    let v = claimed.map(|_| outcomes.iter().filter(|o| o.collided).count() as u64);
    let min_entropy_estimate: f64 = outcomes.iter().map(|o| o.min_entropy).sum();

    let samples = samples_to_bits(config.n, outcomes.iter().map(|o| o.record.sample));
    let k = extractor_budget(config.extractor_output_bits, min_entropy_estimate).min(samples.len());
    let extracted = if k == 0 {
        BitString::zeros(0)
    } else {
        let seed_bits = BitString::random(
            samples.len() + k - 1,
            &mut StreamRng::new(config.seed, EXTRACTOR_STREAM),
        );
        toeplitz_extract(&samples, &seed_bits, k)?
    };

    Ok(ProtocolTranscript {
        device: device.to_string(),
        records: outcomes.into_iter().map(|o| o.record).collect(),
        s_total,
        score_pass: passes_score(s_total, config),
        v,
        entropy_verdict: v.map(|v| collision_verdict(v, config.t, config.domain(), config.eps_hog)),
        min_entropy_estimate,
        extracted_len: extracted.len(),
        extracted_bits: extracted.to_hex(),
    })
}

/// Output length actually extracted: the request, capped at `H - 64`.
pub fn extractor_budget(requested: usize, min_entropy: f64) -> usize {
    let cap = (min_entropy - EXTRACTOR_LOSS_BITS).floor().max(0.0) as usize;
    requested.min(cap)
}

pub fn passes_score(s_total: f64, config: &ProtocolConfig) -> bool {
    s_total >= config.score_threshold()
}

pub fn verify_score(transcript: &ProtocolTranscript, config: &ProtocolConfig) -> bool {
    passes_score(transcript.s_total, config)
}

/// With `μ = T/N`: Uniform-like below `(1 + ε²) μ`, Quantum-like above
/// `(1 + ε/4) μ`. Once `ε ≥ 1/4` the two cut points swap order, so the lower
/// one bounds Uniform-like and the higher one bounds Quantum-like.
pub fn collision_verdict(v: u64, t: u64, domain: usize, eps_hog: f64) -> EntropyVerdict {
    let mu = t as f64 / domain as f64;
    let (a, b) = (1.0 + eps_hog * eps_hog, 1.0 + eps_hog / 4.0);
    let (low, high) = (a.min(b) * mu, a.max(b) * mu);
    let v = v as f64;
    if v < low {
        EntropyVerdict::UniformLike
    } else if v > high {
        EntropyVerdict::QuantumLike
    } else {
        EntropyVerdict::Inconclusive
    }
}

/// Packed bit string, bit `i` at word `i / 64`, position `i % 64`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            out.set(i, b);
        }
        out
    }

    pub fn random(len: usize, rng: &mut StreamRng) -> Self {
        let mut out = Self::zeros(len);
        out.words.iter_mut().for_each(|w| *w = rng.next_u64());
        out.mask_tail();
        out
    }

    fn mask_tail(&mut self) {
        if !self.len.is_multiple_of(64) {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (self.len % 64)) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        Ok(Self {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        })
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// 64 bits starting at bit `start`, zero beyond the end.
    fn word_at(&self, start: usize) -> u64 {
        let (w, off) = (start / 64, start % 64);
        let low = self.words.get(w).copied().unwrap_or(0) >> off;
        if off == 0 {
            low
        } else {
            low | self.words.get(w + 1).copied().unwrap_or(0) << (64 - off)
        }
    }

    fn reversed(&self) -> Self {
        let mut out = Self::zeros(self.len);
        for i in 0..self.len {
            if self.get(i) {
                out.set(self.len - 1 - i, true);
            }
        }
        out
    }

    pub fn to_hex(&self) -> String {
        let bytes = self.len.div_ceil(8);
        (0..bytes)
            .map(|i| format!("{:02x}", (self.words[i / 8] >> (8 * (i % 8))) as u8))
            .collect()
    }
}

/// `n` bits per sample, least significant first.
pub fn samples_to_bits(n: u32, samples: impl Iterator<Item = usize>) -> BitString {
    let samples: Vec<usize> = samples.collect();
    let mut out = BitString::zeros(samples.len() * n as usize);
    for (j, s) in samples.iter().enumerate() {
        for b in 0..n as usize {
            if s >> b & 1 == 1 {
                out.set(j * n as usize + b, true);
            }
        }
    }
    out
}

/// `out = T x` over GF(2) with the `k × m` Toeplitz matrix
/// `T[j][i] = seed[j - i + m - 1]`.
pub fn toeplitz_extract(input: &BitString, seed: &BitString, k: usize) -> Result<BitString> {
    let m = input.len();
    if k > m {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds input length {m}")));
    }
    let expected = (m + k).saturating_sub(1);
    if seed.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: seed.len(),
        });
    }
    // Row j reads seed[j..j+m] against the input in reverse order.
    let rev = input.reversed();
    let mut out = BitString::zeros(k);
    for j in 0..k {
        let mut acc = 0u64;
        for (w, &x) in rev.words.iter().enumerate() {
            acc ^= seed.word_at(j + 64 * w) & x;
        }
        out.set(j, acc.count_ones() % 2 == 1);
    }
    Ok(out)
}
