//! Boolean functions `f: {0,1}^n -> {±1}` and their Fourier spectra.
//!
//! Inputs and frequencies are integers `0..N` with `N = 2^n`; `z·x` is the
//! parity of `z & x`. Sign tables are bit-packed, bit `x` set meaning
//! `f(x) = -1`.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::StreamRng;

pub const MAX_N: u32 = 24;
pub const BFN_MAGIC: &[u8; 4] = b"BFN1";

#[inline]
pub fn parity(z: usize, x: usize) -> bool {
    (z & x).count_ones() & 1 == 1
}

/// `(-1)^{z·x}`.
#[inline]
pub fn character_sign(z: usize, x: usize) -> i8 {
    if parity(z, x) {
        -1
    } else {
        1
    }
}

fn check_n(n: u32) -> Result<()> {
    if n == 0 || n > MAX_N {
        return Err(Error::SizeLimit { n, max: MAX_N });
    }
    Ok(())
}

fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BooleanFunction {
    n: u32,
    bits: Vec<u64>,
}

impl BooleanFunction {
    /// Builds a function from an explicit `±1` table of length `2^n`.
    pub fn from_signs(n: u32, values: &[i8]) -> Result<Self> {
        check_n(n)?;
        let len = 1usize << n;
        if values.len() != len {
            return Err(Error::BadLength { n, len: values.len() });
        }
        let mut bits = vec![0u64; words_for(len)];
        for (x, &v) in values.iter().enumerate() {
            match v {
                1 => {}
                -1 => bits[x / 64] |= 1 << (x % 64),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "sign table entry {other} at x = {x} is not ±1"
                    )))
                }
            }
        }
        Ok(Self { n, bits })
    }

    /// Builds a function from packed words; bits beyond `2^n` are cleared.
    pub fn from_words(n: u32, mut bits: Vec<u64>) -> Result<Self> {
        check_n(n)?;
        let len = 1usize << n;
        if bits.len() != words_for(len) {
            return Err(Error::BadLength {
                n,
                len: bits.len() * 64,
            });
        }
        if len < 64 {
            bits[0] &= (1u64 << len) - 1;
        }
        Ok(Self { n, bits })
    }

    pub fn constant(n: u32, sign: i8) -> Result<Self> {
        check_n(n)?;
        let len = 1usize << n;
        let fill = if sign < 0 { u64::MAX } else { 0 };
        Self::from_words(n, vec![fill; words_for(len)])
    }

    /// The character `χ_s(x) = (-1)^{s·x}`.
    pub fn character(n: u32, s: usize) -> Result<Self> {
        check_n(n)?;
        let len = 1usize << n;
        if s >= len {
            return Err(Error::InvalidParameter(format!("s = {s} out of range for n = {n}")));
        }
        let mut bits = vec![0u64; words_for(len)];
        for x in 0..len {
            if parity(s, x) {
                bits[x / 64] |= 1 << (x % 64);
            }
        }
        Ok(Self { n, bits })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `N = 2^n`.
    pub fn len(&self) -> usize {
        1usize << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    #[inline]
    pub fn is_negative(&self, x: usize) -> bool {
        (self.bits[x / 64] >> (x % 64)) & 1 == 1
    }

    #[inline]
    pub fn value(&self, x: usize) -> i8 {
        if self.is_negative(x) {
            -1
        } else {
            1
        }
    }

    pub fn signs(&self) -> impl Iterator<Item = i8> + '_ {
        (0..self.len()).map(move |x| self.value(x))
    }

    pub fn flip(&mut self, x: usize) {
        self.bits[x / 64] ^= 1 << (x % 64);
    }

    /// Number of inputs with `f(x) = +1`.
    pub fn count_plus(&self) -> usize {
        self.len() - self.bits.iter().map(|w| w.count_ones() as usize).sum::<usize>()
    }

    /// Pointwise product `f · χ_s`.
    pub fn times_character(&self, s: usize) -> Result<Self> {
        let chi = Self::character(self.n, s)?;
        let bits = self.bits.iter().zip(&chi.bits).map(|(a, b)| a ^ b).collect();
        Ok(Self { n: self.n, bits })
    }

    /// Pointwise negation `-f`.
    pub fn negated(&self) -> Self {
        let bits = self.bits.iter().map(|w| !w).collect();
        Self::from_words(self.n, bits).expect("same shape")
    }

    /// `N·f̂(z)` for every `z`, computed exactly in integers.
    pub fn integer_spectrum(&self) -> Vec<i32> {
        let mut data: Vec<i32> = self.signs().map(i32::from).collect();
        fwht_i32(&mut data);
        data
    }

    pub fn spectrum(&self) -> FourierSpectrum {
        wht(self)
    }

    /// BFN1 encoding: magic, `n` as u32 LE, then `N` bits LSB-first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.payload_len());
        out.extend_from_slice(BFN_MAGIC);
        out.extend_from_slice(&self.n.to_le_bytes());
        self.write_payload(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let f = Self::read_from(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(Error::Format(format!(
                "{} trailing bytes after BFN1 record",
                cursor.len()
            )));
        }
        Ok(f)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BFN_MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}, expected BFN1")));
        }
        let mut n = [0u8; 4];
        r.read_exact(&mut n)?;
        Self::read_payload(u32::from_le_bytes(n), r)
    }

    /// Length in bytes of the packed sign bits.
    pub fn payload_len(&self) -> usize {
        self.len().div_ceil(8)
    }

    /// Appends the packed sign bits only (no header).
    pub fn write_payload(&self, out: &mut Vec<u8>) {
        let bytes = self.payload_len();
        out.extend(self.bits.iter().flat_map(|w| w.to_le_bytes()).take(bytes));
    }

    /// Reads packed sign bits for a function on `n` inputs.
    pub fn read_payload<R: Read>(n: u32, r: &mut R) -> Result<Self> {
        check_n(n).map_err(|_| Error::Format(format!("n = {n} outside 1..={MAX_N}")))?;
        let len = 1usize << n;
        let mut raw = vec![0u8; len.div_ceil(8)];
        r.read_exact(&mut raw)?;
        if len < 8 && raw[0] >> len != 0 {
            return Err(Error::Format("nonzero padding bits".into()));
        }
        let mut bits = vec![0u64; words_for(len)];
        for (i, byte) in raw.into_iter().enumerate() {
            bits[i / 8] |= (byte as u64) << (8 * (i % 8));
        }
        Self::from_words(n, bits)
    }
}

/// Uniformly random function; identical generator state gives an identical table.
pub fn random_function(n: u32, rng: &mut StreamRng) -> Result<BooleanFunction> {
    check_n(n)?;
    let words = words_for(1usize << n);
    let bits = (0..words).map(|_| rng.next_u64()).collect();
    BooleanFunction::from_words(n, bits)
}

/// Unnormalised in-place Walsh–Hadamard butterfly on integers.
pub fn fwht_i32(data: &mut [i32]) {
    let len = data.len();
    assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Unnormalised in-place Walsh–Hadamard butterfly on reals.
pub fn fwht_f64(data: &mut [f64]) {
    let len = data.len();
    assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Orthonormal transform `H` with entries `±1/√N`; an involution.
pub fn orthonormal_hadamard(data: &mut [f64]) {
    fwht_f64(data);
    let scale = 1.0 / (data.len() as f64).sqrt();
    data.iter_mut().for_each(|v| *v *= scale);
}

/// Fourier spectrum of a Boolean function.
///
/// Stored as the integers `N·f̂(z)`; every coefficient is then an exact dyadic
/// rational in `f64`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FourierSpectrum {
    n: u32,
    scaled: Vec<i32>,
}

/// `f̂(z) = E_x[f(x)(-1)^{z·x}]` for all `z`, via the O(N log N) butterfly.
pub fn wht(f: &BooleanFunction) -> FourierSpectrum {
    FourierSpectrum {
        n: f.n(),
        scaled: f.integer_spectrum(),
    }
}

impl FourierSpectrum {
    /// Wraps integers `N·f̂(z)`. Fails unless they are the spectrum of some
    /// Boolean function (checked by inverting).
    pub fn from_scaled(n: u32, scaled: Vec<i32>) -> Result<Self> {
        check_n(n)?;
        if scaled.len() != 1usize << n {
            return Err(Error::BadLength { n, len: scaled.len() });
        }
        let spec = Self { n, scaled };
        spec.inverse()?;
        Ok(spec)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.scaled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaled.is_empty()
    }

    /// `N·f̂(z)`.
    #[inline]
    pub fn scaled(&self, z: usize) -> i32 {
        self.scaled[z]
    }

    pub fn scaled_coeffs(&self) -> &[i32] {
        &self.scaled
    }

    #[inline]
    pub fn coeff(&self, z: usize) -> f64 {
        self.scaled[z] as f64 / self.len() as f64
    }

    pub fn coeffs(&self) -> Vec<f64> {
        (0..self.len()).map(|z| self.coeff(z)).collect()
    }

    /// `f̂(z)^2`, the Fourier-sampling probability of `z`.
    #[inline]
    pub fn prob(&self, z: usize) -> f64 {
        let c = self.coeff(z);
        c * c
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.len()).map(|z| self.prob(z)).collect()
    }

    /// `Σ_z (N f̂(z))^2`; equals `N^2` exactly for a Boolean function.
    pub fn scaled_energy(&self) -> u64 {
        self.scaled.iter().map(|&k| (k as i64 * k as i64) as u64).sum()
    }

    pub fn parseval_sum(&self) -> f64 {
        let n = self.len() as f64;
        self.scaled_energy() as f64 / (n * n)
    }

    pub fn class_of(&self, z: usize) -> HeavinessClass {
        classify_scaled(self.scaled[z], self.len())
    }

    /// Lexicographically first `z` maximising `|f̂(z)|`.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for z in 1..self.len() {
            if self.scaled[z].abs() > self.scaled[best].abs() {
                best = z;
            }
        }
        best
    }

    pub fn max_prob(&self) -> f64 {
        self.prob(self.argmax())
    }

    /// Recovers the sign table by applying the transform a second time.
    pub fn inverse(&self) -> Result<BooleanFunction> {
        let mut data = self.scaled.clone();
        fwht_i32(&mut data);
        let len = self.len() as i32;
        let mut signs = Vec::with_capacity(data.len());
        for v in data {
            match v {
                v if v == len => signs.push(1),
                v if v == -len => signs.push(-1),
                _ => {
                    return Err(Error::InvalidParameter(
                        "coefficients are not the spectrum of a Boolean function".into(),
                    ))
                }
            }
        }
        BooleanFunction::from_signs(self.n, &signs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum HeavinessClass {
    /// `|f̂| ≤ 1/√N`
    Light,
    /// `1/√N < |f̂| ≤ 2/√N`
    SlightlyHeavy,
    /// `|f̂| > 2/√N`
    VeryHeavy,
}

/// Heaviness of a coefficient for a domain of size `N`.
///
/// Compares `coeff^2 · N` against 1 and 4, which is exact for the dyadic
/// coefficients of Boolean functions.
pub fn classify(coeff: f64, domain: usize) -> HeavinessClass {
    let energy = coeff * coeff * domain as f64;
    if energy <= 1.0 {
        HeavinessClass::Light
    } else if energy <= 4.0 {
        HeavinessClass::SlightlyHeavy
    } else {
        HeavinessClass::VeryHeavy
    }
}

/// Integer version of [`classify`] for `k = N·f̂(z)`.
pub fn classify_scaled(k: i32, domain: usize) -> HeavinessClass {
    let k2 = (k as i64 * k as i64) as u64;
    let n = domain as u64;
    if k2 <= n {
        HeavinessClass::Light
    } else if k2 <= 4 * n {
        HeavinessClass::SlightlyHeavy
    } else {
        HeavinessClass::VeryHeavy
    }
}

/// `P_f = {x : f(x) = (-1)^{z·x} sgn(f̂(z))}`.
///
/// When `f̂(z) = 0` the sign must be supplied through `tie_sign`.
pub fn p_set(f: &BooleanFunction, z: usize, tie_sign: Option<i8>) -> Result<Vec<usize>> {
    let len = f.len();
    if z >= len {
        return Err(Error::InvalidParameter(format!("z = {z} out of range")));
    }
    let k: i64 = (0..len).map(|x| (f.value(x) * character_sign(z, x)) as i64).sum();
    let sign = match k.signum() {
        0 => match tie_sign {
            Some(s) if s == 1 || s == -1 => s,
            _ => return Err(Error::ZeroCoefficient { z }),
        },
        s => s as i8,
    };
    Ok((0..len)
        .filter(|&x| f.value(x) == character_sign(z, x) * sign)
        .collect())
}

/// `Σ_z f̂(z)^4`, the collision probability of Fourier sampling.
pub fn fourth_moment(spec: &FourierSpectrum) -> f64 {
    (0..spec.len()).map(|z| spec.prob(z) * spec.prob(z)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_n2() -> BooleanFunction {
        BooleanFunction::from_signs(2, &[1, 1, 1, -1]).unwrap()
    }

    /// Direct O(N^2) evaluation of the definition.
    fn naive_coeffs(f: &BooleanFunction) -> Vec<f64> {
        let len = f.len();
        (0..len)
            .map(|z| {
                (0..len)
                    .map(|x| (f.value(x) * character_sign(z, x)) as f64)
                    .sum::<f64>()
                    / len as f64
            })
            .collect()
    }

    #[test]
    fn constant_has_delta_spectrum() {
        let spec = wht(&BooleanFunction::constant(3, 1).unwrap());
        assert_eq!(spec.coeff(0), 1.0);
        assert!((1..8).all(|z| spec.coeff(z) == 0.0));
    }

    #[test]
    fn character_has_point_spectrum() {
        for s in 0..16 {
            let spec = wht(&BooleanFunction::character(4, s).unwrap());
            for z in 0..16 {
                assert_eq!(spec.coeff(z), if z == s { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn and_like_example() {
        let spec = wht(&example_n2());
        assert_eq!(spec.coeffs(), vec![0.5, 0.5, 0.5, -0.5]);
    }

    #[test]
    fn butterfly_matches_definition() {
        let mut rng = StreamRng::new(1, 0);
        for n in 1..=7 {
            let f = random_function(n, &mut rng).unwrap();
            assert_eq!(wht(&f).coeffs(), naive_coeffs(&f));
        }
    }

    #[test]
    fn classify_boundaries() {
        assert_eq!(classify(0.0, 16), HeavinessClass::Light);
        assert_eq!(classify(0.5, 4), HeavinessClass::Light);
        assert_eq!(classify(0.75, 16), HeavinessClass::VeryHeavy);
        assert_eq!(classify(0.5, 16), HeavinessClass::SlightlyHeavy);
        assert_eq!(classify(-0.5, 16), HeavinessClass::SlightlyHeavy);
        assert_eq!(classify(0.25, 16), HeavinessClass::Light);
        assert_eq!(classify_scaled(8, 16), HeavinessClass::SlightlyHeavy);
        assert_eq!(classify_scaled(4, 16), HeavinessClass::Light);
        assert_eq!(classify_scaled(9, 16), HeavinessClass::VeryHeavy);
    }

    #[test]
    fn p_set_examples() {
        let chi = BooleanFunction::character(3, 5).unwrap();
        assert_eq!(p_set(&chi, 5, None).unwrap().len(), 8);
        let one = BooleanFunction::constant(3, 1).unwrap();
        assert_eq!(p_set(&one, 0, None).unwrap(), (0..8).collect::<Vec<_>>());
        assert_eq!(p_set(&example_n2(), 0, None).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn p_set_zero_coefficient_needs_sign() {
        let chi = BooleanFunction::character(3, 5).unwrap();
        assert!(matches!(p_set(&chi, 1, None), Err(Error::ZeroCoefficient { z: 1 })));
        assert_eq!(p_set(&chi, 1, Some(1)).unwrap().len(), 4);
        assert_eq!(p_set(&chi, 1, Some(-1)).unwrap().len(), 4);
    }

    #[test]
    fn fourth_moment_examples() {
        assert_eq!(fourth_moment(&wht(&BooleanFunction::character(5, 9).unwrap())), 1.0);
        assert_eq!(fourth_moment(&wht(&example_n2())), 0.25);
    }

    #[test]
    fn fourth_moment_average_over_all_n2_functions() {
        let total: f64 = (0u64..16)
            .map(|t| fourth_moment(&wht(&BooleanFunction::from_words(2, vec![t]).unwrap())))
            .sum();
        assert_eq!(total / 16.0, 0.625);
    }

    #[test]
    fn random_function_is_deterministic() {
        let a = random_function(3, &mut StreamRng::new(42, 0)).unwrap();
        let b = random_function(3, &mut StreamRng::new(42, 0)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            random_function(25, &mut StreamRng::new(42, 0)),
            Err(Error::SizeLimit { n: 25, .. })
        ));
    }

    #[test]
    fn random_function_bits_are_fair() {
        let mut rng = StreamRng::new(8, 8);
        let trials = 20_000;
        let mut plus = [0u32; 8];
        for _ in 0..trials {
            let f = random_function(3, &mut rng).unwrap();
            for (x, p) in plus.iter_mut().enumerate() {
                *p += (f.value(x) == 1) as u32;
            }
        }
        let sigma = (0.25 / trials as f64).sqrt();
        for p in plus {
            assert!((p as f64 / trials as f64 - 0.5).abs() < 3.5 * sigma);
        }
    }

    #[test]
    fn mean_squared_coefficient_is_one_over_n() {
        let mut rng = StreamRng::new(4, 4);
        let trials = 20_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..trials {
            let v = wht(&random_function(4, &mut rng).unwrap()).prob(3);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / trials as f64;
        let sd = ((sum_sq / trials as f64 - mean * mean) / trials as f64).sqrt();
        assert!((mean - 1.0 / 16.0).abs() < 3.5 * sd);
    }

    #[test]
    fn bfn1_layout() {
        let f = BooleanFunction::from_signs(3, &[1, -1, 1, 1, 1, 1, 1, -1]).unwrap();
        let bytes = f.to_bytes();
        assert_eq!(&bytes[..4], b"BFN1");
        assert_eq!(&bytes[4..8], &[3, 0, 0, 0]);
        assert_eq!(&bytes[8..], &[0b1000_0010]);
        assert_eq!(BooleanFunction::from_bytes(&bytes).unwrap(), f);
        assert!(BooleanFunction::from_bytes(b"BFN2\x03\x00\x00\x00\x00").is_err());
    }

    #[test]
    fn inverse_rejects_non_boolean_spectra() {
        assert!(FourierSpectrum::from_scaled(1, vec![1, 0]).is_err());
        assert!(FourierSpectrum::from_scaled(2, vec![2, 2, 2, -2]).is_ok());
    }

    #[test]
    fn slightly_heavy_fraction_matches_gaussian_band() {
        // Fraction of coefficients in the band 1 < |√N f̂| ≤ 2; with the lattice
        // of N f̂ (even integers) this is Pr[√N < |S| ≤ 2√N], S a centred ±1 sum.
        let n = 10;
        let len = 1usize << n;
        let exact = {
            let mut p = vec![0.0f64; len + 1];
            let ln_half = (0.5f64).ln() * len as f64;
            let mut ln_binom = 0.0f64;
            for (k, slot) in p.iter_mut().enumerate() {
                if k > 0 {
                    ln_binom += ((len - k + 1) as f64).ln() - (k as f64).ln();
                }
                *slot = (ln_binom + ln_half).exp();
            }
            let root = (len as f64).sqrt() as i64;
            p.iter()
                .enumerate()
                .filter(|(k, _)| {
                    let s = (2 * *k as i64 - len as i64).abs();
                    s > root && s <= 2 * root
                })
                .map(|(_, v)| v)
                .sum::<f64>()
        };
        let mut rng = StreamRng::new(10, 1);
        let funcs = 200;
        let mut hits = 0usize;
        for _ in 0..funcs {
            let spec = wht(&random_function(n, &mut rng).unwrap());
            hits += (0..len)
                .filter(|&z| spec.class_of(z) == HeavinessClass::SlightlyHeavy)
                .count();
        }
        let total = (funcs * len) as f64;
        let frac = hits as f64 / total;
        let sigma = (exact * (1.0 - exact) / total).sqrt();
        assert!((frac - exact).abs() < 4.0 * sigma, "{frac} vs {exact}");
    }
}
