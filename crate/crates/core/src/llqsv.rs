//! Balance Checking and long-list sample verification instances, plus a
//! harness that measures a distinguisher's advantage through counted reads.

use std::cell::Cell;
use std::io::{Read, Write};

use serde::Serialize;

use crate::boolfn::{random_function, wht, BooleanFunction, MAX_N};
use crate::error::{Error, Result};
use crate::fouriersample::fourier_sample;
use crate::rng::StreamRng;
use crate::stats::{
    trial_map, trial_reduce, MeanAccumulator, MeanEstimate, Merge, Proportion, ProportionEstimate, Z99,
};

pub const LLQ_MAGIC: &[u8; 4] = b"LLQ1";
pub const LIST_BUDGET: u64 = 1 << 20;

/// An `N`-bit string of hamming weight `N/2 ± d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalancedString {
    len: usize,
    bits: Vec<u64>,
    d: usize,
}

impl BalancedString {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn offset(&self) -> usize {
        self.d
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Uniform draw from `𝒰_d^N`. Both weights have the same number of strings,
/// so the side is a fair coin.
pub fn sample_u_d(len: usize, d: usize, rng: &mut StreamRng) -> Result<BalancedString> {
    if len % 2 == 1 || d > len / 2 {
        return Err(Error::BadOffset { len, d });
    }
    let weight = if rng.bernoulli(0.5) { len / 2 + d } else { len / 2 - d };
    let mut positions: Vec<usize> = (0..len).collect();
    let mut bits = vec![0u64; len.div_ceil(64)];
    for &i in rng.choose_distinct(&mut positions, weight) {
        bits[i / 64] |= 1 << (i % 64);
    }
    Ok(BalancedString { len, bits, d })
}

pub fn balance_instance(ds: &[usize], len: usize, rng: &mut StreamRng) -> Result<Vec<BalancedString>> {
    ds.iter().map(|&d| sample_u_d(len, d, rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ListCase {
    Uniform,
    Fourier,
}

impl std::str::FromStr for ListCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "fourier" => Ok(Self::Fourier),
            other => Err(Error::InvalidParameter(format!("unknown case '{other}'"))),
        }
    }
}

/// `T` pairs `(f_i, s_i)`. The case label travels with the list but is never
/// shown to a distinguisher.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongList {
    n: u32,
    entries: Vec<(BooleanFunction, usize)>,
    case: Option<ListCase>,
}

impl LongList {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(BooleanFunction, usize)] {
        &self.entries
    }

    /// `None` for lists read back from disk.
    pub fn case(&self) -> Option<ListCase> {
        self.case
    }

    /// Mean of `f̂_i(s_i)²` over the list.
    pub fn score_mean(&self) -> Result<MeanEstimate> {
        if self.entries.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut acc = MeanAccumulator::default();
        for (f, s) in &self.entries {
            acc.push(wht(f).prob(*s));
        }
        Ok(acc.estimate())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut out = Vec::with_capacity(16 + self.entries.len() * (4 + (1usize << self.n).div_ceil(8)));
        out.extend_from_slice(LLQ_MAGIC);
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (f, s) in &self.entries {
            f.write_payload(&mut out);
            out.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        w.write_all(&out)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != LLQ_MAGIC {
            return Err(Error::Format("missing LLQ1 magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word);
        if n > MAX_N {
            return Err(Error::SizeLimit { n, max: MAX_N });
        }
        let mut count = [0u8; 8];
        r.read_exact(&mut count)?;
        let t = u64::from_le_bytes(count);
        if t > LIST_BUDGET {
            return Err(Error::BudgetExceeded {
                requested: t,
                limit: LIST_BUDGET,
            });
        }
        let mut entries = Vec::with_capacity(t as usize);
        for _ in 0..t {
            let f = BooleanFunction::read_payload(n, r)?;
            r.read_exact(&mut word)?;
            let s = u32::from_le_bytes(word) as usize;
            if s >= f.len() {
                return Err(Error::Format(format!("sample {s} out of range")));
            }
            entries.push((f, s));
        }
        Ok(Self { n, entries, case: None })
    }
}

/// Entry `i` comes from stream `i` of `seed`: a uniform `f_i`, then `s_i`
/// uniform or Fourier-sampled from `f_i`.
pub fn llqsv_instance(n: u32, t: u64, case: ListCase, seed: u64) -> Result<LongList> {
    if n == 0 || n > MAX_N {
        return Err(Error::SizeLimit { n, max: MAX_N });
    }
    if t > LIST_BUDGET {
        return Err(Error::BudgetExceeded {
            requested: t,
            limit: LIST_BUDGET,
        });
    }
    let entries = trial_map(seed, t, |rng, _| draw_entry(n, case, rng));
    Ok(LongList {
        n,
        entries,
        case: Some(case),
    })
}

fn draw_entry(n: u32, case: ListCase, rng: &mut StreamRng) -> (BooleanFunction, usize) {
    let f = random_function(n, rng).expect("validated n");
    let s = match case {
        ListCase::Uniform => rng.index(f.len()),
        ListCase::Fourier => fourier_sample(&wht(&f), rng),
    };
    (f, s)
}

/// `|{x : (f·χ_s)(x) = +1}| - N/2`, which equals `N f̂(s) / 2`.
pub fn weight_offset(f: &BooleanFunction, s: usize) -> Result<i64> {
    let g = f.times_character(s)?;
    Ok(g.count_plus() as i64 - (g.len() / 2) as i64)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientTail {
    pub rate: ProportionEstimate,
    /// `2 exp(-p² / (6 ln N))`.
    pub bound: f64,
}

impl CoefficientTail {
    pub fn within_bound(&self) -> bool {
        self.rate.p <= self.bound + self.rate.half_width()
    }
}

/// Fraction of random `f` with `max_z f̂(z)² > p²/N`.
pub fn max_coeff_tail(n: u32, p: f64, trials: u64, seed: u64) -> Result<CoefficientTail> {
    if n == 0 || n > MAX_N {
        return Err(Error::SizeLimit { n, max: MAX_N });
    }
    if trials == 0 {
        return Err(Error::EmptySamples);
    }
    let domain = (1u64 << n) as f64;
    let counts: Proportion = trial_reduce(seed, trials, |acc: &mut Proportion, rng, _| {
        let spec = wht(&random_function(n, rng).expect("validated n"));
        let k = spec.scaled(spec.argmax()) as f64;
        // f̂² > p²/N  ⇔  k² > p² N
        acc.push(k * k > p * p * domain);
    });
    Ok(CoefficientTail {
        rate: counts.estimate(),
        bound: 2.0 * (-p * p / (6.0 * domain.ln())).exp(),
    })
}

/// Read-counted access to a list. The case label is not reachable from here.
pub struct ListOracle<'a> {
    list: &'a LongList,
    reads: Cell<u64>,
}

impl<'a> ListOracle<'a> {
    pub fn new(list: &'a LongList) -> Self {
        Self {
            list,
            reads: Cell::new(0),
        }
    }

    pub fn n(&self) -> u32 {
        self.list.n
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    /// `s_i` (one read).
    pub fn sample(&self, i: usize) -> usize {
        self.reads.set(self.reads.get() + 1);
        self.list.entries[i].1
    }

    /// `f_i(x)` (one read).
    pub fn query(&self, i: usize, x: usize) -> i8 {
        self.reads.set(self.reads.get() + 1);
        self.list.entries[i].0.value(x)
    }

    /// The whole truth table of `f_i` (`N` reads).
    pub fn function(&self, i: usize) -> &BooleanFunction {
        let f = &self.list.entries[i].0;
        self.reads.set(self.reads.get() + f.len() as u64);
        f
    }

    pub fn reads(&self) -> u64 {
        self.reads.get()
    }
}

pub trait Distinguisher: Sync {
    fn accept(&self, oracle: &ListOracle<'_>) -> bool;
}

impl<F> Distinguisher for F
where
    F: Fn(&ListOracle<'_>) -> bool + Sync,
{
    fn accept(&self, oracle: &ListOracle<'_>) -> bool {
        self(oracle)
    }
}

/// Accepts when `Σ_i f̂_i(s_i)²` exceeds `2T/N`. Reads every truth table.
pub struct ScoreSumDistinguisher;

impl Distinguisher for ScoreSumDistinguisher {
    fn accept(&self, oracle: &ListOracle<'_>) -> bool {
        let total: f64 = (0..oracle.len())
            .map(|i| wht(oracle.function(i)).prob(oracle.sample(i)))
            .sum();
        total > 2.0 * oracle.len() as f64 / (1u64 << oracle.n()) as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdvantageReport {
    pub fourier: ProportionEstimate,
    pub uniform: ProportionEstimate,
    /// `Pr[accept | Fourier] - Pr[accept | Uniform]`.
    pub advantage: f64,
    /// 99% normal-approximation half-width of the difference.
    pub half_width: f64,
    pub mean_reads: f64,
}

impl AdvantageReport {
    pub fn covers(&self, value: f64) -> bool {
        (self.advantage - value).abs() <= self.half_width
    }
}

#[derive(Default)]
struct AdvantageCounts {
    fourier: Proportion,
    uniform: Proportion,
    reads: u64,
}

impl Merge for AdvantageCounts {
    fn merge(&mut self, other: Self) {
        self.fourier.merge(other.fourier);
        self.uniform.merge(other.uniform);
        self.reads += other.reads;
    }
}

/// Runs the distinguisher on `trials` fresh instances of each case.
pub fn advantage<D: Distinguisher + ?Sized>(
    distinguisher: &D,
    n: u32,
    t: u64,
    trials: u64,
    seed: u64,
) -> Result<AdvantageReport> {
    if n == 0 || n > MAX_N {
        return Err(Error::SizeLimit { n, max: MAX_N });
    }
    if trials == 0 {
        return Err(Error::EmptySamples);
    }
    if t > LIST_BUDGET {
        return Err(Error::BudgetExceeded {
            requested: t,
            limit: LIST_BUDGET,
        });
    }
    let counts: AdvantageCounts = trial_reduce(seed, trials, |acc: &mut AdvantageCounts, rng, _| {
        for (case, stream) in [(ListCase::Fourier, 0), (ListCase::Uniform, 1)] {
            let mut sub = rng.substream(stream);
            let entries = (0..t).map(|_| draw_entry(n, case, &mut sub)).collect();
            let list = LongList {
                n,
                entries,
                case: Some(case),
            };
            let oracle = ListOracle::new(&list);
            let verdict = distinguisher.accept(&oracle);
            acc.reads += oracle.reads();
            match case {
                ListCase::Fourier => acc.fourier.push(verdict),
                ListCase::Uniform => acc.uniform.push(verdict),
            }
        }
    });
    let (fourier, uniform) = (counts.fourier.estimate(), counts.uniform.estimate());
    let var = (fourier.p * (1.0 - fourier.p) + uniform.p * (1.0 - uniform.p)) / trials as f64;
    Ok(AdvantageReport {
        fourier,
        uniform,
        advantage: fourier.p - uniform.p,
        half_width: Z99 * var.sqrt(),
        mean_reads: counts.reads as f64 / (2 * trials) as f64,
    })
}
