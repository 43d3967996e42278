//! Counter-based 64-bit generator.
//!
//! Every stream is a pair `(key, counter)`. The `i`-th output (counting from 1) is
//!
//! ```text
//! out_i = mix64(key + i * GAMMA)          (wrapping arithmetic)
//! mix64(z):
//!     z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//!     z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//!     z ^ (z >> 31)
//! GAMMA = 0x9e3779b97f4a7c15
//! ```
//!
//! With `key = seed` this is exactly SplitMix64. Independent streams for parallel
//! workers and per-trial randomness use
//!
//! ```text
//! key(seed, stream) = mix64(seed + STREAM_SALT) ^ mix64((stream + 1) * GAMMA)
//! STREAM_SALT = 0x243f6a8885a308d3
//! ```
//!
//! Derived quantities consume outputs in a fixed way so that any other
//! implementation of the same recipe reproduces results bit for bit:
//!
//! * `uniform_f64`: `(out >> 11) * 2^-53`, in `[0, 1)`.
//! * `below(n)`: Lemire's multiply-shift with rejection; exact.
//! * `normal_pair`: Box–Muller on `u1 = 1 - uniform_f64()`, `u2 = uniform_f64()`,
//!   returning `(r cos θ, r sin θ)`.

pub const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
pub const STREAM_SALT: u64 = 0x243f_6a88_85a3_08d3;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key of stream `stream` under `seed`.
#[inline]
pub fn stream_key(seed: u64, stream: u64) -> u64 {
    mix64(seed.wrapping_add(STREAM_SALT)) ^ mix64(stream.wrapping_add(1).wrapping_mul(GAMMA))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamRng {
    key: u64,
    counter: u64,
}

impl StreamRng {
    /// Plain SplitMix64 seeded with `seed`.
    pub fn from_seed(seed: u64) -> Self {
        Self { key: seed, counter: 0 }
    }

    /// Stream `stream` of `seed`; distinct streams are statistically independent.
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: stream_key(seed, stream),
            counter: 0,
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// A child stream keyed off this stream's key. Does not advance `self`.
    pub fn substream(&self, id: u64) -> Self {
        Self::new(self.key, id)
    }

    /// Output at an arbitrary counter position without touching the state.
    #[inline]
    pub fn peek(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_mul(GAMMA)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        self.peek(self.counter)
    }

    #[inline]
    pub fn uniform_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound`. `bound` must be nonzero.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let mut m = (self.next_u64() as u128) * (bound as u128);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                m = (self.next_u64() as u128) * (bound as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    #[inline]
    pub fn index(&mut self, bound: usize) -> usize {
        self.below(bound as u64) as usize
    }

    /// `true` with probability `p` (clamped to `[0, 1]`).
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform_f64() < p
    }

    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.uniform_f64();
        let u2 = self.uniform_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Fills `out` with iid N(0, 1) values, two per Box–Muller pair. An odd
    /// tail uses the cosine half of a fresh pair.
    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_exact_mut(2);
        for pair in &mut chunks {
            let (a, b) = self.normal_pair();
            pair[0] = a;
            pair[1] = b;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.normal_pair().0;
        }
    }

    /// Partial Fisher–Yates: `k` distinct positions drawn uniformly from `pool`
    /// (which is reordered in place). Returns the chosen prefix.
    pub fn choose_distinct<'a, T>(&mut self, pool: &'a mut [T], k: usize) -> &'a [T] {
        let len = pool.len();
        assert!(k <= len, "cannot choose {k} of {len}");
        for i in 0..k {
            let j = i + self.index(len - i);
            pool.swap(i, j);
        }
        &pool[..k]
    }
}
