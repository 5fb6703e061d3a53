//! Counter-based random numbers (Philox4x32-10) and the samplers built on it.
//!
//! Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2,
//! 3", SC'11) maps a 128-bit counter and a 64-bit key to 128 random bits with
//! ten rounds of multiply/xor mixing. A generator is keyed by the seed; the
//! upper 64 counter bits select a stream and the lower 64 bits count blocks.
//! Everything below is plain integer and IEEE arithmetic, so a stream is
//! reproducible bit for bit on any platform and easy to port.
//!
//! Conversions:
//! * `next_u64` concatenates two consecutive 32-bit words, first word low.
//! * `uniform` is `((u64 >> 11) + 0.5) · 2⁻⁵³`, strictly inside (0, 1).
//! * `standard_normal` is Box–Muller on two uniforms `(u₁, u₂)`: it returns
//!   `√(−2 ln u₁) cos(2πu₂)` and caches `√(−2 ln u₁) sin(2πu₂)` for the
//!   next call.

use alloc::vec::Vec;

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32-10 block.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

#[inline]
fn split(v: u64) -> [u32; 2] {
    [v as u32, (v >> 32) as u32]
}

/// Child seed for `(master, tag, index)`: the first 64 bits of the Philox
/// block with counter `(index, tag)` under key `master`. Used to give every
/// replication / repetition its own stream independent of how many siblings
/// exist.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let [i0, i1] = split(index);
    let [t0, t1] = split(tag);
    let out = philox4x32_10([i0, i1, t0, t1], split(master));
    (out[0] as u64) | ((out[1] as u64) << 32)
}

#[derive(Debug, Clone)]
pub struct Philox {
    key: [u32; 2],
    block: u64,
    stream: u64,
    buf: [u32; 4],
    used: usize,
    spare_normal: Option<f64>,
}

impl Philox {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self {
            key: split(seed),
            block: 0,
            stream,
            buf: [0; 4],
            used: 4,
            spare_normal: None,
        }
    }

    fn refill(&mut self) {
        let [b0, b1] = split(self.block);
        let [s0, s1] = split(self.stream);
        self.buf = philox4x32_10([b0, b1, s0, s1], self.key);
        self.block = self.block.wrapping_add(1);
        self.used = 0;
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.refill();
        }
        let v = self.buf[self.used];
        self.used += 1;
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        let lo = self.next_u32() as u64;
        let hi = self.next_u32() as u64;
        lo | (hi << 32)
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64 + 0.5) * SCALE
    }

    /// Uniform integer in `0..n` by rejection (no modulo bias). `n > 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let (s, c) = libm::sincos(core::f64::consts::TAU * u2);
        self.spare_normal = Some(r * s);
        r * c
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Laplace (double exponential) with location 0 and scale 1, by inversion.
    pub fn laplace(&mut self) -> f64 {
        let u = self.uniform();
        if u < 0.5 {
            libm::log(2.0 * u)
        } else {
            -libm::log(2.0 * (1.0 - u))
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Poisson variate: multiplication method below 10, otherwise Hörmann's
    /// transformed rejection (PTRS).
    pub fn poisson(&mut self, lambda: f64) -> u64 {
        if !(lambda > 0.0) {
            return 0;
        }
        if lambda < 10.0 {
            let limit = libm::exp(-lambda);
            let mut k = 0;
            let mut prod = self.uniform();
            while prod > limit {
                k += 1;
                prod *= self.uniform();
            }
            return k;
        }
        let slam = libm::sqrt(lambda);
        let loglam = libm::log(lambda);
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let vr = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.uniform() - 0.5;
            let v = self.uniform();
            let us = 0.5 - u.abs();
            let k = libm::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if us >= 0.07 && v <= vr {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = libm::log(v) + libm::log(inv_alpha) - libm::log(a / (us * us) + b);
            let rhs = -lambda + k * loglam - libm::lgamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }

    /// Fisher–Yates shuffle (from the last position down).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// A uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }

    /// `k` distinct values drawn uniformly from `pool`, in draw order.
    pub fn sample_without_replacement(&mut self, pool: &[usize], k: usize) -> Vec<usize> {
        let mut pool = pool.to_vec();
        let k = k.min(pool.len());
        for i in 0..k {
            let j = i + self.below((pool.len() - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
