//! Seeded random streams and deterministic chunked execution.
//!
//! Every estimator draws from its own ChaCha stream keyed by a stable label,
//! and work is split into fixed-size chunks whose results are reduced in
//! chunk order. Output is therefore identical with or without `parallel`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_CHUNK: usize = 1 << 14;

pub fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Stream for `label`, positioned at `chunk`.
pub fn stream(seed: u64, label: &str, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(label));
    rng.set_stream(chunk);
    rng
}

/// Splits `total` items into chunks and maps `f(chunk_index, start, len)`
/// over them, returning results in chunk order.
pub fn chunked<T, F>(total: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, usize, usize) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let n = total.div_ceil(chunk);
    let job = |i: usize| {
        let start = i * chunk;
        f(i as u64, start, chunk.min(total - start))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(job).collect()
    }
}

/// Maps `f` over a slice, preserving order.
pub fn par_map<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Running sums for a sample mean.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(mut self, o: Moments) -> Moments {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self
    }

    pub fn estimate(&self) -> Estimate {
        if self.n == 0 {
            return Estimate { value: f64::NAN, std_err: f64::NAN, samples: 0 };
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = if self.n > 1 { ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        Estimate { value: mean, std_err: (var / n).sqrt(), samples: self.n }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Estimate {
        Estimate { value, std_err: 0.0, samples: 0 }
    }

    /// Fraction `hits / n` with binomial standard error.
    pub fn proportion(hits: u64, n: u64) -> Estimate {
        let p = hits as f64 / n.max(1) as f64;
        Estimate { value: p, std_err: (p * (1.0 - p) / n.max(1) as f64).sqrt(), samples: n }
    }

    pub fn scale(self, c: f64) -> Estimate {
        Estimate { value: self.value * c, std_err: self.std_err * c.abs(), samples: self.samples }
    }
}
