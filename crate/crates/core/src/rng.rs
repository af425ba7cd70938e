//! Counter-based random streams and deterministic parallel sampling.
//!
//! Every sample index belongs to a fixed-size chunk; each chunk draws from
//! its own ChaCha8 stream keyed by (master seed, experiment id, chunk index).
//! Results are gathered in index order and reduced sequentially, so the
//! output does not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Samples per random stream.
pub const CHUNK: u64 = 4096;

/// Identifies a family of random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub experiment: u64,
}

impl StreamKey {
    pub fn new(seed: u64, experiment: &str) -> Self {
        Self {
            seed,
            experiment: fnv1a(experiment.as_bytes()),
        }
    }

    /// Derived key for a sub-experiment (e.g. one grid row).
    pub fn child(&self, tag: u64) -> Self {
        let mut bytes = self.experiment.to_le_bytes().to_vec();
        bytes.extend_from_slice(&tag.to_le_bytes());
        Self {
            seed: self.seed,
            experiment: fnv1a(&bytes),
        }
    }

    pub fn stream(&self, chunk: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.experiment.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(chunk);
        rng
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Runs `op` on a pool with `threads` workers (`0` means the rayon default).
pub fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}

/// Evaluates `f(rng, i)` for `i in 0..n`, each chunk of [`CHUNK`] indices
/// sharing one stream, in parallel on the current rayon pool. The returned
/// vector is in index order.
pub fn sample_map<T, F>(key: StreamKey, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = key.stream(c);
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(|i| f(&mut rng, i)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

/// Mean and standard error of `f(rng, i)` over `i in 0..n` without storing
/// the values: per-chunk moments are merged in chunk order.
pub fn sample_stats<F>(key: StreamKey, n: u64, f: F) -> MeanStats
where
    F: Fn(&mut ChaCha8Rng, u64) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = key.stream(c);
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut m = Moments::default();
            for i in lo..hi {
                m.push(f(&mut rng, i));
            }
            m
        })
        .collect();
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    total.stats()
}

/// Streaming mean and centred second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64 * o.n as f64 / n as f64);
        self.n = n;
    }

    pub fn stats(&self) -> MeanStats {
        let n = self.n;
        let var = if n > 1 { self.m2 / (n - 1) as f64 } else { 0.0 };
        let std_dev = var.sqrt();
        MeanStats {
            n,
            mean: if n > 0 { self.mean } else { f64::NAN },
            std_dev,
            std_error: if n > 0 {
                std_dev / (n as f64).sqrt()
            } else {
                f64::NAN
            },
        }
    }
}

/// Uniform point of `[lo, hi)`.
pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Sample mean and standard error `sd / √n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStats {
    pub n: u64,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
}

impl MeanStats {
    /// Welford accumulation in slice order.
    pub fn of(values: &[f64]) -> Self {
        let mut m = Moments::default();
        for &v in values {
            m.push(v);
        }
        m.stats()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let key = StreamKey::new(42, "unit");
        let run = |t| {
            with_threads(t, || {
                sample_map(key, 10_000, |r, i| r.random::<f64>() + i as f64)
            })
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_eq!(one, run(16));
        assert_eq!(one.len(), 10_000);
    }

    #[test]
    fn keys_separate_streams() {
        let a = StreamKey::new(1, "x").stream(0).random::<u64>();
        let b = StreamKey::new(1, "y").stream(0).random::<u64>();
        let c = StreamKey::new(2, "x").stream(0).random::<u64>();
        let d = StreamKey::new(1, "x").stream(1).random::<u64>();
        assert!(a != b && a != c && a != d);
        assert_ne!(
            StreamKey::new(1, "x").child(1),
            StreamKey::new(1, "x").child(2)
        );
    }

    #[test]
    fn streaming_stats_match_stored_values() {
        let key = StreamKey::new(9, "stats");
        let f = |r: &mut ChaCha8Rng, _| r.random::<f64>().powi(2);
        let stored = MeanStats::of(&sample_map(key, 9_000, f));
        let streamed = sample_stats(key, 9_000, f);
        assert!((stored.mean - streamed.mean).abs() < 1e-14);
        assert!((stored.std_dev - streamed.std_dev).abs() < 1e-12);
        let one = with_threads(1, || sample_stats(key, 9_000, f));
        assert_eq!(one, with_threads(4, || sample_stats(key, 9_000, f)));
    }

    #[test]
    fn mean_stats() {
        let s = MeanStats::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_dev - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.std_error - s.std_dev / 2.0).abs() < 1e-15);
    }
}
