//! Seeded, reproducible parallel Monte Carlo reductions.
//!
//! The sample range is cut into fixed-size chunks; chunk `k` draws from the
//! ChaCha stream `k` of the run seed. Chunk sums are combined in index order,
//! so results do not depend on the worker count.

use crate::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Rng = ChaCha8Rng;

pub const CHUNK: usize = 512;

/// Independent substream `stream` of the generator seeded by `seed`.
pub fn substream(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn merge(&mut self, o: &KahanSum) {
        self.add(o.sum);
        self.add(o.comp);
    }
}

/// Running first and second moments of a complex sample.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexStats {
    pub n: usize,
    re: KahanSum,
    im: KahanSum,
    re2: KahanSum,
    im2: KahanSum,
}

impl ComplexStats {
    pub fn push(&mut self, z: C64) {
        self.n += 1;
        self.re.add(z.re);
        self.im.add(z.im);
        self.re2.add(z.re * z.re);
        self.im2.add(z.im * z.im);
    }

    pub fn merge(&mut self, o: &ComplexStats) {
        self.n += o.n;
        self.re.merge(&o.re);
        self.im.merge(&o.im);
        self.re2.merge(&o.re2);
        self.im2.merge(&o.im2);
    }

    pub fn mean(&self) -> C64 {
        let n = self.n as f64;
        C64::new(self.re.value() / n, self.im.value() / n)
    }

    /// Standard errors of the real and imaginary parts.
    pub fn stderr_parts(&self) -> (f64, f64) {
        let n = self.n as f64;
        let m = self.mean();
        let vr = ((self.re2.value() / n - m.re * m.re) * n / (n - 1.0)).max(0.0);
        let vi = ((self.im2.value() / n - m.im * m.im) * n / (n - 1.0)).max(0.0);
        ((vr / n).sqrt(), (vi / n).sqrt())
    }

    /// Larger of the two component standard errors.
    pub fn stderr(&self) -> f64 {
        let (a, b) = self.stderr_parts();
        a.max(b)
    }
}

/// Parallel reduction of `f` over `nsamples` draws.
pub fn mc_stats(seed: u64, nsamples: usize, f: impl Fn(&mut Rng) -> C64 + Sync) -> ComplexStats {
    let nchunks = nsamples.div_ceil(CHUNK);
    let parts: Vec<ComplexStats> = (0..nchunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let len = CHUNK.min(nsamples - k * CHUNK);
            let mut st = ComplexStats::default();
            for _ in 0..len {
                st.push(f(&mut rng));
            }
            st
        })
        .collect();
    let mut total = ComplexStats::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Parallel map over chunks with ordered collection; each chunk gets its own
/// substream and the number of samples it should draw.
pub fn mc_chunks<T: Send>(seed: u64, nsamples: usize, f: impl Fn(&mut Rng, usize) -> T + Sync) -> Vec<T> {
    let nchunks = nsamples.div_ceil(CHUNK);
    (0..nchunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            f(&mut rng, CHUNK.min(nsamples - k * CHUNK))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn deterministic_and_sane() {
        let f = |r: &mut Rng| C64::new(r.random::<f64>(), 0.0);
        let a = mc_stats(7, 5000, f);
        let b = mc_stats(7, 5000, f);
        assert_eq!(a.mean(), b.mean());
        assert!((a.mean().re - 0.5).abs() < 5.0 * a.stderr());
        assert!((a.stderr() - (1.0f64 / 12.0 / 5000.0).sqrt()).abs() < 1e-4);
    }
}
