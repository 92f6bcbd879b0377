//! Counter-addressed random streams.
//!
//! Every draw in the crate is addressed by `(seed, stream, counter)`: the
//! seed keys a ChaCha8 generator, the stream selects one of its 2^64
//! independent keystreams, and the counter jumps to a fixed offset inside it.
//! Monte Carlo trials use `(plan seed, grid point, trial index)`, so a trial
//! sees the same numbers no matter which thread evaluates it or how many
//! trials precede it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

/// 32-bit words reserved for each counter value inside one keystream.
const COUNTER_STRIDE_LOG2: u32 = 24;

/// A keyed family of streams; cheap to clone into per-trial generators.
#[derive(Clone, Debug)]
pub struct StreamFamily {
    base: ChaCha8Rng,
}

impl StreamFamily {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Positions a generator at `counter` within keystream `stream`.
    pub fn at(&self, stream: u64, counter: u64) -> RandomStream {
        let mut rng = self.base.clone();
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(counter) << COUNTER_STRIDE_LOG2);
        RandomStream { rng }
    }
}

/// A generator positioned at a defined counter.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64, counter: u64) -> Self {
        StreamFamily::new(seed).at(stream, counter)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Unit-rate exponential, i.e. a Γ(1, 1) variate.
    pub fn exp1(&mut self) -> f64 {
        self.rng.sample(Exp1)
    }

    /// Circularly symmetric complex Gaussian with total variance `variance`
    /// (each of the real and imaginary parts has variance `variance / 2`).
    pub fn complex_gaussian(&mut self, variance: f64) -> Complex64 {
        let scale = (0.5 * variance).sqrt();
        let re = self.standard_normal();
        let im = self.standard_normal();
        Complex64::new(scale * re, scale * im)
    }

    /// Uniform phase on `[0, 2π)`.
    pub fn phase(&mut self) -> f64 {
        std::f64::consts::TAU * self.uniform()
    }
}
