//! Counter-based pseudo-random streams.
//!
//! Every consumer of randomness in this crate draws from an [`ElementRng`]
//! keyed by `(seed, element index)`. The generator is a SplitMix64 walk whose
//! starting state is a hash of the key pair, so any element's stream can be
//! opened independently of all others. Parallel and sequential evaluation
//! orders therefore produce bit-identical results.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (Vigna). Non-cryptographic.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seed wrapper from which per-element substreams are derived.
///
/// `RandomStream` itself holds no mutable state; it is a factory for
/// [`ElementRng`] values and can be copied freely across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent stream for a distinct purpose (e.g. separating
    /// the randomness of the left and right matmul operands).
    pub fn substream(&self, tag: u64) -> Self {
        Self {
            seed: mix(self.seed ^ mix(tag.wrapping_add(GOLDEN))),
        }
    }

    /// Open the stream for one element index.
    pub fn element(&self, index: u64) -> ElementRng {
        ElementRng {
            state: mix(self.seed.wrapping_add(mix(index.wrapping_mul(GOLDEN)))),
        }
    }
}

/// Per-element generator: SplitMix64 seeded from a hashed `(seed, index)` pair.
#[derive(Debug, Clone)]
pub struct ElementRng {
    state: u64,
}

impl ElementRng {
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform in `(0, 1]`; safe as a logarithm argument.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.next_u64() >> 11) + 1) as f64 * SCALE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_key() {
        let s = RandomStream::new(42);
        let a: Vec<u64> = (0..8).map(|i| s.element(i).next_u64()).collect();
        let b: Vec<u64> = (0..8).map(|i| s.element(i).next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn elements_differ() {
        let s = RandomStream::new(7);
        assert_ne!(s.element(0).next_u64(), s.element(1).next_u64());
        assert_ne!(
            s.element(0).next_u64(),
            s.substream(1).element(0).next_u64()
        );
    }

    #[test]
    fn uniform_range_and_mean() {
        let s = RandomStream::new(123);
        let mut acc = 0.0;
        let n = 100_000;
        for i in 0..n {
            let x = s.element(i).next_f64();
            assert!((0.0..1.0).contains(&x));
            acc += x;
        }
        let mean = acc / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn open01_never_zero() {
        let s = RandomStream::new(5);
        for i in 0..10_000 {
            assert!(s.element(i).next_open01() > 0.0);
        }
    }
}
