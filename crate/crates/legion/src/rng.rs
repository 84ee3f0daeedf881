//! Engine-owned deterministic PRNG: xorshift64* (Vigna, "An
//! experimental exploration of Marsaglia's xorshift generators,
//! scrambled"). Chosen for reproducibility: the algorithm is fixed and
//! documented, so identical seeds give identical runs on any platform.

#[derive(Debug, Clone)]
pub struct Xorshift64Star {
    state: u64,
}

impl Xorshift64Star {
    pub fn new(seed: u64) -> Self {
        // State must be nonzero; fold seed 0 to a fixed odd constant.
        Xorshift64Star { state: if seed == 0 { 0x9E3779B97F4A7C15 } else { seed } }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform value in `0..n` (n ≥ 1) via rejection sampling.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n >= 1);
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Uniform float in [0, 1).
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}
