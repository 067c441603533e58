//! Seeded pseudo-random generation with a fully specified update rule.
//!
//! Everything that needs reproducible randomness (centroid initialization,
//! synthetic scenes, toy-training weight init) goes through [`SplitMix64`]
//! so that a trace can be reproduced from the seed alone, in any language,
//! without depending on an external RNG crate's version-to-version stability.

/// SplitMix64 generator (Steele, Lea & Flood).
///
/// State update and output mix, exactly:
///
/// ```text
/// state  = state + 0x9E3779B97F4A7C15        (mod 2^64)
/// z = state
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9   (mod 2^64)
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB   (mod 2^64)
/// output = z ^ (z >> 31)
/// ```
///
/// Derived draws are specified here once and relied on by tests:
/// * `next_f64`: `(next_u64() >> 11) * 2^-53`, uniform in `[0, 1)`.
/// * `next_index(n)`: `next_u64() mod n`. The modulo bias is below 2^-50
///   for every `n` used in this crate and is accepted for portability.
/// * `next_gauss`: Box-Muller on `(u1, u2)` drawn in that order;
///   `r = sqrt(-2 ln(1 - u1))`, `theta = 2*pi*u2`; returns `r cos(theta)`
///   first and caches `r sin(theta)` for the next call.
/// * `sample_distinct(n, k)`: partial Fisher-Yates over `[0, n)`; at step
///   `i` swap position `i` with `i + next_index(n - i)`; the first `k`
///   slots, in order, are the sample.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    cached_gauss: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            cached_gauss: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[-1, 1)`.
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    /// Uniform index in `[0, n)`. `n` must be nonzero.
    pub fn next_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_index bound must be nonzero");
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal draw via Box-Muller; see the type docs for the rule.
    pub fn next_gauss(&mut self) -> f64 {
        if let Some(z) = self.cached_gauss.take() {
            return z;
        }
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_gauss = Some(r * theta.sin());
        r * theta.cos()
    }

    /// `k` distinct indices from `[0, n)`, uniform without replacement,
    /// in sampled order (partial Fisher-Yates). Requires `k <= n`.
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot sample {k} distinct indices from {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
