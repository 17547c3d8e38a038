//! Deterministic sampling.
//!
//! The generator is PCG XSH-RR 64/32 ("pcg32"): 64 bit LCG state advanced by
//! `state <- state * 6364136223846793005 + increment`, output word
//! `rotr32((((state >> 18) ^ state) >> 27) as u32, state >> 59)` computed from
//! the pre-advance state. The increment is fixed to the reference stream
//! constant `1442695040888963407`. Any implementation of that output function
//! reproduces the exact point streams used by the test suites and the CLI.

use crate::num::{real, Real};

const PCG_MULT: u64 = 6364136223846793005;
const PCG_INC: u64 = 1442695040888963407;

/// PCG XSH-RR 64/32 generator.
#[derive(Clone, Debug)]
pub struct Pcg32 {
    state: u64,
}

impl Pcg32 {
    /// Seeds the generator; the seed goes through one scramble step so that
    /// small seeds do not produce correlated first outputs.
    pub fn new(seed: u64) -> Self {
        let mut rng = Pcg32 { state: 0 };
        rng.state = rng.state.wrapping_add(PCG_INC).wrapping_add(seed);
        rng.next_u32();
        rng
    }

    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.state = old.wrapping_mul(PCG_MULT).wrapping_add(PCG_INC);
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    pub fn next_u64(&mut self) -> u64 {
        let hi = self.next_u32() as u64;
        let lo = self.next_u32() as u64;
        (hi << 32) | lo
    }

    /// Uniform in `[0, 1)` with 53 random mantissa bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform direction on the Euclidean unit sphere in `dim` components,
    /// by normalizing a Box-Muller Gaussian vector.
    pub fn unit_vector<T: Real>(&mut self, dim: usize) -> Vec<T> {
        loop {
            let mut v = Vec::with_capacity(dim);
            while v.len() < dim {
                let u1 = self.uniform().max(1e-300);
                let u2 = self.uniform();
                let r = (-2.0 * u1.ln()).sqrt();
                let a = 2.0 * std::f64::consts::PI * u2;
                v.push(r * a.cos());
                if v.len() < dim {
                    v.push(r * a.sin());
                }
            }
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-6 {
                return v.into_iter().map(|c| real(c / norm)).collect();
            }
        }
    }

    /// Uniform point in the Euclidean ball `|x - center| <= radius`, by
    /// rejection from the bounding cube.
    pub fn in_ball<T: Real>(&mut self, center: &[T], radius: f64) -> Vec<T> {
        let dim = center.len();
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.uniform_in(-radius, radius)).collect();
            if v.iter().map(|c| c * c).sum::<f64>() <= radius * radius {
                return center
                    .iter()
                    .zip(&v)
                    .map(|(c, d)| *c + real::<T>(*d))
                    .collect();
            }
        }
    }
}
