//! Deterministic sampling of tangent points.
//!
//! Reproducibility is part of the report contract, so the generator is a
//! self-contained SplitMix64: identical config always yields bit-identical
//! samples, independent of platform or dependency versions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::geometry::{MetricField, TangentPoint};
use crate::linalg;

/// Minimal SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let mut u = self.uniform();
        if u < 1e-300 {
            u = 1e-300;
        }
        let v = self.uniform();
        libm::sqrt(-2.0 * libm::log(u)) * libm::cos(2.0 * core::f64::consts::PI * v)
    }

    /// Uniform direction on the unit sphere of `R^n`.
    pub fn unit_vector(&mut self, n: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| self.normal()).collect();
            let norm = linalg::norm(&v);
            if norm > 1e-8 {
                return v.iter().map(|x| x / norm).collect();
            }
        }
    }
}

/// Configuration for drawing sample tangent points. Identical configs
/// produce identical samples.
#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub num_points: usize,
    pub seed: u64,
    /// Per-axis position interval `[box_lo[i], box_hi[i]]`.
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    /// Rescale the sampled direction so that `F(x, y) = 1`.
    pub normalize_f: bool,
}

impl SampleConfig {
    /// Box `[-half, half]^n`, the harness default.
    pub fn centered(n: usize, half: f64, num_points: usize, seed: u64) -> Self {
        SampleConfig {
            num_points,
            seed,
            box_lo: vec![-half; n],
            box_hi: vec![half; n],
            normalize_f: true,
        }
    }

    /// Draws `num_points` tangent points: positions uniform in the box
    /// (rejecting positions outside the metric domain), directions uniform
    /// on the unit sphere.
    pub fn sample(&self, m: &dyn MetricField) -> Result<Vec<TangentPoint>> {
        let n = m.dim();
        let mut rng = Rng::new(self.seed);
        let mut out = Vec::with_capacity(self.num_points);
        let mut attempts = 0usize;
        while out.len() < self.num_points {
            attempts += 1;
            if attempts > 1000 * self.num_points.max(1) {
                break;
            }
            let x: Vec<f64> = (0..n)
                .map(|i| rng.uniform_in(self.box_lo[i], self.box_hi[i]))
                .collect();
            if !m.domain_contains(&x) {
                continue;
            }
            let mut y = rng.unit_vector(n);
            if self.normalize_f {
                let f = m.eval(&x, &y)?;
                if f <= 0.0 {
                    continue;
                }
                for yi in &mut y {
                    *yi /= f;
                }
            }
            out.push(TangentPoint { x, y });
        }
        Ok(out)
    }

    /// Positions only (directions supplied elsewhere, e.g. per-x fits).
    pub fn sample_positions(&self, m: &dyn MetricField) -> Vec<Vec<f64>> {
        let n = m.dim();
        let mut rng = Rng::new(self.seed ^ 0xa5a5_a5a5_a5a5_a5a5);
        let mut out = Vec::with_capacity(self.num_points);
        let mut attempts = 0usize;
        while out.len() < self.num_points && attempts < 1000 * self.num_points.max(1) {
            attempts += 1;
            let x: Vec<f64> = (0..n)
                .map(|i| rng.uniform_in(self.box_lo[i], self.box_hi[i]))
                .collect();
            if m.domain_contains(&x) {
                out.push(x);
            }
        }
        out
    }
}

/// Deterministic quasi-uniform directions on the unit sphere of `R^n`,
/// used by the regression fits to guarantee rank. Spiral constructions for
/// n = 2, 3; a fixed-seed stream for higher n.
pub fn spiral_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    match n {
        2 => {
            for k in 0..count {
                // Golden-angle offset keeps consecutive calls from aliasing.
                let t = 2.0 * core::f64::consts::PI * (k as f64 + 0.5) / count as f64;
                out.push(vec![libm::cos(t), libm::sin(t)]);
            }
        }
        3 => {
            let golden = core::f64::consts::PI * (3.0 - libm::sqrt(5.0));
            for k in 0..count {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                let r = libm::sqrt((1.0 - z * z).max(0.0));
                let t = golden * k as f64;
                out.push(vec![r * libm::cos(t), r * libm::sin(t), z]);
            }
        }
        _ => {
            let mut rng = Rng::new(0x5eed_0000_0000_0001);
            for _ in 0..count {
                out.push(rng.unit_vector(n));
            }
        }
    }
    out
}
