//! Zero-mean, unit-variance perturbation models.
//!
//! Perturbed runs subtract `a(t+1)·W_i(t+1)` from each agent's update,
//! where the entries of `W_i(t)` are independent with mean 0 and variance
//! 1. Draws come from the counter-based streams in [`crate::rng`], so a
//! vector is a pure function of `(seed, t, agent)`: replays and concurrent
//! sweeps are reproducible without shared generator state.

use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// No perturbation; sampling returns the zero vector.
    None,
    /// Standard normal entries (the default; unbounded support is fine,
    /// only zero mean and bounded variance are required).
    Gaussian,
    /// ±1 entries with equal probability.
    Rademacher,
}

/// Perturbation model: entry distribution plus dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub dim: usize,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, dim: usize) -> Self {
        Self { kind, dim }
    }

    pub fn none(dim: usize) -> Self {
        Self::new(NoiseKind::None, dim)
    }
}

/// Seeded source of perturbation vectors, addressed by `(t, agent)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The perturbation vector `W_agent(t)`.
    pub fn sample(&self, model: &NoiseModel, t: u64, agent: usize) -> Vec<f64> {
        match model.kind {
            NoiseKind::None => vec![0.0; model.dim],
            NoiseKind::Gaussian => {
                let mut rng = rng::stream(self.seed, rng::TAG_NOISE, t, agent as u64);
                (0..model.dim).map(|_| rng::standard_normal(&mut rng)).collect()
            }
            NoiseKind::Rademacher => {
                let mut rng = rng::stream(self.seed, rng::TAG_NOISE, t, agent as u64);
                (0..model.dim).map(|_| rng::rademacher(&mut rng)).collect()
            }
        }
    }
}
