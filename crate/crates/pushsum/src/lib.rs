//! Push-sum simulator for distributed non-convex optimization on
//! time-varying directed graphs.
//!
//! A network of `n` agents minimizes `F(z) = Σ_i F_i(z)` where agent `i`
//! only knows its local cost `F_i`. Each round, every agent splits its
//! state and a companion weight equally among its out-neighbors, forms the
//! ratio estimate `z_i = w_i / y_i`, and descends along its local gradient
//! evaluated at that ratio — optionally with an additive i.i.d.
//! perturbation that lets the network escape non-minimum critical points.
//!
//! The crate is organized around that pipeline:
//!
//! - [`graphs`]: directed topologies, time-varying sequences, and
//!   S-strong-connectivity certification.
//! - [`objectives`]: local objectives with analytic gradients, the
//!   built-in three-agent piecewise-cubic benchmark suite, and a 1-D
//!   critical-point oracle.
//! - [`schedule`]: power-law step sizes `a/(t+t0)^ν` with summability
//!   validators.
//! - [`noise`]: the zero-mean unit-variance perturbation models, drawn
//!   from counter-based streams so traces replay bit-identically.
//! - [`engine`]: the synchronous round loop and trace recording.
//! - [`diagnostics`]: consensus residual bounds, limit classification,
//!   convergence-rate regression, escape statistics, and step-size
//!   recommendation.

pub mod diagnostics;
pub mod engine;
pub mod graphs;
pub mod noise;
pub mod objectives;
pub mod rng;
pub mod schedule;

pub use engine::{run, Mode, RunConfig, RunTrace, Simulator};
pub use graphs::{DirectedGraph, GraphSequence};
pub use objectives::{ObjectiveSuite, SeamConstants};
pub use schedule::StepSchedule;
