//! Local objectives, their gradients, and the built-in benchmark suite.
//!
//! Each agent holds a [`LocalObjective`] with an analytic gradient plus
//! declared gradient-norm and Lipschitz bounds. An [`ObjectiveSuite`]
//! bundles the `n` per-agent objectives and exposes the global objective
//! `F(z) = Σ_i F_i(z)` and the average gradient field
//! `f(z) = (1/n) Σ_i ∇F_i(z)`, whose zeros are the network's critical
//! points.
//!
//! [`paper_suite`] builds the three-agent one-dimensional benchmark: each
//! local cost is a cubic/quartic core on `|z| ≤ 10` extended by affine
//! branches whose slopes match the core derivative at the seams. Two of
//! the published branch constants break continuity at `z = -10`; the
//! repaired constants (the default) restore it, and the printed ones stay
//! available behind [`SeamConstants::Printed`] for comparison.

mod critical;
mod piecewise;

pub use critical::{
    classify_critical_point, find_critical_points_1d, CriticalKind, CriticalPointReport, FD_STEP,
    GRAD_TOL, SEAM_GUARD,
};
pub use piecewise::{Piece, PiecewisePoly, Polynomial};

use thiserror::Error;

use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("a suite needs at least one local objective")]
    EmptySuite,
    #[error("local objectives disagree on dimension ({a} vs {b})")]
    MixedDims { a: usize, b: usize },
    #[error("piecewise function must cover the whole line without gaps or overlaps")]
    UncoveredLine,
    #[error("piecewise function has no pieces")]
    NoPieces,
    #[error("polynomial degree {degree} unsupported (max 4)")]
    DegreeTooHigh { degree: usize },
    #[error("unbounded piece of degree {degree} would make the gradient unbounded")]
    UnboundedTail { degree: usize },
    #[error("operation requires a one-dimensional suite, got dim {dim}")]
    NotOneDimensional { dim: usize },
    #[error("gradient norm {grad_norm:e} exceeds tolerance {tol:e} at the query point")]
    GradientNotSmall { grad_norm: f64, tol: f64 },
    #[error("search range must satisfy lo < hi with at least two grid points")]
    BadSearchRange,
    #[error("quadratic weights and centers must have equal nonzero length")]
    BadQuadratic,
}

/// Box radius on which the quadratic test family declares its gradient
/// bound; quadratics have no global bound, so the declaration is scoped.
pub const REFERENCE_BOX_RADIUS: f64 = 100.0;

/// One agent's cost function with analytic gradient and declared bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalObjective {
    /// One-dimensional piecewise polynomial.
    Piecewise {
        f: PiecewisePoly,
        grad: PiecewisePoly,
        grad_bound: f64,
        lipschitz: f64,
    },
    /// Axis-aligned bowl `Σ_k w_k (z_k − c_k)²`; the multi-dimensional
    /// test family.
    Quadratic {
        weights: Vec<f64>,
        centers: Vec<f64>,
        grad_bound: f64,
        lipschitz: f64,
    },
}

impl LocalObjective {
    /// Wraps a piecewise polynomial, deriving its gradient and exact
    /// gradient/Lipschitz bounds.
    pub fn piecewise(f: PiecewisePoly) -> Result<Self, ObjectiveError> {
        let grad = f.derivative();
        let grad_bound = grad.max_abs()?;
        let lipschitz = grad.derivative().max_abs()?;
        Ok(Self::Piecewise {
            f,
            grad,
            grad_bound,
            lipschitz,
        })
    }

    pub fn quadratic(weights: Vec<f64>, centers: Vec<f64>) -> Result<Self, ObjectiveError> {
        if weights.is_empty() || weights.len() != centers.len() {
            return Err(ObjectiveError::BadQuadratic);
        }
        let grad_bound = weights
            .iter()
            .zip(&centers)
            .map(|(w, c)| (2.0 * w * (REFERENCE_BOX_RADIUS + c.abs())).powi(2))
            .sum::<f64>()
            .sqrt();
        let lipschitz = weights.iter().fold(0.0f64, |m, w| m.max(2.0 * w.abs()));
        Ok(Self::Quadratic {
            weights,
            centers,
            grad_bound,
            lipschitz,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            LocalObjective::Piecewise { .. } => 1,
            LocalObjective::Quadratic { weights, .. } => weights.len(),
        }
    }

    fn check_dim(&self, z: &[f64]) -> Result<(), ObjectiveError> {
        if z.len() != self.dim() {
            return Err(ObjectiveError::DimMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64, ObjectiveError> {
        self.check_dim(z)?;
        Ok(match self {
            LocalObjective::Piecewise { f, .. } => f.eval(z[0]),
            LocalObjective::Quadratic {
                weights, centers, ..
            } => weights
                .iter()
                .zip(centers)
                .zip(z)
                .map(|((w, c), x)| w * (x - c) * (x - c))
                .sum(),
        })
    }

    pub fn grad(&self, z: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        self.check_dim(z)?;
        Ok(match self {
            LocalObjective::Piecewise { grad, .. } => vec![grad.eval(z[0])],
            LocalObjective::Quadratic {
                weights, centers, ..
            } => weights
                .iter()
                .zip(centers)
                .zip(z)
                .map(|((w, c), x)| 2.0 * w * (x - c))
                .collect(),
        })
    }

    /// Declared bound on `‖∇F_i‖` (exact for piecewise functions, scoped
    /// to the reference box for quadratics).
    pub fn grad_bound(&self) -> f64 {
        match self {
            LocalObjective::Piecewise { grad_bound, .. } => *grad_bound,
            LocalObjective::Quadratic { grad_bound, .. } => *grad_bound,
        }
    }

    /// Declared Lipschitz constant of the gradient.
    pub fn lipschitz(&self) -> f64 {
        match self {
            LocalObjective::Piecewise { lipschitz, .. } => *lipschitz,
            LocalObjective::Quadratic { lipschitz, .. } => *lipschitz,
        }
    }

    /// Interior seams to keep finite-difference probes away from.
    pub fn seams(&self) -> Vec<f64> {
        match self {
            LocalObjective::Piecewise { f, .. } => f.seams(),
            LocalObjective::Quadratic { .. } => Vec::new(),
        }
    }
}

/// The `n` local objectives of a network, all sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSuite {
    locals: Vec<LocalObjective>,
}

impl ObjectiveSuite {
    pub fn new(locals: Vec<LocalObjective>) -> Result<Self, ObjectiveError> {
        let first = locals.first().ok_or(ObjectiveError::EmptySuite)?;
        let dim = first.dim();
        for l in &locals {
            if l.dim() != dim {
                return Err(ObjectiveError::MixedDims { a: dim, b: l.dim() });
            }
        }
        Ok(Self { locals })
    }

    pub fn n(&self) -> usize {
        self.locals.len()
    }

    pub fn dim(&self) -> usize {
        self.locals[0].dim()
    }

    pub fn local(&self, i: usize) -> &LocalObjective {
        &self.locals[i]
    }

    pub fn locals(&self) -> &[LocalObjective] {
        &self.locals
    }

    /// `F(z) = Σ_i F_i(z)`.
    pub fn eval_global(&self, z: &[f64]) -> Result<f64, ObjectiveError> {
        let mut total = 0.0;
        for l in &self.locals {
            total += l.eval(z)?;
        }
        Ok(total)
    }

    /// `f(z) = (1/n) Σ_i ∇F_i(z)`, the average gradient field.
    pub fn grad_avg(&self, z: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        let mut acc = vec![0.0; self.dim()];
        for l in &self.locals {
            for (a, g) in acc.iter_mut().zip(l.grad(z)?) {
                *a += g;
            }
        }
        let n = self.n() as f64;
        for a in &mut acc {
            *a /= n;
        }
        Ok(acc)
    }

    /// Largest declared Lipschitz constant across agents.
    pub fn lipschitz_max(&self) -> f64 {
        self.locals.iter().map(LocalObjective::lipschitz).fold(0.0, f64::max)
    }

    /// Largest declared gradient bound across agents.
    pub fn grad_bound_max(&self) -> f64 {
        self.locals
            .iter()
            .map(LocalObjective::grad_bound)
            .fold(0.0, f64::max)
    }

    /// All seams across agents, for finite-difference guards.
    pub fn seams(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.locals.iter().flat_map(|l| l.seams()).collect();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s
    }
}

/// Which affine branch constants the benchmark suite uses below `z = -10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeamConstants {
    /// Constants recomputed so each local cost is continuous (C¹) at the
    /// seams. This is the default: the convergence analysis needs
    /// Lipschitz gradients, which a jump would break.
    #[default]
    Repaired,
    /// The constants as printed; two lower branches jump at `z = -10`.
    Printed,
}

fn piece(lo: f64, hi: f64, coeffs: &[f64]) -> Piece {
    Piece {
        lo,
        hi,
        poly: Polynomial::new(coeffs.to_vec()),
    }
}

fn paper_local(
    core: &[f64],
    upper: &[f64],
    lower: &[f64],
) -> Result<LocalObjective, ObjectiveError> {
    LocalObjective::piecewise(PiecewisePoly::new(vec![
        piece(f64::NEG_INFINITY, -10.0, lower),
        piece(-10.0, 10.0, core),
        piece(10.0, f64::INFINITY, upper),
    ])?)
}

/// The built-in three-agent benchmark suite with repaired seam constants.
pub fn paper_suite() -> ObjectiveSuite {
    paper_suite_with(SeamConstants::Repaired)
}

/// The built-in benchmark suite with a choice of lower-branch constants.
pub fn paper_suite_with(constants: SeamConstants) -> ObjectiveSuite {
    // cores (ascending coefficients):
    //   F1 = (z³ − 16z)(z + 2) = z⁴ + 2z³ − 16z² − 32z
    //   F2 = (0.5z³ + z²)(z − 4) = 0.5z⁴ − z³ − 4z²
    //   F3 = (z + 2)²(z − 4) = z³ − 12z − 16
    let (f1_lower, f3_lower) = match constants {
        SeamConstants::Repaired => ([-24_400.0, -3_112.0], [1_984.0, 288.0]),
        SeamConstants::Printed => ([-25_040.0, -3_112.0], [-1_984.0, 288.0]),
    };
    let locals = vec![
        paper_local(
            &[0.0, -32.0, -16.0, 2.0, 1.0],
            &[-32_400.0, 4_248.0],
            &f1_lower,
        ),
        paper_local(
            &[0.0, 0.0, -4.0, -1.0, 0.5],
            &[-12_600.0, 1_620.0],
            &[-16_600.0, -2_220.0],
        ),
        paper_local(&[-16.0, -12.0, 0.0, 1.0], &[-2_016.0, 288.0], &f3_lower),
    ];
    let locals = locals
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .expect("static benchmark definition");
    ObjectiveSuite::new(locals).expect("static benchmark definition")
}

/// Max relative error between the analytic gradient and a central
/// difference of the objective, over coordinates.
pub fn check_gradient(obj: &LocalObjective, z: &[f64], h: f64) -> Result<f64, ObjectiveError> {
    obj.check_dim(z)?;
    let analytic = obj.grad(z)?;
    let mut worst = 0.0f64;
    let mut probe = z.to_vec();
    for k in 0..z.len() {
        probe[k] = z[k] + h;
        let plus = obj.eval(&probe)?;
        probe[k] = z[k] - h;
        let minus = obj.eval(&probe)?;
        probe[k] = z[k];
        let fd = (plus - minus) / (2.0 * h);
        worst = worst.max((fd - analytic[k]).abs() / (1.0 + analytic[k].abs()));
    }
    Ok(worst)
}

/// Observed bound statistics from random sampling, for validating the
/// declared gradient and Lipschitz constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotCheck {
    pub max_grad_norm: f64,
    pub max_lipschitz_ratio: f64,
}

/// Samples `‖∇F_i‖` and difference quotients inside a box of the given
/// radius.
pub fn spot_check_bounds(
    obj: &LocalObjective,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<SpotCheck, ObjectiveError> {
    let d = obj.dim();
    let mut rng = rng::stream(seed, rng::TAG_SPOT, 0, 0);
    let draw_point = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|_| (rng::uniform_open01(rng) * 2.0 - 1.0) * radius)
            .collect()
    };
    let mut max_grad: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for _ in 0..samples {
        let z1 = draw_point(&mut rng);
        let z2 = draw_point(&mut rng);
        let g1 = obj.grad(&z1)?;
        let g2 = obj.grad(&z2)?;
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        max_grad = max_grad.max(norm(&g1)).max(norm(&g2));
        let dist: f64 = z1
            .iter()
            .zip(&z2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist > 1e-12 {
            let diff: f64 = g1
                .iter()
                .zip(&g2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            max_ratio = max_ratio.max(diff / dist);
        }
    }
    Ok(SpotCheck {
        max_grad_norm: max_grad,
        max_lipschitz_ratio: max_ratio,
    })
}
