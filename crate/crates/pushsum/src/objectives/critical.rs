//! One-dimensional critical-point location and classification.
//!
//! The gradient field here is the agent-average `f = (1/n) Σ_i ∇F_i`,
//! whose zeros coincide with those of `∇F`. Roots are bracketed by sign
//! changes on a grid and refined by bisection; classification uses a
//! finite-difference curvature of the global objective with a
//! neighborhood-sampling fallback for the near-flat cases where second
//! differences cannot be trusted.

use super::{ObjectiveError, ObjectiveSuite};

/// Default tolerance on `|f|` at a reported critical point.
pub const GRAD_TOL: f64 = 1e-6;
/// Default step for finite-difference derivatives.
pub const FD_STEP: f64 = 1e-5;
/// Keep finite-difference probes at least this far from piece seams.
pub const SEAM_GUARD: f64 = 1e-3;

const NEIGHBORHOOD_HALF_WIDTH: f64 = 1e-2;
const NEIGHBORHOOD_SAMPLES: usize = 101;
const BISECTION_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    LocalMin,
    LocalMax,
    Other,
}

impl std::fmt::Display for CriticalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CriticalKind::LocalMin => write!(f, "local_min"),
            CriticalKind::LocalMax => write!(f, "local_max"),
            CriticalKind::Other => write!(f, "other"),
        }
    }
}

/// A located zero of the average gradient field.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPointReport {
    pub location: Vec<f64>,
    pub kind: CriticalKind,
    pub grad_norm: f64,
    /// Second difference of the global objective; `None` when the
    /// classification fell back to neighborhood sampling.
    pub curvature: Option<f64>,
}

/// Classifies a point already known to have a small average gradient.
pub fn classify_critical_point(
    suite: &ObjectiveSuite,
    z: f64,
    tol: f64,
) -> Result<CriticalPointReport, ObjectiveError> {
    let grad = suite.grad_avg(&[z])?[0];
    if grad.abs() > tol {
        return Err(ObjectiveError::GradientNotSmall {
            grad_norm: grad.abs(),
            tol,
        });
    }
    let h = FD_STEP;
    let curvature =
        (suite.eval_global(&[z + h])? - 2.0 * suite.eval_global(&[z])? + suite.eval_global(&[z - h])?)
            / (h * h);

    // second differences near zero are indistinguishable from noise; fall
    // back to comparing neighborhood values directly
    let kind = if curvature.abs() >= 10.0 * tol {
        if curvature > 0.0 {
            CriticalKind::LocalMin
        } else {
            CriticalKind::LocalMax
        }
    } else {
        sample_neighborhood(suite, z)?
    };
    let curvature = if curvature.abs() >= 10.0 * tol {
        Some(curvature)
    } else {
        None
    };
    Ok(CriticalPointReport {
        location: vec![z],
        kind,
        grad_norm: grad.abs(),
        curvature,
    })
}

fn sample_neighborhood(suite: &ObjectiveSuite, z: f64) -> Result<CriticalKind, ObjectiveError> {
    let center = suite.eval_global(&[z])?;
    let mut all_above = true;
    let mut all_below = true;
    for k in 0..NEIGHBORHOOD_SAMPLES {
        let frac = k as f64 / (NEIGHBORHOOD_SAMPLES - 1) as f64;
        let x = z - NEIGHBORHOOD_HALF_WIDTH + 2.0 * NEIGHBORHOOD_HALF_WIDTH * frac;
        if x == z {
            continue;
        }
        let v = suite.eval_global(&[x])?;
        if v <= center {
            all_above = false;
        }
        if v >= center {
            all_below = false;
        }
    }
    Ok(if all_above {
        CriticalKind::LocalMin
    } else if all_below {
        CriticalKind::LocalMax
    } else {
        CriticalKind::Other
    })
}

/// Scans `[lo, hi]` for sign changes of the average gradient, refines each
/// bracket by bisection, and classifies the surviving roots.
pub fn find_critical_points_1d(
    suite: &ObjectiveSuite,
    lo: f64,
    hi: f64,
    grid: usize,
    tol: f64,
) -> Result<Vec<CriticalPointReport>, ObjectiveError> {
    if suite.dim() != 1 {
        return Err(ObjectiveError::NotOneDimensional { dim: suite.dim() });
    }
    if !(lo < hi) || grid < 2 {
        return Err(ObjectiveError::BadSearchRange);
    }
    let g = |z: f64| -> Result<f64, ObjectiveError> { Ok(suite.grad_avg(&[z])?[0]) };
    let spacing = (hi - lo) / (grid - 1) as f64;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_z = lo;
    let mut prev_g = g(lo)?;
    for k in 1..grid {
        let z = lo + spacing * k as f64;
        let gz = g(z)?;
        if prev_g == 0.0 {
            roots.push(prev_z);
        } else if prev_g * gz < 0.0 {
            roots.push(bisect(&mut |x| g(x), prev_z, z)?);
        }
        prev_z = z;
        prev_g = gz;
    }
    if prev_g == 0.0 {
        roots.push(prev_z);
    }

    let mut reports = Vec::new();
    for r in roots {
        if g(r)?.abs() > tol {
            continue;
        }
        if reports
            .iter()
            .any(|rep: &CriticalPointReport| (rep.location[0] - r).abs() <= spacing * 0.5)
        {
            continue;
        }
        reports.push(classify_critical_point(suite, r, tol)?);
    }
    Ok(reports)
}

fn bisect(
    g: &mut impl FnMut(f64) -> Result<f64, ObjectiveError>,
    mut a: f64,
    mut b: f64,
) -> Result<f64, ObjectiveError> {
    let mut ga = g(a)?;
    for _ in 0..BISECTION_LIMIT {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break; // interval collapsed to adjacent floats
        }
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if (ga < 0.0) == (gm < 0.0) {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
