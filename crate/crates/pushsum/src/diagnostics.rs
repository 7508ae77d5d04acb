//! Post-hoc analysis of recorded runs.
//!
//! The consensus side checks the worst-case residual envelope: on an
//! S-strongly connected sequence of `n` agents,
//!
//! ```text
//! ‖z_i(t+1) − x̄(t)‖ ≤ (8/δ)·(λ^t·Σ_j‖x_j(0)‖₁ + Σ_{s=1..t} λ^(t−s)·Σ_j‖e_j(s)‖₁)
//! ```
//!
//! with the guaranteed constants `δ = n^(−nS)` and `λ = (1 − n^(−nS))^(1/S)`.
//! Sharper constants exist for concrete sequences, but the check
//! deliberately uses the provable worst case so a violation always means a
//! bug, never an optimistic estimate.
//!
//! The optimization side locates and classifies the limit point, fits the
//! conditional mean-squared-error decay on a log-log window, measures
//! escape fractions from non-minimum critical points over seed sweeps, and
//! recommends the `a/t` scale that puts the local contraction rate
//! `2aβ` above 1, which is what the O(1/t) rate needs.

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{run, EngineError, Mode, RunConfig, RunTrace};
use crate::objectives::{
    classify_critical_point, find_critical_points_1d, CriticalKind, CriticalPointReport, FD_STEP,
    ObjectiveError, ObjectiveSuite,
};
use crate::schedule::StepSchedule;

/// How close a final state must be to a critical point to count as having
/// converged to it. The benchmark's limits are reported to two decimals,
/// so half a hundredth of slack on either side of rounding is enough.
pub const DEFAULT_CAPTURE_RADIUS: f64 = 0.05;

/// Minimum number of converged seeds for a rate regression.
pub const MIN_CONVERGED_SEEDS: usize = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("this analysis needs a stride-1 trace, got stride {stride}")]
    StrideNotOne { stride: u64 },
    #[error("trace records are not contiguous (missing rounds)")]
    NonContiguousTrace,
    #[error("trace has no records")]
    EmptyTrace,
    #[error("rate regression needs at least {needed} converged seeds, got {got}")]
    TooFewConverged { needed: usize, got: usize },
    #[error("regression window [{t_lo}, {t_hi}] selects fewer than two recorded points")]
    WindowTooNarrow { t_lo: u64, t_hi: u64 },
    #[error("traces in a sweep must share their recording grid")]
    MismatchedTraceGrids,
    #[error("analysis requires a one-dimensional suite, got dim {dim}")]
    NotOneDimensional { dim: usize },
    #[error("step-size recommendation needs a local minimum, found {kind}")]
    NotALocalMin { kind: CriticalKind },
    #[error("local curvature β = {beta:e} is not positive")]
    NonPositiveCurvature { beta: f64 },
    #[error("margin must be at least 1 (2aβ > 1 sits exactly at margin 1), got {margin}")]
    InvalidMargin { margin: f64 },
    #[error("escape estimation requires perturbed mode")]
    NotPerturbed,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Per-round consensus residuals `(t, max_i ‖z_i(t+1) − x̄(t)‖)`, indexed
/// as in the bound above: the entry at `t` uses the ratio of round `t+1`.
pub fn consensus_residuals(trace: &RunTrace) -> Vec<(u64, f64)> {
    trace
        .records
        .iter()
        .filter(|r| r.t >= 1)
        .map(|r| (r.t - 1, r.residual))
        .collect()
}

/// The worst-case residual envelope with its constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Bound {
    pub delta: f64,
    pub lambda: f64,
    /// `(t, bound)` aligned with [`consensus_residuals`].
    pub points: Vec<(u64, f64)>,
}

fn require_stride_one(trace: &RunTrace) -> Result<(), DiagnosticsError> {
    if trace.stride != 1 {
        return Err(DiagnosticsError::StrideNotOne {
            stride: trace.stride,
        });
    }
    if trace.records.is_empty() {
        return Err(DiagnosticsError::EmptyTrace);
    }
    for (k, r) in trace.records.iter().enumerate() {
        if r.t != k as u64 {
            return Err(DiagnosticsError::NonContiguousTrace);
        }
    }
    Ok(())
}

fn worst_case_constants(n: usize, s: u64) -> (f64, f64) {
    let delta = (n as f64).powi(-((n as u64 * s) as i32));
    let lambda = (1.0 - delta).powf(1.0 / s as f64);
    (delta, lambda)
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Worst-case residual bound along a stride-1 trace, using
/// `δ = n^(−nS)` and `λ = (1 − n^(−nS))^(1/S)`.
pub fn theorem2_bound(trace: &RunTrace, s: u64) -> Result<Theorem2Bound, DiagnosticsError> {
    require_stride_one(trace)?;
    let (delta, lambda) = worst_case_constants(trace.n, s);
    let scale = 8.0 / delta;
    // inner(t) = λ^t·Σ‖x_j(0)‖₁ + Σ_{s=1..t} λ^(t−s)·Σ‖e_j(s)‖₁, run as a
    // recursion: inner(t) = λ·inner(t−1) + Σ‖e_j(t)‖₁
    let mut inner: f64 = trace.records[0].z.iter().map(|z| norm1(z)).sum();
    let mut points = Vec::with_capacity(trace.records.len().saturating_sub(1));
    for record in &trace.records[1..] {
        points.push((record.t - 1, scale * inner));
        inner = lambda * inner + record.e_l1.iter().sum::<f64>();
    }
    Ok(Theorem2Bound {
        delta,
        lambda,
        points,
    })
}

/// One sample of the gradient-consensus envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub t: u64,
    /// Envelope value `c(t)`.
    pub c: f64,
    /// Measured `‖(1/n)Σ_i ∇F_i(z_i(t+1)) − f(x̄(t))‖`.
    pub q: f64,
}

/// The `c(t)` envelope on the gradient consensus error, with the partial
/// sums of `a(t+1)·c(t)` whose convergence the analysis relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    pub points: Vec<EnvelopePoint>,
    /// Running `Σ_{u≤t} a(u+1)·c(u)`.
    pub partial_sums: Vec<f64>,
    /// Largest `q(t) − c(t)`; the envelope holds iff this is ≤ 0.
    pub max_violation: f64,
    /// `(S(T) − S(T/10)) / S(T/10)`: how much the partial sums still grew
    /// over the last decade of rounds.
    pub tail_relative_increase: f64,
}

impl Lemma1Report {
    /// True when the measured envelope never fails.
    pub fn envelope_holds(&self) -> bool {
        self.max_violation <= 0.0
    }

    /// True when the partial sums have stopped growing to within
    /// `threshold` over the last decade of rounds.
    pub fn plateaued(&self, threshold: f64) -> bool {
        self.tail_relative_increase < threshold
    }
}

/// Computes the envelope `c(t) = l·n·(8/δ)·inner(t)` along a stride-1
/// trace and verifies it dominates the measured gradient consensus error.
pub fn lemma1_envelope(
    trace: &RunTrace,
    suite: &ObjectiveSuite,
    schedule: &StepSchedule,
    lipschitz_max: f64,
    s: u64,
) -> Result<Lemma1Report, DiagnosticsError> {
    require_stride_one(trace)?;
    let (delta, lambda) = worst_case_constants(trace.n, s);
    let scale = lipschitz_max * trace.n as f64 * 8.0 / delta;
    let mut inner: f64 = trace.records[0].z.iter().map(|z| norm1(z)).sum();

    let mut points = Vec::with_capacity(trace.records.len().saturating_sub(1));
    let mut partial_sums = Vec::with_capacity(points.capacity());
    let mut running = 0.0;
    let mut max_violation = f64::NEG_INFINITY;
    for pair in trace.records.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let t = prev.t;
        let c = scale * inner;

        let mut grad_mean = vec![0.0; trace.dim];
        for (i, zi) in next.z.iter().enumerate() {
            for (acc, g) in grad_mean.iter_mut().zip(suite.local(i).grad(zi)?) {
                *acc += g;
            }
        }
        for acc in &mut grad_mean {
            *acc /= trace.n as f64;
        }
        let f_at_xbar = suite.grad_avg(&prev.xbar)?;
        let diff: Vec<f64> = grad_mean
            .iter()
            .zip(&f_at_xbar)
            .map(|(a, b)| a - b)
            .collect();
        let q = norm2(&diff);

        max_violation = max_violation.max(q - c);
        running += schedule.value(t) * c;
        points.push(EnvelopePoint { t, c, q });
        partial_sums.push(running);
        inner = lambda * inner + next.e_l1.iter().sum::<f64>();
    }
    if points.is_empty() {
        return Err(DiagnosticsError::EmptyTrace);
    }
    let last = *partial_sums.last().unwrap();
    let tenth_idx = (partial_sums.len().saturating_sub(1)) / 10;
    let tenth = partial_sums[tenth_idx];
    let tail_relative_increase = if tenth > 0.0 {
        (last - tenth) / tenth
    } else {
        0.0
    };
    Ok(Lemma1Report {
        points,
        partial_sums,
        max_violation,
        tail_relative_increase,
    })
}

/// Matches the final average state against the suite's critical points;
/// `None` when nothing lies within the capture radius.
pub fn limit_report(
    trace: &RunTrace,
    suite: &ObjectiveSuite,
    grad_tol: f64,
    capture_radius: f64,
) -> Result<Option<CriticalPointReport>, DiagnosticsError> {
    if suite.dim() != 1 {
        return Err(DiagnosticsError::NotOneDimensional { dim: suite.dim() });
    }
    let xbar = trace.summary.final_xbar[0];
    let reports = find_critical_points_1d(suite, xbar - 1.0, xbar + 1.0, 401, grad_tol)?;
    Ok(reports
        .into_iter()
        .map(|r| ((r.location[0] - xbar).abs(), r))
        .filter(|(dist, _)| *dist <= capture_radius)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, r)| r))
}

/// Conditional mean-squared-error decay fitted on a log-log window.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub x_star: Vec<f64>,
    pub window: (u64, u64),
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_seeds: usize,
    pub n_converged: usize,
    pub capture_radius: f64,
}

/// Fits `log E‖x̄(t) − x*‖²` against `log t` over `[t_lo, t_hi]`, where
/// the mean runs over the seeds whose final consensus state landed within
/// the capture radius of `x*` — the conditioning the rate claim uses.
pub fn rate_fit(
    traces: &[RunTrace],
    x_star: &[f64],
    t_lo: u64,
    t_hi: u64,
    capture_radius: f64,
) -> Result<RateReport, DiagnosticsError> {
    let converged: Vec<&RunTrace> = traces
        .iter()
        .filter(|trace| {
            trace
                .summary
                .final_z
                .iter()
                .all(|z| dist(z, x_star) <= capture_radius)
        })
        .collect();
    if converged.len() < MIN_CONVERGED_SEEDS {
        return Err(DiagnosticsError::TooFewConverged {
            needed: MIN_CONVERGED_SEEDS,
            got: converged.len(),
        });
    }
    let in_window = |t: u64| t >= t_lo.max(1) && t <= t_hi;
    let grid: Vec<u64> = converged[0]
        .records
        .iter()
        .map(|r| r.t)
        .filter(|&t| in_window(t))
        .collect();
    if grid.len() < 2 {
        return Err(DiagnosticsError::WindowTooNarrow { t_lo, t_hi });
    }
    let mut acc = vec![0.0; grid.len()];
    for trace in &converged {
        let recs: Vec<_> = trace
            .records
            .iter()
            .filter(|r| in_window(r.t))
            .collect();
        if recs.len() != grid.len() || recs.iter().zip(&grid).any(|(r, &t)| r.t != t) {
            return Err(DiagnosticsError::MismatchedTraceGrids);
        }
        for (a, rec) in acc.iter_mut().zip(recs) {
            let d = dist(&rec.xbar, x_star);
            *a += d * d;
        }
    }

    let mut points = Vec::with_capacity(grid.len());
    for (&t, &sum) in grid.iter().zip(&acc) {
        let mse = sum / converged.len() as f64;
        if mse > 0.0 {
            points.push(((t as f64).ln(), mse.ln()));
        }
    }
    if points.len() < 2 {
        return Err(DiagnosticsError::WindowTooNarrow { t_lo, t_hi });
    }
    let (slope, intercept, r_squared) = least_squares(&points);
    Ok(RateReport {
        x_star: x_star.to_vec(),
        window: (t_lo, t_hi),
        slope,
        intercept,
        r_squared,
        n_seeds: traces.len(),
        n_converged: converged.len(),
        capture_radius,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r_squared)
}

/// Outcome of a seed sweep started near a non-minimum critical point.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeReport {
    /// Fraction of seeds whose limit is a local minimum.
    pub fraction: f64,
    pub outcomes: Vec<(u64, Option<CriticalPointReport>)>,
}

/// Runs the template once per seed (in parallel) and reports the fraction
/// that converged to a local minimum.
pub fn escape_probability(
    template: &RunConfig,
    seeds: &[u64],
    grad_tol: f64,
    capture_radius: f64,
) -> Result<EscapeReport, DiagnosticsError> {
    if template.mode != Mode::Perturbed {
        return Err(DiagnosticsError::NotPerturbed);
    }
    let outcomes: Result<Vec<(u64, Option<CriticalPointReport>)>, DiagnosticsError> = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = template.clone();
            cfg.seed = seed;
            let trace = run(cfg)?;
            let report = limit_report(&trace, &template.suite, grad_tol, capture_radius)?;
            Ok((seed, report))
        })
        .collect();
    let outcomes = outcomes?;
    let hits = outcomes
        .iter()
        .filter(|(_, r)| matches!(r, Some(rep) if rep.kind == CriticalKind::LocalMin))
        .count();
    Ok(EscapeReport {
        fraction: hits as f64 / seeds.len().max(1) as f64,
        outcomes,
    })
}

/// Recommends the `a/t` scale near a local minimum: `a = margin/(2β)`
/// with `β` the finite-difference slope of the average gradient field, so
/// `2aβ = margin > 1`.
pub fn recommend_stepsize(
    suite: &ObjectiveSuite,
    x_star: &[f64],
    margin: f64,
) -> Result<f64, DiagnosticsError> {
    if suite.dim() != 1 {
        return Err(DiagnosticsError::NotOneDimensional { dim: suite.dim() });
    }
    if !(margin >= 1.0) {
        return Err(DiagnosticsError::InvalidMargin { margin });
    }
    let report = classify_critical_point(suite, x_star[0], crate::objectives::GRAD_TOL)?;
    if report.kind != CriticalKind::LocalMin {
        return Err(DiagnosticsError::NotALocalMin { kind: report.kind });
    }
    let h = FD_STEP;
    let beta = (suite.grad_avg(&[x_star[0] + h])?[0] - suite.grad_avg(&[x_star[0] - h])?[0])
        / (2.0 * h);
    if beta <= 0.0 {
        return Err(DiagnosticsError::NonPositiveCurvature { beta });
    }
    Ok(margin / (2.0 * beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{RunSummary, TraceRecord};
    use crate::objectives::{paper_suite, LocalObjective};

    /// Trace with prescribed `‖x̄(t) − 0‖² = c/t^p`, converged at 0.
    fn synthetic_trace(c: f64, p: f64, t_max: u64, stride: u64) -> RunTrace {
        let mut records = Vec::new();
        let mut t = 0;
        while t <= t_max {
            let xbar = if t == 0 {
                vec![1.0]
            } else {
                vec![(c / (t as f64).powf(p)).sqrt()]
            };
            records.push(TraceRecord {
                t,
                z: vec![xbar.clone()],
                y: vec![1.0],
                xbar: xbar.clone(),
                residual: 0.0,
                grad_norm: 0.0,
                e_l1: vec![0.0],
            });
            t += stride;
        }
        let last = records.last().unwrap().clone();
        RunTrace {
            fingerprint: "synthetic".into(),
            n: 1,
            dim: 1,
            stride,
            records,
            summary: RunSummary {
                t_final: last.t,
                final_xbar: vec![0.0],
                final_z: vec![vec![0.0]],
                final_y: vec![1.0],
                stopped_early: false,
                max_mass_rel_err: None,
                max_identity_rel_err: None,
                max_mix_conservation_rel_err: None,
            },
        }
    }

    #[test]
    fn rate_fit_recovers_synthetic_exponents() {
        for (p, expected) in [(1.0, -1.0), (0.5, -0.5)] {
            let traces: Vec<RunTrace> =
                (0..30).map(|_| synthetic_trace(3.7, p, 100_000, 10)).collect();
            let report = rate_fit(&traces, &[0.0], 1_000, 100_000, 0.05).unwrap();
            assert!(
                (report.slope - expected).abs() <= 1e-6,
                "slope {} vs {}",
                report.slope,
                expected
            );
            assert!(report.r_squared > 0.999999);
            assert_eq!(report.n_converged, 30);
        }
    }

    #[test]
    fn rate_fit_requires_enough_converged_seeds() {
        let traces: Vec<RunTrace> = (0..10).map(|_| synthetic_trace(1.0, 1.0, 10_000, 10)).collect();
        assert!(matches!(
            rate_fit(&traces, &[0.0], 100, 10_000, 0.05),
            Err(DiagnosticsError::TooFewConverged { got: 10, .. })
        ));
    }

    #[test]
    fn recommend_stepsize_examples() {
        // single quadratic bowl z²: f = 2z, β = 2
        let suite =
            ObjectiveSuite::new(vec![LocalObjective::quadratic(vec![1.0], vec![0.0]).unwrap()])
                .unwrap();
        let a = recommend_stepsize(&suite, &[0.0], 2.0).unwrap();
        assert!((a - 0.5).abs() <= 1e-12);
        let boundary = recommend_stepsize(&suite, &[0.0], 1.0).unwrap();
        assert!((boundary - 0.25).abs() <= 1e-12);
        assert!(matches!(
            recommend_stepsize(&suite, &[0.0], 0.5),
            Err(DiagnosticsError::InvalidMargin { .. })
        ));

        // benchmark minimum near 2.6174: β = F''/3 ≈ 38.24, margin 2 → a ≈ 0.02615
        let bench = paper_suite();
        let a = recommend_stepsize(&bench, &[2.6174337387195158], 2.0).unwrap();
        assert!((a - 0.026149152019872134).abs() <= 1e-6, "a = {a}");
    }

    #[test]
    fn recommend_stepsize_rejects_maxima() {
        let bench = paper_suite();
        let err = recommend_stepsize(&bench, &[-1.1233481621178149], 2.0).unwrap_err();
        assert!(matches!(err, DiagnosticsError::NotALocalMin { .. }));
    }

    #[test]
    fn theorem2_bound_is_zero_for_zero_start_and_zero_increments() {
        let trace = synthetic_trace(0.0, 1.0, 100, 1);
        // force the xbar/z values to zero so the initial mass is zero
        let mut trace = trace;
        for r in &mut trace.records {
            r.z = vec![vec![0.0]];
            r.xbar = vec![0.0];
        }
        let bound = theorem2_bound(&trace, 1).unwrap();
        assert!(bound.points.iter().all(|(_, b)| *b == 0.0));
        let residuals = consensus_residuals(&trace);
        assert!(residuals.iter().all(|(_, r)| *r == 0.0));
    }

    #[test]
    fn theorem2_bound_requires_stride_one() {
        let trace = synthetic_trace(1.0, 1.0, 100, 10);
        assert!(matches!(
            theorem2_bound(&trace, 1),
            Err(DiagnosticsError::StrideNotOne { stride: 10 })
        ));
    }

    #[test]
    fn limit_report_ignores_far_points() {
        // a synthetic "stuck" state far from any critical point
        let mut trace = synthetic_trace(1.0, 1.0, 10, 1);
        trace.summary.final_xbar = vec![-2.2];
        let suite = paper_suite();
        assert_eq!(limit_report(&trace, &suite, 1e-6, 0.05).unwrap(), None);
        // and the true minimum is found when close enough
        trace.summary.final_xbar = vec![2.6174 + 0.01];
        let rep = limit_report(&trace, &suite, 1e-6, 0.05).unwrap().unwrap();
        assert_eq!(rep.kind, CriticalKind::LocalMin);
    }
}
