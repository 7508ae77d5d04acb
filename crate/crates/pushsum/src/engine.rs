//! The synchronous push-sum round loop.
//!
//! Each round applies, in order:
//!
//! 1. **mixing** — every agent `j` sends `x_j/d_j` and `y_j/d_j` to each
//!    of its `d_j` out-neighbors (itself included); receivers accumulate
//!    into `w` and `y`. The column sums of the implied mixing matrix are
//!    one, so `Σ_i w_i = Σ_i x_i` and `Σ_i y_i` is invariant.
//! 2. **ratio** — `z_i = w_i / y_i`, the consensus estimate.
//! 3. **gradient injection** — `x_i = w_i − a(t+1)·∇F_i(z_i)`, minus
//!    `a(t+1)·W_i(t+1)` in perturbed mode. Gradients are always evaluated
//!    at the post-mixing ratio `z_i(t+1)`, never at the pre-mixing state.
//!
//! The loop records a trace at a configurable stride and verifies two
//! structural identities every step: conservation of `Σ y_i`, and the
//! average-state recursion
//! `x̄(t+1) = x̄(t) − a(t+1)·[(1/n)Σ_i ∇F_i(z_i(t+1)) + W̄(t+1)]`,
//! which holds by construction up to floating-point reassociation.

use rayon::prelude::*;
use thiserror::Error;

use crate::graphs::{DirectedGraph, GraphError, GraphSequence};
use crate::noise::{NoiseModel, NoiseStream};
use crate::objectives::{ObjectiveError, ObjectiveSuite};
use crate::schedule::{InvalidSchedule, StepSchedule};

/// Abort threshold for the push-sum weights. In exact arithmetic `y_i`
/// stays bounded away from zero on S-strongly connected sequences, so an
/// underflow signals a modeling bug rather than a recoverable state.
pub const Y_UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("suite has {suite_n} agents but the graph sequence has {graph_n}")]
    AgentCountMismatch { suite_n: usize, graph_n: usize },
    #[error("config provides {got} initial vectors for {expected} agents")]
    InitialStateCount { expected: usize, got: usize },
    #[error("initial vector for agent {agent} has dim {got}, suite dim is {expected}")]
    InitialStateDim {
        agent: usize,
        expected: usize,
        got: usize,
    },
    #[error("noise model has dim {got}, suite dim is {expected}")]
    NoiseDimMismatch { expected: usize, got: usize },
    #[error("trace stride must be at least 1")]
    ZeroStride,
    #[error("step schedule rejected: {0} (set allow_invalid_schedule to proceed anyway)")]
    InvalidSchedule(InvalidSchedule),
    #[error("graph at round {t} has {got} nodes, expected {expected}")]
    GraphSizeChanged { t: u64, expected: usize, got: usize },
    #[error("push-sum weight underflow at round {t}, agent {agent}: y = {y:e}")]
    YUnderflow { t: u64, agent: usize, y: f64 },
    #[error("non-finite value at round {t}, agent {agent}")]
    NonFinite { t: u64, agent: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Pure gradient injection.
    Deterministic,
    /// Gradient plus i.i.d. perturbation.
    Perturbed,
}

/// Per-agent push-sum variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub y: f64,
    pub z: Vec<f64>,
}

/// The whole network at one round, with the cached average state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: u64,
    pub agents: Vec<AgentState>,
    pub xbar: Vec<f64>,
}

impl NetworkState {
    /// Round-zero state: `y_i = 1`, and `w`, `z` primed to the initial
    /// `x` values.
    pub fn new(x0: &[Vec<f64>]) -> Self {
        let agents = x0
            .iter()
            .map(|x| AgentState {
                x: x.clone(),
                w: x.clone(),
                y: 1.0,
                z: x.clone(),
            })
            .collect();
        let xbar = mean_of(x0);
        Self { t: 0, agents, xbar }
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn dim(&self) -> usize {
        self.agents[0].x.len()
    }

    pub fn y_sum(&self) -> f64 {
        self.agents.iter().map(|a| a.y).sum()
    }
}

fn mean_of(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len() as f64;
    let d = vectors[0].len();
    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    mean
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Optional early stop: the run ends once `‖f(x̄)‖` stays at or below
/// `grad_tol` for `dwell` consecutive rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub grad_tol: f64,
    pub dwell: u64,
}

/// Everything a run needs; cloning and swapping the seed is how sweeps
/// fan out.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub suite: ObjectiveSuite,
    pub graphs: GraphSequence,
    pub schedule: StepSchedule,
    pub noise: NoiseModel,
    pub mode: Mode,
    pub x0: Vec<Vec<f64>>,
    pub t_max: u64,
    pub seed: u64,
    pub stride: u64,
    pub allow_invalid_schedule: bool,
    pub stop: Option<StopRule>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        self.graphs.validate()?;
        if self.suite.n() != self.graphs.node_count() {
            return Err(EngineError::AgentCountMismatch {
                suite_n: self.suite.n(),
                graph_n: self.graphs.node_count(),
            });
        }
        if self.x0.len() != self.suite.n() {
            return Err(EngineError::InitialStateCount {
                expected: self.suite.n(),
                got: self.x0.len(),
            });
        }
        for (agent, x) in self.x0.iter().enumerate() {
            if x.len() != self.suite.dim() {
                return Err(EngineError::InitialStateDim {
                    agent,
                    expected: self.suite.dim(),
                    got: x.len(),
                });
            }
        }
        if self.noise.dim != self.suite.dim() {
            return Err(EngineError::NoiseDimMismatch {
                expected: self.suite.dim(),
                got: self.noise.dim,
            });
        }
        if self.stride == 0 {
            return Err(EngineError::ZeroStride);
        }
        if !self.allow_invalid_schedule {
            self.schedule
                .validate_robbins_monro()
                .map_err(EngineError::InvalidSchedule)?;
        }
        Ok(())
    }

    /// Stable one-line description, stored in traces.
    pub fn fingerprint(&self) -> String {
        format!(
            "n={} d={} mode={:?} noise={:?} a={} nu={} t0={} seed={} t_max={} stride={}",
            self.suite.n(),
            self.suite.dim(),
            self.mode,
            self.noise.kind,
            self.schedule.a(),
            self.schedule.nu(),
            self.schedule.t0(),
            self.seed,
            self.t_max,
            self.stride,
        )
    }
}

/// One round's worth of mixing: `(w, y)` after every agent pushes its
/// `1/d_j` shares along the graph's edges.
pub fn mixing_step(
    state: &NetworkState,
    graph: &DirectedGraph,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), EngineError> {
    let n = state.n();
    if graph.node_count() != n {
        return Err(EngineError::GraphSizeChanged {
            t: state.t,
            expected: n,
            got: graph.node_count(),
        });
    }
    let d = state.dim();
    let mut w = vec![vec![0.0; d]; n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        let deg = graph.out_degree(j)? as f64;
        let y_share = state.agents[j].y / deg;
        for i in graph.out_neighbors(j) {
            for (acc, xj) in w[i].iter_mut().zip(&state.agents[j].x) {
                *acc += xj / deg;
            }
            y[i] += y_share;
        }
    }
    Ok((w, y))
}

/// `z_i = w_i / y_i`, aborting on weight underflow.
pub fn ratio_step(w: &[Vec<f64>], y: &[f64], t: u64) -> Result<Vec<Vec<f64>>, EngineError> {
    w.iter()
        .zip(y)
        .enumerate()
        .map(|(agent, (wi, &yi))| {
            if !(yi > Y_UNDERFLOW) {
                return Err(EngineError::YUnderflow { t, agent, y: yi });
            }
            Ok(wi.iter().map(|c| c / yi).collect())
        })
        .collect()
}

/// `x_i = w_i − a·(∇F_i(z_i) + W_i)`. The caller supplies the noise
/// vectors (zeros in deterministic mode), which keeps this step a pure
/// function.
pub fn gradient_injection(
    w: &[Vec<f64>],
    z: &[Vec<f64>],
    suite: &ObjectiveSuite,
    a_next: f64,
    noise: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, EngineError> {
    let mut x = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let grad = suite.local(i).grad(&z[i])?;
        x.push(
            w[i].iter()
                .zip(&grad)
                .zip(&noise[i])
                .map(|((wc, gc), nc)| wc - a_next * (gc + nc))
                .collect(),
        );
    }
    Ok(x)
}

/// Structural health of one executed round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// `max_i ‖z_i(t+1) − x̄(t)‖`.
    pub residual: f64,
    /// Relative error of the average-state recursion.
    pub identity_rel_err: f64,
    /// Relative drift of `Σ y_i` from `n`.
    pub mass_rel_err: f64,
    /// Relative mismatch between `Σ_i w_i(t+1)` and `Σ_i x_i(t)`.
    pub mix_conservation_rel_err: f64,
    /// `‖f(x̄(t+1))‖` after the step.
    pub grad_norm: f64,
}

/// One recorded trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: u64,
    /// Per-agent consensus estimates `z_i(t)`.
    pub z: Vec<Vec<f64>>,
    /// Per-agent weights `y_i(t)`.
    pub y: Vec<f64>,
    /// Network average state `x̄(t)`.
    pub xbar: Vec<f64>,
    /// `max_i ‖z_i(t) − x̄(t−1)‖`; zero on the initial record.
    pub residual: f64,
    /// `‖f(x̄(t))‖`.
    pub grad_norm: f64,
    /// Per-agent `‖e_i(t)‖₁` of the applied increment; zeros at `t = 0`.
    pub e_l1: Vec<f64>,
}

/// Run-level summary and verification aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub t_final: u64,
    pub final_xbar: Vec<f64>,
    pub final_z: Vec<Vec<f64>>,
    pub final_y: Vec<f64>,
    pub stopped_early: bool,
    /// Worst per-step relative drift of `Σ y_i` from `n`; `None` when the
    /// trace was read back from a file.
    pub max_mass_rel_err: Option<f64>,
    /// Worst per-step relative residual of the average-state recursion.
    pub max_identity_rel_err: Option<f64>,
    /// Worst per-step relative mismatch of `Σ w` against `Σ x`.
    pub max_mix_conservation_rel_err: Option<f64>,
}

/// A recorded run: metadata, records at the configured stride (plus the
/// final round), and the summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub fingerprint: String,
    pub n: usize,
    pub dim: usize,
    pub stride: u64,
    pub records: Vec<TraceRecord>,
    pub summary: RunSummary,
}

/// Step-by-step executor; [`run`] drives it to completion.
///
/// Holds preallocated scratch for the per-round vectors: a run is a tight
/// loop and per-step allocation would dominate its cost.
pub struct Simulator {
    cfg: RunConfig,
    state: NetworkState,
    noise_stream: NoiseStream,
    last_e_l1: Vec<f64>,
    scratch: Scratch,
}

struct Scratch {
    w: Vec<Vec<f64>>,
    y: Vec<f64>,
    z: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    noise: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
    x_sum: Vec<f64>,
}

impl Scratch {
    fn new(n: usize, dim: usize) -> Self {
        Self {
            w: vec![vec![0.0; dim]; n],
            y: vec![0.0; n],
            z: vec![vec![0.0; dim]; n],
            x: vec![vec![0.0; dim]; n],
            noise: vec![vec![0.0; dim]; n],
            grads: vec![vec![0.0; dim]; n],
            x_sum: vec![0.0; dim],
        }
    }
}

impl Simulator {
    pub fn new(cfg: RunConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        let state = NetworkState::new(&cfg.x0);
        let noise_stream = NoiseStream::new(cfg.seed);
        let n = state.n();
        let dim = state.dim();
        Ok(Self {
            cfg,
            state,
            noise_stream,
            last_e_l1: vec![0.0; n],
            scratch: Scratch::new(n, dim),
        })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    /// Executes one full round and advances `t`.
    pub fn step(&mut self) -> Result<StepOutcome, EngineError> {
        let t = self.state.t;
        let n = self.state.n();
        let dim = self.state.dim();
        let graph = self.cfg.graphs.graph_at(t);
        if graph.node_count() != n {
            return Err(EngineError::GraphSizeChanged {
                t,
                expected: n,
                got: graph.node_count(),
            });
        }
        let s = &mut self.scratch;

        s.x_sum.iter_mut().for_each(|c| *c = 0.0);
        for a in &self.state.agents {
            for (acc, v) in s.x_sum.iter_mut().zip(&a.x) {
                *acc += v;
            }
        }

        // mixing: push 1/d_j shares along out-edges
        for wi in s.w.iter_mut() {
            wi.iter_mut().for_each(|c| *c = 0.0);
        }
        s.y.iter_mut().for_each(|c| *c = 0.0);
        for j in 0..n {
            let deg = graph.out_degree(j)? as f64;
            let y_share = self.state.agents[j].y / deg;
            for i in graph.out_neighbors(j) {
                for (acc, xj) in s.w[i].iter_mut().zip(&self.state.agents[j].x) {
                    *acc += xj / deg;
                }
                s.y[i] += y_share;
            }
        }

        // ratio, with the underflow guard
        for (agent, (wi, &yi)) in s.w.iter().zip(&s.y).enumerate() {
            if !(yi > Y_UNDERFLOW) {
                return Err(EngineError::YUnderflow {
                    t: t + 1,
                    agent,
                    y: yi,
                });
            }
            for (zc, wc) in s.z[agent].iter_mut().zip(wi) {
                *zc = wc / yi;
            }
        }

        let residual = s
            .z
            .iter()
            .map(|zi| {
                zi.iter()
                    .zip(&self.state.xbar)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);

        // a(t+1): with the default offset, value(t) = a/(t+1)
        let a_next = self.cfg.schedule.value(t);
        match self.cfg.mode {
            Mode::Deterministic => {
                for ni in s.noise.iter_mut() {
                    ni.iter_mut().for_each(|c| *c = 0.0);
                }
            }
            Mode::Perturbed => {
                for (i, ni) in s.noise.iter_mut().enumerate() {
                    let draw = self.noise_stream.sample(&self.cfg.noise, t + 1, i);
                    ni.copy_from_slice(&draw);
                }
            }
        }
        for (i, zi) in s.z.iter().enumerate() {
            let g = self.cfg.suite.local(i).grad(zi)?;
            s.grads[i].copy_from_slice(&g);
        }
        for i in 0..n {
            for k in 0..dim {
                s.x[i][k] = s.w[i][k] - a_next * (s.grads[i][k] + s.noise[i][k]);
            }
        }

        for (agent, xi) in s.x.iter().enumerate() {
            if xi.iter().any(|c| !c.is_finite()) || s.z[agent].iter().any(|c| !c.is_finite()) {
                return Err(EngineError::NonFinite { t: t + 1, agent });
            }
        }

        // structural checks: weight mass, mixing conservation, and the
        // average-state recursion
        let y_sum: f64 = s.y.iter().sum();
        let mass_rel_err = (y_sum - n as f64).abs() / n as f64;

        let mut mix_conservation_rel_err = 0.0f64;
        for k in 0..dim {
            let ws: f64 = s.w.iter().map(|wi| wi[k]).sum();
            mix_conservation_rel_err = mix_conservation_rel_err
                .max((ws - s.x_sum[k]).abs() / s.x_sum[k].abs().max(1.0));
        }

        let mut identity_rel_err = 0.0f64;
        for k in 0..dim {
            let grad_mean = s.grads.iter().map(|g| g[k]).sum::<f64>() / n as f64;
            let noise_mean = s.noise.iter().map(|v| v[k]).sum::<f64>() / n as f64;
            let xbar_new = s.x.iter().map(|xi| xi[k]).sum::<f64>() / n as f64;
            let predicted = self.state.xbar[k] - a_next * (grad_mean + noise_mean);
            identity_rel_err =
                identity_rel_err.max((xbar_new - predicted).abs() / xbar_new.abs().max(1.0));
            self.state.xbar[k] = xbar_new;
        }

        for (i, agent) in self.state.agents.iter_mut().enumerate() {
            agent.w.copy_from_slice(&s.w[i]);
            agent.y = s.y[i];
            agent.z.copy_from_slice(&s.z[i]);
            self.last_e_l1[i] = s.x[i]
                .iter()
                .zip(&s.w[i])
                .map(|(a, b)| (a - b).abs())
                .sum();
            agent.x.copy_from_slice(&s.x[i]);
        }
        self.state.t = t + 1;

        let grad_norm = norm2(&self.cfg.suite.grad_avg(&self.state.xbar)?);
        Ok(StepOutcome {
            residual,
            identity_rel_err,
            mass_rel_err,
            mix_conservation_rel_err,
            grad_norm,
        })
    }
}

/// Executes a configured run and returns its trace.
pub fn run(cfg: RunConfig) -> Result<RunTrace, EngineError> {
    let fingerprint = cfg.fingerprint();
    let stride = cfg.stride;
    let t_max = cfg.t_max;
    let stop = cfg.stop;
    let mut sim = Simulator::new(cfg)?;

    let n = sim.state.n();
    let dim = sim.state.dim();
    let mut records = Vec::new();
    records.push(initial_record(&sim)?);

    let mut max_mass: f64 = 0.0;
    let mut max_identity: f64 = 0.0;
    let mut max_mix: f64 = 0.0;
    let mut dwell_count: u64 = 0;
    let mut stopped_early = false;

    while sim.state.t < t_max {
        let outcome = sim.step()?;
        max_mass = max_mass.max(outcome.mass_rel_err);
        max_identity = max_identity.max(outcome.identity_rel_err);
        max_mix = max_mix.max(outcome.mix_conservation_rel_err);

        if let Some(rule) = stop {
            if outcome.grad_norm <= rule.grad_tol {
                dwell_count += 1;
            } else {
                dwell_count = 0;
            }
            if dwell_count >= rule.dwell {
                stopped_early = true;
            }
        }

        let t = sim.state.t;
        if t % stride == 0 || t == t_max || stopped_early {
            records.push(record_from(&sim, outcome));
        }
        if stopped_early {
            break;
        }
    }

    let state = &sim.state;
    let summary = RunSummary {
        t_final: state.t,
        final_xbar: state.xbar.clone(),
        final_z: state.agents.iter().map(|a| a.z.clone()).collect(),
        final_y: state.agents.iter().map(|a| a.y).collect(),
        stopped_early,
        max_mass_rel_err: Some(max_mass),
        max_identity_rel_err: Some(max_identity),
        max_mix_conservation_rel_err: Some(max_mix),
    };
    Ok(RunTrace {
        fingerprint,
        n,
        dim,
        stride,
        records,
        summary,
    })
}

fn initial_record(sim: &Simulator) -> Result<TraceRecord, EngineError> {
    let state = &sim.state;
    Ok(TraceRecord {
        t: 0,
        z: state.agents.iter().map(|a| a.z.clone()).collect(),
        y: state.agents.iter().map(|a| a.y).collect(),
        xbar: state.xbar.clone(),
        residual: 0.0,
        grad_norm: norm2(&sim.cfg.suite.grad_avg(&state.xbar)?),
        e_l1: vec![0.0; state.n()],
    })
}

fn record_from(sim: &Simulator, outcome: StepOutcome) -> TraceRecord {
    let state = &sim.state;
    TraceRecord {
        t: state.t,
        z: state.agents.iter().map(|a| a.z.clone()).collect(),
        y: state.agents.iter().map(|a| a.y).collect(),
        xbar: state.xbar.clone(),
        residual: outcome.residual,
        grad_norm: outcome.grad_norm,
        e_l1: sim.last_e_l1.clone(),
    }
}

/// Runs one config per seed in parallel; results come back in seed order.
pub fn run_sweep(template: &RunConfig, seeds: &[u64]) -> Result<Vec<RunTrace>, EngineError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = template.clone();
            cfg.seed = seed;
            run(cfg)
        })
        .collect()
}
