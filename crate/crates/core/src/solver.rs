//! Time stepping for `u_t + (-Δ)^s u = f(u)` with front-like data.
//!
//! One step is an RK4 step of `u' = f(u)` pointwise followed by an implicit
//! solve for the diffusion:
//!
//! ```text
//! (I + dt A) u^{n+1} = Φ_dt(u^n)
//! ```
//!
//! With `dt <= 1/2 / sup|f'|` the reaction map `Φ_dt` is non-decreasing and
//! `(I + dt A)^{-1}` is a non-negative matrix, so the scheme preserves order
//! between solutions. The left tail value takes the same `Φ_dt` step, so a
//! spatially constant state stays constant; the right tail model is kept fixed.

use std::time::Instant;

use crate::error::{invalid, numerical, Result};
use crate::fraclap::{FracLapOperator, Normalization, Workspace};
use crate::frontmetrics::LevelSetTrace;
use crate::grid::{Field, Grid, TailModel};
use crate::nonlin::Nonlinearity;

/// Step-size policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtControl {
    Fixed,
    /// PI control of the local reaction error, capped by the stability limit.
    Adaptive { tol: f64 },
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub s: f64,
    pub nonlinearity: Nonlinearity,
    pub grid: Grid,
    pub dt: f64,
    pub t_end: f64,
    pub dt_control: DtControl,
    pub snapshot_times: Vec<f64>,
    pub normalization: Normalization,
    /// Levels whose positions are recorded.
    pub levels: Vec<f64>,
    /// Steps between level samples; `None` chooses about 2000 samples per run.
    pub trace_every: Option<usize>,
    /// Stop once the highest level passes `x_max / 2`.
    pub early_stop: bool,
}

impl SolverConfig {
    pub fn new(s: f64, nonlinearity: Nonlinearity, grid: Grid, dt: f64, t_end: f64) -> Self {
        Self {
            s,
            nonlinearity,
            grid,
            dt,
            t_end,
            dt_control: DtControl::Fixed,
            snapshot_times: Vec::new(),
            normalization: Normalization::Fourier,
            levels: Vec::new(),
            trace_every: None,
            early_stop: true,
        }
    }

    /// Largest step compatible with the order-preservation argument.
    pub fn stable_dt(&self) -> f64 {
        0.5 / self.nonlinearity.max_abs_derivative()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(invalid(format!("s must lie in (0,1), got {}", self.s)));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.dt <= self.t_end) {
            return Err(invalid(format!("need 0 < dt <= t_end, got dt={} t_end={}", self.dt, self.t_end)));
        }
        let limit = self.stable_dt();
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(invalid(format!("dt={} exceeds the stability limit 1/(2 sup|f'|) = {limit}", self.dt)));
        }
        if let DtControl::Adaptive { tol } = self.dt_control {
            if !(tol > 0.0) {
                return Err(invalid("adaptive tolerance must be positive"));
            }
        }
        let mut prev = 0.0;
        for &t in &self.snapshot_times {
            if !(t >= prev && t <= self.t_end) {
                return Err(invalid("snapshot times must be sorted and lie in [0, t_end]"));
            }
            prev = t;
        }
        if self.levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return Err(invalid("levels must lie in (0,1)"));
        }
        Ok(())
    }
}

/// Counters collected during a run.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub steps: usize,
    pub cg_iterations: usize,
    pub max_cg_iterations: usize,
    /// Largest amount removed by clipping to `[0, 1]`.
    pub max_clip: f64,
    pub min_dt: f64,
    pub max_dt: f64,
    pub terminated_early_at: Option<f64>,
    pub wall_seconds: f64,
}

/// Output of [`run`].
#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_state: Field,
    pub snapshots: Vec<Field>,
    pub traces: Vec<LevelSetTrace>,
    pub diagnostics: Diagnostics,
}

/// Reusable stepping state: operator, scratch space and cached tail sources.
pub struct Stepper {
    cfg: SolverConfig,
    op: FracLapOperator,
    ws: Workspace,
    left_source: Vec<f64>,
    right_source: Option<(TailModel, Vec<f64>)>,
}

/// Per-step counters.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub cg_iterations: usize,
    pub clip: f64,
}

fn rk4(f: &Nonlinearity, c: f64, dt: f64) -> f64 {
    let k1 = f.eval(c);
    let k2 = f.eval(c + 0.5 * dt * k1);
    let k3 = f.eval(c + 0.5 * dt * k2);
    let k4 = f.eval(c + dt * k3);
    c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

impl Stepper {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let op = FracLapOperator::build(cfg.s, &cfg.grid, cfg.normalization)?;
        let ws = op.workspace();
        let left_source = op.left_tail_source();
        Ok(Self { cfg, op, ws, left_source, right_source: None })
    }

    pub fn operator(&self) -> &FracLapOperator {
        &self.op
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Advances `state` by `dt`.
    pub fn step(&mut self, state: &Field, dt: f64) -> Result<(Field, StepInfo)> {
        if state.grid != self.cfg.grid {
            return Err(invalid("state grid does not match solver grid"));
        }
        let f = self.cfg.nonlinearity;
        let stale = match &self.right_source {
            Some((tails, _)) => tails.right != state.tails.right,
            None => true,
        };
        if stale {
            self.right_source = Some((state.tails, self.op.right_tail_source(&state.tails.right)));
        }
        let right = &self.right_source.as_ref().expect("cached above").1;
        // implicit diffusion sees the plateau at the end of the step
        let c = rk4(&f, state.tails.left_value, dt).clamp(0.0, 1.0);
        let boundary: Vec<f64> = right.iter().zip(&self.left_source).map(|(r, l)| r + l * c).collect();
        // interior and plateau share one reaction map, so constants stay consistent
        let rhs: Vec<f64> = state.values.iter().map(|&u| rk4(&f, u, dt)).collect();
        let sol = self.op.solve_implicit(&rhs, &boundary, dt, &mut self.ws)?;
        let mut clip: f64 = 0.0;
        let mut values = sol.values;
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(numerical(format!("non-finite value at t={}", state.time + dt)));
            }
            let w = v.clamp(0.0, 1.0);
            clip = clip.max((w - *v).abs());
            *v = w;
        }
        let tails = TailModel::new(c, state.tails.right);
        let next = Field { grid: state.grid.clone(), values, tails, time: state.time + dt };
        Ok((next, StepInfo { cg_iterations: sol.iterations, clip }))
    }

    /// Integrates from `u0` to `t_end`, recording snapshots and level traces.
    pub fn run(&mut self, u0: &Field) -> Result<RunResult> {
        let start = Instant::now();
        let cfg = self.cfg.clone();
        let stable = cfg.stable_dt();
        let mut state = u0.clone();
        let t0 = state.time;
        let t_end = t0 + cfg.t_end;
        let est_steps = (cfg.t_end / cfg.dt).ceil() as usize;
        let trace_every = cfg.trace_every.unwrap_or_else(|| est_steps.div_ceil(2000)).max(1);
        let mut traces: Vec<LevelSetTrace> = cfg.levels.iter().map(|&l| LevelSetTrace::new(l)).collect();
        let mut snapshots = Vec::new();
        let mut snap_iter = cfg.snapshot_times.iter().map(|t| t0 + t).peekable();
        while let Some(&ts) = snap_iter.peek() {
            if ts <= t0 {
                snapshots.push(state.clone());
                snap_iter.next();
            } else {
                break;
            }
        }
        for tr in traces.iter_mut() {
            tr.record(&state);
        }
        let mut diag = Diagnostics { min_dt: f64::INFINITY, ..Default::default() };
        let mut dt = cfg.dt;
        let mut err_prev: Option<f64> = None;
        let top_level = cfg.levels.iter().cloned().fold(f64::NAN, f64::max);
        while state.time < t_end - 1e-12 * t_end.abs().max(1.0) {
            let next_event = snap_iter.peek().copied().unwrap_or(t_end).min(t_end);
            let mut h = dt.min(next_event - state.time);
            if next_event - state.time - h < 1e-9 * dt {
                h = next_event - state.time;
            }
            let (mut next, info) = self.step(&state, h)?;
            if (next.time - next_event).abs() < 1e-9 * dt {
                next.time = next_event;
            }
            diag.steps += 1;
            diag.cg_iterations += info.cg_iterations;
            diag.max_cg_iterations = diag.max_cg_iterations.max(info.cg_iterations);
            diag.max_clip = diag.max_clip.max(info.clip);
            diag.min_dt = diag.min_dt.min(h);
            diag.max_dt = diag.max_dt.max(h);
            if let DtControl::Adaptive { tol } = cfg.dt_control {
                // splitting error proxy: dt^2/2 |f'(u) f(u)|
                let f = &cfg.nonlinearity;
                let err = state.values.iter().map(|&u| (f.eval_derivative(u) * f.eval(u)).abs()).fold(0.0, f64::max) * 0.5 * h * h;
                let err = err.max(1e-14 * tol);
                let mut factor = 0.9 * (tol / err).powf(0.35);
                if let Some(ep) = err_prev {
                    factor *= (ep / err).powf(0.2);
                }
                err_prev = Some(err);
                dt = (h * factor.clamp(0.2, 2.0)).min(stable);
            }
            state = next;
            while let Some(&ts) = snap_iter.peek() {
                if state.time >= ts - 1e-9 * dt {
                    snapshots.push(state.clone());
                    snap_iter.next();
                } else {
                    break;
                }
            }
            let at_end = state.time >= t_end - 1e-12 * t_end.abs().max(1.0);
            if diag.steps % trace_every == 0 || at_end {
                for tr in traces.iter_mut() {
                    tr.record(&state);
                }
                if cfg.early_stop && !cfg.levels.is_empty() {
                    let x = crate::frontmetrics::extract_level(&state, top_level);
                    if x.is_some_and(|x| x > 0.5 * cfg.grid.x_max()) {
                        diag.terminated_early_at = Some(state.time);
                        break;
                    }
                }
            }
        }
        diag.wall_seconds = start.elapsed().as_secs_f64();
        if diag.steps == 0 {
            diag.min_dt = 0.0;
        }
        Ok(RunResult { final_state: state, snapshots, traces, diagnostics: diag })
    }
}

/// One step from `state` with the step size of `cfg`.
pub fn step(state: &Field, cfg: &SolverConfig) -> Result<Field> {
    Stepper::new(cfg.clone())?.step(state, cfg.dt).map(|(f, _)| f)
}

/// Runs `cfg` from `u0`.
pub fn run(cfg: &SolverConfig, u0: &Field) -> Result<RunResult> {
    Stepper::new(cfg.clone())?.run(u0)
}

/// Result of checking `a <= b` along two runs.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonReport {
    /// `max (a - b)^+` over all snapshots and the final state, tails included.
    pub max_violation: f64,
    pub at_time: f64,
    pub pass: bool,
}

/// Allowed violation of the discrete comparison principle.
pub const COMPARISON_TOLERANCE: f64 = 1e-8;

/// Checks that run `a` stays below run `b` at every stored time.
pub fn verify_comparison(a: &RunResult, b: &RunResult) -> Result<ComparisonReport> {
    if a.snapshots.len() != b.snapshots.len() {
        return Err(invalid("runs have different snapshot counts"));
    }
    let mut worst = 0.0;
    let mut at = 0.0;
    let pairs = a.snapshots.iter().zip(&b.snapshots).chain(std::iter::once((&a.final_state, &b.final_state)));
    for (x, y) in pairs {
        if x.grid != y.grid {
            return Err(invalid("runs use different grids"));
        }
        let mut v = (x.tails.left_value - y.tails.left_value).max(0.0);
        for (p, q) in x.values.iter().zip(&y.values) {
            v = v.max(p - q);
        }
        if v > worst {
            worst = v;
            at = x.time;
        }
    }
    Ok(ComparisonReport { max_violation: worst, at_time: at, pass: worst <= COMPARISON_TOLERANCE })
}
