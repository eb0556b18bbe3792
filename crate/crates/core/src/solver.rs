//! Time stepping for the semi-discrete system.
//!
//! The nonlinear forcing is handled by Picard linearization: each iterate
//! solves the linear system `X' = A(t) X + F(t, U_prev)` with `U_prev` taken
//! from the previous iterate. Every linear solve is one classical RK4 step
//! per time step, and the previous iterate is sampled at the same four stage
//! states RK4 visits. The fixed point of the recursion is therefore exactly
//! RK4 applied to the nonlinear system, and the two iteration modes converge
//! to the same discrete trajectory.
//!
//! * [`PicardMode::PerStep`] iterates within each step, starting from the
//!   step's initial value.
//! * [`PicardMode::Global`] sweeps over a window of steps (by default the
//!   whole horizon), starting from the constant extension of the window's
//!   initial value.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsSeries, FunctionalConfig};
use crate::discretization::{SemiDiscreteState, SemiDiscreteSystem, SpatialGrid, TimeSlice};
use crate::error::{Error, Result};
use crate::model::{ProblemData, ProblemParameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PicardMode {
    #[default]
    PerStep,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Sup-norm threshold on the change between successive Picard iterates.
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub picard_mode: PicardMode,
    /// Steps per sweep window in global mode; `None` sweeps the whole horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global_window: Option<usize>,
    pub blowup_threshold: f64,
    /// Keep every `record_every`-th step (the first and last are always kept).
    pub record_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 0.08,
            t_final: 5.0,
            picard_tol: 1e-10,
            picard_max_iter: 50,
            picard_mode: PicardMode::PerStep,
            global_window: None,
            blowup_threshold: 1e8,
            record_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive and finite, got {}", self.dt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be positive and finite, got {}", self.t_final));
        }
        if !(self.picard_tol > 0.0) {
            return bad(format!("picard_tol must be positive, got {}", self.picard_tol));
        }
        if self.picard_max_iter < 1 {
            return bad("picard_max_iter must be at least 1".into());
        }
        if !(self.blowup_threshold > 0.0) {
            return bad(format!("blowup_threshold must be positive, got {}", self.blowup_threshold));
        }
        if self.record_every < 1 {
            return bad("record_every must be at least 1".into());
        }
        if self.global_window == Some(0) {
            return bad("global_window must be at least 1 step".into());
        }
        Ok(())
    }

    /// Step boundaries `0 = t_0 < … < t_K = t_final`, `t_k = k·dt` except
    /// for a possibly shortened last step.
    pub fn time_grid(&self) -> Vec<f64> {
        let ratio = self.t_final / self.dt;
        let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        }
        .max(1);
        let mut times: Vec<f64> = (0..steps).map(|k| k as f64 * self.dt).collect();
        times.push(self.t_final);
        times
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEvent {
    pub t: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowupDetected { t: f64, magnitude: f64 },
    PicardFailure { t: f64, iterations: usize, last_difference: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub snapshots: Vec<SemiDiscreteState>,
    /// Iterations per step (per-step mode) or sweeps per window (global mode).
    pub picard_iterations: Vec<usize>,
    /// Sup-norm differences between successive iterates, one list per entry
    /// of `picard_iterations`.
    pub picard_history: Vec<Vec<f64>>,
    pub termination: Termination,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &SemiDiscreteState {
        self.snapshots.last().expect("a trajectory always holds the initial state")
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    pub fn blowup(&self) -> Option<BlowupEvent> {
        match self.termination {
            Termination::BlowupDetected { t, magnitude } => Some(BlowupEvent { t, magnitude }),
            _ => None,
        }
    }

    fn push(&mut self, state: SemiDiscreteState) {
        if self.times.last() != Some(&state.t) {
            self.times.push(state.t);
            self.snapshots.push(state);
        }
    }
}

/// Reports a blow-up when `max_j |U_j|` exceeds `threshold` or any entry is
/// not finite.
pub fn detect_blowup(state: &SemiDiscreteState, threshold: f64) -> Option<BlowupEvent> {
    let magnitude = state.sup_u();
    (magnitude > threshold || magnitude.is_infinite()).then_some(BlowupEvent { t: state.t, magnitude })
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(x, k)| x + a * k).collect()
}

fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// One classical RK4 step of `X' = rhs_fn(t, X)`. The flag is false when the
/// result contains a non-finite entry.
pub fn rk4_step(
    t: f64,
    x: &[f64],
    dt: f64,
    mut rhs_fn: impl FnMut(f64, &[f64]) -> Vec<f64>,
) -> (Vec<f64>, bool) {
    let k1 = rhs_fn(t, x);
    let k2 = rhs_fn(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k1));
    let k3 = rhs_fn(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k2));
    let k4 = rhs_fn(t + dt, &axpy(x, dt, &k3));
    let next: Vec<f64> = (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    let finite = all_finite(&next);
    (next, finite)
}

/// Data samples at the start, midpoint and end of one step.
struct StepSlices {
    start: TimeSlice,
    mid: TimeSlice,
    end: TimeSlice,
}

impl StepSlices {
    fn new(system: &SemiDiscreteSystem, t: f64, h: f64) -> StepSlices {
        StepSlices {
            start: system.slice(t),
            mid: system.slice(t + 0.5 * h),
            end: system.slice(t + h),
        }
    }
}

/// Displacements at the four RK4 stage states and the step's end state.
#[derive(Clone)]
struct Stages {
    u: [Vec<f64>; 4],
    end: Vec<f64>,
}

impl Stages {
    fn constant(x: &[f64], m: usize) -> Stages {
        let u = x[..m].to_vec();
        Stages {
            u: [u.clone(), u.clone(), u.clone(), u],
            end: x.to_vec(),
        }
    }

    fn finite(&self) -> bool {
        all_finite(&self.end) && self.u.iter().all(|u| all_finite(u))
    }

    fn distance(&self, other: &Stages) -> f64 {
        let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let stages = (0..4).fold(0.0f64, |m, i| m.max(sup(&self.u[i], &other.u[i])));
        stages.max(sup(&self.end, &other.end))
    }
}

/// One linear RK4 step from `x` with the forcing of stage `i` evaluated at
/// `prev.u[i]`.
fn staged_rk4(system: &SemiDiscreteSystem, slices: &StepSlices, x: &[f64], h: f64, prev: &Stages) -> Stages {
    let m = system.grid().len();
    let dim = x.len();
    let mut k = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    system.rhs_into(&slices.start, x, &prev.u[0], &mut k[0]);
    let x2 = axpy(x, 0.5 * h, &k[0]);
    system.rhs_into(&slices.mid, &x2, &prev.u[1], &mut k[1]);
    let x3 = axpy(x, 0.5 * h, &k[1]);
    system.rhs_into(&slices.mid, &x3, &prev.u[2], &mut k[2]);
    let x4 = axpy(x, h, &k[2]);
    system.rhs_into(&slices.end, &x4, &prev.u[3], &mut k[3]);
    let end = (0..dim)
        .map(|i| x[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
        .collect();
    Stages {
        u: [x[..m].to_vec(), x2[..m].to_vec(), x3[..m].to_vec(), x4[..m].to_vec()],
        end,
    }
}

enum StepResult {
    Converged { end: Vec<f64>, history: Vec<f64> },
    NotConverged { history: Vec<f64> },
    NonFinite { history: Vec<f64> },
}

fn picard_step(
    system: &SemiDiscreteSystem,
    slices: &StepSlices,
    x: &[f64],
    h: f64,
    tol: f64,
    max_iter: usize,
) -> StepResult {
    let stationary = !system.forcing_depends_on_state();
    let mut prev = Stages::constant(x, system.grid().len());
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let next = staged_rk4(system, slices, x, h, &prev);
        if !next.finite() {
            history.push(f64::INFINITY);
            return StepResult::NonFinite { history };
        }
        let diff = next.distance(&prev);
        history.push(diff);
        if stationary || diff <= tol {
            return StepResult::Converged { end: next.end, history };
        }
        prev = next;
    }
    StepResult::NotConverged { history }
}

/// Advances `x` from `t` by `h` with per-step Picard iteration, or `None`
/// when the iteration fails or produces non-finite values.
pub fn advance(system: &SemiDiscreteSystem, config: &SolverConfig, t: f64, x: &[f64], h: f64) -> Option<Vec<f64>> {
    let slices = StepSlices::new(system, t, h);
    match picard_step(system, &slices, x, h, config.picard_tol, config.picard_max_iter) {
        StepResult::Converged { end, .. } => Some(end),
        _ => None,
    }
}

/// One full step and two half steps from the same state, for local error
/// estimates by step doubling.
pub fn step_doubling(
    system: &SemiDiscreteSystem,
    config: &SolverConfig,
    t: f64,
    x: &[f64],
    h: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let full = advance(system, config, t, x, h)?;
    let half = advance(system, config, t, x, 0.5 * h)?;
    let two_halves = advance(system, config, t + 0.5 * h, &half, 0.5 * h)?;
    Some((full, two_halves))
}

struct Recorder<'a> {
    config: &'a SolverConfig,
    times: &'a [f64],
    record: TrajectoryRecord,
}

impl Recorder<'_> {
    /// Stores the state reached at step `k` if the stride asks for it, or
    /// reports the blow-up it represents.
    fn accept(&mut self, k: usize, x: &[f64]) -> Option<Termination> {
        let state = SemiDiscreteState::from_stacked(self.times[k], x);
        if let Some(event) = detect_blowup(&state, self.config.blowup_threshold) {
            return Some(Termination::BlowupDetected {
                t: event.t,
                magnitude: event.magnitude,
            });
        }
        let last = self.times.len() - 1;
        if k.is_multiple_of(self.config.record_every) || k == last {
            self.record.push(state);
        }
        None
    }

    /// Ends the run, making sure the last good state is stored.
    fn finish(mut self, k: usize, x: &[f64], termination: Termination) -> TrajectoryRecord {
        self.record.push(SemiDiscreteState::from_stacked(self.times[k], x));
        self.record.termination = termination;
        self.record
    }
}

/// Integrates from the sampled initial data to `config.t_final`.
pub fn picard_solve(
    config: &SolverConfig,
    params: &ProblemParameters,
    data: &ProblemData,
    grid: &SpatialGrid,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let system = SemiDiscreteSystem::new(params, data, grid)?;
    Ok(solve_system(config, &system))
}

pub fn solve_system(config: &SolverConfig, system: &SemiDiscreteSystem) -> TrajectoryRecord {
    let times = config.time_grid();
    let x0 = system.initial_state().stacked();
    let mut recorder = Recorder {
        config,
        times: &times,
        record: TrajectoryRecord {
            times: Vec::new(),
            snapshots: Vec::new(),
            picard_iterations: Vec::new(),
            picard_history: Vec::new(),
            termination: Termination::Completed,
        },
    };
    if let Some(termination) = recorder.accept(0, &x0) {
        // the initial data already exceed the guard; nothing to integrate
        return recorder.finish(0, &x0, termination);
    }
    match config.picard_mode {
        PicardMode::PerStep => per_step(config, system, recorder, x0),
        PicardMode::Global => {
            let window = config.global_window.unwrap_or(times.len() - 1);
            global(config, system, recorder, x0, window)
        }
    }
}

fn per_step(
    config: &SolverConfig,
    system: &SemiDiscreteSystem,
    mut recorder: Recorder<'_>,
    mut x: Vec<f64>,
) -> TrajectoryRecord {
    let times = recorder.times;
    let mut slices_start = system.slice(times[0]);
    for k in 0..times.len() - 1 {
        let (t, h) = (times[k], times[k + 1] - times[k]);
        let slices = StepSlices {
            start: slices_start,
            mid: system.slice(t + 0.5 * h),
            end: system.slice(times[k + 1]),
        };
        let result = picard_step(system, &slices, &x, h, config.picard_tol, config.picard_max_iter);
        let history = match &result {
            StepResult::Converged { history, .. }
            | StepResult::NotConverged { history }
            | StepResult::NonFinite { history } => history.clone(),
        };
        recorder.record.picard_iterations.push(history.len());
        recorder.record.picard_history.push(history.clone());
        match result {
            StepResult::Converged { end, .. } => {
                if let Some(termination) = recorder.accept(k + 1, &end) {
                    return recorder.finish(k, &x, termination);
                }
                x = end;
            }
            StepResult::NonFinite { .. } => {
                let termination = Termination::BlowupDetected {
                    t: times[k + 1],
                    magnitude: f64::INFINITY,
                };
                return recorder.finish(k, &x, termination);
            }
            StepResult::NotConverged { .. } => {
                let termination = Termination::PicardFailure {
                    t,
                    iterations: history.len(),
                    last_difference: *history.last().unwrap_or(&f64::NAN),
                };
                return recorder.finish(k, &x, termination);
            }
        }
        slices_start = slices.end;
    }
    let last = times.len() - 1;
    recorder.finish(last, &x, Termination::Completed)
}

fn global(
    config: &SolverConfig,
    system: &SemiDiscreteSystem,
    mut recorder: Recorder<'_>,
    mut x: Vec<f64>,
    window: usize,
) -> TrajectoryRecord {
    let times = recorder.times;
    let steps = times.len() - 1;
    let m = system.grid().len();
    let stationary = !system.forcing_depends_on_state();
    let mut k0 = 0;
    while k0 < steps {
        let k1 = (k0 + window).min(steps);
        let slices: Vec<StepSlices> = (k0..k1)
            .map(|k| StepSlices::new(system, times[k], times[k + 1] - times[k]))
            .collect();
        let mut prev: Vec<Stages> = (k0..k1).map(|_| Stages::constant(&x, m)).collect();
        let mut history = Vec::new();
        let mut converged = false;
        for _ in 0..config.picard_max_iter {
            let mut y = x.clone();
            let mut next = Vec::with_capacity(prev.len());
            let mut diff = 0.0f64;
            let mut finite = true;
            for (i, k) in (k0..k1).enumerate() {
                let stages = staged_rk4(system, &slices[i], &y, times[k + 1] - times[k], &prev[i]);
                if !stages.finite() {
                    finite = false;
                    break;
                }
                diff = diff.max(stages.distance(&prev[i]));
                y = stages.end.clone();
                next.push(stages);
            }
            if !finite {
                history.push(f64::INFINITY);
                break;
            }
            history.push(diff);
            prev = next;
            if stationary || diff <= config.picard_tol {
                converged = true;
                break;
            }
        }
        recorder.record.picard_iterations.push(history.len());
        recorder.record.picard_history.push(history.clone());
        if !converged {
            let termination = Termination::PicardFailure {
                t: times[k0],
                iterations: history.len(),
                last_difference: *history.last().unwrap_or(&f64::NAN),
            };
            return recorder.finish(k0, &x, termination);
        }
        for (i, k) in (k0..k1).enumerate() {
            if let Some(termination) = recorder.accept(k + 1, &prev[i].end) {
                let before = if i == 0 { x.clone() } else { prev[i - 1].end.clone() };
                return recorder.finish(k, &before, termination);
            }
        }
        x = prev.pop().expect("window holds at least one step").end;
        k0 = k1;
    }
    recorder.finish(steps, &x, Termination::Completed)
}

/// Solves and evaluates the functionals at every stored snapshot.
pub fn run_simulation(
    config: &SolverConfig,
    params: &ProblemParameters,
    data: &ProblemData,
    grid: &SpatialGrid,
    diagnostics: &FunctionalConfig,
) -> Result<(TrajectoryRecord, DiagnosticsSeries)> {
    let record = picard_solve(config, params, data, grid)?;
    let series = DiagnosticsSeries::evaluate(&record, params, data, grid, diagnostics)?;
    Ok((record, series))
}
