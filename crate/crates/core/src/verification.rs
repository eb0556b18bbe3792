//! Manufactured solution `u = e^{x−t}` and grid-refinement studies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{BoundaryClosure, SpatialGrid};
use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::model::{ProblemData, ProblemParameters, SourceTerms};
use crate::solver::{picard_solve, SolverConfig, Termination, TrajectoryRecord};

pub fn exact_solution(x: f64, t: f64) -> f64 {
    (x - t).exp()
}

fn expr(src: &str) -> ScalarFn {
    ScalarFn::parse(src).expect("built-in expression parses")
}

/// Parameters and data for which `e^{x−t}` solves the problem exactly:
/// `λ = λ₀ = λ₁ = 1`, `λ̃₀ = λ̃₁ = −½`, `p = 3`, `α = β = 4`.
pub fn manufactured_problem() -> (ProblemParameters, ProblemData) {
    let params = ProblemParameters {
        lambda: 1.0,
        lambda0: 1.0,
        lambda1: 1.0,
        lambda_tilde0: -0.5,
        lambda_tilde1: -0.5,
        p: 3.0,
        alpha: 4.0,
        beta: 4.0,
        sources: SourceTerms::default(),
    };
    let data = ProblemData {
        h_tilde0: expr("exp(3 - 2*t)"),
        h_tilde1: expr("-exp(-1 - 2*t)"),
        g0: expr("(2 - exp(1)/2)*exp(-t) + 2*exp(-3*t)"),
        g1: expr("-exp(-t)/2"),
        f: expr("-exp(2*x - 2*t)"),
        u0: expr("exp(x)"),
        u1: expr("-exp(x)"),
        u0_derivative: Some(expr("exp(x)")),
    };
    (params, data)
}

/// `u_tt − u_xx + u + λu_t − |u|^{p−2}u − f` at `(x, t)` for `u = e^{x−t}`.
pub fn pde_residual(params: &ProblemParameters, data: &ProblemData, x: f64, t: f64) -> f64 {
    let u = exact_solution(x, t);
    let (u_t, u_tt, u_xx) = (-u, u, u);
    u_tt - u_xx + u + params.lambda * u_t - u.abs().powf(params.p - 2.0) * u - data.f.eval(x, t)
}

/// Residuals of the two boundary relations at time `t` for `u = e^{x−t}`.
pub fn boundary_residuals(params: &ProblemParameters, data: &ProblemData, t: f64) -> (f64, f64) {
    let (a, b) = (exact_solution(0.0, t), exact_solution(1.0, t));
    let (ax, bx) = (a, b);
    let (at, bt) = (-a, -b);
    let r0 = ax
        - (-a.abs().powf(params.alpha - 2.0) * a
            + params.lambda0 * at
            + data.h_tilde1.at_t(t) * b
            + params.lambda_tilde1 * bt
            + data.g0.at_t(t));
    let r1 = -bx
        - (-b.abs().powf(params.beta - 2.0) * b
            + params.lambda1 * bt
            + data.h_tilde0.at_t(t) * a
            + params.lambda_tilde0 * at
            + data.g1.at_t(t));
    (r0, r1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Largest nodal error over all stored times.
    pub max_abs: f64,
    /// Trapezoid `L²` error at the last stored time.
    pub l2_final: f64,
    /// `(t, max_j |U_j(t) − u(x_j, t)|)` per stored time.
    pub per_time: Vec<(f64, f64)>,
}

/// Errors of a completed trajectory against `e^{x−t}`.
pub fn error_norms(record: &TrajectoryRecord, grid: &SpatialGrid) -> Result<ErrorReport> {
    match record.termination {
        Termination::Completed => {}
        Termination::BlowupDetected { t, .. } => return Err(Error::BlownUpTrajectory(t)),
        Termination::PicardFailure { t, .. } => {
            return Err(Error::InvalidArgument(format!(
                "trajectory stopped at t = {t} after a Picard failure"
            )))
        }
    }
    let nodes = grid.nodes();
    let per_time: Vec<(f64, f64)> = record
        .snapshots
        .iter()
        .map(|s| {
            let err = s
                .u
                .iter()
                .zip(&nodes)
                .fold(0.0f64, |m, (u, &x)| m.max((u - exact_solution(x, s.t)).abs()));
            (s.t, err)
        })
        .collect();
    let last = record.final_state();
    let dx = grid.dx();
    let l2_sq: f64 = last
        .u
        .iter()
        .zip(&nodes)
        .enumerate()
        .map(|(j, (u, &x))| {
            let w = if j == 0 || j == grid.n() { 0.5 * dx } else { dx };
            w * (u - exact_solution(x, last.t)).powi(2)
        })
        .sum();
    Ok(ErrorReport {
        max_abs: per_time.iter().fold(0.0f64, |m, p| m.max(p.1)),
        l2_final: l2_sq.sqrt(),
        per_time,
    })
}

/// Default time step for a refinement level: `min(0.08, 2/N²)`.
pub fn default_dt(n: usize) -> f64 {
    0.08f64.min(2.0 / (n * n) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub dt: f64,
    pub max_abs: Option<f64>,
    /// `ln(e_prev/e)/ln(N/N_prev)` against the previous row.
    pub observed_order: Option<f64>,
    /// Why the row has no error value.
    pub failure: Option<String>,
}

/// Solves the manufactured problem on each `N` with time step `dt_rule(N)`;
/// the remaining solver settings come from `base`. Rows run in parallel.
pub fn convergence_study(
    n_list: &[usize],
    dt_rule: impl Fn(usize) -> f64 + Sync,
    base: &SolverConfig,
    closure: BoundaryClosure,
) -> Result<Vec<ConvergenceRow>> {
    let grids = n_list
        .iter()
        .map(|&n| SpatialGrid::new(n).map(|g| g.with_closure(closure)))
        .collect::<Result<Vec<_>>>()?;
    let (params, data) = manufactured_problem();
    let mut rows: Vec<ConvergenceRow> = grids
        .par_iter()
        .map(|grid| {
            let dt = dt_rule(grid.n());
            let cfg = SolverConfig { dt, ..base.clone() };
            let outcome = picard_solve(&cfg, &params, &data, grid).and_then(|rec| error_norms(&rec, grid));
            let (max_abs, failure) = match outcome {
                Ok(report) => (Some(report.max_abs), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ConvergenceRow {
                n: grid.n(),
                dt,
                max_abs,
                observed_order: None,
                failure,
            }
        })
        .collect();
    for k in 1..rows.len() {
        if let (Some(prev), Some(cur)) = (rows[k - 1].max_abs, rows[k].max_abs) {
            let ratio = rows[k].n as f64 / rows[k - 1].n as f64;
            rows[k].observed_order = Some((prev / cur).ln() / ratio.ln());
        }
    }
    Ok(rows)
}
