//! Energy functionals evaluated on discrete states, and the constants that
//! govern blow-up and exponential decay.
//!
//! Nodal integrands use the composite trapezoid rule. The gradient term uses
//! forward differences on each cell, integrated with the cell width.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{SemiDiscreteState, SemiDiscreteSystem, SpatialGrid};
use crate::error::{Error, Result};
use crate::model::{self, ProblemData, ProblemParameters};
use crate::solver::{self, SolverConfig, TrajectoryRecord};

/// Tunable constants of the functionals. `None` fields take their defaults
/// from the problem (see the accessors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionalConfig {
    /// Constant coupling `h̃` in `H = −E − h̃u(0)u(1)`. Defaults to the common
    /// value of `h̃₀` and `h̃₁` when both are constant and equal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_tilde: Option<f64>,
    /// Exponent of `L = H^{1−η} + εΦ`, default `(p−2)/(2p)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub epsilon: f64,
    /// Weight of `ψ` in `𝓛 = E + δψ`, default `min{λ, (q−2)/q}/10`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Default `(1 − η*)/2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon1: Option<f64>,
    /// Constant of the blow-up differential inequality; required for `T*`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
    /// Embedding constant in `‖v‖_{Lᵖ} ≤ C_p‖v‖₁`.
    pub cp: f64,
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        FunctionalConfig {
            h_tilde: None,
            eta: None,
            epsilon: 1e-3,
            delta: None,
            epsilon1: None,
            d2: None,
            cp: std::f64::consts::SQRT_2,
        }
    }
}

impl FunctionalConfig {
    pub fn eta_for(&self, params: &ProblemParameters) -> f64 {
        self.eta.unwrap_or((params.p - 2.0) / (2.0 * params.p))
    }

    pub fn delta_for(&self, params: &ProblemParameters) -> f64 {
        let q = params.q();
        self.delta.unwrap_or(params.lambda.min((q - 2.0) / q) / 10.0)
    }

    pub fn epsilon1_for(&self, eta_star: f64) -> f64 {
        self.epsilon1.unwrap_or((1.0 - eta_star) / 2.0)
    }

    pub fn h_tilde_for(&self, data: &ProblemData, horizon: f64) -> Option<f64> {
        self.h_tilde.or_else(|| {
            let a = model::sampled_constant(&data.h_tilde0, horizon)?;
            let b = model::sampled_constant(&data.h_tilde1, horizon)?;
            ((a - b).abs() < model::CONSTANCY_TOL).then_some(a)
        })
    }
}

/// Quadratures of one discrete state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteNorms {
    /// `‖u‖²`
    pub u_sq: f64,
    /// `‖u_x‖²`
    pub ux_sq: f64,
    /// `‖u‖₁² = ‖u‖² + ‖u_x‖²`
    pub h1_sq: f64,
    /// `‖u‖_{Lᵖ}ᵖ`
    pub lp_p: f64,
    /// `‖u′‖²`
    pub v_sq: f64,
    /// `⟨u, u′⟩`
    pub uv: f64,
    /// `u(0)`
    pub u_left: f64,
    /// `u(1)`
    pub u_right: f64,
}

/// Composite trapezoid weights on the grid nodes.
pub fn trapezoid_weights(grid: &SpatialGrid) -> Vec<f64> {
    let mut w = vec![grid.dx(); grid.len()];
    w[0] *= 0.5;
    w[grid.n()] *= 0.5;
    w
}

pub fn discrete_norms(state: &SemiDiscreteState, params: &ProblemParameters, grid: &SpatialGrid) -> DiscreteNorms {
    let w = trapezoid_weights(grid);
    let (u, v) = (&state.u, &state.v);
    let mut n = DiscreteNorms {
        u_sq: 0.0,
        ux_sq: 0.0,
        h1_sq: 0.0,
        lp_p: 0.0,
        v_sq: 0.0,
        uv: 0.0,
        u_left: u[0],
        u_right: u[grid.n()],
    };
    for j in 0..grid.len() {
        n.u_sq += w[j] * u[j] * u[j];
        n.lp_p += w[j] * u[j].abs().powf(params.p);
        n.v_sq += w[j] * v[j] * v[j];
        n.uv += w[j] * u[j] * v[j];
    }
    let dx = grid.dx();
    n.ux_sq = u.windows(2).map(|c| ((c[1] - c[0]) / dx).powi(2) * dx).sum();
    n.h1_sq = n.u_sq + n.ux_sq;
    n
}

/// Source potentials `(1/p)‖u‖ᵖ + (1/α)|u(0)|^α + (1/β)|u(1)|^β`, respecting
/// which source terms are active.
fn source_potential(n: &DiscreteNorms, params: &ProblemParameters, scaled: bool) -> f64 {
    let s = &params.sources;
    let (kp, ka, kb) = if scaled {
        (1.0 / params.p, 1.0 / params.alpha, 1.0 / params.beta)
    } else {
        (1.0, 1.0, 1.0)
    };
    let interior = if s.interior { kp * n.lp_p } else { 0.0 };
    let boundary = if s.boundary {
        ka * n.u_left.abs().powf(params.alpha) + kb * n.u_right.abs().powf(params.beta)
    } else {
        0.0
    };
    interior + boundary
}

fn energy_from(n: &DiscreteNorms, params: &ProblemParameters) -> f64 {
    0.5 * n.v_sq + potential_from(n, params)
}

/// `E = ½‖u′‖² + ½‖u‖₁² − (1/p)‖u‖ᵖ_{Lᵖ} − (1/α)|u(0)|^α − (1/β)|u(1)|^β`.
pub fn energy_e(state: &SemiDiscreteState, params: &ProblemParameters, grid: &SpatialGrid) -> f64 {
    energy_from(&discrete_norms(state, params, grid), params)
}

/// `H = −E − h̃u(0)u(1)`.
pub fn functional_h(state: &SemiDiscreteState, params: &ProblemParameters, grid: &SpatialGrid, h_tilde: f64) -> f64 {
    let n = discrete_norms(state, params, grid);
    -energy_from(&n, params) - h_tilde * n.u_left * n.u_right
}

/// `I = ‖u‖₁² − ‖u‖ᵖ_{Lᵖ} − |u(0)|^α − |u(1)|^β` and
/// `J = ½‖u‖₁² − (1/p)‖u‖ᵖ_{Lᵖ} − (1/α)|u(0)|^α − (1/β)|u(1)|^β`,
/// the potential part of `E`.
pub fn functional_i_j(state: &SemiDiscreteState, params: &ProblemParameters, grid: &SpatialGrid) -> (f64, f64) {
    let n = discrete_norms(state, params, grid);
    (n.h1_sq - source_potential(&n, params, false), potential_from(&n, params))
}

fn potential_from(n: &DiscreteNorms, params: &ProblemParameters) -> f64 {
    0.5 * n.h1_sq - source_potential(n, params, true)
}

fn psi_from(n: &DiscreteNorms, params: &ProblemParameters) -> f64 {
    n.uv + 0.5 * params.lambda * n.u_sq
        + 0.5 * params.lambda0 * n.u_left * n.u_left
        + 0.5 * params.lambda1 * n.u_right * n.u_right
}

fn common_lambda_tilde(params: &ProblemParameters) -> Result<f64> {
    if params.lambda_tilde0 == params.lambda_tilde1 {
        Ok(params.lambda_tilde0)
    } else {
        Err(Error::ModeMismatch(params.lambda_tilde0, params.lambda_tilde1))
    }
}

/// `Φ = ψ + λ̃u(0)u(1)` and
/// `ψ = ⟨u, u′⟩ + (λ/2)‖u‖² + (λ₀/2)u(0)² + (λ₁/2)u(1)²`.
/// `Φ` needs `λ̃₀ = λ̃₁`.
pub fn functional_phi_psi(
    state: &SemiDiscreteState,
    params: &ProblemParameters,
    grid: &SpatialGrid,
) -> Result<(f64, f64)> {
    let lt = common_lambda_tilde(params)?;
    let n = discrete_norms(state, params, grid);
    let psi = psi_from(&n, params);
    Ok((psi + lt * n.u_left * n.u_right, psi))
}

pub fn functional_psi(state: &SemiDiscreteState, params: &ProblemParameters, grid: &SpatialGrid) -> f64 {
    psi_from(&discrete_norms(state, params, grid), params)
}

fn check_eta(eta: f64, params: &ProblemParameters) -> Result<()> {
    let max = (params.p - 2.0) / (2.0 * params.p);
    if eta > 0.0 && eta <= max {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eta = {eta} outside (0, (p-2)/(2p)] = (0, {max}]")))
    }
}

/// `L = H^{1−η} + εΦ`, defined while `H > 0`.
pub fn blowup_functional_l(
    state: &SemiDiscreteState,
    params: &ProblemParameters,
    grid: &SpatialGrid,
    h_tilde: f64,
    cfg: &FunctionalConfig,
) -> Result<f64> {
    let eta = cfg.eta_for(params);
    check_eta(eta, params)?;
    let h = functional_h(state, params, grid, h_tilde);
    if !(h > 0.0) {
        return Err(Error::NonPositiveH(h));
    }
    let (phi, _) = functional_phi_psi(state, params, grid)?;
    Ok(h.powf(1.0 - eta) + cfg.epsilon * phi)
}

/// `𝓛 = E + δψ`.
pub fn lyapunov_script_l(state: &SemiDiscreteState, params: &ProblemParameters, grid: &SpatialGrid, delta: f64) -> f64 {
    let n = discrete_norms(state, params, grid);
    energy_from(&n, params) + delta * psi_from(&n, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants {
    pub q: f64,
    pub mu_star: f64,
    /// `r = exp[4q/(μ*(q−2))·(‖h̃₀‖² + ‖h̃₁‖²)]` with half-line norms.
    pub r: f64,
    pub eta_star: f64,
    /// `η* < 1`.
    pub decays: bool,
    /// Upper end of the interval standing in for `[0, ∞)`.
    pub cutoff: f64,
}

fn require_q(q: f64) -> Result<()> {
    if q > 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("q = min(p, alpha, beta) = {q} must exceed 2")))
    }
}

pub fn decay_constants(
    params: &ProblemParameters,
    data: &ProblemData,
    e0: f64,
    cfg: &FunctionalConfig,
    horizon: f64,
) -> Result<DecayConstants> {
    let q = params.q();
    require_q(q)?;
    if !(e0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("E(0) = {e0} must be nonnegative")));
    }
    let mu_star = model::mu_star(params)?;
    let cutoff = model::integrability_cutoff(horizon);
    let norms = model::half_line_l2_sq(&data.h_tilde0, cutoff) + model::half_line_l2_sq(&data.h_tilde1, cutoff);
    let r = (4.0 * q / (mu_star * (q - 2.0)) * norms).exp();
    let base = 2.0 * q * r * e0 / (q - 2.0);
    let eta_star = cfg.cp.powf(params.p) * base.powf((params.p - 2.0) / 2.0)
        + 2f64.powf(params.alpha / 2.0) * base.powf((params.alpha - 2.0) / 2.0)
        + 2f64.powf(params.beta / 2.0) * base.powf((params.beta - 2.0) / 2.0);
    Ok(DecayConstants {
        q,
        mu_star,
        r,
        eta_star,
        decays: eta_star < 1.0,
        cutoff,
    })
}

/// `(β₁, β₂)` with `β₁E ≤ 𝓛 ≤ β₂E`:
/// `β₁ = min{1 − δ, (q−2)/q − δ}`,
/// `β₂ = 1 + δ + 2q/(q−2)·[½ + δ((1+λ)/2 + λ₀ + λ₁)]`.
pub fn sandwich_bounds(params: &ProblemParameters, delta: f64, q: f64) -> Result<(f64, f64)> {
    require_q(q)?;
    let limit = ((q - 2.0) / q).min(1.0);
    if !(delta >= 0.0 && delta < limit) {
        return Err(Error::DeltaOutOfRange { delta, limit });
    }
    let beta1 = (1.0 - delta).min((q - 2.0) / q - delta);
    let bracket = 0.5 + delta * ((1.0 + params.lambda) / 2.0 + params.lambda0 + params.lambda1);
    let beta2 = 1.0 + delta + 2.0 * q / (q - 2.0) * bracket;
    Ok((beta1, beta2))
}

/// Upper bound `T* = (1−η)/(d₂η)·L(0)^{−η/(1−η)}` on the blow-up time.
pub fn blowup_time_bound(eta: f64, d2: f64, l0: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta = {eta} outside (0, 1)")));
    }
    if !(d2 > 0.0) {
        return Err(Error::InvalidArgument(format!("d2 = {d2} must be positive")));
    }
    if !(l0 > 0.0) {
        return Err(Error::InvalidArgument(format!("L(0) = {l0} must be positive")));
    }
    Ok((1.0 - eta) / (d2 * eta) * l0.powf(-eta / (1.0 - eta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c: f64,
    pub gamma: f64,
    /// Largest deviation of `ln E` from the fitted line.
    pub residual: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Least-squares fit of `ln E = ln C − γt` over `window`, by default the
/// second half of the series.
pub fn fit_exponential_decay(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<DecayFit> {
    let window = match window {
        Some(w) => w,
        None => {
            let last = series.last().map_or(0.0, |p| p.0);
            (0.5 * last, last)
        }
    };
    let slack = 1e-12 * window.1.abs().max(1.0);
    let mut pts = Vec::new();
    for &(t, e) in series {
        if t >= window.0 - slack && t <= window.1 + slack {
            if !(e > 0.0) {
                return Err(Error::NonPositiveSeries { t, value: e });
            }
            pts.push((t, e.ln()));
        }
    }
    if pts.len() < 3 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let k = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let residual = pts.iter().fold(0.0f64, |m, p| m.max((p.1 - intercept - slope * p.0).abs()));
    Ok(DecayFit {
        c: intercept.exp(),
        gamma: -slope,
        residual,
        window,
        points: pts.len(),
    })
}

/// The conditions on `δ` and `ε₁` under which `𝓛` decays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    pub delta: f64,
    pub epsilon1: f64,
    /// `2/μ*·(‖h̃₀‖²_∞ + ‖h̃₁‖²_∞) + 2δ(‖h̃₀‖_∞ + ‖h̃₁‖_∞)`
    pub lhs: f64,
    /// `δ(1 − η* − ε₁)`
    pub rhs: f64,
    /// `μ*/4 − (δ/ε₁)(λ̃₀² + λ̃₁²)`, which must stay positive.
    pub boundary_margin: f64,
    pub satisfied: bool,
}

pub fn smallness_condition(
    params: &ProblemParameters,
    data: &ProblemData,
    constants: &DecayConstants,
    delta: f64,
    epsilon1: f64,
) -> SmallnessReport {
    let sup = |f| model::sampled_sup(f, constants.cutoff, 1025).unwrap_or(f64::INFINITY);
    let (s0, s1) = (sup(&data.h_tilde0), sup(&data.h_tilde1));
    let lhs = 2.0 / constants.mu_star * (s0 * s0 + s1 * s1) + 2.0 * delta * (s0 + s1);
    let rhs = delta * (1.0 - constants.eta_star - epsilon1);
    let boundary_margin = 0.25 * constants.mu_star
        - delta / epsilon1 * (params.lambda_tilde0.powi(2) + params.lambda_tilde1.powi(2));
    let satisfied = lhs < rhs
        && delta > 0.0
        && delta < params.lambda
        && epsilon1 > 0.0
        && epsilon1 < 1.0 - constants.eta_star
        && boundary_margin > 0.0;
    SmallnessReport {
        delta,
        epsilon1,
        lhs,
        rhs,
        boundary_margin,
        satisfied,
    }
}

/// Functionals at one stored time. Entries that are undefined for the
/// problem (no constant `h̃`, `λ̃₀ ≠ λ̃₁`, `H ≤ 0`) are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValues {
    pub t: f64,
    pub e: f64,
    pub h: Option<f64>,
    pub i: f64,
    pub j: f64,
    pub phi: Option<f64>,
    pub psi: f64,
    pub l_blowup: Option<f64>,
    pub script_l: f64,
    pub norms: DiscreteNorms,
}

/// Problem-level constants reported alongside the series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub q: f64,
    pub mu_star: Option<f64>,
    pub h_tilde: Option<f64>,
    pub eta: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub decay: Option<DecayConstants>,
    pub sandwich: Option<(f64, f64)>,
    pub smallness: Option<SmallnessReport>,
    /// `L(0) > 0`, needed for the blow-up argument with the chosen `ε`.
    pub l0_positive: Option<bool>,
    /// `T*` when `d₂` is supplied and `L(0) > 0`.
    pub blowup_time_bound: Option<f64>,
    /// Fit of the energy over the second half of the run, when `E > 0` there.
    pub decay_fit: Option<DecayFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub values: Vec<FunctionalValues>,
    pub constants: DerivedConstants,
}

pub fn evaluate_state(
    state: &SemiDiscreteState,
    params: &ProblemParameters,
    grid: &SpatialGrid,
    h_tilde: Option<f64>,
    cfg: &FunctionalConfig,
) -> FunctionalValues {
    let n = discrete_norms(state, params, grid);
    let e = energy_from(&n, params);
    let psi = psi_from(&n, params);
    let phi = common_lambda_tilde(params).ok().map(|lt| psi + lt * n.u_left * n.u_right);
    let h = h_tilde.map(|ht| -e - ht * n.u_left * n.u_right);
    let eta = cfg.eta_for(params);
    let l_blowup = match (h, phi) {
        (Some(h), Some(phi)) if h > 0.0 && check_eta(eta, params).is_ok() => {
            Some(h.powf(1.0 - eta) + cfg.epsilon * phi)
        }
        _ => None,
    };
    FunctionalValues {
        t: state.t,
        e,
        h,
        i: n.h1_sq - source_potential(&n, params, false),
        j: potential_from(&n, params),
        phi,
        psi,
        l_blowup,
        script_l: e + cfg.delta_for(params) * psi,
        norms: n,
    }
}

impl DiagnosticsSeries {
    /// Evaluates every stored snapshot and the constants derived from the
    /// initial state.
    pub fn evaluate(
        record: &TrajectoryRecord,
        params: &ProblemParameters,
        data: &ProblemData,
        grid: &SpatialGrid,
        cfg: &FunctionalConfig,
    ) -> Result<DiagnosticsSeries> {
        let horizon = record.times.last().copied().unwrap_or(0.0);
        let h_tilde = cfg.h_tilde_for(data, horizon);
        let values: Vec<FunctionalValues> = record
            .snapshots
            .par_iter()
            .map(|s| evaluate_state(s, params, grid, h_tilde, cfg))
            .collect();
        let q = params.q();
        let delta = cfg.delta_for(params);
        let first = values.first().ok_or(Error::TooFewPoints(0))?;
        let decay = decay_constants(params, data, first.e, cfg, horizon).ok();
        let smallness = decay.map(|d| smallness_condition(params, data, &d, delta, cfg.epsilon1_for(d.eta_star)));
        let l0 = first.l_blowup;
        let blowup_time_bound = match (l0, cfg.d2) {
            (Some(l0), Some(d2)) => blowup_time_bound(cfg.eta_for(params), d2, l0).ok(),
            _ => None,
        };
        let energy: Vec<(f64, f64)> = values.iter().map(|v| (v.t, v.e)).collect();
        let constants = DerivedConstants {
            q,
            mu_star: model::mu_star(params).ok(),
            h_tilde,
            eta: cfg.eta_for(params),
            epsilon: cfg.epsilon,
            delta,
            decay,
            sandwich: sandwich_bounds(params, delta, q).ok(),
            smallness,
            l0_positive: first.h.map(|_| l0.is_some_and(|l| l > 0.0)),
            blowup_time_bound,
            decay_fit: fit_exponential_decay(&energy, None).ok(),
        };
        Ok(DiagnosticsSeries { values, constants })
    }

    pub fn times(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.t).collect()
    }

    /// Whether `β₁E ≤ 𝓛 ≤ β₂E` at every stored time, up to `slack`.
    pub fn sandwich_holds(&self, beta1: f64, beta2: f64, slack: f64) -> bool {
        self.values
            .iter()
            .all(|v| beta1 * v.e <= v.script_l + slack && v.script_l <= beta2 * v.e + slack)
    }
}

/// Result of checking that `H` does not decrease along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub intervals: usize,
    /// Intervals where the step is too coarse to judge (see [`check_h_monotone`]).
    pub unresolved: usize,
    /// `(t_k, t_{k+1}, H_k − H_{k+1}, tolerance)` for each resolved decrease
    /// beyond tolerance.
    pub violations: Vec<(f64, f64, f64, f64)>,
}

impl MonotonicityReport {
    pub fn resolved_fraction(&self) -> f64 {
        if self.intervals == 0 {
            1.0
        } else {
            1.0 - self.unresolved as f64 / self.intervals as f64
        }
    }

    pub fn ok(&self, min_resolved: f64) -> bool {
        self.violations.is_empty() && self.resolved_fraction() >= min_resolved
    }
}

/// Relative step-doubling discrepancy above which a step counts as unresolved.
pub const RESOLUTION_LIMIT: f64 = 1e-2;

/// Checks `H_{k+1} ≥ H_k − tol_k` between consecutive snapshots.
///
/// The tolerance is ten times the step-doubling estimate
/// `|H(one step) − H(two half steps)|` from the earlier snapshot. Steps whose
/// state discrepancy exceeds [`RESOLUTION_LIMIT`] relative to the state size
/// cannot be judged and are counted as unresolved instead. Meant for records
/// that keep every step.
pub fn check_h_monotone(
    record: &TrajectoryRecord,
    system: &SemiDiscreteSystem,
    config: &SolverConfig,
    h_tilde: f64,
) -> MonotonicityReport {
    let params = system.params();
    let grid = system.grid();
    let m = grid.len();
    let h_of = |t: f64, x: &[f64]| functional_h(&SemiDiscreteState::from_stacked(t, x), params, grid, h_tilde);
    let pairs: Vec<usize> = (0..record.snapshots.len().saturating_sub(1)).collect();
    let outcomes: Vec<Option<(f64, f64, f64, f64)>> = pairs
        .par_iter()
        .map(|&k| {
            let (a, b) = (&record.snapshots[k], &record.snapshots[k + 1]);
            let step = b.t - a.t;
            let x = a.stacked();
            let (full, halves) = solver::step_doubling(system, config, a.t, &x, step)?;
            let sup = |v: &[f64]| v.iter().fold(0.0f64, |s, e| s.max(e.abs()));
            let gap = full[..m].iter().zip(&halves[..m]).fold(0.0f64, |s, (p, q)| s.max((p - q).abs()));
            if !(gap <= RESOLUTION_LIMIT * sup(&halves[..m]).max(1.0)) {
                return None;
            }
            let tol = 10.0 * (h_of(b.t, &full) - h_of(b.t, &halves)).abs();
            let drop = h_of(a.t, &x) - h_of(b.t, &b.stacked());
            Some((a.t, b.t, drop, tol))
        })
        .collect();
    MonotonicityReport {
        intervals: outcomes.len(),
        unresolved: outcomes.iter().filter(|o| o.is_none()).count(),
        violations: outcomes.into_iter().flatten().filter(|&(_, _, drop, tol)| drop > tol).collect(),
    }
}
