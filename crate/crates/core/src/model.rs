//! Continuous problem definition and the admissibility checks on it.
//!
//! The equation is
//!
//! ```text
//! u_tt - u_xx + u + λ u_t = |u|^{p-2} u + f(x, t),            0 < x < 1,
//!  u_x(0,t) = -|u(0,t)|^{α-2} u(0,t) + λ₀ u_t(0,t) + h̃₁(t) u(1,t) + λ̃₁ u_t(1,t) + g₀(t),
//! -u_x(1,t) = -|u(1,t)|^{β-2} u(1,t) + λ₁ u_t(1,t) + h̃₀(t) u(0,t) + λ̃₀ u_t(0,t) + g₁(t),
//! ```
//!
//! with `u(x,0) = u₀(x)`, `u_t(x,0) = u₁(x)`. The homogeneous problem has
//! `f = g₀ = g₁ = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{ScalarFn, Var};

/// Which nonlinear source terms are active. Both on reproduces the equation
/// above; switching both off leaves a linear problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceTerms {
    /// `|u|^{p-2} u` in the interior.
    #[serde(default = "yes")]
    pub interior: bool,
    /// `|u|^{α-2} u` and `|u|^{β-2} u` at the endpoints.
    #[serde(default = "yes")]
    pub boundary: bool,
}

fn yes() -> bool {
    true
}

impl Default for SourceTerms {
    fn default() -> Self {
        SourceTerms {
            interior: true,
            boundary: true,
        }
    }
}

impl SourceTerms {
    pub fn is_linear(&self) -> bool {
        !self.interior && !self.boundary
    }

    fn is_default(&self) -> bool {
        *self == SourceTerms::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParameters {
    pub lambda: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda_tilde0: f64,
    pub lambda_tilde1: f64,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "SourceTerms::is_default")]
    pub sources: SourceTerms,
}

impl ProblemParameters {
    /// `q = min{p, α, β}`.
    pub fn q(&self) -> f64 {
        self.p.min(self.alpha).min(self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemData {
    pub h_tilde0: ScalarFn,
    pub h_tilde1: ScalarFn,
    pub g0: ScalarFn,
    pub g1: ScalarFn,
    pub f: ScalarFn,
    pub u0: ScalarFn,
    pub u1: ScalarFn,
    /// Derivative of `u₀`, used by the compatibility check when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0_derivative: Option<ScalarFn>,
}

impl ProblemData {
    /// Homogeneous forcing, zero coupling and the given initial data.
    pub fn homogeneous(u0: ScalarFn, u1: ScalarFn) -> ProblemData {
        ProblemData {
            h_tilde0: ScalarFn::zero(),
            h_tilde1: ScalarFn::zero(),
            g0: ScalarFn::zero(),
            g1: ScalarFn::zero(),
            f: ScalarFn::zero(),
            u0,
            u1,
            u0_derivative: None,
        }
    }

    /// Rejects functions that depend on a variable they must not see.
    pub fn validate(&self) -> Result<()> {
        let time_only = [
            ("h_tilde0", &self.h_tilde0),
            ("h_tilde1", &self.h_tilde1),
            ("g0", &self.g0),
            ("g1", &self.g1),
        ];
        for (name, func) in time_only {
            if func.uses(Var::X) {
                return Err(Error::InvalidArgument(format!("{name} must not depend on x")));
            }
        }
        let space_only = [
            ("u0", Some(&self.u0)),
            ("u1", Some(&self.u1)),
            ("u0_derivative", self.u0_derivative.as_ref()),
        ];
        for (name, func) in space_only {
            if func.is_some_and(|f| f.uses(Var::T)) {
                return Err(Error::InvalidArgument(format!("{name} must not depend on t")));
            }
        }
        Ok(())
    }
}

/// Coercivity constant of the boundary damping form,
/// `μ* = ¼[4λ₀λ₁ − (λ̃₀+λ̃₁)²]·min{1/λ₀, 1/λ₁}`.
pub fn mu_star(params: &ProblemParameters) -> Result<f64> {
    let (l0, l1) = (params.lambda0, params.lambda1);
    let sum = params.lambda_tilde0 + params.lambda_tilde1;
    let bound = if l0 > 0.0 && l1 > 0.0 {
        2.0 * (l0 * l1).sqrt()
    } else {
        0.0
    };
    if !(l0 > 0.0 && l1 > 0.0 && sum.abs() < bound) {
        return Err(Error::Admissibility {
            sum_abs: sum.abs(),
            bound,
        });
    }
    let mu = 0.25 * (4.0 * l0 * l1 - sum * sum) * (1.0 / l0).min(1.0 / l1);
    if mu > 0.0 {
        Ok(mu)
    } else {
        // rounding at the edge of the admissible cone
        Err(Error::Admissibility {
            sum_abs: sum.abs(),
            bound,
        })
    }
}

/// The same constant for equal cross damping `λ̃₀ = λ̃₁ = λ̃`:
/// `(λ₀λ₁ − λ̃²)·min{1/λ₀, 1/λ₁}`.
pub fn mu_star_symmetric(lambda0: f64, lambda1: f64, lambda_tilde: f64) -> Result<f64> {
    let bound = (lambda0 * lambda1).sqrt();
    if !(lambda0 > 0.0 && lambda1 > 0.0 && lambda_tilde.abs() < bound) {
        return Err(Error::Admissibility {
            sum_abs: 2.0 * lambda_tilde.abs(),
            bound: 2.0 * bound,
        });
    }
    Ok((lambda0 * lambda1 - lambda_tilde * lambda_tilde) * (1.0 / lambda0).min(1.0 / lambda1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    General,
    Blowup,
    Decay,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub ok: bool,
    pub reason: String,
}

impl Check {
    fn new(ok: bool, reason: String) -> Check {
        Check { ok, reason }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub mode: Mode,
    pub mu_star: Option<f64>,
    pub q: f64,
    /// `(q−2)/(4(q+2))`, the bound on a constant coupling in the blow-up regime.
    pub h_tilde_blowup_bound: f64,
    pub a1: Check,
    pub a2: Option<Check>,
    pub a3: Option<Check>,
    pub a2_prime: Option<Check>,
    pub a3_prime: Option<Check>,
    pub a3_double_prime: Option<Check>,
    /// Right end of the finite interval standing in for `[0, ∞)`.
    pub integrability_cutoff: Option<f64>,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub fn a1_ok(&self) -> bool {
        self.a1.ok
    }
    pub fn a2_ok(&self) -> bool {
        self.a2.as_ref().is_some_and(|c| c.ok)
    }
    pub fn a2prime_ok(&self) -> bool {
        self.a2_prime.as_ref().is_some_and(|c| c.ok)
    }
    pub fn a3prime_ok(&self) -> bool {
        self.a3_prime.as_ref().is_some_and(|c| c.ok)
    }
    pub fn a3doubleprime_ok(&self) -> bool {
        self.a3_double_prime.as_ref().is_some_and(|c| c.ok)
    }

    /// Every hypothesis evaluated for this mode, tagged.
    pub fn checks(&self) -> Vec<(&'static str, &Check)> {
        let mut out = vec![("A1", &self.a1)];
        let optional = [
            ("A2", &self.a2),
            ("A3", &self.a3),
            ("A2'", &self.a2_prime),
            ("A3'", &self.a3_prime),
            ("A3''", &self.a3_double_prime),
        ];
        out.extend(optional.iter().filter_map(|(tag, c)| c.as_ref().map(|c| (*tag, c))));
        out
    }

    pub fn all_ok(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.ok)
    }
}

/// Points used to decide whether a coupling coefficient is constant.
pub const CONSTANCY_SAMPLES: usize = 17;
pub const CONSTANCY_TOL: f64 = 1e-12;

/// Finite interval standing in for the half-line: `max(10·T, 100)`.
pub fn integrability_cutoff(horizon: f64) -> f64 {
    (10.0 * horizon).max(100.0)
}

fn sample_times(horizon: f64, count: usize) -> impl Iterator<Item = f64> {
    let h = horizon.max(0.0);
    (0..count).map(move |k| h * k as f64 / (count - 1) as f64)
}

/// Sup over a uniform sample of `[0, horizon]`, `None` if any sample is non-finite.
pub fn sampled_sup(func: &ScalarFn, horizon: f64, count: usize) -> Option<f64> {
    let mut sup = 0.0f64;
    for t in sample_times(horizon, count) {
        let v = func.at_t(t);
        if !v.is_finite() {
            return None;
        }
        sup = sup.max(v.abs());
    }
    Some(sup)
}

/// Constant value of a time function, judged from [`CONSTANCY_SAMPLES`] samples.
pub fn sampled_constant(func: &ScalarFn, horizon: f64) -> Option<f64> {
    let first = func.at_t(0.0);
    let constant = sample_times(horizon, CONSTANCY_SAMPLES)
        .all(|t| (func.at_t(t) - first).abs() < CONSTANCY_TOL);
    (constant && first.is_finite()).then_some(first)
}

/// Adaptive trapezoid rule on `[a, b]` to relative tolerance `rel_tol`.
///
/// Accepted panels are Richardson-corrected, which makes the rule
/// fourth-order on smooth integrands.
pub fn adaptive_trapezoid(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn refine(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        let left = 0.25 * (b - a) * (fa + fm);
        let right = 0.25 * (b - a) * (fm + fb);
        let halves = left + right;
        if depth == 0 || (halves - whole).abs() <= 3.0 * tol {
            return halves + (halves - whole) / 3.0;
        }
        refine(f, a, m, fa, fm, left, 0.5 * tol, depth - 1)
            + refine(f, m, b, fm, fb, right, 0.5 * tol, depth - 1)
    }
    // start from a modest uniform split so narrow features are not skipped
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    let panels: Vec<(f64, f64, f64, f64)> = (0..PANELS)
        .map(|k| {
            let lo = a + h * k as f64;
            let hi = if k + 1 == PANELS { b } else { lo + h };
            (lo, hi, f(lo), f(hi))
        })
        .collect();
    let coarse: f64 = panels.iter().map(|&(lo, hi, flo, fhi)| 0.5 * (hi - lo) * (flo + fhi)).sum();
    let tol = rel_tol * coarse.abs().max(f64::MIN_POSITIVE) / PANELS as f64;
    panels
        .iter()
        .map(|&(lo, hi, flo, fhi)| {
            let whole = 0.5 * (hi - lo) * (flo + fhi);
            refine(f, lo, hi, flo, fhi, whole, tol, 30)
        })
        .sum()
}

/// `‖h‖²` over `[0, cutoff]` by adaptive trapezoid.
pub fn half_line_l2_sq(func: &ScalarFn, cutoff: f64) -> f64 {
    adaptive_trapezoid(&|t| func.at_t(t).powi(2), 0.0, cutoff, 1e-11)
}

/// Evaluates the hypotheses relevant to `mode` over the horizon `[0, horizon]`.
pub fn check_assumptions(
    params: &ProblemParameters,
    data: &ProblemData,
    mode: Mode,
    horizon: f64,
) -> AssumptionReport {
    let q = params.q();
    let h_bound = (q - 2.0) / (4.0 * (q + 2.0));
    let mut notes = Vec::new();

    let a1_ok = params.p > 2.0 && params.alpha > 2.0 && params.beta > 2.0 && params.lambda > 0.0;
    let a1 = Check::new(
        a1_ok,
        if a1_ok {
            format!(
                "A1: p = {}, alpha = {}, beta = {} > 2 and lambda = {} > 0",
                params.p, params.alpha, params.beta, params.lambda
            )
        } else {
            format!(
                "A1 violated: need p, alpha, beta > 2 and lambda > 0 (p = {}, alpha = {}, beta = {}, lambda = {})",
                params.p, params.alpha, params.beta, params.lambda
            )
        },
    );

    let mu = mu_star(params);
    let a2_check = || {
        let sum = (params.lambda_tilde0 + params.lambda_tilde1).abs();
        match &mu {
            Ok(_) => Check::new(
                true,
                format!(
                    "A2: |lambda_tilde0 + lambda_tilde1| = {sum} < 2*sqrt(lambda0*lambda1)"
                ),
            ),
            Err(e) => Check::new(false, e.to_string()),
        }
    };

    let mut report = AssumptionReport {
        mode,
        mu_star: mu.as_ref().ok().copied(),
        q,
        h_tilde_blowup_bound: h_bound,
        a1,
        a2: None,
        a3: None,
        a2_prime: None,
        a3_prime: None,
        a3_double_prime: None,
        integrability_cutoff: None,
        notes: Vec::new(),
    };

    match mode {
        Mode::General => {
            report.a2 = Some(a2_check());
            let sups = [
                sampled_sup(&data.h_tilde0, horizon, 257),
                sampled_sup(&data.h_tilde1, horizon, 257),
            ];
            let ok = sups.iter().all(Option::is_some);
            report.a3 = Some(Check::new(
                ok,
                if ok {
                    format!(
                        "A3: h_tilde0, h_tilde1 bounded on [0, {horizon}] (sup {:.6e}, {:.6e})",
                        sups[0].unwrap_or_default(),
                        sups[1].unwrap_or_default()
                    )
                } else {
                    format!("A3 violated: a coupling coefficient is not finite on [0, {horizon}]")
                },
            ));
            notes.push(
                "A3 is checked as boundedness on the horizon; H1(0,T) regularity is not verified"
                    .to_string(),
            );
        }
        Mode::Blowup => {
            let (l0, l1) = (params.lambda0, params.lambda1);
            let equal = params.lambda_tilde0 == params.lambda_tilde1;
            let lt = params.lambda_tilde0;
            let bound = if l0 > 0.0 && l1 > 0.0 { (l0 * l1).sqrt() } else { 0.0 };
            let ok = equal && l0 > 0.0 && l1 > 0.0 && lt.abs() < bound;
            report.a2_prime = Some(Check::new(
                ok,
                if ok {
                    format!("A2': lambda_tilde = {lt}, |lambda_tilde| < sqrt(lambda0*lambda1) = {bound}")
                } else if !equal {
                    format!(
                        "A2' violated: lambda_tilde0 = {} differs from lambda_tilde1 = {}",
                        params.lambda_tilde0, params.lambda_tilde1
                    )
                } else {
                    format!("A2' violated: |lambda_tilde| = {} >= sqrt(lambda0*lambda1) = {bound}", lt.abs())
                },
            ));
            let c0 = sampled_constant(&data.h_tilde0, horizon);
            let c1 = sampled_constant(&data.h_tilde1, horizon);
            report.a3_prime = Some(match (c0, c1) {
                (Some(a), Some(b)) if (a - b).abs() < CONSTANCY_TOL => {
                    let ok = a.abs() < h_bound;
                    Check::new(
                        ok,
                        if ok {
                            format!("A3': h_tilde = {a}, |h_tilde| < (q-2)/(4(q+2)) = {h_bound}")
                        } else {
                            format!("A3' violated: |h_tilde| = {} >= (q-2)/(4(q+2)) = {h_bound}", a.abs())
                        },
                    )
                }
                (Some(a), Some(b)) => Check::new(
                    false,
                    format!("A3' violated: h_tilde0 = {a} differs from h_tilde1 = {b}"),
                ),
                _ => Check::new(
                    false,
                    format!(
                        "A3' violated: coupling not constant over {CONSTANCY_SAMPLES} samples of [0, {horizon}]"
                    ),
                ),
            });
        }
        Mode::Decay => {
            report.a2 = Some(a2_check());
            let cutoff = integrability_cutoff(horizon);
            report.integrability_cutoff = Some(cutoff);
            let mut ok = true;
            let mut parts = Vec::new();
            for (name, func) in [("h_tilde0", &data.h_tilde0), ("h_tilde1", &data.h_tilde1)] {
                let sup = sampled_sup(func, cutoff, 1025);
                let total = half_line_l2_sq(func, cutoff);
                let tail = adaptive_trapezoid(&|t| func.at_t(t).powi(2), 0.5 * cutoff, cutoff, 1e-12);
                let bounded = sup.is_some();
                let integrable = total.is_finite() && tail <= INTEGRABILITY_TAIL * total.max(1.0);
                ok &= bounded && integrable;
                parts.push(format!(
                    "{name}: sup = {}, |h|^2 on [0, {cutoff}] = {total:.6e}, tail on [{}, {cutoff}] = {tail:.3e}",
                    sup.map_or("inf".to_string(), |s| format!("{s:.6e}")),
                    0.5 * cutoff
                ));
            }
            let joined = parts.join("; ");
            report.a3_double_prime = Some(Check::new(
                ok,
                if ok {
                    format!("A3'': {joined}")
                } else {
                    format!("A3'' violated (bounded and square-integrable proxy): {joined}")
                },
            ));
            notes.push(format!(
                "half-line norms approximated on [0, {cutoff}]; square integrability accepted when the tail integral is below {INTEGRABILITY_TAIL:e} of the total"
            ));
        }
    }
    report.notes = notes;
    report
}

/// Relative size of `∫_{T/2}^{T} h²` below which `h` counts as square-integrable.
pub const INTEGRABILITY_TAIL: f64 = 1e-8;

/// General endpoint relations
/// `α_{i1}u(0) + α_{i2}u_x(0) + α_{i3}u_t(0) + β_{i1}u(1) + β_{i2}u_x(1) + β_{i3}u_t(1) = f_i(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralBoundaryCoefficients {
    /// `alpha[i][j-1]` holds `α_{ij}`.
    pub alpha: [[f64; 3]; 2],
    pub beta: [[f64; 3]; 2],
    pub f0: ScalarFn,
    pub f1: ScalarFn,
}

impl GeneralBoundaryCoefficients {
    pub fn determinant(&self) -> f64 {
        self.alpha[0][1] * self.beta[1][1] - self.alpha[1][1] * self.beta[0][1]
    }
}

/// Endpoint relations solved for the fluxes:
/// `u_x(0) = h₀u(0) + λ₀u_t(0) + h̃₁u(1) + λ̃₁u_t(1) + g₀`,
/// `−u_x(1) = h₁u(1) + λ₁u_t(1) + h̃₀u(0) + λ̃₀u_t(0) + g₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalBoundary {
    pub h0: f64,
    pub h1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub h_tilde0: f64,
    pub h_tilde1: f64,
    pub lambda_tilde0: f64,
    pub lambda_tilde1: f64,
    pub g0: ScalarFn,
    pub g1: ScalarFn,
}

impl CanonicalBoundary {
    /// `(u_x(0), u_x(1))` for the given endpoint values and velocities.
    pub fn fluxes(&self, u0: f64, u1: f64, v0: f64, v1: f64, t: f64) -> (f64, f64) {
        let ux0 = self.h0 * u0
            + self.lambda0 * v0
            + self.h_tilde1 * u1
            + self.lambda_tilde1 * v1
            + self.g0.at_t(t);
        let minus_ux1 = self.h1 * u1
            + self.lambda1 * v1
            + self.h_tilde0 * u0
            + self.lambda_tilde0 * v0
            + self.g1.at_t(t);
        (ux0, -minus_ux1)
    }
}

/// Rewrites general coupled endpoint relations in canonical flux form.
pub fn hellwig_transform(coeffs: &GeneralBoundaryCoefficients) -> Result<CanonicalBoundary> {
    let det = coeffs.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::SingularDeterminant);
    }
    let a = &coeffs.alpha;
    let b = &coeffs.beta;
    // a[i][j-1] = α_ij, b[i][j-1] = β_ij
    let (a01, a02, a03) = (a[0][0], a[0][1], a[0][2]);
    let (a11, a12, a13) = (a[1][0], a[1][1], a[1][2]);
    let (b01, b02, b03) = (b[0][0], b[0][1], b[0][2]);
    let (b11, b12, b13) = (b[1][0], b[1][1], b[1][2]);
    let inv = 1.0 / det;
    Ok(CanonicalBoundary {
        h0: inv * (b02 * a11 - b12 * a01),
        h1: inv * (a02 * b11 - a12 * b01),
        lambda0: inv * (b02 * a13 - b12 * a03),
        lambda1: inv * (a02 * b13 - a12 * b03),
        h_tilde0: inv * (a02 * a11 - a12 * a01),
        h_tilde1: inv * (b02 * b11 - b12 * b01),
        lambda_tilde0: inv * (a02 * a13 - a12 * a03),
        lambda_tilde1: inv * (b02 * b13 - b12 * b03),
        g0: ScalarFn::linear_combination(&[(inv * b12, &coeffs.f0), (-inv * b02, &coeffs.f1)]),
        g1: ScalarFn::linear_combination(&[(inv * a12, &coeffs.f0), (-inv * a02, &coeffs.f1)]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub r0: f64,
    pub r1: f64,
    pub pass: bool,
    /// Endpoint derivatives of `u₀` came from finite differences.
    pub approximate: bool,
}

/// Step for the one-sided endpoint differences of `u₀`.
pub const COMPATIBILITY_FD_STEP: f64 = 1e-6;

/// Residuals of the endpoint relations at `t = 0` for the initial data.
pub fn check_compatibility(
    params: &ProblemParameters,
    data: &ProblemData,
    tol: f64,
) -> CompatibilityReport {
    let u0 = |x: f64| data.u0.at_x(x);
    let (d0, d1, approximate) = match &data.u0_derivative {
        Some(d) => (d.at_x(0.0), d.at_x(1.0), false),
        None => {
            let h = COMPATIBILITY_FD_STEP;
            let d0 = (-3.0 * u0(0.0) + 4.0 * u0(h) - u0(2.0 * h)) / (2.0 * h);
            let d1 = (3.0 * u0(1.0) - 4.0 * u0(1.0 - h) + u0(1.0 - 2.0 * h)) / (2.0 * h);
            (d0, d1, true)
        }
    };
    let (a, b) = (u0(0.0), u0(1.0));
    let (v0, v1) = (data.u1.at_x(0.0), data.u1.at_x(1.0));
    let src = |u: f64, e: f64| {
        if params.sources.boundary {
            u.abs().powf(e - 2.0) * u
        } else {
            0.0
        }
    };
    let r0 = d0
        - (-src(a, params.alpha)
            + params.lambda0 * v0
            + data.h_tilde1.at_t(0.0) * b
            + params.lambda_tilde1 * v1
            + data.g0.at_t(0.0));
    let r1 = -d1
        - (-src(b, params.beta)
            + params.lambda1 * v1
            + data.h_tilde0.at_t(0.0) * a
            + params.lambda_tilde0 * v0
            + data.g1.at_t(0.0));
    CompatibilityReport {
        r0,
        r1,
        pass: r0.abs().max(r1.abs()) <= tol,
        approximate,
    }
}
