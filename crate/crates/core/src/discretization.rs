//! Spatial grid and the semi-discrete system
//!
//! ```text
//! U' = V
//! V' = Ã(t) U + B̃ V + F(t, U)
//! ```
//!
//! on the nodes `x_j = j/N`. Interior rows use `N²U_{j-1} − (1+2N²)U_j + N²U_{j+1}`.
//! The two boundary rows eliminate the outer neighbour with the boundary
//! condition; how that is done is chosen by [`BoundaryClosure`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProblemData, ProblemParameters};

/// Treatment of the rows at `x = 0` and `x = 1`.
///
/// With weight `w` the row at `x = 0` reads
///
/// ```text
/// V₀' = −(1 + wN²) U₀ + wN² U₁ − wN h̃₁ U_N + (−λ − wNλ₀) V₀ − wNλ̃₁ V_N
///       + |U₀|^{p-2}U₀ + f(0,t) + wN (|U₀|^{α-2}U₀ − g₀)
/// ```
///
/// and symmetrically at `x = 1`.
///
/// `Literal` (`w = 1`) is the one-sided flux row. Its truncation error does not
/// vanish as `N` grows, so the scheme converges only at a reduced rate.
/// `GhostPoint` (`w = 2`) eliminates a ghost node through the centred
/// derivative and is first-order consistent at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryClosure {
    Literal,
    #[default]
    GhostPoint,
}

impl BoundaryClosure {
    pub fn weight(self) -> f64 {
        match self {
            BoundaryClosure::Literal => 1.0,
            BoundaryClosure::GhostPoint => 2.0,
        }
    }
}

/// Uniform grid `x_j = j/N`, `j = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    n: usize,
    dx: f64,
    closure: BoundaryClosure,
}

impl SpatialGrid {
    pub fn new(n: usize) -> Result<SpatialGrid> {
        if n < 2 {
            return Err(Error::GridTooSmall(n));
        }
        Ok(SpatialGrid {
            n,
            dx: 1.0 / n as f64,
            closure: BoundaryClosure::default(),
        })
    }

    pub fn with_closure(mut self, closure: BoundaryClosure) -> SpatialGrid {
        self.closure = closure;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn closure(&self) -> BoundaryClosure {
        self.closure
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.node(j)).collect()
    }
}

/// Square matrix with at most three bands and the two corner entries
/// `(0, N)` and `(N, 0)`. Empty off-diagonal bands mean a diagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedCornerMatrix {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub top_right: f64,
    pub bottom_left: f64,
}

impl BandedCornerMatrix {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    fn is_tridiagonal(&self) -> bool {
        !self.lower.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let last = self.dim() - 1;
        let band = if i == j {
            self.diag[i]
        } else if self.is_tridiagonal() && i == j + 1 {
            self.lower[j]
        } else if self.is_tridiagonal() && j == i + 1 {
            self.upper[i]
        } else {
            0.0
        };
        let corner = if (i, j) == (0, last) {
            self.top_right
        } else if (i, j) == (last, 0) {
            self.bottom_left
        } else {
            0.0
        };
        band + corner
    }

    /// `out += M x`.
    pub fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            out[i] += self.diag[i] * x[i];
        }
        if self.is_tridiagonal() {
            for i in 1..n {
                out[i] += self.lower[i - 1] * x[i - 1];
                out[i - 1] += self.upper[i - 1] * x[i];
            }
        }
        out[0] += self.top_right * x[n - 1];
        out[n - 1] += self.bottom_left * x[0];
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.mul_add(x, &mut out);
        out
    }

    /// Row-major dense copy, for checks against the structured product.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Number of entry positions the layout can hold.
    pub fn structural_nonzeros(&self) -> usize {
        self.diag.len() + self.lower.len() + self.upper.len() + 2
    }
}

/// The blocks of the semi-discrete system at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a_tilde: BandedCornerMatrix,
    pub b_tilde: BandedCornerMatrix,
    /// `α₁ = N²`.
    pub alpha1: f64,
    /// `γ = −1 − 2N²`.
    pub gamma: f64,
}

pub fn assemble_system(
    t: f64,
    params: &ProblemParameters,
    data: &ProblemData,
    grid: &SpatialGrid,
) -> SystemMatrices {
    let n2 = (grid.n() * grid.n()) as f64;
    SystemMatrices {
        a_tilde: assemble_a_tilde(t, data, grid),
        b_tilde: assemble_b_tilde(params, grid),
        alpha1: n2,
        gamma: -1.0 - 2.0 * n2,
    }
}

fn a_tilde_static(grid: &SpatialGrid) -> BandedCornerMatrix {
    let n = grid.n();
    let n2 = (n * n) as f64;
    let w = grid.closure().weight();
    let mut diag = vec![-1.0 - 2.0 * n2; n + 1];
    let mut lower = vec![n2; n];
    let mut upper = vec![n2; n];
    diag[0] = -1.0 - w * n2;
    diag[n] = -1.0 - w * n2;
    upper[0] = w * n2;
    lower[n - 1] = w * n2;
    BandedCornerMatrix {
        lower,
        diag,
        upper,
        top_right: 0.0,
        bottom_left: 0.0,
    }
}

/// Corner entries `(γ̃₁(t), γ̃₀(t)) = (−wN h̃₁(t), −wN h̃₀(t))`.
fn a_tilde_corners(h_tilde0: f64, h_tilde1: f64, grid: &SpatialGrid) -> (f64, f64) {
    let scale = grid.closure().weight() * grid.n() as f64;
    (-scale * h_tilde1, -scale * h_tilde0)
}

/// Stiffness block `Ã(t)`. Only its corner entries depend on `t`.
pub fn assemble_a_tilde(t: f64, data: &ProblemData, grid: &SpatialGrid) -> BandedCornerMatrix {
    let mut a = a_tilde_static(grid);
    let (top, bottom) = a_tilde_corners(data.h_tilde0.at_t(t), data.h_tilde1.at_t(t), grid);
    a.top_right = top;
    a.bottom_left = bottom;
    a
}

/// Damping block `B̃`: `−λ` on the interior diagonal, `δ̂ᵢ = −λ − wNλᵢ` at the
/// boundary rows, `δ̃ᵢ = −wNλ̃ᵢ` in the corners.
pub fn assemble_b_tilde(params: &ProblemParameters, grid: &SpatialGrid) -> BandedCornerMatrix {
    let n = grid.n();
    let scale = grid.closure().weight() * n as f64;
    let mut diag = vec![-params.lambda; n + 1];
    diag[0] = -params.lambda - scale * params.lambda0;
    diag[n] = -params.lambda - scale * params.lambda1;
    BandedCornerMatrix {
        lower: Vec::new(),
        diag,
        upper: Vec::new(),
        top_right: -scale * params.lambda_tilde1,
        bottom_left: -scale * params.lambda_tilde0,
    }
}

fn signed_power(u: f64, exponent: f64) -> f64 {
    u.abs().powf(exponent - 2.0) * u
}

/// Time-dependent data sampled once per evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSlice {
    pub t: f64,
    pub f: Vec<f64>,
    pub g0: f64,
    pub g1: f64,
    pub h_tilde0: f64,
    pub h_tilde1: f64,
}

impl TimeSlice {
    pub fn sample(t: f64, data: &ProblemData, grid: &SpatialGrid) -> TimeSlice {
        TimeSlice {
            t,
            f: (0..=grid.n()).map(|j| data.f.eval(grid.node(j), t)).collect(),
            g0: data.g0.at_t(t),
            g1: data.g1.at_t(t),
            h_tilde0: data.h_tilde0.at_t(t),
            h_tilde1: data.h_tilde1.at_t(t),
        }
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

/// Nodal state `(U, V)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiDiscreteState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl SemiDiscreteState {
    /// Samples `u₀` and `u₁` at the nodes.
    pub fn initial(data: &ProblemData, grid: &SpatialGrid) -> SemiDiscreteState {
        let nodes = grid.nodes();
        SemiDiscreteState {
            t: 0.0,
            u: nodes.iter().map(|&x| data.u0.at_x(x)).collect(),
            v: nodes.iter().map(|&x| data.u1.at_x(x)).collect(),
        }
    }

    /// Splits a stacked vector `X = (U; V)`.
    pub fn from_stacked(t: f64, x: &[f64]) -> SemiDiscreteState {
        let half = x.len() / 2;
        SemiDiscreteState {
            t,
            u: x[..half].to_vec(),
            v: x[half..].to_vec(),
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.u.len());
        x.extend_from_slice(&self.u);
        x.extend_from_slice(&self.v);
        x
    }

    /// `max_j |U_j|`, or infinity when any entry of `U` or `V` is not finite.
    pub fn sup_u(&self) -> f64 {
        if self.u.iter().chain(&self.v).any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// The semi-discrete system for one problem on one grid.
///
/// The time-independent parts of `Ã` and `B̃` are assembled once; each
/// evaluation needs a [`TimeSlice`] for the forcing and corner values.
#[derive(Debug, Clone)]
pub struct SemiDiscreteSystem {
    grid: SpatialGrid,
    params: ProblemParameters,
    data: ProblemData,
    a_static: BandedCornerMatrix,
    b_tilde: BandedCornerMatrix,
}

impl SemiDiscreteSystem {
    pub fn new(
        params: &ProblemParameters,
        data: &ProblemData,
        grid: &SpatialGrid,
    ) -> Result<SemiDiscreteSystem> {
        data.validate()?;
        Ok(SemiDiscreteSystem {
            grid: *grid,
            params: params.clone(),
            data: data.clone(),
            a_static: a_tilde_static(grid),
            b_tilde: assemble_b_tilde(params, grid),
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn params(&self) -> &ProblemParameters {
        &self.params
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    /// Length of the stacked vector, `2N + 2`.
    pub fn dim(&self) -> usize {
        2 * self.grid.len()
    }

    /// Whether `F` depends on `U` at all.
    pub fn forcing_depends_on_state(&self) -> bool {
        !self.params.sources.is_linear()
    }

    pub fn slice(&self, t: f64) -> TimeSlice {
        TimeSlice::sample(t, &self.data, &self.grid)
    }

    pub fn initial_state(&self) -> SemiDiscreteState {
        SemiDiscreteState::initial(&self.data, &self.grid)
    }

    /// Writes `F(t, U_prev)` into `out`.
    pub fn forcing_into(&self, slice: &TimeSlice, u_prev: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        let p = &self.params;
        for j in 0..=n {
            let source = if p.sources.interior {
                signed_power(u_prev[j], p.p)
            } else {
                0.0
            };
            out[j] = source + slice.f[j];
        }
        let scale = self.grid.closure().weight() * n as f64;
        let (left, right) = if p.sources.boundary {
            (signed_power(u_prev[0], p.alpha), signed_power(u_prev[n], p.beta))
        } else {
            (0.0, 0.0)
        };
        out[0] += scale * (left - slice.g0);
        out[n] += scale * (right - slice.g1);
    }

    /// Writes `A(t) X + F(t, U_prev)` into `out`.
    pub fn rhs_into(&self, slice: &TimeSlice, x: &[f64], u_prev: &[f64], out: &mut [f64]) {
        let m = self.grid.len();
        let (u, v) = x.split_at(m);
        let (du, dv) = out.split_at_mut(m);
        du.copy_from_slice(v);
        self.forcing_into(slice, u_prev, dv);
        self.a_static.mul_add(u, dv);
        let (top, bottom) = a_tilde_corners(slice.h_tilde0, slice.h_tilde1, &self.grid);
        dv[0] += top * u[m - 1];
        dv[m - 1] += bottom * u[0];
        self.b_tilde.mul_add(v, dv);
    }

    pub fn rhs(&self, t: f64, x: &[f64], u_prev: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        check_len(self.grid.len(), u_prev.len())?;
        let mut out = vec![0.0; self.dim()];
        self.rhs_into(&self.slice(t), x, u_prev, &mut out);
        Ok(out)
    }
}

/// Forcing vector `F(t, U_prev)`.
pub fn nonlinear_forcing(
    t: f64,
    u_prev: &[f64],
    params: &ProblemParameters,
    data: &ProblemData,
    grid: &SpatialGrid,
) -> Result<Vec<f64>> {
    check_len(grid.len(), u_prev.len())?;
    let system = SemiDiscreteSystem::new(params, data, grid)?;
    let mut out = vec![0.0; grid.len()];
    system.forcing_into(&system.slice(t), u_prev, &mut out);
    Ok(out)
}

/// Right-hand side `A(t) X + F(t, U_prev)` for a stacked `X = (U; V)`.
pub fn rhs(
    t: f64,
    x: &[f64],
    u_prev: &[f64],
    params: &ProblemParameters,
    data: &ProblemData,
    grid: &SpatialGrid,
) -> Result<Vec<f64>> {
    SemiDiscreteSystem::new(params, data, grid)?.rhs(t, x, u_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarFn;
    use crate::model::SourceTerms;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn section5() -> (ProblemParameters, ProblemData) {
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
        let f = |s: &str| ScalarFn::parse(s).unwrap();
        let data = ProblemData {
            h_tilde0: f("exp(3 - 2*t)"),
            h_tilde1: f("-exp(-1 - 2*t)"),
            g0: f("(2 - exp(1)/2)*exp(-t) + 2*exp(-3*t)"),
            g1: f("-exp(-t)/2"),
            f: f("-exp(2*x - 2*t)"),
            u0: f("exp(x)"),
            u1: f("-exp(x)"),
            u0_derivative: None,
        };
        (params, data)
    }

    fn grid(n: usize, closure: BoundaryClosure) -> SpatialGrid {
        SpatialGrid::new(n).unwrap().with_closure(closure)
    }

    #[test]
    fn grid_basics() {
        assert_eq!(SpatialGrid::new(1), Err(Error::GridTooSmall(1)));
        let g = SpatialGrid::new(10).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g.closure(), BoundaryClosure::GhostPoint);
        assert!((g.dx() * 10.0 - 1.0).abs() <= f64::EPSILON);
        assert_eq!(g.node(10), 1.0);
    }

    #[test]
    fn literal_a_tilde_example() {
        let (_, data) = section5();
        let a = assemble_a_tilde(0.0, &data, &grid(10, BoundaryClosure::Literal));
        assert_eq!(a.get(5, 5), -201.0);
        assert_eq!(a.get(5, 4), 100.0);
        assert_eq!(a.get(0, 0), -101.0);
        assert_eq!(a.get(10, 10), -101.0);
        assert_eq!(a.get(0, 1), 100.0);
        let e_inv = (-1.0f64).exp();
        assert!((a.get(0, 10) - 10.0 * e_inv).abs() < 1e-14);
        assert!((a.get(0, 10) - 3.678794).abs() < 1e-6);
        assert!((a.get(10, 0) + 10.0 * 3.0f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn ghost_a_tilde_rows() {
        let (_, data) = section5();
        let a = assemble_a_tilde(0.0, &data, &grid(10, BoundaryClosure::GhostPoint));
        assert_eq!(a.get(0, 0), -201.0);
        assert_eq!(a.get(0, 1), 200.0);
        assert_eq!(a.get(10, 9), 200.0);
        assert!((a.get(0, 10) - 20.0 * (-1.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn zero_coupling_is_tridiagonal() {
        let data = ProblemData::homogeneous(ScalarFn::zero(), ScalarFn::zero());
        let a = assemble_a_tilde(0.3, &data, &grid(6, BoundaryClosure::GhostPoint));
        assert_eq!(a.get(0, 6), 0.0);
        assert_eq!(a.get(6, 0), 0.0);
    }

    #[test]
    fn b_tilde_examples() {
        let (params, _) = section5();
        let b = assemble_b_tilde(&params, &grid(10, BoundaryClosure::Literal));
        assert_eq!(b.get(0, 0), -11.0);
        assert_eq!(b.get(10, 10), -11.0);
        assert_eq!(b.get(0, 10), 5.0);
        assert_eq!(b.get(10, 0), 5.0);
        assert_eq!(b.get(4, 4), -1.0);
        assert_eq!(b.get(4, 5), 0.0);
        let ghost = assemble_b_tilde(&params, &grid(10, BoundaryClosure::GhostPoint));
        assert_eq!(ghost.get(0, 0), -21.0);
        assert_eq!(ghost.get(0, 10), 10.0);

        let mut diagonal = params.clone();
        diagonal.lambda_tilde0 = 0.0;
        diagonal.lambda_tilde1 = 0.0;
        let d = assemble_b_tilde(&diagonal, &grid(10, BoundaryClosure::Literal));
        assert_eq!(d.get(0, 10), 0.0);
        assert_eq!(d.get(10, 0), 0.0);
        assert_eq!(b, assemble_b_tilde(&params, &grid(10, BoundaryClosure::Literal)));
    }

    #[test]
    fn structural_counts() {
        let (params, data) = section5();
        for n in [2, 5, 10, 33] {
            let g = grid(n, BoundaryClosure::GhostPoint);
            let m = assemble_system(0.0, &params, &data, &g);
            assert_eq!(m.a_tilde.structural_nonzeros(), 3 * (n + 1) - 2 + 2);
            assert_eq!(m.b_tilde.structural_nonzeros(), n + 3);
            assert_eq!(m.alpha1, (n * n) as f64);
            assert_eq!(m.gamma, -1.0 - 2.0 * m.alpha1);
        }
    }

    #[test]
    fn forcing_examples() {
        let (mut params, _) = section5();
        params.p = 3.0;
        let data = ProblemData::homogeneous(ScalarFn::zero(), ScalarFn::zero());
        let g = grid(10, BoundaryClosure::Literal);
        let mut u = vec![0.0; 11];
        assert_eq!(nonlinear_forcing(0.0, &u, &params, &data, &g).unwrap(), vec![0.0; 11]);
        u[5] = 2.0;
        u[0] = 1.0;
        let f = nonlinear_forcing(0.0, &u, &params, &data, &g).unwrap();
        assert_eq!(f[5], 4.0);
        assert_eq!(f[0], 11.0);
        let ghost = nonlinear_forcing(0.0, &u, &params, &data, &grid(10, BoundaryClosure::GhostPoint));
        assert_eq!(ghost.unwrap()[0], 21.0);
        assert_eq!(
            nonlinear_forcing(0.0, &u[..10], &params, &data, &g),
            Err(Error::LengthMismatch { expected: 11, found: 10 })
        );
    }

    #[test]
    fn forcing_is_local() {
        let (params, data) = section5();
        let g = grid(8, BoundaryClosure::GhostPoint);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let base = nonlinear_forcing(0.7, &u, &params, &data, &g).unwrap();
        for j in 0..9 {
            let mut w = u.clone();
            w[j] += 0.5;
            let changed = nonlinear_forcing(0.7, &w, &params, &data, &g).unwrap();
            for k in 0..9 {
                assert_eq!(changed[k] != base[k], k == j, "node {k} after touching {j}");
            }
        }
    }

    #[test]
    fn rhs_examples() {
        let (params, data) = section5();
        let zero_data = ProblemData::homogeneous(ScalarFn::zero(), ScalarFn::zero());
        let g = grid(10, BoundaryClosure::Literal);
        let zero = vec![0.0; 22];
        assert_eq!(rhs(0.0, &zero, &zero[..11], &params, &zero_data, &g).unwrap(), zero);

        let mut x = zero.clone();
        x[5] = 1.0;
        let out = rhs(0.0, &x, &zero[..11], &params, &zero_data, &g).unwrap();
        assert_eq!(out[11 + 5], -201.0);
        assert_eq!(out[11 + 4], 100.0);
        assert_eq!(out[11 + 6], 100.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..22).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = rhs(0.4, &x, &x[..11], &params, &data, &g).unwrap();
        assert_eq!(&out[..11], &x[11..]);
        assert!(rhs(0.0, &x[..21], &x[..11], &params, &data, &g).is_err());
    }

    #[test]
    fn matrix_free_matches_dense() {
        let (params, data) = section5();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for closure in [BoundaryClosure::Literal, BoundaryClosure::GhostPoint] {
            for n in [2, 3, 10, 40] {
                let g = grid(n, closure);
                let t = rng.gen_range(0.0..5.0);
                let m = assemble_system(t, &params, &data, &g);
                let system = SemiDiscreteSystem::new(&params, &data, &g).unwrap();
                let x: Vec<f64> = (0..2 * (n + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let (u, v) = x.split_at(n + 1);
                let a = m.a_tilde.to_dense();
                let b = m.b_tilde.to_dense();
                let f = nonlinear_forcing(t, u, &params, &data, &g).unwrap();
                let out = system.rhs(t, &x, u).unwrap();
                for i in 0..=n {
                    let au: f64 = (0..=n).map(|j| a[i][j] * u[j]).sum();
                    let bv: f64 = (0..=n).map(|j| b[i][j] * v[j]).sum();
                    let dense = au + bv + f[i];
                    let scale = a[i].iter().map(|e| e.abs()).sum::<f64>() + f[i].abs() + 1.0;
                    assert!((out[n + 1 + i] - dense).abs() <= 1e-13 * scale);
                }
                let dense_au: Vec<f64> = (0..=n).map(|i| (0..=n).map(|j| a[i][j] * u[j]).sum()).collect();
                let sparse_au = m.a_tilde.matvec(u);
                for (s, d) in sparse_au.iter().zip(&dense_au) {
                    assert!((s - d).abs() <= 1e-13 * d.abs().max(1.0) * (n * n) as f64);
                }
            }
        }
    }

    #[test]
    fn stacked_round_trip() {
        let s = SemiDiscreteState {
            t: 1.5,
            u: vec![1.0, 2.0, 3.0],
            v: vec![-1.0, 0.5, 0.0],
        };
        assert_eq!(SemiDiscreteState::from_stacked(1.5, &s.stacked()), s);
        assert_eq!(s.sup_u(), 3.0);
        let mut bad = s.clone();
        bad.v[1] = f64::NAN;
        assert_eq!(bad.sup_u(), f64::INFINITY);
    }
}
