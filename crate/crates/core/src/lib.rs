//! Method-of-lines solver for the damped nonlinear wave equation
//!
//! ```text
//! u_tt - u_xx + u + λ u_t = |u|^{p-2} u + f(x, t)   on (0, 1)
//! ```
//!
//! with nonlinear boundary conditions that couple the two endpoints, together
//! with the energy functionals used to study blow-up and exponential decay.
//!
//! * [`model`]: parameters, data and the admissibility checks.
//! * [`discretization`]: the semi-discrete system `X' = A(t) X + F(t, U)`.
//! * [`solver`]: fixed-step RK4 time stepping with Picard linearization.
//! * [`diagnostics`]: energies and decay/blow-up constants on discrete states.
//! * [`verification`]: the manufactured solution `e^{x-t}` and convergence studies.

// `!(x > 0.0)` is used throughout to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod expr;
pub mod model;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
pub use expr::{Expr, ScalarFn, Table, Var};
pub use model::{Mode, ProblemData, ProblemParameters, SourceTerms};
