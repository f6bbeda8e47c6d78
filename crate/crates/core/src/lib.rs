//! Relaxation finite difference schemes for the one-dimensional semilinear
//! heat equation
//!
//! ```text
//! u_t = u_xx + g(u) u + f   on [0, T] x [x_a, x_b],   u(t, x_a) = u(t, x_b) = 0
//! ```
//!
//! The time stepper is the linearly implicit relaxation scheme: an auxiliary
//! sequence `Φ^{n+1/2}` approximates `g(u)` at half-integer times through the
//! reflection `Φ^{n+1/2} = 2 g(U^n) − Φ^{n−1/2}`, so every step costs a single
//! tridiagonal solve. Space is discretized with the central second difference.
//!
//! Module map:
//!
//! - [`grid`]: meshes, discrete function spaces and difference operators
//! - [`norms`]: discrete inner products, norms and the `H¹` seminorm
//! - [`trisolve`]: per-step operator assembly and the Thomas algorithm
//! - [`mollifier`]: the odd C³ cutoff `n_δ` used by the mollified scheme
//! - [`problems`]: problem data, manufactured solutions, consistency probes
//! - [`scheme`]: BRFD / MBRFD steppers and a Crank–Nicolson/Newton reference
//! - [`convergence`]: error measurement, refinement studies, order fits
//! - [`verify`]: the built-in invariant battery

pub mod convergence;
pub mod error;
pub mod grid;
pub mod mollifier;
pub mod norms;
pub mod problems;
pub mod scheme;
pub mod trisolve;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{GridFunction, InteriorGridFunction, Mesh, StaggeredFunction, TimeGrid};
pub use mollifier::Mollifier;
pub use problems::{ExactSolution, Problem};
pub use scheme::{SchemeState, SchemeVariant, Stepper, Trajectory};
