//! The per-step linear operator and its tridiagonal solve.
//!
//! Every implicit stage of the schemes has the form
//!
//! ```text
//! v − (dt/2) Δ_h v − (dt/2) φ ⊗ v = rhs,    v ∈ X°_h
//! ```
//!
//! with `dt = τ/2` for the opening half step and `dt = τ` afterwards. This is
//! the well-posedness operator `2v − ετΔ_h v − ετ[n_δ(ζ) ⊗ v]` divided by two,
//! so residual checks use a leading coefficient of one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{InteriorGridFunction, Mesh};

/// Pivots smaller than this fraction of `max |diag|` are treated as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Tridiagonal operator acting on the interior unknowns `v_1 .. v_J`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::invalid("diag", "empty system"));
        }
        for band in [&lower, &upper] {
            if band.len() != n - 1 {
                return Err(Error::DimensionMismatch { expected: n - 1, found: band.len() });
            }
        }
        Ok(Self { lower, diag, upper })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Matrix–vector product.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.len() });
        }
        Ok((0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect())
    }

    /// Thomas algorithm (no pivoting).
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: rhs.len() });
        }
        let scale = self.diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let threshold = PIVOT_TOLERANCE * scale;

        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut pivot = self.diag[0];
        if !(pivot.abs() > threshold) {
            return Err(Error::SingularSystem { index: 0, pivot });
        }
        if n > 1 {
            c[0] = self.upper[0] / pivot;
        }
        x[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if !(pivot.abs() > threshold) {
                return Err(Error::SingularSystem { index: i, pivot });
            }
            if i + 1 < n {
                c[i] = self.upper[i] / pivot;
            }
            x[i] = (rhs[i] - self.lower[i - 1] * x[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(x)
    }

    /// Solves for the interior values of a zero-boundary grid function.
    pub fn solve_interior(&self, rhs: &InteriorGridFunction) -> Result<InteriorGridFunction> {
        let x = self.solve(rhs.interior())?;
        Ok(InteriorGridFunction::from_interior(&x))
    }

    /// Applies the operator to the interior values of `v`.
    pub fn apply_interior(&self, v: &InteriorGridFunction) -> Result<InteriorGridFunction> {
        Ok(InteriorGridFunction::from_interior(&self.apply(v.interior())?))
    }
}

/// Matrix of `v ↦ v − (dt/2) Δ_h v − (dt/2) φ ⊗ v` on the interior nodes.
///
/// `diag_j = 1 + dt/h² − (dt/2) φ_j`, off-diagonals `−dt/(2h²)`. Only the
/// interior entries of `phi` are read.
pub fn assemble_step_operator(mesh: &Mesh, dt: f64, phi: &impl AsRef<[f64]>) -> Result<Tridiagonal> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("step must be positive, got {dt}")));
    }
    let phi = phi.as_ref();
    mesh.check_nodal(phi.len())?;
    let j = mesh.interior();
    let r = dt / (mesh.h() * mesh.h());
    let diag = phi[1..=j].iter().map(|p| 1.0 + r - 0.5 * dt * p).collect();
    let off = vec![-0.5 * r; j - 1];
    Tridiagonal::new(off.clone(), diag, off)
}

/// Outcome of the well-posedness test `dt · (phi_bound / 4) ≤ 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCondition {
    pub passed: bool,
    /// `1/2 − dt · phi_bound / 4`; nonnegative exactly when `passed`.
    pub margin: f64,
}

/// Checks `dt · C ≤ 1/2` with `C = phi_bound / 4`, where `phi_bound` bounds
/// the potential in the max norm (`2δ` for the mollified scheme).
///
/// A failed check does not mean the system is singular, only that
/// coercivity is no longer guaranteed.
pub fn check_step_condition(dt: f64, phi_bound: f64) -> Result<StepCondition> {
    if !(dt >= 0.0) {
        return Err(Error::invalid("dt", format!("must be nonnegative, got {dt}")));
    }
    if !(phi_bound >= 0.0) {
        return Err(Error::invalid("phi_bound", format!("must be nonnegative, got {phi_bound}")));
    }
    let margin = 0.5 - dt * (0.25 * phi_bound);
    Ok(StepCondition { passed: margin >= 0.0, margin })
}
