//! Uniform meshes, the discrete function spaces and the difference operators.
//!
//! Nodal functions are stored over the full index range `0..=J+1`. Members of
//! the zero-boundary space ([`InteriorGridFunction`]) carry their two zero
//! endpoints explicitly; every constructor overwrites them with `0.0`.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[x_a, x_b]` into `J + 1` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    x_a: f64,
    x_b: f64,
    interior: usize,
    h: f64,
}

impl Mesh {
    /// Builds the mesh with `interior` (= `J`) interior nodes; `h = L / (J + 1)`.
    pub fn new(x_a: f64, x_b: f64, interior: usize) -> Result<Self> {
        if !(x_a.is_finite() && x_b.is_finite()) {
            return Err(Error::invalid("x_a/x_b", "endpoints must be finite"));
        }
        if x_b <= x_a {
            return Err(Error::invalid("x_b", format!("x_b = {x_b} must exceed x_a = {x_a}")));
        }
        if interior == 0 {
            return Err(Error::invalid("J", "at least one interior node is required"));
        }
        let h = (x_b - x_a) / (interior + 1) as f64;
        Ok(Self { x_a, x_b, interior, h })
    }

    /// Mesh on `[0, 1]`.
    pub fn unit(interior: usize) -> Result<Self> {
        Self::new(0.0, 1.0, interior)
    }

    pub fn x_a(&self) -> f64 {
        self.x_a
    }

    pub fn x_b(&self) -> f64 {
        self.x_b
    }

    /// Number of interior nodes `J`.
    pub fn interior(&self) -> usize {
        self.interior
    }

    /// Total node count `J + 2`.
    pub fn nodes_len(&self) -> usize {
        self.interior + 2
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Domain length `L = x_b − x_a`.
    pub fn length(&self) -> f64 {
        self.x_b - self.x_a
    }

    /// Node `x_j`; the two endpoints are returned as stored, not recomputed.
    pub fn node(&self, j: usize) -> f64 {
        if j == 0 {
            self.x_a
        } else if j == self.interior + 1 {
            self.x_b
        } else {
            self.x_a + j as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nodes_len()).map(|j| self.node(j)).collect()
    }

    /// Same mesh with `J + 1` doubled (mesh width halved).
    pub fn refined(&self) -> Self {
        let interior = 2 * (self.interior + 1) - 1;
        Self { interior, h: self.length() / (interior + 1) as f64, ..*self }
    }

    pub(crate) fn check_nodal(&self, len: usize) -> Result<()> {
        if len != self.nodes_len() {
            return Err(Error::DimensionMismatch { expected: self.nodes_len(), found: len });
        }
        Ok(())
    }

    pub(crate) fn check_staggered(&self, len: usize) -> Result<()> {
        if len != self.interior + 1 {
            return Err(Error::DimensionMismatch { expected: self.interior + 1, found: len });
        }
        Ok(())
    }
}

/// Uniform partition of `[0, T]` into `N` steps of size `τ = T / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
    tau: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::invalid("T", format!("final time must be positive, got {t_final}")));
        }
        if steps == 0 {
            return Err(Error::invalid("N", "at least one time step is required"));
        }
        Ok(Self { t_final, steps, tau: t_final / steps as f64 })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `t_n = n τ`.
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    /// `t^{n+1/2} = t_n + τ/2`.
    pub fn half_time(&self, n: usize) -> f64 {
        self.time(n) + 0.5 * self.tau
    }

    /// `t^{1/4} = τ/4`.
    pub fn quarter_time(&self) -> f64 {
        0.25 * self.tau
    }

    /// Same horizon with twice as many steps.
    pub fn refined(&self) -> Self {
        let steps = 2 * self.steps;
        Self { steps, tau: self.t_final / steps as f64, ..*self }
    }
}

/// Member of `X_h`: nodal values `v_0 .. v_{J+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction(Vec<f64>);

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self(vec![0.0; mesh.nodes_len()])
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self(vec![c; mesh.nodes_len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Nodewise `q(v_j)`.
    pub fn map(&self, q: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| q(v)).collect())
    }

    /// Drops the endpoint values, giving the member of `X°_h` that agrees in the interior.
    pub fn to_interior(&self) -> InteriorGridFunction {
        InteriorGridFunction::new(self.0.clone())
    }

    /// Largest `|v_j|` over all nodes.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }
}

impl AsRef<[f64]> for GridFunction {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for GridFunction {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

/// Member of `X°_h`: nodal values with `v_0 = v_{J+1} = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorGridFunction(Vec<f64>);

impl InteriorGridFunction {
    /// Takes full-length nodal values and zeroes both endpoints.
    ///
    /// # Panics
    /// If fewer than two values are supplied.
    pub fn new(mut values: Vec<f64>) -> Self {
        assert!(values.len() >= 2, "a nodal function needs both endpoints");
        let last = values.len() - 1;
        values[0] = 0.0;
        values[last] = 0.0;
        Self(values)
    }

    /// Wraps the `J` interior values `v_1 .. v_J`.
    pub fn from_interior(interior: &[f64]) -> Self {
        let mut values = Vec::with_capacity(interior.len() + 2);
        values.push(0.0);
        values.extend_from_slice(interior);
        values.push(0.0);
        Self(values)
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self(vec![0.0; mesh.nodes_len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// The interior values `v_1 .. v_J`.
    pub fn interior(&self) -> &[f64] {
        &self.0[1..self.0.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_grid(self) -> GridFunction {
        GridFunction(self.0)
    }

    pub fn to_grid(&self) -> GridFunction {
        GridFunction(self.0.clone())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        check_same(self.len(), other.len())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(&x, &y)| a * x + b * y).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(self.0.iter().map(|&x| a * x).collect())
    }

    /// Nodewise product with any nodal function; stays in `X°_h`.
    pub fn hadamard(&self, w: &impl AsRef<[f64]>) -> Result<Self> {
        let w = w.as_ref();
        check_same(self.len(), w.len())?;
        Ok(Self::new(self.0.iter().zip(w).map(|(&a, &b)| a * b).collect()))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }
}

impl AsRef<[f64]> for InteriorGridFunction {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for InteriorGridFunction {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

impl From<InteriorGridFunction> for GridFunction {
    fn from(v: InteriorGridFunction) -> Self {
        v.into_grid()
    }
}

/// Member of `S_h`: values `z_0 .. z_J` attached to the cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaggeredFunction(Vec<f64>);

impl StaggeredFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for StaggeredFunction {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for StaggeredFunction {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

fn check_same(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Discrete Laplacian `Δ_h v_j = (v_{j−1} − 2 v_j + v_{j+1}) / h²` for `j = 1..J`.
pub fn laplacian(v: &InteriorGridFunction, mesh: &Mesh) -> Result<InteriorGridFunction> {
    mesh.check_nodal(v.len())?;
    let inv_h2 = 1.0 / (mesh.h() * mesh.h());
    let x = v.values();
    let mut out = vec![0.0; x.len()];
    for j in 1..x.len() - 1 {
        out[j] = (x[j - 1] - 2.0 * x[j] + x[j + 1]) * inv_h2;
    }
    Ok(InteriorGridFunction(out))
}

/// Forward difference `δ_h v_j = (v_{j+1} − v_j) / h` for `j = 0..J`.
pub fn forward_difference(v: &impl AsRef<[f64]>, mesh: &Mesh) -> Result<StaggeredFunction> {
    let v = v.as_ref();
    mesh.check_nodal(v.len())?;
    let inv_h = 1.0 / mesh.h();
    Ok(StaggeredFunction(v.windows(2).map(|w| (w[1] - w[0]) * inv_h).collect()))
}

/// Nodewise product `(v ⊗ w)_j = v_j w_j`.
pub fn hadamard(v: &impl AsRef<[f64]>, w: &impl AsRef<[f64]>) -> Result<GridFunction> {
    let (v, w) = (v.as_ref(), w.as_ref());
    check_same(v.len(), w.len())?;
    Ok(GridFunction(v.iter().zip(w).map(|(a, b)| a * b).collect()))
}

/// Nodal interpolant `I_h z`.
pub fn sample(z: impl Fn(f64) -> f64, mesh: &Mesh) -> GridFunction {
    GridFunction((0..mesh.nodes_len()).map(|j| z(mesh.node(j))).collect())
}

/// Zero-boundary interpolant `I°_h z`: interior samples, endpoints forced to zero.
pub fn sample_interior(z: impl Fn(f64) -> f64, mesh: &Mesh) -> InteriorGridFunction {
    let mut values = vec![0.0; mesh.nodes_len()];
    for (j, v) in values.iter_mut().enumerate().take(mesh.interior() + 1).skip(1) {
        *v = z(mesh.node(j));
    }
    InteriorGridFunction(values)
}

/// Nodewise composition `(q(w))_j = q(w¹_j, …, w^ℓ_j)`.
pub fn compose(q: impl Fn(&[f64]) -> f64, ws: &[&[f64]]) -> Result<GridFunction> {
    let Some(first) = ws.first() else {
        return Err(Error::invalid("w", "composition needs at least one argument"));
    };
    let len = first.len();
    for w in ws {
        check_same(len, w.len())?;
    }
    let mut args = vec![0.0; ws.len()];
    let values = (0..len)
        .map(|j| {
            for (a, w) in args.iter_mut().zip(ws) {
                *a = w[j];
            }
            q(&args)
        })
        .collect();
    Ok(GridFunction(values))
}
