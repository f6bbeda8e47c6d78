//! The odd C³ cutoff `n_δ`.
//!
//! For `x ≥ 0`:
//!
//! ```text
//! n_δ(x) = x           on [0, δ]
//!        = p_δ(x)      on (δ, 2δ]
//!        = 2δ          for x > 2δ
//! ```
//!
//! extended to negative `x` by oddness. `p_δ` is the degree-7 Hermite bridge
//! matching value and first three derivatives of the two outer pieces at `δ`
//! and `2δ`. It obeys `p_δ(x) = δ p_1(x/δ)`, so only `p_1` is ever solved for.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, InteriorGridFunction};

/// Coefficients of `p_1(1 + s) = Σ_k c_k s^k`, `s ∈ [0, 1]`.
fn bridge_coefficients() -> &'static [f64; 8] {
    static COEFFS: OnceLock<[f64; 8]> = OnceLock::new();
    COEFFS.get_or_init(solve_bridge)
}

/// Sets up and solves the eight Hermite conditions for `p_1` in the shifted
/// variable `s = y − 1`: at `s = 0` value 1, slope 1, curvature and third
/// derivative 0; at `s = 1` value 2 and derivatives 1..=3 zero.
fn solve_bridge() -> [f64; 8] {
    let conditions: [(f64, usize, f64); 8] = [
        (0.0, 0, 1.0),
        (0.0, 1, 1.0),
        (0.0, 2, 0.0),
        (0.0, 3, 0.0),
        (1.0, 0, 2.0),
        (1.0, 1, 0.0),
        (1.0, 2, 0.0),
        (1.0, 3, 0.0),
    ];
    let mut a = [[0.0_f64; 9]; 8];
    for (row, &(s, order, value)) in a.iter_mut().zip(&conditions) {
        for (k, entry) in row.iter_mut().enumerate().take(8).skip(order) {
            *entry = falling_factorial(k, order) * s.powi((k - order) as i32);
        }
        row[8] = value;
    }
    // Gaussian elimination with partial pivoting on the augmented matrix.
    for col in 0..8 {
        let p = (col..8)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, p);
        for r in col + 1..8 {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..9 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut c = [0.0_f64; 8];
    for r in (0..8).rev() {
        let tail: f64 = (r + 1..8).map(|k| a[r][k] * c[k]).sum();
        c[r] = (a[r][8] - tail) / a[r][r];
    }
    c
}

fn falling_factorial(k: usize, m: usize) -> f64 {
    (0..m).map(|i| (k - i) as f64).product()
}

/// Horner evaluation of the `order`-th derivative of `Σ c_k s^k`.
fn horner(coeffs: &[f64; 8], s: f64, order: usize) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(order)
        .rev()
        .fold(0.0, |acc, (k, &c)| acc * s + c * falling_factorial(k, order))
}

/// `n_δ` for a fixed `δ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    delta: f64,
    coeffs: [f64; 8],
}

impl Mollifier {
    pub fn build(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
        }
        Ok(Self { delta, coeffs: *bridge_coefficients() })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Monomial coefficients of `p_1` in the shifted variable `s = x/δ − 1`.
    pub fn coefficients(&self) -> &[f64; 8] {
        &self.coeffs
    }

    /// `sup |n_δ| = 2δ`.
    pub fn sup_abs(&self) -> f64 {
        2.0 * self.delta
    }

    /// The bridge `p_δ` (or its derivative) at `x`, without the piecewise logic.
    pub fn bridge(&self, x: f64, order: usize) -> f64 {
        let s = x / self.delta - 1.0;
        self.delta.powi(1 - order as i32) * horner(&self.coeffs, s, order)
    }

    /// `n_δ^{(order)}(x)` for `order ∈ 0..=3`.
    ///
    /// On `[−δ, δ]` the value is `x` itself. At the knots `|x| = δ, 2δ`,
    /// derivatives of order ≥ 1 are taken from the polynomial side.
    ///
    /// # Panics
    /// If `order > 3`.
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        assert!(order <= 3, "n_δ is only C³; order {order} requested");
        let d = self.delta;
        let a = x.abs();
        // odd function: even-order derivatives are odd, odd-order ones even
        let parity = if order.is_multiple_of(2) && x < 0.0 { -1.0 } else { 1.0 };
        if order == 0 {
            if a <= d {
                return x;
            }
            if a <= 2.0 * d {
                // p_1 ≤ 2 on the bridge; clamp the rounding excess near s = 1
                return parity * (d * horner(&self.coeffs, a / d - 1.0, 0)).min(2.0 * d);
            }
            return parity * 2.0 * d;
        }
        if a < d {
            return if order == 1 { 1.0 } else { 0.0 };
        }
        if a <= 2.0 * d {
            return parity * self.bridge(a, order);
        }
        0.0
    }

    /// Nodewise `n_δ(v)`.
    pub fn apply(&self, v: &GridFunction) -> GridFunction {
        v.map(|x| self.eval(x, 0))
    }

    /// Nodewise `n_δ(v)`; zero endpoints are kept since `n_δ(0) = 0`.
    pub fn apply_interior(&self, v: &InteriorGridFunction) -> InteriorGridFunction {
        InteriorGridFunction::new(v.values().iter().map(|&x| self.eval(x, 0)).collect())
    }
}
