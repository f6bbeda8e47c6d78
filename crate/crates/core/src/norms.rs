//! Discrete inner products and norms.
//!
//! | symbol            | function              | space  |
//! |-------------------|-----------------------|--------|
//! | `(v, z)_{0,h}`    | [`inner_interior`]    | `X°_h` |
//! | `‖v‖_{0,h}`       | [`norm_l2`]           | `X°_h` |
//! | `|v|_{∞,h}`       | [`norm_inf`]          | `X_h`  |
//! | `|v|_{1,h}`       | [`seminorm_h1`]       | `X_h`  |
//! | `((z, w))_{0,h}`  | [`inner_staggered`]   | `S_h`  |
//! | `|||z|||_{0,h}`   | [`norm_l2_staggered`] | `S_h`  |
//! | `|||z|||_{∞,h}`   | [`norm_inf_staggered`]| `S_h`  |

use crate::error::{Error, Result};
use crate::grid::{forward_difference, InteriorGridFunction, Mesh, StaggeredFunction};

/// Above this many terms sums switch to compensated (Neumaier) accumulation.
pub const COMPENSATED_THRESHOLD: usize = 10_000;

/// Index-order sum of `terms`, compensated when there are more than
/// [`COMPENSATED_THRESHOLD`] of them.
pub fn accumulate(terms: impl ExactSizeIterator<Item = f64>) -> f64 {
    if terms.len() <= COMPENSATED_THRESHOLD {
        return terms.sum();
    }
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// `(v, z)_{0,h} = h Σ_{j=1}^{J} v_j z_j`.
pub fn inner_interior(v: &InteriorGridFunction, z: &InteriorGridFunction, mesh: &Mesh) -> Result<f64> {
    mesh.check_nodal(v.len())?;
    mesh.check_nodal(z.len())?;
    let terms = v.interior().iter().zip(z.interior()).map(|(a, b)| a * b);
    Ok(mesh.h() * accumulate(terms))
}

/// `‖v‖_{0,h}`.
pub fn norm_l2(v: &InteriorGridFunction, mesh: &Mesh) -> Result<f64> {
    Ok(inner_interior(v, v, mesh)?.sqrt())
}

/// `|v|_{∞,h}`, scanned over all `J + 2` nodes (the endpoints of an
/// [`InteriorGridFunction`] are zero and never change the result).
pub fn norm_inf(v: &impl AsRef<[f64]>, mesh: &Mesh) -> Result<f64> {
    let v = v.as_ref();
    mesh.check_nodal(v.len())?;
    Ok(v.iter().fold(0.0_f64, |m, x| m.max(x.abs())))
}

/// `|v|_{1,h} = |||δ_h v|||_{0,h}`.
pub fn seminorm_h1(v: &impl AsRef<[f64]>, mesh: &Mesh) -> Result<f64> {
    let d = forward_difference(v, mesh)?;
    norm_l2_staggered(&d, mesh)
}

/// `((z, w))_{0,h} = h Σ_{j=0}^{J} z_j w_j`.
pub fn inner_staggered(z: &StaggeredFunction, w: &StaggeredFunction, mesh: &Mesh) -> Result<f64> {
    mesh.check_staggered(z.len())?;
    mesh.check_staggered(w.len())?;
    if z.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), found: w.len() });
    }
    let terms = z.values().iter().zip(w.values()).map(|(a, b)| a * b);
    Ok(mesh.h() * accumulate(terms))
}

pub fn norm_l2_staggered(z: &StaggeredFunction, mesh: &Mesh) -> Result<f64> {
    Ok(inner_staggered(z, z, mesh)?.sqrt())
}

/// `|||z|||_{∞,h} = max_{0≤j≤J} |z_j|`.
pub fn norm_inf_staggered(z: &StaggeredFunction, mesh: &Mesh) -> Result<f64> {
    mesh.check_staggered(z.len())?;
    Ok(z.values().iter().fold(0.0_f64, |m, x| m.max(x.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFunction;
    use approx::assert_relative_eq;

    fn bump() -> (InteriorGridFunction, Mesh) {
        (InteriorGridFunction::from_interior(&[1.0]), Mesh::unit(1).unwrap())
    }

    #[test]
    fn hand_values() {
        let (v, m) = bump();
        assert_eq!(inner_interior(&v, &v, &m).unwrap(), 0.5);
        assert_relative_eq!(norm_l2(&v, &m).unwrap(), 0.5_f64.sqrt(), max_relative = 1e-15);
        assert_eq!(norm_inf(&v, &m).unwrap(), 1.0);
        assert_eq!(seminorm_h1(&v, &m).unwrap(), 2.0);
    }

    #[test]
    fn zero_function() {
        let m = Mesh::unit(7).unwrap();
        let z = InteriorGridFunction::zeros(&m);
        assert_eq!(norm_l2(&z, &m).unwrap(), 0.0);
        assert_eq!(norm_inf(&z, &m).unwrap(), 0.0);
        assert_eq!(seminorm_h1(&z, &m).unwrap(), 0.0);
        let s = StaggeredFunction::new(vec![0.0; 8]);
        assert_eq!(norm_l2_staggered(&s, &m).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_support_is_orthogonal() {
        let m = Mesh::unit(4).unwrap();
        let v = InteriorGridFunction::from_interior(&[1.0, 2.0, 0.0, 0.0]);
        let z = InteriorGridFunction::from_interior(&[0.0, 0.0, 5.0, -1.0]);
        assert_eq!(inner_interior(&v, &z, &m).unwrap(), 0.0);
    }

    #[test]
    fn staggered_hand_values() {
        let m = Mesh::unit(1).unwrap();
        let ones = StaggeredFunction::new(vec![1.0, 1.0]);
        assert_eq!(inner_staggered(&ones, &ones, &m).unwrap(), 1.0);
        assert_eq!(norm_inf_staggered(&StaggeredFunction::new(vec![-3.0, 2.0]), &m).unwrap(), 3.0);
    }

    #[test]
    fn endpoints_count_for_max_norm_on_xh() {
        let m = Mesh::unit(2).unwrap();
        let v = GridFunction::new(vec![4.0, 1.0, 1.0, 0.0]);
        assert_eq!(norm_inf(&v, &m).unwrap(), 4.0);
    }

    #[test]
    fn dimension_errors() {
        let m = Mesh::unit(3).unwrap();
        let v = InteriorGridFunction::from_interior(&[1.0, 2.0]);
        assert!(inner_interior(&v, &v, &m).is_err());
        assert!(norm_inf(&v, &m).is_err());
        assert!(seminorm_h1(&v, &m).is_err());
        let s = StaggeredFunction::new(vec![1.0; 3]);
        assert!(inner_staggered(&s, &s, &m).is_err());
    }

    #[test]
    fn compensated_sum_is_accurate() {
        // 1 followed by many tiny terms that plain summation loses.
        let n = 20_001;
        let terms: Vec<f64> = std::iter::once(1.0).chain(std::iter::repeat_n(1e-17, n - 1)).collect();
        let s = accumulate(terms.iter().copied());
        assert_relative_eq!(s, 1.0 + 2e-13, max_relative = 1e-15);
    }
}
