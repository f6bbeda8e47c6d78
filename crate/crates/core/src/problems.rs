//! Problem data, manufactured solutions and consistency residual probes.
//!
//! The probes insert the exact solution into the discrete defining relations
//! and return the defect, computed by rearranging each relation:
//!
//! - [`residual_half_node`]: `r^{1/4}`, the opening half step in time
//! - [`residual_time_node`]: `r^{n+1/2}`, a full step in time
//! - [`residual_space`]: `r − s`, the spatial truncation part
//! - [`residual_midpoint`]: `r^n`, the averaging defect of `g(u)`
//!
//! [`elliptic_projection`] computes `R_h v` from samples of `v''`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{laplacian, sample, sample_interior, GridFunction, InteriorGridFunction, Mesh, TimeGrid};
use crate::trisolve::Tridiagonal;

/// Scalar nonlinearity `R → R`.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Space–time field `(t, x) ↦ value`.
pub type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Function of `x` alone.
pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tolerance for `u0(x_a) = u0(x_b) = 0`.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-12;

/// Names accepted by [`catalog`].
pub const CATALOG: [&str; 4] = ["linear_heat_mode_k", "mms_exp_sine_gsin", "mms_exp_sine_gu", "zero"];

/// Exact solution with the derivatives the probes need.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: FieldFn,
    pub u_t: FieldFn,
    pub u_x: FieldFn,
    pub u_xx: FieldFn,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactSolution { .. }")
    }
}

/// `u_t = u_xx + g(u) u + f` with homogeneous Dirichlet data and `u(0, ·) = u0`.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub g: ScalarFn,
    pub g_prime: ScalarFn,
    pub f: FieldFn,
    pub u0: SpaceFn,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn exact(&self) -> Result<&ExactSolution> {
        self.exact.as_ref().ok_or(Error::MissingExactSolution)
    }

    /// Verifies `u0(x_a) = u0(x_b) = 0`.
    pub fn check_compatibility(&self, mesh: &Mesh) -> Result<()> {
        for x in [mesh.x_a(), mesh.x_b()] {
            let value = (self.u0)(x);
            if !(value.abs() <= COMPATIBILITY_TOLERANCE) {
                return Err(Error::IncompatibleInitialData { x, value });
            }
        }
        Ok(())
    }

    /// `I°_h f(t, ·)`.
    pub fn forcing(&self, t: f64, mesh: &Mesh) -> InteriorGridFunction {
        sample_interior(|x| (self.f)(t, x), mesh)
    }

    /// `g(w)` nodewise.
    pub fn g_of(&self, w: &impl AsRef<[f64]>) -> GridFunction {
        GridFunction::new(w.as_ref().iter().map(|&v| (self.g)(v)).collect())
    }
}

/// Closes the PDE around `exact`: `f := u_t − u_xx − g(u) u`, `u0 := u(0, ·)`.
pub fn manufacture(name: impl Into<String>, exact: ExactSolution, g: ScalarFn, g_prime: ScalarFn) -> Problem {
    let f: FieldFn = {
        let (u, u_t, u_xx, g) = (exact.u.clone(), exact.u_t.clone(), exact.u_xx.clone(), g.clone());
        Arc::new(move |t, x| {
            let v = u(t, x);
            u_t(t, x) - u_xx(t, x) - g(v) * v
        })
    };
    let u0: SpaceFn = {
        let u = exact.u.clone();
        Arc::new(move |x| u(0.0, x))
    };
    Problem { name: name.into(), g, g_prime, f, u0, exact: Some(exact) }
}

/// `u(t, x) = e^{−rate·t} sin(k π (x − x_a) / L)`.
pub fn decaying_sine(x_a: f64, x_b: f64, k: usize, rate: f64) -> ExactSolution {
    let w = k as f64 * PI / (x_b - x_a);
    ExactSolution {
        u: Arc::new(move |t, x| (-rate * t).exp() * (w * (x - x_a)).sin()),
        u_t: Arc::new(move |t, x| -rate * (-rate * t).exp() * (w * (x - x_a)).sin()),
        u_x: Arc::new(move |t, x| w * (-rate * t).exp() * (w * (x - x_a)).cos()),
        u_xx: Arc::new(move |t, x| -w * w * (-rate * t).exp() * (w * (x - x_a)).sin()),
    }
}

/// Time-independent `u(x) = sin(k π (x − x_a) / L)`.
pub fn stationary_sine(x_a: f64, x_b: f64, k: usize) -> ExactSolution {
    decaying_sine(x_a, x_b, k, 0.0)
}

/// Looks up a built-in problem on `[x_a, x_b]`.
///
/// `linear_heat_mode_k` uses `mode` as `k`; `linear_heat_mode_<k>` is also
/// accepted. The manufactured problems use `u = e^{−t} sin(π (x − x_a)/L)`.
pub fn catalog(name: &str, x_a: f64, x_b: f64, mode: usize) -> Result<Problem> {
    if x_b <= x_a {
        return Err(Error::invalid("x_b", format!("x_b = {x_b} must exceed x_a = {x_a}")));
    }
    let linear_mode = match name {
        "linear_heat_mode_k" => Some(mode),
        _ => name.strip_prefix("linear_heat_mode_").and_then(|k| k.parse().ok()),
    };
    if let Some(k) = linear_mode {
        if k == 0 {
            return Err(Error::invalid("mode", "mode number must be at least 1"));
        }
        let lambda = (k as f64 * PI / (x_b - x_a)).powi(2);
        let exact = decaying_sine(x_a, x_b, k, lambda);
        let zero: ScalarFn = Arc::new(|_| 0.0);
        return Ok(manufacture(format!("linear_heat_mode_{k}"), exact, zero.clone(), zero));
    }
    match name {
        "mms_exp_sine_gsin" => Ok(manufacture(
            name,
            decaying_sine(x_a, x_b, 1, 1.0),
            Arc::new(f64::sin),
            Arc::new(f64::cos),
        )),
        "mms_exp_sine_gu" => Ok(manufacture(
            name,
            decaying_sine(x_a, x_b, 1, 1.0),
            Arc::new(|u| u),
            Arc::new(|_| 1.0),
        )),
        "zero" => {
            let zero: FieldFn = Arc::new(|_, _| 0.0);
            Ok(Problem {
                name: name.into(),
                g: Arc::new(f64::sin),
                g_prime: Arc::new(f64::cos),
                f: zero.clone(),
                u0: Arc::new(|_| 0.0),
                exact: Some(ExactSolution { u: zero.clone(), u_t: zero.clone(), u_x: zero.clone(), u_xx: zero }),
            })
        }
        _ => Err(Error::UnknownProblem(name.into())),
    }
}

fn field_at(field: &FieldFn, t: f64, mesh: &Mesh) -> GridFunction {
    sample(|x| field(t, x), mesh)
}

fn average(a: &GridFunction, b: &GridFunction) -> Vec<f64> {
    a.values().iter().zip(b.values()).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// Rearranged defect of
/// `(u^b − u^a)/dt = I_h[avg u_xx] + φ ⊗ avg u + I_h[avg f] + r`
/// over the time pair `(t_a, t_b)`, with `φ` supplied by the caller.
fn time_defect(p: &Problem, mesh: &Mesh, t_a: f64, t_b: f64, phi: &GridFunction) -> Result<GridFunction> {
    let ex = p.exact()?;
    let dt = t_b - t_a;
    let (ua, ub) = (field_at(&ex.u, t_a, mesh), field_at(&ex.u, t_b, mesh));
    let (la, lb) = (field_at(&ex.u_xx, t_a, mesh), field_at(&ex.u_xx, t_b, mesh));
    let (fa, fb) = (field_at(&p.f, t_a, mesh), field_at(&p.f, t_b, mesh));
    let mean_u = average(&ua, &ub);
    let mean_l = average(&la, &lb);
    let mean_f = average(&fa, &fb);
    let r = (0..mesh.nodes_len())
        .map(|j| (ub[j] - ua[j]) / dt - mean_l[j] - phi[j] * mean_u[j] - mean_f[j])
        .collect();
    Ok(GridFunction::new(r))
}

/// `r^{n+1/2}` before the endpoints are zeroed.
pub(crate) fn residual_time_node_raw(p: &Problem, mesh: &Mesh, tg: &TimeGrid, n: usize) -> Result<GridFunction> {
    let ex = p.exact()?;
    if n >= tg.steps() {
        return Err(Error::StepOutOfRange { index: n, lo: 0, hi: tg.steps() - 1 });
    }
    let mid = p.g_of(&field_at(&ex.u, tg.half_time(n), mesh));
    time_defect(p, mesh, tg.time(n), tg.time(n + 1), &mid)
}

/// `r^{n+1/2}` for `0 ≤ n ≤ N − 1`.
pub fn residual_time_node(p: &Problem, mesh: &Mesh, tg: &TimeGrid, n: usize) -> Result<InteriorGridFunction> {
    Ok(residual_time_node_raw(p, mesh, tg, n)?.to_interior())
}

pub(crate) fn residual_half_node_raw(p: &Problem, mesh: &Mesh, tg: &TimeGrid) -> Result<GridFunction> {
    let ex = p.exact()?;
    let frozen = p.g_of(&field_at(&ex.u, 0.0, mesh));
    time_defect(p, mesh, 0.0, tg.half_time(0), &frozen)
}

/// `r^{1/4}`: defect of the opening half step, where `g` is frozen at `u^0`.
pub fn residual_half_node(p: &Problem, mesh: &Mesh, tg: &TimeGrid) -> Result<InteriorGridFunction> {
    Ok(residual_half_node_raw(p, mesh, tg)?.to_interior())
}

/// Splitting `r^{1/4} = A − B − C − D` of the half-step defect.
///
/// `A` is the difference-quotient error, `B` the averaging error of `u_xx`,
/// `C` the error from freezing `g` at `u^0` together with the averaging of
/// `u`, and `D` the averaging error of `f`. `C` alone is first order in τ.
/// Only interior values are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfNodeParts {
    pub a: InteriorGridFunction,
    pub b: InteriorGridFunction,
    pub c: InteriorGridFunction,
    pub d: InteriorGridFunction,
}

impl HalfNodeParts {
    /// `A − B − C − D`.
    pub fn total(&self) -> InteriorGridFunction {
        let v = (0..self.a.len()).map(|j| self.a[j] - self.b[j] - self.c[j] - self.d[j]).collect();
        InteriorGridFunction::new(v)
    }
}

pub fn half_node_parts(p: &Problem, mesh: &Mesh, tg: &TimeGrid) -> Result<HalfNodeParts> {
    let ex = p.exact()?;
    let (t0, th, tq) = (0.0, tg.half_time(0), tg.quarter_time());
    let dt = th - t0;
    let u0 = field_at(&ex.u, t0, mesh);
    let uh = field_at(&ex.u, th, mesh);
    let uq = field_at(&ex.u, tq, mesh);
    let utq = field_at(&ex.u_t, tq, mesh);
    let (l0, lh, lq) = (field_at(&ex.u_xx, t0, mesh), field_at(&ex.u_xx, th, mesh), field_at(&ex.u_xx, tq, mesh));
    let (f0, fh, fq) = (field_at(&p.f, t0, mesh), field_at(&p.f, th, mesh), field_at(&p.f, tq, mesh));
    let (g0, gq) = (p.g_of(&u0), p.g_of(&uq));
    let n = mesh.nodes_len();
    let a = (0..n).map(|j| (uh[j] - u0[j]) / dt - utq[j]).collect();
    let b = (0..n).map(|j| 0.5 * (lh[j] + l0[j]) - lq[j]).collect();
    let c = (0..n)
        .map(|j| -(gq[j] - g0[j]) * uq[j] + g0[j] * (0.5 * (uh[j] + u0[j]) - uq[j]))
        .collect();
    let d = (0..n).map(|j| 0.5 * (fh[j] + f0[j]) - fq[j]).collect();
    Ok(HalfNodeParts {
        a: InteriorGridFunction::new(a),
        b: InteriorGridFunction::new(b),
        c: InteriorGridFunction::new(c),
        d: InteriorGridFunction::new(d),
    })
}

/// Time level of a spatial residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeLevel {
    /// The opening half step `(t_0, t^{1/2})`.
    Half,
    /// The full step `(t_n, t_{n+1})`.
    Step(usize),
}

/// `r − s = I°_h[avg u_xx] − Δ_h(avg u)`: the spatial truncation part.
pub fn residual_space(p: &Problem, mesh: &Mesh, tg: &TimeGrid, level: TimeLevel) -> Result<InteriorGridFunction> {
    let ex = p.exact()?;
    let (ta, tb) = match level {
        TimeLevel::Half => (0.0, tg.half_time(0)),
        TimeLevel::Step(n) if n < tg.steps() => (tg.time(n), tg.time(n + 1)),
        TimeLevel::Step(n) => return Err(Error::StepOutOfRange { index: n, lo: 0, hi: tg.steps() - 1 }),
    };
    let mean = |field: &FieldFn| sample_interior(|x| 0.5 * (field(ta, x) + field(tb, x)), mesh);
    let lap = laplacian(&mean(&ex.u), mesh)?;
    mean(&ex.u_xx).sub(&lap)
}

/// `r^n = (g(u^{n+1/2}) + g(u^{n−1/2}))/2 − g(u^n)` for `1 ≤ n ≤ N − 1`.
pub fn residual_midpoint(p: &Problem, mesh: &Mesh, tg: &TimeGrid, n: usize) -> Result<InteriorGridFunction> {
    let ex = p.exact()?;
    if n == 0 || n >= tg.steps() {
        return Err(Error::StepOutOfRange { index: n, lo: 1, hi: tg.steps().saturating_sub(1) });
    }
    let g_at = |t: f64| p.g_of(&field_at(&ex.u, t, mesh));
    let (gp, gm, gn) = (g_at(tg.half_time(n)), g_at(tg.half_time(n - 1)), g_at(tg.time(n)));
    let r = (0..mesh.nodes_len()).map(|j| 0.5 * (gp[j] + gm[j]) - gn[j]).collect();
    Ok(InteriorGridFunction::new(r))
}

/// Discrete elliptic projection: the `w ∈ X°_h` with `Δ_h w = I°_h(v'')`.
///
/// `−Δ_h` is positive definite on `X°_h`, so the system is always solvable.
pub fn elliptic_projection(v_xx: &InteriorGridFunction, mesh: &Mesh) -> Result<InteriorGridFunction> {
    mesh.check_nodal(v_xx.len())?;
    let j = mesh.interior();
    let inv_h2 = 1.0 / (mesh.h() * mesh.h());
    let t = Tridiagonal::new(vec![inv_h2; j - 1], vec![-2.0 * inv_h2; j], vec![inv_h2; j - 1])?;
    t.solve_interior(v_xx)
}

/// `R_h u(t, ·)` for an exact solution.
pub fn elliptic_projection_of(exact: &ExactSolution, t: f64, mesh: &Mesh) -> Result<InteriorGridFunction> {
    elliptic_projection(&sample_interior(|x| (exact.u_xx)(t, x), mesh), mesh)
}

// 8-point Gauss–Legendre rule on [0, 1].
const GAUSS_NODES: [f64; 8] = [
    0.019855071751231856,
    0.10166676129318664,
    0.2372337950418355,
    0.4082826787521751,
    0.591_717_321_247_825,
    0.7627662049581645,
    0.8983332387068134,
    0.9801449282487681,
];
const GAUSS_WEIGHTS: [f64; 8] = [
    0.05061426814518813,
    0.11119051722668724,
    0.15685332293894363,
    0.181_341_891_689_181,
    0.181_341_891_689_181,
    0.15685332293894363,
    0.11119051722668724,
    0.05061426814518813,
];

/// The fourth-derivative kernel of the projection defect,
/// `r^E(v)_j = ∫_0^1 [(1−y)³ v''''(x_j + h y) + y³ v''''(x_{j−1} + h y)] dy`,
/// so that `Δ_h(I°_h v) − I°_h(v'') = (h²/6) r^E(v)`.
pub fn elliptic_defect(v_xxxx: impl Fn(f64) -> f64, mesh: &Mesh) -> InteriorGridFunction {
    let h = mesh.h();
    let mut out = vec![0.0; mesh.nodes_len()];
    for (j, r) in out.iter_mut().enumerate().take(mesh.interior() + 1).skip(1) {
        let (xj, xm) = (mesh.node(j), mesh.node(j - 1));
        *r = GAUSS_NODES
            .iter()
            .zip(GAUSS_WEIGHTS)
            .map(|(&y, w)| w * ((1.0 - y).powi(3) * v_xxxx(xj + h * y) + y.powi(3) * v_xxxx(xm + h * y)))
            .sum();
    }
    InteriorGridFunction::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{norm_l2, seminorm_h1};

    fn quadratic_in_time() -> ExactSolution {
        // u = (1 − t) x (1 − x) on [0, 1]
        ExactSolution {
            u: Arc::new(|t, x| (1.0 - t) * x * (1.0 - x)),
            u_t: Arc::new(|_, x| -x * (1.0 - x)),
            u_x: Arc::new(|t, x| (1.0 - t) * (1.0 - 2.0 * x)),
            u_xx: Arc::new(|t, _| -2.0 * (1.0 - t)),
        }
    }

    #[test]
    fn manufactured_forcing_matches_hand_derivation() {
        let lin = manufacture("a", decaying_sine(0.0, 1.0, 1, 1.0), Arc::new(|_| 0.0), Arc::new(|_| 0.0));
        let gu = manufacture("b", decaying_sine(0.0, 1.0, 1, 1.0), Arc::new(|u| u), Arc::new(|_| 1.0));
        for i in 0..50 {
            for k in 0..50 {
                let (t, x) = (i as f64 / 49.0, k as f64 / 49.0);
                let s = (PI * x).sin();
                let expect = (-t).exp() * (PI * PI - 1.0) * s;
                assert!(((lin.f)(t, x) - expect).abs() < 1e-12);
                let expect_gu = expect - (-2.0 * t).exp() * s * s;
                assert!(((gu.f)(t, x) - expect_gu).abs() < 1e-12);
                // PDE residual by construction
                let ex = gu.exact.as_ref().unwrap();
                let u = (ex.u)(t, x);
                let res = (ex.u_t)(t, x) - (ex.u_xx)(t, x) - (gu.g)(u) * u - (gu.f)(t, x);
                assert!(res.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn catalog_lookup() {
        for name in CATALOG {
            let p = catalog(name, 0.0, 1.0, 2).unwrap();
            p.check_compatibility(&Mesh::unit(9).unwrap()).unwrap();
        }
        assert_eq!(catalog("linear_heat_mode_3", 0.0, 2.0, 1).unwrap().name, "linear_heat_mode_3");
        assert!(matches!(catalog("nope", 0.0, 1.0, 1), Err(Error::UnknownProblem(_))));
        assert!(catalog("linear_heat_mode_k", 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn incompatible_initial_data_rejected() {
        let mut p = catalog("zero", 0.0, 1.0, 1).unwrap();
        p.u0 = Arc::new(|_| 1.0);
        assert!(matches!(
            p.check_compatibility(&Mesh::unit(3).unwrap()),
            Err(Error::IncompatibleInitialData { .. })
        ));
    }

    #[test]
    fn missing_exact_solution() {
        let mut p = catalog("zero", 0.0, 1.0, 1).unwrap();
        p.exact = None;
        let (m, tg) = (Mesh::unit(3).unwrap(), TimeGrid::new(1.0, 4).unwrap());
        assert_eq!(residual_time_node(&p, &m, &tg, 0), Err(Error::MissingExactSolution));
        assert_eq!(residual_half_node(&p, &m, &tg), Err(Error::MissingExactSolution));
        assert_eq!(residual_midpoint(&p, &m, &tg, 1), Err(Error::MissingExactSolution));
        assert_eq!(residual_space(&p, &m, &tg, TimeLevel::Half), Err(Error::MissingExactSolution));
    }

    #[test]
    fn range_checks() {
        let p = catalog("mms_exp_sine_gu", 0.0, 1.0, 1).unwrap();
        let (m, tg) = (Mesh::unit(3).unwrap(), TimeGrid::new(1.0, 4).unwrap());
        assert!(residual_time_node(&p, &m, &tg, 4).is_err());
        assert!(residual_midpoint(&p, &m, &tg, 0).is_err());
        assert!(residual_midpoint(&p, &m, &tg, 4).is_err());
        assert!(residual_midpoint(&p, &m, &tg, 3).is_ok());
        assert!(residual_space(&p, &m, &tg, TimeLevel::Step(4)).is_err());
    }

    #[test]
    fn time_node_residual_vanishes_for_linear_in_time() {
        // u_tt = 0 and g ≡ 0: every term of the time defect is exact.
        let p = manufacture("q", quadratic_in_time(), Arc::new(|_| 0.0), Arc::new(|_| 0.0));
        let (m, tg) = (Mesh::unit(15).unwrap(), TimeGrid::new(1.0, 7).unwrap());
        for n in 0..7 {
            let r = residual_time_node(&p, &m, &tg, n).unwrap();
            assert!(r.max_abs() <= 1e-12, "n = {n}: {}", r.max_abs());
        }
    }

    #[test]
    fn forcing_shift_shifts_time_residual() {
        let p = catalog("mms_exp_sine_gsin", 0.0, 1.0, 1).unwrap();
        let c = 0.375;
        let mut shifted = p.clone();
        let f = p.f.clone();
        shifted.f = Arc::new(move |t, x| f(t, x) + c);
        let (m, tg) = (Mesh::unit(11).unwrap(), TimeGrid::new(1.0, 5).unwrap());
        for n in 0..5 {
            let r = residual_time_node(&p, &m, &tg, n).unwrap();
            let rs = residual_time_node(&shifted, &m, &tg, n).unwrap();
            for j in 1..=11 {
                assert!((rs[j] - (r[j] - c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stationary_solution_has_no_time_defect() {
        let p = manufacture("s", stationary_sine(0.0, 1.0, 2), Arc::new(f64::sin), Arc::new(f64::cos));
        let (m, tg) = (Mesh::unit(21).unwrap(), TimeGrid::new(0.5, 6).unwrap());
        assert!(residual_half_node(&p, &m, &tg).unwrap().max_abs() <= 1e-12);
        for n in 0..6 {
            assert!(residual_time_node(&p, &m, &tg, n).unwrap().max_abs() <= 1e-12);
        }
    }

    #[test]
    fn unforced_endpoints_are_small() {
        let p = catalog("mms_exp_sine_gsin", 0.0, 1.0, 1).unwrap();
        let (m, tg) = (Mesh::unit(30).unwrap(), TimeGrid::new(1.0, 10).unwrap());
        let last = m.nodes_len() - 1;
        for n in 0..10 {
            let r = residual_time_node_raw(&p, &m, &tg, n).unwrap();
            assert!(r[0].abs() <= 1e-10 && r[last].abs() <= 1e-10);
        }
        let r = residual_half_node_raw(&p, &m, &tg).unwrap();
        assert!(r[0].abs() <= 1e-10 && r[last].abs() <= 1e-10);
    }

    #[test]
    fn time_node_relation_reconstructs() {
        let p = catalog("mms_exp_sine_gsin", 0.0, 1.0, 1).unwrap();
        let ex = p.exact.as_ref().unwrap();
        let (m, tg) = (Mesh::unit(17).unwrap(), TimeGrid::new(1.0, 9).unwrap());
        for n in 0..9 {
            let r = residual_time_node(&p, &m, &tg, n).unwrap();
            let (ta, tb, tm) = (tg.time(n), tg.time(n + 1), tg.half_time(n));
            for j in 1..=m.interior() {
                let x = m.node(j);
                let (ua, ub) = ((ex.u)(ta, x), (ex.u)(tb, x));
                let rhs = 0.5 * ((ex.u_xx)(ta, x) + (ex.u_xx)(tb, x))
                    + (p.g)((ex.u)(tm, x)) * 0.5 * (ua + ub)
                    + 0.5 * ((p.f)(ta, x) + (p.f)(tb, x))
                    + r[j];
                assert!(((ub - ua) / tg.tau() - rhs).abs() <= 1e-13 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn half_node_split_adds_up() {
        let p = catalog("mms_exp_sine_gsin", 0.0, 1.0, 1).unwrap();
        let (m, tg) = (Mesh::unit(25).unwrap(), TimeGrid::new(1.0, 8).unwrap());
        let r = residual_half_node(&p, &m, &tg).unwrap();
        let parts = half_node_parts(&p, &m, &tg).unwrap();
        let total = parts.total();
        for j in 1..=m.interior() {
            assert!((r[j] - total[j]).abs() < 1e-11, "j = {j}");
        }
    }

    #[test]
    fn space_residual_exact_on_quadratic_and_tau_independent() {
        let p = manufacture("q", quadratic_in_time(), Arc::new(|_| 0.0), Arc::new(|_| 0.0));
        let m = Mesh::unit(13).unwrap();
        let tg = TimeGrid::new(1.0, 5).unwrap();
        for level in [TimeLevel::Half, TimeLevel::Step(0), TimeLevel::Step(4)] {
            assert!(residual_space(&p, &m, &tg, level).unwrap().max_abs() <= 1e-12);
        }
        let s = manufacture("s", stationary_sine(0.0, 1.0, 1), Arc::new(f64::sin), Arc::new(f64::cos));
        let a = residual_space(&s, &m, &TimeGrid::new(1.0, 4).unwrap(), TimeLevel::Step(1)).unwrap();
        let b = residual_space(&s, &m, &TimeGrid::new(1.0, 64).unwrap(), TimeLevel::Step(13)).unwrap();
        for j in 0..m.nodes_len() {
            assert!((a[j] - b[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn midpoint_residual_exact_cases() {
        let (m, tg) = (Mesh::unit(9).unwrap(), TimeGrid::new(1.0, 6).unwrap());
        let mut p = manufacture("q", quadratic_in_time(), Arc::new(|_| 2.5), Arc::new(|_| 0.0));
        for n in 1..6 {
            assert_eq!(residual_midpoint(&p, &m, &tg, n).unwrap().max_abs(), 0.0);
        }
        p.g = Arc::new(|u| u);
        for n in 1..6 {
            assert!(residual_midpoint(&p, &m, &tg, n).unwrap().max_abs() <= 1e-13);
        }
    }

    #[test]
    fn projection_of_quadratic_is_interpolant() {
        let m = Mesh::unit(20).unwrap();
        let v = sample_interior(|x| x * (1.0 - x), &m);
        let r = elliptic_projection(&sample_interior(|_| -2.0, &m), &m).unwrap();
        for j in 0..m.nodes_len() {
            assert!((r[j] - v[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn defect_kernel_matches_truncation_identity() {
        let m = Mesh::unit(24).unwrap();
        let h = m.h();
        let v = sample_interior(|x| (PI * x).sin(), &m);
        let lhs = laplacian(&v, &m).unwrap().sub(&sample_interior(|x| -PI * PI * (PI * x).sin(), &m)).unwrap();
        let re = elliptic_defect(|x| PI.powi(4) * (PI * x).sin(), &m);
        for j in 1..=m.interior() {
            assert!((lhs[j] - h * h / 6.0 * re[j]).abs() < 1e-9, "j = {j}");
        }
    }

    #[test]
    fn projection_bound_for_sine() {
        let ex = stationary_sine(0.0, 1.0, 1);
        let m = Mesh::unit(39).unwrap();
        let r = elliptic_projection_of(&ex, 0.0, &m).unwrap();
        let diff = r.sub(&sample_interior(|x| (PI * x).sin(), &m)).unwrap();
        let lhs = seminorm_h1(&diff, &m).unwrap();
        let re = elliptic_defect(|x| PI.powi(4) * (PI * x).sin(), &m);
        let rhs = m.length() / 12.0 * m.h().powi(2) * norm_l2(&re, &m).unwrap();
        assert!(lhs <= rhs && lhs > 0.0);
    }
}
