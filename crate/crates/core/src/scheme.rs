//! Time steppers.
//!
//! The relaxation scheme (BRFD) advances `U^n ∈ X°_h` together with an
//! auxiliary `Φ^{n+1/2} ∈ X_h` approximating `g(u)` at half-integer times:
//!
//! 1. `U^0 = I°_h u0`, then one half step of length τ/2 with `g` frozen at
//!    `U^0`, giving `U^{1/2}`. This is a linear solve, not a nonlinear one.
//! 2. `Φ^{1/2} = g(U^{1/2})`, then a full step with potential `Φ^{1/2}`.
//! 3. For `n ≥ 1`: `Φ^{n+1/2} = 2 g(U^n) − Φ^{n−1/2}`, then a full step.
//!
//! Each full step solves
//! `(U^{n+1} − U^n)/τ = Δ_h avg + Φ^{n+1/2} ⊗ avg + I°_h[(f(t_{n+1}) + f(t_n))/2]`
//! with `avg = (U^{n+1} + U^n)/2`.
//!
//! The mollified variant (MBRFD) evaluates `g` at `n_δ(U)` and uses
//! `n_δ(Φ)` in the linear system. The suboptimal variant sets
//! `Φ^{1/2} = g(U^0)`. The Crank–Nicolson/Newton reference solves the fully
//! implicit midpoint equation at every step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{laplacian, sample_interior, GridFunction, InteriorGridFunction, Mesh, TimeGrid};
use crate::mollifier::Mollifier;
use crate::problems::Problem;
use crate::trisolve::{assemble_step_operator, check_step_condition};

pub const NEWTON_DEFAULT_TOL: f64 = 1e-12;
pub const NEWTON_DEFAULT_MAX_ITER: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeVariant {
    Brfd,
    Mbrfd { delta: f64 },
    BrfdSuboptimalInit,
    CrankNicolsonNewton { tol: f64, max_iter: usize },
}

impl SchemeVariant {
    pub fn newton() -> Self {
        SchemeVariant::CrankNicolsonNewton { tol: NEWTON_DEFAULT_TOL, max_iter: NEWTON_DEFAULT_MAX_ITER }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SchemeVariant::Mbrfd { delta } if !(delta.is_finite() && delta > 0.0) => {
                Err(Error::invalid("delta", format!("must be positive, got {delta}")))
            }
            SchemeVariant::CrankNicolsonNewton { tol, .. } if !(tol > 0.0) => {
                Err(Error::invalid("tol", format!("must be positive, got {tol}")))
            }
            SchemeVariant::CrankNicolsonNewton { max_iter: 0, .. } => {
                Err(Error::invalid("max_iter", "must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SchemeVariant::Brfd => "brfd",
            SchemeVariant::Mbrfd { .. } => "mbrfd",
            SchemeVariant::BrfdSuboptimalInit => "brfd_suboptimal_init",
            SchemeVariant::CrankNicolsonNewton { .. } => "crank_nicolson_newton",
        }
    }

    fn is_relaxation(&self) -> bool {
        !matches!(self, SchemeVariant::CrankNicolsonNewton { .. })
    }
}

/// `U^n`, `Φ^{n−1/2}` (present for `n ≥ 1` in the relaxation variants) and the
/// stored half-step value `U^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub n: usize,
    pub u: InteriorGridFunction,
    pub phi: Option<GridFunction>,
    pub u_half: InteriorGridFunction,
}

/// Running record of the well-posedness checks made during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub checks: usize,
    pub violations: usize,
    /// Smallest `1/2 − dt · bound / 4` encountered.
    pub min_margin: Option<f64>,
    pub first_violation: Option<usize>,
}

impl ConditionSummary {
    fn record(&mut self, step: usize, dt: f64, bound: f64) -> Result<bool> {
        let c = check_step_condition(dt, bound)?;
        self.checks += 1;
        self.min_margin = Some(self.min_margin.map_or(c.margin, |m| m.min(c.margin)));
        if !c.passed {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(step);
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Drives one run of a scheme on a fixed mesh and time grid.
pub struct Stepper<'a> {
    problem: &'a Problem,
    mesh: Mesh,
    time: TimeGrid,
    variant: SchemeVariant,
    mollifier: Option<Mollifier>,
    condition: ConditionSummary,
    warnings: Vec<String>,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a Problem, mesh: Mesh, time: TimeGrid, variant: SchemeVariant) -> Result<Self> {
        variant.validate()?;
        problem.check_compatibility(&mesh)?;
        let mollifier = match variant {
            SchemeVariant::Mbrfd { delta } => Some(Mollifier::build(delta)?),
            _ => None,
        };
        let mut stepper = Self {
            problem,
            mesh,
            time,
            variant,
            mollifier,
            condition: ConditionSummary::default(),
            warnings: Vec::new(),
        };
        if let Some(m) = mollifier {
            // sup |n_δ| bounds every potential, so one check covers the run
            stepper.note_condition(0, time.tau(), m.sup_abs())?;
        }
        Ok(stepper)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn condition(&self) -> &ConditionSummary {
        &self.condition
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn note_condition(&mut self, step: usize, dt: f64, bound: f64) -> Result<()> {
        if self.condition.record(step, dt, bound)? {
            self.warnings.push(format!(
                "step condition dt*C <= 1/2 violated at step {step} (dt = {dt:e}, bound = {bound:e}); \
                 solvability is no longer guaranteed"
            ));
        }
        Ok(())
    }

    fn per_step_check(&mut self, step: usize, dt: f64, phi: &GridFunction) -> Result<()> {
        if self.mollifier.is_none() {
            self.note_condition(step, dt, phi.max_abs())?;
        }
        Ok(())
    }

    fn g_of(&self, v: &impl AsRef<[f64]>) -> GridFunction {
        match &self.mollifier {
            Some(m) => self.problem.g_of(&m.apply(&GridFunction::new(v.as_ref().to_vec()))),
            None => self.problem.g_of(v),
        }
    }

    fn potential(&self, phi: &GridFunction) -> GridFunction {
        match &self.mollifier {
            Some(m) => m.apply(phi),
            None => phi.clone(),
        }
    }

    /// Mean forcing `I°_h[(f(t_a) + f(t_b))/2]`.
    fn mean_forcing(&self, t_a: f64, t_b: f64) -> InteriorGridFunction {
        let f = &self.problem.f;
        sample_interior(|x| 0.5 * (f(t_a, x) + f(t_b, x)), &self.mesh)
    }

    /// Solves `(V − U)/dt = Δ_h avg + φ ⊗ avg + F` for `V`.
    fn linear_step(
        &self,
        step: usize,
        u: &InteriorGridFunction,
        phi: &GridFunction,
        dt: f64,
        t_a: f64,
        t_b: f64,
    ) -> Result<InteriorGridFunction> {
        let op = assemble_step_operator(&self.mesh, dt, phi)?;
        let lap = laplacian(u, &self.mesh)?;
        let forcing = self.mean_forcing(t_a, t_b);
        let rhs: Vec<f64> = (0..u.len())
            .map(|j| u[j] + 0.5 * dt * (lap[j] + phi[j] * u[j]) + dt * forcing[j])
            .collect();
        op.solve_interior(&InteriorGridFunction::new(rhs)).map_err(|e| e.at_step(step))
    }

    /// Implicit midpoint step by Newton iteration on the average `w`:
    /// `w − (dt/2) Δ_h w − (dt/2) g(w) ⊗ w = U + (dt/2) F`, then `V = 2w − U`.
    fn newton_step(
        &self,
        step: usize,
        u: &InteriorGridFunction,
        dt: f64,
        t_a: f64,
        t_b: f64,
    ) -> Result<InteriorGridFunction> {
        let SchemeVariant::CrankNicolsonNewton { tol, max_iter } = self.variant else {
            unreachable!("newton_step on a relaxation variant");
        };
        let (g, gp) = (&self.problem.g, &self.problem.g_prime);
        let forcing = self.mean_forcing(t_a, t_b);
        let b = u.combine(1.0, &forcing, 0.5 * dt)?;
        let threshold = tol * (1.0 + u.max_abs());
        let mut w = u.clone();
        let mut residual = f64::INFINITY;
        for _ in 0..=max_iter {
            let lap = laplacian(&w, &self.mesh)?;
            let f: Vec<f64> = (0..w.len())
                .map(|j| w[j] - 0.5 * dt * (lap[j] + g(w[j]) * w[j]) - b[j])
                .collect();
            let f = InteriorGridFunction::new(f);
            residual = f.max_abs();
            if residual <= threshold {
                return w.combine(2.0, u, -1.0);
            }
            let jac_phi = GridFunction::new(w.values().iter().map(|&v| g(v) + gp(v) * v).collect());
            let jac = assemble_step_operator(&self.mesh, dt, &jac_phi)?;
            let correction = jac.solve_interior(&f).map_err(|e| e.at_step(step))?;
            w = w.sub(&correction)?;
        }
        Err(Error::NewtonDivergence { step, iterations: max_iter, residual })
    }

    /// Step I: `U^0 = I°_h u0` and the half step to `U^{1/2}` with `g`
    /// frozen at `U^0`.
    pub fn step_i(&mut self) -> Result<SchemeState> {
        let u0 = sample_interior(|x| (self.problem.u0)(x), &self.mesh);
        let (dt, t_half) = (0.5 * self.time.tau(), self.time.half_time(0));
        let u_half = if self.variant.is_relaxation() {
            let frozen = self.problem.g_of(&u0);
            self.per_step_check(0, dt, &frozen)?;
            self.linear_step(0, &u0, &frozen, dt, 0.0, t_half)?
        } else {
            self.newton_step(0, &u0, dt, 0.0, t_half)?
        };
        Ok(SchemeState { n: 0, u: u0, phi: None, u_half })
    }

    /// Step II: `Φ^{1/2}` from `U^{1/2}` (or from `U^0` for the suboptimal
    /// variant) and the first full step to `U^1`.
    pub fn step_ii(&mut self, state: &SchemeState) -> Result<SchemeState> {
        if state.n != 0 {
            return Err(Error::StepOutOfRange { index: state.n, lo: 0, hi: 0 });
        }
        let (tau, t1) = (self.time.tau(), self.time.time(1));
        if !self.variant.is_relaxation() {
            let u = self.newton_step(1, &state.u, tau, 0.0, t1)?;
            return Ok(SchemeState { n: 1, u, phi: None, u_half: state.u_half.clone() });
        }
        let phi = match self.variant {
            SchemeVariant::BrfdSuboptimalInit => self.g_of(&state.u),
            _ => self.g_of(&state.u_half),
        };
        let potential = self.potential(&phi);
        self.per_step_check(1, tau, &potential)?;
        let u = self.linear_step(1, &state.u, &potential, tau, 0.0, t1)?;
        Ok(SchemeState { n: 1, u, phi: Some(phi), u_half: state.u_half.clone() })
    }

    /// Step III: the reflection `Φ^{n+1/2} = 2 g(U^n) − Φ^{n−1/2}` and the
    /// full step from `U^n` to `U^{n+1}`, for `1 ≤ n ≤ N − 1`.
    pub fn step_iii(&mut self, state: &SchemeState) -> Result<SchemeState> {
        let n = state.n;
        if n == 0 || n >= self.time.steps() {
            return Err(Error::StepOutOfRange { index: n, lo: 1, hi: self.time.steps().saturating_sub(1) });
        }
        let (tau, t_a, t_b) = (self.time.tau(), self.time.time(n), self.time.time(n + 1));
        if !self.variant.is_relaxation() {
            let u = self.newton_step(n + 1, &state.u, tau, t_a, t_b)?;
            return Ok(SchemeState { n: n + 1, u, phi: None, u_half: state.u_half.clone() });
        }
        let previous = state
            .phi
            .as_ref()
            .ok_or_else(|| Error::invalid("state.phi", "relaxation step needs Φ^{n-1/2}"))?;
        let g_n = self.g_of(&state.u);
        let phi = GridFunction::new(
            g_n.values().iter().zip(previous.values()).map(|(g, p)| 2.0 * g - p).collect(),
        );
        let potential = self.potential(&phi);
        self.per_step_check(n + 1, tau, &potential)?;
        let u = self.linear_step(n + 1, &state.u, &potential, tau, t_a, t_b)?;
        Ok(SchemeState { n: n + 1, u, phi: Some(phi), u_half: state.u_half.clone() })
    }
}

/// Recorded output of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub variant: SchemeVariant,
    pub mesh: Mesh,
    pub time: TimeGrid,
    pub stride: usize,
    /// Step indices of the recorded states: every `stride`-th plus `N`.
    pub steps: Vec<usize>,
    pub states: Vec<InteriorGridFunction>,
    pub u_half: InteriorGridFunction,
    /// `Φ^{n+1/2}` for the recorded `n` below `N` (relaxation variants only).
    pub phi_steps: Vec<usize>,
    pub phi: Vec<GridFunction>,
    pub condition: ConditionSummary,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn final_state(&self) -> &InteriorGridFunction {
        self.states.last().expect("a trajectory always holds U^0")
    }
}

/// Runs Step I, Step II and `N − 1` applications of Step III, recording every
/// `stride`-th state (and always the last).
pub fn run(problem: &Problem, mesh: &Mesh, time: &TimeGrid, variant: SchemeVariant, stride: usize) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::invalid("record_stride", "must be at least 1"));
    }
    let mut stepper = Stepper::new(problem, *mesh, *time, variant)?;
    let n_steps = time.steps();
    let mut traj = Trajectory {
        variant,
        mesh: *mesh,
        time: *time,
        stride,
        steps: Vec::new(),
        states: Vec::new(),
        u_half: InteriorGridFunction::zeros(mesh),
        phi_steps: Vec::new(),
        phi: Vec::new(),
        condition: ConditionSummary::default(),
        warnings: Vec::new(),
    };
    let record = |traj: &mut Trajectory, s: &SchemeState| {
        if s.n.is_multiple_of(stride) || s.n == n_steps {
            traj.steps.push(s.n);
            traj.states.push(s.u.clone());
        }
        if let Some(phi) = &s.phi {
            let k = s.n - 1;
            if k.is_multiple_of(stride) {
                traj.phi_steps.push(k);
                traj.phi.push(phi.clone());
            }
        }
    };

    let mut state = stepper.step_i()?;
    traj.u_half = state.u_half.clone();
    record(&mut traj, &state);
    state = stepper.step_ii(&state)?;
    record(&mut traj, &state);
    while state.n < n_steps {
        state = stepper.step_iii(&state)?;
        record(&mut traj, &state);
    }
    traj.condition = *stepper.condition();
    traj.warnings = stepper.warnings().to_vec();
    Ok(traj)
}
