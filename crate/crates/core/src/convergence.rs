//! Error measurement against exact solutions, refinement studies and
//! log–log order fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample, sample_interior, GridFunction, Mesh, TimeGrid};
use crate::norms::{norm_inf, norm_l2, seminorm_h1};
use crate::problems::Problem;
use crate::scheme::{run, SchemeVariant, Trajectory};

/// Errors below this are treated as round-off and block an order fit.
pub const ERROR_FLOOR: f64 = 1e-13;

/// Spread of per-pair slopes above which the coarsest level is dropped.
pub const PRE_ASYMPTOTIC_SPREAD: f64 = 0.3;

/// How the time step follows the mesh width across levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coupling {
    /// `τ ≈ ratio · h`; `N = round(T / (ratio · h))`.
    Proportional { ratio: f64 },
    /// `h` fixed at the base mesh, `N` doubles.
    TimeOnly,
    /// `τ` fixed at the base grid, `J + 1` doubles.
    SpaceOnly,
}

impl Default for Coupling {
    fn default() -> Self {
        Coupling::Proportional { ratio: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementPlan {
    pub x_a: f64,
    pub x_b: f64,
    pub t_final: f64,
    /// `J₀`
    pub base_interior: usize,
    /// `N₀`; ignored by [`Coupling::Proportional`].
    pub base_steps: usize,
    pub levels: usize,
    pub coupling: Coupling,
}

impl RefinementPlan {
    /// `τ = h` on `[0, 1] × [0, 1]`.
    pub fn unit_square(base_interior: usize, levels: usize) -> Self {
        Self {
            x_a: 0.0,
            x_b: 1.0,
            t_final: 1.0,
            base_interior,
            base_steps: base_interior + 1,
            levels,
            coupling: Coupling::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::invalid("levels", format!("need at least 2, got {}", self.levels)));
        }
        if self.base_steps == 0 && !matches!(self.coupling, Coupling::Proportional { .. }) {
            return Err(Error::invalid("base_steps", "must be at least 1"));
        }
        if let Coupling::Proportional { ratio } = self.coupling {
            if !(ratio.is_finite() && ratio > 0.0) {
                return Err(Error::invalid("ratio", format!("must be positive, got {ratio}")));
            }
        }
        Mesh::new(self.x_a, self.x_b, self.base_interior)?;
        TimeGrid::new(self.t_final, self.base_steps.max(1))?;
        Ok(())
    }

    /// Mesh and time grid of level `level` (0 = coarsest).
    pub fn grids(&self, level: usize) -> Result<(Mesh, TimeGrid)> {
        let base = Mesh::new(self.x_a, self.x_b, self.base_interior)?;
        let refine = |cells: usize| cells << level;
        match self.coupling {
            Coupling::Proportional { ratio } => {
                let mesh = Mesh::new(self.x_a, self.x_b, refine(base.interior() + 1) - 1)?;
                let steps = (self.t_final / (ratio * mesh.h())).round().max(1.0) as usize;
                Ok((mesh, TimeGrid::new(self.t_final, steps)?))
            }
            Coupling::TimeOnly => Ok((base, TimeGrid::new(self.t_final, refine(self.base_steps))?)),
            Coupling::SpaceOnly => {
                let mesh = Mesh::new(self.x_a, self.x_b, refine(base.interior() + 1) - 1)?;
                Ok((mesh, TimeGrid::new(self.t_final, self.base_steps)?))
            }
        }
    }

    /// The step size an order is fitted against: `τ` for time-only studies, `h` otherwise.
    pub fn fit_step(&self, mesh: &Mesh, time: &TimeGrid) -> f64 {
        match self.coupling {
            Coupling::TimeOnly => time.tau(),
            _ => mesh.h(),
        }
    }
}

/// Errors of one run against the exact solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// `max_n |I°_h u(t_n) − U^n|_{1,h}`
    pub traj_h1: f64,
    /// `|I°_h u(t^{1/2}) − U^{1/2}|_{1,h}`
    pub half_h1: f64,
    /// `max_n |I_h g(u(t^{n+1/2})) − Φ^{n+1/2}|_{1,h}`; absent without a Φ sequence.
    pub phi_h1: Option<f64>,
    /// `max_n ‖I°_h u(t_n) − U^n‖_{0,h}`
    pub traj_l2: f64,
    /// `max_n |I°_h u(t_n) − U^n|_{∞,h}`
    pub traj_inf: f64,
}

/// Compares a stride-1 trajectory with the problem's exact solution.
pub fn measure_errors(traj: &Trajectory, problem: &Problem) -> Result<ErrorSummary> {
    let exact = problem.exact()?;
    if traj.stride != 1 {
        return Err(Error::StrideNotOne(traj.stride));
    }
    let (mesh, time) = (&traj.mesh, &traj.time);
    let (mut traj_h1, mut traj_l2, mut traj_inf) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (&n, state) in traj.steps.iter().zip(&traj.states) {
        let t = time.time(n);
        let e = sample_interior(|x| (exact.u)(t, x), mesh).sub(state)?;
        traj_h1 = traj_h1.max(seminorm_h1(&e, mesh)?);
        traj_l2 = traj_l2.max(norm_l2(&e, mesh)?);
        traj_inf = traj_inf.max(norm_inf(&e, mesh)?);
    }
    let t_half = time.half_time(0);
    let e_half = sample_interior(|x| (exact.u)(t_half, x), mesh).sub(&traj.u_half)?;
    let half_h1 = seminorm_h1(&e_half, mesh)?;

    let phi_h1 = if traj.phi.is_empty() {
        None
    } else {
        let mut worst = 0.0_f64;
        for (&n, phi) in traj.phi_steps.iter().zip(&traj.phi) {
            let t = time.half_time(n);
            let target = sample(|x| (problem.g)((exact.u)(t, x)), mesh);
            let diff = GridFunction::new(target.values().iter().zip(phi.values()).map(|(a, b)| a - b).collect());
            worst = worst.max(seminorm_h1(&diff, mesh)?);
        }
        Some(worst)
    };
    Ok(ErrorSummary { traj_h1, half_h1, phi_h1, traj_l2, traj_inf })
}

/// Least-squares and per-pair slopes of `log(err)` against `log(step)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub slope: f64,
    pub per_pair: Vec<f64>,
    /// Per-pair slopes spread by more than [`PRE_ASYMPTOTIC_SPREAD`].
    pub pre_asymptotic: bool,
    /// Fit without the coarsest level, when pre-asymptotic and at least
    /// two levels remain.
    pub trimmed_slope: Option<f64>,
}

impl OrderEstimate {
    /// The reported order: the trimmed fit when the guard fired, else the full fit.
    pub fn order(&self) -> f64 {
        self.trimmed_slope.unwrap_or(self.slope)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OrderFit {
    Estimated(OrderEstimate),
    /// Level `level` (the first such) has an error below [`ERROR_FLOOR`].
    AtFloor { level: usize },
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Fits the convergence order of `errs` measured at `steps`.
pub fn estimate_order(errs: &[f64], steps: &[f64]) -> Result<OrderFit> {
    if errs.len() != steps.len() {
        return Err(Error::DimensionMismatch { expected: steps.len(), found: errs.len() });
    }
    if errs.len() < 2 {
        return Err(Error::OrderFit("at least two levels are required".into()));
    }
    if steps.iter().any(|&s| !(s > 0.0)) || steps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::OrderFit("steps must be positive and strictly decreasing".into()));
    }
    if errs.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::OrderFit("errors must be finite and nonnegative".into()));
    }
    if let Some(level) = errs.iter().position(|&e| e < ERROR_FLOOR) {
        return Ok(OrderFit::AtFloor { level });
    }
    let lx: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let slope = least_squares_slope(&lx, &ly);
    let per_pair: Vec<f64> = (0..errs.len() - 1).map(|i| (ly[i] - ly[i + 1]) / (lx[i] - lx[i + 1])).collect();
    let spread = per_pair.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - per_pair.iter().cloned().fold(f64::INFINITY, f64::min);
    let pre_asymptotic = per_pair.len() >= 2 && spread > PRE_ASYMPTOTIC_SPREAD;
    let trimmed_slope = (pre_asymptotic && errs.len() >= 3).then(|| least_squares_slope(&lx[1..], &ly[1..]));
    Ok(OrderFit::Estimated(OrderEstimate { slope, per_pair, pre_asymptotic, trimmed_slope }))
}

/// An order fit that drops trailing levels sitting at the round-off floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorAwareFit {
    pub estimate: Option<OrderEstimate>,
    pub levels_used: usize,
    pub at_floor: bool,
}

impl FloorAwareFit {
    pub fn order(&self) -> Option<f64> {
        self.estimate.as_ref().map(OrderEstimate::order)
    }

    pub fn pre_asymptotic(&self) -> bool {
        self.estimate.as_ref().is_some_and(|e| e.pre_asymptotic)
    }
}

/// Fits on the levels before the first one at the floor.
pub fn estimate_order_above_floor(errs: &[f64], steps: &[f64]) -> Result<FloorAwareFit> {
    match estimate_order(errs, steps)? {
        OrderFit::Estimated(e) => Ok(FloorAwareFit { estimate: Some(e), levels_used: errs.len(), at_floor: false }),
        OrderFit::AtFloor { level } if level >= 2 => {
            let estimate = match estimate_order(&errs[..level], &steps[..level])? {
                OrderFit::Estimated(e) => Some(e),
                OrderFit::AtFloor { .. } => None,
            };
            Ok(FloorAwareFit { estimate, levels_used: level, at_floor: true })
        }
        OrderFit::AtFloor { .. } => Ok(FloorAwareFit { estimate: None, levels_used: 0, at_floor: true }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: usize,
    pub interior: usize,
    pub steps: usize,
    pub h: f64,
    pub tau: f64,
    pub errors: ErrorSummary,
    pub condition_margin: Option<f64>,
    pub condition_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedOrders {
    pub traj_h1: FloorAwareFit,
    pub half_h1: FloorAwareFit,
    pub phi_h1: Option<FloorAwareFit>,
}

impl FittedOrders {
    pub fn any_at_floor(&self) -> bool {
        self.traj_h1.at_floor || self.half_h1.at_floor || self.phi_h1.as_ref().is_some_and(|f| f.at_floor)
    }

    pub fn any_pre_asymptotic(&self) -> bool {
        self.traj_h1.pre_asymptotic()
            || self.half_h1.pre_asymptotic()
            || self.phi_h1.as_ref().is_some_and(FloorAwareFit::pre_asymptotic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub problem: String,
    pub variant: SchemeVariant,
    pub plan: RefinementPlan,
    pub levels: Vec<LevelResult>,
    pub orders: FittedOrders,
}

/// Runs and measures a single level of `plan`.
pub fn run_level(problem: &Problem, plan: &RefinementPlan, variant: SchemeVariant, level: usize) -> Result<LevelResult> {
    let (mesh, time) = plan.grids(level)?;
    let traj = run(problem, &mesh, &time, variant, 1)?;
    let errors = measure_errors(&traj, problem)?;
    Ok(LevelResult {
        level,
        interior: mesh.interior(),
        steps: time.steps(),
        h: mesh.h(),
        tau: time.tau(),
        errors,
        condition_margin: traj.condition.min_margin,
        condition_violations: traj.condition.violations,
    })
}

/// Runs every level of `plan` sequentially and fits the orders.
pub fn refinement_study(problem: &Problem, plan: &RefinementPlan, variant: SchemeVariant) -> Result<ConvergenceReport> {
    refinement_study_with_jobs(problem, plan, variant, 1)
}

/// Like [`refinement_study`], running up to `jobs` levels concurrently.
pub fn refinement_study_with_jobs(
    problem: &Problem,
    plan: &RefinementPlan,
    variant: SchemeVariant,
    jobs: usize,
) -> Result<ConvergenceReport> {
    plan.validate()?;
    variant.validate()?;
    let jobs = jobs.clamp(1, plan.levels);
    let mut results: Vec<Option<Result<LevelResult>>> = (0..plan.levels).map(|_| None).collect();
    if jobs == 1 {
        for (level, slot) in results.iter_mut().enumerate() {
            *slot = Some(run_level(problem, plan, variant, level));
        }
    } else {
        std::thread::scope(|scope| {
            for (worker, chunk) in results.chunks_mut(plan.levels.div_ceil(jobs)).enumerate() {
                let first = worker * plan.levels.div_ceil(jobs);
                scope.spawn(move || {
                    for (offset, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(run_level(problem, plan, variant, first + offset));
                    }
                });
            }
        });
    }
    let levels = results
        .into_iter()
        .map(|r| r.expect("every level is scheduled"))
        .collect::<Result<Vec<_>>>()?;
    let orders = fit_levels(plan, &levels)?;
    Ok(ConvergenceReport { problem: problem.name.clone(), variant, plan: *plan, levels, orders })
}

fn fit_levels(plan: &RefinementPlan, levels: &[LevelResult]) -> Result<FittedOrders> {
    let steps: Vec<f64> = levels
        .iter()
        .map(|l| match plan.coupling {
            Coupling::TimeOnly => l.tau,
            _ => l.h,
        })
        .collect();
    let column = |f: fn(&ErrorSummary) -> f64| -> Vec<f64> { levels.iter().map(|l| f(&l.errors)).collect() };
    let traj_h1 = estimate_order_above_floor(&column(|e| e.traj_h1), &steps)?;
    let half_h1 = estimate_order_above_floor(&column(|e| e.half_h1), &steps)?;
    let phi: Option<Vec<f64>> = levels.iter().map(|l| l.errors.phi_h1).collect();
    let phi_h1 = phi.map(|p| estimate_order_above_floor(&p, &steps)).transpose()?;
    Ok(FittedOrders { traj_h1, half_h1, phi_h1 })
}

/// Largest differences between BRFD and MBRFD runs on the same grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coincidence {
    pub delta: f64,
    pub max_state_diff: f64,
    pub max_phi_diff: f64,
}

impl Coincidence {
    pub fn coincides(&self, tol: f64) -> bool {
        self.max_state_diff <= tol && self.max_phi_diff <= tol
    }
}

/// Compares BRFD and MBRFD(δ) step by step in `|·|_{∞,h}`.
pub fn mollified_coincidence(problem: &Problem, mesh: &Mesh, time: &TimeGrid, delta: f64) -> Result<Coincidence> {
    let plain = run(problem, mesh, time, SchemeVariant::Brfd, 1)?;
    let moll = run(problem, mesh, time, SchemeVariant::Mbrfd { delta }, 1)?;
    let mut max_state_diff = plain.u_half.sub(&moll.u_half)?.max_abs();
    for (a, b) in plain.states.iter().zip(&moll.states) {
        max_state_diff = max_state_diff.max(a.sub(b)?.max_abs());
    }
    let mut max_phi_diff = 0.0_f64;
    for (a, b) in plain.phi.iter().zip(&moll.phi) {
        let d = a.values().iter().zip(b.values()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        max_phi_diff = max_phi_diff.max(d);
    }
    Ok(Coincidence { delta, max_state_diff, max_phi_diff })
}
