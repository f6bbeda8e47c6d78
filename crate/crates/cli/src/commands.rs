use std::f64::consts::PI;
use std::time::Instant;

use relaxfd::convergence::{
    measure_errors, mollified_coincidence, refinement_study_with_jobs, ErrorSummary, FloorAwareFit,
};
use relaxfd::grid::sample_interior;
use relaxfd::norms::{inner_interior, norm_inf, norm_l2, seminorm_h1};
use relaxfd::problems::catalog;
use relaxfd::scheme::{run, ConditionSummary, SchemeVariant};
use relaxfd::verify::{run_battery, BatteryConfig};
use relaxfd::{Mesh, TimeGrid};
use serde::Serialize;

use crate::config::{ConfigError, StudyConfig};
use crate::output::{float, optional, table, write_csv, write_json};

pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance of the BRFD/MBRFD coincidence check.
pub const COINCIDENCE_TOL: f64 = 1e-13;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Verify(String),
    Numerical(String),
    Io(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Config(_) | Failure::Io(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Verify(m) => write!(f, "verification failed: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Io(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<relaxfd::Error> for Failure {
    fn from(e: relaxfd::Error) -> Self {
        use relaxfd::Error::*;
        match e {
            SingularSystem { .. } | SingularStep { .. } | NewtonDivergence { .. } | OrderFit(_) | StepOutOfRange { .. } => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

#[derive(Serialize)]
struct Norms {
    l2: f64,
    inf: f64,
    h1: f64,
}

#[derive(Serialize)]
struct ModeCheck {
    k: usize,
    /// `((1 − τλ_k/2) / (1 + τλ_k/2))^N` with the discrete eigenvalue `λ_k`.
    predicted_amplitude: f64,
    final_amplitude: f64,
    relative_discrepancy: f64,
    exact_amplitude: f64,
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    schema_version: u32,
    config: &'a StudyConfig,
    problem: String,
    variant: SchemeVariant,
    interior: usize,
    steps: usize,
    h: f64,
    tau: f64,
    final_time: f64,
    final_norms: Norms,
    condition: ConditionSummary,
    warnings: Vec<String>,
    errors: Option<ErrorSummary>,
    linear_mode: Option<ModeCheck>,
    wall_time_secs: f64,
}

fn linear_mode_number(cfg: &StudyConfig) -> Option<usize> {
    match cfg.problem.as_str() {
        "linear_heat_mode_k" => Some(cfg.mode),
        name => name.strip_prefix("linear_heat_mode_").and_then(|k| k.parse().ok()),
    }
}

pub fn solve(cfg: &StudyConfig) -> Result<(), Failure> {
    cfg.validate_solve()?;
    let variant = cfg.variant()?;
    let problem = catalog(&cfg.problem, cfg.x_a, cfg.x_b, cfg.mode)?;
    let mesh = Mesh::new(cfg.x_a, cfg.x_b, cfg.interior)?;
    let time = TimeGrid::new(cfg.t_final, cfg.steps)?;

    let start = Instant::now();
    let traj = run(&problem, &mesh, &time, variant, cfg.record_stride)?;
    let wall_time_secs = start.elapsed().as_secs_f64();

    let last = traj.final_state();
    let final_norms = Norms { l2: norm_l2(last, &mesh)?, inf: norm_inf(last, &mesh)?, h1: seminorm_h1(last, &mesh)? };
    let errors = match (&problem.exact, cfg.record_stride) {
        (Some(_), 1) => Some(measure_errors(&traj, &problem)?),
        _ => None,
    };
    let linear_mode = match linear_mode_number(cfg) {
        Some(k) => {
            let (l, h, tau) = (mesh.length(), mesh.h(), time.tau());
            let s = sample_interior(|x| (k as f64 * PI * (x - cfg.x_a) / l).sin(), &mesh);
            let final_amplitude = inner_interior(last, &s, &mesh)? / inner_interior(&s, &s, &mesh)?;
            let lambda = 4.0 / (h * h) * (k as f64 * PI * h / (2.0 * l)).sin().powi(2);
            let r = (1.0 - 0.5 * tau * lambda) / (1.0 + 0.5 * tau * lambda);
            let predicted_amplitude = r.powi(time.steps() as i32);
            Some(ModeCheck {
                k,
                predicted_amplitude,
                final_amplitude,
                relative_discrepancy: (final_amplitude - predicted_amplitude).abs() / predicted_amplitude.abs(),
                exact_amplitude: (-(k as f64 * PI / l).powi(2) * cfg.t_final).exp(),
            })
        }
        None => None,
    };

    if let Some(path) = &cfg.csv {
        let mut rows = Vec::new();
        for (&n, state) in traj.steps.iter().zip(&traj.states) {
            let t = time.time(n);
            for (j, u) in state.values().iter().enumerate() {
                rows.push(vec![n.to_string(), float(t), j.to_string(), float(mesh.node(j)), float(*u)]);
            }
        }
        write_csv(path, &["n", "t", "j", "x", "u"], rows)?;
    }
    for w in &traj.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} / {}: J = {}, N = {}, h = {:.4e}, tau = {:.4e}",
        problem.name,
        variant.label(),
        mesh.interior(),
        time.steps(),
        mesh.h(),
        time.tau()
    );
    println!(
        "final |U|_0 = {:.6e}, |U|_inf = {:.6e}, |U|_1 = {:.6e}",
        final_norms.l2, final_norms.inf, final_norms.h1
    );
    if let Some(e) = &errors {
        println!("max |u - U|_1 = {:.6e}, |u - U|_1 at t = tau/2: {:.6e}", e.traj_h1, e.half_h1);
    }
    if let Some(m) = &linear_mode {
        println!(
            "mode {}: amplitude {:.12e}, predicted {:.12e} (rel. diff {:.2e})",
            m.k, m.final_amplitude, m.predicted_amplitude, m.relative_discrepancy
        );
    }
    if let Some(path) = &cfg.json {
        let summary = SolveSummary {
            schema_version: SCHEMA_VERSION,
            config: cfg,
            problem: problem.name.clone(),
            variant,
            interior: mesh.interior(),
            steps: time.steps(),
            h: mesh.h(),
            tau: time.tau(),
            final_time: time.t_final(),
            final_norms,
            condition: traj.condition,
            warnings: traj.warnings.clone(),
            errors,
            linear_mode,
            wall_time_secs,
        };
        write_json(path, &summary)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LevelRow {
    level: usize,
    #[serde(rename = "J")]
    interior: usize,
    #[serde(rename = "N")]
    steps: usize,
    h: f64,
    tau: f64,
    err_traj_h1: f64,
    err_half_h1: f64,
    err_phi_h1: Option<f64>,
    err_l2: f64,
    err_inf: f64,
    condition_margin: Option<f64>,
    condition_violations: usize,
}

#[derive(Serialize)]
struct OrderEntry {
    /// Reported order: the trimmed fit when the pre-asymptotic guard fired.
    order: Option<f64>,
    slope: Option<f64>,
    trimmed_slope: Option<f64>,
    per_pair: Vec<f64>,
    pre_asymptotic: bool,
    at_floor: bool,
    levels_used: usize,
}

impl From<&FloorAwareFit> for OrderEntry {
    fn from(f: &FloorAwareFit) -> Self {
        let e = f.estimate.as_ref();
        OrderEntry {
            order: f.order(),
            slope: e.map(|e| e.slope),
            trimmed_slope: e.and_then(|e| e.trimmed_slope),
            per_pair: e.map(|e| e.per_pair.clone()).unwrap_or_default(),
            pre_asymptotic: f.pre_asymptotic(),
            at_floor: f.at_floor,
            levels_used: f.levels_used,
        }
    }
}

#[derive(Serialize)]
struct FittedOrders {
    traj_h1: OrderEntry,
    half_h1: OrderEntry,
    phi_h1: Option<OrderEntry>,
}

#[derive(Serialize)]
struct Guards {
    at_floor: bool,
    pre_asymptotic: bool,
}

#[derive(Serialize)]
struct CoincidenceCheck {
    delta: f64,
    tolerance: f64,
    max_state_diff: f64,
    max_phi_diff: f64,
    coincides: bool,
}

#[derive(Serialize)]
struct StudyReport<'a> {
    schema_version: u32,
    config: &'a StudyConfig,
    problem: String,
    variant: SchemeVariant,
    levels: Vec<LevelRow>,
    fitted_orders: FittedOrders,
    guards: Guards,
    coincidence: Option<CoincidenceCheck>,
}

const STUDY_COLUMNS: [&str; 11] = [
    "level",
    "J",
    "N",
    "h",
    "tau",
    "err_traj_h1",
    "err_half_h1",
    "err_phi_h1",
    "err_l2",
    "err_inf",
    "condition_margin",
];

pub fn study(cfg: &StudyConfig, jobs: usize) -> Result<(), Failure> {
    cfg.validate_study()?;
    let variant = cfg.variant()?;
    let problem = catalog(&cfg.problem, cfg.x_a, cfg.x_b, cfg.mode)?;
    let plan = cfg.plan();
    plan.validate()?;
    if problem.exact.is_none() {
        return Err(Failure::Config(format!("invalid config field `problem`: `{}` has no exact solution", problem.name)));
    }
    let report = refinement_study_with_jobs(&problem, &plan, variant, jobs.max(1))?;

    let coincidence = match variant {
        SchemeVariant::Mbrfd { delta } => {
            let (mut state, mut phi) = (0.0_f64, 0.0_f64);
            for level in 0..plan.levels {
                let (mesh, time) = plan.grids(level)?;
                let c = mollified_coincidence(&problem, &mesh, &time, delta)?;
                state = state.max(c.max_state_diff);
                phi = phi.max(c.max_phi_diff);
            }
            Some(CoincidenceCheck {
                delta,
                tolerance: COINCIDENCE_TOL,
                max_state_diff: state,
                max_phi_diff: phi,
                coincides: state <= COINCIDENCE_TOL && phi <= COINCIDENCE_TOL,
            })
        }
        _ => None,
    };

    let levels: Vec<LevelRow> = report
        .levels
        .iter()
        .map(|l| LevelRow {
            level: l.level,
            interior: l.interior,
            steps: l.steps,
            h: l.h,
            tau: l.tau,
            err_traj_h1: l.errors.traj_h1,
            err_half_h1: l.errors.half_h1,
            err_phi_h1: l.errors.phi_h1,
            err_l2: l.errors.traj_l2,
            err_inf: l.errors.traj_inf,
            condition_margin: l.condition_margin,
            condition_violations: l.condition_violations,
        })
        .collect();

    let row = |l: &LevelRow, fmt: &dyn Fn(f64) -> String, opt: &dyn Fn(Option<f64>) -> String| {
        vec![
            l.level.to_string(),
            l.interior.to_string(),
            l.steps.to_string(),
            fmt(l.h),
            fmt(l.tau),
            fmt(l.err_traj_h1),
            fmt(l.err_half_h1),
            opt(l.err_phi_h1),
            fmt(l.err_l2),
            fmt(l.err_inf),
            opt(l.condition_margin),
        ]
    };
    if let Some(path) = &cfg.csv {
        write_csv(path, &STUDY_COLUMNS, levels.iter().map(|l| row(l, &float, &optional)))?;
    }
    let short = |x: f64| format!("{x:.4e}");
    let short_opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |x| format!("{x:.4e}"));
    let shown: Vec<Vec<String>> = levels.iter().map(|l| row(l, &short, &short_opt)).collect();
    println!("{} / {}", problem.name, variant.label());
    println!("{}", table(&STUDY_COLUMNS, &shown));

    let fitted_orders = FittedOrders {
        traj_h1: (&report.orders.traj_h1).into(),
        half_h1: (&report.orders.half_h1).into(),
        phi_h1: report.orders.phi_h1.as_ref().map(Into::into),
    };
    let show = |name: &str, e: &OrderEntry| {
        let o = e.order.map_or_else(|| "n/a".to_string(), |o| format!("{o:.3}"));
        let flags = match (e.at_floor, e.pre_asymptotic) {
            (true, true) => " [at floor, pre-asymptotic]",
            (true, false) => " [at floor]",
            (false, true) => " [pre-asymptotic]",
            _ => "",
        };
        println!("order {name:<12} {o}{flags}");
    };
    show("err_traj_h1", &fitted_orders.traj_h1);
    show("err_half_h1", &fitted_orders.half_h1);
    if let Some(p) = &fitted_orders.phi_h1 {
        show("err_phi_h1", p);
    }
    if let Some(c) = &coincidence {
        println!(
            "BRFD coincidence at delta = {}: {} (max state diff {:.3e}, max phi diff {:.3e})",
            c.delta,
            if c.coincides { "yes" } else { "no" },
            c.max_state_diff,
            c.max_phi_diff
        );
    }
    if let Some(path) = &cfg.json {
        let out = StudyReport {
            schema_version: SCHEMA_VERSION,
            config: cfg,
            problem: problem.name.clone(),
            variant,
            levels,
            guards: Guards {
                at_floor: report.orders.any_at_floor(),
                pre_asymptotic: report.orders.any_pre_asymptotic(),
            },
            fitted_orders,
            coincidence,
        };
        write_json(path, &out)?;
    }
    Ok(())
}

pub fn verify(seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = BatteryConfig::default();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = run_battery(&cfg);
    for c in &report.checks {
        println!(
            "{} {:<26} worst {:>10.3e}  tol {:>8.1e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.tolerance,
            c.detail
        );
    }
    println!("battery finished in {:.2} s", report.elapsed_secs);
    if report.all_passed() {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|c| c.name).collect();
        Err(Failure::Verify(names.join(", ")))
    }
}
