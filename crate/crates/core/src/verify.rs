//! Built-in invariant battery: summation by parts, discrete Sobolev and
//! Poincaré sampling, mollifier construction, Thomas against dense
//! elimination and the elliptic-projection bound.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::grid::{forward_difference, laplacian, sample_interior, InteriorGridFunction, Mesh};
use crate::mollifier::Mollifier;
use crate::norms::{inner_interior, inner_staggered, norm_inf, norm_l2, seminorm_h1};
use crate::problems::{elliptic_defect, elliptic_projection};
use crate::trisolve::Tridiagonal;

pub type LaplacianFn = fn(&InteriorGridFunction, &Mesh) -> Result<InteriorGridFunction>;

/// Operators the battery exercises, replaceable for mutation testing.
#[derive(Debug, Clone, Copy)]
pub struct Hooks {
    pub laplacian: LaplacianFn,
}

impl Default for Hooks {
    fn default() -> Self {
        Self { laplacian }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatteryConfig {
    pub seed: u64,
    /// Random samples per mesh for the identity and inequality items.
    pub samples: usize,
    pub sizes: Vec<usize>,
    pub dense_systems: usize,
    pub dense_max_dim: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self { seed: 20240611, samples: 1000, sizes: vec![9, 99, 999], dense_systems: 200, dense_max_dim: 400 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed discrepancy (or violation count for inequality items).
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatteryReport {
    pub checks: Vec<CheckResult>,
    pub elapsed_secs: f64,
}

impl BatteryReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Runs every item with the default operators.
pub fn run_battery(config: &BatteryConfig) -> BatteryReport {
    run_battery_with(config, &Hooks::default())
}

pub fn run_battery_with(config: &BatteryConfig, hooks: &Hooks) -> BatteryReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let items: [fn(&BatteryConfig, &Hooks, &mut ChaCha8Rng) -> Result<CheckResult>; 9] = [
        summation_by_parts,
        energy_identity,
        sobolev,
        poincare,
        mollifier_hermite,
        mollifier_joins,
        mollifier_bound,
        thomas_vs_dense,
        elliptic_projection_bound,
    ];
    const NAMES: [&str; 9] = [
        "summation_by_parts",
        "energy_identity",
        "sobolev",
        "poincare",
        "mollifier_hermite",
        "mollifier_joins",
        "mollifier_bound",
        "thomas_vs_dense",
        "elliptic_projection_bound",
    ];
    let checks = items
        .iter()
        .zip(NAMES)
        .map(|(item, name)| {
            item(config, hooks, &mut rng).unwrap_or_else(|e| CheckResult {
                name,
                passed: false,
                worst: f64::NAN,
                tolerance: 0.0,
                detail: format!("error: {e}"),
            })
        })
        .collect();
    BatteryReport { checks, elapsed_secs: start.elapsed().as_secs_f64() }
}

fn random_interior(rng: &mut ChaCha8Rng, j: usize) -> InteriorGridFunction {
    let v: Vec<f64> = (0..j).map(|_| rng.gen_range(-1.0..1.0)).collect();
    InteriorGridFunction::from_interior(&v)
}

fn random_mesh(rng: &mut ChaCha8Rng, j: usize) -> Result<Mesh> {
    let x_a = rng.gen_range(-2.0..2.0);
    let len = rng.gen_range(0.25..4.0);
    Mesh::new(x_a, x_a + len, j)
}

fn check(name: &'static str, worst: f64, tolerance: f64, detail: String) -> CheckResult {
    CheckResult { name, passed: worst <= tolerance, worst, tolerance, detail }
}

fn summation_by_parts(cfg: &BatteryConfig, hooks: &Hooks, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0_f64;
    let per_size = cfg.samples.div_ceil(cfg.sizes.len().max(1));
    for &j in &cfg.sizes {
        let mesh = random_mesh(rng, j)?;
        for _ in 0..per_size {
            let (v, z) = (random_interior(rng, j), random_interior(rng, j));
            let (dv, dz) = (forward_difference(&v, &mesh)?, forward_difference(&z, &mesh)?);
            let left = inner_interior(&(hooks.laplacian)(&v, &mesh)?, &z, &mesh)?;
            let middle = -inner_staggered(&dv, &dz, &mesh)?;
            let right = inner_interior(&v, &(hooks.laplacian)(&z, &mesh)?, &mesh)?;
            // scale free of cancellation: h Σ |δv_j δz_j|
            let scale = mesh.h() * dv.values().iter().zip(dz.values()).map(|(a, b)| (a * b).abs()).sum::<f64>();
            worst = worst.max((left - middle).abs() / scale).max((right - middle).abs() / scale);
        }
    }
    Ok(check("summation_by_parts", worst, 1e-12, format!("{per_size} pairs on J in {:?}", cfg.sizes)))
}

fn energy_identity(cfg: &BatteryConfig, hooks: &Hooks, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0_f64;
    let per_size = cfg.samples.div_ceil(cfg.sizes.len().max(1));
    for &j in &cfg.sizes {
        let mesh = random_mesh(rng, j)?;
        for _ in 0..per_size {
            let v = random_interior(rng, j);
            let lhs = inner_interior(&(hooks.laplacian)(&v, &mesh)?, &v, &mesh)?;
            let h1 = seminorm_h1(&v, &mesh)?;
            worst = worst.max((lhs + h1 * h1).abs() / (h1 * h1));
        }
    }
    Ok(check("energy_identity", worst, 1e-12, format!("{per_size} samples on J in {:?}", cfg.sizes)))
}

fn inequality(
    name: &'static str,
    cfg: &BatteryConfig,
    rng: &mut ChaCha8Rng,
    holds: impl Fn(&InteriorGridFunction, &Mesh) -> Result<bool>,
) -> Result<CheckResult> {
    let mut violations = 0usize;
    let mut total = 0usize;
    for &j in &cfg.sizes {
        let mesh = random_mesh(rng, j)?;
        for k in 0..cfg.samples {
            // alternate rough noise with a smooth bump, which is closer to extremal
            let v = if k % 2 == 0 {
                random_interior(rng, j)
            } else {
                let c = rng.gen_range(0.05..0.95);
                let (xa, l) = (mesh.x_a(), mesh.length());
                sample_interior(|x| ((x - xa) / l).min(1.0) * (1.0 - (x - xa) / l) * (1.0 + c * x), &mesh)
            };
            total += 1;
            if !holds(&v, &mesh)? {
                violations += 1;
            }
        }
    }
    Ok(check(name, violations as f64, 0.0, format!("{violations} violations in {total} samples")))
}

fn sobolev(cfg: &BatteryConfig, _: &Hooks, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    inequality("sobolev", cfg, rng, |v, m| Ok(norm_inf(v, m)? <= m.length().sqrt() * seminorm_h1(v, m)?))
}

fn poincare(cfg: &BatteryConfig, _: &Hooks, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    inequality("poincare", cfg, rng, |v, m| Ok(norm_l2(v, m)? <= m.length() * seminorm_h1(v, m)?))
}

fn mollifier_hermite(_: &BatteryConfig, _: &Hooks, _: &mut ChaCha8Rng) -> Result<CheckResult> {
    let m = Mollifier::build(1.0)?;
    let conditions = [
        (1.0, 0, 1.0),
        (1.0, 1, 1.0),
        (1.0, 2, 0.0),
        (1.0, 3, 0.0),
        (2.0, 0, 2.0),
        (2.0, 1, 0.0),
        (2.0, 2, 0.0),
        (2.0, 3, 0.0),
    ];
    let worst = conditions.iter().fold(0.0_f64, |w, &(x, k, want)| w.max((m.bridge(x, k) - want).abs()));
    Ok(check("mollifier_hermite", worst, 1e-10, "eight knot conditions of p_1".into()))
}

fn mollifier_joins(_: &BatteryConfig, _: &Hooks, _: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0_f64;
    for delta in [1e-3, 0.1, 1.0, 3.7, 10.0, 250.0] {
        let m = Mollifier::build(delta)?;
        let scale = delta.max(1.0);
        for k in 0..=3 {
            let identity = [delta, 1.0, 0.0, 0.0][k];
            let plateau = if k == 0 { 2.0 * delta } else { 0.0 };
            worst = worst.max((m.bridge(delta, k) - identity).abs() / scale);
            worst = worst.max((m.bridge(2.0 * delta, k) - plateau).abs() / scale);
        }
    }
    Ok(check("mollifier_joins", worst, 1e-9, "orders 0..=3 at δ and 2δ".into()))
}

fn mollifier_bound(cfg: &BatteryConfig, _: &Hooks, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut excess = 0.0_f64;
    let mut identity_breaks = 0usize;
    for delta in [0.01, 1.0, 10.0] {
        let m = Mollifier::build(delta)?;
        for _ in 0..cfg.samples * 10 {
            let x = rng.gen_range(-10.0 * delta..=10.0 * delta);
            excess = excess.max(m.eval(x, 0).abs() - 2.0 * delta);
            if x.abs() <= delta && m.eval(x, 0) != x {
                identity_breaks += 1;
            }
        }
    }
    let worst = excess.max(0.0) + identity_breaks as f64;
    Ok(check(
        "mollifier_bound",
        worst,
        0.0,
        format!("max(|n_δ| − 2δ) = {excess:e}, identity breaks = {identity_breaks}"),
    ))
}

/// Dense Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap_or(col);
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    x
}

fn thomas_vs_dense(cfg: &BatteryConfig, _: &Hooks, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0_f64;
    for _ in 0..cfg.dense_systems {
        let n = rng.gen_range(1..=cfg.dense_max_dim.max(1));
        let lower: Vec<f64> = (1..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let upper: Vec<f64> = (1..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let off = if i > 0 { lower[i - 1].abs() } else { 0.0 } + if i + 1 < n { upper[i].abs() } else { 0.0 };
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                sign * (off + rng.gen_range(0.1..2.0))
            })
            .collect();
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            dense[i][i] = diag[i];
            if i > 0 {
                dense[i][i - 1] = lower[i - 1];
            }
            if i + 1 < n {
                dense[i][i + 1] = upper[i];
            }
        }
        let x_d = dense_solve(dense, rhs.clone());
        let x_t = Tridiagonal::new(lower, diag, upper)?.solve(&rhs)?;
        let num = x_t.iter().zip(&x_d).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let den = x_d.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        worst = worst.max(num / den);
    }
    Ok(check("thomas_vs_dense", worst, 1e-12, format!("{} diagonally dominant systems", cfg.dense_systems)))
}

fn elliptic_projection_bound(_: &BatteryConfig, _: &Hooks, _: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst_ratio = 0.0_f64;
    let mut detail = Vec::new();
    for cells in [20, 40, 80] {
        let mesh = Mesh::unit(cells - 1)?;
        let v = sample_interior(|x| (PI * x).sin(), &mesh);
        let rv = elliptic_projection(&sample_interior(|x| -PI * PI * (PI * x).sin(), &mesh), &mesh)?;
        let lhs = seminorm_h1(&rv.sub(&v)?, &mesh)?;
        let defect = elliptic_defect(|x| PI.powi(4) * (PI * x).sin(), &mesh);
        let rhs = mesh.length() / 12.0 * mesh.h() * mesh.h() * norm_l2(&defect, &mesh)?;
        worst_ratio = worst_ratio.max(lhs / rhs);
        detail.push(format!("J+1={cells}: {lhs:.3e} <= {rhs:.3e}"));
    }
    Ok(check("elliptic_projection_bound", worst_ratio, 1.0, detail.join(", ")))
}
