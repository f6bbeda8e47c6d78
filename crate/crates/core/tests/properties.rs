use num_rational::Ratio;
use proptest::prelude::*;
use relaxfd::grid::{forward_difference, laplacian, InteriorGridFunction, Mesh};
use relaxfd::mollifier::Mollifier;
use relaxfd::norms::{inner_interior, inner_staggered, norm_inf, norm_l2, seminorm_h1};
use relaxfd::trisolve::{assemble_step_operator, check_step_condition};
use relaxfd::GridFunction;

type Q = Ratio<i128>;

fn mesh_strategy() -> impl Strategy<Value = Mesh> {
    (1usize..60, -3.0f64..3.0, 0.1f64..5.0).prop_map(|(j, a, l)| Mesh::new(a, a + l, j).unwrap())
}

fn pair_strategy() -> impl Strategy<Value = (Mesh, InteriorGridFunction, InteriorGridFunction)> {
    mesh_strategy().prop_flat_map(|m| {
        let j = m.interior();
        (
            Just(m),
            prop::collection::vec(-10.0f64..10.0, j).prop_map(|v| InteriorGridFunction::from_interior(&v)),
            prop::collection::vec(-10.0f64..10.0, j).prop_map(|v| InteriorGridFunction::from_interior(&v)),
        )
    })
}

fn nonzero(v: &InteriorGridFunction) -> bool {
    v.interior().iter().any(|x| x.abs() > 1e-6)
}

proptest! {
    #[test]
    fn laplacian_is_linear((m, v, z) in pair_strategy(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let lhs = laplacian(&v.combine(a, &z, b).unwrap(), &m).unwrap();
        let rhs = laplacian(&v, &m).unwrap().combine(a, &laplacian(&z, &m).unwrap(), b).unwrap();
        let scale = 4.0 / (m.h() * m.h()) * (a.abs() * v.max_abs() + b.abs() * z.max_abs()) + 1.0;
        for j in 0..m.nodes_len() {
            prop_assert!((lhs[j] - rhs[j]).abs() <= 1e-13 * scale);
        }
        prop_assert_eq!(lhs[0], 0.0);
        prop_assert_eq!(lhs[m.nodes_len() - 1], 0.0);
    }

    #[test]
    fn forward_difference_is_linear((m, v, z) in pair_strategy(), a in -5.0f64..5.0) {
        let lhs = forward_difference(&v.combine(a, &z, 1.0).unwrap(), &m).unwrap();
        let dv = forward_difference(&v, &m).unwrap();
        let dz = forward_difference(&z, &m).unwrap();
        prop_assert_eq!(lhs.len(), m.interior() + 1);
        let scale = 2.0 / m.h() * (a.abs() * v.max_abs() + z.max_abs()) + 1.0;
        for j in 0..lhs.len() {
            prop_assert!((lhs[j] - (a * dv[j] + dz[j])).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn interior_operations_keep_zero_endpoints((m, v, z) in pair_strategy(), a in -5.0f64..5.0) {
        let last = m.nodes_len() - 1;
        let phi = GridFunction::new((0..m.nodes_len()).map(|j| j as f64 + 1.0).collect());
        for w in [v.combine(a, &z, 2.0).unwrap(), v.sub(&z).unwrap(), v.scale(a), v.hadamard(&phi).unwrap(), laplacian(&v, &m).unwrap()] {
            prop_assert_eq!(w[0], 0.0);
            prop_assert_eq!(w[last], 0.0);
        }
        prop_assert_eq!(GridFunction::new(vec![3.0; m.nodes_len()]).to_interior()[last], 0.0);
    }

    #[test]
    fn summation_by_parts((m, v, z) in pair_strategy()) {
        let (dv, dz) = (forward_difference(&v, &m).unwrap(), forward_difference(&z, &m).unwrap());
        let left = inner_interior(&laplacian(&v, &m).unwrap(), &z, &m).unwrap();
        let middle = -inner_staggered(&dv, &dz, &m).unwrap();
        let right = inner_interior(&v, &laplacian(&z, &m).unwrap(), &m).unwrap();
        let scale = m.h() * dv.values().iter().zip(dz.values()).map(|(a, b)| (a * b).abs()).sum::<f64>() + f64::MIN_POSITIVE;
        prop_assert!((left - middle).abs() <= 1e-12 * scale);
        prop_assert!((right - middle).abs() <= 1e-12 * scale);
    }

    #[test]
    fn energy_identity((m, v, _z) in pair_strategy()) {
        prop_assume!(nonzero(&v));
        let lhs = inner_interior(&laplacian(&v, &m).unwrap(), &v, &m).unwrap();
        let h1 = seminorm_h1(&v, &m).unwrap();
        prop_assert!((lhs + h1 * h1).abs() <= 1e-12 * h1 * h1);
    }

    #[test]
    fn sobolev_and_poincare((m, v, _z) in pair_strategy()) {
        let h1 = seminorm_h1(&v, &m).unwrap();
        prop_assert!(norm_inf(&v, &m).unwrap() <= m.length().sqrt() * h1);
        prop_assert!(norm_l2(&v, &m).unwrap() <= m.length() * h1);
    }

    #[test]
    fn h1_seminorm_is_definite_on_zero_boundary_functions(m in mesh_strategy(), idx in 0usize..1000, value in prop_oneof![-1e3f64..-1e-8, 1e-8f64..1e3]) {
        let j = m.interior();
        let mut v = vec![0.0; j];
        v[idx % j] = value;
        let v = InteriorGridFunction::from_interior(&v);
        prop_assert!(seminorm_h1(&v, &m).unwrap() > 0.0);
        prop_assert_eq!(seminorm_h1(&InteriorGridFunction::zeros(&m), &m).unwrap(), 0.0);
    }

    #[test]
    fn mollifier_joins_and_bound(delta in 1e-3f64..1e3, x in -1.0f64..1.0, order in 0usize..4) {
        let n = Mollifier::build(delta).unwrap();
        let scale = delta.max(1.0);
        let identity = [delta, 1.0, 0.0, 0.0][order];
        let plateau = if order == 0 { 2.0 * delta } else { 0.0 };
        prop_assert!((n.bridge(delta, order) - identity).abs() <= 1e-9 * scale);
        prop_assert!((n.bridge(2.0 * delta, order) - plateau).abs() <= 1e-9 * scale);
        let y = 10.0 * delta * x;
        prop_assert!(n.eval(y, 0).abs() <= 2.0 * delta);
        if y.abs() <= delta {
            prop_assert_eq!(n.eval(y, 0), y);
        }
    }

    #[test]
    fn step_operator_is_coercive_under_the_step_condition((m, v, _z) in pair_strategy(), dt in 1e-4f64..1.0, fill in prop::collection::vec(-1.0f64..1.0, 64)) {
        prop_assume!(nonzero(&v));
        // |φ|∞ ≤ 2/dt gives dt · |φ|∞ / 4 ≤ 1/2
        let bound = 2.0 / dt;
        let phi = GridFunction::new((0..m.nodes_len()).map(|j| bound * fill[j % fill.len()]).collect());
        prop_assert!(check_step_condition(dt, phi.max_abs()).unwrap().passed);
        let t = assemble_step_operator(&m, dt, &phi).unwrap();
        let tv = t.apply_interior(&v).unwrap();
        let lhs = inner_interior(&tv, &v, &m).unwrap();
        let h1 = seminorm_h1(&v, &m).unwrap();
        let scale = (norm_l2(&v, &m).unwrap().powi(2) + dt * h1 * h1) * 1e-12;
        prop_assert!(lhs >= 0.5 * dt * h1 * h1 - scale - 1e-12);
    }

    #[test]
    fn solve_is_a_right_inverse((m, v, _z) in pair_strategy(), dt in 1e-4f64..0.5, fill in prop::collection::vec(-1.0f64..1.0, 64)) {
        let phi = GridFunction::new((0..m.nodes_len()).map(|j| (1.0 / dt) * fill[j % fill.len()]).collect());
        let t = assemble_step_operator(&m, dt, &phi).unwrap();
        let x = t.solve_interior(&v).unwrap();
        let back = t.apply_interior(&x).unwrap();
        let scale = v.max_abs() + 1.0;
        for j in 0..m.nodes_len() {
            prop_assert!((back[j] - v[j]).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn nonpositive_potential_always_solves((m, v, _z) in pair_strategy(), dt in 1e-6f64..10.0, fill in prop::collection::vec(0.0f64..100.0, 64)) {
        // diagonal dominance holds for any dt when φ ≤ 0
        let phi = GridFunction::new((0..m.nodes_len()).map(|j| -fill[j % fill.len()]).collect());
        let t = assemble_step_operator(&m, dt, &phi).unwrap();
        for i in 0..t.dim() {
            let off = if i > 0 { t.lower()[i - 1].abs() } else { 0.0 } + if i + 1 < t.dim() { t.upper()[i].abs() } else { 0.0 };
            prop_assert!(t.diag()[i] > off);
        }
        let x = t.solve_interior(&v).unwrap();
        prop_assert!(x.max_abs() <= v.max_abs() * (1.0 + 1e-12));
    }
}

fn falling(k: usize, m: usize) -> i128 {
    (0..m).map(|i| (k - i) as i128).product()
}

/// Exact Gauss–Jordan elimination over the rationals.
fn solve_exact(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Vec<Q> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).find(|&r| a[r][col] != Q::from_integer(0)).expect("nonsingular");
        a.swap(col, p);
        b.swap(col, p);
        for r in 0..n {
            if r != col && a[r][col] != Q::from_integer(0) {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    let t = a[col][c];
                    a[r][c] -= f * t;
                }
                let t = b[col];
                b[r] -= f * t;
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

/// Hermite conditions `(point, order, value)` for monomials `x^0..x^7`.
fn hermite_system(conditions: &[(i128, usize, i128)]) -> Vec<Q> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for &(x, order, value) in conditions {
        let row = (0..8)
            .map(|k| if k < order { Q::from_integer(0) } else { Q::from_integer(falling(k, order) * x.pow((k - order) as u32)) })
            .collect();
        a.push(row);
        b.push(Q::from_integer(value));
    }
    solve_exact(a, b)
}

fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn eval_poly(c: &[Q], x: f64, order: usize) -> f64 {
    c.iter().enumerate().skip(order).map(|(k, &ck)| to_f64(ck) * falling(k, order) as f64 * x.powi((k - order) as i32)).sum()
}

#[test]
fn bridge_coefficients_match_exact_rational_solve() {
    let exact = hermite_system(&[(0, 0, 1), (0, 1, 1), (0, 2, 0), (0, 3, 0), (1, 0, 2), (1, 1, 0), (1, 2, 0), (1, 3, 0)]);
    let frozen = [1, 1, 0, 0, 15, -39, 34, -10];
    for (q, f) in exact.iter().zip(frozen) {
        assert_eq!(*q, Q::from_integer(f));
    }
    let m = Mollifier::build(1.0).unwrap();
    for (c, f) in m.coefficients().iter().zip(frozen) {
        assert!((c - f as f64).abs() < 1e-10, "{c} vs {f}");
    }
}

#[test]
fn scaling_law_matches_direct_solve_at_delta_two() {
    // p_2 on [2, 4] in the original variable: p(2) = 2, p'(2) = 1, p(4) = 4
    let direct = hermite_system(&[(2, 0, 2), (2, 1, 1), (2, 2, 0), (2, 3, 0), (4, 0, 4), (4, 1, 0), (4, 2, 0), (4, 3, 0)]);
    let m = Mollifier::build(2.0).unwrap();
    for i in 0..=40 {
        let x = 2.0 + 2.0 * i as f64 / 40.0;
        for order in 0..=3 {
            let want = eval_poly(&direct, x, order);
            let got = m.bridge(x, order);
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "x = {x}, order {order}: {got} vs {want}");
        }
    }
}
