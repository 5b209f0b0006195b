mod common;

use std::sync::Arc;

use molt::conv1d::apply_linv;
use molt::grid::{uniform_grid, BoundaryCondition, Field, Grid1D, TensorGrid};
use molt::quadrature::{build_plan, local_weights, phi_moments};
use molt::reaction::{ac_fixed_point, ACParams};
use molt::resolvent::{amplification, beta_select, heat_step_1d, BetaPolicy, LaguerreCoeffs};
use num_complex::Complex64;

const NUS: [f64; 4] = [1e-6, 0.1, 1.0, 10.0];

fn close_rel(got: &[f64], want: &[f64], rel: f64) -> bool {
    let scale = want.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    got.iter()
        .zip(want)
        .all(|(g, w)| (g - w).abs() <= rel * scale)
}

#[test]
fn moments_match_quadrature() {
    for nu in [1e-6, 1e-3, 0.1, 1.0, 10.0, 39.0, 41.0, 200.0] {
        let phi = phi_moments(nu, 6).unwrap();
        for (k, p) in phi.iter().enumerate() {
            let o = common::phi_oracle(nu, k);
            assert!((p - o).abs() <= 1e-13 * o, "nu = {nu}, k = {k}: {p} vs {o}");
        }
    }
}

#[test]
fn weights_match_lagrange_moments() {
    for m in 1..=4usize {
        // Centered and one-sided node sets in the local cell coordinate.
        let sets: Vec<Vec<f64>> = (0..=m)
            .map(|shift| (0..=m).map(|i| shift as f64 - i as f64).collect())
            .collect();
        for offsets in &sets {
            for nu in NUS {
                let w = local_weights(nu, offsets).unwrap();
                let o = common::weight_oracle(nu, offsets);
                assert!(
                    close_rel(&w, &o, 1e-12),
                    "M = {m}, nu = {nu}, {offsets:?}: {w:?} vs {o:?}"
                );
            }
        }
    }
}

#[test]
fn plan_rows_match_oracle_on_nonuniform_grid() {
    let nodes: Vec<f64> = (0..=24)
        .map(|i| {
            let s = i as f64 / 24.0;
            s + 0.15 * (std::f64::consts::PI * s).sin() * s
        })
        .collect();
    let grid = Grid1D::from_nodes(nodes.clone()).unwrap();
    for m in 1..=4usize {
        for alpha in [1e-4, 2.0, 30.0, 400.0] {
            let plan = build_plan(&grid, alpha, m).unwrap();
            for j in 1..=24 {
                let (first, w) = plan.left_row(j);
                let h = nodes[j] - nodes[j - 1];
                let offsets: Vec<f64> = (first..=first + m)
                    .map(|i| (nodes[j] - nodes[i]) / h)
                    .collect();
                let o = common::weight_oracle(alpha * h, &offsets);
                assert!(
                    close_rel(w, &o, 1e-11),
                    "left M = {m}, alpha = {alpha}, j = {j}"
                );
            }
            for j in 0..24 {
                let (first, w) = plan.right_row(j);
                let h = nodes[j + 1] - nodes[j];
                let offsets: Vec<f64> = (first..=first + m)
                    .map(|i| (nodes[i] - nodes[j]) / h)
                    .collect();
                let o = common::weight_oracle(alpha * h, &offsets);
                assert!(
                    close_rel(w, &o, 1e-11),
                    "right M = {m}, alpha = {alpha}, j = {j}"
                );
            }
        }
    }
}

#[test]
fn cubic_integrated_exactly() {
    let offsets = [1.0, 0.0, -1.0, -2.0];
    let w = local_weights(0.5, &offsets).unwrap();
    let got: f64 = w.iter().zip(offsets).map(|(w, z)| w * z.powi(3)).sum();
    let want = common::phi_oracle(0.5, 3);
    assert!((got - want).abs() < 1e-15, "{got} vs {want}");
}

#[test]
fn uniform_allen_cahn_steps_match_root_finder() {
    let f = |u: f64| u - u * u * u;
    let g = uniform_grid(0.0, 1.0, 40).unwrap();
    let grid = Arc::new(TensorGrid::line(g));
    let dt = 0.1;
    let u0 = 0.5;
    let field = Field::from_fn(grid, |_| u0);
    let params = ACParams::new(0.1).unwrap();

    let trap = common::bisect(|x| x - u0 - 0.5 * dt * (f(u0) + f(x)), 0.0, 1.0);
    let out = ac_fixed_point(
        &field,
        params,
        2,
        dt,
        BoundaryCondition::HomogeneousNeumann,
        Default::default(),
    )
    .unwrap();
    assert!(out.values().iter().all(|v| (v - trap).abs() < 1e-12));

    let fu = 1.0 - 3.0 * u0 * u0;
    let pre = u0 + 2.0 * dt / 3.0 * f(u0) + dt * dt / 6.0 * fu * f(u0);
    let hb = common::bisect(|x| x - pre - dt / 3.0 * f(x), 0.0, 1.0);
    let out = ac_fixed_point(
        &field,
        params,
        3,
        dt,
        BoundaryCondition::Periodic,
        Default::default(),
    )
    .unwrap();
    assert!(out.values().iter().all(|v| (v - hb).abs() < 1e-12));
}

/// Least-squares amplitude of `sin x` in one heat step on `cells` cells.
fn eigen_amplitude(cells: usize, order: usize, dt: f64) -> f64 {
    let g = uniform_grid(0.0, 2.0 * std::f64::consts::PI, cells).unwrap();
    let grid = Arc::new(TensorGrid::line(g.clone()));
    let cfg = molt::grid::SchemeConfig {
        gamma: 0.18 * 0.18,
        dt,
        order,
        beta2: beta_select(order, BetaPolicy::StiffDecay).unwrap(),
        spatial_order: 4,
        bc: BoundaryCondition::Periodic,
    };
    let plan = build_plan(&g, cfg.alpha(), 4).unwrap();
    let u = Field::from_fn(grid, |x| x[0].sin());
    let v = heat_step_1d(&u, &cfg, &plan).unwrap();
    let num: f64 = v
        .values()
        .iter()
        .zip(u.values().iter())
        .map(|(a, b)| a * b)
        .sum();
    let den: f64 = u.values().iter().map(|b| b * b).sum();
    num / den
}

#[test]
fn heat_eigenmode_matches_amplification_after_richardson() {
    for order in 1..=3 {
        let dt = 0.1;
        let c = LaguerreCoeffs::with_policy(order, BetaPolicy::StiffDecay).unwrap();
        let want = amplification(Complex64::new(-0.18 * 0.18 * dt, 0.0), &c)
            .unwrap()
            .re;
        let (a1, a2, a3) = (
            eigen_amplitude(128, order, dt),
            eigen_amplitude(256, order, dt),
            eigen_amplitude(512, order, dt),
        );
        let p = ((a1 - a2) / (a2 - a3)).log2();
        let extrapolated = a3 + (a3 - a2) / (2f64.powf(p) - 1.0);
        assert!(
            (extrapolated - want).abs() < 1e-10,
            "P = {order}: {extrapolated} vs {want} (p = {p})"
        );
    }
}

#[test]
fn linv_of_constants_is_exact_for_both_closures() {
    let g = uniform_grid(-1.0, 2.0, 50).unwrap();
    for m in 1..=4 {
        let plan = build_plan(&g, 7.0, m).unwrap();
        for bc in [
            BoundaryCondition::Periodic,
            BoundaryCondition::HomogeneousNeumann,
        ] {
            let out = apply_linv(&vec![2.5; 51], bc, &plan).unwrap();
            assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-13), "M = {m}, {bc}");
        }
    }
}
