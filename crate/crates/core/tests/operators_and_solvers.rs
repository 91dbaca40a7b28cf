use hdi_core::experiments::{DensitySpec2D, PINCHED_SOURCES};
use hdi_core::geometry2d::{curve_jet, nearest_point_2d};
use hdi_core::operators2d::{eval_double_layer, eval_potential_near, eval_single_layer, NearFieldOptions};
use hdi_core::solver::{solve_dirichlet_2d, DirichletKind};
use hdi_core::{BoundaryGrid2D, Density2D, GmresConfig, LayerKind, ParametricCurve, PeriodicSamples};

fn field(x: [f64; 2]) -> (f64, [f64; 2]) {
    let mut u = 0.0;
    let mut g = [0.0; 2];
    for s in PINCHED_SOURCES {
        let r = [x[0] - s[0], x[1] - s[1]];
        let r2 = r[0] * r[0] + r[1] * r[1];
        u += 0.5 * r2.ln();
        g[0] += r[0] / r2;
        g[1] += r[1] / r2;
    }
    (u, g)
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn green_third_identity_on_the_boundary_converges() {
    let curve = ParametricCurve::pinched();
    let mut residuals = Vec::new();
    for n_half in [32, 64, 128] {
        let u = PeriodicSamples::from_fn(n_half, |t| field(curve.point(t)).0).unwrap();
        let dn = PeriodicSamples::from_fn(n_half, |t| {
            let j = curve_jet(&curve, t, 1).unwrap();
            let g = field(j.point()).1;
            g[0] * j.normal[0] + g[1] * j.normal[1]
        })
        .unwrap();
        let k = eval_double_layer(&curve, &u).unwrap();
        let s = eval_single_layer(&curve, &dn, 2).unwrap();
        residuals.push(max_abs(
            (0..u.len()).map(|i| -0.5 * u.values()[i] - (k.values()[i] - s.values()[i])),
        ));
    }
    assert!(residuals.windows(2).all(|w| w[1] < w[0] / 8.0), "{residuals:?}");
    assert!(residuals[2] < 1e-6, "{residuals:?}");
}

#[test]
fn near_field_error_decreases_with_order() {
    let curve = ParametricCurve::pinched();
    let spec = DensitySpec2D::ExpSinShifted;
    let grid = BoundaryGrid2D::new(&curve, 100, 5).unwrap();
    let density = Density2D::new(spec.sample(&curve, 100).unwrap(), 5).unwrap();
    let fine_grid = BoundaryGrid2D::new(&curve, 800, 5).unwrap();
    let fine = Density2D::new(spec.sample(&curve, 800).unwrap(), 5).unwrap();
    let targets: Vec<[f64; 2]> = (0..12)
        .map(|k| {
            let j = curve_jet(&curve, 0.3 + k as f64 * 0.5, 1).unwrap();
            [j.point()[0] + 1e-3 * j.normal[0], j.point()[1] + 1e-3 * j.normal[1]]
        })
        .collect();
    let oracle: Vec<f64> = targets
        .iter()
        .map(|&x| eval_potential_near(&fine_grid, &fine, LayerKind::Single, x, NearFieldOptions::new(4)).unwrap().value)
        .collect();
    let errors: Vec<f64> = (0..=4)
        .map(|m| {
            max_abs(targets.iter().zip(&oracle).map(|(&x, o)| {
                eval_potential_near(&grid, &density, LayerKind::Single, x, NearFieldOptions::new(m)).unwrap().value - o
            }))
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

fn second_kind(n_half: usize) -> (BoundaryGrid2D, PeriodicSamples, usize) {
    let curve = ParametricCurve::pinched();
    let g = PeriodicSamples::from_fn(n_half, |t| field(curve.point(t)).0).unwrap();
    let cfg = GmresConfig {
        tolerance: 1e-12,
        ..GmresConfig::default()
    };
    let sol = solve_dirichlet_2d(&curve, &g, DirichletKind::Second, 3, &cfg).unwrap();
    (BoundaryGrid2D::new(&curve, n_half, 5).unwrap(), sol.density, sol.iterations)
}

#[test]
fn second_kind_iterations_are_mesh_independent() {
    let (_, _, coarse) = second_kind(50);
    let (_, _, fine) = second_kind(200);
    assert!(fine <= coarse + 5, "2N = 100: {coarse} iterations, 2N = 400: {fine}");
}

#[test]
fn reconstructed_field_is_harmonic_and_matches() {
    let (grid, phi, _) = second_kind(100);
    let density = Density2D::new(phi, 5).unwrap();
    let u = |x: [f64; 2]| {
        eval_potential_near(&grid, &density, LayerKind::Double, x, NearFieldOptions::new(4))
            .unwrap()
            .value
    };
    let h = 1e-3;
    let mut checked = 0;
    for i in -8..=8 {
        for j in -8..=8 {
            let x = [0.1 * i as f64, 0.1 * j as f64];
            if grid.winding_number(x) < 0.5 || nearest_point_2d(&grid.curve, x).unwrap().distance < 0.2 {
                continue;
            }
            let c = u(x);
            let lap = (u([x[0] + h, x[1]]) + u([x[0] - h, x[1]]) + u([x[0], x[1] + h]) + u([x[0], x[1] - h]) - 4.0 * c)
                / (h * h);
            assert!(lap.abs() < 1e-4, "laplacian {lap:e} at {x:?}");
            assert!((c - field(x).0).abs() < 1e-9, "value error at {x:?}");
            checked += 1;
        }
    }
    assert!(checked >= 10, "only {checked} interior points");
}
