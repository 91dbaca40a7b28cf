//! Reproducible convergence and accuracy studies shared by the command-line
//! runner and the acceptance tests.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{HdiError, Result};
use crate::geometry2d::ParametricCurve;
use crate::geometry3d::{dot, norm, scale, sub, PatchedSurface, SurfaceGrid, SurfaceJet, Vec3};
use crate::hdi3d::{assemble_a, DensityJet3D, InterpKind, InterpSystem};
use crate::operators2d::{
    eval_adjoint_double_layer, eval_double_layer, eval_hypersingular_with, eval_potential_near,
    eval_single_layer_with, BoundaryGrid2D, Density2D, LayerKind, NearFieldOptions, OperatorOptions,
};
use crate::operators3d::{
    eval_operator_3d, eval_potential_near_3d, NearField3DOptions, Operator3D, SurfaceDensity, SurfaceOperators,
};
use crate::solver::{solve_dirichlet_2d, solve_neumann_ext_3d, DirichletKind, GmresConfig};
use crate::spectral::PeriodicSamples;

/// Point sources outside the pinched curve used by the near-field study.
pub const PINCHED_SOURCES: [[f64; 2]; 4] = [[-0.6, 1.0], [-1.2, 0.2], [0.2, -1.1], [1.5, 0.2]];

/// Registered 2D density functions, evaluated at points of the plane.
pub const DENSITY_2D_REGISTRY: [&str; 5] = ["exp-sin-shifted", "exp-sin-origin", "log-sources", "constant", "cos"];

/// Density given as a function of the boundary point (or, for `Cos`, the
/// curve parameter).
#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec2D {
    /// `e^{sin(x1 cos x2)} / |x - (1/3, 1/3)|`.
    ExpSinShifted,
    /// `e^{x2 sin(x1 + 5)} / |x|`.
    ExpSinOrigin,
    /// `sum_k log|x - s_k|`.
    LogSources(Vec<[f64; 2]>),
    Constant(f64),
    /// `cos(k t)` in the curve parameter.
    Cos(f64),
}

impl DensitySpec2D {
    pub fn parse(name: &str, arg: Option<f64>) -> Result<Self> {
        Ok(match name {
            "exp-sin-shifted" => DensitySpec2D::ExpSinShifted,
            "exp-sin-origin" => DensitySpec2D::ExpSinOrigin,
            "log-sources" => DensitySpec2D::LogSources(PINCHED_SOURCES.to_vec()),
            "constant" => DensitySpec2D::Constant(arg.unwrap_or(1.0)),
            "cos" => DensitySpec2D::Cos(arg.unwrap_or(1.0)),
            other => {
                return Err(HdiError::UnknownName {
                    kind: "density",
                    name: other.to_string(),
                    registry: DENSITY_2D_REGISTRY.join(", "),
                })
            }
        })
    }

    pub fn eval(&self, x: [f64; 2], t: f64) -> f64 {
        match self {
            DensitySpec2D::ExpSinShifted => {
                (x[0] * x[1].cos()).sin().exp() / (x[0] - 1.0 / 3.0).hypot(x[1] - 1.0 / 3.0)
            }
            DensitySpec2D::ExpSinOrigin => (x[1] * (x[0] + 5.0).sin()).exp() / x[0].hypot(x[1]),
            DensitySpec2D::LogSources(s) => s.iter().map(|p| (x[0] - p[0]).hypot(x[1] - p[1]).ln()).sum(),
            DensitySpec2D::Constant(c) => *c,
            DensitySpec2D::Cos(k) => (k * t).cos(),
        }
    }

    pub fn sample(&self, curve: &ParametricCurve, n_half: usize) -> Result<PeriodicSamples> {
        PeriodicSamples::from_fn(n_half, |t| self.eval(curve.point(t), t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator2D {
    Single,
    Hypersingular,
    Double,
    AdjointDouble,
}

impl Operator2D {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "single" | "S" => Operator2D::Single,
            "hypersingular" | "N" => Operator2D::Hypersingular,
            "double" | "K" => Operator2D::Double,
            "adjoint-double" | "K'" => Operator2D::AdjointDouble,
            other => {
                return Err(HdiError::UnknownName {
                    kind: "operator",
                    name: other.to_string(),
                    registry: "single, hypersingular, double, adjoint-double".into(),
                })
            }
        })
    }
}

pub fn apply_operator_2d(
    op: Operator2D,
    curve: &ParametricCurve,
    density: &PeriodicSamples,
    opts: OperatorOptions,
) -> Result<PeriodicSamples> {
    match op {
        Operator2D::Single => eval_single_layer_with(curve, density, opts),
        Operator2D::Hypersingular => Ok(eval_hypersingular_with(curve, density, opts)?.values),
        Operator2D::Double => eval_double_layer(curve, density),
        Operator2D::AdjointDouble => eval_adjoint_double_layer(curve, density),
    }
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    /// Total number of boundary points (or points per patch side in 3D).
    pub n: usize,
    pub error: f64,
    /// Order measured against the previous level; `None` on the first row.
    pub order: Option<f64>,
}

/// Least-squares slope of `log(error)` against `-log(n)`.
pub fn fitted_order(rows: &[ConvergenceRow]) -> f64 {
    let ns: Vec<f64> = rows.iter().map(|r| 1.0 / r.n as f64).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.error).collect();
    loglog_slope(&ns, &es)
}

/// Order over the last refinement step whose coarse error is at least 100
/// times the smallest error of the study (the last step before round-off
/// plateau); `None` if no such step exists.
pub fn preplateau_order(rows: &[ConvergenceRow]) -> Option<f64> {
    let floor = rows.iter().map(|r| r.error).fold(f64::INFINITY, f64::min);
    rows.windows(2)
        .rev()
        .find(|w| w[0].error >= 100.0 * floor)
        .map(|w| (w[0].error / w[1].error).ln() / (w[1].n as f64 / w[0].n as f64).ln())
}

/// Attaches per-level orders to `(n, error)` pairs.
pub fn with_orders(pairs: &[(usize, f64)]) -> Vec<ConvergenceRow> {
    pairs
        .iter()
        .enumerate()
        .map(|(k, &(n, error))| ConvergenceRow {
            n,
            error,
            order: (k > 0).then(|| {
                let (n0, e0) = pairs[k - 1];
                (e0 / error).ln() / (n as f64 / n0 as f64).ln()
            }),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Converge2DConfig {
    pub curve: ParametricCurve,
    pub density: DensitySpec2D,
    pub operator: Operator2D,
    pub order: usize,
    pub oversample: usize,
    /// Total numbers of boundary points, each dividing `reference_points`.
    pub ladder: Vec<usize>,
    pub reference_points: usize,
    pub reference_order: usize,
}

/// Maximum nodal error of each ladder level against a refined-grid run.
pub fn converge_2d(cfg: &Converge2DConfig) -> Result<Vec<ConvergenceRow>> {
    validate_ladder(&cfg.ladder)?;
    for &n in &cfg.ladder {
        if n % 2 != 0 || !cfg.reference_points.is_multiple_of(n) {
            return Err(HdiError::invalid(format!(
                "ladder size {n} must be even and divide the reference size {}",
                cfg.reference_points
            )));
        }
    }
    let ref_density = cfg.density.sample(&cfg.curve, cfg.reference_points / 2)?;
    let reference = apply_operator_2d(cfg.operator, &cfg.curve, &ref_density, OperatorOptions::order(cfg.reference_order))?;
    let mut pairs = Vec::new();
    for &n in &cfg.ladder {
        let dens = cfg.density.sample(&cfg.curve, n / 2)?;
        let opts = OperatorOptions {
            order: cfg.order,
            oversample: cfg.oversample,
        };
        let vals = apply_operator_2d(cfg.operator, &cfg.curve, &dens, opts)?;
        let stride = cfg.reference_points / n;
        let err = vals
            .values()
            .iter()
            .zip(reference.values().iter().step_by(stride))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pairs.push((n, err));
    }
    Ok(with_orders(&pairs))
}

pub fn validate_ladder(ladder: &[usize]) -> Result<()> {
    if ladder.is_empty() {
        return Err(HdiError::invalid("refinement ladder is empty"));
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HdiError::invalid("refinement ladder must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct NearField2DConfig {
    pub curve: ParametricCurve,
    pub sources: Vec<[f64; 2]>,
    /// Half the number of boundary points.
    pub n_half: usize,
    pub orders: Vec<usize>,
    /// Regularization distance; `None` selects `10 h`.
    pub threshold: Option<f64>,
    /// Spacing of the Cartesian evaluation grid.
    pub grid_spacing: f64,
    /// Interpolation order of the first-kind density solve.
    pub solve_order: usize,
}

/// One evaluation point of the near-field study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearFieldPoint {
    pub x: [f64; 2],
    /// Single- and double-layer potential errors.
    pub errors: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearFieldLevel {
    /// `None` for plain trapezoidal evaluation.
    pub order: Option<usize>,
    pub points: Vec<NearFieldPoint>,
    pub max_single: f64,
    pub max_double: f64,
    pub max_grad_single: f64,
    pub max_grad_double: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearField2DReport {
    pub levels: Vec<NearFieldLevel>,
    /// Max nodal difference of the double-layer density against a solve on
    /// a four times finer grid.
    pub double_density_error: f64,
    pub single_density_error: f64,
    pub gmres_iterations: (usize, usize),
}

fn log_sources(sources: &[[f64; 2]], x: [f64; 2]) -> (f64, [f64; 2]) {
    let mut u = 0.0;
    let mut g = [0.0; 2];
    for s in sources {
        let r = [x[0] - s[0], x[1] - s[1]];
        let r2 = r[0] * r[0] + r[1] * r[1];
        u += 0.5 * r2.ln();
        g[0] += r[0] / r2;
        g[1] += r[1] / r2;
    }
    (u, g)
}

/// Interior evaluation points on a Cartesian grid (winding-number test).
pub fn interior_grid(grid: &BoundaryGrid2D, spacing: f64) -> Vec<[f64; 2]> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &grid.points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let nx = ((hi[0] - lo[0]) / spacing).ceil() as usize;
    let ny = ((hi[1] - lo[1]) / spacing).ceil() as usize;
    let mut pts = Vec::new();
    for i in 0..=nx {
        for j in 0..=ny {
            let x = [lo[0] + i as f64 * spacing, lo[1] + j as f64 * spacing];
            if grid.winding_number(x) > 0.5 {
                pts.push(x);
            }
        }
    }
    pts.retain(|x| {
        crate::geometry2d::nearest_point_2d(&grid.curve, *x)
            .map(|f| f.distance > 1e-12)
            .unwrap_or(false)
    });
    pts
}

/// Density solves on a manufactured harmonic field followed by potential
/// evaluation on an interior grid, with and without regularization.
pub fn nearfield_2d(cfg: &NearField2DConfig) -> Result<NearField2DReport> {
    let gm = GmresConfig {
        tolerance: 1e-12,
        max_iterations: 400,
        restart: None,
    };
    let solve = |n_half: usize, kind: DirichletKind| -> Result<(PeriodicSamples, usize)> {
        let g = PeriodicSamples::from_fn(n_half, |t| log_sources(&cfg.sources, cfg.curve.point(t)).0)?;
        let s = solve_dirichlet_2d(&cfg.curve, &g, kind, cfg.solve_order, &gm)?;
        Ok((s.density, s.iterations))
    };
    let (phi, it_d) = solve(cfg.n_half, DirichletKind::Second)?;
    let (psi, it_s) = solve(cfg.n_half, DirichletKind::First)?;
    let (phi_f, _) = solve(4 * cfg.n_half, DirichletKind::Second)?;
    let (psi_f, _) = solve(4 * cfg.n_half, DirichletKind::First)?;
    let diff = |a: &PeriodicSamples, b: &PeriodicSamples| {
        a.values()
            .iter()
            .zip(b.values().iter().step_by(4))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let max_order = cfg.orders.iter().copied().max().unwrap_or(0);
    let grid = BoundaryGrid2D::new(&cfg.curve, cfg.n_half, max_order + 1)?;
    let dphi = Density2D::new(phi.clone(), max_order + 1)?;
    let dpsi = Density2D::new(psi.clone(), max_order + 1)?;
    let points = interior_grid(&grid, cfg.grid_spacing);

    let mut levels = Vec::new();
    let mut level_orders: Vec<Option<usize>> = vec![None];
    level_orders.extend(cfg.orders.iter().map(|&m| Some(m)));
    for lvl in level_orders {
        let opts = NearFieldOptions {
            order: lvl.unwrap_or(0),
            threshold: if lvl.is_none() { Some(0.0) } else { cfg.threshold },
            want_gradient: true,
        };
        let evals: Vec<(NearFieldPoint, [f64; 2])> = points
            .par_iter()
            .map(|&x| {
                let (u, gu) = log_sources(&cfg.sources, x);
                let s = eval_potential_near(&grid, &dpsi, LayerKind::Single, x, opts)?;
                let d = eval_potential_near(&grid, &dphi, LayerKind::Double, x, opts)?;
                let gs = s.gradient.expect("gradient");
                let gd = d.gradient.expect("gradient");
                Ok((
                    NearFieldPoint {
                        x,
                        errors: [(s.value - u).abs(), (d.value - u).abs()],
                    },
                    [
                        (gs[0] - gu[0]).hypot(gs[1] - gu[1]),
                        (gd[0] - gu[0]).hypot(gd[1] - gu[1]),
                    ],
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let fold = |f: &dyn Fn(&(NearFieldPoint, [f64; 2])) -> f64| evals.iter().map(f).fold(0.0, f64::max);
        levels.push(NearFieldLevel {
            order: lvl,
            max_single: fold(&|e| e.0.errors[0]),
            max_double: fold(&|e| e.0.errors[1]),
            max_grad_single: fold(&|e| e.1[0]),
            max_grad_double: fold(&|e| e.1[1]),
            points: evals.into_iter().map(|e| e.0).collect(),
        });
    }
    Ok(NearField2DReport {
        levels,
        double_density_error: diff(&phi, &phi_f),
        single_density_error: diff(&psi, &psi_f),
        gmres_iterations: (it_d, it_s),
    })
}

/// `2 pi / h` for a total of `n` points, for reporting.
pub fn spacing_for(n: usize) -> f64 {
    2.0 * PI / n as f64
}

/// Point-source harmonic field `sum 1/|x - s|` and its normal derivative.
fn source_field(sources: &[Vec3], x: Vec3, n: Vec3) -> (f64, f64) {
    let mut u = 0.0;
    let mut dn = 0.0;
    for s in sources {
        let r = sub(x, *s);
        let d = norm(r);
        u += 1.0 / d;
        dn -= dot(r, n) / (d * d * d);
    }
    (u, dn)
}

/// Test field for the Green's formula study: `1/|x - x0| - 1/|x + x0|`.
pub fn green_test_field(x0: Vec3, x: Vec3, n: Vec3) -> (f64, f64) {
    let (a, da) = source_field(&[x0], x, n);
    let (b, db) = source_field(&[scale(x0, -1.0)], x, n);
    (a - b, da - db)
}

#[derive(Debug, Clone)]
pub struct Green3DConfig {
    pub surface: PatchedSurface,
    /// Points per patch side.
    pub ladder: Vec<usize>,
    /// Source location of the test field (outside the surface).
    pub source: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Green3DReport {
    /// `max |K[u] - S[dn u] + u/2|` per level.
    pub single_double: Vec<ConvergenceRow>,
    /// `max |N[u] - K'[dn u] + dn u/2|` per level.
    pub adjoint_hypersingular: Vec<ConvergenceRow>,
}

/// Residuals of the two interior Green's formulas for a harmonic test field.
pub fn green_3d(cfg: &Green3DConfig) -> Result<Green3DReport> {
    validate_ladder(&cfg.ladder)?;
    let mut sd = Vec::new();
    let mut ah = Vec::new();
    for &n in &cfg.ladder {
        let ops = SurfaceOperators::new(SurfaceGrid::new(&cfg.surface, n)?)?;
        let g = &ops.grid;
        let (u, dnu): (Vec<f64>, Vec<f64>) = (0..g.len())
            .map(|k| green_test_field(cfg.source, g.points[k], g.normals[k]))
            .unzip();
        let du = SurfaceDensity::new(g, u)?;
        let dn = SurfaceDensity::new(g, dnu)?;
        let k = eval_operator_3d(&ops, &du, Operator3D::Double)?;
        let s = eval_operator_3d(&ops, &dn, Operator3D::Single)?;
        let h = eval_operator_3d(&ops, &du, Operator3D::Hypersingular)?;
        let kp = eval_operator_3d(&ops, &dn, Operator3D::AdjointDouble)?;
        let e1 = (0..g.len())
            .map(|i| (k[i] - s[i] + 0.5 * du.values[i]).abs())
            .fold(0.0, f64::max);
        let e2 = (0..g.len())
            .map(|i| (h[i] - kp[i] + 0.5 * dn.values[i]).abs())
            .fold(0.0, f64::max);
        sd.push((n, e1));
        ah.push((n, e2));
    }
    Ok(Green3DReport {
        single_double: with_orders(&sd),
        adjoint_hypersingular: with_orders(&ah),
    })
}

/// Largest relative deviation of `det A` from `-4 element^5` over a grid.
pub fn determinant_deviation(surface: &PatchedSurface, n: usize) -> Result<f64> {
    let g = SurfaceGrid::new(surface, n)?;
    Ok(g.jets
        .iter()
        .map(|j| {
            let expect = -4.0 * j.element.powi(5);
            ((assemble_a(j).determinant() - expect) / expect).abs()
        })
        .fold(0.0, f64::max))
}

/// Smooth non-harmonic ambient function with value, gradient and Hessian.
fn ambient(x: Vec3) -> (f64, Vec3, [Vec3; 3]) {
    let a = 0.7 * x[0] - 0.3 * x[2];
    let (s, c) = a.sin_cos();
    let q = 1.0 + x[1] * x[1];
    let e = x[2].exp();
    let v = s * q + e;
    let g = [0.7 * c * q, 2.0 * x[1] * s, -0.3 * c * q + e];
    let h = [
        [-0.49 * s * q, 1.4 * x[1] * c, 0.21 * s * q],
        [1.4 * x[1] * c, 2.0 * s, -0.6 * x[1] * c],
        [0.21 * s * q, -0.6 * x[1] * c, -0.09 * s * q + e],
    ];
    (v, g, h)
}

fn ambient_jet(j: &SurfaceJet) -> DensityJet3D {
    let (v, g, h) = ambient(j.x);
    let hq = |a: Vec3, b: Vec3| dot(a, [dot(h[0], b), dot(h[1], b), dot(h[2], b)]);
    DensityJet3D {
        v,
        d1: dot(g, j.d1),
        d2: dot(g, j.d2),
        d11: hq(j.d1, j.d1) + dot(g, j.d11),
        d12: hq(j.d1, j.d2) + dot(g, j.d12),
        d22: hq(j.d2, j.d2) + dot(g, j.d22),
    }
}

/// Log-log slopes of `|U_S|`, `|phi - dn U_S|`, `|phi - U_N|`, `|dn U_N|`
/// along surface paths leaving `samples` random points, fitted over
/// `delta = 0.004 / 2^k`, `k = 0..4`.
pub fn vanishing_orders_3d(surface: &PatchedSurface, samples: usize, seed: u64) -> Result<Vec<[f64; 4]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deltas = [0.001, 0.0005, 0.00025, 0.000125];
    let mut out = Vec::new();
    for _ in 0..samples {
        let p = rng.random_range(0..surface.patches().len());
        let xi = [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)];
        let ang: f64 = rng.random_range(0.0..2.0 * PI);
        let patch = &surface.patches()[p];
        let jet = patch.jet(xi)?;
        let phi = ambient_jet(&jet);
        let sys = InterpSystem::new(&jet)?;
        let cs = sys.coeffs(InterpKind::S, &phi)?;
        let cn = sys.coeffs(InterpKind::N, &phi)?;
        let mut series = vec![Vec::new(); 4];
        for &d in &deltas {
            let q = patch.jet([xi[0] + d * ang.cos(), xi[1] + d * ang.sin()])?;
            let f = ambient(q.x).0;
            let (us, dus) = cs.eval_u(q.x, Some(q.normal));
            let (un, dun) = cn.eval_u(q.x, Some(q.normal));
            let vals = [us.abs(), (f - dus.unwrap_or(0.0)).abs(), (f - un).abs(), dun.unwrap_or(0.0).abs()];
            for k in 0..4 {
                series[k].push(vals[k]);
            }
        }
        out.push(std::array::from_fn(|k| loglog_slope(&deltas, &series[k])));
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let xs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone)]
pub struct Neumann3DConfig {
    pub surface: PatchedSurface,
    pub n: usize,
    /// Point sources inside the bodies defining the manufactured solution.
    pub sources: Vec<Vec3>,
    /// Exterior point where the reconstructed field is checked.
    pub probe: Vec3,
    pub gmres: GmresConfig,
}

impl Neumann3DConfig {
    /// Two unit spheres with gap `gap`, one off-center source in each, probe
    /// at the gap midpoint.
    pub fn two_spheres(gap: f64, n: usize) -> Result<Self> {
        let c = 1.0 + 0.5 * gap;
        Ok(Neumann3DConfig {
            surface: PatchedSurface::two_spheres(1.0, gap)?,
            n,
            sources: vec![[-c + 0.2, 0.1, -0.15], [c - 0.1, 0.2, 0.1]],
            probe: [0.0; 3],
            gmres: GmresConfig::default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neumann3DReport {
    pub iterations: usize,
    pub history: Vec<f64>,
    /// Max nodal error of the solved trace.
    pub trace_error: f64,
    pub probe_exact: f64,
    pub probe_error_regularized: f64,
    pub probe_error_plain: f64,
}

/// Exterior Neumann solve for a manufactured field, then reconstruction
/// `u = D[v] - S[dn u]` at the probe with and without regularization.
pub fn neumann_3d(cfg: &Neumann3DConfig) -> Result<Neumann3DReport> {
    let ops = SurfaceOperators::new(SurfaceGrid::new(&cfg.surface, cfg.n)?)?;
    let g = &ops.grid;
    let (u, dnu): (Vec<f64>, Vec<f64>) = (0..g.len())
        .map(|k| source_field(&cfg.sources, g.points[k], g.normals[k]))
        .unzip();
    let sol = solve_neumann_ext_3d(&ops, &dnu, &cfg.gmres)?;
    let trace_error = sol.trace.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dv = SurfaceDensity::new(g, sol.trace.clone())?;
    let dd = SurfaceDensity::new(g, dnu)?;
    let exact = source_field(&cfg.sources, cfg.probe, [0.0; 3]).0;
    let eval = |opts: NearField3DOptions| -> Result<f64> {
        Ok(eval_potential_near_3d(&ops, &dv, LayerKind::Double, cfg.probe, opts)?
            - eval_potential_near_3d(&ops, &dd, LayerKind::Single, cfg.probe, opts)?)
    };
    let reg = eval(NearField3DOptions::default())?;
    let plain = eval(NearField3DOptions { threshold: Some(0.0) })?;
    Ok(Neumann3DReport {
        iterations: sol.iterations,
        history: sol.history,
        trace_error,
        probe_exact: exact,
        probe_error_regularized: (reg - exact).abs(),
        probe_error_plain: (plain - exact).abs(),
    })
}

/// One check of the identity suite.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub deviation: f64,
    pub tolerance: f64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Gauss, hypersingular-of-constants, Calderón and shell-theorem identities.
pub fn identity_suite() -> Result<Vec<IdentityCheck>> {
    let mut out = Vec::new();
    let curves = [
        ParametricCurve::circle(1.0)?,
        ParametricCurve::ellipse(2.0, 1.0)?,
        ParametricCurve::kite(),
        ParametricCurve::pinched(),
    ];
    let mut k1: f64 = 0.0;
    let mut n1: f64 = 0.0;
    let mut d_in: f64 = 0.0;
    for c in &curves {
        let one = PeriodicSamples::from_fn(64, |_| 1.0)?;
        let k = eval_double_layer(c, &one)?;
        k1 = k1.max(k.values().iter().map(|v| (v + 0.5).abs()).fold(0.0, f64::max));
        let n = eval_hypersingular_with(c, &one, OperatorOptions::order(1))?.values;
        n1 = n1.max(n.values().iter().map(|v| v.abs()).fold(0.0, f64::max));
        let grid = BoundaryGrid2D::new(c, 64, 2)?;
        let dens = Density2D::new(one.clone(), 2)?;
        let opts = NearFieldOptions::new(2);
        let inner = c.point(0.7);
        let centroid = [0.0, 0.0];
        for x in [centroid, [0.97 * inner[0], 0.97 * inner[1]]] {
            let v = eval_potential_near(&grid, &dens, LayerKind::Double, x, opts)?.value;
            d_in = d_in.max((v + 1.0).abs());
        }
        let outer = [1.03 * inner[0], 1.03 * inner[1]];
        let v = eval_potential_near(&grid, &dens, LayerKind::Double, outer, opts)?.value;
        d_in = d_in.max(v.abs());
    }
    out.push(IdentityCheck {
        name: "2D K[1] = -1/2",
        deviation: k1,
        tolerance: 1e-10,
    });
    out.push(IdentityCheck {
        name: "2D N[1] = 0",
        deviation: n1,
        tolerance: 1e-10,
    });
    out.push(IdentityCheck {
        name: "2D D[1] = -1 inside, 0 outside",
        deviation: d_in,
        tolerance: 1e-8,
    });

    let circle = ParametricCurve::circle(1.0)?;
    let phi = DensitySpec2D::ExpSinShifted.sample(&circle, 128)?;
    let s = eval_single_layer_with(&circle, &phi, OperatorOptions::order(3))?;
    let ns = eval_hypersingular_with(&circle, &s, OperatorOptions::order(3))?.values;
    let kk = eval_double_layer(&circle, &eval_double_layer(&circle, &phi)?)?;
    let rhs: Vec<f64> = phi.values().iter().zip(kk.values()).map(|(p, k)| -0.25 * p + k).collect();
    out.push(IdentityCheck {
        name: "2D Calderon NS = -I/4 + K^2 (circle, 2N = 256)",
        deviation: max_abs_diff(ns.values(), &rhs),
        tolerance: 1e-6,
    });

    let ops = SurfaceOperators::new(SurfaceGrid::new(&PatchedSurface::sphere([0.0; 3], 1.0)?, 12)?)?;
    let one = SurfaceDensity::from_fn(&ops.grid, |_| 1.0)?;
    let k = eval_operator_3d(&ops, &one, Operator3D::Double)?;
    out.push(IdentityCheck {
        name: "3D K[1] = -1/2 (sphere, n = 12)",
        deviation: k.iter().map(|v| (v + 0.5).abs()).fold(0.0, f64::max),
        tolerance: 2e-3,
    });
    let n = eval_operator_3d(&ops, &one, Operator3D::Hypersingular)?;
    out.push(IdentityCheck {
        name: "3D N[1] = 0 (sphere, n = 12)",
        deviation: n.iter().map(|v| v.abs()).fold(0.0, f64::max),
        tolerance: 5e-3,
    });
    let opts = NearField3DOptions::default();
    let mut shell: f64 = 0.0;
    for (x, expect) in [([0.0, 0.5, 0.0], 1.0), ([2.0, 0.0, 0.0], 0.5), ([0.0, 0.0, 1.001], 1.0 / 1.001)] {
        let v = eval_potential_near_3d(&ops, &one, LayerKind::Single, x, opts)?;
        shell = shell.max((v - expect).abs());
    }
    out.push(IdentityCheck {
        name: "3D shell theorem S[1] = 1/max(r, 1)",
        deviation: shell,
        tolerance: 5e-3,
    });
    let mut gauss: f64 = 0.0;
    for (x, expect) in [([0.0; 3], -1.0), ([0.1, 0.2, 0.95], -1.0), ([0.0, 0.0, 1.02], 0.0), ([3.0, 0.0, 0.0], 0.0)] {
        let v = eval_potential_near_3d(&ops, &one, LayerKind::Double, x, opts)?;
        gauss = gauss.max((v - expect).abs());
    }
    out.push(IdentityCheck {
        name: "3D D[1] = -1 inside, 0 outside",
        deviation: gauss,
        tolerance: 2e-3,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(pairs: &[(usize, f64)]) -> Vec<ConvergenceRow> {
        with_orders(pairs)
    }

    #[test]
    fn fitted_order_recovers_power_law() {
        let r = rows(&[(10, 1.0), (20, 1.0 / 32.0), (40, 1.0 / 1024.0)]);
        assert!((fitted_order(&r) - 5.0).abs() < 1e-12);
        assert!((r[1].order.unwrap() - 5.0).abs() < 1e-12);
        assert!(r[0].order.is_none());
    }

    #[test]
    fn preplateau_order_skips_round_off_floor() {
        let r = rows(&[(20, 1e-3), (40, 1e-7), (80, 2e-13), (160, 1e-13), (320, 1.5e-13)]);
        let o = preplateau_order(&r).unwrap();
        assert!((o - (1e-7f64 / 2e-13).log2()).abs() < 1e-12);
        assert!(preplateau_order(&rows(&[(10, 1.0), (20, 0.9)])).is_none());
    }

    #[test]
    fn ladder_validation() {
        assert!(validate_ladder(&[]).is_err());
        assert!(validate_ladder(&[40, 20]).is_err());
        assert!(validate_ladder(&[20, 40]).is_ok());
        let cfg = Converge2DConfig {
            curve: ParametricCurve::circle(1.0).unwrap(),
            density: DensitySpec2D::ExpSinShifted,
            operator: Operator2D::Hypersingular,
            order: 2,
            oversample: 1,
            ladder: vec![24, 50],
            reference_points: 200,
            reference_order: 3,
        };
        assert!(converge_2d(&cfg).is_err());
    }

    #[test]
    fn hypersingular_study_converges() {
        let cfg = Converge2DConfig {
            curve: ParametricCurve::circle(1.0).unwrap(),
            density: DensitySpec2D::ExpSinShifted,
            operator: Operator2D::Hypersingular,
            order: 2,
            oversample: 1,
            ladder: vec![20, 40, 80],
            reference_points: 320,
            reference_order: 3,
        };
        let r = converge_2d(&cfg).unwrap();
        assert!(r[0].error > r[1].error && r[1].error > r[2].error);
        assert!(r[2].error < 1e-8);
    }

    #[test]
    fn unknown_names_list_registries() {
        match DensitySpec2D::parse("gaussian", None) {
            Err(HdiError::UnknownName { registry, .. }) => assert!(registry.contains("exp-sin-origin")),
            other => panic!("{other:?}"),
        }
        assert!(Operator2D::parse("bogus").is_err());
        assert_eq!(Operator2D::parse("N").unwrap(), Operator2D::Hypersingular);
    }

    #[test]
    fn interior_grid_points_are_inside() {
        let c = ParametricCurve::pinched();
        let g = BoundaryGrid2D::new(&c, 50, 2).unwrap();
        let pts = interior_grid(&g, 0.1);
        assert!(pts.len() > 50);
        assert!(pts.iter().all(|&x| g.winding_number(x) > 0.5));
    }

    #[test]
    fn green_study_runs_on_small_grids() {
        let cfg = Green3DConfig {
            surface: PatchedSurface::sphere([0.0; 3], 1.0).unwrap(),
            ladder: vec![6, 10],
            source: [2.0, 2.0, 2.0],
        };
        let r = green_3d(&cfg).unwrap();
        assert_eq!(r.single_double.len(), 2);
        assert!(r.single_double[1].error < r.single_double[0].error);
        assert!(r.adjoint_hypersingular[1].error < r.adjoint_hypersingular[0].error);
    }

    #[test]
    fn green_test_field_is_harmonic() {
        let x0 = [2.0, 2.0, 2.0];
        let h = 1e-3;
        let x = [0.3, -0.2, 0.5];
        let f = |p: Vec3| green_test_field(x0, p, [0.0; 3]).0;
        let mut lap = -6.0 * f(x);
        for k in 0..3 {
            let mut p = x;
            p[k] += h;
            lap += f(p);
            p[k] -= 2.0 * h;
            lap += f(p);
        }
        assert!((lap / (h * h)).abs() < 1e-5);
        // normal derivative against a finite difference
        let n = [0.0, 0.6, 0.8];
        let fd = (f(add3(x, n, h)) - f(add3(x, n, -h))) / (2.0 * h);
        assert!((green_test_field(x0, x, n).1 - fd).abs() < 1e-6);
    }

    fn add3(a: Vec3, b: Vec3, s: f64) -> Vec3 {
        [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
    }

    #[test]
    fn ambient_jet_matches_finite_differences() {
        let s = PatchedSurface::ellipsoid([0.0; 3], [1.0, 1.2, 1.5]).unwrap();
        let p = &s.patches()[1];
        let xi = [0.2, -0.3];
        let j = ambient_jet(&p.jet(xi).unwrap());
        let h = 1e-4;
        let f = |a: f64, b: f64| ambient(p.point([a, b])).0;
        let d1 = (f(xi[0] + h, xi[1]) - f(xi[0] - h, xi[1])) / (2.0 * h);
        let d22 = (f(xi[0], xi[1] + h) - 2.0 * f(xi[0], xi[1]) + f(xi[0], xi[1] - h)) / (h * h);
        assert!((j.d1 - d1).abs() < 1e-7);
        assert!((j.d22 - d22).abs() < 1e-5);
    }
}
