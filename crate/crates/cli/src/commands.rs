//! One function per subcommand. Each validates its config, runs the study,
//! writes its CSV artifacts and prints a short summary to stderr.

use std::path::PathBuf;

use hdi_core::experiments::{
    converge_2d, determinant_deviation, fitted_order, green_3d, identity_suite, nearfield_2d, neumann_3d,
    preplateau_order, vanishing_orders_3d, Converge2DConfig, DensitySpec2D, Green3DConfig, NearField2DConfig,
    NearFieldLevel, Neumann3DConfig, Operator2D, PINCHED_SOURCES,
};
use hdi_core::solver::{solve_dirichlet_2d, DirichletKind};
use hdi_core::{make_curve, make_surface, GmresConfig, ParametricCurve, PatchedSurface, PeriodicSamples};

use crate::config::ExperimentConfig;
use crate::output::{opt_sci, sci, Table};
use crate::CliError;

fn curve(cfg: &ExperimentConfig, default: &str) -> Result<ParametricCurve, CliError> {
    Ok(make_curve(&cfg.str_or("curve", default), &cfg.params("curve"))?)
}

fn surface(cfg: &ExperimentConfig, default: &str) -> Result<PatchedSurface, CliError> {
    Ok(make_surface(&cfg.str_or("surface", default), &cfg.params("surface"))?)
}

fn density(cfg: &ExperimentConfig, key: &str, default: &str) -> Result<DensitySpec2D, CliError> {
    Ok(DensitySpec2D::parse(&cfg.str_or(key, default), cfg.opt_f64(&format!("{key}_arg"))?)?)
}

fn gmres_config(cfg: &ExperimentConfig, tolerance: f64, max_iterations: usize) -> Result<GmresConfig, CliError> {
    let restart = cfg.usize_or("restart", 0)?;
    Ok(GmresConfig {
        tolerance: cfg.f64_or("tolerance", tolerance)?,
        restart: (restart > 0).then_some(restart),
        max_iterations: cfg.usize_or("max_iterations", max_iterations)?,
    })
}

/// `converge-2d`: operator errors over a refinement ladder against a
/// refined-grid run.
///
/// CSV: `N,error_max,fitted_order` where `fitted_order` is the order between
/// a level and the previous one. With several `orders`, a leading `M` column
/// is added.
pub fn converge_2d_cmd(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.check_keys(
        &[
            "curve",
            "density",
            "density_arg",
            "operator",
            "orders",
            "oversample",
            "ladder",
            "reference_points",
            "reference_order",
            "output",
        ],
        &["curve"],
    )?;
    let orders = cfg.usize_list_or("orders", &[2])?;
    let base = Converge2DConfig {
        curve: curve(cfg, "circle")?,
        density: density(cfg, "density", "exp-sin-shifted")?,
        operator: Operator2D::parse(&cfg.str_or("operator", "single"))?,
        order: 0,
        oversample: cfg.usize_or("oversample", 1)?,
        ladder: cfg.usize_list_or("ladder", &[40, 80, 160, 320])?,
        reference_points: cfg.usize_or("reference_points", 1280)?,
        reference_order: cfg.usize_or("reference_order", 5)?,
    };
    let multi = orders.len() > 1;
    let mut table = if multi {
        Table::new(&["M", "N", "error_max", "fitted_order"])
    } else {
        Table::new(&["N", "error_max", "fitted_order"])
    };
    for &m in &orders {
        let rows = converge_2d(&Converge2DConfig { order: m, ..base.clone() })?;
        for r in &rows {
            let mut row = vec![r.n.to_string(), sci(r.error), opt_sci(r.order)];
            if multi {
                row.insert(0, m.to_string());
            }
            table.push(row);
        }
        eprintln!(
            "M = {m}: least-squares order {:.3}, pre-plateau order {}",
            fitted_order(&rows),
            preplateau_order(&rows).map(|o| format!("{o:.3}")).unwrap_or_else(|| "n/a".into())
        );
    }
    table.write(cfg.path("output").as_deref())
}

fn level_label(level: &NearFieldLevel) -> String {
    level.order.map(|m| m.to_string()).unwrap_or_else(|| "none".into())
}

/// `nearfield-2d`: potentials on an interior grid from solved densities of
/// a manufactured harmonic field.
///
/// CSV: one row per regularization level (`M = none` is plain quadrature).
/// With `grid_output = <prefix>`, long-form error grids `x1,x2,log10_error`
/// go to `<prefix>_<M>_<single|double>.csv`.
pub fn nearfield_2d_cmd(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.check_keys(
        &[
            "curve",
            "sources",
            "points",
            "orders",
            "threshold",
            "grid_spacing",
            "solve_order",
            "output",
            "grid_output",
        ],
        &["curve"],
    )?;
    let points = cfg.usize_or("points", 200)?;
    if points % 2 != 0 || points == 0 {
        return Err(CliError::Validation(format!("points = {points} must be even and positive")));
    }
    let spacing = cfg.f64_or("grid_spacing", 0.01)?;
    if spacing <= 0.0 {
        return Err(CliError::Validation("grid_spacing must be positive".into()));
    }
    let study = NearField2DConfig {
        curve: curve(cfg, "pinched")?,
        sources: cfg.points_or("sources", &PINCHED_SOURCES)?,
        n_half: points / 2,
        orders: cfg.usize_list_or("orders", &[0, 4])?,
        threshold: cfg.opt_f64("threshold")?,
        grid_spacing: spacing,
        solve_order: cfg.usize_or("solve_order", 3)?,
    };
    let report = nearfield_2d(&study)?;
    let mut table = Table::new(&[
        "M",
        "max_error_single",
        "max_error_double",
        "max_gradient_error_single",
        "max_gradient_error_double",
    ]);
    let mut grids = Vec::new();
    for level in &report.levels {
        table.push(vec![
            level_label(level),
            sci(level.max_single),
            sci(level.max_double),
            sci(level.max_grad_single),
            sci(level.max_grad_double),
        ]);
        if let Some(prefix) = cfg.opt_str("grid_output") {
            for (k, layer) in ["single", "double"].iter().enumerate() {
                let mut g = Table::new(&["x1", "x2", "log10_error"]);
                for p in &level.points {
                    g.push(vec![
                        sci(p.x[0]),
                        sci(p.x[1]),
                        format!("{:.5}", p.errors[k].max(f64::MIN_POSITIVE).log10()),
                    ]);
                }
                grids.push((PathBuf::from(format!("{prefix}_{}_{layer}.csv", level_label(level))), g));
            }
        }
    }
    eprintln!(
        "{} evaluation points; density errors vs 4x refined solve: double {:.3e}, single {:.3e}; GMRES iterations {:?}",
        report.levels.first().map(|l| l.points.len()).unwrap_or(0),
        report.double_density_error,
        report.single_density_error,
        report.gmres_iterations
    );
    for (path, g) in &grids {
        g.write(Some(path))?;
    }
    table.write(cfg.path("output").as_deref())
}

/// `green-3d`: Green's formula residuals `max |K[u] - S[dn u] + u/2|` and
/// `max |N[u] - K'[dn u] + dn u/2|` over a ladder of per-patch grid sizes.
pub fn green_3d_cmd(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.check_keys(&["surface", "ladder", "source", "output"], &["surface"])?;
    let report = green_3d(&Green3DConfig {
        surface: surface(cfg, "sphere")?,
        ladder: cfg.usize_list_or("ladder", &[8, 12, 16, 24, 32])?,
        source: cfg.point_or("source", [2.0, 2.0, 2.0])?,
    })?;
    let mut table = Table::new(&[
        "N",
        "error_sl_dl",
        "fitted_order_sl_dl",
        "error_adl_hs",
        "fitted_order_adl_hs",
    ]);
    for (a, b) in report.single_double.iter().zip(&report.adjoint_hypersingular) {
        table.push(vec![a.n.to_string(), sci(a.error), opt_sci(a.order), sci(b.error), opt_sci(b.order)]);
    }
    eprintln!(
        "least-squares orders: SL-DL {:.3}, ADL-HS {:.3}",
        fitted_order(&report.single_double),
        fitted_order(&report.adjoint_hypersingular)
    );
    table.write(cfg.path("output").as_deref())
}

/// `solve-neumann-3d`: exterior Neumann problem for a point-source field,
/// trace error and reconstruction at a probe point.
pub fn solve_neumann_3d_cmd(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.check_keys(
        &[
            "surface",
            "n",
            "sources",
            "probe",
            "tolerance",
            "max_iterations",
            "restart",
            "output",
            "history_output",
        ],
        &["surface"],
    )?;
    let s = surface(cfg, "two-spheres")?;
    let (sources, probe) = if cfg.str_or("surface", "two-spheres") == "two-spheres" {
        let p = cfg.params("surface");
        let get = |k: &str, d: f64| p.get(k).and_then(|v| v.parse::<f64>().ok()).unwrap_or(d);
        let r = get("radius", 1.0);
        let c = r + 0.5 * get("gap", 0.1);
        (vec![[-c + 0.2 * r, 0.1 * r, -0.15 * r], [c - 0.1 * r, 0.2 * r, 0.1 * r]], [0.0; 3])
    } else {
        (vec![[0.1, 0.2, -0.15]], [0.0, 0.0, 3.0])
    };
    let study = Neumann3DConfig {
        surface: s,
        n: cfg.usize_or("n", 20)?,
        sources: cfg.points_or("sources", &sources)?,
        probe: cfg.point_or("probe", probe)?,
        gmres: gmres_config(cfg, 1e-8, 200)?,
    };
    let r = neumann_3d(&study)?;
    let mut table = Table::new(&[
        "n",
        "iterations",
        "final_residual",
        "trace_error",
        "probe_exact",
        "probe_error_regularized",
        "probe_error_plain",
    ]);
    table.push(vec![
        study.n.to_string(),
        r.iterations.to_string(),
        sci(r.history.last().copied().unwrap_or(f64::NAN)),
        sci(r.trace_error),
        sci(r.probe_exact),
        sci(r.probe_error_regularized),
        sci(r.probe_error_plain),
    ]);
    if let Some(path) = cfg.path("history_output") {
        let mut h = Table::new(&["iteration", "relative_residual"]);
        for (i, v) in r.history.iter().enumerate() {
            h.push(vec![i.to_string(), sci(*v)]);
        }
        h.write(Some(&path))?;
    }
    eprintln!(
        "GMRES {} iterations; trace error {:.3e}; probe error regularized {:.3e}, plain {:.3e}",
        r.iterations, r.trace_error, r.probe_error_regularized, r.probe_error_plain
    );
    table.write(cfg.path("output").as_deref())
}

/// `solve-dirichlet-2d`: single-layer (`kind = first`) or double-layer
/// (`kind = second`) density for Dirichlet data given by a registered
/// density function. CSV: `t,x1,x2,density`.
pub fn solve_dirichlet_2d_cmd(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.check_keys(
        &[
            "curve",
            "data",
            "data_arg",
            "kind",
            "order",
            "points",
            "tolerance",
            "max_iterations",
            "restart",
            "refinement",
            "output",
        ],
        &["curve"],
    )?;
    let c = curve(cfg, "pinched")?;
    let data = density(cfg, "data", "log-sources")?;
    let kind = match cfg.str_or("kind", "second").as_str() {
        "first" => DirichletKind::First,
        "second" => DirichletKind::Second,
        other => {
            return Err(CliError::Validation(format!(
                "unknown kind '{other}'; registered: first, second"
            )))
        }
    };
    let points = cfg.usize_or("points", 200)?;
    if points % 2 != 0 || points == 0 {
        return Err(CliError::Validation(format!("points = {points} must be even and positive")));
    }
    let order = cfg.usize_or("order", 3)?;
    let gm = gmres_config(cfg, 1e-12, 400)?;
    let solve = |n_half: usize| -> Result<_, CliError> {
        let g = data.sample(&c, n_half)?;
        Ok(solve_dirichlet_2d(&c, &g, kind, order, &gm)?)
    };
    let sol = solve(points / 2)?;
    let refinement = cfg.usize_or("refinement", 0)?;
    if refinement > 1 {
        let fine = solve(refinement * points / 2)?;
        let diff = sol
            .density
            .values()
            .iter()
            .zip(fine.density.values().iter().step_by(refinement))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        eprintln!("max density difference vs {refinement}x refined solve: {diff:.3e}");
    }
    eprintln!(
        "GMRES {} iterations, final relative residual {:.3e}",
        sol.iterations,
        sol.history.last().copied().unwrap_or(f64::NAN)
    );
    table_for_density(&c, &sol.density).write(cfg.path("output").as_deref())
}

fn table_for_density(c: &ParametricCurve, d: &PeriodicSamples) -> Table {
    let mut t = Table::new(&["t", "x1", "x2", "density"]);
    let n = d.len();
    for (j, v) in d.values().iter().enumerate() {
        let tj = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let x = c.point(tj);
        t.push(vec![sci(tj), sci(x[0]), sci(x[1]), sci(*v)]);
    }
    t
}

/// `identities`: the operator identity checks. Exits with the numerical
/// failure code if any check exceeds its tolerance.
pub fn identities_cmd(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.check_keys(&["output"], &[])?;
    let checks = identity_suite()?;
    let mut table = Table::new(&["check", "deviation", "tolerance", "passed"]);
    for c in &checks {
        table.push(vec![
            format!("\"{}\"", c.name),
            sci(c.deviation),
            sci(c.tolerance),
            c.passed().to_string(),
        ]);
    }
    table.write(cfg.path("output").as_deref())?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("identity checks failed: {}", failed.join("; "))))
    }
}

/// `determinant-3d`: largest relative deviation of the interpolation
/// matrix determinant from `-4 * element^5` over a surface grid.
pub fn determinant_3d_cmd(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.check_keys(&["surface", "n", "output"], &["surface"])?;
    let s = surface(cfg, "sphere")?;
    let n = cfg.usize_or("n", 16)?;
    let dev = determinant_deviation(&s, n)?;
    let mut table = Table::new(&["surface", "n", "max_relative_deviation"]);
    table.push(vec![s.name().to_string(), n.to_string(), sci(dev)]);
    table.write(cfg.path("output").as_deref())
}

/// `vanishing-3d`: log-log slopes of the interpolant residuals along
/// on-surface approach paths at random points.
pub fn vanishing_3d_cmd(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.check_keys(&["surface", "samples", "seed", "output"], &["surface"])?;
    let s = surface(cfg, "sphere")?;
    let rows = vanishing_orders_3d(&s, cfg.usize_or("samples", 20)?, cfg.u64_or("seed", 2024)?)?;
    let mut table = Table::new(&[
        "sample",
        "slope_us",
        "slope_phi_minus_dnus",
        "slope_phi_minus_un",
        "slope_dnun",
    ]);
    for (i, r) in rows.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(r.iter().map(|v| sci(*v)));
        table.push(row);
    }
    let range = |k: usize| {
        let lo = rows.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
        format!("[{lo:.2}, {hi:.2}]")
    };
    eprintln!(
        "slope ranges: |U_S| {}, |phi - dnU_S| {}, |phi - U_N| {}, |dnU_N| {}",
        range(0),
        range(1),
        range(2),
        range(3)
    );
    table.write(cfg.path("output").as_deref())
}
