//! Regularized Nyström evaluation of the four surface operators and of the
//! layer potentials near the surface.
//!
//! Each target subtracts the harmonic interpolant anchored at itself (on the
//! surface) or at its foot point (off the surface) and sums the now bounded
//! integrand with the Fejér product rule. The node coinciding with the target
//! contributes zero.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::chebyshev::{cheb_grid_diff, ChebInterp2D};
use crate::error::{HdiError, Result};
use crate::geometry3d::{dot, nearest_point_in, norm, sub, FootPoint3D, SurfaceGrid, Vec3};
use crate::hdi3d::{DensityJet3D, HdiCoeffs3D, InterpKind, InterpSystem};
pub use crate::operators2d::LayerKind;

const FOUR_PI: f64 = 4.0 * PI;

/// Default near-field radius in units of the local node spacing.
pub const NEAR_FACTOR_3D: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator3D {
    Single,
    Double,
    AdjointDouble,
    Hypersingular,
}

/// Grid values of a density with their parameter-space jets and a per-patch
/// interpolant for off-grid jets.
#[derive(Debug, Clone)]
pub struct SurfaceDensity {
    pub values: Vec<f64>,
    pub jets: Vec<DensityJet3D>,
    interps: Vec<ChebInterp2D>,
}

impl SurfaceDensity {
    pub fn new(grid: &SurfaceGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(HdiError::invalid(format!(
                "density has {} values, surface grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let nn = grid.n() * grid.n();
        let mut jets = Vec::with_capacity(values.len());
        let mut interps = Vec::new();
        for chunk in values.chunks(nn) {
            let d = |alpha| cheb_grid_diff(&grid.cheb, chunk, alpha);
            let (d1, d2, d11, d12, d22) = (d([1, 0])?, d([0, 1])?, d([2, 0])?, d([1, 1])?, d([0, 2])?);
            for k in 0..nn {
                jets.push(DensityJet3D {
                    v: chunk[k],
                    d1: d1[k],
                    d2: d2[k],
                    d11: d11[k],
                    d12: d12[k],
                    d22: d22[k],
                });
            }
            interps.push(ChebInterp2D::new(&grid.cheb, chunk)?);
        }
        Ok(SurfaceDensity { values, jets, interps })
    }

    pub fn from_fn(grid: &SurfaceGrid, f: impl Fn(Vec3) -> f64) -> Result<Self> {
        Self::new(grid, grid.points.iter().map(|&p| f(p)).collect())
    }

    /// Jet of the interpolated density at an arbitrary parameter point.
    pub fn jet_at(&self, patch: usize, xi: [f64; 2]) -> DensityJet3D {
        let j = self.interps[patch].eval(xi);
        DensityJet3D {
            v: j.v,
            d1: j.d1,
            d2: j.d2,
            d11: j.d11,
            d12: j.d12,
            d22: j.d22,
        }
    }
}

/// Near-body target of a cross-body interaction: node `target` lies within
/// the near-field radius of body `body`.
#[derive(Debug, Clone)]
struct CrossNear {
    target: usize,
    body: usize,
    foot: FootPoint3D,
    system: InterpSystem,
}

/// Surface grid plus the per-node interpolation factorizations and the
/// cross-body near-field plan, built once and reused by every application.
#[derive(Debug, Clone)]
pub struct SurfaceOperators {
    pub grid: SurfaceGrid,
    systems: Vec<InterpSystem>,
    body_of_node: Vec<usize>,
    /// Sorted by target.
    cross: Vec<CrossNear>,
    near_factor: f64,
}

impl SurfaceOperators {
    pub fn new(grid: SurfaceGrid) -> Result<Self> {
        Self::with_near_factor(grid, NEAR_FACTOR_3D)
    }

    pub fn with_near_factor(grid: SurfaceGrid, near_factor: f64) -> Result<Self> {
        let systems = grid.jets.par_iter().map(InterpSystem::new).collect::<Result<Vec<_>>>()?;
        let body_of_node: Vec<usize> = (0..grid.len())
            .map(|k| grid.surface.body_of_patch(grid.patch_of(k)))
            .collect();
        let mut cross = Vec::new();
        if grid.n_bodies() > 1 {
            let found: Vec<Vec<CrossNear>> = (0..grid.len())
                .into_par_iter()
                .map(|i| -> Result<Vec<CrossNear>> {
                    let mut out = Vec::new();
                    for b in 0..grid.n_bodies() {
                        if b == body_of_node[i] {
                            continue;
                        }
                        let foot = nearest_point_in(&grid.surface, grid.surface.bodies()[b].clone(), grid.points[i])?;
                        if foot.distance < near_factor * grid.spacing[foot.patch] {
                            let jet = grid.surface.patches()[foot.patch].jet(foot.xi)?;
                            out.push(CrossNear {
                                target: i,
                                body: b,
                                foot,
                                system: InterpSystem::new(&jet)?,
                            });
                        }
                    }
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            cross = found.into_iter().flatten().collect();
        }
        Ok(SurfaceOperators {
            grid,
            systems,
            body_of_node,
            cross,
            near_factor,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Number of (target node, other body) pairs treated as near.
    pub fn cross_near_count(&self) -> usize {
        self.cross.len()
    }

    fn cross_for(&self, i: usize) -> &[CrossNear] {
        let lo = self.cross.partition_point(|c| c.target < i);
        let hi = self.cross.partition_point(|c| c.target <= i);
        &self.cross[lo..hi]
    }
}

struct Kernels {
    g: f64,
    dg_dny: f64,
    dg_dnx: f64,
    d2g: f64,
}

#[inline]
fn kernels(x: Vec3, nx: Option<Vec3>, y: Vec3, ny: Vec3) -> Kernels {
    let r = sub(x, y);
    let r2 = dot(r, r);
    let rinv = 1.0 / r2.sqrt();
    let rinv3 = rinv * rinv * rinv / FOUR_PI;
    let rny = dot(r, ny);
    let (dg_dnx, d2g) = match nx {
        Some(nx) => {
            let rnx = dot(r, nx);
            (-rnx * rinv3, (dot(nx, ny) - 3.0 * rnx * rny / r2) * rinv3)
        }
        None => (0.0, 0.0),
    };
    Kernels {
        g: rinv / FOUR_PI,
        dg_dny: rny * rinv3,
        dg_dnx,
        d2g,
    }
}

fn interp_kind(op: Operator3D) -> InterpKind {
    match op {
        Operator3D::Single | Operator3D::AdjointDouble => InterpKind::S,
        Operator3D::Double | Operator3D::Hypersingular => InterpKind::N,
    }
}

/// Regularized sum for an on-surface target over `nodes`, skipping `skip`.
fn regularized_sum(
    grid: &SurfaceGrid,
    density: &SurfaceDensity,
    op: Operator3D,
    c: &HdiCoeffs3D,
    x: Vec3,
    nx: Vec3,
    nodes: std::ops::Range<usize>,
    skip: Option<usize>,
) -> f64 {
    let mut acc = 0.0;
    let want_nx = matches!(op, Operator3D::AdjointDouble | Operator3D::Hypersingular);
    for j in nodes {
        if Some(j) == skip {
            continue;
        }
        let y = grid.points[j];
        let ny = grid.normals[j];
        let k = kernels(x, want_nx.then_some(nx), y, ny);
        let (u, dnu) = c.eval_u(y, Some(ny));
        let dnu = dnu.unwrap_or(0.0);
        let phi = density.values[j];
        let v = match op {
            Operator3D::Single => k.dg_dny * u + k.g * (phi - dnu),
            Operator3D::Double => k.dg_dny * (phi - u) + k.g * dnu,
            Operator3D::AdjointDouble => k.d2g * u + k.dg_dnx * (phi - dnu),
            Operator3D::Hypersingular => k.d2g * (phi - u) + k.dg_dnx * dnu,
        };
        acc += v * grid.weights[j];
    }
    acc
}

/// Free term `±U/2` or `±dnU/2` of the splitting at the anchor.
fn free_term(op: Operator3D, c: &HdiCoeffs3D, x: Vec3, nx: Vec3) -> f64 {
    let (u, dnu) = c.eval_u(x, Some(nx));
    let dnu = dnu.unwrap_or(0.0);
    match op {
        Operator3D::Single => 0.5 * u,
        Operator3D::Double => -0.5 * u,
        Operator3D::AdjointDouble => 0.5 * dnu,
        Operator3D::Hypersingular => -0.5 * dnu,
    }
}

/// Plain Fejér sum of a layer potential kernel over `nodes`.
fn plain_potential(grid: &SurfaceGrid, density: &SurfaceDensity, kind: LayerKind, x: Vec3, nodes: std::ops::Range<usize>) -> f64 {
    nodes
        .map(|j| {
            let k = kernels(x, None, grid.points[j], grid.normals[j]);
            let ker = match kind {
                LayerKind::Single => k.g,
                LayerKind::Double => k.dg_dny,
            };
            ker * density.values[j] * grid.weights[j]
        })
        .sum()
}

/// Potential over `nodes` regularized with the interpolant `c` anchored on the
/// same body; `mu` is 1 when `x` is enclosed by that body.
fn regularized_potential(
    grid: &SurfaceGrid,
    density: &SurfaceDensity,
    kind: LayerKind,
    c: &HdiCoeffs3D,
    mu: f64,
    x: Vec3,
    nodes: std::ops::Range<usize>,
) -> f64 {
    let op = match kind {
        LayerKind::Single => Operator3D::Single,
        LayerKind::Double => Operator3D::Double,
    };
    let (ux, _) = c.eval_u(x, None);
    let sum = regularized_sum(grid, density, op, c, x, [0.0; 3], nodes, None);
    match kind {
        LayerKind::Single => mu * ux + sum,
        LayerKind::Double => -mu * ux + sum,
    }
}

/// Applies one of the four operators at every grid node. Interactions with
/// other bodies use near-field regularization (anchored on the other body)
/// for `Single`/`Double` and the self-anchored splitting over the whole
/// union for `AdjointDouble`/`Hypersingular`.
pub fn eval_operator_3d(ops: &SurfaceOperators, density: &SurfaceDensity, op: Operator3D) -> Result<Vec<f64>> {
    let grid = &ops.grid;
    if density.values.len() != grid.len() {
        return Err(HdiError::invalid("density does not match the surface grid"));
    }
    let kind = interp_kind(op);
    (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let x = grid.points[i];
            let nx = grid.normals[i];
            let c = ops.systems[i].coeffs(kind, &density.jets[i])?;
            let own = ops.body_of_node[i];
            let cross_regularized = matches!(op, Operator3D::Single | Operator3D::Double) && grid.n_bodies() > 1;
            let self_nodes = if cross_regularized { grid.body_nodes(own) } else { 0..grid.len() };
            let mut v = free_term(op, &c, x, nx) + regularized_sum(grid, density, op, &c, x, nx, self_nodes, Some(i));
            if cross_regularized {
                let layer = if op == Operator3D::Single { LayerKind::Single } else { LayerKind::Double };
                let near = ops.cross_for(i);
                for b in (0..grid.n_bodies()).filter(|&b| b != own) {
                    let nodes = grid.body_nodes(b);
                    v += match near.iter().find(|c| c.body == b) {
                        Some(cn) => {
                            let dj = density.jet_at(cn.foot.patch, cn.foot.xi);
                            let cb = cn.system.coeffs(kind, &dj)?;
                            regularized_potential(grid, density, layer, &cb, 0.0, x, nodes)
                        }
                        None => plain_potential(grid, density, layer, x, nodes),
                    };
                }
            }
            Ok(v)
        })
        .collect()
}

/// Options for [`eval_potential_near_3d`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct NearField3DOptions {
    /// Regularization radius; `None` selects `NEAR_FACTOR_3D` times the node
    /// spacing of the foot-point patch, `Some(0.0)` disables regularization.
    pub threshold: Option<f64>,
}


/// Single- or double-layer potential at an off-surface point. Each body is
/// handled separately: regularized with an interpolant anchored at the foot
/// point on that body when `x` is within the radius, plain quadrature
/// otherwise.
pub fn eval_potential_near_3d(
    ops: &SurfaceOperators,
    density: &SurfaceDensity,
    kind: LayerKind,
    x: Vec3,
    opts: NearField3DOptions,
) -> Result<f64> {
    let grid = &ops.grid;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(HdiError::NonFinite("target point"));
    }
    let ikind = match kind {
        LayerKind::Single => InterpKind::S,
        LayerKind::Double => InterpKind::N,
    };
    let mut total = 0.0;
    for b in 0..grid.n_bodies() {
        let nodes = grid.body_nodes(b);
        if opts.threshold == Some(0.0) {
            total += plain_potential(grid, density, kind, x, nodes);
            continue;
        }
        let foot = nearest_point_in(&grid.surface, grid.surface.bodies()[b].clone(), x)?;
        if foot.distance < 1e-14 {
            return Err(HdiError::invalid("target point lies on the surface"));
        }
        let radius = opts.threshold.unwrap_or(ops.near_factor * grid.spacing[foot.patch]);
        if foot.distance >= radius {
            total += plain_potential(grid, density, kind, x, nodes);
            continue;
        }
        let jet = grid.surface.patches()[foot.patch].jet(foot.xi)?;
        let c = InterpSystem::new(&jet)?.coeffs(ikind, &density.jet_at(foot.patch, foot.xi))?;
        let mu = if dot(sub(x, foot.point), foot.normal) < 0.0 { 1.0 } else { 0.0 };
        total += regularized_potential(grid, density, kind, &c, mu, x, nodes);
    }
    Ok(total)
}

/// Distance from `x` to the nearest grid node, a cheap proxy used in reports.
pub fn nearest_node_distance(grid: &SurfaceGrid, x: Vec3) -> f64 {
    grid.points.iter().map(|&p| norm(sub(p, x))).fold(f64::INFINITY, f64::min)
}
