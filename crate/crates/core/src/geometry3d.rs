//! Closed surfaces described by non-overlapping patches mapped from
//! `[-1, 1]^2`, their Chebyshev quadrature grids, nearest-point projection and
//! the inside/outside indicator.

use std::f64::consts::PI;
use std::ops::Range;

use crate::chebyshev::{cheb_grid, ChebGrid, ChebInterp2D};
use crate::error::{HdiError, Result};
use crate::geometry2d::Params;
use crate::jet::{Jet2, Scalar};

pub const SURFACE_REGISTRY: [&str; 5] = ["sphere", "ellipsoid", "parallelepiped", "two-spheres", "tabulated"];

const MIN_ELEMENT: f64 = 1e-10;
const SCAN: usize = 24;

pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Position, partials, unit normal, area element and normal partials of a
/// patch at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceJet {
    pub xi: [f64; 2],
    pub x: Vec3,
    pub d1: Vec3,
    pub d2: Vec3,
    pub d11: Vec3,
    pub d12: Vec3,
    pub d22: Vec3,
    pub normal: Vec3,
    pub element: f64,
    pub dn1: Vec3,
    pub dn2: Vec3,
}

impl SurfaceJet {
    fn from_partials(xi: [f64; 2], x: Vec3, d1: Vec3, d2: Vec3, d11: Vec3, d12: Vec3, d22: Vec3) -> Result<Self> {
        let big_n = cross(d1, d2);
        let element = norm(big_n);
        if !(element >= MIN_ELEMENT) {
            return Err(HdiError::Regularity {
                at: format!("{xi:?}"),
                speed: element,
            });
        }
        let normal = scale(big_n, 1.0 / element);
        let dn = |dn_big: Vec3| {
            let tang = sub(dn_big, scale(normal, dot(normal, dn_big)));
            scale(tang, 1.0 / element)
        };
        let dn1 = dn(add(cross(d11, d2), cross(d1, d12)));
        let dn2 = dn(add(cross(d12, d2), cross(d1, d22)));
        Ok(SurfaceJet {
            xi,
            x,
            d1,
            d2,
            d11,
            d12,
            d22,
            normal,
            element,
            dn1,
            dn2,
        })
    }
}

/// Unit vectors `(u, v)` spanning cube face `face` (axis `face / 2`, sign
/// `+` for even faces) with `u x v` pointing out of the cube.
fn face_frame(face: usize) -> (usize, f64, Vec3, Vec3) {
    let axis = face / 2;
    let sign = if face.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut u = [0.0; 3];
    let mut v = [0.0; 3];
    u[(axis + 1) % 3] = 1.0;
    v[(axis + 2) % 3] = 1.0;
    if sign < 0.0 {
        std::mem::swap(&mut u, &mut v);
    }
    (axis, sign, u, v)
}

#[derive(Debug, Clone)]
enum PatchMap {
    /// Cube face projected radially onto an ellipsoid with semi-axes `radii`.
    CubeEllipsoid { face: usize, center: Vec3, radii: Vec3 },
    /// Face of an axis-aligned box with half side lengths `half`.
    BoxFace { face: usize, center: Vec3, half: Vec3 },
    /// Interpolated grid coordinates.
    Tabulated { coords: Box<[ChebInterp2D; 3]> },
}

#[derive(Debug, Clone)]
pub struct Patch {
    map: PatchMap,
}

impl Patch {
    fn point_generic<S: Scalar>(&self, a: S, b: S) -> [S; 3] {
        match &self.map {
            PatchMap::CubeEllipsoid { face, center, radii } => {
                let (axis, sign, u, v) = face_frame(*face);
                let mut p = [S::cst(0.0); 3];
                for k in 0..3 {
                    let base = if k == axis { sign } else { 0.0 };
                    p[k] = S::cst(base) + a.scale(u[k]) + b.scale(v[k]);
                }
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                std::array::from_fn(|k| (p[k] / r).scale(radii[k]) + S::cst(center[k]))
            }
            PatchMap::BoxFace { face, center, half } => {
                let (axis, sign, u, v) = face_frame(*face);
                std::array::from_fn(|k| {
                    let base = if k == axis { sign } else { 0.0 };
                    (S::cst(base) + a.scale(u[k]) + b.scale(v[k])).scale(half[k]) + S::cst(center[k])
                })
            }
            PatchMap::Tabulated { .. } => unreachable!("tabulated patches are evaluated by interpolation"),
        }
    }

    pub fn point(&self, xi: [f64; 2]) -> Vec3 {
        match &self.map {
            PatchMap::Tabulated { coords } => std::array::from_fn(|k| coords[k].eval(xi).v),
            _ => self.point_generic(xi[0], xi[1]),
        }
    }

    /// Second-order jet of the map at `xi`.
    pub fn jet(&self, xi: [f64; 2]) -> Result<SurfaceJet> {
        if !(xi[0].is_finite() && xi[1].is_finite()) {
            return Err(HdiError::NonFinite("patch parameter"));
        }
        let mut parts = [[0.0; 3]; 6];
        match &self.map {
            PatchMap::Tabulated { coords } => {
                for k in 0..3 {
                    let j = coords[k].eval(xi);
                    for (slot, val) in [j.v, j.d1, j.d2, j.d11, j.d12, j.d22].into_iter().enumerate() {
                        parts[slot][k] = val;
                    }
                }
            }
            _ => {
                let p = self.point_generic(Jet2::variable(xi[0], 0), Jet2::variable(xi[1], 1));
                for k in 0..3 {
                    let j = p[k];
                    for (slot, val) in [j.v, j.g[0], j.g[1], j.h[0], j.h[1], j.h[2]].into_iter().enumerate() {
                        parts[slot][k] = val;
                    }
                }
            }
        }
        SurfaceJet::from_partials(xi, parts[0], parts[1], parts[2], parts[3], parts[4], parts[5])
    }
}

/// A union of closed bodies, each made of patches.
#[derive(Debug, Clone)]
pub struct PatchedSurface {
    name: String,
    patches: Vec<Patch>,
    /// Patch index ranges of the closed bodies.
    bodies: Vec<Range<usize>>,
}

impl PatchedSurface {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }
    pub fn bodies(&self) -> &[Range<usize>] {
        &self.bodies
    }
    pub fn body_of_patch(&self, p: usize) -> usize {
        self.bodies.iter().position(|r| r.contains(&p)).expect("patch belongs to a body")
    }

    pub fn ellipsoid(center: Vec3, radii: Vec3) -> Result<Self> {
        if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(HdiError::invalid("ellipsoid semi-axes must be positive"));
        }
        let patches = (0..6)
            .map(|face| Patch {
                map: PatchMap::CubeEllipsoid { face, center, radii },
            })
            .collect();
        Ok(PatchedSurface {
            name: "ellipsoid".into(),
            patches,
            bodies: vec![0..6],
        })
    }

    pub fn sphere(center: Vec3, radius: f64) -> Result<Self> {
        let mut s = Self::ellipsoid(center, [radius; 3])?;
        s.name = "sphere".into();
        Ok(s)
    }

    /// Axis-aligned box with side lengths `sides`, flat faces and sharp edges.
    pub fn parallelepiped(center: Vec3, sides: Vec3) -> Result<Self> {
        if sides.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(HdiError::invalid("parallelepiped sides must be positive"));
        }
        let half = scale(sides, 0.5);
        let patches = (0..6)
            .map(|face| Patch {
                map: PatchMap::BoxFace { face, center, half },
            })
            .collect();
        Ok(PatchedSurface {
            name: "parallelepiped".into(),
            patches,
            bodies: vec![0..6],
        })
    }

    /// Two spheres of radius `radius` centered at `(±(radius + gap/2), 0, 0)`.
    pub fn two_spheres(radius: f64, gap: f64) -> Result<Self> {
        if !(gap > 0.0) {
            return Err(HdiError::invalid("two-spheres gap must be positive"));
        }
        let c = radius + 0.5 * gap;
        let left = Self::sphere([-c, 0.0, 0.0], radius)?;
        let right = Self::sphere([c, 0.0, 0.0], radius)?;
        let mut s = Self::union(vec![left, right]);
        s.name = "two-spheres".into();
        Ok(s)
    }

    /// Disjoint union of closed surfaces.
    pub fn union(parts: Vec<PatchedSurface>) -> Self {
        let mut patches = Vec::new();
        let mut bodies = Vec::new();
        let mut names = Vec::new();
        for p in parts {
            let off = patches.len();
            bodies.extend(p.bodies.iter().map(|r| r.start + off..r.end + off));
            patches.extend(p.patches);
            names.push(p.name);
        }
        PatchedSurface {
            name: names.join("+"),
            patches,
            bodies,
        }
    }

    /// One body from per-patch tabulated grid coordinates (row-major over the
    /// Chebyshev grid of size `n`).
    pub fn from_tables(n: usize, tables: &[Vec<Vec3>]) -> Result<Self> {
        let grid = cheb_grid(n)?;
        let mut patches = Vec::new();
        for t in tables {
            if t.len() != n * n {
                return Err(HdiError::invalid(format!("patch table has {} points, expected {}", t.len(), n * n)));
            }
            let comp = |k: usize| -> Result<ChebInterp2D> {
                let vals: Vec<f64> = t.iter().map(|p| p[k]).collect();
                ChebInterp2D::new(&grid, &vals)
            };
            patches.push(Patch {
                map: PatchMap::Tabulated {
                    coords: Box::new([comp(0)?, comp(1)?, comp(2)?]),
                },
            });
        }
        if patches.is_empty() {
            return Err(HdiError::invalid("tabulated surface has no patches"));
        }
        let np = patches.len();
        Ok(PatchedSurface {
            name: "tabulated".into(),
            patches,
            bodies: vec![0..np],
        })
    }
}

/// Parses a tabulated surface: one `x y z` triple per line, patches
/// concatenated, each patch `n * n` lines in grid order. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_patch_table(text: &str, n_patches: usize) -> Result<(usize, Vec<Vec<Vec3>>)> {
    let mut pts = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| HdiError::Parse(format!("line {}: '{s}' is not a number", ln + 1)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(HdiError::Parse(format!("line {}: expected 3 coordinates", ln + 1)));
        }
        pts.push([vals[0], vals[1], vals[2]]);
    }
    if n_patches == 0 || pts.len() % n_patches != 0 {
        return Err(HdiError::Parse(format!("{} points do not split into {n_patches} patches", pts.len())));
    }
    let per = pts.len() / n_patches;
    let n = (per as f64).sqrt().round() as usize;
    if n * n != per {
        return Err(HdiError::Parse(format!("{per} points per patch is not a square grid")));
    }
    Ok((n, pts.chunks(per).map(|c| c.to_vec()).collect()))
}

fn param<'a>(params: &'a Params, key: &str) -> Option<&'a str> {
    params.get(key).map(|s| s.as_str())
}

fn float_param(params: &Params, key: &str, default: f64) -> Result<f64> {
    match param(params, key) {
        None => Ok(default),
        Some(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| HdiError::Parse(format!("surface parameter {key} = '{s}' is not a number"))),
    }
}

pub fn make_surface(name: &str, params: &Params) -> Result<PatchedSurface> {
    let center = [
        float_param(params, "cx", 0.0)?,
        float_param(params, "cy", 0.0)?,
        float_param(params, "cz", 0.0)?,
    ];
    match name {
        "sphere" => PatchedSurface::sphere(center, float_param(params, "radius", 1.0)?),
        "ellipsoid" => PatchedSurface::ellipsoid(
            center,
            [
                float_param(params, "a", 1.0)?,
                float_param(params, "b", 1.0)?,
                float_param(params, "c", 2.0)?,
            ],
        ),
        "parallelepiped" => PatchedSurface::parallelepiped(
            center,
            [
                float_param(params, "a", 2.0)?,
                float_param(params, "b", 2.0)?,
                float_param(params, "c", 2.0)?,
            ],
        ),
        "two-spheres" => PatchedSurface::two_spheres(float_param(params, "radius", 1.0)?, float_param(params, "gap", 0.1)?),
        "tabulated" => {
            let path = param(params, "path").ok_or_else(|| HdiError::invalid("tabulated surface needs a 'path' parameter"))?;
            let n_patches = float_param(params, "patches", 6.0)? as usize;
            let text = std::fs::read_to_string(path)?;
            let (n, tables) = parse_patch_table(&text, n_patches)?;
            PatchedSurface::from_tables(n, &tables)
        }
        other => Err(HdiError::UnknownName {
            kind: "surface",
            name: other.to_string(),
            registry: SURFACE_REGISTRY.join(", "),
        }),
    }
}

/// Tensor Chebyshev-zero grids of size `n x n` on every patch, with Fejér
/// weights times the area element. Node `k` of patch `p` at grid position
/// `(i, j)` has global index `p * n * n + i * n + j`.
#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    pub surface: PatchedSurface,
    pub cheb: ChebGrid,
    pub jets: Vec<SurfaceJet>,
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Characteristic node spacing per patch: `sqrt(patch area) / n`.
    pub spacing: Vec<f64>,
}

impl SurfaceGrid {
    pub fn new(surface: &PatchedSurface, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(HdiError::GridTooSmall { points: n, order: 2 });
        }
        let cheb = cheb_grid(n)?;
        let mut jets = Vec::with_capacity(surface.patches.len() * n * n);
        let mut weights = Vec::with_capacity(jets.capacity());
        let mut spacing = Vec::new();
        for patch in &surface.patches {
            let mut area = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let jet = patch.jet([cheb.nodes()[i], cheb.nodes()[j]])?;
                    let w = cheb.weights()[i] * cheb.weights()[j] * jet.element;
                    area += w;
                    weights.push(w);
                    jets.push(jet);
                }
            }
            spacing.push(area.sqrt() / n as f64);
        }
        Ok(SurfaceGrid {
            surface: surface.clone(),
            cheb,
            points: jets.iter().map(|j| j.x).collect(),
            normals: jets.iter().map(|j| j.normal).collect(),
            jets,
            weights,
            spacing,
        })
    }

    pub fn n(&self) -> usize {
        self.cheb.n()
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn patch_of(&self, node: usize) -> usize {
        node / (self.n() * self.n())
    }
    /// Node index range of body `b`.
    pub fn body_nodes(&self, b: usize) -> Range<usize> {
        let nn = self.n() * self.n();
        let r = &self.surface.bodies[b];
        r.start * nn..r.end * nn
    }
    pub fn n_bodies(&self) -> usize {
        self.surface.bodies.len()
    }
    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }
    /// Gauss double-layer integral of 1 at `x` over body `b` (1 inside, 0
    /// outside, inaccurate near the surface).
    pub fn gauss_integral(&self, x: Vec3, b: usize) -> f64 {
        self.body_nodes(b)
            .map(|k| {
                let r = sub(self.points[k], x);
                let d = norm(r);
                dot(r, self.normals[k]) / (4.0 * PI * d * d * d) * self.weights[k]
            })
            .sum()
    }
}

/// Closest surface point to a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootPoint3D {
    pub patch: usize,
    pub xi: [f64; 2],
    pub point: Vec3,
    pub normal: Vec3,
    pub distance: f64,
    /// False when no Newton run converged and the best scan point is returned.
    pub converged: bool,
}

fn clamp_xi(xi: [f64; 2]) -> [f64; 2] {
    [xi[0].clamp(-1.0, 1.0), xi[1].clamp(-1.0, 1.0)]
}

/// Damped Newton for min |x - X(xi)|^2 on one patch, clamped to the square.
fn newton_patch(patch: &Patch, x: Vec3, start: [f64; 2]) -> Option<([f64; 2], f64)> {
    let mut xi = start;
    let f = |xi: [f64; 2]| {
        let d = sub(x, patch.point(xi));
        dot(d, d)
    };
    let mut fx = f(xi);
    for _ in 0..60 {
        let j = patch.jet(xi).ok()?;
        let d = sub(x, j.x);
        let g = [-dot(d, j.d1), -dot(d, j.d2)];
        let h11 = dot(j.d1, j.d1) - dot(d, j.d11);
        let h12 = dot(j.d1, j.d2) - dot(d, j.d12);
        let h22 = dot(j.d2, j.d2) - dot(d, j.d22);
        let det = h11 * h22 - h12 * h12;
        let mut step = if det > 0.0 && h11 > 0.0 {
            [-(h22 * g[0] - h12 * g[1]) / det, -(h11 * g[1] - h12 * g[0]) / det]
        } else {
            // steepest descent scaled by the metric
            let s = 1.0 / (dot(j.d1, j.d1) + dot(j.d2, j.d2));
            [-g[0] * s, -g[1] * s]
        };
        let mut accepted = false;
        for _ in 0..30 {
            let trial = clamp_xi([xi[0] + step[0], xi[1] + step[1]]);
            let ft = f(trial);
            if ft <= fx {
                let moved = (trial[0] - xi[0]).abs().max((trial[1] - xi[1]).abs());
                xi = trial;
                fx = ft;
                accepted = true;
                if moved < 1e-10 {
                    return Some((xi, fx.sqrt()));
                }
                break;
            }
            step = [0.5 * step[0], 0.5 * step[1]];
        }
        if !accepted {
            return Some((xi, fx.sqrt()));
        }
    }
    None
}

/// Scan every patch on a uniform parameter grid, then Newton from the best
/// scan point of each patch that is competitive with the global best.
pub fn nearest_point_3d(surface: &PatchedSurface, x: Vec3) -> Result<FootPoint3D> {
    nearest_point_in(surface, 0..surface.patches.len(), x)
}

/// Nearest point restricted to the patches in `patches`.
pub fn nearest_point_in(surface: &PatchedSurface, patches: Range<usize>, x: Vec3) -> Result<FootPoint3D> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(HdiError::NonFinite("target point"));
    }
    let mut scans = Vec::new();
    for p in patches {
        let patch = &surface.patches[p];
        let mut best = ([0.0; 2], f64::INFINITY);
        for a in 0..=SCAN {
            for b in 0..=SCAN {
                let xi = [-1.0 + 2.0 * a as f64 / SCAN as f64, -1.0 + 2.0 * b as f64 / SCAN as f64];
                let d = norm(sub(x, patch.point(xi)));
                if d < best.1 {
                    best = (xi, d);
                }
            }
        }
        scans.push((p, best.0, best.1));
    }
    let global = scans.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let slack = 1.5 * global + 0.5;
    let mut found: Option<FootPoint3D> = None;
    for &(p, xi0, d0) in &scans {
        if d0 > slack {
            continue;
        }
        if let Some((xi, d)) = newton_patch(&surface.patches[p], x, xi0) {
            if found.is_none_or(|f| d < f.distance - 1e-14) {
                let j = surface.patches[p].jet(xi)?;
                found = Some(FootPoint3D {
                    patch: p,
                    xi,
                    point: j.x,
                    normal: j.normal,
                    distance: d,
                    converged: true,
                });
            }
        }
    }
    match found {
        Some(f) => Ok(f),
        None => {
            let &(p, xi, d) = scans
                .iter()
                .min_by(|a, b| a.2.total_cmp(&b.2))
                .ok_or_else(|| HdiError::invalid("surface has no patches"))?;
            let j = surface.patches[p].jet(xi)?;
            Ok(FootPoint3D {
                patch: p,
                xi,
                point: j.x,
                normal: j.normal,
                distance: d,
                converged: false,
            })
        }
    }
}

/// `1` if `x` is enclosed by one of the bodies, else `0`. Each body uses the
/// discrete Gauss integral; a value in `(0.25, 0.75)` (target too close for
/// the quadrature) falls back to the side of the foot-point normal, and is an
/// error only if that projection fails.
pub fn inside_indicator_3d(grid: &SurfaceGrid, x: Vec3) -> Result<f64> {
    for b in 0..grid.n_bodies() {
        let g = grid.gauss_integral(x, b);
        let inside = if g > 0.25 && g < 0.75 {
            let foot = nearest_point_in(&grid.surface, grid.surface.bodies[b].clone(), x)?;
            if !foot.converged {
                return Err(HdiError::AmbiguousIndicator { value: g });
            }
            dot(sub(x, foot.point), foot.normal) < 0.0
        } else {
            g >= 0.75
        };
        if inside {
            return Ok(1.0);
        }
    }
    Ok(0.0)
}
