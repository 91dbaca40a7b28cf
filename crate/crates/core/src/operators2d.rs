//! Nyström evaluation of the 2D Laplace boundary integral operators and of
//! near-boundary layer potentials, with `G(x, y) = -log|x - y| / (2 pi)`.
//!
//! `S` and `N` are regularized by subtracting the harmonic interpolants of
//! [`crate::hdi2d`]; `K` and `K'` have smooth kernels and use the plain
//! trapezoidal rule with the kernel's diagonal limit.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{HdiError, Result};
use crate::geometry2d::{curve_jet, nearest_point_2d, CurveJet, ParametricCurve};
use crate::hdi2d::{coeffs_2d, ComplexJet, HdiCoeffs2D, InterpKind};
use crate::spectral::{fourier_derivatives, upsample, PeriodicSamples, TrigInterpolant};

const INV_2PI: f64 = 0.5 / PI;

/// Highest interpolation order accepted by the regularized operators.
pub const MAX_ORDER_2D: usize = 7;

/// Curve sampled on `t_j = j pi / N` with jets deep enough for order `M`.
#[derive(Debug, Clone)]
pub struct BoundaryGrid2D {
    pub curve: ParametricCurve,
    n_half: usize,
    pub jets: Vec<CurveJet>,
    pub points: Vec<[f64; 2]>,
    pub normals: Vec<[f64; 2]>,
    /// `|x'(t_j)| h`.
    pub weights: Vec<f64>,
    pub zeta: Vec<Complex64>,
    pub dzeta: Vec<Complex64>,
}

impl BoundaryGrid2D {
    pub fn new(curve: &ParametricCurve, n_half: usize, max_order: usize) -> Result<Self> {
        if n_half < 2 {
            return Err(HdiError::invalid("need at least 4 boundary points"));
        }
        check_order(max_order)?;
        let h = PI / n_half as f64;
        let depth = (max_order + 1).max(2);
        let jets = (0..2 * n_half)
            .map(|j| curve_jet(curve, j as f64 * h, depth))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundaryGrid2D {
            curve: curve.clone(),
            n_half,
            points: jets.iter().map(|j| j.point()).collect(),
            normals: jets.iter().map(|j| j.normal).collect(),
            weights: jets.iter().map(|j| j.speed * h).collect(),
            zeta: jets.iter().map(|j| Complex64::new(j.derivs[0][0], j.derivs[0][1])).collect(),
            dzeta: jets.iter().map(|j| Complex64::new(j.derivs[1][0], j.derivs[1][1])).collect(),
            jets,
        })
    }

    pub fn len(&self) -> usize {
        2 * self.n_half
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }

    pub fn spacing(&self) -> f64 {
        PI / self.n_half as f64
    }

    /// Jet depth available at the nodes.
    pub fn depth(&self) -> usize {
        self.jets[0].derivs.len() - 1
    }

    /// `(1/2 pi) * integral of Im(zeta' / (zeta - z))`, close to 1 inside
    /// and 0 outside.
    pub fn winding_number(&self, x: [f64; 2]) -> f64 {
        let z = Complex64::new(x[0], x[1]);
        let h = self.spacing();
        self.zeta
            .iter()
            .zip(&self.dzeta)
            .map(|(zj, dz)| (dz / (zj - z)).im)
            .sum::<f64>()
            * h
            * INV_2PI
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER_2D {
        return Err(HdiError::OrderTooHigh {
            order,
            max: MAX_ORDER_2D,
        });
    }
    Ok(())
}

/// Density samples with derivatives at the nodes and an interpolant for
/// off-grid parameters.
#[derive(Debug, Clone)]
pub struct Density2D {
    pub samples: PeriodicSamples,
    /// `derivs[k][j] = phi^(k)(t_j)`.
    pub derivs: Vec<Vec<f64>>,
    interp: TrigInterpolant,
}

impl Density2D {
    pub fn new(samples: PeriodicSamples, max_order: usize) -> Result<Self> {
        let derivs = fourier_derivatives(&samples, max_order.max(2))?;
        let interp = TrigInterpolant::new(&samples);
        Ok(Density2D {
            samples,
            derivs,
            interp,
        })
    }

    pub fn from_values(values: Vec<f64>, max_order: usize) -> Result<Self> {
        Self::new(PeriodicSamples::new(values)?, max_order)
    }

    pub fn values(&self) -> &[f64] {
        self.samples.values()
    }

    fn jet_at_node(&self, j: usize, k: usize) -> Vec<f64> {
        (0..=k).map(|o| self.derivs[o][j]).collect()
    }

    fn jet_at(&self, t: f64, k: usize) -> Vec<f64> {
        self.interp.eval_jet(t, k)
    }
}

fn node_coeffs(
    grid: &BoundaryGrid2D,
    density: &Density2D,
    kind: InterpKind,
    i: usize,
    order: usize,
) -> Result<(HdiCoeffs2D, ComplexJet)> {
    let k = match kind {
        InterpKind::S => order,
        InterpKind::N => order.max(2),
    };
    let jet = ComplexJet::new(&grid.jets[i], &density.jet_at_node(i, k))?;
    let t = grid.jets[i].t;
    Ok((coeffs_2d(kind, &jet, t, order)?, jet))
}

fn check_pair(grid: &BoundaryGrid2D, density: &Density2D, order: usize) -> Result<()> {
    check_order(order)?;
    if density.samples.len() != grid.len() {
        return Err(HdiError::invalid(format!(
            "density has {} samples, grid has {} nodes",
            density.samples.len(),
            grid.len()
        )));
    }
    if grid.depth() < order + 1 {
        return Err(HdiError::invalid("boundary grid jets too shallow for this order"));
    }
    if density.derivs.len() < order.max(2) + 1 {
        return Err(HdiError::invalid("density derivatives too shallow for this order"));
    }
    Ok(())
}

/// Single-layer operator at the nodes `targets` (indices into `grid`).
fn single_layer_at(grid: &BoundaryGrid2D, density: &Density2D, order: usize, targets: &[usize]) -> Result<Vec<f64>> {
    check_pair(grid, density, order)?;
    let phi = density.values();
    targets
        .par_iter()
        .map(|&i| {
            let (co, _) = node_coeffs(grid, density, InterpKind::S, i, order)?;
            let x = grid.points[i];
            let mut acc = 0.0;
            for j in 0..grid.len() {
                if j == i {
                    continue;
                }
                let y = grid.points[j];
                let r = [x[0] - y[0], x[1] - y[1]];
                let r2 = r[0] * r[0] + r[1] * r[1];
                let ny = grid.normals[j];
                let (f, dfz) = co.eval_f(grid.zeta[j]);
                let q = (dfz * grid.dzeta[j]).im / grid.jets[j].speed;
                let kern = (r[0] * ny[0] + r[1] * ny[1]) / r2;
                acc += (kern * f.re - 0.5 * r2.ln() * (phi[j] - q)) * grid.weights[j];
            }
            Ok(co.eval_f(grid.zeta[i]).0.re / 2.0 + INV_2PI * acc)
        })
        .collect()
}

/// Hypersingular operator at the nodes `targets`.
fn hypersingular_at(grid: &BoundaryGrid2D, density: &Density2D, order: usize, targets: &[usize]) -> Result<Vec<f64>> {
    check_pair(grid, density, order)?;
    let phi = density.values();
    targets
        .par_iter()
        .map(|&i| {
            let (co, cj) = node_coeffs(grid, density, InterpKind::N, i, order)?;
            let x = grid.points[i];
            let nx = grid.normals[i];
            let jet = &grid.jets[i];
            let q_tt = (co.eval_f(grid.zeta[i]).1 * grid.dzeta[i]).im / jet.speed;
            let mut acc = 0.0;
            for j in 0..grid.len() {
                if j == i {
                    continue;
                }
                let y = grid.points[j];
                let r = [x[0] - y[0], x[1] - y[1]];
                let r2 = r[0] * r[0] + r[1] * r[1];
                let ny = grid.normals[j];
                let rnx = r[0] * nx[0] + r[1] * nx[1];
                let rny = r[0] * ny[0] + r[1] * ny[1];
                let (f, dfz) = co.eval_f(grid.zeta[j]);
                let q = (dfz * grid.dzeta[j]).im / grid.jets[j].speed;
                let kp = (nx[0] * ny[0] + nx[1] * ny[1]) / r2 - 2.0 * rnx * rny / (r2 * r2);
                acc += (kp * (phi[j] - f.re) - rnx / r2 * q) * grid.weights[j];
            }
            let mut diag = 0.0;
            if order >= 1 {
                let d2p = co.second_derivative_at_anchor(&cj.zeta).re;
                let s2 = jet.speed * jet.speed;
                diag = ((cj.phi[2] - d2p) / (2.0 * s2) + jet.curvature() / 2.0 * q_tt) * grid.weights[i];
            }
            Ok(-q_tt / 2.0 + INV_2PI * (acc + diag))
        })
        .collect()
}

/// Trapezoidal double-layer (`adjoint = false`) or adjoint double-layer
/// operator at all nodes.
fn smooth_operator(grid: &BoundaryGrid2D, phi: &[f64], adjoint: bool) -> Result<Vec<f64>> {
    if phi.len() != grid.len() {
        return Err(HdiError::invalid("density length does not match the grid"));
    }
    Ok((0..grid.len())
        .into_par_iter()
        .map(|i| (0..grid.len()).map(|j| smooth_kernel(grid, i, j, adjoint) * phi[j]).sum())
        .collect())
}

/// Quadrature-weighted kernel entry of `K` or `K'`.
pub fn smooth_kernel(grid: &BoundaryGrid2D, i: usize, j: usize, adjoint: bool) -> f64 {
    if i == j {
        return INV_2PI * grid.jets[i].curvature() / 2.0 * grid.weights[i];
    }
    let x = grid.points[i];
    let y = grid.points[j];
    let r = [x[0] - y[0], x[1] - y[1]];
    let r2 = r[0] * r[0] + r[1] * r[1];
    let k = if adjoint {
        let n = grid.normals[i];
        -(r[0] * n[0] + r[1] * n[1]) / r2
    } else {
        let n = grid.normals[j];
        (r[0] * n[0] + r[1] * n[1]) / r2
    };
    INV_2PI * k * grid.weights[j]
}

/// Dense row-major Nyström matrix of `K` (or `K'`).
pub fn smooth_operator_matrix(grid: &BoundaryGrid2D, adjoint: bool) -> Vec<f64> {
    let n = grid.len();
    let mut m = vec![0.0; n * n];
    m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = smooth_kernel(grid, i, j, adjoint);
        }
    });
    m
}

/// Options shared by the regularized operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorOptions {
    /// Interpolation order `M`.
    pub order: usize,
    /// Oversampling factor: the density is upsampled by this factor before
    /// quadrature; targets remain the original nodes.
    pub oversample: usize,
}

impl OperatorOptions {
    pub fn order(order: usize) -> Self {
        OperatorOptions { order, oversample: 1 }
    }
}

fn regularized(
    curve: &ParametricCurve,
    density: &PeriodicSamples,
    opts: OperatorOptions,
    f: fn(&BoundaryGrid2D, &Density2D, usize, &[usize]) -> Result<Vec<f64>>,
) -> Result<PeriodicSamples> {
    check_order(opts.order)?;
    let fine = upsample(density, opts.oversample)?;
    let grid = BoundaryGrid2D::new(curve, fine.n_half(), opts.order + 1)?;
    let dens = Density2D::new(fine, opts.order + 1)?;
    let targets: Vec<usize> = (0..density.len()).map(|i| i * opts.oversample).collect();
    PeriodicSamples::new(f(&grid, &dens, opts.order, &targets)?)
}

/// Single-layer operator `S[phi]` at the nodes.
pub fn eval_single_layer(curve: &ParametricCurve, density: &PeriodicSamples, order: usize) -> Result<PeriodicSamples> {
    eval_single_layer_with(curve, density, OperatorOptions::order(order))
}

pub fn eval_single_layer_with(
    curve: &ParametricCurve,
    density: &PeriodicSamples,
    opts: OperatorOptions,
) -> Result<PeriodicSamples> {
    regularized(curve, density, opts, single_layer_at)
}

/// Hypersingular operator values; `zero_diagonal` flags the order-0 path,
/// whose diagonal term is replaced by zero and converges slowly.
#[derive(Debug, Clone, PartialEq)]
pub struct HypersingularOutput {
    pub values: PeriodicSamples,
    pub zero_diagonal: bool,
}

pub fn eval_hypersingular(curve: &ParametricCurve, density: &PeriodicSamples, order: usize) -> Result<HypersingularOutput> {
    eval_hypersingular_with(curve, density, OperatorOptions::order(order))
}

pub fn eval_hypersingular_with(
    curve: &ParametricCurve,
    density: &PeriodicSamples,
    opts: OperatorOptions,
) -> Result<HypersingularOutput> {
    Ok(HypersingularOutput {
        values: regularized(curve, density, opts, hypersingular_at)?,
        zero_diagonal: opts.order == 0,
    })
}

pub fn eval_double_layer(curve: &ParametricCurve, density: &PeriodicSamples) -> Result<PeriodicSamples> {
    let grid = BoundaryGrid2D::new(curve, density.n_half(), 1)?;
    PeriodicSamples::new(smooth_operator(&grid, density.values(), false)?)
}

pub fn eval_adjoint_double_layer(curve: &ParametricCurve, density: &PeriodicSamples) -> Result<PeriodicSamples> {
    let grid = BoundaryGrid2D::new(curve, density.n_half(), 1)?;
    PeriodicSamples::new(smooth_operator(&grid, density.values(), true)?)
}

/// Grid-level operator applications for iterative solvers.
pub fn apply_single_layer(grid: &BoundaryGrid2D, phi: &[f64], order: usize) -> Result<Vec<f64>> {
    let dens = Density2D::from_values(phi.to_vec(), order + 1)?;
    let targets: Vec<usize> = (0..grid.len()).collect();
    single_layer_at(grid, &dens, order, &targets)
}

pub fn apply_hypersingular(grid: &BoundaryGrid2D, phi: &[f64], order: usize) -> Result<Vec<f64>> {
    let dens = Density2D::from_values(phi.to_vec(), order + 1)?;
    let targets: Vec<usize> = (0..grid.len()).collect();
    hypersingular_at(grid, &dens, order, &targets)
}

pub fn apply_double_layer(grid: &BoundaryGrid2D, phi: &[f64]) -> Result<Vec<f64>> {
    smooth_operator(grid, phi, false)
}

pub fn apply_adjoint_double_layer(grid: &BoundaryGrid2D, phi: &[f64]) -> Result<Vec<f64>> {
    smooth_operator(grid, phi, true)
}

/// Single- or double-layer potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Single,
    Double,
}

/// Potential value and, on request, its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialValue {
    pub value: f64,
    pub gradient: Option<[f64; 2]>,
}

/// Options for off-boundary evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearFieldOptions {
    pub order: usize,
    /// Distance below which the regularized formula is used; `None` means
    /// ten times the parameter spacing `h`.
    pub threshold: Option<f64>,
    pub want_gradient: bool,
}

impl NearFieldOptions {
    pub fn new(order: usize) -> Self {
        NearFieldOptions {
            order,
            threshold: None,
            want_gradient: false,
        }
    }
}

/// Inside indicator: winding number far from the curve, side of the foot
/// point normal near it.
pub fn inside_indicator_2d(grid: &BoundaryGrid2D, x: [f64; 2], near: Option<(f64, [f64; 2])>) -> f64 {
    if let Some((_, _)) = near {
        let (t0, _) = near.unwrap();
        if let Ok(j) = curve_jet(&grid.curve, t0, 1) {
            let p = j.point();
            let s = (x[0] - p[0]) * j.normal[0] + (x[1] - p[1]) * j.normal[1];
            return if s < 0.0 { 1.0 } else { 0.0 };
        }
    }
    if grid.winding_number(x) > 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Layer potential of `density` at an off-boundary point.
pub fn eval_potential_near(
    grid: &BoundaryGrid2D,
    density: &Density2D,
    kind: LayerKind,
    x: [f64; 2],
    opts: NearFieldOptions,
) -> Result<PotentialValue> {
    check_pair(grid, density, opts.order)?;
    let threshold = opts.threshold.unwrap_or(10.0 * grid.spacing());
    let foot = nearest_point_2d(&grid.curve, x)?;
    if foot.distance < 1e-14 {
        return Err(HdiError::invalid("target lies on the boundary"));
    }
    let phi = density.values();
    let want = opts.want_gradient;
    if foot.distance >= threshold {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for j in 0..grid.len() {
            let y = grid.points[j];
            let r = [x[0] - y[0], x[1] - y[1]];
            let r2 = r[0] * r[0] + r[1] * r[1];
            let w = grid.weights[j] * phi[j];
            match kind {
                LayerKind::Single => {
                    v -= 0.5 * r2.ln() * w;
                    if want {
                        g[0] -= r[0] / r2 * w;
                        g[1] -= r[1] / r2 * w;
                    }
                }
                LayerKind::Double => {
                    let n = grid.normals[j];
                    let rn = r[0] * n[0] + r[1] * n[1];
                    v += rn / r2 * w;
                    if want {
                        g[0] += (n[0] / r2 - 2.0 * rn * r[0] / (r2 * r2)) * w;
                        g[1] += (n[1] / r2 - 2.0 * rn * r[1] / (r2 * r2)) * w;
                    }
                }
            }
        }
        return Ok(PotentialValue {
            value: INV_2PI * v,
            gradient: want.then_some([INV_2PI * g[0], INV_2PI * g[1]]),
        });
    }

    let ikind = match kind {
        LayerKind::Single => InterpKind::S,
        LayerKind::Double => InterpKind::N,
    };
    let cjet = curve_jet(&grid.curve, foot.t, opts.order + 1)?;
    let djet = density.jet_at(foot.t, opts.order);
    let co = coeffs_2d(ikind, &ComplexJet::new(&cjet, &djet)?, foot.t, opts.order)?;
    let mu = inside_indicator_2d(grid, x, Some((foot.t, cjet.point())));

    let mut v = 0.0;
    let mut g = [0.0; 2];
    for j in 0..grid.len() {
        let y = grid.points[j];
        let r = [x[0] - y[0], x[1] - y[1]];
        let r2 = r[0] * r[0] + r[1] * r[1];
        let n = grid.normals[j];
        let rn = r[0] * n[0] + r[1] * n[1];
        let (f, dfz) = co.eval_f(grid.zeta[j]);
        let q = (dfz * grid.dzeta[j]).im / grid.jets[j].speed;
        // double-layer kernel acts on a, single-layer kernel on b
        let (a, b) = match kind {
            LayerKind::Single => (f.re, phi[j] - q),
            LayerKind::Double => (phi[j] - f.re, q),
        };
        let w = grid.weights[j];
        v += (rn / r2 * a - 0.5 * r2.ln() * b) * w;
        if want {
            for k in 0..2 {
                g[k] += ((n[k] / r2 - 2.0 * rn * r[k] / (r2 * r2)) * a - r[k] / r2 * b) * w;
            }
        }
    }
    let (u, du) = co.eval_u(x);
    let sign = match kind {
        LayerKind::Single => 1.0,
        LayerKind::Double => -1.0,
    };
    Ok(PotentialValue {
        value: INV_2PI * v + sign * mu * u,
        gradient: want.then_some([
            INV_2PI * g[0] + sign * mu * du[0],
            INV_2PI * g[1] + sign * mu * du[1],
        ]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n_half: usize, f: impl Fn(f64) -> f64) -> PeriodicSamples {
        PeriodicSamples::from_fn(n_half, f).unwrap()
    }

    fn max_diff(a: &PeriodicSamples, f: impl Fn(f64) -> f64) -> f64 {
        a.nodes()
            .iter()
            .zip(a.values())
            .map(|(t, v)| (v - f(*t)).abs())
            .fold(0.0, f64::max)
    }

    fn unit() -> ParametricCurve {
        ParametricCurve::circle(1.0).unwrap()
    }

    #[test]
    fn single_layer_examples() {
        // order-2 errors fall like h^5: 3.5e-8 at 64 points, below 1e-10 at 256
        let s = eval_single_layer(&unit(), &samples(32, |_| 1.0), 2).unwrap();
        assert!(max_diff(&s, |_| 0.0) < 1e-7);
        let s = eval_single_layer(&unit(), &samples(128, |_| 1.0), 2).unwrap();
        assert!(max_diff(&s, |_| 0.0) < 1e-10);
        let c2 = ParametricCurve::circle(2.0).unwrap();
        let s = eval_single_layer(&c2, &samples(128, |_| 1.0), 2).unwrap();
        assert!(max_diff(&s, |_| -2.0 * 2f64.ln()) < 1e-9);
        let s = eval_single_layer(&unit(), &samples(128, f64::cos), 2).unwrap();
        assert!(max_diff(&s, |t| t.cos() / 2.0) < 1e-9);
    }

    #[test]
    fn single_layer_refined_grid_oracle() {
        // independent check: order-5 evaluation on a 16x finer grid
        let kite = ParametricCurve::kite();
        let u = |x: [f64; 2]| (x[1] * (x[0] + 5.0).sin()).exp() / x[0].hypot(x[1]);
        let phi = |t: f64| u(kite.point(t));
        let coarse = eval_single_layer(&kite, &samples(40, phi), 2).unwrap();
        let fine = eval_single_layer(&kite, &samples(640, phi), 5).unwrap();
        let err = coarse
            .values()
            .iter()
            .zip(fine.values().iter().step_by(16))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn hypersingular_examples() {
        for curve in [unit(), ParametricCurve::kite(), ParametricCurve::pinched()] {
            let n = eval_hypersingular(&curve, &samples(64, |_| 1.0), 1).unwrap();
            assert!(max_diff(&n.values, |_| 0.0) < 1e-10, "{}", curve.name());
            assert!(!n.zero_diagonal);
        }
        let n = eval_hypersingular(&unit(), &samples(32, f64::cos), 2).unwrap();
        assert!(max_diff(&n.values, |t| -t.cos() / 2.0) < 1e-10);
        let n = eval_hypersingular(&unit(), &samples(32, |t| (2.0 * t).cos()), 2).unwrap();
        assert!(max_diff(&n.values, |t| -(2.0 * t).cos()) < 1e-10);
        assert!(eval_hypersingular(&unit(), &samples(32, f64::cos), 0).unwrap().zero_diagonal);
    }

    #[test]
    fn smooth_operator_examples() {
        for curve in [unit(), ParametricCurve::kite(), ParametricCurve::pinched(), ParametricCurve::ellipse(2.0, 1.0).unwrap()] {
            let k = eval_double_layer(&curve, &samples(100, |_| 1.0)).unwrap();
            assert!(max_diff(&k, |_| -0.5) < 1e-10, "{}", curve.name());
        }
        let k = eval_double_layer(&unit(), &samples(16, f64::cos)).unwrap();
        assert!(max_diff(&k, |_| 0.0) < 1e-14);
        let k = eval_adjoint_double_layer(&unit(), &samples(16, |_| 1.0)).unwrap();
        assert!(max_diff(&k, |_| -0.5) < 1e-14);
    }

    #[test]
    fn hypersingular_order_one_converges_fast() {
        // density with a rich spectrum on the kite; the order-1 diagonal limit
        // must be exact for spectral convergence
        let kite = ParametricCurve::kite();
        let u = |x: [f64; 2]| (x[0] - 3.0).hypot(x[1] - 0.5).ln();
        let phi = |t: f64| u(kite.point(t));
        let coarse = eval_hypersingular(&kite, &samples(64, phi), 1).unwrap().values;
        let fine = eval_hypersingular(&kite, &samples(128, phi), 1).unwrap().values;
        let err = coarse
            .values()
            .iter()
            .zip(fine.values().iter().step_by(2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn oversampled_single_layer_matches() {
        let phi = samples(32, |t| (t.sin()).exp());
        let a = eval_single_layer_with(&ParametricCurve::kite(), &phi, OperatorOptions { order: 2, oversample: 4 }).unwrap();
        let b = eval_single_layer(&ParametricCurve::kite(), &phi, 2).unwrap();
        assert_eq!(a.len(), 64);
        let d = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-3);
    }

    #[test]
    fn near_field_examples() {
        let grid = BoundaryGrid2D::new(&unit(), 50, 5).unwrap();
        let one = Density2D::from_values(vec![1.0; 100], 5).unwrap();
        for m in [0, 2, 4] {
            let o = NearFieldOptions::new(m);
            for (x, want) in [([0.3, 0.2], -1.0), ([0.0, 0.999], -1.0), ([1.001, 0.0], 0.0), ([2.0, 1.0], 0.0)] {
                let v = eval_potential_near(&grid, &one, LayerKind::Double, x, o).unwrap().value;
                assert!((v - want).abs() < 1e-10, "M = {m}, x = {x:?}: {v}");
            }
            for (x, want) in [([2.0, 0.0], -(2f64.ln())), ([0.0, 0.5], 0.0)] {
                let v = eval_potential_near(&grid, &one, LayerKind::Single, x, o).unwrap().value;
                assert!((v - want).abs() < 1e-10, "M = {m}, x = {x:?}: {v}");
            }
        }
        // near point: the error shrinks with the interpolation order
        let errs: Vec<f64> = (0..=4)
            .map(|m| {
                let v = eval_potential_near(&grid, &one, LayerKind::Single, [0.0, 1.002], NearFieldOptions::new(m)).unwrap().value;
                (v + 1.002f64.ln()).abs()
            })
            .collect();
        assert!(errs[4] < 1e-9 && errs[0] > errs[2] && errs[2] > errs[4], "{errs:?}");
        let mut o = NearFieldOptions::new(2);
        o.want_gradient = true;
        let g = eval_potential_near(&grid, &one, LayerKind::Single, [2.0, 0.0], o).unwrap().gradient.unwrap();
        assert!((g[0] + 0.5).abs() < 1e-12 && g[1].abs() < 1e-12);
        o.order = 4;
        let g = eval_potential_near(&grid, &one, LayerKind::Single, [1.01, 0.0], o).unwrap().gradient.unwrap();
        assert!((g[0] + 1.0 / 1.01).abs() < 1e-7 && g[1].abs() < 1e-7, "{g:?}");
    }

    #[test]
    fn near_field_gradient_matches_finite_differences() {
        let kite = ParametricCurve::kite();
        let grid = BoundaryGrid2D::new(&kite, 100, 5).unwrap();
        let dens = Density2D::from_values(samples(100, |t| (t.sin()).exp() * t.cos()).into_values(), 5).unwrap();
        let mut o = NearFieldOptions::new(4);
        o.want_gradient = true;
        let j = curve_jet(&kite, 1.0, 1).unwrap();
        for eps in [-0.01, 0.01] {
            let x = [j.point()[0] + eps * j.normal[0], j.point()[1] + eps * j.normal[1]];
            for kind in [LayerKind::Single, LayerKind::Double] {
                let g = eval_potential_near(&grid, &dens, kind, x, o).unwrap().gradient.unwrap();
                let h = 1e-6;
                for k in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (eval_potential_near(&grid, &dens, kind, xp, o).unwrap().value
                        - eval_potential_near(&grid, &dens, kind, xm, o).unwrap().value)
                        / (2.0 * h);
                    assert!((fd - g[k]).abs() < 1e-5 * (1.0 + g[k].abs()), "{kind:?} eps {eps}: {fd} vs {}", g[k]);
                }
            }
        }
    }
}
