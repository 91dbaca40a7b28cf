//! Chebyshev zero grids on `[-1, 1]`, Fejér first-rule weights, tensor-grid
//! spectral differentiation and a 2D Chebyshev interpolant.
//!
//! Grid values are stored row-major: `values[i * n + j] = f(t_i, t_j)` with
//! `i` indexing the first coordinate.

use std::f64::consts::PI;

use crate::error::{HdiError, Result};
use crate::spectral::{fourier_diff, PeriodicSamples};

/// Highest total derivative order accepted by [`cheb_grid_diff`].
pub const MAX_CHEB_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrid {
    n: usize,
    angles: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebGrid {
    pub fn n(&self) -> usize {
        self.n
    }
    /// `cos(angles[j])`, strictly decreasing.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// `(2j - 1) pi / (2n)` for `j = 1..=n`.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

pub fn cheb_grid(n: usize) -> Result<ChebGrid> {
    if n == 0 {
        return Err(HdiError::invalid("Chebyshev grid needs at least one point"));
    }
    let angles: Vec<f64> = (1..=n)
        .map(|j| (2 * j - 1) as f64 * PI / (2 * n) as f64)
        .collect();
    let nodes = angles.iter().map(|a| a.cos()).collect();
    let weights = angles
        .iter()
        .map(|&a| {
            let s: f64 = (1..=n / 2)
                .map(|l| {
                    let lf = l as f64;
                    (2.0 * lf * a).cos() / (4.0 * lf * lf - 1.0)
                })
                .sum();
            2.0 / n as f64 * (1.0 - 2.0 * s)
        })
        .collect();
    Ok(ChebGrid {
        n,
        angles,
        nodes,
        weights,
    })
}

/// First derivative along one line of Chebyshev-zero samples, through the
/// even extension in `theta` and FFT differentiation.
fn cheb_diff_line(grid: &ChebGrid, line: &[f64]) -> Result<Vec<f64>> {
    let n = grid.n;
    let mut ext = Vec::with_capacity(2 * n);
    ext.extend_from_slice(line);
    ext.extend(line.iter().rev());
    let d = fourier_diff(&PeriodicSamples::new(ext)?, 1)?;
    Ok(d.values()[..n]
        .iter()
        .zip(&grid.angles)
        .map(|(dv, a)| -dv / a.sin())
        .collect())
}

fn diff_axis(grid: &ChebGrid, values: &[f64], axis: usize) -> Result<Vec<f64>> {
    let n = grid.n;
    let mut out = vec![0.0; n * n];
    let mut line = vec![0.0; n];
    for k in 0..n {
        for m in 0..n {
            line[m] = if axis == 0 { values[m * n + k] } else { values[k * n + m] };
        }
        let d = cheb_diff_line(grid, &line)?;
        for m in 0..n {
            let idx = if axis == 0 { m * n + k } else { k * n + m };
            out[idx] = d[m];
        }
    }
    Ok(out)
}

/// `d^alpha f` on the tensor grid, by repeated application of the first
/// derivative `d/dxi = -(1/sin theta) d/dtheta`.
pub fn cheb_grid_diff(grid: &ChebGrid, values: &[f64], alpha: [usize; 2]) -> Result<Vec<f64>> {
    let n = grid.n;
    if values.len() != n * n {
        return Err(HdiError::invalid(format!(
            "expected {} grid values, got {}",
            n * n,
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HdiError::NonFinite("Chebyshev grid values"));
    }
    let total = alpha[0] + alpha[1];
    if total > MAX_CHEB_ORDER {
        return Err(HdiError::OrderTooHigh {
            order: total,
            max: MAX_CHEB_ORDER,
        });
    }
    for &a in &alpha {
        if a > 0 && n <= a {
            return Err(HdiError::GridTooSmall { points: n, order: a });
        }
    }
    let mut cur = values.to_vec();
    for (axis, &a) in alpha.iter().enumerate() {
        for _ in 0..a {
            cur = diff_axis(grid, &cur, axis)?;
        }
    }
    Ok(cur)
}

/// Value and derivatives (through order 2 per axis) of a tensor Chebyshev
/// expansion at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChebJet2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

/// Polynomial interpolant of degree `n-1` per axis through tensor-grid data.
#[derive(Debug, Clone)]
pub struct ChebInterp2D {
    n: usize,
    /// `coeffs[k * n + l]` multiplies `T_k(xi1) T_l(xi2)`.
    coeffs: Vec<f64>,
}

/// `T_k(x)`, `T_k'(x)`, `T_k''(x)` for `k = 0..n`.
fn cheb_basis(n: usize, x: f64) -> [Vec<f64>; 3] {
    let mut t = vec![0.0; n];
    let mut dt = vec![0.0; n];
    let mut ddt = vec![0.0; n];
    t[0] = 1.0;
    if n > 1 {
        t[1] = x;
        dt[1] = 1.0;
    }
    for k in 1..n.saturating_sub(1) {
        t[k + 1] = 2.0 * x * t[k] - t[k - 1];
        dt[k + 1] = 2.0 * t[k] + 2.0 * x * dt[k] - dt[k - 1];
        ddt[k + 1] = 4.0 * dt[k] + 2.0 * x * ddt[k] - ddt[k - 1];
    }
    [t, dt, ddt]
}

impl ChebInterp2D {
    pub fn new(grid: &ChebGrid, values: &[f64]) -> Result<Self> {
        let n = grid.n;
        if values.len() != n * n {
            return Err(HdiError::invalid(format!(
                "expected {} grid values, got {}",
                n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HdiError::NonFinite("Chebyshev grid values"));
        }
        // cos(k theta_i), discrete orthogonality over the zeros
        let cosm: Vec<f64> = (0..n)
            .flat_map(|k| grid.angles.iter().map(move |a| (k as f64 * a).cos()))
            .collect();
        let norm = |k: usize| if k == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 };
        // partial transform along the second axis
        let mut half = vec![0.0; n * n];
        for i in 0..n {
            for l in 0..n {
                let s: f64 = (0..n).map(|j| values[i * n + j] * cosm[l * n + j]).sum();
                half[i * n + l] = s * norm(l);
            }
        }
        let mut coeffs = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                let s: f64 = (0..n).map(|i| half[i * n + l] * cosm[k * n + i]).sum();
                coeffs[k * n + l] = s * norm(k);
            }
        }
        Ok(ChebInterp2D { n, coeffs })
    }

    pub fn eval(&self, xi: [f64; 2]) -> ChebJet2 {
        let n = self.n;
        let [a, da, dda] = cheb_basis(n, xi[0]);
        let [b, db, ddb] = cheb_basis(n, xi[1]);
        let mut out = ChebJet2::default();
        for k in 0..n {
            let row = &self.coeffs[k * n..(k + 1) * n];
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for l in 0..n {
                s0 += row[l] * b[l];
                s1 += row[l] * db[l];
                s2 += row[l] * ddb[l];
            }
            out.v += a[k] * s0;
            out.d1 += da[k] * s0;
            out.d11 += dda[k] * s0;
            out.d2 += a[k] * s1;
            out.d12 += da[k] * s1;
            out.d22 += a[k] * s2;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(grid: &ChebGrid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let t = grid.nodes();
        t.iter()
            .flat_map(|&a| t.iter().map(move |&b| (a, b)))
            .map(|(a, b)| f(a, b))
            .collect()
    }

    #[test]
    fn grid_examples() {
        let g = cheb_grid(1).unwrap();
        assert!(g.nodes()[0].abs() < 1e-15);
        assert!((g.weights()[0] - 2.0).abs() < 1e-15);
        let g = cheb_grid(2).unwrap();
        let r = 0.5f64.sqrt();
        assert!((g.nodes()[0] - r).abs() < 1e-15 && (g.nodes()[1] + r).abs() < 1e-15);
        assert!(g.weights().iter().all(|w| (w - 1.0).abs() < 1e-15));
        let g = cheb_grid(3).unwrap();
        let m2: f64 = g.nodes().iter().zip(g.weights()).map(|(x, w)| w * x * x).sum();
        assert!((m2 - 2.0 / 3.0).abs() < 1e-14);
        assert!(cheb_grid(0).is_err());
    }

    #[test]
    fn weights_sum_and_positivity() {
        for n in (1..=512).step_by(7) {
            let g = cheb_grid(n).unwrap();
            let s: f64 = g.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}");
            assert!(g.weights().iter().all(|&w| w > 0.0));
            assert!(g.nodes().windows(2).all(|p| p[0] > p[1]));
        }
    }

    #[test]
    fn polynomial_exactness() {
        for n in 1..30 {
            let g = cheb_grid(n).unwrap();
            for d in 0..n {
                let q: f64 = g.nodes().iter().zip(g.weights()).map(|(x, w)| w * x.powi(d as i32)).sum();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-12, "n = {n}, degree {d}");
            }
        }
    }

    #[test]
    fn grid_diff_examples() {
        let g = cheb_grid(12).unwrap();
        let f = tensor(&g, |a, _| a);
        let d = cheb_grid_diff(&g, &f, [1, 0]).unwrap();
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-11));
        let c = tensor(&g, |_, _| 2.5);
        for alpha in [[1, 0], [0, 1], [2, 2], [1, 3]] {
            let d = cheb_grid_diff(&g, &c, alpha).unwrap();
            assert!(d.iter().all(|v| v.abs() < 1e-10));
        }
        let f = tensor(&g, |a, b| a * a * b);
        let d = cheb_grid_diff(&g, &f, [1, 1]).unwrap();
        let want = tensor(&g, |a, _| 2.0 * a);
        for (x, y) in d.iter().zip(&want) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_diff_errors() {
        let g = cheb_grid(2).unwrap();
        let f = vec![1.0; 4];
        assert!(matches!(
            cheb_grid_diff(&g, &f, [2, 0]),
            Err(HdiError::GridTooSmall { .. })
        ));
        let g = cheb_grid(8).unwrap();
        assert!(matches!(
            cheb_grid_diff(&g, &vec![0.0; 64], [3, 2]),
            Err(HdiError::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn spectral_accuracy_on_analytic_function() {
        let g = cheb_grid(24).unwrap();
        let f = tensor(&g, |a, b| (a + 0.5 * b).exp());
        let d = cheb_grid_diff(&g, &f, [2, 1]).unwrap();
        let want = tensor(&g, |a, b| 0.5 * (a + 0.5 * b).exp());
        for (x, y) in d.iter().zip(&want) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn interpolant_matches_grid_derivatives() {
        let g = cheb_grid(14).unwrap();
        let f = tensor(&g, |a, b| (1.3 * a - 0.4 * b).sin() + a * b * b);
        let ip = ChebInterp2D::new(&g, &f).unwrap();
        let d1 = cheb_grid_diff(&g, &f, [1, 0]).unwrap();
        let d12 = cheb_grid_diff(&g, &f, [1, 1]).unwrap();
        let d22 = cheb_grid_diff(&g, &f, [0, 2]).unwrap();
        for i in 0..14 {
            for j in 0..14 {
                let k = i * 14 + j;
                let jet = ip.eval([g.nodes()[i], g.nodes()[j]]);
                assert!((jet.v - f[k]).abs() < 1e-12);
                assert!((jet.d1 - d1[k]).abs() < 1e-9);
                assert!((jet.d12 - d12[k]).abs() < 1e-8);
                assert!((jet.d22 - d22[k]).abs() < 1e-8);
            }
        }
        // off-grid, including the square's corner
        let jet = ip.eval([1.0, -1.0]);
        assert!((jet.v - ((1.7f64).sin() + 1.0)).abs() < 1e-9);
        assert!((jet.d2 - (-0.4 * 1.7f64.cos() - 2.0)).abs() < 1e-7);
    }
}
