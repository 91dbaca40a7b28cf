//! Shared fixtures for the benchmarks.

use hdi_core::experiments::DensitySpec2D;
use hdi_core::{ParametricCurve, PatchedSurface, PeriodicSamples, SurfaceDensity, SurfaceGrid, SurfaceOperators};

/// Kite curve with the smooth test density sampled at `points` nodes.
pub fn kite_problem(points: usize) -> (ParametricCurve, PeriodicSamples) {
    let curve = ParametricCurve::kite();
    let density = DensitySpec2D::ExpSinOrigin.sample(&curve, points / 2).expect("kite density");
    (curve, density)
}

/// Operators on the unit sphere with `n x n` nodes per patch and the density
/// `x1 + x2 x3`.
pub fn sphere_problem(n: usize) -> (SurfaceOperators, SurfaceDensity) {
    let surface = PatchedSurface::sphere([0.0; 3], 1.0).expect("sphere");
    let ops = SurfaceOperators::new(SurfaceGrid::new(&surface, n).expect("grid")).expect("operators");
    let values = ops.grid.points.iter().map(|p| p[0] + p[1] * p[2]).collect();
    let density = SurfaceDensity::new(&ops.grid, values).expect("density");
    (ops, density)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_expected_sizes() {
        assert_eq!(kite_problem(64).1.len(), 64);
        let (ops, d) = sphere_problem(4);
        assert_eq!(ops.len(), 6 * 16);
        assert_eq!(d.values.len(), ops.len());
    }
}
