//! Harmonic polynomial interpolant on surfaces: nine homogeneous harmonic
//! polynomials of degree at most two, fitted at a surface point so that either
//! the normal derivative (kind S) or the trace (kind N) matches the density's
//! local jet.

use nalgebra::{SMatrix, SVector};

use crate::error::{HdiError, Result};
use crate::geometry3d::{dot, SurfaceJet, Vec3};
pub use crate::hdi2d::InterpKind;

pub const N_BASIS: usize = 9;

pub type Matrix9 = SMatrix<f64, 9, 9>;

/// `1, x, y, z, xy, xz, yz, x^2 - y^2, x^2 - z^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HarmonicBasis;

impl HarmonicBasis {
    pub fn values(r: Vec3) -> [f64; N_BASIS] {
        let [x, y, z] = r;
        [1.0, x, y, z, x * y, x * z, y * z, x * x - y * y, x * x - z * z]
    }

    pub fn gradients(r: Vec3) -> [Vec3; N_BASIS] {
        let [x, y, z] = r;
        [
            [0.0; 3],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [y, x, 0.0],
            [z, 0.0, x],
            [0.0, z, y],
            [2.0 * x, -2.0 * y, 0.0],
            [2.0 * x, 0.0, -2.0 * z],
        ]
    }

    /// Constant Hessians.
    pub fn hessians() -> [[Vec3; 3]; N_BASIS] {
        let z = [[0.0; 3]; 3];
        [
            z,
            z,
            z,
            z,
            [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0; 3]],
            [[0.0, 0.0, 1.0], [0.0; 3], [1.0, 0.0, 0.0]],
            [[0.0; 3], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
            [[2.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0; 3]],
            [[2.0, 0.0, 0.0], [0.0; 3], [0.0, 0.0, -2.0]],
        ]
    }
}

fn quad(h: &[Vec3; 3], a: Vec3, b: Vec3) -> f64 {
    let hb = [dot(h[0], b), dot(h[1], b), dot(h[2], b)];
    dot(a, hb)
}

/// Rows: trace, its two tangential derivatives, normal trace, its two
/// tangential derivatives, and the three second tangential derivatives of the
/// trace, each applied to `H_j(. - x)` at the surface point itself.
pub fn assemble_a(jet: &SurfaceJet) -> Matrix9 {
    let grads = HarmonicBasis::gradients([0.0; 3]);
    let hess = HarmonicBasis::hessians();
    let mut a = Matrix9::zeros();
    a[(0, 0)] = 1.0;
    for j in 0..N_BASIS {
        let g = grads[j];
        let h = &hess[j];
        a[(1, j)] = dot(g, jet.d1);
        a[(2, j)] = dot(g, jet.d2);
        a[(3, j)] = dot(g, jet.normal);
        a[(4, j)] = quad(h, jet.d1, jet.normal) + dot(g, jet.dn1);
        a[(5, j)] = quad(h, jet.d2, jet.normal) + dot(g, jet.dn2);
        a[(6, j)] = quad(h, jet.d1, jet.d1) + dot(g, jet.d11);
        a[(7, j)] = quad(h, jet.d1, jet.d2) + dot(g, jet.d12);
        a[(8, j)] = quad(h, jet.d2, jet.d2) + dot(g, jet.d22);
    }
    a
}

/// Density value and parameter derivatives through second order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DensityJet3D {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdiCoeffs3D {
    pub kind: InterpKind,
    pub anchor: Vec3,
    pub c: [f64; N_BASIS],
}

impl HdiCoeffs3D {
    /// `U(y)` and, when a normal is given, `grad U(y) . n`.
    pub fn eval_u(&self, y: Vec3, n_y: Option<Vec3>) -> (f64, Option<f64>) {
        let r = [y[0] - self.anchor[0], y[1] - self.anchor[1], y[2] - self.anchor[2]];
        let h = HarmonicBasis::values(r);
        let u = (0..N_BASIS).map(|j| self.c[j] * h[j]).sum();
        let dn = n_y.map(|n| dot(self.gradient(y), n));
        (u, dn)
    }

    pub fn gradient(&self, y: Vec3) -> Vec3 {
        let r = [y[0] - self.anchor[0], y[1] - self.anchor[1], y[2] - self.anchor[2]];
        let g = HarmonicBasis::gradients(r);
        let mut out = [0.0; 3];
        for j in 1..N_BASIS {
            for k in 0..3 {
                out[k] += self.c[j] * g[j][k];
            }
        }
        out
    }
}

pub fn rhs_3d(kind: InterpKind, phi: &DensityJet3D) -> [f64; N_BASIS] {
    match kind {
        InterpKind::S => [0.0, 0.0, 0.0, phi.v, phi.d1, phi.d2, 0.0, 0.0, 0.0],
        InterpKind::N => [phi.v, phi.d1, phi.d2, 0.0, 0.0, 0.0, phi.d11, phi.d12, phi.d22],
    }
}

/// LU factorization of the interpolation matrix at one surface point, reusable
/// for both kinds.
#[derive(Debug, Clone)]
pub struct InterpSystem {
    anchor: Vec3,
    lu: nalgebra::LU<f64, nalgebra::U9, nalgebra::U9>,
}

impl InterpSystem {
    pub fn new(jet: &SurfaceJet) -> Result<Self> {
        let lu = assemble_a(jet).lu();
        if !lu.is_invertible() {
            return Err(HdiError::SingularSystem(format!("interpolation matrix at {:?}", jet.x)));
        }
        Ok(InterpSystem { anchor: jet.x, lu })
    }

    pub fn coeffs(&self, kind: InterpKind, phi: &DensityJet3D) -> Result<HdiCoeffs3D> {
        let b = SVector::<f64, 9>::from(rhs_3d(kind, phi));
        let c = self
            .lu
            .solve(&b)
            .ok_or_else(|| HdiError::SingularSystem("interpolation solve failed".into()))?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(HdiError::NonFinite("interpolation coefficients"));
        }
        Ok(HdiCoeffs3D {
            kind,
            anchor: self.anchor,
            c: std::array::from_fn(|j| c[j]),
        })
    }
}

pub fn coeffs_3d(jet: &SurfaceJet, phi: &DensityJet3D, kind: InterpKind) -> Result<HdiCoeffs3D> {
    InterpSystem::new(jet)?.coeffs(kind, phi)
}
