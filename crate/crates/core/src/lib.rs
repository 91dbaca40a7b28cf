//! Harmonic density interpolation for Laplace boundary integral operators on
//! closed curves and patched surfaces.
//!
//! The density is locally replaced by the traces of a harmonic polynomial that
//! matches its Taylor data at the target; Green's identities turn the
//! difference into bounded integrands that the plain trapezoidal (curves) or
//! Fejér (surfaces) rule integrates accurately. 2D operators live in
//! [`operators2d`], 3D operators in [`operators3d`], boundary-value drivers in
//! [`solver`] and the convergence studies in [`experiments`].

pub mod chebyshev;
pub mod error;
pub mod experiments;
pub mod geometry2d;
pub mod geometry3d;
pub mod hdi2d;
pub mod hdi3d;
pub mod jet;
pub mod operators2d;
pub mod operators3d;
pub mod solver;
pub mod spectral;

pub use error::{HdiError, Result};
pub use geometry2d::{make_curve, ParametricCurve, Params};
pub use geometry3d::{make_surface, PatchedSurface, SurfaceGrid, Vec3};
pub use hdi2d::InterpKind;
pub use operators2d::{BoundaryGrid2D, Density2D, LayerKind, OperatorOptions};
pub use operators3d::{eval_operator_3d, Operator3D, SurfaceDensity, SurfaceOperators};
pub use solver::{gmres, GmresConfig, LinearOperator};
pub use spectral::PeriodicSamples;
