//! GMRES and boundary-value-problem drivers built on the Nyström operators.

use rayon::prelude::*;

use crate::error::{HdiError, Result};
use crate::geometry2d::ParametricCurve;
use crate::operators2d::{
    apply_adjoint_double_layer, apply_hypersingular, apply_single_layer, eval_potential_near, smooth_operator_matrix,
    BoundaryGrid2D, Density2D, LayerKind, NearFieldOptions,
};
use crate::operators3d::{eval_operator_3d, Operator3D, SurfaceDensity, SurfaceOperators};
use crate::spectral::PeriodicSamples;

/// A square linear map applied matrix-free.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    n: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(HdiError::invalid(format!("dense operator needs {} entries, got {}", n * n, data.len())));
        }
        Ok(DenseOperator { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        DenseOperator { n, data }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok(self
            .data
            .par_chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Operator defined by a closure.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnOperator { dim, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, x.len())?;
        let y = (self.f)(x)?;
        check_len(self.dim, y.len())?;
        Ok(y)
    }
}

/// Dense matrix of any operator, column by column.
pub fn assemble_dense(op: &dyn LinearOperator) -> Result<DenseOperator> {
    let n = op.dim();
    let mut data = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.apply(&e)?;
        e[j] = 0.0;
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
    DenseOperator::new(n, data)
}

fn check_len(want: usize, got: usize) -> Result<()> {
    if want != got {
        return Err(HdiError::invalid(format!("dimension mismatch: expected {want}, got {got}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    /// Target relative residual `|b - Ax| / |b|`.
    pub tolerance: f64,
    /// Restart length; `None` for full GMRES.
    pub restart: Option<usize>,
    pub max_iterations: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            tolerance: 1e-8,
            restart: None,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutput {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual estimate after each iteration, starting with the
    /// initial residual.
    pub history: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// GMRES with modified Gram-Schmidt Arnoldi and Givens rotations, starting
/// from `x = 0`.
pub fn gmres(op: &dyn LinearOperator, b: &[f64], cfg: &GmresConfig) -> Result<GmresOutput> {
    let n = op.dim();
    check_len(n, b.len())?;
    if !(cfg.tolerance > 0.0) {
        return Err(HdiError::invalid("GMRES tolerance must be positive"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(HdiError::NonFinite("right-hand side"));
    }
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    let mut history = vec![1.0];
    if bnorm == 0.0 {
        return Ok(GmresOutput { x, iterations: 0, history: vec![0.0] });
    }
    let restart = cfg.restart.unwrap_or(cfg.max_iterations).max(1).min(n.max(1));
    let mut iterations = 0;
    let mut r = b.to_vec();
    loop {
        let beta = norm(&r);
        if beta / bnorm <= cfg.tolerance {
            return Ok(GmresOutput { x, iterations, history });
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut k = 0;
        let mut converged = false;
        while k < restart && iterations < cfg.max_iterations {
            let mut w = op.apply(&basis[k])?;
            let mut h = vec![0.0; k + 2];
            for (i, v) in basis.iter().enumerate() {
                h[i] = dot(&w, v);
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= h[i] * vj;
                }
            }
            h[k + 1] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let denom = h[k].hypot(h[k + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[k] / denom, h[k + 1] / denom) };
            let hk1 = h[k + 1];
            h[k] = c * h[k] + s * hk1;
            h[k + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[k]);
            g[k] *= c;
            hess.push(h);
            iterations += 1;
            k += 1;
            let res = g[k].abs() / bnorm;
            history.push(res);
            let lucky = hk1 <= 1e-14 * beta;
            if res <= cfg.tolerance || lucky {
                converged = true;
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| hess[j][i] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            for (xj, vj) in x.iter_mut().zip(v) {
                *xj += yi * vj;
            }
        }
        let ax = op.apply(&x)?;
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let true_res = norm(&r) / bnorm;
        if converged && true_res <= cfg.tolerance * 10.0 {
            return Ok(GmresOutput { x, iterations, history });
        }
        if iterations >= cfg.max_iterations {
            return Err(HdiError::GmresNotConverged {
                iterations,
                residual: true_res,
                history,
            });
        }
    }
}

/// Integral-equation formulation for the 2D Dirichlet problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirichletKind {
    /// `S psi = g`.
    First,
    /// `(-I/2 + K) phi = g`.
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySolution {
    pub density: PeriodicSamples,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Solves for a single-layer (`First`) or double-layer (`Second`) density
/// whose interior potential has boundary values `g`.
pub fn solve_dirichlet_2d(
    curve: &ParametricCurve,
    g: &PeriodicSamples,
    kind: DirichletKind,
    order: usize,
    cfg: &GmresConfig,
) -> Result<DensitySolution> {
    let n = g.len();
    let grid = BoundaryGrid2D::new(curve, g.n_half(), order + 1)?;
    let out = match kind {
        DirichletKind::Second => {
            let mut m = smooth_operator_matrix(&grid, false);
            for i in 0..n {
                m[i * n + i] -= 0.5;
            }
            gmres(&DenseOperator::new(n, m)?, g.values(), cfg)?
        }
        DirichletKind::First => {
            let op = FnOperator::new(n, |x: &[f64]| apply_single_layer(&grid, x, order));
            gmres(&op, g.values(), cfg)?
        }
    };
    Ok(DensitySolution {
        density: PeriodicSamples::new(out.x)?,
        iterations: out.iterations,
        history: out.history,
    })
}

/// Data of the multi-curve transmission-type equation
/// `(I/2 - contrast K') q = -contrast N[v] - contrast E.n + j`.
#[derive(Debug, Clone)]
pub struct TransmissionProblem<'a> {
    pub curves: &'a [ParametricCurve],
    /// Half the number of nodes per curve.
    pub n_half: usize,
    pub contrast: f64,
    /// Per-curve samples of `v` and `j` at the nodes.
    pub v: &'a [Vec<f64>],
    pub j: &'a [Vec<f64>],
    pub field: [f64; 2],
    /// Interpolation order for `N` and the cross-curve near-field terms.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionSolution {
    pub q: Vec<Vec<f64>>,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Normal derivative on curve `a` of the layer potential generated by
/// `density` on curve `b`.
fn cross_normal_derivative(
    target: &BoundaryGrid2D,
    source: &BoundaryGrid2D,
    density: &Density2D,
    kind: LayerKind,
    order: usize,
) -> Result<Vec<f64>> {
    let mut opts = NearFieldOptions::new(order);
    opts.want_gradient = true;
    (0..target.len())
        .into_par_iter()
        .map(|i| {
            let x = target.points[i];
            let n = target.normals[i];
            let g = eval_potential_near(source, density, kind, x, opts)?
                .gradient
                .expect("gradient requested");
            Ok(g[0] * n[0] + g[1] * n[1])
        })
        .collect()
}

/// Applies the full multi-curve `K'` (or `N` when `hyper` is set) to
/// per-curve densities.
fn apply_multi(grids: &[BoundaryGrid2D], dens: &[Vec<f64>], order: usize, hyper: bool) -> Result<Vec<Vec<f64>>> {
    let densities = dens
        .iter()
        .map(|d| Density2D::from_values(d.clone(), order + 1))
        .collect::<Result<Vec<_>>>()?;
    let kind = if hyper { LayerKind::Double } else { LayerKind::Single };
    let mut out = Vec::with_capacity(grids.len());
    for (a, ga) in grids.iter().enumerate() {
        let mut acc = if hyper {
            apply_hypersingular(ga, &dens[a], order)?
        } else {
            apply_adjoint_double_layer(ga, &dens[a])?
        };
        for (b, gb) in grids.iter().enumerate() {
            if a == b || dens[b].iter().all(|v| *v == 0.0) {
                continue;
            }
            let c = cross_normal_derivative(ga, gb, &densities[b], kind, order)?;
            for (x, y) in acc.iter_mut().zip(c) {
                *x += y;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

fn split(flat: &[f64], n: usize) -> Vec<Vec<f64>> {
    flat.chunks(n).map(|c| c.to_vec()).collect()
}

pub fn solve_transmission_2d(problem: &TransmissionProblem<'_>, cfg: &GmresConfig) -> Result<TransmissionSolution> {
    let nc = problem.curves.len();
    if nc == 0 {
        return Err(HdiError::invalid("at least one curve is required"));
    }
    let n = 2 * problem.n_half;
    if problem.v.len() != nc || problem.j.len() != nc {
        return Err(HdiError::invalid("v and j need one sample vector per curve"));
    }
    for s in problem.v.iter().chain(problem.j) {
        check_len(n, s.len())?;
    }
    let grids = problem
        .curves
        .iter()
        .map(|c| BoundaryGrid2D::new(c, problem.n_half, problem.order + 1))
        .collect::<Result<Vec<_>>>()?;
    let mu = problem.contrast;
    let nv = if mu != 0.0 && problem.v.iter().any(|v| v.iter().any(|x| *x != 0.0)) {
        apply_multi(&grids, problem.v, problem.order, true)?
    } else {
        vec![vec![0.0; n]; nc]
    };
    let mut rhs = Vec::with_capacity(nc * n);
    for (a, g) in grids.iter().enumerate() {
        for i in 0..n {
            let en = problem.field[0] * g.normals[i][0] + problem.field[1] * g.normals[i][1];
            rhs.push(-mu * nv[a][i] - mu * en + problem.j[a][i]);
        }
    }
    let op = FnOperator::new(nc * n, |x: &[f64]| {
        let q = split(x, n);
        let kq = if mu != 0.0 {
            apply_multi(&grids, &q, problem.order, false)?
        } else {
            vec![vec![0.0; n]; nc]
        };
        Ok(x.iter()
            .zip(kq.concat())
            .map(|(xi, ki)| 0.5 * xi - mu * ki)
            .collect())
    });
    let out = gmres(&op, &rhs, cfg)?;
    Ok(TransmissionSolution {
        q: split(&out.x, n),
        iterations: out.iterations,
        history: out.history,
    })
}

/// Trace `v` of the exterior Neumann problem from `(-I/2 + K) v = S[dn u]`.
#[derive(Debug, Clone)]
pub struct NeumannSolution {
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<f64>,
}

pub fn solve_neumann_ext_3d(ops: &SurfaceOperators, neumann: &[f64], cfg: &GmresConfig) -> Result<NeumannSolution> {
    let n = ops.len();
    if neumann.len() != n {
        return Err(HdiError::invalid(format!(
            "Neumann data has {} values, surface grid has {n} nodes",
            neumann.len()
        )));
    }
    let data = SurfaceDensity::new(&ops.grid, neumann.to_vec())?;
    let rhs = eval_operator_3d(ops, &data, Operator3D::Single)?;
    let op = FnOperator::new(n, |v: &[f64]| {
        let d = SurfaceDensity::new(&ops.grid, v.to_vec())?;
        let k = eval_operator_3d(ops, &d, Operator3D::Double)?;
        Ok(k.iter().zip(v).map(|(k, v)| k - 0.5 * v).collect())
    });
    let out = gmres(&op, &rhs, cfg)?;
    Ok(NeumannSolution {
        trace: out.x,
        iterations: out.iterations,
        history: out.history,
    })
}
