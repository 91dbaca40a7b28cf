//! Complexified harmonic interpolants on plane curves.
//!
//! For a target parameter `t` the interpolant is
//! `f(tau, t) = sum_j c_j (zeta(tau) - zeta(t))^j / j!` with `zeta = x1 + i x2`.
//! Its real part `P = Re f` and normal-derivative trace
//! `Q = Im(d_tau f) / |zeta'(tau)|` are the traces of the harmonic function
//! `Re F(z)`, `F(z) = sum_j c_j (z - zeta(t))^j / j!`.

use num_complex::Complex64;

use crate::error::{HdiError, Result};
use crate::geometry2d::CurveJet;
use crate::jet::{Scalar, Taylor};

/// Which point conditions the interpolant satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterpKind {
    /// Normal-derivative trace matches the density (single-layer family).
    S,
    /// Dirichlet trace matches the density (hypersingular family).
    N,
}

/// Curve and density derivatives at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexJet {
    /// `zeta, zeta', ..., zeta^(K)`.
    pub zeta: Vec<Complex64>,
    /// `phi, phi', ..., phi^(K)`.
    pub phi: Vec<f64>,
    /// Derivatives of `1/|zeta'|` through order `K - 1`.
    pub inv_speed: Vec<f64>,
}

impl ComplexJet {
    /// Combines a curve jet with density derivatives `phi[0..]`.
    pub fn new(curve: &CurveJet, phi: &[f64]) -> Result<Self> {
        if curve.speed < 1e-10 {
            return Err(HdiError::SingularSystem(format!(
                "|zeta'| = {:e} at t = {}",
                curve.speed, curve.t
            )));
        }
        let zeta: Vec<Complex64> = curve.derivs.iter().map(|d| Complex64::new(d[0], d[1])).collect();
        let k = zeta.len() - 1;
        let d1: Vec<f64> = curve.derivs[1..].iter().map(|d| d[0]).collect();
        let d2: Vec<f64> = curve.derivs[1..].iter().map(|d| d[1]).collect();
        let a = Taylor::from_derivatives(&d1);
        let b = Taylor::from_derivatives(&d2);
        let inv = Taylor::constant(1.0) / (a * a + b * b).sqrt();
        Ok(ComplexJet {
            zeta,
            phi: phi.to_vec(),
            inv_speed: inv.derivatives(k.saturating_sub(1)),
        })
    }

    pub fn depth(&self) -> usize {
        (self.zeta.len() - 1).min(self.phi.len().saturating_sub(1))
    }

    pub fn speed(&self) -> f64 {
        self.zeta[1].norm()
    }
}

/// Taylor coefficients `c_0..c_J` of the interpolant anchored at `zeta(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HdiCoeffs2D {
    pub kind: InterpKind,
    pub t: f64,
    pub anchor: Complex64,
    pub order: usize,
    pub c: Vec<Complex64>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Lower-triangular `J x J` matrix with entries `B[m-1][j-1]` equal to the
/// partial Bell polynomial `B_{m,j}(zeta', ..., zeta^(m-j+1))`, i.e. the
/// `m`-th derivative of `(zeta(tau) - zeta(t))^j / j!` at `tau = t`.
pub fn bell_matrix(zeta: &[Complex64], j_max: usize) -> Result<Vec<Vec<Complex64>>> {
    if zeta.len() <= j_max {
        return Err(HdiError::invalid(format!(
            "Bell matrix of size {j_max} needs {j_max} curve derivatives, jet has {}",
            zeta.len().saturating_sub(1)
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    // full[m][j] for m, j in 0..=J
    let mut full = vec![vec![zero; j_max + 1]; j_max + 1];
    full[0][0] = Complex64::new(1.0, 0.0);
    for m in 1..=j_max {
        for j in 1..=m {
            let mut s = zero;
            for i in 1..=(m - j + 1) {
                s += zeta[i] * full[m - i][j - 1] * binomial(m - 1, i - 1);
            }
            full[m][j] = s;
        }
    }
    Ok((1..=j_max).map(|m| full[m][1..].to_vec()).collect())
}

fn forward_substitute(l: &[Vec<Complex64>], rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut y: Vec<Complex64> = Vec::with_capacity(rhs.len());
    for (m, row) in l.iter().enumerate() {
        let diag = row[m];
        if diag.norm() < 1e-300 {
            return Err(HdiError::SingularSystem(format!("zero pivot in row {m}")));
        }
        let s: Complex64 = (0..m).map(|k| row[k] * y[k]).sum();
        y.push((rhs[m] - s) / diag);
    }
    Ok(y)
}

fn check_jet(jet: &ComplexJet, need: usize) -> Result<()> {
    if jet.zeta.len() <= need || jet.phi.len() < need {
        return Err(HdiError::invalid(format!("jet depth insufficient for derivative order {need}")));
    }
    if jet.speed() < 1e-10 {
        return Err(HdiError::SingularSystem(format!("|zeta'| = {:e}", jet.speed())));
    }
    Ok(())
}

/// Coefficients with `f(t,t) = phi(t)` and `d^m f = phi^(m)` for `m <= M`.
pub fn coeffs_n(jet: &ComplexJet, t: f64, order: usize) -> Result<HdiCoeffs2D> {
    check_jet(jet, order.max(1))?;
    let mut c = vec![Complex64::new(jet.phi[0], 0.0)];
    if order > 0 {
        let b = bell_matrix(&jet.zeta, order)?;
        let rhs: Vec<Complex64> = jet.phi[1..=order].iter().map(|&p| Complex64::new(p, 0.0)).collect();
        c.extend(forward_substitute(&b, &rhs)?);
    }
    Ok(HdiCoeffs2D {
        kind: InterpKind::N,
        t,
        anchor: jet.zeta[0],
        order,
        c,
    })
}

/// Coefficients with `c_0 = 0` and `d^r [d_tau f / |zeta'|] = i phi^(r)` for
/// `r <= M`.
pub fn coeffs_s(jet: &ComplexJet, t: f64, order: usize) -> Result<HdiCoeffs2D> {
    check_jet(jet, order + 1)?;
    if jet.inv_speed.len() <= order {
        return Err(HdiError::invalid("speed-reciprocal jet too short"));
    }
    let size = order + 1;
    let zero = Complex64::new(0.0, 0.0);
    let a: Vec<Vec<Complex64>> = (1..=size)
        .map(|r| {
            (1..=size)
                .map(|q| {
                    if q > r {
                        zero
                    } else {
                        Complex64::new(binomial(r - 1, q - 1) * jet.inv_speed[r - q], 0.0)
                    }
                })
                .collect()
        })
        .collect();
    let rhs: Vec<Complex64> = jet.phi[..size].iter().map(|&p| Complex64::new(0.0, p)).collect();
    let y = forward_substitute(&a, &rhs)?;
    let b = bell_matrix(&jet.zeta, size)?;
    let mut c = vec![zero];
    c.extend(forward_substitute(&b, &y)?);
    Ok(HdiCoeffs2D {
        kind: InterpKind::S,
        t,
        anchor: jet.zeta[0],
        order,
        c,
    })
}

pub fn coeffs_2d(kind: InterpKind, jet: &ComplexJet, t: f64, order: usize) -> Result<HdiCoeffs2D> {
    match kind {
        InterpKind::N => coeffs_n(jet, t, order),
        InterpKind::S => coeffs_s(jet, t, order),
    }
}

/// Values of the interpolant along the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Traces2D {
    pub p: f64,
    pub q: f64,
    pub f: Complex64,
    pub df: Complex64,
}

impl HdiCoeffs2D {
    /// `F(z)` and `F'(z)` for any complex `z`.
    pub fn eval_f(&self, z: Complex64) -> (Complex64, Complex64) {
        let d = z - self.anchor;
        let mut f = Complex64::new(0.0, 0.0);
        let mut df = Complex64::new(0.0, 0.0);
        // Horner on sum c_j d^j / j!
        for j in (0..self.c.len()).rev() {
            f = f * d / (j as f64 + 1.0) + self.c[j];
            if j >= 1 {
                df = df * d / j as f64 + self.c[j];
            }
        }
        (f, df)
    }

    /// Harmonic function `U(x) = Re F(x1 + i x2)` and its gradient.
    pub fn eval_u(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let (f, df) = self.eval_f(Complex64::new(x[0], x[1]));
        (f.re, [df.re, -df.im])
    }

    /// `d_tau^2 f` at `tau = t`, i.e. `c_1 zeta'' + c_2 zeta'^2`.
    pub fn second_derivative_at_anchor(&self, zeta: &[Complex64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        if self.c.len() > 1 {
            s += self.c[1] * zeta[2];
        }
        if self.c.len() > 2 {
            s += self.c[2] * zeta[1] * zeta[1];
        }
        s
    }
}

/// Traces at the curve point `zeta(tau)` with derivative `zeta'(tau)`.
pub fn traces_2d(coeffs: &HdiCoeffs2D, zeta_tau: Complex64, dzeta_tau: Complex64) -> Traces2D {
    let (f, dfz) = coeffs.eval_f(zeta_tau);
    let df = dfz * dzeta_tau;
    Traces2D {
        p: f.re,
        q: df.im / dzeta_tau.norm(),
        f,
        df,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry2d::{curve_jet, ParametricCurve};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    fn density<S: Scalar>(t: S) -> S {
        t.sin() * (t.scale(3.0)).cos() + S::cst(1.0) / (S::cst(2.0) + t.cos())
    }

    fn density_jet(t: f64, k: usize) -> Vec<f64> {
        density(Taylor::variable(t)).derivatives(k)
    }

    fn jet(curve: &ParametricCurve, t: f64, k: usize, phi: &[f64]) -> ComplexJet {
        ComplexJet::new(&curve_jet(curve, t, k).unwrap(), phi).unwrap()
    }

    #[test]
    fn bell_examples() {
        let circle = ParametricCurve::circle(1.0).unwrap();
        let j = jet(&circle, 0.0, 3, &[0.0; 4]);
        let b = bell_matrix(&j.zeta, 2).unwrap();
        assert!(close(b[0][0], c(0.0, 1.0), 1e-15));
        assert!(close(b[0][1], c(0.0, 0.0), 1e-15));
        assert!(close(b[1][0], c(-1.0, 0.0), 1e-15));
        assert!(close(b[1][1], c(-1.0, 0.0), 1e-15));
        let z = vec![c(0.3, 0.1), c(1.2, -0.7), c(0.4, 2.0), c(-1.1, 0.5), c(0.9, 0.9), c(2.0, -3.0)];
        let b = bell_matrix(&z, 5).unwrap();
        assert!(close(b[2][1], 3.0 * z[1] * z[2], 1e-14));
        for m in 0..5 {
            assert!(close(b[m][m], z[1].powu(m as u32 + 1), 1e-12));
            for jj in m + 1..5 {
                assert_eq!(b[m][jj], c(0.0, 0.0));
            }
        }
        // remaining displayed entries of the order-5 matrix
        assert!(close(b[3][1], 4.0 * z[1] * z[3] + 3.0 * z[2] * z[2], 1e-12));
        assert!(close(b[3][2], 6.0 * z[1] * z[1] * z[2], 1e-12));
        assert!(close(b[4][1], 5.0 * z[1] * z[4] + 10.0 * z[2] * z[3], 1e-12));
        assert!(close(b[4][2], 10.0 * z[1] * z[1] * z[3] + 15.0 * z[1] * z[2] * z[2], 1e-12));
        assert!(close(b[4][3], 10.0 * z[1].powu(3) * z[2], 1e-12));
        assert!(bell_matrix(&z[..3], 3).is_err());
    }

    #[test]
    fn bell_matches_direct_differentiation() {
        // (zeta(tau) - zeta(t))^j / j! as a pair of real Taylor series
        let kite = ParametricCurve::kite();
        let t = 0.9;
        let cj = curve_jet(&kite, t, 6).unwrap();
        let z: Vec<Complex64> = cj.derivs.iter().map(|d| c(d[0], d[1])).collect();
        let b = bell_matrix(&z, 4).unwrap();
        let mut re = Taylor::from_derivatives(&cj.derivs.iter().map(|d| d[0]).collect::<Vec<_>>());
        let mut im = Taylor::from_derivatives(&cj.derivs.iter().map(|d| d[1]).collect::<Vec<_>>());
        re.c[0] = 0.0;
        im.c[0] = 0.0;
        let (mut pr, mut pi) = (Taylor::constant(1.0), Taylor::constant(0.0));
        let mut fact = 1.0;
        for jj in 1..=4 {
            let nr = pr * re - pi * im;
            let ni = pr * im + pi * re;
            pr = nr;
            pi = ni;
            fact *= jj as f64;
            for m in 1..=4 {
                let want = c(pr.derivative(m), pi.derivative(m)) / fact;
                assert!(close(b[m - 1][jj - 1], want, 1e-11), "m = {m}, j = {jj}");
            }
        }
    }

    #[test]
    fn coeffs_n_examples() {
        let kite = ParametricCurve::kite();
        for m in 0..5 {
            let mut phi = vec![0.0; m + 1];
            phi[0] = 1.0;
            let co = coeffs_n(&jet(&kite, 1.3, m + 1, &phi), 1.3, m).unwrap();
            assert_eq!(co.c[0], c(1.0, 0.0));
            assert!(co.c[1..].iter().all(|v| v.norm() < 1e-15));
        }
        let circle = ParametricCurve::circle(1.0).unwrap();
        let t = PI / 2.0;
        let co = coeffs_n(&jet(&circle, t, 2, &[t.cos(), -t.sin()]), t, 1).unwrap();
        assert!(close(co.c[1], c(1.0, 0.0), 1e-15));
        let co = coeffs_n(&jet(&circle, 0.0, 2, &[1.0, 0.0]), 0.0, 1).unwrap();
        assert!(co.c[1].norm() < 1e-15);
    }

    #[test]
    fn coeffs_s_examples() {
        let circle = ParametricCurve::circle(1.0).unwrap();
        let co = coeffs_s(&jet(&circle, 0.0, 3, &[0.0; 3]), 0.0, 1).unwrap();
        assert!(co.c.iter().all(|v| v.norm() == 0.0));
        let co = coeffs_s(&jet(&circle, 0.0, 2, &[1.0]), 0.0, 0).unwrap();
        assert_eq!(co.c.len(), 2);
        assert_eq!(co.c[0], c(0.0, 0.0));
        assert!(close(co.c[1], c(1.0, 0.0), 1e-15));
        for tau in [0.0, 0.4, 2.0] {
            let tr = traces_2d(&co, c(tau.cos(), tau.sin()), c(-tau.sin(), tau.cos()));
            assert!((tr.p - (tau.cos() - 1.0)).abs() < 1e-15);
            assert!((tr.q - tau.cos()).abs() < 1e-15);
        }
        // unit speed: A is the identity, so the S solve is a Bell solve of i phi
        let j = jet(&circle, 0.7, 4, &[0.3, -0.2, 0.5]);
        assert!((j.inv_speed[0] - 1.0).abs() < 1e-15 && j.inv_speed[1..].iter().all(|v| v.abs() < 1e-14));
        let co = coeffs_s(&j, 0.7, 2).unwrap();
        let b = bell_matrix(&j.zeta, 3).unwrap();
        let direct = forward_substitute(&b, &[c(0.0, 0.3), c(0.0, -0.2), c(0.0, 0.5)]).unwrap();
        for (a, d) in co.c[1..].iter().zip(&direct) {
            assert!(close(*a, *d, 1e-14));
        }
    }

    #[test]
    fn traces_examples() {
        let co = HdiCoeffs2D {
            kind: InterpKind::N,
            t: 0.0,
            anchor: c(0.5, 0.5),
            order: 3,
            c: vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        };
        let tr = traces_2d(&co, c(2.0, -1.0), c(0.3, 0.8));
        assert_eq!((tr.p, tr.q), (1.0, 0.0));
    }

    /// Order from the last halving whose errors sit above round-off.
    fn asymptotic_slope(errs: &[f64]) -> f64 {
        errs.windows(2)
            .filter(|w| w[1] > 1e-11)
            .map(|w| (w[0] / w[1]).log2())
            .next_back()
            .expect("errors above round-off")
    }

    #[test]
    fn vanishing_orders() {
        let curves = [ParametricCurve::kite(), ParametricCurve::ellipse(2.0, 1.0).unwrap(), ParametricCurve::pinched()];
        let deltas: Vec<f64> = (0..7).map(|k| 0.04 / 2f64.powi(k)).collect();
        for curve in &curves {
            for &t in &[0.4, 2.5] {
                for m in 0..=4usize {
                    let j = jet(curve, t, m + 2, &density_jet(t, m + 1));
                    let cn = coeffs_n(&j, t, m).unwrap();
                    let cs = coeffs_s(&j, t, m).unwrap();
                    let mut e = [vec![], vec![], vec![], vec![]];
                    for &d in &deltas {
                        let cj = curve_jet(curve, t + d, 1).unwrap();
                        let z = c(cj.derivs[0][0], cj.derivs[0][1]);
                        let dz = c(cj.derivs[1][0], cj.derivs[1][1]);
                        let phi = density(t + d);
                        let tn = traces_2d(&cn, z, dz);
                        let ts = traces_2d(&cs, z, dz);
                        e[0].push((tn.p - phi).abs());
                        e[1].push(tn.q.abs());
                        e[2].push((ts.q - phi).abs());
                        e[3].push(ts.p.abs());
                    }
                    let want = [m + 1, m, m + 1, m + 2];
                    for k in 0..4 {
                        if want[k] == 0 {
                            continue;
                        }
                        let s = asymptotic_slope(&e[k]);
                        assert!(
                            s > want[k] as f64 - 0.35,
                            "{} t = {t} M = {m} trace {k}: slope {s}",
                            curve.name()
                        );
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn coefficients_are_linear(
            t in 0.0..(2.0 * PI),
            a in -3.0..3.0f64,
            b in -3.0..3.0f64,
            p in prop::collection::vec(-2.0..2.0f64, 5),
            q in prop::collection::vec(-2.0..2.0f64, 5),
            m in 0usize..4,
        ) {
            let kite = ParametricCurve::kite();
            let cj = curve_jet(&kite, t, 6).unwrap();
            let comb: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + b * y).collect();
            for kind in [InterpKind::N, InterpKind::S] {
                let cp = coeffs_2d(kind, &ComplexJet::new(&cj, &p).unwrap(), t, m).unwrap();
                let cq = coeffs_2d(kind, &ComplexJet::new(&cj, &q).unwrap(), t, m).unwrap();
                let cc = coeffs_2d(kind, &ComplexJet::new(&cj, &comb).unwrap(), t, m).unwrap();
                for k in 0..cc.c.len() {
                    let lin = cp.c[k] * a + cq.c[k] * b;
                    prop_assert!((cc.c[k] - lin).norm() < 1e-12 * (1.0 + lin.norm()));
                }
            }
        }
    }
}
