//! Closed, counterclockwise, 2π-periodic plane curves with derivative jets,
//! a registry of test curves, and nearest-point projection.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use crate::error::{HdiError, Result};
use crate::jet::{Scalar, Taylor, TAYLOR_LEN};
use crate::spectral::{PeriodicSamples, TrigInterpolant, MAX_PERIODIC_ORDER};

/// Registered curve names accepted by [`make_curve`].
pub const CURVE_REGISTRY: [&str; 5] = ["circle", "ellipse", "kite", "pinched", "custom-samples"];

/// String parameters for registry constructors.
pub type Params = BTreeMap<String, String>;

const MIN_SPEED: f64 = 1e-10;

#[derive(Clone)]
enum Shape {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    Kite,
    Pinched,
    Samples { x1: TrigInterpolant, x2: TrigInterpolant },
}

#[derive(Clone)]
pub struct ParametricCurve {
    shape: Shape,
    center: [f64; 2],
    name: String,
}

impl fmt::Debug for ParametricCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricCurve")
            .field("name", &self.name)
            .field("center", &self.center)
            .finish()
    }
}

/// Derivatives `x, x', ..., x^(K)` at one parameter value, with the outward
/// unit normal `(x2', -x1')/|x'|`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveJet {
    pub t: f64,
    pub derivs: Vec<[f64; 2]>,
    pub normal: [f64; 2],
    pub speed: f64,
}

impl CurveJet {
    pub fn point(&self) -> [f64; 2] {
        self.derivs[0]
    }
    pub fn tangent(&self) -> [f64; 2] {
        self.derivs[1]
    }
    /// `x'' . n / |x'|^2`, the signed curvature (negative for convex
    /// counterclockwise curves with the outward normal).
    pub fn curvature(&self) -> f64 {
        let d2 = self.derivs[2];
        (d2[0] * self.normal[0] + d2[1] * self.normal[1]) / (self.speed * self.speed)
    }
}

impl ParametricCurve {
    pub fn circle(radius: f64) -> Result<Self> {
        positive("radius", radius)?;
        Ok(Self::analytic(Shape::Circle { radius }, "circle"))
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        positive("a", a)?;
        positive("b", b)?;
        Ok(Self::analytic(Shape::Ellipse { a, b }, "ellipse"))
    }

    /// `(cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`.
    pub fn kite() -> Self {
        Self::analytic(Shape::Kite, "kite")
    }

    /// `(cos t, sin t / (1 + sin^6 t))`.
    pub fn pinched() -> Self {
        Self::analytic(Shape::Pinched, "pinched")
    }

    /// Curve through samples `(x1_j, x2_j)` at `t_j = j pi / N`, with jets
    /// from trigonometric interpolation.
    pub fn from_samples(x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        if x1.len() != x2.len() {
            return Err(HdiError::invalid("sample columns differ in length"));
        }
        let s1 = PeriodicSamples::new(x1)?;
        let s2 = PeriodicSamples::new(x2)?;
        let curve = ParametricCurve {
            shape: Shape::Samples {
                x1: TrigInterpolant::new(&s1),
                x2: TrigInterpolant::new(&s2),
            },
            center: [0.0; 2],
            name: "custom-samples".into(),
        };
        for t in s1.nodes() {
            curve_jet(&curve, t, 1)?;
        }
        if curve.signed_area(256) <= 0.0 {
            return Err(HdiError::invalid("sampled curve must be counterclockwise"));
        }
        Ok(curve)
    }

    fn analytic(shape: Shape, name: &str) -> Self {
        ParametricCurve {
            shape,
            center: [0.0; 2],
            name: name.into(),
        }
    }

    pub fn translated(mut self, offset: [f64; 2]) -> Self {
        self.center = [self.center[0] + offset[0], self.center[1] + offset[1]];
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Highest derivative order available from [`curve_jet`].
    pub fn max_jet_order(&self) -> usize {
        match self.shape {
            Shape::Samples { .. } => MAX_PERIODIC_ORDER,
            _ => TAYLOR_LEN - 1,
        }
    }

    fn map<S: Scalar>(&self, t: S) -> [S; 2] {
        let [cx, cy] = self.center;
        let (x, y) = match self.shape {
            Shape::Circle { radius } => (t.cos().scale(radius), t.sin().scale(radius)),
            Shape::Ellipse { a, b } => (t.cos().scale(a), t.sin().scale(b)),
            Shape::Kite => (
                t.cos() + (t.scale(2.0)).cos().scale(0.65) - S::cst(0.65),
                t.sin().scale(1.5),
            ),
            Shape::Pinched => {
                let s = t.sin();
                (t.cos(), s / (S::cst(1.0) + s.powi(6)))
            }
            Shape::Samples { .. } => unreachable!("sampled curves have no closed form"),
        };
        [x + S::cst(cx), y + S::cst(cy)]
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        match &self.shape {
            Shape::Samples { x1, x2 } => [x1.eval(t, 0) + self.center[0], x2.eval(t, 0) + self.center[1]],
            _ => self.map(t),
        }
    }

    /// `x, x', ..., x^(k)` at `t`.
    fn derivatives(&self, t: f64, k: usize) -> Vec<[f64; 2]> {
        match &self.shape {
            Shape::Samples { x1, x2 } => (0..=k)
                .map(|o| {
                    let off = if o == 0 { self.center } else { [0.0; 2] };
                    [x1.eval(t, o) + off[0], x2.eval(t, o) + off[1]]
                })
                .collect(),
            _ => {
                let [a, b] = self.map(Taylor::variable(t));
                (0..=k).map(|o| [a.derivative(o), b.derivative(o)]).collect()
            }
        }
    }

    /// `1/2 * integral of x ^ x'` by the trapezoidal rule on `2n` points.
    pub fn signed_area(&self, n: usize) -> f64 {
        let h = PI / n as f64;
        (0..2 * n)
            .map(|j| {
                let d = self.derivatives(j as f64 * h, 1);
                d[0][0] * d[1][1] - d[0][1] * d[1][0]
            })
            .sum::<f64>()
            * 0.5
            * h
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(HdiError::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn curve_jet(curve: &ParametricCurve, t: f64, k: usize) -> Result<CurveJet> {
    if !t.is_finite() {
        return Err(HdiError::NonFinite("curve parameter"));
    }
    let max = curve.max_jet_order();
    if k > max {
        return Err(HdiError::OrderTooHigh { order: k, max });
    }
    let derivs = curve.derivatives(t, k.max(2));
    let d1 = derivs[1];
    let speed = d1[0].hypot(d1[1]);
    if speed < MIN_SPEED {
        return Err(HdiError::Regularity {
            at: format!("t = {t}"),
            speed,
        });
    }
    Ok(CurveJet {
        t,
        derivs,
        normal: [d1[1] / speed, -d1[0] / speed],
        speed,
    })
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
            .map_err(|_| HdiError::Parse(format!("curve parameter {key} = '{s}' is not a number"))),
    }
}

/// Parses a two-column whitespace- or comma-separated table of `(x1, x2)`.
pub fn parse_sample_table(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut x1 = Vec::new();
    let mut x2 = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if cols.len() != 2 {
            return Err(HdiError::Parse(format!(
                "line {}: expected two columns, found {}",
                lineno + 1,
                cols.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| HdiError::Parse(format!("line {}: bad number '{s}'", lineno + 1)))
        };
        x1.push(parse(cols[0])?);
        x2.push(parse(cols[1])?);
    }
    Ok((x1, x2))
}

/// Builds a registered curve. Every curve accepts `cx`, `cy` (translation);
/// `circle` takes `radius`, `ellipse` takes `a`, `b`, and `custom-samples`
/// reads the table named by `path`.
pub fn make_curve(name: &str, params: &Params) -> Result<ParametricCurve> {
    let curve = match name {
        "circle" => ParametricCurve::circle(float_param(params, "radius", 1.0)?)?,
        "ellipse" => ParametricCurve::ellipse(float_param(params, "a", 2.0)?, float_param(params, "b", 1.0)?)?,
        "kite" => ParametricCurve::kite(),
        "pinched" => ParametricCurve::pinched(),
        "custom-samples" => {
            let path = param(params, "path")
                .ok_or_else(|| HdiError::invalid("custom-samples needs a 'path' parameter"))?;
            let text = std::fs::read_to_string(path)?;
            let (x1, x2) = parse_sample_table(&text)?;
            ParametricCurve::from_samples(x1, x2)?
        }
        other => {
            return Err(HdiError::UnknownName {
                kind: "curve",
                name: other.to_string(),
                registry: CURVE_REGISTRY.join(", "),
            })
        }
    };
    let offset = [float_param(params, "cx", 0.0)?, float_param(params, "cy", 0.0)?];
    Ok(curve.translated(offset))
}

/// Result of a nearest-point projection onto a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootPoint2D {
    pub t: f64,
    pub distance: f64,
    /// False when another local minimum is equally close (to 1e-12).
    pub unique: bool,
}

const SCAN_POINTS: usize = 720;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_ITERS: usize = 50;

fn dist2(curve: &ParametricCurve, t: f64, x: [f64; 2]) -> f64 {
    let p = curve.point(t);
    (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
}

/// Safeguarded Newton iteration on `(x(t) - x) . x'(t) = 0`.
fn newton_foot(curve: &ParametricCurve, x: [f64; 2], t0: f64, max_step: f64) -> Option<f64> {
    let mut t = t0;
    for _ in 0..NEWTON_ITERS {
        let d = curve.derivatives(t, 2);
        let r = [d[0][0] - x[0], d[0][1] - x[1]];
        let g = r[0] * d[1][0] + r[1] * d[1][1];
        let gp = d[1][0] * d[1][0] + d[1][1] * d[1][1] + r[0] * d[2][0] + r[1] * d[2][1];
        let mut step = if gp > 0.0 { -g / gp } else { -g.signum() * max_step };
        step = step.clamp(-max_step, max_step);
        let f0 = r[0] * r[0] + r[1] * r[1];
        let mut accepted = false;
        for _ in 0..30 {
            if dist2(curve, t + step, x) <= f0 * (1.0 + 1e-14) + 1e-300 {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no descent possible at round-off level: already at the minimum
            return Some(t);
        }
        t += step;
        if step.abs() < NEWTON_TOL {
            return Some(t);
        }
    }
    None
}

fn wrap(t: f64) -> f64 {
    let w = t.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Parameter of the closest curve point: a coarse scan, then Newton from
/// each competitive local minimum of the scan.
pub fn nearest_point_2d(curve: &ParametricCurve, x: [f64; 2]) -> Result<FootPoint2D> {
    if !(x[0].is_finite() && x[1].is_finite()) {
        return Err(HdiError::NonFinite("target point"));
    }
    let h = 2.0 * PI / SCAN_POINTS as f64;
    let d: Vec<f64> = (0..SCAN_POINTS).map(|j| dist2(curve, j as f64 * h, x)).collect();
    let (best_j, best_d) = d
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
    let candidates: Vec<usize> = (0..SCAN_POINTS)
        .filter(|&j| {
            let prev = d[(j + SCAN_POINTS - 1) % SCAN_POINTS];
            let next = d[(j + 1) % SCAN_POINTS];
            d[j] <= prev && d[j] <= next && d[j].sqrt() <= 1.5 * best_d.sqrt() + 4.0 * h
        })
        .collect();
    let mut found: Vec<(f64, f64)> = candidates
        .iter()
        .filter_map(|&j| newton_foot(curve, x, j as f64 * h, 2.0 * h))
        .map(|t| {
            let t = wrap(t);
            (t, dist2(curve, t, x).sqrt())
        })
        .collect();
    if found.is_empty() {
        return Err(HdiError::NearestPoint {
            best: vec![best_j as f64 * h],
            distance: best_d.sqrt(),
        });
    }
    found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let (t, distance) = found[0];
    let unique = !found[1..]
        .iter()
        .any(|&(s, ds)| (ds - distance).abs() < 1e-12 && angular_gap(s, t) > 1e-6);
    let t = if unique {
        t
    } else {
        found
            .iter()
            .filter(|&&(_, ds)| (ds - distance).abs() < 1e-12)
            .map(|&(s, _)| s)
            .fold(f64::INFINITY, f64::min)
    };
    Ok(FootPoint2D { t, distance, unique })
}

fn angular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registered() -> Vec<ParametricCurve> {
        vec![
            ParametricCurve::circle(1.0).unwrap(),
            ParametricCurve::circle(2.0).unwrap(),
            ParametricCurve::ellipse(2.0, 1.0).unwrap(),
            ParametricCurve::kite(),
            ParametricCurve::pinched(),
        ]
    }

    #[test]
    fn jet_examples() {
        let c = ParametricCurve::circle(1.0).unwrap();
        let j = curve_jet(&c, 0.0, 1).unwrap();
        assert!((j.point()[0] - 1.0).abs() < 1e-15 && j.point()[1].abs() < 1e-15);
        assert!(j.tangent()[0].abs() < 1e-15 && (j.tangent()[1] - 1.0).abs() < 1e-15);
        assert!((j.normal[0] - 1.0).abs() < 1e-15 && j.normal[1].abs() < 1e-15);
        assert!((j.speed - 1.0).abs() < 1e-15);
        let k = curve_jet(&ParametricCurve::kite(), 0.0, 1).unwrap();
        assert!((k.point()[0] - 1.0).abs() < 1e-15 && k.point()[1].abs() < 1e-15);
        assert!(k.tangent()[0].abs() < 1e-15 && (k.tangent()[1] - 1.5).abs() < 1e-15);
        let c2 = ParametricCurve::circle(2.5).unwrap();
        for t in [0.1, 1.7, 4.0] {
            assert!((curve_jet(&c2, t, 3).unwrap().speed - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn registry_examples() {
        let p = Params::new();
        let pinched = make_curve("pinched", &p).unwrap();
        let x = pinched.point(PI / 2.0);
        assert!(x[0].abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
        let kite = make_curve("kite", &p).unwrap();
        let x = kite.point(PI);
        assert!((x[0] + 1.0).abs() < 1e-14 && x[1].abs() < 1e-14);
        let mut q = Params::new();
        q.insert("radius".into(), "1".into());
        let c = make_curve("circle", &q).unwrap();
        assert!((c.point(0.3)[0] - 0.3f64.cos()).abs() < 1e-15);
        match make_curve("bean", &p) {
            Err(HdiError::UnknownName { registry, .. }) => assert!(registry.contains("kite")),
            other => panic!("expected unknown-name error, got {other:?}"),
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let h = 1e-5;
        for c in registered() {
            for t in [0.2, 1.1, 2.9, 5.5] {
                let j = curve_jet(&c, t, 3).unwrap();
                for o in 0..3 {
                    let a = curve_jet(&c, t + h, o).unwrap().derivs[o];
                    let b = curve_jet(&c, t - h, o).unwrap().derivs[o];
                    for k in 0..2 {
                        let fd = (a[k] - b[k]) / (2.0 * h);
                        assert!((fd - j.derivs[o + 1][k]).abs() < 1e-6, "{} order {o}", c.name());
                    }
                }
                let n = j.normal;
                assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
                assert!((n[0] * j.tangent()[0] + n[1] * j.tangent()[1]).abs() < 1e-12);
            }
            assert!(c.signed_area(128) > 0.0);
            let a = c.point(0.0);
            let b = c.point(2.0 * PI);
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_point_examples() {
        let c = ParametricCurve::circle(1.0).unwrap();
        let f = nearest_point_2d(&c, [2.0, 0.0]).unwrap();
        assert!(angular_gap(f.t, 0.0) < 1e-12);
        let f = nearest_point_2d(&c, [0.0, -3.0]).unwrap();
        assert!((f.t - 1.5 * PI).abs() < 1e-12);
        let e = ParametricCurve::ellipse(2.0, 1.0).unwrap();
        let f = nearest_point_2d(&e, [0.0, 2.0]).unwrap();
        assert!((f.t - PI / 2.0).abs() < 1e-10 && (f.distance - 1.0).abs() < 1e-12);
        // dense-sampling oracle
        let m = 200_000;
        let best = (0..m)
            .map(|j| 2.0 * PI * j as f64 / m as f64)
            .map(|t| dist2(&e, t, [0.0, 2.0]).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!((best - f.distance).abs() < 1e-8);
    }

    #[test]
    fn nearest_point_recovers_offset_parameter() {
        for c in registered() {
            for t in [0.3, 1.0, 2.2, 3.9, 5.0] {
                let j = curve_jet(&c, t, 1).unwrap();
                for eps in [1e-3, -1e-3, 1e-2, -1e-2] {
                    let x = [j.point()[0] + eps * j.normal[0], j.point()[1] + eps * j.normal[1]];
                    let f = nearest_point_2d(&c, x).unwrap();
                    assert!(angular_gap(f.t, t) < 1e-8, "{} t = {t} eps = {eps}", c.name());
                    assert!(f.unique);
                }
            }
        }
    }

    #[test]
    fn sampled_curve_matches_ellipse() {
        let n = 32;
        let (x1, x2): (Vec<f64>, Vec<f64>) = (0..2 * n)
            .map(|j| {
                let t = j as f64 * PI / n as f64;
                (2.0 * t.cos(), t.sin())
            })
            .unzip();
        let text: String = x1.iter().zip(&x2).map(|(a, b)| format!("{a} {b}\n")).collect();
        let (y1, y2) = parse_sample_table(&text).unwrap();
        let s = ParametricCurve::from_samples(y1, y2).unwrap();
        let e = ParametricCurve::ellipse(2.0, 1.0).unwrap();
        let js = curve_jet(&s, 0.77, 4).unwrap();
        let je = curve_jet(&e, 0.77, 4).unwrap();
        for (o, (a, b)) in js.derivs.iter().zip(&je.derivs).enumerate() {
            let tol = 1e-13 * 10f64.powi(o as i32 + 1);
            assert!((a[0] - b[0]).abs() < tol && (a[1] - b[1]).abs() < tol, "order {o}");
        }
        let clockwise: Vec<f64> = x2.iter().map(|v| -v).collect();
        assert!(ParametricCurve::from_samples(x1, clockwise).is_err());
    }
}
