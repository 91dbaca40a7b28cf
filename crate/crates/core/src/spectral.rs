//! Periodic quadrature and FFT-based spectral differentiation on the uniform
//! grid `t_j = j*pi/N`, `j = 0..2N`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{HdiError, Result};

/// Highest derivative order accepted by [`fourier_diff`].
pub const MAX_PERIODIC_ORDER: usize = 8;

/// Samples of a 2π-periodic function on `2N` equispaced points.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSamples {
    values: Vec<f64>,
}

impl PeriodicSamples {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 4 || !values.len().is_multiple_of(2) {
            return Err(HdiError::invalid(format!(
                "periodic sample count must be even and >= 4, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HdiError::NonFinite("periodic samples"));
        }
        Ok(PeriodicSamples { values })
    }

    /// Samples `f(t_j)` for `j = 0..2n_half`.
    pub fn from_fn(n_half: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = PI / n_half as f64;
        Self::new((0..2 * n_half).map(|j| f(j as f64 * h)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `N`, half the number of samples.
    pub fn n_half(&self) -> usize {
        self.values.len() / 2
    }

    /// Grid spacing `h = pi/N`.
    pub fn spacing(&self) -> f64 {
        PI / self.n_half() as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.len()).map(|j| j as f64 * h).collect()
    }
}

/// Trapezoidal rule `h * sum f(t_j)` over one period.
pub fn trapezoid_sum(samples: &PeriodicSamples) -> Result<f64> {
    let s: f64 = samples.values.iter().sum();
    let r = samples.spacing() * s;
    if !r.is_finite() {
        return Err(HdiError::NonFinite("trapezoid sum"));
    }
    Ok(r)
}

fn forward_fft(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn inverse_fft_real(mut buf: Vec<Complex64>) -> Vec<f64> {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Signed wavenumber of FFT bin `k` for a transform of length `len`.
fn wavenumber(k: usize, len: usize) -> i64 {
    if k <= len / 2 {
        k as i64
    } else {
        k as i64 - len as i64
    }
}

/// Multiplier `(ik)^order` with the Nyquist bin kept for even orders and
/// zeroed for odd ones.
fn spectral_multiplier(k: usize, len: usize, order: usize) -> Complex64 {
    if order == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let nyquist = len / 2;
    if k == nyquist && order % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let w = if k == nyquist {
        nyquist as f64
    } else {
        wavenumber(k, len) as f64
    };
    Complex64::new(0.0, w).powu(order as u32)
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_PERIODIC_ORDER {
        return Err(HdiError::OrderTooHigh {
            order,
            max: MAX_PERIODIC_ORDER,
        });
    }
    Ok(())
}

/// Samples of the `order`-th derivative of the trigonometric interpolant.
pub fn fourier_diff(samples: &PeriodicSamples, order: usize) -> Result<PeriodicSamples> {
    check_order(order)?;
    let mut d = fourier_derivatives(samples, order)?;
    Ok(PeriodicSamples {
        values: d.pop().expect("at least one derivative"),
    })
}

/// All derivatives `0..=max_order` from a single forward transform.
pub fn fourier_derivatives(samples: &PeriodicSamples, max_order: usize) -> Result<Vec<Vec<f64>>> {
    check_order(max_order)?;
    let len = samples.len();
    let spec = forward_fft(&samples.values);
    let out = (0..=max_order)
        .map(|order| {
            if order == 0 {
                return samples.values.clone();
            }
            let buf = spec
                .iter()
                .enumerate()
                .map(|(k, c)| c * spectral_multiplier(k, len, order))
                .collect();
            inverse_fft_real(buf)
        })
        .collect();
    Ok(out)
}

/// Trigonometric interpolant of periodic samples, evaluable (with
/// derivatives) at arbitrary parameters.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    /// `coeffs[k]` multiplies `e^{ikt}` for `k = 0..N-1`; negative modes are conjugates.
    coeffs: Vec<Complex64>,
    /// Coefficient of `cos(N t)`.
    nyquist: f64,
    n_half: usize,
}

impl TrigInterpolant {
    pub fn new(samples: &PeriodicSamples) -> Self {
        let len = samples.len();
        let n_half = len / 2;
        let spec = forward_fft(&samples.values);
        let scale = 1.0 / len as f64;
        TrigInterpolant {
            coeffs: spec[..n_half].iter().map(|c| c * scale).collect(),
            nyquist: spec[n_half].re * scale,
            n_half,
        }
    }

    /// Value of the `order`-th derivative at `t`.
    pub fn eval(&self, t: f64, order: usize) -> f64 {
        let mut acc = self.coeffs[0].re * if order == 0 { 1.0 } else { 0.0 };
        let i_pow = Complex64::new(0.0, 1.0).powu(order as u32);
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let kf = k as f64;
            let e = Complex64::from_polar(1.0, kf * t);
            // mode k and its conjugate -k
            acc += 2.0 * (c * e * i_pow).re * kf.powi(order as i32);
        }
        let nf = self.n_half as f64;
        acc += self.nyquist * nf.powi(order as i32) * (nf * t + order as f64 * PI / 2.0).cos();
        acc
    }

    /// Derivatives `0..=max_order` at `t`.
    pub fn eval_jet(&self, t: f64, max_order: usize) -> Vec<f64> {
        (0..=max_order).map(|o| self.eval(t, o)).collect()
    }
}

/// Value of the `order`-th derivative of the trigonometric interpolant at `t`.
pub fn trig_interp_eval(samples: &PeriodicSamples, t: f64, order: usize) -> Result<f64> {
    check_order(order)?;
    if !t.is_finite() {
        return Err(HdiError::NonFinite("interpolation parameter"));
    }
    Ok(TrigInterpolant::new(samples).eval(t, order))
}

/// Band-limited upsampling by an integer factor (zero-padded spectrum, the
/// Nyquist mode split symmetrically).
pub fn upsample(samples: &PeriodicSamples, factor: usize) -> Result<PeriodicSamples> {
    if factor == 0 {
        return Err(HdiError::invalid("oversampling factor must be >= 1"));
    }
    if factor == 1 {
        return Ok(samples.clone());
    }
    let len = samples.len();
    let n_half = len / 2;
    let fine = len * factor;
    let spec = forward_fft(&samples.values);
    let mut buf = vec![Complex64::new(0.0, 0.0); fine];
    for k in 0..n_half {
        buf[k] = spec[k];
    }
    for k in 1..n_half {
        buf[fine - k] = spec[len - k];
    }
    buf[n_half] = spec[n_half] * 0.5;
    buf[fine - n_half] = spec[n_half] * 0.5;
    let values = inverse_fft_real(buf)
        .into_iter()
        .map(|v| v * factor as f64)
        .collect();
    PeriodicSamples::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_examples() {
        let one = PeriodicSamples::from_fn(10, |_| 1.0).unwrap();
        assert!((trapezoid_sum(&one).unwrap() - 2.0 * PI).abs() < 1e-14);
        let s2 = PeriodicSamples::from_fn(16, |t| t.sin().powi(2)).unwrap();
        assert!((trapezoid_sum(&s2).unwrap() - PI).abs() < 1e-14);
        // 2*pi*I_0(1), with I_0(1) from its power series
        let mut i0 = 0.0;
        let mut term = 1.0;
        for k in 0..30 {
            if k > 0 {
                term /= (4 * k * k) as f64;
            }
            i0 += term;
        }
        let es = PeriodicSamples::from_fn(32, |t| t.sin().exp()).unwrap();
        let v = trapezoid_sum(&es).unwrap();
        assert!((v - 2.0 * PI * i0).abs() < 1e-13);
        assert!((v - 7.954926521).abs() < 1e-9);
    }

    #[test]
    fn invalid_samples_rejected() {
        assert!(PeriodicSamples::new(vec![1.0, 2.0]).is_err());
        assert!(PeriodicSamples::new(vec![1.0; 5]).is_err());
        assert!(matches!(
            PeriodicSamples::new(vec![1.0, f64::NAN, 0.0, 0.0]),
            Err(HdiError::NonFinite(_))
        ));
    }

    #[test]
    fn fourier_diff_examples() {
        let n = 16;
        let s = PeriodicSamples::from_fn(n, f64::sin).unwrap();
        let d = fourier_diff(&s, 1).unwrap();
        for (t, v) in s.nodes().iter().zip(d.values()) {
            assert!((v - t.cos()).abs() < 1e-12);
        }
        let c = PeriodicSamples::from_fn(n, |_| 3.5).unwrap();
        for order in 1..=MAX_PERIODIC_ORDER {
            let d = fourier_diff(&c, order).unwrap();
            assert!(d.values().iter().all(|v| v.abs() < 1e-12));
        }
        let c3 = PeriodicSamples::from_fn(n, |t| (3.0 * t).cos()).unwrap();
        let d2 = fourier_diff(&c3, 2).unwrap();
        for (t, v) in c3.nodes().iter().zip(d2.values()) {
            assert!((v + 9.0 * (3.0 * t).cos()).abs() < 1e-11);
        }
        assert!(matches!(
            fourier_diff(&c3, 9),
            Err(HdiError::OrderTooHigh { order: 9, .. })
        ));
    }

    #[test]
    fn nyquist_mode_convention() {
        // cos(N t) samples as (-1)^j: odd derivatives vanish, even ones scale by (-N^2)^(p/2)
        let n = 4;
        let s = PeriodicSamples::from_fn(n, |t| (n as f64 * t).cos()).unwrap();
        let d1 = fourier_diff(&s, 1).unwrap();
        assert!(d1.values().iter().all(|v| v.abs() < 1e-12));
        let d2 = fourier_diff(&s, 2).unwrap();
        for (a, b) in d2.values().iter().zip(s.values()) {
            assert!((a + 16.0 * b).abs() < 1e-11);
        }
    }

    #[test]
    fn interpolant_examples() {
        let s = PeriodicSamples::from_fn(8, f64::cos).unwrap();
        assert!((trig_interp_eval(&s, 0.3, 0).unwrap() - 0.3f64.cos()).abs() < 1e-13);
        let s = PeriodicSamples::from_fn(8, f64::sin).unwrap();
        assert!((trig_interp_eval(&s, 0.3, 1).unwrap() - 0.3f64.cos()).abs() < 1e-13);
        let c = PeriodicSamples::from_fn(8, |_| -2.25).unwrap();
        assert!((trig_interp_eval(&c, 1.234, 0).unwrap() + 2.25).abs() < 1e-14);
    }

    #[test]
    fn upsample_reproduces_band_limited_function() {
        let f = |t: f64| (2.0 * t).sin() + 0.5 * (5.0 * t).cos();
        let s = PeriodicSamples::from_fn(8, f).unwrap();
        let u = upsample(&s, 4).unwrap();
        assert_eq!(u.len(), 64);
        for (t, v) in u.nodes().iter().zip(u.values()) {
            assert!((v - f(*t)).abs() < 1e-13);
        }
    }
}
