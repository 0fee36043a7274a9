//! The Riesz-Feller operator D^alpha_theta: symbol, integral coefficients,
//! FFT application to decaying fields, singular-integral application to
//! bounded fields, and the C^2_b operator bound.
//!
//! Fourier convention: F[f](xi) = int e^{+i xi x} f(x) dx, so the symbol
//! psi(xi) = -|xi|^alpha exp(i sgn(xi) theta pi / 2) acts on e^{i k x} through psi(-k).

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::field_grid::{Field, Grid, GridError, Ramp};
use crate::quadrature::gauss_legendre;
use crate::spectral::{next_pow2, padded, wavenumber, FftPair};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("alpha = {0} must lie in (0, 2]")]
    AlphaOutOfRange(f64),
    #[error("theta = {theta} violates |theta| <= min(alpha, 2 - alpha) = {bound} for alpha = {alpha}")]
    Inadmissible { alpha: f64, theta: f64, bound: f64 },
    #[error("alpha = 1 needs the principal-value representation, which is not provided")]
    AlphaOne,
    #[error("this path needs {what}, got alpha = {alpha}")]
    AlphaRange { alpha: f64, what: &'static str },
    #[error("spectral application needs zero tails, got ({0}, {1}); decompose the field first")]
    NonZeroTails(f64, f64),
    #[error("boundary magnitude {boundary:e} exceeds 1e-8 of the sup norm {sup:e}; periodization would pollute the result")]
    Periodization { boundary: f64, sup: f64 },
    #[error("inverse transform left an imaginary residue {residue:e} (allowed {allowed:e})")]
    ImaginaryResidue { residue: f64, allowed: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// sin(pi x), exactly zero at integers and exactly +-1 at half-integers.
pub fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        0.0
    } else if r == 0.5 {
        1.0
    } else if r == 1.5 {
        -1.0
    } else {
        (std::f64::consts::PI * r).sin()
    }
}

pub fn cos_pi(x: f64) -> f64 {
    sin_pi(x + 0.5)
}

/// Order and skewness of the operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RFParams {
    alpha: f64,
    theta: f64,
}

/// Coefficients of the two one-sided singular integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralCoeffs {
    pub c1: f64,
    pub c2: f64,
}

impl RFParams {
    pub fn new(alpha: f64, theta: f64) -> Result<Self, OperatorError> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(OperatorError::AlphaOutOfRange(alpha));
        }
        let bound = alpha.min(2.0 - alpha);
        if !theta.is_finite() || theta.abs() > bound + 1e-12 {
            return Err(OperatorError::Inadmissible { alpha, theta, bound });
        }
        Ok(RFParams { alpha, theta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Traveling-wave theory needs 1 < alpha <= 2.
    pub fn require_wave_regime(&self) -> Result<(), OperatorError> {
        if self.alpha > 1.0 {
            Ok(())
        } else {
            Err(OperatorError::AlphaRange { alpha: self.alpha, what: "1 < alpha <= 2" })
        }
    }

    /// Parameters of the operator conjugated by x -> -x.
    pub fn reflected(&self) -> RFParams {
        RFParams { alpha: self.alpha, theta: -self.theta }
    }

    pub fn symbol(&self, xi: f64) -> Complex64 {
        if xi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let m = xi.abs().powf(self.alpha);
        let h = 0.5 * self.theta;
        Complex64::new(-m * cos_pi(h), -m * xi.signum() * sin_pi(h))
    }

    /// Multiplier applied to the FFT bin of wavenumber `k` (mode e^{ikx}).
    pub(crate) fn multiplier(&self, k: f64, nyquist: bool) -> Complex64 {
        let z = self.symbol(-k);
        if nyquist {
            Complex64::new(z.re, 0.0)
        } else {
            z
        }
    }

    pub fn coeffs(&self) -> Result<IntegralCoeffs, OperatorError> {
        if self.alpha == 1.0 {
            return Err(OperatorError::AlphaOne);
        }
        Ok(self.raw_coeffs())
    }

    /// Closed-form coefficients without the alpha = 1 guard (they are the tail constants of the kernel).
    pub(crate) fn raw_coeffs(&self) -> IntegralCoeffs {
        let g = gamma(1.0 + self.alpha) / std::f64::consts::PI;
        IntegralCoeffs {
            c1: g * sin_pi(0.5 * (self.alpha + self.theta)),
            c2: g * sin_pi(0.5 * (self.alpha - self.theta)),
        }
    }

    /// K = Gamma(1 + alpha) / pi * |sin((alpha + theta) pi / 2) + sin((alpha - theta) pi / 2)|.
    pub fn bound_constant(&self) -> f64 {
        let c = self.raw_coeffs();
        (c.c1 + c.c2).abs()
    }
}

pub fn symbol(p: &RFParams, xi: f64) -> Complex64 {
    p.symbol(xi)
}

pub fn coeffs(p: &RFParams) -> Result<IntegralCoeffs, OperatorError> {
    p.coeffs()
}

/// FFT application of a zero-tailed field. The field is zero-padded to at least twice its length.
pub fn apply_spectral(field: &Field, p: &RFParams) -> Result<Field, OperatorError> {
    if field.tail_left() != 0.0 || field.tail_right() != 0.0 {
        return Err(OperatorError::NonZeroTails(field.tail_left(), field.tail_right()));
    }
    let v = field.values();
    let sup = field.sup_norm();
    let boundary = v[0].abs().max(v[v.len() - 1].abs());
    if boundary > 1e-8 * sup {
        return Err(OperatorError::Periodization { boundary, sup });
    }
    let out = spectral_zero_extended(v, field.grid().dx(), p)?;
    Ok(Field::new(*field.grid(), out, 0.0, 0.0)?)
}

/// Applies the operator to samples extended by zero outside the grid.
pub(crate) fn spectral_zero_extended(values: &[f64], dx: f64, p: &RFParams) -> Result<Vec<f64>, OperatorError> {
    let n = values.len();
    let len = next_pow2(2 * (n - 1)).max(2);
    let fft = FftPair::new(len);
    let mut buf = padded(values, len);
    fft.forward(&mut buf);
    for (j, z) in buf.iter_mut().enumerate() {
        *z *= p.multiplier(wavenumber(j, len, dx), j == len / 2);
    }
    fft.inverse(&mut buf);
    let out: Vec<f64> = buf[..n].iter().map(|z| z.re).collect();
    let residue = buf.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    let sup = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let allowed = 1e-10 * sup.max(1.0);
    if residue > allowed {
        return Err(OperatorError::ImaginaryResidue { residue, allowed });
    }
    Ok(out)
}

/// Singular-integral application for 1 < alpha < 2, with constant extension by the tails.
///
/// The field is replaced by its clamped cubic spline (zero end slopes, boundary samples set to
/// the tails) and the regularized integrals are evaluated exactly for that piecewise cubic.
pub fn apply_integral(field: &Field, p: &RFParams) -> Result<Field, OperatorError> {
    if !(p.alpha > 1.0 && p.alpha < 2.0) {
        return Err(OperatorError::AlphaRange { alpha: p.alpha, what: "1 < alpha < 2" });
    }
    field.check_settled()?;
    let out = integral_action(field.values(), field.grid().dx(), field.tail_left(), field.tail_right(), p);
    Ok(Field::new(*field.grid(), out, 0.0, 0.0)?)
}

/// The 0 < alpha < 1 representation without gradient subtraction; used to cross-check kernels.
pub fn apply_integral_low_order(field: &Field, p: &RFParams) -> Result<Field, OperatorError> {
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        return Err(OperatorError::AlphaRange { alpha: p.alpha, what: "0 < alpha < 1" });
    }
    field.check_settled()?;
    let out = integral_action(field.values(), field.grid().dx(), field.tail_left(), field.tail_right(), p);
    Ok(Field::new(*field.grid(), out, 0.0, 0.0)?)
}

/// Clamped cubic spline slopes with s_0 = s_{n-1} = 0.
fn clamped_slopes(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut s = vec![0.0; n];
    if n < 3 {
        return s;
    }
    // Interior equations s_{j-1} + 4 s_j + s_{j+1} = 3 (v_{j+1} - v_{j-1}) / h.
    let m = n - 2;
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    for k in 0..m {
        let j = k + 1;
        let rhs = 3.0 * (v[j + 1] - v[j - 1]) / h;
        if k == 0 {
            cp[0] = 1.0 / 4.0;
            dp[0] = rhs / 4.0;
        } else {
            let denom = 4.0 - cp[k - 1];
            cp[k] = 1.0 / denom;
            dp[k] = (rhs - dp[k - 1]) / denom;
        }
    }
    for k in (0..m).rev() {
        let next = if k + 1 < m { s[k + 2] } else { 0.0 };
        s[k + 1] = dp[k] - cp[k] * next;
    }
    s
}

/// mu_m(k) = int_0^1 u^m (k + u)^{-1-alpha} du for k = 0..len (entry 0 unused).
fn moments(alpha: f64, len: usize) -> [Vec<f64>; 4] {
    let (x, w) = gauss_legendre(16);
    let mut mu = [vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for k in 1..len {
        let kf = k as f64;
        mu[0][k] = -kf.powf(-alpha) * (-alpha * (1.0 / kf).ln_1p()).exp_m1() / alpha;
        let (mut m1, mut m2, mut m3) = (0.0, 0.0, 0.0);
        for (xq, wq) in x.iter().zip(&w) {
            let u = 0.5 * (xq + 1.0);
            let g = 0.5 * wq * (kf + u).powf(-1.0 - alpha);
            m1 += g * u;
            m2 += g * u * u;
            m3 += g * u * u * u;
        }
        mu[1][k] = m1;
        mu[2][k] = m2;
        mu[3][k] = m3;
    }
    mu
}

pub(crate) fn integral_action(values: &[f64], h: f64, tl: f64, tr: f64, p: &RFParams) -> Vec<f64> {
    let alpha = p.alpha;
    let slope_sub = alpha > 1.0;
    let n = values.len();
    let mut v = values.to_vec();
    v[0] = tl;
    v[n - 1] = tr;
    let s = clamped_slopes(&v, h);
    let cells = n - 1;
    // Scaled cell polynomials: right-going uses P(u h) = sum R_m u^m from the left node,
    // left-going uses the same cell read from its right node.
    let mut r = [vec![0.0; cells], vec![0.0; cells], vec![0.0; cells], vec![0.0; cells]];
    let mut l = [vec![0.0; cells], vec![0.0; cells], vec![0.0; cells], vec![0.0; cells]];
    for j in 0..cells {
        let dv = v[j + 1] - v[j];
        let c = (3.0 * dv / h - 2.0 * s[j] - s[j + 1]) / h;
        let d = (s[j] + s[j + 1] - 2.0 * dv / h) / (h * h);
        r[0][j] = v[j];
        r[1][j] = s[j] * h;
        r[2][j] = c * h * h;
        r[3][j] = d * h * h * h;
        l[0][j] = v[j + 1];
        l[1][j] = -(s[j] + 2.0 * c * h + 3.0 * d * h * h) * h;
        l[2][j] = (c + 3.0 * d * h) * h * h;
        l[3][j] = -d * h * h * h;
    }
    let len = next_pow2(2 * n);
    let fft = FftPair::new(len);
    let mu = moments(alpha, n);
    let zero = Complex64::new(0.0, 0.0);
    let mut acc_r = vec![zero; len];
    let mut acc_l = vec![zero; len];
    for m in 0..4 {
        let mut mh = padded(&mu[m], len);
        fft.forward(&mut mh);
        let mut rh = padded(&r[m], len);
        fft.forward(&mut rh);
        let mut lh = padded(&l[m], len);
        fft.forward(&mut lh);
        for q in 0..len {
            acc_r[q] += rh[q] * mh[q].conj();
            acc_l[q] += lh[q] * mh[q];
        }
    }
    fft.inverse(&mut acc_r);
    fft.inverse(&mut acc_l);

    let coeffs = p.raw_coeffs();
    let ha = h.powf(-alpha);
    let near = |q1: f64, q2: f64, q3: f64| -> f64 {
        let mut t = q2 / (2.0 - alpha) + q3 / (3.0 - alpha);
        if !slope_sub {
            t += q1 / (1.0 - alpha);
        }
        t
    };
    (0..n)
        .map(|i| {
            let mut right = 0.0;
            if i + 1 < n {
                let xi = (n - 1 - i) as f64 * h;
                right = ha * (near(r[1][i], r[2][i], r[3][i]) + acc_r[i].re) - v[i] * ha / alpha + tr * xi.powf(-alpha) / alpha;
                if slope_sub {
                    right -= s[i] * h * ha / (alpha - 1.0);
                }
            }
            let mut left = 0.0;
            if i > 0 {
                let xi = i as f64 * h;
                let far = if i >= 2 { acc_l[i - 1].re } else { 0.0 };
                left = ha * (near(l[1][i - 1], l[2][i - 1], l[3][i - 1]) + far) - v[i] * ha / alpha + tl * xi.powf(-alpha) / alpha;
                if slope_sub {
                    left += s[i] * h * ha / (alpha - 1.0);
                }
            }
            coeffs.c1 * right + coeffs.c2 * left
        })
        .collect()
}

fn difference_norms(field: &Field) -> (f64, f64) {
    let h = field.grid().dx();
    let mut ext = Vec::with_capacity(field.values().len() + 2);
    ext.push(field.tail_left());
    ext.extend_from_slice(field.values());
    ext.push(field.tail_right());
    let d1 = ext.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs())) / h;
    let d2 = ext.windows(3).fold(0.0f64, |m, w| m.max((w[2] - 2.0 * w[1] + w[0]).abs())) / (h * h);
    (d1, d2)
}

/// K ||f''|| M^{2-alpha} / (2 - alpha) + 4 K ||f'|| M^{1-alpha} / (alpha - 1), with difference sup-norms.
pub fn estimate_bound(field: &Field, p: &RFParams, cutoff: f64) -> Result<f64, OperatorError> {
    if !(p.alpha > 1.0 && p.alpha < 2.0) {
        return Err(OperatorError::AlphaRange { alpha: p.alpha, what: "1 < alpha < 2" });
    }
    let (d1, d2) = difference_norms(field);
    Ok(bound_from_norms(p, d1, d2, cutoff))
}

pub(crate) fn bound_from_norms(p: &RFParams, d1: f64, d2: f64, cutoff: f64) -> f64 {
    let k = p.bound_constant();
    let a = p.alpha;
    k * d2 * cutoff.powf(2.0 - a) / (2.0 - a) + 4.0 * k * d1 * cutoff.powf(1.0 - a) / (a - 1.0)
}

/// Cutoff minimizing the bound: stationarity gives M* = 4 ||f'|| / ||f''||.
pub fn optimal_cutoff(field: &Field) -> f64 {
    let (d1, d2) = difference_norms(field);
    if d2 > 0.0 && d1 > 0.0 {
        4.0 * d1 / d2
    } else {
        1.0
    }
}

type RampKey = ((u64, usize), (u64, u64), u64, u64);

static RAMP_CACHE: LazyLock<RwLock<HashMap<RampKey, Arc<Vec<f64>>>>> = LazyLock::new(|| RwLock::new(HashMap::new()));

/// Operator action on a unit ramp sampled on `grid`, cached per (grid, ramp, params).
pub fn ramp_action(grid: &Grid, ramp: &Ramp, p: &RFParams) -> Result<Arc<Vec<f64>>, OperatorError> {
    let key = (grid.key(), ramp.key(), p.alpha.to_bits(), p.theta.to_bits());
    if let Some(hit) = RAMP_CACHE.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return Ok(hit.clone());
    }
    let xs = grid.coords();
    let action = if p.alpha == 2.0 {
        xs.iter().map(|&x| ramp.d2(x)).collect()
    } else if p.alpha == 1.0 {
        return Err(OperatorError::AlphaOne);
    } else {
        let vals: Vec<f64> = xs.iter().map(|&x| ramp.value(x)).collect();
        integral_action(&vals, grid.dx(), 0.0, 1.0, p)
    };
    let action = Arc::new(action);
    RAMP_CACHE.write().unwrap_or_else(|e| e.into_inner()).entry(key).or_insert_with(|| action.clone());
    Ok(action)
}

/// General application to a field with settled tails: the ramp part goes through the cached
/// integral action, the decaying remainder through the FFT path.
pub fn apply(field: &Field, p: &RFParams) -> Result<Field, OperatorError> {
    field.check_settled()?;
    let grid = *field.grid();
    let ramp = Ramp::reference(&grid);
    let tl = field.tail_left();
    let jump = field.tail_right() - tl;
    let pert: Vec<f64> = field
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v - tl - jump * ramp.value(grid.x(i)))
        .collect();
    let mut out = spectral_zero_extended(&pert, grid.dx(), p)?;
    if jump != 0.0 {
        let r = ramp_action(&grid, &ramp, p)?;
        for (o, a) in out.iter_mut().zip(r.iter()) {
            *o += jump * a;
        }
    }
    Ok(Field::new(grid, out, 0.0, 0.0)?)
}
