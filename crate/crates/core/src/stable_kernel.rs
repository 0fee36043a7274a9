//! The Green's function G(x, t) of u_t = D^alpha_theta u, tabulated at t = 1 by
//! inverting exp(psi) with an FFT, and evaluated at any t through the scaling law
//! G(x, t) = t^{-1/alpha} G(x t^{-1/alpha}, 1).

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::field_grid::{lagrange4, Field, Grid, GridError};
use crate::quadrature::integrate;
use crate::riesz_feller::{cos_pi, sin_pi, RFParams};
use crate::spectral::{next_pow2, padded, FftPair};
use crate::stats::fit_line;

/// ln(1e18): the frequency cutoff puts exp(psi) below 1e-18.
const CUTOFF_EXPONENT: f64 = 41.45;
const ALIAS_TERMS: usize = 64;
pub const DEFAULT_RESOLUTION: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("(alpha, theta) = ({alpha}, {theta}) gives a degenerate kernel: {reason}")]
    Degenerate { alpha: f64, theta: f64, reason: &'static str },
    #[error("resolution too coarse: Nyquist frequency {nyquist:.3} below the cutoff {cutoff:.3}")]
    InsufficientResolution { nyquist: f64, cutoff: f64 },
    #[error("bad table layout: {0}")]
    Layout(String),
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const SERIES_TERMS: usize = 6;

/// Expansion G(y, 1) ~ sum_k a_k |y|^{-1-k alpha} for |y| -> inf, index 0 for the left side.
#[derive(Debug, Clone)]
struct TailSeries {
    alpha: f64,
    coeffs: [[f64; SERIES_TERMS]; 2],
}

impl TailSeries {
    fn new(p: &RFParams) -> Self {
        let alpha = p.alpha();
        let mut coeffs = [[0.0; SERIES_TERMS]; 2];
        for (side, sign) in [(0, -1.0), (1, 1.0)] {
            let theta = sign * p.theta();
            for k in 1..=SERIES_TERMS {
                let kf = k as f64;
                let mag = (ln_gamma(kf * alpha + 1.0) - ln_gamma(kf + 1.0)).exp();
                let parity = if k % 2 == 1 { 1.0 } else { -1.0 };
                coeffs[side][k - 1] = parity * mag * sin_pi(0.5 * kf * (alpha - theta)) / std::f64::consts::PI;
            }
        }
        TailSeries { alpha, coeffs }
    }

    fn eval(&self, side: usize, y: f64) -> f64 {
        let r = y.powf(-self.alpha);
        let mut term = r / y;
        let mut acc = 0.0;
        for a in &self.coeffs[side] {
            acc += a * term;
            term *= r;
        }
        acc
    }

    /// Integral of the expansion over (y, inf).
    fn mass_beyond(&self, side: usize, y: f64) -> f64 {
        let r = y.powf(-self.alpha);
        let mut term = r;
        let mut acc = 0.0;
        for (k, a) in self.coeffs[side].iter().enumerate() {
            acc += a * term / ((k + 1) as f64 * self.alpha);
            term *= r;
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct KernelTable {
    params: RFParams,
    x_max: f64,
    dx: f64,
    g1: Vec<f64>,
    cdf1: Vec<f64>,
    series: TailSeries,
    /// Fitted coefficients of |x|^{-1-alpha} for x -> -inf and x -> +inf.
    tail_amplitude: [f64; 2],
    tail_slope: [Option<f64>; 2],
    true_min: f64,
    mass_defect: f64,
    resolution: usize,
}

pub fn default_x_max(p: &RFParams) -> f64 {
    if p.alpha() == 2.0 {
        40.0
    } else {
        200.0
    }
}

/// Builds the table with default extent and resolution.
pub fn build_default(p: &RFParams) -> Result<KernelTable, KernelError> {
    build(p, default_x_max(p), DEFAULT_RESOLUTION)
}

pub fn build(p: &RFParams, x_max: f64, resolution: usize) -> Result<KernelTable, KernelError> {
    let alpha = p.alpha();
    let theta = p.theta();
    if alpha == 1.0 && theta.abs() >= 1.0 {
        return Err(KernelError::Degenerate { alpha, theta, reason: "pure translation" });
    }
    if alpha < 1.0 && (theta.abs() - alpha).abs() < 1e-12 {
        return Err(KernelError::Degenerate { alpha, theta, reason: "one-sided density supported on a half-line" });
    }
    if !(x_max > 0.0) || resolution < 1024 || !resolution.is_power_of_two() {
        return Err(KernelError::Layout(format!("x_max = {x_max}, resolution = {resolution}")));
    }
    let period = 4.0 * x_max;
    let n = resolution;
    let dx = period / n as f64;
    let dxi = 2.0 * std::f64::consts::PI / period;
    let damping = cos_pi(0.5 * theta);
    let cutoff = (CUTOFF_EXPONENT / damping).powf(1.0 / alpha);
    let nyquist = std::f64::consts::PI / dx;
    if nyquist < cutoff {
        return Err(KernelError::InsufficientResolution { nyquist, cutoff });
    }

    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| {
            let jj = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            let z = p.symbol(jj * dxi).exp();
            if j == n / 2 {
                Complex64::new(z.re, 0.0)
            } else {
                z
            }
        })
        .collect();
    FftPair::new(n).forward(&mut buf);
    let scale = dxi / (2.0 * std::f64::consts::PI);

    let c = p.raw_coeffs();
    let series = TailSeries::new(p);
    let half = n / 4;
    let len = 2 * half + 1;
    let mut g1 = Vec::with_capacity(len);
    for i in 0..len {
        let j = i as isize - half as isize;
        let idx = if j >= 0 { j as usize } else { (n as isize + j) as usize };
        let x = j as f64 * dx;
        let mut v = scale * buf[idx].re;
        // Remove the periodic images through the tail expansion.
        if alpha < 2.0 {
            let mut alias = 0.0;
            for m in 1..=ALIAS_TERMS {
                let mp = m as f64 * period;
                alias += series.eval(1, x + mp) + series.eval(0, mp - x);
            }
            let s = (ALIAS_TERMS as f64 + 0.5) * period;
            alias += (c.c2 * (x + s).powf(-alpha) + c.c1 * (s - x).powf(-alpha)) / (alpha * period);
            v -= alias;
        }
        g1.push(v);
    }
    let true_min = g1.iter().copied().fold(f64::INFINITY, f64::min);
    for v in g1.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }

    let mut table = KernelTable {
        params: *p,
        x_max,
        dx,
        g1,
        cdf1: Vec::new(),
        series,
        tail_amplitude: [0.0, 0.0],
        tail_slope: [None, None],
        true_min,
        mass_defect: 0.0,
        resolution: n,
    };
    if alpha < 2.0 {
        for side in 0..2 {
            let (amp, slope) = table.fit_tail_side(side);
            table.tail_amplitude[side] = amp;
            table.tail_slope[side] = slope;
        }
    }
    table.build_cdf();
    Ok(table)
}

impl KernelTable {
    pub fn params(&self) -> &RFParams {
        &self.params
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn x_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.g1.len()).map(move |i| -self.x_max + i as f64 * self.dx)
    }

    pub fn g1_values(&self) -> &[f64] {
        &self.g1
    }

    pub fn tail_amplitude(&self) -> [f64; 2] {
        self.tail_amplitude
    }

    /// Free log-log slope of G(., 1) over the last decade on each side, when that side is not negligible.
    pub fn tail_slope(&self) -> [Option<f64>; 2] {
        self.tail_slope
    }

    /// Minimum of the raw inversion before the noise floor was clamped.
    pub fn min_value(&self) -> f64 {
        self.true_min
    }

    pub fn mass_defect(&self) -> f64 {
        self.mass_defect
    }

    fn fit_tail_side(&self, side: usize) -> (f64, Option<f64>) {
        let alpha = self.params.alpha();
        let lo = 0.1 * self.x_max;
        let len = self.g1.len();
        let stride = ((len / 2) / 2048).max(1);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut peak = 0.0f64;
        let mut i = 0;
        while i < len {
            let x = -self.x_max + i as f64 * self.dx;
            let inside = if side == 0 { x <= -lo } else { x >= lo };
            if inside {
                let g = self.g1[i];
                peak = peak.max(g.abs());
                if g > 0.0 {
                    xs.push(x.abs().ln());
                    ys.push(g.ln());
                }
            }
            i += stride;
        }
        if peak < 1e-9 || xs.len() < 8 {
            return (0.0, None);
        }
        let log_amp = xs.iter().zip(&ys).map(|(lx, ly)| ly + (1.0 + alpha) * lx).sum::<f64>() / xs.len() as f64;
        (log_amp.exp(), fit_line(&xs, &ys).map(|f| f.slope))
    }

    fn tail_mass(&self, side: usize) -> f64 {
        let alpha = self.params.alpha();
        if alpha == 2.0 {
            0.5 * erfc(0.5 * self.x_max)
        } else {
            self.series.mass_beyond(side, self.x_max)
        }
    }

    fn build_cdf(&mut self) {
        let h = self.dx;
        let g = &self.g1;
        let n = g.len();
        let deriv = |i: usize| -> f64 {
            if i == 0 {
                (g[1] - g[0]) / h
            } else if i == n - 1 {
                (g[n - 1] - g[n - 2]) / h
            } else {
                (g[i + 1] - g[i - 1]) / (2.0 * h)
            }
        };
        let mut cdf = Vec::with_capacity(n);
        let mut acc = self.tail_mass(0);
        cdf.push(acc);
        for i in 1..n {
            acc += 0.5 * h * (g[i - 1] + g[i]) - h * h / 12.0 * (deriv(i) - deriv(i - 1));
            cdf.push(acc);
        }
        self.mass_defect = acc + self.tail_mass(1) - 1.0;
        self.cdf1 = cdf;
    }

    fn interp(&self, table: &[f64], y: f64) -> f64 {
        let n = table.len();
        let r = (y + self.x_max) / self.dx;
        let j = (r.floor().max(0.0) as usize).min(n - 2);
        let s = j.saturating_sub(1).min(n - 4);
        lagrange4(&table[s..s + 4], r - s as f64)
    }

    /// G(y, 1).
    pub fn g1_at(&self, y: f64) -> f64 {
        if y.abs() <= self.x_max {
            return self.interp(&self.g1, y);
        }
        let alpha = self.params.alpha();
        if alpha == 2.0 {
            return (-0.25 * y * y).exp() / (4.0 * std::f64::consts::PI).sqrt();
        }
        let side = if y < 0.0 { 0 } else { 1 };
        self.series.eval(side, y.abs())
    }

    /// P(Y <= y) for the t = 1 law.
    pub fn cdf1_at(&self, y: f64) -> f64 {
        let alpha = self.params.alpha();
        if y.abs() <= self.x_max {
            return self.interp(&self.cdf1, y);
        }
        if alpha == 2.0 {
            return 0.5 * erfc(-0.5 * y);
        }
        if y < 0.0 {
            self.series.mass_beyond(0, -y)
        } else {
            1.0 - self.series.mass_beyond(1, y)
        }
    }

    /// G(x, t) through the scaling law.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64, KernelError> {
        if !(t > 0.0) {
            return Err(KernelError::NonPositiveTime(t));
        }
        Ok(self.eval_unchecked(x, t))
    }

    pub(crate) fn eval_unchecked(&self, x: f64, t: f64) -> f64 {
        let s = t.powf(-1.0 / self.params.alpha());
        s * self.g1_at(x * s)
    }

    pub fn cdf(&self, x: f64, t: f64) -> Result<f64, KernelError> {
        if !(t > 0.0) {
            return Err(KernelError::NonPositiveTime(t));
        }
        Ok(self.cdf1_at(x * t.powf(-1.0 / self.params.alpha())))
    }

    /// CSV `x,g`, every `stride`-th table node.
    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> Result<(), KernelError> {
        writeln!(w, "x,g")?;
        for (i, x) in self.x_nodes().enumerate().step_by(stride.max(1)) {
            writeln!(w, "{:.16e},{:.16e}", x, self.g1[i])?;
        }
        Ok(())
    }

    pub fn summary(&self) -> KernelSummary {
        KernelSummary {
            alpha: self.params.alpha(),
            theta: self.params.theta(),
            mass_defect: self.mass_defect,
            tail_amplitude: 0.5 * (self.tail_amplitude[0] + self.tail_amplitude[1]),
            tail_amplitude_left: self.tail_amplitude[0],
            tail_amplitude_right: self.tail_amplitude[1],
            build_resolution: self.resolution,
            x_max: self.x_max,
            min_value: self.true_min,
        }
    }
}

/// Sidecar metadata for a kernel dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub alpha: f64,
    pub theta: f64,
    pub mass_defect: f64,
    pub tail_amplitude: f64,
    pub tail_amplitude_left: f64,
    pub tail_amplitude_right: f64,
    pub build_resolution: usize,
    pub x_max: f64,
    pub min_value: f64,
}

/// G(x, t) by direct quadrature of (1/pi) int_0^inf exp(-t xi^a cos) cos(xi x + t xi^a sin) dxi.
pub fn density_by_quadrature(p: &RFParams, x: f64, t: f64) -> f64 {
    let alpha = p.alpha();
    let c = cos_pi(0.5 * p.theta());
    let s = sin_pi(0.5 * p.theta());
    let top = (CUTOFF_EXPONENT / (t * c)).powf(1.0 / alpha);
    let f = |xi: f64| {
        let m = t * xi.powf(alpha);
        (-m * c).exp() * (xi * x + m * s).cos()
    };
    let pieces = ((top * x.abs().max(1.0)) / 4.0).ceil().max(1.0) as usize;
    let mut total = 0.0;
    for k in 0..pieces {
        let a = top * k as f64 / pieces as f64;
        let b = top * (k + 1) as f64 / pieces as f64;
        total += integrate(f, a, b, 1e-15, 1e-13);
    }
    total / std::f64::consts::PI
}

/// Reusable discrete convolution with G(., t) on a fixed grid.
///
/// Fields are taken to equal their tails outside [-L, L]. Weights are G(m h, t) h when the kernel
/// spans several cells and cell masses from the distribution function otherwise.
#[derive(Clone)]
pub struct ConvolutionPlan {
    grid: Grid,
    t: f64,
    len: usize,
    fft: FftPair,
    weights_hat: Vec<Complex64>,
    boundary: Vec<f64>,
}

impl ConvolutionPlan {
    pub fn new(k: &KernelTable, grid: &Grid, t: f64) -> Result<Self, KernelError> {
        if !(t > 0.0) {
            return Err(KernelError::NonPositiveTime(t));
        }
        let n = grid.n_points();
        let h = grid.dx();
        let len = next_pow2(2 * n);
        let fft = FftPair::new(len);
        let width = t.powf(1.0 / k.params.alpha());
        let smooth = width >= 8.0 * h;
        let mut w = vec![Complex64::new(0.0, 0.0); len];
        for m in -(n as isize - 1)..=(n as isize - 1) {
            let x = m as f64 * h;
            let val = if smooth {
                k.eval_unchecked(x, t) * h
            } else {
                let s = 1.0 / width;
                k.cdf1_at((x + 0.5 * h) * s) - k.cdf1_at((x - 0.5 * h) * s)
            };
            let idx = if m >= 0 { m as usize } else { (len as isize + m) as usize };
            w[idx].re = val;
        }
        fft.forward(&mut w);
        let l = grid.half_width();
        let boundary = (0..n).map(|i| k.cdf1_at((grid.x(i) - l - 0.5 * h) / width)).collect();
        Ok(ConvolutionPlan { grid: *grid, t, len, fft, weights_hat: w, boundary })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub(crate) fn transform(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf = padded(values, self.len);
        self.fft.forward(&mut buf);
        buf
    }

    pub(crate) fn weights_hat(&self) -> &[Complex64] {
        &self.weights_hat
    }

    pub(crate) fn boundary(&self) -> &[f64] {
        &self.boundary
    }

    pub(crate) fn fft(&self) -> &FftPair {
        &self.fft
    }

    pub fn apply(&self, field: &Field) -> Result<Field, KernelError> {
        if field.grid() != &self.grid {
            return Err(KernelError::Layout("field grid differs from plan grid".into()));
        }
        field.check_settled()?;
        let tl = field.tail_left();
        let jump = field.tail_right() - tl;
        let shifted: Vec<f64> = field.values().iter().map(|v| v - tl).collect();
        let mut buf = self.transform(&shifted);
        for (b, w) in buf.iter_mut().zip(&self.weights_hat) {
            *b *= w;
        }
        self.fft.inverse(&mut buf);
        let out = (0..self.grid.n_points()).map(|i| tl + buf[i].re + jump * self.boundary[i]).collect();
        Ok(Field::new(self.grid, out, field.tail_left(), field.tail_right())?.with_tail_tolerance(field.tail_tolerance()))
    }
}

pub fn convolve(k: &KernelTable, field: &Field, t: f64) -> Result<Field, KernelError> {
    ConvolutionPlan::new(k, field.grid(), t)?.apply(field)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupDefect {
    pub s: f64,
    pub t: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub min_value: f64,
    pub mass_defect: f64,
    /// Largest relative gap between table evaluation and direct quadrature.
    pub scaling_max_deviation: f64,
    pub semigroup: Vec<SemigroupDefect>,
    /// B_0, B_1 with |d^m G(x, t)| <= t^{-(1+m)/alpha} B_m / (1 + t^{-2/alpha} x^2) at the sampled points.
    pub envelope: [f64; 2],
    /// G(., 1) > 0 at every node with |x| <= 5 where it is above the 1e-14 resolution floor.
    pub positive_core: bool,
    pub tail_slopes: [Option<f64>; 2],
    pub tail_amplitude: [f64; 2],
}

/// sup over |x| <= 10 of |G(., s) * G(., t) - G(., s + t)|.
pub fn semigroup_defect(k: &KernelTable, s: f64, t: f64) -> f64 {
    let alpha = k.params.alpha();
    // The core narrows like cos(theta pi / 2)^(1/alpha) near maximal skew.
    let damping = crate::riesz_feller::cos_pi(0.5 * k.params.theta()).max(1e-3);
    let step = (s.min(t) * damping).powf(1.0 / alpha) / 50.0;
    let reach = 150.0;
    let m = (reach / step).ceil() as isize;
    let mut worst = 0.0f64;
    for q in -20..=20 {
        let x = 0.5 * q as f64;
        let mut acc = 0.0;
        for j in -m..=m {
            let y = j as f64 * step;
            acc += k.eval_unchecked(x - y, s) * k.eval_unchecked(y, t);
        }
        acc *= step;
        worst = worst.max((acc - k.eval_unchecked(x, s + t)).abs());
    }
    worst
}

pub fn check_properties(k: &KernelTable) -> PropertyReport {
    let p = k.params;
    let alpha = p.alpha();
    let mut scaling = 0.0f64;
    for t in [0.25f64, 1.0, 4.0] {
        let w = t.powf(1.0 / alpha);
        for y in [-1.5, -0.5, 0.0, 0.5, 1.5] {
            let x = y * w;
            let q = density_by_quadrature(&p, x, t);
            let e = k.eval_unchecked(x, t);
            scaling = scaling.max((e - q).abs() / q.abs().max(1e-12));
        }
    }
    let semigroup = [(0.5, 0.5), (1.0, 2.0)]
        .iter()
        .map(|&(s, t)| SemigroupDefect { s, t, defect: semigroup_defect(k, s, t) })
        .collect();
    let mut envelope = [0.0f64; 2];
    let h = 1e-3;
    let mut y = -k.x_max + 2.0 * h;
    let step = k.dx * 37.0;
    while y <= k.x_max - 2.0 * h {
        let weight = 1.0 + y * y;
        envelope[0] = envelope[0].max(k.g1_at(y).abs() * weight);
        let d = (k.g1_at(y + h) - k.g1_at(y - h)) / (2.0 * h);
        envelope[1] = envelope[1].max(d.abs() * weight);
        y += step;
    }
    let positive_core = k
        .x_nodes()
        .zip(&k.g1)
        .filter(|(x, _)| x.abs() <= 5.0)
        .all(|(_, &g)| g > 0.0 || g.abs() <= 1e-14);
    PropertyReport {
        min_value: k.true_min,
        mass_defect: k.mass_defect,
        scaling_max_deviation: scaling,
        semigroup,
        envelope,
        positive_core,
        tail_slopes: k.tail_slope,
        tail_amplitude: k.tail_amplitude,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_grid::make_grid;

    fn gauss(x: f64, t: f64) -> f64 {
        (-x * x / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()
    }

    #[test]
    fn gaussian_center() {
        let k = build_default(&RFParams::new(2.0, 0.0).unwrap()).unwrap();
        assert!((k.eval(0.0, 1.0).unwrap() - 0.282_094_791_773_878_1).abs() < 1e-8);
        assert!((k.eval(0.0, 4.0).unwrap() - 0.141_047_395_886_939_1).abs() < 1e-8);
        assert!(k.mass_defect().abs() < 1e-6);
        assert!(k.eval(0.0, 0.0).is_err());
    }

    #[test]
    fn cauchy_center() {
        let k = build(&RFParams::new(1.0, 0.0).unwrap(), 200.0, 1 << 18).unwrap();
        assert!((k.eval(0.0, 1.0).unwrap() - 1.0 / std::f64::consts::PI).abs() < 1e-8);
        assert!((k.eval(3.0, 2.0).unwrap() - 2.0 / (std::f64::consts::PI * 13.0)).abs() < 1e-8);
    }

    #[test]
    fn degenerate_parameters_rejected() {
        assert!(matches!(build_default(&RFParams::new(1.0, 1.0).unwrap()), Err(KernelError::Degenerate { .. })));
        assert!(matches!(build_default(&RFParams::new(0.5, 0.5).unwrap()), Err(KernelError::Degenerate { .. })));
    }

    #[test]
    fn convolution_keeps_constants() {
        let k = build(&RFParams::new(1.5, 0.2).unwrap(), 200.0, 1 << 18).unwrap();
        let g = make_grid(20.0, 512).unwrap();
        for t in [1e-4, 0.5, 3.0] {
            let out = convolve(&k, &Field::constant(g, 0.42), t).unwrap();
            assert!(out.values().iter().all(|&v| (v - 0.42).abs() < 1e-14));
        }
    }

    #[test]
    fn heat_convolution_of_gaussian() {
        let k = build_default(&RFParams::new(2.0, 0.0).unwrap()).unwrap();
        let g = make_grid(30.0, 2048).unwrap();
        let f = Field::from_fn(g, 0.0, 0.0, |x| gauss(x, 0.5)).unwrap();
        let out = convolve(&k, &f, 1.0).unwrap();
        for (i, v) in out.values().iter().enumerate() {
            assert!((v - gauss(g.x(i), 1.5)).abs() < 1e-6);
        }
    }
}
