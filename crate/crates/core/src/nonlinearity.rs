//! Bistable polynomial reactions f with roots u- < a < u+, their calculus,
//! and the bounded C^2 modification used for well-posedness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field_grid::{smoothstep5, smoothstep5_d1};

#[derive(Debug, Error, PartialEq)]
pub enum NonlinearityError {
    #[error("parameter a = {0} must lie strictly between 0 and 1")]
    RootOutOfRange(f64),
    #[error("roots must satisfy u- < a < u+, got ({0}, {1}, {2})")]
    UnorderedRoots(f64, f64, f64),
    #[error("declared root {root} is not a zero of the polynomial (f = {value:e})")]
    NotARoot { root: f64, value: f64 },
    #[error("f'({root}) = {slope} must be negative at an outer root")]
    OuterRootNotStable { root: f64, slope: f64 },
    #[error("f has the wrong sign at u = {0}; expected f < 0 on (u-, a) and f > 0 on (a, u+)")]
    NotBistable(f64),
    #[error("operation needs roots normalized to u- = 0, u+ = 1 (got {0}, {1})")]
    NotNormalized(f64, f64),
    #[error("empty coefficient list")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BistableKind {
    /// u (u - a) (1 - u)
    Cubic { a: f64 },
    /// (u + 1) u (u - a) (u - 1) (u - 2)
    Quintic { a: f64 },
    /// Coefficients in ascending powers.
    Polynomial { coefficients: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedSign {
    Negative,
    Zero,
    Positive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bistable {
    kind: BistableKind,
    coeffs: Vec<f64>,
    u_minus: f64,
    a: f64,
    u_plus: f64,
    f_min: f64,
    f_max: f64,
}

fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * u + k)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &v)| k as f64 * v).collect()
}

fn antiderivative(c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend(c.iter().enumerate().map(|(k, &v)| v / (k + 1) as f64));
    out
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn from_roots(roots: &[f64], lead: f64) -> Vec<f64> {
    roots.iter().fold(vec![lead], |acc, &r| poly_mul(&acc, &[-r, 1.0]))
}

impl Bistable {
    pub fn cubic(a: f64) -> Result<Self, NonlinearityError> {
        if !(a > 0.0 && a < 1.0) {
            return Err(NonlinearityError::RootOutOfRange(a));
        }
        Self::build(BistableKind::Cubic { a }, vec![0.0, -a, 1.0 + a, -1.0], 0.0, a, 1.0)
    }

    pub fn quintic(a: f64) -> Result<Self, NonlinearityError> {
        if !(a > 0.0 && a < 1.0) {
            return Err(NonlinearityError::RootOutOfRange(a));
        }
        let coeffs = from_roots(&[-1.0, 0.0, a, 1.0, 2.0], 1.0);
        Self::build(BistableKind::Quintic { a }, coeffs, 0.0, a, 1.0)
    }

    /// General polynomial (ascending coefficients) with declared roots (u-, a, u+).
    pub fn polynomial(coefficients: Vec<f64>, roots: [f64; 3]) -> Result<Self, NonlinearityError> {
        if coefficients.is_empty() {
            return Err(NonlinearityError::Empty);
        }
        let [um, a, up] = roots;
        Self::build(BistableKind::Polynomial { coefficients: coefficients.clone() }, coefficients, um, a, up)
    }

    fn build(kind: BistableKind, coeffs: Vec<f64>, u_minus: f64, a: f64, u_plus: f64) -> Result<Self, NonlinearityError> {
        if !(u_minus < a && a < u_plus) {
            return Err(NonlinearityError::UnorderedRoots(u_minus, a, u_plus));
        }
        let scale = coeffs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        for r in [u_minus, a, u_plus] {
            let v = horner(&coeffs, r);
            if v.abs() > 1e-12 * scale {
                return Err(NonlinearityError::NotARoot { root: r, value: v });
            }
        }
        let dc = derivative(&coeffs);
        for r in [u_minus, u_plus] {
            let s = horner(&dc, r);
            if !(s < 0.0) {
                return Err(NonlinearityError::OuterRootNotStable { root: r, slope: s });
            }
        }
        let samples = 400;
        for k in 1..samples {
            let t = k as f64 / samples as f64;
            let lo = u_minus + t * (a - u_minus);
            if !(horner(&coeffs, lo) < 0.0) {
                return Err(NonlinearityError::NotBistable(lo));
            }
            let hi = a + t * (u_plus - a);
            if !(horner(&coeffs, hi) > 0.0) {
                return Err(NonlinearityError::NotBistable(hi));
            }
        }
        let mut b = Bistable { kind, coeffs, u_minus, a, u_plus, f_min: 0.0, f_max: 0.0 };
        let (lo, hi) = b.compute_extrema();
        b.f_min = lo;
        b.f_max = hi;
        Ok(b)
    }

    pub fn kind(&self) -> &BistableKind {
        &self.kind
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn u_minus(&self) -> f64 {
        self.u_minus
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn u_plus(&self) -> f64 {
        self.u_plus
    }

    #[inline]
    pub fn eval_f(&self, u: f64) -> f64 {
        horner(&self.coeffs, u)
    }

    pub fn eval_df(&self, u: f64) -> f64 {
        // Coefficient k contributes k c_k u^(k-1).
        self.coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &c)| acc * u + k as f64 * c)
    }

    pub fn is_normalized(&self) -> bool {
        self.u_minus == 0.0 && self.u_plus == 1.0
    }

    /// Half the smaller decay rate at the stable roots.
    pub fn beta(&self) -> Result<f64, NonlinearityError> {
        if !self.is_normalized() {
            return Err(NonlinearityError::NotNormalized(self.u_minus, self.u_plus));
        }
        Ok(0.5 * (-self.eval_df(0.0)).min(-self.eval_df(1.0)))
    }

    /// Exact integral of f over [u-, u+].
    pub fn potential_integral(&self) -> f64 {
        let anti = antiderivative(&self.coeffs);
        horner(&anti, self.u_plus) - horner(&anti, self.u_minus)
    }

    /// The sign of c in a traveling front U(x - ct) from u- to u+: opposite to the potential integral.
    pub fn predicted_speed_sign(&self) -> SpeedSign {
        let p = self.potential_integral();
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs())) * (self.u_plus - self.u_minus).powi(2);
        if p.abs() <= 1e-14 * scale.max(1e-300) {
            SpeedSign::Zero
        } else if p > 0.0 {
            SpeedSign::Negative
        } else {
            SpeedSign::Positive
        }
    }

    /// Minimum and maximum of f over [u-, u+].
    pub fn extrema(&self) -> (f64, f64) {
        (self.f_min, self.f_max)
    }

    fn compute_extrema(&self) -> (f64, f64) {
        let mut lo = 0.0f64;
        let mut hi = 0.0f64;
        let mut consider = |u: f64| {
            let v = self.eval_f(u);
            lo = lo.min(v);
            hi = hi.max(v);
        };
        if let BistableKind::Cubic { a } = self.kind {
            // f' = -3u^2 + 2(1 + a)u - a
            let disc = ((1.0 + a) * (1.0 + a) - 3.0 * a).sqrt();
            consider(((1.0 + a) - disc) / 3.0);
            consider(((1.0 + a) + disc) / 3.0);
            return (lo, hi);
        }
        let n = 10_000;
        let w = self.u_plus - self.u_minus;
        let dc = derivative(&self.coeffs);
        let ddc = derivative(&dc);
        let mut prev = horner(&dc, self.u_minus);
        for k in 1..=n {
            let u = self.u_minus + w * k as f64 / n as f64;
            consider(u);
            let cur = horner(&dc, u);
            if prev.signum() != cur.signum() {
                // Polish the critical point with a few Newton steps from the bracket midpoint.
                let a0 = u - w / n as f64;
                let mut x = u - 0.5 * w / n as f64;
                for _ in 0..20 {
                    let d2 = horner(&ddc, x);
                    if d2 == 0.0 {
                        break;
                    }
                    let nx = x - horner(&dc, x) / d2;
                    if !(nx >= a0 && nx <= u) {
                        break;
                    }
                    x = nx;
                }
                consider(x);
            }
            prev = cur;
        }
        (lo, hi)
    }

    /// sup |f'| over [lo, hi] by dense sampling.
    pub fn df_sup_on(&self, lo: f64, hi: f64) -> f64 {
        let n = 4000;
        (0..=n)
            .map(|k| self.eval_df(lo + (hi - lo) * k as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Affine change u = u- + (u+ - u-) v, returning g(v) = f(u) / (u+ - u-) with roots 0, a', 1.
    pub fn rescaled_unit(&self) -> Result<Bistable, NonlinearityError> {
        let w = self.u_plus - self.u_minus;
        let shifted = taylor_shift(&self.coeffs, self.u_minus);
        let coeffs: Vec<f64> = shifted.iter().enumerate().map(|(k, &c)| c * w.powi(k as i32) / w).collect();
        let a = (self.a - self.u_minus) / w;
        Bistable::build(BistableKind::Polynomial { coefficients: coeffs.clone() }, coeffs, 0.0, a, 1.0)
    }

    /// The reaction seen after u -> u- + u+ - u: g(v) = -f(u- + u+ - v), middle root u- + u+ - a.
    pub fn mirrored(&self) -> Bistable {
        let s = self.u_minus + self.u_plus;
        let shifted = taylor_shift(&self.coeffs, s);
        let coeffs: Vec<f64> =
            shifted.iter().enumerate().map(|(k, &c)| if k % 2 == 0 { -c } else { c }).collect();
        let a = s - self.a;
        let kind = match self.kind {
            BistableKind::Cubic { a: ca } if self.is_normalized() => BistableKind::Cubic { a: 1.0 - ca },
            _ => BistableKind::Polynomial { coefficients: coeffs.clone() },
        };
        let coeffs = match kind {
            BistableKind::Cubic { a } => vec![0.0, -a, 1.0 + a, -1.0],
            _ => coeffs,
        };
        Bistable::build(kind, coeffs, self.u_minus, a, self.u_plus).expect("mirror of a bistable is bistable")
    }

    pub fn clamp(&self) -> ClampedBistable {
        self.clamp_with(DEFAULT_BLEND_WIDTH)
    }

    pub fn clamp_with(&self, blend_width: f64) -> ClampedBistable {
        ClampedBistable { base: self.clone(), blend_width }
    }
}

/// Coefficients of p(s + v) in powers of v.
fn taylor_shift(c: &[f64], s: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    for (k, &ck) in c.iter().enumerate() {
        let mut binom = 1.0;
        for j in 0..=k {
            out[j] += ck * binom * s.powi((k - j) as i32);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

pub const DEFAULT_BLEND_WIDTH: f64 = 0.5;

/// f on [u-, u+]; outside, a C^2 blend into the constant f_min (above u+) or f_max (below u-).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampedBistable {
    base: Bistable,
    blend_width: f64,
}

impl ClampedBistable {
    pub fn base(&self) -> &Bistable {
        &self.base
    }

    pub fn blend_width(&self) -> f64 {
        self.blend_width
    }

    /// Saturating map with unit slope and zero curvature at 0, bounded by f_max above and |f_min| below.
    fn soft(&self, y: f64) -> (f64, f64) {
        let (lo, hi) = self.base.extrema();
        let s = if y >= 0.0 { hi } else { -lo };
        let t = (y / s).tanh();
        (s * t, 1.0 - t * t)
    }

    pub fn eval_f(&self, u: f64) -> f64 {
        let b = &self.base;
        if u >= b.u_minus && u <= b.u_plus {
            return b.eval_f(u);
        }
        let (lo, hi) = b.extrema();
        let (d, target) = if u > b.u_plus { (u - b.u_plus, lo) } else { (b.u_minus - u, hi) };
        let s = d / self.blend_width;
        if s >= 1.0 {
            return target;
        }
        let w = smoothstep5(s);
        (1.0 - w) * self.soft(b.eval_f(u)).0 + w * target
    }

    pub fn eval_df(&self, u: f64) -> f64 {
        let b = &self.base;
        if u >= b.u_minus && u <= b.u_plus {
            return b.eval_df(u);
        }
        let (lo, hi) = b.extrema();
        let (d, target, dir) = if u > b.u_plus { (u - b.u_plus, lo, 1.0) } else { (b.u_minus - u, hi, -1.0) };
        let s = d / self.blend_width;
        if s >= 1.0 {
            return 0.0;
        }
        let w = smoothstep5(s);
        let dw = smoothstep5_d1(s) * dir / self.blend_width;
        let (phi, dphi) = self.soft(b.eval_f(u));
        -dw * phi + (1.0 - w) * dphi * b.eval_df(u) + dw * target
    }

    /// Global bound on |f~|.
    pub fn sup_bound(&self) -> f64 {
        let (lo, hi) = self.base.extrema();
        lo.abs().max(hi.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_values() {
        let b = Bistable::cubic(0.3).unwrap();
        assert_eq!(b.eval_f(0.0), 0.0);
        assert!((b.eval_f(0.5) - 0.05).abs() < 1e-15);
        assert!((b.eval_df(0.0) + 0.3).abs() < 1e-15);
        assert!((b.eval_df(1.0) + 0.7).abs() < 1e-15);
        assert!((b.eval_df(0.3) - 0.21).abs() < 1e-15);
    }

    #[test]
    fn quintic_value() {
        let b = Bistable::quintic(0.3).unwrap();
        assert!((b.eval_f(0.5) - 0.1125).abs() < 1e-15);
        assert!(b.eval_df(0.0) < 0.0 && b.eval_df(1.0) < 0.0);
    }

    #[test]
    fn betas() {
        for (a, want) in [(0.3, 0.15), (0.5, 0.25), (0.7, 0.15)] {
            let b = Bistable::cubic(a).unwrap();
            assert!((b.beta().unwrap() - want).abs() < 1e-15);
        }
        let shifted = Bistable::polynomial(vec![0.0, -0.3, 1.3, -1.0], [0.0, 0.3, 1.0]).unwrap();
        assert!(shifted.beta().is_ok());
    }

    #[test]
    fn potential_integrals_and_signs() {
        let b = Bistable::cubic(0.5).unwrap();
        assert_eq!(b.potential_integral(), 0.0);
        assert_eq!(b.predicted_speed_sign(), SpeedSign::Zero);
        let b = Bistable::cubic(0.3).unwrap();
        assert!((b.potential_integral() - 0.4 / 12.0).abs() < 1e-15);
        assert_eq!(b.predicted_speed_sign(), SpeedSign::Negative);
        let b = Bistable::cubic(0.7).unwrap();
        assert!((b.potential_integral() + 0.4 / 12.0).abs() < 1e-15);
        assert_eq!(b.predicted_speed_sign(), SpeedSign::Positive);
    }

    #[test]
    fn rejects_non_bistable() {
        assert!(Bistable::cubic(1.2).is_err());
        assert!(Bistable::polynomial(vec![0.0, 0.3, -1.3, 1.0], [0.0, 0.3, 1.0]).is_err());
        assert!(Bistable::polynomial(vec![0.0, -0.3, 1.3, -1.0], [0.0, 0.4, 1.0]).is_err());
        assert!(matches!(
            Bistable::polynomial(vec![0.0, -0.3, 1.3, -1.0], [0.3, 0.0, 1.0]),
            Err(NonlinearityError::UnorderedRoots(..))
        ));
    }

    #[test]
    fn general_roots_rescale() {
        // 2 (u + 1)(u - 0.5)(2 - u) / ... with roots -1, 0.5, 2.
        let c = from_roots(&[-1.0, 0.5, 2.0], -1.0);
        let b = Bistable::polynomial(c, [-1.0, 0.5, 2.0]).unwrap();
        assert!(b.beta().is_err());
        let u = b.rescaled_unit().unwrap();
        assert!(u.is_normalized());
        assert!((u.a() - 0.5).abs() < 1e-15);
        assert!((u.eval_f(0.25) - b.eval_f(-0.25) / 3.0).abs() < 1e-14);
    }

    #[test]
    fn mirror_of_cubic() {
        let b = Bistable::cubic(0.3).unwrap();
        let m = b.mirrored();
        assert_eq!(m.kind(), &BistableKind::Cubic { a: 0.7 });
        for k in 0..=10 {
            let v = k as f64 / 10.0;
            assert!((m.eval_f(v) + b.eval_f(1.0 - v)).abs() < 1e-15);
        }
    }

    #[test]
    fn cubic_extrema_match_scan() {
        let b = Bistable::cubic(0.3).unwrap();
        let (lo, hi) = b.extrema();
        let p = Bistable::polynomial(b.coefficients().to_vec(), [0.0, 0.3, 1.0]).unwrap();
        let (plo, phi) = p.extrema();
        assert!((lo - plo).abs() < 1e-12 && (hi - phi).abs() < 1e-12);
    }

    #[test]
    fn clamp_identity_inside_and_saturation_outside() {
        let b = Bistable::cubic(0.3).unwrap();
        let c = b.clamp();
        assert_eq!(c.eval_f(0.5), b.eval_f(0.5));
        let (lo, hi) = b.extrema();
        assert_eq!(c.eval_f(2.0), lo);
        assert_eq!(c.eval_f(1.5), lo);
        assert_eq!(c.eval_f(-1.0), hi);
        let bound = lo.abs().max(hi.abs()) * (1.0 + 1e-9);
        for k in 0..=100_000 {
            let u = -10.0 + 20.0 * k as f64 / 100_000.0;
            assert!(c.eval_f(u).abs() <= bound);
        }
    }

    #[test]
    fn clamp_is_c2_at_the_junctions() {
        let c = Bistable::cubic(0.3).unwrap().clamp();
        for u0 in [0.0, 1.0, -0.5, 1.5] {
            let h = 1e-7;
            let g = |k: f64| c.eval_df(u0 + k * h);
            let d_left = (3.0 * g(-1.0) - 4.0 * g(-2.0) + g(-3.0)) / (2.0 * h);
            let d_right = (-3.0 * g(1.0) + 4.0 * g(2.0) - g(3.0)) / (2.0 * h);
            assert!((c.eval_df(u0 - h) - c.eval_df(u0 + h)).abs() < 1e-4);
            assert!((d_left - d_right).abs() < 1e-3, "{u0}: {d_left} vs {d_right}");
        }
    }
}
