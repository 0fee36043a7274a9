//! Traveling waves: construction from ramp data by tracking z(a, t), speed formula and bound,
//! tail fits, uniqueness and stability runs, and sub/supersolution certificates.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cauchy_solver::{evolve, SolverConfig, SolverError, Trajectory};
use crate::field_grid::{lagrange4, shift_interpolate, smoothstep5, smoothstep5_d1, Field, Grid, GridError, Ramp};
use crate::nonlinearity::{Bistable, NonlinearityError};
use crate::riesz_feller::{apply, bound_from_norms, OperatorError, RFParams};
use crate::stats::{fit_line, fit_plane, LineFit};

/// sup of zeta' and |zeta''| for the quintic ramp on [0, 4].
pub const ZETA_D1_MAX: f64 = 0.46875;
pub const ZETA_D2_MAX: f64 = 0.360_843_918_243_516;
/// Same norms for (1 + tanh s) / 2.
const TANH_D1_MAX: f64 = 0.5;
const TANH_D2_MAX: f64 = 0.384_900_179_459_750_5;

pub const SPEED_FIT_MIN_R2: f64 = 0.999;
/// Exponential tails are fitted only above the round-off floor of the extracted profile.
pub const EXPONENTIAL_TAIL_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum WaveError {
    #[error("domain half-width {0} is below 8")]
    DomainTooSmall(f64),
    #[error("level {level} is not crossed at t = {t}")]
    NotBracketed { t: f64, level: f64 },
    #[error("snapshot at t = {t} crosses level {level} {crossings} times")]
    NonMonotone { t: f64, level: f64, crossings: usize },
    #[error("speed fit r^2 = {r2:.6} below 0.999: the front is not rigid yet, run longer")]
    NotRigid { r2: f64 },
    #[error("too few snapshots ({0}) to extract a wave")]
    TooShort(usize),
    #[error("the speed formula needs theta = 0, got {0}")]
    FormulaTheta(f64),
    #[error("vanishing integral of U'^2")]
    VanishingDenominator,
    #[error("alpha = {alpha} outside {what}")]
    Alpha { alpha: f64, what: &'static str },
    #[error("bisection bracket failure: {0}")]
    Bracket(&'static str),
    #[error("tail window [{lo:.3}, {hi:.3}] too short")]
    WindowTooShort { lo: f64, hi: f64 },
    #[error("delta = {delta} exceeds the admissible {limit}")]
    DeltaTooLarge { delta: f64, limit: f64 },
    #[error("no admissible epsilon down to {0:e}")]
    NoEpsilon(f64),
    #[error("cannot certify: {0}")]
    Certify(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("distance to the wave never decreases (s(0) = {first:e}, s(T) = {last:e})")]
    NoConvergence { first: f64, last: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Quintic ramp from 0 at x = -2 to 1 at x = 2.
pub fn initial_zeta(grid: &Grid) -> Result<Field, WaveError> {
    if grid.half_width() < 8.0 {
        return Err(WaveError::DomainTooSmall(grid.half_width()));
    }
    let r = zeta_ramp();
    Ok(Field::from_fn(*grid, 0.0, 1.0, |x| r.value(x))?)
}

fn zeta_ramp() -> Ramp {
    Ramp { start: -2.0, width: 4.0 }
}

/// The unique crossing of `level` in one sampled profile.
pub fn crossing(field: &Field, level: f64) -> Result<f64, (usize, f64)> {
    let v = field.values();
    let g = field.grid();
    let n = v.len();
    let mut found = None;
    let mut count = 0;
    for i in 0..n - 1 {
        let a = v[i] - level;
        let b = v[i + 1] - level;
        if (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0) || (a == 0.0 && i == 0) {
            count += 1;
            found = Some(i);
        }
    }
    let i = match (count, found) {
        (1, Some(i)) => i,
        (c, _) => return Err((c, level)),
    };
    if v[i] == level {
        return Ok(g.x(i));
    }
    if v[i + 1] == level {
        return Ok(g.x(i + 1));
    }
    let s = if n < 4 { i } else { i.saturating_sub(1).min(n - 4) };
    let p: Vec<f64> = if n < 4 { vec![] } else { v[s..s + 4].iter().map(|x| x - level).collect() };
    let eval = |u: f64| -> f64 {
        if n < 4 {
            let t = u - (i - s) as f64;
            (v[i] - level) * (1.0 - t) + (v[i + 1] - level) * t
        } else {
            lagrange4(&p, u)
        }
    };
    // Bisection on the cell, accelerated by secant steps.
    let (mut lo, mut hi) = ((i - s) as f64, (i + 1 - s) as f64);
    let (mut flo, mut fhi) = (eval(lo), eval(hi));
    for _ in 0..200 {
        let mut m = lo - flo * (hi - lo) / (fhi - flo);
        if !(m > lo && m < hi) || (hi - lo) > 0.5 {
            m = 0.5 * (lo + hi);
        }
        let fm = eval(m);
        if fm == 0.0 {
            lo = m;
            hi = m;
            break;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = m;
            flo = fm;
        } else {
            hi = m;
            fhi = fm;
        }
        if hi - lo < 1e-15 {
            break;
        }
        // A secant step can stall at one end; force a bisection afterwards.
        let mid = 0.5 * (lo + hi);
        let fmid = eval(mid);
        if (fmid < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
            fhi = fmid;
        }
    }
    Ok(g.x(s) + 0.5 * (lo + hi) * g.dx())
}

/// z(level, t) per snapshot.
pub fn track_level(traj: &Trajectory, level: f64) -> Result<Vec<(f64, f64)>, WaveError> {
    traj.times
        .iter()
        .zip(&traj.snapshots)
        .map(|(&t, s)| match crossing(s, level) {
            Ok(z) => Ok((t, z)),
            Err((0, level)) => Err(WaveError::NotBracketed { t, level }),
            Err((crossings, level)) => Err(WaveError::NonMonotone { t, level, crossings }),
        })
        .collect()
}

/// z(1 - delta, t) - z(delta, t) on normalized data.
pub fn front_width_track(traj: &Trajectory, delta: f64) -> Result<Vec<(f64, f64)>, WaveError> {
    let lo = track_level(traj, delta)?;
    let hi = track_level(traj, 1.0 - delta)?;
    Ok(lo.iter().zip(&hi).map(|(a, b)| (a.0, b.1 - a.1)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideFit {
    pub exponent: f64,
    /// Plain log-log slope without the 1/|xi| term.
    pub uncorrected_exponent: Option<f64>,
    pub amplitude: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// "power" (|xi|^exponent) or "exponential" (exp(exponent |xi|)).
    pub law: String,
    pub exponent: f64,
    pub amplitude: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub left: Option<SideFit>,
    pub right: Option<SideFit>,
    /// r^2 of the competing law on the same windows.
    pub alternative_r2: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct WaveExtraction {
    pub alpha: f64,
    pub theta: f64,
    pub a: f64,
    pub profile: Field,
    pub derivative: Vec<f64>,
    pub operator_action: Vec<f64>,
    pub speed: f64,
    pub z_track: Vec<(f64, f64)>,
    pub speed_fit_r2: f64,
    pub residual_sup: f64,
    /// Interval of xi on which every averaged snapshot came from |x| <= 0.75 L.
    pub trusted: (f64, f64),
    /// z(0.75) - z(0.25) of the profile.
    pub front_width: f64,
    pub tail_fit: Option<TailFit>,
}

#[derive(Serialize)]
struct WaveSummary<'a> {
    alpha: f64,
    theta: f64,
    a: f64,
    c: f64,
    speed_fit_r2: f64,
    residual_sup: f64,
    trusted: (f64, f64),
    front_width: f64,
    tail_fit: &'a Option<TailFit>,
}

impl WaveExtraction {
    pub fn grid(&self) -> &Grid {
        self.profile.grid()
    }

    /// U, U' and D U at xi; outside the trusted window the tail values with zero slope and action.
    pub fn eval(&self, xi: f64) -> (f64, f64, f64) {
        let (lo, hi) = self.trusted;
        if xi < lo {
            return (self.profile.tail_left(), 0.0, 0.0);
        }
        if xi > hi {
            return (self.profile.tail_right(), 0.0, 0.0);
        }
        let g = self.grid();
        let d = crate::field_grid::cubic_at(&self.derivative, g, xi);
        let du = crate::field_grid::cubic_at(&self.operator_action, g, xi);
        (self.profile.value_at(xi), d, du)
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), WaveError> {
        fs::create_dir_all(dir)?;
        self.profile.write_csv(std::io::BufWriter::new(fs::File::create(dir.join("profile.csv"))?))?;
        let summary = WaveSummary {
            alpha: self.alpha,
            theta: self.theta,
            a: self.a,
            c: self.speed,
            speed_fit_r2: self.speed_fit_r2,
            residual_sup: self.residual_sup,
            trusted: self.trusted,
            front_width: self.front_width,
            tail_fit: &self.tail_fit,
        };
        fs::write(dir.join("wave.json"), crate::export::json_string(&summary)?)?;
        Ok(())
    }
}

/// Fourth-order centered differences, second order at the two outermost points.
pub fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    for i in 0..n {
        d[i] = if i >= 2 && i + 2 < n {
            (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2]) / (12.0 * h)
        } else if i == 0 {
            (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h)
        } else {
            (values[i + 1] - values[i - 1]) / (2.0 * h)
        };
    }
    d
}

pub fn extract_wave(traj: &Trajectory, b: &Bistable, p: &RFParams) -> Result<WaveExtraction, WaveError> {
    let m = traj.times.len();
    if m < 8 {
        return Err(WaveError::TooShort(m));
    }
    let a = b.a();
    let track = track_level(traj, a)?;
    let t_end = *traj.times.last().unwrap_or(&0.0);
    let kept: Vec<&(f64, f64)> = track.iter().filter(|(t, _)| *t >= 0.2 * t_end).collect();
    let ts: Vec<f64> = kept.iter().map(|q| q.0).collect();
    let zs: Vec<f64> = kept.iter().map(|q| q.1).collect();
    let fit = fit_line(&ts, &zs).ok_or(WaveError::TooShort(kept.len()))?;
    let r2 = if fit.rms <= 1e-6 { 1.0 } else { fit.r2 };
    if r2 < SPEED_FIT_MIN_R2 {
        return Err(WaveError::NotRigid { r2 });
    }

    let grid = *traj.grid();
    let l = grid.half_width();
    let n = grid.n_points();
    let mut acc = vec![0.0; n];
    let mut count = 0usize;
    let (mut zmin, mut zmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for ((t, z), snap) in track.iter().zip(&traj.snapshots) {
        if *t < 0.75 * t_end {
            continue;
        }
        let shifted = shift_interpolate(snap, *z)?;
        for (s, v) in acc.iter_mut().zip(shifted.values()) {
            *s += v;
        }
        count += 1;
        zmin = zmin.min(*z);
        zmax = zmax.max(*z);
    }
    for v in acc.iter_mut() {
        *v /= count as f64;
    }
    let profile = Field::new(grid, acc, b.u_minus(), b.u_plus())?.with_tail_tolerance(crate::cauchy_solver::SNAPSHOT_TAIL_TOLERANCE);
    let trusted = (-0.75 * l - zmin, 0.75 * l - zmax);
    let h = grid.dx();
    let deriv = derivative(profile.values(), h);
    let du = apply(&profile, p)?.into_values();
    let mut residual_sup = 0.0f64;
    for i in 0..n {
        let x = grid.x(i);
        if x < trusted.0 || x > trusted.1 {
            continue;
        }
        let r = -fit.slope * deriv[i] - du[i] - b.eval_f(profile.values()[i]);
        residual_sup = residual_sup.max(r.abs());
    }
    let lvl = |q: f64| b.u_minus() + q * (b.u_plus() - b.u_minus());
    let front_width = match (crossing(&profile, lvl(0.75)), crossing(&profile, lvl(0.25))) {
        (Ok(hi), Ok(lo)) => hi - lo,
        _ => f64::NAN,
    };
    let mut w = WaveExtraction {
        alpha: p.alpha(),
        theta: p.theta(),
        a,
        profile,
        derivative: deriv,
        operator_action: du,
        speed: fit.slope,
        z_track: track,
        speed_fit_r2: r2,
        residual_sup,
        trusted,
        front_width,
        tail_fit: None,
    };
    w.tail_fit = fit_tail(&w, p).ok();
    Ok(w)
}

/// Evolves `initial_zeta` on `grid` and extracts the wave.
pub fn run_wave(b: &Bistable, p: &RFParams, grid: &Grid, cfg: &SolverConfig) -> Result<(Trajectory, WaveExtraction), WaveError> {
    p.require_wave_regime()?;
    let u0 = initial_zeta(grid)?;
    let traj = evolve(&u0, b, p, cfg)?;
    let w = extract_wave(&traj, b, p)?;
    Ok((traj, w))
}

/// c = -int f / int U'^2 (theta = 0 only).
pub fn speed_from_formula(w: &WaveExtraction, b: &Bistable) -> Result<f64, WaveError> {
    if w.theta != 0.0 {
        return Err(WaveError::FormulaTheta(w.theta));
    }
    let h = w.grid().dx();
    let d = &w.derivative;
    let n = d.len();
    let denom: f64 = d.iter().enumerate().map(|(i, v)| if i == 0 || i == n - 1 { 0.5 * v * v } else { v * v }).sum::<f64>() * h;
    if !(denom > 1e-14) {
        return Err(WaveError::VanishingDenominator);
    }
    Ok(-b.potential_integral() / denom)
}

/// Minimum over the cutoff M of the operator bound for a profile with the given derivative norms.
fn rho(p: &RFParams, d1: f64, d2: f64) -> f64 {
    if p.alpha() == 2.0 {
        return d2;
    }
    bound_from_norms(p, d1, d2, 4.0 * d1 / d2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedBound {
    pub c_bar: f64,
    pub epsilon_bar: f64,
    pub band_min: f64,
    pub a_bar: f64,
    pub f_sup: f64,
}

fn sample_min(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = 2000;
    (0..=n).map(|k| f(lo + (hi - lo) * k as f64 / n as f64)).fold(f64::INFINITY, f64::min)
}

fn sample_max(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    -sample_min(lo, hi, |u| -f(u))
}

/// |c| <= ||f||/eps * (3 + a)/a with rho(eps) equal to min |f| on the two mid-bands.
pub fn speed_bound(b: &Bistable, p: &RFParams) -> Result<SpeedBound, WaveError> {
    if !(p.alpha() > 1.0 && p.alpha() < 2.0) {
        return Err(WaveError::Alpha { alpha: p.alpha(), what: "(1, 2)" });
    }
    let g = if b.is_normalized() { b.clone() } else { b.rescaled_unit()? };
    let a_bar = g.a().min(1.0 - g.a());
    let band_min = sample_min(a_bar / 3.0, 2.0 * a_bar / 3.0, |u| g.eval_f(u).abs())
        .min(sample_min(1.0 - 2.0 * a_bar / 3.0, 1.0 - a_bar / 3.0, |u| g.eval_f(u).abs()));
    let f_sup = sample_max(0.0, 1.0, |u| g.eval_f(u).abs());
    let r = |e: f64| rho(p, e * TANH_D1_MAX, e * e * TANH_D2_MAX);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut grow = 0;
    while r(hi) < band_min {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(WaveError::Bracket("rho never reaches the band minimum"));
        }
    }
    if !(band_min > 0.0) {
        return Err(WaveError::Bracket("vanishing band minimum"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if r(mid) < band_min {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps = 0.5 * (lo + hi);
    Ok(SpeedBound { c_bar: f_sup / eps * (3.0 + a_bar) / a_bar, epsilon_bar: eps, band_min, a_bar, f_sup })
}

fn side_window(w: &WaveExtraction, side: usize) -> (f64, f64) {
    let lo = 5.0 * w.front_width;
    let extent = if side == 0 { -w.trusted.0 } else { w.trusted.1 };
    (lo, 0.8 * extent.min(w.grid().half_width()))
}

fn side_samples(w: &WaveExtraction, side: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let g = w.grid();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &u) in w.profile.values().iter().enumerate() {
        let x = g.x(i);
        let r = if side == 0 { -x } else { x };
        if r < lo || r > hi {
            continue;
        }
        let gap = if side == 0 { u - w.profile.tail_left() } else { w.profile.tail_right() - u };
        if gap > 0.0 {
            xs.push(r);
            ys.push(gap);
        }
    }
    (xs, ys)
}

/// Tail law of the extracted profile over [5 front_width, 0.8 x trusted extent] on each side.
pub fn fit_tail(w: &WaveExtraction, p: &RFParams) -> Result<TailFit, WaveError> {
    let exponential = p.alpha() == 2.0;
    let mut sides: [Option<SideFit>; 2] = [None, None];
    let mut alt_r2: Vec<f64> = Vec::new();
    let mut shortest = (0.0, 0.0);
    for side in 0..2 {
        let (lo, hi) = side_window(w, side);
        shortest = (lo, hi);
        if !(lo > 0.0) || hi < 2.0 * lo {
            continue;
        }
        let (xs, mut ys) = side_samples(w, side, lo, hi);
        let floor = if exponential { EXPONENTIAL_TAIL_FLOOR } else { 0.0 };
        let keep: Vec<usize> = (0..xs.len()).filter(|&i| ys[i] > floor).collect();
        if keep.len() < 16 {
            continue;
        }
        let xs: Vec<f64> = keep.iter().map(|&i| xs[i]).collect();
        ys = keep.iter().map(|&i| ys[i].ln()).collect();
        let logx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let power = fit_line(&logx, &ys);
        let expo = fit_line(&xs, &ys);
        // The drift term c U' perturbs a power tail at relative order 1/|xi|.
        let inv: Vec<f64> = xs.iter().map(|x| 1.0 / x).collect();
        let corrected = fit_plane(&logx, &inv, &ys).map(|q| q.0);
        let (primary, other): (Option<LineFit>, Option<LineFit>) = if exponential { (expo, power) } else { (corrected, expo) };
        if let Some(f) = primary {
            sides[side] = Some(SideFit {
                exponent: f.slope,
                uncorrected_exponent: if exponential { None } else { power.map(|q| q.slope) },
                amplitude: f.intercept.exp(),
                r2: f.r2,
                window: (xs[0].min(xs[xs.len() - 1]), xs[0].max(xs[xs.len() - 1])),
                points: xs.len(),
            });
        }
        if let Some(o) = other {
            alt_r2.push(o.r2);
        }
    }
    let [left, right] = sides;
    let chosen: Vec<&SideFit> = left.iter().chain(right.iter()).collect();
    if chosen.is_empty() {
        return Err(WaveError::WindowTooShort { lo: shortest.0, hi: shortest.1 });
    }
    let k = chosen.len() as f64;
    let exponent = chosen.iter().map(|s| s.exponent).sum::<f64>() / k;
    let amplitude = chosen.iter().map(|s| s.amplitude).sum::<f64>() / k;
    let r2 = chosen.iter().map(|s| s.r2).fold(f64::INFINITY, f64::min);
    let window = (
        chosen.iter().map(|s| s.window.0).fold(f64::INFINITY, f64::min),
        chosen.iter().map(|s| s.window.1).fold(0.0, f64::max),
    );
    Ok(TailFit {
        law: if exponential { "exponential".into() } else { "power".into() },
        exponent,
        amplitude,
        r2,
        window,
        left,
        right,
        alternative_r2: alt_r2.into_iter().reduce(f64::min),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    WaveSupersolution,
    WaveSubsolution,
    RampSupersolution,
    RampSubsolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CertificateConstants {
    Wave { delta: f64, delta_star: f64, sigma_star: f64, beta: f64, m: f64 },
    Ramp { delta: f64, epsilon: f64, k_speed: f64, xi_anchor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub constants: CertificateConstants,
    /// Smallest signed residual: R for a supersolution, -R for a subsolution.
    pub worst_residual_sign_margin: f64,
    pub tolerance: f64,
    pub probe_count: usize,
    pub pass: bool,
}

fn min_neg_df(b: &Bistable, lo: f64, hi: f64) -> f64 {
    sample_min(lo, hi, |u| -b.eval_df(u))
}

/// Largest delta with min -f' >= beta on [1 - 2 delta, 1 + delta] and on [-delta, 2 delta].
pub fn delta_star(b: &Bistable) -> Result<f64, WaveError> {
    let beta = b.beta()?;
    let ok = |d: f64| min_neg_df(b, 1.0 - 2.0 * d, 1.0 + d) >= beta && min_neg_df(b, -d, 2.0 * d) >= beta;
    if !ok(1e-9) {
        return Err(WaveError::Certify("no positive delta_* satisfies the slope conditions".into()));
    }
    let (mut lo, mut hi) = (1e-9, 0.5);
    if ok(hi) {
        return Ok(hi);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn certification_tolerance(w: &WaveExtraction) -> f64 {
    (3.0 * w.residual_sup).max(1e-5)
}

pub fn probe_times() -> Vec<f64> {
    (0..13).map(|k| 0.01 * 300f64.powf(k as f64 / 12.0)).collect()
}

/// Certificate pair (supersolution, subsolution) for w^+- = U(x - ct +- sigma* delta (1 - e^{-beta t})) +- delta e^{-beta t}.
pub fn certify_wave_pair(w: &WaveExtraction, b: &Bistable, delta: Option<f64>) -> Result<(Certificate, Certificate), WaveError> {
    let beta = b.beta()?;
    let ds = delta_star(b)?;
    let delta = delta.unwrap_or(0.5 * ds);
    if !(delta > 0.0) || delta > ds {
        return Err(WaveError::DeltaTooLarge { delta, limit: ds });
    }
    let g = w.grid();
    let u = w.profile.values();
    let mut m = 0.0f64;
    for (i, &v) in u.iter().enumerate() {
        let x = g.x(i);
        if (x >= 0.0 && v <= 1.0 - ds) || (x <= 0.0 && v >= ds) {
            m = m.max(x.abs());
        }
    }
    m += g.dx();
    if -m < w.trusted.0 || m > w.trusted.1 {
        return Err(WaveError::Certify(format!("M = {m} leaves the trusted window")));
    }
    let mut inf_d = f64::INFINITY;
    for (i, &d) in w.derivative.iter().enumerate() {
        if g.x(i).abs() <= m {
            inf_d = inf_d.min(d);
        }
    }
    if !(inf_d > 0.0) {
        return Err(WaveError::Certify(format!("profile slope {inf_d} is not positive on [-M, M]")));
    }
    let fsup = b.df_sup_on(-1.0, 2.0);
    let sigma = (fsup + beta) / (beta * inf_d);
    let tol = certification_tolerance(w);
    let c = w.speed;
    let l = g.half_width();
    let mut sup_margin = f64::INFINITY;
    let mut sub_margin = f64::INFINITY;
    let mut count = 0;
    for t in probe_times() {
        let e = (-beta * t).exp();
        let drift = sigma * delta * (1.0 - e);
        for k in 0..41 {
            let x = -0.5 * l + l * k as f64 / 40.0;
            let (up, dup, dup_op) = w.eval(x - c * t + drift);
            let rp = dup * (-c + sigma * delta * beta * e) - delta * beta * e - dup_op - b.eval_f(up + delta * e);
            let (um, dum, dum_op) = w.eval(x - c * t - drift);
            let rm = dum * (-c - sigma * delta * beta * e) + delta * beta * e - dum_op - b.eval_f(um - delta * e);
            sup_margin = sup_margin.min(rp);
            sub_margin = sub_margin.min(-rm);
            count += 1;
        }
    }
    let constants = CertificateConstants::Wave { delta, delta_star: ds, sigma_star: sigma, beta, m };
    let mk = |kind, margin: f64| Certificate {
        kind,
        constants: constants.clone(),
        worst_residual_sign_margin: margin,
        tolerance: tol,
        probe_count: count,
        pass: margin >= -tol,
    };
    Ok((mk(CertificateKind::WaveSupersolution, sup_margin), mk(CertificateKind::WaveSubsolution, sub_margin)))
}

/// Independent check of the selection inequalities behind an A certificate.
pub fn recheck_wave_pair(w: &WaveExtraction, b: &Bistable, cert: &Certificate) -> bool {
    let CertificateConstants::Wave { delta, delta_star, sigma_star, beta, m } = cert.constants else {
        return false;
    };
    let fine = |lo: f64, hi: f64| {
        let n = 20_000;
        (0..=n).map(|k| -b.eval_df(lo + (hi - lo) * k as f64 / n as f64)).fold(f64::INFINITY, f64::min)
    };
    let slopes = fine(1.0 - 2.0 * delta_star, 1.0 + delta_star) >= beta * (1.0 - 1e-9)
        && fine(-delta_star, 2.0 * delta_star) >= beta * (1.0 - 1e-9);
    let g = w.grid();
    let mut tails = true;
    let mut inf_d = f64::INFINITY;
    let mut fsup = 0.0f64;
    for (i, &v) in w.profile.values().iter().enumerate() {
        let x = g.x(i);
        if x >= m {
            tails &= v > 1.0 - delta_star;
        }
        if x <= -m {
            tails &= v < delta_star;
        }
        if x.abs() <= m {
            inf_d = inf_d.min(w.derivative[i]);
        }
    }
    for k in 0..=30_000 {
        fsup = fsup.max(b.eval_df(-1.0 + 3.0 * k as f64 / 30_000.0).abs());
    }
    let sigma_ok = sigma_star * (1.0 + 1e-6) >= (fsup + beta) / (beta * inf_d);
    slopes && tails && sigma_ok && delta <= delta_star && (beta - b.beta().unwrap_or(f64::NAN)).abs() < 1e-14
}

/// D zeta for the quintic ramp on [0, 4], sampled on a fine s-grid.
struct ZetaAction {
    grid: Grid,
    values: Option<Vec<f64>>,
}

impl ZetaAction {
    fn new(p: &RFParams) -> Result<Self, WaveError> {
        let grid = Grid::new(64.0, 8193)?;
        if p.alpha() == 2.0 {
            return Ok(ZetaAction { grid, values: None });
        }
        let r = zeta_ramp();
        let f = Field::from_fn(grid, 0.0, 1.0, |x| r.value(x))?;
        Ok(ZetaAction { grid, values: Some(apply(&f, p)?.into_values()) })
    }

    fn at(&self, s: f64) -> f64 {
        let x = s - 2.0;
        match &self.values {
            None => zeta_ramp().d2(x),
            Some(v) => crate::field_grid::cubic_at(v, &self.grid, x),
        }
    }
}

fn zeta(s: f64) -> f64 {
    smoothstep5((s / 4.0).clamp(0.0, 1.0))
}

fn zeta_d1(s: f64) -> f64 {
    if s <= 0.0 || s >= 4.0 {
        0.0
    } else {
        smoothstep5_d1(s / 4.0) / 4.0
    }
}

struct RampOutcome {
    epsilon: f64,
    k_speed: f64,
    margin: f64,
    count: usize,
}

/// Subsolution -delta + A(t) zeta(eps (x - K t)) with A = 1 - (1 - a - 2 delta) e^{-eps t}.
fn ramp_subsolution(b: &Bistable, p: &RFParams, delta: f64) -> Result<RampOutcome, WaveError> {
    let a = b.a();
    let alpha = p.alpha();
    let action = ZetaAction::new(p)?;
    let m_r = sample_min(-delta, -0.5 * delta, |u| b.eval_f(u)).min(sample_min(a + 0.5 * delta, 1.0 - delta, |u| b.eval_f(u)));
    if !(m_r > 0.0) {
        return Err(WaveError::Certify(format!("reaction margin {m_r} is not positive")));
    }
    let bound = |e: f64| rho(p, e * ZETA_D1_MAX, e * e * ZETA_D2_MAX) + e;
    let mut eps = 1.0;
    while bound(eps) > 0.5 * m_r {
        eps *= 0.5;
        if eps < 1e-8 {
            return Err(WaveError::NoEpsilon(eps));
        }
    }
    let ea = eps.powf(alpha);
    let residual = |s: f64, amp: f64, k: f64| {
        let z = zeta(s);
        eps * (1.0 - amp) * z - amp * eps * k * zeta_d1(s) - amp * ea * action.at(s) - b.eval_f(-delta + amp * z)
    };
    // Flat parts: the reaction alone has to carry the sign.
    let a0 = a + 2.0 * delta;
    let amps: Vec<f64> = (0..=40).map(|k| a0 + (1.0 - a0) * k as f64 / 40.0 * (1.0 - 1e-9)).collect();
    let mut k_req = 0.0f64;
    for &amp in &amps {
        for q in 1..800 {
            let s = 4.0 * q as f64 / 800.0;
            let d = zeta_d1(s);
            let num = residual(s, amp, 0.0);
            if d > 0.0 && num > 0.0 {
                k_req = k_req.max(num / (amp * eps * d));
            }
        }
    }
    let k_speed = 1.25 * k_req + 1e-3;
    let t_top = 7.0 / eps;
    let mut times = vec![0.0];
    times.extend((0..13).map(|k| 0.01 * t_top * 100f64.powf(k as f64 / 12.0)));
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for &t in &times {
        let amp = 1.0 - (1.0 - a - 2.0 * delta) * (-eps * t).exp();
        for q in 0..=160 {
            let s = -2.0 + 8.0 * q as f64 / 160.0;
            worst = worst.max(residual(s, amp, k_speed));
            count += 1;
        }
    }
    Ok(RampOutcome { epsilon: eps, k_speed, margin: -worst, count })
}

pub const RAMP_CERTIFICATE_TOLERANCE: f64 = 1e-5;

/// Certificate pair (supersolution, subsolution) built from the quintic ramp; no wave needed.
pub fn certify_ramp_pair(b: &Bistable, p: &RFParams, delta: f64) -> Result<(Certificate, Certificate), WaveError> {
    if !(p.alpha() > 1.0) {
        return Err(WaveError::Alpha { alpha: p.alpha(), what: "(1, 2]" });
    }
    let g = if b.is_normalized() { b.clone() } else { b.rescaled_unit()? };
    let limit = (0.5 * g.a()).min(0.5 * (1.0 - g.a()));
    if !(delta > 0.0) || delta > limit {
        return Err(WaveError::DeltaTooLarge { delta, limit });
    }
    let sub = ramp_subsolution(&g, p, delta)?;
    let sup = ramp_subsolution(&g.mirrored(), &p.reflected(), delta)?;
    let mk = |kind, o: &RampOutcome| Certificate {
        kind,
        constants: CertificateConstants::Ramp { delta, epsilon: o.epsilon, k_speed: o.k_speed, xi_anchor: 0.0 },
        worst_residual_sign_margin: o.margin,
        tolerance: RAMP_CERTIFICATE_TOLERANCE,
        probe_count: o.count,
        pass: o.margin >= -RAMP_CERTIFICATE_TOLERANCE,
    };
    Ok((mk(CertificateKind::RampSupersolution, &sup), mk(CertificateKind::RampSubsolution, &sub)))
}

/// Golden-section minimization of a unimodal function on [lo, hi].
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Coarse scan on [center - half, center + half] followed by golden-section refinement.
fn scan_min(f: impl Fn(f64) -> f64, center: f64, half: f64, steps: usize) -> (f64, f64) {
    let h = 2.0 * half / steps as f64;
    let mut best = (center, f64::INFINITY);
    for k in 0..=steps {
        let s = center - half + k as f64 * h;
        let v = f(s);
        if v < best.1 {
            best = (s, v);
        }
    }
    let refined = golden_min(&f, best.0 - h, best.0 + h, 1e-10);
    let at_center = f(center);
    if at_center <= refined.1 {
        (center, at_center)
    } else {
        refined
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub speeds: (f64, f64),
    pub speed_difference: f64,
    pub shift: f64,
    pub aligned_distance: f64,
}

/// Runs both seeds, extracts both waves and compares them after the best translation.
pub fn uniqueness_check(
    p: &RFParams,
    b: &Bistable,
    seeds: (&Field, &Field),
    cfg: &SolverConfig,
) -> Result<(UniquenessReport, WaveExtraction, WaveExtraction), WaveError> {
    for s in [seeds.0, seeds.1] {
        if !(s.tail_left() < b.a() && s.tail_right() > b.a()) {
            return Err(WaveError::Precondition(format!(
                "seed tails ({}, {}) must straddle a = {}",
                s.tail_left(),
                s.tail_right(),
                b.a()
            )));
        }
    }
    let w1 = extract_wave(&evolve(seeds.0, b, p, cfg)?, b, p)?;
    let w2 = extract_wave(&evolve(seeds.1, b, p, cfg)?, b, p)?;
    let lo = w1.trusted.0.max(w2.trusted.0);
    let hi = w1.trusted.1.min(w2.trusted.1);
    let g = *w1.grid();
    let pts: Vec<f64> = (0..g.n_points()).map(|i| g.x(i)).filter(|&x| x >= lo + 2.0 && x <= hi - 2.0).collect();
    let dist = |s: f64| pts.iter().map(|&x| (w1.profile.value_at(x) - w2.profile.value_at(x + s)).abs()).fold(0.0, f64::max);
    let (shift, d) = scan_min(dist, 0.0, 1.0, 40);
    let report = UniquenessReport {
        speeds: (w1.speed, w2.speed),
        speed_difference: (w1.speed - w2.speed).abs(),
        shift,
        aligned_distance: d,
    };
    Ok((report, w1, w2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityFit {
    pub kappa: Option<f64>,
    /// xi in u(x, t) ~ U(x - c t + xi) at the final snapshot.
    pub xi: f64,
    pub prefactor: Option<f64>,
    pub r2: Option<f64>,
    pub already_converged: bool,
    pub fit_window: Option<(f64, f64)>,
    pub distances: Vec<(f64, f64)>,
    pub shifts: Vec<f64>,
}

pub const CONVERGED_DISTANCE: f64 = 1e-6;

/// Evolves clamp(U + perturbation) and fits the decay of the distance to the translated wave.
pub fn stability_experiment(
    w: &WaveExtraction,
    perturbation: &Field,
    b: &Bistable,
    p: &RFParams,
    cfg: &SolverConfig,
) -> Result<StabilityFit, WaveError> {
    if perturbation.grid() != w.grid() {
        return Err(WaveError::Precondition("perturbation grid differs from the wave grid".into()));
    }
    let (lo_b, hi_b) = (b.u_minus(), b.u_plus());
    let vals: Vec<f64> =
        w.profile.values().iter().zip(perturbation.values()).map(|(u, q)| (u + q).clamp(lo_b, hi_b)).collect();
    let u0 = Field::new(*w.grid(), vals, lo_b + perturbation.tail_left(), hi_b + perturbation.tail_right())?
        .with_tail_tolerance(crate::cauchy_solver::SNAPSHOT_TAIL_TOLERANCE);
    if !(u0.tail_left() < b.a() && u0.tail_right() > b.a()) {
        return Err(WaveError::Precondition("perturbed data do not straddle a".into()));
    }
    let traj = evolve(&u0, b, p, cfg)?;
    let g = *w.grid();
    let l = g.half_width();
    let pts: Vec<f64> = (0..g.n_points()).map(|i| g.x(i)).filter(|x| x.abs() <= 0.5 * l).collect();
    let c = w.speed;
    let mut distances = Vec::with_capacity(traj.times.len());
    let mut shifts = Vec::with_capacity(traj.times.len());
    let mut guess = 0.0;
    for (&t, snap) in traj.times.iter().zip(&traj.snapshots) {
        let d = |xi: f64| {
            pts.iter()
                .map(|&x| (snap.value_at(x) - w.profile.value_at(x - c * t + xi)).abs())
                .fold(0.0, f64::max)
        };
        let (xi, s) = scan_min(d, guess, 2.0, 80);
        guess = xi;
        distances.push((t, s));
        shifts.push(xi);
    }
    let xi = *shifts.last().unwrap_or(&0.0);
    let first = distances[0].1;
    let last = distances.last().map(|q| q.1).unwrap_or(first);
    if first <= CONVERGED_DISTANCE {
        return Ok(StabilityFit {
            kappa: None,
            xi,
            prefactor: None,
            r2: None,
            already_converged: true,
            fit_window: None,
            distances,
            shifts,
        });
    }
    let decreased = distances.windows(2).any(|q| q[1].1 < q[0].1);
    if !decreased || last >= first {
        return Err(WaveError::NoConvergence { first, last });
    }
    let start = distances.iter().position(|q| q.1 <= 0.5 * first).unwrap_or(distances.len());
    let (mut ts, mut ls) = (Vec::new(), Vec::new());
    for q in &distances[start..] {
        if q.1 < CONVERGED_DISTANCE {
            break;
        }
        ts.push(q.0);
        ls.push(q.1.ln());
    }
    let fit = fit_line(&ts, &ls);
    Ok(StabilityFit {
        kappa: fit.as_ref().map(|f| -f.slope),
        xi,
        prefactor: fit.as_ref().map(|f| f.intercept.exp()),
        r2: fit.as_ref().map(|f| f.r2),
        already_converged: false,
        fit_window: if ts.len() >= 2 { Some((ts[0], ts[ts.len() - 1])) } else { None },
        distances,
        shifts,
    })
}
