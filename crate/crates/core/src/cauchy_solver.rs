//! Time stepping for u_t = D^alpha_theta u + f(u) with settled tails.
//!
//! The state is split as u = B(t) + w with B = u_l(t) + (u_r(t) - u_l(t)) zeta(x), zeta the reference
//! ramp and u_l, u_r following the scalar ODE u' = f(u). The remainder w vanishes at the tails and is
//! advanced by exponential time differencing on a zero-padded periodic array.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field_grid::{Field, Grid, GridError, Ramp};
use crate::nonlinearity::{Bistable, ClampedBistable};
use crate::riesz_feller::{ramp_action, OperatorError, RFParams};
use crate::spectral::{next_pow2, wavenumber, FftPair};
use crate::stable_kernel::{build_default, ConvolutionPlan, KernelError, KernelTable};

/// Snapshot fields keep their tails only up to this relative slack.
pub const SNAPSHOT_TAIL_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("the reaction solver needs 1 < alpha <= 2, got alpha = {0}")]
    Alpha(f64),
    #[error("initial data leave [{lo}, {hi}]: range [{min}, {max}]")]
    OutOfRange { lo: f64, hi: f64, min: f64, max: f64 },
    #[error("blow-up at t = {t}: range [{min}, {max}]")]
    BlowUp { t: f64, min: f64, max: f64 },
    #[error("initial data are not ordered: u0 - v0 = {gap} at index {index}")]
    NotOrdered { index: usize, gap: f64 },
    #[error("Picard horizon T = {0} exceeds 0.5")]
    PicardHorizon(f64),
    #[error("Picard iterates diverge: distance {next} after {prev} at sweep {sweep}")]
    Divergence { sweep: usize, prev: f64, next: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub trait Reaction: Sync {
    fn f(&self, u: f64) -> f64;
    fn df(&self, u: f64) -> f64;
}

impl Reaction for Bistable {
    fn f(&self, u: f64) -> f64 {
        self.eval_f(u)
    }
    fn df(&self, u: f64) -> f64 {
        self.eval_df(u)
    }
}

impl Reaction for ClampedBistable {
    fn f(&self, u: f64) -> f64 {
        self.eval_f(u)
    }
    fn df(&self, u: f64) -> f64 {
        self.eval_df(u)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoReaction;

impl Reaction for NoReaction {
    fn f(&self, _: f64) -> f64 {
        0.0
    }
    fn df(&self, _: f64) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Etd1,
    #[default]
    Etd2rk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub snapshot_stride: usize,
    pub scheme: Scheme,
    pub clamp_reaction: bool,
}

impl SolverConfig {
    /// Snapshots every 0.1 time units, ETD2RK, clamped reaction.
    pub fn new(dt: f64, t_final: f64) -> Self {
        SolverConfig {
            dt,
            t_final,
            snapshot_stride: default_stride(dt),
            scheme: Scheme::Etd2rk,
            clamp_reaction: true,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp_reaction = clamp;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SolverError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(SolverError::Config(format!("T = {} must be at least dt = {}", self.t_final, self.dt)));
        }
        if self.snapshot_stride == 0 {
            return Err(SolverError::Config("snapshot_stride must be at least 1".into()));
        }
        Ok(())
    }

    fn steps(&self) -> (usize, f64) {
        let n = (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }
}

pub fn default_stride(dt: f64) -> usize {
    ((0.1 / dt).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: f64,
    pub min: f64,
    pub max: f64,
    pub tail_left: f64,
    pub tail_right: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub log: Vec<StepLog>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    alpha: f64,
    theta: f64,
    config: &'a SolverConfig,
    times: &'a [f64],
    files: Vec<String>,
    log: &'a [StepLog],
}

impl Trajectory {
    pub fn final_field(&self) -> &Field {
        self.snapshots.last().expect("trajectory has at least the initial snapshot")
    }

    pub fn grid(&self) -> &Grid {
        self.snapshots[0].grid()
    }

    /// Snapshot recorded closest to `t`.
    pub fn at_time(&self, t: f64) -> (f64, &Field) {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        (self.times[i], &self.snapshots[i])
    }

    /// One `snapshot_NNNNN.csv` per recorded time plus `trajectory.json`.
    pub fn write_to(&self, dir: &Path, p: &RFParams, cfg: &SolverConfig) -> Result<(), SolverError> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.snapshots.len());
        for (i, s) in self.snapshots.iter().enumerate() {
            let name = format!("snapshot_{i:05}.csv");
            s.write_csv(std::io::BufWriter::new(fs::File::create(dir.join(&name))?))?;
            files.push(name);
        }
        let manifest = Manifest {
            alpha: p.alpha(),
            theta: p.theta(),
            config: cfg,
            times: &self.times,
            files,
            log: &self.log,
        };
        fs::write(dir.join("trajectory.json"), crate::export::json_string(&manifest)?)?;
        Ok(())
    }
}

fn phi_series(z: Complex64, shift: usize) -> Complex64 {
    // sum_k z^k / (k + shift)!
    let mut term = Complex64::new(1.0, 0.0);
    for k in 1..=shift {
        term /= k as f64;
    }
    let mut acc = term;
    for k in 1..12 {
        term = term * z / (k + shift) as f64;
        acc += term;
    }
    acc
}

pub(crate) fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.1 {
        phi_series(z, 1)
    } else {
        (z.exp() - 1.0) / z
    }
}

pub(crate) fn phi2(z: Complex64) -> Complex64 {
    if z.norm() < 0.1 {
        phi_series(z, 2)
    } else {
        (z.exp() - 1.0 - z) / (z * z)
    }
}

fn rk4_step<R: Reaction + ?Sized>(r: &R, u: f64, dt: f64) -> f64 {
    let k1 = r.f(u);
    let k2 = r.f(u + 0.5 * dt * k1);
    let k3 = r.f(u + 0.5 * dt * k2);
    let k4 = r.f(u + dt * k3);
    u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Padded periodic layout: indices below `n + pad_right` sit at -L + j h, the rest wrap to the left.
struct Layout {
    grid: Grid,
    len: usize,
    zeta: Vec<f64>,
    ramp_action: Vec<f64>,
}

impl Layout {
    fn new(grid: &Grid, p: &RFParams) -> Result<Self, SolverError> {
        let n = grid.n_points();
        let h = grid.dx();
        let len = next_pow2(2 * n);
        let extra = len - n;
        let pad_right = extra.div_ceil(2);
        let pad_left = extra - pad_right;
        let pad = pad_left.max(pad_right);
        let ext = Grid::new(grid.half_width() + pad as f64 * h, n + 2 * pad)?;
        let ramp = Ramp::reference(grid);
        let action = ramp_action(&ext, &ramp, p)?;
        let mut zeta = vec![0.0; len];
        let mut ramp_act = vec![0.0; len];
        for j in 0..len {
            let (x, e) = if j < n + pad_right {
                (grid.x(j), j + pad)
            } else {
                (-grid.half_width() - (len - j) as f64 * h, pad - (len - j))
            };
            zeta[j] = ramp.value(x);
            ramp_act[j] = action[e];
        }
        Ok(Layout { grid: *grid, len, zeta, ramp_action: ramp_act })
    }

    fn forcing<R: Reaction + ?Sized>(&self, r: &R, w: &[f64], tl: f64, tr: f64, out: &mut [Complex64]) {
        let jump = tr - tl;
        let fl = r.f(tl);
        let fr = r.f(tr);
        for j in 0..self.len {
            let z = self.zeta[j];
            let b = tl + jump * z;
            let v = jump * self.ramp_action[j] + r.f(b + w[j]) - (fl * (1.0 - z) + fr * z);
            out[j] = Complex64::new(v, 0.0);
        }
    }

    fn field(&self, w: &[f64], tl: f64, tr: f64) -> Result<Field, GridError> {
        let jump = tr - tl;
        let vals = (0..self.grid.n_points()).map(|j| tl + jump * self.zeta[j] + w[j]).collect();
        Ok(Field::new(self.grid, vals, tl, tr)?.with_tail_tolerance(SNAPSHOT_TAIL_TOLERANCE))
    }
}

pub fn evolve(u0: &Field, b: &Bistable, p: &RFParams, cfg: &SolverConfig) -> Result<Trajectory, SolverError> {
    check_range(u0, b.u_minus() - 0.5, b.u_plus() + 0.5)?;
    let bounds = (b.u_minus() - 1.0, b.u_plus() + 1.0);
    if cfg.clamp_reaction {
        evolve_with(u0, &b.clamp(), p, cfg, bounds)
    } else {
        evolve_with(u0, b, p, cfg, bounds)
    }
}

fn check_range(u0: &Field, lo: f64, hi: f64) -> Result<(), SolverError> {
    let (min, max) = (u0.min(), u0.max());
    if min < lo || max > hi || !min.is_finite() || !max.is_finite() {
        return Err(SolverError::OutOfRange { lo, hi, min, max });
    }
    Ok(())
}

/// Evolution with an arbitrary reaction; `bounds` is the blow-up box.
pub fn evolve_with<R: Reaction + ?Sized>(
    u0: &Field,
    r: &R,
    p: &RFParams,
    cfg: &SolverConfig,
    bounds: (f64, f64),
) -> Result<Trajectory, SolverError> {
    cfg.validate()?;
    if !(p.alpha() > 1.0) {
        return Err(SolverError::Alpha(p.alpha()));
    }
    u0.check_settled()?;
    let grid = *u0.grid();
    let layout = Layout::new(&grid, p)?;
    let len = layout.len;
    let h = grid.dx();
    let (steps, dt) = cfg.steps();

    let mut expo = Vec::with_capacity(len);
    let mut c1 = Vec::with_capacity(len);
    let mut c2 = Vec::with_capacity(len);
    for j in 0..len {
        let z = p.multiplier(wavenumber(j, len, h), j == len / 2) * dt;
        expo.push(z.exp());
        c1.push(phi1(z) * dt);
        c2.push(phi2(z) * dt);
    }

    let fft = FftPair::new(len);
    let (mut tl, mut tr) = (u0.tail_left(), u0.tail_right());
    let mut w = vec![0.0; len];
    {
        let jump = tr - tl;
        for (i, v) in u0.values().iter().enumerate() {
            w[i] = v - tl - jump * layout.zeta[i];
        }
    }
    let mut w_hat: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut w_hat);

    let first = layout.field(&w, tl, tr)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        log: vec![StepLog { t: 0.0, min: first.min(), max: first.max(), tail_left: tl, tail_right: tr }],
        snapshots: vec![first],
    };
    let mut n_hat = vec![Complex64::new(0.0, 0.0); len];
    let mut a_hat = vec![Complex64::new(0.0, 0.0); len];
    let mut na_hat = vec![Complex64::new(0.0, 0.0); len];
    let mut a = vec![0.0; len];

    for step in 1..=steps {
        let t = step as f64 * dt;
        layout.forcing(r, &w, tl, tr, &mut n_hat);
        fft.forward(&mut n_hat);
        let tl_next = rk4_step(r, tl, dt);
        let tr_next = rk4_step(r, tr, dt);
        for j in 0..len {
            a_hat[j] = expo[j] * w_hat[j] + c1[j] * n_hat[j];
        }
        match cfg.scheme {
            Scheme::Etd1 => w_hat.copy_from_slice(&a_hat),
            Scheme::Etd2rk => {
                na_hat.copy_from_slice(&a_hat);
                fft.inverse(&mut na_hat);
                for (dst, z) in a.iter_mut().zip(&na_hat) {
                    *dst = z.re;
                }
                layout.forcing(r, &a, tl_next, tr_next, &mut na_hat);
                fft.forward(&mut na_hat);
                for j in 0..len {
                    w_hat[j] = a_hat[j] + c2[j] * (na_hat[j] - n_hat[j]);
                }
            }
        }
        tl = tl_next;
        tr = tr_next;
        a_hat.copy_from_slice(&w_hat);
        fft.inverse(&mut a_hat);
        for (dst, z) in w.iter_mut().zip(&a_hat) {
            *dst = z.re;
        }

        let jump = tr - tl;
        let (mut min, mut max) = (tl.min(tr), tl.max(tr));
        let mut finite = true;
        for i in 0..grid.n_points() {
            let v = tl + jump * layout.zeta[i] + w[i];
            finite &= v.is_finite();
            min = min.min(v);
            max = max.max(v);
        }
        traj.log.push(StepLog { t, min, max, tail_left: tl, tail_right: tr });
        if !finite || min < bounds.0 || max > bounds.1 {
            return Err(SolverError::BlowUp { t, min, max });
        }
        if step % cfg.snapshot_stride == 0 || step == steps {
            traj.times.push(t);
            traj.snapshots.push(layout.field(&w, tl, tr)?);
        }
    }
    Ok(traj)
}

/// RK4 for u' = f(u) with step 1e-3, sampled at every step.
pub fn far_field_ode(u_limit: f64, b: &Bistable, t_final: f64) -> (Vec<f64>, Vec<f64>) {
    far_field_ode_with(u_limit, b, t_final, 1e-3)
}

pub fn far_field_ode_with<R: Reaction + ?Sized>(u: f64, r: &R, t_final: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let steps = (t_final / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps > 0 { t_final / steps as f64 } else { 0.0 };
    let mut times = vec![0.0];
    let mut vals = vec![u];
    let mut v = u;
    for k in 1..=steps {
        v = rk4_step(r, v, h);
        times.push(k as f64 * h);
        vals.push(v);
    }
    (times, vals)
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    pub field: Field,
    /// sup over time nodes of |u^{k+1} - u^k| per sweep.
    pub increments: Vec<f64>,
}

pub const PICARD_NODES: usize = 64;

pub fn picard_iterate(u0: &Field, b: &Bistable, p: &RFParams, t_final: f64, n_iter: usize) -> Result<PicardResult, SolverError> {
    let k = build_default(p)?;
    picard_iterate_with(&k, u0, &b.clamp(), t_final, n_iter)
}

/// Picard sweeps of u(t) = S_t u0 + int_0^t S_{t - tau} f(u(tau)) dtau on 64 trapezoid intervals,
/// with S_t the convolution plan of the table (fields frozen to their tails outside the grid).
pub fn picard_iterate_with<R: Reaction + ?Sized>(
    k: &KernelTable,
    u0: &Field,
    r: &R,
    t_final: f64,
    n_iter: usize,
) -> Result<PicardResult, SolverError> {
    if !(t_final > 0.0 && t_final <= 0.5) {
        return Err(SolverError::PicardHorizon(t_final));
    }
    if n_iter == 0 {
        return Err(SolverError::Config("n_iter must be at least 1".into()));
    }
    u0.check_settled()?;
    let grid = *u0.grid();
    let n = grid.n_points();
    let m = PICARD_NODES;
    let dtau = t_final / m as f64;
    let plans: Vec<ConvolutionPlan> =
        (1..=m).map(|lag| ConvolutionPlan::new(k, &grid, lag as f64 * dtau)).collect::<Result<_, _>>()?;
    let fft = plans[0].fft().clone();
    let len = fft.len();

    // S_{t_i} u0 is fixed across sweeps.
    let mut free: Vec<Vec<f64>> = vec![u0.values().to_vec()];
    for plan in &plans {
        free.push(plan.apply(u0)?.into_values());
    }

    let mut current: Vec<Vec<f64>> = vec![u0.values().to_vec(); m + 1];
    let mut tails: Vec<(f64, f64)> = vec![(u0.tail_left(), u0.tail_right()); m + 1];
    let mut increments = Vec::new();
    for sweep in 0..n_iter {
        let mut spectra = Vec::with_capacity(m + 1);
        let mut ftails = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let (fl, fr) = (r.f(tails[j].0), r.f(tails[j].1));
            let shifted: Vec<f64> = current[j].iter().map(|&v| r.f(v) - fl).collect();
            spectra.push(plans[0].transform(&shifted));
            ftails.push((fl, fr));
        }
        let mut next = vec![u0.values().to_vec()];
        let mut next_tails = vec![tails[0]];
        let mut delta = 0.0f64;
        for i in 1..=m {
            let mut acc = vec![Complex64::new(0.0, 0.0); len];
            let mut local = vec![0.0; n];
            let mut tl = u0.tail_left();
            let mut tr = u0.tail_right();
            for j in 0..=i {
                let wgt = if j == 0 || j == i { 0.5 * dtau } else { dtau };
                let (fl, fr) = ftails[j];
                tl += wgt * fl;
                tr += wgt * fr;
                if j == i {
                    for (v, &u) in local.iter_mut().zip(&current[j]) {
                        *v += wgt * r.f(u);
                    }
                    continue;
                }
                let plan = &plans[i - j - 1];
                for ((a, s), w) in acc.iter_mut().zip(&spectra[j]).zip(plan.weights_hat()) {
                    *a += wgt * s * w;
                }
                let bnd = plan.boundary();
                for (q, v) in local.iter_mut().enumerate() {
                    *v += wgt * (fl + (fr - fl) * bnd[q]);
                }
            }
            fft.inverse(&mut acc);
            let vals: Vec<f64> = (0..n).map(|q| free[i][q] + acc[q].re + local[q]).collect();
            for (a, b) in vals.iter().zip(&current[i]) {
                delta = delta.max((a - b).abs());
            }
            next.push(vals);
            next_tails.push((tl, tr));
        }
        if let Some(&prev) = increments.last() {
            if delta > prev && delta > 1e-13 {
                return Err(SolverError::Divergence { sweep, prev, next: delta });
            }
        }
        increments.push(delta);
        current = next;
        tails = next_tails;
    }
    let (tl, tr) = tails[m];
    let field = Field::new(grid, current.pop().unwrap_or_default(), tl, tr)?.with_tail_tolerance(SNAPSHOT_TAIL_TOLERANCE);
    Ok(PicardResult { field, increments })
}

/// e^{-K2 t} times the minimum of G(., t) over [-m - 1, m].
pub fn eta_lower_bound(m: f64, t: f64, k2: f64, k: &KernelTable) -> f64 {
    let samples = 400;
    let lo = -m - 1.0;
    let mut best = k.eval_unchecked(lo, t).min(k.eval_unchecked(m, t));
    for i in 1..samples {
        let z = lo + (m + 1.0) * i as f64 / samples as f64;
        best = best.min(k.eval_unchecked(z, t));
    }
    (-k2 * t).exp() * best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaCheck {
    pub x: f64,
    pub t: f64,
    pub gap: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    /// min over the grid of v - u at each snapshot.
    pub min_gap: Vec<f64>,
    /// Largest violation scaled by max(1, sup|v - u|) over all steps.
    pub worst_scaled_violation: f64,
    pub ordered: bool,
    pub k2: f64,
    /// int_0^1 (v0 - u0).
    pub initial_mass: f64,
    pub eta_checks: Vec<EtaCheck>,
}

pub const ORDER_TOLERANCE: f64 = 1e-8;

pub fn compare_evolutions(
    u0: &Field,
    v0: &Field,
    b: &Bistable,
    p: &RFParams,
    cfg: &SolverConfig,
    k: &KernelTable,
) -> Result<ComparisonReport, SolverError> {
    if u0.grid() != v0.grid() {
        return Err(SolverError::Config("initial data on different grids".into()));
    }
    for (index, (a, b)) in u0.values().iter().zip(v0.values()).enumerate() {
        if a > b {
            return Err(SolverError::NotOrdered { index, gap: a - b });
        }
    }
    let tu = evolve(u0, b, p, cfg)?;
    let tv = evolve(v0, b, p, cfg)?;
    let mut min_gap = Vec::with_capacity(tu.times.len());
    let mut worst = 0.0f64;
    for (su, sv) in tu.snapshots.iter().zip(&tv.snapshots) {
        let mut lo = f64::INFINITY;
        let mut sup = 0.0f64;
        for (a, b) in su.values().iter().zip(sv.values()) {
            lo = lo.min(b - a);
            sup = sup.max((b - a).abs());
        }
        min_gap.push(lo);
        worst = worst.max(-lo / sup.max(1.0));
    }

    let reaction = b.clamp();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for l in tu.log.iter().chain(&tv.log) {
        lo = lo.min(l.min);
        hi = hi.max(l.max);
    }
    let mut k2 = 0.0f64;
    let samples = 2000;
    for i in 0..=samples {
        let u = lo + (hi - lo) * i as f64 / samples as f64;
        k2 = k2.max(reaction.eval_df(u).abs());
    }
    k2 += 1.0;

    let h = u0.grid().dx();
    let mass_points = ((1.0 / h).ceil() as usize).max(16) * 4;
    let initial_mass = {
        let d = |x: f64| v0.value_at(x) - u0.value_at(x);
        let step = 1.0 / mass_points as f64;
        (0..=mass_points)
            .map(|i| {
                let w = if i == 0 || i == mass_points { 0.5 } else { 1.0 };
                w * d(i as f64 * step)
            })
            .sum::<f64>()
            * step
    };

    let mut eta_checks = Vec::new();
    for t in [0.5, 1.0] {
        if t > cfg.t_final + 1e-12 {
            continue;
        }
        let (ts, su) = tu.at_time(t);
        let sv = &tv.snapshots[tu.times.iter().position(|&x| x == ts).unwrap_or(0)];
        for x in [-5.0, 0.0, 5.0] {
            let gap = sv.value_at(x) - su.value_at(x);
            let bound = eta_lower_bound(f64::abs(x), ts, k2, k) * initial_mass;
            eta_checks.push(EtaCheck { x, t: ts, gap, bound, pass: gap >= bound });
        }
    }
    Ok(ComparisonReport {
        ordered: worst <= ORDER_TOLERANCE,
        times: tu.times.clone(),
        min_gap,
        worst_scaled_violation: worst,
        k2,
        initial_mass,
        eta_checks,
    })
}
