//! Uniform grids on [-L, L], sampled fields with constant far-field tails, and
//! the ramp/perturbation split that lets decaying parts go through FFTs.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default boundary tolerance, relative to |tail_right - tail_left| (absolute for equal tails).
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("half width must be positive and finite, got {0}")]
    NonPositiveHalfWidth(f64),
    #[error("need at least {min} grid points, got {got}")]
    TooFewPoints { got: usize, min: usize },
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("{side} boundary sample {value} is farther than {tolerance:e} from the declared tail {tail}")]
    UnsettledTail { side: &'static str, value: f64, tail: f64, tolerance: f64 },
    #[error("shift {shift} is not below half the half width ({limit})")]
    ExcessiveShift { shift: f64, limit: f64 },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform grid x_i = -L + i dx, i = 0..n, with dx = 2L / (n - 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n_points: usize,
    dx: f64,
}

impl Grid {
    /// Any grid with at least two points. [`make_grid`] applies the stricter production minimum.
    pub fn new(half_width: f64, n_points: usize) -> Result<Self, GridError> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(GridError::NonPositiveHalfWidth(half_width));
        }
        if n_points < 2 {
            return Err(GridError::TooFewPoints { got: n_points, min: 2 });
        }
        let dx = 2.0 * half_width / (n_points - 1) as f64;
        Ok(Grid { half_width, n_points, dx })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Hashable identity of the grid.
    pub fn key(&self) -> (u64, usize) {
        (self.half_width.to_bits(), self.n_points)
    }

    /// Index of the last node at or left of `x`, clamped to the valid cell range.
    pub fn cell_of(&self, x: f64) -> usize {
        let r = ((x + self.half_width) / self.dx).floor();
        if r <= 0.0 {
            0
        } else {
            (r as usize).min(self.n_points - 2)
        }
    }
}

pub fn make_grid(half_width: f64, n_points: usize) -> Result<Grid, GridError> {
    if n_points < 16 {
        return Err(GridError::TooFewPoints { got: n_points, min: 16 });
    }
    Grid::new(half_width, n_points)
}

/// Quintic smoothstep 6t^5 - 15t^4 + 10t^3, clamped to [0, 1] outside the unit interval.
pub fn smoothstep5(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

pub fn smoothstep5_d1(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

pub fn smoothstep5_d2(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
    }
}

/// Smoothstep rising from 0 at `start` to 1 at `start + width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub start: f64,
    pub width: f64,
}

impl Ramp {
    /// The background ramp of a grid: rises across the middle half of the domain.
    pub fn reference(grid: &Grid) -> Self {
        Ramp { start: -0.5 * grid.half_width(), width: grid.half_width() }
    }

    pub fn value(&self, x: f64) -> f64 {
        smoothstep5((x - self.start) / self.width)
    }

    pub fn d1(&self, x: f64) -> f64 {
        smoothstep5_d1((x - self.start) / self.width) / self.width
    }

    pub fn d2(&self, x: f64) -> f64 {
        smoothstep5_d2((x - self.start) / self.width) / (self.width * self.width)
    }

    pub fn key(&self) -> (u64, u64) {
        (self.start.to_bits(), self.width.to_bits())
    }
}

/// Samples on a grid plus the constants the field takes for x < -L and x > L.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    tail_left: f64,
    tail_right: f64,
    tail_tolerance: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, tail_left: f64, tail_right: f64) -> Result<Self, GridError> {
        if values.len() != grid.n_points() {
            return Err(GridError::LengthMismatch { expected: grid.n_points(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        if !tail_left.is_finite() || !tail_right.is_finite() {
            return Err(GridError::NonFinite(usize::MAX));
        }
        Ok(Field { grid, values, tail_left, tail_right, tail_tolerance: DEFAULT_TAIL_TOLERANCE })
    }

    /// Samples `f` on the grid; tails are the given constants.
    pub fn from_fn(grid: Grid, tail_left: f64, tail_right: f64, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        Field::new(grid, grid.coords().into_iter().map(f).collect(), tail_left, tail_right)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.n_points()],
            tail_left: c,
            tail_right: c,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }

    pub fn with_tail_tolerance(mut self, tol: f64) -> Self {
        self.tail_tolerance = tol;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn tail_left(&self) -> f64 {
        self.tail_left
    }

    pub fn tail_right(&self) -> f64 {
        self.tail_right
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    /// Absolute slack allowed between boundary samples and tails.
    pub fn tail_slack(&self) -> f64 {
        let jump = (self.tail_right - self.tail_left).abs();
        if jump > 0.0 {
            self.tail_tolerance * jump
        } else {
            self.tail_tolerance
        }
    }

    pub fn check_settled(&self) -> Result<(), GridError> {
        let tol = self.tail_slack();
        let first = self.values[0];
        let last = self.values[self.values.len() - 1];
        if (first - self.tail_left).abs() > tol {
            return Err(GridError::UnsettledTail { side: "left", value: first, tail: self.tail_left, tolerance: tol });
        }
        if (last - self.tail_right).abs() > tol {
            return Err(GridError::UnsettledTail { side: "right", value: last, tail: self.tail_right, tolerance: tol });
        }
        Ok(())
    }

    pub fn is_settled(&self) -> bool {
        self.check_settled().is_ok()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cubic interpolation at `x`; outside [-L, L] the tail constants.
    pub fn value_at(&self, x: f64) -> f64 {
        let l = self.grid.half_width();
        if x < -l {
            return self.tail_left;
        }
        if x > l {
            return self.tail_right;
        }
        cubic_at(&self.values, &self.grid, x)
    }

    /// Same samples with new tails, unchecked against the boundary.
    pub fn with_tails(mut self, tail_left: f64, tail_right: f64) -> Self {
        self.tail_left = tail_left;
        self.tail_right = tail_right;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            tail_left: f(self.tail_left),
            tail_right: f(self.tail_right),
            tail_tolerance: self.tail_tolerance,
        }
    }

    /// CSV with header `x,u` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        writeln!(w, "x,u")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e}", self.grid.x(i), v)?;
        }
        Ok(())
    }

    /// Reads the `x,u` format back. Tails are taken from the boundary samples.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Field, GridError> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim) != Some("x,u") {
            return Err(GridError::Csv("missing x,u header".into()));
        }
        let mut xs = Vec::new();
        let mut us = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64, GridError> {
                s.ok_or_else(|| GridError::Csv(format!("row {k} has too few columns")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| GridError::Csv(format!("row {k}: {e}")))
            };
            xs.push(parse(parts.next())?);
            us.push(parse(parts.next())?);
        }
        if xs.len() < 2 {
            return Err(GridError::Csv("fewer than two rows".into()));
        }
        let grid = Grid::new(-xs[0], xs.len())?;
        let last = *xs.last().unwrap();
        if (last - grid.half_width()).abs() > 1e-9 * grid.half_width().max(1.0) {
            return Err(GridError::Csv("grid is not symmetric about the origin".into()));
        }
        let tl = us[0];
        let tr = *us.last().unwrap();
        Field::new(grid, us, tl, tr)
    }
}

/// Four-point Lagrange interpolation of grid samples; the stencil is kept inside the grid.
pub(crate) fn cubic_at(values: &[f64], grid: &Grid, x: f64) -> f64 {
    let n = values.len();
    if n < 4 {
        let j = grid.cell_of(x);
        let u = (x - grid.x(j)) / grid.dx();
        return values[j] * (1.0 - u) + values[j + 1] * u;
    }
    let j = grid.cell_of(x);
    let s = j.saturating_sub(1).min(n - 4);
    let u = (x - grid.x(s)) / grid.dx();
    lagrange4(&values[s..s + 4], u)
}

/// Lagrange interpolation through samples at 0, 1, 2, 3 evaluated at `u`.
#[inline]
pub(crate) fn lagrange4(p: &[f64], u: f64) -> f64 {
    let a = u;
    let b = u - 1.0;
    let c = u - 2.0;
    let d = u - 3.0;
    -p[0] * b * c * d / 6.0 + p[1] * a * c * d / 2.0 - p[2] * a * b * d / 2.0 + p[3] * a * b * c / 6.0
}

/// Background ramp from tail_left to tail_right and the decaying remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub background: Field,
    pub perturbation: Field,
    pub ramp: Ramp,
}

impl Decomposition {
    pub fn recombine(&self) -> Field {
        let values = self
            .background
            .values()
            .iter()
            .zip(self.perturbation.values())
            .map(|(b, p)| b + p)
            .collect();
        Field {
            grid: self.background.grid,
            values,
            tail_left: self.background.tail_left,
            tail_right: self.background.tail_right,
            tail_tolerance: self.background.tail_tolerance,
        }
    }
}

pub fn decompose(field: &Field) -> Result<Decomposition, GridError> {
    field.check_settled()?;
    let grid = *field.grid();
    let ramp = Ramp::reference(&grid);
    let tl = field.tail_left();
    let jump = field.tail_right() - tl;
    let bg: Vec<f64> = (0..grid.n_points()).map(|i| tl + jump * ramp.value(grid.x(i))).collect();
    let pert: Vec<f64> = field.values().iter().zip(&bg).map(|(v, b)| v - b).collect();
    let background = Field {
        grid,
        values: bg,
        tail_left: tl,
        tail_right: field.tail_right(),
        tail_tolerance: field.tail_tolerance(),
    };
    let perturbation = Field { grid, values: pert, tail_left: 0.0, tail_right: 0.0, tail_tolerance: field.tail_tolerance() };
    Ok(Decomposition { background, perturbation, ramp })
}

/// Samples the field at x_i + s by cubic interpolation; points beyond [-L, L] take the tails.
pub fn shift_interpolate(field: &Field, s: f64) -> Result<Field, GridError> {
    let limit = 0.5 * field.grid().half_width();
    if !(s.abs() < limit) {
        return Err(GridError::ExcessiveShift { shift: s, limit });
    }
    if s == 0.0 {
        return Ok(field.clone());
    }
    let grid = *field.grid();
    let values = (0..grid.n_points()).map(|i| field.value_at(grid.x(i) + s)).collect();
    Ok(Field { values, ..field.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_coordinates() {
        let g = Grid::new(10.0, 5).unwrap();
        assert_eq!(g.dx(), 5.0);
        assert_eq!(g.coords(), vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
    }

    #[test]
    fn production_grid_spacing() {
        let g = make_grid(40.0, 4096).unwrap();
        assert!((g.dx() - 80.0 / 4095.0).abs() < 1e-15);
        assert!((g.dx() - 0.019536).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(make_grid(0.0, 16), Err(GridError::NonPositiveHalfWidth(_))));
        assert!(matches!(make_grid(1.0, 15), Err(GridError::TooFewPoints { .. })));
        assert!(Grid::new(-1.0, 10).is_err());
    }

    #[test]
    fn smoothstep_constants() {
        assert_eq!(smoothstep5(0.5), 0.5);
        assert!((smoothstep5_d1(0.5) - 1.875).abs() < 1e-15);
        let r = Ramp { start: -2.0, width: 4.0 };
        assert_eq!(r.value(0.0), 0.5);
        assert!((r.d1(0.0) - 0.46875).abs() < 1e-15);
    }

    #[test]
    fn decompose_constant() {
        let g = make_grid(10.0, 64).unwrap();
        let f = Field::constant(g, 0.7);
        let d = decompose(&f).unwrap();
        assert!(d.background.values().iter().all(|&v| v == 0.7));
        assert!(d.perturbation.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decompose_step_has_clean_boundary() {
        let g = make_grid(40.0, 2048).unwrap();
        let f = Field::from_fn(g, 0.0, 1.0, |x| 0.5 * (1.0 + (x / 2.0).tanh())).unwrap();
        let d = decompose(&f).unwrap();
        let p = d.perturbation.values();
        assert!(p[0].abs() <= 1e-10 && p[p.len() - 1].abs() <= 1e-10);
        assert_eq!(d.perturbation.tail_left(), 0.0);
        let back = d.recombine();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn decompose_rejects_unsettled() {
        let g = make_grid(10.0, 64).unwrap();
        let mut v = vec![0.0; 64];
        v[0] = 0.2;
        let f = Field::new(g, v, 0.0, 0.0).unwrap();
        assert!(matches!(decompose(&f), Err(GridError::UnsettledTail { .. })));
    }

    #[test]
    fn shift_identity_and_linear_exactness() {
        let g = make_grid(10.0, 101).unwrap();
        let f = Field::from_fn(g, -10.0, 10.0, |x| x).unwrap();
        assert_eq!(shift_interpolate(&f, 0.0).unwrap(), f);
        let s = shift_interpolate(&f, g.dx()).unwrap();
        for i in 0..100 {
            assert!((s.values()[i] - f.values()[i + 1]).abs() < 1e-12);
        }
        assert!(shift_interpolate(&f, 5.0).is_err());
    }

    #[test]
    fn shift_of_sine() {
        let g = make_grid(40.0, 4096).unwrap();
        let f = Field::from_fn(g, 0.0, 0.0, f64::sin).unwrap();
        let s = shift_interpolate(&f, 0.37).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..g.n_points() {
            let x = g.x(i);
            if x + 0.37 <= 40.0 {
                worst = worst.max((s.values()[i] - (x + 0.37).sin()).abs());
            }
        }
        assert!(worst <= 1e-6, "{worst}");
    }

    #[test]
    fn csv_roundtrip() {
        let g = make_grid(3.0, 17).unwrap();
        let f = Field::from_fn(g, 0.0, 0.0, |x| (-x * x).exp() / 3.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,u\n"));
        let back = Field::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid(), f.grid());
    }
}
