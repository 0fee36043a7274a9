#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfwave_core::field_grid::{Field, Grid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// C-infinity step: 0 for t <= 0, 1 for t >= 1.
pub fn smooth_step(t: f64) -> f64 {
    let e = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let (a, b) = (e(t), e(1.0 - t));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Equal to 1 on |x| <= r1, 0 for |x| >= r2.
pub fn window(x: f64, r1: f64, r2: f64) -> f64 {
    smooth_step((r2 - x.abs()) / (r2 - r1))
}

/// Random [0, 1]-valued field with settled tails: a smooth random ramp between random tail
/// levels plus random bumps, squashed back into [0, 1].
pub fn random_unit_field<R: Rng>(rng: &mut R, grid: Grid) -> Field {
    let l = grid.half_width();
    let tl: f64 = rng.random_range(0.0..1.0);
    let tr: f64 = rng.random_range(0.0..1.0);
    let center: f64 = rng.random_range(-0.3 * l..0.3 * l);
    let width: f64 = rng.random_range(1.0..0.08 * l);
    let bumps: Vec<(f64, f64, f64)> = (0..rng.random_range(1..6))
        .map(|_| (rng.random_range(-0.4 * l..0.4 * l), rng.random_range(0.5..4.0), rng.random_range(-1.0..1.0)))
        .collect();
    Field::from_fn(grid, tl, tr, |x| {
        let base = tl + (tr - tl) * 0.5 * (1.0 + ((x - center) / width).tanh());
        let mut v = base;
        for (c, w, h) in &bumps {
            v += h * (-((x - c) / w).powi(2)).exp();
        }
        v.clamp(0.0, 1.0)
    })
    .unwrap()
    .with_tails(
        tl + (tr - tl) * 0.5 * (1.0 + ((-l - center) / width).tanh()),
        tl + (tr - tl) * 0.5 * (1.0 + ((l - center) / width).tanh()),
    )
}

/// Random nondecreasing [0, 1]-valued field: a mixture of random tanh fronts.
pub fn random_monotone_field<R: Rng>(rng: &mut R, grid: Grid) -> Field {
    let k = rng.random_range(1..4);
    let parts: Vec<(f64, f64, f64)> = (0..k)
        .map(|_| (rng.random_range(-10.0..10.0), rng.random_range(0.5..4.0), rng.random_range(0.1..1.0)))
        .collect();
    let total: f64 = parts.iter().map(|p| p.2).sum();
    let f = |x: f64| parts.iter().map(|(c, w, h)| h / total * 0.5 * (1.0 + ((x - c) / w).tanh())).sum::<f64>();
    let l = grid.half_width();
    Field::from_fn(grid, f(-l), f(l), f).unwrap()
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
