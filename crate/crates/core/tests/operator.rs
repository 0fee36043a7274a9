mod common;

use common::{sup_diff, window};
use proptest::prelude::*;
use rfwave_core::field_grid::{make_grid, Field, Grid};
use rfwave_core::riesz_feller::{
    apply, apply_integral, apply_spectral, coeffs, estimate_bound, optimal_cutoff, OperatorError, RFParams,
};
use std::f64::consts::PI;

fn windowed_cos(grid: Grid, k: f64) -> Field {
    let r = 0.75 * grid.half_width();
    Field::from_fn(grid, 0.0, 0.0, |x| (k * x).cos() * window(x, r / 3.0, r)).unwrap()
}

fn interior_error(out: &Field, exact: impl Fn(f64) -> f64, half: f64) -> f64 {
    let g = out.grid();
    (0..g.n_points())
        .filter(|&i| g.x(i).abs() <= half)
        .map(|i| (out.values()[i] - exact(g.x(i))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn plane_wave_eigen_identity_on_lattice() {
    let grid = make_grid(400.0, 1 << 16).unwrap();
    for alpha in [1.2f64, 1.5, 1.8] {
        let tmax = alpha.min(2.0 - alpha);
        for theta in [-tmax, 0.0, tmax] {
            let p = RFParams::new(alpha, theta).unwrap();
            for k in [0.5, 1.0, 2.0] {
                let out = apply_spectral(&windowed_cos(grid, k), &p).unwrap();
                let scale = k.powf(alpha);
                let err = interior_error(&out, |x| -scale * (k * x - 0.5 * theta * PI).cos(), 20.0);
                assert!(err <= 1e-8 * scale, "alpha {alpha} theta {theta} k {k}: {err:e}");
            }
        }
    }
}

#[test]
fn skewed_cosine_phase() {
    let grid = make_grid(400.0, 1 << 16).unwrap();
    let p = RFParams::new(1.5, 0.5).unwrap();
    let out = apply_spectral(&windowed_cos(grid, 1.0), &p).unwrap();
    assert!(interior_error(&out, |x| -(x - PI / 4.0).cos(), 20.0) < 1e-8);
}

#[test]
fn laplacian_limit_on_closed_forms() {
    let grid = make_grid(20.0, 4097).unwrap();
    let p = RFParams::new(2.0, 0.0).unwrap();
    let cases: [(fn(f64) -> f64, fn(f64) -> f64); 3] = [
        (|x| (-x * x).exp(), |x| (4.0 * x * x - 2.0) * (-x * x).exp()),
        (|x| x * (-x * x / 2.0).exp(), |x| (x.powi(3) - 3.0 * x) * (-x * x / 2.0).exp()),
        (|x| 1.0 / x.cosh().powi(2) * (-x * x / 50.0).exp(), |x| {
            let h = 1e-4;
            let f = |y: f64| 1.0 / y.cosh().powi(2) * (-y * y / 50.0).exp();
            (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
        }),
    ];
    for (f, d2) in cases {
        let field = Field::from_fn(grid, 0.0, 0.0, f).unwrap();
        let out = apply_spectral(&field, &p).unwrap();
        let exact: Vec<f64> = grid.coords().into_iter().map(d2).collect();
        assert!(sup_diff(out.values(), &exact) < 1e-6);
    }
}

#[test]
fn integral_matches_spectral_on_bumps() {
    let grid = make_grid(30.0, 8193).unwrap();
    let bumps: [fn(f64) -> f64; 3] = [
        |x| (-x * x).exp(),
        |x| (x - 1.0) * (-(x - 1.0).powi(2) / 2.0).exp(),
        |x| {
            let t = 1.0 - (x / 3.0).powi(2);
            if t > 0.0 {
                t.powi(4)
            } else {
                0.0
            }
        },
    ];
    for (alpha, theta) in [(1.2, 0.0), (1.5, 0.0), (1.5, 0.4), (1.8, -0.2), (1.9, 0.1)] {
        let p = RFParams::new(alpha, theta).unwrap();
        for f in bumps {
            let field = Field::from_fn(grid, 0.0, 0.0, f).unwrap();
            let a = apply_spectral(&field, &p).unwrap();
            let b = apply_integral(&field, &p).unwrap();
            let d = sup_diff(a.values(), b.values());
            assert!(d <= 1e-4, "alpha {alpha} theta {theta}: {d:e}");
            let bound = estimate_bound(&field, &p, optimal_cutoff(&field)).unwrap();
            assert!(b.sup_norm() <= bound);
        }
    }
}

#[test]
fn integral_kills_constants() {
    let grid = make_grid(20.0, 1025).unwrap();
    let p = RFParams::new(1.5, 0.3).unwrap();
    let out = apply_integral(&Field::constant(grid, 0.7), &p).unwrap();
    assert!(out.sup_norm() <= 1e-10);
    assert_eq!(estimate_bound(&Field::constant(grid, 0.7), &p, 1.0).unwrap(), 0.0);
}

#[test]
fn windowed_cosine_by_integral_and_bound() {
    let grid = make_grid(200.0, 1 << 15).unwrap();
    let p = RFParams::new(1.5, 0.0).unwrap();
    let field = windowed_cos(grid, 1.0);
    let out = apply_integral(&field, &p).unwrap();
    assert!((out.value_at(0.0) + 1.0).abs() < 1e-3);
    let b1 = estimate_bound(&field, &p, 1.0).unwrap();
    let b4 = estimate_bound(&field, &p, 4.0).unwrap();
    let bstar = estimate_bound(&field, &p, optimal_cutoff(&field)).unwrap();
    assert!(out.sup_norm() <= bstar);
    assert!(bstar <= b1 && bstar <= b4);
    // ||f'|| = ||f''|| = 1 up to the window: K (2 + 8).
    let k = p.bound_constant();
    assert!((b1 / (10.0 * k) - 1.0).abs() < 1e-2);
}

#[test]
fn tanh_front_action_is_odd() {
    let grid = make_grid(40.0, 4097).unwrap();
    let p = RFParams::new(1.5, 0.0).unwrap();
    let field = Field::from_fn(grid, 0.0, 1.0, |x| 0.5 * (1.0 + x.tanh())).unwrap();
    let out = apply_integral(&field, &p).unwrap();
    let v = out.values();
    let n = v.len();
    let odd = (0..n).map(|i| (v[i] + v[n - 1 - i]).abs()).fold(0.0, f64::max);
    assert!(odd < 1e-6, "{odd:e}");
}

#[test]
fn routed_application_agrees_with_integral() {
    let grid = make_grid(40.0, 4097).unwrap();
    for (alpha, theta) in [(1.5, 0.0), (1.5, 0.3), (1.8, 0.0)] {
        let p = RFParams::new(alpha, theta).unwrap();
        let field = Field::from_fn(grid, 0.0, 1.0, |x| 0.5 * (1.0 + x.tanh())).unwrap();
        let a = apply(&field, &p).unwrap();
        let b = apply_integral(&field, &p).unwrap();
        assert!(sup_diff(a.values(), b.values()) <= 1e-4);
        let v = a.values();
        // Heavy tails leave an O(L^-alpha) action at the ends.
        let ends = v[0].abs().max(v[v.len() - 1].abs());
        assert!(ends <= 2.0 * p.bound_constant() * 40f64.powf(-alpha) / alpha);
    }
    let p = RFParams::new(2.0, 0.0).unwrap();
    let field = Field::from_fn(grid, 0.0, 1.0, |x| 0.5 * (1.0 + x.tanh())).unwrap();
    let v = apply(&field, &p).unwrap().into_values();
    assert!(v[0].abs() <= 1e-4 && v[v.len() - 1].abs() <= 1e-4);
}

#[test]
fn routed_application_on_zero_tails_is_spectral() {
    let grid = make_grid(30.0, 2049).unwrap();
    let p = RFParams::new(1.7, 0.2).unwrap();
    let field = Field::from_fn(grid, 0.0, 0.0, |x| (-x * x).exp()).unwrap();
    let a = apply(&field, &p).unwrap();
    let b = apply_spectral(&field, &p).unwrap();
    assert!(sup_diff(a.values(), b.values()) < 1e-12);
}

#[test]
fn coefficient_sweep() {
    for i in 1..40 {
        let alpha: f64 = 0.05 * i as f64;
        let tmax = alpha.min(2.0 - alpha);
        for j in 0..=20 {
            let theta = -tmax + 2.0 * tmax * j as f64 / 20.0;
            let p = match RFParams::new(alpha, theta) {
                Ok(p) => p,
                Err(_) => continue,
            };
            if alpha == 1.0 {
                assert!(matches!(coeffs(&p), Err(OperatorError::AlphaOne)));
                continue;
            }
            let c = coeffs(&p).unwrap();
            assert!(c.c1 >= -1e-15 && c.c2 >= -1e-15 && c.c1 + c.c2 > 0.0, "{alpha} {theta}");
            if theta == 0.0 {
                assert_eq!(c.c1, c.c2);
            }
        }
    }
}

#[test]
fn symbol_has_nonpositive_real_part() {
    for (alpha, theta) in [(1.5, 0.5), (1.2, -0.8), (2.0, 0.0), (1.9, 0.1)] {
        let p = RFParams::new(alpha, theta).unwrap();
        for xi in [-5.0, -1.0, -0.1, 0.0, 0.3, 2.0, 7.0] {
            assert!(p.symbol(xi).re <= 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectral_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, s in -3.0f64..3.0, alpha in 1.05f64..2.0, frac in -1.0f64..1.0) {
        let grid = make_grid(30.0, 1025).unwrap();
        let p = RFParams::new(alpha, frac * alpha.min(2.0 - alpha)).unwrap();
        let f = Field::from_fn(grid, 0.0, 0.0, |x| (-x * x).exp()).unwrap();
        let g = Field::from_fn(grid, 0.0, 0.0, |x| (-(x - s).powi(2) / 2.0).exp()).unwrap();
        let sum = Field::from_fn(grid, 0.0, 0.0, |x| a * (-x * x).exp() + b * (-(x - s).powi(2) / 2.0).exp()).unwrap();
        let lhs = apply_spectral(&sum, &p).unwrap();
        let (df, dg) = (apply_spectral(&f, &p).unwrap(), apply_spectral(&g, &p).unwrap());
        let rhs: Vec<f64> = df.values().iter().zip(dg.values()).map(|(u, v)| a * u + b * v).collect();
        prop_assert!(sup_diff(lhs.values(), &rhs) < 1e-10);
    }

    #[test]
    fn action_commutes_with_grid_translation(shift in 1usize..200, alpha in 1.1f64..1.95, frac in -1.0f64..1.0) {
        let grid = make_grid(40.0, 2049).unwrap();
        let h = grid.dx();
        let p = RFParams::new(alpha, frac * alpha.min(2.0 - alpha)).unwrap();
        let s = shift as f64 * h;
        let f = Field::from_fn(grid, 0.0, 0.0, |x| (-(x + 5.0).powi(2)).exp()).unwrap();
        let g = Field::from_fn(grid, 0.0, 0.0, |x| (-(x + 5.0 - s).powi(2)).exp()).unwrap();
        let df = apply_spectral(&f, &p).unwrap();
        let dg = apply_spectral(&g, &p).unwrap();
        let n = grid.n_points();
        let mut worst = 0.0f64;
        for i in 600..n - 600 {
            worst = worst.max((dg.values()[i] - df.values()[i - shift]).abs());
        }
        prop_assert!(worst < 1e-9);
    }
}
