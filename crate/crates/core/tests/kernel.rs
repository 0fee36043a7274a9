mod common;

use common::sup_diff;
use proptest::prelude::*;
use rfwave_core::field_grid::{make_grid, Field};
use rfwave_core::riesz_feller::RFParams;
use rfwave_core::stable_kernel::{build, build_default, check_properties, convolve, density_by_quadrature, KernelTable};
use std::f64::consts::PI;
use std::sync::OnceLock;

fn skewed() -> &'static KernelTable {
    static K: OnceLock<KernelTable> = OnceLock::new();
    K.get_or_init(|| build_default(&RFParams::new(1.5, 0.25).unwrap()).unwrap())
}

fn mirrored() -> &'static KernelTable {
    static K: OnceLock<KernelTable> = OnceLock::new();
    K.get_or_init(|| build_default(&RFParams::new(1.5, -0.25).unwrap()).unwrap())
}

#[test]
fn gaussian_and_cauchy_closed_forms() {
    let g = build_default(&RFParams::new(2.0, 0.0).unwrap()).unwrap();
    let c = build_default(&RFParams::new(1.0, 0.0).unwrap()).unwrap();
    for t in [0.5, 1.0, 4.0] {
        for q in -200..=200 {
            let x = 0.05 * q as f64;
            let heat = (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
            assert!((g.eval(x, t).unwrap() - heat).abs() <= 1e-6);
            let cauchy = t / (PI * (x * x + t * t));
            assert!((c.eval(x, t).unwrap() - cauchy).abs() <= 1e-6);
        }
    }
}

#[test]
fn skewed_kernel_properties() {
    let k = skewed();
    let r = check_properties(k);
    assert!(r.mass_defect.abs() <= 1e-6);
    assert!(r.min_value >= -1e-12);
    assert!(r.scaling_max_deviation <= 1e-5);
    assert!(r.semigroup.iter().all(|d| d.defect <= 1e-5));
    assert!(r.positive_core);
    assert!(r.envelope.iter().all(|b| b.is_finite() && *b > 0.0));
    for s in r.tail_slopes.iter().flatten() {
        assert!((s + 2.5).abs() <= 0.1);
    }
}

#[test]
fn skew_reversal_reflects_the_kernel() {
    let (a, b) = (skewed(), mirrored());
    for q in -100..=100 {
        let x = 0.1 * q as f64;
        assert!((a.g1_at(x) - b.g1_at(-x)).abs() <= 1e-8);
    }
}

#[test]
fn heat_semigroup_is_exact_to_quadrature() {
    let k = build_default(&RFParams::new(2.0, 0.0).unwrap()).unwrap();
    let r = check_properties(&k);
    assert!(r.semigroup.iter().all(|d| d.defect <= 1e-6));
}

#[test]
fn sub_unit_alpha_kernel() {
    let k = build_default(&RFParams::new(0.7, 0.3).unwrap()).unwrap();
    assert!(k.mass_defect().abs() <= 1e-6);
    assert!(k.min_value() >= -1e-12);
    for x in [-3.0, 0.0, 2.0] {
        let q = density_by_quadrature(k.params(), x, 1.0);
        assert!((k.eval(x, 1.0).unwrap() - q).abs() <= 1e-5 * q);
    }
}

#[test]
fn convolution_of_gaussian_widens_exactly() {
    let k = build_default(&RFParams::new(2.0, 0.0).unwrap()).unwrap();
    let grid = make_grid(30.0, 4097).unwrap();
    let f = Field::from_fn(grid, 0.0, 0.0, |x| (-x * x).exp()).unwrap();
    for t in [0.1, 1.0] {
        let out = convolve(&k, &f, t).unwrap();
        // e^{-x^2} * G(., t) = (1 + 4t)^{-1/2} exp(-x^2 / (1 + 4t))
        let exact: Vec<f64> = grid.coords().iter().map(|x| (-x * x / (1.0 + 4.0 * t)).exp() / (1.0 + 4.0 * t).sqrt()).collect();
        assert!(sup_diff(out.values(), &exact) <= 1e-6);
    }
}

#[test]
fn convolution_keeps_a_step_in_the_unit_interval() {
    let grid = make_grid(40.0, 2049).unwrap();
    let step = Field::from_fn(grid, 0.0, 1.0, |x| 0.5 * (1.0 + (5.0 * x).tanh())).unwrap();
    for k in [skewed(), mirrored()] {
        for t in [0.01, 0.3, 2.0] {
            let out = convolve(k, &step, t).unwrap();
            assert!(out.min() >= -1e-8 && out.max() <= 1.0 + 1e-8);
            assert_eq!((out.tail_left(), out.tail_right()), (0.0, 1.0));
        }
    }
}

#[test]
fn discrete_semigroup_of_convolutions() {
    let grid = make_grid(40.0, 4097).unwrap();
    let f = Field::from_fn(grid, 0.0, 1.0, |x| 0.5 * (1.0 + x.tanh())).unwrap();
    let k = skewed();
    let half = convolve(k, &f, 0.5).unwrap().with_tail_tolerance(1e-2);
    let two = convolve(k, &half, 0.5).unwrap();
    let one = convolve(k, &f, 1.0).unwrap();
    // Two steps lose the heavy tail that leaves [-L, L] after the first one; compare inside.
    let g = *one.grid();
    let inner = |v: &[f64]| -> Vec<f64> { (0..g.n_points()).filter(|&i| g.x(i).abs() <= 20.0).map(|i| v[i]).collect() };
    let d = sup_diff(&inner(two.values()), &inner(one.values()));
    assert!(d <= 1e-5, "{d:e}");
}

#[test]
fn dump_has_header_and_nodes() {
    let k = build(&RFParams::new(1.5, 0.0).unwrap(), 50.0, 1 << 14).unwrap();
    let mut buf = Vec::new();
    k.write_csv(&mut buf, 64).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,g"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert!(rows.len() > 100);
    for (x, g) in rows {
        assert!((k.g1_at(x) - g).abs() <= 1e-15 * g.abs().max(1.0));
    }
    let s = k.summary();
    assert_eq!(s.build_resolution, 1 << 14);
    assert!(s.tail_amplitude > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_law_is_exact(x in -50.0f64..50.0, t in 0.05f64..20.0) {
        let k = skewed();
        let w = t.powf(1.0 / 1.5);
        let lhs = k.eval(x, t).unwrap();
        let rhs = k.eval(x / w, 1.0).unwrap() / w;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-3));
        prop_assert!(lhs >= 0.0);
    }

    #[test]
    fn cdf_is_monotone(a in -300.0f64..300.0, d in 0.0f64..50.0, t in 0.1f64..10.0) {
        let k = skewed();
        let lo = k.cdf(a, t).unwrap();
        let hi = k.cdf(a + d, t).unwrap();
        prop_assert!(hi >= lo - 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&lo));
    }
}
