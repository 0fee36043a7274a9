use crate::config::{ExperimentConfig, Initial, Operation, Perturbation};
use crate::error::{io_context, CliError};
use crate::record::RunRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rfwave_core::cauchy_solver::{evolve, SolverConfig};
use rfwave_core::export::json_string;
use rfwave_core::field_grid::{Field, Grid};
use rfwave_core::nonlinearity::{Bistable, SpeedSign};
use rfwave_core::riesz_feller::{apply, apply_integral, apply_spectral, estimate_bound, optimal_cutoff, RFParams};
use rfwave_core::stable_kernel::{build_default, check_properties};
use rfwave_core::wave_lab::{
    certify_wave_pair, certify_ramp_pair, crossing, initial_zeta, recheck_wave_pair, run_wave, speed_bound,
    speed_from_formula, stability_experiment, WaveExtraction,
};
use serde_json::json;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

/// Runs one experiment, writing its artifacts and `record.json` under `config.out`.
/// `jobs` bounds the sweep worker pool; 0 lets rayon choose.
pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<RunRecord, CliError> {
    let start = Instant::now();
    let dir = config.out.clone();
    fs::create_dir_all(&dir).map_err(io_context(format!("creating {}", dir.display())))?;
    let mut rec = RunRecord::new(config.clone());
    match config.operation {
        Operation::Kernel => kernel(config, &mut rec)?,
        Operation::Opcheck => opcheck(config, &mut rec)?,
        Operation::Evolve => evolve_op(config, &mut rec)?,
        Operation::Wave => {
            wave(config, &mut rec)?;
        }
        Operation::Sweep => sweep(config, jobs, &mut rec)?,
        Operation::Certify => certify(config, &mut rec)?,
        Operation::Stability => stability(config, &mut rec)?,
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    rec.write(&dir)?;
    Ok(rec)
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, json_string(value)?).map_err(io_context(format!("writing {}", path.display())))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>, CliError> {
    let path = dir.join(name);
    Ok(BufWriter::new(fs::File::create(&path).map_err(io_context(format!("creating {}", path.display())))?))
}

fn kernel(config: &ExperimentConfig, rec: &mut RunRecord) -> Result<(), CliError> {
    let k = build_default(&config.params()?)?;
    k.write_csv(create(&config.out, "kernel.csv")?, config.kernel_stride)?;
    let props = check_properties(&k);
    write_json(&config.out, "kernel.json", &json!({ "summary": k.summary(), "properties": props }))?;
    let semigroup = props.semigroup.iter().map(|d| d.defect).fold(0.0, f64::max);
    rec.metric("mass_defect", props.mass_defect);
    rec.metric("min_value", props.min_value);
    rec.metric("scaling_max_deviation", props.scaling_max_deviation);
    rec.metric("semigroup_defect", semigroup);
    rec.assert("mass_defect", props.mass_defect.abs() <= 1e-6);
    rec.assert("nonnegative", props.min_value >= -1e-12);
    rec.assert("scaling_law", props.scaling_max_deviation <= 1e-5);
    rec.assert("semigroup", semigroup <= 1e-5);
    Ok(())
}

fn opcheck(config: &ExperimentConfig, rec: &mut RunRecord) -> Result<(), CliError> {
    let p = config.params()?;
    let g = config.grid()?;
    let front = Field::from_fn(g, 0.0, 1.0, |x| 0.5 * (1.0 + x.tanh()))?;
    let bump = Field::from_fn(g, 0.0, 0.0, |x| (-x * x).exp())?;
    let front_action = apply(&front, &p)?;
    let bump_action = apply_spectral(&bump, &p)?;
    let front_bound = estimate_bound(&front, &p, optimal_cutoff(&front))?;
    let bump_bound = estimate_bound(&bump, &p, optimal_cutoff(&bump))?;
    let mut w = create(&config.out, "action.csv")?;
    writeln!(w, "x,front,front_action,bump,bump_action").map_err(io_context("writing action.csv"))?;
    for i in 0..g.n_points() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            g.x(i),
            front.values()[i],
            front_action.values()[i],
            bump.values()[i],
            bump_action.values()[i]
        )
        .map_err(io_context("writing action.csv"))?;
    }
    w.flush().map_err(io_context("writing action.csv"))?;
    rec.metric("front_sup", front_action.sup_norm());
    rec.metric("front_bound", front_bound);
    rec.metric("bump_sup", bump_action.sup_norm());
    rec.metric("bump_bound", bump_bound);
    rec.assert("front_bound_dominates", front_action.sup_norm() <= front_bound);
    rec.assert("bump_bound_dominates", bump_action.sup_norm() <= bump_bound);
    if p.alpha() < 2.0 {
        let integral = apply_integral(&bump, &p)?;
        let gap = bump_action.values().iter().zip(integral.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        rec.metric("integral_spectral_gap", gap);
        rec.assert("integral_matches_spectral", gap <= 1e-4);
    }
    Ok(())
}

/// Random [0, 1] data: a ramp between random tail levels plus a few bumps, clipped.
fn random_initial(grid: Grid, seed: u64) -> Result<Field, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.half_width();
    let (tl, tr): (f64, f64) = (rng.random_range(0.0..0.3), rng.random_range(0.7..1.0));
    let center = rng.random_range(-0.2 * l..0.2 * l);
    let width = rng.random_range(1.0..(0.1 * l).max(2.0));
    let bumps: Vec<(f64, f64, f64)> = (0..rng.random_range(1..5))
        .map(|_| (rng.random_range(-0.3 * l..0.3 * l), rng.random_range(0.5..3.0), rng.random_range(-0.5..0.5)))
        .collect();
    let ramp = |x: f64| tl + (tr - tl) * 0.5 * (1.0 + ((x - center) / width).tanh());
    let f = Field::from_fn(grid, ramp(-l), ramp(l), |x| {
        let v = ramp(x) + bumps.iter().map(|(c, w, h)| h * (-((x - c) / w).powi(2)).exp()).sum::<f64>();
        v.clamp(0.0, 1.0)
    })?;
    Ok(f)
}

fn evolve_op(config: &ExperimentConfig, rec: &mut RunRecord) -> Result<(), CliError> {
    let (p, b, g) = (config.params()?, config.reaction()?, config.grid()?);
    let u0 = match config.initial {
        Initial::Zeta => initial_zeta(&g)?,
        Initial::Tanh => Field::from_fn(g, 0.0, 1.0, |x| 0.5 * (1.0 + x.tanh()))?,
        Initial::Random => random_initial(g, config.seed)?,
    };
    let stride = ((config.snapshot_every / config.dt).round() as usize).max(1);
    let cfg = SolverConfig::new(config.dt, config.t_final).with_stride(stride);
    let tr = evolve(&u0, &b, &p, &cfg)?;
    tr.write_to(&config.out, &p, &cfg)?;
    let (lo, hi) = tr.snapshots.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.min()), hi.max(s.max())));
    rec.metric("min", lo);
    rec.metric("max", hi);
    if let Ok(z) = crossing(tr.final_field(), b.a()) {
        rec.metric("final_front_position", z);
    }
    rec.assert("confined", lo >= b.u_minus() - 1e-8 && hi <= b.u_plus() + 1e-8);
    if config.initial != Initial::Random {
        let drop = tr
            .snapshots
            .iter()
            .flat_map(|s| s.values().windows(2).map(|q| q[0] - q[1]).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        rec.metric("monotonicity_defect", drop);
        rec.assert("monotone", drop <= 1e-8);
    }
    Ok(())
}

fn wave(config: &ExperimentConfig, rec: &mut RunRecord) -> Result<(WaveExtraction, Bistable, RFParams), CliError> {
    let (p, b, g) = (config.params()?, config.reaction()?, config.grid()?);
    let (_, w) = run_wave(&b, &p, &g, &config.solver())?;
    w.write_to(&config.out)?;
    let c = w.speed;
    rec.metric("c", c);
    rec.metric("speed_fit_r2", w.speed_fit_r2);
    rec.metric("residual_sup", w.residual_sup);
    rec.metric("front_width", w.front_width);
    if let Some(t) = &w.tail_fit {
        rec.metric("tail_exponent", t.exponent);
        rec.metric("tail_r2", t.r2);
    }
    let drop = w.profile.values().windows(2).map(|q| q[0] - q[1]).fold(0.0, f64::max);
    rec.assert("profile_monotone", drop <= 1e-8);
    rec.assert("anchored", (w.profile.value_at(0.0) - b.a()).abs() <= 1e-6);
    rec.assert("speed_fit", w.speed_fit_r2 >= 0.999);
    if p.alpha() < 2.0 {
        let bound = speed_bound(&b, &p)?;
        rec.metric("c_bar", bound.c_bar);
        rec.assert("speed_bound", c.abs() <= bound.c_bar);
    }
    if p.theta() == 0.0 {
        let f = speed_from_formula(&w, &b)?;
        rec.metric("c_formula", f);
        rec.assert("speed_formula", (c - f).abs() <= 0.05 * c.abs().max(1e-2));
        let sign_ok = match b.predicted_speed_sign() {
            SpeedSign::Negative => c < 0.0,
            SpeedSign::Zero => c.abs() <= 1e-3,
            SpeedSign::Positive => c > 0.0,
        };
        rec.assert("speed_sign", sign_ok);
    }
    Ok((w, b, p))
}

fn sweep(config: &ExperimentConfig, jobs: usize, rec: &mut RunRecord) -> Result<(), CliError> {
    let children = config.expand();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let records: Vec<RunRecord> = pool.install(|| children.par_iter().map(|c| run(c, 1)).collect::<Result<_, _>>())?;
    // c should increase with a for every fixed (alpha, theta).
    for &alpha in config.alpha.as_slice() {
        for &theta in config.theta.as_slice() {
            let mut cs: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.config.alpha.as_slice() == [alpha] && r.config.theta.as_slice() == [theta])
                .filter_map(|r| Some((r.config.a.as_slice()[0], *r.metrics.get("c")?)))
                .collect();
            cs.sort_by(|x, y| x.0.total_cmp(&y.0));
            let ok = cs.windows(2).all(|q| q[1].1 > q[0].1);
            rec.assert(&format!("c_increases_with_a_alpha{alpha}_theta{theta}"), ok);
        }
    }
    rec.metric("children", records.len() as f64);
    rec.children = records;
    Ok(())
}

fn certify(config: &ExperimentConfig, rec: &mut RunRecord) -> Result<(), CliError> {
    let (w, b, p) = wave(config, rec)?;
    let (sup_a, sub_a) = certify_wave_pair(&w, &b, config.delta_a)?;
    let (sup_b, sub_b) = certify_ramp_pair(&b, &p, config.delta_b)?;
    for (name, cert) in [("wave_super", &sup_a), ("wave_sub", &sub_a), ("ramp_super", &sup_b), ("ramp_sub", &sub_b)] {
        rec.metric(&format!("{name}_margin"), cert.worst_residual_sign_margin);
        rec.assert(name, cert.pass);
    }
    rec.assert("wave_recheck", recheck_wave_pair(&w, &b, &sup_a) && recheck_wave_pair(&w, &b, &sub_a));
    let all = json!({
        "wave_pair": { "supersolution": sup_a, "subsolution": sub_a },
        "ramp_pair": { "supersolution": sup_b, "subsolution": sub_b },
    });
    write_json(&config.out, "certificates.json", &all)
}

fn stability(config: &ExperimentConfig, rec: &mut RunRecord) -> Result<(), CliError> {
    let (w, b, p) = wave(config, rec)?;
    let g = *w.grid();
    let pert = match config.perturbation {
        Perturbation::None => Field::constant(g, 0.0),
        Perturbation::Bump => {
            let (amp, x0) = (config.amplitude, config.bump_center);
            Field::from_fn(g, 0.0, 0.0, |x| amp * (-(x - x0).powi(2)).exp())?
        }
        Perturbation::Translate => {
            let s = config.shift;
            let v = g.coords().iter().map(|&x| w.profile.value_at(x + s) - w.profile.value_at(x)).collect();
            Field::new(g, v, 0.0, 0.0)?
        }
    };
    let st = stability_experiment(&w, &pert, &b, &p, &SolverConfig::new(config.dt, config.stability_t))?;
    write_json(&config.out, "stability.json", &st)?;
    let mut f = create(&config.out, "distances.csv")?;
    writeln!(f, "t,s,xi").map_err(io_context("writing distances.csv"))?;
    for ((t, s), xi) in st.distances.iter().zip(&st.shifts) {
        writeln!(f, "{t:.16e},{s:.16e},{xi:.16e}").map_err(io_context("writing distances.csv"))?;
    }
    f.flush().map_err(io_context("writing distances.csv"))?;
    rec.metric("xi", st.xi);
    if let (Some(k), Some(r2)) = (st.kappa, st.r2) {
        rec.metric("kappa", k);
        rec.metric("kappa_r2", r2);
    }
    match config.perturbation {
        Perturbation::None => rec.assert("already_converged", st.already_converged),
        Perturbation::Bump => {
            rec.assert("kappa_positive", st.kappa.is_some_and(|k| k > 0.0));
            rec.assert("log_linear_fit", st.r2.is_some_and(|r| r >= 0.9));
        }
        Perturbation::Translate => rec.assert("translate_recovered", (st.xi - config.shift).abs() <= 0.05 * config.shift.abs()),
    }
    Ok(())
}
