//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! (straight to stderr, so it shows without `--nocapture`) and then asserts.
//!
//! The identification pipeline — 20 000 samples collected under the default
//! excitation, then the default fit — is run once and shared.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thermoform::experiments::{
    collect_dataset, generate_prbs, robustness_sweep, run_closed_loop, run_loop, ClosedLoopOptions, Metrics,
    ModelPlant, PrbsSchedule, SweepGrid, SIM_REFERENCES,
};
use thermoform::mpc::{solve_qp, MpcConfig, QpProblem, QpSettings};
use thermoform::narx::{
    fit_narx, fit_table, linearize, read_model, whiteness, write_model, Dataset, FitConfig, NarxModel,
    Normalization, RegressorLayout, Unit, WaveletChannel,
};
use thermoform::thermal::{point_to_rectangle, Physics, PlantConfig, Simulator};

fn report(id: &str, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[acceptance {id}] {verdict} {name}: {detail}");
}

struct Identified {
    data: Dataset,
    model: NarxModel,
    fit_time: Duration,
}

fn identified() -> &'static Identified {
    static CELL: OnceLock<Identified> = OnceLock::new();
    CELL.get_or_init(|| {
        let plant = PlantConfig::default();
        let u = generate_prbs(&PrbsSchedule::default(), 15).expect("default excitation");
        let data = collect_dataset(&plant, &u, 6.0, 1).expect("collection");
        let start = Instant::now();
        let model = fit_narx(&data, &RegressorLayout::default(), &FitConfig::default()).expect("fit");
        Identified {
            data,
            model,
            fit_time: start.elapsed(),
        }
    })
}

fn describe(m: &Metrics) -> String {
    format!(
        "avg {:.2} °C, max {:.2} °C, overshoot {:.2} °C, settling {}",
        m.avg_final_error,
        m.max_final_error,
        m.max_overshoot,
        m.settling_time.map_or("never".into(), |t| format!("{t:.0} s"))
    )
}

#[test]
fn c1_model_quality() {
    let id = identified();
    let start = Instant::now();
    let table = fit_table(&id.model, &id.data, &[1, 100]).unwrap();
    let elapsed = id.fit_time + start.elapsed();
    let min = |j: usize| table.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
    let (n1, n100) = (min(0), min(1));
    let pass = n1 >= 95.0 && n100 >= 78.0 && elapsed < Duration::from_secs(600);
    report(
        "1",
        "model quality",
        pass,
        &format!(
            "worst zone fit {n1:.2}% at N=1 (≥ 95), {n100:.2}% at N=100 (≥ 78); fit + validate {:.0} s (< 600)",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn c2_residual_whiteness() {
    let id = identified();
    let w = whiteness(&id.model, &id.data, 25).unwrap();
    let auto = w.iter().map(|z| z.auto_inside).fold(1.0, f64::min);
    let cross = w.iter().map(|z| z.cross_inside).fold(1.0, f64::min);
    let pass = auto >= 0.9 && cross >= 0.9;
    report(
        "2",
        "residual whiteness",
        pass,
        &format!(
            "worst zone: {:.0}% of autocorrelation lags and {:.0}% of input cross-correlation lags inside the 99% band (each ≥ 90%)",
            100.0 * auto,
            100.0 * cross
        ),
    );
    assert!(pass);
}

#[test]
fn c3_nominal_closed_loop() {
    let id = identified();
    let start = Instant::now();
    let run = run_closed_loop(
        &PlantConfig::default(),
        &id.model,
        &MpcConfig::default(),
        &SIM_REFERENCES,
        &ClosedLoopOptions::default(),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let m = &run.metrics;
    let pass = m.avg_final_error <= 1.5
        && m.max_final_error <= 3.0
        && m.max_overshoot <= 3.0
        && m.settling_time.is_some_and(|t| t <= 700.0)
        && elapsed < Duration::from_secs(120);
    report(
        "3",
        "nominal closed loop",
        pass,
        &format!(
            "{} (limits 1.5 / 3 / 3 / 700 s); {} solves in {:.1} s",
            describe(m),
            run.step_seconds.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn model_as_plant_is_no_worse() {
    let id = identified();
    let mpc = MpcConfig::default();
    let opts = ClosedLoopOptions::default();
    let physics = run_closed_loop(&PlantConfig::default(), &id.model, &mpc, &SIM_REFERENCES, &opts).unwrap();
    let y0 = vec![PlantConfig::default().env.t_amb - 273.15; 15];
    let mut plant = ModelPlant::new(id.model.clone(), &y0, &[0.0; 15]);
    let own = run_loop(&mut plant, &id.model, &mpc, &SIM_REFERENCES, &opts).unwrap();
    let (a, b) = (&own.metrics, &physics.metrics);
    let settle = |m: &Metrics| m.settling_time.unwrap_or(f64::INFINITY);
    let pass = a.avg_final_error <= b.avg_final_error
        && a.max_final_error <= b.max_final_error
        && a.max_overshoot <= b.max_overshoot
        && settle(a) <= settle(b);
    report("3b", "model as plant", pass, &format!("{} vs physics plant {}", describe(a), describe(b)));
    assert!(pass);
}

#[test]
fn c4_robustness_grid() {
    let id = identified();
    let grid = SweepGrid::default();
    let rows = robustness_sweep(
        &grid,
        &PlantConfig::default(),
        &id.model,
        &MpcConfig::default(),
        &SIM_REFERENCES,
        &ClosedLoopOptions::default(),
    )
    .unwrap();
    let mut worst_avg: (f64, (f64, f64, f64)) = (0.0, grid.nominal);
    let mut worst_os: (f64, (f64, f64, f64)) = (0.0, grid.nominal);
    let mut failed = 0;
    let mut violations = 0;
    for row in &rows {
        match &row.outcome {
            Ok(m) => {
                if m.avg_final_error > 2.0 || m.max_overshoot > 7.0 {
                    violations += 1;
                }
                if m.avg_final_error > worst_avg.0 {
                    worst_avg = (m.avg_final_error, row.point);
                }
                if m.max_overshoot > worst_os.0 {
                    worst_os = (m.max_overshoot, row.point);
                }
            }
            Err(_) => failed += 1,
        }
    }
    let (h0, _, a0) = grid.nominal;
    let along_d: Vec<f64> = rows
        .iter()
        .filter(|r| r.point.0 == h0 && r.point.2 == a0)
        .filter_map(|r| r.outcome.as_ref().ok().map(|m| m.max_overshoot))
        .collect();
    let monotone = along_d.len() == grid.d.len() && along_d.windows(2).all(|w| w[1] >= w[0]);
    let pass = failed == 0 && violations == 0 && monotone;
    report(
        "4",
        "robustness grid",
        pass,
        &format!(
            "{} runs, {failed} failed, {violations} outside avg ≤ 2 / overshoot ≤ 7; worst avg {:.2} at {:?}, worst overshoot {:.2} at {:?}; overshoot along d {:?} ({})",
            rows.len(),
            worst_avg.0,
            worst_avg.1,
            worst_os.0,
            worst_os.1,
            along_d.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>(),
            if monotone { "non-decreasing" } else { "not monotone" }
        ),
    );
    assert!(pass);
}

/// Fraction of cosine-weighted rays from `(px, py, 0)` that hit the
/// rectangle in the plane `z = gap`.
fn ray_cast(px: f64, py: f64, rect: (f64, f64, f64, f64), gap: f64, n: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut hits = 0usize;
    for _ in 0..n {
        let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
        let r = u1.sqrt();
        let phi = 2.0 * PI * u2;
        let dz = (1.0 - u1).sqrt();
        if dz <= 0.0 {
            continue;
        }
        let t = gap / dz;
        let (x, y) = (px + t * r * phi.cos(), py + t * r * phi.sin());
        if x >= rect.0 && x <= rect.1 && y >= rect.2 && y <= rect.3 {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

fn random_model(rng: &mut ChaCha8Rng) -> NarxModel {
    let layout = RegressorLayout::new(2, 2, 3, 3).unwrap();
    let dim = layout.dim();
    let p = 5;
    let proj = DMatrix::from_fn(dim, p, |_, _| rng.gen_range(-0.5..0.5));
    let channels = (0..layout.z)
        .map(|_| {
            let unit = |rng: &mut ChaCha8Rng| Unit {
                dilation: rng.gen_range(0.5..1.5),
                translation: (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                weight: rng.gen_range(-1.0..1.0),
            };
            WaveletChannel {
                linear: (0..dim).map(|_| rng.gen_range(-0.3..0.3)).collect(),
                projection: proj.clone(),
                offset: rng.gen_range(-1.0..1.0),
                wavelets: (0..4).map(|_| unit(rng)).collect(),
                scalings: (0..2).map(|_| unit(rng)).collect(),
            }
        })
        .collect();
    let norm = Normalization {
        mean: (0..dim).map(|_| rng.gen_range(-50.0..50.0)).collect(),
        scale: (0..dim).map(|_| rng.gen_range(0.5..30.0)).collect(),
    };
    NarxModel::new(layout, norm, channels).unwrap()
}

/// Best objective over a 0.01 lattice of the box `[-b, b]⁴`, polished by
/// coordinate search.
fn lattice_minimum(h: &DMatrix<f64>, g: &DVector<f64>, b: f64) -> f64 {
    let f = |x: &[f64; 4]| {
        let mut v = 0.0;
        for i in 0..4 {
            let hx: f64 = (0..4).map(|j| h[(i, j)] * x[j]).sum();
            v += x[i] * (0.5 * hx + g[i]);
        }
        v
    };
    let steps = (2.0 * b / 0.01).round() as usize;
    let at = |i: usize| -b + i as f64 * 0.01;
    let mut best = (f64::INFINITY, [0.0; 4]);
    for i in 0..=steps {
        for j in 0..=steps {
            for k in 0..=steps {
                for l in 0..=steps {
                    let x = [at(i), at(j), at(k), at(l)];
                    let v = f(&x);
                    if v < best.0 {
                        best = (v, x);
                    }
                }
            }
        }
    }
    let (mut fb, mut xb) = best;
    let mut step = 0.01;
    while step > 1e-9 {
        let mut improved = true;
        while improved {
            improved = false;
            for c in 0..4 {
                for dir in [-1.0, 1.0] {
                    let mut y = xb;
                    y[c] = (y[c] + dir * step).clamp(-b, b);
                    let v = f(&y);
                    if v < fb - 1e-15 {
                        (fb, xb, improved) = (v, y, true);
                    }
                }
            }
        }
        step *= 0.5;
    }
    fb
}

#[test]
fn c5_property_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let mut lines = Vec::new();

    // view factor against ray casting
    let rect = (-0.1225, 0.1225, -0.03, 0.03);
    let analytic = point_to_rectangle(0.1, 0.05, rect.0, rect.1, rect.2, rect.3, 0.15);
    let vf_err = (analytic - ray_cast(0.1, 0.05, rect, 0.15, 2_000_000)).abs();
    lines.push(("view factor vs ray casting", vf_err, 1e-3));

    // conduction-only energy balance
    let cfg = PlantConfig::default();
    let sim = Simulator::new(cfg.clone()).unwrap().with_physics(Physics {
        radiation: false,
        convection: false,
        conduction: true,
    });
    let mut state = sim.initial_state();
    state.sheet_t.iter_mut().for_each(|t| *t = rng.gen_range(280.0..480.0));
    let e0: f64 = state.sheet_t.iter().sum();
    for _ in 0..100 {
        state = sim.step_with_loads(&state, &[250.0; 15], &[0.0; 15], 6.0).unwrap();
    }
    let drift = (state.sheet_t.iter().sum::<f64>() - e0).abs() / e0;
    lines.push(("conduction energy drift (relative)", drift, 1e-9));

    // analytic Jacobian against central differences
    let model = random_model(&mut rng);
    let dim = model.layout.dim();
    let mut worst_rel = 0.0f64;
    for _ in 0..5 {
        let x: Vec<f64> = (0..dim)
            .map(|j| model.normalization.mean[j] + model.normalization.scale[j] * rng.gen_range(-1.0..1.0))
            .collect();
        let lin = linearize(&model, &x, &[0.0; 3]).unwrap();
        for j in 0..dim {
            let h = 1e-5 * model.normalization.scale[j];
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let (yp, ym) = (model.eval(&xp), model.eval(&xm));
            for c in 0..model.layout.z {
                let fd = (yp[c] - ym[c]) / (2.0 * h);
                let an = lin.fx[(c, j)];
                worst_rel = worst_rel.max((fd - an).abs() / an.abs().max(1e-8));
            }
        }
    }
    lines.push(("linearization vs finite differences (relative)", worst_rel, 1e-4));

    // QP against a lattice search
    let mut worst_qp = 0.0f64;
    for _ in 0..3 {
        let a = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let h = &a * a.transpose() + DMatrix::identity(4, 4) * 0.5;
        let g = DVector::from_fn(4, |_, _| rng.gen_range(-3.0..3.0));
        let b = 0.5;
        let mut c = DMatrix::zeros(8, 4);
        for i in 0..4 {
            c[(2 * i, i)] = 1.0;
            c[(2 * i + 1, i)] = -1.0;
        }
        let problem = QpProblem {
            hessian: h.clone(),
            gradient: g.clone(),
            c,
            d: DVector::from_element(8, b),
        };
        let sol = solve_qp(&problem, &QpSettings::default()).unwrap();
        worst_qp = worst_qp.max((sol.objective - lattice_minimum(&h, &g, b)).abs());
    }
    lines.push(("QP objective vs lattice search", worst_qp, 1e-4));

    // model file round trip on random regressors
    let back = read_model(&write_model(&model), "mem").unwrap();
    let mut mismatches = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-100.0..100.0)).collect();
        if model.eval(&x) != back.eval(&x) {
            mismatches += 1.0;
        }
    }
    lines.push(("model file round trip mismatches", mismatches, 0.5));

    // integration step halving over 600 s
    let run = |dt_sim: f64| {
        let mut sim = Simulator::new(PlantConfig { dt_sim, ..Default::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = sim.initial_state();
        let mut p = vec![500.0; 15];
        for k in 0..100 {
            if k % 10 == 0 {
                p = (0..15).map(|_| rng.gen_range(0.0..=500.0)).collect();
            }
            s = sim.step(&s, &p, 6.0).unwrap();
        }
        s
    };
    let (a, b) = (run(0.5), run(0.25));
    let halving = a
        .sheet_t
        .iter()
        .zip(&b.sheet_t)
        .chain(a.heater_t.iter().zip(&b.heater_t))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    lines.push(("step halving change [K]", halving, 0.01));

    let pass = lines.iter().all(|(_, v, limit)| v < limit);
    let detail: Vec<String> = lines.iter().map(|(n, v, l)| format!("{n} {v:.2e} (< {l:e})")).collect();
    report("5", "property suite", pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn c6_out_of_reach_results_declared() {
    // Results that cannot be reproduced here must be named in the README's
    // "Out of reach" section rather than silently dropped.
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap_or_default();
    let section = readme
        .split("## ")
        .find(|s| s.starts_with("Out of reach"))
        .unwrap_or_default();
    let items = [
        ("adaptive MPC baseline", "AMPC"),
        ("MPC-guided DRL baseline", "DRL"),
        ("90 ms online timing", "90 ms"),
        ("physical rig results", "rig"),
    ];
    let missing: Vec<&str> = items.iter().filter(|(_, key)| !section.contains(key)).map(|(n, _)| *n).collect();
    let pass = missing.is_empty();
    report(
        "6",
        "out-of-reach results declared",
        pass,
        &if pass {
            "README lists the baseline controllers, the 90 ms timing and the rig results as excluded".to_string()
        } else {
            format!("README does not declare: {}", missing.join(", "))
        },
    );
    assert!(pass);
}
