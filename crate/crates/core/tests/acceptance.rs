//! Exit criteria. Prints one line per criterion and exits non-zero if any
//! of them fails. Runs without the libtest harness so every line is shown.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DVector;
use pmsm_dnn_core::adaptation::feasible_p_interval;
use pmsm_dnn_core::config::{ExperimentConfig, Mode};
use pmsm_dnn_core::data::{write_csv, write_error_history, write_lyapunov_history, write_metrics, Metrics};
use pmsm_dnn_core::dnn::{activation_jacobian, ActivationKind};
use pmsm_dnn_core::pipeline::{run_plant, run_teacher, PlantExperiment};
use pmsm_dnn_core::plant::{electromagnetic_torque, LoadProfile, PmsmParams};
use pmsm_dnn_core::simulation::{generate_plant_data, integrate, IdentificationRun, IntegratorSpec, PlantScenario, PlantSimSettings};
use pmsm_dnn_core::SpeedScenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Criterion 1
const CONVERGENCE_RATIO: f64 = 1e-3;
const MONOTONE_FRACTION: f64 = 0.99;
const MONOTONE_TOL: f64 = 1e-3;
const RUNTIME_LIMIT_S: f64 = 60.0;
// Criterion 2
const DESCENT_FRACTION: f64 = 0.99;
const FINE_DT: f64 = 5e-6;
// Criterion 3
const SOLVER_CASES: usize = 1000;
const GRID_STEP: f64 = 1e-4;
const GRID_MAX: f64 = 10.0;
// Criteria 4 to 6
const CASE1_R2: f64 = 0.99;
const CASE1_RMSE_OF_RANGE: f64 = 0.02;
const CASE2_R2: f64 = 0.98;
const CASE3_R2: f64 = 0.95;
// Criterion 7
const RK4_ORDER: f64 = 3.8;
const JACOBIAN_REL: f64 = 1e-6;
const LIPSCHITZ_PAIRS: usize = 10_000;
const METRIC_FUZZ_CASES: usize = 10_000;
const TORQUE_BALANCE: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn teacher_cfg(dt: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.mode = Mode::Teacher;
    cfg.integrator = IntegratorSpec::rk4(dt);
    cfg
}

fn range(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// (ε, fraction of interior samples with V̇_num ≤ −C‖e‖² + ε).
fn descent(run: &IdentificationRun) -> (f64, f64) {
    let v = run.lyapunov.as_ref().expect("teacher run records V");
    let exact = run.lyapunov_rate.as_ref().expect("teacher run records V̇");
    let h = run.times[1] - run.times[0];
    let n = v.len();
    let numeric: Vec<f64> = (1..n - 1).map(|k| (v[k + 1] - v[k - 1]) / (2.0 * h)).collect();
    let eps = numeric.iter().zip(&exact[1..n - 1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let c = run.gains.margin;
    let ok = numeric
        .iter()
        .zip(&run.error_norm[1..n - 1])
        .filter(|(d, e)| **d <= -c * *e * *e + eps)
        .count();
    (eps, ok as f64 / numeric.len() as f64)
}

fn criteria_1_2() -> (Outcome, Outcome) {
    let started = Instant::now();
    let coarse = run_teacher(&teacher_cfg(1e-5));
    let elapsed = started.elapsed().as_secs_f64();
    let fine = run_teacher(&teacher_cfg(FINE_DT));
    let (coarse, fine) = match (coarse, fine) {
        (Ok(a), Ok(b)) => (a.run, b.run),
        (Err(e), _) | (_, Err(e)) => {
            return (outcome(false, format!("teacher run failed: {e}")), outcome(false, format!("teacher run failed: {e}")));
        }
    };

    let ratio = coarse.final_error() / coarse.initial_error();
    let v = coarse.lyapunov.as_ref().expect("teacher run records V");
    let tol = MONOTONE_TOL * range(v);
    let mono = v.windows(2).filter(|w| w[1] - w[0] <= tol).count() as f64 / (v.len() - 1) as f64;
    let c1 = outcome(
        ratio <= CONVERGENCE_RATIO && mono >= MONOTONE_FRACTION && elapsed < RUNTIME_LIMIT_S,
        format!(
            "teacher convergence: |e(T)|/|e(0)| = {ratio:.3e} (<= {CONVERGENCE_RATIO:e}), V non-increasing at {:.2}% (>= {}%), {elapsed:.2} s (< {RUNTIME_LIMIT_S} s)",
            100.0 * mono,
            100.0 * MONOTONE_FRACTION
        ),
    );

    let (eps, frac) = descent(&coarse);
    let (eps_half, frac_half) = descent(&fine);
    let c2 = outcome(
        frac >= DESCENT_FRACTION && frac_half >= DESCENT_FRACTION && eps_half <= 0.5 * eps,
        format!(
            "descent margin: {:.2}% / {:.2}% of samples (>= {}%), eps(dt) = {eps:.3e}, eps(dt/2) = {eps_half:.3e} (<= eps/2)",
            100.0 * frac,
            100.0 * frac_half,
            100.0 * DESCENT_FRACTION
        ),
    );
    (c1, c2)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let n_grid = (GRID_MAX / GRID_STEP).round() as usize;
    let (mut feasible, mut wrong) = (0, 0);
    let mut first_bad = None;
    for case in 0..SOLVER_CASES {
        let ell = rng.random_range(0.05..5.0);
        let eta = rng.random_range(-10.0..-0.05);
        let beta = rng.random_range(0.0..3.0);
        let c = rng.random_range(0.01..2.0);
        let rep = match feasible_p_interval(ell, eta, beta, c) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("solver rejected case {case}: {e}")),
        };
        feasible += rep.is_feasible() as usize;
        for k in 1..=n_grid {
            let p = k as f64 * GRID_STEP;
            let brute = p * p * ell + 2.0 * p * eta + beta + c <= 0.0;
            if brute == rep.contains(p) {
                continue;
            }
            let near_edge = rep
                .interval
                .is_some_and(|(lo, hi)| (p - lo).abs() <= GRID_STEP || (p - hi).abs() <= GRID_STEP);
            if !near_edge {
                wrong += 1;
                first_bad.get_or_insert((case, p));
            }
        }
    }
    outcome(
        wrong == 0,
        format!(
            "feasibility solver vs grid: {SOLVER_CASES} cases ({feasible} feasible), {wrong} misclassified grid points{}",
            first_bad.map_or(String::new(), |(c, p)| format!(", first at case {c} p = {p}"))
        ),
    )
}

fn plant(preset: &str) -> Result<PlantExperiment, String> {
    let cfg = ExperimentConfig::preset(preset).map_err(|e| e.to_string())?;
    run_plant(&cfg).map_err(|e| format!("{preset}: {e}"))
}

fn r2(m: &Metrics) -> f64 {
    m.r2.unwrap_or(f64::NEG_INFINITY)
}

fn criterion_4() -> Outcome {
    match plant("case1") {
        Ok(ex) => {
            let m = &ex.metrics;
            let rel = m.pooled.rmse / m.truth_range;
            outcome(
                r2(&m.pooled) >= CASE1_R2 && rel <= CASE1_RMSE_OF_RANGE,
                format!(
                    "case1 ramp 400->800 rpm: R2 = {} (>= {CASE1_R2}), RMSE = {:.3e} A = {:.1}% of range {:.3e} A (<= {}%)",
                    m.pooled.r2_text(),
                    m.pooled.rmse,
                    100.0 * rel,
                    m.truth_range,
                    100.0 * CASE1_RMSE_OF_RANGE
                ),
            )
        }
        Err(e) => outcome(false, e),
    }
}

fn criterion_5() -> Outcome {
    match plant("case2") {
        Ok(ex) => outcome(
            r2(&ex.metrics.pooled) >= CASE2_R2,
            format!("case2 1 N*m step at 1000 rpm: R2 = {} (>= {CASE2_R2})", ex.metrics.pooled.r2_text()),
        ),
        Err(e) => outcome(false, e),
    }
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for preset in ["case3-step", "case3-ramp", "case3-sin"] {
        match plant(preset) {
            Ok(ex) => {
                pass &= r2(&ex.metrics.pooled) >= CASE3_R2;
                parts.push(format!("{preset} R2 = {}", ex.metrics.pooled.r2_text()));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{preset} faulted: {e}"));
            }
        }
    }
    outcome(pass, format!("case3 load robustness: {} (each >= {CASE3_R2})", parts.join(", ")))
}

fn rk4_order() -> f64 {
    let err = |dt: f64| {
        let tr = integrate(
            |_, x, dx| {
                dx[0] = -x[0];
                Ok(())
            },
            &[1.0],
            0.0,
            1.0,
            &IntegratorSpec::rk4(dt),
        )
        .expect("decay integrates");
        (tr.last()[0] - (-1f64).exp()).abs()
    };
    (err(0.05) / err(0.025)).log2()
}

/// Largest relative gap between analytic and central-difference Jacobians.
fn jacobian_gap(rng: &mut ChaCha8Rng) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for kind in [ActivationKind::Tanh, ActivationKind::Sigmoid, ActivationKind::Identity] {
        for _ in 0..200 {
            let v = DVector::from_fn(8, |_, _| rng.random_range(-4.0..4.0));
            let jac = activation_jacobian(kind, &v);
            for i in 0..v.len() {
                let (mut up, mut dn) = (v.clone(), v.clone());
                up[i] += h;
                dn[i] -= h;
                let fd = (kind.apply(&up) - kind.apply(&dn)) / (2.0 * h);
                for j in 0..v.len() {
                    let gap = (jac[(j, i)] - fd[j]).abs();
                    worst = worst.max(if fd[j] == 0.0 { gap } else { gap / fd[j].abs() });
                }
            }
        }
    }
    worst
}

fn lipschitz_violations(rng: &mut ChaCha8Rng) -> usize {
    let mut bad = 0;
    for kind in [ActivationKind::Tanh, ActivationKind::Sigmoid] {
        for _ in 0..LIPSCHITZ_PAIRS {
            let a = DVector::from_fn(8, |_, _| rng.random_range(-10.0..10.0));
            let b = DVector::from_fn(8, |_, _| rng.random_range(-10.0..10.0));
            let lhs = (kind.apply(&a) - kind.apply(&b)).norm_squared();
            if lhs > kind.lipschitz_sq() * (&a - &b).norm_squared() * (1.0 + 1e-12) {
                bad += 1;
            }
        }
    }
    bad
}

fn metric_violations(rng: &mut ChaCha8Rng) -> usize {
    (0..METRIC_FUZZ_CASES)
        .filter(|_| {
            let n = rng.random_range(1..64);
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
            let t: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
            let m = Metrics::of(&p, &t).expect("equal lengths");
            m.rmse < m.mae * (1.0 - 1e-12)
        })
        .count()
}

fn torque_imbalance() -> Result<f64, String> {
    let params = PmsmParams::default();
    let load = 0.5;
    let scn = PlantScenario {
        speed: SpeedScenario::Constant { rpm: 1000.0 },
        load: LoadProfile::Constant { magnitude: load },
        ..Default::default()
    };
    let tr = generate_plant_data(&scn, &params, 1000.0, 0.5, &PlantSimSettings::default(), 0).map_err(|e| e.to_string())?;
    let last = tr.last();
    let demand = load + params.viscous_friction * last[2];
    Ok((electromagnetic_torque(last[1], &params) - demand).abs() / demand)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let order = rk4_order();
    let jac = jacobian_gap(&mut rng);
    let lip = lipschitz_violations(&mut rng);
    let met = metric_violations(&mut rng);
    let torque = match torque_imbalance() {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("torque balance run failed: {e}")),
    };
    outcome(
        order >= RK4_ORDER && jac <= JACOBIAN_REL && lip == 0 && met == 0 && torque <= TORQUE_BALANCE,
        format!(
            "numerics: RK4 order {order:.3} (>= {RK4_ORDER}), Jacobian rel gap {jac:.2e} (<= {JACOBIAN_REL:e}), \
             Lipschitz violations {lip}/{}, RMSE < MAE in {met}/{METRIC_FUZZ_CASES}, torque imbalance {:.3}% (<= {}%)",
            2 * LIPSCHITZ_PAIRS,
            100.0 * torque,
            100.0 * TORQUE_BALANCE
        ),
    )
}

fn write_teacher(dir: &Path) -> pmsm_dnn_core::Result<()> {
    let ex = run_teacher(&teacher_cfg(1e-5))?;
    let mut model = pmsm_dnn_core::ModelFile::new(ex.run.weights.clone());
    model.x_hat = Some(ex.run.final_x_hat);
    model.write(&dir.join("model.txt"))?;
    write_error_history(&ex.run, &dir.join("error_history.csv"))?;
    write_lyapunov_history(&ex.run, &dir.join("lyapunov_history.csv"))
}

fn write_case1(dir: &Path) -> pmsm_dnn_core::Result<()> {
    let ex = run_plant(&ExperimentConfig::preset("case1")?)?;
    write_csv(&ex.data, &dir.join("data.csv"))?;
    ex.model.write(&dir.join("model.txt"))?;
    write_error_history(&ex.run, &dir.join("error_history.csv"))?;
    write_csv(&ex.prediction, &dir.join("prediction.csv"))?;
    write_metrics(&ex.metrics, &dir.join("metrics.csv"))
}

fn criterion_8() -> Outcome {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().expect("tempdir")).collect();
    let mut files = 0;
    let mut differing = Vec::new();
    for d in &dirs {
        for sub in ["teacher", "case1"] {
            std::fs::create_dir_all(d.path().join(sub)).expect("mkdir");
        }
        if let Err(e) = write_teacher(&d.path().join("teacher")).and_then(|_| write_case1(&d.path().join("case1"))) {
            return outcome(false, format!("determinism run failed: {e}"));
        }
    }
    for sub in ["teacher", "case1"] {
        let mut names: Vec<_> = std::fs::read_dir(dirs[0].path().join(sub))
            .expect("listing")
            .map(|e| e.expect("entry").file_name())
            .collect();
        names.sort();
        for name in names {
            files += 1;
            let a = std::fs::read(dirs[0].path().join(sub).join(&name)).expect("first copy");
            let b = std::fs::read(dirs[1].path().join(sub).join(&name)).ok();
            if b.as_deref() != Some(a.as_slice()) {
                differing.push(format!("{sub}/{}", name.to_string_lossy()));
            }
        }
    }
    outcome(
        differing.is_empty() && files > 0,
        format!("determinism: {files} output files compared, {} differ {differing:?}", differing.len()),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = std::thread::scope(|s| {
        let c12 = s.spawn(criteria_1_2);
        let c3 = s.spawn(criterion_3);
        let c4 = s.spawn(criterion_4);
        let c5 = s.spawn(criterion_5);
        let c6 = s.spawn(criterion_6);
        let c7 = s.spawn(criterion_7);
        let c8 = s.spawn(criterion_8);
        let (c1, c2) = c12.join().expect("criteria 1-2");
        vec![
            (1, "convergence", c1),
            (2, "descent", c2),
            (3, "feasibility", c3.join().expect("criterion 3")),
            (4, "case1", c4.join().expect("criterion 4")),
            (5, "case2", c5.join().expect("criterion 5")),
            (6, "case3", c6.join().expect("criterion 6")),
            (7, "numerics", c7.join().expect("criterion 7")),
            (8, "determinism", c8.join().expect("criterion 8")),
        ]
    });
    results.sort_by_key(|r| r.0);
    let failed = results.iter().filter(|r| !r.2.pass).count();
    for (n, name, o) in &results {
        println!("criterion {n} {name:<12} {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
