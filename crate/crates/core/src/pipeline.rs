//! End-to-end experiments assembled from the lower-level modules.

use nalgebra::{DMatrix, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptation::{feasible_p_interval, AdaptGains, FeasibilityReport, IdentifierState};
use crate::config::{ExperimentConfig, Handoff, Mode};
use crate::data::{compute_metrics, gp_smooth, split_train_predict, MetricsReport, Normalizer};
use crate::dnn::{real_eigenvalues, weight_norm_bounds, DnnWeights, ModelFile, WeightBounds};
use crate::error::{Error, Result};
use crate::simulation::{
    generate_plant_data, predict_sampled, train_identifier, DataSource, IdentificationRun, TrainOptions, Trajectory,
};

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.random_range(-1.0..=1.0))
}

/// Ideal weights drawn from the configured seed.
pub fn synthetic_teacher(cfg: &ExperimentConfig) -> DnnWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let z = cfg.network.hidden;
    let t = &cfg.teacher;
    let mut w = DnnWeights::zeros(cfg.network.a0(), z, cfg.network.act1, cfg.network.act2);
    w.a1 = uniform(&mut rng, z, 2, t.a_scale);
    w.a2 = uniform(&mut rng, z, 2, t.a_scale);
    w.s1 = uniform(&mut rng, z, 2, t.s_scale);
    w.s2 = uniform(&mut rng, z, 2, t.s_scale);
    w
}

/// Teacher weights times `1 + noise·u`, `u ~ U(−1, 1)` entrywise, started
/// at `x0 + initial_error`.
pub fn perturbed_init(teacher: &DnnWeights, cfg: &ExperimentConfig) -> IdentifierState {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let eps = cfg.teacher.weight_noise;
    let mut perturb = |m: &DMatrix<f64>| m.map(|v| v * (1.0 + eps * rng.random_range(-1.0..=1.0)));
    let mut w = teacher.clone();
    w.a1 = perturb(&teacher.a1);
    w.a2 = perturb(&teacher.a2);
    w.s1 = perturb(&teacher.s1);
    w.s2 = perturb(&teacher.s2);
    let x0 = Vector2::from(cfg.teacher.x0);
    IdentifierState {
        x_hat: x0 + Vector2::from(cfg.teacher.initial_error),
        weights: w,
    }
}

/// Solver report for the given bounds and the resolved gains.
pub fn resolve_gains(cfg: &ExperimentConfig, bounds: &WeightBounds) -> Result<(AdaptGains, FeasibilityReport)> {
    let (_, eta) = real_eigenvalues(&cfg.network.a0())?;
    let report = feasible_p_interval(
        bounds.ell(),
        eta,
        bounds.beta(cfg.network.act1, cfg.network.act2),
        cfg.gains.margin,
    )?;
    let p = match cfg.gains.p {
        Some(p) => p,
        None => report.selected_p().ok_or_else(|| Error::Infeasible(Box::new(report.clone())))?,
    };
    Ok((cfg.gains.with_p(p), report))
}

/// Bounds used by the feasibility gate for the configured mode.
pub fn mode_bounds(cfg: &ExperimentConfig) -> WeightBounds {
    match cfg.mode {
        Mode::Teacher => weight_norm_bounds(&synthetic_teacher(cfg)),
        Mode::Plant => cfg.bounds,
    }
}

pub struct TeacherExperiment {
    pub teacher: DnnWeights,
    pub init: IdentifierState,
    pub run: IdentificationRun,
}

/// Identifier against the synthetic teacher with exact learning laws.
pub fn run_teacher(cfg: &ExperimentConfig) -> Result<TeacherExperiment> {
    cfg.validate()?;
    let teacher = synthetic_teacher(cfg);
    let init = perturbed_init(&teacher, cfg);
    let bounds = weight_norm_bounds(&teacher);
    let (gains, _) = resolve_gains(cfg, &bounds)?;
    let opts = TrainOptions {
        gains,
        spec: cfg.integrator,
        mode: Mode::Teacher.learning_mode(),
        bounds: Some(bounds),
        record_every: cfg.teacher.record_every,
    };
    let run = train_identifier(
        DataSource::Teacher {
            weights: &teacher,
            x0: Vector2::from(cfg.teacher.x0),
            duration: cfg.teacher.duration,
        },
        &init,
        &opts,
    )?;
    Ok(TeacherExperiment { teacher, init, run })
}

/// Closed-loop plant data for the configured scenario.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Trajectory> {
    cfg.validate()?;
    generate_plant_data(&cfg.scenario, &cfg.plant, cfg.sample_rate, cfg.duration, &cfg.sim, cfg.seed)
}

/// Random identifier start for plant runs.
pub fn plant_init(cfg: &ExperimentConfig, x_hat: Vector2<f64>) -> IdentifierState {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let z = cfg.network.hidden;
    let mut w = DnnWeights::zeros(cfg.network.a0(), z, cfg.network.act1, cfg.network.act2);
    w.a1 = uniform(&mut rng, z, 2, cfg.init.a_scale);
    w.a2 = uniform(&mut rng, z, 2, cfg.init.a_scale);
    w.s1 = uniform(&mut rng, z, 2, cfg.init.s_scale);
    w.s2 = uniform(&mut rng, z, 2, cfg.init.s_scale);
    IdentifierState { x_hat, weights: w }
}

/// Trains on the current columns of `train` (already smoothed if wanted)
/// and returns the saved model.
pub fn identify_plant(train: &Trajectory, cfg: &ExperimentConfig) -> Result<(IdentificationRun, ModelFile)> {
    cfg.validate()?;
    let currents = train.currents();
    let norm = Normalizer::fit(&currents, cfg.init.normalization);
    let scaled = norm.apply(&currents);
    let init = plant_init(cfg, scaled.vec2(0));
    let (gains, _) = resolve_gains(cfg, &cfg.bounds)?;
    let opts = TrainOptions {
        gains,
        spec: cfg.integrator,
        mode: Mode::Plant.learning_mode(),
        bounds: Some(cfg.bounds),
        record_every: 1,
    };
    let run = train_identifier(DataSource::Samples(&scaled), &init, &opts)?;
    let mut model = ModelFile::new(run.weights.clone());
    model.x_hat = Some(run.final_x_hat);
    model.center = Some(norm.center);
    model.scale = Some(norm.scale);
    Ok((run, model))
}

/// Open-loop prediction in physical units. `start` overrides the model's
/// stored state and is given in physical units.
pub fn predict_model(
    model: &ModelFile,
    start: Option<Vector2<f64>>,
    n_samples: usize,
    t0: f64,
    sample_dt: f64,
    cfg: &ExperimentConfig,
) -> Result<Trajectory> {
    let norm = Normalizer {
        center: model.center.unwrap_or_else(Vector2::zeros),
        scale: model.scale.unwrap_or_else(|| Vector2::repeat(1.0)),
    };
    let x0 = match start {
        Some(x) => norm.forward(&x),
        None => model
            .x_hat
            .ok_or_else(|| Error::invalid("model", "no stored state; a start point is required"))?,
    };
    let scaled = predict_sampled(&model.weights, &x0, n_samples, sample_dt, &cfg.integrator).map_err(|e| match e {
        Error::Diverged { t, partial } => Error::Diverged {
            t: t0 + t,
            partial: partial.map(|p| {
                let mut p = norm.invert(&p);
                p.t0 = t0;
                Box::new(p)
            }),
        },
        e => e,
    })?;
    let mut out = norm.invert(&scaled);
    out.t0 = t0;
    Ok(out)
}

pub struct PlantExperiment {
    pub data: Trajectory,
    pub train: Trajectory,
    pub truth: Trajectory,
    pub run: IdentificationRun,
    pub model: ModelFile,
    pub prediction: Trajectory,
    pub metrics: MetricsReport,
}

/// Simulate, smooth the training part, train, predict the held-out part.
pub fn run_plant(cfg: &ExperimentConfig) -> Result<PlantExperiment> {
    let data = simulate(cfg)?;
    let (train_raw, truth_full) = split_train_predict(&data, cfg.n_train)?;
    let train = if cfg.smooth {
        gp_smooth(&train_raw.currents(), &cfg.gp)?
    } else {
        train_raw.currents()
    };
    let truth = truth_full.currents();
    let (run, model) = identify_plant(&train, cfg)?;
    let start = match cfg.handoff {
        Handoff::Strict => None,
        Handoff::WarmStart => Some(truth.vec2(0)),
    };
    let prediction = predict_model(&model, start, truth.len(), truth.t0, truth.dt, cfg)?;
    let metrics = compute_metrics(&prediction, &truth)?;
    Ok(PlantExperiment {
        data,
        train,
        truth,
        run,
        model,
        prediction,
        metrics,
    })
}

/// Plant runs for each seed, in parallel across available cores. Results
/// come back in `seeds` order.
pub fn sweep_seeds(cfg: &ExperimentConfig, seeds: &[u64]) -> Vec<Result<MetricsReport>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut out = Vec::with_capacity(seeds.len());
    for chunk in seeds.chunks(workers) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&seed| {
                    let mut c = cfg.clone();
                    c.seed = seed;
                    s.spawn(move || run_plant(&c).map(|ex| ex.metrics))
                })
                .collect();
            out.extend(handles.into_iter().map(|h| h.join().expect("sweep worker panicked")));
        });
    }
    out
}
