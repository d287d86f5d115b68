//! Fixed-step integration and the three co-simulation pipelines: closed-loop
//! plant data generation, identifier training, and open-loop prediction.

use nalgebra::{DMatrix, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::adaptation::{
    branch_rates, check_matrix_inequality, feasible_p_interval, lyapunov_rate, lyapunov_value,
    AdaptGains, ErrorState, FeasibilityReport, IdentifierState, LearningMode, WeightErrors,
};
use crate::dnn::{rate_unchecked, weight_norm_bounds, DnnWeights, WeightBounds};
use crate::error::{Error, Result};
use crate::foc::{foc_step, speed_reference, FocController, FocTuning, SpeedScenario};
use crate::plant::{
    load_torque, rate_unchecked as plant_rate, rpm_to_rad_s, LoadProfile, PlantState, PmsmParams,
    UncertaintyModel, Voltages,
};

/// Uniformly sampled state sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, samples: Vec<Vec<f64>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "a trajectory needs at least one sample"));
        }
        if !(t0.is_finite() && dt.is_finite() && dt >= 0.0) || (samples.len() > 1 && dt <= 0.0) {
            return Err(Error::invalid("dt", format!("bad time base t0 = {t0}, dt = {dt}")));
        }
        let dim = samples[0].len();
        for (k, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::dim(
                    "samples",
                    format!("sample {k} has {} components, expected {dim}", s.len()),
                ));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { component: "trajectory sample" });
            }
        }
        Ok(Self { t0, dt, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + self.dt * k as f64
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn last(&self) -> &[f64] {
        self.samples.last().expect("non-empty trajectory")
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[c]).collect()
    }

    /// First `n` components of every sample.
    pub fn leading(&self, n: usize) -> Trajectory {
        Trajectory {
            t0: self.t0,
            dt: self.dt,
            samples: self.samples.iter().map(|s| s[..n].to_vec()).collect(),
        }
    }

    /// `(i_d, i_q)` columns of a plant trajectory.
    pub fn currents(&self) -> Trajectory {
        self.leading(2)
    }

    /// Every `k`-th sample starting with the first.
    pub fn decimate(&self, k: usize) -> Trajectory {
        assert!(k >= 1);
        Trajectory {
            t0: self.t0,
            dt: self.dt * k as f64,
            samples: self.samples.iter().step_by(k).cloned().collect(),
        }
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Trajectory {
        Trajectory {
            t0: self.time(range.start),
            dt: self.dt,
            samples: self.samples[range].to_vec(),
        }
    }

    pub fn vec2(&self, k: usize) -> Vector2<f64> {
        Vector2::new(self.samples[k][0], self.samples[k][1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub method: Method,
    pub dt: f64,
}

impl IntegratorSpec {
    pub fn rk4(dt: f64) -> Self {
        Self { method: Method::Rk4, dt }
    }

    pub fn euler(dt: f64) -> Self {
        Self { method: Method::Euler, dt }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("integrator step must be positive (got {})", self.dt)));
        }
        Ok(())
    }

    /// Number of steps covering `span`, which must be a multiple of `dt`
    /// up to rounding.
    pub fn steps_for(&self, span: f64) -> Result<usize> {
        self.validate()?;
        if !(span.is_finite() && span >= 0.0) {
            return Err(Error::invalid("t_span", format!("span must be non-negative (got {span})")));
        }
        let n = (span / self.dt).round();
        if (n * self.dt - span).abs() > 1e-9 * span.max(self.dt) {
            return Err(Error::invalid(
                "dt",
                format!("step {} does not divide the span {span}", self.dt),
            ));
        }
        Ok(n as usize)
    }
}

/// Scratch buffers for one explicit step.
pub struct Stepper {
    method: Method,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stepper {
    pub fn new(method: Method, dim: usize) -> Self {
        Self {
            method,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `x` from `t` to `t + dt` in place.
    pub fn step<F>(&mut self, f: &mut F, t: f64, x: &mut [f64], dt: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let n = x.len();
        match self.method {
            Method::Euler => {
                f(t, x, &mut self.k[0])?;
                for i in 0..n {
                    x[i] += dt * self.k[0][i];
                }
            }
            Method::Rk4 => {
                let [k1, k2, k3, k4] = &mut self.k;
                let tmp = &mut self.tmp;
                f(t, x, k1)?;
                for i in 0..n {
                    tmp[i] = x[i] + 0.5 * dt * k1[i];
                }
                f(t + 0.5 * dt, tmp, k2)?;
                for i in 0..n {
                    tmp[i] = x[i] + 0.5 * dt * k2[i];
                }
                f(t + 0.5 * dt, tmp, k3)?;
                for i in 0..n {
                    tmp[i] = x[i] + dt * k3[i];
                }
                f(t + dt, tmp, k4)?;
                for i in 0..n {
                    x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        Ok(())
    }
}

/// Integrates `ẋ = deriv(t, x)` over `[t0, t1]`, recording every step.
pub fn integrate<F>(mut deriv: F, x0: &[f64], t0: f64, t1: f64, spec: &IntegratorSpec) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(t1 > t0) {
        return Err(Error::invalid("t_span", format!("need t1 > t0 (got [{t0}, {t1}])")));
    }
    let n = spec.steps_for(t1 - t0)?;
    let mut stepper = Stepper::new(spec.method, x0.len());
    let mut x = x0.to_vec();
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(x.clone());
    for k in 0..n {
        let t = t0 + spec.dt * k as f64;
        stepper.step(&mut deriv, t, &mut x, spec.dt)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                t: t + spec.dt,
                partial: Some(Box::new(Trajectory { t0, dt: spec.dt, samples })),
            });
        }
        samples.push(x.clone());
    }
    Ok(Trajectory { t0, dt: spec.dt, samples })
}

/// Closed-loop operating scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantScenario {
    pub speed: SpeedScenario,
    pub load: LoadProfile,
    pub uncertainty: UncertaintyModel,
    /// Initial shaft speed; defaults to the reference at t = 0.
    pub initial_speed_rpm: Option<f64>,
    /// Standard deviation of Gaussian noise added to recorded currents.
    pub measurement_noise: f64,
}

impl Default for PlantScenario {
    fn default() -> Self {
        Self {
            speed: SpeedScenario::default(),
            load: LoadProfile::none(),
            uncertainty: UncertaintyModel::disabled(),
            initial_speed_rpm: None,
            measurement_noise: 0.0,
        }
    }
}

/// Plant integration and controller rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSimSettings {
    /// RK4 step for the plant, s.
    pub plant_dt: f64,
    /// Controller update rate, Hz; voltages are held between updates.
    pub control_rate: f64,
    pub foc: FocTuning,
}

impl Default for PlantSimSettings {
    fn default() -> Self {
        Self {
            plant_dt: 1e-6,
            control_rate: 10_000.0,
            foc: FocTuning::default(),
        }
    }
}

/// Column order of [`generate_plant_data`] output.
pub const PLANT_COLUMNS: [&str; 5] = ["i_d", "i_q", "omega_m", "u_d", "u_q"];

fn integer_ratio(num: f64, den: f64, what: &'static str) -> Result<usize> {
    let r = num / den;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-6 * n {
        return Err(Error::invalid(what, format!("{num} is not an integer multiple of {den}")));
    }
    Ok(n as usize)
}

/// Runs the FOC loop against the plant and records `(i_d, i_q, ω_m, u_d, u_q)`
/// at `sample_rate`. The recorded voltages are the ones applied during the
/// control period that starts at the sample.
pub fn generate_plant_data(
    scenario: &PlantScenario,
    params: &PmsmParams,
    sample_rate: f64,
    duration: f64,
    settings: &PlantSimSettings,
    seed: u64,
) -> Result<Trajectory> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid("sample_rate", format!("must be positive (got {sample_rate})")));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid("duration", format!("must be positive (got {duration})")));
    }
    params.validate().map_err(Error::Config)?;
    let control_period = 1.0 / settings.control_rate;
    let sample_period = 1.0 / sample_rate;
    let substeps = integer_ratio(control_period, settings.plant_dt, "plant_dt")?;
    let controls_per_sample = integer_ratio(sample_period, control_period, "sample_rate")?;
    let n_samples = (duration * sample_rate).round() as usize;
    if n_samples == 0 {
        return Err(Error::invalid("duration", "shorter than one sample period"));
    }
    let h = control_period / substeps as f64;

    let initial_rpm = scenario
        .initial_speed_rpm
        .unwrap_or_else(|| speed_reference(&scenario.speed, 0.0));
    let mut state = PlantState::new(0.0, 0.0, rpm_to_rad_s(initial_rpm));
    let mut ctl = FocController::new(params, &settings.foc);
    let limit = params.current_limit();
    let mut stepper = Stepper::new(Method::Rk4, 3);
    let mut x = state.to_array();

    let noise = if scenario.measurement_noise > 0.0 {
        Some(Normal::new(0.0, scenario.measurement_noise).map_err(|e| Error::invalid("measurement_noise", e.to_string()))?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut samples = Vec::with_capacity(n_samples);
    let total_controls = n_samples * controls_per_sample;
    for c in 0..total_controls {
        let t_c = c as f64 * control_period;
        let v = foc_step(&state, speed_reference(&scenario.speed, t_c), &mut ctl, params, control_period)?;
        if c % controls_per_sample == 0 {
            let (mut i_d, mut i_q) = (state.i_d, state.i_q);
            if let Some(n) = &noise {
                i_d += n.sample(&mut rng);
                i_q += n.sample(&mut rng);
            }
            samples.push(vec![i_d, i_q, state.omega_m, v.u_d, v.u_q]);
        }
        for s in 0..substeps {
            let t = t_c + h * s as f64;
            let mut rhs = |tt: f64, xs: &[f64], dx: &mut [f64]| -> Result<()> {
                let tl = load_torque(&scenario.load, tt)?;
                let r = plant_rate(&PlantState::from_slice(xs), &v, tl, params, &scenario.uncertainty);
                dx[0] = r.di_d;
                dx[1] = r.di_q;
                dx[2] = r.domega_m;
                Ok(())
            };
            stepper.step(&mut rhs, t, &mut x, h)?;
            state = PlantState::from_slice(&x);
            if let Err(e) = state.check_finite() {
                let _ = e;
                return Err(Error::Diverged { t: t + h, partial: None });
            }
            state.check_current_limit(limit, t + h)?;
        }
    }
    Trajectory::new(0.0, sample_period, samples)
}

/// What the identifier is trained against.
#[derive(Clone, Copy, Debug)]
pub enum DataSource<'a> {
    /// Measured samples, reconstructed by zero-order hold.
    Samples(&'a Trajectory),
    /// A known ideal network integrated alongside the identifier.
    Teacher {
        weights: &'a DnnWeights,
        x0: Vector2<f64>,
        duration: f64,
    },
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub gains: AdaptGains,
    pub spec: IntegratorSpec,
    pub mode: LearningMode,
    /// Bounds on the ideal weights; derived from the teacher when `None`.
    pub bounds: Option<WeightBounds>,
    /// Teacher runs record every `record_every` integration steps; sampled
    /// runs record at every sample instant.
    pub record_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentificationRun {
    pub weights: DnnWeights,
    pub final_x_hat: Vector2<f64>,
    /// Target state at the end of the run (teacher runs only).
    pub final_x: Option<Vector2<f64>>,
    pub mode: LearningMode,
    pub gains: AdaptGains,
    pub feasibility: FeasibilityReport,
    pub times: Vec<f64>,
    pub error_norm: Vec<f64>,
    /// `V` at each recorded instant (teacher runs).
    pub lyapunov: Option<Vec<f64>>,
    /// Exact `V̇` at each recorded instant (teacher runs).
    pub lyapunov_rate: Option<Vec<f64>>,
}

impl IdentificationRun {
    pub fn initial_error(&self) -> f64 {
        self.error_norm[0]
    }

    pub fn final_error(&self) -> f64 {
        *self.error_norm.last().expect("non-empty history")
    }
}

/// Checks the gains against the feasibility condition and returns the report.
pub fn feasibility_gate(a0: &nalgebra::Matrix2<f64>, bounds: &WeightBounds, id: &DnnWeights, gains: &AdaptGains) -> Result<FeasibilityReport> {
    gains.validate()?;
    let (_, eta) = crate::dnn::real_eigenvalues(a0)?;
    let ell = bounds.ell();
    let beta = bounds.beta(id.act1, id.act2);
    let report = feasible_p_interval(ell, eta, beta, gains.margin)?;
    if !check_matrix_inequality(gains.p, a0, ell, beta, gains.margin)? {
        return Err(Error::Infeasible(Box::new(report)));
    }
    Ok(report)
}

struct Layout {
    z: usize,
    teacher: bool,
}

impl Layout {
    fn base(&self) -> usize {
        if self.teacher {
            4
        } else {
            2
        }
    }
    fn block(&self) -> usize {
        2 * self.z
    }
    fn dim(&self) -> usize {
        self.base() + 4 * self.block()
    }
    fn range(&self, m: usize) -> std::ops::Range<usize> {
        let start = self.base() + m * self.block();
        start..start + self.block()
    }

    fn pack(&self, x_hat: &Vector2<f64>, x: Option<&Vector2<f64>>, w: &DnnWeights) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        v[0] = x_hat[0];
        v[1] = x_hat[1];
        if let Some(x) = x {
            v[2] = x[0];
            v[3] = x[1];
        }
        for (m, mat) in [&w.a1, &w.a2, &w.s1, &w.s2].into_iter().enumerate() {
            v[self.range(m)].copy_from_slice(mat.as_slice());
        }
        v
    }

    fn unpack_into(&self, v: &[f64], w: &mut DnnWeights) {
        for (m, mat) in [&mut w.a1, &mut w.a2, &mut w.s1, &mut w.s2].into_iter().enumerate() {
            mat.as_mut_slice().copy_from_slice(&v[self.range(m)]);
        }
    }
}

/// Co-integrates the identifier state and the learning laws.
pub fn train_identifier(
    source: DataSource<'_>,
    init: &IdentifierState,
    opts: &TrainOptions,
) -> Result<IdentificationRun> {
    init.weights.validate()?;
    opts.spec.validate()?;
    let teacher = match source {
        DataSource::Teacher { weights, .. } => {
            weights.validate()?;
            if weights.a0 != init.weights.a0 {
                return Err(Error::A0Mismatch);
            }
            if weights.hidden() != init.weights.hidden() {
                return Err(Error::dim("teacher", "teacher and identifier widths differ"));
            }
            Some(weights)
        }
        DataSource::Samples(_) => None,
    };
    if opts.mode == LearningMode::TeacherKnown && teacher.is_none() {
        return Err(Error::MissingTeacher(
            "teacher-known learning needs a teacher data source",
        ));
    }
    let bounds = match (opts.bounds, teacher) {
        (Some(b), _) => b,
        (None, Some(t)) => weight_norm_bounds(t),
        (None, None) => {
            return Err(Error::invalid("bounds", "weight bounds are required for sampled data"))
        }
    };
    let feasibility = feasibility_gate(&init.weights.a0, &bounds, &init.weights, &opts.gains)?;

    let layout = Layout {
        z: init.weights.hidden(),
        teacher: teacher.is_some(),
    };
    let gains = opts.gains;
    let mut scratch = init.weights.clone();
    let s_star: Option<[DMatrix<f64>; 2]> = teacher.map(|t| [t.s1.clone(), t.s2.clone()]);
    let mut s_tilde: [DMatrix<f64>; 2] = std::array::from_fn(|_| DMatrix::zeros(layout.z, 2));

    // ẋ̂ = id(x̂), ẋ = teacher(x) or held sample, weights by the learning laws.
    let mut rhs_core = |xs: &[f64], target: Option<Vector2<f64>>, dx: &mut [f64]| {
        layout.unpack_into(xs, &mut scratch);
        let x_hat = Vector2::new(xs[0], xs[1]);
        let x = match target {
            Some(x) => x,
            None => Vector2::new(xs[2], xs[3]),
        };
        let e = x_hat - x;
        let xh_dot = rate_unchecked(&x_hat, &scratch);
        dx[0] = xh_dot[0];
        dx[1] = xh_dot[1];
        if let Some(t) = teacher {
            let x_dot = rate_unchecked(&x, t);
            dx[2] = x_dot[0];
            dx[3] = x_dot[1];
        }
        let use_tilde = opts.mode == LearningMode::TeacherKnown;
        if use_tilde {
            let ss = s_star.as_ref().expect("teacher present");
            s_tilde[0].copy_from(&(&scratch.s1 - &ss[0]));
            s_tilde[1].copy_from(&(&scratch.s2 - &ss[1]));
        }
        for i in 0..2 {
            let (a_rng, s_rng) = (layout.range(i), layout.range(2 + i));
            let (lo, hi) = dx.split_at_mut(s_rng.start);
            branch_rates(
                scratch.branch(i),
                use_tilde.then(|| &s_tilde[i]),
                &x_hat,
                &e,
                gains.c(i) * gains.p,
                gains.d(i) * gains.p,
                &mut lo[a_rng],
                &mut hi[..s_rng.len()],
            );
        }
    };

    let x0 = match source {
        DataSource::Teacher { x0, .. } => Some(x0),
        DataSource::Samples(_) => None,
    };
    let mut x = layout.pack(&init.x_hat, x0.as_ref(), &init.weights);
    let mut stepper = Stepper::new(opts.spec.method, layout.dim());
    let dt = opts.spec.dt;

    let mut times = Vec::new();
    let mut error_norm = Vec::new();
    let mut lyap = Vec::new();
    let mut lyap_rate = Vec::new();

    match source {
        DataSource::Teacher { weights: t, duration, .. } => {
            let n = opts.spec.steps_for(duration)?;
            let every = opts.record_every.max(1);
            let mut record = |k: usize, xs: &[f64], scratch: &mut DnnWeights| -> Result<()> {
                layout.unpack_into(xs, scratch);
                let id = IdentifierState {
                    x_hat: Vector2::new(xs[0], xs[1]),
                    weights: scratch.clone(),
                };
                let xt = Vector2::new(xs[2], xs[3]);
                let err = ErrorState {
                    e: id.x_hat - xt,
                    weights: Some(WeightErrors::between(&id.weights, t)),
                };
                let e_dot = rate_unchecked(&id.x_hat, &id.weights) - rate_unchecked(&xt, t);
                let rates = crate::adaptation::learning_law_rates(&id, &err.e, opts.mode, Some([&t.s1, &t.s2]), &gains)?;
                times.push(k as f64 * dt);
                error_norm.push(err.e.norm());
                lyap.push(lyapunov_value(&err, &gains)?);
                lyap_rate.push(lyapunov_rate(&err, &e_dot, &rates, &gains)?);
                Ok(())
            };
            let mut rec_scratch = init.weights.clone();
            record(0, &x, &mut rec_scratch)?;
            for k in 0..n {
                let t_k = k as f64 * dt;
                let mut f = |_t: f64, xs: &[f64], dx: &mut [f64]| -> Result<()> {
                    rhs_core(xs, None, dx);
                    Ok(())
                };
                stepper.step(&mut f, t_k, &mut x, dt)?;
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Diverged { t: t_k + dt, partial: None });
                }
                if (k + 1) % every == 0 {
                    record(k + 1, &x, &mut rec_scratch)?;
                }
            }
        }
        DataSource::Samples(traj) => {
            if traj.dim() < 2 {
                return Err(Error::dim("training data", "needs i_d and i_q columns"));
            }
            let per_sample = integer_ratio(traj.dt, dt, "integrator dt")?;
            for k in 0..traj.len() {
                let target = traj.vec2(k);
                let t_k = traj.time(k);
                times.push(t_k);
                error_norm.push((Vector2::new(x[0], x[1]) - target).norm());
                for s in 0..per_sample {
                    let t = t_k + dt * s as f64;
                    let mut f = |_t: f64, xs: &[f64], dx: &mut [f64]| -> Result<()> {
                        rhs_core(xs, Some(target), dx);
                        Ok(())
                    };
                    stepper.step(&mut f, t, &mut x, dt)?;
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Diverged { t: t + dt, partial: None });
                    }
                }
            }
        }
    }

    let mut weights = init.weights.clone();
    layout.unpack_into(&x, &mut weights);
    let teacher_mode = teacher.is_some();
    Ok(IdentificationRun {
        weights,
        final_x_hat: Vector2::new(x[0], x[1]),
        final_x: teacher_mode.then(|| Vector2::new(x[2], x[3])),
        mode: opts.mode,
        gains,
        feasibility,
        times,
        error_norm,
        lyapunov: teacher_mode.then_some(lyap),
        lyapunov_rate: teacher_mode.then_some(lyap_rate),
    })
}

/// Open-loop integration of the identifier with frozen weights, recorded at
/// every integration step.
pub fn predict(weights: &DnnWeights, x0: &Vector2<f64>, horizon: f64, spec: &IntegratorSpec) -> Result<Trajectory> {
    let n = spec.steps_for(horizon)?;
    predict_steps(weights, x0, n, 1, spec)
}

/// Prediction recorded every `sample_dt` for `n_samples` samples (the first
/// being `x0`).
pub fn predict_sampled(
    weights: &DnnWeights,
    x0: &Vector2<f64>,
    n_samples: usize,
    sample_dt: f64,
    spec: &IntegratorSpec,
) -> Result<Trajectory> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "need at least one sample"));
    }
    let every = integer_ratio(sample_dt, spec.dt, "integrator dt")?;
    predict_steps(weights, x0, (n_samples - 1) * every, every, spec)
}

fn predict_steps(weights: &DnnWeights, x0: &Vector2<f64>, n: usize, every: usize, spec: &IntegratorSpec) -> Result<Trajectory> {
    weights.validate()?;
    spec.validate()?;
    let mut stepper = Stepper::new(spec.method, 2);
    let mut x = vec![x0[0], x0[1]];
    let mut f = |_t: f64, xs: &[f64], dx: &mut [f64]| -> Result<()> {
        let r = rate_unchecked(&Vector2::new(xs[0], xs[1]), weights);
        dx[0] = r[0];
        dx[1] = r[1];
        Ok(())
    };
    let rec_dt = spec.dt * every as f64;
    let mut samples = vec![x.clone()];
    for k in 0..n {
        stepper.step(&mut f, spec.dt * k as f64, &mut x, spec.dt)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                t: spec.dt * (k + 1) as f64,
                partial: Some(Box::new(Trajectory { t0: 0.0, dt: rec_dt, samples })),
            });
        }
        if (k + 1) % every == 0 {
            samples.push(x.clone());
        }
    }
    Ok(Trajectory { t0: 0.0, dt: rec_dt, samples })
}

/// Voltages recorded in a plant trajectory sample.
pub fn sample_voltages(sample: &[f64]) -> Option<Voltages> {
    (sample.len() >= 5).then(|| Voltages::new(sample[3], sample[4]))
}
