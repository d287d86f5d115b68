//! Experiment configuration: one JSON document, every field defaulted, named
//! presets for the reference scenarios.

use std::path::Path;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adaptation::{AdaptGains, LearningMode};
use crate::data::{GpConfig, Normalization};
use crate::dnn::{ActivationKind, WeightBounds};
use crate::error::{Error, Result};
use crate::foc::SpeedScenario;
use crate::plant::{LoadProfile, PmsmParams};
use crate::simulation::{IntegratorSpec, PlantScenario, PlantSimSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Identifier trained against a synthetic teacher network.
    Teacher,
    /// Identifier trained on simulated plant currents.
    Plant,
}

impl Mode {
    pub fn learning_mode(self) -> LearningMode {
        match self {
            Mode::Teacher => LearningMode::TeacherKnown,
            Mode::Plant => LearningMode::CertaintyEquivalence,
        }
    }
}

/// Where prediction starts after training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Handoff {
    /// From the identifier's final state.
    Strict,
    /// From the first measured held-out sample.
    WarmStart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Hidden width `z` (equal to `r`).
    pub hidden: usize,
    pub act1: ActivationKind,
    pub act2: ActivationKind,
    /// Row-major `a0`.
    pub a0: [[f64; 2]; 2],
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: 8,
            act1: ActivationKind::Tanh,
            act2: ActivationKind::Sigmoid,
            a0: [[-50.0, 0.0], [0.0, -50.0]],
        }
    }
}

impl NetworkConfig {
    pub fn a0(&self) -> Matrix2<f64> {
        Matrix2::new(self.a0[0][0], self.a0[0][1], self.a0[1][0], self.a0[1][1])
    }
}

/// Learning gains; `p` unset selects the midpoint of the feasible interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsConfig {
    pub p: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub margin: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self {
            p: None,
            c1: 10.0,
            c2: 10.0,
            d1: 10.0,
            d2: 10.0,
            margin: 1.0,
        }
    }
}

impl GainsConfig {
    pub fn with_p(&self, p: f64) -> AdaptGains {
        AdaptGains {
            p,
            c1: self.c1,
            c2: self.c2,
            d1: self.d1,
            d2: self.d2,
            margin: self.margin,
        }
    }
}

/// Synthetic teacher and the perturbed identifier start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeacherConfig {
    /// Teacher `a_i` entries drawn from `U(−a_scale, a_scale)`.
    pub a_scale: f64,
    /// Teacher `s_i` entries drawn from `U(−s_scale, s_scale)`.
    pub s_scale: f64,
    pub x0: [f64; 2],
    /// `x̂(0) − x(0)`.
    pub initial_error: [f64; 2],
    /// Relative perturbation of the initial identifier weights.
    pub weight_noise: f64,
    pub duration: f64,
    /// Histories are recorded every this many co-simulation steps.
    pub record_every: usize,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            a_scale: 0.5,
            s_scale: 1.0,
            x0: [1.0, -0.5],
            initial_error: [0.5, -0.5],
            weight_noise: 0.1,
            duration: 2.0,
            record_every: 1,
        }
    }
}

/// Identifier initialisation for plant runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantInitConfig {
    /// Initial `a_i` entries from `U(−a_scale, a_scale)`.
    pub a_scale: f64,
    /// Initial `s_i` entries from `U(−s_scale, s_scale)`.
    pub s_scale: f64,
    pub normalization: Normalization,
}

impl Default for PlantInitConfig {
    fn default() -> Self {
        Self {
            a_scale: 0.1,
            s_scale: 1.0,
            normalization: Normalization::PerChannel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name of the preset the document was built on, if any.
    pub preset: Option<String>,
    pub plant: PmsmParams,
    pub scenario: PlantScenario,
    pub sim: PlantSimSettings,
    pub sample_rate: f64,
    pub duration: f64,
    pub n_train: usize,
    pub network: NetworkConfig,
    pub gains: GainsConfig,
    /// Ideal-weight bounds assumed for plant runs.
    pub bounds: WeightBounds,
    pub integrator: IntegratorSpec,
    pub gp: GpConfig,
    pub smooth: bool,
    pub mode: Mode,
    pub handoff: Handoff,
    pub teacher: TeacherConfig,
    pub init: PlantInitConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: None,
            plant: PmsmParams::default(),
            scenario: PlantScenario::default(),
            sim: PlantSimSettings::default(),
            sample_rate: 1000.0,
            duration: 0.4,
            n_train: 300,
            network: NetworkConfig::default(),
            gains: GainsConfig::default(),
            bounds: WeightBounds {
                a1_bar: 1.0,
                a2_bar: 1.0,
                s1_bar: 1.0,
                s2_bar: 1.0,
            },
            integrator: IntegratorSpec::rk4(1e-5),
            gp: GpConfig::default(),
            smooth: true,
            mode: Mode::Plant,
            handoff: Handoff::Strict,
            teacher: TeacherConfig::default(),
            init: PlantInitConfig::default(),
            seed: 42,
        }
    }
}

pub const PRESETS: [&str; 5] = ["case1", "case2", "case3-step", "case3-ramp", "case3-sin"];

impl ExperimentConfig {
    /// Defaults with a named scenario applied.
    pub fn preset(name: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let case2 = |cfg: &mut Self, load: LoadProfile| {
            cfg.scenario.speed = SpeedScenario::Constant { rpm: 1000.0 };
            cfg.scenario.load = load;
            cfg.sample_rate = 10_000.0;
            cfg.duration = 0.1;
            cfg.n_train = 800;
        };
        match name {
            "case1" => {}
            "case2" | "case3-step" => case2(
                &mut cfg,
                LoadProfile::Step {
                    magnitude: 1.0,
                    step_time: 0.05,
                },
            ),
            "case3-ramp" => case2(
                &mut cfg,
                LoadProfile::Ramp {
                    slope: 1.0,
                    final_value: 1.0,
                },
            ),
            "case3-sin" => case2(
                &mut cfg,
                LoadProfile::Sinusoidal {
                    magnitude: 1.0,
                    angular_frequency: 20.0 * std::f64::consts::PI,
                },
            ),
            other => {
                return Err(Error::Config(vec![format!(
                    "unknown scenario `{other}` (expected one of {})",
                    PRESETS.join(", ")
                )]))
            }
        }
        cfg.preset = Some(name.to_string());
        Ok(cfg)
    }

    /// Parses a JSON document. A `preset` field selects the base the other
    /// fields are merged onto; `preset_override` replaces it.
    pub fn from_json(text: &str, preset_override: Option<&str>) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("config: {e}")]))?;
        if !doc.is_object() {
            return Err(Error::Config(vec!["config: top level must be a JSON object".into()]));
        }
        let preset = match preset_override {
            Some(p) => Some(p.to_string()),
            None => match doc.get("preset") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => Some(s.clone()),
                Some(v) => return Err(Error::Config(vec![format!("preset must be a string (got {v})")])),
            },
        };
        let base = match &preset {
            Some(p) => Self::preset(p)?,
            None => Self::default(),
        };
        let mut merged = serde_json::to_value(&base).expect("config serializes");
        merge(&mut merged, doc);
        if let Some(p) = preset {
            merged["preset"] = Value::String(p);
        }
        serde_json::from_value(merged).map_err(|e| Error::Config(vec![format!("config: {e}")]))
    }

    pub fn load(path: &Path, preset_override: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, preset_override).map_err(|e| match e {
            Error::Config(issues) => Error::Config(
                issues.into_iter().map(|i| format!("{}: {i}", path.display())).collect(),
            ),
            e => e,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Number of recorded samples.
    pub fn n_samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    /// Checks every field, reporting all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        let mut take = |r: std::result::Result<(), Vec<String>>| {
            if let Err(v) = r {
                issues.extend(v);
            }
        };
        take(self.plant.validate());
        take(self.scenario.speed.validate());
        take(self.scenario.load.validate());
        take(self.sim.foc.validate());
        take(self.bounds.validate());
        take(self.gp.validate());

        let mut check = |ok: bool, msg: String| {
            if !ok {
                issues.push(msg);
            }
        };
        check(
            self.sample_rate.is_finite() && self.sample_rate > 0.0,
            format!("sample_rate must be positive (got {})", self.sample_rate),
        );
        check(
            self.duration.is_finite() && self.duration > 0.0,
            format!("duration must be positive (got {})", self.duration),
        );
        check(
            self.sim.plant_dt.is_finite() && self.sim.plant_dt > 0.0,
            format!("sim.plant_dt must be positive (got {})", self.sim.plant_dt),
        );
        check(
            self.sim.control_rate.is_finite() && self.sim.control_rate > 0.0,
            format!("sim.control_rate must be positive (got {})", self.sim.control_rate),
        );
        check(
            self.scenario.measurement_noise.is_finite() && self.scenario.measurement_noise >= 0.0,
            format!(
                "scenario.measurement_noise must be non-negative (got {})",
                self.scenario.measurement_noise
            ),
        );
        if let Some(rpm) = self.scenario.initial_speed_rpm {
            check(rpm.is_finite(), format!("scenario.initial_speed_rpm must be finite (got {rpm})"));
        }
        if self.sample_rate > 0.0 && self.duration > 0.0 {
            let n = self.n_samples();
            check(
                self.n_train > 0 && self.n_train < n,
                format!("n_train must be in 1..{n} for {n} samples (got {})", self.n_train),
            );
        }
        check(self.network.hidden > 0, "network.hidden must be at least 1".into());
        check(
            self.network.a0.iter().flatten().all(|v| v.is_finite()),
            "network.a0 must be finite".into(),
        );
        if let Some(p) = self.gains.p {
            check(p.is_finite() && p > 0.0, format!("gains.p must be positive (got {p})"));
        }
        for (name, v) in [
            ("c1", self.gains.c1),
            ("c2", self.gains.c2),
            ("d1", self.gains.d1),
            ("d2", self.gains.d2),
            ("margin", self.gains.margin),
        ] {
            check(v.is_finite() && v > 0.0, format!("gains.{name} must be positive (got {v})"));
        }
        check(
            self.integrator.dt.is_finite() && self.integrator.dt > 0.0,
            format!("integrator.dt must be positive (got {})", self.integrator.dt),
        );
        let t = &self.teacher;
        for (name, v) in [
            ("a_scale", t.a_scale),
            ("s_scale", t.s_scale),
            ("duration", t.duration),
        ] {
            check(v.is_finite() && v > 0.0, format!("teacher.{name} must be positive (got {v})"));
        }
        check(
            t.weight_noise.is_finite() && t.weight_noise >= 0.0,
            format!("teacher.weight_noise must be non-negative (got {})", t.weight_noise),
        );
        check(
            t.x0.iter().chain(&t.initial_error).all(|v| v.is_finite()),
            "teacher.x0 and teacher.initial_error must be finite".into(),
        );
        check(t.record_every >= 1, "teacher.record_every must be at least 1".into());
        for (name, v) in [("a_scale", self.init.a_scale), ("s_scale", self.init.s_scale)] {
            check(v.is_finite() && v >= 0.0, format!("init.{name} must be non-negative (got {v})"));
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                // Tagged enums are replaced whole so a new `kind` does not
                // inherit the old variant's fields.
                let replace = v.get("kind").is_some();
                match b.get_mut(&k) {
                    Some(slot) if !replace => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_case_one() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.n_samples(), 400);
        assert_eq!(c.n_train, 300);
        assert_eq!(c.mode, Mode::Plant);
    }

    #[test]
    fn presets() {
        let c = ExperimentConfig::preset("case2").unwrap();
        assert_eq!(c.n_samples(), 1000);
        assert_eq!(c.n_train, 800);
        for p in PRESETS {
            ExperimentConfig::preset(p).unwrap().validate().unwrap();
        }
        assert!(ExperimentConfig::preset("case4").is_err());
    }

    #[test]
    fn json_merges_over_preset() {
        let c = ExperimentConfig::from_json(r#"{"preset": "case2", "seed": 7, "plant": {"inertia": 1e-4}}"#, None).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.sample_rate, 10_000.0);
        assert_eq!(c.plant.inertia, 1e-4);
        assert_eq!(c.plant.stator_resistance, 0.4);

        let c = ExperimentConfig::from_json(r#"{"scenario": {"load": {"kind": "ramp", "slope": 2.0, "final_value": 1.0}}}"#, None).unwrap();
        assert_eq!(c.scenario.load, LoadProfile::Ramp { slope: 2.0, final_value: 1.0 });

        let c = ExperimentConfig::from_json(r#"{"preset": "case2"}"#, Some("case1")).unwrap();
        assert_eq!(c.sample_rate, 1000.0);
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig::preset("case3-sin").unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json(), None).unwrap(), c);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"sampel_rate": 5}"#, None).is_err());
    }

    #[test]
    fn all_issues_reported() {
        let mut c = ExperimentConfig::default();
        c.duration = -1.0;
        c.gains.c1 = 0.0;
        c.plant.inertia = -1.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("duration"), "{msg}");
        assert!(msg.contains("gains.c1"), "{msg}");
        assert!(msg.contains("inertia"), "{msg}");
    }
}
