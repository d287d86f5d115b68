//! Surface-mounted PMSM in the rotor dq frame.
//!
//! Three states: the two stator currents and the mechanical speed. The
//! electrical speed is always derived from the mechanical one, so the model
//! is the fully coupled third-order system.
//!
//! Viscous friction `B` has no nameplate value; the default of 1e-5 N·m·s/rad
//! is a small positive placeholder and should be overridden when a measured
//! value is available.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub const RPM_TO_RAD_S: f64 = std::f64::consts::PI / 30.0;

pub fn rpm_to_rad_s(rpm: f64) -> f64 {
    rpm * RPM_TO_RAD_S
}

pub fn rad_s_to_rpm(omega: f64) -> f64 {
    omega / RPM_TO_RAD_S
}

/// Nameplate and electrical parameters of the motor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PmsmParams {
    /// Ω
    pub stator_resistance: f64,
    /// H, equal on both axes (surface magnets)
    pub inductance: f64,
    pub pole_pairs: u32,
    /// Wb
    pub pm_flux: f64,
    /// kg·m²
    pub inertia: f64,
    /// N·m·s/rad
    pub viscous_friction: f64,
    pub rated_voltage: f64,
    pub rated_current: f64,
    pub rated_load: f64,
    pub rated_speed_rpm: f64,
    /// Current trip threshold as a multiple of the rated current.
    pub current_limit_factor: f64,
}

impl Default for PmsmParams {
    fn default() -> Self {
        Self {
            stator_resistance: 0.4,
            inductance: 0.7e-3,
            pole_pairs: 5,
            pm_flux: 0.012,
            inertia: 6.8e-5,
            viscous_friction: 1e-5,
            rated_voltage: 36.0,
            rated_current: 7.5,
            rated_load: 1.2,
            rated_speed_rpm: 1500.0,
            current_limit_factor: 2.0,
        }
    }
}

impl PmsmParams {
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut issues = Vec::new();
        let positive = [
            ("stator_resistance", self.stator_resistance),
            ("inductance", self.inductance),
            ("pm_flux", self.pm_flux),
            ("inertia", self.inertia),
            ("viscous_friction", self.viscous_friction),
            ("rated_voltage", self.rated_voltage),
            ("rated_current", self.rated_current),
            ("rated_load", self.rated_load),
            ("rated_speed_rpm", self.rated_speed_rpm),
            ("current_limit_factor", self.current_limit_factor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                issues.push(format!("plant.{name} must be positive and finite (got {v})"));
            }
        }
        if self.pole_pairs < 1 {
            issues.push("plant.pole_pairs must be at least 1".to_string());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    /// Torque constant (3/2)·ψ_f·n_p in N·m/A.
    pub fn torque_constant(&self) -> f64 {
        1.5 * self.pm_flux * f64::from(self.pole_pairs)
    }

    /// Per-axis inverter limit.
    pub fn voltage_limit(&self) -> f64 {
        self.rated_voltage / 3f64.sqrt()
    }

    pub fn current_limit(&self) -> f64 {
        self.current_limit_factor * self.rated_current
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlantState {
    pub i_d: f64,
    pub i_q: f64,
    /// Mechanical speed in rad/s.
    pub omega_m: f64,
}

impl PlantState {
    pub fn new(i_d: f64, i_q: f64, omega_m: f64) -> Self {
        Self { i_d, i_q, omega_m }
    }

    pub fn check_finite(&self) -> Result<()> {
        ensure_finite(self.i_d, "i_d")?;
        ensure_finite(self.i_q, "i_q")?;
        ensure_finite(self.omega_m, "omega_m")
    }

    /// Raises [`Error::CurrentLimit`] when either current exceeds `limit`.
    pub fn check_current_limit(&self, limit: f64, t: f64) -> Result<()> {
        for (axis, value) in [("i_d", self.i_d), ("i_q", self.i_q)] {
            if value.abs() > limit {
                return Err(Error::CurrentLimit {
                    t,
                    axis,
                    value,
                    limit,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn to_array(self) -> [f64; 3] {
        [self.i_d, self.i_q, self.omega_m]
    }

    pub(crate) fn from_slice(x: &[f64]) -> Self {
        Self::new(x[0], x[1], x[2])
    }
}

/// Time derivative of a [`PlantState`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlantStateRate {
    pub di_d: f64,
    pub di_q: f64,
    pub domega_m: f64,
}

impl PlantStateRate {
    pub fn max_abs(&self) -> f64 {
        self.di_d.abs().max(self.di_q.abs()).max(self.domega_m.abs())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Voltages {
    pub u_d: f64,
    pub u_q: f64,
}

impl Voltages {
    pub fn new(u_d: f64, u_q: f64) -> Self {
        Self { u_d, u_q }
    }

    /// Clamps each axis to ±`limit`.
    pub fn saturate(self, limit: f64) -> Self {
        Self {
            u_d: self.u_d.clamp(-limit, limit),
            u_q: self.u_q.clamp(-limit, limit),
        }
    }
}

/// Shaft load torque as a function of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadProfile {
    Constant {
        magnitude: f64,
    },
    Step {
        magnitude: f64,
        step_time: f64,
    },
    /// Rises with `slope` from zero and holds at `final_value`.
    Ramp {
        slope: f64,
        final_value: f64,
    },
    Sinusoidal {
        magnitude: f64,
        angular_frequency: f64,
    },
}

impl Default for LoadProfile {
    fn default() -> Self {
        LoadProfile::Constant { magnitude: 0.0 }
    }
}

impl LoadProfile {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut issues = Vec::new();
        let mut finite = |name: &str, v: f64| {
            if !v.is_finite() {
                issues.push(format!("load.{name} must be finite (got {v})"));
            }
        };
        match *self {
            LoadProfile::Constant { magnitude } => finite("magnitude", magnitude),
            LoadProfile::Step {
                magnitude,
                step_time,
            } => {
                finite("magnitude", magnitude);
                finite("step_time", step_time);
                if step_time < 0.0 {
                    issues.push(format!("load.step_time must be non-negative (got {step_time})"));
                }
            }
            LoadProfile::Ramp { slope, final_value } => {
                finite("slope", slope);
                finite("final_value", final_value);
                if slope.is_sign_negative() != final_value.is_sign_negative() && final_value != 0.0
                {
                    issues.push("load.slope and load.final_value must share a sign".to_string());
                }
            }
            LoadProfile::Sinusoidal {
                magnitude,
                angular_frequency,
            } => {
                finite("magnitude", magnitude);
                finite("angular_frequency", angular_frequency);
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

pub fn load_torque(profile: &LoadProfile, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::invalid("t", format!("load time must be non-negative (got {t})")));
    }
    Ok(match *profile {
        LoadProfile::Constant { magnitude } => magnitude,
        LoadProfile::Step {
            magnitude,
            step_time,
        } => {
            if t >= step_time {
                magnitude
            } else {
                0.0
            }
        }
        LoadProfile::Ramp { slope, final_value } => {
            let v = slope * t;
            if final_value >= 0.0 {
                v.min(final_value)
            } else {
                v.max(final_value)
            }
        }
        LoadProfile::Sinusoidal {
            magnitude,
            angular_frequency,
        } => magnitude * (angular_frequency * t).sin(),
    })
}

/// Lumped parameter mismatch between the nominal model and the simulated
/// machine.
///
/// The perturbations enter the current equations as
/// `Δθ_d = (−ΔR·i_d + ω_e·ΔL·i_q) / L_s` and
/// `Δθ_q = (−ΔR·i_q − ω_e·(ΔL·i_d + Δψ)) / L_s`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyModel {
    pub delta_r: f64,
    pub delta_l: f64,
    pub delta_psi: f64,
    pub enabled: bool,
}

impl UncertaintyModel {
    pub fn disabled() -> Self {
        Self::default()
    }

    /// `(Δθ_d, Δθ_q)`; exactly zero when disabled.
    pub fn current_terms(&self, i_d: f64, i_q: f64, omega_e: f64, params: &PmsmParams) -> (f64, f64) {
        if !self.enabled {
            return (0.0, 0.0);
        }
        let l = params.inductance;
        let d = (-self.delta_r * i_d + omega_e * self.delta_l * i_q) / l;
        let q = (-self.delta_r * i_q - omega_e * (self.delta_l * i_d + self.delta_psi)) / l;
        (d, q)
    }
}

pub fn electrical_speed(omega_m: f64, pole_pairs: u32) -> f64 {
    f64::from(pole_pairs) * omega_m
}

pub fn electromagnetic_torque(i_q: f64, params: &PmsmParams) -> f64 {
    params.torque_constant() * i_q
}

/// Right-hand side of the dq-frame current and speed dynamics.
pub fn pmsm_derivative(
    state: &PlantState,
    v: &Voltages,
    t: f64,
    load: &LoadProfile,
    params: &PmsmParams,
    unc: &UncertaintyModel,
) -> Result<PlantStateRate> {
    state.check_finite()?;
    ensure_finite(v.u_d, "u_d")?;
    ensure_finite(v.u_q, "u_q")?;
    ensure_finite(t, "t")?;
    let t_l = load_torque(load, t)?;
    Ok(rate_unchecked(state, v, t_l, params, unc))
}

/// [`pmsm_derivative`] with a precomputed load torque and no input checks;
/// used inside the integration loop where the state is checked once per step.
pub(crate) fn rate_unchecked(
    state: &PlantState,
    v: &Voltages,
    load_torque: f64,
    params: &PmsmParams,
    unc: &UncertaintyModel,
) -> PlantStateRate {
    let PlantState { i_d, i_q, omega_m } = *state;
    let l = params.inductance;
    let r = params.stator_resistance;
    let omega_e = electrical_speed(omega_m, params.pole_pairs);

    let mut di_d = (v.u_d - r * i_d + omega_e * l * i_q) / l;
    let mut di_q = (v.u_q - r * i_q - omega_e * (l * i_d + params.pm_flux)) / l;
    if unc.enabled {
        let (dd, dq) = unc.current_terms(i_d, i_q, omega_e, params);
        di_d += dd;
        di_q += dq;
    }
    let domega_m = (electromagnetic_torque(i_q, params)
        - load_torque
        - params.viscous_friction * omega_m)
        / params.inertia;

    PlantStateRate {
        di_d,
        di_q,
        domega_m,
    }
}
