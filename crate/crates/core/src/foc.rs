//! i_d* = 0 field-oriented control: a speed PI feeding two current PIs with
//! dq decoupling feedforward.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Result};
use crate::plant::{electrical_speed, rpm_to_rad_s, PlantState, PmsmParams, Voltages};

/// PI controller with a clamped integrator.
///
/// The integrator stops accumulating while the output is saturated in the
/// direction of the error and is hard-limited to `±limit / ki`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiState {
    pub kp: f64,
    pub ki: f64,
    pub limit: f64,
    pub integral: f64,
}

impl PiState {
    pub fn new(kp: f64, ki: f64, limit: f64) -> Self {
        Self {
            kp,
            ki,
            limit,
            integral: 0.0,
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
    }

    fn integral_bound(&self) -> f64 {
        if self.ki > 0.0 {
            self.limit / self.ki
        } else {
            0.0
        }
    }

    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        let unsat = self.kp * error + self.ki * (self.integral + error * dt);
        let pushing_out = (unsat > self.limit && error > 0.0) || (unsat < -self.limit && error < 0.0);
        if !pushing_out {
            self.integral += error * dt;
        }
        let bound = self.integral_bound();
        self.integral = self.integral.clamp(-bound, bound);
        (self.kp * error + self.ki * self.integral).clamp(-self.limit, self.limit)
    }
}

/// Bandwidth-based PI tuning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocTuning {
    /// Current-loop bandwidth in Hz.
    pub current_bandwidth_hz: f64,
    /// Speed-loop bandwidth in Hz.
    pub speed_bandwidth_hz: f64,
    /// Speed PI zero placed at `speed_bandwidth / speed_zero_ratio`.
    pub speed_zero_ratio: f64,
    /// q-current command limit as a multiple of the rated current.
    pub iq_limit_factor: f64,
}

impl Default for FocTuning {
    fn default() -> Self {
        Self {
            current_bandwidth_hz: 500.0,
            speed_bandwidth_hz: 20.0,
            speed_zero_ratio: 4.0,
            iq_limit_factor: 1.8,
        }
    }
}

impl FocTuning {
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut issues = Vec::new();
        for (name, v) in [
            ("current_bandwidth_hz", self.current_bandwidth_hz),
            ("speed_bandwidth_hz", self.speed_bandwidth_hz),
            ("speed_zero_ratio", self.speed_zero_ratio),
            ("iq_limit_factor", self.iq_limit_factor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                issues.push(format!("foc.{name} must be positive and finite (got {v})"));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

/// Controller states for the three loops.
#[derive(Clone, Debug, PartialEq)]
pub struct FocController {
    pub speed: PiState,
    pub d_current: PiState,
    pub q_current: PiState,
}

impl FocController {
    pub fn new(params: &PmsmParams, tuning: &FocTuning) -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        let wc = two_pi * tuning.current_bandwidth_hz;
        let ws = two_pi * tuning.speed_bandwidth_hz;
        let v_lim = params.voltage_limit();
        let kp_w = params.inertia * ws / params.torque_constant();
        let ki_w = kp_w * ws / tuning.speed_zero_ratio;
        let iq_lim = tuning.iq_limit_factor * params.rated_current;
        Self {
            speed: PiState::new(kp_w, ki_w, iq_lim),
            d_current: PiState::new(params.inductance * wc, params.stator_resistance * wc, v_lim),
            q_current: PiState::new(params.inductance * wc, params.stator_resistance * wc, v_lim),
        }
    }

    pub fn reset(&mut self) {
        self.speed.reset();
        self.d_current.reset();
        self.q_current.reset();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeedScenario {
    Constant {
        rpm: f64,
    },
    Ramp {
        start_rpm: f64,
        end_rpm: f64,
        ramp_duration: f64,
    },
}

impl Default for SpeedScenario {
    fn default() -> Self {
        SpeedScenario::Ramp {
            start_rpm: 400.0,
            end_rpm: 800.0,
            ramp_duration: 0.4,
        }
    }
}

impl SpeedScenario {
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut issues = Vec::new();
        match *self {
            SpeedScenario::Constant { rpm } => {
                if !rpm.is_finite() {
                    issues.push(format!("speed.rpm must be finite (got {rpm})"));
                }
            }
            SpeedScenario::Ramp {
                start_rpm,
                end_rpm,
                ramp_duration,
            } => {
                if !(start_rpm.is_finite() && end_rpm.is_finite()) {
                    issues.push("speed.start_rpm and speed.end_rpm must be finite".to_string());
                }
                if !(ramp_duration.is_finite() && ramp_duration > 0.0) {
                    issues.push(format!(
                        "speed.ramp_duration must be positive (got {ramp_duration})"
                    ));
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

pub fn speed_reference(scn: &SpeedScenario, t: f64) -> f64 {
    match *scn {
        SpeedScenario::Constant { rpm } => rpm,
        SpeedScenario::Ramp {
            start_rpm,
            end_rpm,
            ramp_duration,
        } => {
            let frac = (t / ramp_duration).clamp(0.0, 1.0);
            start_rpm + (end_rpm - start_rpm) * frac
        }
    }
}

/// One control period: returns the saturated voltage command.
pub fn foc_step(
    plant: &PlantState,
    ref_rpm: f64,
    ctl: &mut FocController,
    params: &PmsmParams,
    dt: f64,
) -> Result<Voltages> {
    if !(dt > 0.0) {
        return Err(crate::Error::invalid("dt", format!("control period must be positive (got {dt})")));
    }
    plant.check_finite()?;
    ensure_finite(ref_rpm, "speed reference")?;

    let speed_err = rpm_to_rad_s(ref_rpm) - plant.omega_m;
    let iq_ref = ctl.speed.update(speed_err, dt);

    let vd = ctl.d_current.update(0.0 - plant.i_d, dt);
    let vq = ctl.q_current.update(iq_ref - plant.i_q, dt);

    let omega_e = electrical_speed(plant.omega_m, params.pole_pairs);
    let l = params.inductance;
    let ff_d = -omega_e * l * plant.i_q;
    let ff_q = omega_e * (l * plant.i_d + params.pm_flux);

    Ok(Voltages::new(vd + ff_d, vq + ff_q).saturate(params.voltage_limit()))
}
