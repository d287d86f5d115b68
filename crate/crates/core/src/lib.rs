//! Differential neural network identifier for PMSM dq currents.
//!
//! A two-state DNN `ẋ̂ = a0·x̂ + a1ᵀ·f1(s1·x̂) + a2ᵀ·f2(s2·x̂)` is trained
//! online by Lyapunov-derived learning laws, either against a known teacher
//! network or against currents from a simulated FOC drive.

pub mod adaptation;
pub mod config;
pub mod data;
pub mod dnn;
pub mod error;
pub mod foc;
pub mod pipeline;
pub mod plant;
pub mod simulation;

pub use adaptation::{
    check_matrix_inequality, feasible_p_interval, learning_law_rates, lyapunov_rate, lyapunov_value,
    AdaptGains, ErrorState, FeasibilityReport, IdentifierState, LearningMode, WeightRates,
};
pub use config::{ExperimentConfig, Handoff, Mode};
pub use data::{compute_metrics, gp_smooth, read_csv, split_train_predict, write_csv, GpConfig, Metrics, MetricsReport};
pub use dnn::{dnn_derivative, ActivationKind, DnnWeights, ModelFile, WeightBounds};
pub use error::{Error, Result};
pub use foc::{foc_step, FocController, FocTuning, SpeedScenario};
pub use plant::{load_torque, pmsm_derivative, LoadProfile, PlantState, PmsmParams, UncertaintyModel, Voltages};
pub use simulation::{
    generate_plant_data, integrate, predict, train_identifier, DataSource, IdentificationRun, IntegratorSpec,
    Method, PlantScenario, PlantSimSettings, TrainOptions, Trajectory,
};
