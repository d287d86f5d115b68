//! Fixtures shared by the benchmarks in `benches/`.

use nalgebra::{DMatrix, Matrix2};
use pmsm_dnn_core::{ActivationKind, DnnWeights, Trajectory};

/// Deterministic weights of width `hidden` with entries in `[-scale, scale]`.
pub fn weights(hidden: usize, scale: f64) -> DnnWeights {
    let fill = |phase: f64| DMatrix::from_fn(hidden, 2, |i, j| scale * ((i * 2 + j) as f64 * 0.7 + phase).sin());
    let mut w = DnnWeights::zeros(
        Matrix2::new(-50.0, 0.0, 0.0, -50.0),
        hidden,
        ActivationKind::Tanh,
        ActivationKind::Sigmoid,
    );
    w.a1 = fill(0.1);
    w.a2 = fill(0.2);
    w.s1 = fill(0.3);
    w.s2 = fill(0.4);
    w
}

/// Two-channel series with a deterministic high-frequency ripple.
pub fn rippled_series(n: usize, dt: f64) -> Trajectory {
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            let ripple = 0.01 * (k as f64 * 2.3).sin();
            vec![ripple, (30.0 * t).sin() + ripple]
        })
        .collect();
    Trajectory::new(0.0, dt, samples).expect("uniform series")
}
