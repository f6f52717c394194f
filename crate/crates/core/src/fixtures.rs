//! Reference models used by the test suites, the acceptance checks and the
//! example configurations. Parameters are arbitrary test values chosen for
//! numerical convenience, not measured data.

use std::f64::consts::PI;

use crate::model::{FeedbackSpec, OscillatorSpec, SystemModel};

pub const MASS: f64 = 1e-12;
pub const ROOM_TEMPERATURE: f64 = 300.0;

/// High-Q membrane-like mode: m = 1 pg, Ω = 2π × 100 kHz, γ = 10 s⁻¹.
pub fn default_single() -> SystemModel<f64> {
    SystemModel::single(OscillatorSpec::new("a", MASS, 2.0 * PI * 1e5, 10.0, ROOM_TEMPERATURE))
}

/// Angular frequency of the low-Q fixtures, rad/s.
pub const BENCH_OMEGA: f64 = 2.0 * PI * 1e3;

/// Q = 10 mode (Ω = 2π × 1 kHz, γ = Ω/20), cheap to simulate for many
/// damping times at the strict step limit.
pub fn bench_single(bath_temperature: f64) -> SystemModel<f64> {
    SystemModel::single(OscillatorSpec::new("a", MASS, BENCH_OMEGA, BENCH_OMEGA / 20.0, bath_temperature))
}

/// `model` with noiseless velocity feedback adding `factor · γ` of damping
/// to its first oscillator.
pub fn with_cold_damping(model: SystemModel<f64>, factor: f64) -> SystemModel<f64> {
    let o = model.oscillators[0].clone();
    model.with_feedback(o.label.clone(), FeedbackSpec::cold_damping(o.mass, factor * o.gamma))
}

/// `model` with position feedback `A = ratio · mΩ²` and white force noise
/// worth `noise_temperature` on its first oscillator.
pub fn with_noisy_position_feedback(model: SystemModel<f64>, ratio: f64, noise_temperature: f64) -> SystemModel<f64> {
    let o = model.oscillators[0].clone();
    let noise = 4.0 * o.gamma * o.mass * crate::BOLTZMANN * noise_temperature;
    model.with_feedback(o.label.clone(), FeedbackSpec::position(ratio * o.stiffness()).with_noise(noise))
}

/// Damping of the coupled-pair fixture: Ω/γ = 50.
pub const PAIR_GAMMA: f64 = BENCH_OMEGA / 50.0;

/// Two identical oscillators (Ω = 2π × 1 kHz, Q = 25) with independent
/// baths, coupled at rate `g = g_over_gamma · γ`.
pub fn coupled_pair(g_over_gamma: f64, t_a: f64, t_b: f64) -> SystemModel<f64> {
    let a = OscillatorSpec::new("a", MASS, BENCH_OMEGA, PAIR_GAMMA, t_a);
    let b = OscillatorSpec::new("b", MASS, BENCH_OMEGA, PAIR_GAMMA, t_b);
    SystemModel::new(vec![a, b]).with_coupling_rate(0, 1, g_over_gamma * PAIR_GAMMA)
}

/// Damping of the spectroscopy pair: Ω/γ = 2000, so that splittings up to
/// tens of γ stay well inside the linear regime `g ≪ Ω`.
pub const SPECTRAL_GAMMA: f64 = BENCH_OMEGA / 2000.0;

/// Degenerate pair at a common bath temperature for spectral thermometry.
pub fn spectral_pair(g_over_gamma: f64, temperature: f64) -> SystemModel<f64> {
    let a = OscillatorSpec::new("a", MASS, BENCH_OMEGA, SPECTRAL_GAMMA, temperature);
    let b = OscillatorSpec::new("b", MASS, BENCH_OMEGA, SPECTRAL_GAMMA, temperature);
    SystemModel::new(vec![a, b]).with_coupling_rate(0, 1, g_over_gamma * SPECTRAL_GAMMA)
}

/// Single mode with the spectroscopy damping (Q = 1000).
pub fn spectral_single(temperature: f64) -> SystemModel<f64> {
    SystemModel::single(OscillatorSpec::new("a", MASS, BENCH_OMEGA, SPECTRAL_GAMMA, temperature))
}
