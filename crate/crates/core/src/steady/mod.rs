//! Exact stationary statistics of a compiled model: covariance, mode
//! temperatures, heat fluxes and normal modes.
//!
//! Flux sign convention: positive means energy flows *into* the oscillator
//! mode from the named channel.

mod lyapunov;
mod modes;

pub use lyapunov::{lyapunov_residual, solve_lyapunov, LyapunovSolution};
pub use modes::{normal_modes, ModeSplitting, NormalMode, NormalModes, SPLITTING_DEGENERACY};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::model::{pos, vel, ModelError, StateMatrices, SystemModel};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("drift matrix is not Hurwitz (spectral abscissa {abscissa:e}); no stationary state")]
    NotHurwitz { abscissa: f64 },
    #[error("Lyapunov residual {residual:e} above tolerance")]
    IllConditioned { residual: f64 },
    #[error("oscillator `{0}` has zero damping; stationary state undefined")]
    ZeroDamping(String),
    #[error("matrix dimensions do not match the model")]
    DimensionMismatch,
}

/// Stationary covariance `⟨x xᵀ⟩` of the compiled system.
pub fn solve_stationary<T: Real>(matrices: &StateMatrices<T>) -> Result<LyapunovSolution<T>, SteadyError> {
    solve_lyapunov(&matrices.drift, &matrices.diffusion)
}

fn check_dims<T: Real>(c: &DMatrix<T>, model: &SystemModel<T>) {
    assert_eq!(c.nrows(), 2 * model.len(), "covariance does not match model size");
}

/// Positional (`mΩ²⟨u²⟩/k_B`) and kinetic (`m⟨u̇²⟩/k_B`) mode temperatures, K.
pub fn mode_temperatures<T: Real>(c: &DMatrix<T>, model: &SystemModel<T>) -> (Vec<T>, Vec<T>) {
    check_dims(c, model);
    let kb = T::boltzmann();
    model
        .oscillators
        .iter()
        .enumerate()
        .map(|(i, o)| (o.stiffness() * c[(pos(i), pos(i))] / kb, o.mass * c[(vel(i), vel(i))] / kb))
        .unzip()
}

/// Net power from each oscillator's thermal bath into its mode, W:
/// injected stochastic power `S₀/(2m)` minus viscous dissipation `2γm⟨u̇²⟩`.
///
/// With the default noise factor this equals `2γk_B(T − T′_kin)`.
pub fn bath_heat_flux<T: Real>(c: &DMatrix<T>, model: &SystemModel<T>) -> Vec<T> {
    check_dims(c, model);
    let two = T::lit(2.0);
    model
        .oscillators
        .iter()
        .enumerate()
        .map(|(i, o)| {
            model.thermal_noise_intensity(i) / (two * o.mass) - two * o.gamma * o.mass * c[(vel(i), vel(i))]
        })
        .collect()
}

/// Flux–gap form `2γk_B(T − T′_kin)` evaluated on a covariance.
pub fn gap_heat_flux<T: Real>(c: &DMatrix<T>, model: &SystemModel<T>) -> Vec<T> {
    let (_, t_kin) = mode_temperatures(c, model);
    model
        .oscillators
        .iter()
        .zip(t_kin)
        .map(|(o, tk)| T::lit(2.0) * o.gamma * T::boltzmann() * (o.bath_temperature - tk))
        .collect()
}

/// Power delivered by the feedback force, W:
/// `S_ext/(2m) + B⟨u̇²⟩ + A⟨u u̇⟩`.
pub fn feedback_heat_flux<T: Real>(c: &DMatrix<T>, model: &SystemModel<T>) -> Vec<T> {
    check_dims(c, model);
    model
        .oscillators
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let fb = model.feedback(i);
            fb.noise_psd / (T::lit(2.0) * o.mass)
                + fb.velocity_gain * c[(vel(i), vel(i))]
                + fb.position_gain * c[(pos(i), vel(i))]
        })
        .collect()
}

/// Power delivered to each oscillator through the coupling springs, W:
/// `Σⱼ k_c,ij ⟨u̇ᵢ (uⱼ − uᵢ)⟩`.
pub fn coupling_heat_flux<T: Real>(c: &DMatrix<T>, model: &SystemModel<T>) -> Vec<T> {
    check_dims(c, model);
    let n = model.len();
    (0..n)
        .map(|i| {
            (0..n).filter(|&j| j != i).fold(T::zero(), |acc, j| {
                let k = model.spring_between(i, j);
                acc + k * (c[(vel(i), pos(j))] - c[(vel(i), pos(i))])
            })
        })
        .collect()
}

/// Everything the stationary solve yields for one model.
#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState<T: Real> {
    pub covariance: DMatrix<T>,
    pub mode_temperature_positional: Vec<T>,
    pub mode_temperature_kinetic: Vec<T>,
    pub bath_flux: Vec<T>,
    pub feedback_flux: Vec<T>,
    pub coupling_flux: Vec<T>,
    pub residual: T,
}

impl<T: Real> SteadyState<T> {
    /// Compiles and solves `model`. Every oscillator must have γ > 0.
    pub fn solve(model: &SystemModel<T>) -> Result<Self, SteadyError> {
        let matrices = model.compile()?;
        if let Some(o) = model.oscillators.iter().find(|o| o.gamma == T::zero()) {
            return Err(SteadyError::ZeroDamping(o.label.clone()));
        }
        Self::from_matrices(model, &matrices)
    }

    pub fn from_matrices(model: &SystemModel<T>, matrices: &StateMatrices<T>) -> Result<Self, SteadyError> {
        if matrices.dim() != 2 * model.len() {
            return Err(SteadyError::DimensionMismatch);
        }
        let sol = solve_stationary(matrices)?;
        let c = sol.covariance;
        let (t_pos, t_kin) = mode_temperatures(&c, model);
        Ok(Self {
            bath_flux: bath_heat_flux(&c, model),
            feedback_flux: feedback_heat_flux(&c, model),
            coupling_flux: coupling_heat_flux(&c, model),
            mode_temperature_positional: t_pos,
            mode_temperature_kinetic: t_kin,
            covariance: c,
            residual: sol.residual,
        })
    }

    /// `|Σ bath + Σ feedback|`, W.
    pub fn energy_imbalance(&self) -> T {
        self.bath_flux
            .iter()
            .chain(self.feedback_flux.iter())
            .fold(T::zero(), |a, &b| a + b)
            .abs()
    }

    /// Sum of bath flux magnitudes, W.
    pub fn flux_scale(&self) -> T {
        self.bath_flux.iter().fold(T::zero(), |a, &b| a + b.abs())
    }

    /// Energy imbalance relative to the flux scale (absolute floor 10⁻³⁰ W).
    pub fn balance_residual(&self) -> T {
        self.energy_imbalance() / (self.flux_scale() + T::lit(1e-30)).max(T::tiny())
    }

    /// Whether the imbalance satisfies `≤ 10⁻⁸ Σ|P| + 10⁻³⁰ W`.
    pub fn is_balanced(&self) -> bool {
        self.energy_imbalance() <= T::lit(1e-8) * self.flux_scale() + T::lit(1e-30)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CouplingSpec, FeedbackSpec, OscillatorSpec};
    use crate::scalar::BOLTZMANN;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn single_oscillator_equipartition() {
        let o = OscillatorSpec::new("a", 1e-12, 2.0 * std::f64::consts::PI * 1e5, 10.0, 300.0);
        let ss = SteadyState::solve(&SystemModel::single(o.clone())).unwrap();
        let c = &ss.covariance;
        assert!(rel(c[(0, 0)], BOLTZMANN * 300.0 / o.stiffness()) < 1e-10);
        assert!(rel(c[(1, 1)], BOLTZMANN * 300.0 / o.mass) < 1e-10);
        assert!(c[(0, 1)].abs() < 1e-12 * (c[(0, 0)] * c[(1, 1)]).sqrt());
        assert!(rel(ss.mode_temperature_positional[0], 300.0) < 1e-8);
        assert!(rel(ss.mode_temperature_kinetic[0], 300.0) < 1e-8);
        assert!(ss.bath_flux[0].abs() < 1e-8 * 2.0 * 10.0 * BOLTZMANN * 300.0);
        assert!(ss.residual <= 1e-10);
    }

    #[test]
    fn zero_temperature_gives_zero_covariance() {
        let o = OscillatorSpec::new("a", 1.0, 1.0, 0.1, 0.0);
        let m = SystemModel::new(vec![o.clone(), OscillatorSpec { label: "b".into(), ..o }])
            .with_coupling(CouplingSpec::new("a", "b", 0.2));
        let ss = SteadyState::solve(&m).unwrap();
        assert_eq!(ss.covariance, DMatrix::zeros(4, 4));
        assert_eq!(ss.mode_temperature_positional, vec![0.0, 0.0]);
        assert!(ss.is_balanced());
    }

    #[test]
    fn cold_damping_temperature() {
        let (gamma, gamma_fb, t) = (10.0, 30.0, 300.0);
        let o = OscillatorSpec::new("a", 1e-12, 2.0 * std::f64::consts::PI * 1e5, gamma, t);
        let m = SystemModel::single(o.clone()).with_feedback("a", FeedbackSpec::cold_damping(o.mass, gamma_fb));
        let ss = SteadyState::solve(&m).unwrap();
        let expected = t * gamma / (gamma + gamma_fb);
        assert!(rel(ss.mode_temperature_kinetic[0], 75.0) < 1e-8);
        assert!(rel(expected, 75.0) < 1e-15);
        let p = 2.0 * gamma * BOLTZMANN * (t - 75.0);
        assert!(rel(ss.bath_flux[0], p) < 1e-8);
        assert!(rel(ss.feedback_flux[0], -p) < 1e-8);
        assert!(ss.is_balanced());
    }

    #[test]
    fn pure_position_feedback_leaves_kinetic_temperature() {
        let o = OscillatorSpec::new("a", 1.0_f64, 1.0, 0.1, 300.0);
        let m = SystemModel::single(o).with_feedback("a", FeedbackSpec::position(0.05));
        let ss = SteadyState::solve(&m).unwrap();
        assert!(ss.feedback_flux[0].abs() < 1e-12 * BOLTZMANN * 300.0);
        assert!(rel(ss.mode_temperature_kinetic[0], 300.0) < 1e-8);
        // Softer effective spring raises ⟨u²⟩: T′_pos = T Ω² / (Ω² − A/m).
        assert!(rel(ss.mode_temperature_positional[0], 300.0 / 0.95) < 1e-8);
    }

    #[test]
    fn zero_damping_rejected() {
        let o = OscillatorSpec::new("a", 1.0, 1.0, 0.0, 300.0);
        assert_eq!(SteadyState::solve(&SystemModel::single(o)).unwrap_err(), SteadyError::ZeroDamping("a".into()));
    }

    #[test]
    fn coupled_unequal_baths_antisymmetric_flux() {
        let a = OscillatorSpec::new("a", 1.0_f64, 10.0, 0.1, 400.0);
        let b = OscillatorSpec::new("b", 1.0, 10.0, 0.1, 200.0);
        let m = SystemModel::new(vec![a, b]).with_coupling_rate(0, 1, 0.5);
        let ss = SteadyState::solve(&m).unwrap();
        let (pa, pb) = (ss.bath_flux[0], ss.bath_flux[1]);
        assert!(pa > 0.0 && pb < 0.0, "hot bath feeds mode A, mode B feeds cold bath: {pa} {pb}");
        assert!((pa + pb).abs() <= 1e-10 * pa.abs());
        assert!(rel(ss.coupling_flux[0], -pa) < 1e-8);
        assert!(rel(ss.coupling_flux[1], -pb) < 1e-8);
        let gap = gap_heat_flux(&ss.covariance, &m);
        assert!(rel(gap[0], pa) < 1e-10);
    }
}
