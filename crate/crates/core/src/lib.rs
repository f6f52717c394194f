//! Heat transfer between thermally driven, damped harmonic oscillators.
//!
//! A [`model::SystemModel`] describes oscillators coupled by springs and
//! driven by thermal baths and feedback forces. The same compiled linear
//! system is analysed two ways:
//!
//! * exactly, by solving the stationary Lyapunov equation ([`steady`]);
//! * stochastically, by integrating Langevin trajectories ([`langevin`]) and
//!   measuring them the way a laboratory would ([`spectra`]).
//!
//! [`fluxlab`] holds the flux–temperature arithmetic and the single-mode vs
//! bulk energy-scale comparison.
//!
//! All numerical code is generic over [`Real`] (`f64` or `f32`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! tolerances elsewhere in this crate are calibrated for.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fixtures;
pub mod fluxlab;
pub mod langevin;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod spectra;
pub mod steady;

pub use scalar::{Estimate, Real, BOLTZMANN};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type OscillatorSpec = model::OscillatorSpec<f64>;
pub type FeedbackSpec = model::FeedbackSpec<f64>;
pub type CouplingSpec = model::CouplingSpec<f64>;
pub type SystemModel = model::SystemModel<f64>;
pub type StateMatrices = model::StateMatrices<f64>;
pub type SteadyState = steady::SteadyState<f64>;
pub type NormalModes = steady::NormalModes<f64>;
pub type SimConfig = langevin::SimConfig<f64>;
pub type Trajectory = langevin::Trajectory<f64>;
pub type EnsembleStats = langevin::EnsembleStats<f64>;
pub type Psd = spectra::Psd<f64>;
pub type PeakFit = spectra::PeakFit<f64>;

pub type SystemModel32 = model::SystemModel<f32>;
pub type SteadyState32 = steady::SteadyState<f32>;
pub type SimConfig32 = langevin::SimConfig<f32>;
pub type Trajectory32 = langevin::Trajectory<f32>;
