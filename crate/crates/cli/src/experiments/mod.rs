//! The experiments behind `modeheat run`.

mod paper;
mod spectrum;
mod sweep;
mod thermal;

use modeheat::langevin::{ensemble_stats, Simulator};
use modeheat::{EnsembleStats, SimConfig, SystemModel, Trajectory};

use crate::config::{ExperimentConfig, ExperimentKind, SimSection};
use crate::error::CliError;
use crate::output::Outcome;

pub use spectrum::spectrum;
pub use sweep::strong_coupling_sweep;
pub use thermal::{cold_damping, coupled_transfer, equipartition};

pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    let mut outcome = match config.experiment {
        ExperimentKind::Equipartition => equipartition(config)?,
        ExperimentKind::ColdDamping => cold_damping(config)?,
        ExperimentKind::CoupledTransfer => coupled_transfer(config)?,
        ExperimentKind::StrongCouplingSweep => strong_coupling_sweep(config)?,
        ExperimentKind::Spectrum => spectrum(config)?,
        ExperimentKind::PaperNumbers => paper::paper_numbers(),
    };
    outcome.warnings.dedup();
    Ok(outcome)
}

pub(crate) struct Ensemble {
    pub trajectories: Vec<Trajectory>,
    pub stats: EnsembleStats,
    pub sim: SimConfig,
}

/// Builds the simulator for `model`, recording model and integrator warnings.
pub(crate) fn simulator(model: &SystemModel, section: &SimSection, outcome: &mut Outcome) -> Result<Simulator<f64>, CliError> {
    let matrices = model.compile()?;
    outcome.warnings.extend(matrices.warnings.iter().map(|w| w.to_string()));
    let sim = section.resolve(model)?;
    let simulator = Simulator::new(model, &sim)?;
    outcome.warnings.extend(simulator.warnings().iter().map(|w| w.to_string()));
    if !outcome.fingerprints.iter().any(|f| f == simulator.fingerprint()) {
        outcome.fingerprints.push(simulator.fingerprint().to_string());
    }
    Ok(simulator)
}

pub(crate) fn simulate_ensemble(model: &SystemModel, section: &SimSection, outcome: &mut Outcome) -> Result<Ensemble, CliError> {
    let simulator = simulator(model, section, outcome)?;
    let trajectories = simulator.run_all()?;
    let stats = ensemble_stats(&trajectories)?;
    Ok(Ensemble { trajectories, stats, sim: simulator.config().clone() })
}
