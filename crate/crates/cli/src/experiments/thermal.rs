//! Equipartition, cold damping and coupled heat transfer: stationary
//! temperatures and bath fluxes, exactly and from trajectories.

use modeheat::langevin::{direct_heat_flux_mc, gap_heat_flux_mc, mode_temperature_mc};
use modeheat::model::{pos, vel, DEFAULT_NOISE_FACTOR};
use modeheat::steady::{coupling_heat_flux, feedback_heat_flux};
use modeheat::{Estimate, EnsembleStats, SteadyState, SystemModel, BOLTZMANN};

use super::simulate_ensemble;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{Cell, Check, Outcome, Table};

/// Absolute floor for flux comparisons, W.
const FLUX_FLOOR: f64 = 1e-30;

fn require_uncoupled(config: &ExperimentConfig, allow_feedback: bool) -> Result<&SystemModel, CliError> {
    let model = config.model()?;
    let name = config.experiment.name();
    if model.couplings.iter().any(|c| c.spring_constant != 0.0) {
        return Err(CliError::Config(format!("{name} expects uncoupled oscillators")));
    }
    if !allow_feedback && !model.feedbacks.is_empty() {
        return Err(CliError::Config(format!("{name} expects no feedback")));
    }
    Ok(model)
}

/// Energy-balance estimate of the bath flux from Monte Carlo moments:
/// minus the power delivered by feedback and coupling forces.
pub fn balance_flux_mc(stats: &EnsembleStats, model: &SystemModel, i: usize) -> Estimate<f64> {
    let c = &stats.covariance;
    let se = &stats.covariance_se;
    let value = -(feedback_heat_flux(c, model)[i] + coupling_heat_flux(c, model)[i]);
    let fb = model.feedback(i);
    let mut var = (fb.velocity_gain * se[(vel(i), vel(i))]).powi(2) + (fb.position_gain * se[(pos(i), vel(i))]).powi(2);
    for j in (0..model.len()).filter(|&j| j != i) {
        let k = model.spring_between(i, j);
        var += (k * se[(vel(i), pos(j))]).powi(2) + (k * se[(vel(i), pos(i))]).powi(2);
    }
    Estimate::new(value, var.sqrt())
}

pub fn equipartition(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = require_uncoupled(config, false)?;
    let a = &config.analysis;
    let mut out = Outcome::default();
    let ss = SteadyState::solve(model)?;
    let ens = simulate_ensemble(model, &config.sim, &mut out)?;
    let mc = mode_temperature_mc(&ens.stats, model);
    let ratio = model.noise_factor / DEFAULT_NOISE_FACTOR;

    let mut table = Table::new(
        "temperatures",
        &[
            "oscillator",
            "bath_temperature",
            "T_pos_lyap",
            "T_kin_lyap",
            "T_pos_mc",
            "T_pos_mc_se",
            "T_kin_mc",
            "T_kin_mc_se",
            "noise_ratio",
        ],
    );
    for i in config.oscillator_indices()? {
        let o = &model.oscillators[i];
        let t = o.bath_temperature;
        let (tp, tk) = (ss.mode_temperature_positional[i], ss.mode_temperature_kinetic[i]);
        table.push(vec![
            Cell::from(o.label.as_str()),
            t.into(),
            tp.into(),
            tk.into(),
            mc[i].positional.value.into(),
            mc[i].positional.std_error.into(),
            mc[i].kinetic.value.into(),
            mc[i].kinetic.std_error.into(),
            ratio.into(),
        ]);
        let floor = 1e-12;
        out.checks.push(Check::relative(format!("lyapunov_positional_{}", o.label), tp, t, a.lyapunov_tolerance, floor));
        out.checks.push(Check::relative(format!("lyapunov_kinetic_{}", o.label), tk, t, a.lyapunov_tolerance, floor));
        for (kind, est) in [("positional", mc[i].positional), ("kinetic", mc[i].kinetic)] {
            out.checks.push(Check::agree(format!("mc_{kind}_{}", o.label), est, Estimate::exact(t), a.z_tolerance));
            out.checks.push(Check::relative(format!("mc_{kind}_relative_{}", o.label), est.value, t, a.mc_relative_tolerance, floor));
            if let Some(max_se) = a.max_relative_se {
                let rel = if t > 0.0 { est.std_error / t } else { 0.0 };
                out.checks.push(Check::new(
                    format!("mc_{kind}_precision_{}", o.label),
                    rel <= max_se,
                    format!("SE/T = {rel:.3e} (limit {max_se:e})"),
                ));
            }
        }
    }
    out.summary.insert("noise_factor".into(), model.noise_factor.into());
    out.summary.insert("ensemble_size".into(), ens.sim.ensemble_size.into());
    out.summary.insert("n_steps".into(), ens.sim.n_steps.into());
    out.summary.insert("dt".into(), ens.sim.dt.into());
    out.summary.insert("lyapunov_residual".into(), ss.residual.into());
    out.tables.push(table);
    Ok(out)
}

pub fn cold_damping(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = require_uncoupled(config, true)?;
    let a = &config.analysis;
    let mut out = Outcome::default();
    let ss = SteadyState::solve(model)?;
    let ens = simulate_ensemble(model, &config.sim, &mut out)?;
    let mc = mode_temperature_mc(&ens.stats, model);

    let mut table = Table::new(
        "cold_damping",
        &[
            "oscillator",
            "bath_temperature",
            "gamma",
            "gamma_fb",
            "T_kin_expected",
            "T_kin_lyap",
            "T_kin_mc",
            "T_kin_mc_se",
            "P_bath_lyap",
            "P_gap_lyap",
            "P_feedback_lyap",
        ],
    );
    for i in config.oscillator_indices()? {
        let o = &model.oscillators[i];
        let fb = model.feedback(i);
        let gamma_fb = -fb.velocity_gain / (2.0 * o.mass);
        let gamma_eff = o.gamma + gamma_fb;
        let expected = (model.thermal_noise_intensity(i) + fb.noise_psd) / (4.0 * o.mass * gamma_eff * BOLTZMANN);
        let tk = ss.mode_temperature_kinetic[i];
        let p_bath = ss.bath_flux[i];
        let p_gap = 2.0 * o.gamma * BOLTZMANN * (o.bath_temperature - tk);
        let p_fb = ss.feedback_flux[i];
        table.push(vec![
            Cell::from(o.label.as_str()),
            o.bath_temperature.into(),
            o.gamma.into(),
            gamma_fb.into(),
            expected.into(),
            tk.into(),
            mc[i].kinetic.value.into(),
            mc[i].kinetic.std_error.into(),
            p_bath.into(),
            p_gap.into(),
            p_fb.into(),
        ]);
        let l = &o.label;
        out.checks.push(Check::relative(format!("lyapunov_kinetic_{l}"), tk, expected, a.lyapunov_tolerance, 1e-12));
        out.checks.push(Check::relative(format!("bath_flux_gap_{l}"), p_bath, p_gap, a.lyapunov_tolerance, FLUX_FLOOR));
        out.checks.push(Check::relative(format!("feedback_balances_bath_{l}"), p_fb, -p_bath, a.lyapunov_tolerance, FLUX_FLOOR));
        out.checks.push(Check::agree(format!("mc_kinetic_{l}"), mc[i].kinetic, Estimate::exact(tk), a.z_tolerance));
    }
    out.checks.push(Check::new(
        "energy_balance",
        ss.is_balanced(),
        format!("imbalance {:e} W over flux scale {:e} W", ss.energy_imbalance(), ss.flux_scale()),
    ));
    out.summary.insert("lyapunov_residual".into(), ss.residual.into());
    out.tables.push(table);
    Ok(out)
}

pub fn coupled_transfer(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = config.model()?;
    let a = &config.analysis;
    let z = a.z_tolerance;
    let mut out = Outcome::default();
    let ss = SteadyState::solve(model)?;
    let ens = simulate_ensemble(model, &config.sim, &mut out)?;
    let mc = mode_temperature_mc(&ens.stats, model);

    let mut table = Table::new(
        "fluxes",
        &[
            "oscillator",
            "bath_temperature",
            "T_pos_lyap",
            "T_kin_lyap",
            "T_pos_mc",
            "T_pos_mc_se",
            "T_kin_mc",
            "T_kin_mc_se",
            "P_lyap",
            "P_direct",
            "P_direct_se",
            "P_gap_mc",
            "P_gap_mc_se",
            "P_balance_mc",
            "P_balance_mc_se",
            "P_feedback_lyap",
            "P_coupling_lyap",
        ],
    );
    for i in config.oscillator_indices()? {
        let o = &model.oscillators[i];
        let l = &o.label;
        let direct = direct_heat_flux_mc(&ens.trajectories, model, i)?;
        let gap = gap_heat_flux_mc(&ens.stats, model, i);
        let balance = balance_flux_mc(&ens.stats, model, i);
        let lyap = Estimate::exact(ss.bath_flux[i]);
        table.push(vec![
            Cell::from(l.as_str()),
            o.bath_temperature.into(),
            ss.mode_temperature_positional[i].into(),
            ss.mode_temperature_kinetic[i].into(),
            mc[i].positional.value.into(),
            mc[i].positional.std_error.into(),
            mc[i].kinetic.value.into(),
            mc[i].kinetic.std_error.into(),
            lyap.value.into(),
            direct.value.into(),
            direct.std_error.into(),
            gap.value.into(),
            gap.std_error.into(),
            balance.value.into(),
            balance.std_error.into(),
            ss.feedback_flux[i].into(),
            ss.coupling_flux[i].into(),
        ]);
        out.checks.push(Check::agree(format!("direct_vs_gap_{l}"), direct, gap, z));
        out.checks.push(Check::agree(format!("direct_vs_lyapunov_{l}"), direct, lyap, z));
        out.checks.push(Check::agree(format!("gap_vs_lyapunov_{l}"), gap, lyap, z));
        out.checks.push(Check::agree(format!("balance_vs_lyapunov_{l}"), balance, lyap, z));
        out.checks.push(Check::agree(
            format!("kinetic_temperature_{l}"),
            mc[i].kinetic,
            Estimate::exact(ss.mode_temperature_kinetic[i]),
            z,
        ));
    }
    out.checks.push(Check::new(
        "energy_balance",
        ss.is_balanced(),
        format!("imbalance {:e} W over flux scale {:e} W", ss.energy_imbalance(), ss.flux_scale()),
    ));
    out.summary.insert("balance_residual".into(), ss.balance_residual().into());
    out.summary.insert("lyapunov_residual".into(), ss.residual.into());
    out.summary.insert("ensemble_size".into(), ens.sim.ensemble_size.into());
    out.summary.insert("n_steps".into(), ens.sim.n_steps.into());
    out.tables.push(table);
    Ok(out)
}
