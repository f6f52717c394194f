//! Mode temperature and bath flux of a two-bath pair across coupling strengths.

use modeheat::langevin::{direct_heat_flux_mc, gap_heat_flux_mc, mode_temperature_mc};
use modeheat::linalg::spectral_abscissa;
use modeheat::spectra::{default_segment_length, ensemble_welch_psd, mode_band, temperature_from_area, WelchConfig};
use modeheat::{Estimate, SteadyState, SystemModel};

use super::simulate_ensemble;
use crate::config::{AnalysisSection, ExperimentConfig, SweepSection};
use crate::error::CliError;
use crate::output::{Check, Outcome, Table};

pub const SWEEP_COLUMNS: [&str; 14] = [
    "g_over_gamma",
    "T_prime_A_lyap",
    "T_prime_A_mc",
    "T_prime_A_mc_se",
    "T_prime_A_psd",
    "T_prime_A_psd_se",
    "P_A_gap",
    "P_A_gap_se",
    "P_A_direct",
    "P_A_direct_se",
    "P_A_lyap",
    "balance_residual",
    "control_P_A",
    "control_P_A_se",
];

/// `template` with the spring between `pair` replaced by one of rate `g`.
pub fn with_pair_rate(template: &SystemModel, pair: (usize, usize), g: f64) -> SystemModel {
    let (a, b) = (&template.oscillators[pair.0].label, &template.oscillators[pair.1].label);
    let mut model = template.clone();
    model.couplings.retain(|c| !((&c.pair.0 == a && &c.pair.1 == b) || (&c.pair.0 == b && &c.pair.1 == a)));
    model.with_coupling_rate(pair.0, pair.1, g)
}

/// Spectral positional temperature of `oscillator` from the ensemble.
pub(crate) fn spectral_temperature(
    trajectories: &[modeheat::Trajectory],
    model: &SystemModel,
    oscillator: usize,
    analysis: &AnalysisSection,
) -> Result<(Estimate<f64>, modeheat::Psd), CliError> {
    let first = &trajectories[0];
    let rate = -spectral_abscissa(&model.compile()?.drift);
    let segment = analysis
        .segment_length
        .unwrap_or_else(|| default_segment_length(first.len(), first.sample_interval(), rate));
    let welch = WelchConfig::new(segment).overlap(analysis.overlap).window(analysis.window);
    let psd = ensemble_welch_psd(trajectories, oscillator, &welch)?;
    let band = mode_band(&psd, model, oscillator, analysis.band_linewidths)?;
    let t = temperature_from_area(&psd, model, oscillator, band)?;
    Ok((t.temperature, psd))
}

pub fn strong_coupling_sweep(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let template = config.model()?;
    let pair = config.pair_indices()?;
    let sweep = config.sweep.clone().unwrap_or_default();
    let SweepSection { g_over_gamma, equal_bath_control } = sweep;
    let a = &config.analysis;
    let z = a.z_tolerance;
    let gamma = template.oscillators[pair.0].gamma;
    let (ia, ib) = pair;
    let mut out = Outcome::default();
    let mut table = Table::new("strong_coupling_sweep", &SWEEP_COLUMNS);

    for &ratio in &g_over_gamma {
        let model = with_pair_rate(template, pair, ratio * gamma);
        let ss = SteadyState::solve(&model)?;
        let ens = simulate_ensemble(&model, &config.sim, &mut out)?;
        let mc = mode_temperature_mc(&ens.stats, &model);
        let (t_psd, _) = spectral_temperature(&ens.trajectories, &model, ia, a)?;
        let gap = gap_heat_flux_mc(&ens.stats, &model, ia);
        let direct = direct_heat_flux_mc(&ens.trajectories, &model, ia)?;
        drop(ens);
        let t_lyap = Estimate::exact(ss.mode_temperature_positional[ia]);
        let p_lyap = Estimate::exact(ss.bath_flux[ia]);
        let t_mc = mc[ia].positional;

        let control = if equal_bath_control {
            let mut m = model.clone();
            let mean = 0.5 * (m.oscillators[ia].bath_temperature + m.oscillators[ib].bath_temperature);
            m.oscillators[ia].bath_temperature = mean;
            m.oscillators[ib].bath_temperature = mean;
            let ens = simulate_ensemble(&m, &config.sim, &mut out)?;
            Some(direct_heat_flux_mc(&ens.trajectories, &m, ia)?)
        } else {
            None
        };

        let tag = format!("g{ratio}");
        out.checks.push(Check::agree(format!("{tag}_T_mc_vs_lyap"), t_mc, t_lyap, z));
        out.checks.push(Check::agree(format!("{tag}_T_psd_vs_lyap"), t_psd, t_lyap, z));
        out.checks.push(Check::agree(format!("{tag}_T_psd_vs_mc"), t_psd, t_mc, z));
        out.checks.push(Check::agree(format!("{tag}_P_gap_vs_direct"), gap, direct, z));
        out.checks.push(Check::agree(format!("{tag}_P_gap_vs_lyap"), gap, p_lyap, z));
        out.checks.push(Check::agree(format!("{tag}_P_direct_vs_lyap"), direct, p_lyap, z));
        out.checks.push(Check::new(
            format!("{tag}_energy_balance"),
            ss.balance_residual() < a.lyapunov_tolerance,
            format!("relative imbalance {:e}", ss.balance_residual()),
        ));
        if let Some(c) = control {
            out.checks.push(Check::agree(format!("{tag}_control_P_zero"), c, Estimate::exact(0.0), z));
        }
        let nan = Estimate::new(f64::NAN, f64::NAN);
        let c = control.unwrap_or(nan);
        table.push(
            [
                ratio,
                t_lyap.value,
                t_mc.value,
                t_mc.std_error,
                t_psd.value,
                t_psd.std_error,
                gap.value,
                gap.std_error,
                direct.value,
                direct.std_error,
                p_lyap.value,
                ss.balance_residual(),
                c.value,
                c.std_error,
            ]
            .into_iter()
            .map(Into::into)
            .collect(),
        );
    }
    out.summary.insert("gamma".into(), gamma.into());
    out.summary.insert("pair".into(), serde_json::json!([ia, ib]));
    out.tables.push(table);
    Ok(out)
}
