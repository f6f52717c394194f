//! Displacement spectra: band-area thermometry, line fits and the coupling
//! rate from the normal-mode splitting.

use std::f64::consts::PI;

use modeheat::linalg::spectral_abscissa;
use modeheat::spectra::{
    coupling_from_psd, default_segment_length, exact_coupling, fit_lorentzian, fit_lorentzian_pair, mode_band,
    temperature_from_area, SpectraError, WelchAccumulator, WelchConfig,
};
use modeheat::steady::normal_modes;
use modeheat::{Estimate, PeakFit, Psd, SteadyState, SystemModel, Trajectory, BOLTZMANN};
use rayon::prelude::*;

use super::simulator;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{Cell, Check, Outcome, Table};

/// Members simulated and transformed before their samples are dropped.
const CHUNK: usize = 8;

/// Smallest participation for a mode to be fitted in an oscillator's spectrum.
const FIT_PARTICIPATION: f64 = 0.01;

struct Accumulated {
    welch: Vec<WelchAccumulator>,
    /// Σ (u − ū_member)² and sample count, per analysed oscillator.
    sum_sq: Vec<f64>,
    count: Vec<usize>,
}

fn member_part(t: &Trajectory, oscillators: &[usize], template: &[WelchAccumulator]) -> Result<Accumulated, SpectraError> {
    let mut welch = template.to_vec();
    let mut sum_sq = Vec::with_capacity(oscillators.len());
    let mut count = Vec::with_capacity(oscillators.len());
    for (acc, &i) in welch.iter_mut().zip(oscillators) {
        acc.add(&t.u[i])?;
        let n = t.u[i].len();
        let mean = t.u[i].iter().sum::<f64>() / n as f64;
        sum_sq.push(t.u[i].iter().map(|x| (x - mean).powi(2)).sum());
        count.push(n);
    }
    Ok(Accumulated { welch, sum_sq, count })
}

/// Streams the ensemble through Welch accumulators, `CHUNK` members at a time.
fn accumulate(config: &ExperimentConfig, model: &SystemModel, oscillators: &[usize], out: &mut Outcome) -> Result<Accumulated, CliError> {
    let sim = simulator(model, &config.sim, out)?;
    let members: Vec<usize> = (0..sim.config().ensemble_size).collect();
    let rate = -spectral_abscissa(&model.compile()?.drift);
    let mut total: Option<Accumulated> = None;
    for chunk in members.chunks(CHUNK) {
        let trajectories: Vec<Trajectory> = chunk.par_iter().map(|&k| sim.run(k)).collect::<Result<_, _>>()?;
        if total.is_none() {
            let first = &trajectories[0];
            let segment = config
                .analysis
                .segment_length
                .unwrap_or_else(|| default_segment_length(first.len(), first.sample_interval(), rate));
            let welch = WelchConfig::new(segment).overlap(config.analysis.overlap).window(config.analysis.window);
            let acc = WelchAccumulator::new(welch, first.sample_interval())?;
            total = Some(Accumulated {
                welch: vec![acc; oscillators.len()],
                sum_sq: vec![0.0; oscillators.len()],
                count: vec![0; oscillators.len()],
            });
        }
        let total = total.as_mut().expect("initialised above");
        let empty: Vec<WelchAccumulator> = total.welch.iter().map(WelchAccumulator::emptied).collect();
        let parts: Vec<Accumulated> = trajectories
            .par_iter()
            .map(|t| member_part(t, oscillators, &empty))
            .collect::<Result<_, _>>()?;
        for part in parts {
            for (k, acc) in total.welch.iter_mut().enumerate() {
                acc.merge(&part.welch[k])?;
                total.sum_sq[k] += part.sum_sq[k];
                total.count[k] += part.count[k];
            }
        }
    }
    total.ok_or_else(|| CliError::Config("sim.ensemble_size must be ≥ 1".into()))
}

fn fit_row(label: &str, mode_hz: f64, mode_gamma: f64, fit: &PeakFit) -> Vec<Cell> {
    vec![
        label.into(),
        mode_hz.into(),
        mode_gamma.into(),
        fit.center.into(),
        fit.center_std_error.into(),
        fit.fwhm_gamma.into(),
        fit.area.into(),
        fit.goodness.into(),
    ]
}

pub fn spectrum(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let model = config.model()?;
    let a = &config.analysis;
    let oscillators = config.oscillator_indices()?;
    let mut out = Outcome::default();
    let ss = SteadyState::solve(model)?;
    let matrices = model.compile()?;
    let modes = normal_modes(model, &matrices);
    let acc = accumulate(config, model, &oscillators, &mut out)?;

    let mut thermometry = Table::new(
        "thermometry",
        &[
            "oscillator",
            "T_pos_lyap",
            "T_area",
            "T_area_se",
            "captured_fraction",
            "band_low_hz",
            "band_high_hz",
            "psd_area",
            "record_variance",
            "n_segments",
            "resolution_bandwidth_hz",
        ],
    );
    let mut peaks = Table::new(
        "peaks",
        &["oscillator", "mode_frequency_hz", "mode_gamma", "fit_center_hz", "fit_center_se_hz", "fit_fwhm_gamma", "fit_area", "fit_goodness"],
    );
    let mut psds: Vec<(usize, Psd, (f64, f64))> = Vec::new();
    for (k, &i) in oscillators.iter().enumerate() {
        let o = &model.oscillators[i];
        let l = o.label.as_str();
        let psd: Psd = acc.welch[k].finish()?;
        let band = mode_band(&psd, model, i, a.band_linewidths)?;
        let t = temperature_from_area(&psd, model, i, band)?;
        let variance = acc.sum_sq[k] / acc.count[k] as f64;
        let area = psd.area();
        thermometry.push(vec![
            l.into(),
            ss.mode_temperature_positional[i].into(),
            t.temperature.value.into(),
            t.temperature.std_error.into(),
            t.captured_fraction.into(),
            band.0.into(),
            band.1.into(),
            area.into(),
            variance.into(),
            psd.n_segments.into(),
            psd.resolution_bandwidth.into(),
        ]);
        let parseval = if variance > 0.0 { (area / variance - 1.0).abs() } else { area.abs() };
        out.checks.push(Check::new(
            format!("parseval_{l}"),
            parseval <= a.parseval_tolerance,
            format!("PSD area {area:e} vs record variance {variance:e}: relative difference {parseval:.3e}"),
        ));
        out.checks.push(Check::agree(
            format!("thermometry_{l}"),
            t.temperature,
            Estimate::exact(ss.mode_temperature_positional[i]),
            a.z_tolerance,
        ));
        if t.low_capture {
            out.warnings.push(format!("band for `{l}` captures only {:.1}% of the variance", 100.0 * t.captured_fraction));
        }

        let visible: Vec<_> = modes
            .modes
            .iter()
            .filter(|m| m.participation[i] >= FIT_PARTICIPATION && m.frequency > 0.0)
            .filter(|m| m.frequency / (2.0 * PI) >= band.0 && m.frequency / (2.0 * PI) <= band.1)
            .collect();
        let rbw = psd.resolution_bandwidth;
        let stiffness_over_kb = o.stiffness() / BOLTZMANN;
        match visible.as_slice() {
            [m] => match fit_lorentzian(&psd, None, band) {
                Ok(fit) => {
                    let (f_mode, g_mode) = (m.frequency / (2.0 * PI), m.linewidth / 2.0);
                    peaks.push(fit_row(l, f_mode, g_mode, &fit));
                    out.checks.push(Check::new(
                        format!("fit_center_{l}"),
                        (fit.center - f_mode).abs() <= rbw,
                        format!("{:e} Hz vs mode {f_mode:e} Hz (resolution {rbw:e} Hz)", fit.center),
                    ));
                    out.checks.push(Check::relative(format!("fit_linewidth_{l}"), fit.fwhm_gamma, g_mode, a.fit_relative_tolerance, 0.0));
                    out.checks.push(Check::relative(
                        format!("fit_area_{l}"),
                        fit.area * stiffness_over_kb,
                        t.temperature.value,
                        a.fit_relative_tolerance,
                        0.0,
                    ));
                }
                Err(e) => out.warnings.push(format!("line fit for `{l}`: {e}")),
            },
            [m0, m1] => match fit_lorentzian_pair(&psd, band) {
                Ok((lo, hi)) => {
                    for (m, fit) in [(m0, &lo), (m1, &hi)] {
                        peaks.push(fit_row(l, m.frequency / (2.0 * PI), m.linewidth / 2.0, fit));
                    }
                }
                Err(e) => out.warnings.push(format!("doublet fit for `{l}`: {e}")),
            },
            _ => out.warnings.push(format!("{} modes in the band of `{l}`; no line fit", visible.len())),
        }
        psds.push((i, psd, band));
    }

    if model.len() >= 2 {
        if let Ok((pa, pb)) = config.pair_indices() {
            let (la, lb) = (&model.oscillators[pa].label, &model.oscillators[pb].label);
            if let Ok(rate) = model.coupling_g(la, lb) {
                let mut coupling = Table::new("coupling", &["g_model", "g_exact", "g_psd", "g_psd_se"]);
                let exact = exact_coupling(model, (pa, pb)).map(|e| e.value).unwrap_or(f64::NAN);
                let measured = match psds.iter().find(|(i, _, _)| *i == pa) {
                    Some((_, psd, band)) => coupling_from_psd(psd, model, (pa, pb), Some(*band)),
                    None => Err(SpectraError::NoSuchOscillator(pa)),
                };
                match measured {
                    Ok(g) => {
                        coupling.push(vec![rate.g.into(), exact.into(), g.value.into(), g.std_error.into()]);
                        out.checks.push(Check::relative("coupling_from_splitting", g.value, rate.g, a.spectral_relative_tolerance, 0.0));
                    }
                    Err(e) => {
                        coupling.push(vec![rate.g.into(), exact.into(), f64::NAN.into(), f64::NAN.into()]);
                        out.warnings.push(format!("coupling from splitting: {e}"));
                    }
                }
                out.tables.push(coupling);
            }
        }
    }

    out.summary.insert("lyapunov_residual".into(), ss.residual.into());
    out.tables.push(thermometry);
    out.tables.push(peaks);
    out.spectra = psds.into_iter().map(|(i, psd, _)| (model.oscillators[i].label.clone(), psd)).collect();
    Ok(out)
}
