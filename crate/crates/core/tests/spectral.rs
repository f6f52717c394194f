use modeheat::fixtures::{spectral_pair, spectral_single, BENCH_OMEGA, SPECTRAL_GAMMA};
use modeheat::langevin::{simulate, SimConfig};
use modeheat::spectra::{
    coupling_from_psd, ensemble_welch_psd, fit_lorentzian, mode_band, temperature_from_area, WelchConfig,
};
use modeheat::{SteadyState, BOLTZMANN};

/// Eight Welch segments of 32 damping times, sampled once per radian.
fn settings() -> (SimConfig<f64>, WelchConfig) {
    let dt = 1.0 / BENCH_OMEGA;
    let segment = (32.0 / (SPECTRAL_GAMMA * dt)) as usize;
    (SimConfig::new(dt, 8 * segment).ensemble(24).coarse(), WelchConfig::new(segment))
}

#[test]
fn band_area_gives_mode_temperature() {
    let model = spectral_single(300.0);
    let (sim, welch) = settings();
    let trajs = simulate(&model, &sim).unwrap();
    let psd = ensemble_welch_psd(&trajs, 0, &welch).unwrap();
    let band = mode_band(&psd, &model, 0, 200.0).unwrap();
    let t = temperature_from_area(&psd, &model, 0, band).unwrap();
    assert!(t.captured_fraction > 0.99);
    assert!((t.temperature.value - 300.0).abs() < 4.0 * t.temperature.std_error, "{:?}", t.temperature);

    let fit = fit_lorentzian(&psd, None, band).unwrap();
    assert!(((fit.fwhm_gamma - SPECTRAL_GAMMA) / SPECTRAL_GAMMA).abs() < 0.1, "{}", fit.fwhm_gamma);
    let t_fit = fit.area * model.oscillators[0].stiffness() / BOLTZMANN;
    assert!((t_fit / 300.0 - 1.0).abs() < 0.1, "{t_fit}");
}

#[test]
fn splitting_gives_coupling_rate() {
    let model = spectral_pair(15.0, 300.0);
    let (sim, welch) = settings();
    let trajs = simulate(&model, &sim).unwrap();
    let psd = ensemble_welch_psd(&trajs, 0, &welch).unwrap();
    let band = mode_band(&psd, &model, 0, 200.0).unwrap();
    let g = coupling_from_psd(&psd, &model, (0, 1), Some(band)).unwrap();
    let exact = model.coupling_g("a", "b").unwrap().g;
    assert!((g.value / exact - 1.0).abs() < 0.05, "{g:?} vs {exact}");

    let t = temperature_from_area(&psd, &model, 0, band).unwrap();
    let t_pos = SteadyState::solve(&model).unwrap().mode_temperature_positional[0];
    assert!((t.temperature.value - t_pos).abs() < 4.0 * t.temperature.std_error, "{:?} vs {t_pos}", t.temperature);
}
