//! Coupling rate from the splitting of two hybridized lines, `g = π (f₊ − f₋)`.

use super::{default_band, fit_lorentzian_pair, Psd, SpectraError};
use crate::model::SystemModel;
use crate::scalar::{Estimate, Real};
use crate::steady::{normal_modes, NormalModes};

/// Relative splitting (of the mean bare frequency) below which the exact
/// route reports the pair as unresolved.
const EXACT_RESOLUTION: f64 = 1e-6;

/// Input of [`coupling_from_splitting`].
pub enum SplittingSource<'a, T: Real> {
    Modes(&'a NormalModes<T>),
    Spectrum { psd: &'a Psd<T>, band: Option<(T, T)> },
}

/// Half the angular splitting of the exact normal modes of `pair`, rad/s.
pub fn coupling_from_modes<T: Real>(
    modes: &NormalModes<T>,
    model: &SystemModel<T>,
    pair: (usize, usize),
) -> Result<Estimate<T>, SpectraError> {
    for &i in [pair.0, pair.1].iter() {
        if i >= model.len() {
            return Err(SpectraError::NoSuchOscillator(i));
        }
    }
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let omega = (model.oscillators[pair.0].omega * model.oscillators[pair.1].omega).sqrt();
    let unresolved = |s: T, widths: (T, T)| SpectraError::UnresolvedSplitting {
        separation: (s / two_pi).as_f64(),
        resolution: (T::lit(EXACT_RESOLUTION) * omega / two_pi).as_f64(),
        widths: ((widths.0 / two_pi).as_f64(), (widths.1 / two_pi).as_f64()),
    };
    let split = modes.splitting_for(pair.0, pair.1).ok_or_else(|| unresolved(T::zero(), (T::zero(), T::zero())))?;
    let widths = (modes.modes[split.modes.0].linewidth, modes.modes[split.modes.1].linewidth);
    if model.spring_between(pair.0, pair.1) == T::zero() || split.splitting <= T::lit(EXACT_RESOLUTION) * omega {
        return Err(unresolved(split.splitting, widths));
    }
    Ok(Estimate::exact(split.splitting / T::lit(2.0)))
}

/// Coupling from a two-line fit to a measured displacement spectrum of one
/// member of `pair`. The lines must be separated by more than two
/// resolution bandwidths and by more than either fitted width.
pub fn coupling_from_psd<T: Real>(
    psd: &Psd<T>,
    model: &SystemModel<T>,
    pair: (usize, usize),
    band: Option<(T, T)>,
) -> Result<Estimate<T>, SpectraError> {
    let band = match band {
        Some(b) => b,
        None => default_band(psd, model, pair.0)?,
    };
    let (lo, hi) = fit_lorentzian_pair(psd, band)?;
    let separation = (hi.center - lo.center).as_f64();
    let widths = (lo.fwhm_hz().as_f64(), hi.fwhm_hz().as_f64());
    let resolution = psd.resolution_bandwidth.as_f64();
    if !(separation > 2.0 * resolution && separation > widths.0 && separation > widths.1) {
        return Err(SpectraError::UnresolvedSplitting { separation, resolution, widths });
    }
    let se = (lo.center_std_error * lo.center_std_error + hi.center_std_error * hi.center_std_error).sqrt();
    Ok(Estimate::new(T::pi() * (hi.center - lo.center), T::pi() * se))
}

/// Coupling rate `g` in rad/s from either exact modes or a spectrum.
pub fn coupling_from_splitting<T: Real>(
    source: SplittingSource<'_, T>,
    model: &SystemModel<T>,
    pair: (usize, usize),
) -> Result<Estimate<T>, SpectraError> {
    match source {
        SplittingSource::Modes(modes) => coupling_from_modes(modes, model, pair),
        SplittingSource::Spectrum { psd, band } => coupling_from_psd(psd, model, pair, band),
    }
}

/// Exact-route convenience: compiles `model` and diagonalizes its drift.
pub fn exact_coupling<T: Real>(model: &SystemModel<T>, pair: (usize, usize)) -> Result<Estimate<T>, SpectraError> {
    let matrices = model.compile().map_err(|e| SpectraError::InvalidParameter(e.to_string()))?;
    coupling_from_modes(&normal_modes(model, &matrices), model, pair)
}
