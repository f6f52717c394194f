//! Mode temperature from the area under a displacement spectrum.

use serde::Serialize;

use super::{Psd, SpectraError, DEFAULT_BAND_LINEWIDTHS};
use crate::model::SystemModel;
use crate::scalar::{Estimate, Real};
use crate::steady::normal_modes;

/// Captured fractions below this are flagged.
pub const LOW_CAPTURE_FRACTION: f64 = 0.5;

/// Smallest participation for a normal mode to count towards an oscillator's band.
const BAND_PARTICIPATION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandTemperature<T> {
    /// `mΩ² · area / k_B`, K.
    pub temperature: Estimate<T>,
    /// Hz.
    pub band: (T, T),
    /// Band area over full-grid area.
    pub captured_fraction: T,
    /// Set when `captured_fraction < 0.5`.
    pub low_capture: bool,
}

/// Band covering every normal mode in which `oscillator` participates,
/// padded by 20 linewidths on either side and clipped to the grid.
pub fn default_band<T: Real>(psd: &Psd<T>, model: &SystemModel<T>, oscillator: usize) -> Result<(T, T), SpectraError> {
    mode_band(psd, model, oscillator, T::lit(DEFAULT_BAND_LINEWIDTHS))
}

/// As [`default_band`] with a padding of `linewidths`.
pub fn mode_band<T: Real>(
    psd: &Psd<T>,
    model: &SystemModel<T>,
    oscillator: usize,
    linewidths: T,
) -> Result<(T, T), SpectraError> {
    if oscillator >= model.len() {
        return Err(SpectraError::NoSuchOscillator(oscillator));
    }
    let matrices = model.compile().map_err(|e| SpectraError::InvalidParameter(e.to_string()))?;
    let modes = normal_modes(model, &matrices);
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let pad = linewidths;
    let mut band: Option<(T, T)> = None;
    for mode in modes.modes.iter().filter(|m| m.participation[oscillator] >= T::lit(BAND_PARTICIPATION)) {
        let f = mode.frequency / two_pi;
        let w = mode.linewidth / two_pi;
        let (lo, hi) = (f - pad * w, f + pad * w);
        band = Some(match band {
            None => (lo, hi),
            Some((a, b)) => (a.min(lo), b.max(hi)),
        });
    }
    let (lo, hi) = band.unwrap_or_else(|| {
        let f = model.oscillators[oscillator].omega / two_pi;
        let w = T::lit(2.0) * model.oscillators[oscillator].gamma / two_pi;
        (f - pad * w, f + pad * w)
    });
    Ok((lo.max(T::zero()), hi.min(psd.nyquist())))
}

/// `T′ = mΩ² · (Σ values·Δf over band) / k_B`.
///
/// The standard error treats each bin as a χ² average over the effective
/// number of segments, with neighbouring bins correlated over the window's
/// equivalent noise bandwidth.
pub fn temperature_from_area<T: Real>(
    psd: &Psd<T>,
    model: &SystemModel<T>,
    oscillator: usize,
    band: (T, T),
) -> Result<BandTemperature<T>, SpectraError> {
    let o = model.oscillators.get(oscillator).ok_or(SpectraError::NoSuchOscillator(oscillator))?;
    let range = psd.band_indices(band.0, band.1)?;
    let df = psd.bin_width().as_f64();
    let values = &psd.values[range];
    let area: f64 = values.iter().map(|v| v.as_f64()).sum::<f64>() * df;
    let sum_sq: f64 = values.iter().map(|v| v.as_f64().powi(2)).sum();
    let area_se = (psd.enbw_bins() * sum_sq / psd.effective_segments().max(1.0)).sqrt() * df;
    let total = psd.area().as_f64();
    let factor = (o.stiffness() / T::boltzmann()).as_f64();
    let captured = if total > 0.0 { area / total } else { 0.0 };
    Ok(BandTemperature {
        temperature: Estimate::new(T::lit(factor * area), T::lit(factor * area_se)),
        band,
        captured_fraction: T::lit(captured),
        low_capture: captured < LOW_CAPTURE_FRACTION,
    })
}
