//! Spectral thermometry: Welch power spectra of trajectories, mode
//! temperature from band area, Lorentzian line fits and the coupling rate
//! from a normal-mode splitting.
//!
//! Spectra are one-sided and in Hz: `Σ values · Δf` over the full grid
//! equals the variance of the (segment-detrended) record.

mod fit;
mod splitting;
mod thermometry;

use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::langevin::Trajectory;
use crate::scalar::Real;

pub use fit::{fit_lorentzian, fit_lorentzian_pair, guess_peak, PeakFit, PeakGuess, MAX_FIT_ITERATIONS, FIT_STEP_TOLERANCE};
pub use splitting::{coupling_from_modes, coupling_from_psd, coupling_from_splitting, exact_coupling, SplittingSource};
pub use thermometry::{default_band, mode_band, temperature_from_area, BandTemperature, LOW_CAPTURE_FRACTION};

/// Half-width of the default thermometry band, in linewidths.
pub const DEFAULT_BAND_LINEWIDTHS: f64 = 20.0;

/// Default segment count target for [`default_segment_length`].
pub const DEFAULT_SEGMENTS: usize = 16;

/// Default segment length in damping times `1/γ`.
pub const DEFAULT_SEGMENT_DAMPING_TIMES: f64 = 32.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("record of {available} samples is shorter than one segment of {segment}")]
    RecordTooShort { available: usize, segment: usize },
    #[error("invalid Welch parameter: {0}")]
    InvalidParameter(String),
    #[error("no oscillator with index {0}")]
    NoSuchOscillator(usize),
    #[error("band [{low}, {high}] Hz is outside the spectrum grid [0, {nyquist}] Hz")]
    BandOutOfRange { low: f64, high: f64, nyquist: f64 },
    #[error("fit band holds {points} points, at least {required} needed")]
    DegenerateBand { points: usize, required: usize },
    #[error("line fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize, best: Box<PeakFit<f64>> },
    #[error("peaks are not resolved: separation {separation:e} Hz vs resolution {resolution:e} Hz and widths {widths:?} Hz")]
    UnresolvedSplitting { separation: f64, resolution: f64, widths: (f64, f64) },
    #[error("trajectories differ in sampling or model")]
    InconsistentEnsemble,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        }
    }
}

/// Welch estimator settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub segment_length: usize,
    #[serde(default = "default_overlap")]
    pub overlap_fraction: f64,
    #[serde(default)]
    pub window: Window,
}

fn default_overlap() -> f64 {
    0.5
}

impl WelchConfig {
    pub fn new(segment_length: usize) -> Self {
        Self { segment_length, overlap_fraction: 0.5, window: Window::Hann }
    }

    pub fn overlap(mut self, fraction: f64) -> Self {
        self.overlap_fraction = fraction;
        self
    }

    pub fn window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    fn validate(&self) -> Result<(), SpectraError> {
        if self.segment_length < 2 {
            return Err(SpectraError::InvalidParameter(format!("segment_length = {}", self.segment_length)));
        }
        if !(0.0..=0.9).contains(&self.overlap_fraction) {
            return Err(SpectraError::InvalidParameter(format!("overlap_fraction = {}", self.overlap_fraction)));
        }
        Ok(())
    }

    fn hop(&self) -> usize {
        let overlap = (self.overlap_fraction * self.segment_length as f64).round() as usize;
        (self.segment_length - overlap).max(1)
    }

    /// Segments that fit in a record of `n` samples.
    pub fn segments_in(&self, n: usize) -> usize {
        if n < self.segment_length {
            0
        } else {
            (n - self.segment_length) / self.hop() + 1
        }
    }
}

/// `max(n / 16, 32/γ in samples)`, capped at the record length.
pub fn default_segment_length(record_len: usize, sample_interval: f64, gamma: f64) -> usize {
    let resolving = (DEFAULT_SEGMENT_DAMPING_TIMES / (gamma * sample_interval)).ceil();
    let resolving = if resolving.is_finite() { resolving as usize } else { record_len };
    (record_len / DEFAULT_SEGMENTS).max(resolving).min(record_len).max(2)
}

/// One-sided power spectral density on a uniform grid from 0 to Nyquist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psd<T> {
    /// Hz.
    pub frequencies: Vec<T>,
    /// m²/Hz (or signal unit²/Hz).
    pub values: Vec<T>,
    /// Equivalent noise bandwidth of one bin, Hz.
    pub resolution_bandwidth: T,
    pub n_segments: usize,
    pub window: Window,
    /// Variance inflation of the segment average from overlapping windows.
    pub overlap_correlation: f64,
}

impl<T: Real> Psd<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid spacing Δf, Hz.
    pub fn bin_width(&self) -> T {
        if self.frequencies.len() < 2 {
            T::zero()
        } else {
            self.frequencies[1] - self.frequencies[0]
        }
    }

    pub fn nyquist(&self) -> T {
        self.frequencies.last().copied().unwrap_or_else(T::zero)
    }

    /// Equivalent noise bandwidth over bin spacing (1.5 for Hann).
    pub fn enbw_bins(&self) -> f64 {
        let df = self.bin_width().as_f64();
        if df > 0.0 {
            self.resolution_bandwidth.as_f64() / df
        } else {
            1.0
        }
    }

    /// Effective number of independent segment averages.
    pub fn effective_segments(&self) -> f64 {
        self.n_segments as f64 / self.overlap_correlation
    }

    /// Σ values · Δf over the full grid.
    pub fn area(&self) -> T {
        let df = self.bin_width();
        self.values.iter().fold(T::zero(), |a, &v| a + v) * df
    }

    /// Index range of grid points with `low ≤ f ≤ high`.
    pub fn band_indices(&self, low: T, high: T) -> Result<std::ops::Range<usize>, SpectraError> {
        let nyquist = self.nyquist();
        if !(low >= T::zero()) || !(high <= nyquist) || !(low < high) {
            return Err(SpectraError::BandOutOfRange { low: low.as_f64(), high: high.as_f64(), nyquist: nyquist.as_f64() });
        }
        let start = self.frequencies.partition_point(|&f| f < low);
        let end = self.frequencies.partition_point(|&f| f <= high);
        Ok(start..end)
    }

    /// Σ values · Δf over `[low, high]`.
    pub fn band_area(&self, low: T, high: T) -> Result<T, SpectraError> {
        let range = self.band_indices(low, high)?;
        Ok(self.values[range].iter().fold(T::zero(), |a, &v| a + v) * self.bin_width())
    }

    /// CSV with a comment header and columns `frequency_hz,psd_m2_per_hz`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "# resolution_bandwidth={}, n_segments={}, window={}",
            self.resolution_bandwidth.as_f64(),
            self.n_segments,
            self.window.name()
        )?;
        writeln!(out, "frequency_hz,psd_m2_per_hz")?;
        for (f, v) in self.frequencies.iter().zip(&self.values) {
            writeln!(out, "{},{}", f.as_f64(), v.as_f64())?;
        }
        Ok(())
    }
}

/// Running sum of windowed segment periodograms. Series can be added one at
/// a time, so ensembles need not be held in memory.
#[derive(Clone)]
pub struct WelchAccumulator {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    config: WelchConfig,
    sample_interval: f64,
    sums: Vec<f64>,
    n_segments: usize,
}

impl WelchAccumulator {
    pub fn new(config: WelchConfig, sample_interval: f64) -> Result<Self, SpectraError> {
        config.validate()?;
        if !(sample_interval > 0.0) || !sample_interval.is_finite() {
            return Err(SpectraError::InvalidParameter(format!("sample interval = {sample_interval}")));
        }
        let fft = FftPlanner::new().plan_fft_forward(config.segment_length);
        Ok(Self {
            fft,
            window: config.window.coefficients(config.segment_length),
            sums: vec![0.0; config.segment_length / 2 + 1],
            config,
            sample_interval,
            n_segments: 0,
        })
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    /// Same settings, no segments.
    pub fn emptied(&self) -> Self {
        Self { sums: vec![0.0; self.sums.len()], n_segments: 0, ..self.clone() }
    }

    /// Adds every segment of `samples`.
    pub fn add<T: Real>(&mut self, samples: &[T]) -> Result<(), SpectraError> {
        let l = self.config.segment_length;
        if samples.len() < l {
            return Err(SpectraError::RecordTooShort { available: samples.len(), segment: l });
        }
        let hop = self.config.hop();
        let count = self.config.segments_in(samples.len());
        let mut buf = vec![Complex::new(0.0, 0.0); l];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for s in 0..count {
            let seg = &samples[s * hop..s * hop + l];
            let mean = seg.iter().map(|x| x.as_f64()).sum::<f64>() / l as f64;
            for ((b, x), &w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex::new((x.as_f64() - mean) * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (a, z) in self.sums.iter_mut().zip(&buf) {
                *a += z.norm_sqr();
            }
        }
        self.n_segments += count;
        Ok(())
    }

    /// Adds the segments held by `other`, which must share settings.
    pub fn merge(&mut self, other: &WelchAccumulator) -> Result<(), SpectraError> {
        if other.config != self.config || other.sample_interval != self.sample_interval {
            return Err(SpectraError::InconsistentEnsemble);
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        self.n_segments += other.n_segments;
        Ok(())
    }

    pub fn finish<T: Real>(&self) -> Result<Psd<T>, SpectraError> {
        if self.n_segments == 0 {
            return Err(SpectraError::RecordTooShort { available: 0, segment: self.config.segment_length });
        }
        let l = self.config.segment_length;
        let fs = 1.0 / self.sample_interval;
        let sum_w2: f64 = self.window.iter().map(|w| w * w).sum();
        let sum_w: f64 = self.window.iter().sum();
        let df = fs / l as f64;
        let norm = 1.0 / (fs * sum_w2 * self.n_segments as f64);
        let values = self
            .sums
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let one_sided = if k == 0 || (l.is_multiple_of(2) && k == l / 2) { 1.0 } else { 2.0 };
                T::lit(one_sided * p * norm)
            })
            .collect();
        Ok(Psd {
            frequencies: (0..self.sums.len()).map(|k| T::lit(k as f64 * df)).collect(),
            values,
            resolution_bandwidth: T::lit(df * l as f64 * sum_w2 / (sum_w * sum_w)),
            n_segments: self.n_segments,
            window: self.config.window,
            overlap_correlation: overlap_correlation(&self.window, self.config.hop()),
        })
    }
}

/// `1 + 2 Σⱼ ρ(j·hop)²` with ρ the normalized window overlap.
fn overlap_correlation(window: &[f64], hop: usize) -> f64 {
    let sum_w2: f64 = window.iter().map(|w| w * w).sum();
    let mut total = 1.0;
    let mut shift = hop;
    while shift < window.len() {
        let rho: f64 = window.iter().zip(&window[shift..]).map(|(a, b)| a * b).sum::<f64>() / sum_w2;
        total += 2.0 * rho * rho;
        shift += hop;
    }
    total
}

/// Welch estimate of a uniformly sampled series.
pub fn welch_series<T: Real>(samples: &[T], sample_interval: T, config: &WelchConfig) -> Result<Psd<T>, SpectraError> {
    let mut acc = WelchAccumulator::new(*config, sample_interval.as_f64())?;
    acc.add(samples)?;
    acc.finish()
}

/// Welch estimate of the displacement of `oscillator`.
pub fn welch_psd<T: Real>(
    trajectory: &Trajectory<T>,
    oscillator: usize,
    segment_length: usize,
    overlap_fraction: f64,
    window: Window,
) -> Result<Psd<T>, SpectraError> {
    let u = trajectory.u.get(oscillator).ok_or(SpectraError::NoSuchOscillator(oscillator))?;
    welch_series(u, trajectory.sample_interval(), &WelchConfig { segment_length, overlap_fraction, window })
}

/// Welch estimate averaged over every segment of every ensemble member.
/// Members are transformed in parallel and summed in member order.
pub fn ensemble_welch_psd<T: Real>(
    trajectories: &[Trajectory<T>],
    oscillator: usize,
    config: &WelchConfig,
) -> Result<Psd<T>, SpectraError> {
    let first = trajectories.first().ok_or(SpectraError::InconsistentEnsemble)?;
    if oscillator >= first.n_oscillators() {
        return Err(SpectraError::NoSuchOscillator(oscillator));
    }
    let dt = first.sample_interval();
    if trajectories
        .iter()
        .any(|t| t.sample_interval() != dt || t.fingerprint != first.fingerprint || t.n_oscillators() != first.n_oscillators())
    {
        return Err(SpectraError::InconsistentEnsemble);
    }
    let empty = WelchAccumulator::new(*config, dt.as_f64())?;
    let parts: Vec<WelchAccumulator> = trajectories
        .par_iter()
        .map(|t| {
            let mut acc = empty.clone();
            acc.add(&t.u[oscillator])?;
            Ok(acc)
        })
        .collect::<Result<_, SpectraError>>()?;
    let mut total = empty;
    for part in &parts {
        total.merge(part)?;
    }
    total.finish()
}
