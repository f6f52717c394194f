//! Levenberg–Marquardt fits of one or two Lorentzian lines over a flat
//! background.
//!
//! A line of total area `a`, centre `c` and full width `Γ` (Hz) contributes
//! `(a/π)(Γ/2) / ((f − c)² + (Γ/2)²)`. The fit runs in normalized
//! coordinates (frequency in band widths, values in units of the band
//! maximum) with the width parameterized by its logarithm, and weights each
//! bin by `σ = value / √(segments)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Psd, SpectraError};
use crate::scalar::Real;

pub const MAX_FIT_ITERATIONS: usize = 200;
pub const FIT_STEP_TOLERANCE: f64 = 1e-8;
const MIN_POINTS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeakFit<T> {
    /// Hz.
    pub center: T,
    /// π × FWHM in Hz; equals the amplitude damping rate γ of an isolated mode, 1/s.
    pub fwhm_gamma: T,
    /// Integrated line power, m².
    pub area: T,
    /// m²/Hz.
    pub background: T,
    /// Reduced χ².
    pub goodness: T,
    /// Standard error of `center`, Hz.
    pub center_std_error: T,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> PeakFit<T> {
    /// Full width at half maximum, Hz.
    pub fn fwhm_hz(&self) -> T {
        self.fwhm_gamma / T::pi()
    }

    /// Line value at `f` (background excluded).
    pub fn line(&self, f: T) -> T {
        let h = self.fwhm_hz() / T::lit(2.0);
        self.area / T::pi() * h / ((f - self.center) * (f - self.center) + h * h)
    }

    fn to_f64(&self) -> PeakFit<f64> {
        PeakFit {
            center: self.center.as_f64(),
            fwhm_gamma: self.fwhm_gamma.as_f64(),
            area: self.area.as_f64(),
            background: self.background.as_f64(),
            goodness: self.goodness.as_f64(),
            center_std_error: self.center_std_error.as_f64(),
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

/// Starting point for one line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakGuess {
    /// Hz.
    pub center: f64,
    /// Hz.
    pub fwhm: f64,
}

/// Data in a band, normalized.
struct BandData {
    x: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
    f0: f64,
    fscale: f64,
    yscale: f64,
    dof_weight: f64,
}

impl BandData {
    fn new<T: Real>(psd: &Psd<T>, band: (T, T)) -> Result<Self, SpectraError> {
        let range = psd.band_indices(band.0, band.1)?;
        if range.len() < MIN_POINTS {
            return Err(SpectraError::DegenerateBand { points: range.len(), required: MIN_POINTS });
        }
        let f: Vec<f64> = psd.frequencies[range.clone()].iter().map(|v| v.as_f64()).collect();
        let y: Vec<f64> = psd.values[range].iter().map(|v| v.as_f64()).collect();
        let f0 = f[0];
        let fscale = (f[f.len() - 1] - f0).max(f64::MIN_POSITIVE);
        let yscale = y.iter().cloned().fold(0.0, f64::max);
        let yscale = if yscale > 0.0 { yscale } else { 1.0 };
        let y: Vec<f64> = y.iter().map(|v| v / yscale).collect();
        let floor = 1e-12 * y.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let root_n = psd.effective_segments().max(1.0).sqrt();
        let sigma = y.iter().map(|v| v.abs().max(floor) / root_n).collect();
        Ok(Self {
            x: f.iter().map(|v| (v - f0) / fscale).collect(),
            y,
            sigma,
            f0,
            fscale,
            yscale,
            dof_weight: psd.enbw_bins(),
        })
    }

    fn to_x(&self, f: f64) -> f64 {
        (f - self.f0) / self.fscale
    }
}

/// Parameters `[c₁, ln w₁, a₁, …, c_K, ln w_K, a_K, b]` in normalized units.
fn evaluate(p: &[f64], x: f64, grad: Option<&mut [f64]>) -> f64 {
    let k = (p.len() - 1) / 3;
    let mut total = p[p.len() - 1];
    let mut g = grad;
    for j in 0..k {
        let (c, w, a) = (p[3 * j], p[3 * j + 1].exp(), p[3 * j + 2]);
        let h = 0.5 * w;
        let dx = x - c;
        let d = dx * dx + h * h;
        let shape = h / (std::f64::consts::PI * d);
        total += a * shape;
        if let Some(g) = g.as_deref_mut() {
            g[3 * j] = a * h * 2.0 * dx / (std::f64::consts::PI * d * d);
            g[3 * j + 1] = a / std::f64::consts::PI * (d - 2.0 * h * h) / (d * d) * h;
            g[3 * j + 2] = shape;
        }
    }
    if let Some(g) = g {
        g[p.len() - 1] = 1.0;
    }
    total
}

fn chi2(data: &BandData, p: &[f64]) -> f64 {
    data.x
        .iter()
        .zip(&data.y)
        .zip(&data.sigma)
        .map(|((&x, &y), &s)| ((y - evaluate(p, x, None)) / s).powi(2))
        .sum()
}

struct LmResult {
    p: Vec<f64>,
    chi2: f64,
    iterations: usize,
    converged: bool,
    covariance: Option<DMatrix<f64>>,
}

fn levenberg_marquardt(data: &BandData, start: Vec<f64>) -> LmResult {
    let np = start.len();
    let n = data.x.len();
    let mut p = start;
    let mut current = chi2(data, &p);
    let mut lambda = 1e-3;
    let mut grad = vec![0.0; np];
    let mut iterations = 0;
    let mut converged = false;
    let normal = |p: &[f64], grad: &mut [f64]| {
        let mut jtj = DMatrix::<f64>::zeros(np, np);
        let mut jtr = DVector::<f64>::zeros(np);
        for ((&x, &y), &s) in data.x.iter().zip(&data.y).zip(&data.sigma) {
            let model = evaluate(p, x, Some(grad));
            let r = (y - model) / s;
            for a in 0..np {
                let ja = grad[a] / s;
                jtr[a] += ja * r;
                for b in 0..=a {
                    jtj[(a, b)] += ja * grad[b] / s;
                }
            }
        }
        for a in 0..np {
            for b in 0..a {
                jtj[(b, a)] = jtj[(a, b)];
            }
        }
        (jtj, jtr)
    };
    while iterations < MAX_FIT_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal(&p, &mut grad);
        let mut accepted = false;
        let mut step_size = f64::INFINITY;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..np {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let scale = p.iter().map(|v| v * v).sum::<f64>().sqrt() + 1e-12;
            step_size = delta.norm() / scale;
            let c = chi2(data, &trial);
            if c.is_finite() && c <= current {
                p = trial;
                current = c;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                break;
            }
            if step_size < FIT_STEP_TOLERANCE {
                break;
            }
            lambda *= 10.0;
        }
        if step_size < FIT_STEP_TOLERANCE || (!accepted && lambda >= 1e16) {
            converged = step_size < FIT_STEP_TOLERANCE || current <= 1e-30 * n as f64;
            break;
        }
    }
    let (jtj, _) = normal(&p, &mut grad);
    LmResult { covariance: jtj.try_inverse(), p, chi2: current, iterations, converged }
}

fn unpack<T: Real>(data: &BandData, r: &LmResult) -> Vec<PeakFit<T>> {
    let k = (r.p.len() - 1) / 3;
    let dof = (data.x.len().saturating_sub(r.p.len())).max(1) as f64;
    let goodness = r.chi2 / dof;
    let background = r.p[r.p.len() - 1] * data.yscale;
    (0..k)
        .map(|j| {
            let var_c = r
                .covariance
                .as_ref()
                .map(|c| c[(3 * j, 3 * j)] * goodness.max(1.0) * data.dof_weight)
                .unwrap_or(f64::INFINITY);
            PeakFit {
                center: T::lit(data.f0 + data.fscale * r.p[3 * j]),
                fwhm_gamma: T::lit(std::f64::consts::PI * data.fscale * r.p[3 * j + 1].exp()),
                area: T::lit(r.p[3 * j + 2] * data.yscale * data.fscale),
                background: T::lit(background),
                goodness: T::lit(goodness),
                center_std_error: T::lit(var_c.max(0.0).sqrt() * data.fscale),
                iterations: r.iterations,
                converged: r.converged,
            }
        })
        .collect()
}

fn line_start(data: &BandData, guess: PeakGuess, background: f64) -> [f64; 3] {
    let c = data.to_x(guess.center);
    let w = (guess.fwhm / data.fscale).max(1e-9);
    let dx = if data.x.len() > 1 { data.x[1] - data.x[0] } else { 1.0 };
    let i = data.x.partition_point(|&x| x < c).min(data.y.len() - 1);
    let height = (data.y[i] - background).max(1e-12);
    // Peak height of a line is 2a/(πw); keep the guess at least a bin wide.
    let a = height * std::f64::consts::PI * w.max(dx) / 2.0;
    [c, w.ln(), a]
}

fn edge_background(y: &[f64]) -> f64 {
    let n = (y.len() / 20).max(1);
    let lo = y[..n].iter().sum::<f64>() / n as f64;
    let hi = y[y.len() - n..].iter().sum::<f64>() / n as f64;
    lo.min(hi).max(0.0)
}

/// Half-maximum estimate of the tallest line in `band`.
pub fn guess_peak<T: Real>(psd: &Psd<T>, band: (T, T)) -> Result<PeakGuess, SpectraError> {
    let data = BandData::new(psd, band)?;
    Ok(guess_in(&data, 0, data.y.len()))
}

fn guess_in(data: &BandData, start: usize, end: usize) -> PeakGuess {
    let y = &data.y[start..end];
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite spectrum"))
        .expect("non-empty band");
    let base = edge_background(&data.y);
    let half = base + 0.5 * (ymax - base);
    let mut lo = imax;
    while lo > 0 && y[lo] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < y.len() && y[hi] > half {
        hi += 1;
    }
    let dx = data.x[1] - data.x[0];
    let width = ((hi - lo) as f64 * dx).max(dx);
    PeakGuess { center: data.f0 + data.fscale * data.x[start + imax], fwhm: width * data.fscale }
}

fn finish<T: Real>(data: &BandData, r: LmResult) -> Result<Vec<PeakFit<T>>, SpectraError> {
    let fits = unpack::<T>(data, &r);
    if r.converged {
        Ok(fits)
    } else {
        Err(SpectraError::NoConvergence { iterations: r.iterations, best: Box::new(fits[0].to_f64()) })
    }
}

/// Single-line fit over `band`, starting from `guess` (or [`guess_peak`]).
pub fn fit_lorentzian<T: Real>(psd: &Psd<T>, guess: Option<PeakGuess>, band: (T, T)) -> Result<PeakFit<T>, SpectraError> {
    let data = BandData::new(psd, band)?;
    let guess = guess.unwrap_or_else(|| guess_in(&data, 0, data.y.len()));
    if !(guess.center >= band.0.as_f64() && guess.center <= band.1.as_f64()) {
        return Err(SpectraError::InvalidParameter(format!("initial centre {} Hz outside band", guess.center)));
    }
    let b = edge_background(&data.y);
    let mut start = line_start(&data, guess, b).to_vec();
    start.push(b);
    let r = levenberg_marquardt(&data, start);
    Ok(finish(&data, r)?.remove(0))
}

/// Two-line fit over `band`, initialized from the spectral centroid split at
/// the valley between the two halves' maxima. Lines are returned in order of
/// increasing centre.
pub fn fit_lorentzian_pair<T: Real>(psd: &Psd<T>, band: (T, T)) -> Result<(PeakFit<T>, PeakFit<T>), SpectraError> {
    let data = BandData::new(psd, band)?;
    let n = data.y.len();
    let base = edge_background(&data.y);
    let weight: f64 = data.y.iter().map(|y| (y - base).max(0.0)).sum();
    let centroid = if weight > 0.0 {
        data.x.iter().zip(&data.y).map(|(x, y)| x * (y - base).max(0.0)).sum::<f64>() / weight
    } else {
        0.5
    };
    let split = data.x.partition_point(|&x| x < centroid).clamp(1, n - 1);
    let argmax = |r: std::ops::Range<usize>| {
        r.max_by(|&a, &b| data.y[a].partial_cmp(&data.y[b]).expect("finite spectrum")).expect("non-empty")
    };
    let (left, right) = (argmax(0..split), argmax(split..n));
    let valley = if right > left + 1 {
        (left..=right)
            .min_by(|&a, &b| data.y[a].partial_cmp(&data.y[b]).expect("finite spectrum"))
            .expect("non-empty")
    } else {
        split
    }
    .clamp(1, n - 1);
    let g1 = guess_in(&data, 0, valley);
    let g2 = guess_in(&data, valley, n);
    let mut start = line_start(&data, g1, base).to_vec();
    start.extend(line_start(&data, g2, base));
    start.push(base);
    let r = levenberg_marquardt(&data, start);
    let mut fits = finish::<T>(&data, r)?;
    fits.sort_by(|a, b| a.center.partial_cmp(&b.center).expect("finite centres"));
    let second = fits.pop().expect("two lines");
    let first = fits.pop().expect("two lines");
    Ok((first, second))
}
