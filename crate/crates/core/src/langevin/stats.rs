//! Ensemble moments with autocorrelation-aware standard errors.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::{LangevinError, Trajectory};
use crate::model::SystemModel;
use crate::scalar::{Estimate, Real};

/// Sokal's automatic windowing constant.
const SOKAL_WINDOW: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats<T: Real> {
    pub fingerprint: String,
    pub n_members: usize,
    /// Samples pooled over all members.
    pub n_samples: usize,
    pub mean: DVector<T>,
    pub mean_se: DVector<T>,
    /// Unbiased covariance of the state vector.
    pub covariance: DMatrix<T>,
    pub covariance_se: DMatrix<T>,
}

impl<T: Real> EnsembleStats<T> {
    pub fn n_oscillators(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn moment(&self, a: usize, b: usize) -> Estimate<T> {
        Estimate::new(self.covariance[(a, b)], self.covariance_se[(a, b)])
    }

    /// var(u) of oscillator `i`, m².
    pub fn var_u(&self, i: usize) -> Estimate<T> {
        self.moment(2 * i, 2 * i)
    }

    /// var(u̇) of oscillator `i`, m²/s².
    pub fn var_v(&self, i: usize) -> Estimate<T> {
        self.moment(2 * i + 1, 2 * i + 1)
    }
}

fn common_fingerprint<T: Real>(trajectories: &[Trajectory<T>]) -> Result<&str, LangevinError> {
    let first = trajectories.first().ok_or(LangevinError::EmptyEnsemble)?;
    for t in &trajectories[1..] {
        if t.fingerprint != first.fingerprint {
            return Err(LangevinError::FingerprintMismatch {
                expected: first.fingerprint.clone(),
                found: t.fingerprint.clone(),
            });
        }
    }
    Ok(&first.fingerprint)
}

fn check_model<T: Real + Serialize>(
    trajectories: &[Trajectory<T>],
    model: &SystemModel<T>,
) -> Result<(), LangevinError> {
    let fp = common_fingerprint(trajectories)?;
    let expected = model.fingerprint();
    if fp != expected {
        return Err(LangevinError::FingerprintMismatch { expected, found: fp.to_string() });
    }
    Ok(())
}

/// Integrated autocorrelation time, in samples, of a stationary series
/// observed as several independent, already centered, segments.
///
/// The autocovariance is pooled over segments; the sum is truncated with
/// Sokal's self-consistent window `W ≥ 5 τ(W)`. Returns at least 0.5
/// (uncorrelated samples).
pub fn integrated_autocorrelation_time(segments: &[Vec<f64>]) -> f64 {
    let max_len = segments.iter().map(Vec::len).max().unwrap_or(0);
    if max_len < 2 {
        return 0.5;
    }
    let mut sums = vec![0.0; max_len];
    let mut counts = vec![0usize; max_len];
    let mut planner = FftPlanner::<f64>::new();
    for seg in segments.iter().filter(|s| !s.is_empty()) {
        let len = seg.len();
        let size = (2 * len).next_power_of_two();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut buf: Vec<Complex<f64>> = seg.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(size, Complex::new(0.0, 0.0));
        fwd.process(&mut buf);
        for z in buf.iter_mut() {
            *z = Complex::new(z.norm_sqr(), 0.0);
        }
        inv.process(&mut buf);
        for k in 0..len {
            sums[k] += buf[k].re / size as f64;
            counts[k] += len - k;
        }
    }
    let c0 = sums[0] / counts[0] as f64;
    if !(c0 > 0.0) {
        return 0.5;
    }
    let mut tau = 0.5;
    let max_lag = max_len / 2;
    for w in 1..max_lag {
        if counts[w] == 0 {
            break;
        }
        tau += sums[w] / counts[w] as f64 / c0;
        if w as f64 >= SOKAL_WINDOW * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Members needed before their spread enters the standard error.
pub const MIN_MEMBERS_FOR_SPREAD: usize = 8;

/// Standard error of the mean from the scatter of per-member means.
fn between_member_se(segments: &[Vec<f64>]) -> Option<f64> {
    let means: Vec<f64> = segments.iter().filter(|s| !s.is_empty()).map(|s| s.iter().sum::<f64>() / s.len() as f64).collect();
    let m = means.len();
    if m < MIN_MEMBERS_FOR_SPREAD {
        return None;
    }
    let grand = means.iter().sum::<f64>() / m as f64;
    let var = means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1) as f64;
    Some((var / m as f64).sqrt())
}

/// Mean of a pooled series and its standard error: `√(σ² · 2τ / N)`, or the
/// scatter of member means when that is larger.
fn series_estimate(segments: &[Vec<f64>]) -> (f64, f64) {
    let n: usize = segments.iter().map(Vec::len).sum();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = segments.iter().flat_map(|s| s.iter()).sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let centered: Vec<Vec<f64>> = segments.iter().map(|s| s.iter().map(|x| x - mean).collect()).collect();
    let var = centered.iter().flat_map(|s| s.iter()).map(|x| x * x).sum::<f64>() / (n - 1) as f64;
    let tau = integrated_autocorrelation_time(&centered);
    let se = (var * 2.0 * tau / n as f64).sqrt();
    (mean, between_member_se(segments).map_or(se, |b| b.max(se)))
}

fn component_f64<T: Real>(t: &Trajectory<T>, k: usize) -> impl Iterator<Item = f64> + '_ {
    t.component(k).iter().map(|x| x.as_f64())
}

/// Pooled ensemble moments. Reductions run in member order, so the result
/// is independent of thread scheduling.
pub fn ensemble_stats<T: Real>(trajectories: &[Trajectory<T>]) -> Result<EnsembleStats<T>, LangevinError> {
    let fingerprint = common_fingerprint(trajectories)?.to_string();
    let dim = 2 * trajectories[0].n_oscillators();
    let n: usize = trajectories.iter().map(Trajectory::len).sum();

    let means: Vec<(f64, f64)> = (0..dim)
        .into_par_iter()
        .map(|k| {
            let segs: Vec<Vec<f64>> = trajectories.iter().map(|t| component_f64(t, k).collect()).collect();
            series_estimate(&segs)
        })
        .collect();

    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|a| (a..dim).map(move |b| (a, b))).collect();
    let moments: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (ma, mb) = (means[a].0, means[b].0);
            let segs: Vec<Vec<f64>> = trajectories
                .iter()
                .map(|t| component_f64(t, a).zip(component_f64(t, b)).map(|(x, y)| (x - ma) * (y - mb)).collect())
                .collect();
            let (m, se) = series_estimate(&segs);
            let bessel = if n > 1 { n as f64 / (n - 1) as f64 } else { 1.0 };
            (m * bessel, se * bessel)
        })
        .collect();

    let mut covariance = DMatrix::zeros(dim, dim);
    let mut covariance_se = DMatrix::zeros(dim, dim);
    for (&(a, b), &(m, se)) in pairs.iter().zip(&moments) {
        covariance[(a, b)] = T::lit(m);
        covariance[(b, a)] = T::lit(m);
        covariance_se[(a, b)] = T::lit(se);
        covariance_se[(b, a)] = T::lit(se);
    }
    Ok(EnsembleStats {
        fingerprint,
        n_members: trajectories.len(),
        n_samples: n,
        mean: DVector::from_iterator(dim, means.iter().map(|m| T::lit(m.0))),
        mean_se: DVector::from_iterator(dim, means.iter().map(|m| T::lit(m.1))),
        covariance,
        covariance_se,
    })
}

/// Positional and kinetic mode temperature of one oscillator, K.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeTemperatureMc<T> {
    pub positional: Estimate<T>,
    pub kinetic: Estimate<T>,
}

/// `T′ = mΩ² var(u)/k_B` and `m var(u̇)/k_B` for every oscillator.
pub fn mode_temperature_mc<T: Real>(stats: &EnsembleStats<T>, model: &SystemModel<T>) -> Vec<ModeTemperatureMc<T>> {
    let kb = T::boltzmann();
    model
        .oscillators
        .iter()
        .enumerate()
        .map(|(i, o)| ModeTemperatureMc {
            positional: stats.var_u(i).scale(o.stiffness() / kb),
            kinetic: stats.var_v(i).scale(o.mass / kb),
        })
        .collect()
}

/// Work-based bath flux of oscillator `i`, W: the exact mean injected power
/// `S₀/(2m)` minus the time-averaged dissipation `2γm⟨u̇²⟩`.
pub fn direct_heat_flux_mc<T: Real + Serialize>(
    trajectories: &[Trajectory<T>],
    model: &SystemModel<T>,
    oscillator: usize,
) -> Result<Estimate<T>, LangevinError> {
    check_model(trajectories, model)?;
    let o = model.oscillators.get(oscillator).ok_or(LangevinError::NoSuchOscillator(oscillator))?;
    let segs: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|t| t.v[oscillator].iter().map(|x| x.as_f64().powi(2)).collect())
        .collect();
    let (v2, se) = series_estimate(&segs);
    let two = T::lit(2.0);
    let injected = model.thermal_noise_intensity(oscillator) / (two * o.mass);
    let dissipation = two * o.gamma * o.mass;
    Ok(Estimate::new(injected - dissipation * T::lit(v2), dissipation * T::lit(se)))
}

/// Flux–gap estimate `2γk_B(T − T′_kin)` from Monte Carlo moments, W.
pub fn gap_heat_flux_mc<T: Real>(stats: &EnsembleStats<T>, model: &SystemModel<T>, oscillator: usize) -> Estimate<T> {
    let o = &model.oscillators[oscillator];
    let two = T::lit(2.0);
    let var_v = stats.var_v(oscillator);
    let value = two * o.gamma * (T::boltzmann() * o.bath_temperature - o.mass * var_v.value);
    Estimate::new(value, two * o.gamma * o.mass * var_v.std_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langevin::{simulate, SimConfig};
    use crate::model::OscillatorSpec;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn white_noise_tau_is_half() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let seg: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let tau = integrated_autocorrelation_time(&[seg]);
        assert!((tau - 0.5).abs() < 0.05, "{tau}");
    }

    #[test]
    fn ar1_tau_matches_closed_form() {
        // AR(1) with coefficient φ: τ_int = (1 + φ) / (2 (1 − φ)).
        let phi: f64 = 0.9;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut x = 0.0;
        let segs: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                (0..20_000)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        x = phi * x + e;
                        x
                    })
                    .collect()
            })
            .collect();
        let tau = integrated_autocorrelation_time(&segs);
        let expected = (1.0 + phi) / (2.0 * (1.0 - phi));
        assert!((tau - expected).abs() / expected < 0.1, "{tau} vs {expected}");
    }

    #[test]
    fn constant_zero_trajectories() {
        let model = SystemModel::single(OscillatorSpec::new("a", 1.0, 1.0, 0.1, 0.0));
        let trajs = simulate(&model, &SimConfig::new(0.05, 200).ensemble(2)).unwrap();
        let stats = ensemble_stats(&trajs).unwrap();
        assert_eq!(stats.covariance, DMatrix::zeros(2, 2));
        assert_eq!(stats.mean, DVector::zeros(2));
    }

    #[test]
    fn mismatched_fingerprints_rejected() {
        let a = SystemModel::single(OscillatorSpec::new("a", 1.0, 1.0, 0.1, 10.0));
        let b = SystemModel::single(OscillatorSpec::new("a", 1.0, 1.0, 0.1, 20.0));
        let mut trajs = simulate(&a, &SimConfig::new(0.05, 50)).unwrap();
        trajs.extend(simulate(&b, &SimConfig::new(0.05, 50)).unwrap());
        assert!(matches!(ensemble_stats(&trajs), Err(LangevinError::FingerprintMismatch { .. })));
        assert!(matches!(ensemble_stats::<f64>(&[]), Err(LangevinError::EmptyEnsemble)));
        let only_b = simulate(&b, &SimConfig::new(0.05, 50)).unwrap();
        assert!(matches!(direct_heat_flux_mc(&only_b, &a, 0), Err(LangevinError::FingerprintMismatch { .. })));
    }

    #[test]
    fn standard_error_consistent_with_member_spread() {
        // τ-based SE of var(u) against the scatter of independent member estimates.
        let model = SystemModel::single(OscillatorSpec::new("a", 1.0, 1.0, 0.1, 300.0));
        let trajs = simulate(&model, &SimConfig::new(0.05, 20_000).ensemble(40)).unwrap();
        let pooled = ensemble_stats(&trajs).unwrap().var_u(0);
        let per_member: Vec<f64> =
            trajs.iter().map(|t| ensemble_stats(std::slice::from_ref(t)).unwrap().var_u(0).value).collect();
        let k = per_member.len() as f64;
        let mean = per_member.iter().sum::<f64>() / k;
        let spread = (per_member.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt();
        let ratio = pooled.std_error / spread;
        assert!(ratio > 0.7 && ratio < 1.4, "{ratio}");
    }
}
