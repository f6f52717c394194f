//! Seeded stochastic integration of the compiled Langevin system.
//!
//! The default integrator is exact in distribution for this linear system:
//! each step applies the transition matrix `Φ = exp(M dt)` and adds a
//! Gaussian increment with covariance `Q = ∫₀^dt e^{Ms} D e^{Mᵀs} ds`, both
//! computed once via Van Loan's block exponential. Euler–Maruyama is kept
//! as a cross-check.
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng`), seeded
//! with `seed` and using the ensemble index as stream number, so every
//! member is an independent, platform-reproducible substream. Normal
//! deviates use `rand_distr::StandardNormal` (ziggurat).

mod export;
mod stats;

pub use export::{read_binary, write_binary, write_csv};
pub use stats::{
    direct_heat_flux_mc, ensemble_stats, gap_heat_flux_mc, integrated_autocorrelation_time, mode_temperature_mc,
    EnsembleStats, ModeTemperatureMc,
};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::model::{ModelError, StateMatrices, SystemModel};
use crate::scalar::Real;

/// Seed used when a configuration does not name one.
pub const DEFAULT_SEED: u64 = 20191219;

/// Largest accepted `dt · Ω_max` unless coarse steps are explicitly allowed.
pub const MAX_STEP_PHASE: f64 = 0.05;

/// Default burn-in, in units of the slowest decay time.
pub const DEFAULT_BURN_IN_DECAY_TIMES: f64 = 10.0;

/// Minimum burn-in before a warning, in slowest decay times.
pub const MIN_BURN_IN_DECAY_TIMES: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LangevinError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("time step too large: dt·Ω_max = {phase:.4} > {MAX_STEP_PHASE}")]
    StepTooLarge { phase: f64 },
    #[error("non-finite state at step {step} of ensemble member {member}")]
    NonFiniteState { step: usize, member: usize },
    #[error("trajectories come from different models ({expected} vs {found})")]
    FingerprintMismatch { expected: String, found: String },
    #[error("no trajectories supplied")]
    EmptyEnsemble,
    #[error("oscillator index {0} out of range")]
    NoSuchOscillator(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Exact transition matrix and Gaussian increment.
    #[default]
    Exact,
    EulerMaruyama,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig<T> {
    /// Integration step, s.
    pub dt: T,
    /// Steps integrated after burn-in.
    pub n_steps: usize,
    /// Discarded steps; defaults to ten slowest decay times.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "one")]
    pub ensemble_size: usize,
    /// Keep every k-th step.
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default)]
    pub integrator: Integrator,
    /// Accept `dt · Ω_max > 0.05` (with a warning).
    #[serde(default)]
    pub allow_coarse_step: bool,
}

impl<T: Real> SimConfig<T> {
    pub fn new(dt: T, n_steps: usize) -> Self {
        Self {
            dt,
            n_steps,
            burn_in: None,
            seed: DEFAULT_SEED,
            ensemble_size: 1,
            record_stride: 1,
            integrator: Integrator::Exact,
            allow_coarse_step: false,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn ensemble(mut self, size: usize) -> Self {
        self.ensemble_size = size;
        self
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn burn_in(mut self, steps: usize) -> Self {
        self.burn_in = Some(steps);
        self
    }

    pub fn integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn coarse(mut self) -> Self {
        self.allow_coarse_step = true;
        self
    }

    fn validate(&self) -> Result<(), LangevinError> {
        if !(self.dt > T::zero()) || !self.dt.is_finite_value() {
            return Err(LangevinError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.record_stride == 0 {
            return Err(LangevinError::InvalidConfig("record_stride must be ≥ 1".into()));
        }
        if self.ensemble_size == 0 {
            return Err(LangevinError::InvalidConfig("ensemble_size must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimWarning {
    /// `dt · Ω_max` above the resolution limit, accepted by override.
    CoarseStep { phase: f64 },
    /// Burn-in shorter than five slowest decay times.
    ShortBurnIn { decay_times: f64 },
    /// No stationary state: the drift is not Hurwitz.
    NonStationary,
}

impl std::fmt::Display for SimWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::CoarseStep { phase } => write!(f, "coarse step accepted: dt·Ω_max = {phase:.3}"),
            Self::ShortBurnIn { decay_times } => write!(f, "burn-in covers only {decay_times:.2} decay times"),
            Self::NonStationary => write!(f, "drift is not Hurwitz; trajectories do not reach a stationary state"),
        }
    }
}

/// Sampled path of one ensemble member.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    /// Sample times, s (burn-in included in the clock).
    pub times: Vec<T>,
    /// Displacements `u[oscillator][sample]`, m.
    pub u: Vec<Vec<T>>,
    /// Velocities `v[oscillator][sample]`, m/s.
    pub v: Vec<Vec<T>>,
    pub fingerprint: String,
    pub seed: u64,
    pub member: usize,
    /// Integration step, s.
    pub dt: T,
    pub record_stride: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_oscillators(&self) -> usize {
        self.u.len()
    }

    /// Spacing of recorded samples, s.
    pub fn sample_interval(&self) -> T {
        self.dt * T::count(self.record_stride)
    }

    /// State component `k` in `(u₁, u̇₁, u₂, …)` order.
    pub fn component(&self, k: usize) -> &[T] {
        if k.is_multiple_of(2) {
            &self.u[k / 2]
        } else {
            &self.v[k / 2]
        }
    }
}

/// Precomputed one-step propagator for a model and configuration.
#[derive(Clone, Debug)]
pub struct Simulator<T: Real> {
    config: SimConfig<T>,
    n: usize,
    transition: DMatrix<T>,
    step_covariance: DMatrix<T>,
    // Row-major copies for the inner loop.
    phi: Vec<T>,
    factor: Vec<T>,
    burn_in: usize,
    fingerprint: String,
    warnings: Vec<SimWarning>,
}

/// Van Loan: exp([[−M, D], [0, Mᵀ]] dt) = [[·, G], [0, F]], Φ = Fᵀ, Q = Φ G.
fn exact_propagator<T: Real>(m: &StateMatrices<T>, dt: T) -> (DMatrix<T>, DMatrix<T>) {
    let n = m.dim();
    let (s, mb) = linalg::balance(&m.drift);
    let db = DMatrix::from_fn(n, n, |i, j| m.diffusion[(i, j)] / (s[i] * s[j]));
    // Q is linear in D; normalizing keeps the block exponential accurate
    // when ‖D‖ ≪ ‖M‖.
    let d_norm = db.abs().max();
    let d_scale = if d_norm > T::zero() { d_norm } else { T::one() };
    let db = db / d_scale;
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&(-&mb * dt));
    h.view_mut((0, n), (n, n)).copy_from(&(&db * dt));
    h.view_mut((n, n), (n, n)).copy_from(&(mb.transpose() * dt));
    let e = h.exp();
    let phi_b = e.view((n, n), (n, n)).transpose();
    let q_b = &phi_b * e.view((0, n), (n, n));
    let phi = DMatrix::from_fn(n, n, |i, j| phi_b[(i, j)] * s[i] / s[j]);
    let q = DMatrix::from_fn(n, n, |i, j| q_b[(i, j)] * s[i] * s[j] * d_scale);
    (phi, linalg::symmetrize(&q))
}

impl<T: Real> Simulator<T> {
    pub fn new(model: &SystemModel<T>, config: &SimConfig<T>) -> Result<Self, LangevinError>
    where
        T: Serialize,
    {
        config.validate()?;
        let matrices = model.compile()?;
        let n = matrices.dim();
        let dt = config.dt;
        let mut warnings = Vec::new();

        let phase = (dt * matrices.max_rate()).as_f64();
        if phase > MAX_STEP_PHASE * (1.0 + 4.0 * T::epsilon().as_f64()) {
            if !config.allow_coarse_step {
                return Err(LangevinError::StepTooLarge { phase });
            }
            warnings.push(SimWarning::CoarseStep { phase });
        }

        let abscissa = linalg::spectral_abscissa(&matrices.drift);
        let burn_in = if abscissa < T::zero() {
            let decay = T::one() / (-abscissa);
            let default = (T::lit(DEFAULT_BURN_IN_DECAY_TIMES) * decay / dt).as_f64().ceil() as usize;
            let chosen = config.burn_in.unwrap_or(default);
            let decay_times = (T::count(chosen) * dt / decay).as_f64();
            if decay_times < MIN_BURN_IN_DECAY_TIMES {
                warnings.push(SimWarning::ShortBurnIn { decay_times });
            }
            chosen
        } else {
            warnings.push(SimWarning::NonStationary);
            config.burn_in.unwrap_or(0)
        };

        let (transition, step_covariance) = match config.integrator {
            Integrator::Exact => exact_propagator(&matrices, dt),
            Integrator::EulerMaruyama => {
                (DMatrix::identity(n, n) + &matrices.drift * dt, &matrices.diffusion * dt)
            }
        };
        let factor = linalg::psd_factor(&step_covariance);
        let row_major = |a: &DMatrix<T>| (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|ij| a[ij]).collect();
        Ok(Self {
            config: config.clone(),
            n,
            phi: row_major(&transition),
            factor: row_major(&factor),
            transition,
            step_covariance,
            burn_in,
            fingerprint: model.fingerprint(),
            warnings,
        })
    }

    pub fn config(&self) -> &SimConfig<T> {
        &self.config
    }

    pub fn transition_matrix(&self) -> &DMatrix<T> {
        &self.transition
    }

    /// Covariance of the per-step noise increment.
    pub fn step_covariance(&self) -> &DMatrix<T> {
        &self.step_covariance
    }

    pub fn burn_in_steps(&self) -> usize {
        self.burn_in
    }

    pub fn warnings(&self) -> &[SimWarning] {
        &self.warnings
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Integrates ensemble member `member` from the zero state.
    pub fn run(&self, member: usize) -> Result<Trajectory<T>, LangevinError> {
        let n = self.n;
        let osc = n / 2;
        let stride = self.config.record_stride;
        let n_records = self.config.n_steps / stride;
        let mut rng = ChaCha20Rng::seed_from_u64(self.config.seed);
        rng.set_stream(member as u64);

        let mut x = vec![T::zero(); n];
        let mut next = vec![T::zero(); n];
        let mut xi = vec![T::zero(); n];
        let mut times = Vec::with_capacity(n_records);
        let mut u = vec![Vec::with_capacity(n_records); osc];
        let mut v = vec![Vec::with_capacity(n_records); osc];

        let total = self.burn_in + n_records * stride;
        for step in 1..=total {
            for z in xi.iter_mut() {
                let s: f64 = StandardNormal.sample(&mut rng);
                *z = T::lit(s);
            }
            for (i, out) in next.iter_mut().enumerate() {
                let row = &self.phi[i * n..(i + 1) * n];
                let lrow = &self.factor[i * n..(i + 1) * n];
                let mut acc = T::zero();
                for j in 0..n {
                    acc += row[j] * x[j] + lrow[j] * xi[j];
                }
                *out = acc;
            }
            std::mem::swap(&mut x, &mut next);
            if step > self.burn_in && (step - self.burn_in).is_multiple_of(stride) {
                if x.iter().any(|z| !z.is_finite_value()) {
                    return Err(LangevinError::NonFiniteState { step, member });
                }
                times.push(T::count(step) * self.config.dt);
                for k in 0..osc {
                    u[k].push(x[2 * k]);
                    v[k].push(x[2 * k + 1]);
                }
            } else if step == self.burn_in && x.iter().any(|z| !z.is_finite_value()) {
                return Err(LangevinError::NonFiniteState { step, member });
            }
        }
        Ok(Trajectory {
            times,
            u,
            v,
            fingerprint: self.fingerprint.clone(),
            seed: self.config.seed,
            member,
            dt: self.config.dt,
            record_stride: stride,
        })
    }

    /// All ensemble members, in member order; members run in parallel.
    pub fn run_all(&self) -> Result<Vec<Trajectory<T>>, LangevinError> {
        (0..self.config.ensemble_size).into_par_iter().map(|k| self.run(k)).collect()
    }
}

/// Simulates every ensemble member of `config`.
pub fn simulate<T: Real + Serialize>(
    model: &SystemModel<T>,
    config: &SimConfig<T>,
) -> Result<Vec<Trajectory<T>>, LangevinError> {
    Simulator::new(model, config)?.run_all()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeedbackSpec, OscillatorSpec};
    use crate::steady::SteadyState;

    fn low_q(t: f64) -> SystemModel<f64> {
        SystemModel::single(OscillatorSpec::new("a", 1.0, 1.0, 0.1, t))
    }

    #[test]
    fn zero_noise_zero_trajectory() {
        let traj = simulate(&low_q(0.0), &SimConfig::new(0.05, 500)).unwrap();
        assert!(traj[0].u[0].iter().chain(traj[0].v[0].iter()).all(|&x| x == 0.0));
        assert_eq!(traj[0].len(), 500);
    }

    #[test]
    fn same_seed_bit_identical() {
        let cfg = SimConfig::new(0.05, 2000).ensemble(3).seed(7);
        let a = simulate(&low_q(300.0), &cfg).unwrap();
        let b = simulate(&low_q(300.0), &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].u, a[1].u);
        let c = simulate(&low_q(300.0), &cfg.clone().seed(8)).unwrap();
        assert_ne!(a[0].u, c[0].u);
    }

    #[test]
    fn step_limit_enforced() {
        let err = Simulator::new(&low_q(1.0), &SimConfig::new(0.5, 10)).unwrap_err();
        assert!(matches!(err, LangevinError::StepTooLarge { .. }));
        let sim = Simulator::new(&low_q(1.0), &SimConfig::new(0.5, 10).coarse()).unwrap();
        assert!(matches!(sim.warnings()[0], SimWarning::CoarseStep { .. }));
    }

    #[test]
    fn default_burn_in_is_ten_decay_times() {
        let sim = Simulator::new(&low_q(1.0), &SimConfig::new(0.05, 10)).unwrap();
        assert_eq!(sim.burn_in_steps(), 2000);
        let short = Simulator::new(&low_q(1.0), &SimConfig::new(0.05, 10).burn_in(10)).unwrap();
        assert!(matches!(short.warnings()[0], SimWarning::ShortBurnIn { .. }));
    }

    #[test]
    fn exact_chain_preserves_stationary_covariance() {
        // Discrete stationarity C = Φ C Φᵀ + Q holds for the continuous C at any dt.
        let model = low_q(300.0).with_feedback("a", FeedbackSpec::cold_damping(1.0, 0.3).with_noise(1e-21));
        let c = SteadyState::solve(&model).unwrap().covariance;
        for dt in [0.01, 0.05, 0.4] {
            let sim = Simulator::new(&model, &SimConfig::new(dt, 1).coarse()).unwrap();
            let phi = sim.transition_matrix();
            let next = phi * &c * phi.transpose() + sim.step_covariance();
            let err = (next - &c).abs().max() / c.abs().max();
            assert!(err < 1e-12, "dt = {dt}: {err}");
        }
    }

    #[test]
    fn weak_order_halving_dt() {
        // Stationary variance of the discrete chain, solved exactly:
        // exact scheme is dt-independent, Euler–Maruyama converges at O(dt).
        let model = low_q(300.0);
        let c = SteadyState::solve(&model).unwrap().covariance;
        let chain_var = |dt: f64, integ: Integrator| {
            let sim = Simulator::new(&model, &SimConfig::new(dt, 1).integrator(integ)).unwrap();
            // Smith doubling for C = Σₖ Φᵏ Q Φᵏᵀ.
            let mut a = sim.transition_matrix().clone();
            let mut cd = sim.step_covariance().clone();
            for _ in 0..40 {
                cd = &cd + &a * &cd * a.transpose();
                a = &a * &a;
            }
            cd[(0, 0)]
        };
        let exact = [chain_var(0.05, Integrator::Exact), chain_var(0.025, Integrator::Exact)];
        for v in exact {
            assert!((v - c[(0, 0)]).abs() / c[(0, 0)] < 1e-9);
        }
        let em_coarse = chain_var(0.05, Integrator::EulerMaruyama);
        let em_fine = chain_var(0.025, Integrator::EulerMaruyama);
        let bias_coarse = (em_coarse - c[(0, 0)]).abs();
        let bias_fine = (em_fine - c[(0, 0)]).abs();
        assert!(bias_fine < 0.6 * bias_coarse, "{bias_coarse} {bias_fine}");
    }

    #[test]
    fn f32_runs() {
        let model = SystemModel::single(OscillatorSpec::new("a", 1.0f32, 1.0, 0.1, 300.0));
        let traj = simulate(&model, &SimConfig::new(0.05f32, 100)).unwrap();
        assert_eq!(traj[0].len(), 100);
    }
}
