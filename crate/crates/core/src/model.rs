//! Physical system definition and its compilation into a linear stochastic
//! system `dx = M x dt + dW`, `⟨dW dWᵀ⟩ = D dt`.
//!
//! The state vector is ordered `(u₁, u̇₁, u₂, u̇₂, …)`. Each oscillator obeys
//!
//! ```text
//! m ü + 2γm u̇ + mΩ² u = δF_th + A u + B u̇ + δF_ext − Σⱼ k_c,ij (u − uⱼ)
//! ```
//!
//! with white thermal force of intensity `noise_factor · γ m k_B T`
//! (`noise_factor = 4` is the value compatible with equipartition).

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linalg;
use crate::scalar::Real;

/// Default white-noise intensity factor, `S₀ = 4γmk_BT`.
pub const DEFAULT_NOISE_FACTOR: f64 = 4.0;

/// Relative position-gain magnitude above which the small-gain assumption
/// is flagged.
pub const POSITION_GAIN_WARNING_RATIO: f64 = 0.1;

/// Relative frequency mismatch below which a pair counts as degenerate for
/// [`SystemModel::coupling_g`].
pub const DEGENERACY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model has no oscillators")]
    Empty,
    #[error("oscillator `{label}`: invalid {field} = {value}")]
    InvalidParameter { label: String, field: &'static str, value: f64 },
    #[error("duplicate oscillator label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown oscillator label `{0}`")]
    UnknownLabel(String),
    #[error("coupling of `{0}` to itself")]
    SelfCoupling(String),
    #[error("no coupling between `{0}` and `{1}`")]
    UnknownPair(String, String),
    #[error("global stiffness matrix is not positive definite")]
    NonPositiveStiffness,
    #[error("feedback on `{label}` is destabilizing (effective stiffness {stiffness:e} N/m, effective damping {damping:e} kg/s)")]
    UnstableFeedback { label: String, stiffness: f64, damping: f64 },
}

/// Physical parameters of one mechanical mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSpec<T> {
    pub label: String,
    /// Effective mass, kg.
    pub mass: T,
    /// Natural angular frequency Ω, rad/s.
    pub omega: T,
    /// Amplitude damping half-rate γ, 1/s (the equation of motion carries 2γu̇).
    pub gamma: T,
    /// Bath temperature, K.
    pub bath_temperature: T,
}

impl<T: Real> OscillatorSpec<T> {
    pub fn new(label: impl Into<String>, mass: T, omega: T, gamma: T, bath_temperature: T) -> Self {
        Self { label: label.into(), mass, omega, gamma, bath_temperature }
    }

    pub fn with_bath_temperature(mut self, temperature: T) -> Self {
        self.bath_temperature = temperature;
        self
    }

    pub fn stiffness(&self) -> T {
        self.mass * self.omega * self.omega
    }

    /// Q = Ω / (2γ).
    pub fn quality_factor(&self) -> T {
        self.omega / (T::lit(2.0) * self.gamma)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |field: &'static str, value: T| ModelError::InvalidParameter {
            label: self.label.clone(),
            field,
            value: value.as_f64(),
        };
        if !(self.mass > T::zero()) || !self.mass.is_finite_value() {
            return Err(bad("mass", self.mass));
        }
        if !(self.omega > T::zero()) || !self.omega.is_finite_value() {
            return Err(bad("omega", self.omega));
        }
        if !(self.gamma >= T::zero()) || !self.gamma.is_finite_value() {
            return Err(bad("gamma", self.gamma));
        }
        if !(self.bath_temperature >= T::zero()) || !self.bath_temperature.is_finite_value() {
            return Err(bad("bath_temperature", self.bath_temperature));
        }
        Ok(())
    }
}

/// External force `F_ext = A u + B u̇ + δF_ext` acting on one oscillator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSpec<T> {
    /// A, N/m.
    #[serde(default)]
    pub position_gain: T,
    /// B, N·s/m. Negative values add damping (cold damping).
    #[serde(default)]
    pub velocity_gain: T,
    /// Intensity of the white force noise δF_ext, N²/Hz (double-sided).
    #[serde(default)]
    pub noise_psd: T,
}

impl<T: Real> FeedbackSpec<T> {
    /// Noiseless velocity feedback adding `extra_gamma` to the damping half-rate.
    pub fn cold_damping(mass: T, extra_gamma: T) -> Self {
        Self { position_gain: T::zero(), velocity_gain: -T::lit(2.0) * mass * extra_gamma, noise_psd: T::zero() }
    }

    pub fn position(gain: T) -> Self {
        Self { position_gain: gain, velocity_gain: T::zero(), noise_psd: T::zero() }
    }

    pub fn with_noise(mut self, noise_psd: T) -> Self {
        self.noise_psd = noise_psd;
        self
    }
}

/// Bilinear spring between two oscillators: the force on `i` is `−k_c (uᵢ − uⱼ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec<T> {
    pub pair: (String, String),
    /// k_c, N/m.
    pub spring_constant: T,
}

impl<T: Real> CouplingSpec<T> {
    pub fn new(a: impl Into<String>, b: impl Into<String>, spring_constant: T) -> Self {
        Self { pair: (a.into(), b.into()), spring_constant }
    }

    /// Spring constant giving coupling rate `g` between `a` and `b`,
    /// `k_c = 2 g √(mₐ m_b) √(Ωₐ Ω_b)`.
    pub fn from_rate(a: &OscillatorSpec<T>, b: &OscillatorSpec<T>, g: T) -> Self {
        let k = T::lit(2.0) * g * (a.mass * b.mass).sqrt() * (a.omega * b.omega).sqrt();
        Self::new(a.label.clone(), b.label.clone(), k)
    }

    fn connects(&self, a: &str, b: &str) -> bool {
        (self.pair.0 == a && self.pair.1 == b) || (self.pair.0 == b && self.pair.1 == a)
    }
}

fn default_noise_factor<T: Real>() -> T {
    T::lit(DEFAULT_NOISE_FACTOR)
}

/// N oscillators, their spring couplings and per-oscillator feedback.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SystemModel<T> {
    pub oscillators: Vec<OscillatorSpec<T>>,
    #[serde(default)]
    pub couplings: Vec<CouplingSpec<T>>,
    #[serde(default)]
    pub feedbacks: BTreeMap<String, FeedbackSpec<T>>,
    /// Thermal noise intensity in units of `γ m k_B T`.
    #[serde(default = "default_noise_factor")]
    pub noise_factor: T,
}

/// Non-fatal conditions found while compiling.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelWarning {
    /// |A| / (mΩ²) exceeds [`POSITION_GAIN_WARNING_RATIO`].
    LargePositionGain { label: String, ratio: f64 },
    /// γ = 0: representable, but no stationary state exists for this mode alone.
    Undamped { label: String },
}

impl fmt::Display for ModelWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LargePositionGain { label, ratio } => {
                write!(f, "oscillator `{label}`: |A|/(mΩ²) = {ratio:.3} is not small")
            }
            Self::Undamped { label } => write!(f, "oscillator `{label}` has zero intrinsic damping"),
        }
    }
}

/// Drift and diffusion matrices of the compiled first-order system.
#[derive(Clone, Debug, PartialEq)]
pub struct StateMatrices<T: Real> {
    pub drift: DMatrix<T>,
    pub diffusion: DMatrix<T>,
    pub warnings: Vec<ModelWarning>,
}

impl<T: Real> StateMatrices<T> {
    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn n_oscillators(&self) -> usize {
        self.dim() / 2
    }

    pub fn is_hurwitz(&self) -> bool {
        linalg::spectral_abscissa(&self.drift) < T::zero()
    }

    /// Largest modulus of the drift spectrum, rad/s.
    pub fn max_rate(&self) -> T {
        linalg::eigenvalues(&self.drift)
            .into_iter()
            .map(|z| z.norm_sqr().sqrt())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Index of the displacement component of oscillator `i` in the state vector.
#[inline]
pub const fn pos(i: usize) -> usize {
    2 * i
}

/// Index of the velocity component of oscillator `i` in the state vector.
#[inline]
pub const fn vel(i: usize) -> usize {
    2 * i + 1
}

/// Coupling constant derived from a spring, flagged when the pair is not degenerate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingRate<T> {
    /// g, rad/s.
    pub g: T,
    pub nondegenerate: bool,
}

impl<T: Real> SystemModel<T> {
    pub fn new(oscillators: Vec<OscillatorSpec<T>>) -> Self {
        Self { oscillators, couplings: Vec::new(), feedbacks: BTreeMap::new(), noise_factor: default_noise_factor() }
    }

    pub fn single(osc: OscillatorSpec<T>) -> Self {
        Self::new(vec![osc])
    }

    pub fn with_coupling(mut self, coupling: CouplingSpec<T>) -> Self {
        self.couplings.push(coupling);
        self
    }

    /// Adds a coupling of rate `g` between oscillators `a` and `b` (by index).
    pub fn with_coupling_rate(self, a: usize, b: usize, g: T) -> Self {
        let c = CouplingSpec::from_rate(&self.oscillators[a], &self.oscillators[b], g);
        self.with_coupling(c)
    }

    pub fn with_feedback(mut self, label: impl Into<String>, feedback: FeedbackSpec<T>) -> Self {
        self.feedbacks.insert(label.into(), feedback);
        self
    }

    pub fn with_noise_factor(mut self, factor: T) -> Self {
        self.noise_factor = factor;
        self
    }

    pub fn len(&self) -> usize {
        self.oscillators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.oscillators.is_empty()
    }

    pub fn boltzmann(&self) -> T {
        T::boltzmann()
    }

    pub fn index_of(&self, label: &str) -> Result<usize, ModelError> {
        self.oscillators
            .iter()
            .position(|o| o.label == label)
            .ok_or_else(|| ModelError::UnknownLabel(label.to_string()))
    }

    /// Feedback attached to oscillator `i` (zero if none).
    pub fn feedback(&self, i: usize) -> FeedbackSpec<T> {
        self.feedbacks.get(&self.oscillators[i].label).cloned().unwrap_or(FeedbackSpec {
            position_gain: T::zero(),
            velocity_gain: T::zero(),
            noise_psd: T::zero(),
        })
    }

    /// Thermal force intensity `noise_factor · γ m k_B T`, N²/Hz.
    pub fn thermal_noise_intensity(&self, i: usize) -> T {
        let o = &self.oscillators[i];
        self.noise_factor * o.gamma * o.mass * T::boltzmann() * o.bath_temperature
    }

    /// Sum of spring constants on pair (a, b).
    pub fn spring_between(&self, a: usize, b: usize) -> T {
        let (la, lb) = (&self.oscillators[a].label, &self.oscillators[b].label);
        self.couplings
            .iter()
            .filter(|c| c.connects(la, lb))
            .fold(T::zero(), |acc, c| acc + c.spring_constant)
    }

    /// Symmetric global stiffness matrix, N/m, including position feedback.
    pub fn stiffness_matrix(&self) -> Result<DMatrix<T>, ModelError> {
        let n = self.len();
        let mut k = DMatrix::zeros(n, n);
        for (i, o) in self.oscillators.iter().enumerate() {
            k[(i, i)] = o.stiffness() - self.feedback(i).position_gain;
        }
        for c in &self.couplings {
            let a = self.index_of(&c.pair.0)?;
            let b = self.index_of(&c.pair.1)?;
            if a == b {
                return Err(ModelError::SelfCoupling(c.pair.0.clone()));
            }
            k[(a, a)] += c.spring_constant;
            k[(b, b)] += c.spring_constant;
            k[(a, b)] -= c.spring_constant;
            k[(b, a)] -= c.spring_constant;
        }
        Ok(k)
    }

    /// Checks every type invariant and stability condition.
    pub fn validate(&self) -> Result<Vec<ModelWarning>, ModelError> {
        if self.oscillators.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut warnings = Vec::new();
        for (i, o) in self.oscillators.iter().enumerate() {
            o.validate()?;
            if self.oscillators[..i].iter().any(|p| p.label == o.label) {
                return Err(ModelError::DuplicateLabel(o.label.clone()));
            }
        }
        if !(self.noise_factor >= T::zero()) {
            return Err(ModelError::InvalidParameter {
                label: "<model>".into(),
                field: "noise_factor",
                value: self.noise_factor.as_f64(),
            });
        }
        for label in self.feedbacks.keys() {
            self.index_of(label)?;
        }
        for (i, o) in self.oscillators.iter().enumerate() {
            let fb = self.feedback(i);
            if !(fb.noise_psd >= T::zero()) {
                return Err(ModelError::InvalidParameter {
                    label: o.label.clone(),
                    field: "noise_psd",
                    value: fb.noise_psd.as_f64(),
                });
            }
            if self.feedbacks.contains_key(&o.label) {
                let stiffness = o.stiffness() - fb.position_gain;
                let damping = T::lit(2.0) * o.gamma * o.mass - fb.velocity_gain;
                if !(stiffness > T::zero()) || !(damping > T::zero()) {
                    return Err(ModelError::UnstableFeedback {
                        label: o.label.clone(),
                        stiffness: stiffness.as_f64(),
                        damping: damping.as_f64(),
                    });
                }
                let ratio = (fb.position_gain / o.stiffness()).abs();
                if ratio > T::lit(POSITION_GAIN_WARNING_RATIO) {
                    warnings.push(ModelWarning::LargePositionGain { label: o.label.clone(), ratio: ratio.as_f64() });
                }
            }
            if o.gamma == T::zero() {
                warnings.push(ModelWarning::Undamped { label: o.label.clone() });
            }
        }
        let k = self.stiffness_matrix()?;
        // Scale to unit diagonal so the test is insensitive to SI magnitudes.
        let n = self.len();
        let mut scaled = k.clone();
        for i in 0..n {
            for j in 0..n {
                let d = (k[(i, i)].abs() * k[(j, j)].abs()).sqrt();
                scaled[(i, j)] = if d > T::zero() { k[(i, j)] / d } else { k[(i, j)] };
            }
        }
        if (0..n).any(|i| !(k[(i, i)] > T::zero())) || Cholesky::new(scaled).is_none() {
            return Err(ModelError::NonPositiveStiffness);
        }
        Ok(warnings)
    }

    /// Compiles the model into drift `M` and diffusion `D`.
    pub fn compile(&self) -> Result<StateMatrices<T>, ModelError> {
        let warnings = self.validate()?;
        let n = self.len();
        let k = self.stiffness_matrix()?;
        let mut drift = DMatrix::zeros(2 * n, 2 * n);
        let mut diffusion = DMatrix::zeros(2 * n, 2 * n);
        for (i, o) in self.oscillators.iter().enumerate() {
            let fb = self.feedback(i);
            drift[(pos(i), vel(i))] = T::one();
            for j in 0..n {
                drift[(vel(i), pos(j))] = -k[(i, j)] / o.mass;
            }
            drift[(vel(i), vel(i))] = -(T::lit(2.0) * o.gamma - fb.velocity_gain / o.mass);
            diffusion[(vel(i), vel(i))] = (self.thermal_noise_intensity(i) + fb.noise_psd) / (o.mass * o.mass);
        }
        Ok(StateMatrices { drift, diffusion, warnings })
    }

    /// Coupling constant `g = k_c / (2 √(mᵢ mⱼ) √(Ωᵢ Ωⱼ))` of a coupled pair.
    pub fn coupling_g(&self, a: &str, b: &str) -> Result<CouplingRate<T>, ModelError> {
        let ia = self.index_of(a)?;
        let ib = self.index_of(b)?;
        if !self.couplings.iter().any(|c| c.connects(a, b)) {
            return Err(ModelError::UnknownPair(a.to_string(), b.to_string()));
        }
        let (oa, ob) = (&self.oscillators[ia], &self.oscillators[ib]);
        let k = self.spring_between(ia, ib);
        let mean_omega = (oa.omega * ob.omega).sqrt();
        let g = k / (T::lit(2.0) * (oa.mass * ob.mass).sqrt() * mean_omega);
        let mismatch = (oa.omega - ob.omega).abs() / mean_omega;
        Ok(CouplingRate { g, nondegenerate: mismatch > T::lit(DEGENERACY_TOLERANCE) })
    }

    /// Hex SHA-256 digest of the canonical JSON form (first 16 hex digits).
    pub fn fingerprint(&self) -> String
    where
        T: Serialize,
    {
        let json = serde_json::to_string(self).expect("model serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
