//! Experiment configuration, read from JSON.

use std::path::PathBuf;

use modeheat::langevin::{Integrator, DEFAULT_SEED, MAX_STEP_PHASE};
use modeheat::linalg::spectral_abscissa;
use modeheat::spectra::Window;
use modeheat::{SimConfig, SystemModel};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Equipartition,
    ColdDamping,
    CoupledTransfer,
    StrongCouplingSweep,
    Spectrum,
    PaperNumbers,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Equipartition,
        ExperimentKind::ColdDamping,
        ExperimentKind::CoupledTransfer,
        ExperimentKind::StrongCouplingSweep,
        ExperimentKind::Spectrum,
        ExperimentKind::PaperNumbers,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Equipartition => "equipartition",
            ExperimentKind::ColdDamping => "cold_damping",
            ExperimentKind::CoupledTransfer => "coupled_transfer",
            ExperimentKind::StrongCouplingSweep => "strong_coupling_sweep",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::PaperNumbers => "paper_numbers",
        }
    }

    pub fn needs_model(self) -> bool {
        self != ExperimentKind::PaperNumbers
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SystemModel>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_ensemble() -> usize {
    16
}

fn default_duration() -> f64 {
    100.0
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn one() -> usize {
    1
}

/// Monte Carlo settings. Unset `dt` means the largest step within the
/// resolution limit; unset `n_steps` means `duration_decay_times` slowest
/// decay times of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub n_steps: Option<usize>,
    #[serde(default = "default_duration")]
    pub duration_decay_times: f64,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub allow_coarse_step: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: None,
            n_steps: None,
            duration_decay_times: default_duration(),
            burn_in: None,
            seed: DEFAULT_SEED,
            ensemble_size: default_ensemble(),
            record_stride: 1,
            integrator: Integrator::Exact,
            allow_coarse_step: false,
        }
    }
}

impl SimSection {
    /// Concrete simulation settings for `model`.
    pub fn resolve(&self, model: &SystemModel) -> Result<SimConfig, CliError> {
        let matrices = model.compile()?;
        let dt = match self.dt {
            Some(dt) if dt > 0.0 && dt.is_finite() => dt,
            Some(dt) => return Err(CliError::Config(format!("sim.dt must be positive, got {dt}"))),
            None => MAX_STEP_PHASE / matrices.max_rate(),
        };
        let n_steps = match self.n_steps {
            Some(n) => n,
            None => {
                if !(self.duration_decay_times > 0.0) {
                    return Err(CliError::Config("sim.duration_decay_times must be positive".into()));
                }
                let rate = -spectral_abscissa(&matrices.drift);
                if !(rate > 0.0) {
                    return Err(CliError::Numerical("model has no decaying stationary state".into()));
                }
                (self.duration_decay_times / (rate * dt)).ceil() as usize
            }
        };
        if n_steps == 0 {
            return Err(CliError::Config("sim.n_steps must be positive".into()));
        }
        Ok(SimConfig {
            dt,
            n_steps,
            burn_in: self.burn_in,
            seed: self.seed,
            ensemble_size: self.ensemble_size,
            record_stride: self.record_stride,
            integrator: self.integrator,
            allow_coarse_step: self.allow_coarse_step,
        })
    }
}

fn default_z() -> f64 {
    4.0
}

fn default_lyapunov_tolerance() -> f64 {
    1e-8
}

fn default_mc_tolerance() -> f64 {
    0.03
}

fn default_band_linewidths() -> f64 {
    modeheat::spectra::DEFAULT_BAND_LINEWIDTHS
}

fn default_overlap() -> f64 {
    0.5
}

fn default_spectral_tolerance() -> f64 {
    0.05
}

fn default_parseval_tolerance() -> f64 {
    0.01
}

fn default_fit_tolerance() -> f64 {
    0.1
}

/// Estimator and tolerance settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Oscillators analysed; all when empty.
    #[serde(default)]
    pub oscillators: Vec<String>,
    /// Pair for coupling extraction and sweeps; the first two oscillators when unset.
    #[serde(default)]
    pub pair: Option<(String, String)>,
    /// Agreement threshold in joint standard errors.
    #[serde(default = "default_z")]
    pub z_tolerance: f64,
    #[serde(default = "default_lyapunov_tolerance")]
    pub lyapunov_tolerance: f64,
    /// Largest accepted `|T′ − T| / T` of Monte Carlo equipartition.
    #[serde(default = "default_mc_tolerance")]
    pub mc_relative_tolerance: f64,
    /// Largest accepted relative standard error, if set.
    #[serde(default)]
    pub max_relative_se: Option<f64>,
    /// Half-width of the thermometry band in linewidths.
    #[serde(default = "default_band_linewidths")]
    pub band_linewidths: f64,
    #[serde(default)]
    pub window: Window,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    /// Welch segment length in samples; `max(N/16, 32/γ)` when unset.
    #[serde(default)]
    pub segment_length: Option<usize>,
    /// Relative tolerance of spectral coupling and linewidth checks.
    #[serde(default = "default_spectral_tolerance")]
    pub spectral_relative_tolerance: f64,
    #[serde(default = "default_parseval_tolerance")]
    pub parseval_tolerance: f64,
    /// Relative tolerance of fitted linewidth and line area.
    #[serde(default = "default_fit_tolerance")]
    pub fit_relative_tolerance: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

fn default_g_values() -> Vec<f64> {
    vec![0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0]
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Coupling rates in units of the first oscillator's γ.
    #[serde(default = "default_g_values")]
    pub g_over_gamma: Vec<f64>,
    /// Repeat every point with both baths at their mean temperature.
    #[serde(default = "yes")]
    pub equal_bath_control: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { g_over_gamma: default_g_values(), equal_bath_control: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn default_directory() -> PathBuf {
    PathBuf::from("modeheat-out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn model(&self) -> Result<&SystemModel, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("experiment `{}` needs a model", self.experiment.name())))
    }

    /// Resolves analysed oscillator labels to indices.
    pub fn oscillator_indices(&self) -> Result<Vec<usize>, CliError> {
        let model = self.model()?;
        if self.analysis.oscillators.is_empty() {
            return Ok((0..model.len()).collect());
        }
        self.analysis.oscillators.iter().map(|l| Ok(model.index_of(l)?)).collect()
    }

    pub fn pair_indices(&self) -> Result<(usize, usize), CliError> {
        let model = self.model()?;
        match &self.analysis.pair {
            Some((a, b)) => {
                let (ia, ib) = (model.index_of(a)?, model.index_of(b)?);
                if ia == ib {
                    return Err(CliError::Config(format!("analysis.pair names `{a}` twice")));
                }
                Ok((ia, ib))
            }
            None if model.len() >= 2 => Ok((0, 1)),
            None => Err(CliError::Config("a pair needs at least two oscillators".into())),
        }
    }

    /// Structural checks that do not run any numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.experiment.needs_model() {
            let model = self.model()?;
            model.validate()?;
            self.oscillator_indices()?;
            if self.analysis.pair.is_some() {
                self.pair_indices()?;
            }
        }
        let a = &self.analysis;
        for (name, v) in [
            ("z_tolerance", a.z_tolerance),
            ("lyapunov_tolerance", a.lyapunov_tolerance),
            ("mc_relative_tolerance", a.mc_relative_tolerance),
            ("band_linewidths", a.band_linewidths),
            ("spectral_relative_tolerance", a.spectral_relative_tolerance),
            ("parseval_tolerance", a.parseval_tolerance),
            ("fit_relative_tolerance", a.fit_relative_tolerance),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Config(format!("analysis.{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=0.9).contains(&a.overlap) {
            return Err(CliError::Config(format!("analysis.overlap must lie in [0, 0.9], got {}", a.overlap)));
        }
        if self.sim.ensemble_size == 0 || self.sim.record_stride == 0 {
            return Err(CliError::Config("sim.ensemble_size and sim.record_stride must be ≥ 1".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.g_over_gamma.is_empty() || sweep.g_over_gamma.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
                return Err(CliError::Config("sweep.g_over_gamma must be a non-empty list of positive rates".into()));
            }
        }
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats is empty".into()));
        }
        Ok(())
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE: &str = r#"{
        "experiment": "equipartition",
        "model": {"oscillators": [{"label": "a", "mass": 1e-12, "omega": 6283.185307179586, "gamma": 314.1592653589793, "bath_temperature": 300}]}
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(SINGLE).unwrap();
        assert_eq!(c.sim.seed, DEFAULT_SEED);
        assert_eq!(c.sim.ensemble_size, 16);
        assert_eq!(c.analysis.z_tolerance, 4.0);
        assert_eq!(c.analysis.window, Window::Hann);
        assert_eq!(c.output.formats, vec![Format::Csv, Format::Json]);
        let sim = c.sim.resolve(c.model().unwrap()).unwrap();
        assert!((sim.dt * 6283.185307179586 - 0.05).abs() < 1e-3);
        // 100 decay times of 1/γ.
        assert!((sim.n_steps as f64 * sim.dt * 314.1592653589793 - 100.0).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "{",
            r#"{"experiment": "nonsense"}"#,
            r#"{"experiment": "equipartition"}"#,
            r#"{"experiment": "paper_numbers", "extra": 1}"#,
            r#"{"experiment": "paper_numbers", "analysis": {"overlap": 0.99}}"#,
            r#"{"experiment": "paper_numbers", "sweep": {"g_over_gamma": [1, -1]}}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(CliError::Config(_))), "{text}");
        }
        let bad_label = SINGLE.replace(r#""experiment": "equipartition","#, r#""experiment": "spectrum", "analysis": {"oscillators": ["zz"]},"#);
        assert!(matches!(ExperimentConfig::from_json(&bad_label), Err(CliError::Config(_))));
    }

    #[test]
    fn canonical_round_trip() {
        let c = ExperimentConfig::from_json(SINGLE).unwrap();
        let again = ExperimentConfig::from_json(&c.to_canonical_json()).unwrap();
        assert_eq!(c, again);
    }
}
