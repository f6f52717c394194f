//! Flux–temperature arithmetic for a single mode, and the comparison of
//! single-mode heating against lumped bulk heating.
//!
//! A mode with damping half-rate γ exchanges `P = 2γk_B(T − T′)` with its
//! bath. A bulk body is reduced to a lumped thermal resistance,
//! `ΔT = P R_th`. The two scales differ by many orders of magnitude because
//! a single mode holds `k_B T` of energy while a bulk solid holds a
//! macroscopic heat capacity.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Quoted Casimir-mediated flux between membrane modes, W.
pub const CASIMIR_FLUX: f64 = 6.5e-21;
/// Quoted mode-temperature change produced by that flux, K.
pub const MODE_TEMPERATURE_CHANGE: f64 = 18.0;
/// Quoted radiative flux into the bulk membrane, W.
pub const RADIATIVE_FLUX: f64 = 3.5e-6;
/// Quoted bulk temperature change produced by the radiative flux, K.
pub const BULK_TEMPERATURE_CHANGE: f64 = 0.02;
/// Mode damping half-rate, 1/s. Derived by inversion, `γ = P / (2 k_B ΔT)`,
/// of the quoted Casimir flux and mode-temperature change.
pub const MODE_GAMMA: f64 = 13.08;
/// Lumped bulk thermal resistance, K/W. Derived by inversion, `R = ΔT / P`,
/// of the quoted radiative flux and bulk temperature change.
pub const BULK_THERMAL_RESISTANCE: f64 = 5.71e3;
/// Relative tolerance of the closure checks (the quoted values carry two
/// significant figures, ~ and all).
pub const CLOSURE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluxError {
    #[error("damping rate must be positive, got {0}")]
    ZeroDamping(f64),
    #[error("thermal resistance must be positive, got {0}")]
    NonPositiveResistance(f64),
    #[error("negative damping rate {0}")]
    NegativeDamping(f64),
}

/// `P = 2γk_B(T − T′)`, W. Positive when the bath heats the mode.
pub fn flux_from_gap<T: Real>(gamma: T, bath_temperature: T, mode_temperature: T) -> Result<T, FluxError> {
    if gamma < T::zero() {
        return Err(FluxError::NegativeDamping(gamma.as_f64()));
    }
    Ok(T::lit(2.0) * gamma * T::boltzmann() * (bath_temperature - mode_temperature))
}

/// `T − T′ = P / (2γk_B)`, K.
pub fn gap_from_flux<T: Real>(gamma: T, flux: T) -> Result<T, FluxError> {
    if !(gamma > T::zero()) {
        return Err(FluxError::ZeroDamping(gamma.as_f64()));
    }
    Ok(flux / (T::lit(2.0) * gamma * T::boltzmann()))
}

/// Damping half-rate that makes `flux` and `delta_t` consistent, 1/s.
pub fn gamma_from_flux_gap<T: Real>(flux: T, delta_t: T) -> T {
    flux / (T::lit(2.0) * T::boltzmann() * delta_t)
}

/// `ΔT_bulk = P R_th`, K.
pub fn bulk_delta_t<T: Real>(flux: T, thermal_resistance: T) -> Result<T, FluxError> {
    if !(thermal_resistance > T::zero()) {
        return Err(FluxError::NonPositiveResistance(thermal_resistance.as_f64()));
    }
    Ok(flux * thermal_resistance)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowDirection {
    BathToMode,
    ModeToBath,
    Equilibrium,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxReport<T> {
    pub flux: T,
    pub gamma: T,
    pub bath_temperature: T,
    pub mode_temperature: T,
    pub direction: FlowDirection,
}

impl<T: Real> FluxReport<T> {
    pub fn new(gamma: T, bath_temperature: T, mode_temperature: T) -> Result<Self, FluxError> {
        let flux = flux_from_gap(gamma, bath_temperature, mode_temperature)?;
        let direction = if bath_temperature > mode_temperature {
            FlowDirection::BathToMode
        } else if bath_temperature < mode_temperature {
            FlowDirection::ModeToBath
        } else {
            FlowDirection::Equilibrium
        };
        Ok(Self { flux, gamma, bath_temperature, mode_temperature, direction })
    }
}

/// Side-by-side single-mode and bulk heating.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkComparison<T> {
    pub mode_flux: T,
    pub mode_gamma: T,
    pub mode_delta_t: T,
    pub bulk_flux: T,
    pub bulk_thermal_resistance: T,
    pub bulk_delta_t: T,
    /// bulk flux / mode flux; `None` when the mode flux vanishes.
    pub flux_ratio: Option<T>,
    /// mode ΔT / bulk ΔT; `None` when the bulk ΔT vanishes.
    pub delta_t_ratio: Option<T>,
}

fn ratio<T: Real>(num: T, den: T) -> Option<T> {
    (den != T::zero()).then(|| num / den)
}

/// Evaluates both channels: the mode as `(flux, γ)`, the bulk as `(flux, R_th)`.
pub fn compare_mode_vs_bulk<T: Real>(mode: (T, T), bulk: (T, T)) -> Result<BulkComparison<T>, FluxError> {
    let (mode_flux, mode_gamma) = mode;
    let (bulk_flux, resistance) = bulk;
    let mode_delta_t = gap_from_flux(mode_gamma, mode_flux)?;
    let bulk_dt = bulk_delta_t(bulk_flux, resistance)?;
    Ok(BulkComparison {
        mode_flux,
        mode_gamma,
        mode_delta_t,
        bulk_flux,
        bulk_thermal_resistance: resistance,
        bulk_delta_t: bulk_dt,
        flux_ratio: ratio(bulk_flux, mode_flux),
        delta_t_ratio: ratio(mode_delta_t, bulk_dt),
    })
}

impl<T: Real> BulkComparison<T> {
    pub fn is_degenerate(&self) -> bool {
        self.flux_ratio.is_none() || self.delta_t_ratio.is_none()
    }

    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }
}

impl<T: Real> fmt::Display for BulkComparison<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |x: Option<T>| x.map_or_else(|| "degenerate".to_string(), |v| format!("{:.3e}", v.as_f64()));
        writeln!(f, "{:<14} {:>12} {:>24} {:>12}", "channel", "flux [W]", "coupling", "ΔT [K]")?;
        writeln!(
            f,
            "{:<14} {:>12.3e} {:>24} {:>12.3e}",
            "single mode",
            self.mode_flux.as_f64(),
            format!("γ = {:.4} 1/s", self.mode_gamma.as_f64()),
            self.mode_delta_t.as_f64()
        )?;
        writeln!(
            f,
            "{:<14} {:>12.3e} {:>24} {:>12.3e}",
            "bulk (lumped)",
            self.bulk_flux.as_f64(),
            format!("R = {:.4e} K/W", self.bulk_thermal_resistance.as_f64()),
            self.bulk_delta_t.as_f64()
        )?;
        writeln!(f, "heat capacity scale: single mode ~ k_B, bulk ~ macroscopic")?;
        writeln!(f, "flux ratio (bulk/mode): {}", show(self.flux_ratio))?;
        write!(f, "ΔT ratio (mode/bulk):   {}", show(self.delta_t_ratio))
    }
}

/// One consistency check of the quoted numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureCheck {
    pub name: String,
    pub expected: f64,
    pub computed: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ClosureCheck {
    pub fn new(name: &str, expected: f64, computed: f64, tolerance: f64) -> Self {
        let relative_error = ((computed - expected) / expected).abs();
        Self { name: name.to_string(), expected, computed, relative_error, tolerance, pass: relative_error <= tolerance }
    }
}

/// Checks that the four quoted numbers and the two inverted parameters are
/// mutually consistent under `P = 2γk_BΔT` and `ΔT = P R_th`.
pub fn quoted_number_closure() -> Vec<ClosureCheck> {
    let tol = CLOSURE_TOLERANCE;
    let mode_flux = flux_from_gap(MODE_GAMMA, MODE_TEMPERATURE_CHANGE, 0.0).expect("positive gamma");
    let mode_gap = gap_from_flux(MODE_GAMMA, CASIMIR_FLUX).expect("positive gamma");
    let bulk_dt = bulk_delta_t(RADIATIVE_FLUX, BULK_THERMAL_RESISTANCE).expect("positive resistance");
    let cmp = compare_mode_vs_bulk((CASIMIR_FLUX, MODE_GAMMA), (RADIATIVE_FLUX, BULK_THERMAL_RESISTANCE))
        .expect("valid channels");
    vec![
        ClosureCheck::new("mode flux from 18 K gap [W]", CASIMIR_FLUX, mode_flux, tol),
        ClosureCheck::new("mode gap from 6.5e-21 W [K]", MODE_TEMPERATURE_CHANGE, mode_gap, tol),
        ClosureCheck::new(
            "inverted mode gamma [1/s]",
            MODE_GAMMA,
            gamma_from_flux_gap(CASIMIR_FLUX, MODE_TEMPERATURE_CHANGE),
            tol,
        ),
        ClosureCheck::new("bulk dT from 3.5e-6 W [K]", BULK_TEMPERATURE_CHANGE, bulk_dt, tol),
        ClosureCheck::new(
            "inverted bulk resistance [K/W]",
            BULK_THERMAL_RESISTANCE,
            BULK_TEMPERATURE_CHANGE / RADIATIVE_FLUX,
            tol,
        ),
        ClosureCheck::new("flux ratio bulk/mode", 5.4e14, cmp.flux_ratio.unwrap_or(f64::NAN), tol),
        ClosureCheck::new("dT ratio mode/bulk", 9.0e2, cmp.delta_t_ratio.unwrap_or(f64::NAN), tol),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::BOLTZMANN;

    #[test]
    fn quoted_pair_closes() {
        let p = flux_from_gap(13.08, 18.0, 0.0).unwrap();
        assert!((p - 6.5e-21_f64).abs() / 6.5e-21 < 0.01);
        let gap = gap_from_flux(13.08, 6.5e-21).unwrap();
        assert!((gap - 18.0_f64).abs() / 18.0 < 0.01);
        // Inversion from the raw pair, independently of the stored constant.
        let gamma = 6.5e-21 / (2.0 * BOLTZMANN * 18.0);
        assert!((gamma - 13.0777).abs() < 1e-3);
    }

    #[test]
    fn trivial_cases() {
        assert_eq!(flux_from_gap(13.08, 300.0, 300.0).unwrap(), 0.0);
        assert_eq!(flux_from_gap(0.0, 300.0, 10.0).unwrap(), 0.0);
        assert_eq!(gap_from_flux(13.08, 0.0).unwrap(), 0.0);
        assert!(matches!(gap_from_flux(0.0, 1e-21), Err(FluxError::ZeroDamping(_))));
        let dt1 = gap_from_flux(5.0, 1e-21).unwrap();
        let dt2 = gap_from_flux(10.0, 1e-21).unwrap();
        assert!((dt1 / dt2 - 2.0_f64).abs() < 1e-15);
    }

    #[test]
    fn bulk_channel() {
        assert!((bulk_delta_t(3.5e-6, 5.71e3).unwrap() - 0.02_f64).abs() / 0.02 < 0.01);
        assert_eq!(bulk_delta_t(0.0, 5.71e3).unwrap(), 0.0);
        let tiny = bulk_delta_t(6.5e-21, 5.71e3).unwrap();
        assert!((tiny - 3.7e-17_f64).abs() / 3.7e-17 < 0.01, "{tiny}");
        assert!(bulk_delta_t(1.0, 0.0).is_err());
    }

    #[test]
    fn comparison_ratios() {
        let c = compare_mode_vs_bulk((6.5e-21, 13.08), (3.5e-6, 5.71e3)).unwrap();
        assert!((c.flux_ratio.unwrap() - 5.4e14_f64).abs() / 5.4e14 < 0.01);
        assert!((c.delta_t_ratio.unwrap() - 900.0_f64).abs() / 900.0 < 0.01);
        assert_eq!(c.flux_ratio.unwrap(), c.bulk_flux / c.mode_flux);
        assert_eq!(c.delta_t_ratio.unwrap(), c.mode_delta_t / c.bulk_delta_t);
        let text = c.to_string();
        assert!(text.contains("single mode") && text.contains("bulk"));
        let json: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        assert!(json["flux_ratio"].as_f64().unwrap() > 1e14);
    }

    #[test]
    fn equal_flux_identity_and_degenerate_case() {
        let gamma = 7.0;
        let r = 1.0 / (2.0 * gamma * BOLTZMANN);
        let c = compare_mode_vs_bulk((1e-20, gamma), (1e-20, r)).unwrap();
        assert!((c.mode_delta_t - c.bulk_delta_t).abs() / c.bulk_delta_t < 1e-12);
        let z = compare_mode_vs_bulk((0.0, gamma), (1e-6, r)).unwrap();
        assert_eq!(z.mode_delta_t, 0.0);
        assert!(z.flux_ratio.is_none() && z.is_degenerate());
        assert!(z.to_string().contains("degenerate"));
    }

    #[test]
    fn closure_all_pass() {
        for c in quoted_number_closure() {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn report_direction() {
        assert_eq!(FluxReport::new(1.0, 300.0, 280.0).unwrap().direction, FlowDirection::BathToMode);
        assert_eq!(FluxReport::new(1.0, 300.0, 320.0).unwrap().direction, FlowDirection::ModeToBath);
        let r = FluxReport::new(1.0, 300.0, 320.0).unwrap();
        assert!(r.flux < 0.0);
    }
}
