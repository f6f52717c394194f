use modeheat::fluxlab::{flux_from_gap, gap_from_flux};
use modeheat::model::{FeedbackSpec, OscillatorSpec};
use modeheat::{SteadyState, SystemModel, BOLTZMANN};
use proptest::prelude::*;

const M: f64 = 1e-12;

fn oscillator() -> impl Strategy<Value = (f64, f64, f64)> {
    // (Ω, Q, T)
    (1e3..1e6f64, 2.0..1e4f64, 1.0..1000.0f64)
}

fn model_from(params: &[(f64, f64, f64)], g_over_gamma: f64, cold: f64) -> SystemModel {
    let oscillators = params
        .iter()
        .enumerate()
        .map(|(i, &(w, q, t))| OscillatorSpec::new(format!("o{i}"), M, w, w / q, t))
        .collect();
    let mut model = SystemModel::new(oscillators);
    for i in 1..params.len() {
        let gamma = model.oscillators[i - 1].gamma.min(model.oscillators[i].gamma);
        model = model.with_coupling_rate(i - 1, i, g_over_gamma * gamma);
    }
    if cold > 0.0 {
        let o = model.oscillators[0].clone();
        model = model.with_feedback(o.label.clone(), FeedbackSpec::cold_damping(M, cold * o.gamma));
    }
    model
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn valid_models_are_hurwitz(params in prop::collection::vec(oscillator(), 1..4), g in 0.0..50.0f64, cold in 0.0..5.0f64) {
        let model = model_from(&params, g, cold);
        let matrices = model.compile().unwrap();
        prop_assert!(matrices.is_hurwitz());
        let ss = SteadyState::solve(&model).unwrap();
        prop_assert!(ss.residual < 1e-8, "residual {}", ss.residual);
        prop_assert!(ss.balance_residual() < 1e-8, "imbalance {}", ss.balance_residual());
    }

    #[test]
    fn covariance_scales_with_temperature(params in prop::collection::vec(oscillator(), 1..4), g in 0.0..20.0f64, c in 0.1..10.0f64) {
        let model = model_from(&params, g, 0.0);
        let mut scaled = model.clone();
        for o in &mut scaled.oscillators {
            o.bath_temperature *= c;
        }
        let (a, b) = (SteadyState::solve(&model).unwrap(), SteadyState::solve(&scaled).unwrap());
        for (x, y) in a.mode_temperature_kinetic.iter().zip(&b.mode_temperature_kinetic) {
            prop_assert!(rel(c * x, *y, *y) < 1e-8);
        }
        for (x, y) in a.mode_temperature_positional.iter().zip(&b.mode_temperature_positional) {
            prop_assert!(rel(c * x, *y, *y) < 1e-8);
        }
    }

    #[test]
    fn common_bath_is_equilibrium_at_any_coupling(params in prop::collection::vec(oscillator(), 2..4), g in 0.0..100.0f64, t in 1.0..1000.0f64) {
        let params: Vec<_> = params.into_iter().map(|(w, q, _)| (w, q, t)).collect();
        let model = model_from(&params, g, 0.0);
        let ss = SteadyState::solve(&model).unwrap();
        let scale = params.iter().map(|&(w, q, _)| 2.0 * (w / q) * BOLTZMANN * t).fold(0.0, f64::max);
        for (i, tk) in ss.mode_temperature_kinetic.iter().enumerate() {
            prop_assert!(rel(*tk, t, t) < 1e-8, "T_kin[{i}] = {tk}");
            prop_assert!(ss.bath_flux[i].abs() < 1e-8 * scale, "P[{i}] = {}", ss.bath_flux[i]);
        }
    }

    #[test]
    fn flux_follows_temperature_difference(a in oscillator(), b in oscillator(), g in 0.05..50.0f64, steps in prop::collection::vec(1.0..200.0f64, 2..6)) {
        let t_a = a.2;
        let mut t_b = 0.5;
        let mut last = f64::INFINITY;
        for dt in steps {
            t_b += dt;
            let model = model_from(&[a, (b.0, b.1, t_b)], g, 0.0);
            let p = SteadyState::solve(&model).unwrap().bath_flux[0];
            prop_assert!(p < last, "P_A not decreasing in T_B: {p} after {last}");
            prop_assert_eq!(p.partial_cmp(&0.0), t_a.partial_cmp(&t_b).map(|o| if p == 0.0 { std::cmp::Ordering::Equal } else { o }));
            last = p;
        }
    }

    #[test]
    fn gap_and_flux_invert(gamma in 1e-3..1e4f64, t in 0.0..1e3f64, t_mode in 0.0..1e3f64) {
        let p = flux_from_gap(gamma, t, t_mode).unwrap();
        let gap = gap_from_flux(gamma, p).unwrap();
        prop_assert!((gap - (t - t_mode)).abs() <= 1e-12 * t.max(t_mode).max(1.0));
    }

    #[test]
    fn stationary_flux_is_the_kinetic_gap(params in prop::collection::vec(oscillator(), 1..4), g in 0.0..50.0f64, cold in 0.0..5.0f64) {
        let model = model_from(&params, g, cold);
        let ss = SteadyState::solve(&model).unwrap();
        for (i, o) in model.oscillators.iter().enumerate() {
            let gap = flux_from_gap(o.gamma, o.bath_temperature, ss.mode_temperature_kinetic[i]).unwrap();
            let scale = 2.0 * o.gamma * BOLTZMANN * o.bath_temperature;
            prop_assert!(rel(gap, ss.bath_flux[i], scale) < 1e-12, "{gap} vs {}", ss.bath_flux[i]);
        }
    }
}
