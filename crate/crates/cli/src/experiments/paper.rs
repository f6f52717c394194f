//! Closure of the quoted flux and temperature figures.

use modeheat::fluxlab::{
    compare_mode_vs_bulk, quoted_number_closure, BULK_THERMAL_RESISTANCE, CASIMIR_FLUX, MODE_GAMMA, RADIATIVE_FLUX,
};

use crate::output::{Cell, Check, Outcome, Table};

pub fn paper_numbers() -> Outcome {
    let mut out = Outcome::default();
    let mut closure = Table::new("closure", &["quantity", "quoted", "computed", "relative_error", "tolerance"]);
    for c in quoted_number_closure() {
        closure.push(vec![
            Cell::from(c.name.as_str()),
            c.expected.into(),
            c.computed.into(),
            c.relative_error.into(),
            c.tolerance.into(),
        ]);
        out.checks.push(Check::new(
            c.name.clone(),
            c.pass,
            format!("computed {:e}, quoted {:e}, relative error {:.3e}", c.computed, c.expected, c.relative_error),
        ));
    }
    out.tables.push(closure);

    let cmp = compare_mode_vs_bulk((CASIMIR_FLUX, MODE_GAMMA), (RADIATIVE_FLUX, BULK_THERMAL_RESISTANCE))
        .expect("quoted parameters are positive");
    let mut channels = Table::new("channels", &["channel", "flux_w", "parameter", "delta_t_k"]);
    channels.push(vec!["single_mode".into(), cmp.mode_flux.into(), cmp.mode_gamma.into(), cmp.mode_delta_t.into()]);
    channels.push(vec![
        "bulk".into(),
        cmp.bulk_flux.into(),
        cmp.bulk_thermal_resistance.into(),
        cmp.bulk_delta_t.into(),
    ]);
    out.tables.push(channels);
    // Bulk temperature rise the mode flux alone would cause.
    out.summary.insert("mode_flux_bulk_delta_t".into(), (CASIMIR_FLUX * BULK_THERMAL_RESISTANCE).into());
    out.summary.insert("flux_ratio".into(), cmp.flux_ratio.into());
    out.summary.insert("delta_t_ratio".into(), cmp.delta_t_ratio.into());
    out.summary.insert("comparison".into(), cmp.to_string().into());
    out
}
