//! The nine acceptance criteria, each at its stated tolerance. One line per
//! criterion is printed; the target exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p modeheat-cli --test acceptance`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use modeheat::fixtures::{
    bench_single, coupled_pair, spectral_pair, spectral_single, with_cold_damping, with_noisy_position_feedback,
    ROOM_TEMPERATURE,
};
use modeheat::spectra::{fit_lorentzian, welch_series, PeakFit, Window, WelchConfig};
use modeheat::{Psd, SteadyState, SystemModel};
use modeheat_cli::output::Outcome;
use modeheat_cli::{run_config, RunOptions, Verdict};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

struct Criterion {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> Value {
    let text = fs::read_to_string(configs_dir().join(format!("{name}.json"))).expect("example config");
    serde_json::from_str(&text).expect("example config is JSON")
}

fn run(config: &Value, dir: &Path, threads: usize) -> Outcome {
    let options = RunOptions { seed: None, out: Some(dir.to_path_buf()), threads: Some(threads) };
    match run_config(&config.to_string(), &options) {
        Ok(report) => report.outcome,
        Err(e) => panic!("run failed (exit {}): {e}", e.exit_code()),
    }
}

fn failures(out: &Outcome) -> String {
    let failed: Vec<String> = out.failed().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    if failed.is_empty() {
        String::new()
    } else {
        format!(" failed [{}]", failed.join("; "))
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn value(out: &Outcome, table: &str, row: usize, column: &str) -> f64 {
    out.table(table)
        .and_then(|t| t.value(row, column))
        .unwrap_or_else(|| panic!("{table}[{row}].{column} missing"))
}

fn quoted_closure(dir: &Path) -> (bool, String) {
    let out = run(&load("paper_numbers"), dir, 1);
    let t = out.table("closure").expect("closure table");
    let worst = (0..t.rows.len()).map(|r| t.value(r, "relative_error").unwrap()).fold(0.0, f64::max);
    (out.verdict() == Verdict::Pass, format!("{} quantities, worst relative error {worst:.2e}{}", t.rows.len(), failures(&out)))
}

fn equipartition(dir: &Path) -> (bool, String) {
    let out = run(&load("equipartition"), dir, 1);
    let (t, se) = (value(&out, "temperatures", 0, "T_pos_mc"), value(&out, "temperatures", 0, "T_pos_mc_se"));
    let (tk, sek) = (value(&out, "temperatures", 0, "T_kin_mc"), value(&out, "temperatures", 0, "T_kin_mc_se"));
    let members = out.summary["ensemble_size"].as_u64().unwrap_or(0);
    let ok = out.verdict() == Verdict::Pass && members >= 200 && se / ROOM_TEMPERATURE <= 0.01 && sek / ROOM_TEMPERATURE <= 0.01;
    (ok, format!("{members} members: T_pos = {t:.2} ± {se:.2} K, T_kin = {tk:.2} ± {sek:.2} K{}", failures(&out)))
}

fn noise_factor() -> (bool, String) {
    let mut model = bench_single(ROOM_TEMPERATURE);
    model.noise_factor = 8.0;
    let ss = SteadyState::solve(&model).expect("stable");
    let (p, k) = (ss.mode_temperature_positional[0], ss.mode_temperature_kinetic[0]);
    let worst = rel(p, 2.0 * ROOM_TEMPERATURE).max(rel(k, 2.0 * ROOM_TEMPERATURE));
    (worst < 1e-8, format!("noise_factor 8: T_pos/T = {:.10}, T_kin/T = {:.10}", p / ROOM_TEMPERATURE, k / ROOM_TEMPERATURE))
}

fn flux_fixtures() -> Vec<(String, SystemModel)> {
    let mut fixtures = vec![
        ("single".to_string(), bench_single(ROOM_TEMPERATURE)),
        ("single_cold_damping".to_string(), with_cold_damping(bench_single(ROOM_TEMPERATURE), 3.0)),
        ("single_noisy_feedback".to_string(), with_noisy_position_feedback(bench_single(ROOM_TEMPERATURE), 0.05, 3000.0)),
    ];
    for g in [0.1, 1.0, 10.0, 100.0] {
        fixtures.push((format!("pair_g{g}"), coupled_pair(g, 400.0, 200.0)));
    }
    fixtures
}

fn flux_gap(dir: &Path) -> (bool, String) {
    let template = load("coupled_transfer");
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, model) in flux_fixtures() {
        let mut config = template.clone();
        config["model"] = serde_json::to_value(&model).unwrap();
        let out = run(&config, &dir.join(&name), 1);
        let residual = out.summary["balance_residual"].as_f64().unwrap_or(f64::INFINITY);
        let pairwise = out
            .checks
            .iter()
            .filter(|c| c.name.starts_with("direct_vs_gap") || c.name.starts_with("direct_vs_lyapunov") || c.name.starts_with("gap_vs_lyapunov"))
            .collect::<Vec<_>>();
        let pass = pairwise.len() == 3 * model.len() && pairwise.iter().all(|c| c.passed) && residual < 1e-8;
        ok &= pass;
        notes.push(format!("{name} {}", if pass { "ok" } else { "FAIL" }));
        if !pass {
            notes.push(format!("residual {residual:e}{}", failures(&out)));
        }
    }
    (ok, notes.join(", "))
}

fn cold_damping(dir: &Path) -> (bool, String) {
    let out = run(&load("cold_damping"), dir, 1);
    let ratio = value(&out, "cold_damping", 0, "T_kin_lyap") / ROOM_TEMPERATURE;
    let gamma_fb = value(&out, "cold_damping", 0, "gamma_fb") / value(&out, "cold_damping", 0, "gamma");
    let ok = out.verdict() == Verdict::Pass && (ratio - 0.25).abs() < 1e-8 * 0.25 && (gamma_fb - 3.0).abs() < 1e-12;
    (ok, format!("γ_fb/γ = {gamma_fb}, T_kin/T = {ratio:.12}{}", failures(&out)))
}

struct SpectralPoint {
    t_bath: f64,
    t_area: [f64; 2],
    g_model: f64,
    g_psd: f64,
}

fn spectral_point(template: &Value, model: SystemModel, dir: &Path) -> SpectralPoint {
    let mut config = template.clone();
    config["model"] = serde_json::to_value(&model).unwrap();
    let out = run(&config, dir, 1);
    SpectralPoint {
        t_bath: model.oscillators[0].bath_temperature,
        t_area: [value(&out, "thermometry", 0, "T_area"), value(&out, "thermometry", 1, "T_area")],
        g_model: value(&out, "coupling", 0, "g_model"),
        g_psd: value(&out, "coupling", 0, "g_psd"),
    }
}

fn measurability(dir: &Path) -> (bool, String) {
    let template = load("spectrum");
    let mut ok = true;
    let mut notes = Vec::new();
    let mut describe = |label: String, p: &SpectralPoint, ok: &mut bool| {
        let dt = p.t_area.iter().map(|t| rel(*t, p.t_bath)).fold(0.0, f64::max);
        let dg = rel(p.g_psd, p.g_model);
        *ok &= dt <= 0.05 && dg <= 0.05;
        notes.push(format!("{label}: |ΔT|/T = {:.1}%, |Δg|/g = {:.1}%", 100.0 * dt, 100.0 * dg));
    };
    let g_sweep: Vec<SpectralPoint> = [10.0, 15.0, 20.0]
        .iter()
        .map(|&g| spectral_point(&template, spectral_pair(g, ROOM_TEMPERATURE), &dir.join(format!("g{g}"))))
        .collect();
    for (g, p) in [10, 15, 20].iter().zip(&g_sweep) {
        describe(format!("g={g}γ"), p, &mut ok);
    }
    let t_sweep: Vec<SpectralPoint> = [150.0, 600.0]
        .iter()
        .map(|&t| spectral_point(&template, spectral_pair(10.0, t), &dir.join(format!("t{t}"))))
        .collect();
    for (t, p) in [150, 600].iter().zip(&t_sweep) {
        describe(format!("T={t}K"), p, &mut ok);
    }
    // At fixed k_c the extracted g must not follow T; at fixed T the spectral T′ must not follow g.
    let g_fixed: Vec<f64> = std::iter::once(g_sweep[0].g_psd).chain(t_sweep.iter().map(|p| p.g_psd)).collect();
    let g_spread = g_fixed.iter().map(|g| rel(*g, g_sweep[0].g_model)).fold(0.0, f64::max);
    let t_spread = g_sweep.iter().flat_map(|p| p.t_area).map(|t| rel(t, ROOM_TEMPERATURE)).fold(0.0, f64::max);
    ok &= g_spread <= 0.05 && t_spread <= 0.05;
    notes.push(format!("g across T within {:.1}%, T′ across g within {:.1}%", 100.0 * g_spread, 100.0 * t_spread));
    (ok, notes.join("; "))
}

fn strong_coupling(dir: &Path) -> (bool, String) {
    let out = run(&load("strong_coupling_sweep"), dir, 1);
    let t = out.table("strong_coupling_sweep").expect("sweep table");
    let g: Vec<f64> = (0..t.rows.len()).map(|r| t.value(r, "g_over_gamma").unwrap()).collect();
    let covers = g.iter().any(|&x| x <= 0.1) && g.iter().any(|&x| x >= 100.0);
    (
        out.verdict() == Verdict::Pass && covers,
        format!("{} points g/γ ∈ [{}, {}], {} checks{}", g.len(), g[0], g[g.len() - 1], out.checks.len(), failures(&out)),
    )
}

fn spectral_plumbing(dir: &Path) -> (bool, String) {
    // White noise: PSD area against sample variance.
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let x: Vec<f64> = (0..1 << 16).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
    let psd = welch_series(&x, 1e-3, &WelchConfig::new(1024).window(Window::Hann)).unwrap();
    let parseval = rel(psd.area(), var);

    // Exact Lorentzian on a background.
    let truth = PeakFit {
        center: 1000.0,
        fwhm_gamma: 3.0,
        area: 2e-16,
        background: 1e-20,
        goodness: 0.0,
        center_std_error: 0.0,
        iterations: 0,
        converged: true,
    };
    let frequencies: Vec<f64> = (0..4001).map(|k| 980.0 + 0.01 * k as f64).collect();
    let values = frequencies.iter().map(|&f| truth.line(f) + truth.background).collect();
    let synthetic = Psd {
        frequencies,
        values,
        resolution_bandwidth: 0.01,
        n_segments: 1,
        window: Window::Rectangular,
        overlap_correlation: 1.0,
    };
    let fit = fit_lorentzian(&synthetic, None, (980.0, 1020.0)).unwrap();
    let synth = rel(fit.center, truth.center).max(rel(fit.fwhm_gamma, truth.fwhm_gamma)).max(rel(fit.area, truth.area));

    // Fixture spectrum: fitted linewidth against γ.
    let mut config = load("spectrum");
    let model = spectral_single(ROOM_TEMPERATURE);
    let gamma = model.oscillators[0].gamma;
    config["model"] = serde_json::to_value(&model).unwrap();
    config["analysis"] = json!({"band_linewidths": 200});
    let out = run(&config, dir, 1);
    let fitted = value(&out, "peaks", 0, "fit_fwhm_gamma");
    let lw = rel(fitted, gamma);
    (
        parseval <= 0.01 && synth <= 1e-6 && lw <= 0.10,
        format!(
            "white-noise Parseval {:.2e}, synthetic fit {synth:.1e}, fixture γ {fitted:.4} vs {gamma:.4} ({:.1}%)",
            parseval,
            100.0 * lw
        ),
    )
}

fn data_rows(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            let rows: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
            (p.file_name().unwrap().to_string_lossy().into_owned(), rows)
        })
        .collect()
}

fn determinism(dir: &Path) -> (bool, String) {
    let mut ok = true;
    let mut notes = Vec::new();
    for name in ["coupled_transfer", "spectrum"] {
        let config = load(name);
        let runs: Vec<Vec<(String, String)>> = [1usize, 4, 1]
            .iter()
            .enumerate()
            .map(|(k, &threads)| {
                let d = dir.join(format!("{name}_{k}_{threads}"));
                run(&config, &d, threads);
                data_rows(&d)
            })
            .collect();
        let same = !runs[0].is_empty() && runs.iter().all(|r| *r == runs[0]);
        ok &= same;
        notes.push(format!("{name}: {} CSV files {}", runs[0].len(), if same { "identical" } else { "DIFFER" }));
    }
    (ok, notes.join(", "))
}

fn main() {
    let root = tempfile::tempdir().unwrap();
    let d = |s: &str| root.path().join(s);
    let mut results = Vec::new();
    let mut record = |id, name, f: &dyn Fn() -> (bool, String)| {
        let start = Instant::now();
        let (passed, detail) = f();
        let detail = format!("{detail} [{:.1} s]", start.elapsed().as_secs_f64());
        println!("criterion {id} {name}: {} {detail}", if passed { "PASS" } else { "FAIL" });
        results.push(Criterion { id, name, passed, detail });
    };
    record(1, "quoted-number closure", &|| quoted_closure(&d("c1")));
    record(2, "equipartition", &|| equipartition(&d("c2")));
    record(3, "noise-factor adjudication", &noise_factor);
    record(4, "flux-gap model independence", &|| flux_gap(&d("c4")));
    record(5, "cold damping", &|| cold_damping(&d("c5")));
    record(6, "independent measurability", &|| measurability(&d("c6")));
    record(7, "strong-coupling validity", &|| strong_coupling(&d("c7")));
    record(8, "spectral plumbing", &|| spectral_plumbing(&d("c8")));
    record(9, "determinism", &|| determinism(&d("c9")));
    let failed: Vec<String> = results.iter().filter(|c| !c.passed).map(|c| format!("{} {}: {}", c.id, c.name, c.detail)).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed criteria:\n{}", failed.join("\n"));
        std::process::exit(1);
    }
}
