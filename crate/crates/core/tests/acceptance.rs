mod common;

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::Vector3;

use zms::analysis::SpectrumReport;
use zms::atomic::{LevelScheme, SphericalPolarization};
use zms::classical::{total_moment, DipoleEnsemble, DEFAULT_GYRO};
use zms::dynamics::{
    larmor_frequency, run_storage_series, AtomModel, FieldSegment, IntegratorConfig, OpticalField, PulseSequence,
    UnitSystem, MU_B_OVER_H,
};
use zms::ensemble::MagneticEnvironment;
use zms::presets;
use zms::run::{self, SimulationOutput};

type Outcome = Result<(bool, String), String>;

fn simulate(name: &str) -> Result<(SimulationOutput, f64), String> {
    let cfg = presets::config(name).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = run::simulate(&cfg).map_err(|e| e.to_string())?;
    Ok((out, start.elapsed().as_secs_f64()))
}

/// Larmor frequency of the field-on presets, Hz.
fn preset_larmor_hz() -> f64 {
    let units = UnitSystem::default();
    presets::MEAN_LARMOR_GAMMA * units.gamma_hz
}

fn spectrum(out: &SimulationOutput) -> Result<&SpectrumReport, String> {
    out.spectrum.as_ref().ok_or_else(|| "no spectrum".to_string())
}

fn larmor_arithmetic() -> Outcome {
    let start = Instant::now();
    let l = larmor_frequency(-0.25, 0.7, &UnitSystem::default());
    let elapsed = start.elapsed().as_secs_f64();
    let oracle = 1.0 / (0.25 * MU_B_OVER_H * 0.7);
    let period_us = l.period * 1e6;
    let rel = (period_us - 4.1).abs() / 4.1;
    Ok((
        rel <= 0.02 && (l.period - oracle).abs() < 1e-12 * oracle && elapsed < 1e-3,
        format!("T_L = {period_us:.4} us (4.1 us, {:.2}% off), runtime {:.1} us", rel * 100.0, elapsed * 1e6),
    ))
}

fn fig5(out: &SimulationOutput, secs: f64) -> Outcome {
    let st = &out.peaks.storage_times;
    let span = st[st.len() - 1] - st[0];
    let want = 2.0 * preset_larmor_hz();
    let f = spectrum(out)?.dominant().ok_or("no spectral peak")?.frequency_hz;
    let rel = (f - want).abs() / want;
    Ok((
        rel <= 0.05 && st.len() >= 24 && span * want >= 2.0,
        format!(
            "dominant {:.2} kHz vs 2*Omega_L {:.2} kHz ({:.2}% off), {} storage times over {:.1} periods, runtime {secs:.1} s",
            f / 1e3,
            want / 1e3,
            rel * 100.0,
            st.len(),
            span * want
        ),
    ))
}

fn fig6(out: &SimulationOutput, secs: f64) -> Outcome {
    let fl = preset_larmor_hz();
    let s = spectrum(out)?;
    let main = s.dominant().ok_or("no spectral peak")?;
    let rel = (main.frequency_hz - fl).abs() / fl;
    let second = s.peaks[1..].iter().find(|p| (p.frequency_hz - 2.0 * fl).abs() <= 0.05 * 2.0 * fl);
    let ok = rel <= 0.05 && second.is_some_and(|p| p.amplitude < main.amplitude);
    let second = second.map_or("none".to_string(), |p| {
        format!("{:.2} kHz (amplitude ratio {:.2})", p.frequency_hz / 1e3, p.amplitude / main.amplitude)
    });
    Ok((
        ok,
        format!(
            "dominant {:.2} kHz vs Omega_L {:.2} kHz ({:.2}% off), 2*Omega_L peak {second}, runtime {secs:.1} s",
            main.frequency_hz / 1e3,
            fl / 1e3,
            rel * 100.0
        ),
    ))
}

fn tau(out: &SimulationOutput) -> Result<f64, String> {
    out.fits.selected.map(|f| f.tau).ok_or_else(|| "envelope fit failed".to_string())
}

fn anisotropy(fig4: &SimulationOutput, fig6: &SimulationOutput) -> Outcome {
    let (t4, t6) = (tau(fig4)?, tau(fig6)?);
    let st = &fig6.peaks.storage_times;
    let span = (st[st.len() - 1] - st[0].min(0.0)) * 1e6;
    Ok((
        t6 / t4 >= 3.0 && span >= 39.0,
        format!("tau(fig6) = {:.2} us, tau(fig4) = {:.2} us, ratio {:.2} over {span:.1} us", t6 * 1e6, t4 * 1e6, t6 / t4),
    ))
}

/// The zero-mean retrieved intensity goes as the square of the classical
/// transverse moment, `exp(-(γσt)²)`, whose 1/e time is `1/(γσ)` with γσ the
/// angular Larmor-frequency spread.
fn fig4_scale(fig4: &SimulationOutput) -> Outcome {
    let f = fig4.fits.selected.ok_or("envelope fit failed")?;
    let sigma_angular = TAU * presets::SIGMA_LARMOR_GAMMA * UnitSystem::default().gamma_hz;
    let oracle = 1.0 / sigma_angular;
    let rel = (f.tau - oracle).abs() / oracle;
    let us = f.tau * 1e6;
    Ok((
        (2.0..=10.0).contains(&us) && rel <= 0.3,
        format!("{} 1/e time {us:.2} us, oracle {:.2} us ({:.1}% off)", f.model, oracle * 1e6, rel * 100.0),
    ))
}

fn fig3() -> Outcome {
    let cfg = presets::config("fig3").map_err(|e| e.to_string())?;
    let out = run::sweep(&cfg).map_err(|e| e.to_string())?;
    let oracle = 0.25 * MU_B_OVER_H;
    let rel = (out.fit.slope - oracle).abs() / oracle;
    Ok((
        out.rows.len() == 5 && rel <= 0.03 && out.fit.r_squared >= 0.999,
        format!(
            "slope {:.4} MHz/G vs {:.4} ({:.2}% off), r2 = {:.6}, {} fields",
            out.fit.slope / 1e6,
            oracle / 1e6,
            rel * 100.0,
            out.fit.r_squared,
            out.rows.len()
        ),
    ))
}

fn invariants() -> Outcome {
    let start = Instant::now();
    let mut worst = common::InvariantReport {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    let mut failed = Vec::new();
    for seed in 0..100 {
        let r = common::check_invariants(&common::random_case(seed));
        if !r.passes() {
            failed.push(seed);
        }
        worst = worst.worst(r);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        failed.is_empty() && secs <= 300.0,
        format!(
            "100 configs, trace {:.1e}, hermiticity {:.1e}, min eigenvalue {:.1e}, dark vs RK4 {:.1e}, step halving {:.1e}, runtime {secs:.1} s{}",
            worst.trace_drift,
            worst.hermiticity,
            worst.min_eigenvalue,
            worst.dark_vs_rk4,
            worst.step_halving,
            if failed.is_empty() { String::new() } else { format!(", failing seeds {failed:?}") }
        ),
    ))
}

fn classical_and_zero_field() -> Outcome {
    let sigma = 0.0186;
    let ens = DipoleEnsemble::new(MagneticEnvironment::new(Vector3::zeros(), sigma, 31));
    let times: Vec<f64> = (0..=1000).map(|k| 5.0 * k as f64 / 1000.0 / (DEFAULT_GYRO * sigma)).collect();
    let traj = total_moment(&ens, &times).map_err(|e| e.to_string())?;
    let classical_err = times
        .iter()
        .zip(&traj.moments)
        .map(|(t, m)| {
            let u = DEFAULT_GYRO * sigma * t;
            (m.y - (-u * u / 2.0).exp()).abs()
        })
        .fold(0.0, f64::max);

    let model = AtomModel::new(LevelScheme::model_transition()).map_err(|e| e.to_string())?;
    let b = Vector3::zeros();
    let seq = PulseSequence::new(
        FieldSegment::new(
            10.6e-6,
            vec![
                OpticalField::resonant(0.5, SphericalPolarization::x()),
                OpticalField::resonant(0.25, SphericalPolarization::y()),
            ],
            b,
        ),
        FieldSegment::dark(0.0, b),
        FieldSegment::new(5e-6, vec![OpticalField::resonant(0.125, SphericalPolarization::y())], b),
        SphericalPolarization::x(),
    )
    .map_err(|e| e.to_string())?;
    let storage: Vec<f64> = (1..=8).map(|k| 5e-6 * k as f64).collect();
    let traces = run_storage_series(&model, &seq, &b, &storage, &IntegratorConfig::default(), &UnitSystem::default())
        .map_err(|e| e.to_string())?;
    let scale = traces[0].amplitude.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let storage_err = traces[1..]
        .iter()
        .flat_map(|tr| tr.amplitude.iter().zip(&traces[0].amplitude).map(|(a, b)| (a - b).norm() / scale))
        .fold(0.0, f64::max);
    Ok((
        classical_err <= 1e-6 && storage_err <= 1e-10 && scale > 0.0,
        format!("classical M_y error {classical_err:.1e} (31 nodes), B = 0 storage dependence {storage_err:.1e}"),
    ))
}

fn report(n: u32, name: &str, outcome: Outcome) -> bool {
    let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("[{}] {n} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn main() -> ExitCode {
    let mut all = true;
    all &= report(1, "larmor-arithmetic", larmor_arithmetic());

    let fig4 = simulate("fig4");
    let fig5_run = simulate("fig5");
    let fig6_run = simulate("fig6");
    all &= report(2, "fig5-frequency", fig5_run.as_ref().map_err(Clone::clone).and_then(|(o, s)| fig5(o, *s)));
    all &= report(3, "fig6-frequencies", fig6_run.as_ref().map_err(Clone::clone).and_then(|(o, s)| fig6(o, *s)));
    let pair = match (&fig4, &fig6_run) {
        (Ok((a, _)), Ok((b, _))) => anisotropy(a, b),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    all &= report(4, "decay-anisotropy", pair);
    all &= report(5, "fig4-decay-scale", fig4.as_ref().map_err(Clone::clone).and_then(|(o, _)| fig4_scale(o)));
    all &= report(6, "fig3-linearity", fig3());
    all &= report(7, "physics-invariants", invariants());
    all &= report(8, "classical-oracle-and-zero-field", classical_and_zero_field());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
