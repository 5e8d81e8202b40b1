//! End-to-end runs: simulate, classical, sweep and analyze, with their
//! output files and manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    dominant_frequencies, extract_peaks, fit_envelope, fit_model, linear_fit, upper_envelope, EnvelopeModel,
    FitReport, LinearFit, PeakSeries, SpectrumReport,
};
use crate::classical::{total_moment, MomentTrajectory};
use crate::config::RunConfig;
use crate::dynamics::{larmor_frequency, RetrievedTrace};
use crate::ensemble::{run_ensemble, SumMode};
use crate::error::{Error, Result};
use crate::io::{self, CsvKind, SweepRow};

pub const TOOL: &str = "zms";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFits {
    pub selected: Option<FitReport>,
    pub exponential: Option<FitReport>,
    pub gaussian: Option<FitReport>,
}

/// Both envelope models on the series' upper envelope.
pub fn envelope_fits(peaks: &PeakSeries) -> EnvelopeFits {
    if peaks.len() < 4 {
        return EnvelopeFits {
            selected: None,
            exponential: None,
            gaussian: None,
        };
    }
    let (t, y) = upper_envelope(&peaks.storage_times, &peaks.peak_intensity);
    EnvelopeFits {
        selected: fit_envelope(peaks).ok(),
        exponential: fit_model(&t, &y, EnvelopeModel::Exponential).ok(),
        gaussian: fit_model(&t, &y, EnvelopeModel::Gaussian).ok(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOutput {
    /// Normalized so the first trace peaks at 1.
    pub traces: Vec<RetrievedTrace>,
    pub peaks: PeakSeries,
    pub fits: EnvelopeFits,
    pub spectrum: Option<SpectrumReport>,
    /// Factor applied to raw intensities.
    pub scale: f64,
}

/// Scale intensities so the maximum over the first trace is 1 (amplitudes by
/// the square root). Returns the factor; all-zero signals are left as is.
pub fn normalize(traces: &mut [RetrievedTrace]) -> f64 {
    let max = traces
        .first()
        .map(|t| t.intensity.iter().copied().fold(0.0, f64::max))
        .unwrap_or(0.0);
    if !(max > 0.0 && max.is_finite()) {
        return 1.0;
    }
    let scale = 1.0 / max;
    let amp_scale = scale.sqrt();
    for tr in traces.iter_mut() {
        tr.intensity.iter_mut().for_each(|i| *i *= scale);
        tr.amplitude.iter_mut().for_each(|a| *a *= amp_scale);
    }
    scale
}

fn check_outputs(traces: &[RetrievedTrace]) -> Result<()> {
    let finite = traces.iter().all(|t| {
        t.intensity.iter().all(|v| v.is_finite()) && t.amplitude.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    });
    if finite {
        Ok(())
    } else {
        Err(Error::NonFinite("ensemble output"))
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let result = run_ensemble(
        &cfg.level_scheme()?,
        &cfg.pulse_sequence()?,
        &cfg.environment()?,
        &cfg.storage_times(),
        &cfg.integrator_config(),
        &cfg.unit_system()?,
        cfg.output.sum,
    )?;
    let mut traces = result.traces;
    check_outputs(&traces)?;
    let scale = normalize(&mut traces);
    let peaks = extract_peaks(&traces)?;
    let fits = envelope_fits(&peaks);
    let spectrum = dominant_frequencies(&peaks).ok();
    Ok(SimulationOutput {
        traces,
        peaks,
        fits,
        spectrum,
        scale,
    })
}

pub fn classical(cfg: &RunConfig) -> Result<MomentTrajectory> {
    let c = cfg.classical_settings();
    let times: Vec<f64> = (0..c.n_times)
        .map(|k| c.t_max_us * 1e-6 * k as f64 / (c.n_times - 1) as f64)
        .collect();
    total_moment(&cfg.dipole_ensemble()?, &times)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub fit: LinearFit,
}

/// Retrieved amplitude at each intensity peak, projected on the phase of the
/// first nonzero one. Unlike the intensity it keeps the sign of the stored
/// coherence, so an aligned state oscillates at the Larmor frequency rather
/// than twice it.
pub fn coherence_series(traces: &[RetrievedTrace], peaks: &PeakSeries) -> Result<PeakSeries> {
    let amps: Vec<_> = traces
        .iter()
        .zip(&peaks.peak_time)
        .map(|(tr, &t)| {
            let i = tr.times.iter().position(|&x| x == t).unwrap_or(0);
            tr.amplitude[i]
        })
        .collect();
    let reference = amps
        .iter()
        .find(|a| a.norm() > 0.0)
        .map(|a| a.conj() / a.norm())
        .unwrap_or(num_complex::Complex64::new(1.0, 0.0));
    PeakSeries::new(
        peaks.storage_times.clone(),
        amps.iter().map(|a| (a * reference).re).collect(),
        peaks.peak_time.clone(),
    )
}

/// Storage-time grid for one sweep point: `points_per_period` samples per
/// Larmor period over `periods` periods, starting one step after zero.
pub fn sweep_storage_times(cfg: &RunConfig, b: f64) -> Result<Vec<f64>> {
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep", "a [sweep] section is required"))?;
    let units = cfg.unit_system()?;
    let period = larmor_frequency(cfg.scheme.g_ground, b, &units).period;
    if !period.is_finite() {
        return Err(Error::config("scheme.g_ground", "sweep needs a nonzero ground g-factor"));
    }
    let step = period / s.points_per_period as f64;
    let count = (s.periods * s.points_per_period as f64).round() as usize;
    Ok((1..=count).map(|k| k as f64 * step).collect())
}

pub fn sweep(cfg: &RunConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let s = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::config("sweep", "a [sweep] section is required"))?;
    let scheme = cfg.level_scheme()?;
    let units = cfg.unit_system()?;
    let integrator = cfg.integrator_config();
    let direction = Vector3::from(s.direction).normalize();
    let mut rows = Vec::with_capacity(s.b_gauss.len());
    for &b in &s.b_gauss {
        let mut env = cfg.environment()?;
        env.mean = direction * b;
        let mut seq = cfg.pulse_sequence()?;
        for seg in [&mut seq.write, &mut seq.dark, &mut seq.read] {
            seg.b_field = env.mean;
        }
        let times = sweep_storage_times(cfg, b)?;
        let mut traces = run_ensemble(&scheme, &seq, &env, &times, &integrator, &units, cfg.output.sum)?.traces;
        check_outputs(&traces)?;
        normalize(&mut traces);
        let peaks = extract_peaks(&traces)?;
        let spec = dominant_frequencies(&coherence_series(&traces, &peaks)?)?;
        let Some(main) = spec.dominant() else {
            return Err(Error::Degenerate(format!("no oscillation found at {b} G")));
        };
        let intensity = dominant_frequencies(&peaks).ok();
        let fit = fit_envelope(&peaks).ok();
        rows.push(SweepRow {
            b_gauss: b,
            freq_hz: main.frequency_hz,
            freq2_hz: intensity.as_ref().and_then(|s| s.dominant()).map(|p| p.frequency_hz),
            tau_us: fit.map(|f| f.tau * 1e6),
            model: fit.map(|f| f.model.name().to_string()),
        });
    }
    let b: Vec<f64> = rows.iter().map(|r| r.b_gauss).collect();
    let f: Vec<f64> = rows.iter().map(|r| r.freq_hz).collect();
    let fit = linear_fit(&b, &f)?;
    Ok(SweepOutput { rows, fit })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub gamma_hz: f64,
    pub mean_field_gauss: f64,
    pub sigma_gauss: f64,
    /// `|g_ground| μ_B |B̄| / ħ`, rad/s.
    pub larmor_angular: f64,
    pub larmor_hz: f64,
    /// Absent at zero mean field.
    pub larmor_period_us: Option<f64>,
    pub sigma_larmor_hz: f64,
    pub mean_larmor_gamma: f64,
    pub sigma_larmor_gamma: f64,
}

pub fn derived(cfg: &RunConfig) -> Result<Derived> {
    let units = cfg.unit_system()?;
    let g = cfg.scheme.g_ground;
    let b = Vector3::from(cfg.magnetic.mean_gauss).norm();
    let l = larmor_frequency(g, b, &units);
    let s = larmor_frequency(g, cfg.magnetic.sigma_gauss, &units);
    Ok(Derived {
        gamma_hz: units.gamma_hz,
        mean_field_gauss: b,
        sigma_gauss: cfg.magnetic.sigma_gauss,
        larmor_angular: l.angular,
        larmor_hz: l.frequency_hz,
        larmor_period_us: l.period.is_finite().then_some(l.period * 1e6),
        sigma_larmor_hz: s.frequency_hz,
        mean_larmor_gamma: l.frequency_hz / units.gamma_hz,
        sigma_larmor_gamma: s.frequency_hz / units.gamma_hz,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Resolved configuration as TOML; feeding it back reproduces the run.
    pub config: String,
    pub seed: u64,
    pub sampler: String,
    pub n_samples: usize,
    pub sum: SumMode,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
    pub derived: Derived,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeFits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_fit: Option<LinearFit>,
    /// File name → sha256 hex digest.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
    }
}

/// Load a run configuration from a TOML file or a previous run's manifest.json.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    if path.extension().is_some_and(|e| e == "json") {
        RunConfig::from_toml_str(&RunManifest::read(path)?.config)
    } else {
        RunConfig::from_path(path)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Collects output files and writes the manifest last.
pub struct RunRecorder {
    dir: PathBuf,
    command: String,
    started: Instant,
    started_unix_s: u64,
    files: Vec<String>,
}

impl RunRecorder {
    pub fn start(dir: &Path, command: &str) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(RunRecorder {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            started: Instant::now(),
            started_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            files: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn manifest(&self, cfg: &RunConfig) -> Result<RunManifest> {
        let mut outputs = BTreeMap::new();
        for f in &self.files {
            outputs.insert(f.clone(), sha256_file(&self.dir.join(f))?);
        }
        Ok(RunManifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: self.command.clone(),
            config: cfg.to_toml_string()?,
            seed: cfg.magnetic.seed,
            sampler: format!("{:?}", cfg.magnetic.sampler),
            n_samples: cfg.magnetic.n_samples,
            sum: cfg.output.sum,
            started_unix_s: self.started_unix_s,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
            derived: derived(cfg)?,
            intensity_scale: None,
            envelope: None,
            spectrum: None,
            linear_fit: None,
            outputs,
        })
    }

    pub fn finish(self, cfg: &RunConfig, fill: impl FnOnce(&mut RunManifest)) -> Result<RunManifest> {
        let mut m = self.manifest(cfg)?;
        fill(&mut m);
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::config("manifest", e.to_string()))?;
        io::write_text(&self.dir.join("manifest.json"), &(text + "\n"))?;
        Ok(m)
    }
}

fn write_resolved(rec: &mut RunRecorder, cfg: &RunConfig) -> Result<()> {
    io::write_text(&rec.path("config.resolved.toml"), &cfg.to_toml_string()?)
}

pub fn write_simulation(mut rec: RunRecorder, cfg: &RunConfig, out: &SimulationOutput) -> Result<RunManifest> {
    io::write_traces(&rec.path("traces.csv"), &out.traces)?;
    io::write_peaks(&rec.path("peaks.csv"), &out.peaks)?;
    write_resolved(&mut rec, cfg)?;
    rec.finish(cfg, |m| {
        m.intensity_scale = Some(out.scale);
        m.envelope = Some(out.fits.clone());
        m.spectrum = out.spectrum.clone();
    })
}

/// Run `simulate` and write traces.csv, peaks.csv, config.resolved.toml and
/// manifest.json into `dir`.
pub fn simulate_to_dir(cfg: &RunConfig, dir: &Path) -> Result<(SimulationOutput, RunManifest)> {
    let rec = RunRecorder::start(dir, "simulate")?;
    let out = simulate(cfg)?;
    let m = write_simulation(rec, cfg, &out)?;
    Ok((out, m))
}

pub fn classical_to_dir(cfg: &RunConfig, dir: &Path) -> Result<(MomentTrajectory, RunManifest)> {
    let mut rec = RunRecorder::start(dir, "classical")?;
    let traj = classical(cfg)?;
    io::write_classical(&rec.path("classical.csv"), &traj)?;
    write_resolved(&mut rec, cfg)?;
    let peaks = PeakSeries::new(traj.times.clone(), traj.magnitude(), vec![0.0; traj.times.len()])?;
    let fits = envelope_fits(&peaks);
    let m = rec.finish(cfg, |m| m.envelope = Some(fits))?;
    Ok((traj, m))
}

pub fn sweep_to_dir(cfg: &RunConfig, dir: &Path) -> Result<(SweepOutput, RunManifest)> {
    let mut rec = RunRecorder::start(dir, "sweep")?;
    let out = sweep(cfg)?;
    io::write_sweep(&rec.path("sweep.csv"), &out.rows)?;
    write_resolved(&mut rec, cfg)?;
    let m = rec.finish(cfg, |m| m.linear_fit = Some(out.fit))?;
    Ok((out, m))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub input: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peaks: Option<PeakSeries>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeFits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_fit: Option<LinearFit>,
}

/// Apply the analysis chain matching the CSV's header.
pub fn analyze(path: &Path) -> Result<AnalysisReport> {
    let kind = io::detect_kind(path)?;
    let mut report = AnalysisReport {
        input: path.display().to_string(),
        kind: format!("{kind:?}").to_lowercase(),
        peaks: None,
        envelope: None,
        spectrum: None,
        linear_fit: None,
    };
    let peaks = match kind {
        CsvKind::Traces => Some(extract_peaks(&io::read_traces(path)?)?),
        CsvKind::Peaks => Some(io::read_peaks(path)?),
        CsvKind::Classical => {
            let rows = io::parse_classical(std::fs::File::open(path).map_err(|e| Error::io(path, e))?, &report.input)?;
            Some(PeakSeries::new(
                rows.iter().map(|r| r.t_us * 1e-6).collect(),
                rows.iter().map(|r| (r.mx * r.mx + r.my * r.my + r.mz * r.mz).sqrt()).collect(),
                vec![0.0; rows.len()],
            )?)
        }
        CsvKind::Sweep => {
            let rows = io::read_sweep(path)?;
            let b: Vec<f64> = rows.iter().map(|r| r.b_gauss).collect();
            let f: Vec<f64> = rows.iter().map(|r| r.freq_hz).collect();
            report.linear_fit = Some(linear_fit(&b, &f)?);
            None
        }
    };
    if let Some(p) = peaks {
        report.envelope = Some(envelope_fits(&p));
        report.spectrum = dominant_frequencies(&p).ok();
        report.peaks = Some(p);
    }
    Ok(report)
}

pub fn analyze_to_dir(path: &Path, dir: &Path) -> Result<AnalysisReport> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report = analyze(path)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::config("analysis", e.to_string()))?;
    io::write_text(&dir.join("analysis.json"), &(text + "\n"))?;
    Ok(report)
}
