//! Run configuration: a TOML document, validated into [`RunConfig`].
//!
//! Physics-critical values (Rabi frequencies, field spread, mean field) have
//! no defaults; everything else falls back to the documented default.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::atomic::{spherical_components, LevelScheme, SphericalPolarization};
use crate::classical::{DipoleEnsemble, DEFAULT_GYRO};
use crate::dynamics::{FieldSegment, IntegratorConfig, OpticalField, PulseSequence, UnitSystem, CS_D2_GAMMA_HZ};
use crate::ensemble::{MagneticEnvironment, Sampler, SumMode};
use crate::error::{Error, Result};

/// A named polarization or a complex Cartesian vector `[[re, im]; 3]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolarizationSpec {
    Named(String),
    Cartesian([[f64; 2]; 3]),
}

impl PolarizationSpec {
    pub fn named(s: &str) -> Self {
        PolarizationSpec::Named(s.to_string())
    }

    pub fn resolve(&self) -> Result<SphericalPolarization> {
        match self {
            PolarizationSpec::Named(n) => match n.to_ascii_lowercase().as_str() {
                "x" => Ok(SphericalPolarization::x()),
                "y" => Ok(SphericalPolarization::y()),
                "z" => Ok(SphericalPolarization::z()),
                "sigma+" | "sigma_plus" => Ok(SphericalPolarization::sigma(1)),
                "sigma-" | "sigma_minus" => Ok(SphericalPolarization::sigma(-1)),
                _ => Err(Error::InvalidInput(format!(
                    "unknown polarization {n:?} (expected x, y, z, sigma+, sigma- or [[re, im], [re, im], [re, im]])"
                ))),
            },
            PolarizationSpec::Cartesian(v) => {
                let c = Vector3::new(C64::new(v[0][0], v[0][1]), C64::new(v[1][0], v[1][1]), C64::new(v[2][0], v[2][1]));
                spherical_components(c)?.normalized()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub fg: f64,
    pub fe: f64,
    pub g_ground: f64,
    #[serde(default)]
    pub g_excited: f64,
    /// Excited-state decay rate in units of Γ.
    #[serde(default = "one")]
    pub decay: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsConfig {
    #[serde(default = "default_gamma_hz")]
    pub gamma_hz: f64,
}

fn default_gamma_hz() -> f64 {
    CS_D2_GAMMA_HZ
}

impl Default for UnitsConfig {
    fn default() -> Self {
        UnitsConfig {
            gamma_hz: CS_D2_GAMMA_HZ,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTiming {
    #[serde(default = "default_write_us")]
    write_us: f64,
    #[serde(default = "default_read_us")]
    read_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    storage_times_us: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    storage_grid_us: Option<StorageGrid>,
}

fn default_write_us() -> f64 {
    10.6
}

fn default_read_us() -> f64 {
    5.0
}

/// Durations in microseconds.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingConfig {
    pub write_us: f64,
    pub read_us: f64,
    pub storage_times_us: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Units of Γ.
    pub rabi: f64,
    pub polarization: PolarizationSpec,
    #[serde(default)]
    pub phase: f64,
    /// Units of Γ.
    #[serde(default)]
    pub detuning: f64,
}

impl FieldConfig {
    pub fn new(rabi: f64, polarization: &str) -> Self {
        FieldConfig {
            rabi,
            polarization: PolarizationSpec::named(polarization),
            phase: 0.0,
            detuning: 0.0,
        }
    }

    fn resolve(&self) -> Result<OpticalField> {
        Ok(OpticalField {
            rabi: self.rabi,
            polarization: self.polarization.resolve()?,
            phase: self.phase,
            detuning: self.detuning,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    pub polarization: PolarizationSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMagnetic {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_gauss: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_larmor_gamma: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_gauss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_larmor_gamma: Option<f64>,
    #[serde(default = "x_axis")]
    axis: [f64; 3],
    #[serde(default = "default_sampler")]
    sampler: Sampler,
    #[serde(default = "default_n_samples")]
    n_samples: usize,
    #[serde(default)]
    seed: u64,
}

fn x_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

fn y_axis() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn default_sampler() -> Sampler {
    Sampler::GaussHermite
}

fn default_n_samples() -> usize {
    21
}

/// Fields in gauss.
#[derive(Clone, Debug, PartialEq)]
pub struct MagneticConfig {
    pub mean_gauss: [f64; 3],
    pub sigma_gauss: f64,
    pub axis: [f64; 3],
    pub sampler: Sampler,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    #[serde(default = "default_dt")]
    pub dt_gamma: f64,
    #[serde(default = "default_interval")]
    pub sample_interval_gamma: f64,
}

fn default_dt() -> f64 {
    IntegratorConfig::default().dt
}

fn default_interval() -> f64 {
    IntegratorConfig::default().sample_interval
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            dt_gamma: default_dt(),
            sample_interval_gamma: default_interval(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub sum: SumMode,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            sum: SumMode::Coherent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    #[serde(default = "y_axis")]
    pub mu0: [f64; 3],
    /// rad/s per gauss.
    #[serde(default = "default_gyro")]
    pub gyro: f64,
    #[serde(default = "default_t_max")]
    pub t_max_us: f64,
    #[serde(default = "default_n_times")]
    pub n_times: usize,
}

fn default_gyro() -> f64 {
    DEFAULT_GYRO
}

fn default_t_max() -> f64 {
    40.0
}

fn default_n_times() -> usize {
    801
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig {
            mu0: y_axis(),
            gyro: DEFAULT_GYRO,
            t_max_us: default_t_max(),
            n_times: default_n_times(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub b_gauss: Vec<f64>,
    #[serde(default = "y_axis")]
    pub direction: [f64; 3],
    /// Storage span per field, in Larmor periods.
    #[serde(default = "default_periods")]
    pub periods: f64,
    #[serde(default = "default_points_per_period")]
    pub points_per_period: usize,
}

fn default_periods() -> f64 {
    6.0
}

fn default_points_per_period() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scheme: SchemeConfig,
    #[serde(default)]
    units: UnitsConfig,
    timing: RawTiming,
    write: Vec<FieldConfig>,
    read: Vec<FieldConfig>,
    detection: DetectionConfig,
    magnetic: RawMagnetic,
    #[serde(default)]
    integrator: IntegratorSettings,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classical: Option<ClassicalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepConfig>,
}

/// Fully resolved run description. Serializes to a TOML document that
/// parses back to an equal value.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scheme: SchemeConfig,
    pub units: UnitsConfig,
    pub timing: TimingConfig,
    pub write: Vec<FieldConfig>,
    pub read: Vec<FieldConfig>,
    pub detection: DetectionConfig,
    pub magnetic: MagneticConfig,
    pub integrator: IntegratorSettings,
    pub output: OutputConfig,
    pub classical: Option<ClassicalConfig>,
    pub sweep: Option<SweepConfig>,
}

fn finite(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(field, format!("must be finite, got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(field, format!("must be > 0, got {v}")))
    }
}

fn unit_vector(field: &str, v: [f64; 3]) -> Result<Vector3<f64>> {
    let u = Vector3::from(v);
    if !u.iter().all(|x| x.is_finite()) || u.norm() == 0.0 {
        return Err(Error::config(field, "must be a finite nonzero vector"));
    }
    Ok(u.normalize())
}

fn at(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(field, other.to_string()),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let location = e
                .span()
                .map(|s| {
                    let line = text.as_bytes()[..s.start.min(text.len())].iter().filter(|&&b| b == b'\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "document".into());
            Error::config(location, message)
        })?;
        Self::resolve(raw)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.to_raw()).map_err(|e| Error::config("serialize", e.to_string()))
    }

    fn resolve(raw: RawConfig) -> Result<Self> {
        let storage_times_us = match (raw.timing.storage_times_us, raw.timing.storage_grid_us) {
            (Some(list), None) => list,
            (None, Some(g)) => {
                if g.count == 0 {
                    return Err(Error::config("timing.storage_grid_us.count", "must be >= 1"));
                }
                finite("timing.storage_grid_us.start", g.start)?;
                positive("timing.storage_grid_us.step", g.step)?;
                (0..g.count).map(|k| g.start + g.step * k as f64).collect()
            }
            (None, None) => {
                return Err(Error::config("timing", "one of storage_times_us or storage_grid_us is required"))
            }
            (Some(_), Some(_)) => {
                return Err(Error::config("timing", "give storage_times_us or storage_grid_us, not both"))
            }
        };
        let units = UnitSystem::new(raw.units.gamma_hz).map_err(at("units.gamma_hz"))?;
        let scheme = LevelScheme::new(raw.scheme.fg, raw.scheme.fe, raw.scheme.g_ground, raw.scheme.g_excited)
            .map_err(at("scheme"))?;

        let m = raw.magnetic;
        let larmor_to_gauss = |field: &str, v: f64| -> Result<f64> {
            if scheme.g_ground == 0.0 {
                return Err(Error::config(field, "needs a nonzero g_ground"));
            }
            Ok(units.gauss_for_larmor(scheme.g_ground, v))
        };
        let mean_gauss = match (m.mean_gauss, m.mean_larmor_gamma) {
            (Some(b), None) => b,
            (None, Some(l)) => [
                larmor_to_gauss("magnetic.mean_larmor_gamma", l[0])?,
                larmor_to_gauss("magnetic.mean_larmor_gamma", l[1])?,
                larmor_to_gauss("magnetic.mean_larmor_gamma", l[2])?,
            ],
            (None, None) => {
                return Err(Error::config("magnetic", "mean field is required (mean_gauss or mean_larmor_gamma)"))
            }
            (Some(_), Some(_)) => {
                return Err(Error::config("magnetic", "give mean_gauss or mean_larmor_gamma, not both"))
            }
        };
        let sigma_gauss = match (m.sigma_gauss, m.sigma_larmor_gamma) {
            (Some(s), None) => s,
            (None, Some(l)) => larmor_to_gauss("magnetic.sigma_larmor_gamma", l)?,
            (None, None) => {
                return Err(Error::config("magnetic", "field spread is required (sigma_gauss or sigma_larmor_gamma)"))
            }
            (Some(_), Some(_)) => {
                return Err(Error::config("magnetic", "give sigma_gauss or sigma_larmor_gamma, not both"))
            }
        };
        let cfg = RunConfig {
            scheme: raw.scheme,
            units: raw.units,
            timing: TimingConfig {
                write_us: raw.timing.write_us,
                read_us: raw.timing.read_us,
                storage_times_us,
            },
            write: raw.write,
            read: raw.read,
            detection: raw.detection,
            magnetic: MagneticConfig {
                mean_gauss,
                sigma_gauss,
                axis: m.axis,
                sampler: m.sampler,
                n_samples: m.n_samples,
                seed: m.seed,
            },
            integrator: raw.integrator,
            output: raw.output,
            classical: raw.classical,
            sweep: raw.sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn to_raw(&self) -> RawConfig {
        RawConfig {
            scheme: self.scheme.clone(),
            units: self.units.clone(),
            timing: RawTiming {
                write_us: self.timing.write_us,
                read_us: self.timing.read_us,
                storage_times_us: Some(self.timing.storage_times_us.clone()),
                storage_grid_us: None,
            },
            write: self.write.clone(),
            read: self.read.clone(),
            detection: self.detection.clone(),
            magnetic: RawMagnetic {
                mean_gauss: Some(self.magnetic.mean_gauss),
                mean_larmor_gamma: None,
                sigma_gauss: Some(self.magnetic.sigma_gauss),
                sigma_larmor_gamma: None,
                axis: self.magnetic.axis,
                sampler: self.magnetic.sampler,
                n_samples: self.magnetic.n_samples,
                seed: self.magnetic.seed,
            },
            integrator: self.integrator.clone(),
            output: self.output.clone(),
            classical: self.classical.clone(),
            sweep: self.sweep.clone(),
        }
    }

    /// Check every field, reporting the first problem with its path.
    pub fn validate(&self) -> Result<()> {
        self.level_scheme()?;
        self.unit_system()?;
        positive("timing.write_us", self.timing.write_us)?;
        positive("timing.read_us", self.timing.read_us)?;
        if self.timing.storage_times_us.is_empty() {
            return Err(Error::config("timing.storage_times_us", "must not be empty"));
        }
        for (i, &t) in self.timing.storage_times_us.iter().enumerate() {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::config(format!("timing.storage_times_us[{i}]"), format!("must be >= 0, got {t}")));
            }
        }
        for (name, fields) in [("write", &self.write), ("read", &self.read)] {
            if fields.is_empty() {
                return Err(Error::config(name, "at least one optical field is required"));
            }
            for (i, f) in fields.iter().enumerate() {
                let path = format!("{name}[{i}]");
                if !(f.rabi.is_finite() && f.rabi >= 0.0) {
                    return Err(Error::config(format!("{path}.rabi"), format!("must be >= 0, got {}", f.rabi)));
                }
                finite(&format!("{path}.phase"), f.phase)?;
                finite(&format!("{path}.detuning"), f.detuning)?;
                f.polarization.resolve().map_err(at(&format!("{path}.polarization")))?;
            }
            if fields.iter().any(|f| f.detuning != fields[0].detuning) {
                return Err(Error::config(name, "all fields in a segment must share one detuning"));
            }
        }
        self.detection.polarization.resolve().map_err(at("detection.polarization"))?;
        let m = &self.magnetic;
        for (i, b) in m.mean_gauss.iter().enumerate() {
            finite(&format!("magnetic.mean_gauss[{i}]"), *b)?;
        }
        if !(m.sigma_gauss.is_finite() && m.sigma_gauss >= 0.0) {
            return Err(Error::config("magnetic.sigma_gauss", format!("must be >= 0, got {}", m.sigma_gauss)));
        }
        unit_vector("magnetic.axis", m.axis)?;
        if m.n_samples == 0 {
            return Err(Error::config("magnetic.n_samples", "must be >= 1"));
        }
        // TOML integers are signed 64-bit
        if m.seed > i64::MAX as u64 {
            return Err(Error::config("magnetic.seed", format!("must be <= {}", i64::MAX)));
        }
        positive("integrator.dt_gamma", self.integrator.dt_gamma)?;
        positive("integrator.sample_interval_gamma", self.integrator.sample_interval_gamma)?;
        if let Some(c) = &self.classical {
            unit_vector("classical.mu0", c.mu0)?;
            if !(c.gyro.is_finite() && c.gyro != 0.0) {
                return Err(Error::config("classical.gyro", "must be finite and nonzero"));
            }
            positive("classical.t_max_us", c.t_max_us)?;
            if c.n_times < 2 {
                return Err(Error::config("classical.n_times", "must be >= 2"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.b_gauss.len() < 2 {
                return Err(Error::config("sweep.b_gauss", "at least two field magnitudes are required"));
            }
            for (i, &b) in s.b_gauss.iter().enumerate() {
                positive(&format!("sweep.b_gauss[{i}]"), b)?;
            }
            unit_vector("sweep.direction", s.direction)?;
            positive("sweep.periods", s.periods)?;
            if s.points_per_period < 2 {
                return Err(Error::config("sweep.points_per_period", "must be >= 2"));
            }
        }
        Ok(())
    }

    pub fn level_scheme(&self) -> Result<LevelScheme> {
        LevelScheme::new(self.scheme.fg, self.scheme.fe, self.scheme.g_ground, self.scheme.g_excited)
            .and_then(|s| s.with_decay(self.scheme.decay))
            .map_err(at("scheme"))
    }

    pub fn unit_system(&self) -> Result<UnitSystem> {
        UnitSystem::new(self.units.gamma_hz).map_err(at("units.gamma_hz"))
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.integrator.dt_gamma,
            sample_interval: self.integrator.sample_interval_gamma,
        }
    }

    pub fn storage_times(&self) -> Vec<f64> {
        self.timing.storage_times_us.iter().map(|t| t * 1e-6).collect()
    }

    /// Sequence template; the storage duration is the first storage time
    /// and all segments carry the mean field.
    pub fn pulse_sequence(&self) -> Result<PulseSequence> {
        let b = Vector3::from(self.magnetic.mean_gauss);
        let fields = |name: &str, list: &[FieldConfig]| -> Result<Vec<OpticalField>> {
            list.iter()
                .enumerate()
                .map(|(i, f)| f.resolve().map_err(at(&format!("{name}[{i}]"))))
                .collect()
        };
        PulseSequence::new(
            FieldSegment::new(self.timing.write_us * 1e-6, fields("write", &self.write)?, b),
            FieldSegment::dark(self.storage_times()[0], b),
            FieldSegment::new(self.timing.read_us * 1e-6, fields("read", &self.read)?, b),
            self.detection.polarization.resolve().map_err(at("detection.polarization"))?,
        )
        .map_err(at("sequence"))
    }

    pub fn environment(&self) -> Result<MagneticEnvironment> {
        let m = &self.magnetic;
        let env = MagneticEnvironment {
            mean: Vector3::from(m.mean_gauss),
            inhom_axis: unit_vector("magnetic.axis", m.axis)?,
            sigma: m.sigma_gauss,
            sampler: m.sampler,
            n_samples: m.n_samples,
            seed: m.seed,
        };
        env.validate().map_err(at("magnetic"))?;
        Ok(env)
    }

    pub fn classical_settings(&self) -> ClassicalConfig {
        self.classical.clone().unwrap_or_default()
    }

    pub fn dipole_ensemble(&self) -> Result<DipoleEnsemble> {
        let c = self.classical_settings();
        Ok(DipoleEnsemble {
            mu0: unit_vector("classical.mu0", c.mu0)?,
            gyro: c.gyro,
            env: self.environment()?,
        })
    }

    /// Larmor angular frequency `|g_ground| μ_B |B̄| / ħ` of the mean field, rad/s.
    pub fn mean_larmor(&self) -> f64 {
        let units = self.unit_system().unwrap_or_default();
        2.0 * PI * self.scheme.g_ground.abs() * units.mu_b_over_h * Vector3::from(self.magnetic.mean_gauss).norm()
    }
}
