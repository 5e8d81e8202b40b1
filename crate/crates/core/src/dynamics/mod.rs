//! Bloch-equation evolution of one homogeneous sub-sample.
//!
//! Internally every rate is expressed in units of the excited-state decay
//! rate Γ and every time in units of 1/Γ; [`UnitSystem`] converts to and from
//! seconds and gauss at the API boundary.

mod dark;
mod model;
mod propagate;
mod sequence;

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64 as C64;

use crate::atomic::{LevelScheme, SphericalPolarization};
use crate::error::{Error, Result};

pub use dark::{dark_propagator, DarkEvolution, DarkPropagator};
pub use model::{build_hamiltonian, lindblad_derivative, projected_coherence, AtomModel};
pub use propagate::{liouvillian, propagate_segment, rk4_step_operator, SegmentOutput, SegmentPropagator};
pub use sequence::{run_storage_sequence, run_storage_series, storage_series_from_write};

/// Bohr magneton over Planck's constant, Hz per gauss.
pub const MU_B_OVER_H: f64 = 1.399624e6;

/// Γ/2π of the Cs D2 line, Hz.
pub const CS_D2_GAMMA_HZ: f64 = 5.2e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitSystem {
    /// Hz per gauss.
    pub mu_b_over_h: f64,
    /// Γ/2π in Hz.
    pub gamma_hz: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem {
            mu_b_over_h: MU_B_OVER_H,
            gamma_hz: CS_D2_GAMMA_HZ,
        }
    }
}

impl UnitSystem {
    pub fn new(gamma_hz: f64) -> Result<Self> {
        if !(gamma_hz.is_finite() && gamma_hz > 0.0) {
            return Err(Error::InvalidInput(format!("gamma_hz must be > 0, got {gamma_hz}")));
        }
        Ok(UnitSystem {
            mu_b_over_h: MU_B_OVER_H,
            gamma_hz,
        })
    }

    /// Γ in rad/s.
    pub fn gamma(&self) -> f64 {
        2.0 * PI * self.gamma_hz
    }

    pub fn to_gamma_time(&self, seconds: f64) -> f64 {
        seconds * self.gamma()
    }

    pub fn to_seconds(&self, gamma_time: f64) -> f64 {
        gamma_time / self.gamma()
    }

    /// `μ_B B / ħ` in units of Γ for a 1 G field.
    pub fn zeeman_per_gauss(&self) -> f64 {
        self.mu_b_over_h / self.gamma_hz
    }

    /// Field magnitude (gauss) whose Larmor frequency `|g| μ_B B / ħ` equals
    /// `larmor` in units of Γ.
    pub fn gauss_for_larmor(&self, g_factor: f64, larmor: f64) -> f64 {
        larmor / (g_factor.abs() * self.zeeman_per_gauss())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Larmor {
    /// `|Ω_L|` in rad/s.
    pub angular: f64,
    pub frequency_hz: f64,
    /// Seconds; infinite at zero field.
    pub period: f64,
}

pub fn larmor_frequency(g_factor: f64, b_magnitude: f64, units: &UnitSystem) -> Larmor {
    let frequency_hz = g_factor.abs() * units.mu_b_over_h * b_magnitude.abs();
    let angular = 2.0 * PI * frequency_hz;
    let period = if angular == 0.0 { f64::INFINITY } else { 2.0 * PI / angular };
    Larmor {
        angular,
        frequency_hz,
        period,
    }
}

/// A quasi-monochromatic drive. `rabi` and `detuning` are in units of Γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpticalField {
    pub rabi: f64,
    pub polarization: SphericalPolarization,
    pub phase: f64,
    pub detuning: f64,
}

impl OpticalField {
    pub fn resonant(rabi: f64, polarization: SphericalPolarization) -> Self {
        OpticalField {
            rabi,
            polarization,
            phase: 0.0,
            detuning: 0.0,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.rabi.is_finite() && self.rabi >= 0.0) {
            return Err(Error::InvalidInput(format!("Rabi frequency must be >= 0, got {}", self.rabi)));
        }
        if !self.phase.is_finite() || !self.detuning.is_finite() {
            return Err(Error::InvalidInput("phase and detuning must be finite".into()));
        }
        if (self.polarization.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("field polarization must be normalized".into()));
        }
        Ok(())
    }
}

/// Piecewise-constant interval: duration in seconds, field in gauss.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSegment {
    pub duration: f64,
    pub optical_fields: Vec<OpticalField>,
    pub b_field: Vector3<f64>,
}

impl FieldSegment {
    pub fn new(duration: f64, optical_fields: Vec<OpticalField>, b_field: Vector3<f64>) -> Self {
        FieldSegment {
            duration,
            optical_fields,
            b_field,
        }
    }

    pub fn dark(duration: f64, b_field: Vector3<f64>) -> Self {
        Self::new(duration, Vec::new(), b_field)
    }

    pub fn with_b_field(&self, b_field: Vector3<f64>) -> Self {
        FieldSegment {
            b_field,
            ..self.clone()
        }
    }

    /// Common detuning of the segment's fields; zero without fields.
    pub fn detuning(&self) -> Result<f64> {
        let mut it = self.optical_fields.iter().map(|f| f.detuning);
        let Some(first) = it.next() else { return Ok(0.0) };
        if it.any(|d| d != first) {
            return Err(Error::InvalidInput(
                "all optical fields in a segment must share one detuning (single rotating frame)".into(),
            ));
        }
        Ok(first)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    pub write: FieldSegment,
    pub dark: FieldSegment,
    pub read: FieldSegment,
    pub detect_polarization: SphericalPolarization,
}

impl PulseSequence {
    pub fn new(
        write: FieldSegment,
        dark: FieldSegment,
        read: FieldSegment,
        detect_polarization: SphericalPolarization,
    ) -> Result<Self> {
        let seq = PulseSequence {
            write,
            dark,
            read,
            detect_polarization,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, seg) in [("write", &self.write), ("read", &self.read)] {
            if !(seg.duration.is_finite() && seg.duration > 0.0) {
                return Err(Error::InvalidInput(format!("{name} duration must be > 0")));
            }
            if seg.optical_fields.is_empty() {
                return Err(Error::InvalidInput(format!("{name} segment needs at least one optical field")));
            }
            for f in &seg.optical_fields {
                f.validate()?;
            }
            seg.detuning()?;
        }
        if !(self.dark.duration.is_finite() && self.dark.duration >= 0.0) {
            return Err(Error::InvalidInput("storage time must be >= 0".into()));
        }
        if !self.dark.optical_fields.is_empty() {
            return Err(Error::InvalidInput("dark segment must not contain optical fields".into()));
        }
        if (self.detect_polarization.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("detection polarization must be normalized".into()));
        }
        Ok(())
    }

    pub fn with_storage_time(&self, storage_time: f64) -> Self {
        let mut seq = self.clone();
        seq.dark.duration = storage_time;
        seq
    }
}

/// Fixed-step integration settings, in units of 1/Γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub sample_interval: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 0.005,
            sample_interval: 0.05 * 2.0 * PI,
        }
    }
}

impl IntegratorConfig {
    pub fn stride(&self) -> usize {
        ((self.sample_interval / self.dt).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Step(self.dt));
        }
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return Err(Error::InvalidInput("sample interval must be > 0".into()));
        }
        Ok(())
    }
}

/// State of one homogeneous sub-sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(DMatrix<C64>);

impl DensityMatrix {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(DensityMatrix(m))
    }

    /// Uniform incoherent mixture over the ground sublevels.
    pub fn ground_mixture(scheme: &LevelScheme) -> Self {
        let n = scheme.dim();
        let ng = scheme.n_ground();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..ng {
            m[(i, i)] = C64::from(1.0 / ng as f64);
        }
        DensityMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.0 + self.0.adjoint()) * C64::from(0.5);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Sum of excited-state populations.
    pub fn excited_population(&self, scheme: &LevelScheme) -> f64 {
        (scheme.n_ground()..scheme.dim()).map(|i| self.0[(i, i)].re).sum()
    }
}

/// Retrieved signal during one read interval.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievedTrace {
    /// Seconds.
    pub storage_time: f64,
    /// Seconds since the read field turned on.
    pub times: Vec<f64>,
    pub amplitude: Vec<C64>,
    pub intensity: Vec<f64>,
}

impl RetrievedTrace {
    pub fn new(storage_time: f64, times: Vec<f64>, amplitude: Vec<C64>) -> Self {
        let intensity = amplitude.iter().map(|a| a.norm_sqr()).collect();
        RetrievedTrace {
            storage_time,
            times,
            amplitude,
            intensity,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
