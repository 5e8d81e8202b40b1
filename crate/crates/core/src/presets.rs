//! Named configurations.

use std::path::PathBuf;

use crate::config::{
    ClassicalConfig, DetectionConfig, FieldConfig, IntegratorSettings, MagneticConfig, OutputConfig, PolarizationSpec,
    RunConfig, SchemeConfig, SweepConfig, TimingConfig, UnitsConfig,
};
use crate::dynamics::UnitSystem;
use crate::ensemble::{Sampler, SumMode};
use crate::error::{Error, Result};

pub const G_GROUND: f64 = -0.25;
/// Mean Larmor frequency of the field-on presets, units of Γ.
pub const MEAN_LARMOR_GAMMA: f64 = 0.02;
/// Larmor-frequency spread of the inhomogeneous presets, units of Γ.
pub const SIGMA_LARMOR_GAMMA: f64 = 0.005;
/// Saturation intensity used to turn beam intensities into Rabi frequencies, mW/cm².
pub const SATURATION_INTENSITY: f64 = 1.1;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Which subcommand runs it.
    pub kind: PresetKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetKind {
    Simulate,
    Classical,
    Sweep,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig3",
        description: "Larmor frequency vs field magnitude, mean field along y, no spread",
        kind: PresetKind::Sweep,
    },
    Preset {
        name: "fig4",
        description: "zero mean field, Gaussian spread along x",
        kind: PresetKind::Simulate,
    },
    Preset {
        name: "fig5",
        description: "mean field along x (0.02 Γ), spread along x",
        kind: PresetKind::Simulate,
    },
    Preset {
        name: "fig6",
        description: "mean field along y (0.02 Γ), spread along x",
        kind: PresetKind::Simulate,
    },
    Preset {
        name: "fig7",
        description: "classical dipoles, mean field along z (4σ), spread along x",
        kind: PresetKind::Classical,
    },
    Preset {
        name: "fig7-y",
        description: "classical dipoles, mean field along y (4σ), spread along x",
        kind: PresetKind::Classical,
    },
    Preset {
        name: "fig7-x",
        description: "classical dipoles, mean field along x (4σ), spread along x",
        kind: PresetKind::Classical,
    },
    Preset {
        name: "fig7-zero",
        description: "classical dipoles, zero mean field, spread along x",
        kind: PresetKind::Classical,
    },
    Preset {
        name: "experimental",
        description: "F=3 -> F'=2, circular write pair and read, 0.7 G along x",
        kind: PresetKind::Simulate,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

fn gauss(larmor_gamma: f64) -> f64 {
    UnitSystem::default().gauss_for_larmor(G_GROUND, larmor_gamma)
}

/// Rabi frequency (units of Γ) of a beam of intensity `i` (mW/cm²).
pub fn rabi_from_intensity(i: f64) -> f64 {
    (i / (2.0 * SATURATION_INTENSITY)).sqrt()
}

fn linear(name: &str, mean_direction: [f64; 3], mean_larmor: f64) -> RunConfig {
    let b = gauss(mean_larmor);
    RunConfig {
        scheme: SchemeConfig {
            fg: 1.0,
            fe: 0.0,
            g_ground: G_GROUND,
            g_excited: 0.0,
            decay: 1.0,
        },
        units: UnitsConfig::default(),
        timing: TimingConfig {
            write_us: 10.6,
            read_us: 5.0,
            storage_times_us: (1..=80).map(|k| 0.5 * k as f64).collect(),
        },
        write: vec![FieldConfig::new(0.5, "x"), FieldConfig::new(0.25, "y")],
        read: vec![FieldConfig::new(0.125, "y")],
        detection: DetectionConfig {
            polarization: PolarizationSpec::named("x"),
        },
        magnetic: MagneticConfig {
            mean_gauss: mean_direction.map(|d| d * b),
            sigma_gauss: gauss(SIGMA_LARMOR_GAMMA),
            axis: [1.0, 0.0, 0.0],
            sampler: Sampler::GaussHermite,
            n_samples: 21,
            seed: 0,
        },
        integrator: IntegratorSettings::default(),
        output: OutputConfig {
            dir: PathBuf::from("out").join(name),
            sum: SumMode::Coherent,
        },
        classical: None,
        sweep: None,
    }
}

fn classical(name: &str, mean_direction: [f64; 3]) -> RunConfig {
    let mut c = linear(name, [0.0; 3], 0.0);
    let sigma = c.magnetic.sigma_gauss;
    c.magnetic.mean_gauss = mean_direction.map(|d| d * 4.0 * sigma);
    c.magnetic.n_samples = 101;
    c.classical = Some(ClassicalConfig::default());
    c
}

pub fn config(name: &str) -> Result<RunConfig> {
    let c = match name {
        "fig4" => linear(name, [0.0; 3], 0.0),
        "fig5" => linear(name, [1.0, 0.0, 0.0], MEAN_LARMOR_GAMMA),
        "fig6" => linear(name, [0.0, 1.0, 0.0], MEAN_LARMOR_GAMMA),
        "fig3" => {
            let mut c = linear(name, [0.0; 3], 0.0);
            c.magnetic.sigma_gauss = 0.0;
            c.magnetic.n_samples = 1;
            c.timing.storage_times_us = vec![0.5];
            c.sweep = Some(SweepConfig {
                b_gauss: vec![0.2, 0.4, 0.6, 0.8, 1.0],
                direction: [0.0, 1.0, 0.0],
                periods: 6.0,
                points_per_period: 10,
            });
            c
        }
        "fig7" => classical(name, [0.0, 0.0, 1.0]),
        "fig7-y" => classical(name, [0.0, 1.0, 0.0]),
        "fig7-x" => classical(name, [1.0, 0.0, 0.0]),
        "fig7-zero" => classical(name, [0.0; 3]),
        "experimental" => {
            let mut c = linear(name, [0.0; 3], 0.0);
            c.scheme = SchemeConfig {
                fg: 3.0,
                fe: 2.0,
                g_ground: G_GROUND,
                g_excited: -2.0 / 3.0,
                decay: 1.0,
            };
            c.timing.write_us = 40.0;
            c.timing.storage_times_us = (1..=80).map(|k| 0.25 * k as f64).collect();
            c.write = vec![
                FieldConfig::new(rabi_from_intensity(17.6), "sigma+"),
                FieldConfig::new(rabi_from_intensity(1.1), "sigma-"),
            ];
            c.read = vec![FieldConfig::new(rabi_from_intensity(7.2), "sigma-")];
            c.detection.polarization = PolarizationSpec::named("sigma+");
            c.magnetic.mean_gauss = [0.7, 0.0, 0.0];
            c
        }
        _ => {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            return Err(Error::config("preset", format!("unknown preset {name:?}; available: {}", names.join(", "))));
        }
    };
    c.validate()?;
    Ok(c)
}
