use nalgebra::Vector3;

use super::dark::DarkEvolution;
use super::model::AtomModel;
use super::propagate::{propagate_segment, SegmentPropagator};
use super::{DensityMatrix, IntegratorConfig, PulseSequence, RetrievedTrace, UnitSystem};
use crate::error::{Error, Result};

/// Write, store for `sequence.dark.duration`, then read, for one sub-sample
/// in field `b_actual` (gauss). The field overrides every segment's own.
pub fn run_storage_sequence(
    model: &AtomModel,
    sequence: &PulseSequence,
    b_actual: &Vector3<f64>,
    cfg: &IntegratorConfig,
    units: &UnitSystem,
) -> Result<RetrievedTrace> {
    let mut traces = run_storage_series(model, sequence, b_actual, &[sequence.dark.duration], cfg, units)?;
    Ok(traces.remove(0))
}

/// Same as [`run_storage_sequence`] for several storage times (seconds),
/// sharing the write pulse.
pub fn run_storage_series(
    model: &AtomModel,
    sequence: &PulseSequence,
    b_actual: &Vector3<f64>,
    storage_times: &[f64],
    cfg: &IntegratorConfig,
    units: &UnitSystem,
) -> Result<Vec<RetrievedTrace>> {
    sequence.validate()?;
    cfg.validate()?;
    if !b_actual.iter().all(|b| b.is_finite()) {
        return Err(Error::NonFinite("magnetic field"));
    }
    let rho0 = DensityMatrix::ground_mixture(&model.scheme);
    let write = sequence.write.with_b_field(*b_actual);
    let stored = propagate_segment(model, &rho0, &write, units, cfg.dt, usize::MAX, None)?.state;
    storage_series_from_write(model, &stored, sequence, b_actual, storage_times, cfg, units)
}

/// Dark storage and read starting from the state left by the write pulse.
pub fn storage_series_from_write(
    model: &AtomModel,
    written: &DensityMatrix,
    sequence: &PulseSequence,
    b_actual: &Vector3<f64>,
    storage_times: &[f64],
    cfg: &IntegratorConfig,
    units: &UnitSystem,
) -> Result<Vec<RetrievedTrace>> {
    let dark = DarkEvolution::new(model, b_actual, units);
    let read = SegmentPropagator::new(model, &sequence.read.with_b_field(*b_actual), units, cfg.dt)?;
    let detector = model.detector(&sequence.detect_polarization);
    let stride = cfg.stride();
    storage_times
        .iter()
        .map(|&ts| {
            if !(ts.is_finite() && ts >= 0.0) {
                return Err(Error::InvalidInput(format!("storage time must be >= 0, got {ts}")));
            }
            let rho = dark.propagate(written, units.to_gamma_time(ts));
            let out = read.run(&rho, stride, Some(&detector))?;
            let times = out.times.iter().map(|&t| units.to_seconds(t)).collect();
            Ok(RetrievedTrace::new(ts, times, out.samples))
        })
        .collect()
}
