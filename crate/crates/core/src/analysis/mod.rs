//! Reduction of retrieved traces to the quantities compared across runs:
//! peak series, envelope decay times, oscillation frequencies, line fits.

mod fit;
mod spectrum;

use serde::{Deserialize, Serialize};

use crate::dynamics::RetrievedTrace;
use crate::error::{Error, Result};

pub use fit::{fit_envelope, fit_model, upper_envelope, EnvelopeModel, FitReport};
pub use spectrum::{dominant_frequencies, SpectralPeak, SpectrumReport};

/// Peak of each retrieved pulse versus storage time. Times in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakSeries {
    pub storage_times: Vec<f64>,
    pub peak_intensity: Vec<f64>,
    pub peak_time: Vec<f64>,
}

impl PeakSeries {
    pub fn new(storage_times: Vec<f64>, peak_intensity: Vec<f64>, peak_time: Vec<f64>) -> Result<Self> {
        if storage_times.len() != peak_intensity.len() || storage_times.len() != peak_time.len() {
            return Err(Error::Dimension {
                expected: storage_times.len(),
                found: peak_intensity.len().min(peak_time.len()),
            });
        }
        Ok(PeakSeries {
            storage_times,
            peak_intensity,
            peak_time,
        })
    }

    pub fn len(&self) -> usize {
        self.storage_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage_times.is_empty()
    }
}

/// Maximum intensity of each trace and the instant it occurs; ties go to
/// the earliest sample.
pub fn extract_peaks(traces: &[RetrievedTrace]) -> Result<PeakSeries> {
    let mut st = Vec::with_capacity(traces.len());
    let mut pi = Vec::with_capacity(traces.len());
    let mut pt = Vec::with_capacity(traces.len());
    for (k, tr) in traces.iter().enumerate() {
        if tr.intensity.is_empty() {
            return Err(Error::EmptyTrace(k));
        }
        let mut best = 0;
        for (i, &v) in tr.intensity.iter().enumerate() {
            if v > tr.intensity[best] {
                best = i;
            }
        }
        st.push(tr.storage_time);
        pi.push(tr.intensity[best]);
        pt.push(tr.times[best]);
    }
    PeakSeries::new(st, pi, pt)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear fit input"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * x.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate("all x values are equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}
