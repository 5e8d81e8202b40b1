use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::fit::{fit_model, EnvelopeModel};
use super::PeakSeries;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    /// Hz.
    pub frequency_hz: f64,
    /// Amplitude of the equivalent cosine in the detrended series.
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// At most three peaks, strongest first.
    pub peaks: Vec<SpectralPeak>,
    /// Padded-spectrum bin width, Hz.
    pub resolution_hz: f64,
}

impl SpectrumReport {
    pub fn dominant(&self) -> Option<SpectralPeak> {
        self.peaks.first().copied()
    }
}

const MIN_POINTS: usize = 8;
const PAD: usize = 8;
const MAX_PEAKS: usize = 3;
const TREND_MIN_R2: f64 = 0.5;

/// Subtract a decay trend when one explains most of the variance, then the
/// residual mean.
fn detrend(t: &[f64], y: &[f64]) -> Vec<f64> {
    let trend = [EnvelopeModel::Exponential, EnvelopeModel::Gaussian]
        .into_iter()
        .filter_map(|m| fit_model(t, y, m).ok())
        .filter(|f| f.r_squared >= TREND_MIN_R2)
        .max_by(|a, b| a.r_squared.total_cmp(&b.r_squared));
    let mut r: Vec<f64> = match trend {
        Some(f) => t.iter().zip(y).map(|(&t, &y)| y - f.eval(t)).collect(),
        None => y.to_vec(),
    };
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    r.iter_mut().for_each(|v| *v -= mean);
    r
}

/// Strongest oscillation frequencies of a uniformly sampled peak series.
///
/// The series is detrended, Hann-windowed and zero-padded to at least 8×
/// its length; spectral maxima are refined by quadratic interpolation.
/// Components slower than two cycles over the series are ignored.
pub fn dominant_frequencies(series: &PeakSeries) -> Result<SpectrumReport> {
    let t = &series.storage_times;
    let n = t.len();
    if n < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: n,
        });
    }
    if t.iter().chain(&series.peak_intensity).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectrum input"));
    }
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if dt.is_nan() || dt <= 0.0 || t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::InvalidInput("storage times must be uniformly spaced and increasing".into()));
    }

    let y = detrend(t, &series.peak_intensity);
    let window: Vec<f64> = (0..n).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos())).collect();
    let wsum: f64 = window.iter().sum();
    let m = (PAD * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = (0..m)
        .map(|i| Complex::new(if i < n { y[i] * window[i] } else { 0.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let mag: Vec<f64> = buf[..=m / 2].iter().map(|c| c.norm()).collect();

    let df = 1.0 / (m as f64 * dt);
    let fmin = 2.0 / (t[n - 1] - t[0]);
    let mut peaks: Vec<SpectralPeak> = (1..mag.len() - 1)
        .filter(|&k| mag[k] > mag[k - 1] && mag[k] >= mag[k + 1])
        .filter_map(|k| {
            let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
            let denom = a - 2.0 * b + c;
            let p = if denom != 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
            let f = (k as f64 + p) * df;
            let height = b - 0.25 * (a - c) * p;
            (f >= fmin).then_some(SpectralPeak {
                frequency_hz: f,
                amplitude: 2.0 * height / wsum,
            })
        })
        .collect();
    peaks.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));
    peaks.truncate(MAX_PEAKS);
    Ok(SpectrumReport {
        peaks,
        resolution_hz: df,
    })
}
