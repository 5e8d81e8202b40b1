use serde::{Deserialize, Serialize};

use super::PeakSeries;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeModel {
    /// `a·exp(−t/τ) + c`
    Exponential,
    /// `a·exp(−(t/τ)²) + c`
    Gaussian,
}

impl EnvelopeModel {
    pub fn name(self) -> &'static str {
        match self {
            EnvelopeModel::Exponential => "exponential",
            EnvelopeModel::Gaussian => "gaussian",
        }
    }

    pub fn shape(self, t: f64, tau: f64) -> f64 {
        let u = t / tau;
        match self {
            EnvelopeModel::Exponential => (-u).exp(),
            EnvelopeModel::Gaussian => (-u * u).exp(),
        }
    }
}

impl std::fmt::Display for EnvelopeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `τ` is the 1/e time of the decaying part for either model, in the units
/// of the input times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: EnvelopeModel,
    pub tau: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub r_squared: f64,
}

impl FitReport {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * self.model.shape(t, self.tau) + self.offset
    }
}

const GRID: usize = 400;
const MAX_ITER: usize = 200;
const TAU_SPAN_MAX: f64 = 1000.0;
const TAU_SPAN_MIN: f64 = 1e-3;
/// Relative rms variation below which a series counts as undecayed.
const FLAT_TOL: f64 = 1e-6;

/// Best amplitude and offset for fixed τ, and the residual sum of squares.
fn solve_linear(t: &[f64], y: &[f64], tau: f64, model: EnvelopeModel) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let f: Vec<f64> = t.iter().map(|&t| model.shape(t, tau)).collect();
    let fm = f.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sff: f64 = f.iter().map(|v| (v - fm).powi(2)).sum();
    let sfy: f64 = f.iter().zip(y).map(|(a, b)| (a - fm) * (b - ym)).sum();
    let a = if sff > 0.0 { sfy / sff } else { 0.0 };
    let c = ym - a * fm;
    let cost = f.iter().zip(y).map(|(fi, yi)| (a * fi + c - yi).powi(2)).sum();
    (a, c, cost)
}

/// Least-squares fit of one envelope model. Amplitude and offset enter
/// linearly and are eliminated; `ln τ` is found by a log-grid scan followed
/// by golden-section refinement. τ is bounded to `[1e-3, 1e3]` × the time
/// span; a fit pinned at the upper bound means no decay is resolvable. A
/// series flat to 1e-6 relative rms is reported at the upper bound directly.
pub fn fit_model(t: &[f64], y: &[f64], model: EnvelopeModel) -> Result<FitReport> {
    if t.len() != y.len() {
        return Err(Error::Dimension {
            expected: t.len(),
            found: y.len(),
        });
    }
    if t.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: t.len() });
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("envelope fit input"));
    }
    let tmax = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tmin = t.iter().copied().fold(f64::INFINITY, f64::min);
    let span = if tmax > 0.0 { tmax.max(tmax - tmin) } else { tmax - tmin };
    if span.is_nan() || span <= 0.0 {
        return Err(Error::Degenerate("envelope fit needs distinct positive times".into()));
    }
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Degenerate("zero series has no decay time".into()));
    }
    if (ss_tot / y.len() as f64).sqrt() <= FLAT_TOL * scale {
        return Ok(FitReport {
            model,
            tau: span * TAU_SPAN_MAX,
            amplitude: 0.0,
            offset: ym,
            r_squared: 0.0,
        });
    }

    let lo = (span * TAU_SPAN_MIN).ln();
    let hi = (span * TAU_SPAN_MAX).ln();
    let cost_at = |s: f64| solve_linear(t, y, s.exp(), model).2;
    let grid: Vec<f64> = (0..GRID).map(|k| lo + (hi - lo) * k as f64 / (GRID - 1) as f64).collect();
    let costs: Vec<f64> = grid.iter().map(|&s| cost_at(s)).collect();
    let best = (0..GRID)
        .filter(|&k| costs[k].is_finite())
        .min_by(|&a, &b| costs[a].total_cmp(&costs[b]))
        .ok_or(Error::FitNotConverged {
            model: model.name(),
            iterations: 0,
            cost: f64::NAN,
            tau: f64::NAN,
        })?;

    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(GRID - 1)]);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - golden * (b - a);
    let mut x2 = a + golden * (b - a);
    let (mut f1, mut f2) = (cost_at(x1), cost_at(x2));
    let mut iterations = 0;
    while b - a > 1e-10 * (1.0 + a.abs()) {
        if iterations == MAX_ITER {
            return Err(Error::FitNotConverged {
                model: model.name(),
                iterations,
                cost: f1.min(f2),
                tau: (0.5 * (a + b)).exp(),
            });
        }
        iterations += 1;
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = cost_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = cost_at(x2);
        }
    }
    let mut s = 0.5 * (a + b);
    if costs[best] < cost_at(s) {
        s = grid[best];
    }
    let tau = s.exp();
    let (amplitude, offset, cost) = solve_linear(t, y, tau, model);
    if !cost.is_finite() {
        return Err(Error::FitNotConverged {
            model: model.name(),
            iterations,
            cost,
            tau,
        });
    }
    Ok(FitReport {
        model,
        tau,
        amplitude,
        offset,
        r_squared: (1.0 - cost / ss_tot).clamp(0.0, 1.0),
    })
}

const PROMINENCE: f64 = 0.05;
const MIN_MAXIMA: usize = 4;

/// Points to fit: the prominent local maxima of an oscillating series when
/// there are at least four of them, otherwise the whole series.
pub fn upper_envelope(t: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let all = (t.to_vec(), y.to_vec());
    if n < 3 {
        return all;
    }
    let range = y.iter().copied().fold(f64::NEG_INFINITY, f64::max) - y.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = PROMINENCE * range;
    let prominence = |i: usize| {
        let left = (0..i).rev().take_while(|&j| y[j] <= y[i]).map(|j| y[j]).fold(f64::INFINITY, f64::min);
        let right = (i + 1..n).take_while(|&j| y[j] <= y[i]).map(|j| y[j]).fold(f64::INFINITY, f64::min);
        let base = match (left.is_finite(), right.is_finite()) {
            (true, true) => left.max(right),
            (true, false) => left,
            (false, true) => right,
            (false, false) => return 0.0,
        };
        y[i] - base
    };
    let mut maxima: Vec<usize> = (0..n - 1)
        .filter(|&i| (i == 0 || y[i] >= y[i - 1]) && y[i] > y[i + 1])
        .filter(|&i| prominence(i) >= threshold)
        .collect();
    if maxima.len() >= 3 {
        let keep: Vec<usize> = (0..maxima.len())
            .filter(|&k| {
                k == 0 || k + 1 == maxima.len() || !(y[maxima[k]] < y[maxima[k - 1]] && y[maxima[k]] < y[maxima[k + 1]])
            })
            .map(|k| maxima[k])
            .collect();
        maxima = keep;
    }
    if maxima.len() < MIN_MAXIMA {
        return all;
    }
    (maxima.iter().map(|&i| t[i]).collect(), maxima.iter().map(|&i| y[i]).collect())
}

/// Fit both envelope models to the series' upper envelope and return the
/// one with the higher r².
pub fn fit_envelope(series: &PeakSeries) -> Result<FitReport> {
    if series.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: series.len(),
        });
    }
    let (t, y) = upper_envelope(&series.storage_times, &series.peak_intensity);
    let exp = fit_model(&t, &y, EnvelopeModel::Exponential);
    let gauss = fit_model(&t, &y, EnvelopeModel::Gaussian);
    match (exp, gauss) {
        (Ok(e), Ok(g)) => Ok(if g.r_squared > e.r_squared { g } else { e }),
        (Ok(e), Err(_)) => Ok(e),
        (Err(_), Ok(g)) => Ok(g),
        (Err(e), Err(_)) => Err(e),
    }
}
