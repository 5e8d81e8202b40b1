//! Inhomogeneous sample as a weighted set of homogeneous sub-samples.

use nalgebra::{DMatrix, SymmetricEigen, Vector3};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic::LevelScheme;
use crate::dynamics::{run_storage_series, AtomModel, IntegratorConfig, PulseSequence, RetrievedTrace, UnitSystem};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    #[serde(alias = "gh")]
    GaussHermite,
    #[serde(alias = "mc")]
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumMode {
    /// Sum amplitudes, then take the modulus squared.
    #[default]
    Coherent,
    /// Sum per-sub-sample intensities.
    Incoherent,
}

/// Mean field plus a Gaussian spread of magnitude along one fixed axis.
#[derive(Clone, Debug, PartialEq)]
pub struct MagneticEnvironment {
    /// Gauss.
    pub mean: Vector3<f64>,
    pub inhom_axis: Vector3<f64>,
    /// Standard deviation in gauss.
    pub sigma: f64,
    pub sampler: Sampler,
    pub n_samples: usize,
    pub seed: u64,
}

impl MagneticEnvironment {
    /// Gauss–Hermite environment with spread along x̂.
    pub fn new(mean: Vector3<f64>, sigma: f64, n_samples: usize) -> Self {
        MagneticEnvironment {
            mean,
            inhom_axis: Vector3::x(),
            sigma,
            sampler: Sampler::GaussHermite,
            n_samples,
            seed: 0,
        }
    }

    pub fn homogeneous(b: Vector3<f64>) -> Self {
        Self::new(b, 0.0, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.iter().all(|b| b.is_finite()) {
            return Err(Error::InvalidInput("mean field must be finite".into()));
        }
        if (self.inhom_axis.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("inhomogeneity axis must be a unit vector".into()));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidInput(format!("field spread must be >= 0, got {}", self.sigma)));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidInput("n_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Nodes and weights of the `n`-point Gauss–Hermite rule for a standard
/// normal variable, weights summing to 1.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidInput("quadrature order must be >= 1".into()));
    }
    // Golub–Welsch on the probabilists' Jacobi matrix, then Newton polish
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    // orthonormal Hermite values p_0..p_n at x
    let eval = |x: f64| -> (f64, f64, f64) {
        let (mut prev, mut cur) = (0.0, 1.0);
        let mut sumsq = 0.0;
        for k in 0..n {
            sumsq += cur * cur;
            let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
            prev = cur;
            cur = next;
        }
        (cur, prev, sumsq)
    };
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (pn, pn1, _) = eval(*x);
            let d = (n as f64).sqrt() * pn1;
            if d != 0.0 {
                *x -= pn / d;
            }
        }
    }
    for i in 0..n / 2 {
        let s = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -s;
        nodes[n - 1 - i] = s;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    for &x in &nodes {
        let (_, _, sumsq) = eval(x);
        weights.push(1.0 / sumsq);
    }
    let total: f64 = weights.iter().sum();
    if !total.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("Gauss-Hermite weights"));
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok((nodes, weights))
}

/// Field and weight of every sub-sample.
pub fn sample_fields(env: &MagneticEnvironment) -> Result<Vec<(Vector3<f64>, f64)>> {
    env.validate()?;
    let n = env.n_samples;
    let deltas: Vec<(f64, f64)> = match env.sampler {
        Sampler::GaussHermite => {
            let (x, w) = gauss_hermite(n)?;
            x.into_iter().map(|x| x * env.sigma).zip(w).collect()
        }
        Sampler::MonteCarlo => {
            let mut rng = ChaCha8Rng::seed_from_u64(env.seed);
            (0..n)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    (z * env.sigma, 1.0 / n as f64)
                })
                .collect()
        }
    };
    Ok(deltas
        .into_iter()
        .map(|(d, w)| (env.mean + env.inhom_axis * d, w))
        .collect())
}

/// Ensemble-summed retrieved signal per storage time.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub traces: Vec<RetrievedTrace>,
    pub fields: Vec<(Vector3<f64>, f64)>,
    pub mode: SumMode,
}

/// Per-sub-sample traces, indexed `[sample][storage time]`, in sample order.
pub fn run_subsamples(
    model: &AtomModel,
    sequence: &PulseSequence,
    fields: &[(Vector3<f64>, f64)],
    storage_times: &[f64],
    cfg: &IntegratorConfig,
    units: &UnitSystem,
) -> Result<Vec<Vec<RetrievedTrace>>> {
    if storage_times.is_empty() {
        return Err(Error::InvalidInput("at least one storage time is required".into()));
    }
    fields
        .par_iter()
        .map(|(b, _)| run_storage_series(model, sequence, b, storage_times, cfg, units))
        .collect()
}

/// Weighted reduction in sample-index order.
pub fn combine(per_sample: &[Vec<RetrievedTrace>], weights: &[f64], mode: SumMode) -> Result<Vec<RetrievedTrace>> {
    let Some(first) = per_sample.first() else {
        return Err(Error::InvalidInput("no sub-samples".into()));
    };
    if per_sample.len() != weights.len() {
        return Err(Error::Dimension {
            expected: per_sample.len(),
            found: weights.len(),
        });
    }
    let wsum: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(first.len());
    for (k, proto) in first.iter().enumerate() {
        let len = proto.len();
        let mut amp = vec![C64::from(0.0); len];
        let mut inten = vec![0.0; len];
        for (sample, &w) in per_sample.iter().zip(weights) {
            let tr = &sample[k];
            if tr.len() != len {
                return Err(Error::Dimension { expected: len, found: tr.len() });
            }
            for i in 0..len {
                amp[i] += tr.amplitude[i] * w;
                inten[i] += tr.intensity[i] * w;
            }
        }
        for a in amp.iter_mut() {
            *a /= wsum;
        }
        let mut trace = RetrievedTrace::new(proto.storage_time, proto.times.clone(), amp);
        if mode == SumMode::Incoherent {
            trace.intensity = inten.into_iter().map(|i| i / wsum).collect();
        }
        out.push(trace);
    }
    Ok(out)
}

pub fn run_ensemble(
    scheme: &LevelScheme,
    sequence: &PulseSequence,
    env: &MagneticEnvironment,
    storage_times: &[f64],
    cfg: &IntegratorConfig,
    units: &UnitSystem,
    mode: SumMode,
) -> Result<EnsembleResult> {
    let model = AtomModel::new(*scheme)?;
    let fields = sample_fields(env)?;
    let per_sample = run_subsamples(&model, sequence, &fields, storage_times, cfg, units)?;
    let weights: Vec<f64> = fields.iter().map(|f| f.1).collect();
    let traces = combine(&per_sample, &weights, mode)?;
    Ok(EnsembleResult { traces, fields, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_point_rule() {
        let (x, w) = gauss_hermite(3).unwrap();
        assert_abs_diff_eq!(x[0], -3f64.sqrt(), epsilon = 1e-14);
        assert_eq!(x[1], 0.0);
        assert_abs_diff_eq!(x[2], 3f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(w[0], 1.0 / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[2], 1.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn rule_integrates_moments() {
        // E[z^2k] = (2k-1)!!, exact up to degree 2n-1
        for n in [5, 21, 61, 101] {
            let (x, w) = gauss_hermite(n).unwrap();
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
            assert_abs_diff_eq!(m2, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(m4, 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_spread_collapses_to_mean() {
        let mean = Vector3::new(0.1, -0.2, 0.3);
        for sampler in [Sampler::GaussHermite, Sampler::MonteCarlo] {
            let env = MagneticEnvironment {
                sampler,
                ..MagneticEnvironment::new(mean, 0.0, 7)
            };
            assert!(sample_fields(&env).unwrap().iter().all(|(b, _)| *b == mean));
        }
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let env = MagneticEnvironment {
            sampler: Sampler::MonteCarlo,
            seed: 42,
            ..MagneticEnvironment::new(Vector3::zeros(), 0.1, 50)
        };
        assert_eq!(sample_fields(&env).unwrap(), sample_fields(&env).unwrap());
        let other = MagneticEnvironment { seed: 43, ..env.clone() };
        assert_ne!(sample_fields(&env).unwrap(), sample_fields(&other).unwrap());
    }

    #[test]
    fn rejects_bad_environment() {
        let mut env = MagneticEnvironment::new(Vector3::zeros(), 0.1, 0);
        assert!(sample_fields(&env).is_err());
        env.n_samples = 3;
        env.inhom_axis = Vector3::new(1.0, 1.0, 0.0);
        assert!(sample_fields(&env).is_err());
        env.inhom_axis = Vector3::x();
        env.sigma = -1.0;
        assert!(sample_fields(&env).is_err());
    }

    #[test]
    fn incoherent_sum_keeps_intensity_average() {
        let a = RetrievedTrace::new(0.0, vec![0.0], vec![C64::new(1.0, 0.0)]);
        let b = RetrievedTrace::new(0.0, vec![0.0], vec![C64::new(-1.0, 0.0)]);
        let per = vec![vec![a], vec![b]];
        let coh = combine(&per, &[0.5, 0.5], SumMode::Coherent).unwrap();
        let inc = combine(&per, &[0.5, 0.5], SumMode::Incoherent).unwrap();
        assert_eq!(coh[0].intensity[0], 0.0);
        assert_eq!(inc[0].intensity[0], 1.0);
    }
}
