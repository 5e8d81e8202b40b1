//! Classical magnetic dipoles precessing in static inhomogeneous fields.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::dynamics::MU_B_OVER_H;
use crate::ensemble::{sample_fields, MagneticEnvironment};
use crate::error::{Error, Result};

/// `|g| μ_B / ħ` for g = −1/4, rad/s per gauss.
pub const DEFAULT_GYRO: f64 = 2.0 * PI * 0.25 * MU_B_OVER_H;

#[derive(Clone, Debug, PartialEq)]
pub struct DipoleEnsemble {
    pub mu0: Vector3<f64>,
    /// rad/s per gauss.
    pub gyro: f64,
    pub env: MagneticEnvironment,
}

impl DipoleEnsemble {
    pub fn new(env: MagneticEnvironment) -> Self {
        DipoleEnsemble {
            mu0: Vector3::y(),
            gyro: DEFAULT_GYRO,
            env,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if (self.mu0.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("initial dipole orientation must be a unit vector".into()));
        }
        if !(self.gyro.is_finite() && self.gyro != 0.0) {
            return Err(Error::InvalidInput("gyromagnetic ratio must be finite and nonzero".into()));
        }
        self.env.validate()
    }
}

/// Rotate `mu` about `b̂` by `gyro·|b|·t` (right-handed).
pub fn precess(mu: &Vector3<f64>, b: &Vector3<f64>, gyro: f64, t: f64) -> Vector3<f64> {
    let bn = b.norm();
    if bn == 0.0 {
        return *mu;
    }
    let k = b / bn;
    let (s, c) = (gyro * bn * t).sin_cos();
    mu * c + k.cross(mu) * s + k * (k.dot(mu) * (1.0 - c))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentTrajectory {
    /// Seconds.
    pub times: Vec<f64>,
    pub moments: Vec<Vector3<f64>>,
}

impl MomentTrajectory {
    pub fn component(&self, axis: usize) -> Vec<f64> {
        self.moments.iter().map(|m| m[axis]).collect()
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.moments.iter().map(|m| m.norm()).collect()
    }
}

/// Weighted total dipole at each time.
pub fn total_moment(ens: &DipoleEnsemble, times: &[f64]) -> Result<MomentTrajectory> {
    ens.validate()?;
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("time grid"));
    }
    let fields = sample_fields(&ens.env)?;
    let wsum: f64 = fields.iter().map(|f| f.1).sum();
    let moments = times
        .iter()
        .map(|&t| {
            let mut m = Vector3::zeros();
            for (b, w) in &fields {
                m += precess(&ens.mu0, b, ens.gyro, t) * *w;
            }
            m / wsum
        })
        .collect();
    Ok(MomentTrajectory {
        times: times.to_vec(),
        moments,
    })
}

/// Gaussian average of `cos((ω̄ + γδ)t)` over `δ ~ N(0, σ²)`.
pub fn gaussian_dephasing(gyro: f64, sigma: f64, mean_angular: f64, t: f64) -> f64 {
    (mean_angular * t).cos() * (-(gyro * sigma * t).powi(2) / 2.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn half_period_about_x() {
        let b = 0.3;
        let t = PI / (DEFAULT_GYRO * b);
        let r = precess(&Vector3::y(), &Vector3::new(b, 0.0, 0.0), DEFAULT_GYRO, t);
        assert!((r + Vector3::y()).norm() < 1e-14);
    }

    #[test]
    fn zero_field_and_parallel_are_fixed() {
        let mu = Vector3::new(0.6, 0.0, 0.8);
        assert_eq!(precess(&mu, &Vector3::zeros(), DEFAULT_GYRO, 1.0), mu);
        let r = precess(&mu, &(mu * 0.7), DEFAULT_GYRO, 3.3e-6);
        assert!((r - mu).norm() < 1e-14);
    }

    #[test]
    fn right_handed() {
        // ŷ about ẑ by +90° goes to −x̂
        let b = 1.0;
        let t = PI / 2.0 / (DEFAULT_GYRO * b);
        let r = precess(&Vector3::y(), &Vector3::new(0.0, 0.0, b), DEFAULT_GYRO, t);
        assert!((r + Vector3::x()).norm() < 1e-14);
    }

    #[test]
    fn zero_mean_matches_gaussian_decay() {
        let sigma = 0.05;
        let ens = DipoleEnsemble::new(MagneticEnvironment::new(Vector3::zeros(), sigma, 31));
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 5.0 / 49.0 / (DEFAULT_GYRO * sigma)).collect();
        let traj = total_moment(&ens, &times).unwrap();
        for (t, m) in times.iter().zip(&traj.moments) {
            assert_abs_diff_eq!(m.y, gaussian_dephasing(DEFAULT_GYRO, sigma, 0.0, *t), epsilon = 1e-6);
            assert!(m.norm() <= 1.0 + 1e-12);
        }
    }
}
