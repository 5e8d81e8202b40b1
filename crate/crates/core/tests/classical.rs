use nalgebra::Vector3;
use proptest::prelude::*;

use zms::classical::{precess, total_moment, DipoleEnsemble, DEFAULT_GYRO};
use zms::ensemble::MagneticEnvironment;

const SIGMA: f64 = 0.0186;

fn ensemble(mean: Vector3<f64>, n: usize) -> DipoleEnsemble {
    DipoleEnsemble::new(MagneticEnvironment::new(mean, SIGMA, n))
}

/// Grid of `gyro·σ·t` up to `max`.
fn times(max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| max * k as f64 / n as f64 / (DEFAULT_GYRO * SIGMA)).collect()
}

#[test]
fn zero_mean_matches_gaussian_dephasing() {
    let t = times(5.0, 500);
    let traj = total_moment(&ensemble(Vector3::zeros(), 31), &t).unwrap();
    for (t, m) in t.iter().zip(&traj.moments) {
        let u = DEFAULT_GYRO * SIGMA * t;
        assert!((m.y - (-u * u / 2.0).exp()).abs() < 1e-6, "u = {u}: {}", m.y);
        assert!(m.x.abs() < 1e-12);
    }
}

#[test]
fn parallel_mean_modulates_the_decay() {
    let b = 4.0 * SIGMA;
    let t = times(5.0, 500);
    let traj = total_moment(&ensemble(Vector3::new(b, 0.0, 0.0), 31), &t).unwrap();
    for (t, m) in t.iter().zip(&traj.moments) {
        let u = DEFAULT_GYRO * SIGMA * t;
        let want = (DEFAULT_GYRO * b * t).cos() * (-u * u / 2.0).exp();
        assert!((m.y - want).abs() < 1e-6);
    }
}

fn one_over_e_time(mean: Vector3<f64>, max: f64) -> f64 {
    let t = times(max, 20_000);
    let traj = total_moment(&ensemble(mean, 101), &t).unwrap();
    let k = traj.magnitude().iter().position(|&m| m < (-1.0f64).exp()).expect("no 1/e crossing");
    t[k]
}

#[test]
fn perpendicular_mean_suppresses_dephasing() {
    let zero = one_over_e_time(Vector3::zeros(), 10.0);
    let perp = one_over_e_time(Vector3::new(0.0, 0.0, 10.0 * SIGMA), 200.0);
    assert!(perp >= 5.0 * zero, "{perp} vs {zero}");
}

proptest! {
    #[test]
    fn precession_conserves_the_dipole(
        mu in prop::array::uniform3(-1.0f64..1.0),
        b in prop::array::uniform3(-2.0f64..2.0),
        t in 0.0f64..1e-3,
    ) {
        let mu = Vector3::from(mu);
        prop_assume!(mu.norm() > 1e-3);
        let mu = mu.normalize();
        let b = Vector3::from(b);
        let out = precess(&mu, &b, DEFAULT_GYRO, t);
        prop_assert!((out.norm() - 1.0).abs() <= 1e-14);
        // the component along the field is untouched
        if b.norm() > 0.0 {
            let k = b.normalize();
            prop_assert!((out.dot(&k) - mu.dot(&k)).abs() <= 1e-14);
        }
    }
}
