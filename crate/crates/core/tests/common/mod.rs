#![allow(dead_code)]

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use zms::atomic::{spherical_components, LevelScheme, SphericalPolarization};
use zms::dynamics::{
    dark_propagator, propagate_segment, AtomModel, DensityMatrix, FieldSegment, OpticalField, UnitSystem,
};

/// A random small system and a write/dark/read schedule for it.
pub struct RandomCase {
    pub model: AtomModel,
    pub write: FieldSegment,
    pub read: FieldSegment,
    pub dark_seconds: f64,
    pub b: Vector3<f64>,
    pub detect: SphericalPolarization,
    pub units: UnitSystem,
}

pub fn random_polarization(rng: &mut ChaCha8Rng) -> SphericalPolarization {
    loop {
        let mut c = || C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let v = Vector3::new(c(), c(), c());
        if v.norm() > 1e-3 {
            return spherical_components(v).unwrap().normalized().unwrap();
        }
    }
}

fn random_fields(rng: &mut ChaCha8Rng) -> Vec<OpticalField> {
    let n = rng.random_range(1..=2);
    let detuning = rng.random_range(-0.5..0.5);
    (0..n)
        .map(|_| OpticalField {
            rabi: rng.random_range(0.05..1.0),
            polarization: random_polarization(rng),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            detuning,
        })
        .collect()
}

/// Angular momenta up to 2, every dipole-allowed pair.
pub fn random_scheme(rng: &mut ChaCha8Rng) -> LevelScheme {
    loop {
        let tg: i32 = rng.random_range(0..=4);
        let te = tg + 2 * rng.random_range(-1..=1);
        if !(0..=4).contains(&te) || (tg == 0 && te == 0) {
            continue;
        }
        return LevelScheme::new(
            tg as f64 / 2.0,
            te as f64 / 2.0,
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .unwrap();
    }
}

pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let units = UnitSystem::default();
    let model = AtomModel::new(random_scheme(&mut rng)).unwrap();
    let b = Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5));
    let write = FieldSegment::new(units.to_seconds(rng.random_range(5.0..30.0)), random_fields(&mut rng), b);
    let read = FieldSegment::new(units.to_seconds(rng.random_range(5.0..15.0)), random_fields(&mut rng), b);
    RandomCase {
        model,
        write,
        read,
        dark_seconds: rng.random_range(0.0..5e-6),
        b,
        detect: random_polarization(&mut rng),
        units,
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct InvariantReport {
    pub trace_drift: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
    pub dark_vs_rk4: f64,
    pub step_halving: f64,
}

impl InvariantReport {
    pub fn worst(self, o: Self) -> Self {
        InvariantReport {
            trace_drift: self.trace_drift.max(o.trace_drift),
            hermiticity: self.hermiticity.max(o.hermiticity),
            min_eigenvalue: self.min_eigenvalue.min(o.min_eigenvalue),
            dark_vs_rk4: self.dark_vs_rk4.max(o.dark_vs_rk4),
            step_halving: self.step_halving.max(o.step_halving),
        }
    }

    pub fn passes(&self) -> bool {
        self.trace_drift <= 1e-9
            && self.hermiticity <= 1e-10
            && self.min_eigenvalue >= -1e-9
            && self.dark_vs_rk4 <= 1e-8
            && self.step_halving <= 1e-6
    }
}

pub const DT: f64 = 0.005;

fn max_abs(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Write, dark storage (exact and RK4) and read, measuring every invariant.
pub fn check_invariants(case: &RandomCase) -> InvariantReport {
    let m = &case.model;
    let u = &case.units;
    let mut report = InvariantReport {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    let observe = |rho: &DensityMatrix, r: &mut InvariantReport| {
        r.trace_drift = r.trace_drift.max((rho.trace() - C64::from(1.0)).norm());
        r.hermiticity = r.hermiticity.max(rho.hermiticity_error());
        r.min_eigenvalue = r.min_eigenvalue.min(rho.min_eigenvalue());
    };

    let rho0 = DensityMatrix::ground_mixture(&m.scheme);
    let written = propagate_segment(m, &rho0, &case.write, u, DT, usize::MAX, None).unwrap().state;
    observe(&written, &mut report);

    let exact = dark_propagator(m, &case.b, case.dark_seconds, u).apply(&written);
    let stepped = propagate_segment(m, &written, &FieldSegment::dark(case.dark_seconds, case.b), u, DT, usize::MAX, None)
        .unwrap()
        .state;
    report.dark_vs_rk4 = max_abs(&(exact.matrix() - stepped.matrix()));
    observe(&exact, &mut report);
    observe(&stepped, &mut report);

    let stride = 20;
    let fine = propagate_segment(m, &exact, &case.read, u, DT, stride, Some(&case.detect)).unwrap();
    let coarse = propagate_segment(m, &exact, &case.read, u, 2.0 * DT, stride / 2, Some(&case.detect)).unwrap();
    observe(&fine.state, &mut report);
    let scale = fine.samples.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let n = fine.samples.len().min(coarse.samples.len());
    let diff = (0..n)
        .map(|i| (fine.samples[i] - coarse.samples[i]).norm())
        .fold(0.0, f64::max);
    report.step_halving = if scale > 0.0 { diff / scale } else { diff };
    report
}
