use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use num_traits::Zero;

use super::model::{build_hamiltonian, lindblad_derivative, AtomModel};
use super::{DensityMatrix, FieldSegment, UnitSystem};
use crate::atomic::SphericalPolarization;
use crate::error::{Error, Result};

/// Superoperator of [`lindblad_derivative`] acting on `vec(ρ)` (column-major,
/// the storage order of `DMatrix`). Column `k` is the derivative of the `k`-th
/// basis matrix.
pub fn liouvillian(model: &AtomModel, h: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = model.dim();
    let n2 = n * n;
    let mut l = DMatrix::zeros(n2, n2);
    let mut basis = DMatrix::<C64>::zeros(n, n);
    for k in 0..n2 {
        basis.as_mut_slice()[k] = C64::from(1.0);
        let d = lindblad_derivative(model, h, &basis)?;
        l.column_mut(k).copy_from_slice(d.as_slice());
        basis.as_mut_slice()[k] = C64::zero();
    }
    Ok(l)
}

/// One classical RK4 step of `dv/dt = L v` for constant `L`: the stages
/// collapse to `I + hL + (hL)²/2 + (hL)³/6 + (hL)⁴/24`.
pub fn rk4_step_operator(l: &DMatrix<C64>, h: f64) -> DMatrix<C64> {
    let n = l.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let hl = l * C64::from(h);
    let mut acc = &id + &hl * C64::from(0.25);
    acc = &id + &hl * &acc * C64::from(1.0 / 3.0);
    acc = &id + &hl * &acc * C64::from(0.5);
    &id + &hl * &acc
}

/// `m^n` by repeated squaring.
fn matrix_power(m: &DMatrix<C64>, mut n: usize) -> DMatrix<C64> {
    let mut acc = DMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            acc = &base * &acc;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    acc
}

/// `m^n v` without forming `m^n`.
fn apply_power(m: &DMatrix<C64>, mut n: usize, mut v: DVector<C64>) -> DVector<C64> {
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            v = &base * v;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    v
}

/// Result of integrating one segment. Times are in units of 1/Γ from the
/// segment start.
#[derive(Clone, Debug)]
pub struct SegmentOutput {
    pub state: DensityMatrix,
    pub times: Vec<f64>,
    pub samples: Vec<C64>,
}

/// Precomputed fixed-step propagator for one constant segment, reusable for
/// many initial states.
#[derive(Clone, Debug)]
pub struct SegmentPropagator {
    n: usize,
    dt: f64,
    full_steps: usize,
    step: DMatrix<C64>,
    last: Option<DMatrix<C64>>,
}

impl SegmentPropagator {
    pub fn new(model: &AtomModel, segment: &FieldSegment, units: &UnitSystem, dt: f64) -> Result<Self> {
        let h = build_hamiltonian(model, segment, units)?;
        Self::from_hamiltonian(model, &h, units.to_gamma_time(segment.duration), dt)
    }

    /// `duration` and `dt` in units of 1/Γ.
    pub fn from_hamiltonian(model: &AtomModel, h: &DMatrix<C64>, duration: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Step(dt));
        }
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::InvalidInput(format!("segment duration must be >= 0, got {duration}")));
        }
        let l = liouvillian(model, h)?;
        // the last step is shortened to land exactly on the segment end
        let full_steps = (duration / dt + 1e-9).floor() as usize;
        let rest = duration - full_steps as f64 * dt;
        let last = (rest > dt * 1e-9).then(|| rk4_step_operator(&l, rest));
        Ok(SegmentPropagator {
            n: model.dim(),
            dt,
            full_steps,
            step: rk4_step_operator(&l, dt),
            last,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Integrate from `rho`. With a detector `W`, `Σ W_ij ρ_ij` is recorded
    /// at the segment start and after every `stride` full steps. Runs of
    /// steps between samples are applied as powers of the step operator.
    pub fn run(&self, rho: &DensityMatrix, stride: usize, detector: Option<&DMatrix<C64>>) -> Result<SegmentOutput> {
        if rho.dim() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: rho.dim(),
            });
        }
        let stride = stride.max(1);
        let mut v = DVector::from_column_slice(rho.matrix().as_slice());
        let mut times = Vec::new();
        let mut samples = Vec::new();
        match detector {
            Some(w) => {
                let probe = |v: &DVector<C64>| -> C64 { w.as_slice().iter().zip(v.iter()).map(|(a, b)| a * b).sum() };
                times.push(0.0);
                samples.push(probe(&v));
                let n_samples = self.full_steps / stride;
                if n_samples > 0 {
                    let jump = matrix_power(&self.step, stride);
                    let mut buf = DVector::zeros(v.len());
                    for k in 1..=n_samples {
                        jump.mul_to(&v, &mut buf);
                        std::mem::swap(&mut v, &mut buf);
                        let s = probe(&v);
                        if !(s.re.is_finite() && s.im.is_finite()) {
                            return Err(Error::NonFinite("segment integration"));
                        }
                        times.push((k * stride) as f64 * self.dt);
                        samples.push(s);
                    }
                }
                v = apply_power(&self.step, self.full_steps - n_samples * stride, v);
            }
            None => v = apply_power(&self.step, self.full_steps, v),
        }
        if let Some(last) = &self.last {
            v = last * v;
        }
        let state = DensityMatrix::from_matrix(DMatrix::from_column_slice(self.n, self.n, v.as_slice()))?;
        if !state.is_finite() {
            return Err(Error::NonFinite("segment integration"));
        }
        Ok(SegmentOutput { state, times, samples })
    }
}

/// Integrate one segment with fixed step `dt` (units of 1/Γ), sampling the
/// coherence projected on `detect` every `sample_stride` steps.
pub fn propagate_segment(
    model: &AtomModel,
    rho: &DensityMatrix,
    segment: &FieldSegment,
    units: &UnitSystem,
    dt: f64,
    sample_stride: usize,
    detect: Option<&SphericalPolarization>,
) -> Result<SegmentOutput> {
    if !rho.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let prop = SegmentPropagator::new(model, segment, units, dt)?;
    let detector = detect.map(|p| model.detector(p));
    prop.run(rho, sample_stride, detector.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::LevelScheme;
    use crate::dynamics::OpticalField;
    use nalgebra::Vector3;

    /// Textbook four-stage RK4 on the matrix equation.
    fn rk4_explicit(model: &AtomModel, h: &DMatrix<C64>, rho: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
        let f = |r: &DMatrix<C64>| lindblad_derivative(model, h, r).unwrap();
        let c = |x: f64| C64::from(x);
        let k1 = f(rho);
        let k2 = f(&(rho + &k1 * c(dt / 2.0)));
        let k3 = f(&(rho + &k2 * c(dt / 2.0)));
        let k4 = f(&(rho + &k3 * c(dt)));
        rho + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0)
    }

    fn driven_segment() -> FieldSegment {
        FieldSegment::new(
            2e-7,
            vec![
                OpticalField::resonant(0.5, SphericalPolarization::x()),
                OpticalField::resonant(0.25, SphericalPolarization::y()).with_phase(0.4),
            ],
            Vector3::new(0.1, 0.05, -0.2),
        )
    }

    #[test]
    fn step_operator_matches_stagewise_rk4() {
        let model = AtomModel::new(LevelScheme::new(1.0, 1.0, -0.25, 0.1).unwrap()).unwrap();
        let units = UnitSystem::default();
        let h = build_hamiltonian(&model, &driven_segment(), &units).unwrap();
        let rho0 = DensityMatrix::ground_mixture(&model.scheme);
        let prop = SegmentPropagator::from_hamiltonian(&model, &h, 0.05 * 20.0, 0.05).unwrap();
        let out = prop.run(&rho0, 1, None).unwrap();
        let mut r = rho0.matrix().clone();
        for _ in 0..20 {
            r = rk4_explicit(&model, &h, &r, 0.05);
        }
        let err = (out.state.matrix() - r).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-13, "err {err}");
    }

    #[test]
    fn single_step_without_dynamics_is_identity() {
        let scheme = LevelScheme::model_transition().with_decay(0.0).unwrap();
        let model = AtomModel::new(scheme).unwrap();
        let mut m = DensityMatrix::ground_mixture(&scheme).into_matrix();
        m[(0, 2)] = C64::new(0.1, 0.05);
        m[(2, 0)] = C64::new(0.1, -0.05);
        let rho = DensityMatrix::from_matrix(m).unwrap();
        let prop = SegmentPropagator::from_hamiltonian(&model, &DMatrix::zeros(4, 4), 0.01, 0.01).unwrap();
        let out = prop.run(&rho, 1, None).unwrap();
        assert!((out.state.matrix() - rho.matrix()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn unitary_evolution_conserves_purity() {
        let scheme = LevelScheme::model_transition().with_decay(0.0).unwrap();
        let model = AtomModel::new(scheme).unwrap();
        let units = UnitSystem::default();
        // pure ground state |m = -1⟩
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = C64::from(1.0);
        let rho = DensityMatrix::from_matrix(m).unwrap();
        let seg = FieldSegment {
            duration: units.to_seconds(5.0),
            ..driven_segment()
        };
        let out = propagate_segment(&model, &rho, &seg, &units, 0.005, 1000, None).unwrap();
        assert!((out.state.purity() - 1.0).abs() < 1e-8);
        assert!((out.state.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_last_step_lands_on_end() {
        let model = AtomModel::new(LevelScheme::model_transition()).unwrap();
        let units = UnitSystem::default();
        let h = build_hamiltonian(&model, &driven_segment(), &units).unwrap();
        let rho0 = DensityMatrix::ground_mixture(&model.scheme);
        let a = SegmentPropagator::from_hamiltonian(&model, &h, 1.0, 0.003).unwrap().run(&rho0, 1, None).unwrap();
        let b = SegmentPropagator::from_hamiltonian(&model, &h, 1.0, 0.001).unwrap().run(&rho0, 1, None).unwrap();
        let err = (a.state.matrix() - b.state.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn sampling_schedule() {
        let model = AtomModel::new(LevelScheme::model_transition()).unwrap();
        let h = DMatrix::zeros(4, 4);
        let w = model.detector(&SphericalPolarization::x());
        let rho0 = DensityMatrix::ground_mixture(&model.scheme);
        let out = SegmentPropagator::from_hamiltonian(&model, &h, 1.0, 0.01)
            .unwrap()
            .run(&rho0, 10, Some(&w))
            .unwrap();
        assert_eq!(out.times.len(), 11);
        assert!((out.times[10] - 1.0).abs() < 1e-12);
        assert!(out.times.windows(2).all(|t| t[1] > t[0]));
    }

    #[test]
    fn rejects_bad_step() {
        let model = AtomModel::new(LevelScheme::model_transition()).unwrap();
        let h = DMatrix::zeros(4, 4);
        assert!(matches!(
            SegmentPropagator::from_hamiltonian(&model, &h, 1.0, 0.0),
            Err(Error::Step(_))
        ));
        assert!(SegmentPropagator::from_hamiltonian(&model, &h, 1.0, -1.0).is_err());
        assert!(SegmentPropagator::from_hamiltonian(&model, &h, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn non_finite_state_is_reported() {
        let model = AtomModel::new(LevelScheme::model_transition()).unwrap();
        let mut m = DensityMatrix::ground_mixture(&model.scheme).into_matrix();
        m[(0, 0)] = C64::new(f64::NAN, 0.0);
        let rho = DensityMatrix::from_matrix(m).unwrap();
        let seg = driven_segment();
        assert!(matches!(
            propagate_segment(&model, &rho, &seg, &UnitSystem::default(), 0.01, 1, None),
            Err(Error::NonFinite(_))
        ));
    }
}
