use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64 as C64;
use num_traits::Zero;

use super::{DensityMatrix, FieldSegment, UnitSystem};
use crate::atomic::{angular_momentum_matrices, dipole_coupling, LevelScheme, SphericalPolarization};
use crate::error::{Error, Result};

/// Operators of a level scheme embedded in the full `N x N` space.
#[derive(Clone, Debug)]
pub struct AtomModel {
    pub scheme: LevelScheme,
    /// `F_g` components on the ground block.
    ground_f: [DMatrix<C64>; 3],
    /// `F_e` components on the excited block.
    excited_f: [DMatrix<C64>; 3],
    /// Raising dipole operators `D_q = Σ ⟨fg mg;1q|fe me⟩ |e me⟩⟨g mg|`, `q = -1, 0, 1`.
    raising: [DMatrix<C64>; 3],
    /// Jump operators `A_q = D_q†`.
    lowering: [DMatrix<C64>; 3],
    /// `Σ_q A_q† A_q`, equal to the excited projector by completeness.
    decay_projector: DMatrix<C64>,
}

impl AtomModel {
    pub fn new(scheme: LevelScheme) -> Result<Self> {
        scheme.validate()?;
        let n = scheme.dim();
        let ng = scheme.n_ground();
        let embed = |block: &DMatrix<C64>, offset: usize| {
            let mut m = DMatrix::zeros(n, n);
            m.view_mut((offset, offset), block.shape()).copy_from(block);
            m
        };
        let ground_f = angular_momentum_matrices(scheme.fg).map(|m| embed(&m, 0));
        let excited_f = angular_momentum_matrices(scheme.fe).map(|m| embed(&m, ng));
        let raising = [-1, 0, 1].map(|q| {
            let d = dipole_coupling(&scheme, q);
            let mut m = DMatrix::zeros(n, n);
            m.view_mut((ng, 0), d.shape()).copy_from(&d.map(C64::from));
            m
        });
        let lowering = raising.clone().map(|d| d.adjoint());
        let decay_projector = lowering
            .iter()
            .fold(DMatrix::zeros(n, n), |acc, a| acc + a.adjoint() * a);
        Ok(AtomModel {
            scheme,
            ground_f,
            excited_f,
            raising,
            lowering,
            decay_projector,
        })
    }

    pub fn dim(&self) -> usize {
        self.scheme.dim()
    }

    pub fn n_ground(&self) -> usize {
        self.scheme.n_ground()
    }

    pub fn raising(&self, q: i32) -> &DMatrix<C64> {
        &self.raising[(q + 1) as usize]
    }

    pub fn lowering(&self, q: i32) -> &DMatrix<C64> {
        &self.lowering[(q + 1) as usize]
    }

    /// `B·F` on the ground block (gauss times ħ units).
    pub fn ground_b_dot_f(&self, b: &Vector3<f64>) -> DMatrix<C64> {
        dot(&self.ground_f, b)
    }

    pub fn excited_b_dot_f(&self, b: &Vector3<f64>) -> DMatrix<C64> {
        dot(&self.excited_f, b)
    }

    /// Zeeman Hamiltonian in units of Γ.
    pub fn zeeman(&self, b: &Vector3<f64>, units: &UnitSystem) -> DMatrix<C64> {
        let k = units.zeeman_per_gauss();
        self.ground_b_dot_f(b) * C64::from(self.scheme.g_ground * k)
            + self.excited_b_dot_f(b) * C64::from(self.scheme.g_excited * k)
    }

    /// Matrix `W` with `projected_coherence = Σ_ij W_ij ρ_ij`.
    pub fn detector(&self, pol: &SphericalPolarization) -> DMatrix<C64> {
        (-1..=1).fold(DMatrix::zeros(self.dim(), self.dim()), |acc, q| {
            acc + self.raising(q) * pol.component(q).conj()
        })
    }

    pub(crate) fn decay_projector(&self) -> &DMatrix<C64> {
        &self.decay_projector
    }
}

fn dot(f: &[DMatrix<C64>; 3], b: &Vector3<f64>) -> DMatrix<C64> {
    &f[0] * C64::from(b[0]) + &f[1] * C64::from(b[1]) + &f[2] * C64::from(b[2])
}

/// Rotating-wave Hamiltonian of a segment, in units of Γ:
/// `H = -Δ P_e + Zeeman + Σ_fields (Ω/2) e^{iφ} Σ_q c_q D_q + h.c.`
pub fn build_hamiltonian(model: &AtomModel, segment: &FieldSegment, units: &UnitSystem) -> Result<DMatrix<C64>> {
    if segment.b_field.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidInput("magnetic field must be finite".into()));
    }
    let detuning = segment.detuning()?;
    let n = model.dim();
    let ng = model.n_ground();
    let mut h = model.zeeman(&segment.b_field, units);
    for i in ng..n {
        h[(i, i)] -= C64::from(detuning);
    }
    let mut drive = DMatrix::<C64>::zeros(n, n);
    for field in &segment.optical_fields {
        if !(field.rabi.is_finite() && field.rabi >= 0.0) {
            return Err(Error::InvalidInput(format!("Rabi frequency must be >= 0, got {}", field.rabi)));
        }
        let scale = C64::from_polar(field.rabi / 2.0, field.phase);
        for q in -1..=1 {
            let c = field.polarization.component(q);
            if !c.is_zero() {
                drive += model.raising(q) * (scale * c);
            }
        }
    }
    h += &drive + drive.adjoint();
    Ok(h)
}

/// `dρ/dt = -i[H, ρ] + γ Σ_q (A_q ρ A_q† - ½{A_q†A_q, ρ})`, time in 1/Γ.
/// Linear in `rho`; the argument need not be Hermitian.
pub fn lindblad_derivative(model: &AtomModel, h: &DMatrix<C64>, rho: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = model.dim();
    for m in [h, rho] {
        if m.shape() != (n, n) {
            return Err(Error::Dimension {
                expected: n,
                found: m.nrows(),
            });
        }
    }
    let mi = C64::new(0.0, -1.0);
    let mut out = (h * rho - rho * h) * mi;
    let gamma = model.scheme.decay;
    if gamma > 0.0 {
        let p = model.decay_projector();
        let mut jump = DMatrix::zeros(n, n);
        for a in &model.lowering {
            jump += a * rho * a.adjoint();
        }
        out += (jump - (p * rho + rho * p) * C64::from(0.5)) * C64::from(gamma);
    }
    Ok(out)
}

/// Ground→excited optical coherence radiating with polarization `pol`:
/// `Σ_q c_q* Tr(ρ D_q†)`.
pub fn projected_coherence(model: &AtomModel, rho: &DensityMatrix, pol: &SphericalPolarization) -> C64 {
    let w = model.detector(pol);
    w.iter().zip(rho.matrix().iter()).map(|(w, r)| w * r).sum()
}
