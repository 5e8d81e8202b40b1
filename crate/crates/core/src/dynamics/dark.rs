//! Closed-form evolution with all optical fields off.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64 as C64;

use super::model::AtomModel;
use super::{DensityMatrix, UnitSystem};

/// Eigen-decomposed Zeeman blocks of one sub-sample's dark evolution.
///
/// Ground block: exact unitary precession plus the spontaneous-emission feed
/// from the excited block. Excited populations decay at Γ, optical
/// coherences at Γ/2, each with its own Zeeman phase.
#[derive(Clone, Debug)]
pub struct DarkEvolution {
    ng: usize,
    ne: usize,
    decay: f64,
    vg: DMatrix<C64>,
    lambda: Vec<f64>,
    ve: DMatrix<C64>,
    mu: Vec<f64>,
    /// `K[c,d,a,b] = Σ_q Ã_q[c,a] Ã_q[d,b]*` with `Ã_q = Vg† A_q Ve`.
    feed: Vec<C64>,
}

fn hermitian_eigen(h: DMatrix<C64>) -> (DMatrix<C64>, Vec<f64>) {
    let h = (&h + h.adjoint()) * C64::from(0.5);
    let eig = h.symmetric_eigen();
    (eig.eigenvectors, eig.eigenvalues.iter().copied().collect())
}

impl DarkEvolution {
    pub fn new(model: &AtomModel, b_field: &Vector3<f64>, units: &UnitSystem) -> Self {
        let ng = model.n_ground();
        let n = model.dim();
        let ne = n - ng;
        let h = model.zeeman(b_field, units);
        let (vg, lambda) = hermitian_eigen(h.view((0, 0), (ng, ng)).into_owned());
        let (ve, mu) = hermitian_eigen(h.view((ng, ng), (ne, ne)).into_owned());
        let a_tilde: Vec<DMatrix<C64>> = (-1..=1)
            .map(|q| vg.adjoint() * model.lowering(q).view((0, ng), (ng, ne)) * &ve)
            .collect();
        let mut feed = vec![C64::from(0.0); ng * ng * ne * ne];
        for c in 0..ng {
            for d in 0..ng {
                for a in 0..ne {
                    for b in 0..ne {
                        feed[((c * ng + d) * ne + a) * ne + b] =
                            a_tilde.iter().map(|at| at[(c, a)] * at[(d, b)].conj()).sum();
                    }
                }
            }
        }
        DarkEvolution {
            ng,
            ne,
            decay: model.scheme.decay,
            vg,
            lambda,
            ve,
            mu,
            feed,
        }
    }

    /// Evolve `rho` for `t` (units of 1/Γ).
    pub fn propagate(&self, rho: &DensityMatrix, t: f64) -> DensityMatrix {
        let (ng, ne) = (self.ng, self.ne);
        if t == 0.0 {
            return rho.clone();
        }
        let m = rho.matrix();
        let gg = self.vg.adjoint() * m.view((0, 0), (ng, ng)) * &self.vg;
        let ge = self.vg.adjoint() * m.view((0, ng), (ng, ne)) * &self.ve;
        let eg = self.ve.adjoint() * m.view((ng, 0), (ne, ng)) * &self.vg;
        let ee = self.ve.adjoint() * m.view((ng, ng), (ne, ne)) * &self.ve;
        let g = self.decay;
        let phase = |w: f64, rate: f64| C64::new(-rate * t, -w * t).exp();

        let mut gg_t = DMatrix::<C64>::zeros(ng, ng);
        for c in 0..ng {
            for d in 0..ng {
                let w_cd = self.lambda[c] - self.lambda[d];
                let rot = phase(w_cd, 0.0);
                let mut v = rot * gg[(c, d)];
                if g > 0.0 {
                    let mut fed = C64::from(0.0);
                    for a in 0..ne {
                        for b in 0..ne {
                            let k = self.feed[((c * ng + d) * ne + a) * ne + b];
                            if k.norm_sqr() == 0.0 {
                                continue;
                            }
                            let kappa = C64::new(-g, w_cd - (self.mu[a] - self.mu[b]));
                            let kt = kappa * t;
                            let integral = if kt.norm() < 1e-8 {
                                C64::from(t) * (C64::from(1.0) + kt * 0.5)
                            } else {
                                (kt.exp() - 1.0) / kappa
                            };
                            fed += k * ee[(a, b)] * integral;
                        }
                    }
                    v += rot * fed * g;
                }
                gg_t[(c, d)] = v;
            }
        }
        let mut ge_t = ge;
        for c in 0..ng {
            for a in 0..ne {
                ge_t[(c, a)] *= phase(self.lambda[c] - self.mu[a], g / 2.0);
            }
        }
        let mut eg_t = eg;
        for a in 0..ne {
            for c in 0..ng {
                eg_t[(a, c)] *= phase(self.mu[a] - self.lambda[c], g / 2.0);
            }
        }
        let mut ee_t = ee;
        for a in 0..ne {
            for b in 0..ne {
                ee_t[(a, b)] *= phase(self.mu[a] - self.mu[b], g);
            }
        }

        let n = ng + ne;
        let mut out = DMatrix::zeros(n, n);
        out.view_mut((0, 0), (ng, ng))
            .copy_from(&(&self.vg * gg_t * self.vg.adjoint()));
        out.view_mut((0, ng), (ng, ne))
            .copy_from(&(&self.vg * ge_t * self.ve.adjoint()));
        out.view_mut((ng, 0), (ne, ng))
            .copy_from(&(&self.ve * eg_t * self.vg.adjoint()));
        out.view_mut((ng, ng), (ne, ne))
            .copy_from(&(&self.ve * ee_t * self.ve.adjoint()));
        DensityMatrix::from_matrix(out).expect("square by construction")
    }
}

/// Dark evolution for a fixed duration `t` in seconds.
#[derive(Clone, Debug)]
pub struct DarkPropagator {
    evolution: DarkEvolution,
    t: f64,
}

impl DarkPropagator {
    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        self.evolution.propagate(rho, self.t)
    }
}

pub fn dark_propagator(model: &AtomModel, b_field: &Vector3<f64>, t: f64, units: &UnitSystem) -> DarkPropagator {
    DarkPropagator {
        evolution: DarkEvolution::new(model, b_field, units),
        t: units.to_gamma_time(t.max(0.0)),
    }
}
