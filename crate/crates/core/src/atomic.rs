//! Angular-momentum algebra for a pair of hyperfine levels.
//!
//! Basis ordering used everywhere in the crate: ground sublevels
//! `m = -fg..=fg`, then excited sublevels `m = -fe..=fe`.

use nalgebra::{DMatrix, Vector3};
use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest angular momentum accepted by the exact Clebsch–Gordan routine.
pub const MAX_F: f64 = 10.0;

/// A non-negative integer or half-integer angular momentum, stored as `2f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AngularMomentum {
    twice: u32,
}

impl AngularMomentum {
    pub fn new(f: f64) -> Result<Self> {
        let twice = 2.0 * f;
        if !f.is_finite() || f < 0.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::AngularMomentum(f));
        }
        Ok(AngularMomentum {
            twice: twice.round() as u32,
        })
    }

    pub const fn from_twice(twice: u32) -> Self {
        AngularMomentum { twice }
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn multiplicity(self) -> usize {
        self.twice as usize + 1
    }

    /// `2m` for each sublevel, in basis order `m = -f..=f`.
    pub fn twice_projections(self) -> impl Iterator<Item = i32> {
        let t = self.twice as i32;
        (0..=t).map(move |k| -t + 2 * k)
    }

    pub fn projections(self) -> impl Iterator<Item = f64> {
        self.twice_projections().map(|tm| tm as f64 / 2.0)
    }
}

/// The `fg -> fe` optical transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelScheme {
    pub fg: AngularMomentum,
    pub fe: AngularMomentum,
    /// Excited-state decay rate as a multiple of the unit system's Γ.
    pub decay: f64,
    pub g_ground: f64,
    pub g_excited: f64,
}

impl LevelScheme {
    pub fn new(fg: f64, fe: f64, g_ground: f64, g_excited: f64) -> Result<Self> {
        let scheme = LevelScheme {
            fg: AngularMomentum::new(fg)?,
            fe: AngularMomentum::new(fe)?,
            decay: 1.0,
            g_ground,
            g_excited,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// The `F_g = 1 -> F_e = 0` model transition with the Cs `F = 3` Landé
    /// factor on the ground level.
    pub fn model_transition() -> Self {
        LevelScheme {
            fg: AngularMomentum::from_twice(2),
            fe: AngularMomentum::from_twice(0),
            decay: 1.0,
            g_ground: -0.25,
            g_excited: 0.0,
        }
    }

    pub fn with_decay(mut self, decay: f64) -> Result<Self> {
        self.decay = decay;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let (tg, te) = (self.fg.twice as i64, self.fe.twice as i64);
        if self.fg.value() > MAX_F || self.fe.value() > MAX_F {
            return Err(Error::Scheme(format!("angular momenta above {MAX_F} are not supported")));
        }
        if (tg - te).abs() > 2 {
            return Err(Error::Scheme(format!(
                "|fg - fe| = {} exceeds 1 (not dipole allowed)",
                (tg - te).abs() as f64 / 2.0
            )));
        }
        if (tg - te) % 2 != 0 {
            return Err(Error::Scheme("fg - fe must be an integer".into()));
        }
        if tg == 0 && te == 0 {
            return Err(Error::Scheme("0 -> 0 is not dipole allowed".into()));
        }
        if !self.decay.is_finite() || self.decay < 0.0 {
            return Err(Error::Scheme(format!("decay rate must be >= 0, got {}", self.decay)));
        }
        if !self.g_ground.is_finite() || !self.g_excited.is_finite() {
            return Err(Error::Scheme("Landé factors must be finite".into()));
        }
        Ok(())
    }

    pub fn n_ground(&self) -> usize {
        self.fg.multiplicity()
    }

    pub fn n_excited(&self) -> usize {
        self.fe.multiplicity()
    }

    pub fn dim(&self) -> usize {
        self.n_ground() + self.n_excited()
    }
}

/// Expansion of a polarization vector on the spherical basis vectors
/// `ê_{±1} = ∓(x̂ ± iŷ)/√2`, `ê_0 = ẑ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalPolarization {
    pub minus: C64,
    pub zero: C64,
    pub plus: C64,
}

impl SphericalPolarization {
    pub fn component(&self, q: i32) -> C64 {
        match q {
            -1 => self.minus,
            0 => self.zero,
            1 => self.plus,
            _ => C64::zero(),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.minus.norm_sqr() + self.zero.norm_sqr() + self.plus.norm_sqr()).sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroPolarization);
        }
        Ok(SphericalPolarization {
            minus: self.minus / n,
            zero: self.zero / n,
            plus: self.plus / n,
        })
    }

    /// Unit linear polarization along a real direction.
    pub fn linear(direction: Vector3<f64>) -> Result<Self> {
        spherical_components(direction.map(|v: f64| C64::from(v)))?.normalized()
    }

    pub fn x() -> Self {
        Self::linear(Vector3::x()).expect("x̂ is nonzero")
    }

    pub fn y() -> Self {
        Self::linear(Vector3::y()).expect("ŷ is nonzero")
    }

    pub fn z() -> Self {
        Self::linear(Vector3::z()).expect("ẑ is nonzero")
    }

    /// Pure `q = ±1` circular polarization.
    pub fn sigma(q: i32) -> Self {
        let one = C64::new(1.0, 0.0);
        match q.signum() {
            1 => SphericalPolarization { minus: C64::zero(), zero: C64::zero(), plus: one },
            _ => SphericalPolarization { minus: one, zero: C64::zero(), plus: C64::zero() },
        }
    }

    /// Back to Cartesian components.
    pub fn cartesian(&self) -> Vector3<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let i = C64::i();
        // E = c₊ ê₊ + c₋ ê₋ + c₀ ẑ
        let ex = (self.minus - self.plus) * s;
        let ey = -i * (self.minus + self.plus) * s;
        Vector3::new(ex, ey, self.zero)
    }
}

/// Spherical expansion coefficients `c_q = ê_q* · E` of a complex
/// Cartesian vector. Unitary, so the norm is preserved.
pub fn spherical_components(cartesian: Vector3<C64>) -> Result<SphericalPolarization> {
    if cartesian.iter().all(|c| c.norm_sqr() == 0.0) {
        return Err(Error::ZeroPolarization);
    }
    if cartesian.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidInput("polarization has non-finite components".into()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = C64::i();
    let (ex, ey, ez) = (cartesian[0], cartesian[1], cartesian[2]);
    Ok(SphericalPolarization {
        minus: (ex + i * ey) * s,
        zero: ez,
        plus: -(ex - i * ey) * s,
    })
}

/// `(Fx, Fy, Fz)` in the basis `m = -f..=f`.
pub fn angular_momentum_matrices(f: AngularMomentum) -> [DMatrix<C64>; 3] {
    let n = f.multiplicity();
    let fv = f.value();
    let mut raise = DMatrix::<C64>::zeros(n, n);
    let mut fz = DMatrix::<C64>::zeros(n, n);
    for (i, m) in f.projections().enumerate() {
        fz[(i, i)] = C64::from(m);
        if i + 1 < n {
            raise[(i + 1, i)] = C64::from((fv * (fv + 1.0) - m * (m + 1.0)).sqrt());
        }
    }
    let lower = raise.adjoint();
    let fx = (&raise + &lower) * C64::from(0.5);
    let fy = (&raise - &lower) * C64::new(0.0, -0.5);
    [fx, fy, fz]
}

fn factorial(n: i64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

/// `⟨j1 m1; j2 m2 | j m⟩` in the Condon–Shortley convention, all arguments
/// given as twice their value. Evaluated with the Racah sum in exact
/// rational arithmetic; only the final square root is floating point.
pub fn clebsch_gordan_twice(tj1: i64, tm1: i64, tj2: i64, tm2: i64, tj: i64, tm: i64) -> f64 {
    if tm1 + tm2 != tm
        || tj1 < 0
        || tj2 < 0
        || tj < 0
        || tm1.abs() > tj1
        || tm2.abs() > tj2
        || tm.abs() > tj
        || (tj1 + tm1) % 2 != 0
        || (tj2 + tm2) % 2 != 0
        || (tj + tm) % 2 != 0
        || (tj1 + tj2 + tj) % 2 != 0
        || tj < (tj1 - tj2).abs()
        || tj > tj1 + tj2
    {
        return 0.0;
    }
    let half = |x: i64| x / 2;
    let a = half(tj1 + tj2 - tj);
    let b = half(tj1 - tm1);
    let c = half(tj2 + tm2);
    let d = half(tj - tj2 + tm1);
    let e = half(tj - tj1 - tm2);

    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial(a - k)
            * factorial(b - k)
            * factorial(c - k)
            * factorial(d + k)
            * factorial(e + k);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }

    let triangle = BigRational::new(
        BigInt::from(tj + 1)
            * factorial(half(tj + tj1 - tj2))
            * factorial(half(tj - tj1 + tj2))
            * factorial(half(tj1 + tj2 - tj)),
        factorial(half(tj1 + tj2 + tj) + 1),
    );
    let projections = BigRational::from_integer(
        factorial(half(tj + tm))
            * factorial(half(tj - tm))
            * factorial(half(tj1 - tm1))
            * factorial(half(tj1 + tm1))
            * factorial(half(tj2 - tm2))
            * factorial(half(tj2 + tm2)),
    );
    let squared = triangle * projections * &sum * &sum;
    let magnitude = squared.to_f64().expect("finite rational").sqrt();
    if sum.is_negative() {
        -magnitude
    } else {
        magnitude
    }
}

/// `⟨j1 m1; j2 m2 | j m⟩` with ordinary (possibly half-integer) arguments.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> f64 {
    let t = |x: f64| (2.0 * x).round() as i64;
    clebsch_gordan_twice(t(j1), t(m1), t(j2), t(m2), t(j), t(m))
}

/// Coupling matrix for polarization component `q`, shape
/// `(2fe+1) x (2fg+1)`, element `(me, mg) = ⟨fg mg; 1 q | fe me⟩`.
pub fn dipole_coupling(scheme: &LevelScheme, q: i32) -> DMatrix<f64> {
    let (tg, te) = (scheme.fg.twice() as i64, scheme.fe.twice() as i64);
    let mut d = DMatrix::zeros(scheme.n_excited(), scheme.n_ground());
    if !(-1..=1).contains(&q) {
        return d;
    }
    for (j, tme) in scheme.fe.twice_projections().enumerate() {
        for (i, tmg) in scheme.fg.twice_projections().enumerate() {
            d[(j, i)] = clebsch_gordan_twice(tg, tmg as i64, 2, 2 * q as i64, te, tme as i64);
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn commutator(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        a * b - b * a
    }

    #[test]
    fn rejects_non_half_integer() {
        assert!(AngularMomentum::new(0.3).is_err());
        assert!(AngularMomentum::new(-1.0).is_err());
        assert_eq!(AngularMomentum::new(1.5).unwrap().multiplicity(), 4);
    }

    #[test]
    fn spin_one_matrices() {
        let [fx, _, fz] = angular_momentum_matrices(AngularMomentum::from_twice(2));
        for (i, m) in [-1.0, 0.0, 1.0].iter().enumerate() {
            assert_eq!(fz[(i, i)], C64::from(*m));
        }
        // raising elements are √2, Fx carries half of them
        assert_abs_diff_eq!(fx[(1, 0)].re * 2.0, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(fx[(2, 1)].re * 2.0, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn algebra_for_all_f() {
        for twice in 0..=8 {
            let f = AngularMomentum::from_twice(twice);
            let [fx, fy, fz] = angular_momentum_matrices(f);
            let c = commutator(&fx, &fy) - &fz * C64::i();
            assert!(c.iter().all(|z| z.norm() < 1e-12), "f = {}", f.value());
            let fv = f.value();
            let casimir = &fx * &fx + &fy * &fy + &fz * &fz;
            let n = f.multiplicity();
            let expected = DMatrix::<C64>::identity(n, n) * C64::from(fv * (fv + 1.0));
            assert!((casimir - expected).iter().all(|z| z.norm() < 1e-12));
            for m in [&fx, &fy, &fz] {
                assert!((m - m.adjoint()).iter().all(|z| z.norm() < 1e-15));
            }
        }
    }

    #[test]
    fn known_coefficients() {
        let s3 = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(clebsch_gordan(1.0, 1.0, 1.0, -1.0, 0.0, 0.0), s3, epsilon = 1e-15);
        assert_abs_diff_eq!(clebsch_gordan(1.0, 0.0, 1.0, 0.0, 0.0, 0.0), -s3, epsilon = 1e-15);
        assert_abs_diff_eq!(clebsch_gordan(1.0, -1.0, 1.0, 1.0, 0.0, 0.0), s3, epsilon = 1e-15);
        assert_abs_diff_eq!(
            clebsch_gordan(0.5, 0.5, 0.5, -0.5, 1.0, 0.0),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            clebsch_gordan(0.5, -0.5, 0.5, 0.5, 0.0, 0.0),
            -std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_eq!(clebsch_gordan(1.0, 1.0, 1.0, 1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn model_transition_q_minus() {
        let d = dipole_coupling(&LevelScheme::model_transition(), -1);
        assert_eq!(d.shape(), (1, 3));
        assert_eq!(d[(0, 0)], 0.0);
        assert_eq!(d[(0, 1)], 0.0);
        assert_abs_diff_eq!(d[(0, 2)].abs(), 1.0 / 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn completeness_sum_rule() {
        for tg in 0..=8u32 {
            for te in [tg.saturating_sub(2), tg, tg + 2] {
                let Ok(scheme) = LevelScheme::new(tg as f64 / 2.0, te as f64 / 2.0, 0.0, 0.0) else {
                    continue;
                };
                if scheme.fe.value() > 4.0 {
                    continue;
                }
                let ds: Vec<_> = (-1..=1).map(|q| dipole_coupling(&scheme, q)).collect();
                for me in 0..scheme.n_excited() {
                    let s: f64 = ds.iter().map(|d| d.row(me).map(|x| x * x).sum()).sum();
                    assert_abs_diff_eq!(s, 1.0, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn selection_rule_rows() {
        // fg = 1 -> fe = 2: me = ±2 is only reachable with q = ±1
        let scheme = LevelScheme::new(1.0, 2.0, 0.0, 0.0).unwrap();
        let d = dipole_coupling(&scheme, -1);
        assert!(d.row(4).iter().all(|&x| x == 0.0));
        assert!(d.row(3).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn spherical_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = spherical_components(Vector3::z().map(|v: f64| C64::from(v))).unwrap();
        assert_eq!((z.minus, z.zero, z.plus), (C64::zero(), C64::from(1.0), C64::zero()));

        let x = spherical_components(Vector3::x().map(|v: f64| C64::from(v))).unwrap();
        assert_abs_diff_eq!(x.minus.re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(x.plus.re, -s, epsilon = 1e-15);
        assert_eq!(x.zero, C64::zero());

        let sp = spherical_components(Vector3::new(C64::from(s), C64::new(0.0, s), C64::zero())).unwrap();
        assert!(sp.minus.norm() < 1e-15 && sp.zero.norm() < 1e-15);
        assert_abs_diff_eq!(sp.plus.re, -1.0, epsilon = 1e-15);

        assert!(matches!(
            spherical_components(Vector3::zeros()),
            Err(Error::ZeroPolarization)
        ));
    }

    #[test]
    fn cartesian_round_trip() {
        let v = Vector3::new(C64::new(0.3, -0.1), C64::new(-0.7, 0.2), C64::new(0.05, 0.4));
        let back = spherical_components(v).unwrap().cartesian();
        assert!((back - v).iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn scheme_validation() {
        assert!(LevelScheme::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(LevelScheme::new(1.0, 2.5, 0.0, 0.0).is_err());
        assert!(LevelScheme::new(1.0, 3.0, 0.0, 0.0).is_err());
        assert!(LevelScheme::new(3.0, 2.0, -0.25, 0.0).is_ok());
        assert_eq!(LevelScheme::model_transition().dim(), 4);
    }
}
