//! Pauli algebra in rotated and cylindrical frames, plus charge conjugation.

use nalgebra::Matrix2;
use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Two-component spinor `(up, down)` in the sigma_z basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spinor2 {
    pub up: C64,
    pub down: C64,
}

impl Spinor2 {
    pub const fn new(up: C64, down: C64) -> Self {
        Self { up, down }
    }

    pub fn real(up: f64, down: f64) -> Self {
        Self::new(C64::new(up, 0.0), C64::new(down, 0.0))
    }

    pub fn zero() -> Self {
        Self::new(ZERO, ZERO)
    }

    pub fn is_finite(&self) -> bool {
        self.up.is_finite() && self.down.is_finite()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.up.norm_sqr() + self.down.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self, other>`, antilinear in the first slot.
    pub fn inner(&self, other: &Spinor2) -> C64 {
        self.up.conj() * other.up + self.down.conj() * other.down
    }

    pub fn conj(&self) -> Self {
        Self::new(self.up.conj(), self.down.conj())
    }

    pub fn scale(&self, a: C64) -> Self {
        Self::new(a * self.up, a * self.down)
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.up / n, self.down / n)
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, other: &Spinor2) -> f64 {
        (self.up - other.up).norm().max((self.down - other.down).norm())
    }
}

impl Add for Spinor2 {
    type Output = Spinor2;
    fn add(self, o: Spinor2) -> Spinor2 {
        Spinor2::new(self.up + o.up, self.down + o.down)
    }
}

impl Sub for Spinor2 {
    type Output = Spinor2;
    fn sub(self, o: Spinor2) -> Spinor2 {
        Spinor2::new(self.up - o.up, self.down - o.down)
    }
}

impl Neg for Spinor2 {
    type Output = Spinor2;
    fn neg(self) -> Spinor2 {
        Spinor2::new(-self.up, -self.down)
    }
}

/// A 2x2 complex matrix acting on [`Spinor2`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinOperator(pub Matrix2<C64>);

impl SpinOperator {
    pub fn from_entries(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self(Matrix2::new(a, b, c, d))
    }

    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn sigma_x() -> Self {
        Self::from_entries(ZERO, ONE, ONE, ZERO)
    }

    pub fn sigma_y() -> Self {
        Self::from_entries(ZERO, -I, I, ZERO)
    }

    pub fn sigma_z() -> Self {
        Self::from_entries(ONE, ZERO, ZERO, -ONE)
    }

    /// `a sigma_x + b sigma_y`.
    pub fn in_plane(a: f64, b: f64) -> Self {
        let sx = Self::sigma_x().0;
        let sy = Self::sigma_y().0;
        Self(sx * C64::from(a) + sy * C64::from(b))
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.0[(r, c)]
    }

    pub fn apply(&self, psi: &Spinor2) -> Spinor2 {
        let m = &self.0;
        Spinor2::new(
            m[(0, 0)] * psi.up + m[(0, 1)] * psi.down,
            m[(1, 0)] * psi.up + m[(1, 1)] * psi.down,
        )
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, a: C64) -> Self {
        Self(self.0 * a)
    }

    pub fn trace(&self) -> C64 {
        self.0[(0, 0)] + self.0[(1, 1)]
    }

    pub fn det(&self) -> C64 {
        self.0[(0, 0)] * self.0[(1, 1)] - self.0[(0, 1)] * self.0[(1, 0)]
    }

    /// Entry-wise max-norm distance.
    pub fn max_abs_diff(&self, other: &SpinOperator) -> f64 {
        (self.0 - other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (*self * self.adjoint()).max_abs_diff(&Self::identity()) <= tol
    }

    pub fn anticommutator(&self, other: &SpinOperator) -> Self {
        *self * *other + *other * *self
    }
}

impl Mul for SpinOperator {
    type Output = SpinOperator;
    fn mul(self, o: SpinOperator) -> SpinOperator {
        SpinOperator(self.0 * o.0)
    }
}

impl Add for SpinOperator {
    type Output = SpinOperator;
    fn add(self, o: SpinOperator) -> SpinOperator {
        SpinOperator(self.0 + o.0)
    }
}

impl Sub for SpinOperator {
    type Output = SpinOperator;
    fn sub(self, o: SpinOperator) -> SpinOperator {
        SpinOperator(self.0 - o.0)
    }
}

fn check_angle(name: &str, a: f64) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {a}")))
    }
}

/// `(sigma_B, sigma_perp)` for an in-plane field at angle `omega` from the x axis.
pub fn make_inplane_basis(omega: f64) -> Result<(SpinOperator, SpinOperator)> {
    check_angle("omega", omega)?;
    let (s, c) = omega.sin_cos();
    Ok((SpinOperator::in_plane(c, s), SpinOperator::in_plane(-s, c)))
}

/// Cylindrical frame at azimuth `phi` together with the in-plane field frame.
#[derive(Clone, Copy, Debug)]
pub struct CylBasis {
    pub sigma_rho: SpinOperator,
    pub sigma_phi: SpinOperator,
    pub sigma_b: SpinOperator,
    pub sigma_perp: SpinOperator,
}

pub fn make_cyl_basis(phi: f64, omega: f64) -> Result<CylBasis> {
    check_angle("phi", phi)?;
    let (sigma_b, sigma_perp) = make_inplane_basis(omega)?;
    let (s, c) = phi.sin_cos();
    Ok(CylBasis {
        sigma_rho: SpinOperator::in_plane(c, s),
        sigma_phi: SpinOperator::in_plane(-s, c),
        sigma_b,
        sigma_perp,
    })
}

/// Antilinear charge conjugation `psi -> M psi*`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChargeConjugation {
    pub matrix_part: SpinOperator,
    pub conjugates: bool,
}

impl ChargeConjugation {
    /// The convention used throughout the crate: `M = sigma_x`, so that the
    /// doublet `(f, f*)` is the `+1` eigenstate and the operator squares to one.
    pub fn standard() -> Self {
        Self {
            matrix_part: SpinOperator::sigma_x(),
            conjugates: true,
        }
    }

    pub fn apply(&self, psi: &Spinor2) -> Spinor2 {
        let v = if self.conjugates { psi.conj() } else { *psi };
        self.matrix_part.apply(&v)
    }
}

impl Default for ChargeConjugation {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn apply_charge_conjugation(c: &ChargeConjugation, psi: &Spinor2) -> Spinor2 {
    c.apply(psi)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MajoranaResult {
    pub is_majorana: bool,
    /// Best-fit unimodular constant, present only when the test passes.
    pub phase: Option<C64>,
    /// `|C psi - c psi| / |psi|` for the least-squares `c`.
    pub residual: f64,
}

/// Least-squares `c` in `C psi = c psi`, and the relative misfit.
pub fn majorana_fit(cc: &ChargeConjugation, psi: &Spinor2) -> Result<(C64, f64)> {
    let n2 = psi.norm_sqr();
    if !(n2 > 0.0) || !psi.is_finite() {
        return Err(Error::Domain("majorana check needs a nonzero finite spinor".into()));
    }
    let cpsi = cc.apply(psi);
    let c = psi.inner(&cpsi) / n2;
    let residual = (cpsi - psi.scale(c)).norm() / n2.sqrt();
    Ok((c, residual))
}

/// `C psi = c psi` with `|c| = 1` within `tolerance`, using the standard convention.
pub fn majorana_check(psi: &Spinor2, tolerance: f64) -> Result<MajoranaResult> {
    majorana_check_with(&ChargeConjugation::standard(), psi, tolerance)
}

pub fn majorana_check_with(
    cc: &ChargeConjugation,
    psi: &Spinor2,
    tolerance: f64,
) -> Result<MajoranaResult> {
    let (c, residual) = majorana_fit(cc, psi)?;
    let ok = residual <= tolerance && (c.norm() - 1.0).abs() <= tolerance;
    Ok(MajoranaResult {
        is_majorana: ok,
        phase: ok.then_some(c),
        residual,
    })
}

fn test_basis() -> [Spinor2; 4] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [
        Spinor2::new(ONE, ZERO),
        Spinor2::new(ZERO, ONE),
        Spinor2::new(C64::new(r, 0.0), C64::new(0.0, r)),
        Spinor2::new(C64::new(0.6, 0.0), C64::new(0.0, -0.8)),
    ]
}

/// Max deviation between `-i e sigma_B sigma_z A_z` and `i e (i sigma_perp) A_z`
/// on a fixed set of test spinors, with `e = 1`.
///
/// The product `sigma_B sigma_z` equals `-i sigma_perp`, so the coupling that
/// turns the z potential into a momentum shift along B is the linear matrix
/// `i sigma_perp`. [`generalized_momentum_identity_with`] compares against an
/// arbitrary (possibly antilinear) conjugation instead.
pub fn generalized_momentum_identity(a_z: f64, omega: f64) -> Result<f64> {
    let (_, sperp) = make_inplane_basis(omega)?;
    let coupling = ChargeConjugation {
        matrix_part: sperp.scale(I),
        conjugates: false,
    };
    generalized_momentum_identity_with(a_z, omega, &coupling)
}

pub fn generalized_momentum_identity_with(
    a_z: f64,
    omega: f64,
    coupling: &ChargeConjugation,
) -> Result<f64> {
    if !a_z.is_finite() {
        return Err(Error::Domain(format!("A_z must be finite, got {a_z}")));
    }
    let (sb, _) = make_inplane_basis(omega)?;
    let lhs = (sb * SpinOperator::sigma_z()).scale(-I * a_z);
    let mut worst: f64 = 0.0;
    for psi in test_basis() {
        let l = lhs.apply(&psi);
        let r = coupling.apply(&psi).scale(I * a_z);
        worst = worst.max(l.max_abs_diff(&r));
    }
    Ok(worst)
}
