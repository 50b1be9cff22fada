//! One-dimensional Rashba ring with an in-plane field, two leads at opposite
//! points, and its scattering matrix.
//!
//! The in-plane field enters only through `xi = theta - 4 e B_pl`. Each spin
//! channel `s` of the ring is a scalar ring in a local spin frame `F_s(phi)`
//! with an effective vector potential `A_s`; waves in channel `s` are
//! `F_s(phi) exp(i (A_s +- k_phi) phi)`. Two frame models are provided:
//!
//! * [`ArmModel::TiltedFrame`]: `F_s = exp(-i beta sigma_phi(phi) / 2) chi_s`
//!   and `A_s = s phi_T`, so that the loop phase is `exp(2 pi i s phi_T)`.
//! * [`ArmModel::ExactEigenstates`]: the eigenstates of
//!   `eps [-i d_phi - (xi rho / 2) sigma_rho]^2`, with
//!   `F_s = exp(-i phi sigma_z / 2) exp(-i gamma sigma_y / 2) chi_s`,
//!   `tan gamma = xi rho` and `A_s = s (1 + phi_T) / 2`. The frame is
//!   antiperiodic, which the junction equations pick up automatically.
//!
//! Lead amplitudes are expressed in the frame of the junction they attach to:
//! `F_s(0)` on the left (the `chi~` spinors) and `F_s(pi)` on the right.

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spin::{C64, SpinOperator, Spinor2};
use crate::table::{Column, ResultTable};

const I: C64 = C64::new(0.0, 1.0);

/// Smallest angular-momentum truncation accepted by the Hamiltonian builders.
pub const MIN_TRUNCATION: usize = 8;

/// Junction systems with a larger condition number are solved by
/// least squares and flagged.
pub const MAX_CONDITION: f64 = 1e14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingParams {
    pub rho: f64,
    pub m_eff: f64,
    /// Rashba coupling `2 m alpha / hbar`, inverse length.
    pub theta: f64,
    pub b_pl: f64,
    pub charge: f64,
    pub hbar: f64,
}

impl RingParams {
    /// Natural units, unit mass.
    pub fn new(rho: f64, theta: f64, b_pl: f64) -> Self {
        Self { rho, m_eff: 1.0, theta, b_pl, charge: 1.0, hbar: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.rho, self.m_eff, self.theta, self.b_pl, self.charge, self.hbar];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("ring parameters must be finite".into()));
        }
        if !(self.rho > 0.0) {
            return Err(Error::Domain(format!("ring radius rho must be > 0, got {}", self.rho)));
        }
        if !(self.m_eff > 0.0) {
            return Err(Error::Domain(format!("effective mass must be > 0, got {}", self.m_eff)));
        }
        if !(self.hbar > 0.0) {
            return Err(Error::Domain(format!("hbar must be > 0, got {}", self.hbar)));
        }
        Ok(())
    }

    /// `hbar^2 / (2 m rho^2)`.
    pub fn energy_scale(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.m_eff * self.rho * self.rho)
    }

    /// Lead wavenumber `sqrt(2 m E) / hbar`.
    pub fn lead_wavenumber(&self, energy: f64) -> Result<f64> {
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(Error::Domain(format!("energy must be > 0, got {energy}")));
        }
        Ok((2.0 * self.m_eff * energy).sqrt() / self.hbar)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedRing {
    pub rho: f64,
    pub xi: f64,
    pub beta: f64,
    pub phi_t: f64,
}

impl DerivedRing {
    /// Builds the derived quantities straight from `xi`.
    pub fn from_xi(rho: f64, xi: f64) -> Self {
        let xr = xi * rho;
        // sqrt(1 + x^2) - 1 without cancellation.
        let phi_t = xr * xr / ((1.0 + xr * xr).sqrt() + 1.0);
        Self { rho, xi, beta: xi.atan(), phi_t }
    }

    /// `d phi_T / d xi`.
    pub fn phi_t_derivative(&self) -> f64 {
        self.xi * self.rho * self.rho / (1.0 + (self.xi * self.rho).powi(2)).sqrt()
    }

    /// Spin-texture angle `arctan(xi rho)` of the exact ring eigenstates.
    pub fn gamma(&self) -> f64 {
        (self.xi * self.rho).atan()
    }
}

pub fn derive(p: &RingParams) -> Result<DerivedRing> {
    p.validate()?;
    Ok(DerivedRing::from_xi(p.rho, p.theta - 4.0 * p.charge * p.b_pl))
}

/// `|theta - 4 e B_pl|`; zero means the total phase vanishes at every energy.
pub fn filter_case_b_condition(p: &RingParams) -> f64 {
    (p.theta - 4.0 * p.charge * p.b_pl).abs()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingState {
    pub momentum_sign: i32,
    pub spin_sign: i32,
    pub k_phi: f64,
    pub energy: f64,
}

/// The four propagating ring states at `energy`.
pub fn ring_states(p: &RingParams, energy: f64) -> Result<Vec<RingState>> {
    let k_phi = p.lead_wavenumber(energy)? * p.rho;
    let mut out = Vec::with_capacity(4);
    for momentum_sign in [1, -1] {
        for spin_sign in [1, -1] {
            out.push(RingState { momentum_sign, spin_sign, k_phi, energy: p.energy_scale() * k_phi * k_phi });
        }
    }
    Ok(out)
}

/// Angular-momentum basis `|m, sigma>` with `m` in `m_min..m_min+modes`;
/// spin up at even indices.
#[derive(Clone, Copy, Debug)]
pub struct AngularBasis {
    pub m_min: i64,
    pub modes: usize,
}

impl AngularBasis {
    pub fn centred(modes: usize) -> Result<Self> {
        if modes < MIN_TRUNCATION {
            return Err(Error::Invalid(format!("truncation {modes} below the minimum of {MIN_TRUNCATION} modes")));
        }
        Ok(Self { m_min: -(modes as i64 / 2), modes })
    }

    pub fn m_max(&self) -> i64 {
        self.m_min + self.modes as i64 - 1
    }

    pub fn index(&self, m: i64, up: bool) -> usize {
        2 * (m - self.m_min) as usize + usize::from(!up)
    }
}

/// `eps [(-i d - shift) - a sigma_rho]^2` in an angular basis. `sigma_rho`
/// lowers `m` by one when flipping down to up.
fn ring_hamiltonian(eps: f64, a: f64, shift: f64, basis: AngularBasis) -> DMatrix<C64> {
    let n = 2 * basis.modes;
    let mut h = DMatrix::zeros(n, n);
    for m in basis.m_min..=basis.m_max() {
        let k = m as f64 - shift;
        for up in [true, false] {
            let i = basis.index(m, up);
            h[(i, i)] = C64::from(eps * (k * k + a * a));
        }
        if m > basis.m_min {
            let off = C64::from(-eps * a * (2.0 * k - 1.0));
            let (r, c) = (basis.index(m - 1, true), basis.index(m, false));
            h[(r, c)] = off;
            h[(c, r)] = off;
        }
    }
    h
}

/// `eps [-i d_phi - sigma_rho xi rho / 2]^2` in `modes` angular modes.
pub fn hamiltonian_inplane(p: &RingParams, modes: usize) -> Result<DMatrix<C64>> {
    let d = derive(p)?;
    let basis = AngularBasis::centred(modes)?;
    Ok(ring_hamiltonian(p.energy_scale(), d.xi * p.rho / 2.0, 0.0, basis))
}

/// Flux through the ring in flux quanta, `e rho^2 B_z / (2 hbar)`.
pub fn perpendicular_flux(p: &RingParams, b_z: f64) -> f64 {
    p.charge * p.rho * p.rho * b_z / (2.0 * p.hbar)
}

/// `eps [-i d_phi - phi_B - sigma_rho theta rho / 2]^2`.
pub fn hamiltonian_perpendicular(p: &RingParams, b_z: f64, modes: usize) -> Result<DMatrix<C64>> {
    p.validate()?;
    if !b_z.is_finite() {
        return Err(Error::Domain("B_z must be finite".into()));
    }
    let basis = AngularBasis::centred(modes)?;
    Ok(ring_hamiltonian(p.energy_scale(), p.theta * p.rho / 2.0, perpendicular_flux(p, b_z), basis))
}

/// Reads the `sigma_rho` coefficient `a` back from a ring Hamiltonian through
/// `<m-1 up|H|m down> = -eps a (2 (m - shift) - 1)`, using the block with the
/// largest lever arm.
pub fn sigma_rho_coefficient(h: &DMatrix<C64>, eps: f64, shift: f64) -> Result<f64> {
    if h.nrows() != h.ncols() || h.nrows() % 2 != 0 {
        return Err(Error::Shape("ring Hamiltonian must be square with even size".into()));
    }
    let basis = AngularBasis::centred(h.nrows() / 2)?;
    let mut best = (0.0f64, 0.0f64);
    for m in basis.m_min + 1..=basis.m_max() {
        let lever = 2.0 * (m as f64 - shift) - 1.0;
        if lever.abs() > best.0.abs() {
            best = (lever, h[(basis.index(m - 1, true), basis.index(m, false))].re);
        }
    }
    Ok(-(best.1 / best.0) / eps)
}

/// Sorted eigenvalues of a Hermitian matrix.
pub fn eigenvalues(h: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// The lowest `count` levels `eps (n +- phi_T / 2 - shift)^2`, n integer.
pub fn analytic_spectrum(eps: f64, phi_t: f64, shift: f64, count: usize) -> Vec<f64> {
    let reach = count as i64 + 2;
    let mut ev = Vec::new();
    for n in -reach..=reach {
        for s in [1.0, -1.0] {
            let q = n as f64 + s * phi_t / 2.0 - shift;
            ev.push(eps * q * q);
        }
    }
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev.truncate(count);
    ev
}

fn rotation_y(angle: f64) -> SpinOperator {
    let (s, c) = (angle / 2.0).sin_cos();
    SpinOperator::from_entries(C64::from(c), C64::from(-s), C64::from(s), C64::from(c))
}

fn rotation_z(angle: f64) -> SpinOperator {
    let h = angle / 2.0;
    SpinOperator::from_entries(C64::from_polar(1.0, -h), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::from_polar(1.0, h))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// `exp(+-2 pi i phi_T) exp(-i beta sigma_y / 2)`.
pub fn u_phase(d: &DerivedRing, branch: Branch) -> SpinOperator {
    let sign = if branch == Branch::Plus { 1.0 } else { -1.0 };
    rotation_y(d.beta).scale(C64::from_polar(1.0, sign * 2.0 * PI * d.phi_t))
}

#[derive(Clone, Copy, Debug)]
pub struct ChiTilde {
    /// `((sqrt(xi^2+1)+1)/2, xi/2)`.
    pub plus_raw: Spinor2,
    /// `(xi/2, -(sqrt(xi^2+1)+1)/2)`.
    pub minus_raw: Spinor2,
    pub plus: Spinor2,
    pub minus: Spinor2,
}

/// The filter spinors. The normalised copies equal `exp(-i beta sigma_y/2)`
/// applied to `(1, 0)` and `(0, -1)`.
pub fn u_phase_eigenvectors(d: &DerivedRing) -> ChiTilde {
    let big = ((d.xi * d.xi + 1.0).sqrt() + 1.0) / 2.0;
    let small = d.xi / 2.0;
    let plus_raw = Spinor2::real(big, small);
    let minus_raw = Spinor2::real(small, -big);
    ChiTilde { plus_raw, minus_raw, plus: plus_raw.normalized(), minus: minus_raw.normalized() }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaseARoot {
    pub n: u32,
    pub xi: f64,
    pub xi_rho: f64,
    /// `phi_T` at the exact root, `n + 1/2` up to rounding.
    pub phi_t: f64,
    /// The small-radius value `sqrt(n + 3/2)` for `xi rho`.
    pub approx_xi_rho: f64,
    pub approx_phi_t: f64,
    /// `approx_phi_t - (n + 1/2)`.
    pub approx_deviation: f64,
}

/// Exact solutions of `2 pi phi_T = (2n+1) pi`: `xi rho = sqrt((n+3/2)^2 - 1)`.
pub fn filter_case_a_roots(rho: f64, n_max: u32) -> Result<Vec<CaseARoot>> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!("ring radius rho must be > 0, got {rho}")));
    }
    Ok((0..=n_max)
        .map(|n| {
            let t = n as f64 + 1.5;
            let xi_rho = ((t - 1.0) * (t + 1.0)).sqrt();
            let approx = t.sqrt();
            let approx_phi_t = DerivedRing::from_xi(1.0, approx).phi_t;
            CaseARoot {
                n,
                xi: xi_rho / rho,
                xi_rho,
                phi_t: DerivedRing::from_xi(rho, xi_rho / rho).phi_t,
                approx_xi_rho: approx,
                approx_phi_t,
                approx_deviation: approx_phi_t - (n as f64 + 0.5),
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArmModel {
    TiltedFrame,
    ExactEigenstates,
}

impl ArmModel {
    fn frame(self, d: &DerivedRing, s: i32, phi: f64) -> Spinor2 {
        let chi = if s == 1 { Spinor2::real(1.0, 0.0) } else { Spinor2::real(0.0, -1.0) };
        match self {
            ArmModel::TiltedFrame => {
                let (sn, cs) = phi.sin_cos();
                let sigma_phi = SpinOperator::in_plane(-sn, cs);
                let (hs, hc) = (d.beta / 2.0).sin_cos();
                let rot = SpinOperator::identity().scale(C64::from(hc)) - sigma_phi.scale(I * hs);
                rot.apply(&chi)
            }
            ArmModel::ExactEigenstates => (rotation_z(phi) * rotation_y(d.gamma())).apply(&chi),
        }
    }

    fn vector_potential(self, d: &DerivedRing, s: i32) -> f64 {
        match self {
            ArmModel::TiltedFrame => s as f64 * d.phi_t,
            ArmModel::ExactEigenstates => s as f64 * (1.0 + d.phi_t) / 2.0,
        }
    }
}

/// Transmission probabilities, right-out channel first: `t_ud` is the
/// probability of leaving right in `chi~+` after entering left in `chi~-`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransmissionSet {
    pub t_uu: f64,
    pub t_ud: f64,
    pub t_du: f64,
    pub t_dd: f64,
}

impl TransmissionSet {
    pub fn as_array(&self) -> [f64; 4] {
        [self.t_uu, self.t_ud, self.t_du, self.t_dd]
    }
}

/// Incoming-to-outgoing map in the basis
/// `[left chi~+, left chi~-, right chi~+, right chi~-]`.
#[derive(Clone, Debug)]
pub struct SMatrix {
    pub entries: Matrix4<C64>,
    /// 2-norm condition number of the junction system.
    pub condition: f64,
    /// The junction system was singular to working precision (a ring state
    /// decoupled from both leads); the matrix came from a least-squares solve.
    pub near_singular: bool,
    pub model: ArmModel,
    left_frame: [Spinor2; 2],
    right_frame: [Spinor2; 2],
}

impl SMatrix {
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.entries.adjoint() * self.entries - Matrix4::identity();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |S - S^T|`.
    pub fn reciprocity_defect(&self) -> f64 {
        let d = self.entries - self.entries.transpose();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Left-to-right transmissions.
    pub fn transmissions(&self) -> TransmissionSet {
        let t = |o: usize, i: usize| self.entries[(2 + o, i)].norm_sqr();
        TransmissionSet { t_uu: t(0, 0), t_ud: t(0, 1), t_du: t(1, 0), t_dd: t(1, 1) }
    }

    /// `sum |S_ij|^2` over each column, minus one.
    pub fn column_probability_defect(&self) -> f64 {
        (0..4)
            .map(|c| ((0..4).map(|r| self.entries[(r, c)].norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// The same map with lead amplitudes written in `sigma_z` components.
    pub fn to_sigma_z_basis(&self) -> Matrix4<C64> {
        let mut b = Matrix4::<C64>::zeros();
        for s in 0..2 {
            b[(0, s)] = self.left_frame[s].up;
            b[(1, s)] = self.left_frame[s].down;
            b[(2, 2 + s)] = self.right_frame[s].up;
            b[(3, 2 + s)] = self.right_frame[s].down;
        }
        b * self.entries * b.adjoint()
    }
}

/// Two-lead ring S-matrix with Griffith junctions in the tilted-frame phase model.
pub fn s_matrix(p: &RingParams, energy: f64) -> Result<SMatrix> {
    s_matrix_with(p, energy, ArmModel::TiltedFrame)
}

/// Two-lead ring S-matrix: spinor continuity at both junctions, and a
/// vanishing sum of outward covariant derivatives (arc length on the ring).
/// Unknowns: outgoing lead amplitudes (4) and forward/backward amplitudes on
/// the upper (`0 < phi < pi`) and lower (`pi < phi < 2 pi`) arms (8).
pub fn s_matrix_with(p: &RingParams, energy: f64, model: ArmModel) -> Result<SMatrix> {
    let d = derive(p)?;
    let k = p.lead_wavenumber(energy)?;
    let kphi = k * p.rho;

    let spins = [1i32, -1];
    let frame = |s: usize, phi: f64| model.frame(&d, spins[s], phi);
    let a = [model.vector_potential(&d, 1), model.vector_potential(&d, -1)];
    // Phase of the forward (dir = +1) or backward wave of channel s at phi.
    let wave = |s: usize, dir: f64, phi: f64| C64::from_polar(1.0, (a[s] + dir * kphi) * phi);

    const LOUT: usize = 0;
    const ROUT: usize = 2;
    let upper = |s: usize, dir: usize| 4 + 2 * s + dir;
    let lower = |s: usize, dir: usize| 8 + 2 * s + dir;
    let dirs = [1.0, -1.0];

    let mut m = DMatrix::<C64>::zeros(12, 12);
    // Rows in spinor pairs: (up, down) components of each junction equation.
    let put = |m: &mut DMatrix<C64>, eq: usize, col: usize, f: Spinor2, c: C64| {
        m[(2 * eq, col)] += f.up * c;
        m[(2 * eq + 1, col)] += f.down * c;
    };
    let one = C64::new(1.0, 0.0);
    for s in 0..2 {
        let (f0, fpi, f2pi) = (frame(s, 0.0), frame(s, PI), frame(s, 2.0 * PI));
        for (di, &dir) in dirs.iter().enumerate() {
            let (w0, wpi, w2pi) = (wave(s, dir, 0.0), wave(s, dir, PI), wave(s, dir, 2.0 * PI));
            // 0: left lead = upper arm at phi = 0.
            put(&mut m, 0, upper(s, di), f0, -w0);
            // 1: upper arm at 0 = lower arm at 2 pi.
            put(&mut m, 1, upper(s, di), f0, w0);
            put(&mut m, 1, lower(s, di), f2pi, -w2pi);
            // 2: right lead = upper arm at pi.
            put(&mut m, 2, upper(s, di), fpi, -wpi);
            // 3: upper arm at pi = lower arm at pi.
            put(&mut m, 3, upper(s, di), fpi, wpi);
            put(&mut m, 3, lower(s, di), fpi, -wpi);
            // Outward derivatives divided by i k: +-1 per wave direction.
            // 4: left junction.
            put(&mut m, 4, upper(s, di), f0, w0 * dir);
            put(&mut m, 4, lower(s, di), f2pi, -w2pi * dir);
            // 5: right junction.
            put(&mut m, 5, upper(s, di), fpi, -wpi * dir);
            put(&mut m, 5, lower(s, di), fpi, wpi * dir);
        }
        put(&mut m, 0, LOUT + s, f0, one);
        put(&mut m, 2, ROUT + s, fpi, one);
        put(&mut m, 4, LOUT + s, f0, one);
        put(&mut m, 5, ROUT + s, fpi, one);
    }

    let svd = m.clone().svd(true, true);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let near_singular = !(condition <= MAX_CONDITION);
    let lu = m.lu();

    let mut entries = Matrix4::<C64>::zeros();
    for (col, (is_left, s)) in [(true, 0), (true, 1), (false, 0), (false, 1)].into_iter().enumerate() {
        // Incoming amplitudes move to the right-hand side.
        let mut rhs = DVector::<C64>::zeros(12);
        let f = if is_left { frame(s, 0.0) } else { frame(s, PI) };
        let (cont, cur) = if is_left { (0, 4) } else { (2, 5) };
        rhs[2 * cont] -= f.up;
        rhs[2 * cont + 1] -= f.down;
        rhs[2 * cur] += f.up;
        rhs[2 * cur + 1] += f.down;
        // At a bound state in the continuum the ring amplitudes are not
        // unique, but the lead amplitudes are; take the minimum-norm solution.
        let x = if near_singular {
            svd.solve(&rhs, 1e-12 * smax).map_err(|_| Error::NearSingular { condition })?
        } else {
            lu.solve(&rhs).ok_or(Error::NearSingular { condition })?
        };
        for r in 0..4 {
            entries[(r, col)] = x[r];
        }
    }
    Ok(SMatrix {
        entries,
        condition,
        near_singular,
        model,
        left_frame: [frame(0, 0.0), frame(1, 0.0)],
        right_frame: [frame(0, PI), frame(1, PI)],
    })
}

/// `|1 + exp(+-2 pi i phi_T)|^2 / 4` in every channel.
pub fn transmissions_analytic(d: &DerivedRing) -> TransmissionSet {
    let t = (C64::new(1.0, 0.0) + C64::from_polar(1.0, 2.0 * PI * d.phi_t)).norm_sqr() / 4.0;
    TransmissionSet { t_uu: t, t_ud: t, t_du: t, t_dd: t }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVariable {
    BPl,
    Theta,
    Energy,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::BPl => "b_pl",
            SweepVariable::Theta => "theta",
            SweepVariable::Energy => "energy",
        }
    }
}

/// Column layout of [`transmission_sweep`] tables. All three inputs are
/// listed whichever one is swept.
pub fn sweep_columns() -> Vec<Column> {
    vec![
        Column::integer("index", "1", "plumbing"),
        Column::real("b_pl", "field", "sweep input"),
        Column::real("theta", "1/length", "sweep input"),
        Column::real("energy", "energy", "sweep input"),
        Column::real("xi", "1/length", "screened coupling theta - 4 e B_pl"),
        Column::real("beta", "rad", "arctan xi"),
        Column::real("phi_t", "1", "total ring phase sqrt(1 + xi^2 rho^2) - 1"),
        Column::real("t_analytic", "1", "interference factor |1 + exp(2 pi i phi_T)|^2 / 4"),
        Column::real("t_uu", "1", "S-matrix transmission"),
        Column::real("t_ud", "1", "S-matrix transmission"),
        Column::real("t_du", "1", "S-matrix transmission"),
        Column::real("t_dd", "1", "S-matrix transmission"),
        Column::real("ratio_uu", "1", "S-matrix over interference factor"),
        Column::real("ratio_dd", "1", "S-matrix over interference factor"),
        Column::real("unitarity", "1", "max |S^H S - I|"),
    ]
}

/// One sweep point.
pub fn sweep_row(p: &RingParams, energy: f64, model: ArmModel) -> Result<(DerivedRing, TransmissionSet, SMatrix)> {
    let d = derive(p)?;
    let s = s_matrix_with(p, energy, model)?;
    Ok((d, transmissions_analytic(&d), s))
}

/// Varies one of `B_pl`, `theta` or `E` over `values` with the others fixed.
pub fn transmission_sweep(
    p: &RingParams,
    energy: f64,
    values: &[f64],
    vary: SweepVariable,
    model: ArmModel,
) -> Result<ResultTable> {
    if values.is_empty() {
        return Err(Error::Invalid("empty sweep".into()));
    }
    let mut table = ResultTable::new(sweep_columns());
    for (i, &v) in values.iter().enumerate() {
        let mut q = *p;
        let mut e = energy;
        match vary {
            SweepVariable::BPl => q.b_pl = v,
            SweepVariable::Theta => q.theta = v,
            SweepVariable::Energy => e = v,
        }
        let (d, an, s) = sweep_row(&q, e, model)?;
        table.push(sweep_values(i, &q, e, &d, &an, &s))?;
    }
    let monotone = values.windows(2).all(|w| w[1] > w[0]);
    table.set_meta("vary", vary.name());
    table.set_meta("monotone_increasing", monotone);
    Ok(table)
}

pub fn sweep_values(index: usize, p: &RingParams, energy: f64, d: &DerivedRing, an: &TransmissionSet, s: &SMatrix) -> Vec<f64> {
    let t = s.transmissions();
    vec![
        index as f64,
        p.b_pl,
        p.theta,
        energy,
        d.xi,
        d.beta,
        d.phi_t,
        an.t_uu,
        t.t_uu,
        t.t_ud,
        t.t_du,
        t.t_dd,
        t.t_uu / an.t_uu,
        t.t_dd / an.t_dd,
        s.unitarity_defect(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn derive_examples() {
        let d = derive(&RingParams::new(1.0, 1.0, 0.25)).unwrap();
        assert_eq!((d.xi, d.beta, d.phi_t), (0.0, 0.0, 0.0));
        let d = DerivedRing::from_xi(1.0, 3f64.sqrt());
        assert!((d.phi_t - 1.0).abs() < 1e-15);
        let d = derive(&RingParams::new(2.0, 0.7, 0.0)).unwrap();
        assert_eq!(d.xi, 0.7);
        assert!(derive(&RingParams::new(-1.0, 0.7, 0.0)).is_err());
    }

    #[test]
    fn phi_t_derivative_matches_differences() {
        for &(rho, xi) in &[(1.0f64, 0.3f64), (2.5, -1.2), (0.4, 4.0)] {
            let h = 1e-6 * (1.0 + xi.abs());
            let fd = (DerivedRing::from_xi(rho, xi + h).phi_t - DerivedRing::from_xi(rho, xi - h).phi_t) / (2.0 * h);
            let an = DerivedRing::from_xi(rho, xi).phi_t_derivative();
            assert!((fd / an - 1.0).abs() < 1e-6, "{fd} {an}");
        }
    }

    #[test]
    fn free_ring_spectrum() {
        let p = RingParams::new(1.3, 0.5, 0.125);
        let h = hamiltonian_inplane(&p, 16).unwrap();
        let eps = p.energy_scale();
        for r in 0..32 {
            for c in 0..32 {
                if r != c {
                    assert_eq!(h[(r, c)], C64::new(0.0, 0.0));
                }
            }
        }
        let ev = eigenvalues(&h);
        assert!((ev[0]).abs() < 1e-15 && (ev[1]).abs() < 1e-15);
        assert!((ev[2] - eps).abs() < 1e-14 && (ev[5] - eps).abs() < 1e-14);
        assert!(hamiltonian_inplane(&p, 7).is_err());
    }

    #[test]
    fn spectrum_matches_analytic_levels() {
        for &xi in &[0.4, 1.7, -2.3] {
            let p = RingParams::new(1.1, xi, 0.0);
            let d = derive(&p).unwrap();
            let h = hamiltonian_inplane(&p, 64).unwrap();
            assert!((&h - h.adjoint()).iter().all(|z| z.norm() <= 1e-13));
            let ev = eigenvalues(&h);
            let an = analytic_spectrum(p.energy_scale(), d.phi_t, 0.0, 40);
            for (a, b) in ev.iter().zip(&an) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b), "{a} {b}");
            }
        }
    }

    #[test]
    fn perpendicular_field_shifts_angular_momentum() {
        let p = RingParams::new(1.0, 0.8, 0.0);
        let h0 = hamiltonian_perpendicular(&p, 0.0, 32).unwrap();
        let hin = hamiltonian_inplane(&p, 32).unwrap();
        assert!((&h0 - &hin).iter().all(|z| z.norm() <= 1e-13));
        let b_z = 0.6;
        let shift = perpendicular_flux(&p, b_z);
        assert!((shift - 0.3).abs() < 1e-15);
        let ev = eigenvalues(&hamiltonian_perpendicular(&p, b_z, 64).unwrap());
        let d = derive(&p).unwrap();
        let an = analytic_spectrum(p.energy_scale(), d.phi_t, shift, 30);
        for (a, b) in ev.iter().zip(&an) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b));
        }
        let eps = p.energy_scale();
        for bz in [0.0, 0.3, 1.7, -4.0] {
            let h = hamiltonian_perpendicular(&p, bz, 16).unwrap();
            let a = sigma_rho_coefficient(&h, eps, perpendicular_flux(&p, bz)).unwrap();
            assert!((a - 0.4).abs() < 1e-14);
        }
    }

    #[test]
    fn u_phase_examples() {
        let u = u_phase(&DerivedRing::from_xi(1.0, 0.0), Branch::Plus);
        assert!(u.max_abs_diff(&SpinOperator::identity()) < 1e-15);
        let half = DerivedRing { rho: 1.0, xi: 0.0, beta: 0.0, phi_t: 0.5 };
        assert!(u_phase(&half, Branch::Plus).max_abs_diff(&SpinOperator::identity().scale(C64::from(-1.0))) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let d = DerivedRing::from_xi(rng.gen_range(0.2..3.0), rng.gen_range(-5.0..5.0));
            for b in [Branch::Plus, Branch::Minus] {
                let u = u_phase(&d, b);
                assert!(u.is_unitary(1e-14));
                let sign = if b == Branch::Plus { 1.0 } else { -1.0 };
                assert!((u.det() - C64::from_polar(1.0, sign * 4.0 * PI * d.phi_t)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn chi_tilde_examples() {
        let c = u_phase_eigenvectors(&DerivedRing::from_xi(1.0, 0.0));
        assert!(c.plus.max_abs_diff(&Spinor2::real(1.0, 0.0)) < 1e-15);
        assert!(c.minus.max_abs_diff(&Spinor2::real(0.0, -1.0)) < 1e-15);
        let c = u_phase_eigenvectors(&DerivedRing::from_xi(1.0, 1.0));
        assert!(c.plus_raw.max_abs_diff(&Spinor2::real((2f64.sqrt() + 1.0) / 2.0, 0.5)) < 1e-15);
        let d = DerivedRing::from_xi(1.0, -0.7);
        let c = u_phase_eigenvectors(&d);
        assert!(((c.plus.down / c.plus.up).re - (d.beta / 2.0).tan()).abs() < 1e-13);
        let f = ArmModel::TiltedFrame.frame(&d, 1, 0.0);
        assert!(f.max_abs_diff(&c.plus) < 1e-15);
        assert!(ArmModel::TiltedFrame.frame(&d, -1, 0.0).max_abs_diff(&c.minus) < 1e-15);
    }

    #[test]
    fn case_a_roots() {
        let r = filter_case_a_roots(2.0, 3).unwrap();
        assert!((r[0].xi_rho - 5f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((r[0].xi - 5f64.sqrt() / 4.0).abs() < 1e-15);
        for root in &r {
            assert!((root.phi_t - (root.n as f64 + 0.5)).abs() < 1e-14);
        }
        assert!((r[0].approx_xi_rho - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((r[0].approx_phi_t - 0.5811).abs() < 1e-4);
        assert!(r.windows(2).all(|w| w[1].xi > w[0].xi));
        assert!(filter_case_a_roots(0.0, 1).is_err());
    }

    #[test]
    fn case_b_condition() {
        assert_eq!(filter_case_b_condition(&RingParams::new(1.0, 1.0, 0.25)), 0.0);
        assert_eq!(filter_case_b_condition(&RingParams::new(1.0, 1.0, 0.0)), 1.0);
    }

    #[test]
    fn analytic_transmissions() {
        let t = |phi_t| transmissions_analytic(&DerivedRing { rho: 1.0, xi: 0.0, beta: 0.0, phi_t }).t_uu;
        assert!((t(0.0) - 1.0).abs() < 1e-15);
        assert!(t(0.5) < 1e-30);
        assert!((t(0.25) - 0.5).abs() < 1e-15);
    }

    /// Scalar ring built from two three-leg Griffith nodes `S = (2/3) J - I`
    /// and arm propagators, for a channel with vector potential `a`.
    fn node_composition(kphi: f64, a: f64, antiperiodic: bool) -> nalgebra::Matrix2<C64> {
        let node = |i: usize, j: usize| if i == j { C64::from(-1.0 / 3.0) } else { C64::from(2.0 / 3.0) };
        let sign = if antiperiodic { -1.0 } else { 1.0 };
        // Arm propagation: counter-clockwise across half the ring picks up
        // exp(i (kphi + a) pi), clockwise exp(i (kphi - a) pi). The lower arm
        // closes the loop and carries the frame sign.
        let ccw = C64::from_polar(1.0, (kphi + a) * PI);
        let cw = C64::from_polar(1.0, (kphi - a) * PI);
        // Unknowns: amplitude leaving node 0 into upper (u0) and lower (l0)
        // arms, leaving node pi into upper (u1) and lower (l1).
        // Node 0 legs: [lead, upper, lower]; node pi legs: [lead, upper, lower].
        // Arriving at node 0 via upper: cw * u1. Via lower: ccw * l1 * sign.
        // Arriving at node pi via upper: ccw * u0. Via lower: cw * l0 * sign.
        let mut m = nalgebra::Matrix4::<C64>::identity();
        let mut out = nalgebra::Matrix2::<C64>::zeros();
        m[(0, 2)] -= node(1, 1) * cw;
        m[(0, 3)] -= node(1, 2) * ccw * sign;
        m[(1, 2)] -= node(2, 1) * cw;
        m[(1, 3)] -= node(2, 2) * ccw * sign;
        m[(2, 0)] -= node(1, 1) * ccw;
        m[(2, 1)] -= node(1, 2) * cw * sign;
        m[(3, 0)] -= node(2, 1) * ccw;
        m[(3, 1)] -= node(2, 2) * cw * sign;
        let lu = m.lu();
        for inc in 0..2 {
            let mut rhs = nalgebra::Vector4::<C64>::zeros();
            if inc == 0 {
                rhs[0] = node(1, 0);
                rhs[1] = node(2, 0);
            } else {
                rhs[2] = node(1, 0);
                rhs[3] = node(2, 0);
            }
            let x = lu.solve(&rhs).unwrap();
            let arrive0 = node(0, 1) * cw * x[2] + node(0, 2) * ccw * sign * x[3];
            let arrive1 = node(0, 1) * ccw * x[0] + node(0, 2) * cw * sign * x[1];
            if inc == 0 {
                out[(0, 0)] = node(0, 0) + arrive0;
                out[(1, 0)] = arrive1;
            } else {
                out[(0, 1)] = arrive0;
                out[(1, 1)] = node(0, 0) + arrive1;
            }
        }
        out
    }

    #[test]
    fn s_matrix_matches_node_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let p = RingParams::new(rng.gen_range(0.5..2.0), rng.gen_range(-3.0..3.0), rng.gen_range(-0.5..0.5));
            let e = rng.gen_range(0.05..20.0);
            let d = derive(&p).unwrap();
            let kphi = p.lead_wavenumber(e).unwrap() * p.rho;
            for model in [ArmModel::TiltedFrame, ArmModel::ExactEigenstates] {
                let s = s_matrix_with(&p, e, model).unwrap();
                for (ch, sgn) in [(0usize, 1i32), (1, -1)] {
                    let a = model.vector_potential(&d, sgn);
                    let oracle = node_composition(kphi, a, model == ArmModel::ExactEigenstates);
                    let idx = [ch, 2 + ch];
                    for r in 0..2 {
                        for c in 0..2 {
                            let got = s.entries[(idx[r], idx[c])];
                            assert!((got - oracle[(r, c)]).norm() < 1e-10, "{model:?} ch {ch} {r}{c}: {got} vs {}", oracle[(r, c)]);
                        }
                    }
                }
                // No scattering between channels.
                for (r, c) in [(0, 1), (1, 0), (0, 3), (1, 2), (2, 1), (3, 0), (2, 3), (3, 2)] {
                    assert!(s.entries[(r, c)].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn s_matrix_unitary_and_destructive_at_half_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = RingParams::new(1.0, rng.gen_range(-4.0..4.0), 0.0);
            let s = s_matrix(&p, rng.gen_range(0.05..30.0)).unwrap();
            assert!(s.unitarity_defect() < 1e-10);
            assert!(s.column_probability_defect() < 1e-10);
        }
        for root in filter_case_a_roots(1.0, 3).unwrap() {
            let p = RingParams::new(1.0, root.xi, 0.0);
            for e in [0.3, 2.0, 7.5] {
                let t = s_matrix(&p, e).unwrap().transmissions();
                assert!(t.as_array().iter().all(|&x| x < 1e-10), "{t:?}");
            }
        }
        assert!(s_matrix(&RingParams::new(1.0, 0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn bound_state_in_continuum_is_flagged() {
        // xi = 0 and k_phi = 1: sin(phi) vanishes at both junctions.
        let s = s_matrix(&RingParams::new(1.0, 0.0, 0.0), 0.5).unwrap();
        assert!(s.near_singular);
        assert!(s.unitarity_defect() < 1e-10);
        assert!(!s_matrix(&RingParams::new(1.0, 0.0, 0.0), 0.6).unwrap().near_singular);
    }

    #[test]
    fn sigma_z_basis_mixes_spin() {
        let p = RingParams::new(1.0, 0.9, 0.0);
        let s = s_matrix(&p, 1.3).unwrap();
        let z = s.to_sigma_z_basis();
        let defect = (z.adjoint() * z - Matrix4::identity()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(defect < 1e-10);
        assert!(z[(2, 1)].norm() > 1e-3 || z[(3, 0)].norm() > 1e-3);
    }

    #[test]
    fn sweep_table_shape() {
        let p = RingParams::new(1.0, 1.0, 0.0);
        let t = transmission_sweep(&p, 1.0, &[0.1, 0.2, 0.3], SweepVariable::BPl, ArmModel::TiltedFrame).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(transmission_sweep(&p, 1.0, &[], SweepVariable::Energy, ArmModel::TiltedFrame).is_err());
    }
}
