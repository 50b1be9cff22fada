//! Zero modes of the 2D Dirac operator in a localized perpendicular field.
//!
//! Geometry: `L x L` nodes with spacing `h`, centred on the origin. The field
//! lives on the `(L-1)^2` plaquettes. The scalar potential `phi` with
//! `lap phi = B` is solved on the dual lattice (plaquette centres plus one
//! ring of exterior points carrying the Dirichlet data), and link integrals of
//! `A = (-d_y phi, d_x phi)` are differences of dual values. Every plaquette
//! circulation then equals `h^2 (lap_h phi)_p = flux_p` up to the solver
//! residual.
//!
//! The operator `sigma_x nabla_x + sigma_y nabla_y` uses symmetric covariant
//! differences with link transporters `U = exp(-i e int A.dl)`. It is
//! off-diagonal in spin with blocks `D+ = nabla_x + i nabla_y` and
//! `D- = -D+^H`, and `D+` itself only connects the two sublattices. Zero modes
//! are therefore counted from the even-to-odd block of `D+`: its right singular
//! vectors are spin-up modes, its left singular vectors spin-down modes.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, smallest_singular_triplets, BandedLu, SubspaceOptions};
use crate::spin::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Flux quantum `2 pi / e`.
pub fn flux_quantum(charge: f64) -> f64 {
    2.0 * PI / charge.abs()
}

/// Field samples per plaquette on an `L x L` node lattice.
#[derive(Clone, Debug)]
pub struct FluxProfile2D {
    pub l: usize,
    pub h: f64,
    pub charge: f64,
    /// `(L-1)^2` samples, `x` fastest.
    pub b: Vec<f64>,
    /// Declared total flux in units of the flux quantum.
    pub total_flux: f64,
    /// Radius outside which the field vanishes; also the reference radius of
    /// the boundary potential.
    pub support_radius: f64,
}

impl FluxProfile2D {
    fn check_lattice(l: usize, h: f64, charge: f64) -> Result<()> {
        if l < 4 || l % 2 != 0 {
            return Err(Error::Domain(format!("lattice size must be even and >= 4, got {l}")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Domain(format!("spacing must be positive, got {h}")));
        }
        if !(charge != 0.0) || !charge.is_finite() {
            return Err(Error::Domain(format!("charge must be nonzero, got {charge}")));
        }
        Ok(())
    }

    /// Plaquette centre `(p, q)`.
    pub fn plaquette_center(&self, p: usize, q: usize) -> (f64, f64) {
        let c = (self.l as f64 - 2.0) / 2.0;
        ((p as f64 - c) * self.h, (q as f64 - c) * self.h)
    }

    /// Half the side of the central half of the box.
    pub fn central_half_radius(l: usize, h: f64) -> f64 {
        (l as f64 - 1.0) * h / 4.0
    }

    fn from_shape<F: Fn(f64, f64) -> f64>(
        l: usize,
        h: f64,
        flux_quanta: f64,
        charge: f64,
        support: f64,
        shape: F,
    ) -> Result<Self> {
        Self::check_lattice(l, h, charge)?;
        let mut prof = Self { l, h, charge, b: vec![0.0; (l - 1) * (l - 1)], total_flux: flux_quanta, support_radius: support };
        let mut sum = 0.0;
        for q in 0..l - 1 {
            for p in 0..l - 1 {
                let (x, y) = prof.plaquette_center(p, q);
                let v = shape(x, y);
                prof.b[q * (l - 1) + p] = v;
                sum += v;
            }
        }
        let target = flux_quanta * flux_quantum(charge);
        if target == 0.0 {
            prof.b.iter_mut().for_each(|v| *v = 0.0);
        } else {
            if !(sum > 0.0) {
                return Err(Error::Domain("field profile has no support on this lattice".into()));
            }
            let scale = target / (h * h * sum);
            for v in &mut prof.b {
                *v *= scale;
            }
        }
        prof.validate()?;
        Ok(prof)
    }

    /// Gaussian tube with width `sigma = L h / 12`, cut at the central half and
    /// renormalised to the declared flux.
    pub fn gaussian(l: usize, h: f64, flux_quanta: f64, charge: f64) -> Result<Self> {
        let sigma = l as f64 * h / 12.0;
        let cut = Self::central_half_radius(l, h);
        Self::from_shape(l, h, flux_quanta, charge, cut, |x, y| {
            let r2 = x * x + y * y;
            if r2.sqrt() < cut {
                (-r2 / (2.0 * sigma * sigma)).exp()
            } else {
                0.0
            }
        })
    }

    /// Uniform disk of radius `a`; each plaquette is weighted by its covered
    /// area (16 x 16 sub-samples).
    pub fn uniform_disk(l: usize, h: f64, flux_quanta: f64, radius: f64, charge: f64) -> Result<Self> {
        let sub = 16;
        Self::from_shape(l, h, flux_quanta, charge, radius, |x, y| {
            let mut inside = 0;
            for a in 0..sub {
                for b in 0..sub {
                    let sx = x + h * ((a as f64 + 0.5) / sub as f64 - 0.5);
                    let sy = y + h * ((b as f64 + 0.5) / sub as f64 - 0.5);
                    if sx * sx + sy * sy < radius * radius {
                        inside += 1;
                    }
                }
            }
            inside as f64 / (sub * sub) as f64
        })
    }

    /// Physical flux `h^2 sum B`.
    pub fn flux(&self) -> f64 {
        self.h * self.h * self.b.iter().sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        Self::check_lattice(self.l, self.h, self.charge)?;
        if self.b.len() != (self.l - 1) * (self.l - 1) {
            return Err(Error::Shape("one field sample per plaquette expected".into()));
        }
        let declared = self.total_flux * flux_quantum(self.charge);
        if (self.flux() - declared).abs() > 1e-10 * declared.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "sampled flux {} differs from declared {declared}",
                self.flux()
            )));
        }
        let half = Self::central_half_radius(self.l, self.h);
        for q in 0..self.l - 1 {
            for p in 0..self.l - 1 {
                if self.b[q * (self.l - 1) + p] != 0.0 {
                    let (x, y) = self.plaquette_center(p, q);
                    if x.abs() >= half || y.abs() >= half {
                        return Err(Error::Domain("field must vanish outside the central half".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Potential on the dual lattice, plus node values by four-point averaging.
#[derive(Clone, Debug)]
pub struct ScalarPotential2D {
    pub l: usize,
    pub h: f64,
    /// `(L+1)^2` dual values; dual index `p` in `-1..=L-1` is stored at `p+1`.
    pub dual: Vec<f64>,
    /// `L^2` node values.
    pub nodes: Vec<f64>,
    pub iterations: usize,
    /// `max |lap_h phi - B|` over plaquettes.
    pub residual: f64,
}

impl ScalarPotential2D {
    #[inline]
    pub fn dual_at(&self, p: isize, q: isize) -> f64 {
        let w = self.l + 1;
        self.dual[(q + 1) as usize * w + (p + 1) as usize]
    }

    pub fn node_at(&self, i: usize, j: usize) -> f64 {
        self.nodes[j * self.l + i]
    }
}

/// Solves `lap phi = B` with `phi = (Phi / 2 pi) ln(r / r0)` on the exterior
/// dual ring, `r0` the support radius.
pub fn poisson_solve(flux: &FluxProfile2D) -> Result<ScalarPotential2D> {
    flux.validate()?;
    let l = flux.l;
    let m = l - 1;
    let w = l + 1;
    let h = flux.h;
    let phys = flux.flux();
    let r0 = flux.support_radius.max(h);
    let mut dual = vec![0.0; w * w];
    let center = (l as f64 - 2.0) / 2.0;
    for q in -1..=(m as isize) {
        for p in -1..=(m as isize) {
            let ring = p == -1 || q == -1 || p == m as isize || q == m as isize;
            if ring {
                let x = (p as f64 - center) * h;
                let y = (q as f64 - center) * h;
                let r = (x * x + y * y).sqrt();
                dual[(q + 1) as usize * w + (p + 1) as usize] = phys / (2.0 * PI) * (r / r0).ln();
            }
        }
    }

    // -lap_h on the interior, Dirichlet data moved to the right-hand side.
    let mut rhs = vec![0.0; m * m];
    for q in 0..m {
        for p in 0..m {
            let mut v = -h * h * flux.b[q * m + p];
            let at = |pp: isize, qq: isize| dual[(qq + 1) as usize * w + (pp + 1) as usize];
            let (pi, qi) = (p as isize, q as isize);
            if p == 0 {
                v += at(-1, qi);
            }
            if p == m - 1 {
                v += at(m as isize, qi);
            }
            if q == 0 {
                v += at(pi, -1);
            }
            if q == m - 1 {
                v += at(pi, m as isize);
            }
            rhs[q * m + p] = v;
        }
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for q in 0..m {
            for p in 0..m {
                let k = q * m + p;
                let mut s = 4.0 * x[k];
                if p > 0 {
                    s -= x[k - 1];
                }
                if p + 1 < m {
                    s -= x[k + 1];
                }
                if q > 0 {
                    s -= x[k - m];
                }
                if q + 1 < m {
                    s -= x[k + m];
                }
                y[k] = s;
            }
        }
    };
    let sol = conjugate_gradient(apply, &rhs, 1e-14, 20 * m * m + 100)?;
    for q in 0..m {
        for p in 0..m {
            dual[(q + 1) * w + p + 1] = sol.x[q * m + p];
        }
    }

    let mut pot = ScalarPotential2D { l, h, dual, nodes: vec![0.0; l * l], iterations: sol.iterations, residual: 0.0 };
    let mut res: f64 = 0.0;
    for q in 0..m as isize {
        for p in 0..m as isize {
            let lap = (pot.dual_at(p + 1, q) + pot.dual_at(p - 1, q) + pot.dual_at(p, q + 1) + pot.dual_at(p, q - 1)
                - 4.0 * pot.dual_at(p, q))
                / (h * h);
            res = res.max((lap - flux.b[q as usize * m + p as usize]).abs());
        }
    }
    pot.residual = res;
    for j in 0..l as isize {
        for i in 0..l as isize {
            let v = 0.25 * (pot.dual_at(i - 1, j - 1) + pot.dual_at(i, j - 1) + pot.dual_at(i - 1, j) + pot.dual_at(i, j));
            pot.nodes[j as usize * l + i as usize] = v;
        }
    }
    Ok(pot)
}

/// Lattice Dirac operator with Peierls transporters.
#[derive(Clone, Debug)]
pub struct LatticeDiracOp {
    pub l: usize,
    pub h: f64,
    pub charge: f64,
    /// Total flux in flux quanta.
    pub total_flux: f64,
    pub support_radius: f64,
    /// Transporter on `(i,j) -> (i+1,j)`, stored at `j L + i`.
    pub ux: Vec<C64>,
    /// Transporter on `(i,j) -> (i,j+1)`, stored at `j L + i`.
    pub uy: Vec<C64>,
}

/// Assembles the operator in the symmetric gauge of the solved potential.
pub fn lattice_assemble(flux: &FluxProfile2D, e: f64) -> Result<LatticeDiracOp> {
    let pot = poisson_solve(flux)?;
    Ok(assemble_from_potential(flux, &pot, e))
}

pub fn assemble_from_potential(flux: &FluxProfile2D, pot: &ScalarPotential2D, e: f64) -> LatticeDiracOp {
    let l = flux.l;
    let mut ux = vec![C64::new(1.0, 0.0); l * l];
    let mut uy = vec![C64::new(1.0, 0.0); l * l];
    for j in 0..l {
        for i in 0..l {
            let (ii, jj) = (i as isize, j as isize);
            if i + 1 < l {
                // Link between plaquettes (i, j-1) below and (i, j) above.
                let int_a = -(pot.dual_at(ii, jj) - pot.dual_at(ii, jj - 1));
                ux[j * l + i] = (-I * e * int_a).exp();
            }
            if j + 1 < l {
                // Link between plaquettes (i-1, j) left and (i, j) right.
                let int_a = pot.dual_at(ii, jj) - pot.dual_at(ii - 1, jj);
                uy[j * l + i] = (-I * e * int_a).exp();
            }
        }
    }
    LatticeDiracOp {
        l,
        h: flux.h,
        charge: e,
        total_flux: flux.total_flux,
        support_radius: flux.support_radius,
        ux,
        uy,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sublattice {
    Even,
    Odd,
}

impl LatticeDiracOp {
    pub fn sites(&self) -> usize {
        self.l * self.l
    }

    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        let c = (self.l as f64 - 1.0) / 2.0;
        ((i as f64 - c) * self.h, (j as f64 - c) * self.h)
    }

    /// `exp(+i e circulation)` of plaquette `(p, q)`, which should equal
    /// `exp(i e flux_p)`.
    pub fn plaquette_phase(&self, p: usize, q: usize) -> C64 {
        let l = self.l;
        let hol = self.ux[q * l + p] * self.uy[q * l + p + 1] * self.ux[(q + 1) * l + p].conj() * self.uy[q * l + p].conj();
        hol.conj()
    }

    /// `A -> A + grad chi` for node values `chi`.
    pub fn gauge_transformed(&self, chi: &[f64]) -> Result<Self> {
        let l = self.l;
        if chi.len() != l * l {
            return Err(Error::Shape(format!("gauge function needs {} values", l * l)));
        }
        let mut out = self.clone();
        for j in 0..l {
            for i in 0..l {
                let k = j * l + i;
                if i + 1 < l {
                    out.ux[k] *= (-I * self.charge * (chi[k + 1] - chi[k])).exp();
                }
                if j + 1 < l {
                    out.uy[k] *= (-I * self.charge * (chi[k + l] - chi[k])).exp();
                }
            }
        }
        Ok(out)
    }

    /// `(nabla_x f, nabla_y f)` with open boundaries.
    fn covariant_gradient(&self, f: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let l = self.l;
        let inv = 1.0 / (2.0 * self.h);
        let mut gx = vec![C64::new(0.0, 0.0); l * l];
        let mut gy = vec![C64::new(0.0, 0.0); l * l];
        for j in 0..l {
            for i in 0..l {
                let k = j * l + i;
                let mut sx = C64::new(0.0, 0.0);
                if i + 1 < l {
                    sx += self.ux[k] * f[k + 1];
                }
                if i > 0 {
                    sx -= self.ux[k - 1].conj() * f[k - 1];
                }
                let mut sy = C64::new(0.0, 0.0);
                if j + 1 < l {
                    sy += self.uy[k] * f[k + l];
                }
                if j > 0 {
                    sy -= self.uy[k - l].conj() * f[k - l];
                }
                gx[k] = sx * inv;
                gy[k] = sy * inv;
            }
        }
        (gx, gy)
    }

    /// `(nabla_x + i nabla_y) f`, the spin-up to spin-down block.
    pub fn apply_d_plus(&self, f: &[C64]) -> Vec<C64> {
        let (gx, gy) = self.covariant_gradient(f);
        gx.iter().zip(&gy).map(|(a, b)| a + I * b).collect()
    }

    /// `(nabla_x - i nabla_y) f`, the spin-down to spin-up block.
    pub fn apply_d_minus(&self, f: &[C64]) -> Vec<C64> {
        let (gx, gy) = self.covariant_gradient(f);
        gx.iter().zip(&gy).map(|(a, b)| a - I * b).collect()
    }

    /// Full operator on `(up, down)` fields.
    pub fn apply(&self, up: &[C64], down: &[C64]) -> (Vec<C64>, Vec<C64>) {
        (self.apply_d_minus(down), self.apply_d_plus(up))
    }

    pub fn parity(i: usize, j: usize) -> Sublattice {
        if (i + j) % 2 == 0 {
            Sublattice::Even
        } else {
            Sublattice::Odd
        }
    }

    /// Sites of one sublattice in row-major order.
    pub fn sublattice_sites(&self, s: Sublattice) -> Vec<(usize, usize)> {
        let mut v = Vec::with_capacity(self.sites() / 2);
        for j in 0..self.l {
            for i in 0..self.l {
                if Self::parity(i, j) == s {
                    v.push((i, j));
                }
            }
        }
        v
    }

    /// Position of `(i, j)` inside its sublattice list.
    #[inline]
    pub fn sublattice_index(&self, i: usize, j: usize) -> usize {
        (j * self.l + i) / 2
    }

    /// Nonzero entries `(row, col, value)` of the block of `D+` from sublattice
    /// `from` to the other one.
    pub fn d_plus_block_entries(&self, from: Sublattice) -> Vec<(usize, usize, C64)> {
        let l = self.l;
        let inv = 1.0 / (2.0 * self.h);
        let mut out = Vec::with_capacity(2 * l * l);
        for (i, j) in self.sublattice_sites(from) {
            let col = self.sublattice_index(i, j);
            let k = j * l + i;
            // Coefficient of f(i,j) in (D+ f) at each neighbour.
            if i + 1 < l {
                out.push((self.sublattice_index(i + 1, j), col, -self.ux[k].conj() * inv));
            }
            if i > 0 {
                out.push((self.sublattice_index(i - 1, j), col, self.ux[k - 1] * inv));
            }
            if j + 1 < l {
                out.push((self.sublattice_index(i, j + 1), col, -I * self.uy[k].conj() * inv));
            }
            if j > 0 {
                out.push((self.sublattice_index(i, j - 1), col, I * self.uy[k - l] * inv));
            }
        }
        out
    }

    pub fn d_plus_block_dense(&self, from: Sublattice) -> DMatrix<C64> {
        let n = self.sites() / 2;
        let mut m = DMatrix::zeros(n, n);
        for (r, c, v) in self.d_plus_block_entries(from) {
            m[(r, c)] += v;
        }
        m
    }

    pub fn d_plus_block_banded(&self, from: Sublattice) -> Result<BandedLu> {
        let n = self.sites() / 2;
        let bw = self.l / 2 + 1;
        let mut lu = BandedLu::zeros(n, bw, bw);
        for (r, c, v) in self.d_plus_block_entries(from) {
            lu.add(r, c, v)?;
        }
        Ok(lu)
    }

    /// Applies the block of `D+` from sublattice `from`.
    pub fn apply_d_plus_block(&self, from: Sublattice, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        for (r, c, v) in self.d_plus_block_entries(from) {
            y[r] += v * x[c];
        }
        y
    }

    /// Dense matrix of the full `2 L^2` operator, spin-up block first.
    pub fn dense(&self) -> DMatrix<C64> {
        let n = self.sites();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for c in 0..n {
            e[c] = C64::new(1.0, 0.0);
            let up = self.apply_d_plus(&e);
            let dn = self.apply_d_minus(&e);
            for r in 0..n {
                m[(n + r, c)] = up[r];
                m[(r, n + c)] = dn[r];
            }
            e[c] = C64::new(0.0, 0.0);
        }
        m
    }
}

/// Knobs for [`count_zero_modes`].
#[derive(Clone, Copy, Debug)]
pub struct ZeroModeOptions {
    /// Minimum consecutive singular-value ratio that separates the near kernel.
    pub gap_threshold: f64,
    /// Gap a count must clear to be called unambiguous.
    pub clear_gap: f64,
    /// Spin sector whose count is reported as `observed_n`.
    pub sector: i32,
    /// Turn an ambiguous count into [`Error::AmbiguousCount`].
    pub require_clear_gap: bool,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub guard: usize,
}

impl Default for ZeroModeOptions {
    fn default() -> Self {
        Self { gap_threshold: 3.0, clear_gap: 10.0, sector: 1, require_clear_gap: false, seed: 42, tol: 1e-10, max_iter: 4000, guard: 16 }
    }
}

#[derive(Clone, Debug)]
pub struct ZeroModeReport {
    pub l: usize,
    pub flux_quanta: f64,
    pub sector: i32,
    /// `floor(Phi s / Phi0)` when positive, else 0.
    pub predicted_n: usize,
    /// Number of `k` with `Phi s / Phi0 > k + 1` (square-integrable modes).
    pub strict_n: usize,
    /// Zero modes attributed to `sector`.
    pub observed_n: usize,
    /// All modes below the gap, either sector.
    pub near_kernel_n: usize,
    /// Modes attributed to spin up and spin down.
    pub sector_counts: [usize; 2],
    /// Smallest singular values of the even-to-odd block, ascending.
    pub singular_values: Vec<f64>,
    /// `sv[N] / sv[N-1]` for the near-kernel count `N`; NaN when `N = 0`.
    pub gap_ratio: f64,
    /// Largest ratio not accepted as a gap.
    pub largest_rejected_ratio: f64,
    pub ambiguous: bool,
    /// Even-to-odd and odd-to-even blocks give the same count.
    pub doubling_consistent: bool,
    pub iterations: usize,
}

impl ZeroModeReport {
    pub fn agrees(&self) -> bool {
        self.observed_n == self.predicted_n
    }
}

/// Smallest singular triplets of one sublattice block.
pub fn block_triplets(
    op: &LatticeDiracOp,
    from: Sublattice,
    count: usize,
    opts: &ZeroModeOptions,
) -> Result<crate::linalg::SingularTriplets> {
    let mut lu = op.d_plus_block_banded(from)?;
    lu.factor()?;
    let sub = SubspaceOptions { count, guard: opts.guard, tol: opts.tol, max_iter: opts.max_iter, seed: opts.seed };
    smallest_singular_triplets(&lu, |x| op.apply_d_plus_block(from, x), sub)
}

/// Near-kernel size: the largest `i` with `sv[i] / sv[i-1] >= threshold`.
pub fn gap_count(sv: &[f64], threshold: f64) -> (usize, f64, f64) {
    let mut n = 0;
    for i in 1..sv.len() {
        if sv[i] >= threshold * sv[i - 1] {
            n = i;
        }
    }
    let gap = if n > 0 { sv[n] / sv[n - 1] } else { f64::NAN };
    let rejected = (1..sv.len())
        .filter(|&i| i != n)
        .map(|i| sv[i] / sv[i - 1])
        .fold(0.0, f64::max);
    (n, gap, rejected)
}

/// `Re sum v*(i,j) v(i+1,j+1) / sum |v|^2` over one sublattice. Close to +1
/// for the smooth tastes of the naive lattice operator and close to -1 for the
/// two doublers at `(pi,0)` and `(0,pi)`, which carry the opposite chirality.
pub fn diagonal_coherence(op: &LatticeDiracOp, sub: Sublattice, v: &[C64]) -> f64 {
    let l = op.l;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, j) in op.sublattice_sites(sub) {
        let a = v[op.sublattice_index(i, j)];
        den += a.norm_sqr();
        if i + 1 < l && j + 1 < l {
            num += (a.conj() * v[op.sublattice_index(i + 1, j + 1)]).re;
        }
    }
    num / den
}

fn predicted_counts(flux_quanta: f64, sector: i32) -> (usize, usize) {
    let x = flux_quanta * sector as f64;
    if x <= 0.0 {
        return (0, 0);
    }
    let floor = x.floor() as usize;
    let strict = (x.ceil() as usize).saturating_sub(1);
    (floor, strict)
}

/// Counts near-zero modes of `op` and attributes each to a spin sector by
/// asking whether its spin-up or its spin-down singular vector belongs to the
/// smooth tastes (see [`diagonal_coherence`]).
pub fn count_zero_modes(op: &LatticeDiracOp, opts: &ZeroModeOptions) -> Result<ZeroModeReport> {
    if opts.sector != 1 && opts.sector != -1 {
        return Err(Error::Domain(format!("sector must be +-1, got {}", opts.sector)));
    }
    let want = (2 * op.total_flux.abs().ceil() as usize + 4).min(op.sites() / 2);
    let even = block_triplets(op, Sublattice::Even, want, opts)?;
    let odd = block_triplets(op, Sublattice::Odd, want, opts)?;
    let (n, gap, rejected) = gap_count(&even.values, opts.gap_threshold);
    let (n_odd, _, _) = gap_count(&odd.values, opts.gap_threshold);

    let mut counts = [0usize; 2];
    for k in 0..n {
        let up = diagonal_coherence(op, Sublattice::Even, &even.right[k]);
        let down = diagonal_coherence(op, Sublattice::Odd, &even.left[k]);
        if up >= down {
            counts[0] += 1;
        } else {
            counts[1] += 1;
        }
    }
    let observed = if opts.sector == 1 { counts[0] } else { counts[1] };
    let (predicted, strict) = predicted_counts(op.total_flux, opts.sector);
    let ambiguous = if n > 0 {
        gap < opts.clear_gap
    } else {
        rejected >= opts.gap_threshold / 1.5
    };
    if ambiguous && opts.require_clear_gap {
        return Err(Error::AmbiguousCount {
            best_ratio: if n > 0 { gap } else { rejected },
            required: opts.clear_gap,
            singular_values: even.values,
        });
    }
    Ok(ZeroModeReport {
        l: op.l,
        flux_quanta: op.total_flux,
        sector: opts.sector,
        predicted_n: predicted,
        strict_n: strict,
        observed_n: observed,
        near_kernel_n: n,
        sector_counts: counts,
        singular_values: even.values,
        gap_ratio: gap,
        largest_rejected_ratio: rejected,
        ambiguous,
        doubling_consistent: n == n_odd,
        iterations: even.iterations.max(odd.iterations),
    })
}

/// Full pipeline: Poisson solve, assembly, counting.
pub fn ac_theorem_check(flux: &FluxProfile2D, opts: &ZeroModeOptions) -> Result<ZeroModeReport> {
    let op = lattice_assemble(flux, flux.charge)?;
    count_zero_modes(&op, opts)
}

/// `exp(-s e phi) w^k` with `w = x + i s y`, sampled on the nodes.
#[derive(Clone, Debug)]
pub struct AnalyticMode {
    pub s: i32,
    pub k: u32,
    pub values: Vec<C64>,
    /// Decay exponent `alpha` of `|psi|^2 ~ r^alpha` fitted outside the support.
    pub decay_exponent: f64,
    pub normalizable: bool,
}

/// Margin on the decay exponent below `-2` required to call a mode normalizable.
pub const NORMALIZABLE_MARGIN: f64 = 1e-3;

pub fn analytic_zero_mode(op: &LatticeDiracOp, pot: &ScalarPotential2D, s: i32, k: u32) -> Result<AnalyticMode> {
    if s != 1 && s != -1 {
        return Err(Error::Domain(format!("sector must be +-1, got {s}")));
    }
    let l = op.l;
    let sf = s as f64;
    let mut values = Vec::with_capacity(l * l);
    // Shift the exponent so the largest magnitude stays near one.
    let shift = pot.nodes.iter().map(|p| -sf * op.charge * p).fold(f64::NEG_INFINITY, f64::max);
    for j in 0..l {
        for i in 0..l {
            let (x, y) = op.coords(i, j);
            let w = C64::new(x, sf * y);
            let amp = (-sf * op.charge * pot.node_at(i, j) - shift).exp();
            values.push(w.powu(k) * amp);
        }
    }

    // Least-squares slope of ln|psi|^2 against ln r outside the support.
    let r_lo = 1.2 * op.support_radius;
    let r_hi = 0.95 * (l as f64 - 1.0) * op.h / 2.0;
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for j in 0..l {
        for i in 0..l {
            let (x, y) = op.coords(i, j);
            let r = (x * x + y * y).sqrt();
            if r >= r_lo && r <= r_hi {
                let a = r.ln();
                let b = values[j * l + i].norm_sqr().ln();
                sx += a;
                sy += b;
                sxx += a * a;
                sxy += a * b;
                cnt += 1.0;
            }
        }
    }
    let alpha = if cnt > 2.0 { (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) } else { f64::NAN };
    Ok(AnalyticMode { s, k, values, decay_exponent: alpha, normalizable: alpha < -2.0 - NORMALIZABLE_MARGIN })
}

/// Relative residual `|D_s psi| / |psi|` of an analytic mode, over nodes at
/// least `margin` sites from the edge.
pub fn analytic_mode_residual(op: &LatticeDiracOp, mode: &AnalyticMode, margin: usize) -> f64 {
    let l = op.l;
    let d = if mode.s == 1 { op.apply_d_plus(&mode.values) } else { op.apply_d_minus(&mode.values) };
    let mut num = 0.0;
    let mut den = 0.0;
    for j in margin..l - margin {
        for i in margin..l - margin {
            let k = j * l + i;
            num += d[k].norm_sqr();
            den += mode.values[k].norm_sqr();
        }
    }
    (num / den).sqrt()
}

/// Norm of the projection of the mode (restricted to one sublattice and
/// normalised) onto the span of orthonormal `basis` vectors on that sublattice.
pub fn projection_onto(op: &LatticeDiracOp, mode: &AnalyticMode, sub: Sublattice, basis: &[Vec<C64>]) -> f64 {
    let sites = op.sublattice_sites(sub);
    let restricted: Vec<C64> = sites.iter().map(|&(i, j)| mode.values[j * op.l + i]).collect();
    let norm = restricted.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut total = 0.0;
    for b in basis {
        let ip: C64 = b.iter().zip(&restricted).map(|(u, v)| u.conj() * v).sum();
        total += ip.norm_sqr();
    }
    total.sqrt() / norm
}

/// Smooth random gauge function on the nodes, for invariance checks.
pub fn random_gauge_function(l: usize, h: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.5..3.0)))
        .collect();
    let span = l as f64 * h;
    let mut chi = Vec::with_capacity(l * l);
    for j in 0..l {
        for i in 0..l {
            let x = i as f64 * h / span;
            let y = j as f64 * h / span;
            let v: f64 = modes.iter().map(|&(a, b, ph, amp)| amp * (2.0 * PI * (a * x + b * y) + ph).sin()).sum();
            chi.push(v);
        }
    }
    chi
}
