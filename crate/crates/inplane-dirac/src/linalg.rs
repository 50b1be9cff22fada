//! Banded LU, conjugate gradients and inverse subspace iteration.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spin::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Square complex matrix with `kl` sub- and `ku` super-diagonals, factorised
/// in place as `P L U` with partial pivoting.
///
/// Each row keeps a window of columns `[i - kl, i + kl + ku]`, wide enough for
/// the fill-in created by row exchanges.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
    piv: Vec<usize>,
    factored: bool,
}

impl BandedLu {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![ZERO; n * width], piv: (0..n).collect(), factored: false }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        if off < 0 || off as usize >= self.width {
            None
        } else {
            Some(i * self.width + off as usize)
        }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> C64 {
        self.slot(i, j).map_or(ZERO, |k| self.data[k])
    }

    /// Adds `v` to entry `(i, j)` before factorisation.
    pub fn add(&mut self, i: usize, j: usize, v: C64) -> Result<()> {
        if self.factored {
            return Err(Error::Invalid("matrix already factorised".into()));
        }
        if j + self.kl < i || j > i + self.ku {
            return Err(Error::Shape(format!("entry ({i},{j}) outside the band")));
        }
        let k = self.slot(i, j).expect("inside band");
        self.data[k] += v;
        Ok(())
    }

    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let reach = self.kl + self.ku;
        let scale = self.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).norm();
            for i in k + 1..=last_row {
                let v = self.get(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= f64::EPSILON * scale * 1e-6 || best == 0.0 {
                return Err(Error::NearSingular { condition: f64::INFINITY });
            }
            self.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let a = self.slot(k, j).unwrap();
                    let b = self.slot(p, j).unwrap();
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let si = self.slot(i, k).unwrap();
                let l = self.data[si] / pivot;
                self.data[si] = l;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..=last_col {
                    let ukj = self.get(k, j);
                    if ukj != ZERO {
                        let s = self.slot(i, j).unwrap();
                        self.data[s] -= l * ukj;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        debug_assert!(self.factored);
        let n = self.n;
        let reach = self.kl + self.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != ZERO {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.get(i, k) * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                s -= self.get(i, j) * b[j];
            }
            b[i] = s / self.get(i, i);
        }
    }

    /// Solves `A^H x = b` in place.
    pub fn solve_adjoint_in_place(&self, b: &mut [C64]) {
        debug_assert!(self.factored);
        let n = self.n;
        let reach = self.kl + self.ku;
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(reach)..i {
                s -= self.get(j, i).conj() * b[j];
            }
            b[i] = s / self.get(i, i).conj();
        }
        for k in (0..n).rev() {
            let mut s = ZERO;
            for i in k + 1..=(k + self.kl).min(n - 1) {
                s += self.get(i, k).conj() * b[i];
            }
            b[k] -= s;
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }
}

/// Outcome of [`conjugate_gradient`].
#[derive(Clone, Debug)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator, stopping
/// when `|r| <= tol * |b|`.
pub fn conjugate_gradient<F>(apply: F, b: &[f64], tol: f64, max_iter: usize) -> Result<CgResult>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgResult { x, iterations: 0, residual: 0.0 });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return Ok(CgResult { x, iterations: it, residual: rr.sqrt() / bnorm });
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let res = rr.sqrt() / bnorm;
    if res <= tol {
        Ok(CgResult { x, iterations: max_iter, residual: res })
    } else {
        Err(Error::IterationLimit { solver: "conjugate gradient", iterations: max_iter, residual: res })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest singular values with right and left singular vectors.
#[derive(Clone, Debug)]
pub struct SingularTriplets {
    /// Ascending.
    pub values: Vec<f64>,
    pub right: Vec<Vec<C64>>,
    pub left: Vec<Vec<C64>>,
    pub iterations: usize,
}

/// Settings for [`smallest_singular_triplets`].
#[derive(Clone, Copy, Debug)]
pub struct SubspaceOptions {
    pub count: usize,
    pub guard: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

/// The `count` smallest singular triplets of `A` by block inverse iteration on
/// `(A^H A)^{-1}` with Rayleigh-Ritz projection.
///
/// `lu` is the factorisation of `A`, `apply` computes `A x`.
pub fn smallest_singular_triplets<F>(
    lu: &BandedLu,
    apply: F,
    opts: SubspaceOptions,
) -> Result<SingularTriplets>
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let n = lu.n();
    let b = (opts.count + opts.guard).min(n);
    if opts.count == 0 || opts.count > n {
        return Err(Error::Invalid(format!("cannot extract {} singular values of a {n}x{n} matrix", opts.count)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DMatrix::<C64>::from_fn(n, b, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    x = x.qr().q();

    let mut last_res = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let mut y = DMatrix::<C64>::zeros(n, b);
        for j in 0..b {
            let mut col: Vec<C64> = x.column(j).iter().copied().collect();
            lu.solve_adjoint_in_place(&mut col);
            lu.solve_in_place(&mut col);
            y.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        let t = x.adjoint() * &y;
        let t = (&t + t.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[c].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let w = DMatrix::<C64>::from_fn(b, b, |r, c| eig.eigenvectors[(r, order[c])]);
        let mu: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let xr = &x * &w;
        let yr = &y * &w;

        // Solves carry an error of order eps * mu_max, which bounds the
        // attainable relative residual of the weaker Ritz pairs.
        let mut worst: f64 = 0.0;
        for j in 0..opts.count {
            let r = yr.column(j) - xr.column(j) * C64::from(mu[j]);
            let floor = 64.0 * f64::EPSILON * mu[0].abs() / mu[j].abs();
            worst = worst.max(r.norm() / mu[j].abs() / opts.tol.max(floor));
        }
        last_res = worst * opts.tol;
        if worst <= 1.0 {
            let mut values = Vec::with_capacity(opts.count);
            let mut right = Vec::with_capacity(opts.count);
            let mut left = Vec::with_capacity(opts.count);
            for j in 0..opts.count {
                let v: Vec<C64> = xr.column(j).iter().copied().collect();
                let av = apply(&v);
                let sigma = av.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let u = av.iter().map(|z| z / sigma).collect();
                values.push(sigma);
                right.push(v);
                left.push(u);
            }
            return Ok(SingularTriplets { values, right, left, iterations: it });
        }
        x = yr.qr().q();
    }
    Err(Error::IterationLimit { solver: "inverse subspace iteration", iterations: opts.max_iter, residual: last_res })
}
