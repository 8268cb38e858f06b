//! Dense complex linear-algebra helpers shared by the solvers.
//!
//! Thin wrappers over `nalgebra` that fix conventions the rest of the crate
//! relies on: singular values sorted in descending order, pseudo-inverses with
//! a relative cutoff, and a general (non-Hermitian) eigendecomposition built on
//! the complex Schur form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const J: C64 = C64 { re: 0.0, im: 1.0 };

/// `e^{j theta}`.
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}

/// Wraps an angle to the half-open interval `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2*pi for tiny negative inputs
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Thin SVD with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    /// Number of singular values above `rcond * s_max`.
    pub fn rank(&self, rcond: f64) -> usize {
        let smax = self.s.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&s| s > rcond * smax).count()
    }

    /// Leading `k` left singular vectors.
    pub fn u_leading(&self, k: usize) -> CMat {
        self.u.columns(0, k.min(self.u.ncols())).into_owned()
    }

    /// Leading `k` right singular vectors.
    pub fn v_leading(&self, k: usize) -> CMat {
        self.v.columns(0, k.min(self.v.ncols())).into_owned()
    }
}

pub fn svd(m: &CMat) -> Svd {
    let (nr, nc) = m.shape();
    let k = nr.min(nc);
    if k == 0 {
        return Svd {
            u: CMat::zeros(nr, 0),
            s: Vec::new(),
            v: CMat::zeros(nc, 0),
        };
    }
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("u requested");
    let v = dec.v_t.expect("v_t requested").adjoint();
    let s: Vec<f64> = dec.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut us = CMat::zeros(nr, k);
    let mut vs = CMat::zeros(nc, k);
    let mut ss = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &v.column(src));
        ss.push(s[src]);
    }
    Svd { u: us, s: ss, v: vs }
}

/// Moore-Penrose pseudo-inverse discarding singular values below
/// `rcond * s_max`.
pub fn pinv(m: &CMat, rcond: f64) -> CMat {
    let d = svd(m);
    pinv_from_svd(&d, rcond)
}

pub fn pinv_from_svd(d: &Svd, rcond: f64) -> CMat {
    let r = d.rank(rcond);
    let mut out = CMat::zeros(d.v.nrows(), d.u.nrows());
    for k in 0..r {
        let vk = d.v.column(k);
        let uk = d.u.column(k);
        out += (vk * uk.adjoint()) * C64::from(1.0 / d.s[k]);
    }
    out
}

/// Eigendecomposition `m = X diag(lambda) X^{-1}` of a general complex
/// square matrix. Eigenvectors are unit-norm columns of `X`.
pub fn eig(m: &CMat) -> Result<(Vec<C64>, CMat)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let schur = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Conditioning("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * scale;
    let lambda: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = ONE;
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for jj in (i + 1)..=k {
                acc += t[(i, jj)] * y[(jj, k)];
            }
            let mut den = t[(i, i)] - lambda[k];
            if den.norm() < tiny {
                den = C64::from(tiny);
            }
            y[(i, k)] = -acc / den;
        }
    }
    let mut x = q * y;
    for k in 0..n {
        let nk = x.column(k).norm();
        if nk > 0.0 {
            x.column_mut(k).scale_mut(1.0 / nk);
        }
    }
    Ok((lambda, x))
}

/// Solves `gram * X = rhs` for a Hermitian positive (semi)definite `gram`.
///
/// Returns the solution and whether a ridge term had to be added because the
/// system was singular or numerically rank deficient.
pub fn solve_hermitian(gram: &CMat, rhs: &CMat) -> (CMat, bool) {
    let n = gram.nrows();
    let diag_max = (0..n).map(|i| gram[(i, i)].re).fold(0.0f64, f64::max);
    let diag_min = (0..n).map(|i| gram[(i, i)].re).fold(f64::INFINITY, f64::min);
    let well_posed = diag_max > 0.0 && diag_min > 1e-13 * diag_max;
    if well_posed {
        if let Some(ch) = gram.clone().cholesky() {
            let l_diag_min = (0..n)
                .map(|i| ch.l_dirty()[(i, i)].re.abs())
                .fold(f64::INFINITY, f64::min);
            if l_diag_min * l_diag_min > 1e-13 * diag_max {
                return (ch.solve(rhs), false);
            }
        }
    }
    let eps = if diag_max > 0.0 { 1e-10 * diag_max } else { 1.0 };
    let mut g = gram.clone();
    for i in 0..n {
        g[(i, i)] += C64::from(eps);
    }
    let sol = match g.clone().cholesky() {
        Some(ch) => ch.solve(rhs),
        None => pinv(&g, 1e-14) * rhs,
    };
    (sol, true)
}

/// Kronecker product of two column vectors, `a` index slowest.
pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let nb = b.len();
    CVec::from_fn(a.len() * nb, |i, _| a[i / nb] * b[i % nb])
}

/// Kronecker product of two matrices.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Relative Frobenius error `||a - b|| / ||b||` (absolute when `b` is zero).
pub fn rel_error(a: &CMat, b: &CMat) -> f64 {
    let nb = b.norm();
    let d = (a - b).norm();
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}

/// Entry-wise phase projection onto the unit-modulus set; zeros map to 1.
pub fn unit_modulus(x: C64) -> C64 {
    let n = x.norm();
    if n > 0.0 {
        x / n
    } else {
        ONE
    }
}
