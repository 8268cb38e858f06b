//! Dense complex third-order tensors and the multilinear kernels used by the
//! CPD solvers.
//!
//! Storage is column-major in the three indices: entry `(i, j, k)` of an
//! `I x J x K` tensor lives at `i + I * (j + J * k)` (mode-1 fastest).
//!
//! Unfoldings follow the convention under which a CPD tensor with factors
//! `A, B, C` satisfies
//!
//! ```text
//! Y(1)^T = (C ⊙ B) A^T,   Y(2)^T = (C ⊙ A) B^T,   Y(3)^T = (B ⊙ A) C^T
//! ```
//!
//! with `⊙` the column-wise Kronecker (Khatri-Rao) product whose first operand
//! varies slowest.

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor3 {
    dims: [usize; 3],
    data: Vec<C64>,
}

impl ComplexTensor3 {
    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims,
            data: vec![ZERO; dims[0] * dims[1] * dims[2]],
        })
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<C64>) -> Result<Self> {
        check_dims(dims)?;
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::Dimension(format!(
                "tensor data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> C64) -> Result<Self> {
        check_dims(dims)?;
        let [ni, nj, nk] = dims;
        let mut data = Vec::with_capacity(ni * nj * nk);
        for k in 0..nk {
            for j in 0..nj {
                for i in 0..ni {
                    data.push(f(i, j, k));
                }
            }
        }
        Ok(Self { dims, data })
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: C64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Frontal slice `T(:, :, k)` as an `I x J` matrix.
    pub fn frontal_slice(&self, k: usize) -> CMat {
        let [ni, nj, _] = self.dims;
        CMat::from_column_slice(ni, nj, &self.data[k * ni * nj..(k + 1) * ni * nj])
    }

    /// Mode-`n` unfolding, `n` in `{1, 2, 3}`.
    pub fn unfold(&self, mode: usize) -> Result<CMat> {
        let [ni, nj, nk] = self.dims;
        match mode {
            // column-major storage is already Y(1) with columns j + J k
            1 => Ok(CMat::from_column_slice(ni, nj * nk, &self.data)),
            2 => Ok(CMat::from_fn(nj, ni * nk, |j, col| {
                self.get(col % ni, j, col / ni)
            })),
            3 => Ok(CMat::from_fn(nk, ni * nj, |k, col| {
                self.get(col % ni, col / ni, k)
            })),
            m => Err(Error::InvalidMode(m)),
        }
    }

    /// Inverse of [`unfold`](Self::unfold).
    pub fn fold(mat: &CMat, mode: usize, dims: [usize; 3]) -> Result<Self> {
        check_dims(dims)?;
        let [ni, nj, nk] = dims;
        let expected = match mode {
            1 => (ni, nj * nk),
            2 => (nj, ni * nk),
            3 => (nk, ni * nj),
            m => return Err(Error::InvalidMode(m)),
        };
        if mat.shape() != expected {
            return Err(Error::Dimension(format!(
                "mode-{mode} unfolding of {dims:?} must be {expected:?}, got {:?}",
                mat.shape()
            )));
        }
        Self::from_fn(dims, |i, j, k| match mode {
            1 => mat[(i, j + nj * k)],
            2 => mat[(j, i + ni * k)],
            _ => mat[(k, i + ni * j)],
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::Dimension(format!(
                "tensor dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

fn check_dims(dims: [usize; 3]) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::Dimension(format!("tensor dims must be positive, got {dims:?}")));
    }
    Ok(())
}

/// Factor matrices of a rank-`R` CPD.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTriple {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
}

impl FactorTriple {
    pub fn new(a: CMat, b: CMat, c: CMat) -> Result<Self> {
        if a.ncols() != b.ncols() || a.ncols() != c.ncols() {
            return Err(Error::Dimension(format!(
                "factor column counts differ: {}, {}, {}",
                a.ncols(),
                b.ncols(),
                c.ncols()
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.a.nrows(), self.b.nrows(), self.c.nrows()]
    }

    /// Keeps only the listed components, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            a: self.a.select_columns(idx),
            b: self.b.select_columns(idx),
            c: self.c.select_columns(idx),
        }
    }

    /// Product of the three column norms for each component.
    pub fn component_energy(&self) -> Vec<f64> {
        (0..self.rank())
            .map(|r| self.a.column(r).norm() * self.b.column(r).norm() * self.c.column(r).norm())
            .collect()
    }
}

/// Column-wise Kronecker product: column `r` is `a_r ⊗ b_r`.
pub fn khatri_rao(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "Khatri-Rao operands have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let nb = b.nrows();
    Ok(CMat::from_fn(a.nrows() * nb, a.ncols(), |row, r| {
        a[(row / nb, r)] * b[(row % nb, r)]
    }))
}

/// `T(i,j,k) = sum_r A(i,r) B(j,r) C(k,r)`.
pub fn cp_reconstruct(f: &FactorTriple) -> Result<ComplexTensor3> {
    let [ni, nj, nk] = f.dims();
    // Y(1) = A (C ⊙ B)^T
    let kr = khatri_rao(&f.c, &f.b)?;
    let y1 = &f.a * kr.transpose();
    ComplexTensor3::fold(&y1, 1, [ni, nj, nk])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rel_error, ONE};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rnd(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn khatri_rao_basis_and_scalar() {
        let a = CMat::from_column_slice(2, 1, &[ONE, ZERO]);
        let b = CMat::from_column_slice(2, 1, &[ONE, ONE]);
        let k = khatri_rao(&a, &b).unwrap();
        assert_eq!(k.as_slice(), &[ONE, ONE, ZERO, ZERO]);

        let c = C64::new(1.5, -2.0);
        let d = C64::new(0.25, 3.0);
        let k = khatri_rao(&CMat::from_element(1, 1, c), &CMat::from_element(1, 1, d)).unwrap();
        assert_eq!(k[(0, 0)], c * d);
    }

    #[test]
    fn khatri_rao_rejects_column_mismatch() {
        let r = khatri_rao(&CMat::zeros(2, 2), &CMat::zeros(2, 3));
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn khatri_rao_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = rnd(&mut rng, 3, 2);
        let b = rnd(&mut rng, 2, 2);
        let k = khatri_rao(&a, &b).unwrap();
        for r in 0..2 {
            let mut row = 0;
            for i in 0..3 {
                for j in 0..2 {
                    assert_eq!(k[(row, r)], a[(i, r)] * b[(j, r)]);
                    row += 1;
                }
            }
        }
    }

    #[test]
    fn unfold_scalar_and_invalid_mode() {
        let t = ComplexTensor3::from_vec([1, 1, 1], vec![C64::new(2.0, 1.0)]).unwrap();
        for m in 1..=3 {
            let u = t.unfold(m).unwrap();
            assert_eq!(u.shape(), (1, 1));
            assert_eq!(u[(0, 0)], C64::new(2.0, 1.0));
        }
        assert_eq!(t.unfold(0), Err(Error::InvalidMode(0)));
        assert_eq!(t.unfold(4), Err(Error::InvalidMode(4)));
    }

    #[test]
    fn unfold_2x2x2_matches_index_oracle() {
        // entries 1..8 stored in (i, j, k) loop order with i fastest
        let t = ComplexTensor3::from_fn([2, 2, 2], |i, j, k| C64::from((1 + i + 2 * j + 4 * k) as f64)).unwrap();
        let u1 = t.unfold(1).unwrap();
        let u2 = t.unfold(2).unwrap();
        let u3 = t.unfold(3).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let v = C64::from((1 + i + 2 * j + 4 * k) as f64);
                    assert_eq!(u1[(i, j + 2 * k)], v);
                    assert_eq!(u2[(j, i + 2 * k)], v);
                    assert_eq!(u3[(k, i + 2 * j)], v);
                }
            }
        }
        // Y(1) for this tensor: [[1,3,5,7],[2,4,6,8]]
        assert_eq!(u1[(0, 1)], C64::from(3.0));
        assert_eq!(u1[(1, 3)], C64::from(8.0));
    }

    #[test]
    fn rank_one_mode1_identity() {
        let a = CMat::from_column_slice(2, 1, &[ONE, C64::new(0.0, 2.0)]);
        let b = CMat::from_column_slice(3, 1, &[ONE, C64::from(-1.0), C64::new(0.5, 0.5)]);
        let c = CMat::from_column_slice(2, 1, &[C64::from(3.0), ONE]);
        let f = FactorTriple::new(a.clone(), b.clone(), c.clone()).unwrap();
        let t = cp_reconstruct(&f).unwrap();
        let lhs = t.unfold(1).unwrap().transpose();
        let rhs = khatri_rao(&c, &b).unwrap() * a.transpose();
        assert!(rel_error(&lhs, &rhs) < 1e-15);
    }

    #[test]
    fn cp_reconstruct_trivial_cases() {
        let ones = CMat::from_element(2, 1, ONE);
        let f = FactorTriple::new(ones.clone(), ones.clone(), ones).unwrap();
        let t = cp_reconstruct(&f).unwrap();
        assert!(t.data().iter().all(|&z| z == ONE));

        let z = FactorTriple::new(CMat::zeros(3, 2), CMat::zeros(4, 2), CMat::zeros(2, 2)).unwrap();
        assert_eq!(cp_reconstruct(&z).unwrap().frobenius_norm(), 0.0);
    }

    #[test]
    fn cp_reconstruct_satisfies_all_three_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = FactorTriple::new(rnd(&mut rng, 4, 3), rnd(&mut rng, 5, 3), rnd(&mut rng, 6, 3)).unwrap();
        let t = cp_reconstruct(&f).unwrap();
        let checks = [
            (1, khatri_rao(&f.c, &f.b).unwrap() * f.a.transpose()),
            (2, khatri_rao(&f.c, &f.a).unwrap() * f.b.transpose()),
            (3, khatri_rao(&f.b, &f.a).unwrap() * f.c.transpose()),
        ];
        for (mode, rhs) in checks {
            let lhs = t.unfold(mode).unwrap().transpose();
            assert!(rel_error(&lhs, &rhs) < 1e-12, "mode {mode}");
        }
        // and entrywise against the defining triple sum
        for (i, j, k) in [(0, 0, 0), (3, 4, 5), (2, 1, 3)] {
            let s: C64 = (0..3).map(|r| f.a[(i, r)] * f.b[(j, r)] * f.c[(k, r)]).sum();
            assert!((t.get(i, j, k) - s).norm() < 1e-14);
        }
    }

    #[test]
    fn frobenius_norm_cases() {
        assert_eq!(ComplexTensor3::zeros([2, 3, 1]).unwrap().frobenius_norm(), 0.0);
        let t = ComplexTensor3::from_vec([1, 1, 1], vec![C64::new(3.0, 4.0)]).unwrap();
        assert_eq!(t.frobenius_norm(), 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = ComplexTensor3::from_fn([3, 2, 4], |_, _, _| C64::new(rng.random(), rng.random())).unwrap();
        let mut acc = 0.0;
        for k in 0..4 {
            for j in 0..2 {
                for i in 0..3 {
                    let z = t.get(i, j, k);
                    acc += z.re * z.re + z.im * z.im;
                }
            }
        }
        assert!((t.frobenius_norm() - acc.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(ComplexTensor3::zeros([0, 1, 1]).is_err());
        assert!(ComplexTensor3::from_vec([2, 2, 2], vec![ZERO; 7]).is_err());
    }

    fn arb_tensor() -> impl Strategy<Value = ComplexTensor3> {
        (1usize..5, 1usize..5, 1usize..5).prop_flat_map(|(i, j, k)| {
            proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), i * j * k).prop_map(move |v| {
                ComplexTensor3::from_vec([i, j, k], v.into_iter().map(|(a, b)| C64::new(a, b)).collect()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn fold_unfold_identity(t in arb_tensor()) {
            for mode in 1..=3 {
                let u = t.unfold(mode).unwrap();
                let back = ComplexTensor3::fold(&u, mode, t.dims()).unwrap();
                prop_assert_eq!(&back, &t);
            }
        }

        #[test]
        fn khatri_rao_column_norms(seed in 0u64..1000, i in 1usize..6, j in 1usize..6, r in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = rnd(&mut rng, i, r);
            let b = rnd(&mut rng, j, r);
            let k = khatri_rao(&a, &b).unwrap();
            for c in 0..r {
                let expect = a.column(c).norm() * b.column(c).norm();
                prop_assert!((k.column(c).norm() - expect).abs() <= 1e-12 * expect.max(1.0));
            }
        }

        #[test]
        fn reconstruct_mode1_identity_random(seed in 0u64..1000, r in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = FactorTriple::new(rnd(&mut rng, 3, r), rnd(&mut rng, 4, r), rnd(&mut rng, 2, r)).unwrap();
            let lhs = cp_reconstruct(&f).unwrap().unfold(1).unwrap().transpose();
            let rhs = khatri_rao(&f.c, &f.b).unwrap() * f.a.transpose();
            prop_assert!(rel_error(&lhs, &rhs) < 1e-12);
        }
    }
}
