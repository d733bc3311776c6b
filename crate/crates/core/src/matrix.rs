//! Dense and packed-triangular storage, plus the plain triple-loop kernels
//! used as numerical ground truth for every out-of-core schedule.

use crate::error::{Error, Result};
use crate::rng::UniformStream;
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    /// Matrix of independent uniform `[lo, hi)` entries.
    pub fn random(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Self {
        let mut rng = UniformStream::new(seed);
        let data = (0..rows * cols).map(|_| T::from_f64_lossy(rng.next_range(lo, hi))).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Offset of `(i, j)`, `j <= i < n`, in row-major packed lower storage.
pub fn packed_offset(i: usize, j: usize, n: usize) -> Result<usize> {
    if j > i || i >= n {
        return Err(Error::IndexOutOfTriangle { i, j, n });
    }
    Ok(packed_index(i, j))
}

#[inline]
pub(crate) fn packed_index(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

/// Number of stored entries of an `n x n` lower triangle.
pub const fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Lower triangle of a symmetric (or triangular) `n x n` matrix, stored row
/// by row: `(0,0), (1,0), (1,1), (2,0), ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedTriangular<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> PackedTriangular<T> {
    pub fn zeros(n: usize) -> Self {
        PackedTriangular { n, data: vec![T::zero(); packed_len(n)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    /// Triangle of independent uniform `[lo, hi)` entries.
    pub fn random(n: usize, lo: f64, hi: f64, seed: u64) -> Self {
        let mut rng = UniformStream::new(seed);
        let data = (0..packed_len(n)).map(|_| T::from_f64_lossy(rng.next_range(lo, hi))).collect();
        PackedTriangular { n, data }
    }

    pub fn from_vec(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != packed_len(n) {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a packed triangle of side {n} (expected {})",
                data.len(),
                packed_len(n)
            )));
        }
        Ok(PackedTriangular { n, data })
    }

    /// Lower triangle of a square dense matrix; the strict upper part is ignored.
    pub fn from_dense_lower(m: &Matrix<T>) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix is not square",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                out.set(i, j, m[(i, j)]);
            }
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Entry `(i, j)` with `j <= i`.
    pub fn get(&self, i: usize, j: usize) -> T {
        debug_assert!(j <= i && i < self.n);
        self.data[packed_index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(j <= i && i < self.n);
        self.data[packed_index(i, j)] = v;
    }

    /// Entry of the symmetric matrix, either triangle.
    pub fn sym(&self, i: usize, j: usize) -> T {
        if i >= j {
            self.get(i, j)
        } else {
            self.get(j, i)
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Lower triangle of `self * self^T`, treating `self` as a lower
    /// triangular factor.
    pub fn lower_times_transpose(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut acc = T::zero();
                for k in 0..=j {
                    acc += self.get(i, k) * self.get(j, k);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Largest absolute element-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

/// `C += A * A^T` on the lower triangle, diagonal included.
pub fn reference_syrk<T: Scalar>(a: &Matrix<T>, c: &PackedTriangular<T>) -> Result<PackedTriangular<T>> {
    if a.rows() != c.n() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} rows but C has side {}",
            a.rows(),
            c.n()
        )));
    }
    let mut out = c.clone();
    for i in 0..a.rows() {
        for j in 0..=i {
            let mut acc = out.get(i, j);
            for k in 0..a.cols() {
                acc += a[(i, k)] * a[(j, k)];
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// Right-looking unblocked Cholesky: returns `L` with `L L^T = A`.
pub fn reference_cholesky<T: Scalar>(a: &PackedTriangular<T>) -> Result<PackedTriangular<T>> {
    let n = a.n();
    let mut l = a.clone();
    for k in 0..n {
        let pivot = l.get(k, k);
        if !(pivot > T::zero()) {
            return Err(Error::NotPositiveDefinite { column: k });
        }
        let d = pivot.sqrt();
        l.set(k, k, d);
        for i in k + 1..n {
            let v = l.get(i, k) / d;
            l.set(i, k, v);
        }
        for i in k + 1..n {
            let lik = l.get(i, k);
            for j in k + 1..=i {
                let v = l.get(i, j) - lik * l.get(j, k);
                l.set(i, j, v);
            }
        }
    }
    Ok(l)
}

/// Lower triangle of `G G^T + n I` with `G` an `n x n` matrix of uniform
/// `[0, 1)` samples drawn row by row from [`UniformStream`] seeded with
/// `seed`. The shift keeps the result comfortably positive definite.
pub fn random_spd<T: Scalar>(n: usize, seed: u64) -> PackedTriangular<T> {
    let mut rng = UniformStream::new(seed);
    let g: Vec<f64> = (0..n * n).map(|_| rng.next_unit()).collect();
    let mut out = PackedTriangular::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.0;
            for k in 0..n {
                acc += g[i * n + k] * g[j * n + k];
            }
            if i == j {
                acc += n as f64;
            }
            out.set(i, j, T::from_f64_lossy(acc));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn packed_offset_examples() {
        assert_eq!(packed_offset(0, 0, 4), Ok(0));
        assert_eq!(packed_offset(3, 0, 4), Ok(6));
        assert_eq!(packed_offset(3, 3, 4), Ok(9));
        assert!(packed_offset(1, 2, 4).is_err());
        assert!(packed_offset(4, 0, 4).is_err());
    }

    #[test]
    fn packed_offset_is_a_bijection() {
        for n in 0..=64 {
            let mut seen = vec![false; packed_len(n)];
            for i in 0..n {
                for j in 0..=i {
                    let o = packed_offset(i, j, n).unwrap();
                    assert!(!seen[o], "offset {o} hit twice for n={n}");
                    seen[o] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn syrk_rank_one() {
        let a = Matrix::from_rows(&[&[1.0], &[2.0]]).unwrap();
        let c = reference_syrk(&a, &PackedTriangular::zeros(2)).unwrap();
        assert_eq!(c.as_slice(), &[1.0, 2.0, 4.0]);
    }

    #[test]
    fn syrk_zero_input_leaves_c() {
        let a = Matrix::<f64>::zeros(3, 2);
        let c = PackedTriangular::from_vec(3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(reference_syrk(&a, &c).unwrap(), c);
    }

    #[test]
    fn syrk_identity() {
        let c = reference_syrk(&Matrix::<f64>::identity(2), &PackedTriangular::zeros(2)).unwrap();
        assert_eq!(c.as_slice(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn syrk_dimension_mismatch() {
        let a = Matrix::<f64>::zeros(3, 2);
        assert!(matches!(
            reference_syrk(&a, &PackedTriangular::zeros(2)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn cholesky_small_cases() {
        let l = reference_cholesky(&PackedTriangular::from_vec(1, vec![4.0]).unwrap()).unwrap();
        assert_eq!(l.as_slice(), &[2.0]);
        let l = reference_cholesky(&PackedTriangular::from_vec(2, vec![4.0, 0.0, 9.0]).unwrap()).unwrap();
        assert_eq!(l.as_slice(), &[2.0, 0.0, 3.0]);
        let a = PackedTriangular::from_vec(2, vec![4.0, 2.0, 5.0]).unwrap();
        let l = reference_cholesky(&a).unwrap();
        assert_eq!(l.as_slice(), &[2.0, 1.0, 2.0]);
        assert_eq!(l.lower_times_transpose(), a);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = PackedTriangular::from_vec(2, vec![1.0, 2.0, 1.0]).unwrap();
        assert_eq!(reference_cholesky(&a), Err(Error::NotPositiveDefinite { column: 1 }));
        let a = PackedTriangular::from_vec(1, vec![-1.0]).unwrap();
        assert_eq!(reference_cholesky(&a), Err(Error::NotPositiveDefinite { column: 0 }));
    }

    #[test]
    fn random_spd_examples() {
        let a = random_spd::<f64>(1, 99);
        assert!(a.get(0, 0) >= 1.0);
        assert_eq!(random_spd::<f64>(7, 3), random_spd::<f64>(7, 3));
        assert_ne!(random_spd::<f64>(7, 3), random_spd::<f64>(7, 4));
        assert!(reference_cholesky(&random_spd::<f64>(4, 42)).is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let a = random_spd::<f32>(12, 5);
        let l = reference_cholesky(&a).unwrap();
        assert!(l.lower_times_transpose().max_abs_diff(&a) <= 1e-4 * a.max_abs());
    }

    // Independent dense route: full product, then compare the lower part.
    fn dense_aat(a: &Matrix<f64>) -> Matrix<f64> {
        let n = a.rows();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..a.cols() {
                    out[(i, j)] += a[(i, k)] * a[(j, k)];
                }
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn syrk_matches_dense_product(n in 1usize..=32, m in 1usize..=32, seed: u64) {
            let a = Matrix::<f64>::random(n, m, -1.0, 1.0, seed);
            let c = reference_syrk(&a, &PackedTriangular::zeros(n)).unwrap();
            let full = dense_aat(&a);
            for i in 0..n {
                for j in 0..=i {
                    let want = full[(i, j)];
                    let got = c.get(i, j);
                    prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
                }
            }
        }

        #[test]
        fn cholesky_reconstructs(n in 1usize..=32, seed: u64) {
            let a = random_spd::<f64>(n, seed);
            let l = reference_cholesky(&a).unwrap();
            for i in 0..n {
                prop_assert!(l.get(i, i) > 0.0);
            }
            prop_assert!(l.lower_times_transpose().max_abs_diff(&a) <= 1e-9 * a.max_abs());
        }
    }
}
