//! Dense row-major matrices and the symmetric eigensolver.
//!
//! The eigensolver is Householder reduction to tridiagonal form followed by
//! the implicit QL iteration with Wilkinson-style shifts. Both phases keep
//! the eigenvector basis stored transposed (one eigenvector per row) so that
//! every inner loop walks contiguous memory.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row vectors; all rows must share one length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self · v`
    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: v.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, found: v.len() });
        }
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenpairs of a real symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    /// Row `k` holds the unit eigenvector paired with `values[k]`, i.e. this
    /// is `Qᵀ` for `A = Q diag(values) Qᵀ`.
    pub vectors_t: Matrix<T>,
}

const QL_MAX_ITER_PER_VALUE: usize = 60;

/// Full eigendecomposition of a symmetric matrix. Only the lower triangle is read.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> Result<SymmetricEigen<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(SymmetricEigen { values: Vec::new(), vectors_t: Matrix::zeros(0, 0) });
    }
    // w[j][k] plays the role of v[k][j] in the classical column-oriented
    // formulation; for the symmetric input the initial contents coincide.
    let mut w = a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut w, &mut d, &mut e);
    tridiagonal_ql(&mut w, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors_t = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors_t.row_mut(dst).copy_from_slice(w.row(src));
    }
    Ok(SymmetricEigen { values, vectors_t })
}

/// Eigenvalues of a symmetric matrix together with `Qᵀ X`, without forming
/// the eigenvectors.
#[derive(Debug, Clone)]
pub struct ProjectedEigen<T> {
    /// Descending.
    pub values: Vec<T>,
    /// `projections[(k, q)] = q_kᵀ x_q`, one column per input vector.
    pub projections: Matrix<T>,
}

/// Like [`symmetric_eigen`], but instead of the eigenvectors returns the
/// coordinates of the rows of `xs` in the eigenbasis. The QL rotations then
/// act on `n × p` instead of `n × n`, which is much cheaper when `p ≪ n`.
pub fn symmetric_eigen_projected<T: Scalar>(a: &Matrix<T>, xs: &Matrix<T>) -> Result<ProjectedEigen<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    let n = a.rows();
    if xs.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: xs.cols() });
    }
    let p = xs.rows();
    if n == 0 {
        return Ok(ProjectedEigen { values: Vec::new(), projections: Matrix::zeros(0, p) });
    }
    let mut w = a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut w, &mut d, &mut e);
    // Rows of `w` are the columns of the accumulated Householder product H,
    // so this is Hᵀ X; the QL rotations then turn it into Qᵀ X.
    let mut u = Matrix::from_fn(n, p, |j, q| dot(w.row(j), xs.row(q)));
    drop(w);
    tridiagonal_ql(&mut u, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut projections = Matrix::zeros(n, p);
    for (dst, &src) in order.iter().enumerate() {
        projections.row_mut(dst).copy_from_slice(u.row(src));
    }
    Ok(ProjectedEigen { values, projections })
}

fn tridiagonalize<T: Scalar>(w: &mut Matrix<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    for j in 0..n {
        d[j] = w[(j, n - 1)];
    }

    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for &dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = w[(j, i - 1)];
                w[(j, i)] = zero;
                w[(i, j)] = zero;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in &mut e[..i] {
                *ej = zero;
            }

            for j in 0..i {
                f = d[j];
                w[(i, j)] = f;
                let row = w.row(j);
                g = e[j] + row[j] * f;
                for k in (j + 1)..i {
                    g += row[k] * d[k];
                    e[k] += row[k] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let row = w.row_mut(j);
                for k in j..i {
                    row[k] -= f * e[k] + g * d[k];
                }
                d[j] = row[i - 1];
                row[i] = zero;
            }
        }
        d[i] = h;
    }

    // Accumulate the Householder reflections.
    for i in 0..n - 1 {
        w[(i, n - 1)] = w[(i, i)];
        w[(i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            {
                let pivot = w.row(i + 1);
                for k in 0..=i {
                    d[k] = pivot[k] / h;
                }
            }
            for j in 0..=i {
                let g = dot(&w.row(i + 1)[..=i], &w.row(j)[..=i]);
                let row = w.row_mut(j);
                for k in 0..=i {
                    row[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            w[(i + 1, k)] = zero;
        }
    }
    for j in 0..n {
        d[j] = w[(j, n - 1)];
        w[(j, n - 1)] = zero;
    }
    w[(n - 1, n - 1)] = T::one();
    e[0] = zero;
}

fn tridiagonal_ql<T: Scalar>(w: &mut Matrix<T>, d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    let mut total_iter = 0usize;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] == 0, so m < n here.
        if m > l {
            let mut iter = 0usize;
            loop {
                iter += 1;
                total_iter += 1;
                if iter > QL_MAX_ITER_PER_VALUE {
                    return Err(Error::EigenNoConvergence { iterations: total_iter });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[(l + 2)..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_rows(w, i, s, c);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

#[inline]
fn rotate_rows<T: Scalar>(w: &mut Matrix<T>, i: usize, s: T, c: T) {
    let cols = w.cols();
    let (head, tail) = w.data.split_at_mut((i + 1) * cols);
    let lo = &mut head[i * cols..];
    let hi = &mut tail[..cols];
    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky
/// factorization. Used as an independent route to ridge solutions.
pub fn cholesky_solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    if !a.is_square() || b.len() != a.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: b.len() });
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            if i == j {
                if !(s > T::zero()) {
                    return Err(Error::NotPositiveSemidefinite { eigenvalue: s.to_f64_lossless(), tolerance: 0.0 });
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        y[i] = (b[i] - dot(&l.row(i)[..i], &y[..i])) / l[(i, i)];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(eig: &SymmetricEigen<f64>) -> Matrix<f64> {
        let q = eig.vectors_t.transpose();
        q.matmul(&Matrix::diagonal(&eig.values)).unwrap().matmul(&eig.vectors_t).unwrap()
    }

    #[test]
    fn diagonal_matrix() {
        let a = Matrix::diagonal(&[2.0, 3.0]);
        let eig = symmetric_eigen(&a).unwrap();
        assert_eq!(eig.values, vec![3.0, 2.0]);
    }

    #[test]
    fn rank_one_all_ones() {
        let a = Matrix::from_rows(&[vec![1.0f64, 1.0], vec![1.0, 1.0]]).unwrap();
        let eig = symmetric_eigen(&a).unwrap();
        assert!((eig.values[0] - 2.0).abs() < 1e-14);
        assert!(eig.values[1].abs() < 1e-14);
        assert!(reconstruct(&eig).sub(&a).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn tridiagonal_laplacian_known_spectrum() {
        // eigenvalues 2 - 2 cos(kπ/(n+1))
        let n = 12;
        let a = Matrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let eig = symmetric_eigen(&a).unwrap();
        let mut expected: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (got, want) in eig.values.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn single_precision_instantiation() {
        let a: Matrix<f32> = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let eig = symmetric_eigen(&a).unwrap();
        let trace: f32 = eig.values.iter().sum();
        assert!((trace - 7.0).abs() < 1e-5);
    }

    #[test]
    fn projected_matches_full_decomposition() {
        let n = 30;
        let a: Matrix<f64> = Matrix::from_fn(n, n, |i, j| (-((i as f64 - j as f64) / 4.0).powi(2)).exp());
        let xs: Matrix<f64> = Matrix::from_fn(3, n, |q, k| ((q * 7 + k * 3) % 11) as f64 - 5.0);
        let full = symmetric_eigen(&a).unwrap();
        let proj = symmetric_eigen_projected(&a, &xs).unwrap();
        for k in 0..n {
            assert!((full.values[k] - proj.values[k]).abs() < 1e-12);
        }
        // Both routes apply the same rotations, so the coordinates agree
        // including sign, up to rounding from the changed association.
        for q in 0..3 {
            let f = full.vectors_t.mul_vec(xs.row(q)).unwrap();
            for k in 0..n {
                assert!((f[k] - proj.projections[(k, q)]).abs() < 1e-10, "{k}: {} vs {}", f[k], proj.projections[(k, q)]);
            }
        }
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a: Matrix<f64> = Matrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]]).unwrap();
        let x = cholesky_solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        let back = a.mul_vec(&x).unwrap();
        for (got, want) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let indefinite = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(cholesky_solve(&indefinite, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn empty_and_scalar() {
        assert!(symmetric_eigen(&Matrix::<f64>::zeros(0, 0)).unwrap().values.is_empty());
        let eig = symmetric_eigen(&Matrix::diagonal(&[5.0f64])).unwrap();
        assert_eq!(eig.values, vec![5.0]);
        assert_eq!(eig.vectors_t[(0, 0)].abs(), 1.0);
    }
}
