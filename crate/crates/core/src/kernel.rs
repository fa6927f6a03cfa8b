//! Gaussian kernel, Gram matrices, their spectra and RKHS-norm arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, symmetric_eigen_projected, Matrix};
use crate::scalar::{dot, sq_dist, Scalar};

/// Negative eigenvalues down to `-PSD_TOLERANCE * ‖K‖₂` are rounding noise
/// and get clamped to zero; anything lower rejects the matrix.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth<T> {
    /// Mean pairwise squared distance of the training inputs.
    Auto,
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig<T> {
    pub family: KernelFamily,
    pub bandwidth: Bandwidth<T>,
}

impl<T: Scalar> KernelConfig<T> {
    pub fn gaussian(bandwidth: T) -> Self {
        Self { family: KernelFamily::Gaussian, bandwidth: Bandwidth::Fixed(bandwidth) }
    }

    pub fn gaussian_auto() -> Self {
        Self { family: KernelFamily::Gaussian, bandwidth: Bandwidth::Auto }
    }

    pub fn is_resolved(&self) -> bool {
        matches!(self.bandwidth, Bandwidth::Fixed(_))
    }

    /// Fixes an `auto` bandwidth against `inputs`; a fixed one is validated and kept.
    pub fn resolve(&self, inputs: &[Vec<T>]) -> Result<Self> {
        match self.bandwidth {
            Bandwidth::Fixed(mu) => {
                check_bandwidth(mu)?;
                Ok(*self)
            }
            Bandwidth::Auto => Ok(Self { family: self.family, bandwidth: Bandwidth::Fixed(resolve_bandwidth(inputs)?) }),
        }
    }

    fn fixed_bandwidth(&self) -> Result<T> {
        match self.bandwidth {
            Bandwidth::Fixed(mu) => {
                check_bandwidth(mu)?;
                Ok(mu)
            }
            Bandwidth::Auto => Err(Error::UnresolvedBandwidth),
        }
    }

    /// `sup_x k(x, x)`; equals one for the gaussian family.
    pub fn diagonal_sup(&self) -> T {
        match self.family {
            KernelFamily::Gaussian => T::one(),
        }
    }
}

fn check_bandwidth<T: Scalar>(mu: T) -> Result<()> {
    if mu > T::zero() && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("kernel bandwidth must be positive and finite, got {mu}")))
    }
}

#[inline]
fn gaussian<T: Scalar>(mu: T, x1: &[T], x2: &[T]) -> T {
    (-sq_dist(x1, x2) / mu).exp()
}

/// `k(x1, x2) = exp(-‖x1 - x2‖² / μ)`.
pub fn kernel_eval<T: Scalar>(cfg: &KernelConfig<T>, x1: &[T], x2: &[T]) -> Result<T> {
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch { expected: x1.len(), found: x2.len() });
    }
    let mu = cfg.fixed_bandwidth()?;
    Ok(match cfg.family {
        KernelFamily::Gaussian => gaussian(mu, x1, x2),
    })
}

/// Mean of all `n²` pairwise squared distances, diagonal zeros included.
pub fn resolve_bandwidth<T: Scalar>(inputs: &[Vec<T>]) -> Result<T> {
    let n = inputs.len();
    if n == 0 {
        return Err(Error::EmptyInput("bandwidth needs at least one input"));
    }
    check_dims(inputs)?;
    let mut total = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            total += sq_dist(&inputs[i], &inputs[j]).to_f64_lossless();
        }
    }
    let mu = 2.0 * total / (n as f64 * n as f64);
    if mu == 0.0 {
        return Err(Error::ZeroBandwidth);
    }
    Ok(T::from_f64_lossy(mu))
}

fn check_dims<T>(inputs: &[Vec<T>]) -> Result<usize> {
    let d = inputs.first().map_or(0, Vec::len);
    for x in inputs {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x.len() });
        }
    }
    Ok(d)
}

/// Symmetric Gram matrix `Kᵢⱼ = k(xᵢ, xⱼ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix<T>(Matrix<T>);

impl<T: Scalar> GramMatrix<T> {
    /// Wraps an explicit matrix. It must be square and exactly symmetric.
    pub fn from_matrix(m: Matrix<T>) -> Result<Self> {
        if !m.is_symmetric() {
            return Err(Error::InvalidParameter("Gram matrix must be square and symmetric".into()));
        }
        Ok(Self(m))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }
}

/// Builds the Gram matrix, resolving an `auto` bandwidth against `inputs`.
pub fn build_gram<T: Scalar>(cfg: &KernelConfig<T>, inputs: &[Vec<T>]) -> Result<GramMatrix<T>> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput("Gram matrix needs at least one input"));
    }
    check_dims(inputs)?;
    let cfg = cfg.resolve(inputs)?;
    let mu = cfg.fixed_bandwidth()?;
    let n = inputs.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = T::one();
        for j in 0..i {
            let v = gaussian(mu, &inputs[i], &inputs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(GramMatrix(k))
}

/// Rectangular kernel matrix `k(rowsᵢ, colsⱼ)`; the bandwidth must be resolved.
pub fn cross_gram<T: Scalar>(cfg: &KernelConfig<T>, rows: &[Vec<T>], cols: &[Vec<T>]) -> Result<Matrix<T>> {
    let mu = cfg.fixed_bandwidth()?;
    let d = check_dims(cols)?;
    for x in rows {
        if x.len() != d && !cols.is_empty() {
            return Err(Error::DimensionMismatch { expected: d, found: x.len() });
        }
    }
    Ok(Matrix::from_fn(rows.len(), cols.len(), |i, j| gaussian(mu, &rows[i], &cols[j])))
}

/// Eigendecomposition `K = Q D Qᵀ` together with the rotated targets `y' = Qᵀ Y`.
#[derive(Debug, Clone)]
pub struct GramSpectrum<T> {
    rotation_t: Matrix<T>,
    eigenvalues: Vec<T>,
    rotated_targets: Vec<T>,
}

impl<T: Scalar> GramSpectrum<T> {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `d₁ ≥ … ≥ dₙ ≥ 0`.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn rotated_targets(&self) -> &[T] {
        &self.rotated_targets
    }

    /// False for spectra from [`eigendecompose_projected`].
    pub fn has_rotation(&self) -> bool {
        self.rotation_t.rows() == self.eigenvalues.len()
    }

    /// `Qᵀ`: row `k` is the eigenvector for `eigenvalues()[k]`.
    pub fn rotation_transposed(&self) -> &Matrix<T> {
        &self.rotation_t
    }

    /// `Q`, eigenvectors as columns.
    pub fn rotation(&self) -> Matrix<T> {
        self.rotation_t.transpose()
    }

    /// `Q v`: maps eigenbasis coordinates back to the training-point basis.
    pub fn rotate_back(&self, coords: &[T]) -> Result<Vec<T>> {
        self.rotation_t.tr_mul_vec(coords)
    }

    /// `Qᵀ v`.
    pub fn rotate(&self, v: &[T]) -> Result<Vec<T>> {
        self.rotation_t.mul_vec(v)
    }

    /// Same decomposition paired with a different target vector.
    pub fn with_targets(&self, targets: &[T]) -> Result<Self> {
        Ok(Self {
            rotation_t: self.rotation_t.clone(),
            eigenvalues: self.eigenvalues.clone(),
            rotated_targets: self.rotate(targets)?,
        })
    }

    /// `αᵀKα = Σ dᵢ (Qᵀα)ᵢ²`.
    pub fn rkhs_norm_sq(&self, alpha: &[T]) -> Result<T> {
        let rotated = self.rotate(alpha)?;
        Ok(self.eigen_norm_sq(&rotated))
    }

    /// `Σ dᵢ cᵢ²` for coordinates already in the eigenbasis.
    pub fn eigen_norm_sq(&self, coords: &[T]) -> T {
        self.eigenvalues.iter().zip(coords).map(|(&d, &c)| d * c * c).sum()
    }
}

/// Diagonalizes a Gram matrix and rotates the targets into its eigenbasis.
///
/// Eigenvalues come back in descending order. Slightly negative eigenvalues
/// (rounding) are clamped to zero, clearly negative ones are rejected.
pub fn eigendecompose<T: Scalar>(k: &GramMatrix<T>, targets: &[T]) -> Result<GramSpectrum<T>> {
    if targets.len() != k.n() {
        return Err(Error::DimensionMismatch { expected: k.n(), found: targets.len() });
    }
    let eig = symmetric_eigen(k.matrix())?;
    let eigenvalues = clamp_psd(eig.values)?;
    let rotated_targets = eig.vectors_t.mul_vec(targets)?;
    Ok(GramSpectrum { rotation_t: eig.vectors_t, eigenvalues, rotated_targets })
}

/// Eigenvalues and rotated targets of `K`, plus `Qᵀ x` for every row `x` of
/// `extra`, without forming `Q`. The returned spectrum supports every solver
/// but has no rotation, so [`GramSpectrum::rotate`] and
/// [`GramSpectrum::rotate_back`] reject it.
pub fn eigendecompose_projected<T: Scalar>(
    k: &GramMatrix<T>,
    targets: &[T],
    extra: &Matrix<T>,
) -> Result<(GramSpectrum<T>, Matrix<T>)> {
    let n = k.n();
    if targets.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: targets.len() });
    }
    if extra.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: extra.cols() });
    }
    let p = extra.rows();
    let xs = Matrix::from_fn(p + 1, n, |q, j| if q < p { extra[(q, j)] } else { targets[j] });
    let eig = symmetric_eigen_projected(k.matrix(), &xs)?;
    let eigenvalues = clamp_psd(eig.values)?;
    let rotated_targets = (0..n).map(|j| eig.projections[(j, p)]).collect();
    let projections = Matrix::from_fn(n, p, |j, q| eig.projections[(j, q)]);
    Ok((GramSpectrum { rotation_t: Matrix::zeros(0, 0), eigenvalues, rotated_targets }, projections))
}

fn clamp_psd<T: Scalar>(mut values: Vec<T>) -> Result<Vec<T>> {
    let scale = values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let tol = T::lit(PSD_TOLERANCE) * scale;
    for d in &mut values {
        if *d < -tol {
            return Err(Error::NotPositiveSemidefinite {
                eigenvalue: d.to_f64_lossless(),
                tolerance: tol.to_f64_lossless(),
            });
        }
        if *d < T::zero() {
            *d = T::zero();
        }
    }
    Ok(values)
}

/// `‖Σ αᵢ k(·, xᵢ)‖²_H = αᵀKα`, clamped at zero against rounding.
pub fn rkhs_norm_sq<T: Scalar>(k: &GramMatrix<T>, alpha: &[T]) -> Result<T> {
    let ka = k.matrix().mul_vec(alpha)?;
    Ok(dot(alpha, &ka).max(T::zero()))
}
