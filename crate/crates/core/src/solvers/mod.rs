//! The three learners: kernel ridge regression, m-power regularized least
//! squares, and ridge regression with a `λ/n` regularizer.
//!
//! Every learner works in the eigenbasis of the Gram matrix, so one
//! [`GramSpectrum`] can serve any number of `(λ, m)` fits. The `*_fit`
//! functions are the one-shot entry points; the `*_spectral` functions are
//! what grid searches call.

mod model;
mod root;

pub use model::{Algorithm, FittedModel, ModelMeta, MODEL_FORMAT_VERSION};
pub use root::{f_of_c, find_root, scan_roots, RootFindReport};

use serde::{Deserialize, Serialize};

use crate::data::TrainingSet;
use crate::error::{Error, Result};
use crate::kernel::{build_gram, eigendecompose, GramMatrix, GramSpectrum, KernelConfig};
use crate::linalg::Matrix;
use crate::scalar::{dot, norm_inf, Scalar};
use root::{validate_lambda_m, FixedPoint};

/// A solution expressed in eigenbasis coordinates, `α = Q · coords`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSolution<T> {
    pub coords: Vec<T>,
    pub c0: Option<T>,
    pub root: Option<RootFindReport<T>>,
    pub low_exponent_path: bool,
}

impl<T: Scalar> SpectralSolution<T> {
    fn plain(coords: Vec<T>) -> Self {
        Self { coords, c0: None, root: None, low_exponent_path: false }
    }
}

/// Learner identity plus hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Learner<T> {
    pub algorithm: Algorithm,
    pub lambda: T,
    /// Ignored by the ridge variants.
    pub m: T,
}

impl<T: Scalar> Learner<T> {
    pub fn krr(lambda: T) -> Self {
        Self { algorithm: Algorithm::Krr, lambda, m: T::lit(2.0) }
    }

    pub fn mrlsr(lambda: T, m: T) -> Self {
        Self { algorithm: Algorithm::Mrlsr, lambda, m }
    }

    pub fn modified_krr(lambda: T) -> Self {
        Self { algorithm: Algorithm::ModifiedKrr, lambda, m: T::lit(2.0) }
    }

    pub fn solve_spectral(&self, spectrum: &GramSpectrum<T>) -> Result<SpectralSolution<T>> {
        match self.algorithm {
            Algorithm::Krr => krr_spectral(spectrum, self.lambda),
            Algorithm::Mrlsr => mrlsr_spectral(spectrum, self.lambda, self.m),
            Algorithm::ModifiedKrr => modified_krr_spectral(spectrum, self.lambda),
        }
    }

    pub fn fit(&self, z: &TrainingSet<T>, cfg: &KernelConfig<T>) -> Result<FittedModel<T>> {
        let (cfg, spectrum) = prepare(z, cfg)?;
        let sol = self.solve_spectral(&spectrum)?;
        assemble(self, z, cfg, &spectrum, sol)
    }
}

fn n_as<T: Scalar>(n: usize) -> T {
    T::from_usize(n).unwrap_or_else(T::max_value)
}

/// `α'ᵢ = y'ᵢ / (dᵢ + nλ)`.
pub fn krr_spectral<T: Scalar>(spectrum: &GramSpectrum<T>, lambda: T) -> Result<SpectralSolution<T>> {
    validate_lambda_m(lambda, T::one())?;
    let shift = n_as::<T>(spectrum.n()) * lambda;
    let coords = spectrum.eigenvalues().iter().zip(spectrum.rotated_targets()).map(|(&d, &y)| y / (d + shift)).collect();
    Ok(SpectralSolution::plain(coords))
}

/// Ridge regression with effective regularizer `λ/n`: `α = (K + λI)⁻¹ Y`.
pub fn modified_krr_spectral<T: Scalar>(spectrum: &GramSpectrum<T>, lambda: T) -> Result<SpectralSolution<T>> {
    validate_lambda_m(lambda, T::one())?;
    krr_spectral(spectrum, lambda / n_as::<T>(spectrum.n()))
}

/// `α'ᵢ = 2y'ᵢ / (2dᵢ + λmnC₀)` with `C₀` the root of the fixed-point function.
///
/// For `m > 1` the root is unique and bracketed. For `m ≤ 1` every root on
/// the scan grid is a stationary point; the one with the lowest objective
/// wins. Targets with no component in the range of `K` yield the zero model.
pub fn mrlsr_spectral<T: Scalar>(spectrum: &GramSpectrum<T>, lambda: T, m: T) -> Result<SpectralSolution<T>> {
    validate_lambda_m(lambda, m)?;
    let f = FixedPoint::new(spectrum, lambda, m);
    if f.range_energy() == T::zero() {
        return Ok(SpectralSolution::plain(vec![T::zero(); spectrum.n()]));
    }
    if m > T::one() {
        let root = find_root(spectrum, lambda, m)?;
        return Ok(SpectralSolution {
            coords: f.coefficients(root.c0),
            c0: Some(root.c0),
            root: Some(root),
            low_exponent_path: false,
        });
    }
    let roots = scan_roots(spectrum, lambda, m)?;
    let mut best: Option<(T, RootFindReport<T>, Vec<T>)> = None;
    for root in roots {
        let coords = f.coefficients(root.c0);
        let value = spectral_objective(spectrum, &coords, lambda, m);
        if !value.is_finite() {
            continue;
        }
        if best.as_ref().map_or(true, |(v, _, _)| value < *v) {
            best = Some((value, root, coords));
        }
    }
    let (_, root, coords) = best.ok_or(Error::NoRootFound { m: m.to_f64_lossless() })?;
    Ok(SpectralSolution { coords, c0: Some(root.c0), root: Some(root), low_exponent_path: true })
}

/// `(1/n)‖y' - Dα'‖² + λ(Σ dᵢα'ᵢ²)^(m/2)`, the objective in eigenbasis coordinates.
pub fn spectral_objective<T: Scalar>(spectrum: &GramSpectrum<T>, coords: &[T], lambda: T, m: T) -> T {
    let n = n_as::<T>(spectrum.n());
    let d = spectrum.eigenvalues();
    let y = spectrum.rotated_targets();
    let loss: T = d.iter().zip(y).zip(coords).map(|((&d, &y), &c)| (y - d * c) * (y - d * c)).sum();
    loss / n + lambda * spectrum.eigen_norm_sq(coords).max(T::zero()).powf(m / T::lit(2.0))
}

/// `(1/n)‖Y - Kα‖² + λ(αᵀKα)^(m/2)` evaluated directly on the Gram matrix.
pub fn objective<T: Scalar>(k: &GramMatrix<T>, targets: &[T], alpha: &[T], lambda: T, m: T) -> Result<T> {
    let ka = k.matrix().mul_vec(alpha)?;
    if targets.len() != ka.len() {
        return Err(Error::DimensionMismatch { expected: ka.len(), found: targets.len() });
    }
    let loss: T = targets.iter().zip(&ka).map(|(&y, &f)| (y - f) * (y - f)).sum();
    let norm_sq = dot(alpha, &ka).max(T::zero());
    Ok(loss / n_as(ka.len()) + lambda * norm_sq.powf(m / T::lit(2.0)))
}

/// `‖Y - Kα - λ(mn/2)(αᵀKα)^(m/2-1) α‖∞`, the stationarity residual of the
/// m-power objective in the training-point basis.
pub fn first_order_residual<T: Scalar>(k: &GramMatrix<T>, targets: &[T], alpha: &[T], lambda: T, m: T) -> Result<T> {
    let ka = k.matrix().mul_vec(alpha)?;
    if targets.len() != ka.len() {
        return Err(Error::DimensionMismatch { expected: ka.len(), found: targets.len() });
    }
    let norm_sq = dot(alpha, &ka).max(T::zero());
    let coef = lambda * m * n_as::<T>(ka.len()) / T::lit(2.0) * norm_sq.powf(m / T::lit(2.0) - T::one());
    let r: Vec<T> = targets.iter().zip(&ka).zip(alpha).map(|((&y, &f), &a)| y - f - coef * a).collect();
    Ok(norm_inf(&r))
}

fn prepare<T: Scalar>(z: &TrainingSet<T>, cfg: &KernelConfig<T>) -> Result<(KernelConfig<T>, GramSpectrum<T>)> {
    if z.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let cfg = cfg.resolve(z.inputs())?;
    let k = build_gram(&cfg, z.inputs())?;
    let spectrum = eigendecompose(&k, z.targets())?;
    Ok((cfg, spectrum))
}

fn assemble<T: Scalar>(
    learner: &Learner<T>,
    z: &TrainingSet<T>,
    kernel: KernelConfig<T>,
    spectrum: &GramSpectrum<T>,
    sol: SpectralSolution<T>,
) -> Result<FittedModel<T>> {
    let alpha = spectrum.rotate_back(&sol.coords)?;
    Ok(FittedModel {
        alpha,
        training_inputs: z.inputs().to_vec(),
        kernel,
        meta: ModelMeta {
            algorithm: learner.algorithm,
            m: learner.m,
            lambda: learner.lambda,
            c0: sol.c0,
            low_exponent_path: sol.low_exponent_path,
        },
    })
}

/// Minimizer of `(1/n)Σ(yᵢ - f(xᵢ))² + λ‖f‖²_H`.
pub fn krr_fit<T: Scalar>(lambda: T, z: &TrainingSet<T>, cfg: &KernelConfig<T>) -> Result<FittedModel<T>> {
    Learner::krr(lambda).fit(z, cfg)
}

/// Minimizer of `(1/n)Σ(yᵢ - f(xᵢ))² + λ‖f‖ᵐ_H`.
pub fn mrlsr_fit<T: Scalar>(lambda: T, m: T, z: &TrainingSet<T>, cfg: &KernelConfig<T>) -> Result<FittedModel<T>> {
    Learner::mrlsr(lambda, m).fit(z, cfg)
}

/// Minimizer of `(1/n)Σ(yᵢ - f(xᵢ))² + (λ/n)‖f‖²_H`.
pub fn modified_krr_fit<T: Scalar>(lambda: T, z: &TrainingSet<T>, cfg: &KernelConfig<T>) -> Result<FittedModel<T>> {
    Learner::modified_krr(lambda).fit(z, cfg)
}

/// Fits from a precomputed spectrum; `kernel` must be the resolved config the
/// spectrum was built with.
pub fn fit_with_spectrum<T: Scalar>(
    learner: &Learner<T>,
    z: &TrainingSet<T>,
    kernel: &KernelConfig<T>,
    spectrum: &GramSpectrum<T>,
) -> Result<FittedModel<T>> {
    if spectrum.n() != z.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), found: spectrum.n() });
    }
    let kernel = kernel.resolve(z.inputs())?;
    let sol = learner.solve_spectral(spectrum)?;
    assemble(learner, z, kernel, spectrum, sol)
}

/// Builds the resolved kernel config and the Gram spectrum for `z`.
pub fn spectrum_for<T: Scalar>(z: &TrainingSet<T>, cfg: &KernelConfig<T>) -> Result<(KernelConfig<T>, GramSpectrum<T>)> {
    prepare(z, cfg)
}

/// `‖f₁ - f₂‖_H` for two coefficient vectors over the same training inputs.
pub fn rkhs_distance<T: Scalar>(k: &GramMatrix<T>, a1: &[T], a2: &[T]) -> Result<T> {
    if a1.len() != a2.len() {
        return Err(Error::DimensionMismatch { expected: a1.len(), found: a2.len() });
    }
    let diff: Vec<T> = a1.iter().zip(a2).map(|(&a, &b)| a - b).collect();
    Ok(crate::kernel::rkhs_norm_sq(k, &diff)?.sqrt())
}

/// Predictions `K_cross · α` for rows of a precomputed cross-kernel matrix.
pub fn predict_with_cross<T: Scalar>(cross: &Matrix<T>, alpha: &[T]) -> Result<Vec<T>> {
    cross.mul_vec(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> TrainingSet<f64> {
        TrainingSet::new(inputs, targets).unwrap()
    }

    fn unit() -> KernelConfig<f64> {
        KernelConfig::gaussian(1.0)
    }

    /// Points far enough apart that K is the identity to machine precision.
    fn far_pair(y: [f64; 2]) -> TrainingSet<f64> {
        ts(vec![vec![0.0], vec![100.0]], y.to_vec())
    }

    #[test]
    fn krr_examples() {
        let m = krr_fit(1.0, &ts(vec![vec![0.0]], vec![1.0]), &unit()).unwrap();
        assert!((m.alpha[0] - 0.5).abs() < 1e-15);

        let m = krr_fit(0.7, &ts(vec![vec![0.0], vec![0.4]], vec![0.0, 0.0]), &unit()).unwrap();
        assert!(m.alpha.iter().all(|&a| a == 0.0));

        let m = krr_fit(0.5, &far_pair([2.0, 4.0]), &unit()).unwrap();
        assert!((m.alpha[0] - 1.0).abs() < 1e-14 && (m.alpha[1] - 2.0).abs() < 1e-14, "{:?}", m.alpha);
        assert_eq!(m.meta.c0, None);
    }

    #[test]
    fn mrlsr_scalar_quartic() {
        let m = mrlsr_fit(0.5, 4.0, &ts(vec![vec![0.0]], vec![1.0]), &unit()).unwrap();
        assert!((m.alpha[0] - 0.682_327_803_828_019_3).abs() < 1e-12);
        assert!((m.meta.c0.unwrap() - 0.465_571_231_876_768).abs() < 1e-12);
    }

    #[test]
    fn mrlsr_zero_targets_give_zero_model() {
        for m in [0.5, 1.5, 2.0, 4.0] {
            let fit = mrlsr_fit(0.3, m, &ts(vec![vec![0.0], vec![0.5]], vec![0.0, 0.0]), &unit()).unwrap();
            assert!(fit.alpha.iter().all(|&a| a == 0.0));
            assert_eq!(fit.meta.c0, None);
        }
    }

    #[test]
    fn mrlsr_m2_equals_krr() {
        let z = ts(vec![vec![0.0, 0.1], vec![0.3, 0.9], vec![0.8, 0.2], vec![0.5, 0.5]], vec![1.0, -0.5, 2.0, 0.3]);
        let cfg = KernelConfig::gaussian_auto();
        for lambda in [1e-3, 1.0, 10.0] {
            let a = mrlsr_fit(lambda, 2.0, &z, &cfg).unwrap();
            let b = krr_fit(lambda, &z, &cfg).unwrap();
            for (x, y) in a.alpha.iter().zip(&b.alpha) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300) + 1e-15);
            }
        }
    }

    #[test]
    fn modified_krr_examples() {
        let one = ts(vec![vec![0.0]], vec![1.0]);
        assert_eq!(modified_krr_fit(0.8, &one, &unit()).unwrap().alpha, krr_fit(0.8, &one, &unit()).unwrap().alpha);

        let m = modified_krr_fit(1.0, &far_pair([2.0, 4.0]), &unit()).unwrap();
        assert!((m.alpha[0] - 1.0).abs() < 1e-14 && (m.alpha[1] - 2.0).abs() < 1e-14);

        let z = ts(vec![vec![0.0], vec![0.7], vec![1.1]], vec![0.2, 1.0, -0.4]);
        let a = modified_krr_fit(0.3 * 3.0, &z, &unit()).unwrap();
        let b = krr_fit(0.3, &z, &unit()).unwrap();
        for (x, y) in a.alpha.iter().zip(&b.alpha) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn predict_examples() {
        let z = ts(vec![vec![0.0, 0.0]], vec![1.0]);
        let model = krr_fit(1.0, &z, &unit()).unwrap();
        assert!((model.predict(&[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        // ‖x - x₁‖² = μ = 1
        assert!((model.predict(&[0.6, 0.8]).unwrap() - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(matches!(model.predict(&[1.0]), Err(Error::DimensionMismatch { .. })));

        let zero = krr_fit(1.0, &ts(vec![vec![0.0]], vec![0.0]), &unit()).unwrap();
        assert_eq!(zero.predict(&[3.0]).unwrap(), 0.0);
    }

    #[test]
    fn training_point_prediction_equals_k_alpha() {
        let z = ts(vec![vec![0.0], vec![0.2], vec![0.9], vec![1.4]], vec![0.5, 1.0, -1.0, 0.25]);
        let model = mrlsr_fit(0.05, 1.5, &z, &KernelConfig::gaussian_auto()).unwrap();
        let k = build_gram(&model.kernel, z.inputs()).unwrap();
        let ka = k.matrix().mul_vec(&model.alpha).unwrap();
        for (x, want) in z.inputs().iter().zip(ka) {
            assert!((model.predict(x).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_inputs_are_handled() {
        let z = ts(vec![vec![0.0], vec![0.0], vec![1.0]], vec![1.0, 3.0, -1.0]);
        for m in [1.5, 2.0, 3.0] {
            let model = mrlsr_fit(0.1, m, &z, &KernelConfig::gaussian(0.5)).unwrap();
            let k = build_gram(&model.kernel, z.inputs()).unwrap();
            let r = first_order_residual(&k, z.targets(), &model.alpha, 0.1, m).unwrap();
            assert!(r < 1e-8, "m={m}: residual {r}");
        }
    }

    #[test]
    fn targets_orthogonal_to_range_give_zero_function() {
        // Identical inputs: K = [[1,1],[1,1]] and Y = (1,-1) lies in its null space.
        let z = ts(vec![vec![0.5], vec![0.5]], vec![1.0, -1.0]);
        let model = mrlsr_fit(0.2, 1.5, &z, &unit()).unwrap();
        assert!(model.predict(&[0.5]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn low_exponent_path_is_flagged() {
        let z = ts(vec![vec![0.0], vec![0.3], vec![0.8]], vec![1.0, 2.0, 1.5]);
        let model = mrlsr_fit(1e-3, 0.5, &z, &KernelConfig::gaussian(0.2)).unwrap();
        assert!(model.meta.low_exponent_path);
        let k = build_gram(&model.kernel, z.inputs()).unwrap();
        let r = first_order_residual(&k, z.targets(), &model.alpha, 1e-3, 0.5).unwrap();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn invalid_parameters() {
        let z = ts(vec![vec![0.0]], vec![1.0]);
        assert!(krr_fit(0.0, &z, &unit()).is_err());
        assert!(mrlsr_fit(1.0, 0.0, &z, &unit()).is_err());
        assert!(mrlsr_fit(-1.0, 2.0, &z, &unit()).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let z = ts(vec![vec![0.1, 0.2], vec![0.4, 0.3]], vec![1.0, 0.7]);
        let model = mrlsr_fit(0.01, 1.5, &z, &KernelConfig::gaussian_auto()).unwrap();
        let text = model.to_json().unwrap();
        assert!(text.contains("\"format_version\": 1"));
        assert_eq!(FittedModel::<f64>::from_json(&text).unwrap(), model);
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(matches!(FittedModel::<f64>::from_json(&bumped), Err(Error::ModelVersion(9))));
    }
}
