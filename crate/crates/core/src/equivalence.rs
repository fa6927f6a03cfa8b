//! Weak equivalence between the m-power learner and kernel ridge regression.
//!
//! On a fixed training set `Z`, m-power regularization with `λ` produces the
//! same function as ridge regression with `λ₂ = Φ(λ, Z) = (mλ/2)·C₀(Z, m, λ)`.
//! Because `C₀` depends on `Z`, no single map works for every training set:
//! the two learners are weakly but not strongly equivalent.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::{rng_from_seed, TrainingSet};
use crate::error::{Error, Result};
use crate::kernel::{build_gram, GramSpectrum, KernelConfig};
use crate::scalar::Scalar;
use crate::solvers::{find_root, krr_spectral, mrlsr_spectral, rkhs_distance, spectrum_for, Learner};

/// Relative tolerance of the weak-equivalence check.
pub const WEAK_EQUIVALENCE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiMap<T> {
    pub lambda2: T,
    pub c0: T,
}

/// `Φ(λ, Z)` from an existing spectrum of `Z` (requires `m > 1`).
pub fn phi_from_spectrum<T: Scalar>(spectrum: &GramSpectrum<T>, lambda: T, m: T) -> Result<PhiMap<T>> {
    let root = find_root(spectrum, lambda, m)?;
    Ok(PhiMap { lambda2: m * lambda / T::lit(2.0) * root.c0, c0: root.c0 })
}

/// Like [`phi_from_spectrum`] but also defined for `m ≤ 1`, where `C₀` is the
/// stationary point the m-power solver selects. The ridge fit at the returned
/// `λ₂` reproduces that solver's output on the same training set.
pub fn phi_from_spectrum_any<T: Scalar>(spectrum: &GramSpectrum<T>, lambda: T, m: T) -> Result<PhiMap<T>> {
    if m > T::one() {
        return phi_from_spectrum(spectrum, lambda, m);
    }
    let sol = mrlsr_spectral(spectrum, lambda, m)?;
    let c0 = sol.c0.ok_or(Error::DegenerateRoot("targets have no component in the range of K"))?;
    Ok(PhiMap { lambda2: m * lambda / T::lit(2.0) * c0, c0 })
}

/// `λ₂ = (mλ/2)·C₀` with `C₀` the root of the fixed-point function on `Z`.
pub fn phi_map<T: Scalar>(lambda: T, m: T, z: &TrainingSet<T>, cfg: &KernelConfig<T>) -> Result<PhiMap<T>> {
    let (_, spectrum) = spectrum_for(z, cfg)?;
    phi_from_spectrum(&spectrum, lambda, m)
}

/// `‖f_mrlsr(λ) - f_krr(Φ(λ, Z))‖_H` on `Z`, measured with the Gram matrix.
pub fn verify_weak_equivalence<T: Scalar>(lambda: T, m: T, z: &TrainingSet<T>, cfg: &KernelConfig<T>) -> Result<T> {
    Ok(weak_equivalence_gap(lambda, m, z, cfg)?.diff_norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceGap<T> {
    pub phi: PhiMap<T>,
    pub diff_norm: T,
    pub mrlsr_norm: T,
}

impl<T: Scalar> EquivalenceGap<T> {
    /// `diff_norm ≤ 1e-8·(1 + ‖f_mrlsr‖_H)`.
    pub fn within_tolerance(&self) -> bool {
        self.diff_norm <= T::lit(WEAK_EQUIVALENCE_TOLERANCE) * (T::one() + self.mrlsr_norm)
    }
}

pub fn weak_equivalence_gap<T: Scalar>(lambda: T, m: T, z: &TrainingSet<T>, cfg: &KernelConfig<T>) -> Result<EquivalenceGap<T>> {
    let (cfg, spectrum) = spectrum_for(z, cfg)?;
    let phi = phi_from_spectrum(&spectrum, lambda, m)?;
    let k = build_gram(&cfg, z.inputs())?;
    let (diff_norm, mrlsr_norm) = pair_distance(&spectrum, &k, lambda, m, phi.lambda2)?;
    Ok(EquivalenceGap { phi, diff_norm, mrlsr_norm })
}

fn pair_distance<T: Scalar>(
    spectrum: &GramSpectrum<T>,
    k: &crate::kernel::GramMatrix<T>,
    lambda: T,
    m: T,
    lambda2: T,
) -> Result<(T, T)> {
    let a1 = spectrum.rotate_back(&mrlsr_spectral(spectrum, lambda, m)?.coords)?;
    let a2 = spectrum.rotate_back(&krr_spectral(spectrum, lambda2)?.coords)?;
    let norm = crate::kernel::rkhs_norm_sq(k, &a1)?.sqrt();
    Ok((rkhs_distance(k, &a1, &a2)?, norm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDiff<T> {
    pub split: usize,
    pub n: usize,
    pub diff_norm: T,
    pub mrlsr_norm: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport<T> {
    pub m: T,
    pub lambda: T,
    pub c0: T,
    pub lambda2: T,
    pub bandwidth: T,
    pub per_split: Vec<SplitDiff<T>>,
}

/// Computes `λ₂ = Φ(λ, Z₁)` on the first split only, then refits both
/// learners on every split and reports the RKHS distance between them. An
/// `auto` bandwidth is resolved on the first split and shared by all.
/// For `m ≤ 1` the map uses the stationary point the solver selects.
pub fn strong_equivalence_experiment<T: Scalar>(
    splits: &[TrainingSet<T>],
    lambda: T,
    m: T,
    cfg: &KernelConfig<T>,
) -> Result<EquivalenceReport<T>> {
    if splits.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least two splits, got {}", splits.len())));
    }
    let cfg = cfg.resolve(splits[0].inputs())?;
    let mut per_split = Vec::with_capacity(splits.len());
    let mut phi = None;
    for (idx, z) in splits.iter().enumerate() {
        let (_, spectrum) = spectrum_for(z, &cfg)?;
        let map = match phi {
            Some(p) => p,
            None => *phi.insert(phi_from_spectrum_any(&spectrum, lambda, m)?),
        };
        let k = build_gram(&cfg, z.inputs())?;
        let (diff_norm, mrlsr_norm) = pair_distance(&spectrum, &k, lambda, m, map.lambda2)?;
        per_split.push(SplitDiff { split: idx + 1, n: z.len(), diff_norm, mrlsr_norm });
    }
    let map = phi.expect("at least one split");
    let bandwidth = match cfg.bandwidth {
        crate::kernel::Bandwidth::Fixed(mu) => mu,
        crate::kernel::Bandwidth::Auto => unreachable!("resolved above"),
    };
    Ok(EquivalenceReport { m, lambda, c0: map.c0, lambda2: map.lambda2, bandwidth, per_split })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegPathPoint<T> {
    pub lambda: T,
    pub lambda2: T,
    pub err_mrlsr: T,
    pub err_krr: T,
    /// `‖f_mrlsr - f_krr‖_H` on the training split.
    pub model_diff: T,
    pub mrlsr_norm: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegPathComparison<T> {
    pub min_err_mrlsr: T,
    pub min_err_krr: T,
    /// `(λ, λ₂)` at the m-power minimum.
    pub argmin: (T, T),
    pub points: Vec<RegPathPoint<T>>,
}

fn rmse<T: Scalar>(y: &[T], p: &[T]) -> T {
    let n = T::from_usize(y.len().max(1)).unwrap_or_else(T::max_value);
    (y.iter().zip(p).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n).sqrt()
}

/// Walks `lambda_grid` for the m-power learner and its Φ-image for ridge
/// regression, both fitted on `z_train`, and compares test RMSE on `z_test`.
pub fn regpath_compare<T: Scalar>(
    lambda_grid: &[T],
    m: T,
    z_train: &TrainingSet<T>,
    z_test: &TrainingSet<T>,
    cfg: &KernelConfig<T>,
) -> Result<RegPathComparison<T>> {
    if lambda_grid.is_empty() {
        return Err(Error::EmptyInput("lambda grid"));
    }
    let (cfg, spectrum) = spectrum_for(z_train, cfg)?;
    let k = build_gram(&cfg, z_train.inputs())?;
    let mut points = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let phi = phi_from_spectrum(&spectrum, lambda, m)?;
        let f1 = crate::solvers::fit_with_spectrum(&Learner::mrlsr(lambda, m), z_train, &cfg, &spectrum)?;
        let f2 = crate::solvers::fit_with_spectrum(&Learner::krr(phi.lambda2), z_train, &cfg, &spectrum)?;
        let err_mrlsr = rmse(z_test.targets(), &f1.predict_many(z_test.inputs())?);
        let err_krr = rmse(z_test.targets(), &f2.predict_many(z_test.inputs())?);
        let model_diff = rkhs_distance(&k, &f1.alpha, &f2.alpha)?;
        let mrlsr_norm = crate::kernel::rkhs_norm_sq(&k, &f1.alpha)?.sqrt();
        points.push(RegPathPoint { lambda, lambda2: phi.lambda2, err_mrlsr, err_krr, model_diff, mrlsr_norm });
    }
    let best = points
        .iter()
        .min_by(|a, b| a.err_mrlsr.partial_cmp(&b.err_mrlsr).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty grid");
    let min_err_krr = points.iter().map(|p| p.err_krr).fold(T::infinity(), T::min);
    Ok(RegPathComparison { min_err_mrlsr: best.err_mrlsr, min_err_krr, argmin: (best.lambda, best.lambda2), points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSensitivity<T> {
    pub n_values: Vec<usize>,
    /// `max_i |Φ(λ, Z) - Φ(λ, Zⁱ)|` over the sampled `i`, per entry of `n_values`.
    pub deltas: Vec<T>,
    pub phi: Vec<T>,
}

/// Leave-one-out sensitivity of `Φ(λ, ·)` on seeded subsets of `dataset`.
/// The kernel bandwidth is resolved once on the whole dataset.
pub fn probe_phi_sensitivity<T: Scalar>(
    lambda: T,
    m: T,
    dataset: &TrainingSet<T>,
    n_values: &[usize],
    samples_per_n: usize,
    seed: u64,
    cfg: &KernelConfig<T>,
) -> Result<PhiSensitivity<T>> {
    let cfg = cfg.resolve(dataset.inputs())?;
    let mut deltas = Vec::with_capacity(n_values.len());
    let mut phis = Vec::with_capacity(n_values.len());
    for (slot, &n) in n_values.iter().enumerate() {
        if n > dataset.len() || n < 2 {
            return Err(Error::TooFewRows { needed: n.max(2), found: dataset.len() });
        }
        let mut rng = rng_from_seed(crate::data::derive_seed(seed, 0, slot as u64));
        let mut rows = sample(&mut rng, dataset.len(), n).into_vec();
        rows.sort_unstable();
        let z = dataset.subset(&rows);
        let base = phi_map(lambda, m, &z, &cfg)?.lambda2;
        let mut removed = sample(&mut rng, n, samples_per_n.min(n)).into_vec();
        removed.sort_unstable();
        let mut delta = T::zero();
        for i in removed {
            let other = phi_map(lambda, m, &z.without(i), &cfg)?.lambda2;
            delta = delta.max((base - other).abs());
        }
        deltas.push(delta);
        phis.push(base);
    }
    Ok(PhiSensitivity { n_values: n_values.to_vec(), deltas, phi: phis })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::friedman_synthetic;
    use crate::solvers::{krr_fit, mrlsr_fit};

    fn toy() -> TrainingSet<f64> {
        TrainingSet::new(vec![vec![0.0]], vec![1.0]).unwrap()
    }

    #[test]
    fn phi_is_identity_at_m2() {
        let z: TrainingSet<f64> = friedman_synthetic(20, 1.0, 4).unwrap();
        for lambda in [1e-4, 0.3, 7.0] {
            let phi = phi_map(lambda, 2.0, &z, &KernelConfig::gaussian_auto()).unwrap();
            assert_eq!(phi.c0, 1.0);
            assert_eq!(phi.lambda2, lambda);
        }
    }

    #[test]
    fn scalar_quartic_phi() {
        let cfg = KernelConfig::gaussian(1.0);
        let phi = phi_map(0.5, 4.0, &toy(), &cfg).unwrap();
        assert!((phi.lambda2 - 0.465_571_231_876_768).abs() < 1e-12);
        let krr = krr_fit(phi.lambda2, &toy(), &cfg).unwrap();
        let mrlsr = mrlsr_fit(0.5, 4.0, &toy(), &cfg).unwrap();
        assert!((krr.alpha[0] - 0.682_327_803_828_019_3).abs() < 1e-12);
        assert!((mrlsr.alpha[0] - krr.alpha[0]).abs() < 1e-14);
        assert!(verify_weak_equivalence(0.5, 4.0, &toy(), &cfg).unwrap() < 1e-12);
    }

    #[test]
    fn weak_equivalence_on_random_set() {
        let z: TrainingSet<f64> = friedman_synthetic(30, 1.0, 9).unwrap();
        let z = TrainingSet::new(z.inputs().iter().map(|x| x[..5].to_vec()).collect(), z.targets().to_vec()).unwrap();
        let gap = weak_equivalence_gap(0.01, 1.5, &z, &KernelConfig::gaussian_auto()).unwrap();
        assert!(gap.within_tolerance(), "{gap:?}");
    }

    #[test]
    fn strong_equivalence_holds_only_at_m2() {
        let data: TrainingSet<f64> = friedman_synthetic(80, 1.0, 1).unwrap();
        let plan = crate::data::SplitPlan::equal_parts(data.len(), 4, 2).unwrap();
        let splits = crate::data::split(&data, &plan).unwrap();
        let cfg = KernelConfig::gaussian_auto();

        let quad = strong_equivalence_experiment(&splits, 0.01, 2.0, &cfg).unwrap();
        assert!(quad.per_split.iter().all(|s| s.diff_norm <= 1e-8 * (1.0 + s.mrlsr_norm)));

        let r = strong_equivalence_experiment(&splits, 0.01, 1.5, &cfg).unwrap();
        assert!(r.per_split[0].diff_norm <= 1e-8 * (1.0 + r.per_split[0].mrlsr_norm));
        for s in &r.per_split[1..] {
            assert!(s.diff_norm > 1e-6 * s.mrlsr_norm, "{s:?}");
        }
    }

    #[test]
    fn regpath_examples() {
        let cfg = KernelConfig::gaussian(1.0);
        let out = regpath_compare(&[0.5], 4.0, &toy(), &toy(), &cfg).unwrap();
        assert!((out.min_err_mrlsr - out.min_err_krr).abs() < 1e-14);

        let data: TrainingSet<f64> = friedman_synthetic(40, 1.0, 3).unwrap();
        let (train, test) = (data.subset(&(0..30).collect::<Vec<_>>()), data.subset(&(30..40).collect::<Vec<_>>()));
        let out = regpath_compare(&[0.5], 2.0, &train, &test, &KernelConfig::gaussian_auto()).unwrap();
        assert_eq!(out.min_err_mrlsr, out.min_err_krr);
        assert!(regpath_compare::<f64>(&[], 2.0, &train, &test, &cfg).is_err());
    }

    #[test]
    fn phi_sensitivity_examples() {
        let data: TrainingSet<f64> = friedman_synthetic(60, 1.0, 5).unwrap();
        let cfg = KernelConfig::gaussian_auto();
        let quad = probe_phi_sensitivity(0.1, 2.0, &data, &[10, 20], 5, 1, &cfg).unwrap();
        assert!(quad.deltas.iter().all(|&d| d == 0.0));

        let a = probe_phi_sensitivity(0.1, 1.5, &data, &[10, 20], 5, 1, &cfg).unwrap();
        let b = probe_phi_sensitivity(0.1, 1.5, &data, &[10, 20], 5, 1, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.deltas.iter().all(|&d| d > 0.0));

        assert!(matches!(probe_phi_sensitivity(0.1, 1.5, &data, &[61], 5, 1, &cfg), Err(Error::TooFewRows { .. })));
        let flat = TrainingSet::new(vec![vec![1.0]; 5], vec![2.0; 5]).unwrap();
        assert!(matches!(probe_phi_sensitivity(0.1, 1.5, &flat, &[3], 2, 1, &cfg), Err(Error::ZeroBandwidth)));
    }
}
