//! Uniform stability: the closed-form bound for the m-power learner with
//! `m ≥ 2`, and a leave-one-out estimate of the loss perturbation for any
//! learner.
//!
//! `Zⁱ` is `Z` with its i-th record removed, not replaced.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, rng_from_seed, TrainingSet};
use crate::error::{Error, Result};
use crate::kernel::{build_gram, cross_gram, eigendecompose, KernelConfig};
use crate::scalar::Scalar;
use crate::solvers::{Algorithm, Learner};

fn positive<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Lipschitz constant of the squared loss over the reachable function range,
/// `C = 2(C_y + κ(C_y²/λ)^{1/m})`.
pub fn lipschitz_c<T: Scalar>(c_y: T, kappa: T, lambda: T, m: T) -> Result<T> {
    positive("c_y", c_y)?;
    positive("lambda", lambda)?;
    positive("m", m)?;
    if !(kappa >= T::zero() && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa must be nonnegative, got {kappa}")));
    }
    Ok(T::lit(2.0) * (c_y + kappa * (c_y * c_y / lambda).powf(m.recip())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityBoundInputs<T> {
    pub m: T,
    pub lambda: T,
    pub n: usize,
    /// Almost-sure bound on `|y|`.
    pub c_y: T,
    /// `sup k(x, x) ≤ κ²`.
    pub kappa: T,
}

impl<T: Scalar> StabilityBoundInputs<T> {
    pub fn new(m: T, lambda: T, n: usize, c_y: T, kappa: T) -> Result<Self> {
        let inputs = Self { m, lambda, n, c_y, kappa };
        inputs.validate()?;
        Ok(inputs)
    }

    fn validate(&self) -> Result<()> {
        if !(self.m >= T::lit(2.0)) {
            return Err(Error::StabilityUndefined { m: self.m.to_f64_lossless() });
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        positive("lambda", self.lambda)?;
        positive("c_y", self.c_y)?;
        positive("kappa", self.kappa)
    }
}

/// `β = Cκ(2^{m-2}Cκ/(λn))^{1/(m-1)}`, defined for `m ≥ 2` only.
pub fn theoretical_beta<T: Scalar>(inputs: &StabilityBoundInputs<T>) -> Result<T> {
    inputs.validate()?;
    let StabilityBoundInputs { m, lambda, n, c_y, kappa } = *inputs;
    let c = lipschitz_c(c_y, kappa, lambda, m)?;
    let n = T::from_usize(n).unwrap_or_else(T::max_value);
    let two = T::lit(2.0);
    Ok(c * kappa * (two.powf(m - two) * c * kappa / (lambda * n)).powf((m - T::one()).recip()))
}

/// `β = C₁(1 + C₂/√(λn))/λ` for ridge regression with an unnormalized
/// penalty; tends to `C₁/λ`, not zero.
pub fn modified_krr_beta<T: Scalar>(c1: T, c2: T, lambda: T, n: usize) -> Result<T> {
    positive("c1", c1)?;
    positive("c2", c2)?;
    positive("lambda", lambda)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let n = T::from_usize(n).unwrap_or_else(T::max_value);
    Ok(c1 * (T::one() + c2 / (lambda * n).sqrt()) / lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint<T> {
    pub n: usize,
    pub theoretical_beta: Option<T>,
    pub empirical_sup: T,
    /// Removal index achieving `empirical_sup`.
    pub worst_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport<T> {
    pub algorithm: Algorithm,
    pub lambda: T,
    pub m: T,
    /// `max |y|` over training and test records.
    pub c_y: T,
    pub kappa: T,
    pub theoretical_beta: Option<T>,
    pub empirical_sup: T,
    pub per_n: Vec<StabilityPoint<T>>,
}

/// Bound for `learner` when one is known, i.e. the m-power learner with `m ≥ 2`.
fn bound_for<T: Scalar>(learner: &Learner<T>, n: usize, c_y: T, kappa: T) -> Option<T> {
    if learner.algorithm != Algorithm::Mrlsr || !(learner.m >= T::lit(2.0)) || c_y <= T::zero() {
        return None;
    }
    StabilityBoundInputs::new(learner.m, learner.lambda, n, c_y, kappa)
        .and_then(|inputs| theoretical_beta(&inputs))
        .ok()
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &y| acc.max(y.abs()))
}

/// Fits `f_Z` once and `f_{Zⁱ}` for `samples` seeded indices `i` (every
/// index when `samples ≥ |Z|`), returning the largest squared-loss change
/// over `test_points`. The kernel bandwidth is resolved on `Z` and held fixed
/// for every refit.
pub fn empirical_stability<T: Scalar>(
    learner: &Learner<T>,
    z: &TrainingSet<T>,
    test_points: &TrainingSet<T>,
    samples: usize,
    seed: u64,
    cfg: &KernelConfig<T>,
) -> Result<StabilityReport<T>> {
    let n = z.len();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, found: n });
    }
    if test_points.is_empty() {
        return Err(Error::EmptyInput("test points"));
    }
    if test_points.dim() != z.dim() {
        return Err(Error::DimensionMismatch { expected: z.dim(), found: test_points.dim() });
    }
    let cfg = cfg.resolve(z.inputs())?;
    let cross = cross_gram(&cfg, test_points.inputs(), z.inputs())?;
    let base = learner.fit(z, &cfg)?;
    let base_pred = cross.mul_vec(&base.alpha)?;
    let loss = |y: T, f: T| (y - f) * (y - f);

    let indices: Vec<usize> = if samples >= n {
        (0..n).collect()
    } else {
        let mut idx = sample(&mut rng_from_seed(seed), n, samples).into_vec();
        idx.sort_unstable();
        idx
    };

    let mut sup = T::zero();
    let mut worst = None;
    for i in indices {
        let reduced = z.without(i);
        let k = build_gram(&cfg, reduced.inputs())?;
        let spectrum = eigendecompose(&k, reduced.targets())?;
        let alpha = spectrum.rotate_back(&learner.solve_spectral(&spectrum)?.coords)?;
        for (t, &y) in test_points.targets().iter().enumerate() {
            let kr = cross.row(t);
            let pred: T = kr[..i].iter().zip(&alpha[..i]).map(|(&a, &b)| a * b).sum::<T>()
                + kr[i + 1..].iter().zip(&alpha[i..]).map(|(&a, &b)| a * b).sum::<T>();
            let delta = (loss(y, base_pred[t]) - loss(y, pred)).abs();
            if worst.is_none() || delta > sup {
                sup = delta;
                worst = Some(i);
            }
        }
    }

    let c_y = max_abs(z.targets()).max(max_abs(test_points.targets()));
    let kappa = cfg.diagonal_sup().sqrt();
    let beta = bound_for(learner, n, c_y, kappa);
    Ok(StabilityReport {
        algorithm: learner.algorithm,
        lambda: learner.lambda,
        m: learner.m,
        c_y,
        kappa,
        theoretical_beta: beta,
        empirical_sup: sup,
        per_n: vec![StabilityPoint { n, theoretical_beta: beta, empirical_sup: sup, worst_index: worst }],
    })
}

/// Runs [`empirical_stability`] on seeded subsets of `pool` of each size in
/// `n_values`. The bandwidth is resolved once on `pool`, so every subset
/// shares one kernel. Top-level `empirical_sup` is the maximum over the series
/// and `theoretical_beta` is the bound at the smallest `n`.
pub fn stability_series<T: Scalar>(
    learner: &Learner<T>,
    pool: &TrainingSet<T>,
    test_points: &TrainingSet<T>,
    n_values: &[usize],
    samples: usize,
    seed: u64,
    cfg: &KernelConfig<T>,
) -> Result<StabilityReport<T>> {
    if n_values.is_empty() {
        return Err(Error::EmptyInput("n series"));
    }
    let cfg = cfg.resolve(pool.inputs())?;
    let mut per_n = Vec::with_capacity(n_values.len());
    let mut c_y = T::zero();
    let mut kappa = cfg.diagonal_sup().sqrt();
    for (slot, &n) in n_values.iter().enumerate() {
        if n > pool.len() {
            return Err(Error::TooFewRows { needed: n, found: pool.len() });
        }
        let mut rng = rng_from_seed(derive_seed(seed, 1, slot as u64));
        let mut rows = sample(&mut rng, pool.len(), n).into_vec();
        rows.sort_unstable();
        let z = pool.subset(&rows);
        let report = empirical_stability(learner, &z, test_points, samples, derive_seed(seed, 2, slot as u64), &cfg)?;
        c_y = c_y.max(report.c_y);
        kappa = report.kappa;
        per_n.extend(report.per_n);
    }
    let empirical_sup = per_n.iter().map(|p| p.empirical_sup).fold(T::zero(), T::max);
    let smallest = per_n.iter().min_by_key(|p| p.n).map(|p| p.n).unwrap_or(1);
    Ok(StabilityReport {
        algorithm: learner.algorithm,
        lambda: learner.lambda,
        m: learner.m,
        c_y,
        kappa,
        theoretical_beta: bound_for(learner, smallest, c_y, kappa),
        empirical_sup,
        per_n,
    })
}

/// Affine map of the targets onto `[-bound, bound]` (min to `-bound`, max to
/// `bound`). Constant targets map to zero.
pub fn rescale_targets<T: Scalar>(z: &TrainingSet<T>, bound: T) -> TrainingSet<T> {
    let (lo, hi) = z.targets().iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    if !(hi > lo) {
        return z.map_targets(|_| T::zero());
    }
    let mid = (hi + lo) / T::lit(2.0);
    let half = (hi - lo) / T::lit(2.0);
    z.map_targets(|y| ((y - mid) / half * bound).max(-bound).min(bound))
}

/// Clamps every target to `[-bound, bound]`.
pub fn clip_targets<T: Scalar>(z: &TrainingSet<T>, bound: T) -> TrainingSet<T> {
    z.map_targets(|y| y.max(-bound).min(bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::friedman_synthetic;

    fn inputs(m: f64, n: usize) -> StabilityBoundInputs<f64> {
        StabilityBoundInputs::new(m, 1.0, n, 1.0, 1.0).unwrap()
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz_c(1.0, 1.0, 1.0, 2.0).unwrap(), 4.0);
        assert_eq!(lipschitz_c(1.0, 1.0, 1.0, 3.0).unwrap(), 4.0);
        assert_eq!(lipschitz_c(1.5, 0.0, 1.0, 2.0).unwrap(), 3.0);
        assert!(lipschitz_c(0.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn beta_examples() {
        assert!((theoretical_beta(&inputs(2.0, 100)).unwrap() - 0.16).abs() < 1e-15);
        assert!((theoretical_beta(&inputs(3.0, 100)).unwrap() - 1.131_370_849_898_476).abs() < 1e-12);
        let b = theoretical_beta(&inputs(2.0, 50)).unwrap();
        assert!((theoretical_beta(&inputs(2.0, 200)).unwrap() - b / 4.0).abs() < 1e-15);
        assert!(matches!(StabilityBoundInputs::new(1.5, 1.0, 10, 1.0, 1.0), Err(Error::StabilityUndefined { .. })));
    }

    #[test]
    fn modified_krr_beta_examples() {
        assert_eq!(modified_krr_beta(1.0, 1.0, 1.0, 1).unwrap(), 2.0);
        assert!((modified_krr_beta(1.0f64, 1.0, 1.0, 100).unwrap() - 1.1).abs() < 1e-15);
        assert!(modified_krr_beta(1.0, 1.0, 1.0, 1_000_000_000).unwrap() > 1.0);
    }

    #[test]
    fn zero_targets_give_zero_perturbation() {
        let z = friedman_synthetic::<f64>(20, 1.0, 3).unwrap().map_targets(|_| 0.0);
        let r = empirical_stability(&Learner::mrlsr(1.0, 2.0), &z, &z, 5, 1, &KernelConfig::gaussian_auto()).unwrap();
        assert_eq!(r.empirical_sup, 0.0);
        assert_eq!(r.theoretical_beta, None);
    }

    #[test]
    fn bound_holds_on_rescaled_synthetic_data() {
        let pool = rescale_targets(&friedman_synthetic::<f64>(150, 1.0, 11).unwrap(), 1.0);
        let z = pool.subset(&(0..100).collect::<Vec<_>>());
        let test = pool.subset(&(100..150).collect::<Vec<_>>());
        let r = empirical_stability(&Learner::mrlsr(1.0, 2.0), &z, &test, 100, 4, &KernelConfig::gaussian_auto()).unwrap();
        let beta = r.theoretical_beta.unwrap();
        assert!(beta <= 0.16 + 1e-15);
        assert!(r.empirical_sup <= beta, "{r:?}");
        assert!(r.empirical_sup > 0.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let z = friedman_synthetic::<f64>(40, 1.0, 2).unwrap();
        let learner = Learner::krr(0.1);
        let cfg = KernelConfig::gaussian_auto();
        let a = empirical_stability(&learner, &z, &z, 7, 9, &cfg).unwrap();
        let b = empirical_stability(&learner, &z, &z, 7, 9, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rescale_and_clip() {
        let z = TrainingSet::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![-3.0, 1.0, 5.0]).unwrap();
        assert_eq!(rescale_targets(&z, 1.0).targets(), &[-1.0, 0.0, 1.0]);
        assert_eq!(clip_targets(&z, 2.0).targets(), &[-2.0, 1.0, 2.0]);
    }
}
