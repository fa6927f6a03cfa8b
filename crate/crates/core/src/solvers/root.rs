//! The scalar fixed-point function `F(C)` whose root parameterizes the
//! m-power solution, and the root finders for it.
//!
//! With `s = λ m n` and `S(C) = Σᵢ 4 dᵢ y'ᵢ² / (2 dᵢ + s C)²`,
//! `F(C) = S(C)^(m/2 - 1) - C`. At the root, `S(C₀) = ‖f‖²_H` and
//! `C₀ = ‖f‖_H^(m - 2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::GramSpectrum;
use crate::scalar::Scalar;

pub const MAX_ITERATIONS: usize = 500;
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;
pub const BISECTION_WIDTH: f64 = 1e-14;
pub const NEWTON_POLISH_STEPS: usize = 10;

pub const SCAN_POINTS: usize = 10_000;
pub const SCAN_LO: f64 = 1e-12;
pub const SCAN_HI: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootFindReport<T> {
    pub c0: T,
    pub iterations: usize,
    /// `|F(c0)|`
    pub residual: T,
    pub bracket: (T, T),
}

pub(crate) fn validate_lambda_m<T: Scalar>(lambda: T, m: T) -> Result<()> {
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if !(m > T::zero() && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("m must be positive, got {m}")));
    }
    Ok(())
}

/// `F` bound to one spectrum and one `(λ, m)` pair.
pub(crate) struct FixedPoint<'a, T> {
    d: &'a [T],
    y: &'a [T],
    /// `(2dᵢ, 4dᵢy'ᵢ²)` for the terms that can be nonzero.
    terms: Vec<(T, T)>,
    scale: T,
    exponent: T,
}

impl<'a, T: Scalar> FixedPoint<'a, T> {
    pub(crate) fn new(spectrum: &'a GramSpectrum<T>, lambda: T, m: T) -> Self {
        let n = T::from_usize(spectrum.n()).unwrap_or_else(T::max_value);
        let d = spectrum.eigenvalues();
        let y = spectrum.rotated_targets();
        let (two, four) = (T::lit(2.0), T::lit(4.0));
        let terms = d
            .iter()
            .zip(y)
            .filter(|&(&d, &y)| d != T::zero() && y != T::zero())
            .map(|(&d, &y)| (two * d, four * d * y * y))
            .collect();
        Self {
            d,
            y,
            terms,
            scale: lambda * m * n,
            exponent: m / T::lit(2.0) - T::one(),
        }
    }

    /// `S(C) = Σ 4dᵢy'ᵢ²/(2dᵢ + λmnC)²`.
    fn sum(&self, c: T) -> T {
        let mut s = T::zero();
        for &(two_d, num) in &self.terms {
            let den = two_d + self.scale * c;
            s += num / (den * den);
        }
        s
    }

    /// `S(C)` and `S'(C)`.
    fn sum_and_slope(&self, c: T) -> (T, T) {
        let two = T::lit(2.0);
        let mut s = T::zero();
        let mut ds = T::zero();
        for &(two_d, num) in &self.terms {
            let den = two_d + self.scale * c;
            let t = num / (den * den);
            s += t;
            ds -= two * self.scale * t / den;
        }
        (s, ds)
    }

    /// `S(0) = Σ y'ᵢ²/dᵢ`; zero iff the targets have no component in range(K).
    pub(crate) fn range_energy(&self) -> T {
        self.sum(T::zero())
    }

    pub(crate) fn value(&self, c: T) -> Result<T> {
        let s = self.sum(c);
        if s == T::zero() && self.exponent < T::zero() {
            return Err(Error::DegenerateRoot("targets have no component in the range of K and m < 2"));
        }
        Ok(s.powf(self.exponent) - c)
    }

    pub(crate) fn derivative(&self, c: T) -> T {
        let (s, ds) = self.sum_and_slope(c);
        if s == T::zero() || self.exponent == T::zero() {
            return -T::one();
        }
        self.exponent * s.powf(self.exponent - T::one()) * ds - T::one()
    }

    /// Coordinates of the solution in the eigenbasis: `α'ᵢ = 2y'ᵢ/(2dᵢ + λmnC)`.
    pub(crate) fn coefficients(&self, c: T) -> Vec<T> {
        let two = T::lit(2.0);
        self.d.iter().zip(self.y).map(|(&d, &y)| two * y / (two * d + self.scale * c)).collect()
    }
}

/// `F(C) = (Σᵢ 4dᵢy'ᵢ²/(2dᵢ + λmnC)²)^(m/2-1) - C`, with `n` the spectrum size.
/// Directions with `dᵢ = 0` contribute nothing to the sum.
pub fn f_of_c<T: Scalar>(c: T, spectrum: &GramSpectrum<T>, lambda: T, m: T) -> Result<T> {
    validate_lambda_m(lambda, m)?;
    if !(c >= T::zero()) {
        return Err(Error::InvalidParameter(format!("C must be nonnegative, got {c}")));
    }
    FixedPoint::new(spectrum, lambda, m).value(c)
}

fn residual_tolerance<T: Scalar>() -> T {
    T::lit(RESIDUAL_TOLERANCE).max(T::lit(64.0) * T::epsilon())
}

fn width_tolerance<T: Scalar>() -> T {
    T::lit(BISECTION_WIDTH).max(T::lit(4.0) * T::epsilon())
}

/// Unique positive root of `F` for `m > 1`.
///
/// Brackets from `[0, 1]` by doubling the upper end, bisects down to a
/// relative width of `1e-14`, then polishes with at most ten Newton steps
/// that are only accepted while they stay in the bracket and reduce `|F|`.
pub fn find_root<T: Scalar>(spectrum: &GramSpectrum<T>, lambda: T, m: T) -> Result<RootFindReport<T>> {
    validate_lambda_m(lambda, m)?;
    if !(m > T::one()) {
        return Err(Error::InvalidParameter(format!("find_root needs m > 1, got {m}; use scan_roots")));
    }
    let f = FixedPoint::new(spectrum, lambda, m);
    if !(f.range_energy() > T::zero()) {
        return Err(Error::DegenerateRoot("targets have no component in the range of K"));
    }
    let mut iterations = 0usize;
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut f_hi = f.value(hi)?;
    while f_hi >= T::zero() {
        iterations += 1;
        if iterations >= MAX_ITERATIONS || !hi.is_finite() {
            return Err(not_converged(iterations, lo, hi));
        }
        lo = hi;
        hi = hi + hi;
        f_hi = f.value(hi)?;
    }
    let (lo, hi, iterations) = bisect(&f, lo, hi, iterations)?;
    polish(&f, lo, hi, iterations)
}

fn not_converged<T: Scalar>(iterations: usize, lo: T, hi: T) -> Error {
    Error::RootNotConverged { iterations, lo: lo.to_f64_lossless(), hi: hi.to_f64_lossless() }
}

/// Shrinks `[lo, hi]` with `F(lo) ≥ 0 > F(hi)` (or the mirrored sign pattern).
fn bisect<T: Scalar>(f: &FixedPoint<'_, T>, mut lo: T, mut hi: T, mut iterations: usize) -> Result<(T, T, usize)> {
    let lo_positive = f.value(lo)? >= T::zero();
    let tol = width_tolerance::<T>();
    let half = T::lit(0.5);
    while hi - lo > tol * hi.max(T::one()) {
        iterations += 1;
        if iterations >= MAX_ITERATIONS {
            return Err(not_converged(iterations, lo, hi));
        }
        let mid = lo + (hi - lo) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        if (f.value(mid)? >= T::zero()) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi, iterations))
}

fn polish<T: Scalar>(f: &FixedPoint<'_, T>, lo: T, hi: T, mut iterations: usize) -> Result<RootFindReport<T>> {
    let mut c = lo + (hi - lo) * T::lit(0.5);
    let mut fc = f.value(c)?;
    for _ in 0..NEWTON_POLISH_STEPS {
        if fc == T::zero() {
            break;
        }
        let slope = f.derivative(c);
        if slope == T::zero() || !slope.is_finite() {
            break;
        }
        let next = c - fc / slope;
        if !(next >= lo && next <= hi) {
            break;
        }
        let f_next = f.value(next)?;
        iterations += 1;
        if f_next.abs() >= fc.abs() {
            break;
        }
        c = next;
        fc = f_next;
    }
    let residual = fc.abs();
    let floor = hi - lo <= T::lit(4.0) * T::epsilon() * hi.max(T::one());
    if residual > residual_tolerance::<T>() * c.max(T::one()) && !floor {
        return Err(not_converged(iterations, lo, hi));
    }
    Ok(RootFindReport { c0: c, iterations, residual, bracket: (lo, hi) })
}

/// Every sign change of `F` on a log grid over `[1e-12, 1e6]`, each refined
/// by bisection. Used for `m ≤ 1`, where `F` can have several roots or none.
pub fn scan_roots<T: Scalar>(spectrum: &GramSpectrum<T>, lambda: T, m: T) -> Result<Vec<RootFindReport<T>>> {
    validate_lambda_m(lambda, m)?;
    let f = FixedPoint::new(spectrum, lambda, m);
    if !(f.range_energy() > T::zero()) {
        return Err(Error::DegenerateRoot("targets have no component in the range of K"));
    }
    let log_lo = SCAN_LO.ln();
    let step = (SCAN_HI.ln() - log_lo) / (SCAN_POINTS - 1) as f64;
    let grid: Vec<T> = (0..SCAN_POINTS).map(|i| T::from_f64_lossy((log_lo + step * i as f64).exp())).collect();

    let mut roots = Vec::new();
    let mut prev_c = grid[0];
    let mut prev_f = f.value(prev_c)?;
    if prev_f == T::zero() {
        roots.push(RootFindReport { c0: prev_c, iterations: 0, residual: T::zero(), bracket: (prev_c, prev_c) });
    }
    for &c in &grid[1..] {
        let fc = f.value(c)?;
        if fc == T::zero() {
            roots.push(RootFindReport { c0: c, iterations: 0, residual: T::zero(), bracket: (c, c) });
        } else if prev_f != T::zero() && (fc < T::zero()) != (prev_f < T::zero()) {
            let (lo, hi, iterations) = bisect(&f, prev_c, c, 0)?;
            let c0 = lo + (hi - lo) * T::lit(0.5);
            let residual = f.value(c0)?.abs();
            roots.push(RootFindReport { c0, iterations, residual, bracket: (lo, hi) });
        }
        prev_c = c;
        prev_f = fc;
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{eigendecompose, GramMatrix};
    use crate::linalg::Matrix;

    fn scalar_spectrum(d: f64, y: f64) -> GramSpectrum<f64> {
        let k = GramMatrix::from_matrix(Matrix::diagonal(&[d])).unwrap();
        eigendecompose(&k, &[y]).unwrap()
    }

    fn spectrum_3() -> GramSpectrum<f64> {
        let k = Matrix::from_rows(&[vec![1.0, 0.5, 0.2], vec![0.5, 1.0, 0.4], vec![0.2, 0.4, 1.0]]).unwrap();
        eigendecompose(&GramMatrix::from_matrix(k).unwrap(), &[1.0, -2.0, 0.5]).unwrap()
    }

    #[test]
    fn quadratic_exponent_is_linear() {
        let s = spectrum_3();
        for c in [0.0, 0.3, 1.0, 7.5] {
            assert!((f_of_c(c, &s, 0.1, 2.0).unwrap() - (1.0 - c)).abs() < 1e-15);
        }
        let r = find_root(&s, 0.1, 2.0).unwrap();
        assert_eq!(r.c0, 1.0);
    }

    #[test]
    fn scalar_quartic_case() {
        // F(C) = 1/(1+C)² - C, root solves C³ + 2C² + C - 1 = 0.
        let s = scalar_spectrum(1.0, 1.0);
        for c in [0.0, 0.5, 2.0] {
            let want = 1.0 / ((1.0 + c) * (1.0 + c)) - c;
            assert!((f_of_c(c, &s, 0.5, 4.0).unwrap() - want).abs() < 1e-15);
        }
        let r = find_root(&s, 0.5, 4.0).unwrap();
        assert!((r.c0 - 0.465_571_231_876_768).abs() < 1e-13);
        assert!(r.residual <= 1e-12);
        assert!(r.bracket.0 <= r.c0 && r.c0 <= r.bracket.1);
    }

    #[test]
    fn zero_targets() {
        let s = scalar_spectrum(1.0, 0.0);
        assert_eq!(f_of_c(0.0, &s, 0.5, 4.0).unwrap(), 0.0);
        assert_eq!(f_of_c(2.0, &s, 0.5, 4.0).unwrap(), -2.0);
        assert!(matches!(f_of_c(0.0, &s, 0.5, 1.5), Err(Error::DegenerateRoot(_))));
        assert!(matches!(find_root(&s, 0.5, 4.0), Err(Error::DegenerateRoot(_))));
    }

    #[test]
    fn rejects_bad_parameters() {
        let s = scalar_spectrum(1.0, 1.0);
        assert!(f_of_c(-1.0, &s, 0.5, 4.0).is_err());
        assert!(f_of_c(1.0, &s, 0.0, 4.0).is_err());
        assert!(f_of_c(1.0, &s, 0.5, -1.0).is_err());
        assert!(find_root(&s, 0.5, 1.0).is_err());
    }

    #[test]
    fn analytic_derivative_matches_finite_difference() {
        let s = spectrum_3();
        let f = FixedPoint::new(&s, 0.05, 1.5);
        for c in [0.1, 1.0, 3.0] {
            let h = 1e-6 * c;
            let fd = (f.value(c + h).unwrap() - f.value(c - h).unwrap()) / (2.0 * h);
            assert!((f.derivative(c) - fd).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn roots_for_several_exponents() {
        let s = spectrum_3();
        for m in [1.05, 1.2, 1.5, 2.5, 3.0, 4.0, 7.0] {
            for lambda in [1e-4, 0.1, 10.0] {
                let r = find_root(&s, lambda, m).unwrap();
                assert!(r.c0 > 0.0);
                assert!(r.residual <= 1e-12 * r.c0.max(1.0), "m={m} λ={lambda} {r:?}");
            }
        }
    }

    #[test]
    fn scan_agrees_with_bracketing_for_m_above_one() {
        let s = spectrum_3();
        let r = find_root(&s, 0.1, 1.5).unwrap();
        let roots = scan_roots(&s, 0.1, 1.5).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].c0 - r.c0).abs() < 1e-10 * r.c0);
    }

    #[test]
    fn single_precision_root() {
        let k = GramMatrix::from_matrix(Matrix::<f32>::diagonal(&[1.0])).unwrap();
        let s = eigendecompose(&k, &[1.0f32]).unwrap();
        let r = find_root(&s, 0.5f32, 4.0f32).unwrap();
        assert!((r.c0 - 0.465_571_23).abs() < 1e-5);
    }
}
