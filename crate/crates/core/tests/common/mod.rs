//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use mrlsr_core::kernel::{build_gram, GramMatrix};
use mrlsr_core::linalg::{cholesky_solve, Matrix};
use mrlsr_core::{Dataset, Kernel};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

pub fn rng(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}

/// Uniform inputs in `[0, 1]^d` and targets uniform in `[-2, 2]`.
pub fn random_set(rng: &mut Pcg64, n: usize, d: usize) -> Dataset {
    let inputs = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let targets = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    Dataset::new(inputs, targets).unwrap()
}

pub fn gram(z: &Dataset, cfg: &Kernel) -> GramMatrix<f64> {
    build_gram(cfg, z.inputs()).unwrap()
}

/// `(K + shift·I)⁻¹ Y` by Cholesky, bypassing the eigensolver.
pub fn ridge_by_cholesky(k: &GramMatrix<f64>, y: &[f64], shift: f64) -> Vec<f64> {
    let n = k.n();
    let a = Matrix::from_fn(n, n, |i, j| k.matrix()[(i, j)] + if i == j { shift } else { 0.0 });
    cholesky_solve(&a, y).unwrap()
}

/// `(1/n)‖Y - Kα‖² + λ(αᵀKα)^{m/2}`, written out from scratch.
pub fn objective(k: &GramMatrix<f64>, y: &[f64], alpha: &[f64], lambda: f64, m: f64) -> f64 {
    let n = y.len();
    let ka: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k.matrix()[(i, j)] * alpha[j]).sum()).collect();
    let loss: f64 = y.iter().zip(&ka).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
    let norm_sq: f64 = alpha.iter().zip(&ka).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    loss + lambda * norm_sq.powf(m / 2.0)
}

/// Minimizes a convex function of one variable by bracketing and golden
/// section search.
fn line_min(f: impl Fn(f64) -> f64, scale: f64) -> f64 {
    let mut step = scale.max(1e-6);
    let f0 = f(0.0);
    let (mut lo, mut hi);
    if f(step) < f0 {
        lo = 0.0;
        hi = step;
        while f(hi + step) < f(hi) {
            lo = hi;
            step *= 2.0;
            hi += step;
        }
        hi += step;
    } else if f(-step) < f0 {
        hi = 0.0;
        lo = -step;
        while f(lo - step) < f(lo) {
            hi = lo;
            step *= 2.0;
            lo -= step;
        }
        lo -= step;
    } else {
        lo = -step;
        hi = step;
    }
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    if f(mid) < f0 {
        mid
    } else {
        0.0
    }
}

/// Derivative-free minimization of the α-space objective: Powell's
/// conjugate-direction method starting from the coordinate axes, so the first
/// pass is one sweep of coordinate descent. Each later pass also searches
/// along the net displacement of the pass, which is what lets it move along
/// the narrow valleys where plain coordinate descent stalls.
pub fn coordinate_descent(k: &GramMatrix<f64>, y: &[f64], lambda: f64, m: f64, passes: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    let f = |a: &[f64]| objective(k, y, a, lambda, m);
    let along = |x: &[f64], dir: &[f64]| -> (Vec<f64>, f64) {
        let scale = x.iter().fold(1e-3f64, |acc, v| acc.max(v.abs()));
        let t = line_min(
            |t| {
                let a: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + t * di).collect();
                f(&a)
            },
            scale,
        );
        let a: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + t * di).collect();
        let v = f(&a);
        (a, v)
    };
    let mut dirs: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut x = vec![0.0; n];
    let mut best = f(&x);
    for _ in 0..passes {
        let start = x.clone();
        let start_val = best;
        let mut biggest = (0usize, 0.0f64);
        for (i, dir) in dirs.iter().enumerate() {
            let (a, v) = along(&x, dir);
            if v < best {
                if best - v > biggest.1 {
                    biggest = (i, best - v);
                }
                x = a;
                best = v;
            }
        }
        let disp: Vec<f64> = x.iter().zip(&start).map(|(a, b)| a - b).collect();
        let norm = disp.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let unit: Vec<f64> = disp.iter().map(|v| v / norm).collect();
            let (a, v) = along(&x, &unit);
            if v < best {
                x = a;
                best = v;
            }
            dirs.remove(biggest.0);
            dirs.push(unit);
        }
        if start_val - best <= 1e-17 * start_val.abs() {
            break;
        }
    }
    (x, best)
}

/// Every multiset of size `k` over `0..alphabet`, as sorted vectors.
pub fn multisets(alphabet: u8, k: usize) -> Vec<Vec<u8>> {
    fn go(alphabet: u8, k: usize, start: u8, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for s in start..alphabet {
            cur.push(s);
            go(alphabet, k, s, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(alphabet, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Root of `α³ + α - 1` by plain bisection on `[0, 1]`.
pub fn cubic_root_by_bisection() -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid * mid + mid - 1.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
