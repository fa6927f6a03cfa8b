//! Generalized Hamming distance between training sets viewed as multisets:
//! the number of insertions, deletions and substitutions needed to turn one
//! into the other, with reordering free.
//!
//! Elements are compared by exact equality. For training records this means
//! bitwise equality of every float, via [`Record`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::TrainingSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest set size the enumeration oracle accepts.
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Canonical byte key of one `(input, target)` record.
///
/// Each float is widened to `f64` and stored big-endian after the usual
/// sign-magnitude to two's-complement flip, so byte order follows numeric
/// order and equal keys mean bitwise-equal records.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Record {
    key: Vec<u8>,
}

impl Record {
    pub fn new<T: Scalar>(input: &[T], target: T) -> Self {
        let mut key = Vec::with_capacity(8 * (input.len() + 1) + 8);
        key.extend_from_slice(&(input.len() as u64).to_be_bytes());
        for &v in input.iter().chain(std::iter::once(&target)) {
            key.extend_from_slice(&order_preserving_bits(v.to_f64_lossless()).to_be_bytes());
        }
        Self { key }
    }

    pub fn key(&self) -> &[u8] {
        &self.key
    }
}

fn order_preserving_bits(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

pub fn records<T: Scalar>(ts: &TrainingSet<T>) -> Vec<Record> {
    ts.inputs().iter().zip(ts.targets()).map(|(x, &y)| Record::new(x, y)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// Elements paired with an identical partner.
    pub shared: usize,
    /// Elements paired with a different partner.
    pub substitutions: usize,
    /// Elements of the larger set left without a partner.
    pub unpaired: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricResult {
    pub distance: usize,
    pub witness: Option<Matching>,
}

fn counts<E: Ord>(z: &[E]) -> BTreeMap<&E, usize> {
    let mut m = BTreeMap::new();
    for e in z {
        *m.entry(e).or_insert(0) += 1;
    }
    m
}

/// Size of the multiset intersection.
pub fn intersection_size<E: Ord>(z1: &[E], z2: &[E]) -> usize {
    let c1 = counts(z1);
    let c2 = counts(z2);
    c1.iter().map(|(e, &a)| c2.get(e).map_or(0, |&b| a.min(b))).sum()
}

/// Minimum over permutations of the positional mismatch count between two
/// equal-size sets, which equals the number of unmatched elements.
pub fn g_n<E: Ord>(z1: &[E], z2: &[E]) -> Result<usize> {
    if z1.len() != z2.len() {
        return Err(Error::SizeMismatch { left: z1.len(), right: z2.len() });
    }
    Ok(z1.len() - intersection_size(z1, z2))
}

/// `max(|Z₁|, |Z₂|) - |Z₁ ∩ Z₂|` with the intersection taken as multisets.
pub fn h_metric<E: Ord>(z1: &[E], z2: &[E]) -> MetricResult {
    let shared = intersection_size(z1, z2);
    let (small, large) = if z1.len() <= z2.len() { (z1.len(), z2.len()) } else { (z2.len(), z1.len()) };
    MetricResult {
        distance: large - shared,
        witness: Some(Matching { shared, substitutions: small - shared, unpaired: large - small }),
    }
}

/// Distance between two training sets under bitwise record equality.
pub fn training_set_distance<T: Scalar>(z1: &TrainingSet<T>, z2: &TrainingSet<T>) -> MetricResult {
    h_metric(&records(z1), &records(z2))
}

/// Literal evaluation of the definition: every equal-size subset of the
/// larger set against every permutation of the smaller one.
pub fn h_metric_bruteforce<E: PartialEq>(z1: &[E], z2: &[E]) -> Result<usize> {
    let (small, large) = if z1.len() >= z2.len() { (z2, z1) } else { (z1, z2) };
    if large.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeGuard { size: large.len(), limit: BRUTE_FORCE_LIMIT });
    }
    let k = small.len();
    let mut best = usize::MAX;
    let mut chosen = Vec::with_capacity(k);
    for_each_combination(large.len(), k, 0, &mut chosen, &mut |subset| {
        let picked: Vec<&E> = subset.iter().map(|&i| &large[i]).collect();
        best = best.min(g_n_bruteforce(&picked, small));
    });
    Ok(large.len() - k + best)
}

fn for_each_combination(n: usize, k: usize, start: usize, chosen: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    for i in start..n {
        if n - i < k - chosen.len() {
            break;
        }
        chosen.push(i);
        for_each_combination(n, k, i + 1, chosen, f);
        chosen.pop();
    }
}

/// `min_σ Σᵢ [z1_σ(i) ≠ z2ᵢ]` by enumerating all permutations (Heap's algorithm).
fn g_n_bruteforce<E: PartialEq>(z1: &[&E], z2: &[E]) -> usize {
    let n = z1.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mismatches = |p: &[usize]| p.iter().zip(z2).filter(|(&i, b)| *z1[i] != **b).count();
    let mut best = mismatches(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(mismatches(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str) -> Vec<char> {
        text.chars().collect()
    }

    #[test]
    fn g_n_examples() {
        assert_eq!(g_n(&s("abc"), &s("abc")).unwrap(), 0);
        assert_eq!(g_n(&s("abc"), &s("bcd")).unwrap(), 1);
        assert_eq!(g_n(&s("aab"), &s("abb")).unwrap(), 1);
        assert!(matches!(g_n(&s("ab"), &s("abc")), Err(Error::SizeMismatch { left: 2, right: 3 })));
    }

    #[test]
    fn h_metric_examples() {
        assert_eq!(h_metric(&s("abca"), &s("abca")).distance, 0);
        assert_eq!(h_metric(&s(""), &s("xyz")).distance, 3);
        assert_eq!(h_metric(&s("abc"), &s("a")).distance, 2);
        let w = h_metric(&s("abcd"), &s("bxa")).witness.unwrap();
        assert_eq!(w, Matching { shared: 2, substitutions: 1, unpaired: 1 });
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(h_metric_bruteforce(&s("a"), &s("b")).unwrap(), 1);
        assert_eq!(h_metric_bruteforce(&s("ab"), &s("ba")).unwrap(), 0);
        assert_eq!(h_metric_bruteforce(&s("abc"), &s("a")).unwrap(), 2);
        assert_eq!(h_metric_bruteforce(&s("aab"), &s("abb")).unwrap(), 1);
        assert!(matches!(h_metric_bruteforce(&s("abcdefghi"), &s("a")), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn record_keys() {
        let a = Record::new(&[1.0f64, -2.0], 3.0);
        let b = Record::new(&[1.0f64, -2.0], 3.0);
        let c = Record::new(&[1.0f64, -2.0], 3.000_000_000_000_001);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(Record::new(&[-1.0f64], 0.0) < Record::new(&[-0.5f64], 0.0));
        assert!(Record::new(&[-0.5f64], 0.0) < Record::new(&[2.0f64], 0.0));
        assert_eq!(Record::new(&[0.5f32], 1.5f32), Record::new(&[0.5f64], 1.5f64));
    }

    #[test]
    fn leave_one_out_distance_on_training_sets() {
        let ts = TrainingSet::new(vec![vec![0.1], vec![0.2], vec![0.1]], vec![1.0, 2.0, 1.0]).unwrap();
        for i in 0..ts.len() {
            assert_eq!(training_set_distance(&ts, &ts.without(i)).distance, 1);
        }
    }
}
