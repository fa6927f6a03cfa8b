//! Training sets, CSV ingestion, the Friedman synthetic generator,
//! deterministic splitting and the scaled RMSE metric.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The generator behind every seeded operation in the crate (PCG XSL-RR 128/64).
pub type ExperimentRng = Pcg64;

pub fn rng_from_seed(seed: u64) -> ExperimentRng {
    Pcg64::seed_from_u64(seed)
}

/// Child seed for stream `stream`, item `index` of a master seed (SplitMix64
/// finalizer over a fixed mixing of the three). Adding items to one stream
/// never changes the seeds of earlier items or other streams.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal deviate by Box–Muller, cosine branch only, one deviate
/// per two uniforms.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    // 1 - U lies in (0, 1], so the logarithm is finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub seed: Option<u64>,
}

/// Multiset of `(input, target)` records; storage order carries no meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet<T> {
    inputs: Vec<Vec<T>>,
    targets: Vec<T>,
    pub provenance: Provenance,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(inputs: Vec<Vec<T>>, targets: Vec<T>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch { expected: inputs.len(), found: targets.len() });
        }
        if let Some(first) = inputs.first() {
            let d = first.len();
            if d == 0 {
                return Err(Error::EmptyInput("input vectors need at least one feature"));
            }
            if let Some(bad) = inputs.iter().find(|x| x.len() != d) {
                return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
            }
        }
        Ok(Self { inputs, targets, provenance: Provenance::default() })
    }

    pub fn with_provenance(mut self, source: impl Into<String>, seed: Option<u64>) -> Self {
        self.provenance = Provenance { source: source.into(), seed };
        self
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Feature dimension; 0 for an empty set.
    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<T>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn record(&self, i: usize) -> (&[T], T) {
        (&self.inputs[i], self.targets[i])
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// `Zⁱ`: the set with record `i` removed.
    pub fn without(&self, i: usize) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&j| j != i).collect();
        self.subset(&keep)
    }

    pub fn map_targets(&self, f: impl Fn(T) -> T) -> Self {
        Self { inputs: self.inputs.clone(), targets: self.targets.iter().map(|&y| f(y)).collect(), provenance: self.provenance.clone() }
    }

    pub fn max_abs_target(&self) -> T {
        self.targets.iter().fold(T::zero(), |acc, y| acc.max(y.abs()))
    }

    pub fn to_csv_string(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            let mut cols: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
            cols.push("y".into());
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            for v in x {
                out.push_str(&v.to_string());
                out.push(',');
            }
            out.push_str(&y.to_string());
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, header: bool) -> Result<()> {
        std::fs::write(path, self.to_csv_string(header))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetColumn {
    #[default]
    Last,
    Index(usize),
}

/// Parses comma-separated numeric text. Rows are numbered from 1 in errors,
/// counting the header line when present.
pub fn parse_csv<T: Scalar>(text: &str, has_header: bool, target: TargetColumn) -> Result<TrainingSet<T>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Csv { row, column: 0, message: e.to_string() })?;
        if has_header && idx == 0 {
            width = Some(record.len());
            continue;
        }
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow { row, expected, found: record.len() });
        }
        let target_idx = match target {
            TargetColumn::Last => expected - 1,
            TargetColumn::Index(j) if j < expected => j,
            TargetColumn::Index(j) => {
                return Err(Error::Csv { row, column: j + 1, message: format!("target column out of range ({expected} columns)") })
            }
        };
        if expected < 2 {
            return Err(Error::Csv { row, column: 1, message: "need at least one feature and a target".into() });
        }
        let mut x = Vec::with_capacity(expected - 1);
        let mut y = T::zero();
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Csv { row, column: j + 1, message: format!("non-numeric cell `{cell}`") })?;
            if j == target_idx {
                y = T::from_f64_lossy(v);
            } else {
                x.push(T::from_f64_lossy(v));
            }
        }
        inputs.push(x);
        targets.push(y);
    }
    if targets.is_empty() {
        return Err(Error::EmptyInput("csv file has no data rows"));
    }
    TrainingSet::new(inputs, targets)
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, has_header: bool, target: TargetColumn) -> Result<TrainingSet<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    Ok(parse_csv(&text, has_header, target)?.with_provenance(path.display().to_string(), None))
}

fn looks_like_header(text: &str) -> bool {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.split(',').any(|c| c.trim().parse::<f64>().is_err()))
}

/// Reads feature rows for prediction. Rows with `dim + 1` columns are taken
/// to carry a trailing target, which is dropped. A non-numeric first row is
/// skipped as a header.
pub fn load_inputs<T: Scalar>(path: impl AsRef<Path>, dim: usize) -> Result<Vec<Vec<T>>> {
    let text = std::fs::read_to_string(path)?;
    let header = looks_like_header(&text);
    let mut reader = csv::ReaderBuilder::new().has_headers(header).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1 + usize::from(header);
        let record = record.map_err(|e| Error::Csv { row, column: 0, message: e.to_string() })?;
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if record.len() != dim && record.len() != dim + 1 {
            return Err(Error::DimensionMismatch { expected: dim, found: record.len() });
        }
        let x = record
            .iter()
            .take(dim)
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .map(T::from_f64_lossy)
                    .map_err(|_| Error::Csv { row, column: j + 1, message: format!("non-numeric cell `{cell}`") })
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(x);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("csv file has no data rows"));
    }
    Ok(rows)
}

/// Reads a CSV, treating the first row as a header when any of its cells is
/// not a number.
pub fn load_csv_auto<T: Scalar>(path: impl AsRef<Path>) -> Result<TrainingSet<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    Ok(parse_csv(&text, looks_like_header(&text), TargetColumn::Last)?.with_provenance(path.display().to_string(), None))
}

/// `10 sin(πx₁x₂) + 20(x₃ - 0.5)² + 10x₄ + 5x₅`.
pub fn friedman_response(x: &[f64]) -> f64 {
    10.0 * (std::f64::consts::PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

pub const FRIEDMAN_FEATURES: usize = 10;

/// Ten i.i.d. uniform features on `[0, 1]`, target from [`friedman_response`]
/// plus `N(0, noise_sd²)` noise. Row `i` draws its ten features and then its
/// noise deviate from one seeded stream.
pub fn friedman_synthetic<T: Scalar>(n: usize, noise_sd: f64, seed: u64) -> Result<TrainingSet<T>> {
    if n == 0 {
        return Err(Error::EmptyInput("friedman_synthetic needs n >= 1"));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise_sd must be nonnegative, got {noise_sd}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..FRIEDMAN_FEATURES).map(|_| rng.random::<f64>()).collect();
        let noise = standard_normal(&mut rng);
        targets.push(T::from_f64_lossy(friedman_response(&x) + noise_sd * noise));
        inputs.push(x.into_iter().map(T::from_f64_lossy).collect());
    }
    Ok(TrainingSet::new(inputs, targets)?.with_provenance(format!("friedman_synthetic(n={n}, noise_sd={noise_sd})"), Some(seed)))
}

/// Seeded partition of `0..n` into disjoint, exhaustive index groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub fractions: Vec<f64>,
    pub partitions: Vec<Vec<usize>>,
}

/// Part sizes by largest remainder; earlier parts win ties.
fn part_sizes(n: usize, fractions: &[f64]) -> Vec<usize> {
    let total: f64 = fractions.iter().sum();
    let exact: Vec<f64> = fractions.iter().map(|f| f / total * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

impl SplitPlan {
    /// Shuffles `0..n` and cuts it by `fractions`; the fractions must sum to
    /// one within one row's worth.
    pub fn fractions(n: usize, fractions: &[f64], seed: u64) -> Result<Self> {
        if fractions.is_empty() || fractions.iter().any(|&f| !(f >= 0.0 && f.is_finite())) {
            return Err(Error::InvalidSplit(format!("fractions must be nonnegative: {fractions:?}")));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() * (n.max(1) as f64) > 1.0 || sum == 0.0 {
            return Err(Error::InvalidSplit(format!("fractions sum to {sum}, expected 1")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from_seed(seed));
        let mut partitions = Vec::with_capacity(fractions.len());
        let mut start = 0;
        for size in part_sizes(n, fractions) {
            let mut part = order[start..start + size].to_vec();
            part.sort_unstable();
            partitions.push(part);
            start += size;
        }
        Ok(Self { seed, fractions: fractions.to_vec(), partitions })
    }

    /// `k` parts whose sizes differ by at most one.
    pub fn equal_parts(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidSplit("need at least one part".into()));
        }
        Self::fractions(n, &vec![1.0 / k as f64; k], seed)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.partitions.iter().map(Vec::len).collect()
    }
}

pub fn split<T: Scalar>(ts: &TrainingSet<T>, plan: &SplitPlan) -> Result<Vec<TrainingSet<T>>> {
    let covered: usize = plan.partitions.iter().map(Vec::len).sum();
    if covered != ts.len() || plan.partitions.iter().flatten().any(|&i| i >= ts.len()) {
        return Err(Error::InvalidSplit(format!("plan covers {covered} rows, training set has {}", ts.len())));
    }
    Ok(plan.partitions.iter().map(|p| ts.subset(p)).collect())
}

/// Index pairs `(train, validate)` for `k`-fold cross-validation.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k == 0 || k > n {
        return Err(Error::InvalidSplit(format!("cannot make {k} folds from {n} rows")));
    }
    let plan = SplitPlan::equal_parts(n, k, seed)?;
    Ok((0..k)
        .map(|f| {
            let train = plan.partitions.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, p)| p.iter().copied()).collect();
            (train, plan.partitions[f].clone())
        })
        .collect())
}

pub fn kfold<T: Scalar>(ts: &TrainingSet<T>, k: usize, seed: u64) -> Result<Vec<(TrainingSet<T>, TrainingSet<T>)>> {
    Ok(kfold_indices(ts.len(), k, seed)?.into_iter().map(|(tr, va)| (ts.subset(&tr), ts.subset(&va))).collect())
}

/// `(1/max yᵢ) · sqrt((1/n) Σ (yᵢ - ŷᵢ)²)`. The denominator is the largest
/// target itself, so sets whose largest target is not positive are rejected.
pub fn scaled_rmse<T: Scalar>(targets: &[T], predictions: &[T]) -> Result<T> {
    if targets.len() != predictions.len() {
        return Err(Error::DimensionMismatch { expected: targets.len(), found: predictions.len() });
    }
    if targets.is_empty() {
        return Err(Error::EmptyInput("scaled RMSE of an empty set"));
    }
    let max = targets.iter().copied().fold(T::neg_infinity(), T::max);
    if !(max > T::zero()) {
        return Err(Error::NonPositiveMaxTarget { max: max.to_f64_lossless() });
    }
    let n = T::from_usize(targets.len()).unwrap_or_else(T::max_value);
    let mse = targets.iter().zip(predictions).map(|(&y, &p)| (y - p) * (y - p)).sum::<T>() / n;
    Ok(mse.sqrt() / max)
}

/// Per-feature affine map to zero mean and unit variance, estimated on one
/// split and applied to others. Constant features are only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub means: Vec<T>,
    pub scales: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(ts: &TrainingSet<T>) -> Result<Self> {
        if ts.is_empty() {
            return Err(Error::EmptyInput("standardizer needs data"));
        }
        let n = T::from_usize(ts.len()).unwrap_or_else(T::max_value);
        let d = ts.dim();
        let mut means = vec![T::zero(); d];
        for x in ts.inputs() {
            for (m, &v) in means.iter_mut().zip(x) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut scales = vec![T::zero(); d];
        for x in ts.inputs() {
            for ((s, &v), &m) in scales.iter_mut().zip(x).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scales {
            *s = (*s / n).sqrt();
            if *s == T::zero() {
                *s = T::one();
            }
        }
        Ok(Self { means, scales })
    }

    pub fn apply(&self, ts: &TrainingSet<T>) -> Result<TrainingSet<T>> {
        if ts.dim() != self.means.len() && !ts.is_empty() {
            return Err(Error::DimensionMismatch { expected: self.means.len(), found: ts.dim() });
        }
        let inputs = ts
            .inputs()
            .iter()
            .map(|x| x.iter().zip(&self.means).zip(&self.scales).map(|((&v, &m), &s)| (v - m) / s).collect())
            .collect();
        Ok(TrainingSet { inputs, targets: ts.targets().to_vec(), provenance: ts.provenance.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_examples() {
        let ts: TrainingSet<f64> = parse_csv("1,2,3\n4,5,6", false, TargetColumn::Last).unwrap();
        assert_eq!(ts.inputs(), &[vec![1.0, 2.0], vec![4.0, 5.0]]);
        assert_eq!(ts.targets(), &[3.0, 6.0]);

        assert!(matches!(parse_csv::<f64>("", false, TargetColumn::Last), Err(Error::EmptyInput(_))));
        assert!(matches!(parse_csv::<f64>("a,b,y\n", true, TargetColumn::Last), Err(Error::EmptyInput(_))));

        match parse_csv::<f64>("1,2,3\n4,5\n", false, TargetColumn::Last) {
            Err(Error::RaggedRow { row: 2, expected: 3, found: 2 }) => {}
            other => panic!("{other:?}"),
        }
        match parse_csv::<f64>("x,y\n1,2\n3,abc\n", true, TargetColumn::Last) {
            Err(Error::Csv { row: 3, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_header_and_target_index() {
        let ts: TrainingSet<f64> = parse_csv("y,a,b\n1,2,3\n4,5,6\n", true, TargetColumn::Index(0)).unwrap();
        assert_eq!(ts.targets(), &[1.0, 4.0]);
        assert_eq!(ts.inputs()[1], vec![5.0, 6.0]);
    }

    #[test]
    fn friedman_closed_form() {
        let y = friedman_response(&[0.5; 10]);
        assert!((y - 14.571_067_811_865_476).abs() < 1e-12);
        let x = [0.0, 0.0, 0.0, 0.3, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!((friedman_response(&x) - (5.0 + 3.0 + 3.0)).abs() < 1e-12);

        let ts: TrainingSet<f64> = friedman_synthetic(50, 0.0, 3).unwrap();
        assert_eq!(ts.dim(), 10);
        for (x, &y) in ts.inputs().iter().zip(ts.targets()) {
            assert_eq!(y, friedman_response(x));
            assert!(x.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
    }

    #[test]
    fn friedman_is_seeded() {
        let a: TrainingSet<f64> = friedman_synthetic(30, 1.0, 11).unwrap();
        let b: TrainingSet<f64> = friedman_synthetic(30, 1.0, 11).unwrap();
        let c: TrainingSet<f64> = friedman_synthetic(30, 1.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.targets(), c.targets());
    }

    #[test]
    fn normal_deviates_have_unit_variance() {
        let mut rng = rng_from_seed(5);
        let xs: Vec<f64> = (0..100_000).map(|_| standard_normal(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.02 && (var - 1.0).abs() < 0.02, "{mean} {var}");
    }

    #[test]
    fn split_sizes() {
        assert_eq!(SplitPlan::equal_parts(100, 4, 1).unwrap().sizes(), vec![25; 4]);
        assert_eq!(SplitPlan::fractions(10, &[0.7, 0.3], 1).unwrap().sizes(), vec![7, 3]);
        let s = SplitPlan::equal_parts(103, 4, 1).unwrap().sizes();
        assert_eq!(s.iter().sum::<usize>(), 103);
        assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        assert!(SplitPlan::fractions(10, &[0.5, 0.2], 1).is_err());
    }

    #[test]
    fn kfold_examples() {
        let loo = kfold_indices(5, 5, 0).unwrap();
        assert!(loo.iter().all(|(tr, va)| tr.len() == 4 && va.len() == 1));
        let two = kfold_indices(4, 2, 0).unwrap();
        assert!(two.iter().all(|(tr, va)| tr.len() == 2 && va.len() == 2));
        assert_eq!(kfold_indices(40, 10, 9).unwrap(), kfold_indices(40, 10, 9).unwrap());
        assert!(kfold_indices(3, 4, 0).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(scaled_rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((scaled_rmse(&[1.0f64, 2.0], &[1.0, 1.0]).unwrap() - 0.353_553_390_593_273_8).abs() < 1e-15);
        assert!(matches!(scaled_rmse(&[-1.0, -2.0], &[0.0, 0.0]), Err(Error::NonPositiveMaxTarget { .. })));
        assert!(scaled_rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn standardizer_uses_training_statistics() {
        let train = TrainingSet::new(vec![vec![0.0, 5.0], vec![2.0, 5.0]], vec![1.0, 2.0]).unwrap();
        let s = Standardizer::fit(&train).unwrap();
        let out = s.apply(&train).unwrap();
        assert_eq!(out.inputs(), &[vec![-1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(out.targets(), train.targets());
    }

    #[test]
    fn without_removes_one_record() {
        let ts = TrainingSet::new(vec![vec![1.0], vec![2.0], vec![3.0]], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ts.without(1).targets(), &[1.0, 3.0]);
    }
}
