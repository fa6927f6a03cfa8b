//! Experiment drivers: prediction accuracy under double cross-validation,
//! the split-wise equivalence check, and learning curves over training-set
//! size. Every random choice derives from one master seed, and nothing here
//! depends on thread scheduling, so equal seeds give byte-equal output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, kfold_indices, rng_from_seed, scaled_rmse, split, SplitPlan, TrainingSet};
use crate::equivalence::{phi_from_spectrum_any, strong_equivalence_experiment, EquivalenceReport};
use crate::error::{Error, Result};
use crate::kernel::{build_gram, cross_gram, eigendecompose_projected, GramSpectrum, KernelConfig};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::solvers::{Algorithm, Learner};

const STREAM_RESPLIT: u64 = 1;
const STREAM_FOLDS: u64 = 2;
const STREAM_SUBSAMPLE: u64 = 3;
const STREAM_QUARTERS: u64 = 4;

/// `count` values spaced evenly in log10 between `10^lo` and `10^hi`.
pub fn log_grid<T: Scalar>(lo: f64, hi: f64, count: usize) -> Vec<T> {
    match count {
        0 => Vec::new(),
        1 => vec![T::from_f64_lossy(10f64.powf(lo))],
        _ => (0..count)
            .map(|i| T::from_f64_lossy(10f64.powf(lo + (hi - lo) * i as f64 / (count - 1) as f64)))
            .collect(),
    }
}

/// Grids and fold counts for the double cross-validation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvProtocol<T> {
    pub m_grid: Vec<T>,
    pub lambda_grid_mrlsr: Vec<T>,
    pub lambda_grid_krr: Vec<T>,
    pub folds: usize,
    /// Random train/test resplits.
    pub runs: usize,
    pub train_fraction: f64,
    /// λ held fixed while `m` is selected.
    pub selection_lambda: T,
}

impl<T: Scalar> Default for CvProtocol<T> {
    fn default() -> Self {
        Self {
            m_grid: (1..=29).map(|k| T::from_f64_lossy(k as f64 / 10.0)).collect(),
            lambda_grid_mrlsr: log_grid(-5.0, 2.0, 7),
            lambda_grid_krr: log_grid(-7.0, 3.0, 25),
            folds: 10,
            runs: 10,
            train_fraction: 0.7,
            selection_lambda: T::one(),
        }
    }
}

fn strictly_increasing<T: Scalar>(name: &str, grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} is empty")));
    }
    if grid.iter().any(|&v| !(v > T::zero() && v.is_finite())) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(format!("{name} must be positive and strictly increasing")));
    }
    Ok(())
}

impl<T: Scalar> CvProtocol<T> {
    pub fn validate(&self) -> Result<()> {
        strictly_increasing("m grid", &self.m_grid)?;
        strictly_increasing("M-RLSR lambda grid", &self.lambda_grid_mrlsr)?;
        strictly_increasing("KRR lambda grid", &self.lambda_grid_krr)?;
        if self.folds < 2 || self.runs == 0 {
            return Err(Error::InvalidParameter("need at least two folds and one run".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!("train fraction {} outside (0, 1)", self.train_fraction)));
        }
        if !(self.selection_lambda > T::zero() && self.selection_lambda.is_finite()) {
            return Err(Error::InvalidParameter("selection lambda must be positive".into()));
        }
        Ok(())
    }

    /// The M-RLSR λ grid with the selection λ merged in, ascending, and the
    /// index of the selection λ.
    fn mrlsr_lambdas(&self) -> (Vec<T>, usize) {
        let mut all = self.lambda_grid_mrlsr.clone();
        if !all.contains(&self.selection_lambda) {
            all.push(self.selection_lambda);
            all.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        }
        let at = all.iter().position(|&l| l == self.selection_lambda).expect("merged above");
        (all, at)
    }
}

/// One output record. Serialized as one JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub algo: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    /// Share of the training split, for learning curves.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fraction: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub series: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub dataset: String,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
    pub curves: Vec<CurvePoint>,
}

impl ExperimentResult {
    pub fn rows_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.rows)?;
        s.push('\n');
        Ok(s)
    }

    pub fn curves_csv(&self) -> String {
        let mut s = String::from("x,y,series\n");
        for p in &self.curves {
            let _ = writeln!(s, "{},{},{}", p.x, p.y, p.series);
        }
        s
    }

    /// Writes `<experiment>.json` and `<experiment>_curves.csv` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{}.json", self.experiment));
        let csv = dir.join(format!("{}_curves.csv", self.experiment));
        std::fs::write(&json, self.rows_json()?)?;
        std::fs::write(&csv, self.curves_csv())?;
        Ok((json, csv))
    }
}

/// A grid point whose fit failed numerically; it is left out of selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub run: usize,
    pub fold: Option<usize>,
    pub algorithm: Algorithm,
    pub m: f64,
    pub lambda: f64,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd<T> {
    pub mean: T,
    /// Population standard deviation.
    pub std: T,
}

pub fn mean_std<T: Scalar>(values: &[T]) -> Option<MeanStd<T>> {
    if values.is_empty() {
        return None;
    }
    let n = T::from_usize(values.len()).unwrap_or_else(T::max_value);
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    Some(MeanStd { mean, std: var.sqrt() })
}

/// A training split decomposed once, with the held-out rows projected onto
/// its eigenbasis so that each learner costs one spectral solve and one
/// matrix-vector product.
struct Holdout<T> {
    spectrum: GramSpectrum<T>,
    /// `K(held, train) · Q`.
    projector: Matrix<T>,
    targets: Vec<T>,
}

impl<T: Scalar> Holdout<T> {
    fn new(cfg: &KernelConfig<T>, train: &TrainingSet<T>, held: &TrainingSet<T>) -> Result<Self> {
        let k = build_gram(cfg, train.inputs())?;
        let cross = cross_gram(cfg, held.inputs(), train.inputs())?;
        let (spectrum, proj) = eigendecompose_projected(&k, train.targets(), &cross)?;
        Ok(Self { spectrum, projector: proj.transpose(), targets: held.targets().to_vec() })
    }

    fn predict(&self, learner: &Learner<T>) -> Result<Vec<T>> {
        self.projector.mul_vec(&learner.solve_spectral(&self.spectrum)?.coords)
    }

    fn rmse(&self, learner: &Learner<T>) -> Result<T> {
        let pred = self.predict(learner)?;
        let n = T::from_usize(self.targets.len().max(1)).unwrap_or_else(T::max_value);
        Ok((self.targets.iter().zip(&pred).map(|(&y, &p)| (y - p) * (y - p)).sum::<T>() / n).sqrt())
    }

    fn scaled_rmse(&self, learner: &Learner<T>) -> Result<T> {
        scaled_rmse(&self.targets, &self.predict(learner)?)
    }
}

/// Numeric failures become `None` (and are logged); anything else propagates.
fn tolerate<T>(r: Result<T>, log: impl FnOnce(String)) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_numeric() => {
            log(e.to_string());
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn learner_for<T: Scalar>(algorithm: Algorithm, lambda: T, m: T) -> Learner<T> {
    Learner { algorithm, lambda, m }
}

/// Mean validation RMSE over `folds` folds for every learner in `learners`;
/// `None` where any fold failed.
fn cv_errors<T: Scalar>(
    z: &TrainingSet<T>,
    cfg: &KernelConfig<T>,
    folds: usize,
    seed: u64,
    learners: &[Learner<T>],
    run: usize,
    failures: &mut Vec<FitFailure>,
) -> Result<Vec<Option<T>>> {
    let mut sums: Vec<Option<T>> = vec![Some(T::zero()); learners.len()];
    let k = folds.min(z.len());
    let plan = kfold_indices(z.len(), k, seed)?;
    for (fold, (tr, va)) in plan.iter().enumerate() {
        let holdout = Holdout::new(cfg, &z.subset(tr), &z.subset(va))?;
        for (slot, learner) in sums.iter_mut().zip(learners) {
            if slot.is_none() {
                continue;
            }
            let err = tolerate(holdout.rmse(learner), |message| {
                failures.push(failure(run, Some(fold), learner, message));
            })?;
            *slot = match err {
                Some(e) => slot.map(|s| s + e),
                None => None,
            };
        }
    }
    let kt = T::from_usize(k).unwrap_or_else(T::max_value);
    Ok(sums.into_iter().map(|s| s.map(|v| v / kt)).collect())
}

fn failure<T: Scalar>(run: usize, fold: Option<usize>, learner: &Learner<T>, message: String) -> FitFailure {
    FitFailure {
        run,
        fold,
        algorithm: learner.algorithm,
        m: learner.m.to_f64_lossless(),
        lambda: learner.lambda.to_f64_lossless(),
        message,
    }
}

/// Index of the smallest defined error; ties go to the later index, so with
/// an ascending λ grid the larger λ wins.
fn argmin_prefer_last<T: Scalar>(errors: &[Option<T>]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, e) in errors.iter().enumerate() {
        if let Some(e) = *e {
            if best.map_or(true, |(_, b)| e <= b) {
                best = Some((i, e));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Index of the smallest defined error; ties go to the earlier index.
fn argmin_prefer_first<T: Scalar>(errors: &[Option<T>]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, e) in errors.iter().enumerate() {
        if let Some(e) = *e {
            if best.map_or(true, |(_, b)| e < b) {
                best = Some((i, e));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Cross-validated choice of λ for one learner family on `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection<T> {
    pub lambda: T,
    /// `(λ, mean validation RMSE)`, `None` where a fold failed.
    pub curve: Vec<(T, Option<T>)>,
}

/// `folds`-fold cross-validation of `algorithm` at exponent `m` over `grid`;
/// ties go to the larger λ.
#[allow(clippy::too_many_arguments)]
pub fn select_lambda<T: Scalar>(
    algorithm: Algorithm,
    m: T,
    grid: &[T],
    z: &TrainingSet<T>,
    cfg: &KernelConfig<T>,
    folds: usize,
    seed: u64,
    failures: &mut Vec<FitFailure>,
) -> Result<LambdaSelection<T>> {
    strictly_increasing("lambda grid", grid)?;
    if z.len() < 2 {
        return Err(Error::TooFewRows { needed: 2, found: z.len() });
    }
    let cfg = cfg.resolve(z.inputs())?;
    let learners: Vec<_> = grid.iter().map(|&l| learner_for(algorithm, l, m)).collect();
    let errors = cv_errors(z, &cfg, folds.max(2), seed, &learners, 0, failures)?;
    let best = argmin_prefer_last(&errors).ok_or(Error::NoRootFound { m: m.to_f64_lossless() })?;
    Ok(LambdaSelection { lambda: grid[best], curve: grid.iter().copied().zip(errors).collect() })
}

fn dataset_name<T>(z: &TrainingSet<T>) -> String {
    if z.provenance.source.is_empty() {
        "dataset".to_string()
    } else {
        z.provenance.source.clone()
    }
}

fn resplit<T: Scalar>(z: &TrainingSet<T>, train_fraction: f64, seed: u64) -> Result<(TrainingSet<T>, TrainingSet<T>)> {
    let plan = SplitPlan::fractions(z.len(), &[train_fraction, 1.0 - train_fraction], seed)?;
    let mut parts = split(z, &plan)?.into_iter();
    let train = parts.next().expect("two parts");
    let test = parts.next().expect("two parts");
    if train.len() < 2 || test.is_empty() {
        return Err(Error::TooFewRows { needed: 3, found: z.len() });
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRun<T> {
    pub run: usize,
    pub seed: u64,
    pub mrlsr_lambda: T,
    pub mrlsr_rmse: T,
    pub krr_lambda: T,
    pub krr_rmse: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport<T> {
    pub dataset: String,
    pub seed: u64,
    pub selected_m: T,
    /// `(m, mean over runs of the validation RMSE at the selection λ)`.
    pub m_selection: Vec<(T, Option<T>)>,
    pub runs: Vec<AccuracyRun<T>>,
    pub mrlsr: MeanStd<T>,
    pub krr: MeanStd<T>,
    pub failures: Vec<FitFailure>,
}

struct RunTables<T> {
    seed: u64,
    /// Validation RMSE, `[m][λ]`.
    cv_mrlsr: Vec<Vec<Option<T>>>,
    cv_krr: Vec<Option<T>>,
    /// Scaled test RMSE, same layout.
    test_mrlsr: Vec<Vec<Option<T>>>,
    test_krr: Vec<Option<T>>,
}

/// Double cross-validation: `m` is chosen at the selection λ by the mean over
/// runs of the cross-validated error, then λ is chosen per run for that `m`
/// (and for KRR over its own grid). Reports scaled test RMSE over the runs.
///
/// Each run evaluates the whole `(m, λ)` grid on its test split up front and
/// reads off the selected cell afterwards; selection itself only ever looks
/// at validation errors.
pub fn run_accuracy_experiment<T: Scalar>(
    dataset: &TrainingSet<T>,
    protocol: &CvProtocol<T>,
    seed: u64,
    cfg: &KernelConfig<T>,
) -> Result<AccuracyReport<T>> {
    protocol.validate()?;
    let (lambdas, sel) = protocol.mrlsr_lambdas();
    let mut failures = Vec::new();
    let mut tables = Vec::with_capacity(protocol.runs);

    for run in 0..protocol.runs {
        let run_seed = derive_seed(seed, STREAM_RESPLIT, run as u64);
        let (train, test) = resplit(dataset, protocol.train_fraction, run_seed)?;
        let run_cfg = cfg.resolve(train.inputs())?;

        let mrlsr: Vec<Learner<T>> = protocol
            .m_grid
            .iter()
            .flat_map(|&m| lambdas.iter().map(move |&l| Learner::mrlsr(l, m)))
            .collect();
        let krr: Vec<Learner<T>> = protocol.lambda_grid_krr.iter().map(|&l| Learner::krr(l)).collect();
        let all: Vec<Learner<T>> = mrlsr.iter().chain(&krr).copied().collect();

        let folds_seed = derive_seed(seed, STREAM_FOLDS, run as u64);
        let cv = cv_errors(&train, &run_cfg, protocol.folds, folds_seed, &all, run, &mut failures)?;

        let holdout = Holdout::new(&run_cfg, &train, &test)?;
        let mut test_errors = Vec::with_capacity(all.len());
        for learner in &all {
            let r = holdout.scaled_rmse(learner);
            test_errors.push(tolerate(r, |message| failures.push(failure(run, None, learner, message)))?);
        }

        let width = lambdas.len();
        let n_m = mrlsr.len();
        tables.push(RunTables {
            seed: run_seed,
            cv_mrlsr: cv[..n_m].chunks(width).map(<[_]>::to_vec).collect(),
            cv_krr: cv[n_m..].to_vec(),
            test_mrlsr: test_errors[..n_m].chunks(width).map(<[_]>::to_vec).collect(),
            test_krr: test_errors[n_m..].to_vec(),
        });
    }

    let runs_t = T::from_usize(tables.len()).unwrap_or_else(T::max_value);
    let m_means: Vec<Option<T>> = (0..protocol.m_grid.len())
        .map(|mi| tables.iter().map(|t| t.cv_mrlsr[mi][sel]).sum::<Option<T>>().map(|s| s / runs_t))
        .collect();
    let mi = argmin_prefer_first(&m_means).ok_or(Error::NoRootFound { m: f64::NAN })?;
    let selected_m = protocol.m_grid[mi];

    // Restrict the λ search to the published grid; the selection λ only
    // participates in choosing m.
    let grid_idx: Vec<usize> = protocol
        .lambda_grid_mrlsr
        .iter()
        .map(|l| lambdas.iter().position(|x| x == l).expect("grid is a subset"))
        .collect();

    let mut runs = Vec::with_capacity(tables.len());
    for (run, t) in tables.iter().enumerate() {
        let cv_row: Vec<Option<T>> = grid_idx.iter().map(|&j| t.cv_mrlsr[mi][j]).collect();
        let lj = grid_idx[argmin_prefer_last(&cv_row).ok_or(Error::NoRootFound { m: selected_m.to_f64_lossless() })?];
        let kj = argmin_prefer_last(&t.cv_krr).ok_or(Error::NoRootFound { m: 2.0 })?;
        let mrlsr_rmse = t.test_mrlsr[mi][lj].ok_or(Error::NoRootFound { m: selected_m.to_f64_lossless() })?;
        let krr_rmse = t.test_krr[kj].ok_or(Error::NoRootFound { m: 2.0 })?;
        runs.push(AccuracyRun {
            run,
            seed: t.seed,
            mrlsr_lambda: lambdas[lj],
            mrlsr_rmse,
            krr_lambda: protocol.lambda_grid_krr[kj],
            krr_rmse,
        });
    }

    let mrlsr = mean_std(&runs.iter().map(|r| r.mrlsr_rmse).collect::<Vec<_>>()).expect("at least one run");
    let krr = mean_std(&runs.iter().map(|r| r.krr_rmse).collect::<Vec<_>>()).expect("at least one run");
    Ok(AccuracyReport {
        dataset: dataset_name(dataset),
        seed,
        selected_m,
        m_selection: protocol.m_grid.iter().copied().zip(m_means).collect(),
        runs,
        mrlsr,
        krr,
        failures,
    })
}

impl<T: Scalar> AccuracyReport<T> {
    pub fn to_result(&self) -> ExperimentResult {
        let f = |v: T| v.to_f64_lossless();
        let m = Some(f(self.selected_m));
        let row = |algo: &str, m: Option<f64>, lambda: Option<f64>, metric: &str, value: f64, seed: u64| ResultRow {
            dataset: self.dataset.clone(),
            algo: algo.to_string(),
            m,
            lambda,
            fraction: None,
            metric: metric.to_string(),
            value,
            seed,
        };
        let mut rows = Vec::new();
        for (mv, err) in &self.m_selection {
            if let Some(e) = err {
                rows.push(row("mrlsr", Some(f(*mv)), None, "cv_rmse_at_selection_lambda", f(*e), self.seed));
            }
        }
        for r in &self.runs {
            rows.push(row("mrlsr", m, Some(f(r.mrlsr_lambda)), "scaled_rmse", f(r.mrlsr_rmse), r.seed));
            rows.push(row("krr", None, Some(f(r.krr_lambda)), "scaled_rmse", f(r.krr_rmse), r.seed));
        }
        rows.push(row("mrlsr", m, None, "scaled_rmse_mean", f(self.mrlsr.mean), self.seed));
        rows.push(row("mrlsr", m, None, "scaled_rmse_std", f(self.mrlsr.std), self.seed));
        rows.push(row("krr", None, None, "scaled_rmse_mean", f(self.krr.mean), self.seed));
        rows.push(row("krr", None, None, "scaled_rmse_std", f(self.krr.std), self.seed));
        let curves = self
            .m_selection
            .iter()
            .filter_map(|(mv, e)| e.map(|e| CurvePoint { x: f(*mv), y: f(e), series: "m_selection".into() }))
            .collect();
        ExperimentResult { experiment: "accuracy".into(), dataset: self.dataset.clone(), seed: self.seed, rows, curves }
    }
}

/// Where the M-RLSR λ of an experiment comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaChoice<T> {
    Fixed(T),
    /// Cross-validated over the protocol's M-RLSR λ grid.
    CrossValidated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceExperiment<T> {
    pub dataset: String,
    pub seed: u64,
    pub lambda_selection: Option<LambdaSelection<T>>,
    pub report: EquivalenceReport<T>,
    pub failures: Vec<FitFailure>,
}

/// Splits `dataset` into four equal parts, picks λ on the first one (given
/// or by cross-validation), maps it to `λ₂ = Φ(λ, Z₁)` and reports the RKHS
/// distance between the two learners on every part.
pub fn run_equivalence_experiment<T: Scalar>(
    dataset: &TrainingSet<T>,
    m: T,
    lambda: LambdaChoice<T>,
    protocol: &CvProtocol<T>,
    seed: u64,
    cfg: &KernelConfig<T>,
) -> Result<EquivalenceExperiment<T>> {
    if dataset.len() < 4 {
        return Err(Error::TooFewRows { needed: 4, found: dataset.len() });
    }
    let plan = SplitPlan::equal_parts(dataset.len(), 4, derive_seed(seed, STREAM_QUARTERS, 0))?;
    let splits = split(dataset, &plan)?;
    let cfg = cfg.resolve(splits[0].inputs())?;
    let mut failures = Vec::new();
    let (lambda, selection) = match lambda {
        LambdaChoice::Fixed(l) => (l, None),
        LambdaChoice::CrossValidated => {
            let fold_seed = derive_seed(seed, STREAM_FOLDS, 0);
            let sel = select_lambda(
                Algorithm::Mrlsr,
                m,
                &protocol.lambda_grid_mrlsr,
                &splits[0],
                &cfg,
                protocol.folds,
                fold_seed,
                &mut failures,
            )?;
            (sel.lambda, Some(sel))
        }
    };
    let report = strong_equivalence_experiment(&splits, lambda, m, &cfg)?;
    Ok(EquivalenceExperiment { dataset: dataset_name(dataset), seed, lambda_selection: selection, report, failures })
}

impl<T: Scalar> EquivalenceExperiment<T> {
    pub fn to_result(&self) -> ExperimentResult {
        let f = |v: T| v.to_f64_lossless();
        let r = &self.report;
        let mut rows = vec![ResultRow {
            dataset: self.dataset.clone(),
            algo: "krr".into(),
            m: Some(f(r.m)),
            lambda: Some(f(r.lambda2)),
            fraction: None,
            metric: "phi_lambda2".into(),
            value: f(r.lambda2),
            seed: self.seed,
        }];
        for s in &r.per_split {
            for (metric, value) in [("diff_norm", s.diff_norm), ("mrlsr_norm", s.mrlsr_norm)] {
                rows.push(ResultRow {
                    dataset: self.dataset.clone(),
                    algo: "mrlsr".into(),
                    m: Some(f(r.m)),
                    lambda: Some(f(r.lambda)),
                    fraction: None,
                    metric: format!("{metric}_z{}", s.split),
                    value: f(value),
                    seed: self.seed,
                });
            }
        }
        let curves = r
            .per_split
            .iter()
            .map(|s| CurvePoint { x: s.split as f64, y: f(s.diff_norm), series: "diff_norm".into() })
            .collect();
        ExperimentResult { experiment: "equivalence".into(), dataset: self.dataset.clone(), seed: self.seed, rows, curves }
    }
}

/// Learning-curve settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSettings<T> {
    pub m: T,
    pub lambda: LambdaChoice<T>,
    /// Shares of the training split, each in `(0, 1]`.
    pub fractions: Vec<f64>,
    pub runs: usize,
}

impl<T: Scalar> ConvergenceSettings<T> {
    /// Fractions 10% to 100% in steps of 5%.
    pub fn new(m: T, lambda: LambdaChoice<T>) -> Self {
        Self { m, lambda, fractions: (2..=20).map(|k| k as f64 / 20.0).collect(), runs: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint<T> {
    pub fraction: f64,
    pub n: usize,
    pub mrlsr: Option<MeanStd<T>>,
    pub krr: Option<MeanStd<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport<T> {
    pub dataset: String,
    pub seed: u64,
    pub m: T,
    /// M-RLSR λ per run.
    pub lambda: Vec<T>,
    /// Cross-validation curves per run, when λ was cross-validated.
    pub lambda_selection: Vec<LambdaSelection<T>>,
    /// `λ₂ = Φ(λ, Z_train)` per run.
    pub lambda2: Vec<T>,
    pub points: Vec<ConvergencePoint<T>>,
    pub failures: Vec<FitFailure>,
}

/// Scaled test RMSE of M-RLSR(λ, m) and of KRR(λ₂) as the training set grows.
/// For each run, `λ₂ = Φ(λ, Z_train)` is computed once on the full training
/// split and then held fixed across fractions, so the two curves coincide at
/// 100% and differ elsewhere by how much Φ depends on the training set. A
/// cross-validated λ is chosen per run on that run's training split.
pub fn run_convergence_experiment<T: Scalar>(
    dataset: &TrainingSet<T>,
    settings: &ConvergenceSettings<T>,
    protocol: &CvProtocol<T>,
    seed: u64,
    cfg: &KernelConfig<T>,
) -> Result<ConvergenceReport<T>> {
    if settings.runs == 0 || settings.fractions.is_empty() {
        return Err(Error::InvalidParameter("need at least one run and one fraction".into()));
    }
    if settings.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidParameter(format!("fractions must lie in (0, 1]: {:?}", settings.fractions)));
    }
    let m = settings.m;
    let mut failures = Vec::new();
    let mut lambda_selection = Vec::new();
    let mut lambdas = Vec::with_capacity(settings.runs);
    let mut lambda2 = Vec::with_capacity(settings.runs);
    let mut mrlsr_vals: Vec<Vec<T>> = vec![Vec::new(); settings.fractions.len()];
    let mut krr_vals: Vec<Vec<T>> = vec![Vec::new(); settings.fractions.len()];
    let mut sizes = vec![0usize; settings.fractions.len()];

    for run in 0..settings.runs {
        let (train, test) = resplit(dataset, protocol.train_fraction, derive_seed(seed, STREAM_RESPLIT, run as u64))?;
        let run_cfg = cfg.resolve(train.inputs())?;
        let lam = match settings.lambda {
            LambdaChoice::Fixed(l) => l,
            LambdaChoice::CrossValidated => {
                let fold_seed = derive_seed(seed, STREAM_FOLDS, run as u64);
                let grid = &protocol.lambda_grid_mrlsr;
                let mut run_failures = Vec::new();
                let sel = select_lambda(Algorithm::Mrlsr, m, grid, &train, &run_cfg, protocol.folds, fold_seed, &mut run_failures)?;
                failures.extend(run_failures.into_iter().map(|f| FitFailure { run, ..f }));
                let l = sel.lambda;
                lambda_selection.push(sel);
                l
            }
        };
        lambdas.push(lam);
        let full = Holdout::new(&run_cfg, &train, &test)?;
        let phi = phi_from_spectrum_any(&full.spectrum, lam, m)?;
        lambda2.push(phi.lambda2);
        let mut full = Some(full);

        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng_from_seed(derive_seed(seed, STREAM_SUBSAMPLE, run as u64)));
        for (fi, &frac) in settings.fractions.iter().enumerate() {
            let size = ((frac * train.len() as f64).round() as usize).clamp(2.min(train.len()), train.len());
            sizes[fi] = size;
            let holdout = if size == train.len() {
                match full.take() {
                    Some(h) => h,
                    None => Holdout::new(&run_cfg, &train, &test)?,
                }
            } else {
                // Nested subsamples: a prefix of one shuffled order per run.
                let mut rows = order[..size].to_vec();
                rows.sort_unstable();
                Holdout::new(&run_cfg, &train.subset(&rows), &test)?
            };
            let mrlsr = Learner::mrlsr(lam, m);
            let krr = Learner::krr(phi.lambda2);
            if let Some(v) = tolerate(holdout.scaled_rmse(&mrlsr), |msg| failures.push(failure(run, None, &mrlsr, msg)))? {
                mrlsr_vals[fi].push(v);
            }
            if let Some(v) = tolerate(holdout.scaled_rmse(&krr), |msg| failures.push(failure(run, None, &krr, msg)))? {
                krr_vals[fi].push(v);
            }
        }
    }

    let points = settings
        .fractions
        .iter()
        .enumerate()
        .map(|(fi, &fraction)| ConvergencePoint {
            fraction,
            n: sizes[fi],
            mrlsr: mean_std(&mrlsr_vals[fi]),
            krr: mean_std(&krr_vals[fi]),
        })
        .collect();
    Ok(ConvergenceReport {
        dataset: dataset_name(dataset),
        seed,
        m,
        lambda: lambdas,
        lambda_selection,
        lambda2,
        points,
        failures,
    })
}

impl<T: Scalar> ConvergenceReport<T> {
    pub fn to_result(&self) -> ExperimentResult {
        let f = |v: T| v.to_f64_lossless();
        let mut rows = Vec::new();
        let mut curves = Vec::new();
        for (run, (&l, &l2)) in self.lambda.iter().zip(&self.lambda2).enumerate() {
            for (algo, m, metric, value) in [("mrlsr", Some(f(self.m)), "lambda", l), ("krr", None, "phi_lambda2", l2)] {
                rows.push(ResultRow {
                    dataset: self.dataset.clone(),
                    algo: algo.into(),
                    m,
                    lambda: None,
                    fraction: None,
                    metric: format!("{metric}_run{run}"),
                    value: f(value),
                    seed: self.seed,
                });
            }
        }
        for p in &self.points {
            // λ varies by run; the per-run rows above carry it.
            for (algo, m, stats) in [("mrlsr", Some(f(self.m)), p.mrlsr), ("krr", None, p.krr)] {
                let Some(s) = stats else { continue };
                for (metric, value) in [("scaled_rmse_mean", s.mean), ("scaled_rmse_std", s.std)] {
                    rows.push(ResultRow {
                        dataset: self.dataset.clone(),
                        algo: algo.into(),
                        m,
                        lambda: None,
                        fraction: Some(p.fraction),
                        metric: metric.into(),
                        value: f(value),
                        seed: self.seed,
                    });
                }
                curves.push(CurvePoint { x: p.fraction, y: f(s.mean), series: algo.into() });
            }
        }
        ExperimentResult { experiment: "convergence".into(), dataset: self.dataset.clone(), seed: self.seed, rows, curves }
    }

    /// Fraction grid points where M-RLSR's mean is at or below KRR's.
    pub fn mrlsr_not_worse(&self) -> usize {
        self.points
            .iter()
            .filter(|p| matches!((p.mrlsr, p.krr), (Some(a), Some(b)) if a.mean <= b.mean))
            .count()
    }
}
