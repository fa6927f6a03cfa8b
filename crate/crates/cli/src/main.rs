//! `mrlsr`: fit and apply kernel regressors, and run the equivalence,
//! Hamming, stability and accuracy experiments from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mrlsr_core::experiments::{
    run_accuracy_experiment, run_convergence_experiment, run_equivalence_experiment, ConvergenceSettings, ExperimentResult,
    LambdaChoice,
};
use mrlsr_core::stability::{rescale_targets, stability_series};
use mrlsr_core::{friedman_synthetic, load_csv_auto, load_inputs, training_set_distance};
use mrlsr_core::{Dataset, Kernel, Model, Protocol, Regressor};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] mrlsr_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "mrlsr", version, about = "m-power regularized least squares and kernel ridge regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a CSV training set (last column is the target).
    Fit {
        #[arg(long, value_enum)]
        algo: Algo,
        /// Norm exponent; required for mrlsr.
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        /// Gaussian bandwidth; median heuristic when omitted.
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Predict with a saved model. Writes one `prediction` column.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Strong-equivalence experiment on four equal splits.
    Equivalence {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        m: f64,
        #[arg(long, conflicts_with = "cv", required_unless_present = "cv")]
        lambda: Option<f64>,
        /// Pick λ by cross validation on the first split.
        #[arg(long)]
        cv: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: PathBuf,
    },
    /// Generalized Hamming distance between two training sets.
    Hamming { first: PathBuf, second: PathBuf },
    /// Leave-one-out stability over a series of training set sizes.
    Stability {
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
        n_series: Vec<usize>,
        /// Removal indices sampled per size; every index when omitted.
        #[arg(long)]
        samples: Option<usize>,
        /// Rescale targets onto [-b, b] before fitting.
        #[arg(long)]
        target_bound: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: PathBuf,
    },
    /// Run one of the seeded experiment pipelines.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Norm exponent for the equivalence and convergence experiments.
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Generate this many rows of the Friedman benchmark (noise sd 1).
    #[arg(long)]
    synthetic: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Krr,
    Mrlsr,
    Modkrr,
}

impl Algo {
    fn learner(self, lambda: f64, m: Option<f64>) -> CliResult<Regressor> {
        Ok(match self {
            Algo::Krr => Regressor::krr(lambda),
            Algo::Modkrr => Regressor::modified_krr(lambda),
            Algo::Mrlsr => {
                let m = m.ok_or_else(|| CliError::Usage("--m is required for mrlsr".into()))?;
                Regressor::mrlsr(lambda, m)
            }
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Accuracy,
    Equivalence,
    Convergence,
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load(path: &Path) -> CliResult<Dataset> {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(load_csv_auto::<f64>(path)?.with_provenance(stem, None))
}

#[derive(Serialize)]
struct StabilityRow {
    n: usize,
    lambda: f64,
    m: f64,
    theoretical_beta: Option<f64>,
    empirical_sup: f64,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit { algo, m, lambda, train, model_out, bandwidth } => {
            let learner = algo.learner(lambda, m)?;
            let cfg = bandwidth.map_or_else(Kernel::gaussian_auto, Kernel::gaussian);
            let model = learner.fit(&load(&train)?, &cfg)?;
            model.save(&model_out)?;
            println!("fitted {} on {} rows -> {}", learner.algorithm, model.n(), model_out.display());
        }
        Command::Predict { model, input, out } => {
            let model = Model::load(&model)?;
            let xs = load_inputs::<f64>(&input, model.input_dim())?;
            let mut text = String::from("prediction\n");
            for y in model.predict_many(&xs)? {
                text.push_str(&format!("{y}\n"));
            }
            write_file(&out, &text)?;
        }
        Command::Equivalence { data, m, lambda, cv: _, seed, json } => {
            let choice = lambda.map_or(LambdaChoice::CrossValidated, LambdaChoice::Fixed);
            let exp = run_equivalence_experiment(&load(&data)?, m, choice, &Protocol::default(), seed, &Kernel::gaussian_auto())?;
            write_file(&json, &exp.to_result().rows_json()?)?;
            let r = &exp.report;
            println!("lambda {:e}, m {}, lambda2 {:e}", r.lambda, r.m, r.lambda2);
            for s in &r.per_split {
                println!("split {} (n = {}): |f_mrlsr - f_krr| = {:e}", s.split + 1, s.n, s.diff_norm);
            }
        }
        Command::Hamming { first, second } => {
            println!("{}", training_set_distance(&load(&first)?, &load(&second)?).distance);
        }
        Command::Stability { algo, m, lambda, data, n_series, samples, target_bound, seed, json } => {
            let learner = algo.learner(lambda, Some(m))?;
            let mut z = load(&data)?;
            if let Some(b) = target_bound {
                z = rescale_targets(&z, b);
            }
            let report = stability_series(&learner, &z, &z, &n_series, samples.unwrap_or(usize::MAX), seed, &Kernel::gaussian_auto())?;
            let rows: Vec<StabilityRow> = report
                .per_n
                .iter()
                .map(|p| StabilityRow { n: p.n, lambda, m, theoretical_beta: p.theoretical_beta, empirical_sup: p.empirical_sup })
                .collect();
            let mut text = serde_json::to_string_pretty(&rows).map_err(mrlsr_core::Error::from)?;
            text.push('\n');
            write_file(&json, &text)?;
        }
        Command::Experiment { kind, source, seed, out, m, runs, folds } => {
            let data: Dataset = match (source.data, source.synthetic) {
                (Some(path), _) => load(&path)?,
                (None, Some(n)) => friedman_synthetic(n, 1.0, seed)?.with_provenance("friedman", Some(seed)),
                (None, None) => return Err(CliError::Usage("one of --data or --synthetic is required".into())),
            };
            let mut protocol = Protocol::default();
            protocol.runs = runs.unwrap_or(protocol.runs);
            protocol.folds = folds.unwrap_or(protocol.folds);
            let cfg = Kernel::gaussian_auto();
            let result: ExperimentResult = match kind {
                ExperimentKind::Accuracy => run_accuracy_experiment(&data, &protocol, seed, &cfg)?.to_result(),
                ExperimentKind::Equivalence => {
                    run_equivalence_experiment(&data, m.unwrap_or(1.5), LambdaChoice::CrossValidated, &protocol, seed, &cfg)?
                        .to_result()
                }
                ExperimentKind::Convergence => {
                    let settings = ConvergenceSettings {
                        runs: protocol.runs,
                        ..ConvergenceSettings::new(m.unwrap_or(0.1), LambdaChoice::CrossValidated)
                    };
                    run_convergence_experiment(&data, &settings, &protocol, seed, &cfg)?.to_result()
                }
            };
            let (json, csv) = result.write_to(&out)?;
            println!("wrote {} and {}", json.display(), csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
