//! Kernel regression with an m-power RKHS penalty.
//!
//! The m-power learner minimizes `(1/n)Σ(yᵢ - f(xᵢ))² + λ‖f‖ᵐ_H`. It is
//! solved exactly from one eigendecomposition of the Gram matrix and a scalar
//! root search, and on any fixed training set it coincides with kernel ridge
//! regression at a data-dependent λ₂ (see [`equivalence`]).
//!
//! Everything is generic over [`Scalar`] (`f64` or `f32`); the aliases below
//! fix `f64`.

pub mod data;
pub mod equivalence;
pub mod error;
pub mod experiments;
pub mod hamming;
pub mod kernel;
pub mod linalg;
pub mod scalar;
pub mod solvers;
pub mod stability;

pub use data::{friedman_synthetic, kfold, load_csv, load_csv_auto, load_inputs, scaled_rmse, split, SplitPlan, TargetColumn, TrainingSet};
pub use equivalence::{phi_map, verify_weak_equivalence, PhiMap};
pub use error::{Error, Result};
pub use hamming::{h_metric, training_set_distance};
pub use kernel::{Bandwidth, KernelConfig, KernelFamily};
pub use scalar::Scalar;
pub use solvers::{krr_fit, modified_krr_fit, mrlsr_fit, Algorithm, FittedModel, Learner};
pub use stability::{empirical_stability, theoretical_beta, StabilityBoundInputs, StabilityReport};

pub type Dataset = TrainingSet<f64>;
pub type Model = FittedModel<f64>;
pub type Kernel = KernelConfig<f64>;
pub type Regressor = Learner<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type Spectrum = kernel::GramSpectrum<f64>;
pub type Protocol = experiments::CvProtocol<f64>;
