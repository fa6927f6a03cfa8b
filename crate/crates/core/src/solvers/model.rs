use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{cross_gram, kernel_eval, KernelConfig};
use crate::scalar::Scalar;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Kernel ridge regression, `(K + nλI)α = Y`.
    Krr,
    /// m-power regularized least squares.
    Mrlsr,
    /// Kernel ridge regression with the regularizer divided by `n`.
    #[serde(rename = "modkrr")]
    ModifiedKrr,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Krr => "krr",
            Algorithm::Mrlsr => "mrlsr",
            Algorithm::ModifiedKrr => "modkrr",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "krr" => Ok(Algorithm::Krr),
            "mrlsr" => Ok(Algorithm::Mrlsr),
            "modkrr" => Ok(Algorithm::ModifiedKrr),
            other => Err(Error::InvalidParameter(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta<T> {
    pub algorithm: Algorithm,
    /// Regularization exponent; 2 for the ridge variants.
    pub m: T,
    pub lambda: T,
    /// Root of the fixed-point function; absent for the ridge variants and
    /// for the zero model returned on zero targets.
    pub c0: Option<T>,
    /// Set when `m ≤ 1` and the root came from the multi-root scan.
    #[serde(default)]
    pub low_exponent_path: bool,
}

/// `f = Σ αᵢ k(·, xᵢ)` over an owned copy of the training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel<T> {
    pub alpha: Vec<T>,
    pub training_inputs: Vec<Vec<T>>,
    pub kernel: KernelConfig<T>,
    pub meta: ModelMeta<T>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile<T> {
    format_version: u32,
    #[serde(flatten)]
    model: FittedModel<T>,
}

impl<T: Scalar> FittedModel<T> {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn input_dim(&self) -> usize {
        self.training_inputs.first().map_or(0, Vec::len)
    }

    /// `Σᵢ αᵢ k(x, xᵢ)`.
    pub fn predict(&self, x: &[T]) -> Result<T> {
        let d = self.input_dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x.len() });
        }
        let mut acc = T::zero();
        for (a, xi) in self.alpha.iter().zip(&self.training_inputs) {
            acc += *a * kernel_eval(&self.kernel, x, xi)?;
        }
        Ok(acc)
    }

    pub fn predict_many(&self, xs: &[Vec<T>]) -> Result<Vec<T>> {
        let k = cross_gram(&self.kernel, xs, &self.training_inputs)?;
        k.mul_vec(&self.alpha)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile { format_version: MODEL_FORMAT_VERSION, model: self.clone() })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_str(s)?;
        if v.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion(v.format_version));
        }
        let file: ModelFile<T> = serde_json::from_str(s)?;
        let model = file.model;
        if model.alpha.len() != model.training_inputs.len() {
            return Err(Error::DimensionMismatch { expected: model.training_inputs.len(), found: model.alpha.len() });
        }
        if !model.kernel.is_resolved() {
            return Err(Error::UnresolvedBandwidth);
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
