//! RBF-kernel support vector machine.
//!
//! Binary models are trained with a simplified SMO solver ([`train_smo`]);
//! [`PairwiseModel`] combines several binary models by one-vs-one voting.

mod io;
mod pairwise;
mod smo;

use thiserror::Error;

pub use io::{load_model, save_model, ModelFileError, TrainedClassifier, FORMAT_VERSION};
pub use pairwise::{
    tally_votes, train_pairwise, LabeledFeatures, PairDecision, PairMode, PairSelection,
    PairwiseModel, Prediction,
};
pub use smo::{dual_objective, solve_smo, train_smo, SmoSolution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvmError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate training set: both labels +1 and -1 are required")]
    DegenerateTrainingSet,
    #[error("invalid label {0}: labels must be -1 or +1")]
    InvalidLabel(i8),
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),
    #[error("SMO did not converge within {0} sweeps")]
    NotConverged(usize),
    #[error("pairwise training needs at least 2 classes, found {0}")]
    TooFewClasses(usize),
    #[error("class {0:?} has no samples")]
    UnknownClass(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, SvmError>;

/// `exp(-gamma * ||x - y||^2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(rbf_unchecked(x, y, gamma))
}

#[inline]
pub(crate) fn rbf_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * dist2).exp()
}

/// Solver and kernel settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub gamma: f64,
    pub c: f64,
    /// Allowed KKT violation at termination.
    pub kkt_tol: f64,
    /// Consecutive sweeps without an update before the solver stops.
    pub max_passes: usize,
}

impl KernelParams {
    pub const DEFAULT_C: f64 = 10.0;
    pub const DEFAULT_KKT_TOL: f64 = 1e-3;
    pub const DEFAULT_MAX_PASSES: usize = 50;

    pub fn new(gamma: f64, c: f64) -> Result<Self> {
        let p = Self {
            gamma,
            c,
            kkt_tol: Self::DEFAULT_KKT_TOL,
            max_passes: Self::DEFAULT_MAX_PASSES,
        };
        p.validate()?;
        Ok(p)
    }

    /// `gamma = 1/dim`, `C = 10`.
    pub fn for_dim(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(SvmError::InvalidParams("feature dimension is 0".into()));
        }
        Self::new(1.0 / dim as f64, Self::DEFAULT_C)
    }

    /// `gamma = 1 / (dim * var)` where `var` is the variance of every
    /// coordinate of every row pooled together. Falls back to `1/dim` when the
    /// rows carry no spread.
    pub fn scaled_gamma<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<f64> {
        let mut dim = None;
        let (mut count, mut sum, mut sum_sq) = (0usize, 0.0f64, 0.0f64);
        for row in rows {
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(SvmError::DimensionMismatch {
                        expected: d,
                        found: row.len(),
                    })
                }
                Some(_) => {}
            }
            for &v in row {
                count += 1;
                sum += v;
                sum_sq += v * v;
            }
        }
        let dim = match dim {
            Some(d) if d > 0 => d as f64,
            _ => {
                return Err(SvmError::InvalidParams(
                    "no feature rows to scale gamma".into(),
                ))
            }
        };
        let mean = sum / count as f64;
        let var = (sum_sq / count as f64 - mean * mean).max(0.0);
        let gamma = if var > 0.0 && var.is_finite() {
            1.0 / (dim * var)
        } else {
            1.0 / dim
        };
        Ok(gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.gamma) {
            return Err(SvmError::InvalidParams(format!(
                "gamma = {} must be > 0",
                self.gamma
            )));
        }
        if !positive(self.c) {
            return Err(SvmError::InvalidParams(format!(
                "C = {} must be > 0",
                self.c
            )));
        }
        if !positive(self.kkt_tol) {
            return Err(SvmError::InvalidParams(format!(
                "kkt_tol = {} must be > 0",
                self.kkt_tol
            )));
        }
        if self.max_passes == 0 {
            return Err(SvmError::InvalidParams("max_passes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Binary training data with labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    x: Vec<Vec<f64>>,
    y: Vec<i8>,
}

impl TrainingSet {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<i8>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(SvmError::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|&&l| l != 1 && l != -1) {
            return Err(SvmError::InvalidLabel(bad));
        }
        if let Some(first) = x.first() {
            let d = first.len();
            if let Some(row) = x.iter().find(|r| r.len() != d) {
                return Err(SvmError::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[i8] {
        &self.y
    }
}

/// Trained binary RBF machine. Only samples with `alpha > 0` are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    support_x: Vec<Vec<f64>>,
    support_y: Vec<i8>,
    alpha: Vec<f64>,
    bias: f64,
    gamma: f64,
    c: f64,
    dim: usize,
    pos_class: String,
    neg_class: String,
}

impl SvmModel {
    /// Tolerance on `sum(alpha_i * y_i) == 0`.
    pub const EQUALITY_TOL: f64 = 1e-6;

    /// Builds a model from stored parts, checking every model invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        support_x: Vec<Vec<f64>>,
        support_y: Vec<i8>,
        alpha: Vec<f64>,
        bias: f64,
        gamma: f64,
        c: f64,
        pos_class: impl Into<String>,
        neg_class: impl Into<String>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(SvmError::InvalidModel(msg));
        let (pos_class, neg_class) = (pos_class.into(), neg_class.into());
        if support_x.is_empty() {
            return bad("no support vectors".into());
        }
        if support_x.len() != support_y.len() || support_x.len() != alpha.len() {
            return bad(format!(
                "{} support vectors, {} labels, {} multipliers",
                support_x.len(),
                support_y.len(),
                alpha.len()
            ));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return bad(format!("gamma = {gamma} must be finite and > 0"));
        }
        if !(c.is_finite() && c > 0.0) {
            return bad(format!("C = {c} must be finite and > 0"));
        }
        if !bias.is_finite() {
            return bad("bias is not finite".into());
        }
        if pos_class.is_empty() || neg_class.is_empty() || pos_class == neg_class {
            return bad(format!(
                "class names {pos_class:?} / {neg_class:?} must be distinct and non-empty"
            ));
        }
        let dim = support_x[0].len();
        for (i, sv) in support_x.iter().enumerate() {
            if sv.len() != dim {
                return bad(format!(
                    "support vector {i} has dimension {}, expected {dim}",
                    sv.len()
                ));
            }
            if sv.iter().any(|v| !v.is_finite()) {
                return bad(format!("support vector {i} has a non-finite coordinate"));
            }
        }
        for (i, (&a, &y)) in alpha.iter().zip(&support_y).enumerate() {
            if y != 1 && y != -1 {
                return bad(format!("support label {i} is {y}, expected -1 or +1"));
            }
            if !(a.is_finite() && a > 0.0 && a <= c) {
                return bad(format!("alpha {i} = {a} outside (0, C = {c}]"));
            }
        }
        let balance: f64 = alpha
            .iter()
            .zip(&support_y)
            .map(|(a, &y)| a * f64::from(y))
            .sum();
        if balance.abs() > Self::EQUALITY_TOL {
            return bad(format!("sum(alpha * y) = {balance:e} is not 0"));
        }
        Ok(Self {
            support_x,
            support_y,
            alpha,
            bias,
            gamma,
            c,
            dim,
            pos_class,
            neg_class,
        })
    }

    pub fn with_classes(mut self, pos: impl Into<String>, neg: impl Into<String>) -> Self {
        self.pos_class = pos.into();
        self.neg_class = neg.into();
        self
    }

    /// `sum_i alpha_i y_i K(s_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let sum: f64 = self
            .support_x
            .iter()
            .zip(&self.support_y)
            .zip(&self.alpha)
            .map(|((sv, &y), &a)| a * f64::from(y) * rbf_unchecked(sv, x, self.gamma))
            .sum();
        Ok(sum + self.bias)
    }

    /// Positive class when `decision(x) >= 0`.
    pub fn predict_pair(&self, x: &[f64]) -> Result<&str> {
        Ok(self.class_for(self.decision(x)?))
    }

    pub fn class_for(&self, decision: f64) -> &str {
        if decision >= 0.0 {
            &self.pos_class
        } else {
            &self.neg_class
        }
    }

    pub fn support_x(&self) -> &[Vec<f64>] {
        &self.support_x
    }

    pub fn support_y(&self) -> &[i8] {
        &self.support_y
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pos_class(&self) -> &str {
        &self.pos_class
    }

    pub fn neg_class(&self) -> &str {
        &self.neg_class
    }

    pub fn n_support(&self) -> usize {
        self.alpha.len()
    }
}
