//! Direct Gaussian copula models for discrete outcomes.

pub mod correlation;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod likelihood;
pub mod linalg;
pub mod marginals;
pub mod model;
pub mod mvn;
pub mod parallel;
pub mod rng;
pub mod scalar;
pub mod special;
mod text;

pub use correlation::{CorrelationModel, LowerFactor};
pub use diagnostics::KappaResult;
pub use error::{Error, Result};
pub use fit::{FitResult, ObjectiveKind};
pub use likelihood::{ExactLoglik, JitterMatrix};
pub use linalg::Matrix;
pub use marginals::{CdfTable, Marginal};
pub use model::{CopulaModel, Dataset, ParamVector, Scale, Simulator};
pub use mvn::{RectangleOptions, RectangleProbResult};
pub use rng::{Purpose, StreamKey};
pub use scalar::Scalar;

pub type Marginal64 = Marginal<f64>;
pub type Marginal32 = Marginal<f32>;
pub type Correlation64 = CorrelationModel<f64>;
pub type Correlation32 = CorrelationModel<f32>;
pub type Jitters64 = JitterMatrix<f64>;
pub type Jitters32 = JitterMatrix<f32>;
