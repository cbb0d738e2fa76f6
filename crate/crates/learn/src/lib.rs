//! Grasp stability predictors: a small tensor and layer stack with exact gradients,
//! per-modality residual encoders fused late, k-fold training, and the modality ablation
//! driver with its reports.

pub mod ablation;
pub mod gradcheck;
pub mod inputs;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod params_io;
pub mod tensor;
pub mod train;

/// Scalar type of every tensor.
#[cfg(not(feature = "f64"))]
pub type Real = f32;
#[cfg(feature = "f64")]
pub type Real = f64;

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("missing modality: {0}")]
    MissingModality(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged: {0}")]
    DivergenceDetected(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("dataset too small: {0}")]
    TooSmall(String),
    #[error("object {0} appears in both the training and unknown sets")]
    ObjectOverlap(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("bad parameter file: {0}")]
    BadParams(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<LearnError>,
    },
    #[error(transparent)]
    Data(#[from] tactigrasp_core::dataset::DataError),
}

impl LearnError {
    pub fn context(self, context: impl Into<String>) -> Self {
        LearnError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
