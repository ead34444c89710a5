//! Proximal pursuit solvers and learnable fixed-depth encoders for sparse,
//! structured-sparse, robust PCA and robust NMF models.

pub mod datagen;
pub mod encoder;
pub mod error;
pub mod prox;
pub mod pursuit;
pub mod tensor;
pub mod training;
pub mod transform;

pub use error::{Error, Result};
