//! Knowledge-driven creative video generation, desk scale: a retrieval
//! knowledge base with learned attention scoring, policy-gradient training
//! against a captioning-similarity reward, progressive script generation,
//! motion-prior distillation on a toy rectified-flow latent model, and an
//! evaluation metric suite.

pub mod ackb;
pub mod adam;
pub mod cider;
pub mod config;
pub mod error;
pub mod evalkit;
pub(crate) mod matrixio;
pub mod motion;
pub mod policy;
pub mod scgat;
pub mod script;

pub use error::{Error, Result};
