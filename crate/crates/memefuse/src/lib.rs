//! Multimodal feature extraction for meme sentiment classification.
//!
//! The pipeline pairs three neural extractor architectures (a dual-embedding
//! LSTM model, a bimodal text/image autoencoder, and a gated residual fusion
//! network) with classical classifiers trained on features tapped from the
//! extractors' hidden layers. Everything runs on a small dense-tensor engine
//! with reverse-mode automatic differentiation; no external ML runtime is
//! involved.
//!
//! Module map:
//! - [`tensor`] — dense tensors, the autodiff graph, Adam, checkpoints
//! - [`text`] — tokenization, stemming, vocabulary, pretrained word vectors
//! - [`image`] — PPM decode, bilinear resize, min-max normalization
//! - [`models`] — the three extractor architectures and their training loop
//! - [`classify`] — linear SVC, KNN, CART trees, random forest, boosting
//! - [`eval`] — stratified splits, k-fold CV, macro-F1 reporting
//! - [`data`] — manifests, synthetic data, feature files, run configuration
//! - [`pipeline`] — the staged commands the CLI drives

pub mod classify;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod image;
pub mod models;
pub mod pipeline;
pub mod tensor;
pub mod text;

pub use error::{Error, Result};
