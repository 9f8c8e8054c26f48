//! Dataset ingestion, synthetic data generation, feature persistence, and
//! run configuration.

mod config;
mod features_io;
mod manifest;
mod prepared_io;
mod synthetic;

pub use config::{classifier_label, EmbeddingFile, RunConfig};
pub use features_io::{load_features, save_features};
pub use manifest::{
    load_manifest, load_manifest_with, parse_label, ColumnMap, Manifest, ManifestRow,
    LABEL_NAMES,
};
pub use prepared_io::{load_prepared, save_prepared};
pub use synthetic::{generate_synthetic, SyntheticOutput, CLASS_TOKENS};
