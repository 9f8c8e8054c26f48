//! Run configuration: one TOML file holding every knob of a pipeline run.
//!
//! The file schema lives in private serde structs; `RunConfig` is the
//! validated domain form with paths resolved against the config file's
//! directory. The seed is required: runs must never depend on wall-clock
//! state.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::classify::{ClassifierSpec, Family};
use crate::data::manifest::ColumnMap;
use crate::error::{Error, Result};
use crate::eval::SplitRatios;
use crate::models::{ConvConfig, ModelConfig, TrainConfig};
use crate::text::OovPolicy;

/// One pretrained vector file and its declared width.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub path: PathBuf,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    /// One table for the single-text architectures; the two-branch text
    /// model reads both.
    pub embeddings: Vec<EmbeddingFile>,
    pub columns: ColumnMap,
    pub pad_length: usize,
    /// Square resize target for images.
    pub image_size: usize,
    pub min_count: usize,
    pub oov_policy: OovPolicy,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitRatios,
    pub cv_k: usize,
    pub classifiers: Vec<ClassifierSpec>,
}

impl RunConfig {
    /// Parses and resolves the file; call `validate` before running.
    pub fn load(path: &Path) -> Result<RunConfig> {
        if !path.is_file() {
            return Err(Error::config(format!(
                "config file {} does not exist",
                path.display()
            )));
        }
        let text = fs::read_to_string(path)?;
        let file: FileConfig = toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("")).to_path_buf();
        file.into_run_config(&base)
    }

    /// Checks referenced files exist and every section is self-consistent.
    pub fn validate(&self) -> Result<()> {
        if !self.manifest.is_file() {
            return Err(Error::config(format!(
                "manifest {} does not exist",
                self.manifest.display()
            )));
        }
        for e in &self.embeddings {
            if !e.path.is_file() {
                return Err(Error::config(format!(
                    "embedding file {} does not exist",
                    e.path.display()
                )));
            }
            if e.dim == 0 {
                return Err(Error::config("embedding dim must be positive"));
            }
        }
        if self.embeddings.is_empty() || self.embeddings.len() > 2 {
            return Err(Error::config(format!(
                "expected one or two embedding files; got {}",
                self.embeddings.len()
            )));
        }
        if self.pad_length == 0 || self.image_size == 0 || self.min_count == 0 {
            return Err(Error::config(
                "pad_length, image_size, and min_count must be positive",
            ));
        }
        if self.cv_k < 2 {
            return Err(Error::config("cross-validation needs k >= 2"));
        }
        if self.classifiers.is_empty() {
            return Err(Error::config("at least one classifier must be configured"));
        }
        self.model.validate()?;
        self.train.validate()?;
        self.split.validate()?;
        for spec in &self.classifiers {
            spec.validate()?;
        }
        Ok(())
    }

    /// Replaces every seed in the run (training included) in one step.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: u64,
    paths: PathsSection,
    #[serde(rename = "embeddings")]
    embeddings: Vec<EmbeddingSection>,
    #[serde(default)]
    columns: ColumnsSection,
    #[serde(default)]
    preprocess: PreprocessSection,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    split: SplitSection,
    #[serde(default)]
    cv: CvSection,
    #[serde(default = "default_classifiers", rename = "classifier")]
    classifiers: Vec<ClassifierSection>,
}

fn default_classifiers() -> Vec<ClassifierSection> {
    vec![ClassifierSection { family: "knn".into(), ..ClassifierSection::empty() }]
}

impl FileConfig {
    fn into_run_config(self, base: &Path) -> Result<RunConfig> {
        let classifiers = self
            .classifiers
            .iter()
            .map(ClassifierSection::to_spec)
            .collect::<Result<Vec<_>>>()?;
        Ok(RunConfig {
            seed: self.seed,
            manifest: base.join(self.paths.manifest),
            out_dir: base.join(self.paths.out_dir),
            embeddings: self
                .embeddings
                .into_iter()
                .map(|e| EmbeddingFile { path: base.join(e.path), dim: e.dim })
                .collect(),
            columns: ColumnMap {
                id: self.columns.id,
                image_path: self.columns.image_path,
                text: self.columns.text,
                label: self.columns.label,
            },
            pad_length: self.preprocess.pad_length,
            image_size: self.preprocess.image_size,
            min_count: self.preprocess.min_count,
            oov_policy: match self.preprocess.oov_policy.as_str() {
                "zero" => OovPolicy::ZeroVector,
                "mean" => OovPolicy::MeanVector,
                other => {
                    return Err(Error::config(format!(
                        "unknown oov_policy {other:?}; expected zero or mean"
                    )))
                }
            },
            model: ModelConfig {
                lstm_size: self.model.lstm_size,
                latent_dim: self.model.latent_dim,
                fusion_dim: self.model.fusion_dim,
                n_residual_blocks: self.model.n_residual_blocks,
                head_hidden: self.model.head_hidden,
                n_classes: self.model.n_classes,
                conv: ConvConfig {
                    filters: self.model.conv.filters,
                    kernel: self.model.conv.kernel,
                    stride: self.model.conv.stride,
                },
                recon_text_weight: self.model.recon_text_weight,
            },
            train: TrainConfig {
                max_epochs: self.train.max_epochs,
                batch_size: self.train.batch_size,
                patience: self.train.patience,
                seed: self.seed,
                lr: self.train.lr,
            },
            split: SplitRatios::new(self.split.train, self.split.val, self.split.test)?,
            cv_k: self.cv.k,
            classifiers,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathsSection {
    manifest: PathBuf,
    out_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingSection {
    path: PathBuf,
    dim: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ColumnsSection {
    id: String,
    image_path: String,
    text: String,
    label: String,
}

impl Default for ColumnsSection {
    fn default() -> Self {
        let d = ColumnMap::default();
        ColumnsSection {
            id: d.id,
            image_path: d.image_path,
            text: d.text,
            label: d.label,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PreprocessSection {
    pad_length: usize,
    image_size: usize,
    min_count: usize,
    oov_policy: String,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            pad_length: 32,
            image_size: 32,
            min_count: 1,
            oov_policy: "zero".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ModelSection {
    lstm_size: usize,
    latent_dim: usize,
    fusion_dim: usize,
    n_residual_blocks: usize,
    head_hidden: usize,
    n_classes: usize,
    conv: ConvSection,
    recon_text_weight: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = ModelConfig::default();
        ModelSection {
            lstm_size: d.lstm_size,
            latent_dim: d.latent_dim,
            fusion_dim: d.fusion_dim,
            n_residual_blocks: d.n_residual_blocks,
            head_hidden: d.head_hidden,
            n_classes: d.n_classes,
            conv: ConvSection::default(),
            recon_text_weight: d.recon_text_weight,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConvSection {
    filters: usize,
    kernel: usize,
    stride: usize,
}

impl Default for ConvSection {
    fn default() -> Self {
        let d = ConvConfig::default();
        ConvSection { filters: d.filters, kernel: d.kernel, stride: d.stride }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrainSection {
    max_epochs: usize,
    batch_size: usize,
    patience: usize,
    lr: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::new(0);
        TrainSection {
            max_epochs: d.max_epochs,
            batch_size: d.batch_size,
            patience: d.patience,
            lr: d.lr,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SplitSection {
    train: f64,
    val: f64,
    test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        let d = SplitRatios::default();
        SplitSection { train: d.train, val: d.val, test: d.test }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CvSection {
    k: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        CvSection { k: 10 }
    }
}

/// One `[[classifier]]` stanza. Absent fields keep the family's defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifierSection {
    family: String,
    #[serde(default)]
    knn_k: Option<usize>,
    #[serde(default)]
    svc_lambda: Option<f64>,
    #[serde(default)]
    svc_epochs: Option<usize>,
    #[serde(default)]
    tree_max_depth: Option<usize>,
    #[serde(default)]
    forest_n_trees: Option<usize>,
    #[serde(default)]
    forest_bootstrap: Option<bool>,
    #[serde(default)]
    forest_subsample_features: Option<bool>,
    #[serde(default)]
    boost_n_stages: Option<usize>,
    #[serde(default)]
    boost_shrinkage: Option<f64>,
    #[serde(default)]
    boost_depth: Option<usize>,
    #[serde(default)]
    ova: Option<bool>,
    #[serde(default)]
    standardize: Option<bool>,
}

impl ClassifierSection {
    fn empty() -> Self {
        ClassifierSection {
            family: String::new(),
            knn_k: None,
            svc_lambda: None,
            svc_epochs: None,
            tree_max_depth: None,
            forest_n_trees: None,
            forest_bootstrap: None,
            forest_subsample_features: None,
            boost_n_stages: None,
            boost_shrinkage: None,
            boost_depth: None,
            ova: None,
            standardize: None,
        }
    }

    fn to_spec(&self) -> Result<ClassifierSpec> {
        let family = Family::parse(&self.family)?;
        let mut spec = match family {
            Family::LinearSvc => ClassifierSpec::linear_svc(),
            Family::Knn => ClassifierSpec::knn(self.knn_k.unwrap_or(1)),
            Family::DecisionTree => ClassifierSpec::decision_tree(),
            Family::RandomForest => ClassifierSpec::random_forest(),
            Family::GradientBoosting => ClassifierSpec::gradient_boosting(),
        };
        if let Some(v) = self.knn_k {
            spec.knn_k = v;
        }
        if let Some(v) = self.svc_lambda {
            spec.svc_lambda = v;
        }
        if let Some(v) = self.svc_epochs {
            spec.svc_epochs = v;
        }
        if let Some(v) = self.tree_max_depth {
            spec.tree_max_depth = v;
        }
        if let Some(v) = self.forest_n_trees {
            spec.forest_n_trees = v;
        }
        if let Some(v) = self.forest_bootstrap {
            spec.forest_bootstrap = v;
        }
        if let Some(v) = self.forest_subsample_features {
            spec.forest_subsample_features = v;
        }
        if let Some(v) = self.boost_n_stages {
            spec.boost_n_stages = v;
        }
        if let Some(v) = self.boost_shrinkage {
            spec.boost_shrinkage = v;
        }
        if let Some(v) = self.boost_depth {
            spec.boost_depth = v;
        }
        if let Some(v) = self.ova {
            spec.ova = v;
        }
        if let Some(v) = self.standardize {
            spec.standardize = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Short name for a classifier in reports: the family, with k appended for
/// nearest neighbors ("knn1", "knn5").
pub fn classifier_label(spec: &ClassifierSpec) -> String {
    match spec.family {
        Family::Knn => format!("knn{}", spec.knn_k),
        _ => spec.family.as_str().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("run.toml");
        fs::write(&path, body).unwrap();
        path
    }

    const MINIMAL: &str = "\
seed = 7

[paths]
manifest = \"manifest.csv\"
out_dir = \"out\"

[[embeddings]]
path = \"vectors.txt\"
dim = 8
";

    #[test]
    fn minimal_config_fills_defaults() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_config(tmp.path(), MINIMAL);
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.pad_length, 32);
        assert_eq!(cfg.image_size, 32);
        assert_eq!(cfg.cv_k, 10);
        assert_eq!(cfg.model, ModelConfig::default());
        assert_eq!(cfg.split, SplitRatios::default());
        assert_eq!(cfg.classifiers, vec![ClassifierSpec::knn(1)]);
        assert!(cfg.manifest.ends_with("manifest.csv"));
        assert!(cfg.manifest.starts_with(tmp.path()));
    }

    #[test]
    fn missing_seed_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let body = MINIMAL.replace("seed = 7\n", "");
        let path = write_config(tmp.path(), &body);
        let err = RunConfig::load(&path).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_config(tmp.path(), &format!("{MINIMAL}\nlearning_rate = 0.1\n"));
        assert!(matches!(
            RunConfig::load(&path).unwrap_err(),
            Error::Config(_)
        ));
    }

    #[test]
    fn sections_override_defaults() {
        let tmp = tempfile::tempdir().unwrap();
        let body = format!(
            "{MINIMAL}
[preprocess]
pad_length = 8
image_size = 16
oov_policy = \"mean\"

[model]
lstm_size = 32
latent_dim = 16
fusion_dim = 32
head_hidden = 8
[model.conv]
filters = 4

[train]
max_epochs = 12
lr = 0.01

[split]
train = 0.6
val = 0.2
test = 0.2

[cv]
k = 5

[columns]
text = \"caption\"

[[classifier]]
family = \"knn\"
knn_k = 5

[[classifier]]
family = \"gradient_boosting\"
boost_n_stages = 25
standardize = true
"
        );
        let path = write_config(tmp.path(), &body);
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.pad_length, 8);
        assert_eq!(cfg.oov_policy, OovPolicy::MeanVector);
        assert_eq!(cfg.model.lstm_size, 32);
        assert_eq!(cfg.model.conv.filters, 4);
        assert_eq!(cfg.model.conv.kernel, 3);
        assert_eq!(cfg.train.max_epochs, 12);
        assert_eq!(cfg.train.lr, 0.01);
        assert_eq!(cfg.split.train, 0.6);
        assert_eq!(cfg.cv_k, 5);
        assert_eq!(cfg.columns.text, "caption");
        assert_eq!(cfg.classifiers.len(), 2);
        assert_eq!(cfg.classifiers[0].knn_k, 5);
        assert_eq!(cfg.classifiers[1].boost_n_stages, 25);
        assert!(cfg.classifiers[1].standardize);
        assert_eq!(classifier_label(&cfg.classifiers[0]), "knn5");
        assert_eq!(
            classifier_label(&cfg.classifiers[1]),
            "gradient_boosting"
        );
    }

    #[test]
    fn validate_requires_existing_paths() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_config(tmp.path(), MINIMAL);
        let cfg = RunConfig::load(&path).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert!(err.to_string().contains("manifest"), "{err}");

        fs::write(tmp.path().join("manifest.csv"), "id,image_path,text,label\n").unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("vectors.txt"), "{err}");

        fs::write(tmp.path().join("vectors.txt"), "a 1 2 3 4 5 6 7 8\n").unwrap();
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_classifier_stanzas_are_config_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let body = format!("{MINIMAL}\n[[classifier]]\nfamily = \"knn\"\nknn_k = 4\n");
        let path = write_config(tmp.path(), &body);
        assert!(matches!(
            RunConfig::load(&path).unwrap_err(),
            Error::Config(_)
        ));

        let body = format!("{MINIMAL}\n[[classifier]]\nfamily = \"linear_svc\"\nova = false\n");
        let path = write_config(tmp.path(), &body);
        assert!(matches!(
            RunConfig::load(&path).unwrap_err(),
            Error::Config(_)
        ));
    }

    #[test]
    fn seed_override_reaches_training() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_config(tmp.path(), MINIMAL);
        let mut cfg = RunConfig::load(&path).unwrap();
        cfg.override_seed(99);
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.train.seed, 99);
    }
}
