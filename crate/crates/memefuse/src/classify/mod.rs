//! Classical classifiers trained on extracted features.
//!
//! Linear SVC and gradient boosting are binary learners and always run under
//! one-vs-all. KNN, decision tree, and random forest are natively multiclass
//! and run that way by default; setting `ova` wraps them in one-vs-all
//! instead, scoring each class by its binary machine's positive-minus-rest
//! margin.

pub mod boost;
pub mod forest;
pub mod knn;
mod persist;
pub mod svc;
pub mod tree;

mod ova;

pub use ova::{ova_decompose, ova_predict};
pub use persist::{load_classifier, save_classifier};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::boost::BoostMachine;
use crate::classify::forest::ForestModel;
use crate::classify::knn::KnnModel;
use crate::classify::svc::SvcMachine;
use crate::classify::tree::{FeaturePolicy, TreeModel};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Highest score wins; ties go to the lowest index.
pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    LinearSvc,
    Knn,
    DecisionTree,
    RandomForest,
    GradientBoosting,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::LinearSvc => "linear_svc",
            Family::Knn => "knn",
            Family::DecisionTree => "decision_tree",
            Family::RandomForest => "random_forest",
            Family::GradientBoosting => "gradient_boosting",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear_svc" => Ok(Family::LinearSvc),
            "knn" => Ok(Family::Knn),
            "decision_tree" => Ok(Family::DecisionTree),
            "random_forest" => Ok(Family::RandomForest),
            "gradient_boosting" => Ok(Family::GradientBoosting),
            other => Err(Error::config(format!(
                "unknown classifier family {other:?}; expected one of linear_svc, knn, decision_tree, random_forest, gradient_boosting"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub family: Family,
    pub knn_k: usize,
    pub svc_lambda: f64,
    pub svc_epochs: usize,
    pub tree_max_depth: usize,
    pub forest_n_trees: usize,
    pub forest_bootstrap: bool,
    pub forest_subsample_features: bool,
    pub boost_n_stages: usize,
    pub boost_shrinkage: f64,
    pub boost_depth: usize,
    pub ova: bool,
    pub standardize: bool,
}

impl ClassifierSpec {
    fn base(family: Family, ova: bool) -> Self {
        ClassifierSpec {
            family,
            knn_k: 1,
            svc_lambda: 1e-4,
            svc_epochs: 100,
            tree_max_depth: 10,
            forest_n_trees: 100,
            forest_bootstrap: true,
            forest_subsample_features: true,
            boost_n_stages: 100,
            boost_shrinkage: 0.1,
            boost_depth: 3,
            ova,
            standardize: false,
        }
    }

    pub fn linear_svc() -> Self {
        Self::base(Family::LinearSvc, true)
    }

    pub fn knn(k: usize) -> Self {
        let mut s = Self::base(Family::Knn, false);
        s.knn_k = k;
        s
    }

    pub fn decision_tree() -> Self {
        Self::base(Family::DecisionTree, false)
    }

    pub fn random_forest() -> Self {
        Self::base(Family::RandomForest, false)
    }

    pub fn gradient_boosting() -> Self {
        Self::base(Family::GradientBoosting, true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == Family::Knn && !matches!(self.knn_k, 1 | 3 | 5) {
            return Err(Error::config(format!(
                "knn k must be 1, 3, or 5; got {}",
                self.knn_k
            )));
        }
        if !self.ova && matches!(self.family, Family::LinearSvc | Family::GradientBoosting) {
            return Err(Error::config(format!(
                "{} is a binary learner and requires one-vs-all",
                self.family.as_str()
            )));
        }
        if self.svc_lambda <= 0.0 || self.boost_shrinkage <= 0.0 {
            return Err(Error::config("classifier rates must be positive"));
        }
        if self.svc_epochs == 0 || self.forest_n_trees == 0 || self.boost_n_stages == 0 {
            return Err(Error::config("classifier iteration counts must be positive"));
        }
        Ok(())
    }
}

/// Per-dimension z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Normalizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Normalizer {
    fn fit(x: &FeatureMatrix) -> Self {
        let (n, d) = (x.n_rows() as f64, x.n_dims());
        let mut means = vec![0.0; d];
        for i in 0..x.n_rows() {
            for (m, &v) in means.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut scales = vec![0.0; d];
        for i in 0..x.n_rows() {
            for (s, (&v, &m)) in scales.iter_mut().zip(x.row(i).iter().zip(&means)) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scales {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Normalizer { means, scales }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    fn transform_matrix(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut values = Vec::with_capacity(x.values().len());
        for i in 0..x.n_rows() {
            values.extend(self.transform_row(x.row(i)));
        }
        FeatureMatrix::new(x.n_dims(), values, x.labels().to_vec(), x.ids().to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Model {
    Knn(KnnModel),
    Tree(TreeModel),
    Forest(ForestModel),
    OvaSvc(Vec<SvcMachine>),
    OvaBoost(Vec<BoostMachine>),
    OvaKnn(Vec<KnnModel>),
    OvaTree(Vec<TreeModel>),
    OvaForest(Vec<ForestModel>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub(crate) spec: ClassifierSpec,
    pub(crate) n_classes: usize,
    pub(crate) n_dims: usize,
    pub(crate) norm: Option<Normalizer>,
    pub(crate) model: Model,
}

/// Positive-class pull of a binary machine built from class fractions.
fn binary_margin(scores: &[f64]) -> f64 {
    scores[1] - scores[0]
}

pub fn fit(spec: &ClassifierSpec, x: &FeatureMatrix, seed: u64) -> Result<Classifier> {
    spec.validate()?;
    if x.n_rows() == 0 {
        return Err(Error::contract("fit: empty feature matrix"));
    }
    let y = x.labels();
    let n_classes = x.n_classes();
    if n_classes < 2 {
        return Err(Error::contract("fit: need at least two classes"));
    }
    for c in 0..n_classes {
        if !y.contains(&c) {
            return Err(Error::contract(format!("fit: class {c} missing from labels")));
        }
    }
    if x.n_rows() < n_classes {
        return Err(Error::contract(format!(
            "fit: {} rows cannot cover {n_classes} classes",
            x.n_rows()
        )));
    }
    let norm = if spec.standardize {
        Some(Normalizer::fit(x))
    } else {
        None
    };
    let transformed;
    let xt: &FeatureMatrix = match &norm {
        Some(nm) => {
            transformed = nm.transform_matrix(x)?;
            &transformed
        }
        None => x,
    };

    let model = match spec.family {
        Family::Knn if !spec.ova => Model::Knn(KnnModel::fit(xt, y, n_classes, spec.knn_k)?),
        Family::DecisionTree if !spec.ova => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Model::Tree(TreeModel::fit(
                xt,
                y,
                n_classes,
                spec.tree_max_depth,
                FeaturePolicy::All,
                &mut rng,
            ))
        }
        Family::RandomForest if !spec.ova => Model::Forest(ForestModel::fit(
            xt,
            y,
            n_classes,
            spec.forest_n_trees,
            spec.tree_max_depth,
            spec.forest_bootstrap,
            spec.forest_subsample_features,
            seed,
        )),
        Family::LinearSvc => Model::OvaSvc(ova_decompose(xt, y, n_classes, seed, |bx, by, s| {
            Ok(SvcMachine::fit(bx, by, spec.svc_lambda, spec.svc_epochs, s))
        })?),
        Family::GradientBoosting => {
            Model::OvaBoost(ova_decompose(xt, y, n_classes, seed, |bx, by, _| {
                Ok(BoostMachine::fit(
                    bx,
                    by,
                    spec.boost_n_stages,
                    spec.boost_shrinkage,
                    spec.boost_depth,
                ))
            })?)
        }
        Family::Knn => Model::OvaKnn(ova_decompose(xt, y, n_classes, seed, |bx, by, _| {
            KnnModel::fit(bx, by, 2, spec.knn_k)
        })?),
        Family::DecisionTree => {
            Model::OvaTree(ova_decompose(xt, y, n_classes, seed, |bx, by, s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                Ok(TreeModel::fit(
                    bx,
                    by,
                    2,
                    spec.tree_max_depth,
                    FeaturePolicy::All,
                    &mut rng,
                ))
            })?)
        }
        Family::RandomForest => {
            Model::OvaForest(ova_decompose(xt, y, n_classes, seed, |bx, by, s| {
                Ok(ForestModel::fit(
                    bx,
                    by,
                    2,
                    spec.forest_n_trees,
                    spec.tree_max_depth,
                    spec.forest_bootstrap,
                    spec.forest_subsample_features,
                    s,
                ))
            })?)
        }
    };
    Ok(Classifier {
        spec: spec.clone(),
        n_classes,
        n_dims: x.n_dims(),
        norm,
        model,
    })
}

impl Classifier {
    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        if x.n_dims() != self.n_dims {
            return Err(Error::contract(format!(
                "predict: trained on {} dims, given {}",
                self.n_dims,
                x.n_dims()
            )));
        }
        let mut out = Vec::with_capacity(x.n_rows());
        for i in 0..x.n_rows() {
            let raw = x.row(i);
            let transformed;
            let row: &[f64] = match &self.norm {
                Some(nm) => {
                    transformed = nm.transform_row(raw);
                    &transformed
                }
                None => raw,
            };
            out.push(self.predict_row(row));
        }
        Ok(out)
    }

    fn predict_row(&self, row: &[f64]) -> usize {
        match &self.model {
            Model::Knn(m) => argmax_lowest(&m.class_scores(row)),
            Model::Tree(m) => argmax_lowest(&m.class_scores(row)),
            Model::Forest(m) => argmax_lowest(&m.class_scores(row)),
            Model::OvaSvc(machines) => ova_predict(machines, row, |m, r| m.decision(r)),
            Model::OvaBoost(machines) => ova_predict(machines, row, |m, r| m.decision(r)),
            Model::OvaKnn(machines) => {
                ova_predict(machines, row, |m, r| binary_margin(&m.class_scores(r)))
            }
            Model::OvaTree(machines) => {
                ova_predict(machines, row, |m, r| binary_margin(&m.class_scores(r)))
            }
            Model::OvaForest(machines) => {
                ova_predict(machines, row, |m, r| binary_margin(&m.class_scores(r)))
            }
        }
    }
}
