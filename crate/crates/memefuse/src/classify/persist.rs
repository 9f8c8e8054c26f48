//! Versioned binary container for trained classifiers: magic `FKC1`,
//! format version, the full spec, then the learned state. All integers are
//! u64 LE; floats are f64 LE bit patterns, so round-trips are bit-exact.

use std::fs;
use std::path::Path;

use crate::classify::boost::BoostMachine;
use crate::classify::forest::ForestModel;
use crate::classify::knn::KnnModel;
use crate::classify::svc::SvcMachine;
use crate::classify::tree::{Node, RegNode, TreeModel};
use crate::classify::{Classifier, ClassifierSpec, Family, Model, Normalizer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FKC1";
const VERSION: u64 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
    }

    fn usizes(&mut self, vs: &[usize]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.u64(v as u64);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format("classifier file truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        (0..n).map(|_| self.f64()).collect()
    }

    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.u64()? as usize;
        (0..n).map(|_| Ok(self.u64()? as usize)).collect()
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn family_tag(f: Family) -> u8 {
    match f {
        Family::LinearSvc => 0,
        Family::Knn => 1,
        Family::DecisionTree => 2,
        Family::RandomForest => 3,
        Family::GradientBoosting => 4,
    }
}

fn family_from_tag(tag: u8) -> Result<Family> {
    Ok(match tag {
        0 => Family::LinearSvc,
        1 => Family::Knn,
        2 => Family::DecisionTree,
        3 => Family::RandomForest,
        4 => Family::GradientBoosting,
        other => return Err(Error::format(format!("unknown family tag {other}"))),
    })
}

fn write_node(w: &mut Writer, node: &Node) {
    match node {
        Node::Leaf { counts } => {
            w.u8(0);
            w.f64s(counts);
        }
        Node::Split { feature, threshold, left, right } => {
            w.u8(1);
            w.u64(*feature as u64);
            w.f64(*threshold);
            write_node(w, left);
            write_node(w, right);
        }
    }
}

fn read_node(r: &mut Reader) -> Result<Node> {
    match r.u8()? {
        0 => Ok(Node::Leaf { counts: r.f64s()? }),
        1 => {
            let feature = r.u64()? as usize;
            let threshold = r.f64()?;
            let left = Box::new(read_node(r)?);
            let right = Box::new(read_node(r)?);
            Ok(Node::Split { feature, threshold, left, right })
        }
        other => Err(Error::format(format!("unknown tree node tag {other}"))),
    }
}

fn write_reg_node(w: &mut Writer, node: &RegNode) {
    match node {
        RegNode::Leaf { value } => {
            w.u8(0);
            w.f64(*value);
        }
        RegNode::Split { feature, threshold, left, right } => {
            w.u8(1);
            w.u64(*feature as u64);
            w.f64(*threshold);
            write_reg_node(w, left);
            write_reg_node(w, right);
        }
    }
}

fn read_reg_node(r: &mut Reader) -> Result<RegNode> {
    match r.u8()? {
        0 => Ok(RegNode::Leaf { value: r.f64()? }),
        1 => {
            let feature = r.u64()? as usize;
            let threshold = r.f64()?;
            let left = Box::new(read_reg_node(r)?);
            let right = Box::new(read_reg_node(r)?);
            Ok(RegNode::Split { feature, threshold, left, right })
        }
        other => Err(Error::format(format!("unknown regression node tag {other}"))),
    }
}

fn write_knn(w: &mut Writer, m: &KnnModel) {
    w.u64(m.k as u64);
    w.u64(m.n_classes as u64);
    w.u64(m.n_dims as u64);
    w.usizes(&m.labels);
    w.f64s(&m.values);
}

fn read_knn(r: &mut Reader) -> Result<KnnModel> {
    Ok(KnnModel {
        k: r.u64()? as usize,
        n_classes: r.u64()? as usize,
        n_dims: r.u64()? as usize,
        labels: r.usizes()?,
        values: r.f64s()?,
    })
}

fn write_tree(w: &mut Writer, m: &TreeModel) {
    w.u64(m.n_classes as u64);
    write_node(w, &m.root);
}

fn read_tree(r: &mut Reader) -> Result<TreeModel> {
    Ok(TreeModel {
        n_classes: r.u64()? as usize,
        root: read_node(r)?,
    })
}

fn write_forest(w: &mut Writer, m: &ForestModel) {
    w.u64(m.n_classes as u64);
    w.u64(m.trees.len() as u64);
    for t in &m.trees {
        write_tree(w, t);
    }
}

fn read_forest(r: &mut Reader) -> Result<ForestModel> {
    let n_classes = r.u64()? as usize;
    let n = r.u64()? as usize;
    let trees = (0..n).map(|_| read_tree(r)).collect::<Result<_>>()?;
    Ok(ForestModel { n_classes, trees })
}

fn write_boost(w: &mut Writer, m: &BoostMachine) {
    w.f64(m.f0);
    w.f64(m.shrinkage);
    w.u64(m.stages.len() as u64);
    for s in &m.stages {
        write_reg_node(w, s);
    }
    w.f64s(&m.losses);
}

fn read_boost(r: &mut Reader) -> Result<BoostMachine> {
    let f0 = r.f64()?;
    let shrinkage = r.f64()?;
    let n = r.u64()? as usize;
    let stages = (0..n).map(|_| read_reg_node(r)).collect::<Result<_>>()?;
    let losses = r.f64s()?;
    Ok(BoostMachine { f0, shrinkage, stages, losses })
}

pub fn save_classifier(path: &Path, clf: &Classifier) -> Result<()> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u64(VERSION);
    let spec = &clf.spec;
    w.u8(family_tag(spec.family));
    w.u64(spec.knn_k as u64);
    w.f64(spec.svc_lambda);
    w.u64(spec.svc_epochs as u64);
    w.u64(spec.tree_max_depth as u64);
    w.u64(spec.forest_n_trees as u64);
    w.u8(spec.forest_bootstrap as u8);
    w.u8(spec.forest_subsample_features as u8);
    w.u64(spec.boost_n_stages as u64);
    w.f64(spec.boost_shrinkage);
    w.u64(spec.boost_depth as u64);
    w.u8(spec.ova as u8);
    w.u8(spec.standardize as u8);
    w.u64(clf.n_classes as u64);
    w.u64(clf.n_dims as u64);
    match &clf.norm {
        Some(nm) => {
            w.u8(1);
            w.f64s(&nm.means);
            w.f64s(&nm.scales);
        }
        None => w.u8(0),
    }
    match &clf.model {
        Model::Knn(m) => write_knn(&mut w, m),
        Model::Tree(m) => write_tree(&mut w, m),
        Model::Forest(m) => write_forest(&mut w, m),
        Model::OvaSvc(ms) => {
            w.u64(ms.len() as u64);
            for m in ms {
                w.f64s(&m.w);
                w.f64(m.b);
            }
        }
        Model::OvaBoost(ms) => {
            w.u64(ms.len() as u64);
            for m in ms {
                write_boost(&mut w, m);
            }
        }
        Model::OvaKnn(ms) => {
            w.u64(ms.len() as u64);
            for m in ms {
                write_knn(&mut w, m);
            }
        }
        Model::OvaTree(ms) => {
            w.u64(ms.len() as u64);
            for m in ms {
                write_tree(&mut w, m);
            }
        }
        Model::OvaForest(ms) => {
            w.u64(ms.len() as u64);
            for m in ms {
                write_forest(&mut w, m);
            }
        }
    }
    fs::write(path, w.buf)?;
    Ok(())
}

pub fn load_classifier(path: &Path) -> Result<Classifier> {
    let buf = fs::read(path)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::format(format!(
            "{}: not a classifier file (bad magic)",
            path.display()
        )));
    }
    let version = r.u64()?;
    if version != VERSION {
        return Err(Error::format(format!(
            "{}: unsupported classifier version {version}",
            path.display()
        )));
    }
    let family = family_from_tag(r.u8()?)?;
    let spec = ClassifierSpec {
        family,
        knn_k: r.u64()? as usize,
        svc_lambda: r.f64()?,
        svc_epochs: r.u64()? as usize,
        tree_max_depth: r.u64()? as usize,
        forest_n_trees: r.u64()? as usize,
        forest_bootstrap: r.u8()? != 0,
        forest_subsample_features: r.u8()? != 0,
        boost_n_stages: r.u64()? as usize,
        boost_shrinkage: r.f64()?,
        boost_depth: r.u64()? as usize,
        ova: r.u8()? != 0,
        standardize: r.u8()? != 0,
    };
    let n_classes = r.u64()? as usize;
    let n_dims = r.u64()? as usize;
    let norm = if r.u8()? == 1 {
        Some(Normalizer {
            means: r.f64s()?,
            scales: r.f64s()?,
        })
    } else {
        None
    };
    let model = match (spec.family, spec.ova) {
        (Family::Knn, false) => Model::Knn(read_knn(&mut r)?),
        (Family::DecisionTree, false) => Model::Tree(read_tree(&mut r)?),
        (Family::RandomForest, false) => Model::Forest(read_forest(&mut r)?),
        (Family::LinearSvc, _) => {
            let n = r.u64()? as usize;
            let mut ms = Vec::with_capacity(n);
            for _ in 0..n {
                let wv = r.f64s()?;
                let b = r.f64()?;
                ms.push(SvcMachine { w: wv, b });
            }
            Model::OvaSvc(ms)
        }
        (Family::GradientBoosting, _) => {
            let n = r.u64()? as usize;
            let ms = (0..n).map(|_| read_boost(&mut r)).collect::<Result<_>>()?;
            Model::OvaBoost(ms)
        }
        (Family::Knn, true) => {
            let n = r.u64()? as usize;
            let ms = (0..n).map(|_| read_knn(&mut r)).collect::<Result<_>>()?;
            Model::OvaKnn(ms)
        }
        (Family::DecisionTree, true) => {
            let n = r.u64()? as usize;
            let ms = (0..n).map(|_| read_tree(&mut r)).collect::<Result<_>>()?;
            Model::OvaTree(ms)
        }
        (Family::RandomForest, true) => {
            let n = r.u64()? as usize;
            let ms = (0..n).map(|_| read_forest(&mut r)).collect::<Result<_>>()?;
            Model::OvaForest(ms)
        }
    };
    if !r.done() {
        return Err(Error::format(format!(
            "{}: trailing bytes after classifier payload",
            path.display()
        )));
    }
    Ok(Classifier {
        spec,
        n_classes,
        n_dims,
        norm,
        model,
    })
}
