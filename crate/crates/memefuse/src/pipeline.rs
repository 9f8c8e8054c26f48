//! The staged pipeline the CLI drives. Every stage reads files written by
//! the previous one, so each can be rerun, inspected, and tested on its
//! own: preprocess -> train extractor -> extract features -> train
//! classifier -> evaluate -> report.

use std::fs;
use std::path::PathBuf;

use crate::classify::{fit, load_classifier, save_classifier, ClassifierSpec};
use crate::data::{
    classifier_label, load_features, load_manifest_with, load_prepared, save_features,
    save_prepared, RunConfig,
};
use crate::error::{Error, Result};
use crate::eval::{
    cross_validate, macro_f1, report_csv, report_table, stratified_split, ReportRow,
};
use crate::features::FeatureMatrix;
use crate::image::{min_max_scale, read_ppm, resize_bilinear};
use crate::models::{Arch, Extractor, FeatureTap, PreparedDataset, TrainLog};
use crate::text::{
    build_vocab, encode_and_pad, load_embeddings, preprocess_text, EmbeddingTable,
    PreprocConfig,
};

pub fn prepared_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("prepared.fkp")
}

pub fn vocab_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("vocab.txt")
}

pub fn model_path(cfg: &RunConfig, arch: Arch) -> PathBuf {
    cfg.out_dir.join("models").join(format!("{}.fkt", arch.as_str()))
}

pub fn train_log_path(cfg: &RunConfig, arch: Arch) -> PathBuf {
    cfg.out_dir.join("models").join(format!("{}_log.csv", arch.as_str()))
}

pub fn features_path(cfg: &RunConfig, tap: FeatureTap) -> PathBuf {
    cfg.out_dir.join("features").join(format!("{}.csv", tap.as_str()))
}

pub fn classifier_path(cfg: &RunConfig, tap: FeatureTap, spec: &ClassifierSpec) -> PathBuf {
    cfg.out_dir
        .join("classifiers")
        .join(format!("{}_{}.fkc", tap.as_str(), classifier_label(spec)))
}

pub fn cv_csv_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("reports").join("cv.csv")
}

pub fn cv_table_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("reports").join("cv.txt")
}

pub fn test_csv_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("reports").join("test.csv")
}

pub struct PreprocessSummary {
    pub n_samples: usize,
    pub vocab_size: usize,
    /// Per table: (dim, corpus tokens with no pretrained vector).
    pub tables: Vec<(usize, usize)>,
    pub prepared: PathBuf,
}

/// Reads the manifest, runs the text and image pipelines, and stores the
/// prepared dataset together with the embedding tables.
pub fn preprocess(cfg: &RunConfig) -> Result<PreprocessSummary> {
    cfg.validate()?;
    let manifest = load_manifest_with(&cfg.manifest, &cfg.columns)?;
    let pc = PreprocConfig::default();
    let corpus: Vec<Vec<String>> = manifest
        .rows()
        .iter()
        .map(|r| preprocess_text(&r.text, &pc))
        .collect();
    let vocab = build_vocab(&corpus, cfg.min_count)?;

    let mut token_ids = Vec::with_capacity(manifest.len() * cfg.pad_length);
    for tokens in &corpus {
        token_ids.extend(encode_and_pad(tokens, &vocab, cfg.pad_length)?);
    }

    let side = cfg.image_size;
    let mut images = Vec::with_capacity(manifest.len() * side * side * 3);
    for i in 0..manifest.len() {
        let img = read_ppm(&manifest.image_file(i))?;
        let resized = resize_bilinear(&img, side, side)?;
        images.extend_from_slice(min_max_scale(&resized).pixels());
    }

    let data = PreparedDataset::new(
        cfg.pad_length,
        side,
        side,
        token_ids,
        images,
        manifest.labels(),
        manifest.rows().iter().map(|r| r.id.clone()).collect(),
    )?;

    let mut tables = Vec::with_capacity(cfg.embeddings.len());
    for e in &cfg.embeddings {
        tables.push(load_embeddings(&e.path, &vocab, e.dim, cfg.oov_policy)?);
    }

    fs::create_dir_all(&cfg.out_dir)?;
    let prepared = prepared_path(cfg);
    save_prepared(&prepared, &data, &tables)?;
    vocab.save(&vocab_path(cfg))?;
    Ok(PreprocessSummary {
        n_samples: data.n_samples(),
        vocab_size: vocab.len(),
        tables: tables.iter().map(|t| (t.dim, t.missing_count())).collect(),
        prepared,
    })
}

fn load_stage_input(cfg: &RunConfig) -> Result<(PreparedDataset, Vec<EmbeddingTable>)> {
    let path = prepared_path(cfg);
    if !path.is_file() {
        return Err(Error::contract(format!(
            "{} does not exist; run preprocess first",
            path.display()
        )));
    }
    load_prepared(&path)
}

/// The tables an architecture consumes, in table order: both for the
/// two-branch text model, the first otherwise.
fn tables_for(arch: Arch, tables: &[EmbeddingTable]) -> Result<Vec<EmbeddingTable>> {
    match arch {
        Arch::Me => {
            if tables.len() < 2 {
                return Err(Error::config(format!(
                    "the {} architecture needs two embedding files; the run has {}",
                    arch.as_str(),
                    tables.len()
                )));
            }
            Ok(tables[..2].to_vec())
        }
        Arch::Biae | Arch::Mrn => Ok(vec![tables[0].clone()]),
    }
}

fn build_extractor(
    cfg: &RunConfig,
    arch: Arch,
    data: &PreparedDataset,
    tables: &[EmbeddingTable],
) -> Result<Extractor> {
    Extractor::new(
        arch,
        &cfg.model,
        tables_for(arch, tables)?,
        data.seq_len(),
        data.image_height(),
        data.image_width(),
        cfg.seed,
    )
}

#[derive(Debug)]
pub struct TrainSummary {
    pub arch: Arch,
    pub log: TrainLog,
    pub checkpoint: PathBuf,
}

/// Trains one extractor on the stratified train split with early stopping
/// on the validation split, then checkpoints it.
pub fn train_extractor(cfg: &RunConfig, arch: Arch) -> Result<TrainSummary> {
    let (data, tables) = load_stage_input(cfg)?;
    let (train_ix, val_ix, _) = stratified_split(data.labels(), &cfg.split, cfg.seed)?;
    let train = data.subset(&train_ix)?;
    let val = data.subset(&val_ix)?;
    let mut ex = build_extractor(cfg, arch, &data, &tables)?;
    let log = ex.train(&train, &val, &cfg.train)?;
    let checkpoint = model_path(cfg, arch);
    fs::create_dir_all(checkpoint.parent().expect("models dir"))?;
    ex.save(&checkpoint)?;
    fs::write(train_log_path(cfg, arch), log.to_csv())?;
    Ok(TrainSummary { arch, log, checkpoint })
}

/// Runs the whole dataset through a trained extractor and stores the
/// tapped features.
pub fn extract_features(cfg: &RunConfig, tap: FeatureTap) -> Result<PathBuf> {
    let (data, tables) = load_stage_input(cfg)?;
    let arch = tap.arch();
    let checkpoint = model_path(cfg, arch);
    if !checkpoint.is_file() {
        return Err(Error::contract(format!(
            "{} does not exist; run train-extractor --arch {} first",
            checkpoint.display(),
            arch.as_str()
        )));
    }
    let mut ex = build_extractor(cfg, arch, &data, &tables)?;
    ex.load_params(&checkpoint)?;
    let fm = ex.extract(&data, tap)?;
    let path = features_path(cfg, tap);
    fs::create_dir_all(path.parent().expect("features dir"))?;
    save_features(&fm, &path)?;
    Ok(path)
}

fn load_tap_features(cfg: &RunConfig, tap: FeatureTap) -> Result<FeatureMatrix> {
    let path = features_path(cfg, tap);
    if !path.is_file() {
        return Err(Error::contract(format!(
            "{} does not exist; run extract --tap {} first",
            path.display(),
            tap.as_str()
        )));
    }
    load_features(&path)
}

/// Train and validation rows together; the test rows stay held out.
fn trainval_indices(labels: &[usize], cfg: &RunConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let (train_ix, val_ix, test_ix) = stratified_split(labels, &cfg.split, cfg.seed)?;
    let mut fit_ix = train_ix;
    fit_ix.extend(val_ix);
    fit_ix.sort_unstable();
    Ok((fit_ix, test_ix))
}

/// Fits one classifier on the train+validation rows of a tap's features
/// and stores it.
pub fn train_classifier(
    cfg: &RunConfig,
    tap: FeatureTap,
    spec: &ClassifierSpec,
) -> Result<PathBuf> {
    let fm = load_tap_features(cfg, tap)?;
    let (fit_ix, _) = trainval_indices(fm.labels(), cfg)?;
    let model = fit(spec, &fm.subset(&fit_ix)?, cfg.seed)?;
    let path = classifier_path(cfg, tap, spec);
    fs::create_dir_all(path.parent().expect("classifiers dir"))?;
    save_classifier(&path, &model)?;
    Ok(path)
}

/// The taps with stored feature files, in tap-name order.
fn available_taps(cfg: &RunConfig) -> Vec<FeatureTap> {
    [
        FeatureTap::BiaeLatent,
        FeatureTap::MeAvg,
        FeatureTap::Rb1,
        FeatureTap::Rb2,
    ]
    .into_iter()
    .filter(|tap| features_path(cfg, *tap).is_file())
    .collect()
}

/// Cross-validates every configured classifier on every extracted tap and
/// writes the aggregate CSV plus an aligned text table.
pub fn evaluate_cv(cfg: &RunConfig) -> Result<PathBuf> {
    let taps = available_taps(cfg);
    if taps.is_empty() {
        return Err(Error::contract(format!(
            "no feature files under {}; run extract first",
            cfg.out_dir.join("features").display()
        )));
    }
    let mut rows = Vec::new();
    for spec in &cfg.classifiers {
        for &tap in &taps {
            let fm = load_tap_features(cfg, tap)?;
            let report = cross_validate(spec, &fm, cfg.cv_k, cfg.seed)?;
            rows.push(ReportRow {
                model: classifier_label(spec),
                tap: tap.as_str().to_string(),
                scores: report,
            });
        }
    }
    let path = cv_csv_path(cfg);
    fs::create_dir_all(path.parent().expect("reports dir"))?;
    fs::write(&path, report_csv(&rows))?;
    fs::write(cv_table_path(cfg), report_table(&rows))?;
    Ok(path)
}

/// Evaluates every stored classifier on the held-out test rows of its tap.
pub fn evaluate_test(cfg: &RunConfig) -> Result<PathBuf> {
    let taps = available_taps(cfg);
    if taps.is_empty() {
        return Err(Error::contract(format!(
            "no feature files under {}; run extract first",
            cfg.out_dir.join("features").display()
        )));
    }
    let mut out = String::from("model,tap,macro_f1\n");
    for spec in &cfg.classifiers {
        for &tap in &taps {
            let model_file = classifier_path(cfg, tap, spec);
            if !model_file.is_file() {
                return Err(Error::contract(format!(
                    "{} does not exist; run train-classifier first",
                    model_file.display()
                )));
            }
            let fm = load_tap_features(cfg, tap)?;
            let (_, test_ix) = trainval_indices(fm.labels(), cfg)?;
            let test = fm.subset(&test_ix)?;
            let model = load_classifier(&model_file)?;
            let pred = model.predict(&test)?;
            let f1 = macro_f1(test.labels(), &pred, fm.n_classes())?;
            out.push_str(&format!(
                "{},{},{:.2}\n",
                classifier_label(spec),
                tap.as_str(),
                100.0 * f1
            ));
        }
    }
    let path = test_csv_path(cfg);
    fs::create_dir_all(path.parent().expect("reports dir"))?;
    fs::write(&path, out)?;
    Ok(path)
}

/// Renders the stored evaluation artifacts as one printable string.
pub fn report(cfg: &RunConfig) -> Result<String> {
    let table = cv_table_path(cfg);
    if !table.is_file() {
        return Err(Error::contract(format!(
            "{} does not exist; run evaluate-cv first",
            table.display()
        )));
    }
    let mut out = String::from("cross-validation macro F1 (%)\n\n");
    out.push_str(&fs::read_to_string(&table)?);
    let test = test_csv_path(cfg);
    if test.is_file() {
        out.push_str("\nheld-out test macro F1 (%)\n\n");
        out.push_str(&aligned_csv(&fs::read_to_string(&test)?));
    }
    Ok(out)
}

/// Renders comma-separated rows as an aligned table, matching the
/// cross-validation table's style: name columns left, the trailing score
/// column right.
fn aligned_csv(csv: &str) -> String {
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let n_cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; n_cols];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        for (i, (cell, &w)) in row.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i + 1 < n_cols {
                out.push_str(&format!("{cell:<w$}"));
            } else {
                out.push_str(&format!("{cell:>w$}"));
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    out
}
