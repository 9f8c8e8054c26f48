//! Synthetic meme dataset generator: class-colored images, class-worded
//! captions, and matching pretrained-vector files, with a separability dial
//! that fades both signals into uniform noise.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::manifest::LABEL_NAMES;
use crate::error::{Error, Result};
use crate::image::{write_ppm, Image, CHANNELS};
use crate::text::stem;

/// Four caption words per class. All are Porter fixed points outside the
/// stopword list, so they survive preprocessing verbatim.
pub const CLASS_TOKENS: [[&str; 4]; 3] = [
    ["grim", "dour", "bleak", "drab"],
    ["plain", "dull", "bland", "mild"],
    ["glad", "bright", "vivid", "warm"],
];

/// Dominant image color per class.
const CLASS_COLORS: [[f64; 3]; 3] = [
    [0.85, 0.15, 0.15],
    [0.15, 0.85, 0.15],
    [0.15, 0.15, 0.85],
];

const TOKENS_PER_TEXT: usize = 4;
const IMAGE_SIDE: usize = 48;
const EMBED_DIMS: [usize; 2] = [8, 6];

#[derive(Debug)]
pub struct SyntheticOutput {
    pub manifest: PathBuf,
    pub embeddings: [PathBuf; 2],
    pub config: PathBuf,
}

/// Writes images, a manifest, two distinct vector files, and a ready-to-run
/// config under `dir`. At separability 1 each class keeps its own token
/// pool and exact dominant color; at 0 both modalities are class-blind
/// noise. Identical arguments produce byte-identical files.
pub fn generate_synthetic(
    dir: &Path,
    n_per_class: usize,
    separability: f64,
    seed: u64,
) -> Result<SyntheticOutput> {
    if n_per_class < 1 {
        return Err(Error::config("n_per_class must be at least 1"));
    }
    if !(0.0..=1.0).contains(&separability) {
        return Err(Error::config(format!(
            "separability must lie in [0, 1]; got {separability}"
        )));
    }
    fs::create_dir_all(dir.join("images"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all_tokens: Vec<&str> = CLASS_TOKENS.iter().flatten().copied().collect();

    let manifest_path = dir.join("manifest.csv");
    let mut manifest = csv::WriterBuilder::new()
        .from_path(&manifest_path)
        .map_err(|e| Error::format(format!("{}: {e}", manifest_path.display())))?;
    manifest.write_record(["id", "image_path", "text", "label"])?;

    let mut idx = 0usize;
    for c in 0..3 {
        for _ in 0..n_per_class {
            let id = format!("m{idx:04}");
            let words: Vec<&str> = (0..TOKENS_PER_TEXT)
                .map(|_| {
                    if rng.gen::<f64>() < separability {
                        CLASS_TOKENS[c][rng.gen_range(0..CLASS_TOKENS[c].len())]
                    } else {
                        all_tokens[rng.gen_range(0..all_tokens.len())]
                    }
                })
                .collect();
            let mut pixels = Vec::with_capacity(IMAGE_SIDE * IMAGE_SIDE * CHANNELS);
            for _ in 0..IMAGE_SIDE * IMAGE_SIDE {
                for &color in &CLASS_COLORS[c] {
                    let noise: f64 = rng.gen();
                    pixels.push(separability * color + (1.0 - separability) * noise);
                }
            }
            let image_rel = format!("images/{id}.ppm");
            write_ppm(&dir.join(&image_rel), &Image::new(IMAGE_SIDE, IMAGE_SIDE, pixels)?)?;
            manifest.write_record([&id, image_rel.as_str(), &words.join(" "), LABEL_NAMES[c]])?;
            idx += 1;
        }
    }
    manifest.flush()?;

    let mut embeddings = [PathBuf::new(), PathBuf::new()];
    for (which, (suffix, dim)) in ["a", "b"].iter().zip(EMBED_DIMS).enumerate() {
        let path = dir.join(format!("vectors_{suffix}.txt"));
        let mut body = String::new();
        for token in &all_tokens {
            // Keyed by the stem: that is the form the vocabulary holds.
            body.push_str(&stem(token));
            for _ in 0..dim {
                body.push_str(&format!(" {:.6}", rng.gen_range(-0.5..0.5)));
            }
            body.push('\n');
        }
        fs::write(&path, body)?;
        embeddings[which] = path;
    }

    let config_path = dir.join("run_config.toml");
    fs::write(&config_path, config_template(seed))?;
    Ok(SyntheticOutput { manifest: manifest_path, embeddings, config: config_path })
}

/// Desk-scale run configuration pointing at the generated files.
fn config_template(seed: u64) -> String {
    format!(
        "seed = {seed}

[paths]
manifest = \"manifest.csv\"
out_dir = \"out\"

[[embeddings]]
path = \"vectors_a.txt\"
dim = {}

[[embeddings]]
path = \"vectors_b.txt\"
dim = {}

[preprocess]
pad_length = 8
image_size = 32

[model]
lstm_size = 32
latent_dim = 32
fusion_dim = 32
head_hidden = 32

[train]
max_epochs = 40
batch_size = 32
patience = 5
lr = 0.001

[cv]
k = 10

[[classifier]]
family = \"knn\"
knn_k = 1
",
        EMBED_DIMS[0], EMBED_DIMS[1]
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{fit, ClassifierSpec};
    use crate::data::manifest::load_manifest;
    use crate::eval::{macro_f1, stratified_split, SplitRatios};
    use crate::features::FeatureMatrix;
    use crate::image::read_ppm;
    use crate::text::{
        build_vocab, load_embeddings, preprocess_text, OovPolicy, PreprocConfig,
    };

    fn file_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in fs::read_dir(&d).unwrap() {
                let p = entry.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                    out.push((rel, fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn same_seed_means_byte_identical_files() {
        let t1 = tempfile::tempdir().unwrap();
        let t2 = tempfile::tempdir().unwrap();
        let t3 = tempfile::tempdir().unwrap();
        generate_synthetic(t1.path(), 3, 0.7, 11).unwrap();
        generate_synthetic(t2.path(), 3, 0.7, 11).unwrap();
        generate_synthetic(t3.path(), 3, 0.7, 12).unwrap();
        assert_eq!(file_bytes(t1.path()), file_bytes(t2.path()));
        assert_ne!(file_bytes(t1.path()), file_bytes(t3.path()));
    }

    #[test]
    fn caption_tokens_survive_preprocessing_and_lookup() {
        let pc = PreprocConfig::default();
        for pool in CLASS_TOKENS {
            for token in pool {
                assert_eq!(stem(token), token, "{token} is not a Porter fixed point");
                assert_eq!(preprocess_text(token, &pc), vec![token.to_string()]);
            }
        }

        let tmp = tempfile::tempdir().unwrap();
        let out = generate_synthetic(tmp.path(), 4, 0.5, 3).unwrap();
        let manifest = load_manifest(&out.manifest).unwrap();
        let corpus: Vec<Vec<String>> = manifest
            .rows()
            .iter()
            .map(|r| {
                let tokens = preprocess_text(&r.text, &pc);
                assert_eq!(tokens.len(), TOKENS_PER_TEXT, "{:?}", r.text);
                tokens
            })
            .collect();
        let vocab = build_vocab(&corpus, 1).unwrap();
        for (path, dim) in out.embeddings.iter().zip(EMBED_DIMS) {
            let table = load_embeddings(path, &vocab, dim, OovPolicy::ZeroVector).unwrap();
            assert_eq!(table.missing_count(), 0);
            assert_eq!(table.dim, dim);
        }
    }

    /// Bag-of-tokens plus mean color, straight off the generated files.
    fn raw_features(dir: &Path, manifest_path: &Path) -> FeatureMatrix {
        let manifest = load_manifest(manifest_path).unwrap();
        let all_tokens: Vec<&str> = CLASS_TOKENS.iter().flatten().copied().collect();
        let mut values = Vec::new();
        for (i, row) in manifest.rows().iter().enumerate() {
            let mut bag = vec![0.0; all_tokens.len()];
            for word in row.text.split_whitespace() {
                let slot = all_tokens.iter().position(|&t| t == word).unwrap();
                bag[slot] += 1.0;
            }
            values.extend(bag);
            let img = read_ppm(&dir.join(&manifest.rows()[i].image_path)).unwrap();
            let mut mean = [0.0; CHANNELS];
            for (j, &v) in img.pixels().iter().enumerate() {
                mean[j % CHANNELS] += v;
            }
            let count = (img.pixels().len() / CHANNELS) as f64;
            values.extend(mean.iter().map(|m| m / count));
        }
        FeatureMatrix::new(
            all_tokens.len() + CHANNELS,
            values,
            manifest.labels(),
            manifest.rows().iter().map(|r| r.id.clone()).collect(),
        )
        .unwrap()
    }

    fn nearest_centroid(train: &FeatureMatrix, test: &FeatureMatrix) -> Vec<usize> {
        let n_classes = 3;
        let d = train.n_dims();
        let mut sums = vec![vec![0.0; d]; n_classes];
        let mut counts = vec![0usize; n_classes];
        for i in 0..train.n_rows() {
            let c = train.labels()[i];
            counts[c] += 1;
            for (s, &v) in sums[c].iter_mut().zip(train.row(i)) {
                *s += v;
            }
        }
        let centroids: Vec<Vec<f64>> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| s.iter().map(|v| v / c as f64).collect())
            .collect();
        (0..test.n_rows())
            .map(|i| {
                let row = test.row(i);
                let mut best = (f64::INFINITY, 0);
                for (c, centroid) in centroids.iter().enumerate() {
                    let d2: f64 = row
                        .iter()
                        .zip(centroid)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if d2 < best.0 {
                        best = (d2, c);
                    }
                }
                best.1
            })
            .collect()
    }

    #[test]
    fn full_separability_is_perfectly_classifiable() {
        let tmp = tempfile::tempdir().unwrap();
        let out = generate_synthetic(tmp.path(), 20, 1.0, 5).unwrap();
        let fm = raw_features(tmp.path(), &out.manifest);
        let (train_ix, _, test_ix) =
            stratified_split(fm.labels(), &SplitRatios::default(), 0).unwrap();
        let train = fm.subset(&train_ix).unwrap();
        let test = fm.subset(&test_ix).unwrap();

        let knn = fit(&ClassifierSpec::knn(1), &train, 0).unwrap();
        let knn_pred = knn.predict(&test).unwrap();
        assert_eq!(macro_f1(test.labels(), &knn_pred, 3).unwrap(), 1.0);

        let oracle_pred = nearest_centroid(&train, &test);
        assert_eq!(macro_f1(test.labels(), &oracle_pred, 3).unwrap(), 1.0);
        assert_eq!(knn_pred, oracle_pred);
    }

    #[test]
    fn zero_separability_carries_no_class_signal() {
        let tmp = tempfile::tempdir().unwrap();
        let out = generate_synthetic(tmp.path(), 40, 0.0, 6).unwrap();
        let fm = raw_features(tmp.path(), &out.manifest);

        let mut class_mean_color = [0.0; 3];
        for i in 0..fm.n_rows() {
            let row = fm.row(i);
            let mean = (row[12] + row[13] + row[14]) / 3.0;
            class_mean_color[fm.labels()[i]] += mean / 40.0;
        }
        for c in 1..3 {
            assert!(
                (class_mean_color[c] - class_mean_color[0]).abs() < 0.05,
                "{class_mean_color:?}"
            );
        }

        let (train_ix, _, test_ix) =
            stratified_split(fm.labels(), &SplitRatios::default(), 1).unwrap();
        let train = fm.subset(&train_ix).unwrap();
        let test = fm.subset(&test_ix).unwrap();
        let knn = fit(&ClassifierSpec::knn(1), &train, 0).unwrap();
        let pred = knn.predict(&test).unwrap();
        let f1 = macro_f1(test.labels(), &pred, 3).unwrap();
        assert!(f1 < 0.7, "no-signal data classified with macro F1 {f1}");
    }

    #[test]
    fn bad_arguments_are_config_errors() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            generate_synthetic(tmp.path(), 0, 0.5, 0).unwrap_err(),
            Error::Config(_)
        ));
        assert!(matches!(
            generate_synthetic(tmp.path(), 2, 1.5, 0).unwrap_err(),
            Error::Config(_)
        ));
    }
}
