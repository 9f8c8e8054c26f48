//! Multimodal feature extractors: a two-branch text model over frozen
//! embedding tables, a bimodal autoencoder, and a residual fusion network,
//! plus their shared training loop and feature tapping.

mod archs;
mod lstm;
mod train;

pub use train::{TrainLog, ValLossSource};

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::image::CHANNELS;
use crate::tensor::{load_checkpoint, save_checkpoint, Graph, ParamSet, Tensor};
use crate::text::{EmbeddingTable, PAD_ID};

use archs::{bind_named, forward, init_params, BatchData, ForwardPass};

/// Samples extracted per inference graph; per-row results are independent
/// of the chunking.
const EXTRACT_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Me,
    Biae,
    Mrn,
}

impl Arch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Arch::Me => "me",
            Arch::Biae => "biae",
            Arch::Mrn => "mrn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "me" => Ok(Arch::Me),
            "biae" => Ok(Arch::Biae),
            "mrn" => Ok(Arch::Mrn),
            other => Err(Error::config(format!(
                "unknown architecture {other:?}; expected me, biae, or mrn"
            ))),
        }
    }

    fn n_tables(&self) -> usize {
        match self {
            Arch::Me => 2,
            Arch::Biae | Arch::Mrn => 1,
        }
    }

    fn uses_images(&self) -> bool {
        !matches!(self, Arch::Me)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureTap {
    MeAvg,
    BiaeLatent,
    Rb1,
    Rb2,
}

impl FeatureTap {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureTap::MeAvg => "me_avg",
            FeatureTap::BiaeLatent => "biae_latent",
            FeatureTap::Rb1 => "rb1",
            FeatureTap::Rb2 => "rb2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "me_avg" => Ok(FeatureTap::MeAvg),
            "biae_latent" => Ok(FeatureTap::BiaeLatent),
            "rb1" => Ok(FeatureTap::Rb1),
            "rb2" => Ok(FeatureTap::Rb2),
            other => Err(Error::config(format!(
                "unknown feature tap {other:?}; expected me_avg, biae_latent, rb1, or rb2"
            ))),
        }
    }

    /// The architecture this tap reads from.
    pub fn arch(&self) -> Arch {
        match self {
            FeatureTap::MeAvg => Arch::Me,
            FeatureTap::BiaeLatent => Arch::Biae,
            FeatureTap::Rb1 | FeatureTap::Rb2 => Arch::Mrn,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvConfig {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl Default for ConvConfig {
    fn default() -> Self {
        ConvConfig { filters: 8, kernel: 3, stride: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub lstm_size: usize,
    pub latent_dim: usize,
    pub fusion_dim: usize,
    /// Fixed at 2; the pipeline taps exactly rb1 and rb2.
    pub n_residual_blocks: usize,
    pub head_hidden: usize,
    pub n_classes: usize,
    pub conv: ConvConfig,
    /// Weight of the text reconstruction term in the autoencoder loss.
    pub recon_text_weight: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lstm_size: 256,
            latent_dim: 256,
            fusion_dim: 256,
            n_residual_blocks: 2,
            head_hidden: 128,
            n_classes: 3,
            conv: ConvConfig::default(),
            recon_text_weight: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [
            self.lstm_size,
            self.latent_dim,
            self.fusion_dim,
            self.head_hidden,
            self.conv.filters,
            self.conv.kernel,
            self.conv.stride,
        ];
        if widths.contains(&0) {
            return Err(Error::config("model widths must be positive"));
        }
        if self.n_classes < 2 {
            return Err(Error::config("model needs at least two classes"));
        }
        if self.n_residual_blocks != 2 {
            return Err(Error::config(format!(
                "n_residual_blocks is fixed at 2 (rb1 and rb2 taps); got {}",
                self.n_residual_blocks
            )));
        }
        if !self.recon_text_weight.is_finite() || self.recon_text_weight < 0.0 {
            return Err(Error::config(
                "recon_text_weight must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
    pub lr: f64,
}

impl TrainConfig {
    /// Defaults with an explicit seed; there is no seedless constructor.
    pub fn new(seed: u64) -> Self {
        TrainConfig { max_epochs: 50, batch_size: 32, patience: 5, seed, lr: 1e-3 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::config(
                "max_epochs, batch_size, and patience must be positive",
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Encoded, padded, and normalized samples ready for an extractor: token
/// ids `n x seq_len`, pixels `n x h x w x 3` in `[0, 1]`, labels, and ids.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    seq_len: usize,
    image_height: usize,
    image_width: usize,
    token_ids: Vec<usize>,
    images: Vec<f64>,
    labels: Vec<usize>,
    ids: Vec<String>,
}

impl PreparedDataset {
    pub fn new(
        seq_len: usize,
        image_height: usize,
        image_width: usize,
        token_ids: Vec<usize>,
        images: Vec<f64>,
        labels: Vec<usize>,
        ids: Vec<String>,
    ) -> Result<Self> {
        if seq_len == 0 || image_height == 0 || image_width == 0 {
            return Err(Error::contract("dataset extents must be positive"));
        }
        let n = labels.len();
        if n == 0 {
            return Err(Error::contract("dataset needs at least one sample"));
        }
        if ids.len() != n {
            return Err(Error::contract(format!(
                "{} ids for {n} samples",
                ids.len()
            )));
        }
        if token_ids.len() != n * seq_len {
            return Err(Error::contract(format!(
                "{} token ids do not fill {n} sequences of length {seq_len}",
                token_ids.len()
            )));
        }
        let px = image_height * image_width * CHANNELS;
        if images.len() != n * px {
            return Err(Error::contract(format!(
                "{} pixel values do not fill {n} images of {px} values",
                images.len()
            )));
        }
        if !images.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(Error::contract("image values must lie in [0, 1]"));
        }
        Ok(PreparedDataset {
            seq_len,
            image_height,
            image_width,
            token_ids,
            images,
            labels,
            ids,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn token_row(&self, i: usize) -> &[usize] {
        &self.token_ids[i * self.seq_len..(i + 1) * self.seq_len]
    }

    pub fn image_row(&self, i: usize) -> &[f64] {
        let px = self.image_height * self.image_width * CHANNELS;
        &self.images[i * px..(i + 1) * px]
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut token_ids = Vec::with_capacity(indices.len() * self.seq_len);
        let mut images = Vec::with_capacity(
            indices.len() * self.image_height * self.image_width * CHANNELS,
        );
        let mut labels = Vec::with_capacity(indices.len());
        let mut ids = Vec::with_capacity(indices.len());
        for &ix in indices {
            if ix >= self.n_samples() {
                return Err(Error::contract(format!(
                    "subset index {ix} out of range for {} samples",
                    self.n_samples()
                )));
            }
            token_ids.extend_from_slice(self.token_row(ix));
            images.extend_from_slice(self.image_row(ix));
            labels.push(self.labels[ix]);
            ids.push(self.ids[ix].clone());
        }
        PreparedDataset::new(
            self.seq_len,
            self.image_height,
            self.image_width,
            token_ids,
            images,
            labels,
            ids,
        )
    }
}

/// A feature extractor: architecture, configuration, frozen embedding
/// tables, and trainable parameters.
#[derive(Debug, Clone)]
pub struct Extractor {
    arch: Arch,
    config: ModelConfig,
    tables: Vec<EmbeddingTable>,
    seq_len: usize,
    image_height: usize,
    image_width: usize,
    pub params: ParamSet,
}

impl Extractor {
    /// `tables` are frozen: they are read during the forward pass but never
    /// appear among the trainable parameters. The two-branch text model
    /// takes two tables; the other architectures take one.
    pub fn new(
        arch: Arch,
        config: &ModelConfig,
        tables: Vec<EmbeddingTable>,
        seq_len: usize,
        image_height: usize,
        image_width: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if tables.len() != arch.n_tables() {
            return Err(Error::config(format!(
                "{} takes {} embedding tables; got {}",
                arch.as_str(),
                arch.n_tables(),
                tables.len()
            )));
        }
        if seq_len == 0 {
            return Err(Error::config("sequence length must be positive"));
        }
        if arch.uses_images()
            && (image_height < config.conv.kernel || image_width < config.conv.kernel)
        {
            return Err(Error::config(format!(
                "{}x{} images are smaller than the {}x{} convolution kernel",
                image_height, image_width, config.conv.kernel, config.conv.kernel
            )));
        }
        let table_dims: Vec<usize> = tables.iter().map(|t| t.dim).collect();
        let params = init_params(
            arch,
            config,
            &table_dims,
            seq_len,
            image_height,
            image_width,
            seed,
        )?;
        Ok(Extractor {
            arch,
            config: config.clone(),
            tables,
            seq_len,
            image_height,
            image_width,
            params,
        })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tables(&self) -> &[EmbeddingTable] {
        &self.tables
    }

    fn batch_data(&self, data: &PreparedDataset, indices: &[usize]) -> Result<BatchData> {
        if indices.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        for &ix in indices {
            if ix >= data.n_samples() {
                return Err(Error::contract(format!(
                    "batch index {ix} out of range for {} samples",
                    data.n_samples()
                )));
            }
        }
        if self.arch == Arch::Biae && data.seq_len != self.seq_len {
            return Err(Error::contract(format!(
                "autoencoder was built for sequence length {}; dataset has {}",
                self.seq_len, data.seq_len
            )));
        }
        if self.arch.uses_images()
            && (data.image_height != self.image_height || data.image_width != self.image_width)
        {
            return Err(Error::contract(format!(
                "extractor was built for {}x{} images; dataset has {}x{}",
                self.image_height, self.image_width, data.image_height, data.image_width
            )));
        }
        let steps_a = gather_steps(&self.tables[0], data, indices)?;
        let steps_b = if self.arch == Arch::Me {
            gather_steps(&self.tables[1], data, indices)?
        } else {
            Vec::new()
        };
        let masks = gather_masks(data, indices, self.config.lstm_size)?;
        let text_flat = if self.arch == Arch::Biae {
            Some(gather_text_flat(&self.tables[0], data, indices)?)
        } else {
            None
        };
        let images = if self.arch.uses_images() {
            Some(gather_images(data, indices)?)
        } else {
            None
        };
        let labels = indices.iter().map(|&ix| data.labels[ix]).collect();
        Ok(BatchData {
            steps_a,
            steps_b,
            masks,
            text_flat,
            images,
            labels,
        })
    }

    fn run_forward(
        &self,
        g: &mut Graph,
        data: &PreparedDataset,
        indices: &[usize],
        want_loss: bool,
    ) -> Result<ForwardPass> {
        let named = bind_named(&self.params, g).1;
        let batch = self.batch_data(data, indices)?;
        forward(g, self.arch, &self.config, &named, &batch, want_loss)
    }

    /// Mean loss over the given samples, without recording gradients.
    pub fn loss_for(&self, data: &PreparedDataset, indices: &[usize]) -> Result<f64> {
        let mut g = Graph::inference();
        let fp = self.run_forward(&mut g, data, indices, true)?;
        Ok(g.data(fp.loss.expect("loss requested"))[0])
    }

    /// Mean loss over the given samples, leaving fresh gradients on the
    /// parameters.
    pub fn loss_and_gradients(
        &mut self,
        data: &PreparedDataset,
        indices: &[usize],
    ) -> Result<f64> {
        let mut g = Graph::new();
        let (bound, named) = bind_named(&self.params, &mut g);
        let batch = self.batch_data(data, indices)?;
        let fp = forward(&mut g, self.arch, &self.config, &named, &batch, true)?;
        let loss = fp.loss.expect("loss requested");
        let value = g.data(loss)[0];
        g.backward(loss)?;
        self.params.harvest(&g, &bound)?;
        Ok(value)
    }

    /// Class probabilities, one row per sample in dataset order.
    pub fn class_probs(&self, data: &PreparedDataset) -> Result<Vec<Vec<f64>>> {
        if self.arch == Arch::Biae {
            return Err(Error::contract(
                "the autoencoder has no classification head",
            ));
        }
        let all: Vec<usize> = (0..data.n_samples()).collect();
        let mut rows = Vec::with_capacity(data.n_samples());
        for chunk in all.chunks(EXTRACT_CHUNK) {
            let mut g = Graph::inference();
            let fp = self.run_forward(&mut g, data, chunk, false)?;
            let probs = fp.probs.expect("classification head");
            let width = g.shape(probs)[1];
            let values = g.data(probs);
            for i in 0..chunk.len() {
                rows.push(values[i * width..(i + 1) * width].to_vec());
            }
        }
        Ok(rows)
    }

    /// Tapped features for the whole dataset, rows in dataset order with
    /// labels and ids carried alongside.
    pub fn extract(&self, data: &PreparedDataset, tap: FeatureTap) -> Result<FeatureMatrix> {
        if tap.arch() != self.arch {
            return Err(Error::contract(format!(
                "tap {} reads from {}, but this extractor is {}",
                tap.as_str(),
                tap.arch().as_str(),
                self.arch.as_str()
            )));
        }
        let all: Vec<usize> = (0..data.n_samples()).collect();
        let mut values = Vec::new();
        let mut width = 0;
        for chunk in all.chunks(EXTRACT_CHUNK) {
            let mut g = Graph::inference();
            let fp = self.run_forward(&mut g, data, chunk, false)?;
            let (_, node) = fp
                .taps
                .iter()
                .find(|(t, _)| *t == tap)
                .copied()
                .expect("tap produced by forward pass");
            width = g.shape(node)[1];
            values.extend_from_slice(g.data(node));
        }
        FeatureMatrix::new(width, values, data.labels.clone(), data.ids.clone())
    }

    /// Trains with early stopping on computed validation loss and restores
    /// the best-epoch parameters.
    pub fn train(
        &mut self,
        train: &PreparedDataset,
        val: &PreparedDataset,
        tc: &TrainConfig,
    ) -> Result<TrainLog> {
        train::run_training(self, train, val, tc, &ValLossSource::Computed)
    }

    /// As `train`, but the validation loss per epoch may be scripted.
    pub fn train_with(
        &mut self,
        train: &PreparedDataset,
        val: &PreparedDataset,
        tc: &TrainConfig,
        source: &ValLossSource,
    ) -> Result<TrainLog> {
        train::run_training(self, train, val, tc, source)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(path, &self.params)
    }

    /// Replaces the parameters with a checkpoint, which must hold exactly
    /// the names and shapes of this architecture.
    pub fn load_params(&mut self, path: &Path) -> Result<()> {
        let loaded = load_checkpoint(path)?;
        if loaded.len() != self.params.len() {
            return Err(Error::contract(format!(
                "checkpoint holds {} parameters; architecture has {}",
                loaded.len(),
                self.params.len()
            )));
        }
        for p in self.params.iter() {
            match loaded.get(&p.name) {
                Some(t) if t.shape() == p.value.shape() => {}
                Some(t) => {
                    return Err(Error::contract(format!(
                        "checkpoint parameter {} has shape {:?}; expected {:?}",
                        p.name,
                        t.shape(),
                        p.value.shape()
                    )));
                }
                None => {
                    return Err(Error::contract(format!(
                        "checkpoint is missing parameter {}",
                        p.name
                    )));
                }
            }
        }
        self.params = loaded;
        Ok(())
    }
}

fn gather_steps(
    table: &EmbeddingTable,
    data: &PreparedDataset,
    indices: &[usize],
) -> Result<Vec<Tensor>> {
    let n = indices.len();
    let l = data.seq_len;
    let mut steps = Vec::with_capacity(l);
    for t in 0..l {
        let mut buf = Vec::with_capacity(n * table.dim);
        for &ix in indices {
            let id = data.token_ids[ix * l + t];
            if id >= table.vocab_size() {
                return Err(Error::contract(format!(
                    "token id {id} outside embedding table with {} rows",
                    table.vocab_size()
                )));
            }
            buf.extend_from_slice(table.row(id));
        }
        steps.push(Tensor::new(vec![n, table.dim], buf)?);
    }
    Ok(steps)
}

fn gather_masks(
    data: &PreparedDataset,
    indices: &[usize],
    hidden: usize,
) -> Result<Vec<(Tensor, Tensor)>> {
    let n = indices.len();
    let l = data.seq_len;
    let mut masks = Vec::with_capacity(l);
    for t in 0..l {
        let mut keep = Vec::with_capacity(n * hidden);
        let mut skip = Vec::with_capacity(n * hidden);
        for &ix in indices {
            let on = data.token_ids[ix * l + t] != PAD_ID;
            keep.extend(std::iter::repeat_n(f64::from(u8::from(on)), hidden));
            skip.extend(std::iter::repeat_n(f64::from(u8::from(!on)), hidden));
        }
        masks.push((
            Tensor::new(vec![n, hidden], keep)?,
            Tensor::new(vec![n, hidden], skip)?,
        ));
    }
    Ok(masks)
}

fn gather_text_flat(
    table: &EmbeddingTable,
    data: &PreparedDataset,
    indices: &[usize],
) -> Result<Tensor> {
    let n = indices.len();
    let mut buf = Vec::with_capacity(n * data.seq_len * table.dim);
    for &ix in indices {
        buf.extend(table.sequence_matrix(data.token_row(ix))?);
    }
    Tensor::new(vec![n, data.seq_len * table.dim], buf)
}

fn gather_images(data: &PreparedDataset, indices: &[usize]) -> Result<Tensor> {
    let n = indices.len();
    let px = data.image_height * data.image_width * CHANNELS;
    let mut buf = Vec::with_capacity(n * px);
    for &ix in indices {
        buf.extend_from_slice(data.image_row(ix));
    }
    Tensor::new(
        vec![n, data.image_height, data.image_width, CHANNELS],
        buf,
    )
}
