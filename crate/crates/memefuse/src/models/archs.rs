//! Parameter initialization and forward-graph construction for the three
//! extractor architectures.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::Result;
use crate::models::lstm::{add_lstm_params, lstm_ids, unroll};
use crate::models::{Arch, FeatureTap, ModelConfig};
use crate::tensor::{uniform_init, Graph, NodeId, ParamSet, Tensor};

/// Spatial output size of the valid-padding convolution.
pub(crate) fn conv_out(extent: usize, kernel: usize, stride: usize) -> usize {
    (extent - kernel) / stride + 1
}

/// One mini-batch staged as graph-ready tensors.
pub(crate) struct BatchData {
    /// Per-timestep `[n, dim]` embeddings from the first table.
    pub steps_a: Vec<Tensor>,
    /// Per-timestep embeddings from the second table (two-branch text model).
    pub steps_b: Vec<Tensor>,
    /// Per-timestep `(keep, skip)` PAD masks, `[n, lstm_size]` each.
    pub masks: Vec<(Tensor, Tensor)>,
    /// Whole embedded text `[n, seq_len * dim]`, the reconstruction target.
    pub text_flat: Option<Tensor>,
    /// Pixels `[n, h, w, 3]`.
    pub images: Option<Tensor>,
    pub labels: Vec<usize>,
}

pub(crate) struct ForwardPass {
    /// Present only when the pass was built with `want_loss`.
    pub loss: Option<NodeId>,
    pub probs: Option<NodeId>,
    pub taps: Vec<(FeatureTap, NodeId)>,
}

pub(crate) fn init_params(
    arch: Arch,
    cfg: &ModelConfig,
    table_dims: &[usize],
    seq_len: usize,
    image_height: usize,
    image_width: usize,
    seed: u64,
) -> Result<ParamSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    let h = cfg.lstm_size;
    let conv_flat = conv_out(image_height, cfg.conv.kernel, cfg.conv.stride)
        * conv_out(image_width, cfg.conv.kernel, cfg.conv.stride)
        * cfg.conv.filters;
    match arch {
        Arch::Me => {
            add_lstm_params(&mut params, "me.lstm_a", table_dims[0], h, &mut rng)?;
            add_lstm_params(&mut params, "me.lstm_b", table_dims[1], h, &mut rng)?;
            add_dense(&mut params, "me.head1", h, cfg.head_hidden, &mut rng)?;
            add_dense(&mut params, "me.head2", cfg.head_hidden, cfg.n_classes, &mut rng)?;
        }
        Arch::Biae => {
            let d = cfg.latent_dim;
            add_lstm_params(&mut params, "biae.lstm", table_dims[0], h, &mut rng)?;
            add_dense(&mut params, "biae.enc_text", h, d, &mut rng)?;
            add_conv(&mut params, "biae.conv", cfg, &mut rng)?;
            add_dense(&mut params, "biae.enc_img", conv_flat, d, &mut rng)?;
            add_dense(&mut params, "biae.fuse", 2 * d, d, &mut rng)?;
            add_dense(&mut params, "biae.dec_text", d, seq_len * table_dims[0], &mut rng)?;
            add_dense(&mut params, "biae.dec_img", d, image_height * image_width * 3, &mut rng)?;
        }
        Arch::Mrn => {
            let f = cfg.fusion_dim;
            add_lstm_params(&mut params, "mrn.lstm", table_dims[0], h, &mut rng)?;
            add_dense(&mut params, "mrn.text_proj", h, f, &mut rng)?;
            add_conv(&mut params, "mrn.conv", cfg, &mut rng)?;
            add_dense(&mut params, "mrn.img_proj", conv_flat, f, &mut rng)?;
            for block in ["mrn.block1", "mrn.block2"] {
                params.add(format!("{block}.w_t"), uniform_init(vec![f, f], f, &mut rng)?)?;
                params.add(format!("{block}.w_v"), uniform_init(vec![f, f], f, &mut rng)?)?;
            }
            add_dense(&mut params, "mrn.head", f, cfg.n_classes, &mut rng)?;
        }
    }
    Ok(params)
}

fn add_dense(
    params: &mut ParamSet,
    prefix: &str,
    in_dim: usize,
    out_dim: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    params.add(format!("{prefix}.w"), uniform_init(vec![in_dim, out_dim], in_dim, rng)?)?;
    params.add(format!("{prefix}.b"), uniform_init(vec![out_dim], in_dim, rng)?)?;
    Ok(())
}

fn add_conv(
    params: &mut ParamSet,
    prefix: &str,
    cfg: &ModelConfig,
    rng: &mut impl Rng,
) -> Result<()> {
    let k = cfg.conv.kernel;
    let fan_in = k * k * 3;
    params.add(
        format!("{prefix}.k"),
        uniform_init(vec![cfg.conv.filters, k, k, 3], fan_in, rng)?,
    )?;
    params.add(format!("{prefix}.b"), uniform_init(vec![cfg.conv.filters], fan_in, rng)?)?;
    Ok(())
}

/// Binds every parameter into the graph, returning the ids in parameter
/// order (for gradient harvest) and keyed by name (for graph building).
pub(crate) fn bind_named<'a>(
    params: &'a ParamSet,
    g: &mut Graph,
) -> (Vec<NodeId>, HashMap<&'a str, NodeId>) {
    let ids = params.bind(g);
    let named = params
        .iter()
        .map(|p| p.name.as_str())
        .zip(ids.iter().copied())
        .collect();
    (ids, named)
}

fn node(named: &HashMap<&str, NodeId>, name: &str) -> NodeId {
    *named
        .get(name)
        .unwrap_or_else(|| panic!("missing parameter {name}"))
}

fn dense(
    g: &mut Graph,
    x: NodeId,
    named: &HashMap<&str, NodeId>,
    prefix: &str,
) -> Result<NodeId> {
    let w = node(named, &format!("{prefix}.w"));
    let b = node(named, &format!("{prefix}.b"));
    let xw = g.matmul(x, w)?;
    g.add_bias(xw, b)
}

/// Convolution, flatten to `[n, features]`, optionally with ReLU between.
fn conv_flatten(
    g: &mut Graph,
    images: NodeId,
    named: &HashMap<&str, NodeId>,
    prefix: &str,
    cfg: &ModelConfig,
    relu: bool,
) -> Result<NodeId> {
    let k = node(named, &format!("{prefix}.k"));
    let b = node(named, &format!("{prefix}.b"));
    let mut out = g.conv2d(images, k, b, cfg.conv.stride)?;
    if relu {
        out = g.relu(out)?;
    }
    let s = g.shape(out).to_vec();
    g.reshape(out, vec![s[0], s[1] * s[2] * s[3]])
}

pub(crate) fn forward(
    g: &mut Graph,
    arch: Arch,
    cfg: &ModelConfig,
    named: &HashMap<&str, NodeId>,
    batch: &BatchData,
    want_loss: bool,
) -> Result<ForwardPass> {
    match arch {
        Arch::Me => me_forward(g, cfg, named, batch, want_loss),
        Arch::Biae => biae_forward(g, cfg, named, batch, want_loss),
        Arch::Mrn => mrn_forward(g, cfg, named, batch, want_loss),
    }
}

/// Two-branch text model: each frozen table feeds its own LSTM, the final
/// hidden states are averaged, and a small feed-forward head classifies.
fn me_forward(
    g: &mut Graph,
    cfg: &ModelConfig,
    named: &HashMap<&str, NodeId>,
    batch: &BatchData,
    want_loss: bool,
) -> Result<ForwardPass> {
    let lstm_a = lstm_ids(named, "me.lstm_a");
    let lstm_b = lstm_ids(named, "me.lstm_b");
    let h_a = unroll(g, &lstm_a, &batch.steps_a, &batch.masks, cfg.lstm_size)?;
    let h_b = unroll(g, &lstm_b, &batch.steps_b, &batch.masks, cfg.lstm_size)?;
    let summed = g.add(h_a, h_b)?;
    let features = g.scale(summed, 0.5)?;
    let pre = dense(g, features, named, "me.head1")?;
    let hidden = g.relu(pre)?;
    let logits = dense(g, hidden, named, "me.head2")?;
    let probs = g.softmax_rows(logits)?;
    let loss = if want_loss {
        Some(g.softmax_cross_entropy(logits, &batch.labels)?)
    } else {
        None
    };
    Ok(ForwardPass {
        loss,
        probs: Some(probs),
        taps: vec![(FeatureTap::MeAvg, features)],
    })
}

/// Bimodal autoencoder: text and image encoders meet in a joint latent,
/// from which both modalities are reconstructed. The loss is the image MSE
/// plus the weighted embedded-text MSE.
fn biae_forward(
    g: &mut Graph,
    cfg: &ModelConfig,
    named: &HashMap<&str, NodeId>,
    batch: &BatchData,
    want_loss: bool,
) -> Result<ForwardPass> {
    let lstm = lstm_ids(named, "biae.lstm");
    let h = unroll(g, &lstm, &batch.steps_a, &batch.masks, cfg.lstm_size)?;
    let e_t = dense(g, h, named, "biae.enc_text")?;

    let images = g.constant(batch.images.clone().expect("image batch"));
    let flat = conv_flatten(g, images, named, "biae.conv", cfg, true)?;
    let e_v = dense(g, flat, named, "biae.enc_img")?;

    let joint = g.concat_cols(e_t, e_v)?;
    let fused = dense(g, joint, named, "biae.fuse")?;
    let latent = g.tanh(fused)?;

    let loss = if want_loss {
        let text_target = g.constant(batch.text_flat.clone().expect("text target"));
        let text_recon = dense(g, latent, named, "biae.dec_text")?;
        let mse_text = g.mse(text_recon, text_target)?;

        let shape = g.shape(images).to_vec();
        let pixel_target =
            g.reshape(images, vec![shape[0], shape[1] * shape[2] * shape[3]])?;
        let img_pre = dense(g, latent, named, "biae.dec_img")?;
        let img_recon = g.sigmoid(img_pre)?;
        let mse_img = g.mse(img_recon, pixel_target)?;

        let weighted_text = g.scale(mse_text, cfg.recon_text_weight)?;
        Some(g.add(mse_img, weighted_text)?)
    } else {
        None
    };
    Ok(ForwardPass {
        loss,
        probs: None,
        taps: vec![(FeatureTap::BiaeLatent, latent)],
    })
}

/// Residual fusion: the projected text state is refined by two residual
/// blocks, each gating a tanh text update with a sigmoid of the projected
/// image features.
fn mrn_forward(
    g: &mut Graph,
    cfg: &ModelConfig,
    named: &HashMap<&str, NodeId>,
    batch: &BatchData,
    want_loss: bool,
) -> Result<ForwardPass> {
    let lstm = lstm_ids(named, "mrn.lstm");
    let h = unroll(g, &lstm, &batch.steps_a, &batch.masks, cfg.lstm_size)?;
    let mut x = dense(g, h, named, "mrn.text_proj")?;

    let images = g.constant(batch.images.clone().expect("image batch"));
    let flat = conv_flatten(g, images, named, "mrn.conv", cfg, false)?;
    let v = dense(g, flat, named, "mrn.img_proj")?;

    let mut taps = Vec::with_capacity(2);
    for (block, tap) in [("mrn.block1", FeatureTap::Rb1), ("mrn.block2", FeatureTap::Rb2)] {
        let xt = g.matmul(x, node(named, &format!("{block}.w_t")))?;
        let text_gate = g.tanh(xt)?;
        let vv = g.matmul(v, node(named, &format!("{block}.w_v")))?;
        let img_gate = g.sigmoid(vv)?;
        let update = g.mul(text_gate, img_gate)?;
        x = g.add(x, update)?;
        taps.push((tap, x));
    }
    let logits = dense(g, x, named, "mrn.head")?;
    let probs = g.softmax_rows(logits)?;
    let loss = if want_loss {
        Some(g.softmax_cross_entropy(logits, &batch.labels)?)
    } else {
        None
    };
    Ok(ForwardPass { loss, probs: Some(probs), taps })
}
