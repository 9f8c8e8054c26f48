//! Mini-batch training with early stopping on validation loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::{Extractor, PreparedDataset, TrainConfig};
use crate::tensor::{AdamConfig, AdamState};

/// Where each epoch's validation loss comes from. `Scripted` substitutes a
/// fixed sequence for the computed loss, which makes the early-stopping
/// bookkeeping testable in isolation.
#[derive(Debug, Clone)]
pub enum ValLossSource {
    Computed,
    Scripted(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Mean per-sample training loss of each epoch, in epoch order.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Last epoch that ran (1-based).
    pub stopped_epoch: usize,
    /// Epoch whose parameters were restored (1-based, minimal val loss).
    pub best_epoch: usize,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for (i, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            out.push_str(&format!("{},{t},{v}\n", i + 1));
        }
        out
    }
}

pub(crate) fn run_training(
    ex: &mut Extractor,
    train: &PreparedDataset,
    val: &PreparedDataset,
    tc: &TrainConfig,
    source: &ValLossSource,
) -> Result<TrainLog> {
    tc.validate()?;
    if let ValLossSource::Scripted(vals) = source {
        if vals.len() < tc.max_epochs {
            return Err(Error::contract(format!(
                "scripted validation losses cover {} epochs but max_epochs is {}",
                vals.len(),
                tc.max_epochs
            )));
        }
    }
    let n = train.n_samples();
    let val_indices: Vec<usize> = (0..val.n_samples()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut adam = AdamState::new(AdamConfig { lr: tc.lr, ..AdamConfig::default() }, &ex.params);

    let mut train_losses = Vec::new();
    let mut val_losses = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = None;
    let mut streak = 0usize;
    let mut stopped_epoch = 0usize;

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=tc.max_epochs {
        stopped_epoch = epoch;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(tc.batch_size) {
            let loss = ex.loss_and_gradients(train, chunk)?;
            adam.step(&mut ex.params)?;
            loss_sum += loss * chunk.len() as f64;
        }
        train_losses.push(loss_sum / n as f64);
        let val_loss = match source {
            ValLossSource::Computed => ex.loss_for(val, &val_indices)?,
            ValLossSource::Scripted(vals) => vals[epoch - 1],
        };
        val_losses.push(val_loss);
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = Some(ex.params.clone());
            streak = 0;
        } else {
            streak += 1;
            if streak == tc.patience {
                break;
            }
        }
    }
    if let Some(best) = best_params {
        ex.params = best;
    }
    Ok(TrainLog {
        train_loss: train_losses,
        val_loss: val_losses,
        stopped_epoch,
        best_epoch,
    })
}
