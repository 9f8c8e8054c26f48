//! LSTM layer: parameter registration and graph unrolling. Each gate has
//! its own input weights, recurrent weights, and bias. PAD timesteps are
//! masked so the hidden and cell states pass through unchanged.

use std::collections::HashMap;

use rand::Rng;

use crate::error::Result;
use crate::tensor::{uniform_init, Graph, NodeId, ParamSet, Tensor};

/// Gate order: input, forget, output, candidate.
const GATES: [&str; 4] = ["i", "f", "o", "g"];

pub(crate) fn add_lstm_params(
    params: &mut ParamSet,
    prefix: &str,
    in_dim: usize,
    hidden: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    for gate in GATES {
        params.add(
            format!("{prefix}.w_x{gate}"),
            uniform_init(vec![in_dim, hidden], in_dim, rng)?,
        )?;
        params.add(
            format!("{prefix}.w_h{gate}"),
            uniform_init(vec![hidden, hidden], hidden, rng)?,
        )?;
        // Biases share their layer's fan-in bound.
        params.add(format!("{prefix}.b_{gate}"), uniform_init(vec![hidden], hidden, rng)?)?;
    }
    Ok(())
}

pub(crate) struct LstmIds {
    w_x: [NodeId; 4],
    w_h: [NodeId; 4],
    b: [NodeId; 4],
}

pub(crate) fn lstm_ids(named: &HashMap<&str, NodeId>, prefix: &str) -> LstmIds {
    let pick = |suffix: String| {
        *named
            .get(suffix.as_str())
            .unwrap_or_else(|| panic!("missing lstm parameter {suffix}"))
    };
    let mut w_x = [NodeId::default(); 4];
    let mut w_h = [NodeId::default(); 4];
    let mut b = [NodeId::default(); 4];
    for (k, gate) in GATES.iter().enumerate() {
        w_x[k] = pick(format!("{prefix}.w_x{gate}"));
        w_h[k] = pick(format!("{prefix}.w_h{gate}"));
        b[k] = pick(format!("{prefix}.b_{gate}"));
    }
    LstmIds { w_x, w_h, b }
}

/// Unrolls the recurrence over `steps` (each `[n, in_dim]`) and returns the
/// final hidden state `[n, hidden]`. `masks` holds per-step `(keep, skip)`
/// indicator tensors of shape `[n, hidden]`; a masked (PAD) step leaves
/// both the cell and hidden state of that row untouched.
pub(crate) fn unroll(
    g: &mut Graph,
    ids: &LstmIds,
    steps: &[Tensor],
    masks: &[(Tensor, Tensor)],
    hidden: usize,
) -> Result<NodeId> {
    let n = steps[0].shape()[0];
    let mut h = g.constant(Tensor::zeros(vec![n, hidden]));
    let mut c = h;
    for (x_t, (keep_t, skip_t)) in steps.iter().zip(masks) {
        let x = g.constant(x_t.clone());
        let mut gates = [NodeId::default(); 4];
        for (k, gate) in gates.iter_mut().enumerate() {
            let from_x = g.matmul(x, ids.w_x[k])?;
            let from_h = g.matmul(h, ids.w_h[k])?;
            let pre = g.add(from_x, from_h)?;
            *gate = g.add_bias(pre, ids.b[k])?;
        }
        let i = g.sigmoid(gates[0])?;
        let f = g.sigmoid(gates[1])?;
        let o = g.sigmoid(gates[2])?;
        let cand = g.tanh(gates[3])?;
        let carried = g.mul(f, c)?;
        let written = g.mul(i, cand)?;
        let c_new = g.add(carried, written)?;
        let c_act = g.tanh(c_new)?;
        let h_new = g.mul(o, c_act)?;
        let keep = g.constant(keep_t.clone());
        let skip = g.constant(skip_t.clone());
        let c_kept = g.mul(keep, c_new)?;
        let c_skipped = g.mul(skip, c)?;
        c = g.add(c_kept, c_skipped)?;
        let h_kept = g.mul(keep, h_new)?;
        let h_skipped = g.mul(skip, h)?;
        h = g.add(h_kept, h_skipped)?;
    }
    Ok(h)
}
