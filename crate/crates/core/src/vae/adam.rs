//! Adam optimizer with standard bias correction.

use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment accumulators for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamSlot {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamSlot {
    pub fn zeros(len: usize) -> AdamSlot {
        AdamSlot {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// Optimizer state: one slot per parameter tensor plus a step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub slots: Vec<AdamSlot>,
}

impl AdamState {
    pub fn new(tensor_lens: &[usize]) -> AdamState {
        AdamState {
            step: 0,
            slots: tensor_lens.iter().map(|n| AdamSlot::zeros(*n)).collect(),
        }
    }

    /// Advance the shared step counter; call once per optimizer update.
    pub fn next_step(&mut self) -> u64 {
        self.step += 1;
        self.step
    }
}

/// Apply one bias-corrected Adam update to a flat parameter tensor.
///
/// `step` is the post-increment step counter (1 on the first update).
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    slot: &mut AdamSlot,
    step: u64,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != slot.m.len() {
        return Err(Error::InvalidInput(format!(
            "adam shape mismatch: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            slot.m.len()
        )));
    }
    let bc1 = 1.0 - BETA1.powi(step as i32);
    let bc2 = 1.0 - BETA2.powi(step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        slot.m[i] = BETA1 * slot.m[i] + (1.0 - BETA1) * g;
        slot.v[i] = BETA2 * slot.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = slot.m[i] / bc1;
        let v_hat = slot.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}
