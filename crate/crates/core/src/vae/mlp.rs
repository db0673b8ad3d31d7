//! Dense feed-forward stacks with tanh hidden activations.
//!
//! Forward and backward passes operate on row batches so that training can
//! use matrix-matrix products; single samples are one-row batches.

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// One dense layer: `y = x W^T + b`, weights stored row-major out x in.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Dense {
        Dense {
            w: Array2::zeros((output, input)),
            b: Array1::zeros(output),
        }
    }

    /// Uniform fan-in initialization, U(-1/sqrt(in), 1/sqrt(in)).
    pub fn init(input: usize, output: usize, rng: &mut Rng) -> Dense {
        let bound = 1.0 / (input as f64).sqrt();
        let w = Array2::from_shape_fn((output, input), |_| rng.gen_range(-bound..=bound));
        let b = Array1::from_shape_fn(output, |_| rng.gen_range(-bound..=bound));
        Dense { w, b }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }
}

/// A stack of dense layers; tanh on every layer except the last.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpStack {
    pub layers: Vec<Dense>,
}

/// Per-layer gradients in the same shapes as [`MlpStack`].
#[derive(Clone, Debug, PartialEq)]
pub struct StackGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

/// Activations retained by a forward pass for use in backward.
/// `activations[0]` is the input batch, `activations[L]` the linear output.
pub struct ForwardCache {
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("forward ran")
    }
}

impl MlpStack {
    /// Build a stack with the given layer widths, e.g. `[151, 256, ..., 6]`.
    pub fn init(dims: &[usize], rng: &mut Rng) -> MlpStack {
        assert!(dims.len() >= 2, "need at least one layer");
        let layers = dims
            .windows(2)
            .map(|pair| Dense::init(pair[0], pair[1], rng))
            .collect();
        MlpStack { layers }
    }

    pub fn zeros(dims: &[usize]) -> MlpStack {
        let layers = dims
            .windows(2)
            .map(|pair| Dense::zeros(pair[0], pair[1]))
            .collect();
        MlpStack { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().expect("nonempty stack").input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty stack").output_dim()
    }

    pub fn check_input(&self, width: usize) -> Result<()> {
        if width != self.input_dim() {
            return Err(Error::InvalidInput(format!(
                "input width {width} does not match stack input {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward a batch (rows are samples), retaining activations.
    pub fn forward(&self, input: &Array2<f64>) -> ForwardCache {
        debug_assert_eq!(input.ncols(), self.input_dim());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = activations[i].dot(&layer.w.t());
            z += &layer.b;
            if i != last {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(z);
        }
        ForwardCache { activations }
    }

    /// Backward a batch given dL/d(output); returns parameter gradients and
    /// dL/d(input).
    pub fn backward(&self, cache: &ForwardCache, d_output: &Array2<f64>) -> (StackGrads, Array2<f64>) {
        let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(self.layers.len());
        let mut dz = d_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if i != self.layers.len() - 1 {
                // Hidden activation: dz currently holds dL/dA; apply tanh'.
                let a = &cache.activations[i + 1];
                dz.zip_mut_with(a, |g, a| *g *= 1.0 - a * a);
            }
            let grad_w = dz.t().dot(&cache.activations[i]);
            let grad_b = dz.sum_axis(Axis(0));
            grads.push((grad_w, grad_b));
            if i > 0 {
                dz = dz.dot(&layer.w);
            }
        }
        grads.reverse();
        (StackGrads { layers: grads }, dz.dot(&self.layers[0].w))
    }

    /// Forward a single sample without keeping caches.
    pub fn forward_one(&self, input: &[f64]) -> Vec<f64> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row");
        let cache = self.forward(&x);
        cache.output().row(0).to_vec()
    }
}

impl StackGrads {
    pub fn zeros_like(stack: &MlpStack) -> StackGrads {
        StackGrads {
            layers: stack
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.dim())))
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            w.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    #[test]
    fn single_layer_is_affine() {
        let mut stack = MlpStack::zeros(&[2, 3]);
        stack.layers[0].w = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        stack.layers[0].b = array![0.5, -0.5, 0.0];
        let out = stack.forward_one(&[1.0, -1.0]);
        assert_eq!(out, vec![1.0 - 2.0 + 0.5, 3.0 - 4.0 - 0.5, 5.0 - 6.0]);
    }

    #[test]
    fn hidden_layers_apply_tanh() {
        let mut stack = MlpStack::zeros(&[1, 1, 1]);
        stack.layers[0].w = array![[2.0]];
        stack.layers[1].w = array![[1.0]];
        let out = stack.forward_one(&[0.5]);
        assert!((out[0] - 1.0_f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn batch_matches_single() {
        let mut rng = rng::seeded(8);
        let stack = MlpStack::init(&[4, 7, 3], &mut rng);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..4).map(|j| ((i * 4 + j) as f64).sin()).collect())
            .collect();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let batch = Array2::from_shape_vec((5, 4), flat).unwrap();
        let cache = stack.forward(&batch);
        for (i, row) in rows.iter().enumerate() {
            let single = stack.forward_one(row);
            for (a, b) in cache.output().row(i).iter().zip(&single) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
