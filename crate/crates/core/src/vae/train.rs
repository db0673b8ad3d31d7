//! Minibatch training of the β-VAE and latent extraction.

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scenario::{Dataset, Trajectory};

use super::adam::{adam_step, AdamState};
use super::mlp::{Dense, MlpStack};
use super::sample::{prepare_sample, query_candidates, Normalizer};
use super::{forward_backward, Batch, VaeModel};

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// KL weight.
    pub beta: f64,
    /// Initial learning rate.
    pub lr0: f64,
    /// Multiplicative decay factor.
    pub decay: f64,
    /// Epochs between decay steps.
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta: 1e-3,
            lr0: 1e-3,
            decay: 0.99,
            decay_every: 200,
            epochs: 2000,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidConfig("beta must be >= 0".into()));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::InvalidConfig("lr0 must be > 0".into()));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::InvalidConfig("decay must be in (0, 1]".into()));
        }
        if self.decay_every == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "decay_every, epochs and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 * self.decay.powi((epoch / self.decay_every) as i32)
    }
}

/// Per-epoch mean loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub mse: f64,
    pub kl: f64,
    pub total: f64,
}

pub type TrainHistory = Vec<EpochStats>;

/// Train on the dataset's training split.
///
/// Every epoch shuffles the training trajectories and draws a fresh odd
/// query frame per trajectory. The learning rate decays by `decay` every
/// `decay_every` epochs. Fully deterministic for a given (dataset, config).
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(VaeModel, TrainHistory)> {
    config.validate()?;
    let trajs: Vec<&Trajectory> = dataset.train().collect();
    if trajs.is_empty() {
        return Err(Error::InvalidInput("empty training split".into()));
    }
    let num_frames = trajs[0].len();
    if trajs.iter().any(|t| t.len() != num_frames) {
        return Err(Error::InvalidInput(
            "training trajectories differ in frame count".into(),
        ));
    }

    let norm = Normalizer::fit(&trajs)?;
    let dim = norm.input_dim();
    let queries = query_candidates(num_frames);

    // Per-trajectory normalized even-frame prefix and per-query targets.
    let mut prefixes: Vec<Vec<f64>> = Vec::with_capacity(trajs.len());
    let mut targets: Vec<Vec<(f64, f64)>> = Vec::with_capacity(trajs.len());
    for traj in &trajs {
        let sample = prepare_sample(traj, queries[0])?;
        let normalized = norm.normalize_input(&sample.input)?;
        prefixes.push(normalized[..dim - 1].to_vec());
        targets.push(
            queries
                .iter()
                .map(|q| norm.normalize_target((traj.xs[*q], traj.ys[*q])))
                .collect(),
        );
    }
    let query_times: Vec<f64> = queries
        .iter()
        .map(|q| norm.normalize_time(trajs[0].times[*q]))
        .collect();

    let mut init_rng = rng::stream(config.seed, "init");
    let mut model = VaeModel::init(dim, norm, &mut init_rng);
    let mut adam = AdamState::new(&model.tensor_lens());
    let mut train_rng = rng::stream(config.seed, "training");

    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..trajs.len()).collect();
    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        order.shuffle(&mut train_rng);
        let mut sums = (0.0, 0.0, 0.0);
        let mut count = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let b = chunk.len();
            let mut x = Array2::zeros((b, dim));
            let mut y = Array2::zeros((b, 2));
            let mut eta = Array2::zeros((b, 3));
            for (row, &ti) in chunk.iter().enumerate() {
                let qi = train_rng.gen_range(0..queries.len());
                for (col, v) in prefixes[ti].iter().enumerate() {
                    x[[row, col]] = *v;
                }
                x[[row, dim - 1]] = query_times[qi];
                let t = targets[ti][qi];
                y[[row, 0]] = t.0;
                y[[row, 1]] = t.1;
                for k in 0..3 {
                    eta[[row, k]] = StandardNormal.sample(&mut train_rng);
                }
            }
            let batch = Batch { x, y, eta };
            let (terms, grads) = forward_backward(&model, &batch, config.beta)?;
            if !terms.total.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss at epoch {epoch} (mse {}, kl {})",
                    terms.mse, terms.kl
                )));
            }
            let step = adam.next_step();
            let tensors = model.param_tensors_mut();
            let grad_tensors = grads.tensors();
            for ((params, grad), slot) in tensors
                .into_iter()
                .zip(grad_tensors)
                .zip(adam.slots.iter_mut())
            {
                adam_step(params, grad, slot, step, lr)?;
            }
            sums.0 += terms.mse * b as f64;
            sums.1 += terms.kl * b as f64;
            sums.2 += terms.total * b as f64;
            count += b;
        }
        history.push(EpochStats {
            epoch,
            lr,
            mse: sums.0 / count as f64,
            kl: sums.1 / count as f64,
            total: sums.2 / count as f64,
        });
    }
    Ok((model, history))
}

/// Encoder mean latents per trajectory, in iteration order.
pub fn extract_latents<'a>(
    model: &VaeModel,
    trajs: impl Iterator<Item = &'a Trajectory>,
) -> Result<Vec<[f64; 3]>> {
    trajs.map(|t| model.infer_latents(t)).collect()
}

/// Serialized model: layer dims, row-major weights, normalization and config.
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub input_dim: usize,
    pub norm: Normalizer,
    pub encoder: Vec<LayerData>,
    pub decoder: Vec<LayerData>,
}

#[derive(Serialize, Deserialize)]
pub struct LayerData {
    pub input: usize,
    pub output: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

fn stack_to_layers(stack: &MlpStack) -> Vec<LayerData> {
    stack
        .layers
        .iter()
        .map(|l| LayerData {
            input: l.input_dim(),
            output: l.output_dim(),
            w: l.w.iter().copied().collect(),
            b: l.b.to_vec(),
        })
        .collect()
}

fn layers_to_stack(layers: &[LayerData]) -> Result<MlpStack> {
    let mut out = Vec::with_capacity(layers.len());
    for l in layers {
        if l.w.len() != l.input * l.output || l.b.len() != l.output {
            return Err(Error::InvalidInput("checkpoint layer shape mismatch".into()));
        }
        out.push(Dense {
            w: Array2::from_shape_vec((l.output, l.input), l.w.clone())
                .map_err(|e| Error::InvalidInput(e.to_string()))?,
            b: l.b.clone().into(),
        });
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("checkpoint has empty stack".into()));
    }
    Ok(MlpStack { layers: out })
}

impl Checkpoint {
    pub fn from_model(model: &VaeModel, config: &TrainConfig) -> Checkpoint {
        Checkpoint {
            config: config.clone(),
            input_dim: model.input_dim(),
            norm: model.norm.clone(),
            encoder: stack_to_layers(&model.encoder),
            decoder: stack_to_layers(&model.decoder),
        }
    }

    pub fn to_model(&self) -> Result<(VaeModel, TrainConfig)> {
        let model = VaeModel {
            encoder: layers_to_stack(&self.encoder)?,
            decoder: layers_to_stack(&self.decoder)?,
            norm: self.norm.clone(),
        };
        if model.input_dim() != self.input_dim || model.norm.input_dim() != self.input_dim {
            return Err(Error::InvalidInput("checkpoint input_dim mismatch".into()));
        }
        Ok((model, self.config.clone()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut w, self)?;
        use std::io::Write as _;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}
