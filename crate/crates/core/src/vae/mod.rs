//! β-VAE over trajectory position vectors.
//!
//! The encoder condenses a trajectory's even-frame positions (plus the query
//! time) into 3 latent nodes; the decoder reconstructs the object location
//! at the query time from the latents alone. Training against reconstruction
//! MSE plus a β-weighted KL term drives the latents toward disentangled,
//! physically meaningful parameters.

pub mod adam;
pub mod mlp;
pub mod sample;
pub mod train;

use ndarray::{s, Array2, Axis};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scenario::Trajectory;

pub use adam::{adam_step, AdamSlot, AdamState};
pub use mlp::{Dense, MlpStack, StackGrads};
pub use sample::{prepare_sample, Normalizer, PositionSample};
pub use train::{extract_latents, train, Checkpoint, EpochStats, TrainConfig, TrainHistory};

pub const LATENT_DIM: usize = 3;
pub const HIDDEN_WIDTH: usize = 256;
/// Dense layers per stack.
pub const STACK_DEPTH: usize = 6;

/// Encoder/decoder stacks plus frozen normalization statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct VaeModel {
    pub encoder: MlpStack,
    pub decoder: MlpStack,
    pub norm: Normalizer,
}

/// Loss decomposition of one forward pass (normalized units).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossTerms {
    pub mse: f64,
    pub kl: f64,
    pub total: f64,
}

/// Gradients for every weight and bias of both stacks.
#[derive(Clone, Debug, PartialEq)]
pub struct VaeGrads {
    pub encoder: StackGrads,
    pub decoder: StackGrads,
}

/// A normalized minibatch: inputs, targets and reparameterization noise.
pub struct Batch {
    /// B x D normalized input vectors.
    pub x: Array2<f64>,
    /// B x 2 normalized targets.
    pub y: Array2<f64>,
    /// B x 3 standard-normal draws, treated as constants in backward.
    pub eta: Array2<f64>,
}

impl VaeModel {
    /// Standard architecture for a given input width: six 256-wide layers
    /// per stack, 6 encoder outputs (3 means + 3 log-variances), decoder
    /// over `[z1, z2, z3, t_q]`.
    pub fn init(input_dim: usize, norm: Normalizer, rng: &mut Rng) -> VaeModel {
        let mut enc_dims = vec![input_dim];
        let mut dec_dims = vec![LATENT_DIM + 1];
        for _ in 0..STACK_DEPTH - 1 {
            enc_dims.push(HIDDEN_WIDTH);
            dec_dims.push(HIDDEN_WIDTH);
        }
        enc_dims.push(2 * LATENT_DIM);
        dec_dims.push(2);
        VaeModel {
            encoder: MlpStack::init(&enc_dims, rng),
            decoder: MlpStack::init(&dec_dims, rng),
            norm,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Parameter tensors in canonical (encoder, decoder) x (w, b) order.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in self
            .encoder
            .layers
            .iter_mut()
            .chain(self.decoder.layers.iter_mut())
        {
            out.push(layer.w.as_slice_mut().expect("contiguous"));
            out.push(layer.b.as_slice_mut().expect("contiguous"));
        }
        out
    }

    pub fn tensor_lens(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for layer in self.encoder.layers.iter().chain(self.decoder.layers.iter()) {
            out.push(layer.w.len());
            out.push(layer.b.len());
        }
        out
    }

    /// Encoder mean latents for one trajectory at the canonical query
    /// (odd frame 1); deterministic, no sampling.
    pub fn infer_latents(&self, traj: &Trajectory) -> Result<[f64; 3]> {
        let sample = prepare_sample(traj, 1)?;
        let v = self.norm.normalize_input(&sample.input)?;
        let (mu, _) = encode(self, &v)?;
        Ok(mu)
    }
}

impl VaeGrads {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for (w, b) in self
            .encoder
            .layers
            .iter()
            .chain(self.decoder.layers.iter())
        {
            out.push(w.as_slice().expect("contiguous"));
            out.push(b.as_slice().expect("contiguous"));
        }
        out
    }
}

/// Run the encoder on a normalized input vector, returning (μ, log σ²).
pub fn encode(model: &VaeModel, v: &[f64]) -> Result<([f64; 3], [f64; 3])> {
    model.encoder.check_input(v.len())?;
    let out = model.encoder.forward_one(v);
    Ok((
        [out[0], out[1], out[2]],
        [out[3], out[4], out[5]],
    ))
}

/// Sample z = μ + exp(logvar / 2) ⊙ η with η ~ N(0, I).
pub fn reparameterize(mu: &[f64; 3], logvar: &[f64; 3], rng: &mut Rng) -> [f64; 3] {
    let mut z = [0.0; 3];
    for i in 0..3 {
        let eta: f64 = StandardNormal.sample(rng);
        z[i] = mu[i] + (logvar[i] / 2.0).exp() * eta;
    }
    z
}

/// Run the decoder on latents plus a query time (seconds); the output is
/// de-normalized back to pixels.
pub fn decode(model: &VaeModel, z: &[f64; 3], t_q: f64) -> (f64, f64) {
    let t = model.norm.normalize_time(t_q);
    let out = model.decoder.forward_one(&[z[0], z[1], z[2], t]);
    model.norm.denormalize_target((out[0], out[1]))
}

/// KL divergence of N(μ, σ²) from the unit Gaussian prior, summed over nodes.
pub fn kl_divergence(mu: &[f64; 3], logvar: &[f64; 3]) -> f64 {
    let mut kl = 0.0;
    for i in 0..3 {
        kl += -0.5 * (1.0 + logvar[i] - mu[i] * mu[i] - logvar[i].exp());
    }
    kl
}

/// L = L_mse + β L_kl with the MSE averaged over the two coordinates.
/// Prediction and target are expected in normalized units.
pub fn loss(
    pred: (f64, f64),
    target: (f64, f64),
    mu: &[f64; 3],
    logvar: &[f64; 3],
    beta: f64,
) -> LossTerms {
    let dx = pred.0 - target.0;
    let dy = pred.1 - target.1;
    let mse = (dx * dx + dy * dy) / 2.0;
    let kl = kl_divergence(mu, logvar);
    LossTerms {
        mse,
        kl,
        total: mse + beta * kl,
    }
}

/// Forward and exact reverse-mode backward over a normalized batch.
///
/// Returns batch-mean loss terms and gradients of the batch-mean loss.
/// The noise draws `eta` are treated as constants.
pub fn forward_backward(model: &VaeModel, batch: &Batch, beta: f64) -> Result<(LossTerms, VaeGrads)> {
    let b = batch.x.nrows();
    if b == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    model.encoder.check_input(batch.x.ncols())?;
    let inv_b = 1.0 / b as f64;

    let enc_cache = model.encoder.forward(&batch.x);
    let enc_out = enc_cache.output();
    let mu = enc_out.slice(s![.., 0..LATENT_DIM]);
    let logvar = enc_out.slice(s![.., LATENT_DIM..2 * LATENT_DIM]);
    let sigma = logvar.mapv(|v| (v / 2.0).exp());
    let z = &mu.to_owned() + &(&sigma * &batch.eta);

    let d = batch.x.ncols();
    let mut dec_in = Array2::zeros((b, LATENT_DIM + 1));
    dec_in.slice_mut(s![.., 0..LATENT_DIM]).assign(&z);
    dec_in
        .slice_mut(s![.., LATENT_DIM..LATENT_DIM + 1])
        .assign(&batch.x.slice(s![.., d - 1..d]));
    let dec_cache = model.decoder.forward(&dec_in);
    let pred = dec_cache.output();

    let diff = pred - &batch.y;
    let mse = diff.mapv(|v| v * v).sum_axis(Axis(1)).mean().expect("nonempty") / 2.0;
    let kl_per = -0.5
        * (1.0 + &logvar.to_owned() - &mu.mapv(|m| m * m) - &logvar.mapv(f64::exp))
            .sum_axis(Axis(1));
    let kl = kl_per.mean().expect("nonempty");
    let terms = LossTerms {
        mse,
        kl,
        total: mse + beta * kl,
    };

    // d(total)/d(pred) for batch-mean loss.
    let d_pred = diff.mapv(|v| v * inv_b);
    let (dec_grads, d_dec_in) = model.decoder.backward(&dec_cache, &d_pred);
    let d_z = d_dec_in.slice(s![.., 0..LATENT_DIM]);

    let d_mu = &d_z.to_owned() + &mu.mapv(|m| beta * inv_b * m);
    let d_logvar = &(&d_z.to_owned() * &batch.eta * &sigma).mapv(|v| 0.5 * v)
        + &logvar.mapv(|v| 0.5 * beta * inv_b * (v.exp() - 1.0));

    let mut d_enc_out = Array2::zeros((b, 2 * LATENT_DIM));
    d_enc_out.slice_mut(s![.., 0..LATENT_DIM]).assign(&d_mu);
    d_enc_out
        .slice_mut(s![.., LATENT_DIM..2 * LATENT_DIM])
        .assign(&d_logvar);
    let (enc_grads, _) = model.encoder.backward(&enc_cache, &d_enc_out);

    Ok((
        terms,
        VaeGrads {
            encoder: enc_grads,
            decoder: dec_grads,
        },
    ))
}

/// Exact gradients of the single-sample loss with a pinned noise draw.
pub fn backward(
    model: &VaeModel,
    input_norm: &[f64],
    target_norm: (f64, f64),
    eta: &[f64; 3],
    beta: f64,
) -> Result<(LossTerms, VaeGrads)> {
    let batch = Batch {
        x: Array2::from_shape_vec((1, input_norm.len()), input_norm.to_vec())
            .expect("row shape"),
        y: Array2::from_shape_vec((1, 2), vec![target_norm.0, target_norm.1]).expect("row shape"),
        eta: Array2::from_shape_vec((1, 3), eta.to_vec()).expect("row shape"),
    };
    forward_backward(model, &batch, beta)
}

/// Single-sample loss along the same path as [`backward`]; used by
/// finite-difference checks.
pub fn forward_loss(
    model: &VaeModel,
    input_norm: &[f64],
    target_norm: (f64, f64),
    eta: &[f64; 3],
    beta: f64,
) -> Result<LossTerms> {
    let v = input_norm;
    model.encoder.check_input(v.len())?;
    let out = model.encoder.forward_one(v);
    let mu = [out[0], out[1], out[2]];
    let logvar = [out[3], out[4], out[5]];
    let mut z = [0.0; 3];
    for i in 0..3 {
        z[i] = mu[i] + (logvar[i] / 2.0).exp() * eta[i];
    }
    let t_norm = v[v.len() - 1];
    let pred = model.decoder.forward_one(&[z[0], z[1], z[2], t_norm]);
    Ok(loss(
        (pred[0], pred[1]),
        target_norm,
        &mu,
        &logvar,
        beta,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    fn toy_norm(dim: usize) -> Normalizer {
        Normalizer {
            input_mean: vec![0.0; dim],
            input_std: vec![1.0; dim],
            target_mean: [0.0, 0.0],
            target_std: [1.0, 1.0],
        }
    }

    fn zero_model(input_dim: usize) -> VaeModel {
        VaeModel {
            encoder: MlpStack::zeros(&[input_dim, 8, 2 * LATENT_DIM]),
            decoder: MlpStack::zeros(&[LATENT_DIM + 1, 8, 2]),
            norm: toy_norm(input_dim),
        }
    }

    #[test]
    fn zero_network_encodes_to_zero() {
        let model = zero_model(5);
        let (mu, logvar) = encode(&model, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(mu, [0.0; 3]);
        assert_eq!(logvar, [0.0; 3]);
    }

    #[test]
    fn encode_rejects_length_mismatch() {
        let model = zero_model(5);
        assert!(encode(&model, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn encode_is_pure() {
        let mut rng = rng::seeded(4);
        let model = VaeModel {
            encoder: MlpStack::init(&[5, 8, 6], &mut rng),
            decoder: MlpStack::init(&[4, 8, 2], &mut rng),
            norm: toy_norm(5),
        };
        let v = [0.1, -0.2, 0.3, -0.4, 0.5];
        assert_eq!(encode(&model, &v).unwrap(), encode(&model, &v).unwrap());
    }

    #[test]
    fn single_layer_encoder_hand_check() {
        let mut model = zero_model(2);
        model.encoder = MlpStack::zeros(&[2, 6]);
        model.encoder.layers[0].w = array![
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
            [2.0, 0.0],
            [0.0, 2.0],
            [-1.0, 1.0]
        ];
        model.encoder.layers[0].b = array![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let (mu, logvar) = encode(&model, &[2.0, 3.0]).unwrap();
        assert_eq!(mu, [2.1, 3.2, 5.3]);
        assert_eq!(logvar, [4.4, 6.5, 1.6]);
    }

    #[test]
    fn reparameterize_zero_variance_returns_mean() {
        let mut rng = rng::seeded(0);
        let z = reparameterize(&[1.0, -2.0, 3.0], &[-700.0, -700.0, -700.0], &mut rng);
        assert_eq!(z, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn reparameterize_statistics() {
        let mut rng = rng::seeded(12);
        let n = 10_000;
        let mut sums = [0.0; 3];
        let mut sums2 = [0.0; 3];
        for _ in 0..n {
            let z = reparameterize(&[0.0; 3], &[0.0; 3], &mut rng);
            for i in 0..3 {
                sums[i] += z[i];
                sums2[i] += z[i] * z[i];
            }
        }
        for i in 0..3 {
            let mean = sums[i] / n as f64;
            let var = sums2[i] / n as f64 - mean * mean;
            assert!(mean.abs() < 0.05, "node {i} mean {mean}");
            assert!((var - 1.0).abs() < 0.1, "node {i} var {var}");
        }
    }

    #[test]
    fn reparameterize_is_seed_reproducible() {
        let a = reparameterize(&[0.5; 3], &[0.1; 3], &mut rng::seeded(7));
        let b = reparameterize(&[0.5; 3], &[0.1; 3], &mut rng::seeded(7));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_decoder_outputs_normalization_offset() {
        let mut model = zero_model(5);
        model.norm.target_mean = [320.0, 240.0];
        model.norm.target_std = [10.0, 20.0];
        let out = decode(&model, &[0.3, -0.7, 0.2], 0.25);
        assert_eq!(out, (320.0, 240.0));
    }

    #[test]
    fn single_layer_decoder_hand_check() {
        let mut model = zero_model(5);
        model.decoder = MlpStack::zeros(&[4, 2]);
        model.decoder.layers[0].w = array![[1.0, 2.0, 3.0, 4.0], [0.5, -0.5, 1.5, -1.5]];
        model.decoder.layers[0].b = array![1.0, -1.0];
        // Unit normalization: output = W [z, t] + b directly.
        let (x, y) = decode(&model, &[1.0, 1.0, 1.0], 2.0);
        assert_eq!(x, 1.0 + 2.0 + 3.0 + 8.0 + 1.0);
        assert_eq!(y, 0.5 - 0.5 + 1.5 - 3.0 - 1.0);
    }

    #[test]
    fn decode_is_pure() {
        let mut rng = rng::seeded(3);
        let model = VaeModel {
            encoder: MlpStack::init(&[5, 8, 6], &mut rng),
            decoder: MlpStack::init(&[4, 8, 2], &mut rng),
            norm: toy_norm(5),
        };
        let a = decode(&model, &[0.1, 0.2, 0.3], 0.5);
        let b = decode(&model, &[0.1, 0.2, 0.3], 0.5);
        assert_eq!(a, b);
    }

    #[test]
    fn loss_vanishes_at_perfect_fit() {
        let t = loss((1.0, 2.0), (1.0, 2.0), &[0.0; 3], &[0.0; 3], 0.5);
        assert_eq!(t.total, 0.0);
        assert_eq!(t.mse, 0.0);
        assert_eq!(t.kl, 0.0);
    }

    #[test]
    fn loss_beta_zero_is_pure_mse() {
        let t = loss((1.0, 0.0), (0.0, 0.0), &[1.0, 2.0, 3.0], &[0.5; 3], 0.0);
        assert_eq!(t.total, t.mse);
        assert_eq!(t.mse, 0.5);
    }

    #[test]
    fn loss_unit_mean_kl_is_half_beta() {
        // mu = (1,0,0), logvar = 0: KL = 0.5, so L = 0.5 beta at zero MSE.
        for beta in [0.1, 1.0, 3.0] {
            let t = loss((0.0, 0.0), (0.0, 0.0), &[1.0, 0.0, 0.0], &[0.0; 3], beta);
            assert!((t.total - 0.5 * beta).abs() < 1e-15);
        }
    }

    #[test]
    fn kl_nonnegative() {
        let mut rng = rng::seeded(5);
        use rand::Rng as _;
        for _ in 0..1000 {
            let mu = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let lv = [rng.gen_range(-6.0..4.0), rng.gen_range(-6.0..4.0), rng.gen_range(-6.0..4.0)];
            assert!(kl_divergence(&mu, &lv) >= -1e-12);
        }
    }

    #[test]
    fn beta_zero_removes_kl_from_gradients() {
        let mut rng = rng::seeded(9);
        let model = VaeModel {
            encoder: MlpStack::init(&[5, 8, 6], &mut rng),
            decoder: MlpStack::init(&[4, 8, 2], &mut rng),
            norm: toy_norm(5),
        };
        let v = [0.3, -0.1, 0.2, 0.4, 0.5];
        let eta = [0.1, -0.2, 0.3];
        // With a zero-loss configuration (pred == target) and beta = 0, all
        // reconstruction gradients vanish; verify decoder grads are zero
        // when prediction matches target exactly.
        let pred = {
            let out = model.encoder.forward_one(&v);
            let mu = [out[0], out[1], out[2]];
            let lv = [out[3], out[4], out[5]];
            let z: Vec<f64> = (0..3).map(|i| mu[i] + (lv[i] / 2.0).exp() * eta[i]).collect();
            model.decoder.forward_one(&[z[0], z[1], z[2], v[4]])
        };
        let (terms, grads) = backward(&model, &v, (pred[0], pred[1]), &eta, 0.0).unwrap();
        assert!(terms.total.abs() < 1e-24);
        for tensor in grads.tensors() {
            for g in tensor {
                assert!(g.abs() < 1e-12, "nonzero gradient {g}");
            }
        }
    }
}
