//! Position-vector construction and feature normalization.
//!
//! Even-numbered frames form the encoder input; odd-numbered frames are the
//! query pool. The input vector layout for `n = num_frames / 2` even frames
//! is `[y_0, y_2, ..., x_0, x_2, ..., t_q]` (length `2n + 1`), and the
//! target is the position at the odd query frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Trajectory;

/// One encoder input vector plus its reconstruction target.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionSample {
    /// Raw (unnormalized) input vector of length `2 * n_even + 1`.
    pub input: Vec<f64>,
    /// Raw pixel target `(x_q, y_q)`.
    pub target: (f64, f64),
    pub query_index: usize,
}

/// Number of even input frames used from a video of `num_frames` frames.
pub fn even_frame_count(num_frames: usize) -> usize {
    num_frames / 2
}

/// Odd frame indices that may serve as queries.
pub fn query_candidates(num_frames: usize) -> Vec<usize> {
    let n = even_frame_count(num_frames);
    (0..n).map(|i| 2 * i + 1).collect()
}

/// Input vector length for a video of `num_frames` frames.
pub fn input_dim(num_frames: usize) -> usize {
    2 * even_frame_count(num_frames) + 1
}

/// Build the position vector for one trajectory and one odd query frame.
pub fn prepare_sample(traj: &Trajectory, query_index: usize) -> Result<PositionSample> {
    let n = even_frame_count(traj.len());
    if query_index % 2 == 0 || query_index >= 2 * n {
        return Err(Error::InvalidInput(format!(
            "query index {query_index} must be odd and < {}",
            2 * n
        )));
    }
    let mut input = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        input.push(traj.ys[2 * i]);
    }
    for i in 0..n {
        input.push(traj.xs[2 * i]);
    }
    input.push(traj.times[query_index]);
    Ok(PositionSample {
        input,
        target: (traj.xs[query_index], traj.ys[query_index]),
        query_index,
    })
}

/// Recover the even-frame (ys, xs) from a packed input vector.
pub fn unpack_even_positions(input: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = (input.len() - 1) / 2;
    (input[..n].to_vec(), input[n..2 * n].to_vec())
}

/// Frozen per-feature affine statistics of the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: [f64; 2],
    pub target_std: [f64; 2],
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        sum += v;
        n += 1;
    }
    let mean = sum / n as f64;
    let mut var = 0.0;
    for v in values {
        var += (v - mean) * (v - mean);
    }
    var /= n as f64;
    let std = var.sqrt();
    // Constant features normalize to zero rather than dividing by zero.
    (mean, if std < 1e-12 { 1.0 } else { std })
}

impl Normalizer {
    /// Compute per-feature statistics over the training trajectories.
    ///
    /// The query-time feature uses the full odd-frame time pool and the
    /// target statistics cover every candidate target position.
    pub fn fit<'a>(trajs: &[&'a Trajectory]) -> Result<Normalizer> {
        let first = *trajs
            .first()
            .ok_or_else(|| Error::InvalidInput("no trajectories to normalize".into()))?;
        let num_frames = first.len();
        let n = even_frame_count(num_frames);
        let dim = 2 * n + 1;
        let mut input_mean = Vec::with_capacity(dim);
        let mut input_std = Vec::with_capacity(dim);
        for j in 0..n {
            let (m, s) = mean_std(trajs.iter().map(move |t| t.ys[2 * j]));
            input_mean.push(m);
            input_std.push(s);
        }
        for j in 0..n {
            let (m, s) = mean_std(trajs.iter().map(move |t| t.xs[2 * j]));
            input_mean.push(m);
            input_std.push(s);
        }
        let queries = query_candidates(num_frames);
        let (m, s) = mean_std(queries.iter().map(|q| first.times[*q]));
        input_mean.push(m);
        input_std.push(s);

        let (tx_m, tx_s) = mean_std(
            trajs
                .iter()
                .flat_map(|t| queries.iter().map(move |q| t.xs[*q])),
        );
        let (ty_m, ty_s) = mean_std(
            trajs
                .iter()
                .flat_map(|t| queries.iter().map(move |q| t.ys[*q])),
        );
        Ok(Normalizer {
            input_mean,
            input_std,
            target_mean: [tx_m, ty_m],
            target_std: [tx_s, ty_s],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_mean.len()
    }

    pub fn normalize_input(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.input_mean.len() {
            return Err(Error::InvalidInput(format!(
                "input length {} does not match normalizer dimension {}",
                raw.len(),
                self.input_mean.len()
            )));
        }
        Ok(raw
            .iter()
            .zip(&self.input_mean)
            .zip(&self.input_std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    /// Normalize a query time with the statistics of the last input feature.
    pub fn normalize_time(&self, t_q: f64) -> f64 {
        let j = self.input_mean.len() - 1;
        (t_q - self.input_mean[j]) / self.input_std[j]
    }

    pub fn normalize_target(&self, target: (f64, f64)) -> (f64, f64) {
        (
            (target.0 - self.target_mean[0]) / self.target_std[0],
            (target.1 - self.target_mean[1]) / self.target_std[1],
        )
    }

    pub fn denormalize_target(&self, norm: (f64, f64)) -> (f64, f64) {
        (
            norm.0 * self.target_std[0] + self.target_mean[0],
            norm.1 * self.target_std[1] + self.target_mean[1],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::GroundTruth;
    use std::collections::BTreeMap;

    fn toy_trajectory(id: u32, xs: Vec<f64>, ys: Vec<f64>) -> Trajectory {
        let times = (0..xs.len()).map(|i| i as f64 / 10.0).collect();
        Trajectory {
            id,
            times,
            xs,
            ys,
            truth: GroundTruth {
                params: BTreeMap::new(),
            },
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn layout_matches_contract() {
        // 4 frames p0..p3, query 1 -> [y0, y2, x0, x2, t1], target (x1, y1).
        let traj = toy_trajectory(0, vec![10.0, 11.0, 12.0, 13.0], vec![20.0, 21.0, 22.0, 23.0]);
        let sample = prepare_sample(&traj, 1).unwrap();
        assert_eq!(sample.input, vec![20.0, 22.0, 10.0, 12.0, 0.1]);
        assert_eq!(sample.target, (11.0, 21.0));
        assert_eq!(sample.input.len(), 4 + 1);
    }

    #[test]
    fn different_queries_share_prefix() {
        let traj = toy_trajectory(0, vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]);
        let a = prepare_sample(&traj, 1).unwrap();
        let b = prepare_sample(&traj, 3).unwrap();
        assert_eq!(a.input[..4], b.input[..4]);
        assert_ne!(a.input[4], b.input[4]);
        assert_ne!(a.target, b.target);
    }

    #[test]
    fn packing_round_trip() {
        let traj = toy_trajectory(0, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![9.0, 8.0, 7.0, 6.0, 5.0, 4.0]);
        let sample = prepare_sample(&traj, 3).unwrap();
        let (ys, xs) = unpack_even_positions(&sample.input);
        assert_eq!(ys, vec![9.0, 7.0, 5.0]);
        assert_eq!(xs, vec![1.0, 3.0, 5.0]);
    }

    #[test]
    fn even_or_out_of_range_query_rejected() {
        let traj = toy_trajectory(0, vec![1.0; 6], vec![2.0; 6]);
        assert!(prepare_sample(&traj, 2).is_err());
        assert!(prepare_sample(&traj, 7).is_err());
        assert!(prepare_sample(&traj, 6).is_err());
    }

    #[test]
    fn odd_frame_counts_round_down() {
        // 7 frames -> 3 even inputs (0, 2, 4), queries {1, 3, 5}.
        assert_eq!(even_frame_count(7), 3);
        assert_eq!(query_candidates(7), vec![1, 3, 5]);
        assert_eq!(input_dim(7), 7);
        assert_eq!(input_dim(150), 151);
    }

    #[test]
    fn normalization_round_trip() {
        let a = toy_trajectory(0, vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]);
        let b = toy_trajectory(1, vec![2.0, 3.0, 4.0, 5.0], vec![4.0, 5.0, 6.0, 7.0]);
        let norm = Normalizer::fit(&[&a, &b]).unwrap();
        let sample = prepare_sample(&a, 3).unwrap();
        let normalized = norm.normalize_input(&sample.input).unwrap();
        for (j, v) in normalized.iter().enumerate() {
            let back = v * norm.input_std[j] + norm.input_mean[j];
            assert!((back - sample.input[j]).abs() < 1e-12);
        }
        let t = norm.normalize_target(sample.target);
        let back = norm.denormalize_target(t);
        assert!((back.0 - sample.target.0).abs() < 1e-12);
        assert!((back.1 - sample.target.1).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_keeps_unit_std() {
        let a = toy_trajectory(0, vec![1.0, 2.0, 3.0, 4.0], vec![5.0; 4]);
        let b = toy_trajectory(1, vec![2.0, 3.0, 4.0, 5.0], vec![5.0; 4]);
        let norm = Normalizer::fit(&[&a, &b]).unwrap();
        // y features are constant across the split.
        assert_eq!(norm.input_std[0], 1.0);
        assert_eq!(norm.target_std[1], 1.0);
    }
}
