//! Quantitative evaluation of a trained model and its discovered equations.

pub mod correlation;
pub mod refit;
pub mod report;
pub mod sweep;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Dataset, ScenarioKind};
use crate::symreg::Expr;
use crate::vae::{extract_latents, VaeModel};

pub use correlation::{affine_fit, cross_correlation, match_latents, CorrelationMatrices, MatchResult};
pub use refit::{refit_latents, trajectory_error, RefitContext, RefitResult};
pub use sweep::{sweep_noise, sweep_train_size, SweepRow};

/// One matched parameter-node pair with its interpretability statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub param: String,
    pub node: usize,
    pub pearson: f64,
    pub eq3: f64,
    pub slope: f64,
    pub intercept: f64,
    pub fit_r2: f64,
}

/// Full evaluation of (model, equations) on a dataset's test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: ScenarioKind,
    pub scale: f64,
    pub param_names: Vec<String>,
    pub test_count: usize,
    /// Eq.-2 trajectory error after least-squares latent refit, pixels.
    pub epsilon_mean_px: f64,
    pub epsilon_mean_m: f64,
    pub epsilon_per_trajectory_px: Vec<f64>,
    /// Literal (non-centered) normalized cross-correlation, m x 3.
    pub correlation_eq3: Vec<Vec<f64>>,
    /// Mean-centered Pearson companion, m x 3.
    pub correlation_pearson: Vec<Vec<f64>>,
    pub matched_pairs: Vec<MatchedPair>,
    pub inactive_nodes: Vec<usize>,
    /// Population variance of each latent node over the test split.
    pub latent_variance: [f64; 3],
    /// Test trajectories whose linear refit was rank-deficient.
    pub refit_rank_deficient: usize,
}

impl EvalReport {
    /// Smallest |Pearson| among matched pairs; NaN when nothing matched.
    pub fn min_matched_pearson(&self) -> f64 {
        self.matched_pairs
            .iter()
            .map(|p| p.pearson.abs())
            .fold(f64::NAN, |acc, v| if acc.is_nan() || v < acc { v } else { acc })
    }
}

/// Evaluate discovered equations and latent interpretability on the test
/// split: encoder latents vs ground-truth parameters (Eq. 3 and Pearson),
/// greedy pair matching, affine fits, and per-trajectory ε after refit.
pub fn evaluate_model(
    dataset: &Dataset,
    model: &VaeModel,
    expr_x: &Expr,
    expr_y: &Expr,
    refit_seed: u64,
) -> Result<EvalReport> {
    let test: Vec<_> = dataset.test().collect();
    if test.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 test trajectories".into()));
    }
    let train_latents = extract_latents(model, dataset.train())?;
    let test_latents = extract_latents(model, dataset.test())?;

    let names: Vec<String> = dataset
        .config
        .kind
        .governing_params()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let params: Vec<Vec<f64>> = names
        .iter()
        .map(|name| test.iter().map(|t| t.truth.get(name)).collect())
        .collect();
    let latent_rows: Vec<Vec<f64>> = test_latents.iter().map(|l| l.to_vec()).collect();
    let corr = cross_correlation(&params, &latent_rows)?;
    let matching = match_latents(&corr.pearson);

    let mut matched_pairs = Vec::new();
    for (pi, node) in &matching.pairs {
        let latent_col: Vec<f64> = test_latents.iter().map(|l| l[*node]).collect();
        let (slope, intercept, fit_r2) =
            affine_fit(&latent_col, &params[*pi]).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        matched_pairs.push(MatchedPair {
            param: names[*pi].clone(),
            node: *node,
            pearson: corr.pearson[*pi][*node],
            eq3: corr.eq3[*pi][*node],
            slope,
            intercept,
            fit_r2,
        });
    }

    let mut latent_variance = [0.0; 3];
    for node in 0..3 {
        let col: Vec<f64> = test_latents.iter().map(|l| l[node]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        latent_variance[node] =
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64;
    }

    let ctx = RefitContext::from_latents(&train_latents, refit_seed);
    let refits: Vec<(f64, bool)> = test
        .par_iter()
        .map(|traj| {
            let refit = refit_latents(expr_x, expr_y, traj, &ctx);
            let eps = trajectory_error(traj, expr_x, expr_y, &refit.latents);
            (eps, refit.rank_deficient)
        })
        .collect();
    let epsilon_per_trajectory_px: Vec<f64> = refits.iter().map(|(e, _)| *e).collect();
    let refit_rank_deficient = refits.iter().filter(|(_, rd)| *rd).count();
    let epsilon_mean_px =
        epsilon_per_trajectory_px.iter().sum::<f64>() / epsilon_per_trajectory_px.len() as f64;

    Ok(EvalReport {
        scenario: dataset.config.kind,
        scale: dataset.config.scale,
        param_names: names,
        test_count: test.len(),
        epsilon_mean_px,
        epsilon_mean_m: epsilon_mean_px / dataset.config.scale,
        epsilon_per_trajectory_px,
        correlation_eq3: corr.eq3,
        correlation_pearson: corr.pearson,
        matched_pairs,
        inactive_nodes: matching.inactive_nodes,
        latent_variance,
        refit_rank_deficient,
    })
}
