//! Noise and training-size sweep harnesses.
//!
//! Each sweep cell runs the full pipeline in its own subdirectory, reusing
//! the base global seed so only the studied factor varies. Cell failures
//! are recorded and the sweep continues.

use serde::{Deserialize, Serialize};

use crate::pipeline::{run_pipeline, PipelineConfig};

/// Matched-pair interpretability bar on |Pearson|.
pub const INTERPRETABILITY_BAR: f64 = 0.95;

/// One sweep cell summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// e.g. "sigma=32" or "train_size=200".
    pub label: String,
    pub value: f64,
    pub ok: bool,
    pub message: String,
    pub epsilon_mean_px: f64,
    pub epsilon_mean_m: f64,
    /// Smallest matched |Pearson|; NaN when the cell failed.
    pub min_matched_pearson: f64,
    /// All governing parameters matched at or above the 0.95 bar.
    pub meets_interpretability_bar: bool,
}

fn run_cell(config: &PipelineConfig, label: String, value: f64) -> SweepRow {
    match run_pipeline(config) {
        Ok(outcome) => {
            let min_p = outcome.report.min_matched_pearson();
            let all_matched =
                outcome.report.matched_pairs.len() == outcome.report.param_names.len();
            SweepRow {
                label,
                value,
                ok: true,
                message: String::new(),
                epsilon_mean_px: outcome.report.epsilon_mean_px,
                epsilon_mean_m: outcome.report.epsilon_mean_m,
                min_matched_pearson: min_p,
                meets_interpretability_bar: all_matched
                    && min_p.is_finite()
                    && min_p >= INTERPRETABILITY_BAR,
            }
        }
        Err(err) => SweepRow {
            label,
            value,
            ok: false,
            message: err.to_string(),
            epsilon_mean_px: f64::NAN,
            epsilon_mean_m: f64::NAN,
            min_matched_pearson: f64::NAN,
            meets_interpretability_bar: false,
        },
    }
}

/// Full pipeline per noise level; one row per sigma.
pub fn sweep_noise(base: &PipelineConfig, sigmas: &[f64]) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut config = base.clone();
        config.noise_sigma = sigma;
        config.out_dir = base.out_dir.join(format!("noise_{sigma}"));
        rows.push(run_cell(&config, format!("sigma={sigma}"), sigma));
    }
    rows
}

/// Retrain on training-split prefixes; one row per size.
pub fn sweep_train_size(base: &PipelineConfig, sizes: &[usize]) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut config = base.clone();
        config.train_size = Some(size);
        config.out_dir = base.out_dir.join(format!("size_{size}"));
        rows.push(run_cell(&config, format!("train_size={size}"), size as f64));
    }
    rows
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "label,value,ok,epsilon_mean_px,epsilon_mean_m,min_matched_pearson,meets_0.95,message\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.label,
            r.value,
            r.ok,
            r.epsilon_mean_px,
            r.epsilon_mean_m,
            r.min_matched_pearson,
            r.meets_interpretability_bar,
            r.message.replace(',', ";"),
        ));
    }
    out
}
