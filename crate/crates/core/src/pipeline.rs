//! End-to-end runs: generate → (optional render/detect) → train → extract
//! → discover(x) → discover(y) → evaluate, with timed stages and
//! reproducibility manifests.
//!
//! All randomness derives from one global seed through named sub-streams
//! (`dataset`, `noise`, `train`, `gp_x`, `gp_y`, `refit`), so a manifest's
//! config plus seed reproduces every artifact byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{detect_centroid, render_frame, DetectConfig};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_model, report, EvalReport};
use crate::rng::stream_seed;
use crate::scenario::{
    add_noise_dataset, generate_dataset, Dataset, ScenarioConfig, ScenarioKind, Trajectory,
};
use crate::symreg::{front_csv, run_gp, GpConfig, ParetoEntry, ParetoFront, RegressionData, Target};
use crate::vae::{extract_latents, train, Checkpoint, TrainConfig, TrainHistory, VaeModel};

pub const STAGE_NAMES: [&str; 7] = [
    "generate",
    "detect",
    "train",
    "extract",
    "discover_x",
    "discover_y",
    "evaluate",
];

/// Full-run configuration; serializable as the run-config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub scenario: ScenarioConfig,
    /// Trajectories to generate.
    pub n: usize,
    /// Gaussian position noise (pixels); 0 for clean data.
    pub noise_sigma: f64,
    /// Optional training-split prefix (for data-size studies).
    pub train_size: Option<usize>,
    pub vae: TrainConfig,
    pub gp: GpConfig,
    /// Frame stride when pairing trajectories with latents for regression.
    pub gp_stride: usize,
    /// Upper bound on regression rows; the stride widens to respect it.
    pub gp_row_cap: usize,
    /// Global seed; stage seeds are named sub-streams of it.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Route positions through the raster render + centroid detect path.
    pub render: bool,
}

impl PipelineConfig {
    pub fn defaults(kind: ScenarioKind) -> PipelineConfig {
        PipelineConfig {
            scenario: ScenarioConfig::defaults(kind),
            n: 600,
            noise_sigma: 0.0,
            train_size: None,
            vae: TrainConfig::default(),
            gp: GpConfig::default(),
            gp_stride: 4,
            gp_row_cap: 25_000,
            seed: 0,
            out_dir: PathBuf::from("runs").join(kind.name()),
            render: false,
        }
    }

    /// Validate every section before any stage runs.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.vae.validate()?;
        self.gp.validate()?;
        if self.n < 2 {
            return Err(Error::InvalidConfig("n must be >= 2".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if self.gp_stride == 0 || self.gp_row_cap == 0 {
            return Err(Error::InvalidConfig(
                "gp_stride and gp_row_cap must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn stream_seeds(&self) -> BTreeMap<String, u64> {
        ["dataset", "noise", "train", "gp_x", "gp_y", "refit"]
            .iter()
            .map(|name| (name.to_string(), stream_seed(self.seed, name)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
    pub skipped: bool,
}

/// Reproducibility record: versions, config, derived seeds, wall-clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub stream_seeds: BTreeMap<String, u64>,
    pub config: PipelineConfig,
    pub stages: Vec<StageTiming>,
}

/// Knee equations as persisted in `knee.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KneeFile {
    pub x: KneeRecord,
    pub y: KneeRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KneeRecord {
    pub complexity: u32,
    pub error: f64,
    pub infix: String,
    pub tree: crate::symreg::Expr,
}

impl KneeRecord {
    fn from_entry(entry: &ParetoEntry) -> KneeRecord {
        KneeRecord {
            complexity: entry.complexity,
            error: entry.error,
            infix: entry.expr.infix(),
            tree: entry.expr.clone(),
        }
    }
}

pub struct PipelineOutcome {
    pub dataset: Dataset,
    pub model: VaeModel,
    pub history: TrainHistory,
    pub train_latents: Vec<[f64; 3]>,
    pub test_latents: Vec<[f64; 3]>,
    pub front_x: ParetoFront,
    pub front_y: ParetoFront,
    pub knee_x: ParetoEntry,
    pub knee_y: ParetoEntry,
    pub report: EvalReport,
    pub manifest: Manifest,
}

fn write_string(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_string(path, &text)
}

/// Re-detect every position of a trajectory from rendered frames.
fn redetect(traj: &Trajectory, config: &ScenarioConfig) -> Result<Trajectory> {
    let detect = DetectConfig::default();
    let mut out = traj.clone();
    for i in 0..traj.len() {
        let frame = render_frame(traj.position(i), config)?;
        let (x, y) = detect_centroid(&frame, &detect)?;
        out.xs[i] = x;
        out.ys[i] = y;
    }
    Ok(out)
}

fn latents_csv(trajs: &[&Trajectory], latents: &[[f64; 3]], params: &[&str]) -> String {
    let mut out = String::from("id,l1,l2,l3");
    for p in params {
        out.push(',');
        out.push_str(p);
    }
    out.push('\n');
    for (traj, l) in trajs.iter().zip(latents) {
        out.push_str(&format!("{},{},{},{}", traj.id, l[0], l[1], l[2]));
        for p in params {
            out.push_str(&format!(",{}", traj.truth.get(p)));
        }
        out.push('\n');
    }
    out
}

fn history_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,lr,mse,kl,total\n");
    for e in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch, e.lr, e.mse, e.kl, e.total
        ));
    }
    out
}

/// Run the full pipeline, writing artifacts under `config.out_dir`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let seeds = config.stream_seeds();
    let mut stages: Vec<StageTiming> = Vec::with_capacity(STAGE_NAMES.len());
    let time_stage = |name: &str, skipped: bool, seconds: f64, stages: &mut Vec<StageTiming>| {
        stages.push(StageTiming {
            name: name.to_string(),
            seconds,
            skipped,
        });
    };

    // generate
    let t0 = Instant::now();
    let mut dataset = generate_dataset(&config.scenario, config.n, seeds["dataset"])
        .map_err(|e| e.in_stage("generate"))?;
    if config.noise_sigma > 0.0 {
        dataset = add_noise_dataset(&dataset, config.noise_sigma, seeds["noise"])
            .map_err(|e| e.in_stage("generate"))?;
    }
    if let Some(k) = config.train_size {
        dataset = dataset
            .with_train_prefix(k)
            .map_err(|e| e.in_stage("generate"))?;
    }
    dataset
        .save(&config.out_dir.join("dataset.jsonl"))
        .map_err(|e| e.in_stage("generate"))?;
    time_stage("generate", false, t0.elapsed().as_secs_f64(), &mut stages);

    // detect (optional raster round trip)
    let t0 = Instant::now();
    if config.render {
        let frames_dir = config.out_dir.join("frames");
        std::fs::create_dir_all(&frames_dir)?;
        if let Some(first) = dataset.trajectories.first() {
            for i in 0..first.len().min(8) {
                let frame = render_frame(first.position(i), &config.scenario)
                    .map_err(|e| e.in_stage("detect"))?;
                frame
                    .save_pgm(&frames_dir.join(format!("traj0_frame{i:04}.pgm")))
                    .map_err(|e| e.in_stage("detect"))?;
            }
        }
        dataset.trajectories = dataset
            .trajectories
            .par_iter()
            .map(|traj| redetect(traj, &config.scenario))
            .collect::<Result<_>>()
            .map_err(|e| e.in_stage("detect"))?;
    }
    time_stage("detect", !config.render, t0.elapsed().as_secs_f64(), &mut stages);

    // train
    let t0 = Instant::now();
    let mut vae_config = config.vae.clone();
    vae_config.seed = seeds["train"];
    let (model, history) = train(&dataset, &vae_config).map_err(|e| e.in_stage("train"))?;
    Checkpoint::from_model(&model, &vae_config)
        .save(&config.out_dir.join("model.ckpt.json"))
        .map_err(|e| e.in_stage("train"))?;
    write_string(&config.out_dir.join("history.csv"), &history_csv(&history))
        .map_err(|e| e.in_stage("train"))?;
    time_stage("train", false, t0.elapsed().as_secs_f64(), &mut stages);

    // extract
    let t0 = Instant::now();
    let train_trajs: Vec<&Trajectory> = dataset.train().collect();
    let test_trajs: Vec<&Trajectory> = dataset.test().collect();
    let train_latents = extract_latents(&model, dataset.train()).map_err(|e| e.in_stage("extract"))?;
    let test_latents = extract_latents(&model, dataset.test()).map_err(|e| e.in_stage("extract"))?;
    let params = dataset.config.kind.governing_params();
    write_string(
        &config.out_dir.join("latents_train.csv"),
        &latents_csv(&train_trajs, &train_latents, params),
    )
    .map_err(|e| e.in_stage("extract"))?;
    write_string(
        &config.out_dir.join("latents_test.csv"),
        &latents_csv(&test_trajs, &test_latents, params),
    )
    .map_err(|e| e.in_stage("extract"))?;
    time_stage("extract", false, t0.elapsed().as_secs_f64(), &mut stages);

    // discover x
    let t0 = Instant::now();
    let data = RegressionData::build(
        &train_trajs,
        &train_latents,
        config.gp_stride,
        config.gp_row_cap,
    )
    .map_err(|e| e.in_stage("discover_x"))?;
    let mut gp_x = config.gp.clone();
    gp_x.seed = seeds["gp_x"];
    let front_x = run_gp(&data, Target::X, &gp_x).map_err(|e| e.in_stage("discover_x"))?;
    write_string(&config.out_dir.join("front_x.csv"), &front_csv(&front_x, Target::X))
        .map_err(|e| e.in_stage("discover_x"))?;
    let knee_x = front_x
        .knee()
        .ok_or_else(|| Error::Regression("empty x front".into()).in_stage("discover_x"))?
        .clone();
    time_stage("discover_x", false, t0.elapsed().as_secs_f64(), &mut stages);

    // discover y
    let t0 = Instant::now();
    let mut gp_y = config.gp.clone();
    gp_y.seed = seeds["gp_y"];
    let front_y = run_gp(&data, Target::Y, &gp_y).map_err(|e| e.in_stage("discover_y"))?;
    write_string(&config.out_dir.join("front_y.csv"), &front_csv(&front_y, Target::Y))
        .map_err(|e| e.in_stage("discover_y"))?;
    let knee_y = front_y
        .knee()
        .ok_or_else(|| Error::Regression("empty y front".into()).in_stage("discover_y"))?
        .clone();
    time_stage("discover_y", false, t0.elapsed().as_secs_f64(), &mut stages);

    write_json(
        &config.out_dir.join("knee.json"),
        &KneeFile {
            x: KneeRecord::from_entry(&knee_x),
            y: KneeRecord::from_entry(&knee_y),
        },
    )?;

    // evaluate
    let t0 = Instant::now();
    let eval = evaluate_model(&dataset, &model, &knee_x.expr, &knee_y.expr, seeds["refit"])
        .map_err(|e| e.in_stage("evaluate"))?;
    write_string(&config.out_dir.join("eval.csv"), &report::eval_csv(&eval))
        .map_err(|e| e.in_stage("evaluate"))?;
    write_json(&config.out_dir.join("eval.json"), &eval)?;
    for pair in &eval.matched_pairs {
        let points: Vec<(f64, f64)> = test_trajs
            .iter()
            .zip(&test_latents)
            .map(|(traj, l)| (l[pair.node], traj.truth.get(&pair.param)))
            .collect();
        let svg = report::svg_scatter(
            &format!(
                "{}: l{} vs {}",
                dataset.config.kind.name(),
                pair.node + 1,
                pair.param
            ),
            &format!("latent l{}", pair.node + 1),
            &pair.param,
            &points,
        );
        write_string(
            &config
                .out_dir
                .join(format!("scatter_{}_l{}.svg", pair.param, pair.node + 1)),
            &svg,
        )
        .map_err(|e| e.in_stage("evaluate"))?;
    }
    time_stage("evaluate", false, t0.elapsed().as_secs_f64(), &mut stages);

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        stream_seeds: seeds,
        config: config.clone(),
        stages,
    };
    write_json(&config.out_dir.join("manifest.json"), &manifest)?;

    Ok(PipelineOutcome {
        dataset,
        model,
        history,
        train_latents,
        test_latents,
        front_x,
        front_y,
        knee_x,
        knee_y,
        report: eval,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: &str) -> PipelineConfig {
        let mut config = PipelineConfig::defaults(ScenarioKind::UniformCircular);
        config.scenario.num_frames = 16;
        config.n = 8;
        config.vae.epochs = 3;
        config.gp.population_size = 32;
        config.gp.generations = 4;
        config.gp_row_cap = 200;
        config.seed = 77;
        config.out_dir = std::env::temp_dir().join("eqmotion_pipeline_test").join(dir);
        config
    }

    #[test]
    fn pipeline_produces_all_artifacts() {
        let config = tiny_config("artifacts");
        let outcome = run_pipeline(&config).unwrap();
        assert_eq!(outcome.manifest.stages.len(), 7);
        let names: Vec<&str> = outcome
            .manifest
            .stages
            .iter()
            .map(|s| s.name.as_str())
            .collect();
        assert_eq!(names, STAGE_NAMES.to_vec());
        assert!(outcome.manifest.stages[1].skipped);
        for file in [
            "dataset.jsonl",
            "model.ckpt.json",
            "history.csv",
            "latents_train.csv",
            "latents_test.csv",
            "front_x.csv",
            "front_y.csv",
            "knee.json",
            "eval.csv",
            "eval.json",
            "manifest.json",
        ] {
            assert!(config.out_dir.join(file).exists(), "missing {file}");
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let config_a = tiny_config("rerun_a");
        let config_b = tiny_config("rerun_b");
        run_pipeline(&config_a).unwrap();
        run_pipeline(&config_b).unwrap();
        for file in ["knee.json", "model.ckpt.json", "eval.csv", "eval.json", "dataset.jsonl"] {
            let a = std::fs::read(config_a.out_dir.join(file)).unwrap();
            let b = std::fs::read(config_b.out_dir.join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }
    }

    #[test]
    fn invalid_config_fails_before_work() {
        let mut config = tiny_config("invalid");
        config.n = 1;
        assert!(run_pipeline(&config).is_err());
        assert!(!config.out_dir.join("dataset.jsonl").exists());
    }
}
