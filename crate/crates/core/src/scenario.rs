//! Synthetic motion scenarios: parameter samplers and closed-form simulators.
//!
//! Five single-object 2D scenarios are supported. Each produces trajectories
//! in pixel coordinates (image convention: y grows downward) from parameters
//! expressed in physical units; `scale` (pixels per meter) converts between
//! the two. Datasets are pure functions of `(config, n, seed)`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Margin kept between the sampled free-fall start box and the frame border.
const FREE_FALL_MARGIN_PX: f64 = 5.0;

/// The physical scenario a dataset simulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    FreeFall,
    ConstantAcceleration,
    UniformCircular,
    Helical,
    DampedOscillation,
}

impl ScenarioKind {
    pub fn all() -> [ScenarioKind; 5] {
        [
            ScenarioKind::FreeFall,
            ScenarioKind::ConstantAcceleration,
            ScenarioKind::UniformCircular,
            ScenarioKind::Helical,
            ScenarioKind::DampedOscillation,
        ]
    }

    /// Parameter names the latent nodes are expected to discover.
    ///
    /// Initial positions are scene setup, not governing parameters, so
    /// free fall lists only the velocities.
    pub fn governing_params(&self) -> &'static [&'static str] {
        match self {
            ScenarioKind::FreeFall => &["v0x", "v0y"],
            ScenarioKind::ConstantAcceleration => &["a"],
            ScenarioKind::UniformCircular => &["omega"],
            ScenarioKind::Helical => &["v0x", "omega"],
            ScenarioKind::DampedOscillation => &["omega", "b"],
        }
    }

    /// Order in which ranged parameters are drawn; pinned for determinism.
    fn sampled_params(&self) -> &'static [&'static str] {
        match self {
            ScenarioKind::FreeFall => &[],
            ScenarioKind::ConstantAcceleration => &["a"],
            ScenarioKind::UniformCircular => &["omega"],
            ScenarioKind::Helical => &["v0x", "omega"],
            ScenarioKind::DampedOscillation => &["omega", "b"],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::FreeFall => "free_fall",
            ScenarioKind::ConstantAcceleration => "constant_acceleration",
            ScenarioKind::UniformCircular => "uniform_circular",
            ScenarioKind::Helical => "helical",
            ScenarioKind::DampedOscillation => "damped_oscillation",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free_fall" => Ok(ScenarioKind::FreeFall),
            "constant_acceleration" => Ok(ScenarioKind::ConstantAcceleration),
            "uniform_circular" => Ok(ScenarioKind::UniformCircular),
            "helical" => Ok(ScenarioKind::Helical),
            "damped_oscillation" => Ok(ScenarioKind::DampedOscillation),
            other => Err(Error::InvalidInput(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Frame, sampling and unit settings for one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub num_frames: usize,
    /// Frames per second.
    pub fps: f64,
    /// (width, height) in pixels.
    pub frame_size: (u32, u32),
    /// Pixels per meter.
    pub scale: f64,
    /// Ranged parameters in physical units, name -> [low, high].
    pub param_ranges: BTreeMap<String, (f64, f64)>,
    /// Fixed scenario constants in physical units (g, radius, anchors, ...).
    pub fixed_values: BTreeMap<String, f64>,
    /// Rendered object radius in pixels.
    pub object_radius: u32,
}

impl ScenarioConfig {
    /// Table-default configuration for a scenario kind.
    pub fn defaults(kind: ScenarioKind) -> ScenarioConfig {
        let mut ranges = BTreeMap::new();
        let mut fixed = BTreeMap::new();
        let (num_frames, fps, scale) = match kind {
            ScenarioKind::FreeFall => {
                fixed.insert("g".into(), 9.8);
                (150, 240.0, 300.0)
            }
            ScenarioKind::ConstantAcceleration => {
                ranges.insert("a".into(), (0.0, 4.0));
                fixed.insert("v0x".into(), 5.0);
                // 40 px / 360 px at 8 px/m.
                fixed.insert("x0".into(), 5.0);
                fixed.insert("y0".into(), 45.0);
                (200, 40.0, 8.0)
            }
            ScenarioKind::UniformCircular => {
                ranges.insert("omega".into(), (1.0, 2.0));
                fixed.insert("r".into(), 5.0);
                // Center fixed at the frame center, 360 px at 50 px/m.
                fixed.insert("cx".into(), 7.2);
                fixed.insert("cy".into(), 7.2);
                (200, 20.0, 50.0)
            }
            ScenarioKind::Helical => {
                ranges.insert("v0x".into(), (1.0, 4.0));
                ranges.insert("omega".into(), (1.0, 2.0));
                fixed.insert("r".into(), 1.0);
                // 60 px / 360 px at 50 px/m.
                fixed.insert("x0".into(), 1.2);
                fixed.insert("y0".into(), 7.2);
                (200, 20.0, 50.0)
            }
            ScenarioKind::DampedOscillation => {
                ranges.insert("omega".into(), (2.0, 4.0));
                ranges.insert("b".into(), (0.2, 1.0));
                fixed.insert("amplitude".into(), 2.0);
                // 360 px at 50 px/m.
                fixed.insert("x0".into(), 7.2);
                fixed.insert("y0".into(), 7.2);
                (200, 20.0, 50.0)
            }
        };
        ScenarioConfig {
            kind,
            num_frames,
            fps,
            frame_size: (720, 720),
            scale,
            param_ranges: ranges,
            fixed_values: fixed,
            object_radius: 25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_frames < 2 {
            return Err(Error::InvalidConfig("num_frames must be >= 2".into()));
        }
        if !(self.fps > 0.0) {
            return Err(Error::InvalidConfig("fps must be > 0".into()));
        }
        if !(self.scale > 0.0) {
            return Err(Error::InvalidConfig("scale must be > 0".into()));
        }
        if self.frame_size.0 == 0 || self.frame_size.1 == 0 {
            return Err(Error::InvalidConfig("frame_size must be nonzero".into()));
        }
        if self.object_radius == 0 {
            return Err(Error::InvalidConfig("object_radius must be > 0".into()));
        }
        for (name, (low, high)) in &self.param_ranges {
            if !(low <= high) {
                return Err(Error::InvalidConfig(format!(
                    "range for `{name}` has low > high ({low} > {high})"
                )));
            }
        }
        for name in self.kind.sampled_params() {
            if !self.param_ranges.contains_key(*name) {
                return Err(Error::InvalidConfig(format!(
                    "missing range for parameter `{name}`"
                )));
            }
        }
        Ok(())
    }

    /// Duration used by the free-fall velocity feasibility box, seconds.
    pub fn duration(&self) -> f64 {
        self.num_frames as f64 / self.fps
    }

    fn fixed(&self, name: &str) -> f64 {
        *self
            .fixed_values
            .get(name)
            .unwrap_or_else(|| panic!("fixed value `{name}` missing from config"))
    }
}

/// Hidden per-trajectory parameters, physical units, image-down positive y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruth {
    pub params: BTreeMap<String, f64>,
}

impl GroundTruth {
    pub fn get(&self, name: &str) -> f64 {
        *self
            .params
            .get(name)
            .unwrap_or_else(|| panic!("ground-truth parameter `{name}` missing"))
    }
}

/// One simulated trajectory: uniformly sampled positions plus hidden truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: u32,
    /// Seconds; strictly increasing, uniform spacing 1/fps.
    pub times: Vec<f64>,
    /// Pixel x per frame.
    pub xs: Vec<f64>,
    /// Pixel y per frame (down positive).
    pub ys: Vec<f64>,
    pub truth: GroundTruth,
    /// Standard deviation of added Gaussian position noise, pixels.
    pub noise_sigma: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn position(&self, frame: usize) -> (f64, f64) {
        (self.xs[frame], self.ys[frame])
    }
}

/// A generated set of trajectories with a train/test split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: ScenarioConfig,
    pub trajectories: Vec<Trajectory>,
    pub train_ids: Vec<u32>,
    pub test_ids: Vec<u32>,
}

impl Dataset {
    pub fn train(&self) -> impl Iterator<Item = &Trajectory> {
        self.train_ids.iter().map(|id| &self.trajectories[*id as usize])
    }

    pub fn test(&self) -> impl Iterator<Item = &Trajectory> {
        self.test_ids.iter().map(|id| &self.trajectories[*id as usize])
    }

    /// Same dataset with the training split truncated to its first `k` ids.
    pub fn with_train_prefix(&self, k: usize) -> Result<Dataset> {
        if k == 0 || k > self.train_ids.len() {
            return Err(Error::InvalidInput(format!(
                "train prefix {k} out of range 1..={}",
                self.train_ids.len()
            )));
        }
        let mut out = self.clone();
        out.train_ids.truncate(k);
        Ok(out)
    }

    /// Serialize as JSON lines: a config header line, then one trajectory
    /// per line with fields {id, times, xs, ys, truth, noise_sigma}.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut w, &self.config)?;
        w.write_all(b"\n")?;
        for traj in &self.trajectories {
            serde_json::to_writer(&mut w, traj)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Load a JSON-lines dataset; the default 5:1 split is recomputed.
    pub fn load(path: &Path) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty dataset file".into()))??;
        let config: ScenarioConfig = serde_json::from_str(&header)?;
        config.validate()?;
        let mut trajectories = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let traj: Trajectory = serde_json::from_str(&line)?;
            if traj.times.len() != traj.xs.len() || traj.times.len() != traj.ys.len() {
                return Err(Error::InvalidInput(format!(
                    "trajectory {}: times/positions length mismatch",
                    traj.id
                )));
            }
            trajectories.push(traj);
        }
        let (train_ids, test_ids) = default_split(trajectories.len());
        Ok(Dataset {
            config,
            trajectories,
            train_ids,
            test_ids,
        })
    }
}

/// Default 5:1 split: test gets ceil(n/6), train the rest.
/// n=600 -> 500/100, n=2 -> 1/1.
pub fn default_split(n: usize) -> (Vec<u32>, Vec<u32>) {
    let test = n.div_ceil(6);
    let train = n - test;
    (
        (0..train as u32).collect(),
        (train as u32..n as u32).collect(),
    )
}

/// Draw hidden parameters for one trajectory.
///
/// Free fall follows the pixel-space feasibility box: the start point is
/// uniform in the bottom-left quadrant and the velocity box is shaped so
/// the object stays inside the frame for the whole video. Other scenarios
/// draw uniformly from their configured ranges.
pub fn sample_parameters(config: &ScenarioConfig, rng: &mut Rng) -> Result<GroundTruth> {
    config.validate()?;
    let mut params = BTreeMap::new();
    match config.kind {
        ScenarioKind::FreeFall => {
            let (w, h) = (config.frame_size.0 as f64, config.frame_size.1 as f64);
            let half = config.object_radius as f64;
            let margin = FREE_FALL_MARGIN_PX;
            let g_px = config.fixed("g") * config.scale;
            let t_gen = config.duration();

            let y_lo = (3.0 * h / 5.0).floor();
            let y_hi = h - half - 1.0 - margin;
            let x_lo = half + 1.0 + margin;
            let x_hi = (w / 5.0).floor();
            if !(y_lo <= y_hi) || !(x_lo <= x_hi) {
                return Err(Error::InfeasibleSampling(format!(
                    "start box is empty: x [{x_lo}, {x_hi}], y [{y_lo}, {y_hi}]"
                )));
            }
            let y0 = rng.gen_range(y_lo..=y_hi);
            let x0 = rng.gen_range(x_lo..=x_hi);

            // Upward-speed bound keeps the apex inside the frame; the
            // downward bound keeps the end point above the bottom edge.
            let vy_up = ((y0 - half) * 2.0 * g_px).sqrt() - 1.0;
            let vy_down = (0.5 * g_px * t_gen * t_gen - (h - y0 - half)) / t_gen + 1.0;
            if !(vy_down <= vy_up) {
                return Err(Error::InfeasibleSampling(format!(
                    "velocity box is empty for start ({x0:.1}, {y0:.1}): \
                     up bound {vy_up:.1} < down bound {vy_down:.1} px/s"
                )));
            }
            let vy = -rng.gen_range(vy_down..=vy_up);
            let vx_hi = (w - x0 - half) / t_gen;
            let vx = rng.gen_range(0.0..=vx_hi);

            let s = config.scale;
            params.insert("x0".into(), x0 / s);
            params.insert("y0".into(), y0 / s);
            params.insert("v0x".into(), vx / s);
            params.insert("v0y".into(), vy / s);
        }
        _ => {
            for name in config.kind.sampled_params() {
                let (low, high) = config.param_ranges[*name];
                params.insert((*name).into(), rng.gen_range(low..=high));
            }
        }
    }
    Ok(GroundTruth { params })
}

/// Evaluate the closed-form motion law at every frame time.
pub fn simulate(config: &ScenarioConfig, truth: &GroundTruth, id: u32) -> Trajectory {
    let s = config.scale;
    let times: Vec<f64> = (0..config.num_frames)
        .map(|i| i as f64 / config.fps)
        .collect();
    let mut xs = Vec::with_capacity(times.len());
    let mut ys = Vec::with_capacity(times.len());
    match config.kind {
        ScenarioKind::FreeFall => {
            let (x0, y0) = (truth.get("x0") * s, truth.get("y0") * s);
            let (vx, vy) = (truth.get("v0x") * s, truth.get("v0y") * s);
            let g = config.fixed("g") * s;
            for &t in &times {
                xs.push(x0 + vx * t);
                ys.push(y0 + vy * t + 0.5 * g * t * t);
            }
        }
        ScenarioKind::ConstantAcceleration => {
            let (x0, y0) = (config.fixed("x0") * s, config.fixed("y0") * s);
            let vx = config.fixed("v0x") * s;
            let a = truth.get("a") * s;
            for &t in &times {
                xs.push(x0 + vx * t + 0.5 * a * t * t);
                ys.push(y0);
            }
        }
        ScenarioKind::UniformCircular => {
            let (cx, cy) = (config.fixed("cx") * s, config.fixed("cy") * s);
            let r = config.fixed("r") * s;
            let omega = truth.get("omega");
            for &t in &times {
                xs.push(cx + r * (omega * t).cos());
                ys.push(cy + r * (omega * t).sin());
            }
        }
        ScenarioKind::Helical => {
            let (x0, y0) = (config.fixed("x0") * s, config.fixed("y0") * s);
            let r = config.fixed("r") * s;
            let vx = truth.get("v0x") * s;
            let omega = truth.get("omega");
            for &t in &times {
                xs.push(x0 + vx * t + r * (omega * t).cos());
                ys.push(y0 + r * (omega * t).sin());
            }
        }
        ScenarioKind::DampedOscillation => {
            let (x0, y0) = (config.fixed("x0") * s, config.fixed("y0") * s);
            let amp = config.fixed("amplitude") * s;
            let omega = truth.get("omega");
            let b = truth.get("b");
            for &t in &times {
                xs.push(x0 + amp * (-b * t).exp() * (omega * t).cos());
                ys.push(y0);
            }
        }
    }
    Trajectory {
        id,
        times,
        xs,
        ys,
        truth: truth.clone(),
        noise_sigma: 0.0,
    }
}

/// Generate `n` trajectories with independently sub-seeded samplers.
pub fn generate_dataset(config: &ScenarioConfig, n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidInput("dataset needs n >= 2".into()));
    }
    config.validate()?;
    let trajectories: Vec<Trajectory> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::seeded(rng::child_seed(seed, i as u64));
            let truth = sample_parameters(config, &mut rng)?;
            Ok(simulate(config, &truth, i as u32))
        })
        .collect::<Result<_>>()?;
    let (train_ids, test_ids) = default_split(n);
    Ok(Dataset {
        config: config.clone(),
        trajectories,
        train_ids,
        test_ids,
    })
}

/// Perturb every coordinate by independent zero-mean Gaussian noise.
pub fn add_noise(traj: &Trajectory, sigma: f64, rng: &mut Rng) -> Result<Trajectory> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = traj.clone();
    for x in &mut out.xs {
        *x += sigma * normal.sample(rng);
    }
    for y in &mut out.ys {
        *y += sigma * normal.sample(rng);
    }
    out.noise_sigma = sigma;
    Ok(out)
}

/// Apply `add_noise` to every trajectory of a dataset.
pub fn add_noise_dataset(dataset: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    let mut out = dataset.clone();
    out.trajectories = dataset
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, traj)| {
            let mut rng = rng::seeded(rng::child_seed(seed, i as u64));
            add_noise(traj, sigma, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(out)
}
