//! Raster rendering of trajectories and centroid-based position recovery.
//!
//! This is the optional "full video path": trajectories can be drawn as
//! grayscale frames and read back by thresholded centroid detection instead
//! of using their analytic positions directly.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

/// Grayscale frame, intensities in [0, 1], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub intensities: Vec<f64>,
}

impl Frame {
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.intensities[(y * self.width + x) as usize]
    }

    /// Write as a binary PGM (P5) file, intensities scaled to 0..=255.
    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .intensities
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }
}

/// Thresholding settings for centroid detection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectConfig {
    pub threshold: f64,
    pub background_intensity: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            threshold: 0.5,
            background_intensity: 0.0,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig("threshold must be in (0,1)".into()));
        }
        if !(self.background_intensity >= 0.0 && self.background_intensity < 1.0) {
            return Err(Error::InvalidConfig(
                "background_intensity must be in [0,1)".into(),
            ));
        }
        if !(self.threshold > self.background_intensity) {
            return Err(Error::InvalidConfig(
                "threshold must exceed background_intensity".into(),
            ));
        }
        Ok(())
    }
}

/// Draw a filled disk of the configured object radius at `position`.
///
/// Pixels whose integer coordinates lie within `object_radius` of the
/// center are set to intensity 1; the disk is clipped at frame borders.
/// The center itself must lie inside the frame.
pub fn render_frame(position: (f64, f64), config: &ScenarioConfig) -> Result<Frame> {
    let (w, h) = (config.frame_size.0, config.frame_size.1);
    let (px, py) = position;
    if !(px >= 0.0 && px < w as f64 && py >= 0.0 && py < h as f64) {
        return Err(Error::InvalidInput(format!(
            "position ({px:.1}, {py:.1}) outside {w}x{h} frame"
        )));
    }
    let r = config.object_radius as f64;
    let mut intensities = vec![0.0; (w as usize) * (h as usize)];
    let x_min = ((px - r).floor().max(0.0)) as u32;
    let x_max = ((px + r).ceil() as i64).min(w as i64 - 1) as u32;
    let y_min = ((py - r).floor().max(0.0)) as u32;
    let y_max = ((py + r).ceil() as i64).min(h as i64 - 1) as u32;
    for y in y_min..=y_max {
        for x in x_min..=x_max {
            let dx = x as f64 - px;
            let dy = y as f64 - py;
            if dx * dx + dy * dy <= r * r {
                intensities[(y * w + x) as usize] = 1.0;
            }
        }
    }
    Ok(Frame {
        width: w,
        height: h,
        intensities,
    })
}

/// Intensity-weighted centroid of all pixels above the threshold.
pub fn detect_centroid(frame: &Frame, config: &DetectConfig) -> Result<(f64, f64)> {
    config.validate()?;
    let mut sum = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for y in 0..frame.height {
        for x in 0..frame.width {
            let v = frame.get(x, y);
            if v > config.threshold {
                sum += v;
                sx += v * x as f64;
                sy += v * y as f64;
            }
        }
    }
    if sum == 0.0 {
        return Err(Error::Detection(
            "no pixel above threshold; frame is all background".into(),
        ));
    }
    Ok((sx / sum, sy / sum))
}
