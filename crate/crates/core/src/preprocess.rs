//! Intensity normalization planned on the labeled set and shared by every
//! other split.

use std::fmt;
use std::str::FromStr;

use crate::data::{Image, Sample};
use crate::error::{Error, Result};

pub const MIN_STD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessPlan {
    pub intensity_mean: f64,
    pub intensity_std: f64,
    pub target_height: usize,
    pub target_width: usize,
}

/// Pooled population mean/std over every pixel of every labeled image.
pub fn compute_plan(labeled: &[Sample]) -> Result<PreprocessPlan> {
    let first = labeled
        .first()
        .ok_or_else(|| Error::invalid("cannot plan preprocessing from an empty labeled set"))?;
    let (h, w) = (first.image.height(), first.image.width());
    let mut n = 0usize;
    let mut sum = 0.0f64;
    for s in labeled {
        if s.image.height() != h || s.image.width() != w {
            return Err(Error::shape(format!(
                "labeled image {:?} is {}x{}, expected {h}x{w}",
                s.id,
                s.image.height(),
                s.image.width()
            )));
        }
        sum += s.image.data().iter().map(|&v| f64::from(v)).sum::<f64>();
        n += s.image.data().len();
    }
    let mean = sum / n as f64;
    let sq: f64 = labeled
        .iter()
        .flat_map(|s| s.image.data())
        .map(|&v| (f64::from(v) - mean).powi(2))
        .sum();
    let std = (sq / n as f64).sqrt().max(MIN_STD);
    Ok(PreprocessPlan {
        intensity_mean: mean,
        intensity_std: std,
        target_height: h,
        target_width: w,
    })
}

impl PreprocessPlan {
    pub fn apply_image(&self, image: &Image) -> Result<Image> {
        if image.height() != self.target_height || image.width() != self.target_width {
            return Err(Error::shape(format!(
                "image is {}x{}, plan expects {}x{}",
                image.height(),
                image.width(),
                self.target_height,
                self.target_width
            )));
        }
        let data = image
            .data()
            .iter()
            .map(|&v| ((f64::from(v) - self.intensity_mean) / self.intensity_std) as f32)
            .collect();
        Image::new(image.height(), image.width(), image.channels(), data)
    }

    /// Normalizes the image; labels (visible or hidden) pass through.
    pub fn apply(&self, sample: &Sample) -> Result<Sample> {
        sample.with_image(self.apply_image(&sample.image)?)
    }

    pub fn apply_all(&self, samples: &[Sample]) -> Result<Vec<Sample>> {
        samples.iter().map(|s| self.apply(s)).collect()
    }
}

/// `key=value` lines, one per field.
impl fmt::Display for PreprocessPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "intensity_mean={:e}", self.intensity_mean)?;
        writeln!(f, "intensity_std={:e}", self.intensity_std)?;
        writeln!(f, "target_height={}", self.target_height)?;
        writeln!(f, "target_width={}", self.target_width)
    }
}

impl FromStr for PreprocessPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mut mean, mut std, mut h, mut w) = (None, None, None, None);
        for (i, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::Config { line: i + 1, message: m };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
            let v = v.trim();
            match k.trim() {
                "intensity_mean" => mean = Some(v.parse::<f64>().map_err(|e| err(e.to_string()))?),
                "intensity_std" => std = Some(v.parse::<f64>().map_err(|e| err(e.to_string()))?),
                "target_height" => h = Some(v.parse::<usize>().map_err(|e| err(e.to_string()))?),
                "target_width" => w = Some(v.parse::<usize>().map_err(|e| err(e.to_string()))?),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::invalid(format!("plan is missing {k}"));
        Ok(Self {
            intensity_mean: mean.ok_or_else(|| missing("intensity_mean"))?,
            intensity_std: std.ok_or_else(|| missing("intensity_std"))?,
            target_height: h.ok_or_else(|| missing("target_height"))?,
            target_width: w.ok_or_else(|| missing("target_width"))?,
        })
    }
}
