//! Dataset profiling: contrast-to-noise ratio, signal-to-noise ratio and
//! foreground fraction.
//!
//! Foreground is every pixel with a non-zero label, background the rest.
//! Intensities are read from channel 0. Standard deviations use the
//! `n - 1` denominator.
//!
//! ```text
//! cnr = |mean(fg) - mean(bg)| / std(bg)
//! snr = mean(fg) / std(bg)
//! fbr = 100 * |fg| / (|fg| + |bg|)
//! ```

use crate::data::{Image, LabelMap, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityStats {
    pub cnr: f64,
    pub snr: f64,
    pub fbr: f64,
}

pub fn fbr(label: &LabelMap) -> f64 {
    let fg = label.data().iter().filter(|&&v| v != 0).count();
    100.0 * fg as f64 / label.data().len() as f64
}

struct Regions {
    fg_mean: f64,
    bg_mean: f64,
    bg_std: f64,
}

fn regions(image: &Image, label: &LabelMap) -> Result<Regions> {
    if !image.same_grid(label) {
        return Err(Error::shape("image and label grids differ"));
    }
    let c = image.channels();
    let (mut fg, mut bg) = (Vec::new(), Vec::new());
    for (px, &l) in image.data().chunks_exact(c).zip(label.data()) {
        let v = f64::from(px[0]);
        if l != 0 {
            fg.push(v);
        } else {
            bg.push(v);
        }
    }
    if fg.is_empty() {
        return Err(Error::invalid("no foreground pixels"));
    }
    if bg.len() < 2 {
        return Err(Error::invalid("fewer than two background pixels"));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let bg_mean = mean(&bg);
    let bg_var = bg.iter().map(|x| (x - bg_mean).powi(2)).sum::<f64>() / (bg.len() - 1) as f64;
    if bg_var <= 0.0 {
        return Err(Error::invalid("background has zero variance"));
    }
    Ok(Regions {
        fg_mean: mean(&fg),
        bg_mean,
        bg_std: bg_var.sqrt(),
    })
}

pub fn cnr(image: &Image, label: &LabelMap) -> Result<f64> {
    let r = regions(image, label)?;
    Ok((r.fg_mean - r.bg_mean).abs() / r.bg_std)
}

/// Signed: a negative foreground mean gives a negative ratio.
pub fn snr(image: &Image, label: &LabelMap) -> Result<f64> {
    let r = regions(image, label)?;
    Ok(r.fg_mean / r.bg_std)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageStats {
    pub sample_id: String,
    pub stats: Result<QualityStats, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub per_image: Vec<ImageStats>,
    /// Unweighted means over images whose statistics are defined.
    pub mean: Option<QualityStats>,
}

impl DatasetStats {
    pub const CSV_HEADER: &'static str = "dataset,cnr,snr,fbr_percent";

    pub fn csv_row(&self, dataset: &str) -> String {
        match self.mean {
            Some(m) => format!("{dataset},{},{},{}", m.cnr, m.snr, m.fbr),
            None => format!("{dataset},,,"),
        }
    }
}

/// Per-image statistics averaged over the dataset. Images where a ratio
/// is undefined are kept as error entries and left out of the means.
pub fn analyze_dataset(samples: &[Sample]) -> Result<DatasetStats> {
    let mut per_image = Vec::with_capacity(samples.len());
    for s in samples {
        let label = s
            .label()
            .ok_or_else(|| Error::invalid(format!("sample {:?} is unlabeled", s.id)))?;
        let stats = cnr(&s.image, label)
            .and_then(|c| Ok((c, snr(&s.image, label)?)))
            .map(|(cnr, snr)| QualityStats {
                cnr,
                snr,
                fbr: fbr(label),
            })
            .map_err(|e| e.to_string());
        per_image.push(ImageStats {
            sample_id: s.id.clone(),
            stats,
        });
    }
    let ok: Vec<QualityStats> = per_image.iter().filter_map(|p| p.stats.clone().ok()).collect();
    let mean = (!ok.is_empty()).then(|| {
        let n = ok.len() as f64;
        QualityStats {
            cnr: ok.iter().map(|s| s.cnr).sum::<f64>() / n,
            snr: ok.iter().map(|s| s.snr).sum::<f64>() / n,
            fbr: ok.iter().map(|s| s.fbr).sum::<f64>() / n,
        }
    });
    Ok(DatasetStats { per_image, mean })
}
