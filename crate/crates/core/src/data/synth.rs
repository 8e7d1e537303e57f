use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Image, LabelMap, Sample};
use crate::error::{Error, Result};

const MAX_PLACEMENT_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Ellipse,
    Rectangle,
}

impl std::str::FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ellipse" => Ok(ShapeKind::Ellipse),
            "rectangle" => Ok(ShapeKind::Rectangle),
            other => Err(Error::invalid(format!("unknown shape kind {other:?}"))),
        }
    }
}

/// Synthetic corpus parameters. Each image is a zero background with one
/// filled shape per foreground class, shifted by `class_offset * class`,
/// plus Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub num_classes: usize,
    pub noise_sigma: f32,
    pub shape_kinds: Vec<ShapeKind>,
    pub class_offset: f32,
    /// Semi-axis bounds as fractions of the shorter image side.
    pub min_axis_frac: f32,
    pub max_axis_frac: f32,
    /// A shape is resampled when it paints fewer pixels than this fraction
    /// of the image (and always when it paints none).
    pub min_visible_frac: f32,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            count: 200,
            height: 32,
            width: 32,
            num_classes: 3,
            noise_sigma: 0.8,
            shape_kinds: vec![ShapeKind::Ellipse, ShapeKind::Rectangle],
            class_offset: 1.0,
            min_axis_frac: 0.1,
            max_axis_frac: 0.22,
            min_visible_frac: 0.005,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("count must be >= 1"));
        }
        if self.num_classes < 2 || self.num_classes > 256 {
            return Err(Error::invalid("num_classes must be in 2..=256"));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::invalid("image size must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be >= 0"));
        }
        if self.shape_kinds.is_empty() {
            return Err(Error::invalid("shape_kinds must not be empty"));
        }
        if !(self.min_axis_frac > 0.0 && self.min_axis_frac <= self.max_axis_frac) {
            return Err(Error::invalid("need 0 < min_axis_frac <= max_axis_frac"));
        }
        Ok(())
    }
}

pub fn generate_synthetic(cfg: &GenConfig, seed: u64) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (cfg.count - 1).to_string().len().max(4);
    (0..cfg.count)
        .map(|i| {
            let (image, label) = generate_one(cfg, &mut rng)?;
            Sample::labeled(format!("s{i:0width$}"), image, label)
        })
        .collect()
}

fn generate_one(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Result<(Image, LabelMap)> {
    let (h, w) = (cfg.height, cfg.width);
    let mut classes: Vec<u8> = (1..cfg.num_classes).map(|c| c as u8).collect();
    classes.shuffle(rng);
    let k = rng.random_range(1..cfg.num_classes);
    classes.truncate(k);

    let side = h.min(w) as f32;
    let min_visible = ((cfg.min_visible_frac * (h * w) as f32).ceil() as usize).max(1);
    let mut label = LabelMap::zeros(h, w);
    for &class in &classes {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let kind = *cfg.shape_kinds.choose(rng).expect("validated non-empty");
            let cy = rng.random_range(0.0..h as f32);
            let cx = rng.random_range(0.0..w as f32);
            let ay = rng.random_range(cfg.min_axis_frac..=cfg.max_axis_frac) * side;
            let ax = rng.random_range(cfg.min_axis_frac..=cfg.max_axis_frac) * side;
            // new shapes only claim background pixels
            let cells: Vec<usize> = (0..h * w)
                .filter(|&idx| {
                    let (y, x) = ((idx / w) as f32 + 0.5, (idx % w) as f32 + 0.5);
                    label.data()[idx] == 0 && inside(kind, y - cy, x - cx, ay, ax)
                })
                .collect();
            if cells.len() >= min_visible {
                for idx in cells {
                    label.data_mut()[idx] = class;
                }
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Generation(format!(
                "could not place a visible shape for class {class} after {MAX_PLACEMENT_ATTEMPTS} attempts"
            )));
        }
    }

    let noise = Normal::new(0.0f32, cfg.noise_sigma).map_err(|e| Error::Generation(e.to_string()))?;
    let data = label
        .data()
        .iter()
        .map(|&c| {
            let base = f32::from(c) * cfg.class_offset;
            if cfg.noise_sigma > 0.0 {
                base + noise.sample(rng)
            } else {
                base
            }
        })
        .collect();
    Ok((Image::new(h, w, 1, data)?, label))
}

fn inside(kind: ShapeKind, dy: f32, dx: f32, ay: f32, ax: f32) -> bool {
    match kind {
        ShapeKind::Ellipse => (dy / ay).powi(2) + (dx / ax).powi(2) <= 1.0,
        ShapeKind::Rectangle => dy.abs() <= ay && dx.abs() <= ax,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn deterministic_per_seed() {
        let cfg = GenConfig {
            count: 5,
            ..Default::default()
        };
        let a = generate_synthetic(&cfg, 11).unwrap();
        let b = generate_synthetic(&cfg, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&cfg, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_single_ellipse_has_two_levels() {
        let cfg = GenConfig {
            count: 3,
            num_classes: 2,
            noise_sigma: 0.0,
            shape_kinds: vec![ShapeKind::Ellipse],
            ..Default::default()
        };
        for s in generate_synthetic(&cfg, 3).unwrap() {
            let levels: BTreeSet<u32> = s.image.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(levels.len(), 2);
            let label = s.label().unwrap();
            for (v, &c) in s.image.data().iter().zip(label.data()) {
                assert_eq!(*v, f32::from(c) * cfg.class_offset);
            }
        }
    }

    #[test]
    fn labels_stay_in_range() {
        let cfg = GenConfig {
            count: 30,
            num_classes: 4,
            ..Default::default()
        };
        for s in generate_synthetic(&cfg, 5).unwrap() {
            assert!(usize::from(s.label().unwrap().max_class()) < 4);
            assert!(s.label().unwrap().max_class() >= 1);
        }
    }

    #[test]
    fn impossible_placement_errors() {
        // every shape paints at most 1 pixel of a 2x2 image but needs 3
        let cfg = GenConfig {
            count: 1,
            height: 2,
            width: 2,
            num_classes: 2,
            min_axis_frac: 0.01,
            max_axis_frac: 0.01,
            min_visible_frac: 0.75,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic(&cfg, 0), Err(Error::Generation(_))));
    }

    #[test]
    fn invalid_configs() {
        let base = GenConfig::default();
        assert!(generate_synthetic(&GenConfig { count: 0, ..base.clone() }, 0).is_err());
        assert!(generate_synthetic(&GenConfig { num_classes: 1, ..base.clone() }, 0).is_err());
        assert!(generate_synthetic(&GenConfig { noise_sigma: -1.0, ..base }, 0).is_err());
    }
}
