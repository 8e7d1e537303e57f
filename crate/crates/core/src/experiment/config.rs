use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::GenConfig;
use crate::error::{Error, Result};
use crate::ssl::{Mode, TrainConfig};

/// Everything one experiment needs, read from a `key=value` file.
///
/// Lines are `key = value`; `#` starts a comment; blank lines are skipped.
/// Unknown and repeated keys are errors. Missing keys keep the defaults
/// below.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub gen: GenConfig,
    pub gen_seed: u64,
    pub labeled_ratio: f64,
    pub val_count: usize,
    pub test_count: usize,
    pub split_seed: u64,
    pub train: TrainConfig,
    pub dataset_name: String,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gen: GenConfig::default(),
            gen_seed: 0,
            labeled_ratio: 0.05,
            val_count: 20,
            test_count: 40,
            split_seed: 0,
            train: TrainConfig::default(),
            dataset_name: "synthetic".to_string(),
            data_dir: None,
            out_dir: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "count",
    "height",
    "width",
    "num_classes",
    "noise_sigma",
    "shape_kinds",
    "class_offset",
    "min_axis_frac",
    "max_axis_frac",
    "min_visible_frac",
    "gen_seed",
    "labeled_ratio",
    "val_count",
    "test_count",
    "split_seed",
    "mode",
    "max_epochs",
    "warmup_epochs",
    "filter_interval",
    "drop_fraction",
    "batch_size",
    "iters_per_epoch",
    "lr0",
    "weight_decay",
    "momentum",
    "seed",
    "stage_channels",
    "weak_scale_min",
    "weak_scale_max",
    "weak_contrast_min",
    "weak_contrast_max",
    "weak_brightness_max",
    "weak_noise_sigma_max",
    "weak_shift_max",
    "dataset_name",
    "data_dir",
    "out_dir",
];

fn parse<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Config {
        line,
        message: format!("{key}: cannot parse {v:?}: {e}"),
    })
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(|p| parse(line, key, p.trim())).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected key=value, got {content:?}"),
            })?;
            let (key, v) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key {key:?}"),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key {key:?}"),
                });
            }
            let g = &mut cfg.gen;
            let t = &mut cfg.train;
            match key {
                "count" => g.count = parse(line, key, v)?,
                "height" => g.height = parse(line, key, v)?,
                "width" => g.width = parse(line, key, v)?,
                "num_classes" => g.num_classes = parse(line, key, v)?,
                "noise_sigma" => g.noise_sigma = parse(line, key, v)?,
                "shape_kinds" => g.shape_kinds = parse_list(line, key, v)?,
                "class_offset" => g.class_offset = parse(line, key, v)?,
                "min_axis_frac" => g.min_axis_frac = parse(line, key, v)?,
                "max_axis_frac" => g.max_axis_frac = parse(line, key, v)?,
                "min_visible_frac" => g.min_visible_frac = parse(line, key, v)?,
                "gen_seed" => cfg.gen_seed = parse(line, key, v)?,
                "labeled_ratio" => cfg.labeled_ratio = parse(line, key, v)?,
                "val_count" => cfg.val_count = parse(line, key, v)?,
                "test_count" => cfg.test_count = parse(line, key, v)?,
                "split_seed" => cfg.split_seed = parse(line, key, v)?,
                "mode" => t.mode = v.parse::<Mode>().map_err(|e| Error::Config { line, message: e.to_string() })?,
                "max_epochs" => t.max_epochs = parse(line, key, v)?,
                "warmup_epochs" => t.warmup_epochs = parse(line, key, v)?,
                "filter_interval" => t.filter_interval = parse(line, key, v)?,
                "drop_fraction" => t.drop_fraction = parse(line, key, v)?,
                "batch_size" => t.batch_size = parse(line, key, v)?,
                "iters_per_epoch" => t.iters_per_epoch = parse(line, key, v)?,
                "lr0" => t.lr0 = parse(line, key, v)?,
                "weight_decay" => t.weight_decay = parse(line, key, v)?,
                "momentum" => t.momentum = parse(line, key, v)?,
                "seed" => t.seed = parse(line, key, v)?,
                "stage_channels" => t.stage_channels = parse_list(line, key, v)?,
                "weak_scale_min" => t.weak_aug.scale_range.0 = parse(line, key, v)?,
                "weak_scale_max" => t.weak_aug.scale_range.1 = parse(line, key, v)?,
                "weak_contrast_min" => t.weak_aug.contrast_range.0 = parse(line, key, v)?,
                "weak_contrast_max" => t.weak_aug.contrast_range.1 = parse(line, key, v)?,
                "weak_brightness_max" => t.weak_aug.brightness_shift_max = parse(line, key, v)?,
                "weak_noise_sigma_max" => t.weak_aug.noise_sigma_max = parse(line, key, v)?,
                "weak_shift_max" => t.weak_aug.shift_max = parse(line, key, v)?,
                "dataset_name" => cfg.dataset_name = v.to_string(),
                "data_dir" => cfg.data_dir = Some(PathBuf::from(v)),
                "out_dir" => cfg.out_dir = Some(PathBuf::from(v)),
                _ => unreachable!("key list and match arms agree"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data_dir, &mut cfg.out_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Field-level checks, reported as configuration errors.
    pub fn validate(&self) -> Result<()> {
        let as_config = |e: Error| Error::Config {
            line: 0,
            message: e.to_string(),
        };
        self.gen.validate().map_err(as_config)?;
        self.train.validate().map_err(as_config)?;
        if !(self.labeled_ratio > 0.0 && self.labeled_ratio <= 1.0) {
            return Err(as_config(Error::invalid(format!(
                "labeled_ratio {} not in (0, 1]",
                self.labeled_ratio
            ))));
        }
        if self.val_count + self.test_count >= self.gen.count {
            return Err(as_config(Error::invalid("val_count + test_count must leave a training pool")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ShapeKind;

    #[test]
    fn empty_file_gives_documented_defaults() {
        let c = ExperimentConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c.train.max_epochs, 300);
        assert_eq!(c.train.filter_interval, 100);
        assert_eq!(c.train.drop_fraction, 0.15);
        assert_eq!((c.train.lr0, c.train.weight_decay, c.train.momentum), (0.005, 0.003, 0.9));
    }

    #[test]
    fn parses_values_and_comments() {
        let c = ExperimentConfig::parse(
            "max_epochs = 60  # short\nmode=SSL\nstage_channels=4,8\nshape_kinds=rectangle\nweak_shift_max=0\n",
        )
        .unwrap();
        assert_eq!(c.train.max_epochs, 60);
        assert_eq!(c.train.mode, Mode::Ssl);
        assert_eq!(c.train.stage_channels, vec![4, 8]);
        assert_eq!(c.gen.shape_kinds, vec![ShapeKind::Rectangle]);
        assert_eq!(c.train.weak_aug.shift_max, 0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |text: &str| match ExperimentConfig::parse(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(line_of("seed=1\n\nseed=2\n"), 3);
        assert_eq!(line_of("# c\nbogus=1\n"), 2);
        assert_eq!(line_of("lr0=fast\n"), 1);
        assert_eq!(line_of("no equals sign\n"), 1);
        assert_eq!(line_of("mode=FULL\n"), 1);
        assert_eq!(line_of("drop_fraction=1.5\n"), 0);
    }

    #[test]
    fn every_key_is_accepted() {
        for k in KEYS {
            let v = match *k {
                "mode" => "SL",
                "shape_kinds" => "ellipse",
                "stage_channels" => "4,8",
                "dataset_name" | "data_dir" | "out_dir" => "x",
                "labeled_ratio" | "drop_fraction" | "noise_sigma" | "lr0" | "momentum" => "0.5",
                "count" => "100",
                "height" | "width" => "16",
                "num_classes" => "3",
                "min_axis_frac" | "max_axis_frac" | "min_visible_frac" => "0.2",
                "weak_scale_min" | "weak_scale_max" | "weak_contrast_min" | "weak_contrast_max" => "1",
                "max_epochs" | "filter_interval" | "batch_size" | "iters_per_epoch" => "10",
                _ => "1",
            };
            ExperimentConfig::parse(&format!("{k}={v}\n")).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }
}
