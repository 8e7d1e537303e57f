use std::fmt;
use std::str::FromStr;

use crate::augment::WeakAugConfig;
use crate::error::{Error, Result};

/// Ablation arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Labeled data only.
    Sl,
    /// Weak-to-strong pseudo-label consistency after warm-up.
    Ssl,
    /// [`Mode::Ssl`] plus recurring entropy filtering of the unlabeled set.
    SslAl,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Sl, Mode::Ssl, Mode::SslAl];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Sl => "SL",
            Mode::Ssl => "SSL",
            Mode::SslAl => "SSL_AL",
        }
    }

    pub fn uses_unlabeled(&self) -> bool {
        !matches!(self, Mode::Sl)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "SL" => Ok(Mode::Sl),
            "SSL" => Ok(Mode::Ssl),
            "SSL_AL" => Ok(Mode::SslAl),
            other => Err(Error::invalid(format!("unknown mode {other:?} (expected SL, SSL or SSL_AL)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub max_epochs: usize,
    /// Supervised-only epochs at the start (epochs `1..=warmup_epochs`).
    pub warmup_epochs: usize,
    /// Filtering runs at every positive multiple of this epoch count.
    pub filter_interval: usize,
    /// Fraction of the active unlabeled set dropped per filter round.
    pub drop_fraction: f64,
    pub batch_size: usize,
    pub iters_per_epoch: usize,
    pub lr0: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub seed: u64,
    pub weak_aug: WeakAugConfig,
    pub stage_channels: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::SslAl,
            max_epochs: 300,
            warmup_epochs: 5,
            filter_interval: 100,
            drop_fraction: 0.15,
            batch_size: 4,
            iters_per_epoch: 10,
            lr0: 0.005,
            weight_decay: 0.003,
            momentum: 0.9,
            seed: 0,
            weak_aug: WeakAugConfig::default(),
            stage_channels: vec![8, 16, 32],
        }
    }
}

impl TrainConfig {
    /// Warm-up may equal `max_epochs`, which makes a run purely supervised.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.warmup_epochs > self.max_epochs {
            return bad(format!(
                "warmup_epochs {} exceeds max_epochs {}",
                self.warmup_epochs, self.max_epochs
            ));
        }
        if self.filter_interval == 0 {
            return bad("filter_interval must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.drop_fraction) {
            return bad(format!("drop_fraction {} not in [0, 1)", self.drop_fraction));
        }
        if self.batch_size == 0 || self.iters_per_epoch == 0 {
            return bad("batch_size and iters_per_epoch must be at least 1".into());
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return bad(format!("lr0 {} must be positive", self.lr0));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay {} must be non-negative", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} not in [0, 1)", self.momentum));
        }
        if self.stage_channels.is_empty() || self.stage_channels.contains(&0) {
            return bad("stage_channels must be non-empty and positive".into());
        }
        self.weak_aug.validate()
    }

    /// Warm-up length used at a given labeled fraction: 5 epochs at 5 %
    /// labels, 20 at 10 %.
    pub fn warmup_for_label_ratio(ratio: f64) -> usize {
        if ratio <= 0.05 + 1e-9 {
            5
        } else {
            20
        }
    }
}
