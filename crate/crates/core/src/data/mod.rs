//! Image, label and probability grids, the dataset split, and the
//! synthetic shape corpus used at desk scale.

mod split;
mod store;
mod synth;
pub mod tensor_io;

pub use split::split_dataset;
pub use store::{load_dataset, save_dataset, Manifest, ManifestEntry, SplitKind};
pub use synth::{generate_synthetic, GenConfig, ShapeKind};
pub use tensor_io::{load_tensor, save_tensor, Tensor};

use crate::error::{Error, Result};

/// Intensity grid, row-major and channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::shape("image needs at least one channel"));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(format!(
                "image {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite image value at index {i}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_grid(&self, label: &LabelMap) -> bool {
        self.height == label.height && self.width == label.width
    }
}

/// Class-index grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "label {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn max_class(&self) -> u8 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// One-vs-rest binary mask for `class_id` (1 = member).
    pub fn binary(&self, class_id: u8) -> LabelMap {
        LabelMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| u8::from(v == class_id)).collect(),
        }
    }

    pub fn same_shape(&self, other: &LabelMap) -> bool {
        self.height == other.height && self.width == other.width
    }
}

/// Per-pixel class probability vectors, stored pixel-major (`num_classes`
/// consecutive entries per pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    height: usize,
    width: usize,
    num_classes: usize,
    data: Vec<f64>,
}

impl ProbMap {
    /// Builds a map, checking that every entry lies in [0, 1] and every
    /// pixel sums to one within 1e-6.
    pub fn new(height: usize, width: usize, num_classes: usize, data: Vec<f64>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::shape("probability map needs at least two classes"));
        }
        if data.len() != height * width * num_classes {
            return Err(Error::shape(format!(
                "probability map {height}x{width}x{num_classes} needs {} values, got {}",
                height * width * num_classes,
                data.len()
            )));
        }
        for (i, px) in data.chunks_exact(num_classes).enumerate() {
            if px.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!("pixel {i}: probability outside [0, 1]")));
            }
            let sum: f64 = px.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!("pixel {i}: probabilities sum to {sum}")));
            }
        }
        Ok(Self::from_raw(height, width, num_classes, data))
    }

    pub(crate) fn from_raw(height: usize, width: usize, num_classes: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * num_classes);
        Self {
            height,
            width,
            num_classes,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let start = (y * self.width + x) * self.num_classes;
        &self.data[start..start + self.num_classes]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.num_classes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Image,
    label: Option<LabelMap>,
    hidden_label: Option<LabelMap>,
}

impl Sample {
    pub fn labeled(id: impl Into<String>, image: Image, label: LabelMap) -> Result<Self> {
        if !image.same_grid(&label) {
            return Err(Error::shape(format!(
                "image {}x{} vs label {}x{}",
                image.height(),
                image.width(),
                label.height(),
                label.width()
            )));
        }
        Ok(Self {
            id: id.into(),
            image,
            label: Some(label),
            hidden_label: None,
        })
    }

    /// An unlabeled sample. `hidden_label` is kept for post-hoc analysis of
    /// pseudo-label quality only; training code never receives it.
    pub fn unlabeled(id: impl Into<String>, image: Image, hidden_label: Option<LabelMap>) -> Result<Self> {
        if let Some(l) = &hidden_label {
            if !image.same_grid(l) {
                return Err(Error::shape("hidden label does not match image grid"));
            }
        }
        Ok(Self {
            id: id.into(),
            image,
            label: None,
            hidden_label,
        })
    }

    pub fn is_labeled(&self) -> bool {
        self.label.is_some()
    }

    pub fn label(&self) -> Option<&LabelMap> {
        self.label.as_ref()
    }

    pub fn hidden_label(&self) -> Option<&LabelMap> {
        self.hidden_label.as_ref()
    }

    /// Turns a labeled sample into an unlabeled one, moving its label into
    /// the hidden slot.
    pub fn into_unlabeled(self) -> Self {
        Self {
            hidden_label: self.label.or(self.hidden_label),
            label: None,
            ..self
        }
    }

    pub fn with_image(&self, image: Image) -> Result<Self> {
        if image.height() != self.image.height() || image.width() != self.image.width() {
            return Err(Error::shape("replacement image changes the grid"));
        }
        Ok(Self {
            id: self.id.clone(),
            image,
            label: self.label.clone(),
            hidden_label: self.hidden_label.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub labeled: Vec<Sample>,
    pub unlabeled: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
    pub num_classes: usize,
}

impl DatasetSplit {
    /// Checks disjointness of the four id sets, label presence, and label
    /// range.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (kind, set) in self.parts() {
            for s in set {
                if !seen.insert(s.id.as_str()) {
                    return Err(Error::Dataset(format!("duplicate sample id {:?}", s.id)));
                }
                let label = match kind {
                    SplitKind::Unlabeled => {
                        if s.is_labeled() {
                            return Err(Error::Dataset(format!("unlabeled sample {:?} exposes a label", s.id)));
                        }
                        s.hidden_label()
                    }
                    _ => Some(s.label().ok_or_else(|| {
                        Error::Dataset(format!("{} sample {:?} has no label", kind.dir_name(), s.id))
                    })?),
                };
                if let Some(l) = label {
                    if usize::from(l.max_class()) >= self.num_classes {
                        return Err(Error::Dataset(format!(
                            "sample {:?} has class {} >= {}",
                            s.id,
                            l.max_class(),
                            self.num_classes
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn parts(&self) -> [(SplitKind, &[Sample]); 4] {
        [
            (SplitKind::Labeled, &self.labeled),
            (SplitKind::Unlabeled, &self.unlabeled),
            (SplitKind::Validation, &self.validation),
            (SplitKind::Test, &self.test),
        ]
    }
}
