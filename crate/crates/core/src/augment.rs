//! Weak (intensity + integer shift) and strong (quarter-turn / flip)
//! augmentation, with exact transport of label maps between views.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Image, LabelMap, ProbMap};
use crate::error::{Error, Result};

/// Lossless grid transform: `rot_quarter_turns` quarter turns applied
/// first, then the horizontal flip, then the vertical flip.
///
/// One quarter turn on an `n x n` grid maps `out[i][j] = in[n-1-j][i]`,
/// so `[[1,2],[3,4]]` becomes `[[3,1],[4,2]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GeoTransform {
    pub rot_quarter_turns: u8,
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
}

impl GeoTransform {
    pub const IDENTITY: GeoTransform = GeoTransform {
        rot_quarter_turns: 0,
        flip_horizontal: false,
        flip_vertical: false,
    };

    pub fn new(rot_quarter_turns: u8, flip_horizontal: bool, flip_vertical: bool) -> Self {
        Self {
            rot_quarter_turns: rot_quarter_turns % 4,
            flip_horizontal,
            flip_vertical,
        }
    }

    /// All 16 parameter combinations (each of the 8 grid symmetries twice).
    pub fn all() -> impl Iterator<Item = GeoTransform> {
        (0..16u8).map(|b| GeoTransform::new(b & 3, b & 4 != 0, b & 8 != 0))
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        GeoTransform::new(rng.random_range(0..4), rng.random(), rng.random())
    }

    pub fn is_identity(&self) -> bool {
        self.forward(0, 0, 2, 2) == (0, 0) && self.forward(0, 1, 2, 2) == (0, 1) && self.forward(1, 0, 2, 2) == (1, 0)
    }

    pub fn inverse(&self) -> Self {
        let k = self.rot_quarter_turns % 4;
        match (self.flip_horizontal, self.flip_vertical) {
            (false, false) => GeoTransform::new((4 - k) % 4, false, false),
            // both flips compose to a half turn
            (true, true) => GeoTransform::new((6 - k) % 4, false, false),
            // a single reflection after a rotation is an involution
            _ => *self,
        }
    }

    pub fn check_grid(&self, height: usize, width: usize) -> Result<()> {
        if self.rot_quarter_turns % 2 == 1 && height != width {
            return Err(Error::shape(format!(
                "odd quarter-turn rotation needs a square grid, got {height}x{width}"
            )));
        }
        Ok(())
    }

    /// Destination of source pixel `(y, x)`.
    #[inline]
    pub fn forward(&self, y: usize, x: usize, height: usize, width: usize) -> (usize, usize) {
        let (mut y, mut x) = match self.rot_quarter_turns % 4 {
            0 => (y, x),
            1 => (x, height - 1 - y),
            2 => (height - 1 - y, width - 1 - x),
            _ => (width - 1 - x, y),
        };
        if self.flip_horizontal {
            x = width - 1 - x;
        }
        if self.flip_vertical {
            y = height - 1 - y;
        }
        (y, x)
    }

    /// Permutes a row-major grid of `stride`-sized pixels.
    pub fn apply_grid<T: Copy + Default>(&self, data: &[T], height: usize, width: usize, stride: usize) -> Result<Vec<T>> {
        self.check_grid(height, width)?;
        if data.len() != height * width * stride {
            return Err(Error::shape("grid data length does not match its dimensions"));
        }
        let mut out = vec![T::default(); data.len()];
        for y in 0..height {
            for x in 0..width {
                let (ty, tx) = self.forward(y, x, height, width);
                let src = (y * width + x) * stride;
                let dst = (ty * width + tx) * stride;
                out[dst..dst + stride].copy_from_slice(&data[src..src + stride]);
            }
        }
        Ok(out)
    }

    pub fn apply_image(&self, image: &Image) -> Result<Image> {
        let data = self.apply_grid(image.data(), image.height(), image.width(), image.channels())?;
        Image::new(image.height(), image.width(), image.channels(), data)
    }

    pub fn apply_probmap(&self, p: &ProbMap) -> Result<ProbMap> {
        let data = self.apply_grid(p.data(), p.height(), p.width(), p.num_classes())?;
        Ok(ProbMap::from_raw(p.height(), p.width(), p.num_classes(), data))
    }
}

/// Moves a label map through the same grid bijection as [`strong_augment`]
/// applied to the image.
pub fn transport_label(label: &LabelMap, t: &GeoTransform) -> Result<LabelMap> {
    let data = t.apply_grid(label.data(), label.height(), label.width(), 1)?;
    LabelMap::new(label.height(), label.width(), data)
}

/// Draws a uniform [`GeoTransform`] and applies it. Odd rotations on
/// non-square images are an error.
pub fn strong_augment<R: Rng + ?Sized>(image: &Image, rng: &mut R) -> Result<(Image, GeoTransform)> {
    let t = GeoTransform::sample(rng);
    Ok((t.apply_image(image)?, t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakAugConfig {
    pub scale_range: (f32, f32),
    pub noise_sigma_max: f32,
    pub brightness_shift_max: f32,
    pub contrast_range: (f32, f32),
    pub shift_max: usize,
}

impl Default for WeakAugConfig {
    fn default() -> Self {
        Self {
            scale_range: (0.9, 1.1),
            noise_sigma_max: 0.1,
            brightness_shift_max: 0.1,
            contrast_range: (0.9, 1.1),
            shift_max: 2,
        }
    }
}

impl WeakAugConfig {
    pub fn identity() -> Self {
        Self {
            scale_range: (1.0, 1.0),
            noise_sigma_max: 0.0,
            brightness_shift_max: 0.0,
            contrast_range: (1.0, 1.0),
            shift_max: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_range = |(lo, hi): (f32, f32)| lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi;
        if !ok_range(self.scale_range) {
            return Err(Error::invalid("weak scale_range must satisfy 0 <= lo <= hi"));
        }
        if !ok_range(self.contrast_range) {
            return Err(Error::invalid("weak contrast_range must satisfy 0 <= lo <= hi"));
        }
        if !(self.noise_sigma_max >= 0.0 && self.brightness_shift_max >= 0.0) {
            return Err(Error::invalid("weak noise/brightness bounds must be >= 0"));
        }
        Ok(())
    }
}

/// Parameters drawn for one weak augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakParams {
    pub scale: f32,
    pub contrast: f32,
    pub brightness: f32,
    pub noise_sigma: f32,
    pub dx: isize,
    pub dy: isize,
}

impl WeakParams {
    pub fn draw<R: Rng + ?Sized>(cfg: &WeakAugConfig, rng: &mut R) -> Self {
        let b = cfg.brightness_shift_max;
        let s = cfg.shift_max as i64;
        Self {
            scale: rng.random_range(cfg.scale_range.0..=cfg.scale_range.1),
            contrast: rng.random_range(cfg.contrast_range.0..=cfg.contrast_range.1),
            brightness: rng.random_range(-b..=b),
            noise_sigma: rng.random_range(0.0..=cfg.noise_sigma_max),
            dx: rng.random_range(-s..=s) as isize,
            dy: rng.random_range(-s..=s) as isize,
        }
    }
}

/// Weak view: intensity scale, contrast about the image mean, brightness
/// shift, additive Gaussian noise, then an integer translation with zero
/// fill. A label, when given, receives the translation only.
pub fn weak_augment<R: Rng + ?Sized>(
    image: &Image,
    label: Option<&LabelMap>,
    cfg: &WeakAugConfig,
    rng: &mut R,
) -> Result<(Image, Option<LabelMap>)> {
    if let Some(l) = label {
        if !image.same_grid(l) {
            return Err(Error::shape("weak_augment: image and label grids differ"));
        }
    }
    let p = WeakParams::draw(cfg, rng);
    let mut out = image.clone();
    let data = out.data_mut();
    if p.scale != 1.0 {
        data.iter_mut().for_each(|v| *v *= p.scale);
    }
    if p.contrast != 1.0 {
        let mean = (data.iter().map(|&v| f64::from(v)).sum::<f64>() / data.len() as f64) as f32;
        data.iter_mut().for_each(|v| *v = (*v - mean) * p.contrast + mean);
    }
    if p.brightness != 0.0 {
        data.iter_mut().for_each(|v| *v += p.brightness);
    }
    if p.noise_sigma > 0.0 {
        for v in data.iter_mut() {
            let z: f32 = StandardNormal.sample(rng);
            *v += p.noise_sigma * z;
        }
    }
    let image = if p.dx != 0 || p.dy != 0 {
        let (h, w, c) = (out.height(), out.width(), out.channels());
        Image::new(h, w, c, translate(out.data(), h, w, c, p.dx, p.dy))?
    } else {
        out
    };
    let label = label
        .map(|l| {
            if p.dx != 0 || p.dy != 0 {
                LabelMap::new(l.height(), l.width(), translate(l.data(), l.height(), l.width(), 1, p.dx, p.dy))
            } else {
                Ok(l.clone())
            }
        })
        .transpose()?;
    Ok((image, label))
}

/// `out[y][x] = in[y - dy][x - dx]`, zero outside.
pub fn translate<T: Copy + Default>(data: &[T], h: usize, w: usize, stride: usize, dx: isize, dy: isize) -> Vec<T> {
    let mut out = vec![T::default(); data.len()];
    for y in 0..h {
        let sy = y as isize - dy;
        if sy < 0 || sy >= h as isize {
            continue;
        }
        for x in 0..w {
            let sx = x as isize - dx;
            if sx < 0 || sx >= w as isize {
                continue;
            }
            let src = (sy as usize * w + sx as usize) * stride;
            let dst = (y * w + x) * stride;
            out[dst..dst + stride].copy_from_slice(&data[src..src + stride]);
        }
    }
    out
}
