//! Compact encoder-decoder segmentation network with analytic gradients.
//!
//! With `stage_channels = [c0, c1, ..., cS]` the network is
//!
//! ```text
//! enc0 = elu(conv3x3(input))                  c0 channels, full resolution
//! enc_s = elu(conv3x3(maxpool2(enc_{s-1})))   c_s channels, 1/2^s resolution
//! dec_S = enc_S
//! dec_s = elu(conv3x3(concat(up2(dec_{s+1}), enc_s)))   c_s channels
//! probs = softmax(conv1x1(dec_0))             per pixel over classes
//! ```

mod checkpoint;
pub mod ops;
mod optim;
mod perturb;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use optim::{poly_lr, sgd_step, OptimState, LR_DECAY_EXPONENT};
pub use perturb::ForwardTape;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Image, ProbMap};
use crate::error::{Error, Result};
use ops::{ConvParams, Fmap};

pub const KERNEL_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_channels: usize,
    pub num_classes: usize,
    pub stage_channels: Vec<usize>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            input_channels: 1,
            num_classes: 3,
            stage_channels: vec![8, 16, 32],
        }
    }
}

impl NetworkSpec {
    pub fn new(input_channels: usize, num_classes: usize, stage_channels: Vec<usize>) -> Result<Self> {
        let spec = Self {
            input_channels,
            num_classes,
            stage_channels,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 {
            return Err(Error::invalid("network needs at least one input channel"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("network needs at least two classes"));
        }
        if self.stage_channels.is_empty() || self.stage_channels.contains(&0) {
            return Err(Error::invalid("stage_channels must be non-empty and positive"));
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.stage_channels.len()
    }

    /// Height and width must be divisible by this.
    pub fn size_divisor(&self) -> usize {
        1 << (self.stages() - 1)
    }

    pub fn check_input(&self, height: usize, width: usize, channels: usize) -> Result<()> {
        let d = self.size_divisor();
        if height == 0 || width == 0 || height % d != 0 || width % d != 0 {
            return Err(Error::shape(format!(
                "input {height}x{width} not divisible by {d} for {} stages",
                self.stages()
            )));
        }
        if channels != self.input_channels {
            return Err(Error::shape(format!(
                "input has {channels} channels, network expects {}",
                self.input_channels
            )));
        }
        Ok(())
    }

    /// Layer shapes in storage order: encoders, decoders (deepest first),
    /// then the 1x1 head.
    fn layer_shapes(&self) -> Vec<(usize, usize, usize)> {
        let ch = &self.stage_channels;
        let s = ch.len();
        let mut shapes = Vec::with_capacity(2 * s);
        for i in 0..s {
            let in_c = if i == 0 { self.input_channels } else { ch[i - 1] };
            shapes.push((ch[i], in_c, KERNEL_SIZE));
        }
        for i in (0..s - 1).rev() {
            shapes.push((ch[i], ch[i + 1] + ch[i], KERNEL_SIZE));
        }
        shapes.push((self.num_classes, ch[0], 1));
        shapes
    }
}

/// Weights and biases of every layer, in [`NetworkSpec`] storage order.
/// The same shape doubles as a gradient and momentum container.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub spec: NetworkSpec,
    pub layers: Vec<ConvParams>,
}

pub type Gradients = NetworkParams;

impl NetworkParams {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self {
            spec: spec.clone(),
            layers: spec
                .layer_shapes()
                .into_iter()
                .map(|(o, i, k)| ConvParams::zeros(o, i, k))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.spec)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(&l.bias))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Flat-index access in [`values`](Self::values) order.
    pub fn value_mut(&mut self, index: usize) -> Option<&mut f64> {
        let (l, i) = self.locate(index)?;
        let layer = &mut self.layers[l];
        let nw = layer.weight.len();
        Some(if i < nw { &mut layer.weight[i] } else { &mut layer.bias[i - nw] })
    }

    /// Layer and within-layer offset (weights first, then biases) of a flat
    /// index.
    pub fn locate(&self, index: usize) -> Option<(usize, usize)> {
        let mut i = index;
        for (l, layer) in self.layers.iter().enumerate() {
            let len = layer.weight.len() + layer.bias.len();
            if i < len {
                return Some((l, i));
            }
            i -= len;
        }
        None
    }

    pub fn same_shape(&self, other: &NetworkParams) -> bool {
        self.layers.len() == other.layers.len() && self.layers.iter().zip(&other.layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn add_assign(&mut self, other: &NetworkParams) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.values_mut().for_each(|v| *v *= k);
    }

    pub fn all_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }
}

/// He-style initialization: weights ~ N(0, 2 / fan_in), biases zero.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> Result<NetworkParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = NetworkParams::zeros(spec);
    for layer in &mut params.layers {
        let std = (2.0 / layer.fan_in() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        layer.weight.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
    }
    Ok(params)
}

/// Intermediate activations kept for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    height: usize,
    width: usize,
    /// Input to each encoder conv.
    enc_in: Vec<Fmap>,
    /// Post-activation encoder outputs.
    enc_out: Vec<Fmap>,
    pool_idx: Vec<Vec<usize>>,
    /// Decoder inputs/outputs indexed by stage (deepest decoder last
    /// filled); `None` for the bottleneck stage.
    dec_in: Vec<Option<Fmap>>,
    dec_out: Vec<Option<Fmap>>,
    probs: Vec<f64>,
}

impl ForwardCache {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

fn image_to_fmap(image: &Image) -> Fmap {
    let (h, w, c) = (image.height(), image.width(), image.channels());
    let mut f = Fmap::zeros(c, h, w);
    for (i, px) in image.data().chunks_exact(c).enumerate() {
        for (ch, &v) in px.iter().enumerate() {
            f.data[ch * h * w + i] = f64::from(v);
        }
    }
    f
}

/// Logits in CHW layout, before softmax.
fn forward_features(params: &NetworkParams, x: Fmap) -> (Fmap, ForwardCache) {
    let s = params.spec.stages();
    let (height, width) = (x.h, x.w);
    let mut enc_in = Vec::with_capacity(s);
    let mut enc_out: Vec<Fmap> = Vec::with_capacity(s);
    let mut pool_idx = Vec::with_capacity(s.saturating_sub(1));
    let mut input = x;
    for i in 0..s {
        if i > 0 {
            let (pooled, idx) = ops::maxpool2(&enc_out[i - 1]);
            pool_idx.push(idx);
            input = pooled;
        }
        let mut y = ops::conv_forward(&input, &params.layers[i]);
        ops::elu_inplace(&mut y);
        enc_in.push(input.clone());
        enc_out.push(y);
    }
    let mut dec_in: Vec<Option<Fmap>> = vec![None; s];
    let mut dec_out: Vec<Option<Fmap>> = vec![None; s];
    let mut current = enc_out[s - 1].clone();
    for (j, i) in (0..s - 1).rev().enumerate() {
        let cat = ops::concat(&ops::upsample2(&current), &enc_out[i]);
        let mut y = ops::conv_forward(&cat, &params.layers[s + j]);
        ops::elu_inplace(&mut y);
        dec_in[i] = Some(cat);
        current = y.clone();
        dec_out[i] = Some(y);
    }
    let logits = ops::conv_forward(&current, params.layers.last().expect("head layer"));
    let cache = ForwardCache {
        height,
        width,
        enc_in,
        enc_out,
        pool_idx,
        dec_in,
        dec_out,
        probs: Vec::new(),
    };
    (logits, cache)
}

/// Numerically stable per-pixel softmax of CHW logits into pixel-major
/// probabilities.
pub fn softmax_pixels(logits: &Fmap) -> Vec<f64> {
    let n = logits.h * logits.w;
    let c = logits.c;
    let mut out = vec![0.0; n * c];
    let mut z = vec![0.0; c];
    for p in 0..n {
        for k in 0..c {
            z[k] = logits.data[k * n + p];
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for k in 0..c {
            let e = (z[k] - m).exp();
            out[p * c + k] = e;
            sum += e;
        }
        for v in &mut out[p * c..(p + 1) * c] {
            *v /= sum;
        }
    }
    out
}

/// Evaluates the network on one image.
pub fn forward(params: &NetworkParams, image: &Image) -> Result<(ProbMap, ForwardCache)> {
    params.spec.check_input(image.height(), image.width(), image.channels())?;
    let (logits, mut cache) = forward_features(params, image_to_fmap(image));
    let probs = softmax_pixels(&logits);
    cache.probs = probs.clone();
    Ok((
        ProbMap::from_raw(image.height(), image.width(), params.spec.num_classes, probs),
        cache,
    ))
}

/// Forward pass without keeping the cache.
pub fn predict(params: &NetworkParams, image: &Image) -> Result<ProbMap> {
    forward(params, image).map(|(p, _)| p)
}

/// Exact parameter gradients given dL/dlogits in pixel-major
/// `[height][width][class]` layout.
pub fn backward(params: &NetworkParams, cache: &ForwardCache, grad_logits: &[f64]) -> Result<Gradients> {
    let s = params.spec.stages();
    let c = params.spec.num_classes;
    let n = cache.height * cache.width;
    if cache.enc_out.len() != s
        || params.layers.len() != 2 * s
        || cache.enc_in.first().map(|f| f.c) != Some(params.spec.input_channels)
        || cache.enc_out.iter().zip(&params.layers).any(|(f, l)| f.c != l.out_c)
    {
        return Err(Error::shape("forward cache does not belong to these parameters"));
    }
    if grad_logits.len() != n * c {
        return Err(Error::shape(format!(
            "logit gradient has {} entries, expected {}",
            grad_logits.len(),
            n * c
        )));
    }
    let mut grads = params.zeros_like();

    let mut g = Fmap::zeros(c, cache.height, cache.width);
    for p in 0..n {
        for k in 0..c {
            g.data[k * n + p] = grad_logits[p * c + k];
        }
    }
    let head_in = if s == 1 {
        &cache.enc_out[0]
    } else {
        cache.dec_out[0].as_ref().expect("decoder output")
    };
    let head = params.layers.len() - 1;
    let mut g_cur = ops::conv_backward(head_in, &params.layers[head], &g, &mut grads.layers[head]);

    // gradients flowing into each encoder output from its skip connection
    let mut skip_grads: Vec<Option<Fmap>> = vec![None; s];
    for i in 0..s - 1 {
        let layer = s + (s - 2 - i);
        let out = cache.dec_out[i].as_ref().expect("decoder output");
        ops::elu_backward(out, &mut g_cur);
        let cat = cache.dec_in[i].as_ref().expect("decoder input");
        let g_cat = ops::conv_backward(cat, &params.layers[layer], &g_cur, &mut grads.layers[layer]);
        let up_c = params.spec.stage_channels[i + 1];
        let (g_up, g_skip) = ops::split_channels(g_cat, up_c);
        skip_grads[i] = Some(g_skip);
        g_cur = ops::upsample2_backward(&g_up);
    }
    for i in (0..s).rev() {
        if let Some(sk) = skip_grads[i].take() {
            for (a, b) in g_cur.data.iter_mut().zip(&sk.data) {
                *a += b;
            }
        }
        ops::elu_backward(&cache.enc_out[i], &mut g_cur);
        let g_in = ops::conv_backward(&cache.enc_in[i], &params.layers[i], &g_cur, &mut grads.layers[i]);
        if i > 0 {
            let prev = &cache.enc_out[i - 1];
            g_cur = ops::maxpool2_backward(&g_in, &cache.pool_idx[i - 1], (prev.c, prev.h, prev.w));
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(h: usize, w: usize, seed: u64) -> Image {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::new(h, w, 1, (0..h * w).map(|_| rng.random_range(-2.0f32..2.0)).collect()).unwrap()
    }

    #[test]
    fn output_shape_and_normalization() {
        let spec = NetworkSpec::default();
        let params = init_network(&spec, 1).unwrap();
        let (p, _) = forward(&params, &image(16, 16, 2)).unwrap();
        assert_eq!((p.height(), p.width(), p.num_classes()), (16, 16, 3));
        for px in p.pixels() {
            assert!((px.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(px.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let spec = NetworkSpec {
            num_classes: 4,
            ..Default::default()
        };
        let params = NetworkParams::zeros(&spec);
        let (p, _) = forward(&params, &image(8, 8, 3)).unwrap();
        assert!(p.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn init_is_seeded_with_zero_bias() {
        let spec = NetworkSpec::default();
        let a = init_network(&spec, 7).unwrap();
        assert_eq!(a, init_network(&spec, 7).unwrap());
        assert_ne!(a, init_network(&spec, 8).unwrap());
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn init_variance_matches_fan_in() {
        let params = init_network(&NetworkSpec::default(), 3).unwrap();
        let mut checked = 0;
        for l in params.layers.iter().filter(|l| l.weight.len() >= 256) {
            let n = l.weight.len() as f64;
            let mean = l.weight.iter().sum::<f64>() / n;
            let var = l.weight.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let target = 2.0 / l.fan_in() as f64;
            assert!((var / target - 1.0).abs() < 0.2, "var {var} target {target}");
            checked += 1;
        }
        assert!(checked >= 4);
    }

    #[test]
    fn rejects_bad_shapes() {
        let params = init_network(&NetworkSpec::default(), 0).unwrap();
        assert!(forward(&params, &image(10, 16, 0)).is_err());
        assert!(forward(&params, &Image::zeros(16, 16, 2)).is_err());
        let (_, cache) = forward(&params, &image(8, 8, 0)).unwrap();
        assert!(backward(&params, &cache, &vec![0.0; 5]).is_err());
        let other = init_network(&NetworkSpec::new(1, 3, vec![4, 8, 16]).unwrap(), 0).unwrap();
        assert!(backward(&other, &cache, &vec![0.0; 8 * 8 * 3]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let params = init_network(&NetworkSpec::default(), 0).unwrap();
        let (_, cache) = forward(&params, &image(8, 8, 1)).unwrap();
        let g = backward(&params, &cache, &vec![0.0; 8 * 8 * 3]).unwrap();
        assert!(g.values().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_and_backward_are_deterministic() {
        let params = init_network(&NetworkSpec::default(), 5).unwrap();
        let img = image(16, 16, 6);
        let (p1, c1) = forward(&params, &img).unwrap();
        let (p2, c2) = forward(&params, &img).unwrap();
        assert!(p1.data().iter().zip(p2.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let up: Vec<f64> = (0..16 * 16 * 3).map(|i| (i as f64 * 0.1).sin()).collect();
        assert_eq!(backward(&params, &c1, &up).unwrap(), backward(&params, &c2, &up).unwrap());
    }

    /// Central differences of a random linear functional of the logits.
    #[test]
    fn gradient_matches_finite_differences_small_net() {
        let spec = NetworkSpec::new(1, 2, vec![2, 3]).unwrap();
        let mut params = init_network(&spec, 11).unwrap();
        // nonzero biases so every code path is exercised
        for (i, v) in params.values_mut().enumerate() {
            *v += 0.01 * (i as f64).cos();
        }
        let img = image(4, 4, 12);
        let weights: Vec<f64> = (0..4 * 4 * 2).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let objective = |p: &NetworkParams| -> f64 {
            let (logits, _) = forward_features(p, image_to_fmap(&img));
            let n = 16;
            (0..n)
                .flat_map(|px| (0..2).map(move |k| (px, k)))
                .map(|(px, k)| weights[px * 2 + k] * logits.data[k * n + px])
                .sum()
        };
        let (_, cache) = forward(&params, &img).unwrap();
        let grads = backward(&params, &cache, &weights).unwrap();
        let analytic: Vec<f64> = grads.values().copied().collect();
        let h = 1e-5;
        for idx in 0..params.num_params() {
            let mut plus = params.clone();
            *plus.values_mut().nth(idx).unwrap() += h;
            let mut minus = params.clone();
            *minus.values_mut().nth(idx).unwrap() -= h;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let a = analytic[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-5, "param {idx}: analytic {a} numeric {numeric}");
        }
    }
}
