//! Forward passes under a one-parameter change. The unperturbed pass is kept
//! on a tape and only the channels the change reaches are recomputed; conv
//! layers add the kernel response of the changed input channels to the
//! stored pre-activations.

use super::ops::{self, ConvParams, Fmap};
use super::{softmax_pixels, NetworkParams};
use crate::data::{Image, ProbMap};
use crate::error::{Error, Result};

/// Per-channel replacement planes; `None` means unchanged.
type Overlay = Vec<Option<Vec<f64>>>;

/// Unperturbed activations of one image, per layer in storage order.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    height: usize,
    width: usize,
    inputs: Vec<Fmap>,
    pre: Vec<Fmap>,
    post: Vec<Fmap>,
}

impl ForwardTape {
    pub fn new(params: &NetworkParams, image: &Image) -> Result<Self> {
        params.spec.check_input(image.height(), image.width(), image.channels())?;
        let s = params.spec.stages();
        let mut inputs = Vec::with_capacity(params.layers.len());
        let mut pre = Vec::with_capacity(params.layers.len());
        let mut post: Vec<Fmap> = Vec::with_capacity(params.layers.len());
        let mut record = |input: Fmap, layer: &ConvParams, act: bool| {
            let z = ops::conv_forward(&input, layer);
            let mut y = z.clone();
            if act {
                ops::elu_inplace(&mut y);
            }
            inputs.push(input);
            pre.push(z);
            post.push(y.clone());
            y
        };
        let mut enc = Vec::with_capacity(s);
        let mut x = super::image_to_fmap(image);
        for i in 0..s {
            if i > 0 {
                x = ops::maxpool2(&enc[i - 1]).0;
            }
            let y = record(x.clone(), &params.layers[i], true);
            enc.push(y);
        }
        let mut current = enc[s - 1].clone();
        for (j, i) in (0..s - 1).rev().enumerate() {
            let cat = ops::concat(&ops::upsample2(&current), &enc[i]);
            current = record(cat, &params.layers[s + j], true);
        }
        record(current, params.layers.last().expect("head layer"), false);
        Ok(Self {
            height: image.height(),
            width: image.width(),
            inputs,
            pre,
            post,
        })
    }

    pub fn probs(&self) -> ProbMap {
        let logits = self.pre.last().expect("head layer");
        ProbMap::from_raw(self.height, self.width, logits.c, softmax_pixels(logits))
    }

    /// Prediction with flat parameter `index` (in [`NetworkParams::values`]
    /// order) set to `value`, everything else as in `params`.
    pub fn probs_with(&self, params: &NetworkParams, index: usize, value: f64) -> Result<ProbMap> {
        if self.pre.len() != params.layers.len() {
            return Err(Error::shape("tape does not belong to these parameters"));
        }
        let (layer, local) = params
            .locate(index)
            .ok_or_else(|| Error::invalid(format!("parameter index {index} out of range")))?;
        let p = &params.layers[layer];
        let n_layers = params.layers.len();
        let s = params.spec.stages();

        // the changed output channel of the perturbed layer
        let base_in = &self.inputs[layer];
        let plane_len = base_in.h * base_in.w;
        let kk = p.k * p.k;
        let (oc, delta_plane) = if local < p.weight.len() {
            let oc = local / (p.in_c * kk);
            let ic = (local / kk) % p.in_c;
            let mut kernel = vec![0.0; kk];
            kernel[local % kk] = value - p.weight[local];
            let mut plane = self.pre[layer].plane(oc).to_vec();
            ops::correlate_add(&mut plane, base_in.plane(ic), base_in.h, base_in.w, p.k, &kernel);
            (oc, plane)
        } else {
            let oc = local - p.weight.len();
            let d = value - p.bias[oc];
            (oc, self.pre[layer].plane(oc).iter().map(|v| v + d).collect())
        };
        debug_assert_eq!(delta_plane.len(), plane_len);
        let mut changed: Overlay = vec![None; p.out_c];
        changed[oc] = Some(delta_plane);
        if layer + 1 < n_layers {
            elu_overlay(&mut changed);
        }

        // encoder outputs that differ from the tape
        let mut enc: Vec<Overlay> = (0..s).map(|i| vec![None; self.post[i].c]).collect();
        let mut current = changed;
        let mut l = layer;
        if l < s {
            enc[l] = current;
            for i in l + 1..s {
                let input = pool_overlay(&enc[i - 1], &self.post[i - 1]);
                enc[i] = self.conv_overlay(i, &params.layers[i], &input, true);
            }
            current = enc[s - 1].clone();
            l = s;
        } else {
            l += 1;
        }
        // decoder layers from `l` on, then the head
        for (j, i) in (0..s - 1).rev().enumerate() {
            let layer_idx = s + j;
            if layer_idx < l {
                continue;
            }
            let prev = if layer_idx == s { &self.post[s - 1] } else { &self.post[layer_idx - 1] };
            let mut input = upsample_overlay(&current, prev);
            input.extend(enc[i].iter().cloned());
            current = self.conv_overlay(layer_idx, &params.layers[layer_idx], &input, true);
        }
        let head = n_layers - 1;
        let logits_overlay = if layer == head {
            current
        } else {
            self.conv_overlay(head, &params.layers[head], &current, false)
        };
        let mut logits = self.pre[head].clone();
        let n = logits.h * logits.w;
        for (c, plane) in logits_overlay.into_iter().enumerate() {
            if let Some(v) = plane {
                logits.data[c * n..(c + 1) * n].copy_from_slice(&v);
            }
        }
        Ok(ProbMap::from_raw(self.height, self.width, logits.c, softmax_pixels(&logits)))
    }

    fn conv_overlay(&self, layer: usize, p: &ConvParams, input: &Overlay, act: bool) -> Overlay {
        if input.iter().all(Option::is_none) {
            return vec![None; p.out_c];
        }
        let base = &self.inputs[layer];
        let (h, w) = (base.h, base.w);
        let kk = p.k * p.k;
        let mut out: Vec<Vec<f64>> = (0..p.out_c).map(|oc| self.pre[layer].plane(oc).to_vec()).collect();
        for (ic, plane) in input.iter().enumerate() {
            let Some(new) = plane else { continue };
            let diff: Vec<f64> = new.iter().zip(base.plane(ic)).map(|(a, b)| a - b).collect();
            for (oc, dst) in out.iter_mut().enumerate() {
                let kernel = &p.weight[(oc * p.in_c + ic) * kk..(oc * p.in_c + ic + 1) * kk];
                ops::correlate_add(dst, &diff, h, w, p.k, kernel);
            }
        }
        let mut out: Overlay = out.into_iter().map(Some).collect();
        if act {
            elu_overlay(&mut out);
        }
        out
    }
}

fn elu_overlay(o: &mut Overlay) {
    for v in o.iter_mut().flatten().flatten() {
        if *v <= 0.0 {
            *v = v.exp_m1();
        }
    }
}

fn pool_overlay(o: &Overlay, base: &Fmap) -> Overlay {
    let (h, w) = (base.h, base.w);
    o.iter()
        .map(|plane| {
            plane.as_ref().map(|x| {
                let single = Fmap {
                    c: 1,
                    h,
                    w,
                    data: x.clone(),
                };
                ops::maxpool2(&single).0.data
            })
        })
        .collect()
}

fn upsample_overlay(o: &Overlay, base: &Fmap) -> Overlay {
    let (h, w) = (base.h, base.w);
    o.iter()
        .map(|plane| {
            plane.as_ref().map(|x| {
                let single = Fmap {
                    c: 1,
                    h,
                    w,
                    data: x.clone(),
                };
                ops::upsample2(&single).data
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_network, predict, NetworkSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_full_recompute_for_every_layer() {
        let spec = NetworkSpec::new(1, 3, vec![3, 4, 5]).unwrap();
        let params = init_network(&spec, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = Image::new(8, 8, 1, (0..64).map(|_| rng.random_range(-1.0..1.0f32)).collect()).unwrap();
        let tape = ForwardTape::new(&params, &img).unwrap();
        assert_eq!(tape.probs(), predict(&params, &img).unwrap());
        let total = params.num_params();
        let mut idx: Vec<usize> = (0..total).step_by(7).collect();
        // every bias and the last weight of every layer
        let mut off = 0;
        for l in &params.layers {
            idx.push(off + l.weight.len() - 1);
            idx.extend(off + l.weight.len()..off + l.weight.len() + l.bias.len());
            off += l.weight.len() + l.bias.len();
        }
        for i in idx {
            let mut p = params.clone();
            let v = p.value_mut(i).unwrap();
            *v += 0.3;
            let new = *v;
            let full = predict(&p, &img).unwrap();
            let inc = tape.probs_with(&params, i, new).unwrap();
            for (a, b) in full.data().iter().zip(inc.data()) {
                assert!((a - b).abs() < 1e-12, "param {i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn single_stage_network() {
        let spec = NetworkSpec::new(1, 2, vec![2]).unwrap();
        let params = init_network(&spec, 1).unwrap();
        let img = Image::new(4, 4, 1, (0..16).map(|v| v as f32 / 8.0 - 1.0).collect()).unwrap();
        let tape = ForwardTape::new(&params, &img).unwrap();
        for i in 0..params.num_params() {
            let mut p = params.clone();
            *p.value_mut(i).unwrap() -= 0.5;
            let new = *p.value_mut(i).unwrap();
            let full = predict(&p, &img).unwrap();
            let inc = tape.probs_with(&params, i, new).unwrap();
            for (a, b) in full.data().iter().zip(inc.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(tape.probs_with(&params, params.num_params(), 0.0).is_err());
    }
}
