//! Feature-map primitives in channel-major (CHW) f64 layout.

#[derive(Debug, Clone, PartialEq)]
pub struct Fmap {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Fmap {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.h * self.w;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn same_dims(&self, other: &Fmap) -> bool {
        self.c == other.c && self.h == other.h && self.w == other.w
    }
}

/// Weights laid out `[out][in][ky][kx]`, square kernel of odd size, zero
/// padding that preserves the spatial size.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub out_c: usize,
    pub in_c: usize,
    pub k: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvParams {
    pub fn zeros(out_c: usize, in_c: usize, k: usize) -> Self {
        Self {
            out_c,
            in_c,
            k,
            weight: vec![0.0; out_c * in_c * k * k],
            bias: vec![0.0; out_c],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_c * self.k * self.k
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.out_c, self.in_c, self.k)
    }

    pub fn same_shape(&self, other: &ConvParams) -> bool {
        self.out_c == other.out_c && self.in_c == other.in_c && self.k == other.k
    }
}

/// Valid output index range along one axis for kernel offset `d`.
#[inline]
fn span(len: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d).min(len as isize).max(0) as usize;
    (lo, hi.max(lo))
}

pub fn conv_forward(x: &Fmap, p: &ConvParams) -> Fmap {
    debug_assert_eq!(x.c, p.in_c);
    let n = x.h * x.w;
    let kk = p.k * p.k;
    let mut out = Fmap::zeros(p.out_c, x.h, x.w);
    for oc in 0..p.out_c {
        let dst = &mut out.data[oc * n..(oc + 1) * n];
        dst.fill(p.bias[oc]);
        for ic in 0..p.in_c {
            let kernel = &p.weight[(oc * p.in_c + ic) * kk..(oc * p.in_c + ic + 1) * kk];
            correlate_add(dst, x.plane(ic), x.h, x.w, p.k, kernel);
        }
    }
    out
}

/// `dst += kernel ⋆ src` for one input plane, zero padded, same size.
pub fn correlate_add(dst: &mut [f64], src: &[f64], h: usize, w: usize, k: usize, kernel: &[f64]) {
    let pad = (k / 2) as isize;
    for ky in 0..k {
        let dy = ky as isize - pad;
        let (y0, y1) = span(h, dy);
        for kx in 0..k {
            let wv = kernel[ky * k + kx];
            if wv == 0.0 {
                continue;
            }
            let dx = kx as isize - pad;
            let (x0, x1) = span(w, dx);
            for y in y0..y1 {
                let sy = (y as isize + dy) as usize;
                let drow = &mut dst[y * w + x0..y * w + x1];
                let srow = &src[sy * w + (x0 as isize + dx) as usize..sy * w + (x1 as isize + dx) as usize];
                for (d, s) in drow.iter_mut().zip(srow) {
                    *d += wv * s;
                }
            }
        }
    }
}

/// Accumulates parameter gradients into `grad` and returns the input
/// gradient.
pub fn conv_backward(x: &Fmap, p: &ConvParams, gout: &Fmap, grad: &mut ConvParams) -> Fmap {
    let (h, w) = (x.h, x.w);
    let n = h * w;
    let pad = (p.k / 2) as isize;
    let mut gin = Fmap::zeros(p.in_c, h, w);
    for oc in 0..p.out_c {
        let g = &gout.data[oc * n..(oc + 1) * n];
        grad.bias[oc] += g.iter().sum::<f64>();
        for ic in 0..p.in_c {
            let src = x.plane(ic);
            let gi = &mut gin.data[ic * n..(ic + 1) * n];
            for ky in 0..p.k {
                let dy = ky as isize - pad;
                let (y0, y1) = span(h, dy);
                for kx in 0..p.k {
                    let widx = ((oc * p.in_c + ic) * p.k + ky) * p.k + kx;
                    let wv = p.weight[widx];
                    let dx = kx as isize - pad;
                    let (x0, x1) = span(w, dx);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let sx0 = (x0 as isize + dx) as usize;
                        let sx1 = (x1 as isize + dx) as usize;
                        let grow = &g[y * w + x0..y * w + x1];
                        let srow = &src[sy * w + sx0..sy * w + sx1];
                        acc += grow.iter().zip(srow).map(|(a, b)| a * b).sum::<f64>();
                        let girow = &mut gi[sy * w + sx0..sy * w + sx1];
                        for (d, gv) in girow.iter_mut().zip(grow) {
                            *d += wv * gv;
                        }
                    }
                    grad.weight[widx] += acc;
                }
            }
        }
    }
    gin
}

/// ELU with alpha = 1. Continuously differentiable, which keeps central
/// differences accurate near zero.
pub fn elu_inplace(x: &mut Fmap) {
    for v in &mut x.data {
        if *v <= 0.0 {
            *v = v.exp_m1();
        }
    }
}

/// Backward through ELU given its output `y`.
pub fn elu_backward(y: &Fmap, g: &mut Fmap) {
    for (gv, &yv) in g.data.iter_mut().zip(&y.data) {
        if yv <= 0.0 {
            *gv *= yv + 1.0;
        }
    }
}

/// 2x2 max-pool, stride 2. Returns the pooled map and, per output cell, the
/// flat input index of the winner (first maximum in scan order).
pub fn maxpool2(x: &Fmap) -> (Fmap, Vec<usize>) {
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut out = Fmap::zeros(x.c, oh, ow);
    let mut idx = vec![0usize; x.c * oh * ow];
    for c in 0..x.c {
        let base = c * x.h * x.w;
        for y in 0..oh {
            for xx in 0..ow {
                let mut best = base + (2 * y) * x.w + 2 * xx;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let cand = base + (2 * y + dy) * x.w + 2 * xx + dx;
                    if x.data[cand] > x.data[best] {
                        best = cand;
                    }
                }
                let o = (c * oh + y) * ow + xx;
                out.data[o] = x.data[best];
                idx[o] = best;
            }
        }
    }
    (out, idx)
}

pub fn maxpool2_backward(g: &Fmap, idx: &[usize], in_dims: (usize, usize, usize)) -> Fmap {
    let mut gin = Fmap::zeros(in_dims.0, in_dims.1, in_dims.2);
    for (gv, &i) in g.data.iter().zip(idx) {
        gin.data[i] += gv;
    }
    gin
}

pub fn upsample2(x: &Fmap) -> Fmap {
    let (oh, ow) = (x.h * 2, x.w * 2);
    let mut out = Fmap::zeros(x.c, oh, ow);
    for c in 0..x.c {
        for y in 0..oh {
            for xx in 0..ow {
                out.data[(c * oh + y) * ow + xx] = x.data[(c * x.h + y / 2) * x.w + xx / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward(g: &Fmap) -> Fmap {
    let (h, w) = (g.h / 2, g.w / 2);
    let mut out = Fmap::zeros(g.c, h, w);
    for c in 0..g.c {
        for y in 0..g.h {
            for x in 0..g.w {
                out.data[(c * h + y / 2) * w + x / 2] += g.data[(c * g.h + y) * g.w + x];
            }
        }
    }
    out
}

pub fn concat(a: &Fmap, b: &Fmap) -> Fmap {
    debug_assert!(a.h == b.h && a.w == b.w);
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Fmap {
        c: a.c + b.c,
        h: a.h,
        w: a.w,
        data,
    }
}

pub fn split_channels(g: Fmap, first: usize) -> (Fmap, Fmap) {
    let n = g.h * g.w;
    let mut data = g.data;
    let rest = data.split_off(first * n);
    (
        Fmap {
            c: first,
            h: g.h,
            w: g.w,
            data,
        },
        Fmap {
            c: g.c - first,
            h: g.h,
            w: g.w,
            data: rest,
        },
    )
}
