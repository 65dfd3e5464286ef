//! ConvNet feature extractor mapping standardized patches to a low-dim
//! latent space. Fixed topology: conv 3x3 (zero-padded, tanh) -> 2x2 avg
//! pool -> conv 3x3 (tanh) -> 2x2 avg pool -> dense -> latent. Forward and
//! backward passes are hand-rolled so the joint NLL training can be checked
//! against central finite differences.

use rand::{Rng, RngExt};

use crate::dataset::Patch;
use crate::error::{NovError, Result};

/// Channel counts and latent dimensionality of the extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub patch_size: usize,
    pub c1: usize,
    pub c2: usize,
    pub latent_dim: usize,
}

fn pooled(s: usize) -> usize {
    s.div_ceil(2)
}

impl Architecture {
    pub fn new(patch_size: usize, c1: usize, c2: usize, latent_dim: usize) -> Result<Self> {
        if patch_size == 0 || c1 == 0 || c2 == 0 || latent_dim == 0 {
            return Err(NovError::InvalidInput("architecture dims must be positive".into()));
        }
        Ok(Self { patch_size, c1, c2, latent_dim })
    }

    pub fn s1(&self) -> usize {
        self.patch_size
    }

    pub fn p1(&self) -> usize {
        pooled(self.s1())
    }

    pub fn p2(&self) -> usize {
        pooled(self.p1())
    }

    pub fn flat_len(&self) -> usize {
        self.p2() * self.p2() * self.c2
    }

    // Weight layout: conv1 w [c1][3][3], conv1 b [c1],
    //                conv2 w [c2][c1][3][3], conv2 b [c2],
    //                dense w [d][flat], dense b [d].
    pub fn conv1_w_len(&self) -> usize {
        self.c1 * 9
    }

    pub fn conv2_w_len(&self) -> usize {
        self.c2 * self.c1 * 9
    }

    pub fn dense_w_len(&self) -> usize {
        self.latent_dim * self.flat_len()
    }

    pub fn weight_count(&self) -> usize {
        self.conv1_w_len()
            + self.c1
            + self.conv2_w_len()
            + self.c2
            + self.dense_w_len()
            + self.latent_dim
    }

    fn offsets(&self) -> [usize; 6] {
        let o0 = 0;
        let o1 = o0 + self.conv1_w_len();
        let o2 = o1 + self.c1;
        let o3 = o2 + self.conv2_w_len();
        let o4 = o3 + self.c2;
        let o5 = o4 + self.dense_w_len();
        [o0, o1, o2, o3, o4, o5]
    }
}

/// Extractor weights, flat, in the layout documented on [`Architecture`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorParams {
    pub arch: Architecture,
    pub weights: Vec<f64>,
}

impl ExtractorParams {
    pub fn zeros(arch: Architecture) -> Self {
        Self { weights: vec![0.0; arch.weight_count()], arch }
    }

    /// Glorot-uniform weights, zero biases, filled in a fixed order.
    pub fn init<R: Rng>(arch: Architecture, rng: &mut R) -> Self {
        let mut p = Self::zeros(arch);
        let [o0, o1, o2, o3, o4, _o5] = arch.offsets();
        let bound = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        let a1 = bound(9, arch.c1 * 9);
        for w in &mut p.weights[o0..o1] {
            *w = rng.random_range(-a1..a1);
        }
        let a2 = bound(arch.c1 * 9, arch.c2 * 9);
        for w in &mut p.weights[o2..o3] {
            *w = rng.random_range(-a2..a2);
        }
        let ad = bound(arch.flat_len(), arch.latent_dim);
        for w in &mut p.weights[o4..o4 + arch.dense_w_len()] {
            *w = rng.random_range(-ad..ad);
        }
        p
    }
}

/// Intermediate activations retained for the backward pass.
pub struct ForwardCache {
    input: Vec<f64>,
    a1: Vec<f64>, // post-tanh, [c1][s1][s1]
    p1: Vec<f64>, // pooled,   [c1][p1][p1]
    a2: Vec<f64>, // post-tanh, [c2][p1][p1]
    p2: Vec<f64>, // pooled,   [c2][p2][p2]
}

/// Zero-padded 3x3 convolution of one input channel set into one output
/// channel; `input` is [in_ch][s][s], `w` is [in_ch][3][3].
fn conv3x3_into(input: &[f64], in_ch: usize, s: usize, w: &[f64], bias: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = bias);
    for ic in 0..in_ch {
        let plane = &input[ic * s * s..(ic + 1) * s * s];
        let k = &w[ic * 9..ic * 9 + 9];
        for y in 0..s {
            let y0 = y as isize - 1;
            for (ky, krow) in k.chunks_exact(3).enumerate() {
                let yy = y0 + ky as isize;
                if yy < 0 || yy as usize >= s {
                    continue;
                }
                let src = &plane[yy as usize * s..yy as usize * s + s];
                let dst = &mut out[y * s..y * s + s];
                // kx = 0,1,2 correspond to input offsets -1,0,+1.
                let (k0, k1, k2) = (krow[0], krow[1], krow[2]);
                dst[0] += k1 * src[0];
                if s > 1 {
                    dst[0] += k2 * src[1];
                    dst[s - 1] += k0 * src[s - 2] + k1 * src[s - 1];
                }
                for x in 1..s.saturating_sub(1) {
                    dst[x] += k0 * src[x - 1] + k1 * src[x] + k2 * src[x + 1];
                }
            }
        }
    }
}

/// Transpose of `conv3x3_into`: scatter output-plane gradients back to the
/// input planes.
fn conv3x3_back_input(dout: &[f64], in_ch: usize, s: usize, w: &[f64], dinput: &mut [f64]) {
    for ic in 0..in_ch {
        let dplane = &mut dinput[ic * s * s..(ic + 1) * s * s];
        let k = &w[ic * 9..ic * 9 + 9];
        for y in 0..s {
            let y0 = y as isize - 1;
            for ky in 0..3 {
                let yy = y0 + ky as isize;
                if yy < 0 || yy as usize >= s {
                    continue;
                }
                for x in 0..s {
                    let g = dout[y * s + x];
                    let x0 = x as isize - 1;
                    for kx in 0..3 {
                        let xx = x0 + kx as isize;
                        if xx < 0 || xx as usize >= s {
                            continue;
                        }
                        dplane[yy as usize * s + xx as usize] += k[ky * 3 + kx] * g;
                    }
                }
            }
        }
    }
}

/// Gradient of the conv weights for one output channel.
fn conv3x3_back_weights(dout: &[f64], input: &[f64], in_ch: usize, s: usize, dw: &mut [f64]) {
    for ic in 0..in_ch {
        let plane = &input[ic * s * s..(ic + 1) * s * s];
        let dk = &mut dw[ic * 9..ic * 9 + 9];
        for y in 0..s {
            let y0 = y as isize - 1;
            for ky in 0..3 {
                let yy = y0 + ky as isize;
                if yy < 0 || yy as usize >= s {
                    continue;
                }
                for x in 0..s {
                    let g = dout[y * s + x];
                    let x0 = x as isize - 1;
                    for kx in 0..3 {
                        let xx = x0 + kx as isize;
                        if xx < 0 || xx as usize >= s {
                            continue;
                        }
                        dk[ky * 3 + kx] += g * plane[yy as usize * s + xx as usize];
                    }
                }
            }
        }
    }
}

/// 2x2 average pooling with partial windows averaged over present cells.
fn avg_pool(input: &[f64], ch: usize, s: usize, out: &mut [f64]) {
    let ps = pooled(s);
    for c in 0..ch {
        let plane = &input[c * s * s..(c + 1) * s * s];
        let dst = &mut out[c * ps * ps..(c + 1) * ps * ps];
        for py in 0..ps {
            for px in 0..ps {
                let y1 = (2 * py + 2).min(s);
                let x1 = (2 * px + 2).min(s);
                let mut acc = 0.0;
                let mut cnt = 0.0;
                for y in 2 * py..y1 {
                    for x in 2 * px..x1 {
                        acc += plane[y * s + x];
                        cnt += 1.0;
                    }
                }
                dst[py * ps + px] = acc / cnt;
            }
        }
    }
}

fn avg_pool_back(dout: &[f64], ch: usize, s: usize, dinput: &mut [f64]) {
    let ps = pooled(s);
    for c in 0..ch {
        let dplane = &mut dinput[c * s * s..(c + 1) * s * s];
        let src = &dout[c * ps * ps..(c + 1) * ps * ps];
        for py in 0..ps {
            for px in 0..ps {
                let y1 = (2 * py + 2).min(s);
                let x1 = (2 * px + 2).min(s);
                let cnt = ((y1 - 2 * py) * (x1 - 2 * px)) as f64;
                let g = src[py * ps + px] / cnt;
                for y in 2 * py..y1 {
                    for x in 2 * px..x1 {
                        dplane[y * s + x] += g;
                    }
                }
            }
        }
    }
}

pub fn forward_cached(params: &ExtractorParams, input: &[f64]) -> (Vec<f64>, ForwardCache) {
    let arch = params.arch;
    let [o0, o1, o2, o3, o4, o5] = arch.offsets();
    let w = &params.weights;
    let s1 = arch.s1();
    let p1s = arch.p1();
    let p2s = arch.p2();

    let mut a1 = vec![0.0; arch.c1 * s1 * s1];
    for (oc, out) in a1.chunks_exact_mut(s1 * s1).enumerate() {
        conv3x3_into(input, 1, s1, &w[o0 + oc * 9..o0 + oc * 9 + 9], w[o1 + oc], out);
    }
    a1.iter_mut().for_each(|v| *v = v.tanh());

    let mut p1 = vec![0.0; arch.c1 * p1s * p1s];
    avg_pool(&a1, arch.c1, s1, &mut p1);

    let mut a2 = vec![0.0; arch.c2 * p1s * p1s];
    for (oc, out) in a2.chunks_exact_mut(p1s * p1s).enumerate() {
        let wslice = &w[o2 + oc * arch.c1 * 9..o2 + (oc + 1) * arch.c1 * 9];
        conv3x3_into(&p1, arch.c1, p1s, wslice, w[o3 + oc], out);
    }
    a2.iter_mut().for_each(|v| *v = v.tanh());

    let mut p2 = vec![0.0; arch.c2 * p2s * p2s];
    avg_pool(&a2, arch.c2, p1s, &mut p2);

    let flat = arch.flat_len();
    let mut z = vec![0.0; arch.latent_dim];
    for k in 0..arch.latent_dim {
        let row = &w[o4 + k * flat..o4 + (k + 1) * flat];
        z[k] = w[o5 + k] + row.iter().zip(&p2).map(|(a, b)| a * b).sum::<f64>();
    }

    (z, ForwardCache { input: input.to_vec(), a1, p1, a2, p2 })
}

/// Embed a patch into the latent space.
pub fn embed(params: &ExtractorParams, patch: &Patch) -> Result<Vec<f64>> {
    let p = params.arch.patch_size;
    if patch.values.len() != p * p {
        return Err(NovError::Contract(format!(
            "patch has {} values, architecture expects {}",
            patch.values.len(),
            p * p
        )));
    }
    Ok(forward_cached(params, &patch.values).0)
}

/// Accumulate dL/dw into `grad` given the upstream latent gradient `dz`.
pub fn backward(params: &ExtractorParams, cache: &ForwardCache, dz: &[f64], grad: &mut [f64]) {
    let arch = params.arch;
    let [o0, o1, o2, o3, o4, o5] = arch.offsets();
    let w = &params.weights;
    let s1 = arch.s1();
    let p1s = arch.p1();
    let flat = arch.flat_len();

    // Dense stage.
    let mut dp2 = vec![0.0; flat];
    for k in 0..arch.latent_dim {
        let g = dz[k];
        grad[o5 + k] += g;
        let wrow = &w[o4 + k * flat..o4 + (k + 1) * flat];
        let grow = &mut grad[o4 + k * flat..o4 + (k + 1) * flat];
        for j in 0..flat {
            grow[j] += g * cache.p2[j];
            dp2[j] += g * wrow[j];
        }
    }

    // Pool 2 and tanh 2.
    let mut da2 = vec![0.0; arch.c2 * p1s * p1s];
    avg_pool_back(&dp2, arch.c2, p1s, &mut da2);
    for (d, &a) in da2.iter_mut().zip(&cache.a2) {
        *d *= 1.0 - a * a;
    }

    // Conv 2.
    let mut dp1 = vec![0.0; arch.c1 * p1s * p1s];
    for oc in 0..arch.c2 {
        let dout = &da2[oc * p1s * p1s..(oc + 1) * p1s * p1s];
        grad[o3 + oc] += dout.iter().sum::<f64>();
        conv3x3_back_weights(
            dout,
            &cache.p1,
            arch.c1,
            p1s,
            &mut grad[o2 + oc * arch.c1 * 9..o2 + (oc + 1) * arch.c1 * 9],
        );
        conv3x3_back_input(
            dout,
            arch.c1,
            p1s,
            &w[o2 + oc * arch.c1 * 9..o2 + (oc + 1) * arch.c1 * 9],
            &mut dp1,
        );
    }

    // Pool 1 and tanh 1.
    let mut da1 = vec![0.0; arch.c1 * s1 * s1];
    avg_pool_back(&dp1, arch.c1, s1, &mut da1);
    for (d, &a) in da1.iter_mut().zip(&cache.a1) {
        *d *= 1.0 - a * a;
    }

    // Conv 1 (input gradient not needed).
    for oc in 0..arch.c1 {
        let dout = &da1[oc * s1 * s1..(oc + 1) * s1 * s1];
        grad[o1 + oc] += dout.iter().sum::<f64>();
        conv3x3_back_weights(dout, &cache.input, 1, s1, &mut grad[o0 + oc * 9..o0 + oc * 9 + 9]);
    }
}
