//! Layers with hand-written backward passes.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::Tensor;
use crate::scalar::Scalar;

pub(crate) const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// 3×3 convolution with zero padding 1 and stride 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    /// `out_channels × (in_channels · 9)`, row-major.
    pub weight: Vec<T>,
    pub bias: Option<Vec<T>>,
}

pub(crate) struct ConvCache<T> {
    cols: Vec<T>,
    in_shape: (usize, usize, usize),
    out_hw: (usize, usize),
}

impl<T: Scalar> Conv2d<T> {
    /// Fan-in scaled normal initialisation, `std = sqrt(2 / fan_in)`.
    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        with_bias: bool,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * TAPS;
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
        let weight = (0..out_channels * fan_in).map(|_| T::of(normal.sample(rng))).collect();
        Self {
            in_channels,
            out_channels,
            stride,
            weight,
            bias: with_bias.then(|| vec![T::zero(); out_channels]),
        }
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        ((h - 1) / self.stride + 1, (w - 1) / self.stride + 1)
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    fn im2col(&self, x: &Tensor<T>, ho: usize, wo: usize) -> Vec<T> {
        let (c, h, w) = x.shape();
        let p = ho * wo;
        let mut cols = vec![T::zero(); c * TAPS * p];
        for ic in 0..c {
            let src = x.channel(ic);
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let row = &mut cols[((ic * TAPS) + ky * KERNEL + kx) * p..][..p];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - 1;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        let srow = &src[iy as usize * w..(iy as usize + 1) * w];
                        let drow = &mut row[oy * wo..(oy + 1) * wo];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - 1;
                            if ix >= 0 && (ix as usize) < w {
                                *d = srow[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[T], shape: (usize, usize, usize), ho: usize, wo: usize) -> Tensor<T> {
        let (c, h, w) = shape;
        let p = ho * wo;
        let mut out = Tensor::zeros(c, h, w);
        for ic in 0..c {
            let dst = &mut out.data[ic * h * w..(ic + 1) * h * w];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let row = &cols[((ic * TAPS) + ky * KERNEL + kx) * p..][..p];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - 1;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        let drow = &mut dst[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..wo {
                            let ix = (ox * self.stride + kx) as isize - 1;
                            if ix >= 0 && (ix as usize) < w {
                                drow[ix as usize] += row[oy * wo + ox];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub(crate) fn forward(&self, x: &Tensor<T>, keep: bool) -> (Tensor<T>, Option<ConvCache<T>>) {
        assert_eq!(x.channels, self.in_channels, "conv input channels");
        let (ho, wo) = self.out_size(x.height, x.width);
        let p = ho * wo;
        let cols = self.im2col(x, ho, wo);
        let mut out = vec![T::zero(); self.out_channels * p];
        if let Some(bias) = &self.bias {
            for (oc, b) in bias.iter().enumerate() {
                out[oc * p..(oc + 1) * p].iter_mut().for_each(|v| *v = *b);
            }
        }
        let beta = if self.bias.is_some() { T::one() } else { T::zero() };
        T::gemm(
            self.out_channels,
            self.in_channels * TAPS,
            p,
            T::one(),
            &self.weight,
            false,
            &cols,
            false,
            beta,
            &mut out,
        );
        let cache = keep.then(|| ConvCache {
            cols,
            in_shape: x.shape(),
            out_hw: (ho, wo),
        });
        (Tensor::from_data(self.out_channels, ho, wo, out), cache)
    }

    /// Accumulates parameter gradients into `dweight` / `dbias` and returns
    /// the input gradient.
    pub(crate) fn backward(
        &self,
        cache: &ConvCache<T>,
        grad: &Tensor<T>,
        dweight: &mut [T],
        dbias: Option<&mut [T]>,
    ) -> Tensor<T> {
        let (ho, wo) = cache.out_hw;
        let p = ho * wo;
        let k = self.in_channels * TAPS;
        T::gemm(self.out_channels, p, k, T::one(), &grad.data, false, &cache.cols, true, T::one(), dweight);
        if let Some(db) = dbias {
            for (oc, d) in db.iter_mut().enumerate() {
                *d += grad.data[oc * p..(oc + 1) * p].iter().copied().sum::<T>();
            }
        }
        let mut dcols = vec![T::zero(); k * p];
        T::gemm(k, self.out_channels, p, T::one(), &self.weight, true, &grad.data, false, T::zero(), &mut dcols);
        self.col2im(&dcols, cache.in_shape, ho, wo)
    }
}

/// Per-channel instance normalisation with a learned affine transform.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

pub(crate) struct NormCache<T> {
    normalized: Vec<T>,
    inv_std: Vec<T>,
}

pub(crate) const NORM_EPS: f64 = 1e-5;

impl<T: Scalar> InstanceNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    pub(crate) fn forward(&self, x: &mut Tensor<T>, keep: bool) -> Option<NormCache<T>> {
        let n = x.plane();
        let nf = T::of_usize(n);
        let eps = T::of(NORM_EPS);
        let mut normalized = if keep { Vec::with_capacity(x.data.len()) } else { Vec::new() };
        let mut inv_std = Vec::with_capacity(x.channels);
        for c in 0..x.channels {
            let plane = &mut x.data[c * n..(c + 1) * n];
            let mean = plane.iter().copied().sum::<T>() / nf;
            let var = plane.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
            let istd = T::one() / (var + eps).sqrt();
            inv_std.push(istd);
            let (g, b) = (self.gamma[c], self.beta[c]);
            for v in plane.iter_mut() {
                let xh = (*v - mean) * istd;
                if keep {
                    normalized.push(xh);
                }
                *v = g * xh + b;
            }
        }
        keep.then_some(NormCache { normalized, inv_std })
    }

    pub(crate) fn backward(&self, cache: &NormCache<T>, grad: &mut Tensor<T>, dgamma: &mut [T], dbeta: &mut [T]) {
        let n = grad.plane();
        let nf = T::of_usize(n);
        for c in 0..grad.channels {
            let dy = &mut grad.data[c * n..(c + 1) * n];
            let xh = &cache.normalized[c * n..(c + 1) * n];
            let sum_dy: T = dy.iter().copied().sum();
            let sum_dy_xh: T = dy.iter().zip(xh).map(|(&a, &b)| a * b).sum();
            dgamma[c] += sum_dy_xh;
            dbeta[c] += sum_dy;
            let scale = self.gamma[c] * cache.inv_std[c] / nf;
            for (d, &h) in dy.iter_mut().zip(xh) {
                *d = scale * (nf * *d - sum_dy - h * sum_dy_xh);
            }
        }
    }
}

/// Convolution, optional instance normalisation, then ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<T> {
    pub conv: Conv2d<T>,
    pub norm: Option<InstanceNorm<T>>,
}

pub(crate) struct BlockCache<T> {
    conv: ConvCache<T>,
    norm: Option<NormCache<T>>,
    /// Post-activation output; its sign pattern is the ReLU mask.
    out: Tensor<T>,
}

impl<T: Scalar> ConvBlock<T> {
    pub fn parameter_count(&self) -> usize {
        self.conv.parameter_count() + self.norm.as_ref().map_or(0, InstanceNorm::parameter_count)
    }

    /// Number of parameter slots this block contributes.
    pub(crate) fn slot_count(&self) -> usize {
        1 + usize::from(self.conv.bias.is_some()) + if self.norm.is_some() { 2 } else { 0 }
    }

    pub(crate) fn slots(&self) -> Vec<&Vec<T>> {
        let mut s = vec![&self.conv.weight];
        if let Some(b) = &self.conv.bias {
            s.push(b);
        }
        if let Some(n) = &self.norm {
            s.push(&n.gamma);
            s.push(&n.beta);
        }
        s
    }

    pub(crate) fn slots_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut s = vec![&mut self.conv.weight];
        if let Some(b) = &mut self.conv.bias {
            s.push(b);
        }
        if let Some(n) = &mut self.norm {
            s.push(&mut n.gamma);
            s.push(&mut n.beta);
        }
        s
    }

    pub(crate) fn forward(&self, x: &Tensor<T>, keep: bool) -> (Tensor<T>, Option<BlockCache<T>>) {
        let (mut y, conv_cache) = self.conv.forward(x, keep);
        let norm_cache = self.norm.as_ref().and_then(|n| n.forward(&mut y, keep));
        y.data.iter_mut().for_each(|v| {
            if *v < T::zero() {
                *v = T::zero();
            }
        });
        let cache = conv_cache.map(|conv| BlockCache {
            conv,
            norm: norm_cache,
            out: y.clone(),
        });
        (y, cache)
    }

    /// `grads` holds this block's slots in [`ConvBlock::slots`] order.
    pub(crate) fn backward(&self, cache: &BlockCache<T>, mut grad: Tensor<T>, grads: &mut [Vec<T>]) -> Tensor<T> {
        for (g, &o) in grad.data.iter_mut().zip(&cache.out.data) {
            if o <= T::zero() {
                *g = T::zero();
            }
        }
        let (wslot, rest) = grads.split_first_mut().expect("weight slot");
        let (bslot, rest) = if self.conv.bias.is_some() {
            let (b, r) = rest.split_first_mut().expect("bias slot");
            (Some(b.as_mut_slice()), r)
        } else {
            (None, rest)
        };
        if let (Some(norm), Some(nc)) = (&self.norm, &cache.norm) {
            let (gslot, rest) = rest.split_first_mut().expect("gamma slot");
            norm.backward(nc, &mut grad, gslot, &mut rest[0]);
        }
        self.conv.backward(&cache.conv, &grad, wslot, bslot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn direct_conv(conv: &Conv2d<f64>, x: &Tensor<f64>) -> Tensor<f64> {
        let (ho, wo) = conv.out_size(x.height, x.width);
        let mut out = Tensor::zeros(conv.out_channels, ho, wo);
        for oc in 0..conv.out_channels {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = conv.bias.as_ref().map_or(0.0, |b| b[oc]);
                    for ic in 0..conv.in_channels {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (oy * conv.stride + ky) as isize - 1;
                                let ix = (ox * conv.stride + kx) as isize - 1;
                                if iy >= 0 && ix >= 0 && (iy as usize) < x.height && (ix as usize) < x.width {
                                    acc += conv.weight[oc * conv.in_channels * 9 + ic * 9 + ky * 3 + kx]
                                        * x.data[ic * x.plane() + iy as usize * x.width + ix as usize];
                                }
                            }
                        }
                    }
                    out.data[oc * ho * wo + oy * wo + ox] = acc;
                }
            }
        }
        out
    }

    fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_data(c, h, w, (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for stride in [1, 2] {
            let mut conv = Conv2d::<f64>::init(2, 3, stride, true, &mut rng);
            conv.bias = Some(vec![0.1, -0.2, 0.3]);
            let x = random_tensor(&mut rng, 2, 6, 5);
            let (got, _) = conv.forward(&x, false);
            let want = direct_conv(&conv, &x);
            assert_eq!(got.shape(), want.shape());
            for (a, b) in got.data.iter().zip(&want.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    /// Loss = Σ r ⊙ block(x) for a fixed random `r`; compares analytic and
    /// central-difference gradients for inputs and every parameter.
    #[test]
    fn block_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for stride in [1, 2] {
            let block = ConvBlock {
                conv: Conv2d::<f64>::init(2, 3, stride, false, &mut rng),
                norm: Some(InstanceNorm {
                    gamma: vec![1.2, 0.7, -0.4],
                    beta: vec![0.1, 0.3, -0.2],
                }),
            };
            let x = random_tensor(&mut rng, 2, 6, 6);
            let (y, cache) = block.forward(&x, true);
            let r: Vec<f64> = (0..y.data.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loss = |b: &ConvBlock<f64>, x: &Tensor<f64>| -> f64 {
                let (y, _) = b.forward(x, false);
                y.data.iter().zip(&r).map(|(a, b)| a * b).sum()
            };
            let mut grads: Vec<Vec<f64>> = block.slots().iter().map(|s| vec![0.0; s.len()]).collect();
            let dx = block.backward(cache.as_ref().unwrap(), Tensor::from_data(y.channels, y.height, y.width, r.clone()), &mut grads);

            let h = 1e-6;
            for i in 0..x.data.len() {
                let mut xp = x.clone();
                xp.data[i] += h;
                let mut xm = x.clone();
                xm.data[i] -= h;
                let fd = (loss(&block, &xp) - loss(&block, &xm)) / (2.0 * h);
                assert!((fd - dx.data[i]).abs() < 1e-5, "dx[{i}] {fd} vs {}", dx.data[i]);
            }
            for s in 0..grads.len() {
                for i in 0..grads[s].len() {
                    let mut bp = block.clone();
                    bp.slots_mut()[s][i] += h;
                    let mut bm = block.clone();
                    bm.slots_mut()[s][i] -= h;
                    let fd = (loss(&bp, &x) - loss(&bm, &x)) / (2.0 * h);
                    assert!((fd - grads[s][i]).abs() < 1e-5, "slot {s}[{i}] {fd} vs {}", grads[s][i]);
                }
            }
        }
    }

    #[test]
    fn normalized_channels_have_zero_mean_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = random_tensor(&mut rng, 2, 8, 8);
        InstanceNorm::<f64>::new(2).forward(&mut x, false);
        for c in 0..2 {
            let ch = x.channel(c);
            let mean: f64 = ch.iter().sum::<f64>() / 64.0;
            let var: f64 = ch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }
}
