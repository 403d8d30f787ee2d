use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::NetworkConfig;
use super::layers::{BlockCache, Conv2d, ConvBlock, ConvCache, InstanceNorm};
use super::tensor::Tensor;
use crate::click::ClickMap;
use crate::error::{Error, Result};
use crate::geometry::BinaryMask;
use crate::scalar::Scalar;

/// Network input: image, current mask and click map stacked as channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisionInput<T> {
    size: usize,
    data: Vec<T>,
}

impl<T: Scalar> RevisionInput<T> {
    /// `image` is row-major with values in `[0, 1]`.
    pub fn new(image: &[T], mask: &BinaryMask, clicks: &ClickMap<T>) -> Result<Self> {
        let (h, w) = mask.shape();
        if h != w {
            return Err(Error::ShapeMismatch {
                expected: (h, h),
                got: (h, w),
            });
        }
        if image.len() != h * w {
            return Err(Error::ShapeMismatch {
                expected: (h, w),
                got: (image.len(), 1),
            });
        }
        if clicks.shape() != (h, w) {
            return Err(Error::ShapeMismatch {
                expected: (h, w),
                got: clicks.shape(),
            });
        }
        let in_unit = |v: &T| *v >= T::zero() && *v <= T::one();
        if !image.iter().all(in_unit) || !clicks.values().iter().all(in_unit) {
            return Err(Error::InvalidConfig("image and click channels must lie in [0, 1]".into()));
        }
        let mut data = Vec::with_capacity(3 * h * w);
        data.extend_from_slice(image);
        data.extend(mask.to_values::<T>());
        data.extend_from_slice(clicks.values());
        Ok(Self { size: h, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Channel `0` image, `1` mask, `2` clicks.
    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.size * self.size;
        &self.data[c * n..(c + 1) * n]
    }
}

/// Sigmoid output of the network, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap<T> {
    size: usize,
    values: Vec<T>,
}

impl<T: Scalar> ProbabilityMap<T> {
    pub fn from_values(size: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), size * size);
        Self { size, values }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Foreground where the probability reaches `threshold` (inclusive).
    pub fn to_mask(&self, threshold: T) -> BinaryMask {
        BinaryMask::from_threshold(self.size, self.size, &self.values, threshold)
    }
}

/// Binarises with the default 0.5 threshold.
pub fn to_mask<T: Scalar>(p: &ProbabilityMap<T>) -> BinaryMask {
    p.to_mask(T::of(0.5))
}

/// Per-parameter-slot gradients, same layout as [`RevisionNet::slots`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub slots: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &RevisionNet<T>) -> Self {
        Self {
            slots: net.slots().iter().map(|s| vec![T::zero(); s.len()]).collect(),
        }
    }
}

/// Activations retained for the backward pass.
pub struct ForwardTrace<T> {
    encoder: Vec<BlockCache<T>>,
    decoder: Vec<BlockCache<T>>,
    head: ConvCache<T>,
    probs: Vec<T>,
}

/// Shapes observed during one forward pass, `(channels, height, width)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationShapes {
    pub encoder: Vec<(usize, usize, usize)>,
    pub decoder: Vec<(usize, usize, usize)>,
    pub output: (usize, usize, usize),
}

/// U-Net with stride-two encoder convolutions, nearest-neighbour upsampling
/// plus convolution in the decoder and channel concatenation skips.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisionNet<T> {
    config: NetworkConfig,
    encoder: Vec<ConvBlock<T>>,
    decoder: Vec<ConvBlock<T>>,
    head: Conv2d<T>,
}

impl<T: Scalar> RevisionNet<T> {
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = config.encoder_widths();
        let sizes = config.encoder_sizes();
        let depth = config.depth;

        let mut encoder = Vec::with_capacity(depth);
        let mut in_c = config.in_channels;
        for i in 0..depth {
            // Normalising a single pixel per channel would zero the signal.
            let norm = (sizes[i] > 1).then(|| InstanceNorm::new(widths[i]));
            encoder.push(ConvBlock {
                conv: Conv2d::init(in_c, widths[i], 2, norm.is_none(), &mut rng),
                norm,
            });
            in_c = widths[i];
        }

        let mut decoder = Vec::with_capacity(depth);
        for j in 0..depth {
            let out_c = if j + 1 < depth { widths[depth - 2 - j] } else { config.base_features };
            decoder.push(ConvBlock {
                conv: Conv2d::init(in_c, out_c, 1, false, &mut rng),
                norm: Some(InstanceNorm::new(out_c)),
            });
            // Concatenated with the matching encoder output for the next stage.
            in_c = if j + 1 < depth { out_c + widths[depth - 2 - j] } else { out_c };
        }
        let head = Conv2d::init(in_c, config.out_channels, 1, true, &mut rng);
        Ok(Self {
            config,
            encoder,
            decoder,
            head,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn parameter_count(&self) -> usize {
        self.encoder.iter().map(ConvBlock::parameter_count).sum::<usize>()
            + self.decoder.iter().map(ConvBlock::parameter_count).sum::<usize>()
            + self.head.parameter_count()
    }

    /// All parameter arrays in a fixed order: encoder blocks, decoder
    /// blocks, then head weight and bias.
    pub fn slots(&self) -> Vec<&Vec<T>> {
        let mut s: Vec<&Vec<T>> = Vec::new();
        for b in self.encoder.iter().chain(&self.decoder) {
            s.extend(b.slots());
        }
        s.push(&self.head.weight);
        s.push(self.head.bias.as_ref().expect("head bias"));
        s
    }

    pub fn slots_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut s: Vec<&mut Vec<T>> = Vec::new();
        for b in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            s.extend(b.slots_mut());
        }
        s.push(&mut self.head.weight);
        s.push(self.head.bias.as_mut().expect("head bias"));
        s
    }

    fn check_input(&self, input: &RevisionInput<T>) -> Result<()> {
        let n = self.config.input_size;
        if input.size != n {
            return Err(Error::ShapeMismatch {
                expected: (n, n),
                got: (input.size, input.size),
            });
        }
        Ok(())
    }

    fn run(
        &self,
        input: &RevisionInput<T>,
        keep: bool,
    ) -> (Vec<T>, Option<ForwardTrace<T>>, ActivationShapes) {
        let n = input.size;
        let depth = self.config.depth;
        let x = Tensor::from_data(self.config.in_channels, n, n, input.data.clone());

        let mut enc_out: Vec<Tensor<T>> = Vec::with_capacity(depth);
        let mut enc_cache = Vec::with_capacity(depth);
        for block in &self.encoder {
            let (y, c) = block.forward(enc_out.last().unwrap_or(&x), keep);
            enc_out.push(y);
            enc_cache.extend(c);
        }
        let mut shapes = ActivationShapes {
            encoder: enc_out.iter().map(Tensor::shape).collect(),
            decoder: Vec::with_capacity(depth),
            output: (0, 0, 0),
        };

        let mut dec_cache = Vec::with_capacity(depth);
        let mut d = enc_out.pop().expect("depth >= 1");
        for (j, block) in self.decoder.iter().enumerate() {
            let (y, c) = block.forward(&d.upsample2(), keep);
            shapes.decoder.push(y.shape());
            dec_cache.extend(c);
            d = if j + 1 < depth { y.concat(&enc_out[depth - 2 - j]) } else { y };
        }
        let (logits, head_cache) = self.head.forward(&d, keep);
        shapes.output = logits.shape();

        let lo = T::epsilon();
        let hi = T::one() - T::epsilon();
        let probs: Vec<T> = logits
            .data
            .iter()
            .map(|&z| (T::one() / (T::one() + (-z).exp())).max(lo).min(hi))
            .collect();
        let trace = head_cache.map(|head| ForwardTrace {
            encoder: enc_cache,
            decoder: dec_cache,
            head,
            probs: probs.clone(),
        });
        (probs, trace, shapes)
    }

    /// Inference pass. Pure in `self`, so a shared model can serve
    /// concurrent callers.
    pub fn forward(&self, input: &RevisionInput<T>) -> Result<ProbabilityMap<T>> {
        self.check_input(input)?;
        let (probs, _, _) = self.run(input, false);
        Ok(ProbabilityMap::from_values(input.size, probs))
    }

    /// Inference pass that also reports every intermediate activation shape.
    pub fn forward_with_shapes(&self, input: &RevisionInput<T>) -> Result<(ProbabilityMap<T>, ActivationShapes)> {
        self.check_input(input)?;
        let (probs, _, shapes) = self.run(input, false);
        Ok((ProbabilityMap::from_values(input.size, probs), shapes))
    }

    /// Forward pass keeping the activations needed by [`RevisionNet::backward`].
    pub fn forward_train(&self, input: &RevisionInput<T>) -> Result<(ProbabilityMap<T>, ForwardTrace<T>)> {
        self.check_input(input)?;
        let (probs, trace, _) = self.run(input, true);
        Ok((
            ProbabilityMap::from_values(input.size, probs),
            trace.expect("trace kept in training mode"),
        ))
    }

    /// Back-propagates `dprob` (gradient of the loss with respect to the
    /// output probabilities) into fresh parameter gradients.
    pub fn backward(&self, trace: &ForwardTrace<T>, dprob: &[T]) -> Gradients<T> {
        let depth = self.config.depth;
        let n = self.config.input_size;
        assert_eq!(dprob.len(), n * n);
        let mut grads = Gradients::zeros_like(self);

        let mut offsets = Vec::with_capacity(2 * depth + 1);
        let mut acc = 0;
        for b in self.encoder.iter().chain(&self.decoder) {
            offsets.push(acc);
            acc += b.slot_count();
        }
        let head_slot = acc;

        let dlogits: Vec<T> = dprob
            .iter()
            .zip(&trace.probs)
            .map(|(&g, &p)| g * p * (T::one() - p))
            .collect();
        let dlogits = Tensor::from_data(1, n, n, dlogits);
        let (hw, hb) = grads.slots[head_slot..].split_at_mut(1);
        let mut grad = self.head.backward(&trace.head, &dlogits, &mut hw[0], Some(&mut hb[0]));

        let mut skip_grads: Vec<Option<Tensor<T>>> = (0..depth).map(|_| None).collect();
        for j in (0..depth).rev() {
            if j + 1 < depth {
                let out_c = self.decoder[j].conv.out_channels;
                let (own, skip) = grad.split(out_c);
                skip_grads[depth - 2 - j] = Some(skip);
                grad = own;
            }
            let block = &self.decoder[j];
            let off = offsets[depth + j];
            let du = block.backward(&trace.decoder[j], grad, &mut grads.slots[off..off + block.slot_count()]);
            grad = Tensor::upsample2_backward(&du);
        }

        for i in (0..depth).rev() {
            if let Some(skip) = skip_grads[i].take() {
                grad.data.iter_mut().zip(&skip.data).for_each(|(g, s)| *g += *s);
            }
            let block = &self.encoder[i];
            let off = offsets[i];
            grad = block.backward(&trace.encoder[i], grad, &mut grads.slots[off..off + block.slot_count()]);
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::click::{encode_clicks, Click};
    use rand::Rng;

    fn tiny() -> NetworkConfig {
        NetworkConfig {
            base_features: 2,
            max_features: 4,
            depth: 3,
            input_size: 8,
            ..NetworkConfig::default()
        }
    }

    fn input(size: usize, seed: u64) -> RevisionInput<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let image: Vec<f64> = (0..size * size).map(|_| rng.gen()).collect();
        let mask = BinaryMask::rect(size, size, size / 4, 3 * size / 4, size / 4, size / 2 + 1);
        let clicks = encode_clicks(&[Click { row: size / 2, col: size / 2, ordinal: 1 }], (size, size)).unwrap();
        RevisionInput::new(&image, &mask, &clicks).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let net = RevisionNet::<f64>::new(tiny(), 5).unwrap();
        let x = input(8, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |n: &RevisionNet<f64>| -> f64 {
            n.forward(&x).unwrap().values().iter().zip(&r).map(|(a, b)| a * b).sum()
        };
        let (_, trace) = net.forward_train(&x).unwrap();
        let grads = net.backward(&trace, &r);
        let h = 1e-6;
        let mut checked = 0;
        for s in 0..grads.slots.len() {
            for i in (0..grads.slots[s].len()).step_by(3) {
                let mut p = net.clone();
                p.slots_mut()[s][i] += h;
                let mut m = net.clone();
                m.slots_mut()[s][i] -= h;
                let fd = (loss(&p) - loss(&m)) / (2.0 * h);
                let an = grads.slots[s][i];
                assert!((fd - an).abs() <= 1e-6 + 1e-4 * fd.abs().max(an.abs()), "slot {s}[{i}]: {fd} vs {an}");
                checked += 1;
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn rejects_wrong_input_size() {
        let net = RevisionNet::<f32>::new(tiny(), 0).unwrap();
        let mask = BinaryMask::zeros(16, 16);
        let clicks = encode_clicks::<f32>(&[], (16, 16)).unwrap();
        let x = RevisionInput::new(&vec![0.5f32; 256], &mask, &clicks).unwrap();
        assert!(matches!(net.forward(&x), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn input_validates_ranges() {
        let mask = BinaryMask::zeros(4, 4);
        let clicks = encode_clicks::<f64>(&[], (4, 4)).unwrap();
        assert!(RevisionInput::new(&[2.0f64; 16], &mask, &clicks).is_err());
    }

    #[test]
    fn threshold_is_inclusive() {
        let p = ProbabilityMap::from_values(2, vec![0.5f64, 0.49, 0.9, 0.1]);
        let m = to_mask(&p);
        assert_eq!(m.cells(), &[1, 0, 1, 0]);
        assert!(to_mask(&ProbabilityMap::from_values(2, vec![0.9f32; 4])).count() == 4);
        assert!(to_mask(&ProbabilityMap::from_values(2, vec![0.1f32; 4])).is_empty());
    }

    #[test]
    fn inference_is_deterministic_and_seeded() {
        let a = RevisionNet::<f64>::new(tiny(), 3).unwrap();
        let b = RevisionNet::<f64>::new(tiny(), 3).unwrap();
        assert_eq!(a, b);
        let x = input(8, 2);
        assert_eq!(a.forward(&x).unwrap(), a.forward(&x).unwrap());
        let c = RevisionNet::<f64>::new(tiny(), 4).unwrap();
        assert_ne!(a, c);
    }
}
