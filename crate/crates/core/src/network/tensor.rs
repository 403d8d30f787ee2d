use crate::scalar::Scalar;

/// Dense `channels × height × width` activation volume (batch size one).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), channels * height * width, "tensor data length");
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.plane();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Stacks `self` on top of `other` along the channel axis.
    pub fn concat(&self, other: &Self) -> Self {
        assert_eq!((self.height, self.width), (other.height, other.width));
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Self::from_data(self.channels + other.channels, self.height, self.width, data)
    }

    /// Splits off the first `channels` channels; inverse of [`Tensor::concat`].
    pub fn split(mut self, channels: usize) -> (Self, Self) {
        let n = self.plane();
        let rest = self.data.split_off(channels * n);
        let tail = Self::from_data(self.channels - channels, self.height, self.width, rest);
        self.channels = channels;
        (self, tail)
    }

    /// Nearest-neighbour ×2 upsampling.
    pub fn upsample2(&self) -> Self {
        let (h, w) = (self.height * 2, self.width * 2);
        let mut out = Self::zeros(self.channels, h, w);
        for c in 0..self.channels {
            let src = self.channel(c);
            let dst = &mut out.data[c * h * w..(c + 1) * h * w];
            for r in 0..h {
                let srow = &src[(r / 2) * self.width..(r / 2 + 1) * self.width];
                let drow = &mut dst[r * w..(r + 1) * w];
                for (x, v) in drow.iter_mut().enumerate() {
                    *v = srow[x / 2];
                }
            }
        }
        out
    }

    /// Gradient of [`Tensor::upsample2`]: sums each 2×2 block.
    pub fn upsample2_backward(grad: &Self) -> Self {
        let (h, w) = (grad.height / 2, grad.width / 2);
        let mut out = Self::zeros(grad.channels, h, w);
        for c in 0..grad.channels {
            let src = grad.channel(c);
            let dst = &mut out.data[c * h * w..(c + 1) * h * w];
            for r in 0..grad.height {
                for x in 0..grad.width {
                    dst[(r / 2) * w + x / 2] += src[r * grad.width + x];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_split_inverse() {
        let a = Tensor::from_data(1, 2, 2, vec![1.0f32, 2.0, 3.0, 4.0]);
        let b = Tensor::from_data(2, 2, 2, (0..8).map(|v| v as f32).collect());
        let (x, y) = a.concat(&b).split(1);
        assert_eq!(x, a);
        assert_eq!(y, b);
    }

    #[test]
    fn upsample_and_adjoint() {
        let a = Tensor::from_data(1, 1, 2, vec![1.0f64, 2.0]);
        let up = a.upsample2();
        assert_eq!(up.data, vec![1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
        let back = Tensor::upsample2_backward(&up);
        assert_eq!(back.data, vec![4.0, 8.0]);
    }
}
