use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer pixel coordinate. Ordering is row-major, which is the canonical
/// order used for every tie-break in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point {
    pub row: usize,
    pub col: usize,
}

impl Point {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl From<(usize, usize)> for Point {
    fn from((row, col): (usize, usize)) -> Self {
        Self { row, col }
    }
}

/// A 2D binary segmentation mask stored row-major, one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    cells: Vec<u8>,
}

impl BinaryMask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            cells: vec![0; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut cells = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                cells.push(u8::from(f(r, c)));
            }
        }
        Self {
            height,
            width,
            cells,
        }
    }

    /// Builds a mask from row-major cells; any non-zero byte counts as foreground.
    pub fn from_cells(height: usize, width: usize, cells: Vec<u8>) -> Result<Self> {
        if cells.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: (height, width),
                got: (cells.len(), 1),
            });
        }
        let cells = cells.into_iter().map(|v| u8::from(v != 0)).collect();
        Ok(Self {
            height,
            width,
            cells,
        })
    }

    /// Foreground wherever `values[i] >= threshold`.
    pub fn from_threshold<T: PartialOrd + Copy>(
        height: usize,
        width: usize,
        values: &[T],
        threshold: T,
    ) -> Self {
        assert_eq!(values.len(), height * width);
        Self {
            height,
            width,
            cells: values.iter().map(|&v| u8::from(v >= threshold)).collect(),
        }
    }

    /// Filled axis-aligned rectangle covering rows `r0..r1` and cols `c0..c1`.
    pub fn rect(height: usize, width: usize, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Self::from_fn(height, width, |r, c| (r0..r1).contains(&r) && (c0..c1).contains(&c))
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.width + col] != 0
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.width + col] = u8::from(value);
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(|&v| v == 0)
    }

    pub fn foreground(&self) -> impl Iterator<Item = Point> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| Point::new(i / self.width, i % self.width))
    }

    pub fn contains(&self, p: Point) -> bool {
        p.row < self.height && p.col < self.width
    }

    pub fn check_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &Self) -> Result<usize> {
        self.check_shape(other)?;
        Ok(self
            .cells
            .iter()
            .zip(&other.cells)
            .filter(|(a, b)| **a != 0 && **b != 0)
            .count())
    }

    /// Mask values as 0.0 / 1.0 scalars.
    pub fn to_values<T: num_traits::Float>(&self) -> Vec<T> {
        self.cells
            .iter()
            .map(|&v| if v != 0 { T::one() } else { T::zero() })
            .collect()
    }

    /// One step of dilation with the 3×3 square structuring element, repeated
    /// `steps` times.
    pub fn dilate(&self, steps: usize) -> Self {
        let mut cur = self.clone();
        for _ in 0..steps {
            cur = cur.square_step(true);
        }
        cur
    }

    /// Erosion with the 3×3 square structuring element; pixels outside the
    /// image count as background.
    pub fn erode(&self, steps: usize) -> Self {
        let mut cur = self.clone();
        for _ in 0..steps {
            cur = cur.square_step(false);
        }
        cur
    }

    fn square_step(&self, dilate: bool) -> Self {
        let (h, w) = self.shape();
        Self::from_fn(h, w, |r, c| {
            let mut any = false;
            let mut all = true;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let rr = r as i64 + dr;
                    let cc = c as i64 + dc;
                    let v = rr >= 0
                        && cc >= 0
                        && (rr as usize) < h
                        && (cc as usize) < w
                        && self.get(rr as usize, cc as usize);
                    any |= v;
                    all &= v;
                }
            }
            if dilate {
                any
            } else {
                all
            }
        })
    }

    /// Translates the mask by `(dr, dc)`; pixels shifted in from outside are background.
    pub fn shift(&self, dr: i64, dc: i64) -> Self {
        let (h, w) = self.shape();
        Self::from_fn(h, w, |r, c| {
            let sr = r as i64 - dr;
            let sc = c as i64 - dc;
            sr >= 0 && sc >= 0 && (sr as usize) < h && (sc as usize) < w && self.get(sr as usize, sc as usize)
        })
    }

    pub fn to_rle(&self) -> MaskRle {
        MaskRle::encode(self)
    }
}

/// Run-length encoding of a mask in row-major order. `counts` alternate
/// background / foreground runs and always start with a (possibly zero)
/// background run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRle {
    pub height: usize,
    pub width: usize,
    pub counts: Vec<u32>,
}

impl MaskRle {
    pub fn encode(mask: &BinaryMask) -> Self {
        let mut counts = Vec::new();
        let mut current = 0u8;
        let mut run = 0u32;
        for &v in mask.cells() {
            if v == current {
                run += 1;
            } else {
                counts.push(run);
                current = v;
                run = 1;
            }
        }
        counts.push(run);
        Self {
            height: mask.height(),
            width: mask.width(),
            counts,
        }
    }

    pub fn decode(&self) -> Result<BinaryMask> {
        let total: u64 = self.counts.iter().map(|&c| u64::from(c)).sum();
        if total != (self.height * self.width) as u64 {
            return Err(Error::Parse(format!(
                "run lengths sum to {total}, expected {}",
                self.height * self.width
            )));
        }
        let mut cells = Vec::with_capacity(self.height * self.width);
        for (i, &run) in self.counts.iter().enumerate() {
            let v = (i % 2) as u8;
            cells.extend(std::iter::repeat(v).take(run as usize));
        }
        BinaryMask::from_cells(self.height, self.width, cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dilating_square_grows_each_side() {
        let sq = BinaryMask::rect(32, 32, 10, 20, 12, 18);
        let grown = sq.dilate(2);
        assert_eq!(grown, BinaryMask::rect(32, 32, 8, 22, 10, 20));
        assert_eq!(grown.erode(2), sq);
    }

    #[test]
    fn erosion_treats_border_as_background() {
        let full = BinaryMask::from_fn(5, 5, |_, _| true);
        assert_eq!(full.erode(1), BinaryMask::rect(5, 5, 1, 4, 1, 4));
    }

    #[test]
    fn shift_drops_pixels_leaving_the_frame() {
        let m = BinaryMask::rect(4, 4, 0, 2, 0, 2);
        let s = m.shift(3, 1);
        assert_eq!(s.count(), 2);
        assert!(s.get(3, 1) && s.get(3, 2));
    }

    #[test]
    fn rle_starts_with_background_run() {
        let m = BinaryMask::from_cells(1, 4, vec![1, 1, 0, 1]).unwrap();
        assert_eq!(m.to_rle().counts, vec![0, 2, 1, 1]);
        let empty = BinaryMask::zeros(2, 3);
        assert_eq!(empty.to_rle().counts, vec![6]);
    }

    #[test]
    fn rle_rejects_wrong_total() {
        let rle = MaskRle {
            height: 2,
            width: 2,
            counts: vec![1, 1],
        };
        assert!(rle.decode().is_err());
    }

    proptest! {
        #[test]
        fn rle_roundtrip(h in 1usize..12, w in 1usize..12, bits in proptest::collection::vec(any::<bool>(), 144)) {
            let m = BinaryMask::from_fn(h, w, |r, c| bits[r * w + c]);
            prop_assert_eq!(m.to_rle().decode().unwrap(), m);
        }
    }
}
