//! Synthetic initial contours: a ground-truth mask perturbed by a shift,
//! a boundary erosion or dilation, and a notch cut out of the boundary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{extract_contour, BinaryMask, Point};

/// Perturbation magnitudes; each draw picks values uniformly up to these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradeParams {
    /// Largest translation per axis, pixels.
    pub max_shift: usize,
    /// Largest erosion or dilation, pixels.
    pub max_morph: usize,
    pub notch_probability: f64,
    /// Largest radius of the disc removed around a boundary point, pixels.
    pub max_notch_radius: usize,
}

impl Default for DegradeParams {
    fn default() -> Self {
        Self {
            max_shift: 5,
            max_morph: 3,
            notch_probability: 0.5,
            max_notch_radius: 10,
        }
    }
}

impl DegradeParams {
    pub fn none() -> Self {
        Self {
            max_shift: 0,
            max_morph: 0,
            notch_probability: 0.0,
            max_notch_radius: 0,
        }
    }

    /// Draws one concrete perturbation for `gt`.
    pub fn draw<R: Rng + ?Sized>(&self, gt: &BinaryMask, rng: &mut R) -> Degradation {
        let s = self.max_shift.min(5) as i64;
        let m = self.max_morph.min(3) as i64;
        let shift = (rng.gen_range(-s..=s), rng.gen_range(-s..=s));
        let morph = rng.gen_range(-m..=m);
        let notch = if self.max_notch_radius > 0 && rng.gen_bool(self.notch_probability.clamp(0.0, 1.0)) {
            let boundary = extract_contour(gt);
            (!boundary.is_empty()).then(|| {
                let centre = boundary.points()[rng.gen_range(0..boundary.len())];
                (centre, rng.gen_range(1..=self.max_notch_radius))
            })
        } else {
            None
        };
        Degradation { shift, morph, notch }
    }
}

/// A concrete perturbation. The notch is placed on the ground-truth
/// boundary and applied after the shift and morphology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degradation {
    pub shift: (i64, i64),
    /// Positive dilates, negative erodes.
    pub morph: i64,
    pub notch: Option<(Point, usize)>,
}

impl Degradation {
    pub fn apply(&self, gt: &BinaryMask) -> BinaryMask {
        let mut m = gt.shift(self.shift.0, self.shift.1);
        m = match self.morph {
            k if k > 0 => m.dilate(k as usize),
            k if k < 0 => m.erode(k.unsigned_abs() as usize),
            _ => m,
        };
        if let Some((c, radius)) = self.notch {
            let r2 = (radius * radius) as i64;
            let (h, w) = m.shape();
            let lo = |x: usize| x.saturating_sub(radius);
            for r in lo(c.row)..(c.row + radius + 1).min(h) {
                for col in lo(c.col)..(c.col + radius + 1).min(w) {
                    let (dr, dc) = (r as i64 - c.row as i64, col as i64 - c.col as i64);
                    if dr * dr + dc * dc <= r2 {
                        m.set(r, col, false);
                    }
                }
            }
        }
        m
    }
}

/// Perturbs `gt` into a plausible imperfect initial mask. The result may
/// be empty.
pub fn degrade_mask<R: Rng + ?Sized>(gt: &BinaryMask, params: &DegradeParams, rng: &mut R) -> BinaryMask {
    params.draw(gt, rng).apply(gt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_magnitudes_are_the_identity() {
        let gt = BinaryMask::rect(32, 32, 8, 20, 5, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(degrade_mask(&gt, &DegradeParams::none(), &mut rng), gt);
        }
    }

    #[test]
    fn dilation_grows_a_square_per_side() {
        let gt = BinaryMask::rect(32, 32, 10, 20, 10, 20);
        let d = Degradation {
            shift: (0, 0),
            morph: 2,
            notch: None,
        };
        assert_eq!(d.apply(&gt), BinaryMask::rect(32, 32, 8, 22, 8, 22));
        let e = Degradation { morph: -3, ..d };
        assert_eq!(e.apply(&gt), BinaryMask::rect(32, 32, 13, 17, 13, 17));
    }

    #[test]
    fn notch_removes_a_disc_on_the_boundary() {
        let gt = BinaryMask::rect(32, 32, 10, 20, 10, 20);
        let d = Degradation {
            shift: (0, 0),
            morph: 0,
            notch: Some((Point::new(10, 15), 2)),
        };
        let m = d.apply(&gt);
        // Inside the square the radius-2 disc keeps 5 + 3 + 1 pixels of rows 10..=12.
        assert_eq!(gt.count() - m.count(), 9);
        assert!(!m.get(12, 15) && m.get(13, 15));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let gt = BinaryMask::rect(64, 64, 10, 40, 20, 50);
        let p = DegradeParams::default();
        let a = degrade_mask(&gt, &p, &mut ChaCha8Rng::seed_from_u64(11));
        let b = degrade_mask(&gt, &p, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }
}
