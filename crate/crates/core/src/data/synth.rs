//! Synthetic slices for desk-scale experiments.
//!
//! Each slice holds one target organ (a smooth star-shaped blob) and a few
//! distractor ellipses over a textured, noisy background. Part of the
//! target's rim has almost no contrast, so its boundary there can only be
//! recovered from the current mask and from clicks.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::manifest::{Provenance, SliceRecord, Split};
use super::pngio::{dequantize, quantize};
use crate::geometry::{BinaryMask, PixelSpacing};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub size: usize,
    /// Mean radius of the target, pixels.
    pub radius_range: (f64, f64),
    /// Accepted target areas, pixels (inclusive).
    pub area_range: (usize, usize),
    pub max_distractors: usize,
    pub noise_sigma: f64,
    /// Interior contrast of targets and distractors.
    pub contrast_range: (f64, f64),
    /// Angular width of the low-contrast sector as a fraction of a turn.
    pub faint_fraction: (f64, f64),
    /// In-plane pixel spacing range, millimetres.
    pub spacing_range: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: 256,
            radius_range: (14.0, 34.0),
            area_range: (400, 5000),
            max_distractors: 3,
            noise_sigma: 0.04,
            contrast_range: (0.15, 0.3),
            faint_fraction: (0.2, 0.4),
            spacing_range: (0.98, 1.18),
        }
    }
}

pub const ORGANS: [&str; 2] = ["round", "lobed"];

struct Blob {
    cy: f64,
    cx: f64,
    r0: f64,
    harmonics: [(f64, f64); 3],
}

impl Blob {
    fn radius(&self, theta: f64) -> f64 {
        let wobble: f64 = self
            .harmonics
            .iter()
            .enumerate()
            .map(|(i, (a, phi))| a * ((i as f64 + 2.0) * theta + phi).cos())
            .sum();
        self.r0 * (1.0 + wobble)
    }

    fn contains(&self, r: usize, c: usize) -> bool {
        let dy = r as f64 - self.cy;
        let dx = c as f64 - self.cx;
        (dy * dy + dx * dx).sqrt() < self.radius(dy.atan2(dx))
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn split_counts(n: usize) -> (usize, usize) {
    let train = ((n as f64) * 0.8).round() as usize;
    let val = ((n as f64) * 0.1).round() as usize;
    (train.min(n), val.min(n - train.min(n)))
}

/// Generates `n` slices deterministically from `seed`, split 80/10/10 in order.
pub fn synth_dataset(n: usize, seed: u64, config: &SynthConfig) -> Vec<(Split, SliceRecord)> {
    assert!(n >= 1, "need at least one slice");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_train, n_val) = split_counts(n);
    (0..n)
        .map(|i| {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Validation
            } else {
                Split::Test
            };
            (split, synth_slice(i, config, &mut rng))
        })
        .collect()
}

fn synth_slice(index: usize, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> SliceRecord {
    let size = cfg.size;
    let organ = ORGANS[rng.gen_range(0..ORGANS.len())];
    let amp_max = if organ == "round" { 0.05 } else { 0.16 };

    let (target, mask) = loop {
        let r0 = rng.gen_range(cfg.radius_range.0..=cfg.radius_range.1);
        let margin = r0 * 1.5 + 8.0;
        let blob = Blob {
            cy: rng.gen_range(margin..size as f64 - margin),
            cx: rng.gen_range(margin..size as f64 - margin),
            r0,
            harmonics: [0; 3].map(|_| (rng.gen_range(0.0..amp_max), rng.gen_range(0.0..2.0 * PI))),
        };
        let mask = BinaryMask::from_fn(size, size, |r, c| blob.contains(r, c));
        let area = mask.count();
        if (cfg.area_range.0..=cfg.area_range.1).contains(&area) {
            break (blob, mask);
        }
    };

    // Keep distractors clear of the target so the ground truth stays unambiguous.
    let keep_out = mask.dilate(6);
    let mut distractors: Vec<BinaryMask> = Vec::new();
    let wanted = rng.gen_range(0..=cfg.max_distractors);
    let mut tries = 0;
    while distractors.len() < wanted && tries < 40 {
        tries += 1;
        let ay = rng.gen_range(8.0..25.0);
        let ax = rng.gen_range(8.0..25.0);
        let cy = rng.gen_range(ay..size as f64 - ay);
        let cx = rng.gen_range(ax..size as f64 - ax);
        let m = BinaryMask::from_fn(size, size, |r, c| {
            let dy = (r as f64 - cy) / ay;
            let dx = (c as f64 - cx) / ax;
            dy * dy + dx * dx <= 1.0
        });
        if m.intersection_count(&keep_out).unwrap_or(1) == 0 {
            distractors.push(m);
        }
    }

    let base = rng.gen_range(0.3..0.45);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let period = rng.gen_range(20.0..60.0);
            let dir = rng.gen_range(0.0..2.0 * PI);
            let k = 2.0 * PI / period;
            (rng.gen_range(0.01..0.04), k * dir.cos(), k * dir.sin(), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let contrast = rng.gen_range(cfg.contrast_range.0..=cfg.contrast_range.1);
    let faint_centre = rng.gen_range(0.0..2.0 * PI);
    let faint_half = PI * rng.gen_range(cfg.faint_fraction.0..=cfg.faint_fraction.1);
    let distractor_contrast: Vec<f64> = distractors
        .iter()
        .map(|_| rng.gen_range(cfg.contrast_range.0..=cfg.contrast_range.1))
        .collect();
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("valid sigma");

    let mut image = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let (y, x) = (r as f64, c as f64);
            let mut v = base
                + waves
                    .iter()
                    .map(|(a, ky, kx, ph)| a * (ky * y + kx * x + ph).sin())
                    .sum::<f64>();
            if mask.get(r, c) {
                let theta = (y - target.cy).atan2(x - target.cx);
                let gap = angle_gap(theta, faint_centre);
                // 10% contrast inside the faint sector, ramping to full over 0.3 rad.
                let t = ((gap - faint_half) / 0.3).clamp(0.0, 1.0);
                let ramp = t * t * (3.0 - 2.0 * t);
                v += contrast * (0.1 + 0.9 * ramp);
            }
            for (d, k) in distractors.iter().zip(&distractor_contrast) {
                if d.get(r, c) {
                    v += k;
                }
            }
            v += noise.sample(rng);
            image.push(dequantize(quantize(v as f32)));
        }
    }

    let s = rng.gen_range(cfg.spacing_range.0..=cfg.spacing_range.1);
    SliceRecord {
        id: format!("synth{index:05}_{organ}"),
        size,
        image: Arc::new(image),
        organ_id: organ.to_string(),
        gt_mask: mask,
        spacing: PixelSpacing::new(s, s).expect("positive spacing"),
        provenance: Provenance {
            volume_id: format!("synth{index:05}"),
            slice_index: 0,
            crop_offset: (0, 0),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{extract_contour, fill_contour};

    /// Number of 4-connected foreground components.
    fn components(mask: &BinaryMask) -> usize {
        let (h, w) = mask.shape();
        let mut seen = vec![false; h * w];
        let mut count = 0;
        for start in mask.foreground() {
            if seen[start.row * w + start.col] {
                continue;
            }
            count += 1;
            let mut stack = vec![(start.row, start.col)];
            seen[start.row * w + start.col] = true;
            while let Some((r, c)) = stack.pop() {
                let nbrs = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
                for (rr, cc) in nbrs {
                    if rr < h && cc < w && mask.get(rr, cc) && !seen[rr * w + cc] {
                        seen[rr * w + cc] = true;
                        stack.push((rr, cc));
                    }
                }
            }
        }
        count
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig::default();
        assert_eq!(synth_dataset(10, 42, &cfg), synth_dataset(10, 42, &cfg));
        assert_ne!(synth_dataset(2, 42, &cfg)[0].1, synth_dataset(2, 43, &cfg)[0].1);
    }

    #[test]
    fn masks_are_non_empty_simply_connected_and_in_area_bounds() {
        let cfg = SynthConfig::default();
        for (_, rec) in synth_dataset(24, 7, &cfg) {
            let area = rec.gt_mask.count();
            assert!((cfg.area_range.0..=cfg.area_range.1).contains(&area), "{area}");
            assert_eq!(components(&rec.gt_mask), 1, "{}", rec.id);
            assert_eq!(fill_contour(&extract_contour(&rec.gt_mask)), rec.gt_mask, "{}", rec.id);
            assert!(rec.image.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(ORGANS.contains(&rec.organ_id.as_str()));
        }
    }

    #[test]
    fn splits_are_80_10_10() {
        let recs = synth_dataset(10, 1, &SynthConfig::default());
        let count = |s| recs.iter().filter(|(x, _)| *x == s).count();
        assert_eq!((count(Split::Train), count(Split::Validation), count(Split::Test)), (8, 1, 1));
        assert_eq!(split_counts(600), (480, 60));
        assert_eq!(split_counts(1), (1, 0));
    }
}
