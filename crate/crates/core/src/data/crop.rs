use std::sync::Arc;

use super::manifest::{Provenance, SliceRecord};
use super::pngio::{dequantize, quantize};
use super::volume::VolumeRecord;
use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, PixelSpacing};

pub const CROP_SIZE: usize = 256;
/// Voxels above this HU value count as body when centring the crop.
pub const BODY_THRESHOLD_HU: i32 = -300;
pub const HU_MIN: i32 = -1000;
pub const HU_MAX: i32 = 1000;

/// Clips to `[HU_MIN, HU_MAX]` and rescales to `[0, 1]`.
pub fn normalize_hu(hu: i32) -> f32 {
    (hu.clamp(HU_MIN, HU_MAX) - HU_MIN) as f32 / (HU_MAX - HU_MIN) as f32
}

/// Top-left corner of a `crop × crop` window centred on the body's centre
/// of mass, clamped to the slice. Falls back to the slice centre when no
/// voxel exceeds the body threshold.
pub fn crop_offset(slice: &[i32], height: usize, width: usize, crop: usize) -> (usize, usize) {
    let (mut sr, mut sc, mut n) = (0u64, 0u64, 0u64);
    for r in 0..height {
        for c in 0..width {
            if slice[r * width + c] > BODY_THRESHOLD_HU {
                sr += r as u64;
                sc += c as u64;
                n += 1;
            }
        }
    }
    let (cr, cc) = if n == 0 {
        ((height - 1) as f64 / 2.0, (width - 1) as f64 / 2.0)
    } else {
        (sr as f64 / n as f64, sc as f64 / n as f64)
    };
    let place = |centre: f64, extent: usize| -> usize {
        let start = (centre + 0.5).floor() as i64 - (crop / 2) as i64;
        start.clamp(0, (extent - crop) as i64) as usize
    };
    (place(cr, height), place(cc, width))
}

/// Cuts every axial slice to a 256×256 window and emits one record per
/// `(slice, organ)` whose cropped mask is non-empty.
pub fn crop_axial(volume: &VolumeRecord) -> Result<Vec<SliceRecord>> {
    if volume.height < CROP_SIZE || volume.width < CROP_SIZE {
        return Err(Error::TooSmall {
            height: volume.height,
            width: volume.width,
            required: CROP_SIZE,
        });
    }
    let spacing = PixelSpacing::new(volume.spacing.0, volume.spacing.1)?;
    let w = volume.width;
    let mut out = Vec::new();
    for z in 0..volume.slices {
        let slice = volume.slice(z);
        let (r0, c0) = crop_offset(slice, volume.height, w, CROP_SIZE);
        let mut image: Option<Arc<Vec<f32>>> = None;
        for (organ, mask) in &volume.organ_masks {
            let mask_slice = &mask[z * volume.slice_len()..(z + 1) * volume.slice_len()];
            let cropped = BinaryMask::from_fn(CROP_SIZE, CROP_SIZE, |r, c| mask_slice[(r0 + r) * w + c0 + c] != 0);
            if cropped.is_empty() {
                continue;
            }
            let image = image
                .get_or_insert_with(|| {
                    let mut px = Vec::with_capacity(CROP_SIZE * CROP_SIZE);
                    for r in 0..CROP_SIZE {
                        for c in 0..CROP_SIZE {
                            // Stored at 16 bits; keep the in-memory copy identical.
                            px.push(dequantize(quantize(normalize_hu(slice[(r0 + r) * w + c0 + c]))));
                        }
                    }
                    Arc::new(px)
                })
                .clone();
            out.push(SliceRecord {
                id: format!("{}_s{:04}_{}", volume.id, z, organ),
                size: CROP_SIZE,
                image,
                organ_id: organ.clone(),
                gt_mask: cropped,
                spacing,
                provenance: Provenance {
                    volume_id: volume.id.clone(),
                    slice_index: z,
                    crop_offset: (r0, c0),
                },
            });
        }
    }
    Ok(out)
}
