//! Simulated-clinician revision sessions.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::click::{encode_clicks, oracle_click, Click};
use crate::data::{Provenance, SliceRecord};
use crate::error::{Error, Result};
use crate::geometry::{extract_contour, BinaryMask, MaskRle, MetricReport};
use crate::network::{to_mask, RevisionInput, RevisionNet};
use crate::scalar::Scalar;
use crate::training::{degrade_mask, DegradeParams};

/// Default click budget per slice.
pub const DEFAULT_MAX_CLICKS: usize = 3;

/// One simulated session: metrics before any click and after each click.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionTrace {
    pub slice_id: String,
    pub provenance: Provenance,
    pub organ_id: String,
    /// `metrics[k]` is measured after `k` clicks.
    pub metrics: Vec<MetricReport>,
    pub clicks: Vec<Click>,
    /// Wall-clock time of each forward pass.
    pub latencies_ms: Vec<f64>,
    /// `masks[k]` is the mask after `k` clicks, for replaying the trace.
    pub masks: Vec<MaskRle>,
}

impl RevisionTrace {
    pub fn max_clicks(&self) -> usize {
        self.clicks.len()
    }
}

/// Revises `initial` with up to `max_clicks` oracle clicks. Each click
/// targets the ground-truth boundary point farthest from the current
/// contour; all clicks so far are encoded jointly for every pass.
pub fn simulate_revision<T: Scalar, R: Rng + ?Sized>(
    model: &RevisionNet<T>,
    slice: &SliceRecord,
    initial: &BinaryMask,
    max_clicks: usize,
    rng: &mut R,
) -> Result<RevisionTrace> {
    if slice.gt_mask.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    slice.gt_mask.check_shape(initial)?;
    let gt = &slice.gt_mask;
    let gt_contour = extract_contour(gt);
    let image: Vec<T> = slice.image.iter().map(|&v| T::of(f64::from(v))).collect();

    let mut current = initial.clone();
    let mut metrics = vec![MetricReport::compute(&current, gt, slice.spacing)?];
    let mut masks = vec![current.to_rle()];
    let mut clicks = Vec::with_capacity(max_clicks);
    let mut latencies_ms = Vec::with_capacity(max_clicks);
    for k in 1..=max_clicks {
        let point = oracle_click(&gt_contour, &extract_contour(&current), slice.spacing, rng)?;
        clicks.push(Click::new(point, k));
        let input = RevisionInput::new(&image, &current, &encode_clicks::<T>(&clicks, gt.shape())?)?;
        let start = Instant::now();
        let prob = model.forward(&input)?;
        latencies_ms.push(start.elapsed().as_secs_f64() * 1e3);
        current = to_mask(&prob);
        metrics.push(MetricReport::compute(&current, gt, slice.spacing)?);
        masks.push(current.to_rle());
    }
    Ok(RevisionTrace {
        slice_id: slice.id.clone(),
        provenance: slice.provenance.clone(),
        organ_id: slice.organ_id.clone(),
        metrics,
        clicks,
        latencies_ms,
        masks,
    })
}

/// Evaluates every slice from a degraded initial mask. Slice `i` draws
/// from its own random stream, so results do not depend on order.
pub fn evaluate_slices<T: Scalar>(
    model: &RevisionNet<T>,
    slices: &[SliceRecord],
    degrade: &DegradeParams,
    max_clicks: usize,
    seed: u64,
) -> Result<Vec<RevisionTrace>> {
    slices
        .iter()
        .enumerate()
        .map(|(i, slice)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let initial = degrade_mask(&slice.gt_mask, degrade, &mut rng);
            simulate_revision(model, slice, &initial, max_clicks, &mut rng)
        })
        .collect()
}
