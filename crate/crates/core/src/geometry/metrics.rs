use serde::{Deserialize, Serialize};

use super::contour::{extract_contour, ContourPointSet};
use super::edt::squared_edt;
use super::mask::{BinaryMask, Point};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Physical pixel size in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelSpacing<T> {
    pub row_mm: T,
    pub col_mm: T,
}

impl<T: Scalar> PixelSpacing<T> {
    pub fn new(row_mm: T, col_mm: T) -> Result<Self> {
        if !(row_mm > T::zero() && col_mm > T::zero() && row_mm.is_finite() && col_mm.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "pixel spacing must be positive, got ({row_mm}, {col_mm})"
            )));
        }
        Ok(Self { row_mm, col_mm })
    }

    /// One unit per pixel; distances come out in pixels.
    pub fn unit() -> Self {
        Self {
            row_mm: T::one(),
            col_mm: T::one(),
        }
    }

    pub fn scaled(self, k: T) -> Self {
        Self {
            row_mm: self.row_mm * k,
            col_mm: self.col_mm * k,
        }
    }

    pub fn distance(&self, a: Point, b: Point) -> T {
        let dr = T::of_usize(a.row.abs_diff(b.row)) * self.row_mm;
        let dc = T::of_usize(a.col.abs_diff(b.col)) * self.col_mm;
        (dr * dr + dc * dc).sqrt()
    }
}

/// Distance from every target contour point to the nearest reference point,
/// in row-major order of the target points.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField<T> {
    entries: Vec<(Point, T)>,
}

impl<T: Scalar> DistanceField<T> {
    /// Builds a field from explicit entries; they are sorted row-major.
    pub fn from_entries(mut entries: Vec<(Point, T)>) -> Self {
        entries.sort_by_key(|(p, _)| *p);
        Self { entries }
    }

    pub fn entries(&self) -> &[(Point, T)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn distances(&self) -> impl Iterator<Item = T> + '_ {
        self.entries.iter().map(|(_, d)| *d)
    }

    /// First entry (row-major) attaining the maximum distance.
    pub fn argmax(&self) -> Option<(Point, T)> {
        let mut best: Option<(Point, T)> = None;
        for &(p, d) in &self.entries {
            match best {
                Some((_, bd)) if d <= bd => {}
                _ => best = Some((p, d)),
            }
        }
        best
    }
}

/// For every point of `target` the distance to the closest point of
/// `reference`, computed through a distance transform of the reference.
pub fn distance_field<T: Scalar>(
    target: &ContourPointSet,
    reference: &ContourPointSet,
    spacing: PixelSpacing<T>,
) -> Result<DistanceField<T>> {
    if target.is_empty() || reference.is_empty() {
        return Err(Error::EmptyContour);
    }
    if target.shape() != reference.shape() {
        return Err(Error::ShapeMismatch {
            expected: reference.shape(),
            got: target.shape(),
        });
    }
    let (h, w) = reference.shape();
    let mut sites = vec![false; h * w];
    for p in reference.points() {
        sites[p.row * w + p.col] = true;
    }
    let sq = squared_edt(&sites, h, w, spacing.row_mm, spacing.col_mm);
    let entries = target
        .points()
        .iter()
        .map(|&p| (p, sq[p.row * w + p.col].sqrt()))
        .collect();
    Ok(DistanceField { entries })
}

/// Dice similarity `2|A∩B| / (|A|+|B|)`; two empty masks score 1.
pub fn dice<T: Scalar>(a: &BinaryMask, b: &BinaryMask) -> Result<T> {
    let inter = a.intersection_count(b)?;
    let total = a.count() + b.count();
    if total == 0 {
        return Ok(T::one());
    }
    Ok(T::of_usize(2 * inter) / T::of_usize(total))
}

/// Percentile with linear interpolation between closest ranks
/// (`position = q · (n − 1)` on the sorted values).
pub fn percentile<T: Scalar>(values: &mut [T], q: f64) -> T {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    values[lo] + (values[hi] - values[lo]) * frac
}

/// Symmetric 95th-percentile Hausdorff distance.
pub fn hd95<T: Scalar>(a: &ContourPointSet, b: &ContourPointSet, spacing: PixelSpacing<T>) -> Result<T> {
    let mut ab: Vec<T> = distance_field(a, b, spacing)?.distances().collect();
    let mut ba: Vec<T> = distance_field(b, a, spacing)?.distances().collect();
    Ok(percentile(&mut ab, 0.95).max(percentile(&mut ba, 0.95)))
}

/// Ground-truth boundary point furthest from the predicted contour.
pub fn largest_error_point<T: Scalar>(
    gt: &ContourPointSet,
    pred: &ContourPointSet,
    spacing: PixelSpacing<T>,
) -> Result<Point> {
    let field = distance_field(gt, pred, spacing)?;
    Ok(field.argmax().expect("non-empty field").0)
}

/// DSC, HD95 and one-sided maximum error for one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dsc: f64,
    pub hd95_mm: f64,
    pub max_error_mm: f64,
}

impl MetricReport {
    /// Metrics of `pred` against a non-empty `gt`.
    ///
    /// An empty prediction has no contour to measure from; its surface
    /// distances are reported as the image diagonal, the largest distance
    /// representable on the grid.
    pub fn compute<T: Scalar>(pred: &BinaryMask, gt: &BinaryMask, spacing: PixelSpacing<T>) -> Result<Self> {
        pred.check_shape(gt)?;
        let gt_contour = extract_contour(gt);
        if gt_contour.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        let dsc = dice::<T>(pred, gt)?.as_f64();
        let pred_contour = extract_contour(pred);
        if pred_contour.is_empty() {
            let (h, w) = gt.shape();
            let diag = spacing
                .distance(Point::new(0, 0), Point::new(h - 1, w - 1))
                .as_f64();
            return Ok(Self {
                dsc,
                hd95_mm: diag,
                max_error_mm: diag,
            });
        }
        let hd = hd95(&gt_contour, &pred_contour, spacing)?.as_f64();
        let max_error = distance_field(&gt_contour, &pred_contour, spacing)?
            .argmax()
            .map(|(_, d)| d.as_f64())
            .unwrap_or(0.0);
        Ok(Self {
            dsc,
            hd95_mm: hd,
            max_error_mm: max_error,
        })
    }
}
