//! Clicks: encoding into the network's click channel and simulating where a
//! clinician would click.
//!
//! Each click becomes a truncated Gaussian bump with peak 1 at the clicked
//! pixel, `σ = R/3` and zero beyond the radius `R`. Several clicks combine by
//! per-pixel maximum so the channel stays in `[0, 1]`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{largest_error_point, ContourPointSet, DistanceField, PixelSpacing, Point};
use crate::scalar::Scalar;

/// Default truncation radius of a click bump, in pixels.
pub const CLICK_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Click {
    pub row: usize,
    pub col: usize,
    /// 1-based position within a revision session.
    pub ordinal: usize,
}

impl Click {
    pub fn new(point: Point, ordinal: usize) -> Self {
        Self {
            row: point.row,
            col: point.col,
            ordinal,
        }
    }

    pub fn point(&self) -> Point {
        Point::new(self.row, self.col)
    }
}

/// Parameters of the click bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickEncoding {
    pub radius: f64,
}

impl Default for ClickEncoding {
    fn default() -> Self {
        Self { radius: CLICK_RADIUS }
    }
}

impl ClickEncoding {
    pub fn sigma(&self) -> f64 {
        self.radius / 3.0
    }

    /// Bump value at squared pixel distance `d2` from a click.
    pub fn value<T: Scalar>(&self, d2: f64) -> T {
        if d2 > self.radius * self.radius {
            return T::zero();
        }
        let s = self.sigma();
        T::of((-d2 / (2.0 * s * s)).exp())
    }

    /// Encodes `clicks` into a `shape` grid. An empty click list yields an
    /// all-zero map.
    pub fn encode<T: Scalar>(&self, clicks: &[Click], shape: (usize, usize)) -> Result<ClickMap<T>> {
        let (h, w) = shape;
        for c in clicks {
            if c.row >= h || c.col >= w {
                return Err(Error::OutOfBounds {
                    row: c.row as i64,
                    col: c.col as i64,
                    height: h,
                    width: w,
                });
            }
        }
        let mut values = vec![T::zero(); h * w];
        let reach = self.radius.floor() as usize;
        for c in clicks {
            let r0 = c.row.saturating_sub(reach);
            let r1 = (c.row + reach).min(h - 1);
            let c0 = c.col.saturating_sub(reach);
            let c1 = (c.col + reach).min(w - 1);
            for r in r0..=r1 {
                for col in c0..=c1 {
                    let dr = r.abs_diff(c.row) as f64;
                    let dc = col.abs_diff(c.col) as f64;
                    let v: T = self.value(dr * dr + dc * dc);
                    let slot = &mut values[r * w + col];
                    if v > *slot {
                        *slot = v;
                    }
                }
            }
        }
        Ok(ClickMap {
            height: h,
            width: w,
            values,
        })
    }
}

/// Encodes clicks with the default radius.
pub fn encode_clicks<T: Scalar>(clicks: &[Click], shape: (usize, usize)) -> Result<ClickMap<T>> {
    ClickEncoding::default().encode(clicks, shape)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClickMap<T> {
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Scalar> ClickMap<T> {
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.width + col]
    }
}

/// Sign applied to the distances inside the softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SoftmaxSign {
    /// Larger error, higher click probability.
    #[default]
    Positive,
    /// `exp(−D)`: the nearest points are favoured.
    Negative,
}

/// Softmax settings for training-time click sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickSampling {
    pub temperature: f64,
    pub sign: SoftmaxSign,
}

impl Default for ClickSampling {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            sign: SoftmaxSign::Positive,
        }
    }
}

/// Probability of clicking each ground-truth boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickProbability<T> {
    entries: Vec<(Point, T)>,
}

impl<T: Scalar> ClickProbability<T> {
    pub fn entries(&self) -> &[(Point, T)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Uniform distribution over `points`.
    pub fn uniform(points: &[Point]) -> Self {
        let p = T::one() / T::of_usize(points.len().max(1));
        Self {
            entries: points.iter().map(|&q| (q, p)).collect(),
        }
    }

    /// Most probable point; ties go to the first in row-major order.
    pub fn argmax(&self) -> Option<Point> {
        let mut best: Option<(Point, T)> = None;
        for &(q, p) in &self.entries {
            match best {
                Some((_, bp)) if p <= bp => {}
                _ => best = Some((q, p)),
            }
        }
        best.map(|(q, _)| q)
    }
}

/// Softmax of `sign · D(y) / temperature` over the field entries.
pub fn click_distribution<T: Scalar>(field: &DistanceField<T>, sampling: ClickSampling) -> Result<ClickProbability<T>> {
    if field.is_empty() {
        return Err(Error::EmptyContour);
    }
    if !(sampling.temperature > 0.0) {
        return Err(Error::InvalidConfig("softmax temperature must be positive".into()));
    }
    let sign = match sampling.sign {
        SoftmaxSign::Positive => 1.0,
        SoftmaxSign::Negative => -1.0,
    };
    let logits: Vec<f64> = field
        .distances()
        .map(|d| sign * d.as_f64() / sampling.temperature)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let entries = field
        .entries()
        .iter()
        .zip(&weights)
        .map(|(&(p, _), &w)| (p, T::of(w / total)))
        .collect();
    Ok(ClickProbability { entries })
}

/// Draws one boundary point from `dist`.
pub fn sample_training_click<T: Scalar, R: Rng + ?Sized>(dist: &ClickProbability<T>, rng: &mut R) -> Point {
    assert!(!dist.is_empty(), "cannot sample from an empty distribution");
    let weights = dist.entries.iter().map(|(_, p)| p.as_f64());
    match WeightedIndex::new(weights) {
        Ok(index) => dist.entries[index.sample(rng)].0,
        // All weights underflowed: fall back to the most likely point.
        Err(_) => dist.argmax().expect("non-empty"),
    }
}

/// Simulated clinician at test time: click the ground-truth boundary point
/// with the largest error. With no predicted contour, click a uniformly
/// random ground-truth point.
pub fn oracle_click<T: Scalar, R: Rng + ?Sized>(
    gt: &ContourPointSet,
    pred: &ContourPointSet,
    spacing: PixelSpacing<T>,
    rng: &mut R,
) -> Result<Point> {
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    if pred.is_empty() {
        return Ok(gt.points()[rng.gen_range(0..gt.len())]);
    }
    largest_error_point(gt, pred, spacing)
}

/// Training-time click: sample from the softmax over the error field, or
/// uniformly when there is no predicted contour.
pub fn training_click<T: Scalar, R: Rng + ?Sized>(
    gt: &ContourPointSet,
    pred: &ContourPointSet,
    sampling: ClickSampling,
    rng: &mut R,
) -> Result<Point> {
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    if pred.is_empty() {
        return Ok(gt.points()[rng.gen_range(0..gt.len())]);
    }
    let field = crate::geometry::distance_field::<T>(gt, pred, PixelSpacing::unit())?;
    let dist = click_distribution(&field, sampling)?;
    Ok(sample_training_click(&dist, rng))
}
