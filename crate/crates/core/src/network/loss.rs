//! Soft Dice loss, distance-transform Hausdorff loss and their per-sample
//! balancing.

use serde::{Deserialize, Serialize};

use super::unet::ProbabilityMap;
use crate::error::Result;
use crate::geometry::{extract_contour, squared_edt, BinaryMask};
use crate::scalar::Scalar;

/// Smoothing term added to numerator and denominator of the Dice ratio.
pub const DICE_SMOOTH: f64 = 1.0;
/// Guard on the Hausdorff term when computing the balancing weight.
pub const BALANCE_GUARD: f64 = 1e-8;

/// A loss value with its gradient with respect to the probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue<T> {
    pub value: T,
    pub grad: Vec<T>,
}

fn check<T: Scalar>(p: &ProbabilityMap<T>, gt: &BinaryMask) -> Result<()> {
    let n = p.size();
    if gt.shape() != (n, n) {
        return Err(crate::Error::ShapeMismatch {
            expected: (n, n),
            got: gt.shape(),
        });
    }
    Ok(())
}

/// `1 − (2Σpg + ε) / (Σp + Σg + ε)` with `ε = 1`.
pub fn dice_loss<T: Scalar>(p: &ProbabilityMap<T>, gt: &BinaryMask) -> Result<LossValue<T>> {
    check(p, gt)?;
    let eps = T::of(DICE_SMOOTH);
    let two = T::of(2.0);
    let g: Vec<T> = gt.to_values();
    let sum_p: T = p.values().iter().copied().sum();
    let sum_g: T = g.iter().copied().sum();
    let inter: T = p.values().iter().zip(&g).map(|(&a, &b)| a * b).sum();
    let num = two * inter + eps;
    let den = sum_p + sum_g + eps;
    let grad = g.iter().map(|&gi| -(two * gi * den - num) / (den * den)).collect();
    Ok(LossValue {
        value: T::one() - num / den,
        grad,
    })
}

/// Squared unsigned distance (pixels) to the boundary of `mask`; zero
/// everywhere when the mask has no boundary.
pub fn boundary_distance_sq<T: Scalar>(mask: &BinaryMask) -> Vec<T> {
    let (h, w) = mask.shape();
    let contour = extract_contour(mask);
    if contour.is_empty() {
        return vec![T::zero(); h * w];
    }
    let mut sites = vec![false; h * w];
    for p in contour.points() {
        sites[p.row * w + p.col] = true;
    }
    squared_edt(&sites, h, w, T::one(), T::one())
}

/// Mean over pixels of `(p − g)² · (dt_gt² + dt_pred²)`.
///
/// `dt_pred` is taken from the thresholded prediction. Both transforms are
/// constants for the gradient, which therefore only flows through the
/// squared residual.
pub fn hd_loss<T: Scalar>(p: &ProbabilityMap<T>, gt: &BinaryMask) -> Result<LossValue<T>> {
    check(p, gt)?;
    let dt_gt = boundary_distance_sq::<T>(gt);
    let dt_pred = boundary_distance_sq::<T>(&p.to_mask(T::of(0.5)));
    Ok(hd_loss_with_transforms(p.values(), gt, &dt_gt, &dt_pred))
}

/// [`hd_loss`] with precomputed squared distance transforms.
pub fn hd_loss_with_transforms<T: Scalar>(p: &[T], gt: &BinaryMask, dt_gt_sq: &[T], dt_pred_sq: &[T]) -> LossValue<T> {
    let n = T::of_usize(p.len());
    let two = T::of(2.0);
    let mut value = T::zero();
    let mut grad = Vec::with_capacity(p.len());
    for (i, (&pi, &g)) in p.iter().zip(gt.cells()).enumerate() {
        let residual = pi - if g != 0 { T::one() } else { T::zero() };
        let weight = dt_gt_sq[i] + dt_pred_sq[i];
        value += residual * residual * weight;
        grad.push(two * residual * weight / n);
    }
    LossValue { value: value / n, grad }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown<T> {
    pub dice_loss: T,
    pub hd_loss: T,
    pub balance_weight: T,
    pub total: T,
}

/// Weights the Hausdorff term so it matches the Dice term in magnitude:
/// `w = d / (h + 1e-8)`, `total = d + w·h`.
pub fn balanced_total<T: Scalar>(d: T, h: T) -> LossBreakdown<T> {
    let w = d / (h + T::of(BALANCE_GUARD));
    LossBreakdown {
        dice_loss: d,
        hd_loss: h,
        balance_weight: w,
        total: d + w * h,
    }
}

/// Total training loss and its gradient; the balancing weight is held
/// constant when differentiating.
pub fn training_loss<T: Scalar>(p: &ProbabilityMap<T>, gt: &BinaryMask) -> Result<(LossBreakdown<T>, Vec<T>)> {
    let d = dice_loss(p, gt)?;
    let h = hd_loss(p, gt)?;
    let breakdown = balanced_total(d.value, h.value);
    let w = breakdown.balance_weight;
    let grad = d.grad.iter().zip(&h.grad).map(|(&a, &b)| a + w * b).collect();
    Ok((breakdown, grad))
}
