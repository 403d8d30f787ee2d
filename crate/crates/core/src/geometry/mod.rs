//! Masks, boundaries, distance fields and segmentation metrics.
//!
//! Contours are inner boundaries under 4-connectivity with the image border
//! treated as background. Metric distances honour [`PixelSpacing`]; pass
//! [`PixelSpacing::unit`] to work in pixels.

mod contour;
mod edt;
mod mask;
mod metrics;

pub use contour::{extract_contour, fill_contour, ordered_polygons, ContourPointSet};
pub use edt::squared_edt;
pub use mask::{BinaryMask, MaskRle, Point};
pub use metrics::{
    dice, distance_field, hd95, largest_error_point, percentile, DistanceField, MetricReport, PixelSpacing,
};
