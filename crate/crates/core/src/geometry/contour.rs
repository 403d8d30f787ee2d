use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::mask::{BinaryMask, Point};

/// Boundary pixels of a mask, kept sorted in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContourPointSet {
    points: Vec<Point>,
    shape: (usize, usize),
}

impl ContourPointSet {
    /// Builds a set from arbitrary points; duplicates are removed and the
    /// points sorted. Points outside `shape` are rejected.
    pub fn from_points(
        points: impl IntoIterator<Item = Point>,
        shape: (usize, usize),
    ) -> crate::Result<Self> {
        let mut points: Vec<Point> = points.into_iter().collect();
        if let Some(p) = points.iter().find(|p| p.row >= shape.0 || p.col >= shape.1) {
            return Err(crate::Error::OutOfBounds {
                row: p.row as i64,
                col: p.col as i64,
                height: shape.0,
                width: shape.1,
            });
        }
        points.sort_unstable();
        points.dedup();
        Ok(Self { points, shape })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.points.binary_search(&p).is_ok()
    }

    /// Marks the contour pixels on a fresh mask of the source shape.
    pub fn to_mask(&self) -> BinaryMask {
        let mut m = BinaryMask::zeros(self.shape.0, self.shape.1);
        for p in &self.points {
            m.set(p.row, p.col, true);
        }
        m
    }
}

/// Inner boundary under 4-connectivity: foreground pixels with at least one
/// background 4-neighbour, where pixels beyond the image border count as
/// background.
pub fn extract_contour(mask: &BinaryMask) -> ContourPointSet {
    let (h, w) = mask.shape();
    let mut points = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let boundary = r == 0
                || c == 0
                || r + 1 == h
                || c + 1 == w
                || !mask.get(r - 1, c)
                || !mask.get(r + 1, c)
                || !mask.get(r, c - 1)
                || !mask.get(r, c + 1);
            if boundary {
                points.push(Point::new(r, c));
            }
        }
    }
    ContourPointSet {
        points,
        shape: (h, w),
    }
}

/// Reconstructs a mask from a boundary by flooding the outside from the image
/// border. Exact for masks without holes.
pub fn fill_contour(contour: &ContourPointSet) -> BinaryMask {
    let (h, w) = contour.shape();
    let wall = contour.to_mask();
    let mut outside = vec![false; h * w];
    let mut queue = VecDeque::new();
    for r in 0..h {
        for c in 0..w {
            if (r == 0 || c == 0 || r + 1 == h || c + 1 == w) && !wall.get(r, c) {
                outside[r * w + c] = true;
                queue.push_back((r, c));
            }
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        let mut visit = |rr: usize, cc: usize| {
            let i = rr * w + cc;
            if !outside[i] && !wall.get(rr, cc) {
                outside[i] = true;
                queue.push_back((rr, cc));
            }
        };
        if r > 0 {
            visit(r - 1, c);
        }
        if r + 1 < h {
            visit(r + 1, c);
        }
        if c > 0 {
            visit(r, c - 1);
        }
        if c + 1 < w {
            visit(r, c + 1);
        }
    }
    BinaryMask::from_fn(h, w, |r, c| !outside[r * w + c])
}

/// Orders the boundary pixels into chains of 8-connected neighbours suitable
/// for drawing as polylines. Every contour point appears in exactly one chain.
pub fn ordered_polygons(contour: &ContourPointSet) -> Vec<Vec<Point>> {
    let (h, w) = contour.shape();
    let mut remaining = contour.to_mask();
    let mut chains = Vec::new();
    // Neighbour order: 4-neighbours first, then diagonals, clockwise.
    const STEPS: [(i64, i64); 8] = [
        (0, 1),
        (1, 0),
        (0, -1),
        (-1, 0),
        (1, 1),
        (1, -1),
        (-1, -1),
        (-1, 1),
    ];
    for &start in contour.points() {
        if !remaining.get(start.row, start.col) {
            continue;
        }
        remaining.set(start.row, start.col, false);
        let mut chain = vec![start];
        let mut cur = start;
        loop {
            let next = STEPS.iter().find_map(|&(dr, dc)| {
                let r = cur.row as i64 + dr;
                let c = cur.col as i64 + dc;
                (r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w && remaining.get(r as usize, c as usize))
                    .then(|| Point::new(r as usize, c as usize))
            });
            match next {
                Some(p) => {
                    remaining.set(p.row, p.col, false);
                    chain.push(p);
                    cur = p;
                }
                None => break,
            }
        }
        chains.push(chain);
    }
    chains
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_mask_has_empty_contour() {
        assert!(extract_contour(&BinaryMask::zeros(8, 8)).is_empty());
    }

    #[test]
    fn isolated_pixel_is_its_own_boundary() {
        let mut m = BinaryMask::zeros(8, 8);
        m.set(3, 3, true);
        assert_eq!(extract_contour(&m).points(), &[Point::new(3, 3)]);
    }

    #[test]
    fn square_perimeter_excludes_interior() {
        let m = BinaryMask::rect(8, 8, 2, 6, 2, 6);
        let contour = extract_contour(&m);
        // Enumerate by hand: every pixel of the 4x4 block except the 2x2 core.
        let mut want = Vec::new();
        for r in 2..6 {
            for c in 2..6 {
                if !((3..5).contains(&r) && (3..5).contains(&c)) {
                    want.push(Point::new(r, c));
                }
            }
        }
        assert_eq!(contour.len(), 12);
        assert_eq!(contour.points(), want.as_slice());
    }

    #[test]
    fn border_pixels_are_boundary() {
        let full = BinaryMask::from_fn(4, 4, |_, _| true);
        assert_eq!(extract_contour(&full).len(), 12);
    }

    #[test]
    fn fill_reproduces_square() {
        let m = BinaryMask::rect(10, 10, 2, 7, 1, 9);
        assert_eq!(fill_contour(&extract_contour(&m)), m);
    }

    #[test]
    fn polygons_cover_every_point_once() {
        let m = BinaryMask::from_fn(20, 20, |r, c| {
            let (dr, dc) = (r as f64 - 9.5, c as f64 - 9.5);
            dr * dr + dc * dc < 40.0 || (r < 3 && c < 3)
        });
        let contour = extract_contour(&m);
        let chains = ordered_polygons(&contour);
        let mut all: Vec<Point> = chains.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, contour.points());
        assert!(chains.len() >= 2);
    }

    #[test]
    fn from_points_rejects_outside() {
        assert!(ContourPointSet::from_points([Point::new(4, 0)], (4, 4)).is_err());
    }
}
