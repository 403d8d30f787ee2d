//! Exact Euclidean distance transform via the separable lower-envelope
//! algorithm of Felzenszwalb and Huttenlocher, with per-axis scaling.

use crate::scalar::Scalar;

/// Squared distance from every pixel to the nearest site.
///
/// `sites` is a row-major `height × width` grid; `row_scale` / `col_scale`
/// are the physical lengths of one pixel step along each axis. With no sites
/// every entry is `+inf`.
pub fn squared_edt<T: Scalar>(
    sites: &[bool],
    height: usize,
    width: usize,
    row_scale: T,
    col_scale: T,
) -> Vec<T> {
    assert_eq!(sites.len(), height * width);
    let inf = T::infinity();
    let mut grid: Vec<T> = sites
        .iter()
        .map(|&s| if s { T::zero() } else { inf })
        .collect();

    let n = height.max(width);
    let mut f = vec![inf; n];
    let mut d = vec![inf; n];
    let mut v = vec![0usize; n];
    let mut z = vec![T::zero(); n + 1];

    // Columns first (distance along rows), then rows.
    let wr = row_scale * row_scale;
    for c in 0..width {
        for r in 0..height {
            f[r] = grid[r * width + c];
        }
        lower_envelope(&f[..height], &mut d[..height], &mut v, &mut z, wr);
        for r in 0..height {
            grid[r * width + c] = d[r];
        }
    }
    let wc = col_scale * col_scale;
    for r in 0..height {
        f[..width].copy_from_slice(&grid[r * width..(r + 1) * width]);
        lower_envelope(&f[..width], &mut d[..width], &mut v, &mut z, wc);
        grid[r * width..(r + 1) * width].copy_from_slice(&d[..width]);
    }
    grid
}

/// One-dimensional pass: `d[q] = min_p weight·(q − p)² + f[p]` over finite `f[p]`.
fn lower_envelope<T: Scalar>(f: &[T], d: &mut [T], v: &mut [usize], z: &mut [T], weight: T) {
    let n = f.len();
    let inf = T::infinity();
    let two = T::one() + T::one();
    let mut k: isize = -1;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let qf = T::of_usize(q);
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = -inf;
                z[1] = inf;
                break;
            }
            let p = v[k as usize];
            let pf = T::of_usize(p);
            let s = ((f[q] + weight * qf * qf) - (f[p] + weight * pf * pf)) / (two * weight * (qf - pf));
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = inf;
            break;
        }
    }
    if k < 0 {
        d.iter_mut().for_each(|x| *x = inf);
        return;
    }
    let mut j = 0usize;
    for (q, out) in d.iter_mut().enumerate() {
        let qf = T::of_usize(q);
        while z[j + 1] < qf {
            j += 1;
        }
        let p = v[j];
        let diff = T::of_usize(q.abs_diff(p));
        *out = weight * diff * diff + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(sites: &[bool], h: usize, w: usize, sr: f64, sc: f64) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; h * w];
        for r in 0..h {
            for c in 0..w {
                for i in 0..h * w {
                    if sites[i] {
                        let dr = (r as f64 - (i / w) as f64) * sr;
                        let dc = (c as f64 - (i % w) as f64) * sc;
                        out[r * w + c] = out[r * w + c].min(dr * dr + dc * dc);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn no_sites_gives_infinity() {
        let d = squared_edt::<f64>(&[false; 6], 2, 3, 1.0, 1.0);
        assert!(d.iter().all(|x| x.is_infinite()));
    }

    #[test]
    fn single_site_distances() {
        let mut sites = vec![false; 25];
        sites[12] = true;
        let d = squared_edt::<f64>(&sites, 5, 5, 1.0, 1.0);
        assert_eq!(d[0], 8.0);
        assert_eq!(d[2], 4.0);
        assert_eq!(d[13], 1.0);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            h in 1usize..14,
            w in 1usize..14,
            bits in proptest::collection::vec(proptest::bool::weighted(0.15), 196),
            sr in 0.3f64..2.5,
            sc in 0.3f64..2.5,
        ) {
            let sites: Vec<bool> = bits[..h * w].to_vec();
            let got = squared_edt::<f64>(&sites, h, w, sr, sc);
            let want = brute(&sites, h, w, sr, sc);
            for (g, e) in got.iter().zip(&want) {
                if e.is_infinite() {
                    prop_assert!(g.is_infinite());
                } else {
                    prop_assert!((g - e).abs() <= 1e-9 * e.max(1.0), "{} vs {}", g, e);
                }
            }
        }
    }
}
