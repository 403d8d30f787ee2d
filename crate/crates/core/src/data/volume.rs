//! NIfTI ingestion of CT volumes and per-organ masks.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nifti::{IntoNdArray, NiftiObject, ReaderOptions};

use crate::error::{Error, Result};

/// A CT volume in Hounsfield units with binary organ masks of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeRecord {
    pub id: String,
    pub slices: usize,
    pub height: usize,
    pub width: usize,
    /// `slices × height × width`, row-major within a slice.
    pub voxels: Vec<i32>,
    /// `(row_mm, col_mm, slice_mm)`.
    pub spacing: (f64, f64, f64),
    pub organ_masks: BTreeMap<String, Vec<u8>>,
}

impl VolumeRecord {
    pub fn slice_len(&self) -> usize {
        self.height * self.width
    }

    pub fn slice(&self, z: usize) -> &[i32] {
        let n = self.slice_len();
        &self.voxels[z * n..(z + 1) * n]
    }
}

fn is_nifti(path: &Path) -> bool {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.ends_with(".nii") || name.ends_with(".nii.gz")
}

fn stem(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.trim_end_matches(".gz").trim_end_matches(".nii").to_string()
}

struct RawVolume {
    dims: (usize, usize, usize),
    data: Vec<f32>,
    spacing: (f64, f64, f64),
}

/// Reads a NIfTI file as `slices × rows × cols`. NIfTI stores `(x, y, z)`
/// with `x` fastest; `x` maps to columns and `y` to rows.
fn read_nifti(path: &Path) -> Result<RawVolume> {
    if !is_nifti(path) {
        return Err(Error::UnsupportedFormat(format!(
            "{}: expected a .nii or .nii.gz file",
            path.display()
        )));
    }
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    let corrupt = |e: nifti::NiftiError| Error::CorruptHeader(format!("{}: {e}", path.display()));
    let obj = ReaderOptions::new().read_file(path).map_err(corrupt)?;
    let header = obj.header().clone();
    let array = obj.into_volume().into_ndarray::<f32>().map_err(corrupt)?;
    let shape = array.shape().to_vec();
    let (nx, ny, nz) = match shape.as_slice() {
        [x, y, z] => (*x, *y, *z),
        [x, y, z, 1] => (*x, *y, *z),
        [x, y] => (*x, *y, 1),
        other => {
            return Err(Error::CorruptHeader(format!(
                "{}: expected a 3D volume, got shape {other:?}",
                path.display()
            )))
        }
    };
    let px = f64::from(header.pixdim[1]);
    let py = f64::from(header.pixdim[2]);
    let pz = if nz > 1 { f64::from(header.pixdim[3]) } else { f64::from(header.pixdim[3]).max(1.0) };
    if !(px > 0.0 && py > 0.0 && pz > 0.0) {
        return Err(Error::CorruptHeader(format!(
            "{}: non-positive voxel spacing {:?}",
            path.display(),
            &header.pixdim[1..4]
        )));
    }
    let array = array.into_shape(vec![nx, ny, nz]).map_err(|e| Error::CorruptHeader(e.to_string()))?;
    let mut data = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                data.push(array[[x, y, z]]);
            }
        }
    }
    Ok(RawVolume {
        dims: (nz, ny, nx),
        data,
        spacing: (py, px, pz),
    })
}

/// Ingests a CT image and one mask file per organ.
pub fn ingest_files(id: &str, image: &Path, masks: &[(String, PathBuf)]) -> Result<VolumeRecord> {
    let raw = read_nifti(image)?;
    let (slices, height, width) = raw.dims;
    let voxels = raw.data.iter().map(|&v| v.round() as i32).collect();
    let mut organ_masks = BTreeMap::new();
    for (organ, path) in masks {
        let m = read_nifti(path)?;
        if m.dims != raw.dims {
            return Err(Error::ShapeMismatch {
                expected: (height, width),
                got: (m.dims.1, m.dims.2),
            });
        }
        organ_masks.insert(organ.clone(), m.data.iter().map(|&v| u8::from(v > 0.5)).collect());
    }
    Ok(VolumeRecord {
        id: id.to_string(),
        slices,
        height,
        width,
        voxels,
        spacing: raw.spacing,
        organ_masks,
    })
}

/// Ingests a volume directory laid out as
///
/// ```text
/// <dir>/image.nii[.gz]
/// <dir>/masks/<organ>.nii[.gz]
/// ```
///
/// The volume id is the directory name.
pub fn ingest_volume(dir: &Path) -> Result<VolumeRecord> {
    if !dir.is_dir() {
        return Err(Error::UnsupportedFormat(format!(
            "{}: expected a volume directory with image.nii[.gz] and masks/",
            dir.display()
        )));
    }
    let image = ["image.nii.gz", "image.nii"]
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.exists())
        .ok_or_else(|| Error::UnsupportedFormat(format!("{}: no image.nii[.gz]", dir.display())))?;
    let mut masks = Vec::new();
    let mask_dir = dir.join("masks");
    if mask_dir.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(&mask_dir)
            .map_err(|e| Error::io(&mask_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| is_nifti(p))
            .collect();
        paths.sort();
        for p in paths {
            masks.push((stem(&p), p));
        }
    }
    let id = dir.file_name().and_then(|n| n.to_str()).unwrap_or("volume").to_string();
    ingest_files(&id, &image, &masks)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use ndarray::Array3;
    use nifti::writer::WriterOptions;
    use nifti::NiftiHeader;

    /// Writes `data[z][r][c]` as a NIfTI volume with the given spacing.
    pub(crate) fn write_volume(path: &Path, dims: (usize, usize, usize), spacing: (f32, f32, f32), f: impl Fn(usize, usize, usize) -> f32) {
        let (nz, ny, nx) = dims;
        let arr = Array3::from_shape_fn((nx, ny, nz), |(x, y, z)| f(z, y, x));
        let mut header = NiftiHeader::default();
        header.pixdim = [1.0, spacing.1, spacing.0, spacing.2, 1.0, 1.0, 1.0, 1.0];
        WriterOptions::new(path).reference_header(&header).write_nifti(&arr).unwrap();
    }

    fn volume_dir(root: &Path, mask_dims: (usize, usize, usize)) -> PathBuf {
        let dir = root.join("case01");
        fs::create_dir_all(dir.join("masks")).unwrap();
        write_volume(&dir.join("image.nii.gz"), (3, 12, 10), (0.98, 0.98, 3.0), |z, r, c| {
            (z as f32) * 100.0 + (r as f32) - (c as f32) - 500.0
        });
        write_volume(&dir.join("masks/brainstem.nii.gz"), (3, 12, 10), (0.98, 0.98, 3.0), |z, r, c| {
            f32::from(z == 1 && (4..8).contains(&r) && (3..6).contains(&c))
        });
        write_volume(&dir.join("masks/cord.nii.gz"), mask_dims, (0.98, 0.98, 3.0), |_, r, _| f32::from(r < 2));
        dir
    }

    #[test]
    fn ingests_image_and_masks() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = volume_dir(tmp.path(), (3, 12, 10));
        let v = ingest_volume(&dir).unwrap();
        assert_eq!(v.id, "case01");
        assert_eq!((v.slices, v.height, v.width), (3, 12, 10));
        assert_eq!(v.organ_masks.len(), 2);
        assert!((v.spacing.0 - 0.98).abs() < 1e-6 && (v.spacing.1 - 0.98).abs() < 1e-6);
        assert_eq!(v.spacing.2, 3.0);
        // z = 2, r = 5, c = 7 → 200 + 5 − 7 − 500.
        assert_eq!(v.slice(2)[5 * 10 + 7], -302);
        let bs = &v.organ_masks["brainstem"];
        assert_eq!(bs.iter().filter(|&&b| b == 1).count(), 12);
        assert_eq!(bs[120 + 4 * 10 + 3], 1);
        // Re-ingesting is idempotent.
        assert_eq!(ingest_volume(&dir).unwrap(), v);
    }

    #[test]
    fn mask_shape_mismatch_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = volume_dir(tmp.path(), (3, 12, 11));
        assert!(matches!(ingest_volume(&dir), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn unsupported_and_corrupt_inputs() {
        let tmp = tempfile::tempdir().unwrap();
        let txt = tmp.path().join("scan.mha");
        fs::write(&txt, b"not nifti").unwrap();
        assert!(matches!(ingest_files("x", &txt, &[]), Err(Error::UnsupportedFormat(_))));
        let bad = tmp.path().join("bad.nii");
        fs::write(&bad, vec![7u8; 400]).unwrap();
        assert!(matches!(ingest_files("x", &bad, &[]), Err(Error::CorruptHeader(_))));
        assert!(matches!(ingest_volume(tmp.path()), Err(Error::UnsupportedFormat(_))));
    }
}
