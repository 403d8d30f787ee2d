use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::pngio::{read_image16, read_mask, write_image16, write_mask};
use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, PixelSpacing};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Parse(format!("unknown split {other:?}"))),
        }
    }
}

/// Where a slice came from: `source = crop_offset + in-crop coordinate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub volume_id: String,
    pub slice_index: usize,
    pub crop_offset: (usize, usize),
}

impl Provenance {
    pub fn to_source(&self, row: usize, col: usize) -> (usize, usize) {
        (self.crop_offset.0 + row, self.crop_offset.1 + col)
    }
}

/// One axial slice paired with the mask of one organ.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRecord {
    pub id: String,
    pub size: usize,
    /// Row-major intensities in `[0, 1]`, shared between the organs of a slice.
    pub image: Arc<Vec<f32>>,
    pub organ_id: String,
    pub gt_mask: BinaryMask,
    pub spacing: PixelSpacing<f64>,
    pub provenance: Provenance,
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub v: u32,
    pub id: String,
    pub split: Split,
    pub organ_id: String,
    /// Paths relative to the manifest's directory.
    pub image: String,
    pub mask: String,
    pub spacing: [f64; 2],
    pub volume_id: String,
    pub slice_index: usize,
    pub crop_offset: [usize; 2],
}

/// Line-delimited JSON list of slice references.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), n + 1)))?;
            if entry.v != MANIFEST_VERSION {
                return Err(Error::Parse(format!(
                    "{}:{}: unsupported manifest version {}",
                    path.display(),
                    n + 1,
                    entry.v
                )));
            }
            entries.push(entry);
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { root, entries })
    }

    pub fn organ_vocabulary(&self) -> BTreeSet<String> {
        self.entries.iter().map(|e| e.organ_id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads every record of `split` (all records when `None`), in manifest order.
    pub fn load(&self, split: Option<Split>) -> Result<Vec<SliceRecord>> {
        let mut cache: Option<(String, Arc<Vec<f32>>)> = None;
        let mut out = Vec::new();
        for e in self.entries.iter().filter(|e| split.map_or(true, |s| e.split == s)) {
            let image = match &cache {
                Some((path, img)) if *path == e.image => img.clone(),
                _ => {
                    let (h, w, values) = read_image16(&self.root.join(&e.image))?;
                    if h != w {
                        return Err(Error::ShapeMismatch {
                            expected: (h, h),
                            got: (h, w),
                        });
                    }
                    let img = Arc::new(values);
                    cache = Some((e.image.clone(), img.clone()));
                    img
                }
            };
            let size = (image.len() as f64).sqrt() as usize;
            let gt_mask = read_mask(&self.root.join(&e.mask))?;
            if gt_mask.shape() != (size, size) {
                return Err(Error::ShapeMismatch {
                    expected: (size, size),
                    got: gt_mask.shape(),
                });
            }
            if gt_mask.is_empty() {
                return Err(Error::EmptyGroundTruth);
            }
            out.push(SliceRecord {
                id: e.id.clone(),
                size,
                image,
                organ_id: e.organ_id.clone(),
                gt_mask,
                spacing: PixelSpacing::new(e.spacing[0], e.spacing[1])?,
                provenance: Provenance {
                    volume_id: e.volume_id.clone(),
                    slice_index: e.slice_index,
                    crop_offset: (e.crop_offset[0], e.crop_offset[1]),
                },
            });
        }
        Ok(out)
    }
}

/// Writes slices and masks under `dir` and returns the manifest path.
///
/// Records of the same volume slice share one image file.
pub fn write_dataset(dir: &Path, records: &[(Split, SliceRecord)]) -> Result<PathBuf> {
    let images = dir.join("images");
    let masks = dir.join("masks");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    fs::create_dir_all(&masks).map_err(|e| Error::io(&masks, e))?;
    let manifest_path = dir.join("manifest.jsonl");
    let file = File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut out = BufWriter::new(file);
    let mut written = BTreeSet::new();
    for (split, rec) in records {
        if rec.gt_mask.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        let slice_key = format!("{}_s{:04}", rec.provenance.volume_id, rec.provenance.slice_index);
        let image_rel = format!("images/{slice_key}.png");
        if written.insert(slice_key) {
            write_image16(&dir.join(&image_rel), rec.size, rec.size, &rec.image)?;
        }
        let mask_rel = format!("masks/{}.png", rec.id);
        write_mask(&dir.join(&mask_rel), &rec.gt_mask)?;
        let entry = ManifestEntry {
            v: MANIFEST_VERSION,
            id: rec.id.clone(),
            split: *split,
            organ_id: rec.organ_id.clone(),
            image: image_rel,
            mask: mask_rel,
            spacing: [rec.spacing.row_mm, rec.spacing.col_mm],
            volume_id: rec.provenance.volume_id.clone(),
            slice_index: rec.provenance.slice_index,
            crop_offset: [rec.provenance.crop_offset.0, rec.provenance.crop_offset.1],
        };
        let line = serde_json::to_string(&entry).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(&manifest_path, e))?;
    }
    out.flush().map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, slice: usize, organ: &str, mask: BinaryMask) -> SliceRecord {
        SliceRecord {
            id: id.into(),
            size: 8,
            image: Arc::new((0..64).map(|i| super::super::pngio::dequantize(i * 1000)).collect()),
            organ_id: organ.into(),
            gt_mask: mask,
            spacing: PixelSpacing::new(0.98, 0.98).unwrap(),
            provenance: Provenance {
                volume_id: "vol".into(),
                slice_index: slice,
                crop_offset: (3, 4),
            },
        }
    }

    #[test]
    fn write_then_read_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            (Split::Train, record("a", 0, "brainstem", BinaryMask::rect(8, 8, 1, 4, 1, 4))),
            (Split::Train, record("b", 0, "cord", BinaryMask::rect(8, 8, 5, 7, 5, 7))),
            (Split::Test, record("c", 1, "cord", BinaryMask::rect(8, 8, 2, 6, 2, 3))),
        ];
        let path = write_dataset(dir.path(), &recs).unwrap();
        let manifest = DatasetManifest::read(&path).unwrap();
        assert_eq!(manifest.len(), 3);
        assert_eq!(manifest.organ_vocabulary().len(), 2);
        // Slice 0 is shared by two organs: two image files in total.
        assert_eq!(fs::read_dir(dir.path().join("images")).unwrap().count(), 2);
        let all = manifest.load(None).unwrap();
        let want: Vec<SliceRecord> = recs.iter().map(|(_, r)| r.clone()).collect();
        assert_eq!(all, want);
        let test = manifest.load(Some(Split::Test)).unwrap();
        assert_eq!(test.len(), 1);
        assert_eq!(test[0].provenance.to_source(2, 2), (5, 6));
    }

    #[test]
    fn rejects_empty_masks_and_bad_versions() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![(Split::Train, record("a", 0, "x", BinaryMask::zeros(8, 8)))];
        assert!(matches!(write_dataset(dir.path(), &recs), Err(Error::EmptyGroundTruth)));

        let p = dir.path().join("m.jsonl");
        fs::write(
            &p,
            r#"{"v":2,"id":"a","split":"train","organ_id":"x","image":"i","mask":"m","spacing":[1,1],"volume_id":"v","slice_index":0,"crop_offset":[0,0]}"#,
        )
        .unwrap();
        assert!(DatasetManifest::read(&p).is_err());
    }
}
