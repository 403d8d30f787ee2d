//! Dataset ingestion, slice cropping, storage and synthetic generation.

mod crop;
mod manifest;
mod pngio;
mod synth;
mod volume;

pub use crop::{crop_axial, crop_offset, normalize_hu, BODY_THRESHOLD_HU, CROP_SIZE, HU_MAX, HU_MIN};
pub use manifest::{write_dataset, DatasetManifest, ManifestEntry, Provenance, SliceRecord, Split, MANIFEST_VERSION};
pub use pngio::{dequantize, quantize, read_image16, read_mask, write_image16, write_mask};
pub use synth::{synth_dataset, SynthConfig, ORGANS};
pub use volume::{ingest_files, ingest_volume, VolumeRecord};
