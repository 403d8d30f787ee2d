//! 16-bit grayscale slices and 8-bit (0/255) mask images.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BinaryMask;

/// Quantises a `[0, 1]` intensity to the 16-bit storage grid.
pub fn quantize(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

pub fn dequantize(q: u16) -> f32 {
    f32::from(q) / 65535.0
}

fn encode_err(path: &Path, e: png::EncodingError) -> Error {
    match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other}", path.display())),
    }
}

fn write_gray(path: &Path, width: usize, height: usize, depth: png::BitDepth, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(depth);
    let mut writer = enc.write_header().map_err(|e| encode_err(path, e))?;
    writer.write_image_data(bytes).map_err(|e| encode_err(path, e))?;
    writer.finish().map_err(|e| encode_err(path, e))
}

fn read_gray(path: &Path) -> Result<(usize, usize, png::BitDepth, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::UnsupportedFormat(format!("{}: expected grayscale PNG", path.display())));
    }
    buf.truncate(info.buffer_size());
    Ok((info.height as usize, info.width as usize, info.bit_depth, buf))
}

/// Writes a `[0, 1]` image as a 16-bit grayscale PNG.
pub fn write_image16(path: &Path, height: usize, width: usize, values: &[f32]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|&v| quantize(v).to_be_bytes()).collect();
    write_gray(path, width, height, png::BitDepth::Sixteen, &bytes)
}

/// Reads a 16-bit grayscale PNG into `[0, 1]` values.
pub fn read_image16(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let (h, w, depth, bytes) = read_gray(path)?;
    if depth != png::BitDepth::Sixteen {
        return Err(Error::UnsupportedFormat(format!("{}: expected 16-bit PNG", path.display())));
    }
    let values = bytes
        .chunks_exact(2)
        .map(|b| dequantize(u16::from_be_bytes([b[0], b[1]])))
        .collect();
    Ok((h, w, values))
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let bytes: Vec<u8> = mask.cells().iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    write_gray(path, mask.width(), mask.height(), png::BitDepth::Eight, &bytes)
}

/// Reads an 8-bit mask PNG; any non-zero value is foreground.
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let (h, w, depth, bytes) = read_gray(path)?;
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!("{}: expected 8-bit mask PNG", path.display())));
    }
    BinaryMask::from_cells(h, w, bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_and_mask_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f32> = (0..12).map(|i| dequantize(i * 5000)).collect();
        let p = dir.path().join("img.png");
        write_image16(&p, 3, 4, &values).unwrap();
        assert_eq!(read_image16(&p).unwrap(), (3, 4, values));

        let m = BinaryMask::rect(5, 7, 1, 3, 2, 6);
        let q = dir.path().join("mask.png");
        write_mask(&q, &m).unwrap();
        assert_eq!(read_mask(&q).unwrap(), m);
        assert!(read_image16(&q).is_err());
    }
}
