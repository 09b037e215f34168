use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Decoded image file: `count` images of `rows × cols` pixels scaled to
/// `[0, 1]`, stored image after image in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    let b = bytes.get(offset..end).ok_or_else(|| Error::Format {
        offset: bytes.len(),
        message: format!("truncated header: missing {what}"),
    })?;
    Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0, "magic number")?;
    if magic != expected {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}"),
        });
    }
    Ok(())
}

fn body(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    let have = bytes.len().saturating_sub(start);
    if have < len {
        return Err(Error::Format {
            offset: bytes.len(),
            message: format!("truncated data: expected {len} bytes after the header, found {have}"),
        });
    }
    if have > len {
        return Err(Error::Format {
            offset: start + len,
            message: format!("{} trailing bytes", have - len),
        });
    }
    Ok(&bytes[start..])
}

/// Big-endian IDX image file (magic `0x00000803`).
pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = read_u32(bytes, 4, "image count")? as usize;
    let rows = read_u32(bytes, 8, "row count")? as usize;
    let cols = read_u32(bytes, 12, "column count")? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .ok_or(Error::Format {
            offset: 4,
            message: format!("{count}x{rows}x{cols} overflows"),
        })?;
    let data = body(bytes, 16, len)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: data.iter().map(|&b| f64::from(b) / 255.0).collect(),
    })
}

/// Big-endian IDX label file (magic `0x00000801`).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = read_u32(bytes, 4, "label count")? as usize;
    Ok(body(bytes, 8, count)?.to_vec())
}

/// Inverse of [`parse_idx_images`] for raw bytes.
pub fn encode_idx_images(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != count * rows * cols {
        return Err(Error::dim(
            "encode_idx_images",
            format!("{}", count * rows * cols),
            format!("{}", pixels.len()),
        ));
    }
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGE_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_fixture_round_trip() {
        let bytes = encode_idx_images(3, 28, 28, &vec![0u8; 3 * 784]).unwrap();
        let imgs = parse_idx_images(&bytes).unwrap();
        assert_eq!((imgs.count, imgs.rows, imgs.cols), (3, 28, 28));
        assert!(imgs.pixels.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn scaling_to_unit_interval() {
        let bytes = encode_idx_images(1, 1, 3, &[0, 51, 255]).unwrap();
        assert_eq!(parse_idx_images(&bytes).unwrap().pixels, vec![0.0, 0.2, 1.0]);
    }

    #[test]
    fn labels_round_trip() {
        let bytes = encode_idx_labels(&[7, 2, 1]);
        assert_eq!(&bytes[..4], &[0, 0, 8, 1]);
        assert_eq!(parse_idx_labels(&bytes).unwrap(), vec![7, 2, 1]);
    }

    #[test]
    fn malformed_files() {
        let mut bytes = encode_idx_images(2, 2, 2, &[1; 8]).unwrap();
        bytes.pop();
        match parse_idx_images(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 23),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_idx_images(&bytes[..10]), Err(Error::Format { offset: 10, .. })));
        let labels = encode_idx_labels(&[1, 2]);
        assert!(matches!(parse_idx_images(&labels), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(parse_idx_labels(&[]), Err(Error::Format { offset: 0, .. })));
    }
}
