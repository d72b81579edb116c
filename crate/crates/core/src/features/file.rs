//! Binary feature files.
//!
//! ```text
//! "IMPF"  u16 version  u32 n_rows  u32 n_cols  f32 × n_rows × n_cols
//! ```
//!
//! All integers and floats are little-endian; values are row-major. Row `i`
//! belongs to the `i`-th tissue patch of the slide in row-major grid order.

use std::fs;
use std::path::Path;

use super::FeatureMatrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"IMPF";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

pub fn encode(matrix: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + matrix.values().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(matrix.n_patches() as u32).to_le_bytes());
    out.extend_from_slice(&(matrix.dimension() as u32).to_le_bytes());
    for v in matrix.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a feature file. The result is not bound to a grid.
pub fn decode(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n_rows = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as u64;
    let n_cols = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as u64;
    let expected = HEADER_LEN as u64 + n_rows * n_cols * 4;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::TruncatedFile { expected, actual });
    }
    if actual > expected {
        return Err(Error::DimensionMismatch {
            expected: (n_rows * n_cols) as usize,
            actual: ((actual - HEADER_LEN as u64) / 4) as usize,
        });
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    FeatureMatrix::new(n_cols as usize, values)
}

pub fn write_features(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    fs::write(path, encode(matrix))?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn header_layout() {
        let m = FeatureMatrix::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = encode(&m);
        assert_eq!(&bytes[..4], b"IMPF");
        assert_eq!(&bytes[4..6], &1u16.to_le_bytes());
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &2u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 14 + 16);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&FeatureMatrix::new(1, vec![1.0]).unwrap());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::BadMagic)));
    }

    #[test]
    fn truncated() {
        let m = FeatureMatrix::new(3, vec![0.5; 30]).unwrap();
        let bytes = encode(&m);
        // header says 10 rows, only 9 present
        let short = &bytes[..bytes.len() - 12];
        assert!(matches!(decode(short), Err(Error::TruncatedFile { .. })));
        assert!(matches!(decode(&bytes[..8]), Err(Error::TruncatedFile { .. })));
    }

    #[test]
    fn trailing_bytes() {
        let mut bytes = encode(&FeatureMatrix::new(3, vec![0.5; 30]).unwrap());
        bytes.extend_from_slice(&[0; 4]);
        assert!(matches!(decode(&bytes), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn file_round_trip() {
        let m = FeatureMatrix::new(4, (0..40).map(|i| i as f32 * 0.37).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.impf");
        write_features(&m, &path).unwrap();
        assert_eq!(read_features(&path).unwrap(), m);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            dim in 1usize..20,
            raw in proptest::collection::vec(any::<u32>(), 0..400),
        ) {
            let n = raw.len() / dim * dim;
            let values: Vec<f32> = raw[..n]
                .iter()
                .map(|&b| f32::from_bits(b))
                .map(|v| if v.is_finite() { v } else { 0.0 })
                .collect();
            let m = FeatureMatrix::new(dim, values).unwrap();
            let back = decode(&encode(&m)).unwrap();
            prop_assert_eq!(back.dimension(), m.dimension());
            let a: Vec<u32> = m.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
