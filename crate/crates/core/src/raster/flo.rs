//! Middlebury-style `.flo` container.
//!
//! Layout, all little-endian: `f32` magic 202021.25, `i32` width, `i32`
//! height, then `width * height` interleaved `(dx, dy)` `f32` pairs in
//! row-major order.

use super::FlowField;
use crate::error::{Error, Result};

/// Sanity value stored in the first four bytes ("PIEH" in ASCII).
pub const FLO_MAGIC: f32 = 202021.25;

const HEADER_LEN: usize = 12;

pub fn read_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().unwrap() };
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(Error::NotAFlowFile(magic));
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width <= 0 || height <= 0 {
        return Err(Error::parse(4, format!("invalid dimensions {width}x{height}")));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = HEADER_LEN + width * height * 8;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let vectors = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes(c[0..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..8].try_into().unwrap()),
            ]
        })
        .collect();
    FlowField::from_vec(width, height, vectors)
}

pub fn write_flo(field: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + field.vectors().len() * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(field.width() as i32).to_le_bytes());
    out.extend_from_slice(&(field.height() as i32).to_le_bytes());
    for [dx, dy] in field.vectors() {
        out.extend_from_slice(&dx.to_le_bytes());
        out.extend_from_slice(&dy.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_vector_bytes() {
        let f = FlowField::from_vec(1, 1, vec![[1.5, -2.0]]).unwrap();
        let bytes = write_flo(&f);
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[0..4], b"PIEH");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 1, 0, 0, 0]);
        // 1.5 = 0x3FC00000, -2.0 = 0xC0000000
        assert_eq!(&bytes[12..20], &[0x00, 0x00, 0xC0, 0x3F, 0x00, 0x00, 0x00, 0xC0]);
    }

    #[test]
    fn zero_magic_rejected() {
        let mut bytes = write_flo(&FlowField::constant(1, 1, 0.0, 0.0).unwrap());
        bytes[0..4].copy_from_slice(&0f32.to_le_bytes());
        let err = read_flo(&bytes).unwrap_err();
        assert!(err.to_string().contains("not a flow file"));
    }

    #[test]
    fn size_mismatch_is_truncation() {
        let bytes = write_flo(&FlowField::constant(2, 2, 1.0, 1.0).unwrap());
        assert!(matches!(
            read_flo(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(read_flo(&bytes[..5]), Err(Error::Truncated { .. })));
    }

    proptest! {
        #[test]
        fn roundtrip(w in 1usize..8, h in 1usize..8, vals in prop::collection::vec(-1e6f32..1e6, 128)) {
            let vectors = (0..w * h).map(|i| [vals[2 * i], vals[2 * i + 1]]).collect();
            let f = FlowField::from_vec(w, h, vectors).unwrap();
            let bytes = write_flo(&f);
            let back = read_flo(&bytes).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(write_flo(&back), bytes);
        }
    }
}
