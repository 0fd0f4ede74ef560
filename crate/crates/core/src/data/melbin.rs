//! MELBIN matrix files: magic `NHM1`, then `u32` version, `u32` rows `T`,
//! `u32` columns `D`, then `T·D` little-endian `f32` values in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const MELBIN_MAGIC: &[u8; 4] = b"NHM1";
pub const MELBIN_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_melbin(m: &Tensor) -> Result<Vec<u8>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::Contract(format!(
            "MELBIN matrices need at least one row and column, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.len());
    out.extend_from_slice(MELBIN_MAGIC);
    out.extend_from_slice(&MELBIN_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_melbin(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "truncated MELBIN header"));
    }
    if &bytes[0..4] != MELBIN_MAGIC {
        return Err(Error::format(0, "bad MELBIN magic"));
    }
    let word = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != MELBIN_VERSION {
        return Err(Error::format(4, format!("unsupported MELBIN version {version}")));
    }
    let rows = word(8) as usize;
    let cols = word(12) as usize;
    if rows == 0 {
        return Err(Error::format(8, "MELBIN matrix has zero rows"));
    }
    if cols == 0 {
        return Err(Error::format(12, "MELBIN matrix has zero columns"));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::format(8, "MELBIN dimensions overflow"))?;
    if bytes.len() < expected {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated MELBIN payload: expected {expected} bytes"),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(expected as u64, "trailing bytes after MELBIN payload"));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(Tensor::new(rows, cols, data))
}

pub fn save_melbin(m: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_melbin(m)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_melbin(path: impl AsRef<Path>) -> Result<Tensor> {
    decode_melbin(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_input() {
        assert!(encode_melbin(&Tensor::zeros(0, 3)).is_err());
        let good = encode_melbin(&Tensor::filled(2, 3, 1.5)).unwrap();
        let trunc = &good[..good.len() - 1];
        match decode_melbin(trunc) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, trunc.len() as u64),
            other => panic!("expected format error, got {other:?}"),
        }
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_melbin(&bad), Err(Error::Format { offset: 0, .. })));
        let mut zero_rows = good[..16].to_vec();
        zero_rows[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            decode_melbin(&zero_rows),
            Err(Error::Format { offset: 8, .. })
        ));
        assert!(decode_melbin(&good[..10]).is_err());
    }

    #[test]
    fn header_layout() {
        let bytes = encode_melbin(&Tensor::new(1, 2, vec![1.0, -2.0])).unwrap();
        assert_eq!(&bytes[..4], b"NHM1");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[20..24], &(-2.0f32).to_le_bytes());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(rows in 1usize..9, cols in 1usize..5, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = crate::Prng::seed_from_u64(seed);
            // values representable in f32 survive exactly
            let data = (0..rows * cols).map(|_| (rng.random::<f32>() * 10.0 - 5.0) as f64).collect();
            let m = Tensor::new(rows, cols, data);
            let back = decode_melbin(&encode_melbin(&m).unwrap()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
