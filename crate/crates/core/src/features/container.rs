//! Flat binary container for feature tensors.
//!
//! Layout (little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `MFEA`                  |
//! | 4      | 1    | format version (1)            |
//! | 5      | 1    | kind tag (ff=1 .. laplacian=5)|
//! | 6      | 2    | reserved, zero                |
//! | 8      | 4    | channel count (u32)           |
//! | 12     | 8    | edge count (u64)              |
//! | 20     | 8·n  | row-major f64 values          |

use super::{FeatureError, FeatureKind, FeatureTensor};

const MAGIC: &[u8; 4] = b"MFEA";
const VERSION: u8 = 1;
const HEADER: usize = 20;

pub fn encode_features(features: &FeatureTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + features.as_slice().len() * 8);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(features.kind().tag());
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(features.channels() as u32).to_le_bytes());
    out.extend_from_slice(&(features.rows() as u64).to_le_bytes());
    for v in features.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureTensor, FeatureError> {
    let bad = |m: &str| FeatureError::Container(m.to_string());
    if bytes.len() < HEADER {
        return Err(bad("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    if bytes[4] != VERSION {
        return Err(bad("unsupported version"));
    }
    let kind = FeatureKind::from_tag(bytes[5]).ok_or_else(|| bad("unknown kind tag"))?;
    let channels = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if channels != kind.channels() {
        return Err(FeatureError::ChannelMismatch {
            expected: kind.channels(),
            got: channels,
        });
    }
    let rows = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let body = &bytes[HEADER..];
    let expected = usize::try_from(rows)
        .ok()
        .and_then(|r| r.checked_mul(channels))
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| bad("edge count overflows"))?;
    if body.len() != expected {
        return Err(bad("body length does not match header"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureTensor::new(kind, rows as usize, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trips_bitwise(rows in 0usize..20, seed in any::<u64>(), kind_idx in 0usize..5) {
            let kind = FeatureKind::ALL[kind_idx];
            let n = rows * kind.channels();
            let data: Vec<f64> = (0..n).map(|i| ((seed.wrapping_add(i as u64) % 10007) as f64).sin() * 1e3).collect();
            let t = FeatureTensor::new(kind, rows, data).unwrap();
            let bytes = encode_features(&t);
            prop_assert_eq!(bytes.len(), 20 + 8 * n);
            prop_assert_eq!(decode_features(&bytes).unwrap(), t);
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_features(&bytes);
        }
    }

    #[test]
    fn rejects_corruption() {
        let t = FeatureTensor::new(FeatureKind::Ff, 1, vec![1.0, 2.0]).unwrap();
        let mut bytes = encode_features(&t);
        assert!(decode_features(&bytes[..bytes.len() - 1]).is_err());
        bytes[5] = 9;
        assert!(decode_features(&bytes).is_err());
        let mut bytes = encode_features(&t);
        bytes[8] = 3;
        assert!(matches!(decode_features(&bytes), Err(FeatureError::ChannelMismatch { .. })));
        let mut bytes = encode_features(&t);
        bytes[20..28].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_features(&bytes).is_err());
    }
}
