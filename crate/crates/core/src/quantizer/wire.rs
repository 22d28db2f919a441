//! Bit-exact wire encodings for quantized messages.
//!
//! Both modes share a 15-byte header: r as a little-endian f64, n as u16,
//! d as u32, and a one-byte mode tag. The dense body packs each level as a
//! ⌈log₂(2n+1)⌉-bit two's-complement field; the sparse body holds a u32
//! non-zero count followed by (⌈log₂ d⌉-bit index, sign bit, ⌈log₂ n⌉-bit
//! magnitude-minus-one) records. Bit fields are packed MSB-first and the
//! body is zero-padded to a byte boundary.

use thiserror::Error;

use super::QuantizedMessage;

/// Bits per parameter of an unquantized (pass-through) exchange: the raw f64
/// width, the stated baseline convention for ratio reporting.
pub const RAW_BITS_PER_PARAM: u64 = 64;

pub const HEADER_BITS: u64 = 120;
const HEADER_BYTES: usize = 15;

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("dimension {0} exceeds the u32 header field")]
    Overflow(usize),
    #[error("cannot encode an invalid message: {0}")]
    InvalidMessage(String),
    #[error("malformed message: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireMode {
    Dense,
    Sparse,
}

impl WireMode {
    fn tag(self) -> u8 {
        match self {
            WireMode::Dense => 0,
            WireMode::Sparse => 1,
        }
    }
}

/// Smallest w with 2^w >= x (0 for x <= 1).
fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

fn dense_level_bits(n: u16) -> u32 {
    ceil_log2(2 * n as u64 + 1)
}

fn sparse_field_bits(d: usize, n: u16) -> u32 {
    ceil_log2(d as u64) + 1 + ceil_log2(n as u64)
}

struct BitWriter {
    bytes: Vec<u8>,
    used_bits: u32,
}

impl BitWriter {
    fn new(bytes: Vec<u8>) -> Self {
        Self {
            bytes,
            used_bits: 0,
        }
    }

    fn write(&mut self, value: u64, bits: u32) {
        debug_assert!(bits <= 64);
        for k in (0..bits).rev() {
            if self.used_bits == 0 {
                self.bytes.push(0);
            }
            let bit = ((value >> k) & 1) as u8;
            let slot = 7 - self.used_bits;
            *self.bytes.last_mut().unwrap() |= bit << slot;
            self.used_bits = (self.used_bits + 1) % 8;
        }
    }

    fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    bit_pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, bit_pos: 0 }
    }

    fn read(&mut self, bits: u32) -> Result<u64, WireError> {
        if self.bit_pos + bits as usize > self.bytes.len() * 8 {
            return Err(WireError::Malformed("truncated body".into()));
        }
        let mut value = 0u64;
        for _ in 0..bits {
            let byte = self.bytes[self.bit_pos / 8];
            let bit = (byte >> (7 - self.bit_pos % 8)) & 1;
            value = (value << 1) | bit as u64;
            self.bit_pos += 1;
        }
        Ok(value)
    }

    fn padding_is_zero(&self) -> bool {
        let mut pos = self.bit_pos;
        while pos < self.bytes.len() * 8 {
            if (self.bytes[pos / 8] >> (7 - pos % 8)) & 1 != 0 {
                return false;
            }
            pos += 1;
        }
        true
    }
}

fn check_message(q: &QuantizedMessage) -> Result<(), WireError> {
    if q.dim() > u32::MAX as usize {
        return Err(WireError::Overflow(q.dim()));
    }
    if !q.is_valid() {
        return Err(WireError::InvalidMessage(format!(
            "r={}, n={}, {} levels",
            q.r,
            q.n,
            q.dim()
        )));
    }
    Ok(())
}

/// Exact bit count of the encoding before the final byte padding.
pub fn message_bits(q: &QuantizedMessage, mode: WireMode) -> u64 {
    let d = q.dim() as u64;
    HEADER_BITS
        + match mode {
            WireMode::Dense => d * dense_level_bits(q.n) as u64,
            WireMode::Sparse => {
                let nnz = q.levels.iter().filter(|&&l| l != 0).count() as u64;
                32 + nnz * sparse_field_bits(q.dim(), q.n) as u64
            }
        }
}

pub fn encode(q: &QuantizedMessage, mode: WireMode) -> Result<Vec<u8>, WireError> {
    check_message(q)?;
    let mut header = Vec::with_capacity(HEADER_BYTES + q.dim() / 2);
    header.extend_from_slice(&q.r.to_le_bytes());
    header.extend_from_slice(&q.n.to_le_bytes());
    header.extend_from_slice(&(q.dim() as u32).to_le_bytes());
    header.push(mode.tag());

    match mode {
        WireMode::Dense => {
            let bits = dense_level_bits(q.n);
            let mask = (1u64 << bits) - 1;
            let mut writer = BitWriter::new(header);
            for &level in &q.levels {
                writer.write(level as i64 as u64 & mask, bits);
            }
            Ok(writer.into_bytes())
        }
        WireMode::Sparse => {
            let nonzero: Vec<(usize, i32)> = q
                .levels
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, l)| l != 0)
                .collect();
            header.extend_from_slice(&(nonzero.len() as u32).to_le_bytes());
            let index_bits = ceil_log2(q.dim() as u64);
            let mag_bits = ceil_log2(q.n as u64);
            let mut writer = BitWriter::new(header);
            for (index, level) in nonzero {
                writer.write(index as u64, index_bits);
                writer.write(u64::from(level < 0), 1);
                writer.write((level.unsigned_abs() - 1) as u64, mag_bits);
            }
            Ok(writer.into_bytes())
        }
    }
}

pub fn decode(bytes: &[u8], mode: WireMode) -> Result<QuantizedMessage, WireError> {
    if bytes.len() < HEADER_BYTES {
        return Err(WireError::Malformed("truncated header".into()));
    }
    let r = f64::from_le_bytes(bytes[0..8].try_into().unwrap());
    let n = u16::from_le_bytes(bytes[8..10].try_into().unwrap());
    let d = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let tag = bytes[14];
    if tag != mode.tag() {
        return Err(WireError::Malformed(format!(
            "mode tag {tag} does not match requested mode"
        )));
    }
    if !r.is_finite() || r < 0.0 {
        return Err(WireError::Malformed(format!("bad scale {r}")));
    }
    if n == 0 {
        return Err(WireError::Malformed("resolution 0 in header".into()));
    }
    let body = &bytes[HEADER_BYTES..];

    let levels = match mode {
        WireMode::Dense => {
            let bits = dense_level_bits(n);
            if body.len() != (d * bits as usize).div_ceil(8) {
                return Err(WireError::Malformed(format!(
                    "dense body is {} bytes, expected {}",
                    body.len(),
                    (d * bits as usize).div_ceil(8)
                )));
            }
            let mut reader = BitReader::new(body);
            let mut levels = Vec::with_capacity(d);
            for _ in 0..d {
                let raw = reader.read(bits)?;
                // sign-extend the two's-complement field
                let shift = 64 - bits;
                let level = ((raw << shift) as i64 >> shift) as i32;
                if level.unsigned_abs() > n as u32 {
                    return Err(WireError::Malformed(format!(
                        "level {level} out of range for n={n}"
                    )));
                }
                levels.push(level);
            }
            if !reader.padding_is_zero() {
                return Err(WireError::Malformed("nonzero padding bits".into()));
            }
            levels
        }
        WireMode::Sparse => {
            if body.len() < 4 {
                return Err(WireError::Malformed("truncated non-zero count".into()));
            }
            let count = u32::from_le_bytes(body[0..4].try_into().unwrap()) as usize;
            if count > d {
                return Err(WireError::Malformed(format!(
                    "{count} non-zeros exceed dimension {d}"
                )));
            }
            let field_bits = sparse_field_bits(d, n) as usize;
            if body.len() - 4 != (count * field_bits).div_ceil(8) {
                return Err(WireError::Malformed(format!(
                    "sparse body is {} bytes, expected {}",
                    body.len() - 4,
                    4 + (count * field_bits).div_ceil(8)
                )));
            }
            let index_bits = ceil_log2(d as u64);
            let mag_bits = ceil_log2(n as u64);
            let mut reader = BitReader::new(&body[4..]);
            let mut levels = vec![0i32; d];
            let mut last_index: Option<usize> = None;
            for _ in 0..count {
                let index = reader.read(index_bits)? as usize;
                let negative = reader.read(1)? == 1;
                let magnitude = reader.read(mag_bits)? as u32 + 1;
                if index >= d {
                    return Err(WireError::Malformed(format!("index {index} out of range")));
                }
                if last_index.is_some_and(|prev| index <= prev) {
                    return Err(WireError::Malformed(
                        "indices must be strictly increasing".into(),
                    ));
                }
                if magnitude > n as u32 {
                    return Err(WireError::Malformed(format!(
                        "magnitude {magnitude} out of range for n={n}"
                    )));
                }
                last_index = Some(index);
                levels[index] = if negative {
                    -(magnitude as i32)
                } else {
                    magnitude as i32
                };
            }
            if !reader.padding_is_zero() {
                return Err(WireError::Malformed("nonzero padding bits".into()));
            }
            levels
        }
    };

    let message = QuantizedMessage { r, n, levels };
    if !message.is_valid() {
        return Err(WireError::Malformed(
            "decoded message violates invariants".into(),
        ));
    }
    Ok(message)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn msg(r: f64, n: u16, levels: Vec<i32>) -> QuantizedMessage {
        QuantizedMessage { r, n, levels }
    }

    #[test]
    fn dense_size_matches_layout_arithmetic() {
        // n=1: 2-bit fields; d=100 → 15-byte header + ⌈200/8⌉ = 25-byte body.
        let q = msg(1.0, 1, vec![1; 100]);
        let bytes = encode(&q, WireMode::Dense).unwrap();
        assert_eq!(bytes.len(), 15 + 25);
        assert_eq!(message_bits(&q, WireMode::Dense), 120 + 200);

        let q64 = msg(1.0, 1, vec![-1; 64]);
        assert_eq!(message_bits(&q64, WireMode::Dense), 120 + 128);
    }

    #[test]
    fn sparse_all_zero_is_header_plus_count() {
        let q = msg(0.0, 4, vec![0; 37]);
        let bytes = encode(&q, WireMode::Sparse).unwrap();
        assert_eq!(bytes.len(), 15 + 4);
        assert_eq!(message_bits(&q, WireMode::Sparse), 120 + 32);
    }

    #[test]
    fn dense_level_out_of_range_is_malformed() {
        // n=1 uses 2-bit fields; the pattern 10 decodes to -2, outside [-1, 1].
        let q = msg(1.0, 1, vec![1]);
        let mut bytes = encode(&q, WireMode::Dense).unwrap();
        *bytes.last_mut().unwrap() = 0b1000_0000;
        assert!(matches!(
            decode(&bytes, WireMode::Dense),
            Err(WireError::Malformed(_))
        ));
    }

    #[test]
    fn truncation_is_malformed() {
        let q = msg(1.0, 4, vec![3, -2, 0, 4, 1]);
        for mode in [WireMode::Dense, WireMode::Sparse] {
            let bytes = encode(&q, mode).unwrap();
            for cut in [1, bytes.len() - 1] {
                assert!(
                    matches!(decode(&bytes[..cut], mode), Err(WireError::Malformed(_))),
                    "cut {cut} mode {mode:?}"
                );
            }
        }
    }

    #[test]
    fn mode_tag_must_match() {
        let q = msg(1.0, 2, vec![1, -2]);
        let bytes = encode(&q, WireMode::Dense).unwrap();
        assert!(matches!(
            decode(&bytes, WireMode::Sparse),
            Err(WireError::Malformed(_))
        ));
    }

    #[test]
    fn sparse_indices_must_increase() {
        // Two entries with the same index: reject.
        let q = msg(1.0, 1, vec![1, 1, 0]);
        let mut bytes = encode(&q, WireMode::Sparse).unwrap();
        // entries are (idx 2 bits, sign 1, mag 0): craft idx0,idx0
        let body_start = 19;
        bytes[body_start] = 0b0000_0000;
        assert!(matches!(
            decode(&bytes, WireMode::Sparse),
            Err(WireError::Malformed(_))
        ));
    }

    #[test]
    fn baseline_convention() {
        assert_eq!(RAW_BITS_PER_PARAM, 64);
    }

    fn arbitrary_message() -> impl Strategy<Value = QuantizedMessage> {
        (1u16..12, 1usize..40).prop_flat_map(|(n, d)| {
            (
                proptest::collection::vec(-(n as i32)..=n as i32, d),
                0.01..100.0f64,
            )
                .prop_map(move |(levels, r)| {
                    let r = if levels.iter().all(|&l| l == 0) { 0.0 } else { r };
                    QuantizedMessage { r, n, levels }
                })
        })
    }

    proptest! {
        #[test]
        fn roundtrip_both_modes(q in arbitrary_message()) {
            for mode in [WireMode::Dense, WireMode::Sparse] {
                let bytes = encode(&q, mode).unwrap();
                let back = decode(&bytes, mode).unwrap();
                prop_assert_eq!(&back, &q);
                // Byte length is the pre-padding bit count rounded up per body.
                prop_assert_eq!(bytes.len() as u64, 15 + (message_bits(&q, mode) - 120).div_ceil(8));
            }
        }

        #[test]
        fn modes_agree_after_decode(q in arbitrary_message()) {
            let dense = decode(&encode(&q, WireMode::Dense).unwrap(), WireMode::Dense).unwrap();
            let sparse = decode(&encode(&q, WireMode::Sparse).unwrap(), WireMode::Sparse).unwrap();
            prop_assert_eq!(dense, sparse);
        }

        #[test]
        fn sparse_beats_dense_below_density_threshold(
            n in 1u16..8,
            d in 8usize..64,
            seed in 0u64..500,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let levels: Vec<i32> = (0..d)
                .map(|_| if rng.gen::<f64>() < 0.3 { rng.gen_range(1..=n as i32) } else { 0 })
                .collect();
            let r = if levels.iter().all(|&l| l == 0) { 0.0 } else { 1.0 };
            let q = QuantizedMessage { r, n, levels };

            // Body-bit algebra: sparse wins exactly when
            // 32 + nnz·f < d·w, with f and w the per-entry field widths.
            let nnz = q.levels.iter().filter(|&&l| l != 0).count() as u64;
            let f = sparse_field_bits(d, n) as u64;
            let w = dense_level_bits(n) as u64;
            let sparse_bits = message_bits(&q, WireMode::Sparse);
            let dense_bits = message_bits(&q, WireMode::Dense);
            prop_assert_eq!(sparse_bits < dense_bits, 32 + nnz * f < d as u64 * w);
        }
    }
}
