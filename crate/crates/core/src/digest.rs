//! Fixed-width digests and wire normalization of consensus values.
//!
//! Decisions and proposals are arbitrary byte strings. On the wire a value
//! travels raw when it is at most eight bytes and as a truncated SHA-256
//! digest otherwise, which keeps message size constant regardless of how
//! large the consensus values are. All equality checks in the consensus
//! certificate compare these normalized forms.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

/// Values up to this many bytes travel raw instead of being digested.
pub const RAW_VALUE_MAX: usize = 8;

/// Digest width in bytes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DigestWidth {
    W8,
    #[default]
    W32,
}

impl DigestWidth {
    pub const fn bytes(self) -> usize {
        match self {
            DigestWidth::W8 => 8,
            DigestWidth::W32 => 32,
        }
    }
}

/// A SHA-256 digest truncated to the configured width. Width is fixed per
/// run, so equal inputs always produce equal digests of equal length.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Digest(Vec<u8>);

impl Digest {
    pub fn bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "digest:{}", hex(&self.0))
    }
}

/// SHA-256 truncated to `width` bytes. Deterministic, and the output width
/// never depends on the input length.
pub fn digest_value(value: &[u8], width: DigestWidth) -> Digest {
    let hash = Sha256::digest(value);
    Digest(hash[..width.bytes()].to_vec())
}

/// A consensus value in the form it travels on the wire: the raw bytes for
/// short values, the digest for long ones.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WireValue(Vec<u8>);

/// Upper bound on the wire form of a value (raw cap or widest digest).
pub const WIRE_VALUE_MAX: usize = 32;

impl WireValue {
    /// Normalizes a value: raw when at most [`RAW_VALUE_MAX`] bytes,
    /// otherwise its digest at `width`.
    pub fn normalize(value: &[u8], width: DigestWidth) -> WireValue {
        if value.len() <= RAW_VALUE_MAX {
            WireValue(value.to_vec())
        } else {
            WireValue(digest_value(value, width).0)
        }
    }

    /// Wraps bytes that already are in wire form (used by the decoder).
    pub fn from_wire_bytes(bytes: Vec<u8>) -> WireValue {
        debug_assert!(bytes.len() <= WIRE_VALUE_MAX);
        WireValue(bytes)
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for WireValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "wire:{}", hex(&self.0))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn digest_is_deterministic() {
        let a = digest_value(b"certification", DigestWidth::W32);
        let b = digest_value(b"certification", DigestWidth::W32);
        assert_eq!(a, b);
        assert_eq!(a.bytes().len(), 32);
    }

    #[test]
    fn digest_of_empty_string_matches_sha256() {
        // Well-known SHA-256 of the empty string.
        let expect = [
            0xe3, 0xb0, 0xc4, 0x42, 0x98, 0xfc, 0x1c, 0x14, 0x9a, 0xfb, 0xf4, 0xc8, 0x99, 0x6f,
            0xb9, 0x24, 0x27, 0xae, 0x41, 0xe4, 0x64, 0x9b, 0x93, 0x4c, 0xa4, 0x95, 0x99, 0x1b,
            0x78, 0x52, 0xb8, 0x55,
        ];
        assert_eq!(digest_value(b"", DigestWidth::W32).bytes(), &expect[..]);
        assert_eq!(digest_value(b"", DigestWidth::W8).bytes(), &expect[..8]);
    }

    #[test]
    fn random_kib_values_do_not_collide() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let mut a = vec![0u8; 1024];
            let mut b = vec![0u8; 1024];
            rng.fill(&mut a[..]);
            rng.fill(&mut b[..]);
            if a != b {
                assert_ne!(
                    digest_value(&a, DigestWidth::W32),
                    digest_value(&b, DigestWidth::W32)
                );
            }
        }
    }

    #[test]
    fn normalization_keeps_short_values_raw() {
        let v = WireValue::normalize(b"decide", DigestWidth::W32);
        assert_eq!(v.bytes(), b"decide");
    }

    #[test]
    fn normalization_digests_long_values() {
        let long = b"a value much longer than eight bytes";
        let v = WireValue::normalize(long, DigestWidth::W32);
        assert_eq!(v.bytes(), digest_value(long, DigestWidth::W32).bytes());
        assert_eq!(v.len(), 32);
        let v8 = WireValue::normalize(long, DigestWidth::W8);
        assert_eq!(v8.len(), 8);
    }

    #[test]
    fn distinct_long_values_normalize_distinctly_at_w32() {
        // Soundness of the digest path rests on this staying collision-free.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100_000 {
            let mut a = vec![0u8; 24];
            let mut b = vec![0u8; 24];
            rng.fill(&mut a[..]);
            rng.fill(&mut b[..]);
            if a != b {
                assert_ne!(
                    WireValue::normalize(&a, DigestWidth::W32),
                    WireValue::normalize(&b, DigestWidth::W32)
                );
            }
        }
    }
}
