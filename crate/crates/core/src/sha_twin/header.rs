use rand::Rng;

use super::sha256::{compress, pad, sha256_with_trace, sha256d, RoundTrace, IV};

/// An 80-byte block header. Hash fields are kept in serialized byte order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockHeader {
    pub version: u32,
    pub prev_hash: [u8; 32],
    pub merkle_root: [u8; 32],
    pub time: u32,
    pub bits: u32,
    pub nonce: u32,
}

/// A header without its nonce: the unit of work handed to a device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeaderTemplate {
    pub version: u32,
    pub prev_hash: [u8; 32],
    pub merkle_root: [u8; 32],
    pub time: u32,
    pub bits: u32,
}

impl HeaderTemplate {
    /// Fresh template with random hash fields and a plausible timestamp.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut prev_hash = [0u8; 32];
        let mut merkle_root = [0u8; 32];
        rng.fill(&mut prev_hash[..]);
        rng.fill(&mut merkle_root[..]);
        Self {
            version: 0x2000_0000,
            prev_hash,
            merkle_root,
            time: 1_700_000_000 + rng.random_range(0..10_000_000),
            bits: 0x1703_4219,
        }
    }

    pub fn with_nonce(&self, nonce: u32) -> BlockHeader {
        BlockHeader {
            version: self.version,
            prev_hash: self.prev_hash,
            merkle_root: self.merkle_root,
            time: self.time,
            bits: self.bits,
            nonce,
        }
    }

    /// Stable 64-bit fingerprint, used to key per-template device behaviour.
    pub fn key(&self) -> u64 {
        let bytes = self.with_nonce(0).serialize();
        let d = sha256d(&bytes);
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }
}

impl BlockHeader {
    pub const LEN: usize = 80;

    pub fn serialize(&self) -> [u8; 80] {
        let mut out = [0u8; 80];
        out[0..4].copy_from_slice(&self.version.to_le_bytes());
        out[4..36].copy_from_slice(&self.prev_hash);
        out[36..68].copy_from_slice(&self.merkle_root);
        out[68..72].copy_from_slice(&self.time.to_le_bytes());
        out[72..76].copy_from_slice(&self.bits.to_le_bytes());
        out[76..80].copy_from_slice(&self.nonce.to_le_bytes());
        out
    }

    pub fn deserialize(bytes: &[u8; 80]) -> Self {
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        Self {
            version: u32_at(0),
            prev_hash: bytes[4..36].try_into().expect("32 bytes"),
            merkle_root: bytes[36..68].try_into().expect("32 bytes"),
            time: u32_at(68),
            bits: u32_at(72),
            nonce: u32_at(76),
        }
    }

    pub fn template(&self) -> HeaderTemplate {
        HeaderTemplate {
            version: self.version,
            prev_hash: self.prev_hash,
            merkle_root: self.merkle_root,
            time: self.time,
            bits: self.bits,
        }
    }

    /// The first block of Bitcoin's main chain.
    pub fn genesis() -> Self {
        let mut merkle_root = [0u8; 32];
        let display = "4a5e1e4baab89f3a32518a88c31bc87f618f76673e2cc77ab2127b7afdeda33b";
        for (i, b) in merkle_root.iter_mut().enumerate() {
            *b = u8::from_str_radix(&display[2 * i..2 * i + 2], 16).expect("hex");
        }
        merkle_root.reverse();
        Self {
            version: 1,
            prev_hash: [0; 32],
            merkle_root,
            time: 1_231_006_505,
            bits: 0x1d00ffff,
            nonce: 2_083_236_893,
        }
    }

    /// Chaining value after the first 64 header bytes; constant per template.
    pub fn midstate(&self) -> [u32; 8] {
        let bytes = self.serialize();
        compress(IV, bytes[..64].try_into().expect("64 bytes"))
    }

    /// Padded second block of the first hash (contains the nonce).
    pub fn tail_block(&self) -> [u8; 64] {
        pad(&self.serialize())[1]
    }

    /// Round trace of the nonce-bearing compression.
    pub fn nonce_trace(&self) -> RoundTrace {
        sha256_with_trace(&self.tail_block(), &self.midstate()).expect("64-byte block").1
    }
}

/// `SHA-256(SHA-256(header))` in raw digest byte order.
pub fn double_sha_header(h: &BlockHeader) -> [u8; 32] {
    sha256d(&h.serialize())
}

/// Digest bytes reversed, as block explorers print them.
pub fn display_hex(hash: &[u8; 32]) -> String {
    hash.iter().rev().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serializes_to_80_bytes_and_back() {
        let h = BlockHeader::genesis();
        let bytes = h.serialize();
        assert_eq!(bytes.len(), 80);
        assert_eq!(&bytes[0..4], &[1, 0, 0, 0]);
        assert_eq!(&bytes[72..76], &[0xff, 0xff, 0x00, 0x1d]);
        assert_eq!(BlockHeader::deserialize(&bytes), h);
        assert_eq!(h.template().with_nonce(h.nonce), h);
    }

    #[test]
    fn genesis_hash() {
        let h = BlockHeader::genesis();
        assert_eq!(
            display_hex(&double_sha_header(&h)),
            "000000000019d6689c085ae165831e934ff763ae46a2a6c172b3f1b60a8ce26f"
        );
    }

    #[test]
    fn midstate_path_matches_plain_hash() {
        let h = BlockHeader::genesis();
        let first = super::super::sha256::words_to_bytes(&compress(h.midstate(), &h.tail_block()));
        assert_eq!(first, super::super::sha256::sha256(&h.serialize()));
        assert_eq!(h.nonce_trace().fold(), compress(h.midstate(), &h.tail_block()));
    }

    #[test]
    fn template_key_ignores_nonce() {
        let h = BlockHeader::genesis();
        let mut g = h;
        g.nonce ^= 1;
        assert_eq!(h.template().key(), g.template().key());
        g.time += 1;
        assert_ne!(h.template().key(), g.template().key());
    }
}
