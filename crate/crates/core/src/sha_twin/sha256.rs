//! SHA-256 compression with a per-round record of the working variables.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShaError {
    #[error("message block must be 64 bytes, got {0}")]
    BlockLength(usize),
}

pub const IV: [u32; 8] =
    [0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19];

const K: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5, 0xd807aa98,
    0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
    0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8,
    0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
    0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819,
    0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
    0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
    0xc67178f2,
];

/// Working variables `a..h` after each of the 64 rounds, plus the message
/// schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTrace {
    pub initial: [u32; 8],
    pub rounds: [[u32; 8]; 64],
    pub schedule: [u32; 64],
}

impl RoundTrace {
    /// State after round `k` (1-based); `k = 0` is the chaining input.
    pub fn state_after(&self, k: usize) -> [u32; 8] {
        if k == 0 {
            self.initial
        } else {
            self.rounds[k - 1]
        }
    }

    /// Working variable `a` after round `k` (1-based).
    pub fn a(&self, k: usize) -> u32 {
        self.state_after(k)[0]
    }

    /// Final state folded into the chaining input.
    pub fn fold(&self) -> [u32; 8] {
        let mut out = self.initial;
        for (o, r) in out.iter_mut().zip(self.rounds[63]) {
            *o = o.wrapping_add(r);
        }
        out
    }
}

fn schedule(block: &[u8; 64]) -> [u32; 64] {
    let mut w = [0u32; 64];
    for (i, chunk) in block.chunks_exact(4).enumerate() {
        w[i] = u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
    }
    for t in 16..64 {
        let s0 = w[t - 15].rotate_right(7) ^ w[t - 15].rotate_right(18) ^ (w[t - 15] >> 3);
        let s1 = w[t - 2].rotate_right(17) ^ w[t - 2].rotate_right(19) ^ (w[t - 2] >> 10);
        w[t] = w[t - 16].wrapping_add(s0).wrapping_add(w[t - 7]).wrapping_add(s1);
    }
    w
}

#[inline]
fn round(s: [u32; 8], k: u32, w: u32) -> [u32; 8] {
    let [a, b, c, d, e, f, g, h] = s;
    let s1 = e.rotate_right(6) ^ e.rotate_right(11) ^ e.rotate_right(25);
    let ch = (e & f) ^ (!e & g);
    let t1 = h.wrapping_add(s1).wrapping_add(ch).wrapping_add(k).wrapping_add(w);
    let s0 = a.rotate_right(2) ^ a.rotate_right(13) ^ a.rotate_right(22);
    let maj = (a & b) ^ (a & c) ^ (b & c);
    let t2 = s0.wrapping_add(maj);
    [t1.wrapping_add(t2), a, b, c, d.wrapping_add(t1), e, f, g]
}

/// One compression without recording rounds.
pub fn compress(state: [u32; 8], block: &[u8; 64]) -> [u32; 8] {
    let w = schedule(block);
    let mut s = state;
    for t in 0..64 {
        s = round(s, K[t], w[t]);
    }
    let mut out = state;
    for (o, x) in out.iter_mut().zip(s) {
        *o = o.wrapping_add(x);
    }
    out
}

/// Compresses one 64-byte block from `initial_hash`, returning the output
/// chaining value as bytes together with the full round trace.
pub fn sha256_with_trace(block: &[u8], initial_hash: &[u32; 8]) -> Result<([u8; 32], RoundTrace), ShaError> {
    let block: &[u8; 64] = block.try_into().map_err(|_| ShaError::BlockLength(block.len()))?;
    let w = schedule(block);
    let mut rounds = [[0u32; 8]; 64];
    let mut s = *initial_hash;
    for t in 0..64 {
        s = round(s, K[t], w[t]);
        rounds[t] = s;
    }
    let trace = RoundTrace { initial: *initial_hash, rounds, schedule: w };
    Ok((words_to_bytes(&trace.fold()), trace))
}

pub fn words_to_bytes(words: &[u32; 8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (chunk, w) in out.chunks_exact_mut(4).zip(words) {
        chunk.copy_from_slice(&w.to_be_bytes());
    }
    out
}

/// Standard message padding into 64-byte blocks.
pub fn pad(message: &[u8]) -> Vec<[u8; 64]> {
    let mut data = message.to_vec();
    data.push(0x80);
    while data.len() % 64 != 56 {
        data.push(0);
    }
    data.extend_from_slice(&((message.len() as u64) * 8).to_be_bytes());
    data.chunks_exact(64).map(|c| c.try_into().expect("64-byte chunk")).collect()
}

pub fn sha256(message: &[u8]) -> [u8; 32] {
    let state = pad(message).iter().fold(IV, compress);
    words_to_bytes(&state)
}

pub fn sha256d(message: &[u8]) -> [u8; 32] {
    sha256(&sha256(message))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hex(bytes: &[u8]) -> String {
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }

    #[test]
    fn fips_vectors() {
        assert_eq!(hex(&sha256(b"abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(hex(&sha256(b"")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(
            hex(&sha256(b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")),
            "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1"
        );
    }

    #[test]
    fn traced_block_matches_plain_compression() {
        let block = pad(b"abc")[0];
        let (digest, trace) = sha256_with_trace(&block, &IV).unwrap();
        assert_eq!(digest, sha256(b"abc"));
        assert_eq!(trace.fold(), compress(IV, &block));
        assert_eq!(trace.state_after(0), IV);
        // Round 1 `a` for "abc", from the FIPS 180-2 worked example.
        assert_eq!(trace.a(1), 0x5d6aebcd);
        assert_eq!(trace.a(64), 0x506e3058);
        let (_, again) = sha256_with_trace(&block, &IV).unwrap();
        assert_eq!(trace, again);
    }

    #[test]
    fn rejects_wrong_length() {
        assert_eq!(sha256_with_trace(&[0u8; 63], &IV).unwrap_err(), ShaError::BlockLength(63));
    }

    #[test]
    fn padding_lengths() {
        assert_eq!(pad(b"").len(), 1);
        assert_eq!(pad(&[0u8; 55]).len(), 1);
        assert_eq!(pad(&[0u8; 56]).len(), 2);
        assert_eq!(pad(&[0u8; 80]).len(), 2);
    }
}
