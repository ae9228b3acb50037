//! Wire format: `<body length>\n<body>`, where the body is a fixed sequence
//! of `key=value\n` lines. Integers and hashes are hex; difficulty uses the
//! shortest decimal that round-trips.

use std::fmt::Write as _;

use thiserror::Error;

use crate::sha_twin::HeaderTemplate;

#[derive(Debug, Clone, PartialEq)]
pub struct JobMessage {
    pub job_id: u64,
    pub extranonce2: u64,
    pub header_template: HeaderTemplate,
    pub difficulty: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareMessage {
    pub job_id: u64,
    pub extranonce2: u64,
    pub nonce: u32,
    pub hash: [u8; 32],
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("decode error at byte {offset}: {reason}")]
pub struct DecodeError {
    pub offset: usize,
    pub reason: String,
}

fn err(offset: usize, reason: impl Into<String>) -> DecodeError {
    DecodeError { offset, reason: reason.into() }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn frame(body: String) -> Vec<u8> {
    let mut out = format!("{}\n", body.len()).into_bytes();
    out.extend_from_slice(body.as_bytes());
    out
}

pub fn encode_job(m: &JobMessage) -> Vec<u8> {
    let t = &m.header_template;
    frame(format!(
        "type=job\njob_id={:x}\nextranonce2={:016x}\nversion={:08x}\nprev_hash={}\nmerkle_root={}\ntime={:08x}\nbits={:08x}\ndifficulty={:?}\n",
        m.job_id,
        m.extranonce2,
        t.version,
        hex(&t.prev_hash),
        hex(&t.merkle_root),
        t.time,
        t.bits,
        m.difficulty
    ))
}

pub fn encode_share(m: &ShareMessage) -> Vec<u8> {
    frame(format!(
        "type=share\njob_id={:x}\nextranonce2={:016x}\nnonce={:08x}\nhash={}\n",
        m.job_id,
        m.extranonce2,
        m.nonce,
        hex(&m.hash)
    ))
}

/// Field reader over a frame body, tracking absolute byte offsets.
struct Fields<'a> {
    body: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Fields<'a> {
    /// Splits off the length prefix and checks the body length exactly.
    fn open(bytes: &'a [u8]) -> Result<Self, DecodeError> {
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| err(bytes.len(), "missing length line"))?;
        let len_text = std::str::from_utf8(&bytes[..nl]).map_err(|_| err(0, "length is not UTF-8"))?;
        if len_text.is_empty() || !len_text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err(0, "length is not a decimal number"));
        }
        let len: usize = len_text.parse().map_err(|_| err(0, "length out of range"))?;
        let start = nl + 1;
        let have = bytes.len() - start;
        if have < len {
            return Err(err(bytes.len(), format!("truncated frame: expected {len} body bytes, got {have}")));
        }
        if have > len {
            return Err(err(start + len, "trailing bytes after frame"));
        }
        Ok(Self { body: &bytes[start..], pos: 0, base: start })
    }

    fn offset(&self) -> usize {
        self.base + self.pos
    }

    fn field(&mut self, key: &str) -> Result<(&'a str, usize), DecodeError> {
        let at = self.offset();
        let rest = &self.body[self.pos..];
        let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| err(at, format!("unterminated field {key:?}")))?;
        let line = std::str::from_utf8(&rest[..nl]).map_err(|_| err(at, "field is not UTF-8"))?;
        let (k, v) = line.split_once('=').ok_or_else(|| err(at, "expected key=value"))?;
        if k != key {
            return Err(err(at, format!("expected key {key:?}, found {k:?}")));
        }
        self.pos += nl + 1;
        Ok((v, at + k.len() + 1))
    }

    fn hex_u64(&mut self, key: &str, max_digits: usize) -> Result<u64, DecodeError> {
        let (v, at) = self.field(key)?;
        if v.is_empty() || v.len() > max_digits || !v.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(err(at, format!("{key}: bad hex width")));
        }
        u64::from_str_radix(v, 16).map_err(|_| err(at, format!("{key}: bad hex")))
    }

    fn hash(&mut self, key: &str) -> Result<[u8; 32], DecodeError> {
        let (v, at) = self.field(key)?;
        if v.len() != 64 || !v.is_ascii() {
            return Err(err(at, format!("{key}: expected 64 hex digits")));
        }
        let mut out = [0u8; 32];
        for (i, b) in out.iter_mut().enumerate() {
            *b =
                u8::from_str_radix(&v[2 * i..2 * i + 2], 16).map_err(|_| err(at + 2 * i, format!("{key}: bad hex")))?;
        }
        Ok(out)
    }

    fn expect_type(&mut self, kind: &str) -> Result<(), DecodeError> {
        let (v, at) = self.field("type")?;
        if v != kind {
            return Err(err(at, format!("expected type {kind:?}, found {v:?}")));
        }
        Ok(())
    }

    fn end(&self) -> Result<(), DecodeError> {
        if self.pos == self.body.len() {
            Ok(())
        } else {
            Err(err(self.offset(), "unexpected extra field"))
        }
    }
}

pub fn decode_job(bytes: &[u8]) -> Result<JobMessage, DecodeError> {
    let mut f = Fields::open(bytes)?;
    f.expect_type("job")?;
    let job_id = f.hex_u64("job_id", 16)?;
    let extranonce2 = f.hex_u64("extranonce2", 16)?;
    let version = f.hex_u64("version", 8)? as u32;
    let prev_hash = f.hash("prev_hash")?;
    let merkle_root = f.hash("merkle_root")?;
    let time = f.hex_u64("time", 8)? as u32;
    let bits = f.hex_u64("bits", 8)? as u32;
    let (d, at) = f.field("difficulty")?;
    let difficulty = d.parse::<f64>().map_err(|_| err(at, "difficulty: bad number"))?;
    f.end()?;
    Ok(JobMessage {
        job_id,
        extranonce2,
        header_template: HeaderTemplate { version, prev_hash, merkle_root, time, bits },
        difficulty,
    })
}

pub fn decode_share(bytes: &[u8]) -> Result<ShareMessage, DecodeError> {
    let mut f = Fields::open(bytes)?;
    f.expect_type("share")?;
    let job_id = f.hex_u64("job_id", 16)?;
    let extranonce2 = f.hex_u64("extranonce2", 16)?;
    let nonce = f.hex_u64("nonce", 8)? as u32;
    let hash = f.hash("hash")?;
    f.end()?;
    Ok(ShareMessage { job_id, extranonce2, nonce, hash })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sha_twin::BlockHeader;

    fn job() -> JobMessage {
        JobMessage {
            job_id: 7,
            extranonce2: 0xdead_beef,
            header_template: BlockHeader::genesis().template(),
            difficulty: 1024.0,
        }
    }

    #[test]
    fn fixed_job_round_trip_and_golden_bytes() {
        let bytes = encode_job(&job());
        let text = std::str::from_utf8(&bytes).unwrap();
        assert!(text.starts_with("262\ntype=job\njob_id=7\nextranonce2=00000000deadbeef\nversion=00000001\n"));
        assert!(text.ends_with("bits=1d00ffff\ndifficulty=1024.0\n"));
        assert_eq!(decode_job(&bytes).unwrap(), job());
    }

    #[test]
    fn share_round_trip() {
        let s = ShareMessage { job_id: 1, extranonce2: u64::MAX, nonce: 42, hash: [0xab; 32] };
        assert_eq!(decode_share(&encode_share(&s)).unwrap(), s);
    }

    #[test]
    fn truncated_frame_reports_offset() {
        let bytes = encode_job(&job());
        let e = decode_job(&bytes[..bytes.len() - 5]).unwrap_err();
        assert_eq!(e.offset, bytes.len() - 5);
        let e = decode_job(&bytes[..2]).unwrap_err();
        assert_eq!(e.offset, 2);
    }

    #[test]
    fn corrupted_fields_report_position() {
        let mut bytes = encode_job(&job());
        let text = String::from_utf8(bytes.clone()).unwrap();
        let pos = text.find("bits=").unwrap() + 5;
        bytes[pos] = b'z';
        let e = decode_job(&bytes).unwrap_err();
        assert_eq!(e.offset, pos);
        assert!(decode_share(&encode_job(&job())).is_err());
        let mut extra = encode_job(&job());
        extra.push(b'x');
        assert!(decode_job(&extra).is_err());
    }
}
