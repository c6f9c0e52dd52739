//! Shared container for the index and model files.
//!
//! ```text
//! offset  size  field
//! 0       8     magic
//! 8       4     format version (u32)
//! 12      8     body length in bytes (u64)
//! 20      32    analyzer fingerprint (SHA-256)
//! 52      n     body
//! 52+n    4     CRC-32 of bytes [0, 52+n)
//! ```
//!
//! Integers are little-endian fixed width; strings are a `u32` byte length
//! followed by UTF-8 bytes.

use thiserror::Error;

pub(crate) const HEADER_LEN: usize = 52;
const TRAILER_LEN: usize = 4;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a {expected} file (bad magic)")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("file truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("malformed file: {0}")]
    Malformed(String),
}

#[derive(Default)]
pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.u32(u32::try_from(s.len()).expect("string longer than 4 GiB"));
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn len_prefix(&mut self, n: usize) {
        self.u64(n as u64);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                FormatError::Malformed(format!("read past end of body at offset {}", self.pos))
            })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn str(&mut self) -> Result<String, FormatError> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| FormatError::Malformed("string is not UTF-8".into()))
    }

    /// Reads a collection length, rejecting counts that cannot fit in the
    /// remaining bytes given `min_item` bytes per element.
    pub fn len_prefix(&mut self, min_item: usize) -> Result<usize, FormatError> {
        let n = self.u64()?;
        let remaining = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(min_item as u64) > remaining {
            return Err(FormatError::Malformed(format!(
                "count {n} exceeds remaining body"
            )));
        }
        Ok(n as usize)
    }

    pub fn finish(self) -> Result<(), FormatError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(FormatError::Malformed(format!(
                "{} trailing bytes after body",
                self.buf.len() - self.pos
            )))
        }
    }
}

pub(crate) fn seal(magic: &[u8; 8], version: u32, fingerprint: &[u8; 32], body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + body.len() + TRAILER_LEN);
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(fingerprint);
    out.extend_from_slice(body);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Validates the container and returns the fingerprint and body.
pub(crate) fn unseal<'a>(
    bytes: &'a [u8],
    magic: &[u8; 8],
    version: u32,
    kind: &'static str,
) -> Result<([u8; 32], &'a [u8]), FormatError> {
    let actual = bytes.len() as u64;
    if bytes.len() < magic.len() {
        return Err(FormatError::Truncated {
            expected: (HEADER_LEN + TRAILER_LEN) as u64,
            actual,
        });
    }
    if &bytes[..8] != magic {
        return Err(FormatError::BadMagic { expected: kind });
    }
    if bytes.len() < HEADER_LEN + TRAILER_LEN {
        return Err(FormatError::Truncated {
            expected: (HEADER_LEN + TRAILER_LEN) as u64,
            actual,
        });
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if found != version {
        return Err(FormatError::UnsupportedVersion {
            found,
            expected: version,
        });
    }
    let body_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let expected = body_len.saturating_add((HEADER_LEN + TRAILER_LEN) as u64);
    if expected > actual {
        return Err(FormatError::Truncated { expected, actual });
    }
    if expected < actual {
        return Err(FormatError::Malformed(format!(
            "{} unexpected bytes after checksum",
            actual - expected
        )));
    }
    let crc_at = bytes.len() - TRAILER_LEN;
    let stored = u32::from_le_bytes(bytes[crc_at..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..crc_at]);
    if stored != computed {
        return Err(FormatError::ChecksumMismatch { stored, computed });
    }
    let fingerprint: [u8; 32] = bytes[20..52].try_into().unwrap();
    Ok((fingerprint, &bytes[HEADER_LEN..crc_at]))
}
