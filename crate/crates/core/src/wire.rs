//! Versioned little-endian framing shared by share files, dealt pools and
//! checkpoints.
//!
//! ```text
//! magic      4 bytes   b"PNSH"
//! version    u16       WIRE_VERSION
//! kind       u8        RecordKind
//! frac_bits  u8
//! session    u64
//! party_id   u16
//! parties    u16
//! width      u16       bits per element (64 for ring data)
//! ndim       u16
//! dims       ndim x u64
//! nwords     u64
//! words      nwords x u64
//! ```

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"PNSH";
pub const WIRE_VERSION: u16 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("truncated input: needed {needed} bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported wire version {0}")]
    Version(u16),
    #[error("unknown record kind {0}")]
    Kind(u8),
    #[error("header inconsistent: {0}")]
    Inconsistent(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum RecordKind {
    ArithShare = 1,
    BinShare = 2,
    BeaverTriple = 3,
    MatrixTriple = 4,
    BinTriple = 5,
    DaBit = 6,
    TruncPair = 7,
    PoolHeader = 8,
}

impl RecordKind {
    fn from_u8(v: u8) -> Result<Self, WireError> {
        Ok(match v {
            1 => RecordKind::ArithShare,
            2 => RecordKind::BinShare,
            3 => RecordKind::BeaverTriple,
            4 => RecordKind::MatrixTriple,
            5 => RecordKind::BinTriple,
            6 => RecordKind::DaBit,
            7 => RecordKind::TruncPair,
            8 => RecordKind::PoolHeader,
            other => return Err(WireError::Kind(other)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub kind: RecordKind,
    pub frac_bits: u8,
    pub session: u64,
    pub party_id: u16,
    pub parties: u16,
    pub width: u16,
    pub dims: Vec<u64>,
}

pub fn write_record(out: &mut Vec<u8>, header: &Header, words: &[u64]) {
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&WIRE_VERSION.to_le_bytes());
    out.push(header.kind as u8);
    out.push(header.frac_bits);
    out.extend_from_slice(&header.session.to_le_bytes());
    out.extend_from_slice(&header.party_id.to_le_bytes());
    out.extend_from_slice(&header.parties.to_le_bytes());
    out.extend_from_slice(&header.width.to_le_bytes());
    out.extend_from_slice(&(header.dims.len() as u16).to_le_bytes());
    for d in &header.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&(words.len() as u64).to_le_bytes());
    out.reserve(words.len() * 8);
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
}

/// Cursor over a byte buffer holding one or more records.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Truncated {
                offset: self.pos,
                needed: n,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn read_record(&mut self) -> Result<(Header, Vec<u64>), WireError> {
        let magic: [u8; 4] = self.take(4)?.try_into().unwrap();
        if magic != MAGIC {
            return Err(WireError::BadMagic(magic));
        }
        let version = self.u16()?;
        if version != WIRE_VERSION {
            return Err(WireError::Version(version));
        }
        let kind = RecordKind::from_u8(self.take(1)?[0])?;
        let frac_bits = self.take(1)?[0];
        let session = self.u64()?;
        let party_id = self.u16()?;
        let parties = self.u16()?;
        let width = self.u16()?;
        let ndim = self.u16()? as usize;
        let dims = (0..ndim).map(|_| self.u64()).collect::<Result<Vec<_>, _>>()?;
        let nwords = self.u64()? as usize;
        if nwords > (self.buf.len() - self.pos) / 8 {
            return Err(WireError::Truncated {
                offset: self.pos,
                needed: nwords.saturating_mul(8),
            });
        }
        let words = (0..nwords).map(|_| self.u64()).collect::<Result<Vec<_>, _>>()?;
        Ok((
            Header {
                kind,
                frac_bits,
                session,
                party_id,
                parties,
                width,
                dims,
            },
            words,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Header {
        Header {
            kind: RecordKind::ArithShare,
            frac_bits: 16,
            session: 0xabcdef,
            party_id: 1,
            parties: 5,
            width: 64,
            dims: vec![2, 3],
        }
    }

    #[test]
    fn byte_layout_is_pinned() {
        let mut buf = Vec::new();
        write_record(&mut buf, &header(), &[1, u64::MAX]);
        assert_eq!(&buf[..4], b"PNSH");
        assert_eq!(&buf[4..6], &[1, 0]);
        assert_eq!(buf[6], 1);
        assert_eq!(buf[7], 16);
        assert_eq!(&buf[8..16], &0xabcdefu64.to_le_bytes());
        assert_eq!(buf.len(), 4 + 2 + 1 + 1 + 8 + 2 + 2 + 2 + 2 + 16 + 8 + 16);
        let (h, w) = Reader::new(&buf).read_record().unwrap();
        assert_eq!(h, header());
        assert_eq!(w, vec![1, u64::MAX]);
    }

    #[test]
    fn rejects_damage() {
        let mut buf = Vec::new();
        write_record(&mut buf, &header(), &[7; 4]);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(Reader::new(&bad).read_record(), Err(WireError::BadMagic(_))));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert_eq!(Reader::new(&bad).read_record(), Err(WireError::Version(9)));
        assert!(matches!(
            Reader::new(&buf[..buf.len() - 3]).read_record(),
            Err(WireError::Truncated { .. })
        ));
    }
}
