//! Additive (mod 2^64) and XOR secret sharing with an n-out-of-n access
//! structure: every party's share is required to reconstruct.
//!
//! Shares carry the session tag, party index, party count and shape so that
//! mixing shares from different sessions or sharings fails loudly instead of
//! reconstructing garbage.

use rand::RngCore;
use thiserror::Error;

use crate::ring::{FixedConfig, FixedVec, Ring64, RingError};
use crate::wire::{self, Header, RecordKind, WireError};

pub const MAX_PARTIES: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum ShareError {
    #[error("need between 2 and {MAX_PARTIES} parties, got {0}")]
    PartyCount(usize),
    #[error("expected {expected} shares, got {got}")]
    MissingShare { expected: usize, got: usize },
    #[error("share for party {0} supplied twice")]
    DuplicateShare(usize),
    #[error("share belongs to session {got:#x}, expected {expected:#x}")]
    SessionMismatch { expected: u64, got: u64 },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("fixed-point config mismatch")]
    ConfigMismatch,
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Opaque tag binding shares to one sharing session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct SessionId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartyConfig {
    parties: usize,
    pub rng_seed: u64,
}

impl PartyConfig {
    pub fn new(parties: usize, rng_seed: u64) -> Result<Self, ShareError> {
        check_parties(parties)?;
        Ok(PartyConfig { parties, rng_seed })
    }

    pub fn parties(&self) -> usize {
        self.parties
    }
}

pub(crate) fn check_parties(parties: usize) -> Result<(), ShareError> {
    if (2..=MAX_PARTIES).contains(&parties) {
        Ok(())
    } else {
        Err(ShareError::PartyCount(parties))
    }
}

/// One party's additive share of a ring tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArithShare {
    pub party_id: usize,
    pub parties: usize,
    pub session: SessionId,
    pub payload: FixedVec,
}

impl ArithShare {
    /// Local share-wise addition; reconstructs to the sum of the secrets.
    pub fn add(&self, other: &ArithShare) -> Result<ArithShare, ShareError> {
        self.check_compatible(other)?;
        let elems = self
            .payload
            .elems()
            .iter()
            .zip(other.payload.elems())
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(ArithShare {
            payload: FixedVec::new(elems, self.payload.shape().to_vec(), self.payload.cfg())?,
            ..self.clone()
        })
    }

    fn check_compatible(&self, other: &ArithShare) -> Result<(), ShareError> {
        if self.session != other.session {
            return Err(ShareError::SessionMismatch {
                expected: self.session.0,
                got: other.session.0,
            });
        }
        if self.payload.shape() != other.payload.shape() {
            return Err(ShareError::ShapeMismatch(
                self.payload.shape().to_vec(),
                other.payload.shape().to_vec(),
            ));
        }
        if self.party_id != other.party_id || self.parties != other.parties {
            return Err(ShareError::DuplicateShare(other.party_id));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let header = Header {
            kind: RecordKind::ArithShare,
            frac_bits: self.payload.cfg().frac_bits() as u8,
            session: self.session.0,
            party_id: self.party_id as u16,
            parties: self.parties as u16,
            width: 64,
            dims: self.payload.shape().iter().map(|&d| d as u64).collect(),
        };
        let words: Vec<u64> = self.payload.elems().iter().map(|r| r.0).collect();
        wire::write_record(&mut out, &header, &words);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, ShareError> {
        let (h, words) = wire::Reader::new(buf).read_record()?;
        if h.kind != RecordKind::ArithShare {
            return Err(WireError::Inconsistent("not an arithmetic share").into());
        }
        let cfg = FixedConfig::new(h.frac_bits as u32)?;
        let shape = h.dims.iter().map(|&d| d as usize).collect();
        let payload = FixedVec::new(words.into_iter().map(Ring64).collect(), shape, cfg)?;
        Ok(ArithShare {
            party_id: h.party_id as usize,
            parties: h.parties as usize,
            session: SessionId(h.session),
            payload,
        })
    }
}

/// One party's XOR share of a vector of bit patterns (`width` low bits used).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinShare {
    pub party_id: usize,
    pub parties: usize,
    pub session: SessionId,
    pub width: u32,
    pub bits: Vec<u64>,
}

impl BinShare {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let header = Header {
            kind: RecordKind::BinShare,
            frac_bits: 0,
            session: self.session.0,
            party_id: self.party_id as u16,
            parties: self.parties as u16,
            width: self.width as u16,
            dims: vec![self.bits.len() as u64],
        };
        wire::write_record(&mut out, &header, &self.bits);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, ShareError> {
        let (h, bits) = wire::Reader::new(buf).read_record()?;
        if h.kind != RecordKind::BinShare {
            return Err(WireError::Inconsistent("not a binary share").into());
        }
        if h.dims != [bits.len() as u64] {
            return Err(WireError::Inconsistent("binary share length").into());
        }
        Ok(BinShare {
            party_id: h.party_id as usize,
            parties: h.parties as usize,
            session: SessionId(h.session),
            width: h.width as u32,
            bits,
        })
    }
}

/// Random additive split of `values` into `parties` vectors.
/// The first `parties - 1` are uniform; the last closes the sum.
pub fn split_additive(values: &[Ring64], parties: usize, rng: &mut impl RngCore) -> Vec<Vec<Ring64>> {
    let mut out = Vec::with_capacity(parties);
    let mut last = values.to_vec();
    for _ in 1..parties {
        let share: Vec<Ring64> = (0..values.len()).map(|_| Ring64(rng.next_u64())).collect();
        for (l, s) in last.iter_mut().zip(&share) {
            *l -= *s;
        }
        out.push(share);
    }
    out.push(last);
    out
}

pub fn split_xor(values: &[u64], parties: usize, width: u32, rng: &mut impl RngCore) -> Vec<Vec<u64>> {
    let mask = width_mask(width);
    let mut out = Vec::with_capacity(parties);
    let mut last: Vec<u64> = values.iter().map(|v| v & mask).collect();
    for _ in 1..parties {
        let share: Vec<u64> = (0..values.len()).map(|_| rng.next_u64() & mask).collect();
        for (l, s) in last.iter_mut().zip(&share) {
            *l ^= s;
        }
        out.push(share);
    }
    out.push(last);
    out
}

pub(crate) fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

pub fn share_arith(
    secret: &FixedVec,
    parties: usize,
    session: SessionId,
    rng: &mut impl RngCore,
) -> Result<Vec<ArithShare>, ShareError> {
    check_parties(parties)?;
    split_additive(secret.elems(), parties, rng)
        .into_iter()
        .enumerate()
        .map(|(party_id, elems)| {
            Ok(ArithShare {
                party_id,
                parties,
                session,
                payload: FixedVec::new(elems, secret.shape().to_vec(), secret.cfg())?,
            })
        })
        .collect()
}

/// Orders shares by party id and checks the set is complete and consistent.
fn ordered<S>(
    shares: &[S],
    meta: impl Fn(&S) -> (usize, usize, SessionId),
) -> Result<Vec<&S>, ShareError> {
    let first = shares.first().ok_or(ShareError::MissingShare { expected: 2, got: 0 })?;
    let (_, parties, session) = meta(first);
    check_parties(parties)?;
    if shares.len() != parties {
        return Err(ShareError::MissingShare {
            expected: parties,
            got: shares.len(),
        });
    }
    let mut slots: Vec<Option<&S>> = vec![None; parties];
    for s in shares {
        let (id, p, sess) = meta(s);
        if sess != session {
            return Err(ShareError::SessionMismatch {
                expected: session.0,
                got: sess.0,
            });
        }
        if p != parties || id >= parties {
            return Err(ShareError::MissingShare {
                expected: parties,
                got: p,
            });
        }
        if slots[id].replace(s).is_some() {
            return Err(ShareError::DuplicateShare(id));
        }
    }
    Ok(slots.into_iter().map(|s| s.unwrap()).collect())
}

pub fn reconstruct_arith(shares: &[ArithShare]) -> Result<FixedVec, ShareError> {
    let shares = ordered(shares, |s| (s.party_id, s.parties, s.session))?;
    let first = &shares[0].payload;
    let mut acc = vec![Ring64::ZERO; first.len()];
    for s in &shares {
        if s.payload.shape() != first.shape() {
            return Err(ShareError::ShapeMismatch(
                first.shape().to_vec(),
                s.payload.shape().to_vec(),
            ));
        }
        if s.payload.cfg() != first.cfg() {
            return Err(ShareError::ConfigMismatch);
        }
        for (a, &v) in acc.iter_mut().zip(s.payload.elems()) {
            *a += v;
        }
    }
    Ok(FixedVec::new(acc, first.shape().to_vec(), first.cfg())?)
}

/// XOR-shares the raw bit patterns of `secret` (full 64-bit width).
pub fn share_bin(
    secret: &FixedVec,
    parties: usize,
    session: SessionId,
    rng: &mut impl RngCore,
) -> Result<Vec<BinShare>, ShareError> {
    let words: Vec<u64> = secret.elems().iter().map(|r| r.0).collect();
    share_bits(&words, 64, parties, session, rng)
}

pub fn share_bits(
    values: &[u64],
    width: u32,
    parties: usize,
    session: SessionId,
    rng: &mut impl RngCore,
) -> Result<Vec<BinShare>, ShareError> {
    check_parties(parties)?;
    Ok(split_xor(values, parties, width, rng)
        .into_iter()
        .enumerate()
        .map(|(party_id, bits)| BinShare {
            party_id,
            parties,
            session,
            width,
            bits,
        })
        .collect())
}

pub fn reconstruct_bin(shares: &[BinShare]) -> Result<Vec<u64>, ShareError> {
    let shares = ordered(shares, |s| (s.party_id, s.parties, s.session))?;
    let n = shares[0].bits.len();
    let mut acc = vec![0u64; n];
    for s in &shares {
        if s.bits.len() != n {
            return Err(ShareError::ShapeMismatch(vec![n], vec![s.bits.len()]));
        }
        for (a, &b) in acc.iter_mut().zip(&s.bits) {
            *a ^= b;
        }
    }
    Ok(acc)
}
