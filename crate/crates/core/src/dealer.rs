//! Trusted dealer for correlated randomness.
//!
//! The dealer runs before any input is shared, produces one [`PartyPool`] per
//! party and then leaves. Each pool holds that party's shares only, in
//! per-kind FIFO queues; the engine pops exactly one object per protocol step
//! and every object carries an id so a replay is caught.

use std::collections::VecDeque;
use std::fmt;

use rand::RngCore;
use thiserror::Error;

use crate::nn::spec::LayerSpec;
use crate::ring::{FixedConfig, Ring64, TruncMask};
use crate::sharing::{self, SessionId, ShareError};
use crate::wire::{self, Header, RecordKind, WireError};

/// Number of AND gates per element in one 64-bit ripple-carry addition.
pub const ADDER_AND_DEPTH: usize = 63;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RandKind {
    Beaver,
    MatrixTriple,
    BinTriple,
    DaBit,
    TruncPair,
}

impl fmt::Display for RandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RandKind::Beaver => "beaver triple",
            RandKind::MatrixTriple => "matrix triple",
            RandKind::BinTriple => "binary triple",
            RandKind::DaBit => "daBit",
            RandKind::TruncPair => "truncation pair",
        };
        f.write_str(s)
    }
}

/// Identity of one dealt object: its kind and position in the dealing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RandId {
    pub kind: RandKind,
    pub index: u64,
}

/// Shape of one requested object.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Request {
    /// Elementwise triple over `n` ring elements.
    Beaver { n: usize },
    /// `c = a * b` with `a: m x k`, `b: k x n`.
    Matrix { m: usize, k: usize, n: usize },
    /// `lanes` independent AND triples, bit-packed.
    BinAnd { lanes: usize },
    DaBit { n: usize },
    Trunc { n: usize },
}

impl Request {
    pub fn kind(&self) -> RandKind {
        match self {
            Request::Beaver { .. } => RandKind::Beaver,
            Request::Matrix { .. } => RandKind::MatrixTriple,
            Request::BinAnd { .. } => RandKind::BinTriple,
            Request::DaBit { .. } => RandKind::DaBit,
            Request::Trunc { .. } => RandKind::TruncPair,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BeaverShare {
    pub id: RandId,
    pub a: Vec<Ring64>,
    pub b: Vec<Ring64>,
    pub c: Vec<Ring64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixTripleShare {
    pub id: RandId,
    pub dims: (usize, usize, usize),
    pub a: Vec<Ring64>,
    pub b: Vec<Ring64>,
    pub c: Vec<Ring64>,
}

/// Bit-packed AND triples; lane `i` lives in bit `i % 64` of word `i / 64`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinTripleShare {
    pub id: RandId,
    pub lanes: usize,
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    pub c: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DaBitShare {
    pub id: RandId,
    pub n: usize,
    /// Packed XOR share of the random bits.
    pub bin: Vec<u64>,
    /// Additive share of the same bits as ring elements.
    pub arith: Vec<Ring64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncPairShare {
    pub id: RandId,
    pub r: Vec<Ring64>,
    pub r_shifted: Vec<Ring64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Correlated {
    Beaver(BeaverShare),
    Matrix(MatrixTripleShare),
    Bin(BinTripleShare),
    DaBit(DaBitShare),
    Trunc(TruncPairShare),
}

impl Correlated {
    pub fn id(&self) -> RandId {
        match self {
            Correlated::Beaver(t) => t.id,
            Correlated::Matrix(t) => t.id,
            Correlated::Bin(t) => t.id,
            Correlated::DaBit(t) => t.id,
            Correlated::Trunc(t) => t.id,
        }
    }

    pub fn request(&self) -> Request {
        match self {
            Correlated::Beaver(t) => Request::Beaver { n: t.a.len() },
            Correlated::Matrix(t) => Request::Matrix {
                m: t.dims.0,
                k: t.dims.1,
                n: t.dims.2,
            },
            Correlated::Bin(t) => Request::BinAnd { lanes: t.lanes },
            Correlated::DaBit(t) => Request::DaBit { n: t.n },
            Correlated::Trunc(t) => Request::Trunc { n: t.r.len() },
        }
    }
}

#[inline]
pub fn packed_words(lanes: usize) -> usize {
    lanes.div_ceil(64)
}

/// Mask for the valid bits of the last word of a packed lane vector.
pub fn tail_mask(lanes: usize) -> u64 {
    match lanes % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

fn random_packed(lanes: usize, rng: &mut impl RngCore) -> Vec<u64> {
    let mut v: Vec<u64> = (0..packed_words(lanes)).map(|_| rng.next_u64()).collect();
    if let Some(last) = v.last_mut() {
        *last &= tail_mask(lanes);
    }
    v
}

fn random_ring(n: usize, rng: &mut impl RngCore) -> Vec<Ring64> {
    (0..n).map(|_| Ring64(rng.next_u64())).collect()
}

/// Row-major ring matrix product, `a: m x k`, `b: k x n`.
pub fn ring_matmul(a: &[Ring64], b: &[Ring64], m: usize, k: usize, n: usize) -> Vec<Ring64> {
    let mut c = vec![0u64; m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p].0;
            if av == 0 {
                continue;
            }
            for (cv, bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *cv = cv.wrapping_add(av.wrapping_mul(bv.0));
            }
        }
    }
    c.into_iter().map(Ring64).collect()
}

/// Deals one object of shape `req` to `parties` parties; returns one share per party.
pub fn deal_one(
    req: Request,
    index: u64,
    parties: usize,
    cfg: FixedConfig,
    rng: &mut impl RngCore,
) -> Vec<Correlated> {
    let id = RandId {
        kind: req.kind(),
        index,
    };
    match req {
        Request::Beaver { n } => {
            let a = random_ring(n, rng);
            let b = random_ring(n, rng);
            let c: Vec<Ring64> = a.iter().zip(&b).map(|(&x, &y)| x * y).collect();
            let (sa, sb, sc) = (
                sharing::split_additive(&a, parties, rng),
                sharing::split_additive(&b, parties, rng),
                sharing::split_additive(&c, parties, rng),
            );
            zip3(sa, sb, sc)
                .map(|(a, b, c)| Correlated::Beaver(BeaverShare { id, a, b, c }))
                .collect()
        }
        Request::Matrix { m, k, n } => {
            let a = random_ring(m * k, rng);
            let b = random_ring(k * n, rng);
            let c = ring_matmul(&a, &b, m, k, n);
            let (sa, sb, sc) = (
                sharing::split_additive(&a, parties, rng),
                sharing::split_additive(&b, parties, rng),
                sharing::split_additive(&c, parties, rng),
            );
            zip3(sa, sb, sc)
                .map(|(a, b, c)| {
                    Correlated::Matrix(MatrixTripleShare {
                        id,
                        dims: (m, k, n),
                        a,
                        b,
                        c,
                    })
                })
                .collect()
        }
        Request::BinAnd { lanes } => {
            let a = random_packed(lanes, rng);
            let b = random_packed(lanes, rng);
            let c: Vec<u64> = a.iter().zip(&b).map(|(x, y)| x & y).collect();
            let (sa, sb, sc) = (split_packed(&a, parties, lanes, rng), split_packed(&b, parties, lanes, rng), split_packed(&c, parties, lanes, rng));
            zip3(sa, sb, sc)
                .map(|(a, b, c)| Correlated::Bin(BinTripleShare { id, lanes, a, b, c }))
                .collect()
        }
        Request::DaBit { n } => {
            let bits = random_packed(n, rng);
            let as_ring: Vec<Ring64> = (0..n).map(|i| Ring64((bits[i / 64] >> (i % 64)) & 1)).collect();
            let sb = split_packed(&bits, parties, n, rng);
            let sa = sharing::split_additive(&as_ring, parties, rng);
            sb.into_iter()
                .zip(sa)
                .map(|(bin, arith)| Correlated::DaBit(DaBitShare { id, n, bin, arith }))
                .collect()
        }
        Request::Trunc { n } => {
            let masks: Vec<TruncMask> = (0..n).map(|_| TruncMask::new(rng.next_u64(), cfg)).collect();
            let r: Vec<Ring64> = masks.iter().map(|m| m.r).collect();
            let rs: Vec<Ring64> = masks.iter().map(|m| m.r_shifted).collect();
            let sr = sharing::split_additive(&r, parties, rng);
            let srs = sharing::split_additive(&rs, parties, rng);
            sr.into_iter()
                .zip(srs)
                .map(|(r, r_shifted)| Correlated::Trunc(TruncPairShare { id, r, r_shifted }))
                .collect()
        }
    }
}

fn split_packed(words: &[u64], parties: usize, lanes: usize, rng: &mut impl RngCore) -> Vec<Vec<u64>> {
    let mut shares = sharing::split_xor(words, parties, 64, rng);
    for s in &mut shares {
        if let Some(last) = s.last_mut() {
            *last &= tail_mask(lanes);
        }
    }
    shares
}

fn zip3<A, B, C>(a: Vec<A>, b: Vec<B>, c: Vec<C>) -> impl Iterator<Item = (A, B, C)> {
    a.into_iter().zip(b).zip(c).map(|((a, b), c)| (a, b, c))
}

/// Totals per randomness kind. `bin_triples` counts AND lanes; `beaver`,
/// `dabits` and `trunc_pairs` count elements; `matrix_triples` counts objects.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BudgetCounts {
    pub beaver: usize,
    pub matrix_triples: usize,
    pub bin_triples: usize,
    pub dabits: usize,
    pub trunc_pairs: usize,
}

impl BudgetCounts {
    pub fn add_request(&mut self, req: &Request) {
        match *req {
            Request::Beaver { n } => self.beaver += n,
            Request::Matrix { .. } => self.matrix_triples += 1,
            Request::BinAnd { lanes } => self.bin_triples += lanes,
            Request::DaBit { n } => self.dabits += n,
            Request::Trunc { n } => self.trunc_pairs += n,
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == BudgetCounts::default()
    }
}

/// Ordered list of objects needed by one protocol run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Budget {
    pub requests: Vec<Request>,
}

impl Budget {
    pub fn counts(&self) -> BudgetCounts {
        let mut c = BudgetCounts::default();
        for r in &self.requests {
            c.add_request(r);
        }
        c
    }

    pub fn push(&mut self, req: Request) {
        self.requests.push(req);
    }

    pub fn extend(&mut self, other: &Budget) {
        self.requests.extend_from_slice(&other.requests);
    }

    /// Requirements of a 64-bit sign test over `n` elements.
    pub fn sign_test(&mut self, n: usize, parties: usize) {
        for _ in 0..(parties - 1) * ADDER_AND_DEPTH {
            self.push(Request::BinAnd { lanes: n });
        }
        self.push(Request::DaBit { n });
    }

    pub fn relu(&mut self, n: usize, parties: usize) {
        self.sign_test(n, parties);
        self.push(Request::Beaver { n });
    }

    pub fn argmax(&mut self, rows: usize, width: usize, parties: usize) {
        for _ in 1..width {
            self.sign_test(rows, parties);
            self.push(Request::Beaver { n: 2 * rows });
        }
    }
}

/// Whether layer weights are public or secret-shared during a secure forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightMode {
    Public,
    Shared,
}

/// Exact randomness consumed by one secure forward pass of `circuit` over a
/// batch of `batch` rows, optionally followed by an argmax reveal.
pub fn budget_estimate(
    circuit: &[LayerSpec],
    batch: usize,
    parties: usize,
    weights: WeightMode,
    argmax: bool,
) -> Budget {
    let mut budget = Budget::default();
    if circuit.is_empty() {
        return budget;
    }
    for layer in circuit {
        match *layer {
            LayerSpec::Linear { inputs, outputs } => {
                if weights == WeightMode::Shared {
                    budget.push(Request::Matrix {
                        m: batch,
                        k: inputs,
                        n: outputs,
                    });
                }
                budget.push(Request::Trunc { n: batch * outputs });
            }
            LayerSpec::Conv { out_channels, .. } => {
                let (oh, ow) = layer.conv_out_hw().unwrap();
                let (_, cols) = layer.weight_shape().unwrap();
                if weights == WeightMode::Shared {
                    budget.push(Request::Matrix {
                        m: batch * oh * ow,
                        k: cols,
                        n: out_channels,
                    });
                }
                budget.push(Request::Trunc {
                    n: batch * out_channels * oh * ow,
                });
            }
            LayerSpec::Relu { width } => budget.relu(batch * width, parties),
        }
    }
    if argmax {
        let width = circuit.last().map(|l| l.output_len()).unwrap_or(0);
        budget.argmax(batch, width, parties);
    }
    budget
}

#[derive(Debug, Error, PartialEq)]
pub enum DealerError {
    #[error(transparent)]
    Share(#[from] ShareError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("pool file malformed: {0}")]
    Malformed(&'static str),
}

/// One party's dealt randomness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartyPool {
    pub party_id: usize,
    pub parties: usize,
    pub session: SessionId,
    pub cfg: FixedConfig,
    queues: [VecDeque<Correlated>; 5],
}

fn slot(kind: RandKind) -> usize {
    match kind {
        RandKind::Beaver => 0,
        RandKind::MatrixTriple => 1,
        RandKind::BinTriple => 2,
        RandKind::DaBit => 3,
        RandKind::TruncPair => 4,
    }
}

impl PartyPool {
    pub fn empty(party_id: usize, parties: usize, session: SessionId, cfg: FixedConfig) -> Self {
        PartyPool {
            party_id,
            parties,
            session,
            cfg,
            queues: Default::default(),
        }
    }

    pub fn push(&mut self, item: Correlated) {
        self.queues[slot(item.id().kind)].push_back(item);
    }

    /// Next unconsumed object of `kind`.
    pub fn pop(&mut self, kind: RandKind) -> Option<Correlated> {
        self.queues[slot(kind)].pop_front()
    }

    /// What is still left in the pool.
    pub fn remaining(&self) -> BudgetCounts {
        let mut c = BudgetCounts::default();
        for q in &self.queues {
            for item in q {
                c.add_request(&item.request());
            }
        }
        c
    }

    pub fn items(&self) -> impl Iterator<Item = &Correlated> {
        self.queues.iter().flatten()
    }

    /// Binary dump, one record per object, preceded by a pool header.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let header = |kind, dims: Vec<u64>| Header {
            kind,
            frac_bits: self.cfg.frac_bits() as u8,
            session: self.session.0,
            party_id: self.party_id as u16,
            parties: self.parties as u16,
            width: 64,
            dims,
        };
        let total = self.items().count() as u64;
        wire::write_record(&mut out, &header(RecordKind::PoolHeader, vec![total]), &[]);
        for item in self.items() {
            let index = item.id().index;
            let (kind, dims, words): (RecordKind, Vec<u64>, Vec<u64>) = match item {
                Correlated::Beaver(t) => (
                    RecordKind::BeaverTriple,
                    vec![index, t.a.len() as u64],
                    concat_ring(&[&t.a, &t.b, &t.c]),
                ),
                Correlated::Matrix(t) => (
                    RecordKind::MatrixTriple,
                    vec![index, t.dims.0 as u64, t.dims.1 as u64, t.dims.2 as u64],
                    concat_ring(&[&t.a, &t.b, &t.c]),
                ),
                Correlated::Bin(t) => (
                    RecordKind::BinTriple,
                    vec![index, t.lanes as u64],
                    [&t.a[..], &t.b[..], &t.c[..]].concat(),
                ),
                Correlated::DaBit(t) => (
                    RecordKind::DaBit,
                    vec![index, t.n as u64],
                    [t.bin.clone(), t.arith.iter().map(|r| r.0).collect()].concat(),
                ),
                Correlated::Trunc(t) => (
                    RecordKind::TruncPair,
                    vec![index, t.r.len() as u64],
                    concat_ring(&[&t.r, &t.r_shifted]),
                ),
            };
            wire::write_record(&mut out, &header(kind, dims), &words);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, DealerError> {
        let mut reader = wire::Reader::new(buf);
        let (h, _) = reader.read_record()?;
        if h.kind != RecordKind::PoolHeader || h.dims.len() != 1 {
            return Err(DealerError::Malformed("missing pool header"));
        }
        let cfg = FixedConfig::new(h.frac_bits as u32).map_err(ShareError::from)?;
        let mut pool = PartyPool::empty(h.party_id as usize, h.parties as usize, SessionId(h.session), cfg);
        for _ in 0..h.dims[0] {
            let (rh, words) = reader.read_record()?;
            if rh.session != h.session || rh.party_id != h.party_id {
                return Err(DealerError::Malformed("record from another pool"));
            }
            let dim = |i: usize| rh.dims.get(i).copied().map(|d| d as usize).ok_or(DealerError::Malformed("dims"));
            let index = dim(0)? as u64;
            let ring = |s: &[u64]| s.iter().map(|&w| Ring64(w)).collect::<Vec<_>>();
            let item = match rh.kind {
                RecordKind::BeaverTriple => {
                    let n = dim(1)?;
                    check_len(&words, 3 * n)?;
                    Correlated::Beaver(BeaverShare {
                        id: RandId {
                            kind: RandKind::Beaver,
                            index,
                        },
                        a: ring(&words[..n]),
                        b: ring(&words[n..2 * n]),
                        c: ring(&words[2 * n..]),
                    })
                }
                RecordKind::MatrixTriple => {
                    let (m, k, n) = (dim(1)?, dim(2)?, dim(3)?);
                    check_len(&words, m * k + k * n + m * n)?;
                    Correlated::Matrix(MatrixTripleShare {
                        id: RandId {
                            kind: RandKind::MatrixTriple,
                            index,
                        },
                        dims: (m, k, n),
                        a: ring(&words[..m * k]),
                        b: ring(&words[m * k..m * k + k * n]),
                        c: ring(&words[m * k + k * n..]),
                    })
                }
                RecordKind::BinTriple => {
                    let lanes = dim(1)?;
                    let w = packed_words(lanes);
                    check_len(&words, 3 * w)?;
                    Correlated::Bin(BinTripleShare {
                        id: RandId {
                            kind: RandKind::BinTriple,
                            index,
                        },
                        lanes,
                        a: words[..w].to_vec(),
                        b: words[w..2 * w].to_vec(),
                        c: words[2 * w..].to_vec(),
                    })
                }
                RecordKind::DaBit => {
                    let n = dim(1)?;
                    let w = packed_words(n);
                    check_len(&words, w + n)?;
                    Correlated::DaBit(DaBitShare {
                        id: RandId {
                            kind: RandKind::DaBit,
                            index,
                        },
                        n,
                        bin: words[..w].to_vec(),
                        arith: ring(&words[w..]),
                    })
                }
                RecordKind::TruncPair => {
                    let n = dim(1)?;
                    check_len(&words, 2 * n)?;
                    Correlated::Trunc(TruncPairShare {
                        id: RandId {
                            kind: RandKind::TruncPair,
                            index,
                        },
                        r: ring(&words[..n]),
                        r_shifted: ring(&words[n..]),
                    })
                }
                _ => return Err(DealerError::Malformed("unexpected record kind")),
            };
            pool.push(item);
        }
        if !reader.is_empty() {
            return Err(DealerError::Malformed("trailing bytes"));
        }
        Ok(pool)
    }
}

fn check_len(words: &[u64], expected: usize) -> Result<(), DealerError> {
    if words.len() == expected {
        Ok(())
    } else {
        Err(DealerError::Malformed("payload length"))
    }
}

fn concat_ring(parts: &[&[Ring64]]) -> Vec<u64> {
    parts.iter().flat_map(|p| p.iter().map(|r| r.0)).collect()
}

/// Deals every request in `budget`, in order, returning one pool per party.
pub fn deal(
    budget: &Budget,
    parties: usize,
    session: SessionId,
    cfg: FixedConfig,
    rng: &mut impl RngCore,
) -> Result<Vec<PartyPool>, DealerError> {
    sharing::check_parties(parties)?;
    let mut pools: Vec<PartyPool> = (0..parties).map(|p| PartyPool::empty(p, parties, session, cfg)).collect();
    let mut next_index = [0u64; 5];
    for req in &budget.requests {
        let s = slot(req.kind());
        let shares = deal_one(*req, next_index[s], parties, cfg, rng);
        next_index[s] += 1;
        for (pool, item) in pools.iter_mut().zip(shares) {
            pool.push(item);
        }
    }
    Ok(pools)
}

/// `count` objects of one shape, one share-vector per object.
pub fn deal_triples(
    req: Request,
    count: usize,
    parties: usize,
    cfg: FixedConfig,
    rng: &mut impl RngCore,
) -> Result<Vec<Vec<Correlated>>, DealerError> {
    sharing::check_parties(parties)?;
    Ok((0..count as u64).map(|i| deal_one(req, i, parties, cfg, rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec;
    use crate::rng;

    fn sum_ring(parts: impl Iterator<Item = Vec<Ring64>>) -> Vec<Ring64> {
        parts
            .reduce(|acc, v| acc.iter().zip(&v).map(|(&a, &b)| a + b).collect())
            .unwrap()
    }

    fn xor_words(parts: impl Iterator<Item = Vec<u64>>) -> Vec<u64> {
        parts.reduce(|acc, v| acc.iter().zip(&v).map(|(a, b)| a ^ b).collect()).unwrap()
    }

    #[test]
    fn beaver_triples_are_exact() {
        let mut r = rng::stream(1, 0);
        let dealt = deal_triples(Request::Beaver { n: 100 }, 100, 3, FixedConfig::default(), &mut r).unwrap();
        for shares in dealt {
            let get = |f: fn(&BeaverShare) -> &Vec<Ring64>| {
                sum_ring(shares.iter().map(|s| match s {
                    Correlated::Beaver(t) => f(t).clone(),
                    _ => unreachable!(),
                }))
            };
            let (a, b, c) = (get(|t| &t.a), get(|t| &t.b), get(|t| &t.c));
            for i in 0..100 {
                assert_eq!(c[i], a[i] * b[i]);
            }
        }
    }

    #[test]
    fn matrix_triples_are_exact() {
        let mut r = rng::stream(2, 0);
        let shares = deal_one(Request::Matrix { m: 3, k: 4, n: 2 }, 0, 2, FixedConfig::default(), &mut r);
        let parts: Vec<&MatrixTripleShare> = shares
            .iter()
            .map(|s| match s {
                Correlated::Matrix(t) => t,
                _ => unreachable!(),
            })
            .collect();
        let a = sum_ring(parts.iter().map(|t| t.a.clone()));
        let b = sum_ring(parts.iter().map(|t| t.b.clone()));
        let c = sum_ring(parts.iter().map(|t| t.c.clone()));
        for i in 0..3 {
            for j in 0..2 {
                let want: Ring64 = (0..4).map(|p| a[i * 4 + p] * b[p * 2 + j]).sum();
                assert_eq!(c[i * 2 + j], want);
            }
        }
    }

    #[test]
    fn binary_triples_and_dabits_are_exact() {
        let mut r = rng::stream(3, 0);
        let cfg = FixedConfig::default();
        for shares in deal_triples(Request::BinAnd { lanes: 130 }, 50, 5, cfg, &mut r).unwrap() {
            let parts: Vec<&BinTripleShare> = shares
                .iter()
                .map(|s| match s {
                    Correlated::Bin(t) => t,
                    _ => unreachable!(),
                })
                .collect();
            let a = xor_words(parts.iter().map(|t| t.a.clone()));
            let b = xor_words(parts.iter().map(|t| t.b.clone()));
            let c = xor_words(parts.iter().map(|t| t.c.clone()));
            assert_eq!(a.len(), 3);
            for w in 0..3 {
                assert_eq!(c[w], a[w] & b[w]);
            }
            assert_eq!(a[2] >> 2, 0);
        }
        for shares in deal_triples(Request::DaBit { n: 200 }, 50, 2, cfg, &mut r).unwrap() {
            let parts: Vec<&DaBitShare> = shares
                .iter()
                .map(|s| match s {
                    Correlated::DaBit(t) => t,
                    _ => unreachable!(),
                })
                .collect();
            let bits = xor_words(parts.iter().map(|t| t.bin.clone()));
            let arith = sum_ring(parts.iter().map(|t| t.arith.clone()));
            for i in 0..200 {
                let bit = (bits[i / 64] >> (i % 64)) & 1;
                assert!(arith[i].0 <= 1);
                assert_eq!(arith[i].0, bit);
            }
        }
    }

    #[test]
    fn trunc_pairs_relation_holds() {
        let mut r = rng::stream(4, 0);
        let cfg = FixedConfig::default();
        let shares = deal_one(Request::Trunc { n: 500 }, 0, 2, cfg, &mut r);
        let parts: Vec<&TruncPairShare> = shares
            .iter()
            .map(|s| match s {
                Correlated::Trunc(t) => t,
                _ => unreachable!(),
            })
            .collect();
        let rr = sum_ring(parts.iter().map(|t| t.r.clone()));
        let rs = sum_ring(parts.iter().map(|t| t.r_shifted.clone()));
        for i in 0..500 {
            assert!(rr[i].0 < 1 << 63);
            assert_eq!(rs[i].0, rr[i].0 >> 16);
        }
    }

    #[test]
    fn budget_examples() {
        let lin = [LayerSpec::linear(288, 128)];
        let b = budget_estimate(&lin, 7, 2, WeightMode::Shared, false);
        assert_eq!(b.requests, vec![Request::Matrix { m: 7, k: 288, n: 128 }, Request::Trunc { n: 7 * 128 }]);
        assert!(budget_estimate(&[], 100, 5, WeightMode::Public, true).counts().is_zero());
        for parties in [2, 5] {
            let relu = [LayerSpec::Relu { width: 10 }];
            let c = budget_estimate(&relu, 3, parties, WeightMode::Public, false).counts();
            assert_eq!(c.bin_triples, (parties - 1) * 30 * 63);
            assert_eq!(c.dabits, 30);
            assert_eq!(c.beaver, 30);
            assert_eq!(c.trunc_pairs, 0);
        }
        let g = budget_estimate(&spec::action_classifier(), 1, 2, WeightMode::Public, true).counts();
        assert_eq!(g.trunc_pairs, 128 + 64 + 16 + 5);
        assert_eq!(g.dabits, 128 + 64 + 16 + 4);
        assert_eq!(g.beaver, 128 + 64 + 16 + 4 * 2);
    }

    #[test]
    fn pool_dump_round_trip() {
        let mut r = rng::stream(5, 0);
        let cfg = FixedConfig::default();
        let mut budget = budget_estimate(&spec::mlp(&[3, 4, 2]), 2, 3, WeightMode::Shared, true);
        budget.push(Request::Beaver { n: 3 });
        let pools = deal(&budget, 3, SessionId(42), cfg, &mut r).unwrap();
        for pool in &pools {
            let back = PartyPool::from_bytes(&pool.to_bytes()).unwrap();
            assert_eq!(&back, pool);
            assert_eq!(back.remaining(), budget.counts());
        }
        let bytes = pools[0].to_bytes();
        assert!(PartyPool::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
