//! XOR-share protocols and arithmetic-to-binary conversion.
//!
//! Values are 64-bit patterns, one word per element ([`BinShared`]). Inside
//! the adder the words are transposed into 64 bit planes, each a packed lane
//! vector over all elements, so one AND round processes every element at once.

use super::{MpcError, PartyCtx, Shared};
use crate::dealer::{packed_words, BinTripleShare, Request, ADDER_AND_DEPTH};
use crate::ring::Ring64;

/// This party's XOR share; element `i` is the 64-bit pattern `words[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinShared {
    pub words: Vec<u64>,
}

impl BinShared {
    pub fn new(words: Vec<u64>) -> Self {
        BinShared { words }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn xor(x: &BinShared, y: &BinShared) -> Result<BinShared, MpcError> {
    if x.len() != y.len() {
        return Err(MpcError::Shape(format!("{} vs {} words", x.len(), y.len())));
    }
    Ok(BinShared {
        words: x.words.iter().zip(&y.words).map(|(a, b)| a ^ b).collect(),
    })
}

/// Bitwise AND of 64-bit patterns using the next dealt binary triple.
pub async fn and(ctx: &mut PartyCtx, x: &BinShared, y: &BinShared) -> Result<BinShared, MpcError> {
    let t = ctx.take_bin(64 * x.len())?;
    and_with(ctx, x, y, &t).await
}

pub async fn and_with(ctx: &mut PartyCtx, x: &BinShared, y: &BinShared, t: &BinTripleShare) -> Result<BinShared, MpcError> {
    if x.len() != y.len() {
        return Err(MpcError::Shape(format!("{} vs {} words", x.len(), y.len())));
    }
    let words = and_packed(ctx, &x.words, &y.words, 64 * x.len(), t).await?;
    Ok(BinShared { words })
}

/// AND over `lanes` packed bit lanes. One broadcast round.
async fn and_packed(
    ctx: &mut PartyCtx,
    x: &[u64],
    y: &[u64],
    lanes: usize,
    t: &BinTripleShare,
) -> Result<Vec<u64>, MpcError> {
    let w = packed_words(lanes);
    if x.len() != w || y.len() != w || t.lanes != lanes {
        return Err(MpcError::Shape(format!(
            "AND over {lanes} lanes with {}/{} words and a {}-lane triple",
            x.len(),
            y.len(),
            t.lanes
        )));
    }
    ctx.mark_consumed(t.id, &Request::BinAnd { lanes })?;
    let mut masked = Vec::with_capacity(2 * w);
    masked.extend(x.iter().zip(&t.a).map(|(v, a)| v ^ a));
    masked.extend(y.iter().zip(&t.b).map(|(v, b)| v ^ b));
    let all = ctx.net.broadcast("and", masked).await?;
    let mut opened = vec![0u64; 2 * w];
    for part in &all {
        if part.len() != 2 * w {
            return Err(MpcError::Transport("opened AND masks have wrong length"));
        }
        for (o, p) in opened.iter_mut().zip(part) {
            *o ^= p;
        }
    }
    let (eps, sig) = opened.split_at(w);
    let leader = ctx.is_leader();
    Ok((0..w)
        .map(|i| {
            let mut z = t.c[i] ^ (eps[i] & t.b[i]) ^ (t.a[i] & sig[i]);
            if leader {
                z ^= eps[i] & sig[i];
            }
            z
        })
        .collect())
}

/// 64 bit planes over `n` elements; plane `j` holds bit `j` of every element.
pub(crate) type Planes = Vec<Vec<u64>>;

pub(crate) fn to_planes(values: &[u64]) -> Planes {
    let w = packed_words(values.len());
    let mut planes = vec![vec![0u64; w]; 64];
    for (chunk_idx, chunk) in values.chunks(64).enumerate() {
        for (lane, &v) in chunk.iter().enumerate() {
            let mut v = v;
            while v != 0 {
                let j = v.trailing_zeros() as usize;
                planes[j][chunk_idx] |= 1u64 << lane;
                v &= v - 1;
            }
        }
    }
    planes
}

pub(crate) fn from_planes(planes: &Planes, n: usize) -> Vec<u64> {
    let mut out = vec![0u64; n];
    for (j, plane) in planes.iter().enumerate() {
        for (chunk_idx, &word) in plane.iter().enumerate() {
            let mut word = word;
            while word != 0 {
                let lane = word.trailing_zeros() as usize;
                out[chunk_idx * 64 + lane] |= 1u64 << j;
                word &= word - 1;
            }
        }
    }
    out
}

/// Ripple-carry addition of two XOR-shared plane sets, carries out of bit 63
/// dropped. Uses `carry' = ((a ^ c) & (b ^ c)) ^ c`, one AND per bit, so 63
/// sequential AND rounds.
async fn ripple_add(ctx: &mut PartyCtx, a: &Planes, b: &Planes, n: usize) -> Result<Planes, MpcError> {
    let w = packed_words(n);
    let mut carry = vec![0u64; w];
    let mut sum = Vec::with_capacity(64);
    for bit in 0..64 {
        sum.push(
            a[bit]
                .iter()
                .zip(&b[bit])
                .zip(&carry)
                .map(|((x, y), c)| x ^ y ^ c)
                .collect::<Vec<u64>>(),
        );
        if bit < ADDER_AND_DEPTH {
            let u: Vec<u64> = a[bit].iter().zip(&carry).map(|(x, c)| x ^ c).collect();
            let v: Vec<u64> = b[bit].iter().zip(&carry).map(|(y, c)| y ^ c).collect();
            let t = ctx.take_bin(n)?;
            let g = and_packed(ctx, &u, &v, n, &t).await?;
            for (c, gi) in carry.iter_mut().zip(g) {
                *c ^= gi;
            }
        }
    }
    Ok(sum)
}

/// Bit planes of the XOR sharing of `x`. Each party's additive share is
/// treated as an input held by that party alone; `P - 1` adder passes sum them.
pub(crate) async fn a2b_planes(ctx: &mut PartyCtx, x: &Shared) -> Result<Planes, MpcError> {
    let n = x.len();
    let w = packed_words(n);
    let words: Vec<u64> = x.data.iter().map(|r| r.0).collect();
    let mine = to_planes(&words);
    let zeros = || vec![vec![0u64; w]; 64];
    let mut acc = if ctx.id() == 0 { mine.clone() } else { zeros() };
    for holder in 1..ctx.parties() {
        let addend = if ctx.id() == holder { mine.clone() } else { zeros() };
        acc = ripple_add(ctx, &acc, &addend, n).await?;
    }
    Ok(acc)
}

/// Converts an additive sharing into an XOR sharing of the same 64-bit pattern.
pub async fn a2b(ctx: &mut PartyCtx, x: &Shared) -> Result<BinShared, MpcError> {
    let planes = a2b_planes(ctx, x).await?;
    Ok(BinShared {
        words: from_planes(&planes, x.len()),
    })
}

/// Additive sharing of public bits: the leader holds them, others hold zero.
pub(crate) fn public_bits(ctx: &PartyCtx, bits: &[u64], n: usize) -> Vec<Ring64> {
    (0..n)
        .map(|i| {
            if ctx.is_leader() {
                Ring64((bits[i / 64] >> (i % 64)) & 1)
            } else {
                Ring64::ZERO
            }
        })
        .collect()
}
